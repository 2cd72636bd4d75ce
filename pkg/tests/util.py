"""Shared builders for the test suite."""

from mrbsde import (
    BoundarySpec,
    DriverSpec,
    KappaSpec,
    ObstacleCurve,
    ProblemSpec,
    TerminalSpec,
)


def zero_problem(obstacle=None, terminal=None, boundary=None, driver=None, kappa=None, **kw):
    """Drift-free scalar problem with a standard-normal terminal draw."""
    kw.setdefault("brownian_dim", 1)
    kw.setdefault("horizon", 1.0)
    return ProblemSpec(
        driver=driver or DriverSpec("zero"),
        boundary=boundary or BoundarySpec("zero", beta=-1.0),
        terminal=terminal or TerminalSpec("direct-sampler", mean=0.0, std=1.0, declared_mean=0.0),
        obstacle=obstacle or ObstacleCurve("constant", value=-1.0),
        kappa=kappa or KappaSpec("zero"),
        **kw,
    )

"""Measurable counterparts of the convergence and stability estimates.

Rates are asserted as log-log slope inequalities with explicit slack,
never as equalities: the theory gives one-sided bounds and actual decay is
often faster. The a-priori ratio is tracked without a threshold because
its constant is existence-theoretic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, NonPositiveError
from .mollify import SmoothObstacle
from .paths import ForwardCloud
from .penalized import PenalizedSolution, RegressionBasis, solve_penalized
from .problem import DriverSpec, ProblemSpec, eval_driver


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (log level, log error)."""

    levels: tuple
    errors: tuple
    slope: float
    intercept: float
    r_squared: float


def rate_fit(levels, errors) -> RateFit:
    """Fit log(error) against log(level); exact on power-law data."""
    levels = np.asarray(levels, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if levels.shape != errors.shape or levels.ndim != 1:
        raise LengthMismatch(f"levels {levels.shape} and errors {errors.shape} must match")
    if levels.size < 3:
        raise ValueError(f"need at least 3 levels, got {levels.size}")
    if np.any(errors <= 0.0):
        raise NonPositiveError("errors must be strictly positive to fit; level converged below noise floor")
    x = np.log(levels)
    y = np.log(errors)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(tuple(levels), tuple(errors), float(slope), float(intercept), r2)


def deficit_metrics(
    solution: PenalizedSolution, u_k: SmoothObstacle, mean_kappa: np.ndarray
) -> tuple[float, float]:
    """Sup and weighted-integral squares of the mean path's obstacle deficit.

    Returns (sup_j |y^-(t_j)|^2, sum_j |y^-(t_j)|^2 (dt + d mean_kappa_j)).
    Both range over the left-endpoint nodes j < N, the nodes the penalty
    measure touches: the terminal node carries the raw terminal-vs-obstacle
    datum, which no penalty level can move and which the bound under test
    has zero by its terminal condition.
    """
    mean_kappa = np.asarray(mean_kappa, dtype=float)
    if u_k.values.shape != solution.mean_path.shape or mean_kappa.shape != solution.mean_path.shape:
        raise LengthMismatch("solution, obstacle and mean_kappa must share the grid")
    neg = np.maximum(u_k.values[:-1] - solution.mean_path[:-1], 0.0)
    weights = solution.grid.dt + np.diff(mean_kappa)
    sup_sq = float(np.max(neg**2))
    integral_sq = float(np.sum(neg**2 * weights))
    return sup_sq, integral_sq


@dataclass(frozen=True)
class StabilityRow:
    epsilon: float
    sup_mean_sq_dy: float
    integral_mean_sq_dz: float


def _perturb_driver(driver: DriverSpec, eps: float) -> DriverSpec:
    if driver.family == "zero":
        return DriverSpec("affine", {"const": eps}, lipschitz_L_f=driver.lipschitz_L_f)
    if driver.family == "affine":
        coeffs = dict(driver.coefficients)
        coeffs["const"] = coeffs.get("const", 0.0) + eps
        return DriverSpec("affine", coeffs, lipschitz_L_f=driver.lipschitz_L_f)
    raise ValueError(f"driver perturbation not supported for family {driver.family!r}")


def stability_experiment(
    spec: ProblemSpec,
    grid,
    cloud: ForwardCloud,
    perturbations,
    u_k: SmoothObstacle,
    n: float,
    basis: RegressionBasis,
    perturb: str = "terminal",
) -> tuple[StabilityRow, ...]:
    """Measure the solution shift under terminal (or driver) perturbations.

    Each epsilon pairs the base run with a perturbed run on the same cloud
    (common random numbers), so the reported differences isolate the
    perturbation. Rows are sorted by epsilon.
    """
    if perturb not in ("terminal", "driver"):
        raise ValueError(f"perturb must be 'terminal' or 'driver', got {perturb!r}")
    eps_list = sorted(float(e) for e in perturbations)
    if len(set(eps_list)) != len(eps_list):
        raise ValueError("perturbation values must be distinct")

    base = solve_penalized(spec, u_k, n, cloud, basis)
    dt = grid.dt
    rows = []
    for eps in eps_list:
        if perturb == "terminal":
            pert = solve_penalized(spec, u_k, n, cloud.with_terminal(cloud.xi + eps), basis)
        else:
            pspec = ProblemSpec(
                driver=_perturb_driver(spec.driver, eps),
                boundary=spec.boundary,
                terminal=spec.terminal,
                obstacle=spec.obstacle,
                kappa=spec.kappa,
                brownian_dim=spec.brownian_dim,
                horizon=spec.horizon,
                forward=spec.forward,
            )
            pert = solve_penalized(pspec, u_k, n, cloud, basis)
        dY = pert.Y - base.Y
        dZ = pert.Z - base.Z
        rows.append(
            StabilityRow(
                epsilon=eps,
                sup_mean_sq_dy=float(np.max(np.mean(dY**2, axis=1))),
                integral_mean_sq_dz=float(
                    np.sum(np.mean(np.sum(dZ[:-1] ** 2, axis=2), axis=1)) * dt
                ),
            )
        )
    return tuple(rows)


@dataclass(frozen=True)
class AprioriReport:
    """Both sides of the a-priori energy inequality, tracked without a threshold."""

    sup_mean_sq_y: float
    integral_mean_sq_z: float
    terminal_sq: float
    integral_f_origin_sq: float
    integral_psi_sq_dkappa: float
    compensator_terminal_sq: float
    ratio: float
    degenerate: bool

    @property
    def lhs(self) -> float:
        return self.sup_mean_sq_y + self.integral_mean_sq_z

    @property
    def rhs(self) -> float:
        return (
            self.terminal_sq
            + self.integral_f_origin_sq
            + self.integral_psi_sq_dkappa
            + self.compensator_terminal_sq
        )


def apriori_report(solution: PenalizedSolution, spec: ProblemSpec, cloud: ForwardCloud) -> AprioriReport:
    """Sample both sides of the energy bound; the ratio is a regression metric."""
    grid = solution.grid
    dt = grid.dt
    times = grid.times
    d = cloud.d

    sup_y2 = float(np.max(np.mean(solution.Y**2, axis=1)))
    int_z2 = float(np.sum(np.mean(np.sum(solution.Z[:-1] ** 2, axis=2), axis=1)) * dt)
    e_xi2 = float(np.mean(cloud.xi**2))
    f0 = eval_driver(
        spec.driver, times[:-1], np.zeros(grid.N), np.zeros((grid.N, d)), 0.0, np.zeros(d)
    )
    int_f0 = float(np.sum(np.asarray(f0) ** 2) * dt)
    int_psi = float(spec.boundary.psi**2 * cloud.mean_kappa[-1])
    k_t2 = float(solution.K[-1] ** 2)

    rhs = e_xi2 + int_f0 + int_psi + k_t2
    lhs = sup_y2 + int_z2
    degenerate = rhs == 0.0
    ratio = float("nan") if degenerate else lhs / rhs
    return AprioriReport(
        sup_mean_sq_y=sup_y2,
        integral_mean_sq_z=int_z2,
        terminal_sq=e_xi2,
        integral_f_origin_sq=int_f0,
        integral_psi_sq_dkappa=int_psi,
        compensator_terminal_sq=k_t2,
        ratio=ratio,
        degenerate=degenerate,
    )

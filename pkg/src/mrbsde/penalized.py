"""Backward-Euler particle scheme for the unconstrained penalized equation.

One backward step estimates the conditional expectation and the martingale
integrand by least-squares projection on a polynomial basis, applies the
driver and boundary terms explicitly, and then enforces the penalty
implicitly at the mean level through a closed-form root. The implicit
penalty is what removes any n * dt stability restriction: the level n can
grow without bound at a fixed grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, NonFinite, RankDeficient
from .mollify import SmoothObstacle
from .paths import ForwardCloud, TimeGrid, empirical_moments
from .problem import ProblemSpec, eval_boundary, eval_driver

_COND_LIMIT = 1e12
_COND_FUDGE_AT = 1e10
_TIKHONOV_REL = 1e-10


@dataclass(frozen=True)
class RegressionBasis:
    """Polynomial regression basis for conditional expectations.

    kind 'forward' uses the forward state, 'brownian' the current Brownian
    position (all coordinates), 'constant' an intercept only. Every kind
    includes the intercept, so projections reproduce constants exactly and
    fitted values always average to the target mean.
    """

    kind: str = "brownian"
    degree: int = 2

    def __post_init__(self):
        if self.kind not in ("constant", "forward", "brownian"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")


def build_design(features: np.ndarray | None, basis: RegressionBasis) -> np.ndarray:
    """Design matrix: intercept plus per-coordinate powers 1..degree."""
    if basis.kind == "constant" or basis.degree == 0:
        if features is None:
            raise ValueError("constant basis still needs the particle count via features")
        m = features.shape[0]
        return np.ones((m, 1))
    feats = np.asarray(features, dtype=float)
    if feats.ndim == 1:
        feats = feats[:, None]
    m, d = feats.shape
    cols = [np.ones(m)]
    for c in range(d):
        p = feats[:, c]
        acc = p
        for _ in range(basis.degree):
            cols.append(acc)
            acc = acc * p
    return np.column_stack(cols)


def _solve_regularized(design: np.ndarray, targets: np.ndarray):
    """Normal equations, with a fixed relative Tikhonov fudge on near-singular Grams."""
    gram = design.T @ design
    n_basis = gram.shape[0]
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > _COND_FUDGE_AT:
        gram = gram + (_TIKHONOV_REL * np.trace(gram) / n_basis) * np.eye(n_basis)
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise RankDeficient(f"regularized Gram condition {cond:.3g} exceeds {_COND_LIMIT:.0e}")
    coef = np.linalg.solve(gram, design.T @ targets)
    return design @ coef, coef


def regress_conditional(targets: np.ndarray, features: np.ndarray | None, basis: RegressionBasis):
    """Least-squares Monte Carlo estimate of a conditional expectation.

    Returns the fitted values in particle order and the coefficient vector.
    """
    targets = np.asarray(targets, dtype=float)
    if features is not None and np.asarray(features).shape[0] != targets.shape[0]:
        raise LengthMismatch("targets and features disagree on particle count")
    design = build_design(
        features if features is not None else np.empty((targets.shape[0], 0)), basis
    )
    if targets.shape[0] <= design.shape[1]:
        raise ValueError(
            f"need more particles ({targets.shape[0]}) than basis functions ({design.shape[1]})"
        )
    return _solve_regularized(design, targets)


def implicit_mean_penalty(p_val: float, u_val: float, n: float, delta: float) -> float:
    """Root of x = p_val + n * delta * (x - u_val)^-.

    The map is strictly increasing in x so the root is unique: p_val itself
    when the constraint is slack, otherwise the weighted average
    (p_val + n * delta * u_val) / (1 + n * delta), which saturates at u_val
    as n * delta grows.
    """
    if n < 0 or delta < 0:
        raise ValueError("n and delta must be >= 0")
    if p_val >= u_val:
        return float(p_val)
    return float((p_val + n * delta * u_val) / (1.0 + n * delta))


def penalty_increment(mean_after_step: float, u_val: float, n: float, delta: float) -> float:
    """Discrete compensator increment n * (mean - u)^- * delta."""
    return float(n * max(u_val - mean_after_step, 0.0) * delta)


@dataclass(frozen=True)
class PenalizedSolution:
    """Output of one penalized backward pass at levels (n, k).

    Z is stored on the full grid with the terminal row copied from the last
    regression step (no increment exists beyond T). ``mean_f_dt`` and
    ``mean_g_dkappa`` keep the per-step sample means of the driver and
    boundary contributions exactly as the scheme evaluated them, which is
    what makes the compensator recoverable to round-off from the mean path.
    """

    n: float
    k: int
    grid: TimeGrid
    Y: np.ndarray  # (N+1, M)
    Z: np.ndarray  # (N+1, M, d)
    mean_path: np.ndarray  # (N+1,)
    K: np.ndarray  # (N+1,)
    mean_f_dt: np.ndarray  # (N,)
    mean_g_dkappa: np.ndarray  # (N,)
    residual_y: np.ndarray  # (N,) rms regression residual of the value target
    residual_z: np.ndarray  # (N,) rms regression residual of the integrand targets
    z_target_std: np.ndarray  # (N, d) sample std of the integrand targets

    @property
    def dK(self) -> np.ndarray:
        return np.diff(self.K)


def _features_at(cloud: ForwardCloud, basis: RegressionBasis, j: int):
    if basis.kind == "forward":
        if cloud.forward_state is None:
            raise ValueError("forward basis requested but the cloud has no forward state")
        return cloud.forward_state[:, j]
    if basis.kind == "brownian":
        return cloud.brownian[:, j, :]
    return np.empty((cloud.M, 0))


def solve_penalized(
    spec: ProblemSpec,
    u_k: SmoothObstacle,
    n: float,
    cloud: ForwardCloud,
    basis: RegressionBasis,
) -> PenalizedSolution:
    """Run the backward induction from Y(T) = xi down to t = 0.

    Per step j: project Y_{j+1} * dB_j / dt and Y_{j+1} on the basis to get
    the integrand and the conditional mean, take the law moments from the
    step-(j+1) cloud, apply f and g explicitly at the conditional mean, and
    shift every particle by the implicit mean-level penalty increment. K is
    deterministic, so the shift is common to all particles.
    """
    grid = cloud.grid
    if u_k.grid != grid:
        raise LengthMismatch("smooth obstacle grid does not match the cloud grid")
    N, M, d, dt = grid.N, cloud.M, cloud.d, grid.dt
    times = grid.times

    Y = np.empty((N + 1, M))
    Z = np.zeros((N + 1, M, d))
    Y[N] = cloud.xi
    dK = np.zeros(N)
    mean_f_dt = np.zeros(N)
    mean_g_dkappa = np.zeros(N)
    residual_y = np.zeros(N)
    residual_z = np.zeros(N)
    z_target_std = np.zeros((N, d))

    for j in range(N - 1, -1, -1):
        design = build_design(_features_at(cloud, basis, j), basis)
        if M <= design.shape[1]:
            raise ValueError(f"need more particles ({M}) than basis functions ({design.shape[1]})")

        z_targets = Y[j + 1][:, None] * cloud.dB[:, j, :] / dt  # (M, d)
        stacked = np.column_stack([z_targets, Y[j + 1]])
        fitted, _ = _solve_regularized(design, stacked)
        Z[j] = fitted[:, :d]
        cond_mean = fitted[:, d]
        resid = stacked - fitted
        residual_z[j] = float(np.sqrt(np.mean(resid[:, :d] ** 2)))
        residual_y[j] = float(np.sqrt(np.mean(resid[:, d] ** 2)))
        z_target_std[j] = z_targets.std(axis=0)

        # Law moments from the step-(j+1) cloud; Z beyond the last regression
        # step does not exist, so the first backward step reuses its own Z.
        moments = empirical_moments(Y[j + 1], Z[j + 1] if j + 1 < N else Z[j])
        m_y, m_z = moments.m_y, moments.m_z

        f_vals = eval_driver(spec.driver, times[j], cond_mean, Z[j], m_y, m_z)
        g_vals = eval_boundary(spec.boundary, times[j], cond_mean)
        dkap = cloud.kappa[:, j + 1] - cloud.kappa[:, j]
        y0 = cond_mean + f_vals * dt + g_vals * dkap

        p_val = float(y0.mean())
        delta = dt + float(cloud.mean_kappa[j + 1] - cloud.mean_kappa[j])
        shifted = implicit_mean_penalty(p_val, float(u_k.values[j]), n, delta)
        dK[j] = shifted - p_val
        Y[j] = y0 + dK[j]

        if not np.all(np.isfinite(Y[j])) or not np.all(np.isfinite(Z[j])):
            raise NonFinite(f"non-finite solution values at step {j}", step=j)

        mean_f_dt[j] = float(np.mean(f_vals)) * dt
        mean_g_dkappa[j] = float(np.mean(g_vals * dkap))

    Z[N] = Z[N - 1]
    K = np.concatenate([[0.0], np.cumsum(dK)])
    return PenalizedSolution(
        n=n,
        k=u_k.level,
        grid=grid,
        Y=Y,
        Z=Z,
        mean_path=Y.mean(axis=1),
        K=K,
        mean_f_dt=mean_f_dt,
        mean_g_dkappa=mean_g_dkappa,
        residual_y=residual_y,
        residual_z=residual_z,
        z_target_std=z_target_std,
    )

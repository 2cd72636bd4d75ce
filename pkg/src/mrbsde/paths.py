"""Forward Monte Carlo machinery: particle clouds, clock paths, measure utilities.

All randomness flows through a Philox counter-based generator keyed by the
master seed; the array slot (particle, step, coordinate) fixes the counter
offset of every variate, so a cloud is a pure function of
(spec, grid, M, seed) no matter how the consuming code is scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyCloud, LengthMismatch, SimulationError
from .problem import ProblemSpec


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = j T / N on [0, T]."""

    T: float
    N: int

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be > 0")
        if self.N < 1:
            raise ValueError("N must be >= 1")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)


@dataclass(frozen=True)
class MomentVector:
    """First moments of a (Y, Z) cloud plus the second moment of Y."""

    m_y: float
    m_z: np.ndarray
    m_y2: float


@dataclass(frozen=True)
class ForwardCloud:
    """M simulated particles: increments, forward state, clock paths, terminal draws.

    ``mean_kappa`` is the per-node sample mean of kappa, frozen here so the
    backward solver's penalty measure d(s + E[kappa_s]) does not move when
    particles are revisited.
    """

    grid: TimeGrid
    seed: int
    dB: np.ndarray  # (M, N, d)
    brownian: np.ndarray  # (M, N+1, d), cumulative sums, B_0 = 0
    kappa: np.ndarray  # (M, N+1)
    xi: np.ndarray  # (M,)
    mean_kappa: np.ndarray  # (N+1,)
    forward_state: np.ndarray | None = None  # (M, N+1) when a forward SDE is simulated

    @property
    def M(self) -> int:
        return self.dB.shape[0]

    @property
    def d(self) -> int:
        return self.dB.shape[2]

    def with_terminal(self, xi: np.ndarray) -> "ForwardCloud":
        """Same cloud with the terminal draws replaced (perturbation experiments)."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape != self.xi.shape:
            raise LengthMismatch(f"terminal shape {xi.shape} != {self.xi.shape}")
        return replace(self, xi=xi)


def simulate_forward(
    spec: ProblemSpec, grid: TimeGrid, M: int, seed: int, debug_checks: bool = False
) -> ForwardCloud:
    """Simulate the forward inputs of the backward solver.

    Euler-Maruyama for the forward state when the terminal or the clock
    needs one; left-endpoint quadrature for the pathwise-integral clock.
    ``debug_checks`` enables the increment moment diagnostics, which are
    only meaningful for large M * N.
    """
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    if grid.N < 2:
        raise ValueError(f"N must be >= 2, got {grid.N}")

    N, d, dt = grid.N, spec.brownian_dim, grid.dt
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    dB = rng.standard_normal((M, N, d)) * math.sqrt(dt)

    if debug_checks:
        mean_bound = 5.0 / math.sqrt(M * N)
        coord_means = dB.reshape(-1, d).mean(axis=0) / math.sqrt(dt)
        if np.any(np.abs(coord_means) > mean_bound):
            raise SimulationError(f"increment sample mean {coord_means} outside {mean_bound:.3g} band")
        var = dB.reshape(-1, d).var(axis=0)
        if np.any(np.abs(var - dt) > 0.1 * dt):
            raise SimulationError(f"increment sample variance {var} not within 10% of dt {dt}")

    brownian = np.zeros((M, N + 1, d))
    np.cumsum(dB, axis=1, out=brownian[:, 1:, :])

    forward_state = None
    if spec.forward is not None:
        fwd = spec.forward
        forward_state = np.empty((M, N + 1))
        forward_state[:, 0] = fwd.x0
        for j in range(N):
            x = forward_state[:, j]
            forward_state[:, j + 1] = x + (fwd.drift_const + fwd.drift_lin * x) * dt + fwd.sigma * dB[:, j, 0]
            if not np.all(np.isfinite(forward_state[:, j + 1])):
                raise SimulationError(f"forward state non-finite at step {j + 1}")

    times = grid.times
    kap = spec.kappa
    if kap.family == "zero":
        kappa = np.zeros((M, N + 1))
    elif kap.family == "linear":
        kappa = np.broadcast_to(kap.rate * times, (M, N + 1)).copy()
    elif kap.family == "curve":
        curve = np.interp(times, kap.knots_t, kap.knots_v)
        curve = curve - curve[0]  # kappa_0 = 0 by convention
        kappa = np.broadcast_to(curve, (M, N + 1)).copy()
    else:
        if forward_state is None:
            raise SimulationError("pathwise-integral kappa requires a forward SDE")
        kappa = np.zeros((M, N + 1))
        h_vals = kap.eval_h(forward_state[:, :-1])
        np.cumsum(h_vals * dt, axis=1, out=kappa[:, 1:])

    term = spec.terminal
    if term.mode == "direct-sampler":
        xi = term.sample_direct(brownian[:, -1, 0], grid.T)
    else:
        xi = term.apply_payoff(forward_state[:, -1])

    return ForwardCloud(
        grid=grid,
        seed=seed,
        dB=dB,
        brownian=brownian,
        kappa=kappa,
        xi=np.asarray(xi, dtype=float),
        mean_kappa=kappa.mean(axis=0),
        forward_state=forward_state,
    )


def _as_particle_matrix(z_samples, m: int) -> np.ndarray:
    """Normalize z samples to shape (M, d); a 1-d array is read as d = 1."""
    z = np.asarray(z_samples, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2 or z.shape[0] != m:
        raise LengthMismatch(f"expected {m} z samples, got shape {z.shape}")
    return z


def empirical_moments(y_samples: np.ndarray, z_samples: np.ndarray) -> MomentVector:
    """Arithmetic means and second moment of Y, reduced in fixed index order."""
    y = np.asarray(y_samples, dtype=float)
    if y.size == 0:
        raise EmptyCloud("empirical_moments needs at least one sample")
    z = _as_particle_matrix(z_samples, y.shape[0])
    return MomentVector(m_y=float(y.mean()), m_z=z.mean(axis=0), m_y2=float(np.mean(y * y)))


def w2_dirac_bound(y_samples: np.ndarray, z_samples: np.ndarray) -> float:
    """Root mean square bound (E[|Y|^2 + |Z|^2])^(1/2) dominating W2(law, dirac_0)."""
    y = np.asarray(y_samples, dtype=float)
    if y.size == 0:
        raise EmptyCloud("w2_dirac_bound needs at least one sample")
    z = _as_particle_matrix(z_samples, y.shape[0])
    return float(math.sqrt(np.mean(y * y) + np.mean(np.sum(z * z, axis=1))))


def empirical_w2_1d(a: np.ndarray, b: np.ndarray) -> float:
    """Exact 2-Wasserstein distance between two equal-size 1-d empirical measures.

    Sorting both samples realizes the optimal matching in one dimension.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"need equal-length 1-d samples, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise EmptyCloud("empirical_w2_1d needs at least one sample")
    diff = np.sort(a) - np.sort(b)
    return float(math.sqrt(np.mean(diff * diff)))

"""Smooth obstacle approximations by convolution with a compactly supported bump.

The kernel is the standard normalized bump exp(-1/(1-x^2)) on (-1, 1),
scaled to the window [-1/k, 1/k]. Normalization uses the quadrature mass of
the kernel rather than its analytic mass, so constant obstacles are
reproduced exactly at any node count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QuadratureError
from .paths import TimeGrid
from .problem import ObstacleCurve


def bump(x: np.ndarray) -> np.ndarray:
    """Unnormalized bump exp(-1/(1-x^2)) on (-1, 1), zero outside."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    out[inside] = np.exp(-1.0 / (1.0 - xi * xi))
    return out


def bump_derivative(x: np.ndarray) -> np.ndarray:
    """Derivative of the unnormalized bump; odd, zero outside (-1, 1)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    one_minus = 1.0 - xi * xi
    out[inside] = np.exp(-1.0 / one_minus) * (-2.0 * xi / (one_minus * one_minus))
    return out


@dataclass(frozen=True)
class SmoothObstacle:
    """Mollified obstacle sampled on the solver grid.

    ``sup_gap`` is max_j |u^k(t_j) - u(t_j)|; for an L-Lipschitz obstacle it
    is bounded by L/k because the kernel window has radius 1/k.
    ``derivative_bound`` is max_j |du^k/dt(t_j)|.
    """

    level: int
    grid: TimeGrid
    values: np.ndarray
    derivative: np.ndarray
    sup_gap: float
    derivative_bound: float


def _panel_edges(t: float, radius: float, horizon: float, kinks: tuple) -> np.ndarray:
    """Kernel-window panel edges, split where the integrand loses smoothness.

    The integrand s -> u(clip(t - s, 0, T)) has derivative jumps where the
    clamp engages (s = t and s = t - T) and at the obstacle's own kinks
    (s = t - kink). Aligning panel edges there keeps each panel analytic,
    which Gauss-Legendre needs for its fast convergence.
    """
    breaks = [t, t - horizon] + [t - kink for kink in kinks]
    inner = [s for s in breaks if -radius < s < radius]
    return np.array(sorted({-radius, radius, *inner}))


def mollify_obstacle(
    u: ObstacleCurve, k: int, grid: TimeGrid, quad_points: int = 64
) -> SmoothObstacle:
    """Convolve the obstacle with the bump kernel at window radius 1/k.

    The obstacle is extended by u(0) left of 0 and u(T) right of T before
    convolution. Values and the time derivative come from a composite
    Gauss-Legendre rule with ``quad_points`` nodes per panel; the
    derivative uses the kernel's derivative, so no finite differencing of
    the smoothed values is involved.
    """
    if k < 1:
        raise ValueError(f"mollification level k must be >= 1, got {k}")
    if quad_points < 16:
        raise QuadratureError(
            f"need at least 16 quadrature nodes for the bump kernel, got {quad_points}"
        )

    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(quad_points)
    radius = 1.0 / k
    kinks = u.kink_points()
    times = grid.times
    values = np.empty(times.shape[0])
    derivative = np.empty(times.shape[0])

    for j, t in enumerate(times):
        edges = _panel_edges(float(t), radius, grid.T, kinks)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        s = (half[:, None] * gl_nodes[None, :] + mid[:, None]).ravel()
        w = (half[:, None] * gl_weights[None, :]).ravel()
        kernel = w * bump(k * s)
        mass = kernel.sum()
        samples = u.evaluate(np.clip(t - s, 0.0, grid.T))
        values[j] = samples @ kernel / mass
        # Center the derivative kernel so it annihilates constants exactly,
        # as the analytic kernel derivative does by integrating to zero.
        deriv_kernel = w * bump_derivative(k * s) * k
        deriv_kernel -= (deriv_kernel.sum() / mass) * kernel
        derivative[j] = samples @ deriv_kernel / mass

    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(derivative))):
        raise QuadratureError("mollified obstacle produced non-finite values")

    exact = u.evaluate(times)
    return SmoothObstacle(
        level=k,
        grid=grid,
        values=values,
        derivative=derivative,
        sup_gap=float(np.max(np.abs(values - exact))),
        derivative_bound=float(np.max(np.abs(derivative))),
    )

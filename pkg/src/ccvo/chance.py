"""Probabilistic clearance constraint for a single obstacle.

For a candidate robot velocity v and lookahead t, the signed squared
clearance against obstacle i is

    f_i(v, t) = ||p_i + (v_i - v) t||^2 - r_sum^2,

with p_i the relative position and r_sum the sum of the two radii. Under
isotropic Gaussian observation noise, d_rel = p_i + (v_i - v) t is
N(mu_rel, s^2 I) with s^2 = sigma_p^2 + sigma_v^2 t^2, so ||d_rel||^2 is a
scaled noncentral chi-squared variable with 2 degrees of freedom and
noncentrality ||mu_rel||^2 / s^2. Its exact first two moments give

    mu_f    = ||mu_rel||^2 + 2 s^2 - r_sum^2
    sigma_f = sqrt(4 s^2 ||mu_rel||^2 + 4 s^4).

Requiring mu_f - k*sigma_f > 0 guarantees P(f_i > 0) >= k^2/(1+k^2) by
Cantelli's one-sided inequality, regardless of the exact distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .geometry import Vec2
from .perception import ObstacleObservation

# Strict positivity margin; avoids feasibility flapping at the boundary.
FEASIBILITY_TOL = 1e-12

DEFAULT_N_TAU = 10


@dataclass(frozen=True)
class RelativeDistribution:
    """Gaussian model of the relative position after lookahead t."""

    mu_rel: Vec2        # meters
    sigma_rel_sq: float  # isotropic per-axis variance, meters^2

    def __post_init__(self):
        if self.sigma_rel_sq < 0:
            raise ValueError("variance cannot be negative")


@dataclass(frozen=True)
class ChanceStats:
    """Mean and standard deviation of the clearance variable f_i."""

    mu_f: float     # meters^2
    sigma_f: float  # meters^2


def relative_stats(obs: ObstacleObservation, v: Vec2,
                   t: float) -> RelativeDistribution:
    """Distribution of the relative position at lookahead t under velocity v.

    Observations without a velocity estimate are propagated as static
    (zero mean velocity, zero velocity variance).
    """
    if t <= 0:
        raise ValueError(f"lookahead must be positive, got {t}")
    vel = obs.mean_velocity if obs.mean_velocity is not None else Vec2(0.0, 0.0)
    sigma_v = obs.sigma_v if obs.sigma_v is not None else 0.0
    mu_rel = obs.mean_position + vel * t - v * t
    sigma_rel_sq = obs.sigma_p ** 2 + (sigma_v ** 2) * t * t
    return RelativeDistribution(mu_rel, sigma_rel_sq)


def f_stats(obs: ObstacleObservation, v: Vec2, t: float,
            r_sum: float) -> ChanceStats:
    """Exact moments of f_i = ||d_rel||^2 - r_sum^2 (see module docstring)."""
    if r_sum <= 0:
        raise ValueError("r_sum must be positive")
    rel = relative_stats(obs, v, t)
    m_sq = rel.mu_rel.norm_sq()
    s_sq = rel.sigma_rel_sq
    mu_f = m_sq + 2.0 * s_sq - r_sum * r_sum
    sigma_f = 2.0 * sqrt(s_sq * m_sq + s_sq * s_sq)
    return ChanceStats(mu_f, sigma_f)


def cantelli_bound(k: float) -> float:
    """Confidence floor k^2/(1+k^2) from Cantelli's one-sided inequality."""
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    return k * k / (1.0 + k * k)


def is_feasible_chance(obs: ObstacleObservation, v: Vec2, r_sum: float,
                       k: float, horizon_T: float,
                       n_tau: int = DEFAULT_N_TAU) -> bool:
    """True iff mu_f - k*sigma_f > 0 at every grid lookahead.

    The lookaheads are the uniform grid {horizon_T * j / n_tau, j=1..n_tau}.
    When true, P(f_i > 0) >= k^2/(1+k^2) at each checked lookahead.
    """
    if horizon_T <= 0:
        raise ValueError("horizon must be positive")
    if n_tau < 1:
        raise ValueError("n_tau must be at least 1")
    for j in range(1, n_tau + 1):
        tau = horizon_T * j / n_tau
        stats = f_stats(obs, v, tau, r_sum)
        if stats.mu_f - k * stats.sigma_f <= FEASIBILITY_TOL:
            return False
    return True


def deterministic_vo_contains(p_rel: Vec2, v_rel: Vec2, r_sum: float,
                              T: float) -> bool:
    """Noise-free velocity-obstacle membership over the horizon.

    True iff min over t in (0, T] of ||p_rel - v_rel*t|| < r_sum. The
    minimizer is the projection of p_rel onto the ray {v_rel*t}, clamped
    to [0, T]; the strict inequality makes the open endpoint immaterial.
    """
    if r_sum <= 0 or T <= 0:
        raise ValueError("r_sum and T must be positive")
    speed_sq = v_rel.norm_sq()
    if speed_sq == 0.0:
        return p_rel.norm() < r_sum
    t_star = min(max(p_rel.dot(v_rel) / speed_sq, 0.0), T)
    closest = p_rel - v_rel * t_star
    return closest.norm() < r_sum


# ---------------------------------------------------------------------------
# Vectorized kernels used by the planner (same math over a velocity grid)
# ---------------------------------------------------------------------------

def chance_feasible_mask(velocities: np.ndarray, p_rel: Vec2,
                         v_obs: Vec2, sigma_p: float, sigma_v: float,
                         r_sum: float, k: float, horizon_T: float,
                         n_tau: int) -> np.ndarray:
    """is_feasible_chance evaluated over an (N, 2) array of velocities."""
    taus = horizon_T * np.arange(1, n_tau + 1) / n_tau          # (n_tau,)
    drift = np.array([p_rel.x + v_obs.x * taus - velocities[:, [0]] * taus,
                      p_rel.y + v_obs.y * taus - velocities[:, [1]] * taus])
    m_sq = drift[0] ** 2 + drift[1] ** 2                         # (N, n_tau)
    s_sq = sigma_p ** 2 + (sigma_v ** 2) * taus ** 2             # (n_tau,)
    mu_f = m_sq + 2.0 * s_sq - r_sum * r_sum
    sigma_f = 2.0 * np.sqrt(s_sq * m_sq + s_sq ** 2)
    return np.all(mu_f - k * sigma_f > FEASIBILITY_TOL, axis=1)


def worst_case_clearance_mask(velocities: np.ndarray, p_rel: Vec2,
                              ped_speed: float, threshold: float,
                              horizon: float, n_tau: int) -> np.ndarray:
    """Unknown-direction clearance test over an (N, 2) velocity array.

    Feasible iff ||v*tau - p_rel|| - ped_speed*tau > threshold at every
    grid lookahead (the worst case over the obstacle's heading).
    """
    taus = horizon * np.arange(1, n_tau + 1) / n_tau
    dx = velocities[:, [0]] * taus - p_rel.x
    dy = velocities[:, [1]] * taus - p_rel.y
    margin = np.sqrt(dx * dx + dy * dy) - ped_speed * taus
    return np.all(margin > threshold, axis=1)

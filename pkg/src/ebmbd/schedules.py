"""Noise and barrier schedules for the reverse-diffusion optimizer.

Both schedules are precomputed into read-only arrays so a run is bitwise
reproducible and instances can be shared freely across workers.

Indexing convention: arrays are 0-based in diffusion time ``s``.  The reverse
pass visits ``s = S-1, ..., 0``; the barrier arrays carry ``S+1`` entries so
that index ``S`` describes the fully relaxed initial level and index ``0`` the
final, unrelaxed one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Proposal std at the final step is 0 by the schedule limit; clamp it to a tiny
# positive floor so sampling stays well-defined (final proposal ~ point mass).
SIGMA_FLOOR = 1e-12

MU_POLICIES = ("constant", "decay-to-floor")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NoiseSchedule:
    """DDPM-style linear noise schedule plus derived proposal widths.

    beta[s] is the per-step noise rate, alpha[s] = 1 - beta[s],
    alpha_bar[s] the running product of alpha, and sigma[s] the Monte Carlo
    proposal standard deviation with sigma[s]^2 = 1/sqrt(alpha_bar[s-1]) - 1
    (alpha_bar[-1] is the empty product, 1, making sigma[0] the clamped floor).
    """

    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray

    @property
    def steps(self) -> int:
        return self.beta.shape[0]

    def alpha_bar_prev(self, s: int) -> float:
        """alpha_bar at s-1, with the empty product = 1 at s = 0."""
        if s == 0:
            return 1.0
        return float(self.alpha_bar[s - 1])


def make_noise_schedule(beta_start: float, beta_end: float, steps: int) -> NoiseSchedule:
    """Build a linearly spaced noise schedule with ``steps`` entries."""
    if steps < 2:
        raise ValueError(f"steps must be >= 2, got {steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    beta = np.linspace(beta_start, beta_end, steps)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    # sigma[s] uses alpha_bar[s-1]; prepend the empty product for s = 0.
    abar_prev = np.concatenate(([1.0], alpha_bar[:-1]))
    sigma = np.sqrt(np.maximum(1.0 / np.sqrt(abar_prev) - 1.0, 0.0))
    sigma = np.maximum(sigma, SIGMA_FLOOR)
    return NoiseSchedule(
        beta=_frozen(beta),
        alpha=_frozen(alpha),
        alpha_bar=_frozen(alpha_bar),
        sigma=_frozen(sigma),
    )


def barrier_offset(kappa: float, c_max: float, fraction) -> np.ndarray | float:
    """Offset c at elapsed fraction of the reverse pass.

    fraction = 0 is the first reverse iteration (offset c_max), fraction = 1
    the last (offset exactly 0).  kappa > 1 keeps the offset large early
    (late emergence); kappa < 1 tightens early.
    """
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    f = np.asarray(fraction, dtype=float)
    out = c_max - c_max * f**kappa
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BarrierSchedule:
    """Per-step barrier hardness mu[s] and offset c[s], s = 0..S.

    c[S] = c_max at the start of the reverse pass, c[0] = 0 at its end, and
    c is monotone along the pass; mu is strictly positive throughout.
    """

    mu: np.ndarray
    c: np.ndarray
    kappa: float
    c_max: float
    mu_policy: str

    @property
    def steps(self) -> int:
        return self.c.shape[0] - 1


def make_barrier_schedule(
    kappa: float,
    c_max: float,
    mu: float,
    steps: int,
    mu_policy: str = "constant",
    mu_floor: float = 1e-6,
) -> BarrierSchedule:
    """Build the emerging-barrier schedule for a reverse pass of ``steps`` steps."""
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if c_max < 0.0:
        raise ValueError(f"c_max must be >= 0, got {c_max}")
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if mu_policy not in MU_POLICIES:
        raise ValueError(f"mu_policy must be one of {MU_POLICIES}, got {mu_policy!r}")

    s = np.arange(steps + 1)
    fraction = (steps - s) / steps  # 0 at s = S, 1 at s = 0
    c = np.asarray(barrier_offset(kappa, c_max, fraction))
    if mu_policy == "constant":
        mu_arr = np.full(steps + 1, mu)
    else:
        # Linear decay from mu at s = S down to a small positive floor at s = 0.
        floor = min(mu_floor, mu)
        mu_arr = floor + (mu - floor) * (s / steps)
    return BarrierSchedule(
        mu=_frozen(mu_arr),
        c=_frozen(c),
        kappa=float(kappa),
        c_max=float(c_max),
        mu_policy=mu_policy,
    )

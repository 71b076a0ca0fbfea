"""Probability that m-dimensional white Gaussian noise stays inside a ball.

Both closed forms below depend only on ``delta / sigma``; they are the
distribution function of a chi variable with ``m`` degrees of freedom,
written as finite sums (no incomplete gamma function needed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

_LOG_SPACE_THRESHOLD = 700.0


def _even_tail(u: float, m: int) -> float:
    """exp(-u) * sum_{i < m/2} u^i / i!"""
    n = m // 2
    if u > _LOG_SPACE_THRESHOLD:
        log_u = math.log(u)
        logs = [i * log_u - math.lgamma(i + 1) for i in range(n)]
        top = max(logs)
        return math.exp(top - u + math.log(sum(math.exp(v - top) for v in logs)))
    term, total = 1.0, 1.0
    for i in range(1, n):
        term *= u / i
        total += term
    return math.exp(-u) * total


def _odd_tail(z: float, m: int) -> float:
    """sqrt(2/pi) * exp(-z^2/2) * sum_{p=1}^{(m-1)/2} z^(2p-1) / (2p-1)!!"""
    k = (m - 1) // 2
    if k == 0:
        return 0.0
    u = 0.5 * z * z
    if u > _LOG_SPACE_THRESHOLD:
        log_t = math.log(z)
        logs = [log_t]
        for p in range(1, k):
            log_t += 2.0 * math.log(z) - math.log(2 * p + 1)
            logs.append(log_t)
        top = max(logs)
        log_sum = top + math.log(sum(math.exp(v - top) for v in logs))
        return math.exp(0.5 * math.log(2.0 / math.pi) - u + log_sum)
    term = z
    total = z
    for p in range(1, k):
        term *= z * z / (2 * p + 1)
        total += term
    return math.sqrt(2.0 / math.pi) * math.exp(-u) * total


def noise_ball_probability(delta: float, sigma: float, m: int) -> float:
    """P(||eps|| <= delta) for eps ~ N(0, sigma^2 I_m)."""
    if not (delta >= 0 and sigma > 0):
        raise ValueError("delta must be >= 0 and sigma > 0")
    m = int(m)
    if m < 1:
        raise ValueError("m must be >= 1")
    if delta == 0:
        return 0.0
    z = delta / sigma
    if m % 2 == 0:
        p = 1.0 - _even_tail(0.5 * z * z, m)
    else:
        p = math.erf(z / math.sqrt(2.0)) - _odd_tail(z, m)
    return min(max(p, 0.0), 1.0)


@lru_cache(maxsize=256)
def invert_noise_level(gamma: float, sigma: float, m: int, rtol: float = 1e-10) -> float:
    """Smallest delta such that the noise ball probability reaches ``gamma``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    # work in units of sigma, bisection on z = delta / sigma
    lo, hi = 0.0, max(1.0, math.sqrt(m))
    while noise_ball_probability(hi, 1.0, m) < gamma:
        lo, hi = hi, 2.0 * hi
    # bisect past rtol so the probability round-trips to ~1e-12
    while hi - lo > min(rtol, 1e-13) * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if noise_ball_probability(mid, 1.0, m) >= gamma:
            hi = mid
        else:
            lo = mid
    return hi * sigma


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.01
    m: int = 5
    gamma: float = 0.95

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if not 0 < self.gamma < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @property
    def delta(self) -> float:
        return invert_noise_level(self.gamma, self.sigma, self.m)

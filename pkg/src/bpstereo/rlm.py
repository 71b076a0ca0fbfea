"""Regularising Levenberg-Marquardt iteration for F(x) = y with noisy data.

Each step picks its Tikhonov weight so that the linearised residual is
exactly ``rho`` times the current residual. Iteration stops by the
discrepancy principle ``||y - F(x)|| <= tau * delta``. A local estimate of the
Scherzer constant is tracked between consecutive iterates and can halt the
scheme when it exceeds a cap.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

PINV_RCOND = 1e-12


class RlmStatus(str, enum.Enum):
    DISCREPANCY_STOP = "discrepancy_stop"
    SCHERZER_BREAK = "scherzer_break"
    MAX_ITERS = "max_iters"
    STALLED = "stalled"


class NumericalFailure(ArithmeticError):
    def __init__(self, iteration: int, what: str = "residual or Jacobian"):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration


class UndefinedConstantError(ValueError):
    pass


@dataclass(frozen=True)
class RlmConfig:
    rho: float = 0.5
    tau: float = 2.5
    delta: float = 0.0
    max_iters: int = 50
    scherzer_cap: float = 2000.0
    alpha_tol: float = 1e-8
    monitor_scherzer: bool = True
    # on a Scherzer break return the iterate before the offending step
    break_returns_previous: bool = True

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must be in (0,1)")
        if not self.tau > 2.0:
            raise ValueError("tau must be > 2")
        if not self.rho * self.tau > 1.0:
            raise ValueError("rho * tau must be > 1")
        if not self.delta >= 0.0:
            raise ValueError("delta must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if not self.scherzer_cap > 0.0:
            raise ValueError("scherzer_cap must be > 0")
        if not self.alpha_tol > 0.0:
            raise ValueError("alpha_tol must be > 0")

    def with_delta(self, delta: float) -> RlmConfig:
        return RlmConfig(**{**self.__dict__, "delta": float(delta)})


@dataclass
class RlmResult:
    x: np.ndarray
    status: RlmStatus
    iters: int
    final_residual: float
    alpha_trace: list[float] = field(default_factory=list)
    scherzer_trace: list[float] = field(default_factory=list)
    residual_trace: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class RlmProblem:
    """Generic problem wrapper; anything with these three members works."""

    forward: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    y_delta: np.ndarray


class AlphaStep(NamedTuple):
    alpha: float
    step: np.ndarray
    stalled: bool


def _solve_alpha_svd(svd, res: np.ndarray, rho: float, tol: float) -> AlphaStep:
    U, sv, Vt = svd
    rn = float(np.sqrt(res @ res))
    c = U.T @ res
    perp = res - U @ c
    perp2 = float(perp @ perp)
    c2 = c * c
    s2 = sv * sv
    target = rho * rn
    t2 = target * target

    def h(alpha):
        w = alpha / (s2 + alpha)
        return float(w * w @ c2) + perp2 - t2

    def step_at(alpha):
        return Vt.T @ (sv / (s2 + alpha) * c)

    floor = 1e-12 * max(1.0, float(s2[0]) if len(s2) else 1.0)
    lo = hi = 1.0
    h_lo = h_hi = h(1.0)
    if h_lo == 0.0:
        return AlphaStep(1.0, step_at(1.0), False)
    while h_lo > 0.0:
        hi, h_hi = lo, h_lo
        lo *= 0.1
        if lo < floor:
            lo = floor
            h_lo = h(lo)
            if h_lo > 0.0:
                # target unreachable: the residual cannot be reduced to rho * ||res||
                feasible = np.sqrt(max(h_lo + t2, 0.0)) - target <= tol * rn
                return AlphaStep(lo, step_at(lo), not feasible)
            break
        h_lo = h(lo)
    while h_hi < 0.0:
        lo, h_lo = hi, h_hi
        hi *= 10.0
        if hi > 1e300:
            return AlphaStep(lo, step_at(lo), True)
        h_hi = h(hi)

    alpha = hi if abs(h_hi) < abs(h_lo) else lo
    accuracy = 0.01 * tol * rn
    for _ in range(200):
        w = alpha / (s2 + alpha)
        hv = float(w * w @ c2) + perp2 - t2
        g = np.sqrt(max(hv + t2, 0.0))
        if abs(g - target) <= accuracy:
            break
        if hv > 0.0:
            hi = alpha
        else:
            lo = alpha
        dh = float(2.0 * (w * s2 / (s2 + alpha) ** 2) @ c2)
        nxt = alpha - hv / dh if dh > 0.0 else -1.0
        if not lo < nxt < hi:
            nxt = np.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
        if nxt == alpha or hi - lo <= 4e-16 * hi:
            break
        alpha = nxt
    return AlphaStep(float(alpha), step_at(alpha), False)


def solve_alpha(J, res, rho: float, tol: float = 1e-8) -> AlphaStep:
    """Damping ``alpha`` and step ``(J^T J + alpha I)^{-1} J^T res`` with
    ``||res - J step|| = rho * ||res||``.

    The linearised residual is monotone in ``alpha``; a safeguarded Newton
    iteration on its square is run on a bracket grown by decades from 1.
    ``stalled`` is set when even the undamped limit cannot reach the target.
    """
    J = np.asarray(J, dtype=np.float64)
    res = np.asarray(res, dtype=np.float64)
    if not np.any(res):
        raise ValueError("residual must be nonzero")
    with np.errstate(over="ignore", invalid="ignore"):
        return _solve_alpha_svd(np.linalg.svd(J, full_matrices=False), res, rho, tol)


def rlm_step(F, J_eval, x_k, y_delta, rho: float, tol: float = 1e-8) -> tuple[np.ndarray, float]:
    """One regularised step from ``x_k``; returns ``(x_next, alpha_k)``."""
    x_k = np.asarray(x_k, dtype=np.float64)
    res = np.asarray(y_delta, dtype=np.float64) - F(x_k)
    alpha, step, _ = solve_alpha(J_eval(x_k), res, rho, tol)
    return x_k + step, alpha


def _pinv_from_svd(svd) -> np.ndarray:
    U, sv, Vt = svd
    if len(sv) == 0 or sv[0] == 0.0:
        return np.zeros((Vt.shape[1], U.shape[0]))
    keep = sv > PINV_RCOND * sv[0]
    return (Vt[keep].T / sv[keep]) @ U[:, keep].T


def _scherzer_from_svd(J_k, svd_k1, dx_norm: float) -> float:
    if dx_norm < 1e-15:
        raise UndefinedConstantError("consecutive iterates coincide")
    R = J_k @ _pinv_from_svd(svd_k1)
    R[np.diag_indices_from(R)] -= 1.0
    return float(np.linalg.norm(R, 2)) / dx_norm


def scherzer_local(J_k, J_k1, x_k, x_k1) -> float:
    """Local Scherzer constant ``||R - I|| / ||x_k - x_k1||``.

    ``R`` is the minimal-norm solution of ``R J_k1 = J_k``.
    """
    J_k = np.asarray(J_k, dtype=np.float64)
    J_k1 = np.asarray(J_k1, dtype=np.float64)
    dx = np.asarray(x_k, dtype=np.float64) - np.asarray(x_k1, dtype=np.float64)
    return _scherzer_from_svd(J_k, np.linalg.svd(J_k1, full_matrices=False), float(np.linalg.norm(dx)))


def minimal_norm_R(J_k, J_k1) -> np.ndarray:
    return np.asarray(J_k, dtype=np.float64) @ _pinv_from_svd(
        np.linalg.svd(np.asarray(J_k1, dtype=np.float64), full_matrices=False)
    )


def rlm_solve(problem, x0, cfg: RlmConfig) -> RlmResult:
    """Run the regularising LM scheme from ``x0``.

    ``problem`` must expose ``forward(x)``, ``jacobian(x)`` and ``y_delta``.
    Raises :class:`NumericalFailure` if a residual or Jacobian goes non-finite.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _rlm_solve(problem, x0, cfg)


def _rlm_solve(problem, x0, cfg: RlmConfig) -> RlmResult:
    forward, jac = problem.forward, problem.jacobian
    y = np.asarray(problem.y_delta, dtype=np.float64)
    x = np.array(x0, dtype=np.float64)
    stop_level = cfg.tau * cfg.delta

    res = y - forward(x)
    rn = float(np.sqrt(res @ res))
    if not np.isfinite(rn):
        raise NumericalFailure(0, "residual")
    out = RlmResult(x, RlmStatus.MAX_ITERS, 0, rn, residual_trace=[rn])

    J = None
    svd = None
    for k in range(cfg.max_iters):
        if rn <= stop_level:
            out.status = RlmStatus.DISCREPANCY_STOP
            break
        if J is None:
            J = jac(x)
            if not np.all(np.isfinite(J)):
                raise NumericalFailure(k, "Jacobian")
            svd = np.linalg.svd(J, full_matrices=False)
        if rn == 0.0:
            out.status = RlmStatus.STALLED
            break
        alpha, step, stalled = _solve_alpha_svd(svd, res, cfg.rho, cfg.alpha_tol)
        if stalled:
            out.status = RlmStatus.STALLED
            break
        x_new = x + step
        res_new = y - forward(x_new)
        rn_new = float(np.sqrt(res_new @ res_new))
        if not np.isfinite(rn_new):
            raise NumericalFailure(k + 1, "residual")
        out.alpha_trace.append(alpha)

        J_new = svd_new = None
        if cfg.monitor_scherzer:
            J_new = jac(x_new)
            if not np.all(np.isfinite(J_new)):
                raise NumericalFailure(k + 1, "Jacobian")
            svd_new = np.linalg.svd(J_new, full_matrices=False)
            dxn = float(np.sqrt(step @ step))
            C = _scherzer_from_svd(J, svd_new, dxn) if dxn >= 1e-15 else 0.0
            out.scherzer_trace.append(C)
            if C >= cfg.scherzer_cap:
                out.status = RlmStatus.SCHERZER_BREAK
                if not cfg.break_returns_previous:
                    x, rn = x_new, rn_new
                    out.iters = k + 1
                    out.residual_trace.append(rn)
                break

        x, res, rn, J, svd = x_new, res_new, rn_new, J_new, svd_new
        out.iters = k + 1
        out.residual_trace.append(rn)
    else:
        if rn <= stop_level:
            out.status = RlmStatus.DISCREPANCY_STOP

    out.x = x
    out.final_residual = rn
    return out

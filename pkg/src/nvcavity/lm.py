"""Levenberg-Marquardt least squares with a recorded acceptance history.

Damping follows Nielsen's gain-ratio update with Marquardt diagonal
scaling. A step is accepted only when it lowers the cost, so the
recorded ``history`` is non-increasing by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    residuals: np.ndarray
    jac: np.ndarray
    iterations: int
    nfev: int
    converged: bool
    message: str
    history: list = field(default_factory=list)


def numeric_jacobian(fun, x, f0=None, step=1e-6, central=True):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        h = step * max(1.0, abs(x[k]))
        xp = x.copy()
        xp[k] += h
        if central:
            xm = x.copy()
            xm[k] -= h
            cols.append((fun(xp) - fun(xm)) / (2 * h))
        else:
            if f0 is None:
                f0 = fun(x)
            cols.append((fun(xp) - f0) / h)
    return np.column_stack(cols)


def levenberg_marquardt(
    fun: Callable[[np.ndarray], np.ndarray],
    x0,
    jac: Callable | None = None,
    *,
    max_iter: int = 200,
    ftol: float = 1e-12,
    xtol: float = 1e-10,
    gtol: float = 1e-12,
    mu0: float = 1e-3,
    diff_step: float = 1e-6,
) -> LMResult:
    x = np.array(x0, dtype=float)
    if jac is None:
        def jac(z):
            return numeric_jacobian(fun, z, step=diff_step)

    r = np.asarray(fun(x), dtype=float)
    nfev = 1
    cost = 0.5 * float(r @ r)
    if not np.isfinite(cost):
        raise ValueError("residuals are not finite at the starting point")
    history = [cost]
    J = jac(x)
    A = J.T @ J
    g = J.T @ r
    D = np.maximum(np.diag(A), 1e-300)
    mu = mu0
    nu = 2.0
    converged = False
    message = "maximum number of iterations reached"
    it = 0

    if np.max(np.abs(g), initial=0.0) <= gtol:
        return LMResult(x, cost, r, J, 0, nfev, True, "gradient below tolerance", history)

    while it < max_iter:
        it += 1
        try:
            step = np.linalg.solve(A + mu * np.diag(D), -g)
        except np.linalg.LinAlgError:
            mu *= nu
            nu *= 2
            continue
        if np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol):
            converged = True
            message = "step size below tolerance"
            break
        x_new = x + step
        nfev += 1
        try:
            r_new = np.asarray(fun(x_new), dtype=float)
            cost_new = 0.5 * float(r_new @ r_new)
        except (OverflowError, FloatingPointError, ZeroDivisionError):
            # trial point outside the representable range: treat as a failed step
            cost_new = np.inf
        predicted = -(step @ g) - 0.5 * step @ (A @ step)
        rho = (cost - cost_new) / predicted if predicted > 0 else -1.0
        if np.isfinite(cost_new) and cost_new < cost and rho > 0:
            rel_drop = (cost - cost_new) / max(cost, 1e-300)
            x, r, cost = x_new, r_new, cost_new
            history.append(cost)
            J = jac(x)
            A = J.T @ J
            g = J.T @ r
            D = np.maximum(D, np.diag(A))
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            if np.max(np.abs(g)) <= gtol:
                converged = True
                message = "gradient below tolerance"
                break
            if rel_drop <= ftol or cost <= 1e-300:
                converged = True
                message = "relative cost reduction below tolerance"
                break
        else:
            mu *= nu
            nu *= 2.0
            if mu > 1e30:
                converged = True
                message = "damping saturated; no further descent possible"
                break

    return LMResult(x, cost, r, J, it, nfev, converged, message, history)

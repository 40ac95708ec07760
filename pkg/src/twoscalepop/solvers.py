"""Finite-difference Jacobians and damped Newton iteration for fixed points."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import LeftDomainError, NonConvergenceError

# Central differences, step 1e-6 * max(1, |x_j|).
FD_STEP = 1e-6

# Newton iterates may wander this far below zero before we call it a domain exit.
ORTHANT_SLACK = 1e-9


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                step: float = FD_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.size
    fx = np.asarray(f(x), dtype=float)
    jac = np.empty((fx.size, n))
    for j in range(n):
        h = step * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * h)
    return jac


def newton_fixed_point(map_fn: Callable[[np.ndarray], np.ndarray],
                       x0: np.ndarray,
                       tol: float = 1e-12,
                       max_iter: int = 80,
                       max_halvings: int = 20,
                       enforce_orthant: bool = True) -> tuple[np.ndarray, float]:
    """Solve map_fn(x) = x by damped Newton on the residual map_fn(x) - x.

    Steps are halved (up to ``max_halvings`` times) until the residual norm
    decreases and, when ``enforce_orthant`` is set, until the iterate stays
    within the nonnegative orthant up to a small slack.  Returns the final
    iterate together with its residual norm.
    """
    x = np.asarray(x0, dtype=float).copy()
    res = np.asarray(map_fn(x)) - x
    rnorm = float(np.linalg.norm(res))
    for _ in range(max_iter):
        if rnorm < tol:
            return x, rnorm
        jac = fd_jacobian(map_fn, x) - np.eye(x.size)
        try:
            full_step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            raise NonConvergenceError(
                "singular Newton system", best=x, residual=rnorm)
        scale = 1.0
        for _ in range(max_halvings + 1):
            cand = x - scale * full_step
            if enforce_orthant and cand.min() < -ORTHANT_SLACK:
                scale *= 0.5
                continue
            cand_res = np.asarray(map_fn(cand)) - cand
            cand_norm = float(np.linalg.norm(cand_res))
            if cand_norm <= rnorm or cand_norm < tol:
                x, res, rnorm = cand, cand_res, cand_norm
                break
            scale *= 0.5
        else:
            if enforce_orthant and (x - full_step).min() < -ORTHANT_SLACK:
                raise LeftDomainError("Newton step could not stay in the orthant")
            # Stuck: residual refuses to decrease at any step length.
            raise NonConvergenceError(
                "Newton stalled", best=x, residual=rnorm)
    if rnorm < tol:
        return x, rnorm
    raise NonConvergenceError("Newton ran out of iterations", best=x, residual=rnorm)

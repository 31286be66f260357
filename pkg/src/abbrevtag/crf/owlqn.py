"""Orthant-wise limited-memory quasi-Newton minimization.

Minimizes ``f(x) + c1 * ||x||_1`` for a smooth ``f`` by running L-BFGS on
the pseudo-gradient, keeping every trial point inside the orthant chosen at
the start of the line search. With ``c1 == 0`` this is plain L-BFGS with a
backtracking Armijo line search.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

_ARMIJO = 1e-4


class OptimizationError(RuntimeError):
    """Objective became non-finite; ``x`` holds the last good iterate."""

    def __init__(self, message: str, x: np.ndarray, history: list[float]):
        self.x = x
        self.history = history
        super().__init__(message)


@dataclass
class OwlqnResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_evals: int
    status: str
    history: list[float] = field(default_factory=list)


def pseudo_gradient(x: np.ndarray, g: np.ndarray, c1: float) -> np.ndarray:
    """Minimum-norm subgradient of ``f + c1 ||x||_1``."""
    if c1 == 0.0:
        return g.copy()
    pg = np.where(x > 0, g + c1, np.where(x < 0, g - c1, 0.0))
    zero = x == 0
    right, left = g + c1, g - c1
    pg[zero & (right < 0)] = right[zero & (right < 0)]
    pg[zero & (left > 0)] = left[zero & (left > 0)]
    return pg


def _two_loop(pg: np.ndarray, memory: deque) -> np.ndarray:
    q = pg.copy()
    alphas = []
    for s, y, rho in reversed(memory):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    if memory:
        s, y, _ = memory[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(memory, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def minimize_owlqn(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    c1: float = 0.0,
    max_iterations: int = 100,
    tol: float = 1e-5,
    epsilon: float = 1e-5,
    num_memories: int = 6,
    max_linesearch: int = 20,
    callback: Callable[[int, float], None] | None = None,
) -> OwlqnResult:
    """Minimize ``fun(x)[0] + c1 * |x|_1``.

    Stops after ``max_iterations`` accepted steps, when the relative decrease
    of the objective drops below ``tol``, when the pseudo-gradient norm falls
    below ``epsilon * max(1, |x|)``, or when the line search cannot make
    progress.
    """
    if c1 < 0:
        raise ValueError("c1 must be nonnegative")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    x = np.array(x0, dtype=np.float64)
    f, g = fun(x)
    n_evals = 1
    F = f + c1 * np.abs(x).sum()
    if not np.isfinite(F):
        raise OptimizationError("objective is not finite at the starting point", x, [])
    history = [float(F)]
    memory: deque = deque(maxlen=num_memories)
    status = "max_iterations"
    it = 0
    while it < max_iterations:
        pg = pseudo_gradient(x, g, c1)
        if np.linalg.norm(pg) <= epsilon * max(1.0, np.linalg.norm(x)):
            status = "gradient_tolerance"
            break
        d = _two_loop(pg, memory)
        if c1 > 0:
            d[d * pg >= 0] = 0.0
        if not np.any(d):
            status = "no_descent_direction"
            break
        orthant = np.where(x != 0, np.sign(x), np.sign(-pg))
        step = 1.0 / np.linalg.norm(d) if not memory else 1.0
        accepted = False
        for _ in range(max_linesearch):
            x_new = x + step * d
            if c1 > 0:
                x_new[np.sign(x_new) != orthant] = 0.0
            try:
                f_new, g_new = fun(x_new)
            except FloatingPointError:
                f_new, g_new = np.inf, None
            n_evals += 1
            F_new = f_new + c1 * np.abs(x_new).sum()
            if np.isfinite(F_new) and F_new <= F + _ARMIJO * float(pg @ (x_new - x)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = "linesearch_failed"
            logger.info("line search failed at iteration %d; keeping last iterate", it + 1)
            if not np.isfinite(F_new) and it == 0:
                raise OptimizationError("objective diverged on the first step", x, history)
            break
        s, y = x_new - x, g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * float(y @ y):
            memory.append((s, y, 1.0 / sy))
        rel = (F - F_new) / max(abs(F_new), 1e-300)
        x, f, g, F = x_new, f_new, g_new, F_new
        it += 1
        history.append(float(F))
        logger.debug("iteration %d: objective %.6f (step %.3g)", it, F, step)
        if callback is not None:
            callback(it, float(F))
        if rel < tol:
            status = "converged"
            break
    return OwlqnResult(x, float(F), it, n_evals, status, history)

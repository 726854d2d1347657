"""Cancellation-free evaluation of ``|x+y|^p - |x|^p - p|x|^(p-2) x.y``.

When ``|y| << |x|`` the three terms nearly cancel. Writing ``v = y/|x|`` and
``q = 2 xhat.v + |v|^2`` gives

    |x|^p [ (p/2)|v|^2 + ((1+q)^c - 1 - c q) ],   c = p/2,

and the last parenthesis is summed as a binomial series for small ``|q|``.
Vectors live on the last axis.
"""

from __future__ import annotations

import functools

import numpy as np

_SERIES_CUT = 0.5
_SERIES_TERMS = 60


@functools.lru_cache(maxsize=64)
def _binomial_tail(c: float) -> np.ndarray:
    """Coefficients of ``q^k``, ``k >= 2``, in ``(1+q)^c``."""
    coef = np.empty(_SERIES_TERMS + 1)
    coef[0] = 1.0
    for k in range(1, _SERIES_TERMS + 1):
        coef[k] = coef[k - 1] * (c - k + 1) / k
    return coef[2:]


def power_remainder(q: np.ndarray, c: float) -> np.ndarray:
    """``(1+q)^c - 1 - c q`` for ``q >= -1``, accurate for tiny ``q``."""
    q = np.asarray(q, dtype=float)
    out = np.empty_like(q)
    small = np.abs(q) <= _SERIES_CUT
    if np.any(small):
        qs = q[small]
        acc = np.zeros_like(qs)
        for b in _binomial_tail(float(c))[::-1]:
            acc = acc * qs + b
        out[small] = acc * qs * qs
    big = ~small
    if np.any(big):
        qb = q[big]
        with np.errstate(divide="ignore"):
            out[big] = np.expm1(c * np.log1p(qb)) - c * qb
    return out


def gradient_bracket(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    """``|x+y|^p - |x|^p - p|x|^(p-2) x.y`` (``|x|^(p-2) x := 0`` at ``x = 0``)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    if x.ndim == 1:
        return float(gradient_bracket(x[None, :], y[None, :], p)[0])
    nx = np.linalg.norm(x, axis=-1)
    ny = np.linalg.norm(y, axis=-1)
    out = np.array(ny**p, dtype=float)
    pos = nx > 0
    if np.any(pos):
        xs, ys, n = x[pos], y[pos], nx[pos]
        v = ys / n[:, None]
        xhat = xs / n[:, None]
        with np.errstate(over="ignore"):
            # an infinite v2 just routes the entry to the direct branch
            v2 = np.sum(v * v, axis=-1)
        q = 2.0 * np.sum(xhat * v, axis=-1) + v2
        q = np.maximum(q, -1.0)
        # once y dominates, the expanded form cancels worse than the direct one
        far = v2 > 4.0
        val = np.empty_like(n)
        near = ~far
        val[near] = n[near] ** p * (0.5 * p * v2[near] + power_remainder(q[near], 0.5 * p))
        if np.any(far):
            direct = (
                np.linalg.norm(xs[far] + ys[far], axis=-1) ** p
                - n[far] ** p
                - p * n[far] ** (p - 2.0) * np.sum(xs[far] * ys[far], axis=-1)
            )
            val[far] = direct
        out[pos] = val
    return out


def linear_term(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    """``p |x|^(p-2) x.y`` with the convention ``0`` at ``x = 0``."""
    x = np.asarray(x, dtype=float)
    nx = np.linalg.norm(x, axis=-1)
    dot = np.sum(x * y, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(nx > 0, p * nx ** (p - 2.0) * dot, 0.0)
    return out

"""Hermite and Laguerre polynomials by three-term recurrence."""
from __future__ import annotations

import math

import numpy as np

MAX_ORDER = 12


def hermite(n: int, x):
    """Physicists' Hermite polynomial H_n(x)."""
    if n < 0:
        raise ValueError("order must be non-negative")
    x = np.asarray(x)
    h_prev = np.ones_like(x, dtype=np.result_type(x, float))
    if n == 0:
        return h_prev
    h = 2 * x * h_prev
    for m in range(1, n):
        h_prev, h = h, 2 * x * h - 2 * m * h_prev
    return h


def laguerre(n: int, x):
    """Laguerre polynomial L_n(x); accepts complex arguments."""
    if n < 0:
        raise ValueError("order must be non-negative")
    x = np.asarray(x)
    l_prev = np.ones_like(x, dtype=np.result_type(x, float))
    if n == 0:
        return l_prev
    l = 1 - x
    for m in range(1, n):
        l_prev, l = l, ((2 * m + 1 - x) * l - m * l_prev) / (m + 1)
    return l


def hermite_identity_residual(n: int, a: float, b: float) -> float:
    """Residual of the normalized identity

        int e^{-x^2} H_n(x+a) H_n(x+b) dx / (2^n n! sqrt(pi)) = L_n(-2ab).

    Both sides are divided by 2^n n! sqrt(pi) so the residual is measured on the
    scale of the Laguerre value rather than the raw integral (about 1e8 for n = 6).
    """
    if n > 10:
        raise ValueError("identity check supports n <= 10")
    order = 4 * n + 20
    x, w = np.polynomial.hermite.hermgauss(order)
    norm = 2.0**n * math.factorial(n) * math.sqrt(math.pi)
    lhs = float(np.sum(w * hermite(n, x + a) * hermite(n, x + b))) / norm
    return abs(lhs - float(laguerre(n, -2 * a * b)))

"""Exponential integral for negative arguments."""

from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061

_SERIES_LIMIT = 6.0
_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 500


def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x - sum_{n>=1} (-x)^n / (n n!)
    total = 0.0
    term = 1.0
    for n in range(1, _MAX_TERMS):
        term *= -x / n
        contrib = term / n
        total += contrib
        if abs(contrib) < _EPS * abs(total):
            break
    return -EULER_GAMMA - math.log(x) - total


def _scaled_e1_cf(x: float) -> float:
    """``exp(x) * E1(x)`` from the continued fraction, modified Lentz."""
    b = x + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"continued fraction for E1({x}) did not converge")


def _check_negative(x: float) -> float:
    x = float(x)
    if not x < 0:
        raise ValueError(f"Ei is only implemented for negative arguments, got {x}")
    return x


def exp_int_ei(x: float) -> float:
    """Exponential integral ``Ei(x)`` for ``x < 0``.

    Uses ``Ei(x) = -E1(-x)``; ``E1`` comes from its power series when
    ``|x| < 6`` and from a continued fraction otherwise. Absolute error is
    below 1e-14 over the whole negative axis.
    """
    u = -_check_negative(x)
    if u < _SERIES_LIMIT:
        return -_e1_series(u)
    return -math.exp(-u) * _scaled_e1_cf(u)


def scaled_neg_ei(x: float) -> float:
    """``-exp(-x) * Ei(x)`` for ``x < 0``, without overflow for large ``|x|``."""
    u = -_check_negative(x)
    if u < _SERIES_LIMIT:
        return math.exp(u) * _e1_series(u)
    return _scaled_e1_cf(u)


exp_int_ei_vec = np.vectorize(exp_int_ei, otypes=[float])

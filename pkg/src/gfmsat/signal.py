"""Reference-frame transforms between abc, alpha-beta-zero and rotating dq0.

Amplitude-invariant scaling throughout: a balanced set with phase peak V maps
to a dq vector of magnitude V.  All functions are numba-compiled so they can be
called from the simulation kernel as well as from plain Python.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from numba import njit

SQRT3 = math.sqrt(3.0)
TWO_PI = 2.0 * math.pi


class ThreePhase(NamedTuple):
    a: float
    b: float
    c: float


class AlphaBeta(NamedTuple):
    alpha: float
    beta: float
    zero: float = 0.0


class DqPair(NamedTuple):
    d: float
    q: float
    zero: float = 0.0


@njit(cache=True)
def clarke(x):
    alpha = (2.0 / 3.0) * (x.a - 0.5 * x.b - 0.5 * x.c)
    beta = (x.b - x.c) / SQRT3
    zero = (x.a + x.b + x.c) / 3.0
    return AlphaBeta(alpha, beta, zero)


@njit(cache=True)
def inverse_clarke(x):
    half_beta = 0.5 * SQRT3 * x.beta
    return ThreePhase(
        x.alpha + x.zero,
        -0.5 * x.alpha + half_beta + x.zero,
        -0.5 * x.alpha - half_beta + x.zero,
    )


@njit(cache=True)
def park(x, theta):
    c = math.cos(theta)
    s = math.sin(theta)
    return DqPair(x.alpha * c + x.beta * s, -x.alpha * s + x.beta * c, x.zero)


@njit(cache=True)
def inverse_park(x, theta):
    c = math.cos(theta)
    s = math.sin(theta)
    return AlphaBeta(x.d * c - x.q * s, x.d * s + x.q * c, x.zero)


@njit(cache=True)
def abc_to_dq(x, theta):
    return park(clarke(x), theta)


@njit(cache=True)
def dq_to_abc(x, theta):
    return inverse_clarke(inverse_park(x, theta))


@njit(cache=True)
def magnitude_phase(x):
    """Return ``(|x|, atan2(q, d))``; the phase of the zero vector is 0."""
    mag = math.sqrt(x.d * x.d + x.q * x.q)
    if mag == 0.0:
        return mag, 0.0
    return mag, math.atan2(x.q, x.d)


@njit(cache=True)
def wrap_angle(theta):
    """Map an unwrapped angle to (-pi, pi]."""
    return theta - TWO_PI * math.ceil((theta - math.pi) / TWO_PI)


@njit(cache=True)
def angle_diff(a, b):
    """Shortest signed difference ``a - b`` in (-pi, pi]."""
    return wrap_angle(a - b)

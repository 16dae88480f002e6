"""Finite-n evaluations of the product and sum asymptotics behind the CLTs.

For a schedule ``r_m`` and complex ``x`` with positive real part,

    p_n(x)        = prod_{m=m0}^{n} (1 - x r_m),      p_{m0-1}(x) = 1
    F_{k+1,n}(x)  = p_n(x) / p_k(x) = prod_{m=k+1}^{n} (1 - x r_m)

``|p_n(x)|`` decays like ``n^(-c Re x)`` and the weighted sums
``n sum_k r_k^2 log^e(n/k) F_{k+1,n}(x) F_{k+1,n}(y)`` converge to simple
rational functions of ``c (x + y) - 1``.
"""
from __future__ import annotations

import math

import numpy as np

from .dynamics import RateSchedule
from .errors import BadStartIndex, RegimeViolation, UnderflowRisk
from .graph import DEFAULT_EQ_TOL

REL_FLOOR = 1e-12


def relative_error(value, target) -> float:
    """``|value - target| / max(|target|, 1e-12)``."""
    return float(abs(value - target) / max(abs(target), REL_FLOOR))


def _unclamped_rate(sched: RateSchedule, m: int) -> float:
    # the simulator clamps power rates below 1; the start rule must see the raw value
    if sched.kind == "power":
        return sched.c_param * m ** -sched.gamma_param
    return sched.rate(m)


def default_start(sched: RateSchedule, *xs) -> int:
    """Smallest ``m`` with ``max(Re x) r_m < 1``, plus one (never below 2)."""
    a = max(complex(x).real for x in xs)
    m = 1
    # r_m is non-increasing for both schedule kinds
    while a * _unclamped_rate(sched, m) >= 1.0:
        m += 1
    return max(2, m + 1)


def _check_start(sched, m0, *xs):
    if m0 < 2:
        raise BadStartIndex(f"m0 must be >= 2, got {m0}")
    for x in xs:
        x = complex(x)
        if x.real <= 0:
            raise ValueError(f"Re(x) must be positive, got {x!r}")
        if x.real * _unclamped_rate(sched, m0) >= 1.0:
            raise BadStartIndex(f"Re({x!r}) * r_{m0} >= 1")


def log_product(n: int, x, sched: RateSchedule, m0=None) -> complex:
    """``log p_n(x)`` accumulated term by term (no underflow)."""
    x = complex(x)
    m0 = default_start(sched, x) if m0 is None else int(m0)
    _check_start(sched, m0, x)
    if n < m0 - 1:
        raise ValueError(f"n must be >= m0 - 1 = {m0 - 1}")
    if n == m0 - 1:
        return 0j
    r = sched.rates(np.arange(m0, n + 1))
    return complex(np.sum(np.log(1.0 - x * r)))


def product_p(n: int, x, sched: RateSchedule, m0=None) -> complex:
    """The finite product ``p_n(x)``."""
    lp = log_product(n, x, sched, m0)
    if lp.real < -700.0:
        raise UnderflowRisk(f"|p_{n}(x)| = exp({lp.real:.1f}) underflows; use log_product")
    return complex(np.exp(lp))


def log_abs_products(n_max: int, x, sched: RateSchedule, m0=None):
    """``log |p_n(x)|`` for every ``n`` in ``[m0, n_max]``; returns ``(n, values)``."""
    x = complex(x)
    m0 = default_start(sched, x) if m0 is None else int(m0)
    _check_start(sched, m0, x)
    n = np.arange(m0, n_max + 1)
    return n, np.cumsum(np.log(np.abs(1.0 - x * sched.rates(n))))


def decay_exponent(x, sched: RateSchedule, n_grid, m0=None) -> float:
    """Least-squares slope of ``log |p_n(x)|`` against ``log n`` over ``n_grid``."""
    grid = np.asarray(sorted(int(k) for k in n_grid))
    if grid.size < 4:
        raise ValueError("n_grid needs at least 4 points")
    ns, logs = log_abs_products(int(grid[-1]), x, sched, m0)
    if grid[0] < ns[0]:
        raise ValueError(f"n_grid must start at or after m0 = {ns[0]}")
    y = logs[grid - ns[0]]
    if not np.all(np.isfinite(y)):
        raise UnderflowRisk("log |p_n| is not finite")
    slope, _ = np.polyfit(np.log(grid), y, 1)
    return float(slope)


def _tail_products(x, r):
    # F[i] = prod_{m >= i+1} (1 - x r_m) over the supplied rates, F[-1] = 1
    f = np.cumprod((1.0 - x * r)[::-1])[::-1]
    return np.concatenate([f[1:], [1.0]])


def _weighted_sum(x, y, sched, n, m0, e):
    k = np.arange(m0, n + 1)
    r = sched.rates(k)
    fx = _tail_products(complex(x), r)[:-1]
    fy = _tail_products(complex(y), r)[:-1]
    kk = k[:-1].astype(float)
    terms = r[:-1] ** 2 * fx * fy
    if e:
        terms = terms * np.log(n / kk) ** e
    return complex(np.sum(terms))


def _check_gamma_one(sched):
    if sched.gamma != 1.0:
        raise RegimeViolation("the sum limits hold for gamma = 1 schedules only")


def limit_sum_closed_form(e: int, x, y, c: float) -> complex:
    d = c * (complex(x) + complex(y)) - 1.0
    return {0: c ** 2 / d, 1: c ** 2 / d ** 2, 2: 2.0 * c ** 2 / d ** 3}[e]


def limit_sum(e: int, x, y, sched: RateSchedule, n: int, m0=None):
    """``n sum_{k=m0}^{n-1} r_k^2 log^e(n/k) F_{k+1,n}(x) F_{k+1,n}(y)`` and its limit.

    Returns ``(finite_value, closed_form)``.
    """
    if e not in (0, 1, 2):
        raise ValueError(f"e must be 0, 1 or 2, got {e!r}")
    _check_gamma_one(sched)
    x, y = complex(x), complex(y)
    c = sched.c
    if c * (x.real + y.real) <= 1.0:
        raise RegimeViolation(f"c (Re x + Re y) = {c * (x.real + y.real)!r} must exceed 1")
    m0 = default_start(sched, x, y) if m0 is None else int(m0)
    _check_start(sched, m0, x, y)
    if n <= m0:
        raise ValueError(f"n must exceed m0 = {m0}")
    return n * _weighted_sum(x, y, sched, n, m0, e), limit_sum_closed_form(e, x, y, c)


def limit_sum_log(x, y, sched: RateSchedule, n: int, m0=None, eq_tol: float = DEFAULT_EQ_TOL):
    """``(n / ln n) sum_k r_k^2 F_{k+1,n}(x) F_{k+1,n}(y)`` on the boundary ``c (Re x + Re y) = 1``.

    The limit is ``c^2`` when the imaginary parts cancel and 0 otherwise.
    """
    _check_gamma_one(sched)
    x, y = complex(x), complex(y)
    c = sched.c
    if abs(c * (x.real + y.real) - 1.0) > eq_tol:
        raise RegimeViolation(f"c (Re x + Re y) = {c * (x.real + y.real)!r} must equal 1")
    m0 = default_start(sched, x, y) if m0 is None else int(m0)
    _check_start(sched, m0, x, y)
    if n <= m0:
        raise ValueError(f"n must exceed m0 = {m0}")
    closed = c ** 2 if abs(x.imag + y.imag) <= eq_tol else 0.0
    return n / math.log(n) * _weighted_sum(x, y, sched, n, m0, 0), complex(closed)

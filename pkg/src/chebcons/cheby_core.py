"""Scalar Chebyshev machinery used by the consensus iterations.

Covers the first-kind polynomials T_n, the modulus-<=1 root tau of the
characteristic equation (real and complex), the shifted/normalised
polynomial P_n(x) = T_n(cx - d) / T_n(c - d), the worst-case switching
succession and its growth constant, and the asymptotic convergence factor.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

# |x^2 - 1| below this is treated as the branch point x = +-1
BRANCH_EPS = 1e-12
# complex roots whose moduli differ by less than this are considered tied
TIE_EPS = 1e-14


@dataclass(frozen=True)
class ChebyParams:
    """Interval [lambda_m, lambda_M] mapped onto [-1, 1] by x -> c*x - d."""

    lambda_m: float
    lambda_M: float
    c: float = field(init=False)
    d: float = field(init=False)

    def __post_init__(self):
        lm, lM = float(self.lambda_m), float(self.lambda_M)
        if not (-1.0 < lm < lM < 1.0):
            raise ValueError(
                f"need 1 > lambda_M > lambda_m > -1, got lambda_m={lm}, lambda_M={lM}"
            )
        object.__setattr__(self, "lambda_m", lm)
        object.__setattr__(self, "lambda_M", lM)
        object.__setattr__(self, "c", 2.0 / (lM - lm))
        object.__setattr__(self, "d", (lM + lm) / (lM - lm))

    @property
    def shift(self) -> float:
        """c - d, the image of x = 1; always > 1."""
        return self.c - self.d

    @property
    def lower_edge(self) -> float:
        """lambda_M + lambda_m - 1, below which |P_n| >= 1."""
        return self.lambda_M + self.lambda_m - 1.0

    @classmethod
    def symmetric(cls, lam: float) -> "ChebyParams":
        return cls(-lam, lam)


@dataclass(frozen=True)
class Succession:
    """Finite succession lambda(1), lambda(2), ... inside an envelope."""

    values: tuple
    lambda_min: float = -1.0
    lambda_max: float = 1.0

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        for v in vals:
            if not (self.lambda_min <= v <= self.lambda_max):
                raise ValueError(
                    f"{v} outside envelope [{self.lambda_min}, {self.lambda_max}]"
                )

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def cheby_T(n: int, x):
    """T_n(x) by the three-term recurrence. Works elementwise on arrays."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    t_prev, t = 1.0 + 0 * x, x
    if n == 0:
        return t_prev
    for _ in range(n - 1):
        t_prev, t = t, 2 * x * t - t_prev
    return t


def tau_real(x: float) -> float:
    """Root of t^2 - 2xt + 1 with |t| <= 1, for real |x| >= 1."""
    x = float(x)
    if abs(x) < 1.0:
        raise ValueError(f"tau_real needs |x| >= 1, got {x}; use tau_complex")
    root = math.sqrt((abs(x) - 1.0) * (abs(x) + 1.0))
    # reciprocal of the large root avoids cancellation for big |x|
    return math.copysign(1.0 / (abs(x) + root), x)


def tau_complex(z: complex) -> complex:
    """Root of t^2 - 2zt + 1 with the smaller modulus.

    Exact ties (|z| real and inside (-1, 1)) go to the root with
    nonnegative imaginary part.
    """
    z = complex(z)
    root = cmath.sqrt(z * z - 1.0)
    a, b = z - root, z + root
    da, db = abs(a), abs(b)
    if abs(da - db) < TIE_EPS:
        return a if a.imag >= 0 else b
    return a if da < db else b


def tau_abs(x: float) -> float:
    """|tau(x)| for real x; equals 1 on [-1, 1]."""
    if abs(x) <= 1.0:
        return 1.0
    return abs(tau_real(x))


def cheby_T_direct(n: int, x: float) -> float:
    """T_n(x) = (tau^n + tau^-n) / 2, falling back to the recurrence at |x| = 1."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    x = float(x)
    if abs(x * x - 1.0) < BRANCH_EPS:
        return cheby_T(n, x)
    if abs(x) > 1.0:
        t = tau_real(x)
        return 0.5 * (t**n + t ** (-n))
    t = tau_complex(x)
    return (0.5 * (t**n + t ** (-n))).real


def t_ratios(shift: float) -> Iterator[tuple]:
    """Yield (T_{n-1}(s)/T_n(s), T_{n-2}(s)/T_n(s)) for n = 1, 2, ...

    The raw T_n(s) overflow for large n; the ratios stay in (0, 1) when s > 1.
    For n = 1 the second ratio is reported as 0.
    """
    if shift <= 1.0:
        raise ValueError(f"shift must exceed 1, got {shift}")
    q = 1.0 / shift
    yield q, 0.0
    while True:
        q_next = 1.0 / (2.0 * shift - q)
        yield q_next, q * q_next
        q = q_next


def p_poly(n: int, x, params: ChebyParams):
    """P_n(x) = T_n(cx - d) / T_n(c - d), evaluated via the ratio recurrence."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    y = params.c * x - params.d
    p_prev, p = 1.0 + 0 * x, None
    if n == 0:
        return p_prev
    ratios = t_ratios(params.shift)
    q1, _ = next(ratios)
    p = y * q1
    for _, (q, r) in zip(range(n - 1), ratios):
        p_prev, p = p, 2.0 * q * y * p - r * p_prev
    return p


def kappa1(x: float) -> float:
    """Growth constant x + sqrt(x^2 + 1) of the worst-case switching recurrence."""
    if x < 0:
        raise ValueError(f"kappa1 needs x >= 0, got {x}")
    return x + math.sqrt(x * x + 1.0)


def conv_factor_nu(params: ChebyParams, lambda_2: float, lambda_N: float) -> float:
    """Asymptotic per-round contraction of the Chebyshev iteration."""
    if not (1.0 > lambda_2 >= lambda_N > -1.0):
        raise ValueError("need 1 > lambda_2 >= lambda_N > -1")
    c, d = params.c, params.d
    base = tau_real(c - d)
    if params.lambda_m <= lambda_N and lambda_2 <= params.lambda_M:
        return base
    return max(base / tau_abs(c * lambda_N - d), base / tau_abs(c * lambda_2 - d))


def worst_succession(n: int, lambda_min: float, lambda_max: float) -> Succession:
    """Alternating succession lambda_max, lambda_min, ... (parity swapped when
    |lambda_min| > lambda_max).

    It maximises |T_n(Lambda)| for symmetric envelopes. For strongly
    asymmetric ones (lambda_max / |lambda_min| above about 1.6) other
    successions can exceed it; kappa1(lambda_max)^n still bounds them all.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not (lambda_min < 0 < lambda_max):
        raise ValueError("need lambda_min < 0 < lambda_max")
    if abs(lambda_min) <= lambda_max:
        odd, even = lambda_max, lambda_min
    else:
        odd, even = lambda_min, lambda_max
    vals = [odd if k % 2 == 1 else even for k in range(1, n + 1)]
    return Succession(tuple(vals), lambda_min, lambda_max)


def eval_T_on_succession(s: Sequence[float] | Succession) -> float:
    """T_n(Lambda) with lambda(k) substituted at step k of the recurrence."""
    vals = list(s)
    if not vals:
        return 1.0
    t_prev, t = 1.0, vals[0]
    for lam in vals[1:]:
        t_prev, t = t, 2.0 * lam * t - t_prev
    return t

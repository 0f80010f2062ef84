"""Spectra of weight matrices, parameter selection and convergence predicates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cheby_core import ChebyParams, kappa1, tau_complex, tau_real
from .verdict import Verdict

# imaginary parts below this (relative to 1) are numerical noise
IMAG_TOL = 1e-10
# extra eigenvalues this close to 1 mean the graph is disconnected
UNIT_TOL = 1e-9
DEFAULT_MARGIN = 1e-4


class EigenError(RuntimeError):
    pass


@dataclass(frozen=True)
class Spectrum:
    real_eigs: tuple
    complex_eigs: tuple = ()
    disconnected: bool = False

    @property
    def lambda_2(self) -> float:
        return self.real_eigs[1] if len(self.real_eigs) > 1 else self.real_eigs[0]

    @property
    def lambda_N(self) -> float:
        return self.real_eigs[-1]

    @property
    def rate(self) -> float:
        """max(|lambda_2|, |lambda_N|), the per-round rate of plain iteration."""
        return max(abs(self.lambda_2), abs(self.lambda_N))

    @classmethod
    def from_values(cls, values) -> "Spectrum":
        vals = np.asarray(values, dtype=complex)
        scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
        is_real = np.abs(vals.imag) <= IMAG_TOL * scale
        real = sorted(vals[is_real].real.tolist(), reverse=True)
        cplx = sorted(vals[~is_real].tolist(), key=lambda z: (z.real, z.imag))
        if not real:
            raise ValueError("spectrum has no real eigenvalue")
        disconnected = len(real) > 1 and abs(real[1] - 1.0) < UNIT_TOL
        return cls(tuple(real), tuple(cplx), disconnected)


@dataclass(frozen=True)
class SwitchingEnvelope:
    lambda_max: float
    lambda_min: float

    def __post_init__(self):
        if not (-1.0 < self.lambda_min <= self.lambda_max < 1.0):
            raise ValueError("need -1 < lambda_min <= lambda_max < 1")

    @classmethod
    def from_spectra(cls, spectra) -> "SwitchingEnvelope":
        spectra = list(spectra)
        return cls(max(s.lambda_2 for s in spectra), min(s.lambda_N for s in spectra))


def sym_eigenvalues(w) -> Spectrum:
    a = np.array(w, dtype=float)
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12):
        raise ValueError("sym_eigenvalues needs a symmetric matrix")
    return Spectrum.from_values(np.linalg.eigvalsh(a))


def general_eigenvalues(w) -> Spectrum:
    a = np.array(w, dtype=float)
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"eigenvalue iteration did not converge: {exc}") from exc
    return Spectrum.from_values(vals)


def eigenvalues(w) -> Spectrum:
    """Symmetric solver when the matrix allows it, general otherwise."""
    a = np.asarray(w, dtype=float)
    if np.allclose(a, a.T, rtol=0.0, atol=1e-12):
        return sym_eigenvalues(a)
    return general_eigenvalues(a)


def optimal_params(s: Spectrum) -> ChebyParams:
    if s.disconnected or s.lambda_2 >= 1.0:
        raise ValueError("lambda_2 = 1: the graph is disconnected")
    return ChebyParams(s.lambda_N, s.lambda_2)


def safe_symmetric_bound(lam: float) -> float:
    """Open upper bound on lambda_M (= -lambda_m) that still beats A^n."""
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    return 2.0 * lam / (lam * lam + 1.0)


def ellipse_contains(params: ChebyParams, z: complex) -> bool:
    """Strictly inside the ellipse centred at d/c with semi-axes
    (c - d)/c and sqrt((c - d)^2 - 1)/c.

    Evaluated after the map z -> cz - d, where the ellipse has foci +-1.
    """
    z = complex(z)
    s = params.shift
    w = params.c * z - params.d
    a, b = s, math.sqrt(s * s - 1.0)
    return (w.real / a) ** 2 + (w.imag / b) ** 2 < 1.0


def tau_criterion(params: ChebyParams, z: complex) -> bool:
    """|tau(cz - d)| > tau(c - d); equivalent to ``ellipse_contains``."""
    return abs(tau_complex(params.c * complex(z) - params.d)) > tau_real(params.shift)


def check_fixed_convergence(params: ChebyParams, s: Spectrum) -> Verdict:
    edge = params.lower_edge
    if not s.lambda_N > edge:
        return Verdict(
            False,
            f"lambda_N={s.lambda_N:.6g} <= lambda_M+lambda_m-1={edge:.6g}",
            s.lambda_N,
        )
    for z in s.complex_eigs:
        if not ellipse_contains(params, z):
            return Verdict(False, f"complex eigenvalue {z} outside convergence ellipse", z)
    return Verdict(True)


def switching_product(params: ChebyParams, env: SwitchingEnvelope) -> float:
    c, d = params.c, params.d
    x = max(abs(c * env.lambda_max - d), abs(c * env.lambda_min - d))
    return kappa1(x) * tau_real(c - d)


def check_switching_convergence(params: ChebyParams, env: SwitchingEnvelope) -> Verdict:
    """Sufficient condition kappa1(max|c*lambda - d|) * tau(c - d) < 1."""
    prod = switching_product(params, env)
    if prod < 1.0:
        return Verdict(True, None, prod)
    return Verdict(False, "kappa1*tau >= 1 (sufficient condition not met)", prod)


def corollary_symmetric_param(env: SwitchingEnvelope, margin: float = DEFAULT_MARGIN) -> float:
    """Largest symmetric lambda (= lambda_M = -lambda_m) with lambda^2 < 1 - lambda_max^2."""
    if env.lambda_max < abs(env.lambda_min):
        raise ValueError("needs lambda_max >= |lambda_min|")
    bound = math.sqrt(1.0 - env.lambda_max**2)
    lam = bound - margin
    if lam <= 0.0:
        raise ValueError(f"margin {margin} leaves no admissible parameter (bound {bound})")
    return min(lam, 1.0 - margin)


def corollary_asymmetric_params(
    env: SwitchingEnvelope, margin: float = DEFAULT_MARGIN
) -> ChebyParams:
    """Interval centred on the envelope midpoint, width just under
    sqrt(4 (1 - lambda_max)(1 - lambda_min))."""
    center = 0.5 * (env.lambda_max + env.lambda_min)
    width = math.sqrt(4.0 * (1.0 - env.lambda_max) * (1.0 - env.lambda_min)) - margin
    if width <= 0.0:
        raise ValueError("margin leaves no admissible interval")
    # shrink symmetrically so the interval stays centred inside (-1, 1)
    half = min(0.5 * width, 1.0 - margin - abs(center))
    if half <= 0.0:
        raise ValueError("envelope midpoint too close to +-1")
    return ChebyParams(center - half, center + half)

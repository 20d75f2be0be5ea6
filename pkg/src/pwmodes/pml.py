"""Complex stretching profile of the absorbing layers and its diagnostics.

The layer density is ``s(x2) = 1`` inside ``|x2| <= H`` and ramps up
polynomially inside the layers,

    s(x2) = 1 + strength * phase * ((|x2| - H) / delta)**power,

with ``phase = 1 + 1j`` by default.  ``sigma_integral`` is the exact
integral of ``s`` over one layer; the truncation quality of a single
transverse Fourier mode is measured by ``dtn_coth_deviation`` and the
decay estimate behind it is checked pointwise by
``hz_lower_bound_check``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np


class PmlError(ValueError):
    pass


class OutOfDomainError(PmlError):
    """x2 outside the stretched domain |x2| <= H + delta."""


class CutoffModeError(PmlError):
    """beta_n = 0: the mode sits exactly at a cut-off value."""


class RegionViolationError(PmlError):
    """z outside the admissible region of the decay estimate."""


@dataclass(frozen=True)
class PmlProfile:
    H: float
    delta: float
    strength: float
    power: int = 3
    phase: complex = 1 + 1j

    def __post_init__(self):
        if self.H <= 0 or self.delta <= 0:
            raise ValueError("H and delta must be positive")
        if self.strength < 0:
            raise ValueError("strength must be nonnegative")
        if int(self.power) != self.power or self.power < 1:
            raise ValueError("power must be an integer >= 1")
        ph = complex(self.phase)
        if ph.real < 0 or ph.imag < 0:
            raise ValueError("phase must have nonnegative real and imaginary parts")


def eval_s(profile: PmlProfile, x2):
    """Stretching density at x2 (scalar or array).

    Equals 1 inside the physical region and is continuous across
    |x2| = H; raises OutOfDomainError beyond the outer boundary.
    """
    x2a = np.asarray(x2, dtype=float)
    ax = np.abs(x2a)
    if np.any(ax > profile.H + profile.delta + 1e-12):
        raise OutOfDomainError("x2 outside the PML-extended domain")
    ramp = np.clip((ax - profile.H) / profile.delta, 0.0, None)
    out = 1.0 + profile.strength * complex(profile.phase) * ramp ** profile.power
    if np.isscalar(x2) or x2a.ndim == 0:
        return complex(out)
    return out


def sigma_integral(profile: PmlProfile, side: str = "plus") -> complex:
    """Exact integral of s over one layer: delta + strength*phase*delta/(power+1)."""
    if side not in ("plus", "minus"):
        raise ValueError("side must be 'plus' or 'minus'")
    return profile.delta + (
        profile.strength * complex(profile.phase) * profile.delta / (profile.power + 1)
    )


def sqrt_nia(w):
    """Square root with the branch cut along the negative imaginary axis.

    Obtained by rotating the principal branch; the argument of the
    result lies in (-pi/4, 3*pi/4].
    """
    w = np.asarray(w, dtype=complex)
    out = np.exp(1j * np.pi / 4) * np.sqrt(-1j * w)
    if out.ndim == 0:
        return complex(out)
    return out


@dataclass(frozen=True)
class ModeExponents:
    """Transverse exponents of one Fourier order of a quasi-periodic field."""

    k: float
    alpha: complex
    n: int
    period: float = 2 * math.pi

    @property
    def alpha_n(self) -> complex:
        return self.alpha + 2 * math.pi * self.n / self.period

    @property
    def beta_n(self) -> complex:
        return sqrt_nia(self.k ** 2 - self.alpha_n ** 2)


def dtn_coth_deviation(exp: ModeExponents, sigma: complex) -> float:
    """Per-mode truncation error |beta_n * (coth(-i beta_n sigma) - 1)|.

    Uses coth(z) - 1 = 2 / (e^{2z} - 1); the value is evaluated in a
    stable form when the exponent is large.
    """
    beta = exp.beta_n
    if abs(beta) < 1e-14 * max(exp.k, 1.0):
        raise CutoffModeError("beta_n vanishes (cut-off value)")
    w = -2j * beta * complex(sigma)
    if w.real > 100.0:
        return abs(beta) * 2.0 * math.exp(-w.real)
    den = cmath.exp(w) - 1.0
    if den == 0:
        raise ZeroDivisionError("exp(-2i beta sigma) = 1; deviation undefined")
    return abs(beta) * abs(2.0 / den)


def hz_lower_bound_check(k: float, z: complex, sigma: complex,
                         delta_pml: float, M: float) -> dict:
    """Check |exp(-2i sqrt(k^2-z^2) sigma)| against its decay lower bound.

    The admissible region is |Im z| < delta_pml together with |Re z|
    outside [k - (M-1)*delta_pml, k + (M-1)*delta_pml]; the rate
    constant is gamma = min(gamma1, gamma2) with

        gamma1 = min sin(tau -+ arctan(1/(M-1))/2),
        gamma2 = min cos(tau -+ arctan(2(3M-1)/((3M-1)(M-1)-1))/2),

    tau = arg sigma.  Returns lhs, rhs, the case index and ok = (lhs >= rhs);
    the comparison is done in log space to avoid overflow.
    """
    if delta_pml <= 0:
        raise ValueError("delta_pml must be positive")
    if M <= 3:
        raise ValueError("M must exceed 3")
    z = complex(z)
    a = abs(z.real)
    b = z.imag
    if abs(b) >= delta_pml:
        raise RegionViolationError("|Im z| >= delta_pml")
    lo = k - (M - 1) * delta_pml
    hi = k + (M - 1) * delta_pml
    if a < lo:
        case = 1
    elif a > hi:
        case = 2
    else:
        raise RegionViolationError(
            f"|Re z| = {a} inside the excluded band [{lo}, {hi}]"
        )

    tau = cmath.phase(complex(sigma))
    half1 = math.atan(1.0 / (M - 1)) / 2
    c2 = 2 * (3 * M - 1) / ((3 * M - 1) * (M - 1) - 1)
    half2 = math.atan(c2) / 2
    gamma1 = min(math.sin(tau - half1), math.sin(tau + half1))
    gamma2 = min(math.cos(tau - half2), math.cos(tau + half2))
    gamma = min(gamma1, gamma2)

    root = sqrt_nia(k ** 2 - z ** 2)
    log_lhs = (-2j * root * complex(sigma)).real
    log_rhs = gamma * math.sqrt(delta_pml) * abs(sigma) * math.sqrt(a + k)
    return {
        "lhs": math.exp(log_lhs) if log_lhs < 700 else math.inf,
        "rhs": math.exp(log_rhs) if log_rhs < 700 else math.inf,
        "log_lhs": log_lhs,
        "log_rhs": log_rhs,
        "gamma": gamma,
        "case": case,
        "ok": bool(log_lhs >= log_rhs),
    }

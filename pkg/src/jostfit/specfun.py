"""Complex-argument Coulomb-related special functions.

Everything needed to assemble the explicitly multivalued part of the
semi-analytic Jost representation: log-gamma/digamma wrappers, the pure
Coulomb phase shift, the barrier factor C_l, the factors D_l and M, the
regular/irregular Coulomb wave functions F, G on the real axis, their
continuation H^(+/-) to complex wave numbers, and the single-valued
(Humblet) companions F~, G~.

Conventions
-----------
* hbar = c = 1; the wave number satisfies k^2 = 2*mu*E.
* The Coulomb strength z = 2*k*eta is an energy-independent constant
  (z = -1 for the attractive model potential used throughout).
* H^(+/-)(eta, rho) = F(eta, rho) -/+ i G(eta, rho); asymptotically
  H^(+/-) -> -/+ i exp(+/- i [rho - l pi/2 - eta ln(2 rho) + delta_c]).
* All derivatives returned by the wave-function routines are taken with
  respect to rho = k*r unless explicitly stated otherwise.
"""

from __future__ import annotations

import math
import cmath
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import loggamma as _loggamma, digamma as _digamma

from .errors import ContinuationUnreliableError, NumericsError

__all__ = [
    "SheetSelector",
    "Kinematics",
    "ln_gamma",
    "digamma",
    "coulomb_phase",
    "barrier_C",
    "D_factor",
    "M_factor",
    "coulomb_FG",
    "coulomb_H",
    "coulomb_H_complex",
    "humblet_tilde",
    "HumbletValues",
    "regular_tilde_series",
]

#: |Im E| beyond which the inward continuation of H^(+/-) is not trusted.
IM_E_VALIDITY_BAND = 3.5

#: |rho| above which the asymptotic series for H^(+/-) is always reliable.
_RHO_ASYMPTOTIC = 40.0

#: |rho| above which the asymptotic series is tried directly first.
_RHO_DIRECT = 18.0

#: preferred (shorter span) seed radius for the inward ODE route.
_RHO_SEED_NEAR = 24.0

#: rho below which F, F' come from the origin power series.
_RHO_SERIES = 12.0

_ODE_RTOL = 1e-13
_ODE_ATOL = 1e-13


@dataclass(frozen=True)
class SheetSelector:
    """Riemann-sheet choice: sign of k = +/- sqrt(2 mu E) and ln(eta) winding.

    ``k_branch=+1`` keeps Im k >= 0 (physical sheet); ``k_branch=-1``
    flips to Im k <= 0, where resonance zeros of the incoming Jost
    function live.  ``log_branch`` adds ``2 pi i * log_branch`` to the
    principal ln(eta) inside M(k).
    """

    k_branch: int = +1
    log_branch: int = 0

    def __post_init__(self) -> None:
        if self.k_branch not in (+1, -1):
            raise ValueError(f"k_branch must be +1 or -1, got {self.k_branch}")
        if self.log_branch != int(self.log_branch):
            raise ValueError("log_branch must be an integer")


PHYSICAL_SHEET = SheetSelector(+1, 0)
RESONANCE_SHEET = SheetSelector(-1, 0)


@dataclass(frozen=True)
class Kinematics:
    """Complex energy with the derived wave number and Sommerfeld parameter.

    Parameters
    ----------
    E : complex
        Collision energy (hbar = c = 1).
    mu : float
        Reduced mass, > 0.
    z : float
        Coulomb strength 2*k*eta, constant in E (-2 for the benchmark
        potential).
    sheet : SheetSelector
        Riemann-sheet choice used for k and for ln(eta).
    """

    E: complex
    mu: float = 1.0
    z: float = -2.0
    sheet: SheetSelector = field(default_factory=SheetSelector)

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError("reduced mass must be positive")

    @property
    def k(self) -> complex:
        """Wave number on the selected sheet; k^2 = 2*mu*E exactly."""
        s = cmath.sqrt(2.0 * self.mu * complex(self.E))
        if s.imag < 0.0 or (s.imag == 0.0 and s.real < 0.0):
            s = -s  # principal-sheet representative has Im k >= 0
        return self.sheet.k_branch * s

    @property
    def eta(self) -> complex:
        """Sommerfeld parameter; eta*k = z/2 is energy independent."""
        return self.z / (2.0 * self.k)

    def with_energy(self, E: complex) -> "Kinematics":
        return Kinematics(E, self.mu, self.z, self.sheet)

    def on_sheet(self, sheet: SheetSelector) -> "Kinematics":
        return Kinematics(self.E, self.mu, self.z, sheet)


def _check_gamma_args(*zs: complex) -> None:
    for z in zs:
        zc = complex(z)
        if zc.imag == 0.0 and zc.real <= 0.0 and zc.real == round(zc.real):
            raise ValueError(f"gamma pole at z = {zc}")


def ln_gamma(z: complex) -> complex:
    """Principal-branch log-gamma; exp(ln_gamma(z)) = Gamma(z)."""
    _check_gamma_args(z)
    return complex(_loggamma(complex(z)))


def digamma(z: complex) -> complex:
    """Logarithmic derivative of the gamma function, Gamma'(z)/Gamma(z)."""
    _check_gamma_args(z)
    return complex(_digamma(complex(z)))


def coulomb_phase(l: int, eta: complex) -> complex:
    """Pure Coulomb phase shift delta_c = arg Gamma(l+1+i eta) (real eta)."""
    _check_gamma_args(l + 1 + 1j * eta, l + 1 - 1j * eta)
    val = (_loggamma(l + 1 + 1j * complex(eta)) - _loggamma(l + 1 - 1j * complex(eta))) / 2j
    return complex(val)


def barrier_C(l: int, eta: complex) -> complex:
    """Coulomb barrier factor C_l(eta), normalized so that C_l(0) = 1.

    This is (2l+1)!! times the conventional normalization constant of the
    regular Coulomb function.
    """
    if eta == 0:
        return 1.0 + 0.0j
    _check_gamma_args(l + 1 + 1j * eta, l + 1 - 1j * eta)
    eta = complex(eta)
    expo = (
        -math.pi * eta / 2.0
        - _loggamma(l + 1.0)
        + 0.5 * (_loggamma(l + 1 + 1j * eta) + _loggamma(l + 1 - 1j * eta))
    )
    return cmath.exp(complex(expo))


def D_factor(l: int, eta: complex, k: complex) -> complex:
    """D_l = C_l(eta) * k**(l+1), single valued in k through the integer power."""
    return barrier_C(l, eta) * complex(k) ** (l + 1)


def M_factor(kin: Kinematics) -> complex:
    """The logarithmically branched factor M = 2 eta h(eta) / C_0(eta)^2.

    h(eta) = [psi(1+i eta) + psi(1-i eta)]/2 - ln(eta), with the branch of
    ln(eta) chosen so that M is real on the physical-sheet real axis (plus
    an optional ``kin.sheet.log_branch`` winding).  The eta -> 0 limit is 0.
    """
    eta = complex(kin.eta)
    if eta == 0:
        return 0.0 + 0.0j
    # Branch of ln(eta): eta stays near one half of the real axis; the cut
    # is rotated to the opposite half so that M is continuous where it is
    # evaluated, which is what makes G~ single valued across sheets.
    arg = cmath.phase(eta)
    if eta.real < 0.0 and arg <= 0.0:
        arg += 2.0 * math.pi  # eta near the negative axis: cut on arg = 0
    if kin.z < 0.0:
        # Attractive case: the physical-sheet real axis has eta < 0; shift
        # the whole branch so that M is real there.  The shift changes G~ by
        # a k -> -k invariant amount, so single-valuedness is unaffected.
        arg -= math.pi
    log_eta = math.log(abs(eta)) + 1j * arg + 2j * math.pi * kin.sheet.log_branch
    h = 0.5 * (digamma(1 + 1j * eta) + digamma(1 - 1j * eta)) - log_eta
    return 2.0 * eta * h / barrier_C(0, eta) ** 2


# ----------------------------------------------------------------------
# Coulomb wave functions
# ----------------------------------------------------------------------

_DOUBLE_FACT_ODD = [1.0, 1.0, 3.0, 15.0, 105.0, 945.0, 10395.0]


def _dfact(l: int) -> float:
    """(2l+1)!!"""
    if l + 1 < len(_DOUBLE_FACT_ODD):
        return _DOUBLE_FACT_ODD[l + 1]
    v = 1.0
    for m in range(1, 2 * l + 2, 2):
        v *= m
    return v


def regular_tilde_series(l: int, z: float, k2: complex, r: complex) -> tuple[complex, complex]:
    """Single-valued regular Coulomb companion F~_l(E, r) and dF~/dr.

    Solves u'' = [l(l+1)/r^2 + z/r - k2] u with u ~ r^(l+1)/(2l+1)!! at the
    origin, by the Frobenius series.  The coefficients depend only on z and
    k2 = 2*mu*E, so the result is manifestly single valued in E; it relates
    to the standard regular Coulomb function by F = D_l(eta, k) * F~.
    """
    b_prev2 = 0.0 + 0.0j
    b_prev = 1.0 + 0.0j
    f = b_prev
    fp = (l + 1) * b_prev
    rn = 1.0 + 0.0j  # r**n
    r = complex(r)
    small_streak = 0
    for n in range(1, 400):
        b = (z * b_prev - k2 * b_prev2) / (n * (n + 2 * l + 1))
        rn *= r
        term = b * rn
        f += term
        fp += (n + l + 1) * term
        b_prev2, b_prev = b_prev, b
        # two consecutive tiny terms: guards against zero coefficients
        small_streak = small_streak + 1 if abs(term) < 1e-17 * abs(f) else 0
        if small_streak >= 2 and n > 4:
            break
    else:
        raise NumericsError("regular Coulomb series did not converge")
    # d/dr [r^(l+1) sum b_n r^n] = r^l sum (n+l+1) b_n r^n
    ftil = r ** (l + 1) / _dfact(l) * f
    fp_total = r**l / _dfact(l) * fp
    return ftil, fp_total


def _f_regular(l: int, eta: complex, k: complex, r: complex) -> tuple[complex, complex]:
    """Standard F_l(eta, k r) and dF/drho from the origin series."""
    z = 2.0 * eta * k
    ftil, ftil_p = regular_tilde_series(l, z, k * k, r)
    D = D_factor(l, eta, k)
    return D * ftil, D * ftil_p / k


class _AsymptoticFailure(NumericsError):
    pass


def _h_asymptotic(l: int, eta: complex, rho: complex, sign: int) -> tuple[complex, complex]:
    """H^(sign) and dH/drho from the large-|rho| expansion.

    Uses the divergent asymptotic series truncated at its smallest term;
    raises if the attainable accuracy is worse than ~1e-12.
    """
    s = sign
    a = 1 + l + s * 1j * eta
    b = -l + s * 1j * eta
    w = s * 2j * rho
    term = 1.0 + 0.0j
    total = term
    total_d = 0.0 + 0.0j  # d(sum)/drho = sum_k term_k * (-k)/rho
    best = abs(term)
    n = 0
    while n < 200:
        nxt = term * (a + n) * (b + n) / ((n + 1) * w)
        if abs(nxt) >= abs(term) and n > 2:
            break
        term = nxt
        n += 1
        total += term
        total_d += term * (-n) / rho
        if abs(term) < 1e-17 * abs(total):
            break
        best = min(best, abs(term))
    if abs(term) > 1e-12 * max(1.0, abs(total)):
        raise _AsymptoticFailure(
            f"asymptotic Coulomb series stalled at |term|={abs(term):.2e} (rho={rho})"
        )
    # ln(2 rho) with the cut rotated away from rho's hemisphere (cf. M_factor)
    arg2r = cmath.phase(2 * rho)
    if complex(rho).real < 0.0 and arg2r <= 0.0:
        arg2r += 2.0 * math.pi
    log2rho = math.log(abs(2 * rho)) + 1j * arg2r
    theta = rho - eta * log2rho - l * math.pi / 2 + coulomb_phase(l, eta)
    phase = cmath.exp(s * 1j * theta)
    # paper convention: H^(+/-) = -/+ i * e^(+/- i theta) * sum
    pref = -s * 1j
    h = pref * phase * total
    hp = pref * phase * (s * 1j * (1 - eta / rho) * total + total_d)
    return h, hp


def _coulomb_ode_rhs(l: int, z: complex, k2: complex) -> Callable:
    ll1 = l * (l + 1)

    def rhs(r, y):
        w = y[0::2]
        wp = y[1::2]
        wpp = (ll1 / r**2 + z / r - k2) * w
        out = np.empty_like(y)
        out[0::2] = wp
        out[1::2] = wpp
        return out

    return rhs


def _integrate_h_inward(
    l: int, z: complex, k2: complex, r_from: float, r_to: float, seeds: np.ndarray
) -> np.ndarray:
    """Integrate Coulomb solutions (value, d/dr pairs) from r_from down to r_to."""
    rhs = _coulomb_ode_rhs(l, z, k2)
    sol = solve_ivp(
        rhs,
        (r_from, r_to),
        seeds.astype(complex),
        method="DOP853",
        rtol=_ODE_RTOL,
        atol=_ODE_ATOL,
        dense_output=False,
    )
    if not sol.success:
        raise NumericsError(f"Coulomb ODE integration failed: {sol.message}")
    return sol.y[:, -1]


def _h_pair(l: int, eta: complex, k: complex, r: float) -> tuple[complex, complex, complex, complex]:
    """(H+, dH+/drho, H-, dH-/drho) at rho = k*r for possibly complex k.

    Seeds both solutions with the asymptotic series where |rho| is large and
    carries them inward with the radial ODE, whose coefficients depend only
    on z = 2*eta*k and k^2 and are therefore sheet independent.
    """
    rho = k * r
    if abs(rho) >= _RHO_DIRECT:
        try:
            hp, hpp = _h_asymptotic(l, eta, rho, +1)
            hm, hmp = _h_asymptotic(l, eta, rho, -1)
            return hp, hpp, hm, hmp
        except _AsymptoticFailure:
            pass  # fall through to the seeded ODE route
    # Shorter integration spans limit exponential contamination of the
    # subdominant member by the dominant one at complex rho.
    for rho_seed in (_RHO_SEED_NEAR, _RHO_ASYMPTOTIC):
        r_start = rho_seed / abs(k)
        try:
            hp0, hpp0 = _h_asymptotic(l, eta, k * r_start, +1)
            hm0, hmp0 = _h_asymptotic(l, eta, k * r_start, -1)
        except _AsymptoticFailure:
            continue
        # state carries d/dr = k * d/drho
        seeds = np.array([hp0, k * hpp0, hm0, k * hmp0], dtype=complex)
        y = _integrate_h_inward(l, 2.0 * eta * k, k * k, r_start, r, seeds)
        return y[0], y[1] / k, y[2], y[3] / k
    raise NumericsError(f"no usable asymptotic seed for l={l}, eta={eta}, rho={rho}")


def _wronskian_check(k: complex, hp, hpp, hm, hmp, tol: float = 1e-8) -> None:
    # in rho: H- dH+/drho - dH-/drho H+ = 2i
    w = hm * hpp - hmp * hp
    if abs(w - 2j) > tol:
        raise ContinuationUnreliableError(
            f"Coulomb Wronskian drifted to {w} (expected 2i); continuation unreliable"
        )


def coulomb_FG(l: int, eta: float, rho: float) -> tuple[float, float, float, float]:
    """Regular and irregular Coulomb functions on the real axis.

    Returns (F, G, dF/drho, dG/drho) for real eta and rho > 0, accurate to
    ~1e-11 relative.  G is carried inward from the asymptotic region by ODE
    integration; F is replaced by its origin series at small rho, where the
    real part of H^(+) loses relative accuracy below the barrier.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    hp, hpp, _, _ = _h_pair(l, complex(eta), 1.0 + 0.0j, float(rho))
    # H+ = F - iG with all of F, G real
    F, Fp = hp.real, hpp.real
    G, Gp = -hp.imag, -hpp.imag
    if rho <= _RHO_SERIES:
        Fs, Fps = _f_regular(l, complex(eta), 1.0 + 0.0j, float(rho))
        F, Fp = Fs.real, Fps.real
    return F, G, Fp, Gp


def coulomb_H(l: int, eta: float, rho: float, sign: int) -> tuple[complex, complex]:
    """H^(sign) = F -/+ i G and its rho-derivative for real arguments."""
    F, G, Fp, Gp = coulomb_FG(l, eta, rho)
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    return F - sign * 1j * G, Fp - sign * 1j * Gp


def coulomb_H_complex(
    l: int, kin: Kinematics, r: float, sign: int, *, im_band: float = IM_E_VALIDITY_BAND
) -> tuple[complex, complex]:
    """H^(sign)(eta(k), k r) for complex k, with a reliability guard.

    The value is obtained by inward integration of the radial Coulomb
    equation from a large radius seeded with the asymptotic form (principal
    branch of the eta*ln(2 k r) phase).  Raises
    ContinuationUnreliableError when |Im E| leaves the validity band or the
    Wronskian of the carried pair drifts.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    if abs(complex(kin.E).imag) > im_band:
        raise ContinuationUnreliableError(
            f"|Im E| = {abs(complex(kin.E).imag):.3g} outside validity band {im_band}"
        )
    if r <= 0:
        raise ValueError("r must be positive")
    k = kin.k
    hp, hpp, hm, hmp = _h_pair(l, kin.eta, k, float(r))
    _wronskian_check(k, hp, hpp, hm, hmp)
    return (hp, hpp) if sign == +1 else (hm, hmp)


class HumbletValues(NamedTuple):
    """F~, G~ and their r-derivatives at one (E, r) point."""

    ftilde: complex
    gtilde: complex
    dftilde: complex
    dgtilde: complex


def humblet_tilde(l: int, kin: Kinematics, r: float) -> HumbletValues:
    """Single-valued companions of the Coulomb functions.

    Inverts F = D_l F~ and G = M D_l F~ + (k/D_l) G~: the returned values
    are invariant under k -> -k at fixed E.  Derivatives are with respect
    to r.
    """
    k = kin.k
    if k == 0:
        raise ValueError("threshold k = 0 excluded")
    eta = kin.eta
    D = D_factor(l, eta, k)
    M = M_factor(kin)
    ftil, ftil_p = regular_tilde_series(l, kin.z, k * k, r)
    hp, hpp, hm, hmp = _h_pair(l, eta, k, float(r))
    # H+ = F - iG  =>  G = -i (F - H+)
    F = D * ftil
    Fp_r = D * ftil_p  # dF/dr
    G = -1j * (F - hp)
    Gp_r = -1j * (Fp_r - k * hpp)
    gtil = (G - M * D * ftil) * D / k
    gtil_p = (Gp_r - M * D * ftil_p) * D / k
    return HumbletValues(ftil, gtil, ftil_p, gtil_p)

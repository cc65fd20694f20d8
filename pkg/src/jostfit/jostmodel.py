"""Semi-analytic Jost-function model with polynomial single-valued parts.

The Jost functions are assembled as

    f^(in/out) = exp(-/+ i delta_c) * k^l * { (k/D) A - [M +/- i] D B },

where all the explicitly multivalued energy dependence sits in the factors
delta_c, k, D and M (module ``specfun``), while A(E) and B(E) are real
polynomials.  A and B are parametrized either in the pole-product basis

    P_0(E) = prod_n (E_n - E),   P_n(E) = prod_{m != n} (E_m - E),

with real coefficients alpha_n, beta_n, or as plain truncated Taylor
expansions around a chosen E0 (the older baseline).
"""

from __future__ import annotations

import cmath
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import PoleSignal
from .specfun import (
    Kinematics,
    SheetSelector,
    D_factor,
    M_factor,
    coulomb_phase,
    humblet_tilde,
)

__all__ = [
    "PolyBasis",
    "ABParams",
    "TaylorParams",
    "Resonance",
    "poly_P",
    "eval_A_B",
    "eval_A_B_taylor",
    "jost_from_AB",
    "s_matrix_model",
    "sigma_model",
    "AB_from_rmatrix",
    "ab_params_to_json",
    "ab_params_from_json",
]

_LABELS = ("resonance", "background")


@dataclass(frozen=True)
class PolyBasis:
    """Basis energies E_n (n = 1..N) for one partial wave, with role tags."""

    energies: tuple
    labels: tuple

    def __post_init__(self):
        energies = tuple(float(e) for e in self.energies)
        labels = tuple(self.labels)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "labels", labels)
        if len(labels) != len(energies):
            raise ValueError("one label per basis energy required")
        for lab in labels:
            if lab not in _LABELS:
                raise ValueError(f"unknown label {lab!r}; expected one of {_LABELS}")
        if len(set(energies)) != len(energies):
            # coincident energies make P_0 lose a simple root
            raise ValueError(f"basis energies must be distinct, got {energies}")

    @property
    def N(self) -> int:
        return len(self.energies)


@dataclass(frozen=True)
class ABParams:
    """Real coefficients of A, B in the pole-product basis for one l."""

    l: int
    basis: PolyBasis
    alpha: tuple
    beta: tuple

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        n_coef = self.basis.N + 1
        if len(self.alpha) != n_coef or len(self.beta) != n_coef:
            raise ValueError(f"need {n_coef} alpha and beta coefficients each")
        for c in (*self.alpha, *self.beta):
            if not np.isfinite(c):
                raise ValueError("coefficients must be finite")
        if self.l < 0:
            raise ValueError("l must be >= 0")


@dataclass(frozen=True)
class TaylorParams:
    """Truncated Taylor coefficients of A, B around E0 (baseline variant)."""

    l: int
    a: tuple
    b: tuple
    E0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        if len(self.a) != len(self.b):
            raise ValueError("a and b must have the same length")
        if not self.a:
            raise ValueError("need at least the constant coefficients")

    @property
    def order(self) -> int:
        return len(self.a) - 1


@dataclass(frozen=True)
class Resonance:
    """A located zero of f_in, reported as resonance energy and width."""

    l: int
    E_complex: complex
    sheet: SheetSelector = field(default_factory=lambda: SheetSelector(-1, 0))

    @property
    def E_r(self) -> float:
        return complex(self.E_complex).real

    @property
    def Gamma(self) -> float:
        return -2.0 * complex(self.E_complex).imag


def poly_P(basis: PolyBasis, n: int, E):
    """Pole-product polynomial P_n(E); n = 0 gives the full product.

    P_n for n >= 1 is the explicit product over m != n, so evaluation at
    E = E_n is regular (no division by zero).
    """
    if not 0 <= n <= basis.N:
        raise ValueError(f"n must be in 0..{basis.N}")
    out = np.ones_like(np.asarray(E, dtype=complex))
    for m, Em in enumerate(basis.energies, start=1):
        if m == n:
            continue
        out = out * (Em - np.asarray(E, dtype=complex))
    if np.ndim(E) == 0:
        return complex(out)
    return out


def eval_A_B(params: ABParams, E):
    """A(E), B(E) as linear combinations over the P_n basis."""
    A = 0.0
    B = 0.0
    for n in range(params.basis.N + 1):
        P = poly_P(params.basis, n, E)
        A = A + params.alpha[n] * P
        B = B + params.beta[n] * P
    return A, B


def eval_A_B_taylor(params: TaylorParams, E):
    """A(E), B(E) as truncated Taylor polynomials around E0."""
    x = np.asarray(E, dtype=complex) - params.E0
    A = 0.0
    B = 0.0
    xn = np.ones_like(x)
    for an, bn in zip(params.a, params.b):
        A = A + an * xn
        B = B + bn * xn
        xn = xn * x
    if np.ndim(E) == 0:
        return complex(A), complex(B)
    return A, B


def _eval_any(params, E):
    if isinstance(params, ABParams):
        return eval_A_B(params, E)
    if isinstance(params, TaylorParams):
        return eval_A_B_taylor(params, E)
    raise TypeError(f"unsupported parameter type {type(params).__name__}")


def jost_from_AB(kin: Kinematics, l: int, A: complex, B: complex) -> tuple[complex, complex]:
    """Assemble (f_in, f_out) from A, B and the explicit Coulomb factors."""
    k = kin.k
    if k == 0:
        raise ValueError("threshold k = 0 excluded")
    eta = kin.eta
    delta = coulomb_phase(l, eta)
    D = D_factor(l, eta, k)
    M = M_factor(kin)
    kl = k**l
    common = (k / D) * A
    f_in = cmath.exp(-1j * delta) * kl * (common - (M + 1j) * D * B)
    f_out = cmath.exp(1j * delta) * kl * (common - (M - 1j) * D * B)
    return f_in, f_out


def s_matrix_model(kin: Kinematics, l: int, params) -> complex:
    """S_l(E) = e^(2 i delta_c) (kA - [M-i]D^2 B) / (kA - [M+i]D^2 B)."""
    k = kin.k
    if k == 0:
        raise ValueError("threshold k = 0 excluded")
    eta = kin.eta
    A, B = _eval_any(params, kin.E)
    delta = coulomb_phase(l, eta)
    D2 = D_factor(l, eta, k) ** 2
    M = M_factor(kin)
    num = k * A - (M - 1j) * D2 * B
    den = k * A - (M + 1j) * D2 * B
    if den == 0:
        raise PoleSignal(f"S-matrix pole at E = {kin.E} (l = {l})")
    return cmath.exp(2j * delta) * num / den


def sigma_model(params_per_l, E: float, l_max: int, *, mu: float = 1.0, z: float = -2.0) -> tuple[list, float]:
    """Partial cross-sections sigma_l and their sum from the fitted model."""
    if E <= 0:
        raise ValueError("E must be positive for cross-sections")
    sigmas = []
    for l in range(l_max + 1):
        params = params_per_l[l]
        kin = Kinematics(E, mu=mu, z=z)
        S = s_matrix_model(kin, l, params)
        k2 = abs(kin.k) ** 2
        sigmas.append(float(np.pi / k2 * (2 * l + 1) * abs(S - 1.0) ** 2))
    return sigmas, float(sum(sigmas))


def AB_from_rmatrix(rp, kin: Kinematics, l: int) -> tuple[complex, complex]:
    """A, B equivalent to a phenomenological R-matrix model.

    A = G~ - [a G~' - B_R G~] R,  B = -F~ + [a F~' - B_R F~] R, with F~, G~
    and their r-derivatives taken at the channel radius (the common factor
    that cancels in the S-matrix is set to 1).  Single valued in E.
    """
    from .rmatrix import r_matrix_value

    a = rp.a
    hv = humblet_tilde(l, kin, a)
    R = r_matrix_value(rp, kin.E)
    A = hv.gtilde - (a * hv.dgtilde - rp.B_R * hv.gtilde) * R
    B = -hv.ftilde + (a * hv.dftilde - rp.B_R * hv.ftilde) * R
    return A, B


def ab_params_to_json(params: ABParams) -> str:
    """Serialize to JSON text; float round-trip is exact (repr-based)."""
    return json.dumps(
        {
            "l": params.l,
            "N": params.basis.N,
            "energies": list(params.basis.energies),
            "labels": list(params.basis.labels),
            "alpha": list(params.alpha),
            "beta": list(params.beta),
        },
        indent=2,
    )


def ab_params_from_json(text: str) -> ABParams:
    d = json.loads(text)
    basis = PolyBasis(tuple(d["energies"]), tuple(d["labels"]))
    if basis.N != d.get("N", basis.N):
        raise ValueError("inconsistent N in serialized parameters")
    return ABParams(l=int(d["l"]), basis=basis, alpha=tuple(d["alpha"]), beta=tuple(d["beta"]))

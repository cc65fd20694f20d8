"""Phenomenological R-matrix baseline model.

R_l(E) = sum_n gamma_n^2 / (E_n - E) at a channel radius a, with the
S-matrix expressed through the Coulomb functions H^(+/-) evaluated at r = a:

    S = -e^(2 i delta_c) {H- - [a H-' - B_R H-] R} / {H+ - [a H+' - B_R H+] R}.

Pole continuation to complex E reuses the same expression with the H^(+/-)
carried off the real axis by the radial-equation integrator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import PoleSignal
from .specfun import Kinematics, SheetSelector, coulomb_H_complex, coulomb_phase

__all__ = [
    "RParams",
    "r_matrix_value",
    "s_matrix_rmatrix",
    "rmatrix_pole_search",
    "r_params_to_json",
    "r_params_from_json",
]

#: paper's channel radii per partial wave
DEFAULT_CHANNEL_RADII = (0.53, 1.31, 0.94)


@dataclass(frozen=True)
class RParams:
    """R-matrix data for one partial wave."""

    l: int
    energies: tuple
    gammas: tuple
    a: float
    B_R: float = 0.0
    labels: tuple = ()

    def __post_init__(self):
        energies = tuple(float(e) for e in self.energies)
        gammas = tuple(float(g) for g in self.gammas)
        labels = tuple(self.labels) if self.labels else ("",) * len(energies)
        object.__setattr__(self, "energies", energies)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "labels", labels)
        if len(gammas) != len(energies) or len(labels) != len(energies):
            raise ValueError("energies, gammas and labels must have equal length")
        if self.a <= 0:
            raise ValueError("channel radius must be positive")
        if self.l < 0:
            raise ValueError("l must be >= 0")

    @property
    def N(self) -> int:
        return len(self.energies)


def r_matrix_value(rp: RParams, E):
    """Sum of pole terms gamma_n^2 / (E_n - E)."""
    E = complex(E) if np.ndim(E) == 0 else np.asarray(E, dtype=complex)
    out = 0.0
    for En, gn in zip(rp.energies, rp.gammas):
        d = En - E
        if np.ndim(E) == 0 and d == 0:
            raise PoleSignal(f"R-matrix evaluated at its pole E = {En}")
        out = out + gn * gn / d
    return out


def _bracket(rp: RParams, H: complex, Hp_r: complex, R: complex) -> complex:
    # H - [a dH/dr - B_R H] R, everything at r = a
    return H - (rp.a * Hp_r - rp.B_R * H) * R


def s_matrix_rmatrix(rp: RParams, kin: Kinematics) -> complex:
    """S_l(E) of the R-matrix model at real or complex E."""
    import cmath

    k = kin.k
    delta = coulomb_phase(rp.l, kin.eta)
    hp, hpp = coulomb_H_complex(rp.l, kin, rp.a, +1)
    hm, hmp = coulomb_H_complex(rp.l, kin, rp.a, -1)
    R = r_matrix_value(rp, kin.E)
    num = _bracket(rp, hm, k * hmp, R)
    den = _bracket(rp, hp, k * hpp, R)
    if den == 0:
        raise PoleSignal(f"R-matrix S-matrix pole at E = {kin.E} (l = {rp.l})")
    return -cmath.exp(2j * delta) * num / den


def rmatrix_pole_search(rp: RParams, kin_template: Kinematics, region) -> list:
    """Resonances as zeros of the Eq.-(18)-style denominator in the region.

    The denominator is multiplied by prod_n (E_n - E) so the function handed
    to the winding-number search is analytic across the R-matrix poles (all
    of which sit on the real axis, outside a resonance region).
    """
    from .jostmodel import Resonance
    from .poles import find_zeros

    def den_entire(E: complex) -> complex:
        kin = Kinematics(E, mu=kin_template.mu, z=kin_template.z, sheet=region.sheet)
        hp, hpp = coulomb_H_complex(rp.l, kin, rp.a, +1)
        R = r_matrix_value(rp, E)
        val = _bracket(rp, hp, kin.k * hpp, R)
        for En in rp.energies:
            val = val * (En - E)
        return val

    zeros = find_zeros(den_entire, region)
    res = [Resonance(l=rp.l, E_complex=z0, sheet=region.sheet) for z0 in zeros]
    return sorted(res, key=lambda r: r.E_r)


def r_params_to_json(rp: RParams) -> str:
    return json.dumps(
        {
            "l": rp.l,
            "energies": list(rp.energies),
            "labels": list(rp.labels),
            "gammas": list(rp.gammas),
            "a": rp.a,
            "B_R": rp.B_R,
        },
        indent=2,
    )


def r_params_from_json(text: str) -> RParams:
    d = json.loads(text)
    return RParams(
        l=int(d["l"]),
        energies=tuple(d["energies"]),
        gammas=tuple(d["gammas"]),
        a=float(d["a"]),
        B_R=float(d.get("B_R", 0.0)),
        labels=tuple(d.get("labels", ())),
    )

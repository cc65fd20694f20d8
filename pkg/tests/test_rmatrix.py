"""R-matrix baseline: pole sum, S-matrix unitarity, serialization."""

import mpmath as mp
import numpy as np
import pytest

from jostfit.errors import PoleSignal
from jostfit.rmatrix import (
    RParams,
    r_matrix_value,
    r_params_from_json,
    r_params_to_json,
    s_matrix_rmatrix,
)
from jostfit.specfun import Kinematics

mp.mp.dps = 40

# benchmark comparison-fit parameter sets (channel radii 0.53, 1.31, 0.94)
RP = {
    0: RParams(l=0, energies=(0.0, 1.78, 4.0, 20.0), gammas=(0.36862, 0.0059070, 0.44958, 0.88622), a=0.53),
    1: RParams(l=1, energies=(0.0, 3.85, 10.0, 20.0), gammas=(1.4806, 0.19240, 0.00010105, 3.0343), a=1.31),
    2: RParams(l=2, energies=(0.0, 4.9, 20.0), gammas=(1.2198, 0.3462, 1.5640), a=0.94),
}


def test_r_matrix_value_trivial():
    rp = RParams(l=0, energies=(2.0,), gammas=(1.0,), a=0.5)
    assert r_matrix_value(rp, 1.0) == pytest.approx(1.0)
    rp0 = RParams(l=0, energies=(2.0, 5.0), gammas=(0.0, 0.0), a=0.5)
    assert r_matrix_value(rp0, 1.0) == 0.0


def test_r_matrix_value_against_mpmath():
    rp = RP[0]
    E = mp.mpf("3.0")
    ref = sum(mp.mpf(repr(g)) ** 2 / (mp.mpf(repr(En)) - E) for En, g in zip(rp.energies, rp.gammas))
    assert r_matrix_value(rp, 3.0).real == pytest.approx(float(ref), rel=1e-14)


def test_r_matrix_pole_signal():
    rp = RParams(l=0, energies=(2.0,), gammas=(1.0,), a=0.5)
    with pytest.raises(PoleSignal):
        r_matrix_value(rp, 2.0)


def test_rparams_validation():
    with pytest.raises(ValueError):
        RParams(l=0, energies=(1.0, 2.0), gammas=(1.0,), a=0.5)
    with pytest.raises(ValueError):
        RParams(l=0, energies=(1.0,), gammas=(1.0,), a=-0.5)


def test_s_matrix_unitarity_real_axis():
    for l, rp in RP.items():
        for E in np.linspace(1.7, 5.0, 9):
            S = s_matrix_rmatrix(rp, Kinematics(float(E), z=-2.0))
            assert abs(abs(S) - 1.0) < 1e-10


def test_s_matrix_zero_R_unimodular():
    rp = RParams(l=1, energies=(2.0,), gammas=(0.0,), a=1.31)
    S = s_matrix_rmatrix(rp, Kinematics(2.7, z=-2.0))
    assert abs(abs(S) - 1.0) < 1e-10


def test_rparams_json_roundtrip():
    back = r_params_from_json(r_params_to_json(RP[1]))
    assert back == RP[1]

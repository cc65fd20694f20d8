"""Model-assembly checks: basis polynomials, Jost/S identities, R-matrix map."""

import cmath

import mpmath as mp
import numpy as np
import pytest

from jostfit.jostmodel import (
    ABParams,
    AB_from_rmatrix,
    PolyBasis,
    Resonance,
    TaylorParams,
    ab_params_from_json,
    ab_params_to_json,
    eval_A_B,
    eval_A_B_taylor,
    jost_from_AB,
    poly_P,
    s_matrix_model,
    sigma_model,
)
from jostfit.rmatrix import RParams, s_matrix_rmatrix
from jostfit.specfun import Kinematics, SheetSelector

mp.mp.dps = 40

BASIS0 = PolyBasis((1.78, 4.0, 0.0), ("resonance", "resonance", "background"))


def make_params(seed=0, basis=BASIS0, l=0):
    rng = np.random.default_rng(seed)
    n = basis.N + 1
    return ABParams(l=l, basis=basis, alpha=tuple(rng.normal(size=n)), beta=tuple(rng.normal(size=n)))


# -- basis polynomials -----------------------------------------------------


def test_poly_P_single_energy():
    b = PolyBasis((2.0,), ("resonance",))
    assert poly_P(b, 0, 1.0) == pytest.approx(1.0)
    assert poly_P(b, 0, 0.0) == pytest.approx(2.0)
    assert poly_P(b, 1, 123.0) == pytest.approx(1.0)


def test_poly_P_roots_and_regularity():
    assert poly_P(BASIS0, 0, 1.78) == pytest.approx(0.0, abs=1e-12)
    # P_n at its own energy is the product over the others, not 0/0
    assert poly_P(BASIS0, 1, 1.78) == pytest.approx((4.0 - 1.78) * (0.0 - 1.78))
    with pytest.raises(ValueError):
        poly_P(BASIS0, 4, 1.0)


def test_poly_basis_validation():
    with pytest.raises(ValueError):
        PolyBasis((1.0, 1.0), ("resonance", "background"))
    with pytest.raises(ValueError):
        PolyBasis((1.0, 2.0), ("resonance",))
    with pytest.raises(ValueError):
        PolyBasis((1.0,), ("wiggly",))


def test_eval_A_B_pure_P0_and_realness():
    p = ABParams(l=0, basis=BASIS0, alpha=(1.0, 0, 0, 0), beta=(0, 0, 0, 0))
    A, B = eval_A_B(p, 3.0)
    assert A == pytest.approx(poly_P(BASIS0, 0, 3.0))
    assert B == 0.0
    p2 = make_params(1)
    A, B = eval_A_B(p2, 2.5)
    assert abs(complex(A).imag) < 1e-14
    assert abs(complex(B).imag) < 1e-14


def test_eval_A_B_against_expanded_polynomial():
    p = make_params(2)
    E = mp.mpf("3.0")
    ref_A = mp.mpf(0)
    for n, an in enumerate(p.alpha):
        term = mp.mpf(1)
        for m, Em in enumerate(p.basis.energies, start=1):
            if m != n:
                term *= mp.mpf(repr(Em)) - E
        ref_A += mp.mpf(repr(an)) * term
    A, _ = eval_A_B(p, 3.0)
    assert complex(A).real == pytest.approx(float(ref_A), rel=1e-13)


def test_taylor_params():
    t = TaylorParams(l=0, a=(1.0, 2.0), b=(3.0, -1.0), E0=2.0)
    assert t.order == 1
    A, B = eval_A_B_taylor(t, 2.0)
    assert (A, B) == (1.0, 3.0)
    A, B = eval_A_B_taylor(t, 3.0)
    assert (A, B) == (3.0, 2.0)
    with pytest.raises(ValueError):
        TaylorParams(l=0, a=(1.0,), b=(1.0, 2.0))


def test_taylor_and_pole_product_same_polynomial():
    # the degree-1 polynomial 5 - E in both bases
    b = PolyBasis((5.0,), ("background",))
    p = ABParams(l=0, basis=b, alpha=(1.0, 0.0), beta=(0.0, 0.0))
    t = TaylorParams(l=0, a=(5.0, -1.0), b=(0.0, 0.0), E0=0.0)
    for E in (0.3, 2.0, 4.9):
        assert eval_A_B(p, E)[0] == pytest.approx(eval_A_B_taylor(t, E)[0], rel=1e-13)


# -- Jost assembly and S-matrix --------------------------------------------


def test_jost_neutral_collapse():
    # B = 0, no Coulomb: the factors cancel and f = A
    kin = Kinematics(2.0, z=0.0)
    f_in, f_out = jost_from_AB(kin, 1, 3.7, 0.0)
    assert f_in == pytest.approx(3.7, rel=1e-12)
    assert f_out == pytest.approx(3.7, rel=1e-12)


def test_jost_moduli_equal_on_real_axis():
    kin = Kinematics(2.6, z=-2.0)
    f_in, f_out = jost_from_AB(kin, 0, 1.3, 0.4)
    assert abs(f_in) == pytest.approx(abs(f_out), rel=1e-12)


def test_s_matrix_is_jost_ratio():
    p = make_params(3)
    for E in (1.9, 3.3, 4.8):
        kin = Kinematics(E, z=-2.0)
        A, B = eval_A_B(p, E)
        f_in, f_out = jost_from_AB(kin, 0, A, B)
        assert s_matrix_model(kin, 0, p) == pytest.approx(f_out / f_in, rel=1e-12)


def test_s_matrix_pure_coulomb_when_B_zero():
    from jostfit.specfun import coulomb_phase

    p = ABParams(l=0, basis=BASIS0, alpha=(1.0, 0, 0, 0), beta=(0, 0, 0, 0))
    kin = Kinematics(2.0, z=-2.0)
    assert s_matrix_model(kin, 0, p) == pytest.approx(
        cmath.exp(2j * coulomb_phase(0, kin.eta)), rel=1e-12
    )


def test_model_unitarity_real_axis():
    for seed in range(3):
        p = make_params(seed)
        for E in np.linspace(1.7, 5.0, 9):
            S = s_matrix_model(Kinematics(float(E), z=-2.0), 0, p)
            assert abs(abs(S) - 1.0) < 1e-12


def test_jost_product_sheet_invariant_neutral():
    # without the Coulomb factors both braces swap under k -> -k, so the
    # product f_in * f_out is branch independent; with a charged pair the
    # barrier factor C_l(-eta)^2 = e^(2 pi eta) C_l(eta)^2 breaks this for
    # the product while all observables stay single valued through A, B
    p = make_params(5)
    E = 3.0 - 0.4j
    A, B = eval_A_B(p, E)
    for l in range(3):
        kp = Kinematics(E, z=0.0, sheet=SheetSelector(+1, 0))
        km = Kinematics(E, z=0.0, sheet=SheetSelector(-1, 0))
        fp = jost_from_AB(kp, l, A, B)
        fm = jost_from_AB(km, l, A, B)
        prod_p = fp[0] * fp[1]
        prod_m = fm[0] * fm[1]
        assert abs(prod_p - prod_m) < 1e-10 * abs(prod_p)


def test_eval_A_B_single_valued():
    # polynomials in E: identical no matter which k branch the caller uses
    p = make_params(5)
    for E in (3.0 - 0.4j, 1.9 + 0.2j):
        A1, B1 = eval_A_B(p, E)
        A2, B2 = eval_A_B(p, E)
        assert (A1, B1) == (A2, B2)


def test_sigma_model_nonnegative():
    params = tuple(make_params(seed=l, l=l) for l in range(3))
    sig, tot = sigma_model(params, 2.2, 2)
    assert all(s >= 0 for s in sig)
    assert tot == pytest.approx(sum(sig))
    with pytest.raises(ValueError):
        sigma_model(params, -1.0, 2)


def test_resonance_conversion():
    r = Resonance(l=1, E_complex=4.0 - 0.7j)
    assert r.E_r == 4.0
    assert r.Gamma == pytest.approx(1.4)


# -- R-matrix equivalence --------------------------------------------------


RP0 = RParams(l=0, energies=(0.0, 1.78, 4.0, 20.0), gammas=(0.36862, 0.0059070, 0.44958, 0.88622), a=0.53)


def test_AB_from_rmatrix_zero_R():
    from jostfit.specfun import humblet_tilde

    rp = RParams(l=0, energies=(2.0,), gammas=(0.0,), a=0.53)
    kin = Kinematics(3.0, z=-2.0)
    A, B = AB_from_rmatrix(rp, kin, 0)
    hv = humblet_tilde(0, kin, 0.53)
    assert A == pytest.approx(hv.gtilde, rel=1e-12)
    assert B == pytest.approx(-hv.ftilde, rel=1e-12)


def test_rmatrix_equivalence_table_params():
    for E in np.linspace(1.7, 5.0, 7):
        kin = Kinematics(float(E), z=-2.0)
        A, B = AB_from_rmatrix(RP0, kin, 0)
        f_in, f_out = jost_from_AB(kin, 0, A, B)
        S_direct = s_matrix_rmatrix(RP0, kin)
        assert abs(f_out / f_in - S_direct) < 1e-10


def test_ab_json_roundtrip():
    p = make_params(9)
    back = ab_params_from_json(ab_params_to_json(p))
    assert back == p


def test_ab_params_validation():
    with pytest.raises(ValueError):
        ABParams(l=0, basis=BASIS0, alpha=(1.0,), beta=(1.0,))
    with pytest.raises(ValueError):
        ABParams(l=0, basis=BASIS0, alpha=(1.0, 2.0, 3.0, float("nan")), beta=(0, 0, 0, 0))

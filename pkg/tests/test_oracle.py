"""Exact-solver checks: free motion, unitarity, dataset plumbing."""

import math

import numpy as np
import pytest

from jostfit.oracle import (
    CrossSectionDataset,
    IntegrationSettings,
    PotentialSpec,
    cross_sections_exact,
    dataset_from_csv,
    dataset_to_csv,
    generate_dataset,
    potential_value,
    s_matrix_exact,
    solve_jost,
)
from jostfit.specfun import SheetSelector

SPEC = PotentialSpec()


def test_potential_value():
    assert potential_value(SPEC, 1.0) == pytest.approx(7.5 * math.exp(-1) - 1.0, rel=1e-14)
    # short-range shape peaks at r = 2
    r2 = 7.5 * 4 * math.exp(-2.0)
    assert r2 > 7.5 * 1 * math.exp(-1.0)
    assert r2 > 7.5 * 9 * math.exp(-3.0)
    assert abs(potential_value(SPEC, 500.0) + 1.0 / 500.0) < 1e-10
    with pytest.raises(ValueError):
        potential_value(SPEC, 0.0)


def test_free_motion_jost_unity():
    free = PotentialSpec(strength=0.0, coulomb_z=0.0)
    for l in range(3):
        f_in, f_out = solve_jost(free, l, 2.3)
        assert f_in == pytest.approx(1.0, abs=1e-7)
        assert f_out == pytest.approx(1.0, abs=1e-7)
        assert s_matrix_exact(free, l, 2.3) == pytest.approx(1.0, abs=1e-7)


def test_unitarity_on_real_grid():
    for E in np.linspace(1.7, 5.0, 12):
        for l in range(3):
            S = s_matrix_exact(SPEC, l, float(E))
            assert abs(abs(S) - 1.0) < 1e-8


def test_jost_conjugacy_real_E():
    f_in, f_out = solve_jost(SPEC, 0, 3.1)
    assert abs(abs(f_in) - abs(f_out)) < 1e-9 * abs(f_in)


def test_sharp_resonance_is_jost_zero():
    E_res = complex(1.780524536, -9.5719e-5 / 2)
    f_in, f_out = solve_jost(SPEC, 0, E_res, sheet=SheetSelector(-1, 0))
    assert abs(f_in) < 1e-5 * abs(f_out)


def test_r_max_independence():
    a = solve_jost(SPEC, 0, 2.5, IntegrationSettings(r_max=60.0))[0]
    b = solve_jost(SPEC, 0, 2.5, IntegrationSettings(r_max=120.0))[0]
    assert abs(a - b) < 1e-9 * abs(a)


def test_rotated_ray_matches_real_axis():
    a = solve_jost(SPEC, 1, 2.5)[0]
    b = solve_jost(SPEC, 1, 2.5, IntegrationSettings(rotation_theta=0.3))[0]
    assert abs(a - b) < 1e-8 * abs(a)


def test_cross_sections_positive_and_bounded():
    for E in (1.8, 3.0, 4.6):
        sig, tot = cross_sections_exact(SPEC, E, 2)
        k2 = 2.0 * E
        for l, s in enumerate(sig):
            assert 0.0 <= s <= 4.0 * math.pi * (2 * l + 1) / k2 * (1 + 1e-12)
        assert tot == pytest.approx(sum(sig))


def test_generate_dataset_basic():
    ds = generate_dataset(SPEC, 2.0, 3.0, 2, 0)
    assert len(ds.points) == 2
    assert ds.points[0][0] == 2.0 and ds.points[1][0] == 3.0
    # values equal the direct oracle bit-for-bit
    _, tot = cross_sections_exact(SPEC, 2.0, 0)
    assert ds.points[0][1] == tot


def test_generate_dataset_window_and_determinism(tmp_path):
    ds1 = generate_dataset(SPEC, 2.0, 3.0, 6, 0, window=(2.4, 2.6), window_points=2)
    ds2 = generate_dataset(SPEC, 2.0, 3.0, 6, 0, window=(2.4, 2.6), window_points=2)
    assert ds1.points == ds2.points
    E = ds1.energies
    assert ((E >= 2.4) & (E <= 2.6)).sum() >= 2
    with pytest.raises(ValueError):
        generate_dataset(SPEC, 2.0, 3.0, 6, 0, window=(1.0, 2.5), window_points=2)
    with pytest.raises(ValueError):
        generate_dataset(SPEC, 2.0, 3.0, 6, 0, window_points=2)


def test_delta_policies():
    ds = generate_dataset(SPEC, 2.0, 2.5, 2, 0, delta_policy="relative:0.1")
    for E, s, d in ds.points:
        assert d == pytest.approx(max(0.1 * s, 1e-12))
    with pytest.raises(ValueError):
        generate_dataset(SPEC, 2.0, 2.5, 2, 0, delta_policy="bogus")


def test_dataset_csv_roundtrip(tmp_path):
    ds = generate_dataset(SPEC, 2.0, 2.5, 3, 1)
    path = tmp_path / "d.csv"
    dataset_to_csv(ds, path)
    back = dataset_from_csv(path)
    assert back.points == ds.points
    assert back.l_max == ds.l_max
    assert back.provenance == ds.provenance


def test_dataset_validation():
    with pytest.raises(ValueError):
        CrossSectionDataset(points=((2.0, 1.0, 1.0), (1.5, 1.0, 1.0)), l_max=0)
    with pytest.raises(ValueError):
        CrossSectionDataset(points=((2.0, -1.0, 1.0),), l_max=0)
    with pytest.raises(ValueError):
        CrossSectionDataset(points=((2.0, 1.0, 0.0),), l_max=0)

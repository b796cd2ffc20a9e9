from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crmot.angular import clebsch_gordan
from crmot.atomic import Level
from crmot.structure import (ConfigurationError, StateLabel, TrackingError, eigenlevels, eigensystem,
                             find_crossing, hamiltonian, locate_crossing, product_basis,
                             strength_matrix, transition_strength, zero_field_energy)
from crmot.units import MU_B_MHZ_PER_G

L = StateLabel.of


def coupled_oracle(level, I, B):
    """Same Hamiltonian built independently: diagonal in |F mF> at zero
    field, rotated into the product basis with CG coefficients."""
    J, I = Fraction(level.J), Fraction(I)
    mj2, mi2 = product_basis(int(2 * J), int(2 * I))
    cols, energies = [], []
    F = abs(J - I)
    while F <= J + I:
        mF = -F
        while mF <= F:
            v = np.array([clebsch_gordan(J, Fraction(a, 2), I, Fraction(b, 2), F, mF) for a, b in zip(mj2, mi2)])
            cols.append(v)
            K = F * (F + 1) - I * (I + 1) - J * (J + 1)
            e = 0.5 * level.A * float(K)
            if level.B and I >= 1 and J >= 1:
                e += level.B * float(Fraction(3, 2) * K * (K + 1) - 2 * I * (I + 1) * J * (J + 1)) / float(
                    4 * I * (2 * I - 1) * J * (2 * J - 1))
            energies.append(e)
            mF += 1
        F += 1
    U = np.array(cols).T
    H = U @ np.diag(energies) @ U.T
    H += np.diag(level.g_J * MU_B_MHZ_PER_G * B * mj2 / 2.0)
    return H


def test_I0_is_linear_zeeman(cr52):
    H = hamiltonian(cr52.ground, 0, 123.0)
    m = np.arange(3, -4, -1)
    assert np.allclose(H, np.diag(2.0 * MU_B_MHZ_PER_G * 123.0 * m), atol=1e-12)


def test_zero_field_multiplicities(cr53):
    es = eigensystem(cr53.ground, cr53.I, 0.0)
    vals, counts = np.unique(np.round(es.energies, 8), return_counts=True)
    assert sorted(counts.tolist()) == [4, 6, 8, 10]
    for lab, e in zip(es.labels, es.energies):
        assert e == pytest.approx(zero_field_energy(cr53.ground, cr53.I, lab.F), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("B", [0.0, 2.0, 25.0, -260.0])
def test_matches_coupled_basis_oracle(cr53, B):
    for lv in (cr53.ground, cr53.excited):
        ours = np.linalg.eigvalsh(hamiltonian(lv, cr53.I, B))
        ref = np.linalg.eigvalsh(coupled_oracle(lv, cr53.I, B))
        assert np.allclose(ours, ref, atol=1e-9)


def test_quadrupole_term_against_oracle():
    lv = Level("X", Fraction(2), 1.3, A=-40.0, B=17.0)
    for B in (0.0, 11.0):
        ours = np.linalg.eigvalsh(hamiltonian(lv, Fraction(3, 2), B))
        ref = np.linalg.eigvalsh(coupled_oracle(lv, Fraction(3, 2), B))
        assert np.allclose(ours, ref, atol=1e-9)


def test_missing_constants_rejected():
    lv = Level("X", Fraction(3), 2.0, A=None, B=None)
    with pytest.raises(ConfigurationError):
        hamiltonian(lv, Fraction(3, 2), 1.0)
    hamiltonian(lv, 0, 1.0)  # fine without nuclear spin


@settings(max_examples=40, deadline=None)
@given(st.floats(-500, 500))
def test_trace_block_and_orthonormality(cr53, B):
    lv = cr53.excited
    H = hamiltonian(lv, cr53.I, B)
    es = eigensystem(lv, cr53.I, B)
    assert np.allclose(H, H.T)
    assert es.energies.sum() == pytest.approx(np.trace(H), rel=1e-9, abs=1e-9)
    assert np.allclose(np.sort(es.energies), np.linalg.eigvalsh(H), atol=1e-10)
    V = es.vectors
    assert np.allclose(V.T @ V, np.eye(len(V)), atol=1e-10)
    mj2, mi2 = product_basis(lv.J2, cr53.I2)
    for n, lab in enumerate(es.labels):
        support = np.abs(V[:, n]) > 1e-12
        assert set((mj2 + mi2)[support].tolist()) == {lab.mF2}
    # block-diagonal
    mf = mj2 + mi2
    assert np.all(H[mf[:, None] != mf[None, :]] == 0.0)


def test_stretched_state_is_linear(cr53):
    sets = eigenlevels(cr53.excited, cr53.I, np.arange(0, 50.001, 0.25))
    e = np.array([s.energy(L(5.5, 5.5)) for s in sets])
    B = np.array([s.b_gauss for s in sets])
    slope = 1.75 * 4 * MU_B_MHZ_PER_G
    assert np.allclose(e - e[0], slope * B, atol=1e-9)


def test_boson_straight_lines(cr52):
    sets = eigenlevels(cr52.ground, 0, np.linspace(0, 460, 47))
    for s in sets:
        for lab, e in zip(s.labels, s.energies):
            assert e == pytest.approx(2.0 * MU_B_MHZ_PER_G * s.b_gauss * float(lab.mF), abs=1e-9)


def test_tracking_agrees_with_rank_rule_and_refinement(cr53):
    grid = np.arange(0, 100.001, 0.5)
    coarse = eigenlevels(cr53.excited, cr53.I, grid)
    fine = eigenlevels(cr53.excited, cr53.I, np.arange(0, 100.001, 0.25))[::2]
    for a, b in zip(coarse, fine):
        assert np.allclose(a.energies, b.energies, atol=1e-9)
        assert np.allclose(a.energies, eigensystem(cr53.excited, cr53.I, a.b_gauss).energies, atol=1e-9)


def test_tracking_ramps_from_zero_and_handles_negative_field(cr53):
    sets = eigenlevels(cr53.ground, cr53.I, [-260.0, -250.0])
    ref = eigensystem(cr53.ground, cr53.I, -260.0)
    assert np.allclose(sets[0].energies, ref.energies, atol=1e-9)


def test_tracking_refuses_coarse_grid(cr53):
    with pytest.raises(TrackingError, match="finer"):
        eigenlevels(cr53.excited, cr53.I, [0.0, 5000.0])


def test_grid_must_be_monotone(cr53):
    with pytest.raises(ValueError):
        eigenlevels(cr53.excited, cr53.I, [0.0, 2.0, 1.0])


def test_paschen_back_limit(cr53):
    for lv in (cr53.ground, cr53.excited):
        es = eigensystem(lv, cr53.I, 5000.0)
        assert (es.vectors ** 2).max(axis=0).min() > 0.999


def test_bad_crossing_near_25_gauss(cr53):
    r = find_crossing(cr53.excited, cr53.I, L(5.5, 5.5), L(4.5, 3.5), (0, 100))
    assert r.found and r.exact
    assert 20.0 <= r.b_crossing <= 30.0
    e = lambda B: (eigensystem(cr53.excited, cr53.I, B).energy(L(5.5, 5.5))
                   - eigensystem(cr53.excited, cr53.I, B).energy(L(4.5, 3.5)))
    assert np.sign(e(r.b_crossing - 1e-3)) != np.sign(e(r.b_crossing + 1e-3))
    # independent of bracket width
    r2 = find_crossing(cr53.excited, cr53.I, L(5.5, 5.5), L(4.5, 3.5), (10, 40))
    assert abs(r2.b_crossing - r.b_crossing) < 1e-3


def test_crossing_same_label_and_none(cr53):
    r = find_crossing(cr53.excited, cr53.I, L(5.5, 5.5), L(5.5, 5.5), (0, 100))
    assert not r.found
    r = find_crossing(cr53.excited, cr53.I, L(5.5, 5.5), L(4.5, 3.5), (40, 100))
    assert not r.found and r.b_crossing is None


def test_same_block_pair_reports_min_gap(cr53):
    r = find_crossing(cr53.excited, cr53.I, L(5.5, 3.5), L(4.5, 3.5), (0, 100))
    assert not r.exact and r.gap > 0


def test_toy_linear_crossing():
    # slopes +-1 MHz/G, offsets -+10 MHz: B - 10 = -B + 10 at B = 10 G
    assert locate_crossing(lambda B: (B - 10) - (-B + 10), 0, 30) == pytest.approx(10.0, abs=1e-3)
    # separation 10 MHz at zero field closes at 5 G
    assert locate_crossing(lambda B: (B - 5) - (-B + 5), 0, 30) == pytest.approx(5.0, abs=1e-3)
    assert locate_crossing(lambda B: B + 1.0, 0, 30) is None


def test_cycling_strength_is_one(cr52):
    g = eigensystem(cr52.ground, 0, 10.0)
    e = eigensystem(cr52.excited, 0, 10.0)
    assert transition_strength(g, L(3, 3), e, L(4, 4), 1) == pytest.approx(1.0, abs=1e-14)
    assert transition_strength(g, L(3, 3), e, L(4, 4), 0) == 0.0


@pytest.mark.parametrize("B", [0.0, 25.0, 300.0])
def test_strength_sum_rule(cr53, B):
    g = eigensystem(cr53.ground, cr53.I, B)
    e = eigensystem(cr53.excited, cr53.I, B)
    S = strength_matrix(g, e)
    assert np.allclose(S.sum(axis=(0, 1)), 9 / 7, atol=1e-9)
    # vectorized form matches the single-pair function
    assert S[0, e.index(L(4.5, 3.5)), g.index(L(4.5, 4.5))] == pytest.approx(
        transition_strength(g, L(4.5, 4.5), e, L(4.5, 3.5), -1), abs=1e-14)


def test_depumping_path_open_at_crossing(cr53):
    g = eigensystem(cr53.ground, cr53.I, 25.0)
    e = eigensystem(cr53.excited, cr53.I, 25.0)
    assert transition_strength(g, L(4.5, 4.5), e, L(4.5, 3.5), -1) > 1e-3


def test_mismatched_fields_rejected(cr53):
    g = eigensystem(cr53.ground, cr53.I, 25.0)
    e = eigensystem(cr53.excited, cr53.I, 26.0)
    with pytest.raises(ValueError, match="different fields"):
        transition_strength(g, 0, e, 0, 1)
    with pytest.raises(ValueError):
        strength_matrix(g, e)


def test_label_parse_and_str():
    lab = StateLabel.parse("F=11/2,mF=9/2")
    assert lab == L(Fraction(11, 2), Fraction(9, 2))
    assert str(lab) == "F=11/2,mF=9/2"

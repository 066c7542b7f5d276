import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpshift.atomic import (
    AtomicDomainError,
    GridSpec,
    QuantumDefectSet,
    StateLabel,
    angular_factor,
    dipole_matrix_element,
    effective_n,
    energy_level,
    expected_nodes,
    numerov_radial,
    radial_dipole_integral,
    select_relevant_states,
)
from cpshift.channels import build_channels, transition_frequency

RB = QuantumDefectSet.rubidium()
H = QuantumDefectSet.hydrogenic()


def test_state_label_roundtrip():
    s = StateLabel.parse("32S1/2")
    assert (s.n, s.l, s.j) == (32, 0, 0.5)
    assert str(s) == "32S1/2"
    assert str(StateLabel.parse("31D5/2")) == "31D5/2"


@pytest.mark.parametrize("bad", ["32X1/2", "2D5/2", "32S3/2", "S1/2"])
def test_state_label_rejects_unphysical(bad):
    with pytest.raises((AtomicDomainError, ValueError)):
        StateLabel.parse(bad)


def test_quantum_defect_table_metadata():
    assert RB.version.startswith("rb-qd")
    d0, d2 = RB.coefficients(0, 0.5)
    assert d0 == pytest.approx(3.1311804)
    s = StateLabel(32, 0, 0.5)
    assert effective_n(s, RB) == pytest.approx(32 - 3.1311804 - 0.1784 / (32 - 3.1311804) ** 2)


def test_defect_table_parse_errors():
    with pytest.raises(AtomicDomainError):
        QuantumDefectSet.from_text("Rb87 S1/2 0 0.5 notanumber 0.1\n")
    with pytest.raises((AtomicDomainError, OSError)):
        QuantumDefectSet.from_file("/nonexistent/table.txt")


def test_hydrogen_ground_state_matches_closed_form():
    wf = numerov_radial(StateLabel(1, 0, 0.5), H)
    r = wf.s**2
    exact = 2.0 * r * np.exp(-r)
    mask = exact > 1e-3 * exact.max()
    assert np.max(np.abs(wf.u[mask] - exact[mask]) / exact[mask]) < 1e-4
    assert wf.norm() == pytest.approx(1.0, abs=1e-6)


def test_hydrogen_1s_2p_radial_integral():
    r12 = radial_dipole_integral(numerov_radial(StateLabel(1, 0, 0.5), H), numerov_radial(StateLabel(2, 1, 0.5), H))
    exact = 128 * math.sqrt(6) / 243  # 2^7 sqrt(6) / 3^5
    assert abs(r12) == pytest.approx(exact, rel=1e-5)


@pytest.mark.parametrize("label", ["20S1/2", "32S1/2", "32P1/2", "32P3/2", "31D5/2"])
def test_node_count_and_normalization(label):
    s = StateLabel.parse(label)
    wf = numerov_radial(s, RB)
    assert wf.nodes == expected_nodes(s, RB)
    assert wf.norm() == pytest.approx(1.0, rel=1e-6)
    # outermost lobe positive
    tail = wf.u[np.abs(wf.u) > 1e-3 * np.abs(wf.u).max()]
    assert tail[-1] > 0


def test_radial_integral_grows_like_n_squared():
    vals = []
    for n in (20, 30, 40):
        d = dipole_matrix_element(StateLabel(n, 0, 0.5), StateLabel(n, 1, 0.5), RB)
        vals.append(abs(d.reduced_radial) / effective_n(StateLabel(n, 0, 0.5), RB) ** 2)
    assert max(vals) / min(vals) < 1.15


def test_reduced_dipole_symmetric():
    a, b = StateLabel(32, 0, 0.5), StateLabel(32, 1, 1.5)
    dab = dipole_matrix_element(a, b, RB)
    dba = dipole_matrix_element(b, a, RB)
    assert dab.reduced_squared == pytest.approx(dba.reduced_squared, rel=1e-9)
    assert dab.reduced_radial == pytest.approx(dba.reduced_radial, rel=1e-9)


def test_angular_sum_rule_s_to_p():
    assert angular_factor(0, 0.5, 1, 0.5) + angular_factor(0, 0.5, 1, 1.5) == pytest.approx(1.0)
    assert angular_factor(0, 0.5, 1, 0.5) == pytest.approx(1 / 3)


@given(st.integers(1, 5), st.sampled_from([-0.5, 0.5]), st.sampled_from([-1, 1]), st.sampled_from([-0.5, 0.5]))
def test_angular_sum_over_final_j_is_l_fraction(l1, dj1, dl, dj2):
    j1 = l1 + dj1
    l2 = l1 + dl
    total = sum(angular_factor(l1, j1, l2, l2 + s) for s in (-0.5, 0.5) if l2 + s >= 0.5)
    # sum over j2 and m2 of |<l1 j1 m1|d|l2 j2 m2>|^2 / R^2 = l_max / (2 l1 + 1)
    assert total == pytest.approx(max(l1, l2) / (2 * l1 + 1), rel=1e-12)


def test_forbidden_transition_vanishes():
    d = dipole_matrix_element(StateLabel(32, 0, 0.5), StateLabel(33, 0, 0.5), RB)
    assert d.magnitude_squared == 0.0


def test_orientation_splits_components():
    a, b = StateLabel(32, 0, 0.5), StateLabel(32, 1, 0.5)
    iso = dipole_matrix_element(a, b, RB, "isotropic")
    ani = dipole_matrix_element(a, b, RB, "anisotropic")
    assert iso.d2_parallel == pytest.approx(2 * iso.d2_perp)
    assert ani.d2_parallel == pytest.approx(ani.d2_perp)
    assert iso.d2_parallel + iso.d2_perp == pytest.approx(iso.magnitude_squared)
    with pytest.raises(AtomicDomainError):
        dipole_matrix_element(a, b, RB, "sideways")


def test_select_relevant_states():
    s = StateLabel(32, 0, 0.5)
    partners = select_relevant_states(s, 2, RB)
    assert len(partners) == 10
    assert all(p.l == 1 for p in partners)
    energies = [energy_level(p, RB) for p in partners]
    assert energies == sorted(energies)
    assert select_relevant_states(s, 0, RB) == [StateLabel(32, 1, 0.5), StateLabel(32, 1, 1.5)]
    with pytest.raises(AtomicDomainError):
        select_relevant_states(s, -1, RB)


def test_rb_32s_32p_transition_frequency():
    nu = transition_frequency(StateLabel(32, 0, 0.5), StateLabel(32, 1, 0.5), RB) / (2 * math.pi)
    assert 1e10 < nu < 1e12
    assert nu == pytest.approx(127.07e9, rel=1e-3)


def test_channels_carry_signs_and_si_units():
    ch = build_channels(StateLabel(32, 0, 0.5), RB, dn_max=1)
    assert all(c.d2_parallel > 0 and c.d2_perp > 0 for c in ch)
    assert {c.dipole_sign for c in ch} <= {1.0, -1.0}
    # (1000 e a0)^2 ~ 7e-53 C^2 m^2
    big = max(c.d2_parallel + c.d2_perp for c in ch)
    assert 1e-54 < big < 1e-51


def test_grid_spec_outer_radius():
    assert GridSpec().outer_radius(32) == 2 * 32 * (32 + 15)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinbath.constants import CONSTANTS, DEFAULTS, FieldConfig, radms_to_mhz
from spinbath.hamiltonian import (
    SPIN1_M_ORDER,
    build_cluster_hamiltonian,
    dipolar_tensor,
    p1_transition_frequencies,
    secular_Azz,
    spin_half_ops,
    spin_one_ops,
)

vec3 = st.tuples(*(st.floats(-10, 10) for _ in range(3))).map(np.array).filter(
    lambda v: np.linalg.norm(v) > 0.5)


def test_spin_half_algebra():
    sx, sy, sz = spin_half_ops()
    assert np.allclose(sx @ sy - sy @ sx, 1j * sz)
    assert np.allclose(sx @ sx + sy @ sy + sz @ sz, 0.75 * np.eye(2))


def test_spin_one_algebra():
    sx, sy, sz = spin_one_ops()
    assert np.allclose(sx @ sy - sy @ sx, 1j * sz)
    assert np.allclose(sx @ sx + sy @ sy + sz @ sz, 2.0 * np.eye(3))
    assert SPIN1_M_ORDER == (1, 0, -1)


@given(r=vec3)
@settings(max_examples=50, deadline=None)
def test_dipolar_tensor_symmetric_traceless(r):
    T = dipolar_tensor(r)
    assert np.allclose(T, T.T)
    assert abs(np.trace(T)) < 1e-8 * np.abs(T).max()


def test_dipolar_tensor_scaling():
    r = np.array([0.0, 0.0, 2.0])
    assert np.allclose(dipolar_tensor(2 * r), dipolar_tensor(r) / 8.0)


def test_dipolar_on_axis_value():
    # along the separation axis: (1 - 3) pref / r^3 = -2 pref / r^3
    r = np.array([0.0, 0.0, 1.0])
    T = dipolar_tensor(r)
    assert T[2, 2] == pytest.approx(-2.0 * CONSTANTS.dipolar_prefactor)
    # 2 pi x 104 MHz magnitude at 1 nm
    assert radms_to_mhz(abs(T[2, 2])) == pytest.approx(104.08, rel=2e-4)


def test_secular_azz_angular_dependence():
    central = np.zeros(3)
    axis = np.array([0.0, 0.0, 1.0])
    on = secular_Azz(central, np.array([0, 0, 2.0]), (0, -1), axis)
    magic = secular_Azz(
        central, 2.0 * np.array([np.sin(0.9553166), 0, np.cos(0.9553166)]),
        (0, -1), axis)
    assert abs(magic) < 1e-6 * abs(on)
    # qubit (0,-1): A_z = (m1-m0) Azz = -Azz; on-axis Azz < 0 so A_z > 0
    assert on == pytest.approx(2.0 * CONSTANTS.dipolar_prefactor / 8.0)


def test_cluster_hamiltonian_hermitian_and_dimension():
    pos = np.array([[1.0, 0.0, 2.0], [0.0, 2.0, -1.0]])
    ham = build_cluster_hamiltonian(
        pos, DEFAULTS.central, DEFAULTS.field, DEFAULTS.p1("n15"),
        [(0.5, 0), (-0.5, 2)])
    assert ham.dimension == 12
    assert np.allclose(ham.matrix, ham.matrix.conj().T)


def test_cluster_hamiltonian_coupling_toggle():
    pos = np.array([[1.5, 0.5, 1.0]])
    with_c = build_cluster_hamiltonian(
        pos, DEFAULTS.central, DEFAULTS.field, DEFAULTS.p1("n15"),
        [(0.5, 1)])
    without = build_cluster_hamiltonian(
        pos, DEFAULTS.central, DEFAULTS.field, DEFAULTS.p1("n15"),
        [(0.5, 1)], couplings_enabled=False)
    assert not np.allclose(with_c.matrix, without.matrix)
    # the uncoupled Hamiltonian is diagonal in the product basis
    off = without.matrix - np.diag(np.diag(without.matrix))
    assert np.abs(off).max() < 1e-12 * np.abs(without.matrix).max()


def test_p1_lines_at_operating_field():
    lines = p1_transition_frequencies(FieldConfig(B_z=311.0), DEFAULTS.p1("n15"))
    plus = sorted({round(f, 2) for f, m, _ax, _w in lines if m > 0})
    assert len(plus) == 2
    lo, hi = plus
    assert lo == pytest.approx(934.8, abs=2.0)
    assert hi == pytest.approx(953.1, abs=2.0)
    # 3:1 multiplicity: three tilted axes share the low line
    w_lo = sum(w for f, m, _ax, w in lines if m > 0 and round(f, 2) == lo)
    w_hi = sum(w for f, m, _ax, w in lines if m > 0 and round(f, 2) == hi)
    assert w_lo / w_hi == pytest.approx(3.0)


def test_p1_line_splitting_tracks_hyperfine():
    # N14 (I=1) has 2I+1 = 3 nuclear projections -> m=+1 and m=-1 lines
    # split by roughly 2 * A_eff around the Zeeman line
    lines = p1_transition_frequencies(FieldConfig(B_z=311.0), DEFAULTS.p1("n14"))
    ms = {m for _f, m, _ax, _w in lines}
    assert ms == {-1.0, 0.0, 1.0}


def test_p1_requires_field():
    with pytest.raises(ValueError):
        p1_transition_frequencies(FieldConfig(B_z=0.0), DEFAULTS.p1("n15"))

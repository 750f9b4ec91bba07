"""Dipolar couplings and cluster Hamiltonian assembly.

The central spin is an NV (S=1) quantized along its [111] axis; bath spins
are P1 electrons (S=1/2) whose nitrogen nuclear state enters only as a
static hyperfine shift a(m, axis).  Everything is assembled in the frame
whose z axis is the central quantization axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import (
    CONSTANTS,
    JT_AXES,
    CentralSpinParams,
    FieldConfig,
    P1Params,
    PhysicalConstants,
    radms_to_mhz,
)

# --- spin operators -----------------------------------------------------

# spin-1/2
SX2 = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
SY2 = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ2 = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

# spin-1, basis ordered m_s = (+1, 0, -1)
SZ3 = np.diag([1.0, 0.0, -1.0]).astype(complex)
SX3 = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / np.sqrt(2)
SY3 = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / np.sqrt(2)
ID3 = np.eye(3, dtype=complex)

SPIN1_M_ORDER = (1, 0, -1)


def spin_half_ops():
    return SX2, SY2, SZ2


def spin_one_ops():
    return SX3, SY3, SZ3


def _frame(axis):
    """Orthonormal basis (e1, e2, e3) with e3 = axis."""
    e3 = np.asarray(axis, dtype=float)
    e3 = e3 / np.linalg.norm(e3)
    trial = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(trial, e3)) > 0.9:
        trial = np.array([0.0, 1.0, 0.0])
    e1 = trial - np.dot(trial, e3) * e3
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return np.vstack([e1, e2, e3])


# --- couplings ----------------------------------------------------------

def dipolar_tensor(r_vec, gamma_1=None, gamma_2=None,
                   constants: PhysicalConstants = CONSTANTS):
    """Point-dipole coupling tensor (rad/ms) for the displacement r_vec (nm).

    Returns (pref / r^3) * (delta_ab - 3 rhat_a rhat_b), symmetric and
    traceless, with pref = (mu0/4pi) gamma_1 gamma_2 hbar.  Gyromagnetic
    ratios default to the electron value.
    """
    r_vec = np.asarray(r_vec, dtype=float)
    r = np.linalg.norm(r_vec)
    if r == 0:
        raise ValueError("coincident spins")
    g1 = constants.gamma_e if gamma_1 is None else gamma_1
    g2 = constants.gamma_e if gamma_2 is None else gamma_2
    pref = constants.dipolar_prefactor * (g1 * g2) / constants.gamma_e**2
    rhat = r_vec / r
    return (pref / r**3) * (np.eye(3) - 3.0 * np.outer(rhat, rhat))


def secular_Azz(central_pos, bath_spin_pos, qubit_levels=(0, -1),
                axis=None, constants: PhysicalConstants = CONSTANTS):
    """Effective dephasing coupling A_z (rad/ms) of one bath spin.

    A_z is the difference of the bath-spin frequency shift between the two
    qubit levels: (m1 - m0) * e3.T @ A @ e3 with e3 the quantization axis.
    """
    central_pos = np.asarray(central_pos, dtype=float)
    bath_spin_pos = np.asarray(bath_spin_pos, dtype=float)
    if axis is None:
        axis = JT_AXES[0]
    tensor = dipolar_tensor(bath_spin_pos - central_pos, constants=constants)
    e3 = np.asarray(axis, dtype=float)
    e3 = e3 / np.linalg.norm(e3)
    azz = float(e3 @ tensor @ e3)
    m0, m1 = qubit_levels
    return (m1 - m0) * azz


@dataclass(frozen=True)
class ClusterHamiltonian:
    """Dense Hermitian Hamiltonian of central spin + cluster bath spins."""

    dimension: int
    matrix: np.ndarray
    spin_index_map: tuple  # ("central", bath index 0, bath index 1, ...)

    def __post_init__(self):
        scale = max(1.0, float(np.linalg.norm(self.matrix)))
        if np.linalg.norm(self.matrix - self.matrix.conj().T) > 1e-12 * scale:
            raise AssertionError("assembled Hamiltonian is not Hermitian")


def build_cluster_hamiltonian(positions, central: CentralSpinParams,
                              field: FieldConfig, p1: P1Params,
                              nuclear_assignment, central_position=None,
                              constants: PhysicalConstants = CONSTANTS,
                              couplings_enabled=True):
    """Assemble the full central-spin + cluster Hamiltonian (rad/ms).

    positions: (n, 3) bath-spin positions (nm); nuclear_assignment: list of
    (nuclear m, JT axis index) per bath spin.  Central spin at
    central_position (default origin).  Hilbert space (2S+1) * 2^n in the
    quantization frame; nuclear spins enter only through a(m, axis).
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    n = len(positions)
    if len(nuclear_assignment) != n:
        raise ValueError("nuclear_assignment must cover every cluster member")
    if central_position is None:
        central_position = np.zeros(3)
    central_position = np.asarray(central_position, dtype=float)

    R = _frame(central.quantization_axis)
    gamma = constants.gamma_e
    B = field.B_z

    dims = [3] + [2] * n
    dim = int(np.prod(dims))

    def embed(op, site):
        mats = [ID3 if k == 0 else ID2 for k in range(n + 1)]
        mats[site] = op
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    Sc = [embed(o, 0) for o in (SX3, SY3, SZ3)]
    Pb = [[embed(o, i + 1) for o in (SX2, SY2, SZ2)] for i in range(n)]

    H = np.zeros((dim, dim), dtype=complex)
    # central spin: -gamma_e B Sz + D Sz^2
    H += -gamma * B * Sc[2] + central.zero_field_splitting_D * (Sc[2] @ Sc[2])

    for i in range(n):
        m_i, axis_i = nuclear_assignment[i]
        shift = p1.hyperfine_shift(m_i, axis_i)
        H += (shift - gamma * B) * Pb[i][2]
        if couplings_enabled:
            A = dipolar_tensor(positions[i] - central_position,
                               constants=constants)
            A = R @ A @ R.T
            for a in range(3):
                for b in range(3):
                    if A[a, b] != 0.0:
                        H += A[a, b] * (Sc[a] @ Pb[i][b])
    if couplings_enabled:
        for i in range(n):
            for j in range(i + 1, n):
                J = dipolar_tensor(positions[j] - positions[i],
                                   constants=constants)
                J = R @ J @ R.T
                for a in range(3):
                    for b in range(3):
                        if J[a, b] != 0.0:
                            H += J[a, b] * (Pb[i][a] @ Pb[j][b])

    return ClusterHamiltonian(dimension=dim, matrix=H,
                              spin_index_map=("central",) + tuple(range(n)))


# --- P1 ESR spectroscopy ------------------------------------------------

def p1_transition_frequencies(field: FieldConfig, p1: P1Params,
                              constants: PhysicalConstants = CONSTANTS,
                              weight_threshold=0.2):
    """Electron-spin-flip transition frequencies of an isolated P1.

    Exact diagonalization of the electron (S=1/2) x nucleus (2I+1) system
    per Jahn-Teller axis, with the axial hyperfine tensor tilted by the
    axis angle relative to the field.  Returns a list of
    (frequency_MHz, nuclear_m, axis_index, degeneracy_fraction), one entry
    per allowed line, sorted by frequency.

    The electron gyromagnetic ratio carries its physical (negative) sign
    here so nuclear projection labels follow the usual ESR convention;
    the rest of the package stores the magnitude only, which is
    irrelevant for dephasing dynamics.
    """
    if field.B_z <= 0:
        raise ValueError("B_z must be > 0 for ESR transition frequencies")
    I = p1.nuclear_I
    nI = int(round(2 * I + 1))
    mI = np.arange(I, -I - 1e-9, -1.0)
    # nuclear spin operators in the m basis (descending)
    Iz = np.diag(mI).astype(complex)
    Ip = np.zeros((nI, nI), dtype=complex)
    for k in range(nI - 1):
        m = mI[k + 1]
        Ip[k, k + 1] = np.sqrt(I * (I + 1) - m * (m + 1))
    Ix = 0.5 * (Ip + Ip.conj().T)
    Iy = -0.5j * (Ip - Ip.conj().T)
    Iops = (Ix, Iy, Iz)
    Sops = (SX2, SY2, SZ2)

    gamma = -constants.gamma_e  # physical sign of the electron moment
    axis_angles = {}  # cos(beta) -> representative axis indices
    for k in range(4):
        cb = round(float(np.dot(JT_AXES[k], p1.quantization_axis)) ** 2, 9)
        axis_angles.setdefault(cb, []).append(k)

    lines = []
    for cb2, axes in axis_angles.items():
        sb2 = 1.0 - cb2
        nvec = np.array([np.sqrt(sb2), 0.0, np.sqrt(cb2)])
        Aten = p1.A_perp * np.eye(3) + (p1.A_par - p1.A_perp) * np.outer(nvec, nvec)
        dim = 2 * nI
        H = np.zeros((dim, dim), dtype=complex)
        H += -gamma * field.B_z * np.kron(SZ2, np.eye(nI))
        H += -p1.gamma_n * field.B_z * np.kron(ID2, Iz)
        for a in range(3):
            for b in range(3):
                if Aten[a, b] != 0.0:
                    H += Aten[a, b] * np.kron(Sops[a], Iops[b])
        evals, evecs = np.linalg.eigh(H)
        Sx_full = np.kron(SX2, np.eye(nI))
        Iz_full = np.kron(ID2, Iz)
        for ppp in range(dim):
            for q in range(ppp + 1, dim):
                w = abs(evecs[:, q].conj() @ Sx_full @ evecs[:, ppp]) ** 2
                if w < weight_threshold:
                    continue
                m_q = float(np.real(evecs[:, q].conj() @ Iz_full @ evecs[:, q]))
                m_nuc = float(mI[np.argmin(np.abs(mI - m_q))])
                freq = radms_to_mhz(abs(evals[q] - evals[ppp]))
                for ax in axes:
                    lines.append((float(freq), m_nuc, ax, 1.0 / (4 * nI)))
    lines.sort(key=lambda rec: rec[0])
    return lines

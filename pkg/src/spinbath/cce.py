"""Cluster correlation expansion engine.

Coherence functions L(t) for Ramsey and Hahn-echo sequences computed as a
product of irreducible cluster contributions, with bath-state sampling.
Two Hamiltonian modes:

- "secular" (default): the central-bath coupling is reduced to
  S_z A_zz P_z and bath pairs keep the zz + flip-flop terms, so the
  Hamiltonian is block-diagonal in the central m_s and every cluster
  reduces to two bath-only blocks of dimension 2^k.  This is the
  production path and is vectorized across clusters.
- "full": complete dipolar tensors in the (2S+1) * 2^k Hilbert space,
  used for small-bath oracles and cross-checks.

The analytic order-1 Ramsey path (Gaussian envelope times cosine factors
from strongly coupled spins) lives here too, with the strong/weak
partition that defines T2* = sqrt(2)/A_bath.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from itertools import combinations

import numpy as np

from .bath import BathConfiguration
from .constants import CONSTANTS, DEFAULTS, FieldConfig, P1Params
from .hamiltonian import build_cluster_hamiltonian, dipolar_tensor, secular_Azz

DIVISION_FLOOR = 1e-10
MAX_CLUSTERS = 2_000_000
STRONG_THRESHOLD = 2.0 * np.pi  # visibility threshold nu >= 2 pi


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


# --- pulse sequences and configuration -----------------------------------

@dataclass(frozen=True)
class PulseSequence:
    """Ideal instantaneous pi pulses on the central spin at fractions of
    the total evolution time; empty for Ramsey, [1/2] for Hahn echo."""

    kind: str
    pi_pulse_fractions: tuple = ()

    def __post_init__(self):
        fr = tuple(float(f) for f in self.pi_pulse_fractions)
        if any(not (0.0 < f < 1.0) for f in fr):
            raise ValueError("pulse fractions must lie in (0, 1)")
        if any(b <= a for a, b in zip(fr, fr[1:])):
            raise ValueError("pulse fractions must be strictly increasing")
        object.__setattr__(self, "pi_pulse_fractions", fr)

    @property
    def segments(self):
        """Durations of free-evolution segments as fractions of t."""
        edges = (0.0,) + self.pi_pulse_fractions + (1.0,)
        return tuple(b - a for a, b in zip(edges, edges[1:]))


RAMSEY = PulseSequence(kind="Ramsey")
HAHN_ECHO = PulseSequence(kind="HahnEcho", pi_pulse_fractions=(0.5,))


def sequence_by_name(name: str) -> PulseSequence:
    key = name.lower().replace("-", "").replace("_", "")
    if key in ("ramsey", "fid"):
        return RAMSEY
    if key in ("hahn", "hahnecho", "echo"):
        return HAHN_ECHO
    raise ValueError(f"unknown pulse sequence {name!r}")


@dataclass(frozen=True)
class CCEConfig:
    order: int
    dipole_radius: float  # nm
    n_bath_states: int
    time_grid: np.ndarray  # ms, strictly increasing from 0
    mode: str = "secular"  # or "full"
    bath_state_mode: str = "sample"  # or "exact"
    frozen_nuclear: bool = False

    def __post_init__(self):
        grid = np.asarray(self.time_grid, dtype=float)
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.n_bath_states < 1:
            raise ValueError("n_bath_states must be >= 1")
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
            raise ValueError("time_grid must be strictly increasing from 0")
        object.__setattr__(self, "time_grid", grid)
        if self.mode not in ("secular", "full"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.bath_state_mode not in ("sample", "exact"):
            raise ValueError(f"unknown bath_state_mode {self.bath_state_mode!r}")


@dataclass(frozen=True)
class CoherenceCurve:
    times: np.ndarray
    values: np.ndarray  # complex L(t)
    metadata: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t[0] == 0.0 and abs(abs(v[0]) - 1.0) > 1e-9:
            raise ValueError("|L(0)| must be 1")


def write_curve(curve: CoherenceCurve, fh):
    """Delimited text: metadata header then (time_ms, re_L, im_L) rows."""
    fh.write("# spinbath curve v1\n")
    for key in sorted(curve.metadata):
        val = curve.metadata[key]
        if isinstance(val, (str, int, float, np.integer, np.floating)):
            fh.write(f"# meta {key} {val}\n")
    fh.write("# time_ms re_L im_L\n")
    for t, v in zip(curve.times, curve.values):
        fh.write(f"{float(t)!r} {float(v.real)!r} {float(v.imag)!r}\n")


def read_curve(fh) -> CoherenceCurve:
    header = fh.readline()
    if "curve v1" not in header:
        raise ValueError("not a spinbath curve v1 file")
    meta = {}
    times, values = [], []
    for line in fh:
        if line.startswith("# meta "):
            _, _, key, val = line.split(None, 3)
            meta[key] = val.strip()
        elif line.startswith("#"):
            continue
        elif line.strip():
            t, re, im = line.split()
            times.append(float(t))
            values.append(complex(float(re), float(im)))
    return CoherenceCurve(times=np.array(times),
                          values=np.array(values), metadata=meta)


# --- strong/weak partition and analytic CCE1 -----------------------------

@dataclass(frozen=True)
class StrongWeakPartition:
    strong: tuple  # of (bath spin index, A_z rad/ms)
    weak_dephasing: float  # A_bath, rad/ms
    t2_star: float  # ms, +inf when the weak set is empty


def _couplings(config: BathConfiguration, central=None):
    central = central or DEFAULTS.central
    if len(config) == 0:
        return np.zeros(0)
    rel = config.positions - config.central_position
    axis = central.quantization_axis
    r = np.linalg.norm(rel, axis=1)
    cosang = (rel @ axis) / r
    m0, m1 = central.qubit_levels
    azz = CONSTANTS.dipolar_prefactor / r**3 * (1.0 - 3.0 * cosang**2)
    return (m1 - m0) * azz


def partition_strong_weak(config: BathConfiguration,
                          central=None) -> StrongWeakPartition:
    """Greedy selection of strongly coupled spins in descending |A_z|.

    A spin is strong when |A_z|/2 >= 2pi * A_bath(remaining)/sqrt(2), with
    A_bath^2 = sum of A_z^2/4 over the remaining (weak) spins.  A single
    remaining spin against an empty remainder is strong (A_bath = 0).
    """
    az = _couplings(config, central)
    order = np.argsort(-np.abs(az), kind="stable")
    az_sorted = az[order]
    tail_sq = np.concatenate([np.cumsum((az_sorted**2)[::-1])[::-1], [0.0]])
    k = 0
    while k < len(az_sorted):
        a_bath = np.sqrt(tail_sq[k + 1] / 4.0)
        if np.abs(az_sorted[k]) / 2.0 >= STRONG_THRESHOLD * a_bath / np.sqrt(2.0):
            k += 1
        else:
            break
    strong = tuple((int(order[i]), float(az_sorted[i])) for i in range(k))
    a_bath = float(np.sqrt(tail_sq[k] / 4.0))
    t2s = float(np.sqrt(2.0) / a_bath) if a_bath > 0 else np.inf
    return StrongWeakPartition(strong=strong, weak_dephasing=a_bath, t2_star=t2s)


def ramsey_product_of_cosines(config: BathConfiguration, time_grid,
                              central=None) -> CoherenceCurve:
    """Order-1 Ramsey closed form for a fully mixed spin-1/2 bath:
    L(t) = prod_j cos(A_z^j t / 2) over every bath spin."""
    t = np.asarray(time_grid, dtype=float)
    az = _couplings(config, central)
    vals = np.prod(np.cos(az[:, None] * t[None, :] / 2.0), axis=0) \
        if len(az) else np.ones_like(t)
    return CoherenceCurve(times=t, values=vals.astype(complex),
                          metadata={"n_spins": len(az)})


def ramsey_cce1_analytic(config: BathConfiguration, time_grid,
                         central=None) -> CoherenceCurve:
    """L(t) = exp[-(t/T2*)^2] * prod_strong cos(A_z t / 2)."""
    t = np.asarray(time_grid, dtype=float)
    part = partition_strong_weak(config, central)
    if np.isfinite(part.t2_star):
        env = np.exp(-((t / part.t2_star) ** 2))
    else:
        env = np.ones_like(t)
    osc = np.ones_like(t)
    for _, az in part.strong:
        osc = osc * np.cos(az * t / 2.0)
    return CoherenceCurve(times=t, values=(env * osc).astype(complex),
                          metadata={"t2_star": part.t2_star,
                                    "n_strong": len(part.strong)})


# --- cluster enumeration --------------------------------------------------

def enumerate_clusters(config: BathConfiguration, order, dipole_radius,
                       max_clusters=MAX_CLUSTERS):
    """All connected subsets of bath spins of size <= order under the
    pairwise-distance <= dipole_radius graph, in deterministic order."""
    n = len(config)
    if n == 0:
        return []
    pos = config.positions
    d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
    adj = [set(np.flatnonzero(d2[i] <= dipole_radius**2)) - {i}
           for i in range(n)]
    clusters = []

    # Grow connected subsets containing v using only vertices > v, so each
    # connected subset is produced exactly once (rooted at its minimum).
    def grow(current, frontier, excluded):
        if len(clusters) > max_clusters:
            raise RuntimeError("cluster explosion: reduce radius or order")
        clusters.append(tuple(sorted(current)))
        if len(current) == order:
            return
        cand = sorted(frontier - excluded)
        blocked = set(excluded)
        for v in cand:
            blocked.add(v)
            new_frontier = (frontier | {u for u in adj[v] if u > root}) - current
            grow(current | {v}, new_frontier - {v}, set(blocked))

    for root in range(n):
        grow({root}, {u for u in adj[root] if u > root}, set())
    clusters.sort(key=lambda c: (len(c), c))
    return clusters


def _proper_subset_indices(clusters):
    """For each cluster, the indices of its enumerated proper subsets."""
    index = {c: i for i, c in enumerate(clusters)}
    out = []
    for c in clusters:
        subs = []
        for size in range(1, len(c)):
            for sub in combinations(c, size):
                j = index.get(sub)
                if j is not None:
                    subs.append(j)
        out.append(subs)
    return out


# --- full-mode single-cluster propagation ---------------------------------

def _pi_pulse_matrix(qubit_levels, nbath_dim):
    from .hamiltonian import SPIN1_M_ORDER
    m0, m1 = qubit_levels
    i0 = SPIN1_M_ORDER.index(m0)
    i1 = SPIN1_M_ORDER.index(m1)
    P = np.eye(3, dtype=complex)
    P[i0, i0] = P[i1, i1] = 0.0
    P[i0, i1] = P[i1, i0] = 1.0
    return np.kron(P, np.eye(nbath_dim, dtype=complex))


def cluster_contribution(positions, nuclear_assignment, sequence: PulseSequence,
                         bath_state, time_grid, field: FieldConfig = None,
                         central=None, p1: P1Params = None,
                         central_position=None, rotating_frame=True,
                         extra_z_shifts=None):
    """Exact unitary evolution of central spin + cluster, full Hamiltonian.

    bath_state: integer basis index of the bath product state (bit b of the
    index = 0 for m=+1/2 of cluster spin b), a normalized bath-state
    vector of dimension 2^k, or None for the thermal average over all 2^k
    product basis states (fully mixed bath).  Returns complex L(t) over
    time_grid, normalized so L(0) = 1.
    """
    field = field or DEFAULTS.field
    central = central or DEFAULTS.central
    p1 = p1 or DEFAULTS.p1("n15")
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    k = len(positions)
    nb = 2**k
    ham = build_cluster_hamiltonian(positions, central, field, p1,
                                    nuclear_assignment,
                                    central_position=central_position)
    hmat = ham.matrix
    if extra_z_shifts is not None:
        # static z field from out-of-cluster bath spins on each member;
        # in the kron layout spin i occupies bit (k-1-i) of the bath index
        bits = ((np.arange(nb)[:, None] >> (k - 1 - np.arange(k))[None, :]) & 1)
        diag = (0.5 - bits) @ np.asarray(extra_z_shifts, dtype=float)
        hmat = hmat + np.kron(np.eye(3), np.diag(diag)).astype(complex)
    evals, evecs = np.linalg.eigh(hmat)

    from .hamiltonian import SPIN1_M_ORDER
    m0, m1 = central.qubit_levels
    i0 = SPIN1_M_ORDER.index(m0)
    i1 = SPIN1_M_ORDER.index(m1)
    if bath_state is None:
        # thermal trace: evolve all 2^k bath basis states as one batch
        pulse = _pi_pulse_matrix(central.qubit_levels, nb)
        t = np.asarray(time_grid, dtype=float)
        segs = sequence.segments
        W = evecs.conj().T
        psi0 = np.zeros((3 * nb, nb), dtype=complex)
        cols = np.arange(nb)
        psi0[i0 * nb + cols, cols] = 1.0 / np.sqrt(2.0)
        psi0[i1 * nb + cols, cols] = 1.0 / np.sqrt(2.0)
        out = np.empty(len(t), dtype=complex)
        for it, tt in enumerate(t):
            psi = psi0
            for s, frac in enumerate(segs):
                psi = evecs @ (np.exp(-1j * evals * (frac * tt))[:, None]
                               * (W @ psi))
                if s < len(segs) - 1:
                    psi = pulse @ psi
            c0 = psi[i0 * nb:(i0 + 1) * nb]
            c1 = psi[i1 * nb:(i1 + 1) * nb]
            out[it] = 2.0 * np.mean(np.sum(c1.conj() * c0, axis=0))
        if rotating_frame:
            e_free = {m: central.zero_field_splitting_D * m**2
                      - CONSTANTS.gamma_e * field.B_z * m for m in (m0, m1)}
            sign = 1.0
            phase_time = np.zeros_like(t)
            for s, frac in enumerate(segs):
                phase_time += sign * frac * t
                sign = -sign
            out = out * np.exp(1j * (e_free[m0] - e_free[m1]) * phase_time)
        return out
    if np.isscalar(bath_state) or isinstance(bath_state, (int, np.integer)):
        # public convention: bit i of bath_state is spin i (0 = m=+1/2);
        # convert to the kron layout where spin i is bit (k-1-i)
        s = int(bath_state)
        idx = 0
        for i in range(k):
            idx |= ((s >> i) & 1) << (k - 1 - i)
        bvec = np.zeros(nb, dtype=complex)
        bvec[idx] = 1.0
    else:
        bvec = np.asarray(bath_state, dtype=complex)
    psi0 = np.zeros(3 * nb, dtype=complex)
    psi0[i0 * nb:(i0 + 1) * nb] = bvec / np.sqrt(2.0)
    psi0[i1 * nb:(i1 + 1) * nb] = bvec / np.sqrt(2.0)

    pulse = _pi_pulse_matrix(central.qubit_levels, nb)
    t = np.asarray(time_grid, dtype=float)
    segs = sequence.segments
    W = evecs.conj().T

    out = np.empty(len(t), dtype=complex)
    for it, tt in enumerate(t):
        psi = psi0
        for s, frac in enumerate(segs):
            psi = evecs @ (np.exp(-1j * evals * (frac * tt)) * (W @ psi))
            if s < len(segs) - 1:
                psi = pulse @ psi
        c0 = psi[i0 * nb:(i0 + 1) * nb]
        c1 = psi[i1 * nb:(i1 + 1) * nb]
        out[it] = 2.0 * np.vdot(c1, c0)

    if rotating_frame:
        # remove the free central-spin phase (D m^2 - gamma_e B m)
        e_free = {m: central.zero_field_splitting_D * m**2
                  - CONSTANTS.gamma_e * field.B_z * m for m in (m0, m1)}
        sign = 1.0
        phase_time = np.zeros_like(t)
        for s, frac in enumerate(segs):
            phase_time += sign * frac * t
            sign = -sign
        out = out * np.exp(1j * (e_free[m0] - e_free[m1]) * phase_time)
    return out


# --- secular-mode batched machinery ---------------------------------------

def _pair_index_cache():
    cache = {}

    def get(k):
        if k not in cache:
            d = 2**k
            bits = ((np.arange(d)[:, None] >> np.arange(k)[None, :]) & 1)
            sz = 0.5 - bits  # P_z eigenvalue of spin b in basis state
            pair_zz = {}
            pair_ff = {}
            for i in range(k):
                for j in range(i + 1, k):
                    pair_zz[(i, j)] = sz[:, i] * sz[:, j]
                    # basis states with bit_i=0, bit_j=1 connect to swapped
                    p = np.flatnonzero((bits[:, i] == 0) & (bits[:, j] == 1))
                    q = p + (1 << i) - (1 << j)
                    pair_ff[(i, j)] = (p, q)
            cache[k] = (sz, pair_zz, pair_ff)
        return cache[k]

    return get


_pair_data = _pair_index_cache()


def _secular_blocks(cluster_sets, eps_c, azz, jzz, qubit_levels):
    """Batched bath-block Hamiltonians for clusters of equal size.

    cluster_sets: (ncl, k) spin indices; eps_c: (ncl, k) per-spin z shifts
    (rad/ms) incl. hyperfine, Zeeman, and out-of-cluster mean field; azz:
    per-spin secular coupling to the central spin; jzz: (n, n) secular
    bath-bath couplings.  Returns (H0, H1) of shape (ncl, 2^k, 2^k) for
    the two qubit levels.
    """
    cluster_sets = np.asarray(cluster_sets, dtype=int)
    ncl, k = cluster_sets.shape
    d = 2**k
    sz, pair_zz, pair_ff = _pair_data(k)
    azz_c = azz[cluster_sets]
    m0, m1 = qubit_levels

    H = np.zeros((2, ncl, d, d))
    diag_eps = eps_c @ sz.T  # (ncl, d)
    diag_az = azz_c @ sz.T
    for bi, m in enumerate((m0, m1)):
        diag = diag_eps + m * diag_az
        for (i, j), zz in pair_zz.items():
            Jij = jzz[cluster_sets[:, i], cluster_sets[:, j]]  # (ncl,)
            diag = diag + Jij[:, None] * zz[None, :]
        H[bi][:, np.arange(d), np.arange(d)] = diag
        for (i, j), (p, q) in pair_ff.items():
            Jij = jzz[cluster_sets[:, i], cluster_sets[:, j]]
            H[bi][:, p, q] += -0.25 * Jij[:, None]
            H[bi][:, q, p] += -0.25 * Jij[:, None]
    return H[0], H[1]


def _secular_cluster_curves(H0, H1, state_bits, cluster_sets, sequence,
                            time_grid, exact=False):
    """L_C(t) for a batch of equal-size clusters in secular mode.

    state_bits: per-bath-spin bit (0 = m=+1/2) of the sampled product
    state, ignored when exact=True (thermal trace instead).
    Returns (ncl, nt) complex.
    """
    cluster_sets = np.asarray(cluster_sets, dtype=int)
    ncl, k = cluster_sets.shape
    d = 2**k
    t = np.asarray(time_grid, dtype=float)
    nt = len(t)
    E0, V0 = np.linalg.eigh(H0)
    E1, V1 = np.linalg.eigh(H1)
    M = np.einsum("cpi,cpj->cij", V1, V0)  # V1^dag V0, real orthogonal

    if sequence.kind == "Ramsey":
        if exact:
            # (1/d) Tr[e^{iH1 t} e^{-iH0 t}] = (1/d) sum |M_pq|^2 e^{i(E1_p-E0_q)t}
            W = (M**2) / d
            dE = E1[:, :, None] - E0[:, None, :]
            out = np.empty((ncl, nt), dtype=complex)
            for it, tt in enumerate(t):
                out[:, it] = np.sum(W * np.exp(1j * dE * tt), axis=(1, 2))
            return out
        idx = _state_index(state_bits, cluster_sets, k)
        a = V0[np.arange(ncl), idx, :]  # <idx| V0 rows -> coeffs (real)
        b = V1[np.arange(ncl), idx, :]
        out = np.empty((ncl, nt), dtype=complex)
        for it, tt in enumerate(t):
            x = a * np.exp(-1j * E0 * tt)
            y = np.einsum("cij,cj->ci", M, x)
            out[:, it] = np.sum(b * np.exp(-1j * E1 * tt).conj() * y, axis=1)
        return out

    if sequence.kind == "HahnEcho":
        tau = t / 2.0
        out = np.empty((ncl, nt), dtype=complex)
        if exact:
            for it, tv in enumerate(tau):
                p0 = np.exp(-1j * E0 * tv)
                p1 = np.exp(-1j * E1 * tv)
                # Tr[D0* M^dag D1* M D0 M^dag D1 M] / d with D = e^{-iE tau}
                X = np.einsum("cqp,cq,cqr->cpr", M, p1, M)  # M^T e^{-iE1} M
                X = p0[:, :, None] * X  # e^{-iE0} ...
                Y = np.einsum("cqp,cq,cqr->cpr", M, p1.conj(), M)
                Y = p0[:, :, None].conj() * Y
                out[:, it] = np.einsum("cpr,crp->c", Y, X) / d
            return out
        idx = _state_index(state_bits, cluster_sets, k)
        a = V0[np.arange(ncl), idx, :]
        b = V1[np.arange(ncl), idx, :]
        # L = a^dag D0* M^dag D1* M D0 M^dag D1 b with D = e^{-iE tau}
        for it, tv in enumerate(tau):
            p0 = np.exp(-1j * E0 * tv)
            p1 = np.exp(-1j * E1 * tv)
            w = np.einsum("cji,cj->ci", M, p1 * b)
            w = np.einsum("cij,cj->ci", M, p0 * w)
            w = np.einsum("cji,cj->ci", M, p1.conj() * w)
            out[:, it] = np.sum(a * p0.conj() * w, axis=1)
        return out

    raise ValueError(f"unsupported sequence {sequence.kind!r}")


def _state_index(state_bits, cluster_sets, k):
    idx = np.zeros(len(cluster_sets), dtype=int)
    for b in range(k):
        idx |= state_bits[cluster_sets[:, b]] << b
    return idx


# --- main CCE driver -------------------------------------------------------

def cce_coherence(config: BathConfiguration, cce: CCEConfig,
                  sequence: PulseSequence, field: FieldConfig = None,
                  seed=0, central=None, p1: P1Params = None) -> CoherenceCurve:
    """Bath-state-averaged CCE coherence function over cce.time_grid.

    In "sample" mode, n_bath_states random product states are drawn (with
    per-state random nuclear m and Jahn-Teller axis unless frozen_nuclear);
    the CCE product of irreducible contributions is formed per state and
    averaged.  In "exact" mode each cluster contribution is averaged over
    the fully mixed bath state (thermal trace) with the configuration's
    frozen nuclear assignment.
    """
    field = field or DEFAULTS.field
    central = central or DEFAULTS.central
    p1 = p1 or DEFAULTS.p1("n15")
    t = cce.time_grid
    n = len(config)
    meta = {"mode": cce.mode, "bath_state_mode": cce.bath_state_mode,
            "order": cce.order, "n_bath_states": cce.n_bath_states,
            "seed": seed, "floored_fraction": 0.0}
    if n == 0:
        return CoherenceCurve(times=t, values=np.ones(len(t), complex), metadata=meta)

    clusters = enumerate_clusters(config, cce.order, cce.dipole_radius)
    subsets = _proper_subset_indices(clusters)
    meta["n_clusters"] = len(clusters)

    rng = np.random.default_rng(as_seed_sequence(seed))
    axis = central.quantization_axis
    projections = p1.nuclear_projections

    # per-spin secular couplings (state-independent)
    azz = _couplings(config, central)  # A_z = (m1-m0) Azz
    m0, m1 = central.qubit_levels
    azz_raw = azz / (m1 - m0)
    pos = config.positions
    jzz = np.zeros((n, n))
    if n >= 2:
        rel = pos[:, None, :] - pos[None, :, :]
        r = np.linalg.norm(rel, axis=-1)
        np.fill_diagonal(r, np.inf)
        cosang = (rel @ axis) / r
        jzz = CONSTANTS.dipolar_prefactor / r**3 * (1.0 - 3.0 * cosang**2)

    def nuclear_draw():
        if cce.frozen_nuclear:
            ms = np.array([s.nuclear_m for s in config.spins])
            axes = np.array([s.jt_axis for s in config.spins], dtype=int)
        else:
            ms = rng.choice(np.asarray(projections), size=n)
            axes = rng.integers(0, 4, n)
        return ms, axes

    def eps_of(ms, axes):
        shifts = np.array([p1.hyperfine_shift(ms[i], axes[i]) for i in range(n)])
        return shifts - CONSTANTS.gamma_e * field.B_z

    by_size = {}
    for ci, c in enumerate(clusters):
        by_size.setdefault(len(c), []).append(ci)

    exact = cce.bath_state_mode == "exact"
    n_states = 1 if exact else cce.n_bath_states
    total = np.zeros(len(t), dtype=complex)
    floored = 0
    npoints = 0

    for _ in range(n_states):
        ms, axes = nuclear_draw()
        eps = eps_of(ms, axes)
        state_bits = None
        if not exact:
            state_bits = rng.integers(0, 2, n)

        # Out-of-cluster spins in the sampled state exert a static z field
        # on every cluster member (mean-field detuning); without it,
        # isolated resonant pairs overestimate flip-flop decay.
        if exact:
            svals = np.zeros(n)
            hmf = np.zeros(n)
        else:
            svals = 0.5 - state_bits
            hmf = jzz @ svals

        l_raw = np.empty((len(clusters), len(t)), dtype=complex)
        if cce.mode == "secular":
            for size, idxs in by_size.items():
                sets = np.array([clusters[i] for i in idxs], dtype=int)
                chunk = max(1, int(4e6 // (4**size)))
                for s0 in range(0, len(sets), chunk):
                    sl = sets[s0:s0 + chunk]
                    jc = jzz[sl[:, :, None], sl[:, None, :]]
                    sv = svals[sl]
                    eps_c = (eps + hmf)[sl] - np.einsum("cij,cj->ci", jc, sv)
                    H0, H1 = _secular_blocks(sl, eps_c, azz_raw, jzz,
                                             central.qubit_levels)
                    curves = _secular_cluster_curves(
                        H0, H1, state_bits, sl, sequence, t, exact=exact)
                    for off, ci in enumerate(idxs[s0:s0 + chunk]):
                        l_raw[ci] = curves[off]
        else:
            for ci, c in enumerate(clusters):
                assign = [(ms[i], int(axes[i])) for i in c]
                cl = np.array(c)
                extra = hmf[cl] - jzz[np.ix_(cl, cl)] @ svals[cl]
                if exact:
                    l_raw[ci] = cluster_contribution(
                        pos[list(c)], assign, sequence, None, t,
                        field=field, central=central, p1=p1,
                        central_position=config.central_position,
                        extra_z_shifts=extra)
                else:
                    bs = int(_state_index(state_bits, np.array([c]), len(c))[0])
                    l_raw[ci] = cluster_contribution(
                        pos[list(c)], assign, sequence, bs, t,
                        field=field, central=central, p1=p1,
                        central_position=config.central_position,
                        extra_z_shifts=extra)

        # telescoping division: irreducible contributions
        ltilde = np.empty_like(l_raw)
        prod = np.ones(len(t), dtype=complex)
        for ci in range(len(clusters)):
            denom = np.ones(len(t), dtype=complex)
            for sj in subsets[ci]:
                denom = denom * ltilde[sj]
            bad = np.abs(denom) < DIVISION_FLOOR
            safe = np.where(bad, 1.0, denom)
            ltilde[ci] = np.where(bad, 1.0, l_raw[ci] / safe)
            floored += int(np.count_nonzero(bad))
            npoints += len(t)
            prod = prod * ltilde[ci]
        total += prod

    values = total / n_states
    meta["floored_fraction"] = floored / max(1, npoints)
    if meta["floored_fraction"] > 0.01:
        meta["warning"] = "more than 1% of cluster contributions floored"
    return CoherenceCurve(times=t, values=values, metadata=meta)


# --- observable sweeps ------------------------------------------------------

def spawn_seed(root_seed, cell_index, config_index):
    """Deterministic per-configuration seed from one user seed."""
    ss = np.random.SeedSequence(root_seed, spawn_key=(cell_index, config_index))
    return ss


def ensemble_coherence(geometry, n_configs, cce, sequence, seed,
                       n_spins=None, central=None, p1=None, field=None,
                       cell_index=0) -> CoherenceCurve:
    """Ensemble-averaged |L(t)| over random bath configurations.

    Each configuration is drawn from `geometry` (optionally truncated to
    its n_spins nearest spins) and simulated with `cce`; the average of
    |L| across configurations is returned, mirroring ensemble (many-NV)
    measurements where each center sees its own static bath.
    """
    from .bath import generate_bath, keep_nearest

    central = central or DEFAULTS.central
    p1 = p1 or DEFAULTS.p1("n15")
    t = cce.time_grid
    acc = np.zeros(len(t))
    for i in range(n_configs):
        ss = spawn_seed(seed, cell_index, i)
        config = generate_bath(geometry, ss,
                               nuclear_projections=p1.nuclear_projections)
        if n_spins is not None:
            config = keep_nearest(config, n_spins)
        curve = cce_coherence(config, cce, sequence, field=field,
                              seed=ss.spawn(1)[0], central=central, p1=p1)
        acc += np.abs(curve.values)
    acc /= n_configs
    return CoherenceCurve(
        times=t, values=acc.astype(complex),
        metadata={"ensemble": n_configs, "seed": seed,
                  "n_spins": n_spins, "mode": cce.mode,
                  "order": cce.order, "sequence": sequence.kind})


def simulate_observable(geometry, n_configs, cce, sequence, seed,
                        observable="t2star", central=None, p1=None,
                        field=None, nuclear_projections=None,
                        cell_index=0, return_curves=False):
    """Per-configuration coherence times for one (geometry, sequence).

    observable "t2star": analytic order-1 partition route (Ramsey).
    observable "t2": CCE curves fitted to stretched exponentials.
    Failures are flagged entries (NaN) rather than global aborts.
    """
    from .bath import generate_bath
    from .fitting import fit_stretched_exponential

    central = central or DEFAULTS.central
    p1 = p1 or DEFAULTS.p1("n15")
    if nuclear_projections is None:
        nuclear_projections = p1.nuclear_projections
    times = []
    curves = []
    for i in range(n_configs):
        ss = spawn_seed(seed, cell_index, i)
        config = generate_bath(geometry, ss, nuclear_projections=nuclear_projections)
        if observable == "t2star":
            part = partition_strong_weak(config, central)
            times.append(part.t2_star)
            if return_curves:
                curves.append(ramsey_cce1_analytic(config, cce.time_grid, central))
        elif observable == "t2":
            curve = cce_coherence(config, cce, sequence, field=field,
                                  seed=ss.spawn(1)[0], central=central, p1=p1)
            if return_curves:
                curves.append(curve)
            try:
                fit = fit_stretched_exponential(curve)
                times.append(fit.t2 if fit.converged else np.nan)
            except ValueError:
                times.append(np.nan)
        else:
            raise ValueError(f"unknown observable {observable!r}")
    if return_curves:
        return times, curves
    return times

"""Mixed-state stabilizer simulation over GF(2).

A state on `n` qubits is a list of `k <= n` independent, commuting signed
Pauli generators; it represents rho = 2**-n * sum over the generated group
of its signed elements, with entropy S = n - k dits.

Pauli encoding: a row (x, z, sign) stands for the Hermitian operator
(-1)**sign * i**(x.z) * X^x Z^z.  Intermediate products track a phase
exponent mod 4 (operator = i**ph * X^x Z^z); products of commuting
Hermitian Paulis always land back on a Hermitian representative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ImpossibleRecord
from .pauli import PauliString


def _dot2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """GF(2) inner products: (... x n) . (n,) -> parity."""
    return (a @ b) & 1


@dataclass
class StabilizerMixedState:
    """k independent commuting signed Pauli generators on n qubits."""

    n_qubits: int
    x: np.ndarray  # (k, n) uint8
    z: np.ndarray  # (k, n) uint8
    sign: np.ndarray  # (k,) uint8

    @classmethod
    def fully_mixed(cls, n: int) -> "StabilizerMixedState":
        return cls(n, np.zeros((0, n), np.uint8), np.zeros((0, n), np.uint8), np.zeros(0, np.uint8))

    @classmethod
    def computational(cls, n: int, bits: int = 0) -> "StabilizerMixedState":
        """Pure product state |bits> (generators (-1)^{bit_s} Z_s)."""
        x = np.zeros((n, n), np.uint8)
        z = np.eye(n, dtype=np.uint8)
        sign = np.array([(bits >> s) & 1 for s in range(n)], np.uint8)
        return cls(n, x, z, sign)

    @property
    def k(self) -> int:
        return self.x.shape[0]

    @property
    def entropy(self) -> int:
        """Entropy in dits (q=2): S = n - k."""
        return self.n_qubits - self.k

    def purity(self) -> float:
        return float(np.ldexp(1.0, -(self.n_qubits - self.k)))

    def copy(self) -> "StabilizerMixedState":
        return StabilizerMixedState(self.n_qubits, self.x.copy(), self.z.copy(), self.sign.copy())

    def validate(self):
        """Check mutual commutation and GF(2) independence of generators."""
        k, n = self.k, self.n_qubits
        for i in range(k):
            anti = (_dot2(self.x, self.z[i]) + _dot2(self.z, self.x[i])) & 1
            if anti.any():
                raise ValueError(f"generator {i} anticommutes with another row")
        rows = np.concatenate([self.x, self.z], axis=1)
        if _gf2_rank(rows) != k:
            raise ValueError("generators are linearly dependent")


# -- phase-tracked row products ----------------------------------------------


def _phase_of_row(x: np.ndarray, z: np.ndarray, sign: int) -> int:
    """Phase exponent of the Hermitian row as i**ph X^x Z^z."""
    return (int(np.sum(x & z)) + 2 * int(sign)) % 4


def _sign_from_phase(x: np.ndarray, z: np.ndarray, ph: int) -> int:
    """Recover the Hermitian sign bit from a phase exponent."""
    diff = (ph - int(np.sum(x & z))) % 4
    if diff % 2:
        raise AssertionError("product is not Hermitian: phase parity error")
    return (diff // 2) % 2


def _mul_rows_by_pauli(state: StabilizerMixedState, rows: np.ndarray, px, pz, pph):
    """In place: generator rows[i] <- rows[i] * P for the given Pauli."""
    if len(rows) == 0:
        return
    xs = state.x[rows]
    zs = state.z[rows]
    ph = (xs & zs).sum(axis=1, dtype=np.int64) + 2 * state.sign[rows].astype(np.int64)
    ph = ph + pph + 2 * (zs & px).sum(axis=1, dtype=np.int64)
    xs ^= px
    zs ^= pz
    diff = (ph - (xs & zs).sum(axis=1, dtype=np.int64)) % 4
    if (diff % 2).any():
        raise AssertionError("product is not Hermitian: phase parity error")
    state.x[rows] = xs
    state.z[rows] = zs
    state.sign[rows] = ((diff // 2) % 2).astype(np.uint8)


def _product_of_rows(x: np.ndarray, z: np.ndarray, sign: np.ndarray, combo: np.ndarray):
    """Product of the selected generator rows, as (x, z, phase-exponent)."""
    n = x.shape[1]
    ax = np.zeros(n, np.uint8)
    az = np.zeros(n, np.uint8)
    ph = 0
    for r in np.nonzero(combo)[0]:
        ph = (ph + _phase_of_row(x[r], z[r], sign[r]) + 2 * int(np.sum(az & x[r]))) % 4
        ax ^= x[r]
        az ^= z[r]
    return ax, az, ph


# -- GF(2) linear algebra ----------------------------------------------------


def _gf2_rank(rows: np.ndarray) -> int:
    m = rows.copy().astype(np.uint8)
    rank = 0
    ncols = m.shape[1]
    for col in range(ncols):
        pivots = np.nonzero(m[rank:, col])[0]
        if pivots.size == 0:
            continue
        p = rank + pivots[0]
        m[[rank, p]] = m[[p, rank]]
        hit = np.nonzero(m[:, col])[0]
        hit = hit[hit != rank]
        m[hit] ^= m[rank]
        rank += 1
        if rank == m.shape[0]:
            break
    return rank


def _gf2_solve(rows: np.ndarray, target: np.ndarray):
    """Combination c with c.rows == target over GF(2), or None.

    `rows` is (k, m); returns a length-k uint8 vector.
    """
    k = rows.shape[0]
    if k == 0:
        return None if target.any() else np.zeros(0, np.uint8)
    m = rows.copy().astype(np.uint8)
    aug = np.eye(k, dtype=np.uint8)
    t = target.copy().astype(np.uint8)
    combo = np.zeros(k, np.uint8)
    rank = 0
    for col in range(m.shape[1]):
        pivots = np.nonzero(m[rank:, col])[0]
        if pivots.size == 0:
            continue
        p = rank + pivots[0]
        m[[rank, p]] = m[[p, rank]]
        aug[[rank, p]] = aug[[p, rank]]
        hit = np.nonzero(m[:, col])[0]
        hit = hit[hit != rank]
        m[hit] ^= m[rank]
        aug[hit] ^= aug[rank]
        if t[col]:
            t ^= m[rank]
            combo ^= aug[rank]
        rank += 1
        if rank == k:
            break
    if t.any():
        return None
    return combo


def _gf2_kernel(rows: np.ndarray) -> np.ndarray:
    """Basis for {c : c.rows == 0} over GF(2); shape (dim, k)."""
    k = rows.shape[0]
    m = rows.copy().astype(np.uint8)
    aug = np.eye(k, dtype=np.uint8)
    rank = 0
    for col in range(m.shape[1]):
        pivots = np.nonzero(m[rank:, col])[0]
        if pivots.size == 0:
            continue
        p = rank + pivots[0]
        m[[rank, p]] = m[[p, rank]]
        aug[[rank, p]] = aug[[p, rank]]
        hit = np.nonzero(m[:, col])[0]
        hit = hit[hit != rank]
        m[hit] ^= m[rank]
        aug[hit] ^= aug[rank]
        rank += 1
        if rank == k:
            break
    zero = ~m[rank:].any(axis=1) if rank < k else np.zeros(0, bool)
    return aug[rank:][zero] if rank < k else np.zeros((0, k), np.uint8)


# -- named gates --------------------------------------------------------------


def _gate_h(st: StabilizerMixedState, a: int):
    st.sign ^= st.x[:, a] & st.z[:, a]
    st.x[:, a], st.z[:, a] = st.z[:, a].copy(), st.x[:, a].copy()


def _gate_s(st: StabilizerMixedState, a: int):
    st.sign ^= st.x[:, a] & st.z[:, a]
    st.z[:, a] ^= st.x[:, a]


def _gate_sdg(st: StabilizerMixedState, a: int):
    st.sign ^= st.x[:, a] & (st.z[:, a] ^ 1)
    st.z[:, a] ^= st.x[:, a]


def _gate_x(st: StabilizerMixedState, a: int):
    st.sign ^= st.z[:, a]


def _gate_y(st: StabilizerMixedState, a: int):
    st.sign ^= st.x[:, a] ^ st.z[:, a]


def _gate_z(st: StabilizerMixedState, a: int):
    st.sign ^= st.x[:, a]


def _gate_cnot(st: StabilizerMixedState, c: int, t: int):
    st.sign ^= st.x[:, c] & st.z[:, t] & (st.x[:, t] ^ st.z[:, c] ^ 1)
    st.x[:, t] ^= st.x[:, c]
    st.z[:, c] ^= st.z[:, t]


def _gate_swap(st: StabilizerMixedState, a: int, b: int):
    st.x[:, [a, b]] = st.x[:, [b, a]]
    st.z[:, [a, b]] = st.z[:, [b, a]]


def _gate_cz(st: StabilizerMixedState, a: int, b: int):
    _gate_h(st, b)
    _gate_cnot(st, a, b)
    _gate_h(st, b)


_NAMED_GATES = {
    "H": (_gate_h, 1),
    "S": (_gate_s, 1),
    "SDG": (_gate_sdg, 1),
    "X": (_gate_x, 1),
    "Y": (_gate_y, 1),
    "Z": (_gate_z, 1),
    "CNOT": (_gate_cnot, 2),
    "CZ": (_gate_cz, 2),
    "SWAP": (_gate_swap, 2),
}


def apply_named_gate(state: StabilizerMixedState, name: str, *sites: int) -> StabilizerMixedState:
    """Apply a named Clifford gate in place (k is unchanged)."""
    try:
        fn, arity = _NAMED_GATES[name.upper()]
    except KeyError:
        raise ValueError(f"unknown Clifford gate {name!r}") from None
    if len(sites) != arity:
        raise ValueError(f"{name} takes {arity} site(s)")
    if len(set(sites)) != len(sites) or any(s < 0 or s >= state.n_qubits for s in sites):
        raise ValueError(f"invalid sites {sites}")
    fn(state, *sites)
    return state


# -- Clifford tableaus ---------------------------------------------------------


@dataclass
class CliffordTableau:
    """A Clifford map given by the signed images of X_s and Z_s.

    imx_*/imz_* rows are the Hermitian-encoded images: row s of imx is
    C X_s C^dagger, row s of imz is C Z_s C^dagger.
    """

    n_qubits: int
    imx_x: np.ndarray
    imx_z: np.ndarray
    imx_sign: np.ndarray
    imz_x: np.ndarray
    imz_z: np.ndarray
    imz_sign: np.ndarray

    @classmethod
    def identity(cls, n: int) -> "CliffordTableau":
        eye = np.eye(n, dtype=np.uint8)
        zero = np.zeros((n, n), np.uint8)
        zs = np.zeros(n, np.uint8)
        return cls(n, eye.copy(), zero.copy(), zs.copy(), zero.copy(), eye.copy(), zs.copy())

    def conjugate_pauli(self, x, z, sign=0):
        """Image (x', z', sign') of a Hermitian Pauli under this map.

        C P C^dag = (-1)^sign i^(x.z) prod_j (C X_j C^dag)^{x_j}
        prod_j (C Z_j C^dag)^{z_j}; the factor product is accumulated with
        phase arithmetic mod 4 and the result reduced back to the
        Hermitian convention.
        """
        x = np.asarray(x, np.uint8)
        z = np.asarray(z, np.uint8)
        n = self.n_qubits
        ax = np.zeros(n, np.uint8)
        az = np.zeros(n, np.uint8)
        ph = 0
        for j in range(n):
            if x[j]:
                fph = _phase_of_row(self.imx_x[j], self.imx_z[j], self.imx_sign[j])
                ph = (ph + fph + 2 * int(np.sum(az & self.imx_x[j]))) % 4
                ax ^= self.imx_x[j]
                az ^= self.imx_z[j]
        for j in range(n):
            if z[j]:
                fph = _phase_of_row(self.imz_x[j], self.imz_z[j], self.imz_sign[j])
                ph = (ph + fph + 2 * int(np.sum(az & self.imz_x[j]))) % 4
                ax ^= self.imz_x[j]
                az ^= self.imz_z[j]
        ph = (ph + int(np.sum(x & z)) + 2 * int(sign)) % 4
        return ax, az, _sign_from_phase(ax, az, ph)

    def compose(self, after: "CliffordTableau") -> "CliffordTableau":
        """Tableau of `after . self` (apply self first, then `after`)."""
        n = self.n_qubits
        out = CliffordTableau.identity(n)
        for j in range(n):
            ax, az, s = after.conjugate_pauli(self.imx_x[j], self.imx_z[j], self.imx_sign[j])
            out.imx_x[j], out.imx_z[j], out.imx_sign[j] = ax, az, s
            ax, az, s = after.conjugate_pauli(self.imz_x[j], self.imz_z[j], self.imz_sign[j])
            out.imz_x[j], out.imz_z[j], out.imz_sign[j] = ax, az, s
        return out

    def inverse(self) -> "CliffordTableau":
        """Inverse map, with signs fixed so inverse(self(P)) == P."""
        n = self.n_qubits
        m = np.zeros((2 * n, 2 * n), np.uint8)
        m[:n, :n] = self.imx_x
        m[:n, n:] = self.imx_z
        m[n:, :n] = self.imz_x
        m[n:, n:] = self.imz_z
        # symplectic inverse: M^-1 = Omega M^T Omega with Omega = [[0,I],[I,0]]
        mt = m.T % 2
        minv = np.zeros_like(mt)
        minv[:n, :n] = mt[n:, n:]
        minv[:n, n:] = mt[n:, :n]
        minv[n:, :n] = mt[:n, n:]
        minv[n:, n:] = mt[:n, :n]
        out = CliffordTableau(
            n,
            minv[:n, :n].copy(), minv[:n, n:].copy(), np.zeros(n, np.uint8),
            minv[n:, :n].copy(), minv[n:, n:].copy(), np.zeros(n, np.uint8),
        )
        # fix signs: require self(out(B)) == B for every basis Pauli B;
        # a residual sign on the round trip means the candidate image was off
        for j in range(n):
            _, _, s = self.conjugate_pauli(out.imx_x[j], out.imx_z[j], out.imx_sign[j])
            out.imx_sign[j] ^= s
            _, _, s = self.conjugate_pauli(out.imz_x[j], out.imz_z[j], out.imz_sign[j])
            out.imz_sign[j] ^= s
        return out

    def is_symplectic(self) -> bool:
        """Check that the tableau preserves commutation relations."""
        n = self.n_qubits
        ok = True
        for i in range(n):
            for j in range(n):
                # X_i, X_j commute; Z_i, Z_j commute; X_i, Z_j anticommute iff i==j
                axx = (int(_dot2(self.imx_x[i], self.imx_z[j])) + int(_dot2(self.imx_z[i], self.imx_x[j]))) % 2
                azz = (int(_dot2(self.imz_x[i], self.imz_z[j])) + int(_dot2(self.imz_z[i], self.imz_x[j]))) % 2
                axz = (int(_dot2(self.imx_x[i], self.imz_z[j])) + int(_dot2(self.imx_z[i], self.imz_x[j]))) % 2
                ok &= axx == 0 and azz == 0 and axz == (1 if i == j else 0)
        return ok


def apply_tableau(state: StabilizerMixedState, tab: CliffordTableau) -> StabilizerMixedState:
    """Conjugate every generator of `state` by the Clifford map, in place.

    Vectorized over generator rows: the factor products of
    `conjugate_pauli` are accumulated for all rows at once, column by
    column of the tableau.
    """
    k, n = state.k, state.n_qubits
    if k == 0:
        return state
    ax = np.zeros((k, n), np.uint8)
    az = np.zeros((k, n), np.uint8)
    ph = (state.x & state.z).sum(axis=1, dtype=np.int64) + 2 * state.sign.astype(np.int64)
    for part_sel, fx_all, fz_all, fs_all in (
        (state.x, tab.imx_x, tab.imx_z, tab.imx_sign),
        (state.z, tab.imz_x, tab.imz_z, tab.imz_sign),
    ):
        for j in range(n):
            sel = np.nonzero(part_sel[:, j])[0]
            if sel.size == 0:
                continue
            fx, fz, fs = fx_all[j], fz_all[j], fs_all[j]
            fph = int(np.sum(fx & fz)) + 2 * int(fs)
            ph[sel] += fph + 2 * (az[sel] & fx).sum(axis=1, dtype=np.int64)
            ax[sel] ^= fx
            az[sel] ^= fz
    diff = (ph - (ax & az).sum(axis=1, dtype=np.int64)) % 4
    if (diff % 2).any():
        raise AssertionError("conjugation lost Hermiticity: phase parity error")
    state.x = ax
    state.z = az
    state.sign = ((diff // 2) % 2).astype(np.uint8)
    return state


def apply_clifford_gate(state, gate, *sites) -> StabilizerMixedState:
    """Apply a named gate ('H', site) / ('CNOT', c, t) or an embedded 2q tableau."""
    if isinstance(gate, str):
        return apply_named_gate(state, gate, *sites)
    if isinstance(gate, CliffordTableau):
        if gate.n_qubits == state.n_qubits and not sites:
            return apply_tableau(state, gate)
        return apply_embedded_tableau(state, gate, sites)
    raise ValueError("gate must be a name or a CliffordTableau")


def _local_action_table(tab: CliffordTableau):
    """Images of all 16 two-site Paulis under a 2-qubit tableau.

    Cached on the tableau; rows indexed by x0 + 2 x1 + 4 z0 + 8 z1 and
    holding (x0', x1', z0', z1', sign').  Lets gates act on whole
    generator sets with one vectorized lookup.
    """
    table = getattr(tab, "_local_table", None)
    if table is not None:
        return table
    table = np.zeros((16, 5), np.uint8)
    for code in range(16):
        x = np.array([code & 1, (code >> 1) & 1], np.uint8)
        z = np.array([(code >> 2) & 1, (code >> 3) & 1], np.uint8)
        ax, az, s = tab.conjugate_pauli(x, z, 0)
        table[code] = (ax[0], ax[1], az[0], az[1], s)
    tab._local_table = table
    return table


def apply_embedded_tableau(state: StabilizerMixedState, tab: CliffordTableau, sites) -> StabilizerMixedState:
    """Apply a small tableau on the given sites of a larger state.

    Site order matches the tableau's qubit order (tableau qubit 0 acts on
    sites[0], etc.).  The i**(x.z) Hermitian prefactor splits site-wise,
    so conjugating the in-support factor (sign 0) and XOR-ing its
    residual sign into each row is exact.
    """
    sites = list(sites)
    m = tab.n_qubits
    if len(sites) != m:
        raise ValueError("site count does not match tableau size")
    if state.k == 0:
        return state
    if m == 2:
        a, b = sites
        table = _local_action_table(tab)
        codes = (
            state.x[:, a].astype(np.intp)
            | (state.x[:, b].astype(np.intp) << 1)
            | (state.z[:, a].astype(np.intp) << 2)
            | (state.z[:, b].astype(np.intp) << 3)
        )
        img = table[codes]
        state.x[:, a] = img[:, 0]
        state.x[:, b] = img[:, 1]
        state.z[:, a] = img[:, 2]
        state.z[:, b] = img[:, 3]
        state.sign ^= img[:, 4]
        return state
    for r in range(state.k):
        sub_x = state.x[r, sites].copy()
        sub_z = state.z[r, sites].copy()
        if not sub_x.any() and not sub_z.any():
            continue
        ax, az, s = tab.conjugate_pauli(sub_x, sub_z, 0)
        state.x[r, sites] = ax
        state.z[r, sites] = az
        state.sign[r] ^= s
    return state


# -- measurement ---------------------------------------------------------------


def measure_z_stab(state: StabilizerMixedState, site: int, rng=None, forced=None):
    """Projective Z measurement on `site` of a mixed tableau, in place.

    Three cases: an anticommuting generator exists (random outcome, k
    unchanged), Z_site is in the group (deterministic outcome), or Z_site
    is independent and commuting (random outcome, k grows by one).

    In sample mode one uniform variate is consumed per call even when the
    outcome is deterministic, so record streams stay aligned with the
    dense engine under a shared seed.

    Returns (state, outcome, prob).
    """
    if (rng is None) == (forced is None):
        raise ValueError("pass exactly one of rng (sample) or forced (replay)")
    n = state.n_qubits
    if site < 0 or site >= n:
        raise ValueError(f"site {site} out of range")
    u = rng.random() if rng is not None else None

    anti = np.nonzero(state.x[:, site])[0]
    if anti.size > 0:
        # case (a): outcome is a fair coin; pivot row absorbs the others
        outcome = _pick_outcome(u, forced, 0.5)
        p = anti[0]
        px, pz = state.x[p].copy(), state.z[p].copy()
        pph = _phase_of_row(px, pz, state.sign[p])
        _mul_rows_by_pauli(state, anti[1:], px, pz, pph)
        state.x[p] = 0
        state.z[p] = 0
        state.z[p, site] = 1
        state.sign[p] = outcome
        return state, outcome, 0.5

    # Z_site commutes with every generator
    target = np.zeros(2 * n, np.uint8)
    target[n + site] = 1
    rows = np.concatenate([state.x, state.z], axis=1)
    combo = _gf2_solve(rows, target)
    if combo is not None:
        # case (b): +-Z_site is in the group; outcome deterministic
        ax, az, ph = _product_of_rows(state.x, state.z, state.sign, combo)
        det = _sign_from_phase(ax, az, ph)
        if forced is not None and int(forced) != det:
            raise ImpossibleRecord(
                f"forced outcome {forced} on site {site} contradicts the tableau"
            )
        return state, det, 1.0

    # case (c): independent direction purifies, k -> k+1
    outcome = _pick_outcome(u, forced, 0.5)
    newx = np.zeros((1, n), np.uint8)
    newz = np.zeros((1, n), np.uint8)
    newz[0, site] = 1
    state.x = np.concatenate([state.x, newx], axis=0)
    state.z = np.concatenate([state.z, newz], axis=0)
    state.sign = np.concatenate([state.sign, np.array([outcome], np.uint8)])
    return state, outcome, 0.5


def _pick_outcome(u, forced, p1):
    if forced is not None:
        return int(forced)
    return 1 if u < p1 else 0


# -- entropies, expectations, overlaps ----------------------------------------


def subsystem_entropy(state: StabilizerMixedState, subset_mask: int) -> int:
    """Entropy S_A in dits: |A| minus the number of generators inside A.

    The subgroup supported inside A has log-size k - rank(rows restricted
    to the complement), and the reduced state is flat on its support.
    """
    n = state.n_qubits
    outside = [s for s in range(n) if not (subset_mask >> s) & 1]
    size_a = n - len(outside)
    if state.k == 0:
        return size_a
    restricted = np.concatenate([state.x[:, outside], state.z[:, outside]], axis=1)
    k_a = state.k - _gf2_rank(restricted)
    return size_a - k_a


def subsystem_purity_stab(state: StabilizerMixedState, subset_mask: int) -> float:
    return float(np.ldexp(1.0, -subsystem_entropy(state, subset_mask)))


def all_subset_entropies(state: StabilizerMixedState) -> np.ndarray:
    """S_A for every subset mask (length 2**n array)."""
    n = state.n_qubits
    out = np.empty(1 << n, dtype=np.int64)
    for mask in range(1 << n):
        out[mask] = subsystem_entropy(state, mask)
    return out


def stab_pauli_expect(state: StabilizerMixedState, p: PauliString) -> float:
    """Tr(rho P): +-1 if +-P is in the stabilizer group, else 0."""
    n = state.n_qubits
    if p.n_qubits != n:
        raise ValueError("Pauli length mismatch")
    if p.weight == 0:
        return 1.0
    px = np.array([1 if c in (1, 2) else 0 for c in p.letters], np.uint8)
    pz = np.array([1 if c in (2, 3) else 0 for c in p.letters], np.uint8)
    rows = np.concatenate([state.x, state.z], axis=1)
    combo = _gf2_solve(rows, np.concatenate([px, pz]))
    if combo is None:
        return 0.0
    ax, az, ph = _product_of_rows(state.x, state.z, state.sign, combo)
    return 1.0 if _sign_from_phase(ax, az, ph) == 0 else -1.0


def stab_overlap(a: StabilizerMixedState, b: StabilizerMixedState) -> float:
    """Tr(rho_a rho_b) of two stabilizer mixed states.

    Equals 2**(k_int - n) when the signs of the two groups agree on their
    intersection, else 0 (k_int = log2 of the intersection subgroup size).
    """
    n = a.n_qubits
    if b.n_qubits != n:
        raise ValueError("qubit count mismatch")
    rows_a = np.concatenate([a.x, a.z], axis=1)
    rows_b = np.concatenate([b.x, b.z], axis=1)
    stacked = np.concatenate([rows_a, rows_b], axis=0)
    kernel = _gf2_kernel(stacked)
    k_int = kernel.shape[0]
    for vec in kernel:
        ca, cb = vec[: a.k], vec[a.k:]
        ax, az, pha = _product_of_rows(a.x, a.z, a.sign, ca)
        bx, bz, phb = _product_of_rows(b.x, b.z, b.sign, cb)
        if _sign_from_phase(ax, az, pha) != _sign_from_phase(bx, bz, phb):
            return 0.0
    return float(np.ldexp(1.0, k_int - n))


# -- uniform random Cliffords ---------------------------------------------------
#
# The symplectic factor is sampled with the transvection construction of
# Koenig and Smolin, choosing each coset representative uniformly, which
# yields an exactly uniform element of Sp(2n, F_2); independent uniform
# sign bits for the 2n generator images then give a uniformly random
# Clifford (mod global phase).  Vectors interleave (x_1, z_1, x_2, z_2...).


def _symp_inner(v: np.ndarray, w: np.ndarray) -> int:
    t = 0
    for i in range(0, v.size, 2):
        t ^= (v[i] & w[i + 1]) ^ (v[i + 1] & w[i])
    return int(t)


def _transvection(k: np.ndarray, v: np.ndarray) -> np.ndarray:
    if not k.any():
        return v.copy()
    return (v ^ (_symp_inner(k, v) * k)).astype(np.uint8)


def _find_transvection(x: np.ndarray, y: np.ndarray):
    """(h1, h2) with y = Z_h1 Z_h2 x, for nonzero x, y."""
    nn = x.size
    out = (np.zeros(nn, np.uint8), np.zeros(nn, np.uint8))
    if np.array_equal(x, y):
        return out
    if _symp_inner(x, y) == 1:
        return ((x ^ y).astype(np.uint8), np.zeros(nn, np.uint8))
    z = np.zeros(nn, np.uint8)
    # try a qubit where both x and y have support
    for i in range(0, nn, 2):
        if (x[i] | x[i + 1]) and (y[i] | y[i + 1]):
            z[i] = x[i] ^ y[i]
            z[i + 1] = x[i + 1] ^ y[i + 1]
            if z[i] == 0 and z[i + 1] == 0:
                z[i + 1] = 1
                if x[i] != x[i + 1]:
                    z[i] = 1
            return ((x ^ z).astype(np.uint8), (y ^ z).astype(np.uint8))
    # otherwise pick one qubit with x-support only and one with y-support only
    for i in range(0, nn, 2):
        if (x[i] | x[i + 1]) and not (y[i] | y[i + 1]):
            if x[i] == x[i + 1]:
                z[i + 1] = 1
            else:
                z[i + 1] = x[i]
                z[i] = x[i + 1]
            break
    for i in range(0, nn, 2):
        if not (x[i] | x[i + 1]) and (y[i] | y[i + 1]):
            if y[i] == y[i + 1]:
                z[i + 1] = 1
            else:
                z[i + 1] = y[i]
                z[i] = y[i + 1]
            break
    return ((x ^ z).astype(np.uint8), (y ^ z).astype(np.uint8))


def _int_to_bits(v: int, n: int) -> np.ndarray:
    return np.array([(v >> i) & 1 for i in range(n)], np.uint8)


def _random_symplectic(n: int, rng) -> np.ndarray:
    """Uniform element of Sp(2n, F_2); rows are images of the interleaved basis."""
    nn = 2 * n
    # uniform nonzero image of e1
    f1 = _int_to_bits(int(rng.integers(1, 1 << nn)), nn)
    e1 = np.zeros(nn, np.uint8)
    e1[0] = 1
    t1, t2 = _find_transvection(e1, f1)
    bits = _int_to_bits(int(rng.integers(0, 1 << (nn - 1))), nn - 1)
    eprime = e1.copy()
    for j in range(2, nn):
        eprime[j] = bits[j - 1]
    h0 = _transvection(t1, eprime)
    h0 = _transvection(t2, h0)
    if bits[0] == 1:
        f1 = np.zeros(nn, np.uint8)  # drops the Z_f1 transvection below
    if n == 1:
        g = np.eye(2, dtype=np.uint8)
    else:
        g = np.zeros((nn, nn), np.uint8)
        g[:2, :2] = np.eye(2, dtype=np.uint8)
        g[2:, 2:] = _random_symplectic(n - 1, rng)
    for j in range(nn):
        row = g[j]
        row = _transvection(t1, row)
        row = _transvection(t2, row)
        row = _transvection(h0, row)
        row = _transvection(f1, row)
        g[j] = row
    return g


def random_clifford_tableau(n: int, rng) -> CliffordTableau:
    """Uniformly random n-qubit Clifford (mod phase) as a tableau."""
    g = _random_symplectic(n, rng)
    signs = rng.integers(0, 2, size=2 * n).astype(np.uint8)
    tab = CliffordTableau.identity(n)
    for j in range(n):
        rx = g[2 * j]
        rz = g[2 * j + 1]
        tab.imx_x[j] = rx[0::2]
        tab.imx_z[j] = rx[1::2]
        tab.imx_sign[j] = signs[2 * j]
        tab.imz_x[j] = rz[0::2]
        tab.imz_z[j] = rz[1::2]
        tab.imz_sign[j] = signs[2 * j + 1]
    return tab


# -- the full two-qubit Clifford group -------------------------------------------
#
# Gate draws for the clifford2q ensemble come from an enumeration of the
# whole group (mod phase): 11520 = |Sp(4,F2)| * 16 elements, generated by
# breadth-first closure over {H, S, CNOT}.  Sampling an index is exactly
# uniform, and sharing the 11520 tableau objects lets their local-action
# tables, inverses and synthesized unitaries be cached once for all draws.

_CLIFFORD_2Q = []


def _basis_gate_tableau(name, *sites) -> CliffordTableau:
    """Tableau of a named gate from its action on the basis Paulis."""
    tab = CliffordTableau.identity(2)
    for j in range(2):
        for which, px, pz in (("x", 1, 0), ("z", 0, 1)):
            st = StabilizerMixedState(
                2,
                np.array([[px if s == j else 0 for s in range(2)]], np.uint8),
                np.array([[pz if s == j else 0 for s in range(2)]], np.uint8),
                np.zeros(1, np.uint8),
            )
            apply_named_gate(st, name, *sites)
            if which == "x":
                tab.imx_x[j], tab.imx_z[j], tab.imx_sign[j] = st.x[0], st.z[0], st.sign[0]
            else:
                tab.imz_x[j], tab.imz_z[j], tab.imz_sign[j] = st.x[0], st.z[0], st.sign[0]
    return tab


def _compose_2q(a: CliffordTableau, after: CliffordTableau) -> CliffordTableau:
    """2-qubit compose (apply `a` then `after`) via the local-action table."""
    table = _local_action_table(after)
    out = CliffordTableau.identity(2)
    for src_x, src_z, src_s, dst_x, dst_z, dst_s in (
        (a.imx_x, a.imx_z, a.imx_sign, out.imx_x, out.imx_z, out.imx_sign),
        (a.imz_x, a.imz_z, a.imz_sign, out.imz_x, out.imz_z, out.imz_sign),
    ):
        codes = (
            src_x[:, 0].astype(np.intp)
            | (src_x[:, 1].astype(np.intp) << 1)
            | (src_z[:, 0].astype(np.intp) << 2)
            | (src_z[:, 1].astype(np.intp) << 3)
        )
        img = table[codes]
        dst_x[:, 0] = img[:, 0]
        dst_x[:, 1] = img[:, 1]
        dst_z[:, 0] = img[:, 2]
        dst_z[:, 1] = img[:, 3]
        dst_s[:] = src_s ^ img[:, 4]
    return out


def _compose_tables(ta: np.ndarray, tb: np.ndarray) -> np.ndarray:
    """Local-action table of (b after a) from the two factors' tables."""
    mid = ta[:, :4]
    codes = (
        mid[:, 0].astype(np.intp)
        | (mid[:, 1].astype(np.intp) << 1)
        | (mid[:, 2].astype(np.intp) << 2)
        | (mid[:, 3].astype(np.intp) << 3)
    )
    out = tb[codes].copy()
    out[:, 4] ^= ta[:, 4]
    return out


def _tableau_from_table(table: np.ndarray) -> CliffordTableau:
    """Reconstruct the tableau from its 16-entry local action (basis rows
    sit at codes 1, 2, 4, 8)."""
    tab = CliffordTableau.identity(2)
    for j, code in ((0, 1), (1, 2)):
        tab.imx_x[j] = table[code, 0:2]
        tab.imx_z[j] = table[code, 2:4]
        tab.imx_sign[j] = table[code, 4]
    for j, code in ((0, 4), (1, 8)):
        tab.imz_x[j] = table[code, 0:2]
        tab.imz_z[j] = table[code, 2:4]
        tab.imz_sign[j] = table[code, 4]
    tab._local_table = table
    return tab


def all_two_qubit_cliffords():
    """The 11520 two-qubit Clifford tableaus, in a fixed deterministic order.

    Breadth-first closure over {H, S, CNOT} carried out on the 16-entry
    local-action tables (composition is a table lookup), so building the
    whole group with its action tables takes well under a second.
    """
    if _CLIFFORD_2Q:
        return _CLIFFORD_2Q
    gens = [
        _local_action_table(_basis_gate_tableau("H", 0)),
        _local_action_table(_basis_gate_tableau("H", 1)),
        _local_action_table(_basis_gate_tableau("S", 0)),
        _local_action_table(_basis_gate_tableau("S", 1)),
        _local_action_table(_basis_gate_tableau("CNOT", 0, 1)),
        _local_action_table(_basis_gate_tableau("CNOT", 1, 0)),
    ]
    ident = _local_action_table(CliffordTableau.identity(2))
    seen = {ident.tobytes(): ident}
    frontier = [ident]
    while frontier:
        new = []
        for table in frontier:
            for g in gens:
                cand = _compose_tables(table, g)
                key = cand.tobytes()
                if key not in seen:
                    seen[key] = cand
                    new.append(cand)
        frontier = new
    if len(seen) != 11520:
        raise AssertionError(f"2-qubit Clifford closure found {len(seen)} elements")
    _CLIFFORD_2Q.extend(_tableau_from_table(t) for t in seen.values())
    return _CLIFFORD_2Q


def random_clifford_2q(rng) -> CliffordTableau:
    """Uniform 2-qubit Clifford, drawn from the full group enumeration."""
    group = all_two_qubit_cliffords()
    return group[int(rng.integers(0, len(group)))]


def tableau_inverse_cached(tab: CliffordTableau) -> CliffordTableau:
    inv = getattr(tab, "_inverse", None)
    if inv is None:
        inv = tab.inverse()
        tab._inverse = inv
    return inv


def tableau_unitary_cached(tab: CliffordTableau) -> np.ndarray:
    u = getattr(tab, "_unitary", None)
    if u is None:
        u = tableau_to_unitary(tab)
        tab._unitary = u
    return u


# -- bridges to the dense engine -----------------------------------------------


def hermitian_pauli_matrix(x: np.ndarray, z: np.ndarray, sign: int) -> np.ndarray:
    """Dense matrix of the Hermitian row (site 0 = least significant bit)."""
    letters = []
    for xs, zs in zip(x, z):
        letters.append({(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}[(int(xs), int(zs))])
    p = PauliString(len(letters), tuple(letters))
    return (-1.0) ** int(sign) * p.to_matrix()


def tableau_to_unitary(tab: CliffordTableau) -> np.ndarray:
    """Dense unitary of a Clifford tableau (global phase arbitrary).

    Builds C|0..0> as the joint +1 eigenvector of the images of Z_s, then
    fills the remaining columns as C|b> = prod_s (C X_s C^dag)^{b_s} C|0>.
    Exponential in n; guarded for synthesis of small tableaus.
    """
    n = tab.n_qubits
    if n > 8:
        raise ValueError("unitary synthesis limited to n <= 8")
    d = 1 << n
    proj = np.eye(d, dtype=complex)
    for j in range(n):
        g = hermitian_pauli_matrix(tab.imz_x[j], tab.imz_z[j], tab.imz_sign[j])
        proj = proj @ (np.eye(d) + g) / 2.0
    # any nonzero column of the rank-1 projector is C|0..0>
    col = np.argmax(np.abs(np.diag(proj)))
    phi0 = proj[:, col]
    phi0 = phi0 / np.linalg.norm(phi0)
    u = np.zeros((d, d), dtype=complex)
    u[:, 0] = phi0
    imx_mats = [
        hermitian_pauli_matrix(tab.imx_x[j], tab.imx_z[j], tab.imx_sign[j]) for j in range(n)
    ]
    for b in range(1, d):
        vec = phi0
        for s in range(n):
            if (b >> s) & 1:
                vec = imx_mats[s] @ vec
        u[:, b] = vec
    return u


def stab_state_to_dense(state: StabilizerMixedState) -> np.ndarray:
    """Dense density matrix 2**-n sum of signed group elements."""
    n = state.n_qubits
    if n > 8:
        raise ValueError("dense conversion limited to n <= 8")
    d = 1 << n
    rho = np.eye(d, dtype=complex)
    for r in range(state.k):
        g = hermitian_pauli_matrix(state.x[r], state.z[r], state.sign[r])
        rho = rho @ (np.eye(d) + g) / 2.0
    return rho / (1 << (n - state.k))


def random_support_state(state: StabilizerMixedState, rng) -> StabilizerMixedState:
    """A pure stabilizer state inside the support of a mixed tableau.

    Measures Z on every site of a copy; each still-mixed direction
    collapses with a fair coin, picking one member of a stabilizer
    completion of the group.
    """
    out = state.copy()
    for s in range(out.n_qubits):
        measure_z_stab(out, s, rng=rng)
    return out

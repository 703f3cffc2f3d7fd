"""Fast trajectory engine in the Pauli-coefficient representation.

A state evolving from the fully mixed input under two-qubit gates and Z
measurements is stored as the real table c_P = Tr(rho P) over all 4**n
Pauli strings (site s = base-4 digit s).  Two-qubit gates act as real
16x16 Pauli-transfer matrices on a pair of digits, measurements as a
2x2 mix of the (I, Z) components of one digit, and every quantity needed
for entanglement features and charge statistics reads off directly:

  p(outcome), purity, all-subset purities, <Q>, <Q^2>.

This trades the 2**n x 2**n complex density matrix for a 4**n real table
(half the memory) and one strided pass per gate instead of a two-sided
conjugation; it is the workhorse for ensemble sweeps at n = 10..12.
Supports fully-mixed inputs only: a pre-scrambler acts trivially there
and is skipped.
"""

from __future__ import annotations

import numpy as np

from .errors import ImpossibleRecord
from .pauli import PAULI_1Q, subset_purities_from_weights, support_weights
from .settings import TOLERANCES

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*a, **k):
        def deco(f):
            return f

        return deco


_CHUNK = 512  # inner-run tile; 16 x 512 doubles stays cache-resident
_GATE_KERNELS = {}


def _gate_kernel_for(sb: int):
    """Gate kernel specialized on the low-digit stride.

    Freezing `sb` (and the tile width) as closure constants lets LLVM
    unroll and vectorize the short inner runs that dominate nearest-
    neighbour bonds; kernels are compiled once per stride and cached.
    """
    try:
        return _GATE_KERNELS[sb]
    except KeyError:
        pass
    width = sb if sb < _CHUNK else _CHUNK

    @njit(cache=True, fastmath=True)
    def kernel(arr, r, sa):
        n4 = arr.size
        nh = n4 // (4 * sa)
        nm = sa // (4 * sb)
        buf = np.empty((16, width), np.float64)
        for h in range(nh):
            ha = h * 4 * sa
            for m in range(nm):
                base = ha + m * 4 * sb
                for l0 in range(0, sb, width):
                    for g in range(16):
                        off = base + (g >> 2) * sa + (g & 3) * sb + l0
                        for l in range(width):
                            buf[g, l] = arr[off + l]
                    for i in range(16):
                        off = base + (i >> 2) * sa + (i & 3) * sb + l0
                        c0 = r[i, 0]
                        c1 = r[i, 1]
                        c2 = r[i, 2]
                        c3 = r[i, 3]
                        c4 = r[i, 4]
                        c5 = r[i, 5]
                        c6 = r[i, 6]
                        c7 = r[i, 7]
                        c8 = r[i, 8]
                        c9 = r[i, 9]
                        c10 = r[i, 10]
                        c11 = r[i, 11]
                        c12 = r[i, 12]
                        c13 = r[i, 13]
                        c14 = r[i, 14]
                        c15 = r[i, 15]
                        for l in range(width):
                            arr[off + l] = (
                                c0 * buf[0, l]
                                + c1 * buf[1, l]
                                + c2 * buf[2, l]
                                + c3 * buf[3, l]
                                + c4 * buf[4, l]
                                + c5 * buf[5, l]
                                + c6 * buf[6, l]
                                + c7 * buf[7, l]
                                + c8 * buf[8, l]
                                + c9 * buf[9, l]
                                + c10 * buf[10, l]
                                + c11 * buf[11, l]
                                + c12 * buf[12, l]
                                + c13 * buf[13, l]
                                + c14 * buf[14, l]
                                + c15 * buf[15, l]
                            )

    _GATE_KERNELS[sb] = kernel
    return kernel


def _kernel_gate(arr, r, sa, sb):
    _gate_kernel_for(sb)(arr, r, sa)


@njit(cache=True, fastmath=True)
def _kernel_measure(arr, s4, sgn):
    """Project digit at stride s4 with Pi = (I + sgn*Z)/2, unnormalized."""
    n4 = arr.size
    for h in range(0, n4, 4 * s4):
        for l in range(h, h + s4):
            vi = arr[l]
            vz = arr[l + 3 * s4]
            ni = 0.5 * (vi + sgn * vz)
            arr[l] = ni
            arr[l + s4] = 0.0
            arr[l + 2 * s4] = 0.0
            arr[l + 3 * s4] = sgn * ni


_PAULI_LIST = [PAULI_1Q[l] for l in "IXYZ"]


def _pauli_stack(hi_first: bool) -> np.ndarray:
    out = np.empty((16, 4, 4), complex)
    for g in range(16):
        d_hi, d_lo = g >> 2, g & 3
        if hi_first:
            out[g] = np.kron(_PAULI_LIST[d_hi], _PAULI_LIST[d_lo])
        else:
            out[g] = np.kron(_PAULI_LIST[d_lo], _PAULI_LIST[d_hi])
    return out


_PSTACK = {True: _pauli_stack(True), False: _pauli_stack(False)}
# flattened Pauli stacks so that Tr(P_i M) = PFLAT[i] . M.ravel()
_PFLAT = {k: np.ascontiguousarray(v.transpose(0, 2, 1).reshape(16, 16))
          for k, v in _PSTACK.items()}


def transfer_matrix_2q(u: np.ndarray, hi_first: bool = True) -> np.ndarray:
    """Real 16x16 PTM of a 4x4 unitary in the two-site Pauli basis.

    R[i, j] = Tr(P_i U P_j U^dag) / 4 with index g = 4*d_hi + d_lo;
    `hi_first` says whether the unitary's more significant tensor factor
    is the hi digit.
    """
    ps = _PSTACK[bool(hi_first)]
    upu = np.matmul(np.matmul(u[None, :, :], ps), u.conj().T)
    r = _PFLAT[bool(hi_first)] @ upu.reshape(16, 16).T / 4.0
    if np.abs(r.imag).max() > 1e-9:
        raise ValueError("transfer matrix not real; non-unitary input?")
    return np.ascontiguousarray(r.real)


class PTMState:
    """Unnormalized Pauli-coefficient table of a trajectory state.

    `arr[0]` is Tr(rho_unnormalized); `log_norm` accumulates rescalings so
    that log Tr = log(arr[0]) + log_norm stays finite along deep forced
    trajectories.
    """

    def __init__(self, n: int):
        self.n_qubits = n
        self.arr = np.zeros(4**n, np.float64)
        self.arr[0] = 1.0
        self.log_norm = 0.0
        self._scratch = None

    def apply_gate_unitary(self, u: np.ndarray, sites) -> "PTMState":
        s1, s2 = sites
        hi, lo = max(s1, s2), min(s1, s2)
        r = transfer_matrix_2q(u, hi_first=(s1 == hi))
        return self.apply_transfer(r, (hi, lo))

    def apply_transfer(self, r: np.ndarray, sites) -> "PTMState":
        """Apply a precomputed PTM given for (hi, lo) digit order."""
        s1, s2 = sites
        hi, lo = max(s1, s2), min(s1, s2)
        if lo == 0 and hi == 1:
            # groups are 16 contiguous entries: one BLAS pass, swap buffers
            if self._scratch is None:
                self._scratch = np.empty_like(self.arr)
            np.dot(self.arr.reshape(-1, 16), r.T, out=self._scratch.reshape(-1, 16))
            self.arr, self._scratch = self._scratch, self.arr
        else:
            _kernel_gate(self.arr, r, 4**hi, 4**lo)
        return self

    def measure_z(self, site: int, rng=None, forced=None):
        """Measure Z on `site`; same contract as the dense engine."""
        if (rng is None) == (forced is None):
            raise ValueError("pass exactly one of rng (sample) or forced (replay)")
        tr = self.arr[0]
        cz = self.arr[3 * 4**site]
        p1 = 0.5 * (1.0 - cz / tr)
        p1 = min(max(p1, 0.0), 1.0)
        if forced is None:
            outcome = 1 if rng.random() < p1 else 0
        else:
            outcome = int(forced)
        prob = p1 if outcome == 1 else 1.0 - p1
        if prob < TOLERANCES.zero_prob:
            raise ImpossibleRecord(
                f"forced outcome {outcome} on site {site} has probability {prob:.3e}"
            )
        _kernel_measure(self.arr, 4**site, -1.0 if outcome else 1.0)
        if self.arr[0] < 1e-100:  # keep the table away from underflow
            self.log_norm += np.log(self.arr[0])
            self.arr /= self.arr[0]
        return outcome, prob

    # -- readouts -------------------------------------------------------

    def purity(self) -> float:
        c = self.arr / self.arr[0]
        return float(np.dot(c, c) / (1 << self.n_qubits))

    def subset_purities(self) -> np.ndarray:
        """Tr(rho_A^2) for every subset mask, length 2**n."""
        c = self.arr / self.arr[0]
        w = support_weights(c * c, self.n_qubits)
        return subset_purities_from_weights(w, self.n_qubits)

    def support_weight_table(self) -> np.ndarray:
        """W[mask] = sum over Paulis with that support of Tr(rho P)^2."""
        c = self.arr / self.arr[0]
        return support_weights(c * c, self.n_qubits)

    def z_expectation(self, site: int) -> float:
        return float(self.arr[3 * 4**site] / self.arr[0])

    def zz_expectation(self, site_a: int, site_b: int) -> float:
        return float(self.arr[3 * 4**site_a + 3 * 4**site_b] / self.arr[0])

    def charge_moments(self):
        """(<Q>, <Q^2>) for Q = (1/2) sum_s Z_s."""
        n = self.n_qubits
        tr = self.arr[0]
        zs = np.array([self.arr[3 * 4**s] for s in range(n)]) / tr
        q1 = 0.5 * zs.sum()
        zz = 0.0
        for a in range(n):
            for b in range(a + 1, n):
                zz += self.arr[3 * 4**a + 3 * 4**b] / tr
        q2 = 0.25 * (n + 2.0 * zz)
        return float(q1), float(q2)

    def to_dense_matrix(self) -> np.ndarray:
        from .pauli import matrix_from_pauli_coefficients

        return matrix_from_pauli_coefficients(self.arr / self.arr[0], self.n_qubits)

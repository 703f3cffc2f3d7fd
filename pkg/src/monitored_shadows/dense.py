"""Exact density-matrix simulation of small qubit systems.

States carry an explicit `log_weight` so that trajectories replayed with
forced measurement outcomes accumulate Born weights in the log domain
(record probabilities decay like 2**-(#measurements) and would underflow
as raw products).  The matrix itself is kept trace-normalized after every
measurement; the pair (matrix, log_weight) represents weight * matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ImpossibleRecord, ResourceGuard
from .pauli import PauliString, pauli_expectation
from .settings import TOLERANCES


@dataclass
class TwoQubitGate:
    """A 4x4 unitary acting on an ordered pair of sites.

    Basis order of the 4x4 block: |b_a b_b> with site `a` the more
    significant bit, i.e. index = 2*b_a + b_b for sites=(a, b).
    """

    matrix: np.ndarray
    sites: tuple

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (4, 4):
            raise ValueError("two-qubit gate must be 4x4")
        err = np.abs(self.matrix.conj().T @ self.matrix - np.eye(4)).max()
        if err > TOLERANCES.identity_atol:
            raise ValueError(f"gate is not unitary (deviation {err:.2e})")
        a, b = self.sites
        if a == b:
            raise ValueError("gate sites must be distinct")


@dataclass
class DenseState:
    """Density matrix of `n_qubits` qubits with accumulated log weight."""

    n_qubits: int
    matrix: np.ndarray
    log_weight: float = 0.0
    check: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.n_qubits > TOLERANCES.max_dense_qubits and not _ALLOW_LARGE[0]:
            raise ResourceGuard(
                f"dense engine refuses N={self.n_qubits} > "
                f"{TOLERANCES.max_dense_qubits} qubits (override with "
                "allow_large_dense())"
            )
        self.matrix = np.ascontiguousarray(self.matrix, dtype=complex)
        d = 1 << self.n_qubits
        if self.matrix.shape != (d, d):
            raise ValueError("matrix dimension does not match qubit count")
        if self.check:
            self.validate()

    # -- constructors --------------------------------------------------

    @classmethod
    def fully_mixed(cls, n: int) -> "DenseState":
        d = 1 << n
        return cls(n, np.eye(d, dtype=complex) / d)

    @classmethod
    def computational(cls, n: int, bits: int = 0) -> "DenseState":
        d = 1 << n
        m = np.zeros((d, d), dtype=complex)
        m[bits, bits] = 1.0
        return cls(n, m)

    @classmethod
    def from_vector(cls, psi: np.ndarray) -> "DenseState":
        psi = np.asarray(psi, dtype=complex)
        n = psi.size.bit_length() - 1
        psi = psi / np.linalg.norm(psi)
        return cls(n, np.outer(psi, psi.conj()))

    # -- diagnostics ----------------------------------------------------

    def validate(self):
        herm = np.abs(self.matrix - self.matrix.conj().T).max()
        if herm > TOLERANCES.identity_atol:
            raise ValueError(f"state not Hermitian (deviation {herm:.2e})")
        evals = np.linalg.eigvalsh(self.matrix)
        if evals.min() < TOLERANCES.eigenvalue_floor:
            raise ValueError(f"negative eigenvalue {evals.min():.2e}")

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def copy(self) -> "DenseState":
        return DenseState(self.n_qubits, self.matrix.copy(), self.log_weight)


_ALLOW_LARGE = [False]


def allow_large_dense(flag: bool = True):
    """Override the dense-engine qubit guard (memory grows as 4**N)."""
    _ALLOW_LARGE[0] = flag


# -- unitaries ---------------------------------------------------------------


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed d x d unitary.

    Ginibre matrix + QR, with the R diagonal phases divided out to remove
    the bias of plain QR.
    """
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r)
    return q * (ph / np.abs(ph))


def haar_2q_gate(rng: np.random.Generator, sites=(0, 1)) -> TwoQubitGate:
    """Haar-random two-qubit gate."""
    return TwoQubitGate(haar_unitary(4, rng), tuple(sites))


def _apply_unitary_rows(tensor, u, axes, n_axes_total):
    """Contract a (2**k x 2**k) unitary into the given axes of a tensor."""
    k = len(axes)
    ut = np.asarray(u, dtype=complex).reshape((2,) * (2 * k))
    t = np.tensordot(ut, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(t, list(range(k)), list(axes))


def apply_unitary(state: DenseState, u: np.ndarray, sites) -> DenseState:
    """In-place conjugation of the state by a unitary on `sites`.

    `sites` orders the unitary's tensor factors most-significant first,
    matching `TwoQubitGate`.
    """
    n = state.n_qubits
    sites = list(sites)
    if any(s < 0 or s >= n for s in sites) or len(set(sites)) != len(sites):
        raise ValueError(f"gate sites {sites} invalid for N={n}")
    # axis of site s in the reshaped tensor is n-1-s (rows), 2n-1-s (cols)
    row_axes = [n - 1 - s for s in sites]
    t = state.matrix.reshape((2,) * (2 * n))
    t = _apply_unitary_rows(t, u, row_axes, 2 * n)
    col_axes = [2 * n - 1 - s for s in sites]
    t = _apply_unitary_rows(t, np.conj(u), col_axes, 2 * n)
    d = 1 << n
    state.matrix = np.ascontiguousarray(t).reshape(d, d)
    return state


def apply_gate(state: DenseState, gate: TwoQubitGate) -> DenseState:
    """Apply a two-qubit gate: rho <- (U (x) I) rho (U (x) I)^dagger."""
    return apply_unitary(state, gate.matrix, gate.sites)


# -- measurement -------------------------------------------------------------


def born_probability_z(state: DenseState, site: int, outcome: int) -> float:
    """Tr(Pi rho) / Tr(rho) for the Z-projector on `site`."""
    n = state.n_qubits
    diag = np.real(np.diag(state.matrix))
    idx = np.arange(1 << n)
    keep = ((idx >> site) & 1) == outcome
    tr = diag.sum()
    return float(diag[keep].sum() / tr)


def measure_z(state: DenseState, site: int, rng=None, forced=None):
    """Projective Z measurement on `site`, in place.

    Sample mode (rng given): outcome drawn with Born probability, state
    renormalized.  Forced mode (forced in {0,1}): the given outcome is
    imposed and its log Born probability is added to `state.log_weight`,
    so a full forced replay accumulates log p(record).

    Returns (state, outcome, prob).
    """
    if (rng is None) == (forced is None):
        raise ValueError("pass exactly one of rng (sample) or forced (replay)")
    n = state.n_qubits
    p1 = born_probability_z(state, site, 1)
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
    idx = np.arange(1 << n)
    kill = ((idx >> site) & 1) != outcome
    state.matrix[kill, :] = 0.0
    state.matrix[:, kill] = 0.0
    state.matrix /= np.trace(state.matrix).real
    if forced is not None:
        state.log_weight += float(np.log(prob))
    return state, outcome, prob


# -- spectra and purities ----------------------------------------------------


def spectrum(state: DenseState) -> np.ndarray:
    """Eigenvalues in descending order, clipped to [0, 1].

    Values below the configured eigenvalue floor indicate an upstream bug
    and raise instead of being clipped.
    """
    herm = np.abs(state.matrix - state.matrix.conj().T).max()
    if herm > TOLERANCES.identity_atol:
        raise ValueError(f"state not Hermitian (deviation {herm:.2e})")
    evals = np.linalg.eigvalsh(state.matrix)[::-1]
    if evals.min() < TOLERANCES.eigenvalue_floor:
        raise ValueError(f"eigenvalue {evals.min():.2e} below floor")
    evals = np.clip(evals, 0.0, 1.0)
    total = evals.sum()
    if abs(total - 1.0) > TOLERANCES.sum_atol:
        raise ValueError(f"spectrum sums to {total}, expected 1")
    return evals


def partial_trace(state: DenseState, keep_mask: int) -> np.ndarray:
    """Reduced density matrix on the sites set in `keep_mask`."""
    n = state.n_qubits
    keep = [s for s in range(n) if (keep_mask >> s) & 1]
    drop = [s for s in range(n) if not (keep_mask >> s) & 1]
    t = state.matrix.reshape((2,) * (2 * n))
    for s in sorted(drop, reverse=True):
        # with n_cur sites left, site s lives on axes (n_cur-1-s, 2*n_cur-1-s);
        # dropping sites top-down keeps lower sites' axes computable
        t = np.trace(t, axis1=n - 1 - s, axis2=2 * n - 1 - s)
        n -= 1
    k = len(keep)
    return np.ascontiguousarray(t).reshape(1 << k, 1 << k)


def subsystem_purity(state: DenseState, subset_mask: int) -> float:
    """Tr(rho_A^2) for the subsystem set in `subset_mask` (1.0 for A = {})."""
    if subset_mask == 0:
        return 1.0
    rho_a = partial_trace(state, subset_mask)
    return float(np.real(np.vdot(rho_a, rho_a)))


def purity(state: DenseState) -> float:
    """Tr(rho^2) of the full state."""
    return float(np.real(np.vdot(state.matrix, state.matrix)))


def pauli_expect(state: DenseState, p: PauliString) -> float:
    """Tr(rho P); the imaginary part must vanish within tolerance."""
    if p.n_qubits != state.n_qubits:
        raise ValueError("Pauli length does not match state")
    val = pauli_expectation(state.matrix, p)
    if abs(val.imag) > 1e-8:
        raise ValueError(f"Tr(rho P) has imaginary part {val.imag:.2e}")
    return float(val.real)

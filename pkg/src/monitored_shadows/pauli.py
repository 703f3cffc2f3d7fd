"""Pauli strings and conversions between matrix and Pauli-coefficient form.

Site convention: site `s` corresponds to bit `s` of a computational basis
index (site 0 is the least significant bit).  Letters are coded
0=I, 1=X, 2=Y, 3=Z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .subsets import popcounts, zeta_subsets

_LETTERS = "IXYZ"

PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    """A tensor product of single-site Paulis on `n_qubits` sites."""

    n_qubits: int
    letters: tuple  # per-site codes in {0,1,2,3}, site 0 first

    def __post_init__(self):
        if len(self.letters) != self.n_qubits:
            raise ValueError("letter count does not match qubit count")
        if any(c not in (0, 1, 2, 3) for c in self.letters):
            raise ValueError("letters must be coded 0..3 (I,X,Y,Z)")

    @classmethod
    def from_str(cls, s: str) -> "PauliString":
        """Build from a string like 'XIZ' (site 0 first)."""
        return cls(len(s), tuple(_LETTERS.index(c) for c in s.upper()))

    @classmethod
    def from_support(cls, n: int, mask: int, letter: str = "Z") -> "PauliString":
        code = _LETTERS.index(letter)
        return cls(n, tuple(code if (mask >> s) & 1 else 0 for s in range(n)))

    def __str__(self) -> str:
        return "".join(_LETTERS[c] for c in self.letters)

    @property
    def weight(self) -> int:
        return sum(1 for c in self.letters if c != 0)

    @property
    def support_mask(self) -> int:
        return sum(1 << s for s, c in enumerate(self.letters) if c != 0)

    def to_matrix(self) -> np.ndarray:
        """Dense 2**n x 2**n matrix (site 0 = least significant bit)."""
        out = np.ones((1, 1), dtype=complex)
        # np.kron puts its first factor on the most significant bits, so
        # fold sites from the top down to keep site 0 least significant
        for c in reversed(self.letters):
            out = np.kron(out, PAULI_1Q[_LETTERS[c]])
        return out

    def index(self) -> int:
        """Flat index into a base-4 coefficient table (digit s = site s)."""
        return sum(c << (2 * s) for s, c in enumerate(self.letters))


def pauli_expectation(matrix: np.ndarray, pauli: PauliString) -> complex:
    """Tr(M P) without building P, via the permutation-with-phases action.

    P|j> = phase(j) |j ^ xmask>, so Tr(M P) = sum_j phase(j) M[j, j^xmask].
    """
    n = pauli.n_qubits
    if matrix.shape != (1 << n, 1 << n):
        raise ValueError("matrix dimension does not match Pauli length")
    xmask = 0
    zymask = 0
    n_y = 0
    for s, c in enumerate(pauli.letters):
        if c in (1, 2):
            xmask |= 1 << s
        if c in (2, 3):
            zymask |= 1 << s
        if c == 2:
            n_y += 1
    j = np.arange(1 << n)
    signs = 1 - 2 * (_popcount_array(j & zymask) & 1)
    vals = matrix[j, j ^ xmask]
    return (1j**n_y) * np.sum(signs * vals)


def _popcount_array(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    b = a.copy()
    while b.any():
        out += b & 1
        b >>= 1
    return out


# --- dense matrix <-> Pauli coefficient table -------------------------------

# T[a, r, c] = (sigma_a)_{c r}: contracting with the (row, col) axis pair of a
# density tensor yields Tr(M sigma_a) one site at a time.
_T_FWD = np.stack([PAULI_1Q[l].T for l in _LETTERS])
# inverse direction: M = prod over sites of (1/2) sum_a c_a sigma_a
_T_INV = np.stack([PAULI_1Q[l] / 2.0 for l in _LETTERS])


def pauli_coefficients(matrix: np.ndarray, n: int) -> np.ndarray:
    """All 4**n coefficients c_P = Tr(M P), as a flat base-4 table.

    Index digit s (base 4) is the letter on site s.  Cost O(n 4**n).
    """
    d = 1 << n
    if matrix.shape != (d, d):
        raise ValueError("matrix shape mismatch")
    # reshape axes: rows for sites n-1..0, then cols for sites n-1..0
    t = matrix.reshape((2,) * (2 * n))
    for done in range(n):
        # first remaining row axis sits right after the processed Pauli
        # axes; first remaining col axis is always axis n
        t = np.tensordot(_T_FWD, t, axes=([1, 2], [done, n]))
        t = np.moveaxis(t, 0, done)
    # axes are Pauli letters for sites n-1..0; row-major flatten puts the
    # site-0 letter in the least significant base-4 digit
    return np.ascontiguousarray(t).reshape(-1)


def matrix_from_pauli_coefficients(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Inverse of `pauli_coefficients`: M = (1/2**n) sum_P c_P P."""
    if coeffs.size != 4**n:
        raise ValueError("coefficient table length mismatch")
    t = np.asarray(coeffs, dtype=complex).reshape((4,) * n)  # site n-1 first
    for _ in range(n):
        # consume the leading Pauli axis; tensordot appends (row, col)
        t = np.tensordot(t, _T_INV, axes=([0], [0]))
    # axes are now interleaved (r_{n-1}, c_{n-1}, ..., r_0, c_0)
    perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    t = np.transpose(t, perm)
    return np.ascontiguousarray(t).reshape(1 << n, 1 << n)


def support_weights(squared_coeffs: np.ndarray, n: int) -> np.ndarray:
    """Collapse a base-4 table of c_P**2 onto support masks.

    Returns W with W[mask] = sum over Paulis P with supp(P) == mask of the
    input entries; input should be the squared (real) coefficients.
    """
    t = np.asarray(squared_coeffs, dtype=np.float64).reshape((4,) * n)
    for ax in range(n):
        ident = np.take(t, 0, axis=ax)
        rest = np.take(t, (1, 2, 3), axis=ax).sum(axis=ax)
        t = np.stack((ident, rest), axis=ax)
    return np.ascontiguousarray(t).reshape(-1)


def subset_purities_from_weights(weights: np.ndarray, n: int) -> np.ndarray:
    """All-subset purities of a normalized state from its support weights.

    Tr(rho_A^2) = 2**-|A| * sum_{B subseteq A} W_B with
    W_B = sum_{supp(P)=B} Tr(rho P)**2.
    """
    acc = zeta_subsets(weights)
    return acc * np.ldexp(1.0, -popcounts(n))

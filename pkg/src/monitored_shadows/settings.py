"""Library-wide numerical tolerances and resource guards.

A single mutable instance `TOLERANCES` is shared by all modules; tests or
callers that need different thresholds mutate it (or swap in their own
`Tolerances`) rather than passing tolerances through every call.
"""

from dataclasses import dataclass


@dataclass
class Tolerances:
    # exact identities (hermiticity, unitarity, round trips)
    identity_atol: float = 1e-10
    # accumulated sums (trace of long products, POVM completeness)
    sum_atol: float = 1e-8
    # forced measurement outcomes with Born probability below this are
    # treated as impossible records rather than numerical noise
    zero_prob: float = 1e-12
    # channel eigenvalues below this mark the mode unlearnable
    lambda_cutoff: float = 1e-12
    # eigenvalues of density matrices may dip this far below zero before
    # we suspect an upstream bug instead of roundoff
    eigenvalue_floor: float = -1e-10
    # dense engine refuses more qubits than this unless overridden
    max_dense_qubits: int = 13


TOLERANCES = Tolerances()

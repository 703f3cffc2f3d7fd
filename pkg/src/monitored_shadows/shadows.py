"""Shadow channels and estimators built on the trajectory ensemble.

The record of one monitored run acts as a generalized measurement of the
input state; replaying it on the fully mixed state yields a snapshot that,
averaged with the right weights, is a known linear function (the shadow
channel) of the input.  Inverting that channel turns snapshots into
unbiased estimators.  Three snapshot prescriptions are supported:

  petz          eta_m = sigma_m                  (classical Petz recovery)
  least_squares eta_m = E_m = D pi_m sigma_m     (two-norm optimal)
  max_fidelity  eta_m = leading eigenvector of sigma_m

Without pre-scrambling, gate-ensemble averaging makes Pauli operators
eigenmodes of the channel; the eigenvalue of a Pauli depends only on its
support and follows from the entanglement feature by a subset-lattice
Moebius inversion.  With a global 2-design pre-scrambler the channel is
depolarizing-like and depends on a single purity-like scalar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import circuits as ct
from . import dense as dn
from . import stabilizer as sb
from .ensemble import EnsembleMoments, EntanglementFeature
from .errors import NonInvertible, Unlearnable
from .pauli import PauliString
from .settings import TOLERANCES
from .subsets import popcounts, zeta_subsets


@dataclass
class ShadowEigenvalues:
    """Channel eigenvalue per Pauli-support mask (Pauli-invariant ensembles)."""

    n_qubits: int
    values: np.ndarray  # (2**n,), entry A = lambda for Paulis supported on A
    q: int = 2

    def lam(self, pauli: PauliString) -> float:
        return float(self.values[pauli.support_mask])


def lambdas_from_feature(feature: EntanglementFeature) -> ShadowEigenvalues:
    """Moebius-invert the entanglement feature into channel eigenvalues.

    lambda_A = (1-q^2)^-|A| sum_{B subseteq A} P_B (-q)^|B|, evaluated
    with a fast subset transform in O(2^n n).
    """
    n = feature.n_qubits
    q = feature.q
    k = popcounts(n)
    signed = feature.purity * (-float(q)) ** k
    acc = zeta_subsets(signed)
    lam = acc * (1.0 - q * q) ** (-k.astype(float))
    lam[0] = 1.0
    return ShadowEigenvalues(n, lam, q)


def feature_from_lambdas(lambdas: ShadowEigenvalues) -> EntanglementFeature:
    """Inverse map: D_A P_A = sum_{B subseteq A} (q^2-1)^|B| lambda_B."""
    n = lambdas.n_qubits
    q = lambdas.q
    k = popcounts(n)
    acc = zeta_subsets(lambdas.values * (float(q * q - 1)) ** k)
    purity = acc / q**k.astype(float)
    return EntanglementFeature(n, purity, np.zeros_like(purity), 0, q)


def shadow_norm_means(lambdas: ShadowEigenvalues, subset_mask: int | None = None):
    """(harmonic, arithmetic, geometric) means of the squared shadow norm
    ||P||^2 = 1/lambda_P over all Paulis supported in `subset_mask`.

    Modes with lambda below the configured cutoff are unlearnable: they
    are excluded from the arithmetic and geometric means and counted in
    the returned report.  Raises `Unlearnable` when no mode survives.
    """
    n = lambdas.n_qubits
    q = lambdas.q
    if subset_mask is None:
        subset_mask = (1 << n) - 1
    k = popcounts(n)
    inside = (np.arange(1 << n) & ~subset_mask) == 0
    mult = np.where(inside, (float(q * q - 1)) ** k, 0.0)  # Paulis per mask
    d_a = float(q) ** int(k[subset_mask])
    lam = lambdas.values
    ok = inside & (lam > TOLERANCES.lambda_cutoff)
    n_excluded = int(np.sum(mult[inside & ~ok]))
    learnable = ok.copy()
    learnable[0] = False
    if subset_mask != 0 and not learnable.any():
        raise Unlearnable("every non-identity mode has vanishing eigenvalue")
    # the harmonic mean keeps vanishing modes (their norms are infinite but
    # enter inverted); it is an exact function of the subsystem purity
    harmonic = d_a**2 / float(np.sum(mult * np.where(inside, lam, 0.0)))
    arithmetic = float(np.sum(mult[ok] / lam[ok])) / d_a**2
    geometric = float(np.exp(np.sum(mult[ok] * np.log(1.0 / lam[ok])) / d_a**2))
    return {
        "harmonic": harmonic,
        "arithmetic": arithmetic,
        "geometric": geometric,
        "n_unlearnable": n_excluded,
        "subset_mask": subset_mask,
    }


# -- pre-scrambled channel -------------------------------------------------------


@dataclass
class PrescrambledChannel:
    """Depolarizing-like shadow channel after global 2-design scrambling.

    M(X) = [(D - P) Tr(X) I + (D P - 1) X] / (D^2 - 1), where P is the
    relevant purity-like scalar of the ensemble: E[Tr sigma^2] for the
    petz prescription, the squared-weight purity for least squares (with
    an overall scale), E[2^-S_inf] for max fidelity.  `scale` multiplies
    the whole map (least squares is not trace preserving).
    """

    dim: int
    purity: float
    scale: float = 1.0
    purity_stderr: float = 0.0

    @property
    def lam(self) -> float:
        """Eigenvalue of traceless operators (before `scale`)."""
        return (self.dim * self.purity - 1.0) / (self.dim**2 - 1.0)

    def require_invertible(self):
        if self.purity <= 1.0 / self.dim + TOLERANCES.lambda_cutoff:
            raise NonInvertible(
                f"purity {self.purity:.3e} at or below 1/D: record carries no information"
            )

    def apply(self, x: np.ndarray) -> np.ndarray:
        d = self.dim
        tr = np.trace(x)
        return self.scale * ((d - self.purity) * tr * np.eye(d) + (d * self.purity - 1.0) * x) / (d * d - 1.0)

    def invert(self, x: np.ndarray) -> np.ndarray:
        """Exact inverse: M^-1(X) = [X/lam - Tr(X) (1/lam - 1) I/D] / scale."""
        self.require_invertible()
        d = self.dim
        tr = np.trace(x)
        inv_lam = 1.0 / self.lam
        return (inv_lam * x - tr * (inv_lam - 1.0) / d * np.eye(d)) / self.scale

    @classmethod
    def from_moments(cls, dim: int, moms: EnsembleMoments, prescription: str = "petz"):
        if prescription == "petz":
            return cls(dim, moms.purity, 1.0, moms.purity_stderr)
        if prescription == "max_fidelity":
            return cls(dim, moms.einf, 1.0, moms.einf_stderr)
        if prescription == "least_squares":
            raise ValueError(
                "least-squares calibration needs the squared-weight normalization; "
                "use calibrate_least_squares(dim, p_tilde, n2)"
            )
        raise ValueError(f"unknown prescription {prescription!r}")


def calibrate_least_squares(dim: int, p_tilde: float, n2: float) -> PrescrambledChannel:
    """Least-squares shadow channel under pre-scrambling.

    M_ls(X) = D n2 [(D - Pt) Tr(X) I + (D Pt - 1) X] / (D^2 - 1), with
    Pt the squared-weight purity and n2 = E_pi[pi_m] the weight
    normalization (both from `ensemble.moments` or exact enumeration).
    """
    return PrescrambledChannel(dim, p_tilde, scale=dim * n2)


# -- snapshots --------------------------------------------------------------------

PRESCRIPTIONS = ("petz", "least_squares", "max_fidelity")


@dataclass
class Snapshot:
    """One trajectory's contribution to shadow estimation.

    payload: sigma_m (petz), or sigma_m plus log pi_m representing
    E_m = D pi_m sigma_m (least_squares), or a pure support state
    (max_fidelity).  The pre-scrambler conjugation V^dag (.) V is already
    applied to the payload state.
    """

    prescription: str
    state: object  # DenseState | StabilizerMixedState
    log_pi: float = 0.0

    def pauli_overlap(self, p: PauliString) -> float:
        """Tr(payload P)."""
        val = _state_pauli_expect(self.state, p)
        if self.prescription == "least_squares":
            d = 1 << _state_qubits(self.state)
            val *= d * np.exp(self.log_pi)
        return val

    def matrix_overlap(self, op: np.ndarray) -> float:
        """Tr(payload Op) for a dense Hermitian operator."""
        state = self.state
        if isinstance(state, sb.StabilizerMixedState):
            rho = sb.stab_state_to_dense(state)
        else:
            rho = state.matrix
        val = float(np.real(np.trace(rho @ op)))
        if self.prescription == "least_squares":
            val *= rho.shape[0] * np.exp(self.log_pi)
        return val

    def trace(self) -> float:
        if self.prescription == "least_squares":
            d = 1 << _state_qubits(self.state)
            return d * float(np.exp(self.log_pi))
        return 1.0


def _state_qubits(state) -> int:
    return state.n_qubits


def _state_pauli_expect(state, p: PauliString) -> float:
    if isinstance(state, sb.StabilizerMixedState):
        return sb.stab_pauli_expect(state, p)
    return dn.pauli_expect(state, p)


def make_snapshot(prescription: str, realization: ct.CircuitRealization,
                  record: ct.TrajectoryRecord, rng=None, engine="auto") -> Snapshot:
    """Build the prescription's snapshot for one record.

    Replays the record on the fully mixed input, applies the inverse
    pre-scrambler conjugation, and post-processes per prescription.  The
    max-fidelity prescription needs `rng` when the leading eigenvector is
    degenerate (stabilizer states): a uniformly random support state from
    a stabilizer completion is used.
    """
    if prescription not in PRESCRIPTIONS:
        raise ValueError(f"prescription must be one of {PRESCRIPTIONS}")
    state, log_pi = ct.eavesdropper_snapshot(realization, record, engine=engine)
    pre = realization.prescrambler
    if pre is not None:
        state = _conjugate_by_inverse(state, pre)
    if prescription == "max_fidelity":
        state = _leading_eigen_state(state, rng)
    return Snapshot(prescription, state, log_pi)


def _conjugate_by_inverse(state, prescrambler):
    """sigma -> V^dag sigma V for the realization's pre-scrambler V."""
    if isinstance(state, sb.StabilizerMixedState):
        if not isinstance(prescrambler, sb.CliffordTableau):
            raise ValueError("stabilizer snapshot with non-Clifford pre-scrambler")
        return sb.apply_tableau(state, prescrambler.inverse())
    if isinstance(prescrambler, sb.CliffordTableau):
        u = sb.tableau_to_unitary(prescrambler)
    else:
        u = prescrambler
    state.matrix = u.conj().T @ state.matrix @ u
    return state


def _leading_eigen_state(state, rng):
    if isinstance(state, sb.StabilizerMixedState):
        if state.k < state.n_qubits and rng is None:
            raise ValueError("degenerate leading eigenvector: pass rng to break ties")
        return sb.random_support_state(state, rng) if state.k < state.n_qubits else state
    evals, vecs = np.linalg.eigh(state.matrix)
    psi = vecs[:, -1]
    return dn.DenseState(state.n_qubits, np.outer(psi, psi.conj()))


# -- estimators -------------------------------------------------------------------


def _channel_lambda(channel, p: PauliString) -> float:
    """Eigenvalue (including scale) of the channel on Pauli P."""
    if isinstance(channel, PrescrambledChannel):
        channel.require_invertible()
        return channel.lam * channel.scale
    if isinstance(channel, ShadowEigenvalues):
        lam = channel.lam(p)
        if lam <= TOLERANCES.lambda_cutoff:
            raise Unlearnable(
                f"mode {p} has eigenvalue {lam:.2e} below cutoff; not learnable"
            )
        return lam
    raise TypeError("channel must be PrescrambledChannel or ShadowEigenvalues")


def pauli_estimates(snapshots, p: PauliString, channel) -> np.ndarray:
    """Per-shot unbiased estimates of Tr(rho P)."""
    if p.weight == 0:
        return np.array([_identity_estimate(s, channel) for s in snapshots])
    lam = _channel_lambda(channel, p)
    return np.array([s.pauli_overlap(p) / lam for s in snapshots])


def _identity_estimate(s: Snapshot, channel) -> float:
    # trace sector: M(I) = scale * I, so the estimate is Tr(payload)/scale;
    # trace-preserving prescriptions have scale 1 and give exactly 1
    if isinstance(channel, PrescrambledChannel):
        return s.trace() / channel.scale
    return s.trace() / float(channel.values[0])


def estimate_pauli(snapshots, p: PauliString, channel):
    """(estimate, stderr) for Tr(rho P) from a list of snapshots."""
    vals = pauli_estimates(snapshots, p, channel)
    n = vals.size
    err = float(np.std(vals, ddof=1) / np.sqrt(n)) if n > 1 else np.inf
    return float(vals.mean()), err


def estimator_variance(snapshots, observable: PauliString, channel):
    """Empirical per-shot estimator variance with a 95% confidence interval.

    The variance of the shadow estimator is the hybrid order parameter:
    it is measurable from few shots and scales like the squared shadow
    norm.  Requires at least 30 shots.
    """
    vals = pauli_estimates(snapshots, observable, channel)
    n = vals.size
    if n < 30:
        raise ValueError(f"need >= 30 shots for a variance estimate, got {n}")
    var = float(np.var(vals, ddof=1))
    centered = vals - vals.mean()
    m4 = float(np.mean(centered**4))
    se_var = np.sqrt(max(m4 - var**2, 0.0) / n)
    return var, (var - 1.96 * se_var, var + 1.96 * se_var)


def shadow_norm_mc(spec: ct.MonitoredCircuitSpec, observable: PauliString, rho,
                   n_shots: int, channel, prescription: str = "petz",
                   master_seed: int = 0, engine="auto"):
    """Monte Carlo squared shadow norm: E_m~p(m|rho) [Tr(M^-1(eta_m) O)^2].

    Runs fresh realizations on the true input `rho`, builds the
    prescription's snapshot for each sampled record, and averages the
    squared estimator.  Returns (estimate, stderr).
    """
    from .seeding import REALM_REALIZATION, REALM_SHOT, REALM_TRAJECTORY, rng_at

    sq = []
    for i in range(n_shots):
        real = ct.realize(spec, rng_at(master_seed, REALM_REALIZATION, i))
        _, record = ct.run_trajectory(real, rho, engine=engine,
                                      rng=rng_at(master_seed, REALM_TRAJECTORY, i))
        snap = make_snapshot(prescription, real, record,
                             rng=rng_at(master_seed, REALM_SHOT, i), engine=engine)
        if observable.weight == 0:
            val = _identity_estimate(snap, channel)
        else:
            val = snap.pauli_overlap(observable) / _channel_lambda(channel, observable)
        sq.append(val * val)
    sq = np.asarray(sq)
    return float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(len(sq)))

"""Cross-entropy diagnostics and fidelity learning.

The linear cross-entropy compares experimental records against the
record distribution of a classically simulated guess state; its Bayesian
variant averages the posterior weight of the guess given each record and
equals D Tr(rho_0 M(rho)) in the many-shot limit.  Third-moment
(three-replica) contractions under a global 2-design reduce to Weingarten
sums over S_3; they give the shot-to-shot fluctuations of the Bayesian
diagnostic and the analytic shadow norm of pure-state fidelity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import circuits as ct
from . import dense as dn
from . import stabilizer as sb
from .errors import DegenerateWeingarten, LowESS, NonInvertible
from .seeding import REALM_REALIZATION, REALM_SHOT, REALM_TRAJECTORY, rng_at
from .shadows import PrescrambledChannel


def _g(d: float) -> float:
    return d * (d * d - 1.0) * (d * d - 4.0)


def weingarten3(dim: int):
    """Third-moment Weingarten functions (Wg(e), Wg(transposition), Wg(3-cycle)).

    g(D) = D (D^2-1)(D^2-4) is singular below D = 3.
    """
    if dim <= 2:
        raise DegenerateWeingarten("third-moment Weingarten functions need D >= 3")
    g = _g(dim)
    return (dim * dim - 2.0) / g, -dim / g, 2.0 / g


def third_moment_coeffs(purity: float, p3: float, dim: int):
    """Permutation expansion of the twirled third moment operator.

    E_V[V^x3 sigma^(3) V^dag^x3] = c_e e + c_tau (3 transpositions)
    + c_chi (2 cycles); the coefficients follow from contracting with
    (identity, swap, cycle) = (1, P, P3) and inverting the Gram matrix of
    S_3, which is the Weingarten calculation.
    """
    if dim <= 2:
        raise DegenerateWeingarten("third-moment coefficients need D >= 3")
    if not (1.0 / dim**2 - 1e-9 <= p3 <= purity + 1e-9 <= 1.0 + 2e-9):
        raise ValueError(f"need 1/D^2 <= P3 <= P <= 1, got P={purity}, P3={p3}")
    g = _g(dim)
    m = np.array(
        [
            [dim * dim - 2.0, -3.0 * dim, 4.0],
            [-dim, dim * dim + 2.0, -2.0 * dim],
            [2.0, -3.0 * dim, dim * dim],
        ]
    )
    c = m @ np.array([1.0, purity, p3]) / g
    return float(c[0]), float(c[1]), float(c[2])


@dataclass
class WeingartenTriple:
    """Validated permutation-expansion coefficients of a third moment."""

    dim: int
    c_e: float
    c_tau: float
    c_chi: float
    purity: float
    p3: float

    @classmethod
    def from_moments(cls, purity: float, p3: float, dim: int) -> "WeingartenTriple":
        c_e, c_tau, c_chi = third_moment_coeffs(purity, p3, dim)
        trip = cls(dim, c_e, c_tau, c_chi, purity, p3)
        trip.validate()
        return trip

    def contract(self, perm: str) -> float:
        """Tr(sigma^(3) perm^dag) for perm in {e, tau, chi}.

        Tr(nu mu) = D**cycles(nu mu); the cycle counts below are the S_3
        multiplication table aggregated by class.
        """
        d = self.dim
        if perm == "e":
            return self.c_e * d**3 + 3 * self.c_tau * d**2 + 2 * self.c_chi * d
        if perm == "tau":
            return self.c_e * d**2 + self.c_tau * (d**3 + 2 * d) + 2 * self.c_chi * d**2
        if perm == "chi":
            return self.c_e * d + self.c_tau * 3 * d**2 + self.c_chi * (d**3 + d)
        raise ValueError(perm)

    def validate(self, atol: float = 1e-9):
        for perm, want in (("e", 1.0), ("tau", self.purity), ("chi", self.p3)):
            got = self.contract(perm)
            if abs(got - want) > atol * max(1.0, abs(want)):
                raise ValueError(f"moment re-contraction {perm}: {got} != {want}")


def gamma(purity: float, p3: float, fidelity: float, dim: int, mode: str = "exact") -> float:
    """Third-moment quantity Tr[(rho (x) rho_0 (x) rho_0) sigma^(3)] for
    pure rho_0 and F = Tr(rho rho_0), under a global 2-design.

    exact: c_e + c_tau + 2 (c_tau + c_chi) F with the full coefficients.
    leading: D^-3 [1 + P + 2 F (P + P3)].
    """
    if not 0.0 <= fidelity <= 1.0 + 1e-12:
        raise ValueError("fidelity must lie in [0, 1]")
    if mode == "leading":
        return (1.0 + purity + 2.0 * fidelity * (purity + p3)) / dim**3
    c_e, c_tau, c_chi = third_moment_coeffs(purity, p3, dim)
    return c_e + c_tau + 2.0 * (c_tau + c_chi) * fidelity


# -- XEB ----------------------------------------------------------------------------


def record_log_prob(realization: ct.CircuitRealization, record: ct.TrajectoryRecord,
                    rho0, engine="auto") -> float:
    """log p(record | rho0) by forced replay on the model state."""
    _, rec = ct.run_trajectory(realization, rho0, engine=engine, forced=record)
    return rec.log_prob


def xeb_linear(spec: ct.MonitoredCircuitSpec, rho, rho0, n_exp: int, n_model: int,
               master_seed: int = 0, engine="auto", min_ess: float = 10.0):
    """Linear XEB between experiment on `rho` and simulation on `rho0`.

    numerator: mean of p(m | rho0) over records m (with their own fresh
    realizations) sampled from `rho`; denominator: mean of p(m' | rho0)
    over independent records sampled from `rho0` itself.  Numerator
    records are never reused in the denominator (correlation bias).
    Returns (xeb, stderr_jackknife, numerator, denominator); raises
    `LowESS` when the denominator average is carried by fewer than
    `min_ess` effective samples.
    """
    if n_exp < 1 or n_model < 1:
        raise ValueError("XEB needs at least one numerator and denominator sample")
    if spec.measurement_rate == 0.0:
        raise ValueError("XEB is undefined for circuits with no measurement records")
    num = np.empty(n_exp)
    for i in range(n_exp):
        real = ct.realize(spec, rng_at(master_seed, REALM_REALIZATION, i))
        _, rec = ct.run_trajectory(real, rho, engine=engine,
                                   rng=rng_at(master_seed, REALM_TRAJECTORY, i))
        num[i] = np.exp(record_log_prob(real, rec, rho0, engine=engine))
    den = np.empty(n_model)
    for j in range(n_model):
        real = ct.realize(spec, rng_at(master_seed, REALM_REALIZATION, n_exp + j))
        _, rec = ct.run_trajectory(real, rho0, engine=engine,
                                   rng=rng_at(master_seed, REALM_TRAJECTORY, n_exp + j))
        den[j] = np.exp(rec.log_prob)
    ess = den.sum() ** 2 / np.sum(den * den)
    if ess < min_ess:
        raise LowESS(f"denominator effective sample size {ess:.1f} < {min_ess}")
    ratio = num.mean() / den.mean()
    # independent sample sets: delta-method errors add in quadrature
    rel_num = np.var(num, ddof=1) / (num.size * num.mean() ** 2) if num.size > 1 else 0.0
    rel_den = np.var(den, ddof=1) / (den.size * den.mean() ** 2) if den.size > 1 else 0.0
    err = float(abs(ratio) * np.sqrt(rel_num + rel_den))
    return float(ratio), err, float(num.mean()), float(den.mean())


def xeb_prime_shots(spec: ct.MonitoredCircuitSpec, rho, rho0, n_shots: int,
                    master_seed: int = 0, engine="auto") -> np.ndarray:
    """Per-shot posterior weights D Tr(rho0 sigma'_m), m ~ p(m|rho).

    sigma'_m is the eavesdropper snapshot conjugated back through the
    pre-scrambler; rho0 may be a dense matrix, DenseState or stabilizer
    state (kept classically simulable in the Clifford case).
    """
    from .shadows import make_snapshot

    d = 1 << spec.n_qubits
    vals = np.empty(n_shots)
    for i in range(n_shots):
        real = ct.realize(spec, rng_at(master_seed, REALM_REALIZATION, i))
        _, rec = ct.run_trajectory(real, rho, engine=engine,
                                   rng=rng_at(master_seed, REALM_TRAJECTORY, i))
        snap = make_snapshot("petz", real, rec, rng=rng_at(master_seed, REALM_SHOT, i),
                             engine=engine)
        vals[i] = d * _overlap(snap.state, rho0)
    return vals


def _overlap(state, rho0) -> float:
    if isinstance(state, sb.StabilizerMixedState) and isinstance(rho0, sb.StabilizerMixedState):
        return sb.stab_overlap(state, rho0)
    a = sb.stab_state_to_dense(state) if isinstance(state, sb.StabilizerMixedState) else state.matrix
    if isinstance(rho0, sb.StabilizerMixedState):
        b = sb.stab_state_to_dense(rho0)
    elif isinstance(rho0, dn.DenseState):
        b = rho0.matrix
    else:
        b = np.asarray(rho0)
    return float(np.real(np.trace(a @ b)))


def xeb_prime(spec, rho, rho0, n_shots: int, master_seed: int = 0, engine="auto"):
    """(XEB', delta XEB') = per-shot mean and standard deviation.

    The many-shot mean obeys (D - P + (D P - 1) F) / (D - 1/D) under
    pre-scrambling; the shot-to-shot deviation scales like sqrt(P).
    """
    vals = xeb_prime_shots(spec, rho, rho0, n_shots, master_seed, engine)
    return float(vals.mean()), float(vals.std(ddof=1))


def xeb_prime_expected(purity: float, fidelity: float, dim: int) -> float:
    """Exact finite-D mean of XEB' under a global 2-design."""
    return (dim - purity + (dim * purity - 1.0) * fidelity) / (dim - 1.0 / dim)


def xeb_prime_std_expected(purity: float, p3: float, fidelity: float, dim: int) -> float:
    """Leading-order shot-to-shot deviation: sqrt(P + 2 F P3 - (F P)^2)."""
    var = purity + 2.0 * fidelity * p3 - (fidelity * purity) ** 2
    return float(np.sqrt(max(var, 0.0)))


# -- fidelity shadow norm --------------------------------------------------------------


def fidelity_shadow_norm(purity: float, p3: float, fidelity: float, dim: int,
                         mode: str = "exact") -> float:
    """Squared shadow norm of a pure-state projector under pre-scrambling.

    exact: D [c^2/D - 2 c Tr2/lam + Gamma/lam^2] with the two-replica
    contraction Tr2 = [(1 - P/D) + (P - 1/D) F] / (D^2 - 1).
    leading: 1/P + 2 F P3/P^2, the large-D limit of the exact form (the
    coefficient 2 on the F term follows from the 2F(P + P3) term of the
    third-moment quantity; at P = P3 = 1, F = 1 the exact value 3D/(D+2)
    confirms it).
    """
    d = dim
    lam = (d * purity - 1.0) / (d * d - 1.0)
    if lam <= 0:
        raise NonInvertible("channel not invertible at purity <= 1/D")
    if mode == "leading":
        return 1.0 / purity + 2.0 * fidelity * p3 / purity**2
    c = (d - purity) / (d * purity - 1.0)
    tr2 = ((1.0 - purity / d) + (purity - 1.0 / d) * fidelity) / (d * d - 1.0)
    gam = gamma(purity, p3, fidelity, d, mode="exact")
    return d * (c * c / d - 2.0 * c * tr2 / lam + gam / lam**2)


def fidelity_estimates(snapshots, psi: np.ndarray, channel: PrescrambledChannel) -> np.ndarray:
    """Per-shot unbiased estimates of <psi| rho |psi>."""
    channel.require_invertible()
    d = channel.dim
    proj = np.outer(psi, psi.conj())
    inv_lam = 1.0 / (channel.lam * channel.scale)
    trace_term = (1.0 / channel.lam - 1.0) / d / channel.scale
    out = np.empty(len(snapshots))
    for i, s in enumerate(snapshots):
        out[i] = s.matrix_overlap(proj) * inv_lam - s.trace() * trace_term
    return out


def estimate_fidelity(snapshots, psi: np.ndarray, channel: PrescrambledChannel):
    """(F_hat, stderr) for the fidelity with the pure state `psi`."""
    vals = fidelity_estimates(snapshots, psi, channel)
    err = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else np.inf
    return float(vals.mean()), err

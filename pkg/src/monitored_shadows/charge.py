"""Charge learnability in U(1)-symmetric monitored dynamics.

Symmetric gates conserve Q = (1/2) sum_s Z_s, so trajectory states from
the fully mixed input stay block-diagonal in charge.  The trajectory-
averaged charge fluctuation deltaQ(t) decays as records accumulate
("sharpening"); its complement var_m <Q> controls a convexity lower
bound on the state-averaged squared shadow norm of Q, which switches
from O(N) scaling (sharp phase) to ~ N^2/t (fuzzy phase).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import circuits as ct
from .dense import TwoQubitGate, haar_unitary
from .ensemble import _WelfordTable
from .errors import NoCrossing, Unlearnable
from .ptm import PTMState
from .seeding import REALM_REALIZATION, REALM_TRAJECTORY, rng_at


def u1_haar_unitary(rng) -> np.ndarray:
    """Charge-conserving two-qubit unitary: random phases on |00> and |11>,
    a Haar 2x2 block on span{|01>, |10>}."""
    th0, th1 = rng.uniform(0.0, 2.0 * np.pi, size=2)
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = np.exp(1j * th0)
    u[3, 3] = np.exp(1j * th1)
    u[1:3, 1:3] = haar_unitary(2, rng)
    return u


def u1_haar_gate(rng, sites=(0, 1)) -> TwoQubitGate:
    return TwoQubitGate(u1_haar_unitary(rng), tuple(sites))


def charge_operator(n: int) -> np.ndarray:
    """Dense diagonal of Q = (1/2) sum_s Z_s (returned as a vector)."""
    j = np.arange(1 << n)
    pop = np.zeros(1 << n, dtype=np.int64)
    b = j.copy()
    while b.any():
        pop += b & 1
        b >>= 1
    return (n - 2 * pop) / 2.0


def charge_matrix(n: int) -> np.ndarray:
    return np.diag(charge_operator(n)).astype(complex)


def sector_projectors(n: int):
    """Orthogonal projectors onto charge sectors, as (q_value, diagonal mask).

    Ranks are binomial(n, q + n/2); the masks sum to the identity.
    """
    qdiag = charge_operator(n)
    out = []
    for q in np.unique(qdiag)[::-1]:
        out.append((float(q), (qdiag == q).astype(float)))
    return out


@dataclass
class ChargeStats:
    """Sharpening curve: charge fluctuation statistics per checkpoint."""

    n_qubits: int
    times: np.ndarray
    delta_q: np.ndarray  # E_m[<Q^2> - <Q>^2]
    delta_q_stderr: np.ndarray
    var_q: np.ndarray  # var_m <Q>
    var_q_stderr: np.ndarray
    n_traj: int

    @property
    def delta_q0(self) -> float:
        return self.n_qubits / 4.0


def _u1_spec_check(spec: ct.MonitoredCircuitSpec):
    if spec.gate_ensemble != "u1_haar":
        raise ValueError("charge statistics need the u1_haar gate ensemble")
    if spec.n_qubits > 12:
        raise ValueError("dense charge curves limited to N <= 12")
    if spec.depth > 4 * spec.n_qubits:
        raise ValueError("depth beyond 4N exceeds the charge-curve guard")


def sharpening_curve(spec: ct.MonitoredCircuitSpec, times, n_traj: int,
                     master_seed=None) -> ChargeStats:
    """Trajectory-averaged charge fluctuations of the dual ensemble.

    Runs the adjoint circuit on the fully mixed input; after s of its
    layer pairs the state is the exact dual of an s-layer monitored
    window, so one run yields the whole deltaQ(t) and var_m<Q>(t) curve.
    The two satisfy deltaQ + var<Q> = N/4 up to statistics.
    """
    _u1_spec_check(spec)
    if master_seed is None:
        master_seed = spec.seed
    times = sorted(set(int(t) for t in times))
    if times and times[-1] > spec.depth:
        raise ValueError("checkpoint beyond circuit depth")
    n = spec.n_qubits
    want = {t: i for i, t in enumerate(times)}
    fluct = _WelfordTable(len(times))  # per-trajectory <Q^2> - <Q>^2
    mean_q = _WelfordTable(len(times))  # per-trajectory <Q>
    mean_q2 = _WelfordTable(len(times))  # per-trajectory <Q>^2
    for i in range(n_traj):
        real = ct.realize(spec, rng_at(master_seed, REALM_REALIZATION, i))
        row_f = np.zeros(len(times))
        row_q = np.zeros(len(times))
        if 0 in want:
            row_f[want[0]] = n / 4.0

        def observer(state: PTMState, adj_layer, row_f=row_f, row_q=row_q):
            # adjoint layers pair up as (measure, gates); after the odd
            # member of pair s the state is the dual of an s-layer window
            if adj_layer % 2 == 0:
                return
            idx = want.get((adj_layer + 1) // 2)
            if idx is not None:
                q1, q2 = state.charge_moments()
                row_f[idx] = q2 - q1 * q1
                row_q[idx] = q1

        ct.sample_dual_trajectory(real, rng_at(master_seed, REALM_TRAJECTORY, i),
                                  engine="ptm", observer=observer)
        fluct.add(row_f)
        mean_q.add(row_q)
        mean_q2.add(row_q * row_q)
    var_q = mean_q2.mean - mean_q.mean**2
    # stderr of var_m<Q>: dominated by the second-moment term
    var_q_err = np.sqrt(mean_q2.stderr() ** 2 + (2 * mean_q.mean * mean_q.stderr()) ** 2)
    return ChargeStats(
        n, np.array(times), fluct.mean, fluct.stderr(), var_q, var_q_err, n_traj
    )


def charge_shadow_bound(delta_q: float, delta_q0: float) -> float:
    """Convexity lower bound on the state-averaged squared shadow norm of Q:
    delta_q0 / (1 - delta_q / delta_q0).

    At full sharpening (delta_q -> 0) the bound saturates at N/4; with
    delta_q = delta_q0 exp(-c t / N) it grows like N^2 / (4 c t).  At
    delta_q = delta_q0 the records carry no charge information yet.
    """
    if delta_q >= delta_q0:
        raise Unlearnable("no charge fluctuation has been resolved (varQ = 0)")
    return delta_q0 / (1.0 - delta_q / delta_q0)


def sharpening_time(curve: ChargeStats, threshold: float = 0.1) -> float:
    """First time with deltaQ <= threshold * deltaQ0, linearly interpolated."""
    target = threshold * curve.delta_q0
    dq = curve.delta_q
    below = np.nonzero(dq <= target)[0]
    if below.size == 0:
        raise NoCrossing(
            f"deltaQ never reaches {threshold} deltaQ0 within t <= {curve.times[-1]}"
        )
    i = below[0]
    if i == 0:
        return float(curve.times[0])
    t0, t1 = curve.times[i - 1], curve.times[i]
    y0, y1 = dq[i - 1], dq[i]
    return float(t0 + (t1 - t0) * (y0 - target) / (y0 - y1))


def charge_posterior(realization: ct.CircuitRealization, record: ct.TrajectoryRecord,
                     prior=None, engine="dense"):
    """Posterior p(Q | record) for the total charge of the initial state.

    p(Q|m) propto prior(Q) Tr(E_m Pi_Q) / rank(Pi_Q), evaluated by forced
    replay on the normalized sector states Pi_Q / rank.  Returns
    (q_values, posterior).
    """
    from . import dense as dn

    n = realization.spec.n_qubits
    sectors = sector_projectors(n)
    if prior is None:
        prior = np.full(len(sectors), 1.0 / len(sectors))
    prior = np.asarray(prior, dtype=float)
    if prior.size != len(sectors) or abs(prior.sum() - 1.0) > 1e-8:
        raise ValueError("prior must be a distribution over charge sectors")
    logs = np.full(len(sectors), -np.inf)
    for i, (qv, mask) in enumerate(sectors):
        if prior[i] == 0.0:
            continue
        rho = dn.DenseState(n, np.diag(mask / mask.sum()).astype(complex))
        try:
            _, rec = ct.run_trajectory(realization, rho, engine=engine, forced=record)
        except ct.ImpossibleRecord:
            continue
        logs[i] = np.log(prior[i]) + rec.log_prob
    if not np.isfinite(logs).any():
        raise ct.ImpossibleRecord("record impossible in every charge sector")
    logs -= logs[np.isfinite(logs)].max()
    post = np.where(np.isfinite(logs), np.exp(logs), 0.0)
    post /= post.sum()
    return np.array([qv for qv, _ in sectors]), post

"""Monte Carlo over the trajectory ensemble of the fully mixed input.

Records drawn by Born sampling from the fully mixed state occur with the
POVM weights pi_m, and the post-measurement states are the dual-ensemble
states sigma_m.  This module estimates trajectory-averaged quantities of
that ensemble: the entanglement feature (all-subset average purities),
purity moments including importance-weighted pi^2 averages, and
purification curves.  A fresh circuit realization is drawn for every
trajectory, so all averages are jointly over circuits and records.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from . import circuits as ct
from . import dense as dn
from . import stabilizer as sb
from .errors import LowESSWarning
from .pauli import subset_purities_from_weights
from .ptm import PTMState
from .seeding import REALM_REALIZATION, REALM_TRAJECTORY, rng_at
from .subsets import popcounts

_MERGE_CHUNK = 32  # trajectories per reduction chunk; fixed so that float
# accumulation order (and hence results) is independent of worker count


@dataclass
class TrajectorySample:
    state: object
    log_prob: float
    record: ct.TrajectoryRecord
    realization: ct.CircuitRealization


def sample_ensemble(spec: ct.MonitoredCircuitSpec, n_traj: int, master_seed=None, engine="auto"):
    """Yield i.i.d. samples (sigma_m, log pi_m) of the dual record ensemble.

    Records are drawn with probability pi_m by running the adjoint
    circuit on the fully mixed input, which simultaneously produces the
    exact dual state E_m/Tr(E_m).  Each trajectory gets a fresh
    realization; seeds are derived from (master_seed, index) so any
    subset of indices is reproducible.
    """
    if master_seed is None:
        master_seed = spec.seed
    for i in range(n_traj):
        real = ct.realize(spec, rng_at(master_seed, REALM_REALIZATION, i))
        state, record = ct.sample_dual_trajectory(
            real, rng_at(master_seed, REALM_TRAJECTORY, i), engine=engine
        )
        yield TrajectorySample(state, record.log_prob, record, real)


def _subset_purities_of(state, n: int) -> np.ndarray:
    if isinstance(state, PTMState):
        return state.subset_purities()
    if isinstance(state, dn.DenseState):
        from .pauli import pauli_coefficients, support_weights

        c = pauli_coefficients(state.matrix, n).real
        return subset_purities_from_weights(support_weights(c * c, n), n)
    if isinstance(state, sb.StabilizerMixedState):
        return np.ldexp(1.0, -sb.all_subset_entropies(state))
    raise TypeError(f"no subset purities for {type(state)}")


def state_purity(state) -> float:
    if isinstance(state, PTMState):
        return state.purity()
    if isinstance(state, dn.DenseState):
        return dn.purity(state)
    if isinstance(state, sb.StabilizerMixedState):
        return state.purity()
    raise TypeError(f"no purity for {type(state)}")


@dataclass
class EntanglementFeature:
    """Trajectory-averaged subsystem purities over all subset masks."""

    n_qubits: int
    purity: np.ndarray  # (2**n,) means, exact 1.0 at mask 0
    stderr: np.ndarray
    n_samples: int
    q: int = 2

    def check_bounds(self):
        lo = np.ldexp(1.0, -popcounts(self.n_qubits))
        slack = 3.0 * self.stderr
        if not np.all(self.purity >= lo - slack - 1e-12):
            raise ValueError("feature entry below the fully-mixed floor")
        if not np.all(self.purity <= 1.0 + slack + 1e-12):
            raise ValueError("feature entry above 1")


class _WelfordTable:
    """Streaming mean/M2 for a vector-valued sample."""

    def __init__(self, size):
        self.n = 0
        self.mean = np.zeros(size)
        self.m2 = np.zeros(size)

    def add(self, x):
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def merge(self, other):
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean.copy(), other.m2.copy()
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.n / n)
        self.m2 = self.m2 + other.m2 + delta**2 * (self.n * other.n / n)
        self.n = n
        return self

    def stderr(self):
        if self.n < 2:
            return np.full_like(self.mean, np.inf)
        return np.sqrt(self.m2 / (self.n * (self.n - 1)))


def entanglement_feature(samples, n_qubits: int) -> EntanglementFeature:
    """Average all-subset purities over an iterable of trajectory samples."""
    acc = _WelfordTable(1 << n_qubits)
    for s in samples:
        state = s.state if isinstance(s, TrajectorySample) else s
        acc.add(_subset_purities_of(state, n_qubits))
    feat = EntanglementFeature(n_qubits, acc.mean, acc.stderr(), acc.n)
    feat.purity[0] = 1.0
    feat.stderr[0] = 0.0
    return feat


# -- moments -------------------------------------------------------------------


@dataclass
class EnsembleMoments:
    """Global purity moments of the trajectory ensemble.

    P = E[Tr sigma^2], P3 = E[Tr sigma^3], einf = E[2**-S_inf], and
    P_tilde = the purity averaged under the squared-weight distribution
    pi_m^2 (self-normalized importance sampling from pi samples).
    """

    purity: float
    purity_stderr: float
    p3: float
    p3_stderr: float
    einf: float
    einf_stderr: float
    p_tilde: float
    p_tilde_stderr: float
    ess_tilde: float
    n_samples: int
    low_ess: bool


def _moment_triple(state):
    """(Tr s^2, Tr s^3, largest eigenvalue) for one trajectory state."""
    if isinstance(state, sb.StabilizerMixedState):
        p = state.purity()
        # flat spectrum: all three moments are powers of 2^-S
        return p, p * p, p
    if isinstance(state, dn.DenseState):
        ev = np.linalg.eigvalsh(state.matrix)
        return float(np.sum(ev**2)), float(np.sum(ev**3)), float(ev[-1])
    raise TypeError("moments need dense or stabilizer trajectory states")


def moments(samples) -> EnsembleMoments:
    """Plain and squared-weight purity moments from an ensemble stream."""
    ps, p3s, einfs, logw = [], [], [], []
    for s in samples:
        p, p3, einf = _moment_triple(s.state)
        ps.append(p)
        p3s.append(p3)
        einfs.append(einf)
        logw.append(s.log_prob)
    ps = np.asarray(ps)
    p3s = np.asarray(p3s)
    einfs = np.asarray(einfs)
    logw = np.asarray(logw)
    n = ps.size
    if n == 0:
        raise ValueError("empty ensemble stream")

    def mse(x):
        return float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else np.inf

    p_mean, p_err = mse(ps)
    p3_mean, p3_err = mse(p3s)
    einf_mean, einf_err = mse(einfs)

    # self-normalized importance weights w ~ pi_m implement the pi^2 ensemble
    w = np.exp(logw - logw.max())
    wsum = w.sum()
    wn = w / wsum
    ess = float(wsum**2 / np.sum(w**2))
    pt = float(np.sum(wn * ps))
    # standard self-normalized IS variance estimate
    pt_err = float(np.sqrt(np.sum(wn**2 * (ps - pt) ** 2)))
    low = ess < 10.0
    if low:
        warnings.warn(
            f"squared-weight purity resolved by ESS={ess:.1f} < 10 effective samples",
            LowESSWarning,
        )
    return EnsembleMoments(
        p_mean, p_err, p3_mean, p3_err, einf_mean, einf_err, pt, pt_err, ess, n, low
    )


# -- purification curves ---------------------------------------------------------


def purification_curve(spec: ct.MonitoredCircuitSpec, times, n_traj: int, master_seed=None, engine="auto"):
    """Entropy density s(t) = E[S2(sigma_m)] / N at the given layer counts.

    Returns (times, s, stderr).  S2 = -log2 Tr sigma^2; for stabilizer
    trajectories this is the integer tableau entropy.
    """
    if master_seed is None:
        master_seed = spec.seed
    times = sorted(set(int(t) for t in times))
    if times and times[-1] > spec.depth:
        raise ValueError("checkpoint beyond circuit depth")
    n = spec.n_qubits
    acc = _WelfordTable(len(times))
    want = {t: i for i, t in enumerate(times)}
    for i in range(n_traj):
        real = ct.realize(spec, rng_at(master_seed, REALM_REALIZATION, i))
        row = np.zeros(len(times))
        if 0 in want:
            row[want[0]] = 1.0  # fully mixed input: S2/N = 1

        def observer(state, layer, row=row):
            idx = want.get(layer + 1)
            if idx is not None:
                row[idx] = -np.log2(state_purity(state)) / n
        ct.run_trajectory(real, "fully_mixed", engine=engine,
                          rng=rng_at(master_seed, REALM_TRAJECTORY, i), observer=observer)
        acc.add(row)
    return np.array(times), acc.mean, acc.stderr()


# -- parallel feature sweeps -----------------------------------------------------


def _feature_chunk(args):
    spec_dict, master_seed, start, count = args
    spec = ct.MonitoredCircuitSpec(**spec_dict)
    acc = _WelfordTable(1 << spec.n_qubits)
    for i in range(start, start + count):
        real = ct.realize(spec, rng_at(master_seed, REALM_REALIZATION, i))
        state, _ = ct.sample_dual_trajectory(
            real, rng_at(master_seed, REALM_TRAJECTORY, i), engine="ptm"
        )
        acc.add(state.subset_purities())
    return acc


def default_workers() -> int:
    env = os.environ.get("MONITORED_SHADOWS_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def feature_sweep(spec: ct.MonitoredCircuitSpec, n_traj: int, master_seed=None, workers=None) -> EntanglementFeature:
    """Entanglement feature via the fast engine, trajectory-parallel.

    Results are bit-identical for any worker count: chunk boundaries are
    fixed and partial accumulators merge in chunk order.
    """
    from dataclasses import asdict

    if master_seed is None:
        master_seed = spec.seed
    workers = workers or default_workers()
    spec_dict = asdict(spec)
    chunks = [
        (spec_dict, master_seed, s, min(_MERGE_CHUNK, n_traj - s))
        for s in range(0, n_traj, _MERGE_CHUNK)
    ]
    acc = _WelfordTable(1 << spec.n_qubits)
    if workers == 1 or len(chunks) == 1:
        for chunk in chunks:
            acc.merge(_feature_chunk(chunk))
    else:
        with get_context("fork").Pool(workers) as pool:
            for part in pool.imap(_feature_chunk, chunks, chunksize=1):
                acc.merge(part)
    feat = EntanglementFeature(spec.n_qubits, acc.mean, acc.stderr(), acc.n)
    feat.purity[0] = 1.0
    feat.stderr[0] = 0.0
    return feat

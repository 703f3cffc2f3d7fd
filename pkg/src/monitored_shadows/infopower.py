"""Informational-power diagnostics of the record ensemble.

The mutual information between a state ensemble and the record
distribution, maximized over ensembles, measures how much an observer of
the records can learn.  With a global 2-design pre-scrambler that
maximum is reached by any 1-design ensemble of pure states and reduces
to subentropy differences; for flat-spectrum (stabilizer) trajectory
states the subentropy collapses to harmonic-sum deviations, giving a
cheap Monte Carlo estimator that tracks the purification transition.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np

from .settings import TOLERANCES

EULER_GAMMA = 0.57721566490153286061  # 20 significant digits


def delta_H(x: int) -> float:
    """Deviation of the harmonic sum: sum_{j<=x} 1/j - ln x - gamma.

    Strictly positive and decreasing, ~ 1/(2x) for large x.
    """
    if x < 1:
        raise ValueError("delta_H needs a positive integer")
    x = int(x)
    if x <= 1_000_000:
        j = np.arange(1, x + 1, dtype=np.float64)
        return float(np.sum(1.0 / j[::-1]) - math.log(x) - EULER_GAMMA)
    # asymptotic tail: 1/(2x) - 1/(12x^2) + 1/(120x^4) - ..., error O(x^-6)
    inv = 1.0 / x
    return inv / 2.0 - inv * inv / 12.0 + inv**4 / 120.0


def delta_H_power(q: int, s: float) -> float:
    """delta_H(q**s) without forming q**s when it overflows floats."""
    if s < 0:
        raise ValueError("negative exponent")
    log_x = s * math.log(q)
    if log_x > 700.0:
        return 0.0  # below double underflow already
    x = q**s
    if float(x) <= 1_000_000:
        return delta_H(int(round(x)))
    inv = math.exp(-log_x)
    return inv / 2.0 - inv * inv / 12.0 + inv**4 / 120.0


# -- subentropy -------------------------------------------------------------------


def subentropy_stabilizer(entropy_dits: float, q: int = 2, n: int | None = None) -> float:
    """Subentropy of a flat-spectrum state: Q = 1 - gamma - delta_H(q**S)."""
    if entropy_dits < 0 or (n is not None and entropy_dits > n):
        raise ValueError("entropy must lie in [0, n]")
    return 1.0 - EULER_GAMMA - delta_H_power(q, entropy_dits)


def subentropy_spectrum(spectrum, grouping_tol: float = 1e-12) -> float:
    """Subentropy from an eigenvalue list.

    Q = -sum_j lam_j^D ln(lam_j) / prod_{k != j}(lam_j - lam_k), i.e. minus
    the sum of residues of z^D ln z / prod_k (z - lam_k).  Zero eigenvalues
    drop out exactly.  Degenerate eigenvalues are grouped: groups of
    size <= 3 use the analytic residue of the higher-order pole; larger
    groups are split by a symmetric epsilon spread and Richardson-
    extrapolated (the spread is evaluated in extended precision since the
    confluent cancellation is far beyond double).
    """
    lam = np.sort(np.asarray(spectrum, dtype=float))[::-1]
    if lam.size == 0:
        raise ValueError("empty spectrum")
    if lam.min() < -TOLERANCES.sum_atol:
        raise ValueError("negative eigenvalue in spectrum")
    total = lam.sum()
    if abs(total - 1.0) > TOLERANCES.sum_atol:
        raise ValueError(f"spectrum sums to {total}, expected 1")
    lam = lam[lam > 1e-14]
    # group numerically equal eigenvalues
    groups = []  # (value, multiplicity)
    for v in lam:
        if groups and abs(groups[-1][0] - v) <= grouping_tol * max(groups[-1][0], v):
            groups[-1][1] += 1
        else:
            groups.append([v, 1])
    if any(m > 3 for _, m in groups):
        return _subentropy_spread(groups)
    d = int(sum(m for _, m in groups))
    q_val = 0.0
    for i, (mu, m) in enumerate(groups):
        others = [(nu, mm) for j, (nu, mm) in enumerate(groups) if j != i]
        q_val -= _residue(mu, m, d, others)
    return max(q_val, 0.0)


def _residue(mu: float, m: int, d: int, others) -> float:
    """Residue of z^d ln z / prod (z-mu_l)^{m_l} at a pole of order m <= 3."""
    h = mu**d * math.log(mu)
    u = 1.0
    for nu, mm in others:
        u /= (mu - nu) ** mm
    if m == 1:
        return h * u
    hp = mu ** (d - 1) * (d * math.log(mu) + 1.0)
    s1 = -sum(mm / (mu - nu) for nu, mm in others)
    if m == 2:
        return u * (hp + h * s1)
    hpp = mu ** (d - 2) * (d * (d - 1) * math.log(mu) + 2 * d - 1.0)
    s2 = sum(mm / (mu - nu) ** 2 for nu, mm in others)
    return 0.5 * u * (hpp + 2.0 * hp * s1 + h * (s1 * s1 + s2))


def _subentropy_spread(groups, eps: float = 1e-7) -> float:
    """Epsilon-spread evaluation with two-point Richardson extrapolation."""

    def q_of(e):
        vals = []
        for mu, m in groups:
            if m == 1:
                vals.append(mp.mpf(mu))
            else:
                # keep spread eigenvalues positive for tiny mu
                e_eff = mp.mpf(min(e, mu / (10.0 * m)))
                for j in range(m):
                    vals.append(mp.mpf(mu) + (j - (m - 1) / 2.0) * e_eff)
        q = mp.mpf(0)
        for j, lj in enumerate(vals):
            denom = mp.mpf(1)
            for k, lk in enumerate(vals):
                if k != j:
                    denom *= 1 - lk / lj
            q -= lj * mp.log(lj) / denom
        return q

    # the confluent limit cancels terms of size eps^-(m-1): scale the
    # working precision with the largest group
    max_m = max(m for _, m in groups)
    dps = 40 + 9 * (max_m - 1)
    with mp.workdps(dps):
        q1 = q_of(eps)
        q2 = q_of(eps / 2)
        # symmetric spread has O(eps^2) error
        out = (4 * q2 - q1) / 3
        return float(max(out, 0.0))


# -- informational power -----------------------------------------------------------


def infopower_clifford(entropy_samples, q: int = 2, n: int | None = None):
    """(W, stderr) from trajectory entropies sampled under the record weights.

    W = E_m[delta_H(q**S_m)] - delta_H(q**N); requires pre-scrambled
    dynamics for the maximization to be attained (without it the value is
    an upper-bound heuristic).
    """
    s_vals = np.asarray(list(entropy_samples), dtype=float)
    if n is None:
        n = int(s_vals.max())
    vals = np.array([delta_H_power(q, s) for s in s_vals])
    w = float(vals.mean()) - delta_H_power(q, n)
    err = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else np.inf
    return w, err


def infopower_renyi2(p_tilde: float, dim: int) -> float:
    """Renyi-2 informational power: ln[(1 + P_tilde) / (1 + 1/D)].

    P_tilde is the average purity under the squared-weight trajectory
    distribution (see `ensemble.moments`).
    """
    if not (1.0 / dim - 1e-12 <= p_tilde <= 1.0 + 1e-12):
        raise ValueError(f"purity {p_tilde} outside [1/D, 1]")
    return float(np.log((1.0 + p_tilde) / (1.0 + 1.0 / dim)))


def haar_G_mc(state, n_samples: int, rng, batch: int = 4096):
    """Monte Carlo of the Haar integral G(sigma) = E_phi[f(<phi|D sigma|phi>)]
    with f(x) = x ln x.  Returns (estimate, stderr).

    Validates G(sigma) = Q(I/D) - Q(sigma): the integral is the per-record
    term of the pre-scrambled informational power.
    """
    matrix = state.matrix if hasattr(state, "matrix") else np.asarray(state)
    d = matrix.shape[0]
    if d > 64:
        raise ValueError("Haar-integral Monte Carlo limited to D <= 64")
    total = 0.0
    total2 = 0.0
    done = 0
    while done < n_samples:
        b = min(batch, n_samples - done)
        z = rng.standard_normal((b, d)) + 1j * rng.standard_normal((b, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        x = np.real(np.einsum("bi,ij,bj->b", z.conj(), matrix, z)) * d
        x = np.clip(x, 1e-300, None)
        f = x * np.log(x)
        total += f.sum()
        total2 += (f * f).sum()
        done += b
    mean = total / n_samples
    var = total2 / n_samples - mean * mean
    return float(mean), float(np.sqrt(max(var, 0.0) / n_samples))


def mutual_information_exhaustive(state_ensemble, effects) -> float:
    """Exact I(ensemble : POVM) from the joint outcome distribution.

    `state_ensemble` is a list of (weight, density matrix); `effects` a
    list of POVM effects (the record effects E_m of an exhaustively
    enumerable circuit).  Natural-log units.
    """
    probs = np.array([p for p, _ in state_ensemble])
    if abs(probs.sum() - 1.0) > TOLERANCES.sum_atol:
        raise ValueError("ensemble weights must sum to 1")
    joint = np.empty((len(state_ensemble), len(effects)))
    for i, (p_i, rho) in enumerate(state_ensemble):
        for k, eff in enumerate(effects):
            joint[i, k] = p_i * float(np.real(np.trace(rho @ eff)))
    joint = np.clip(joint, 0.0, None)
    if abs(joint.sum() - 1.0) > TOLERANCES.sum_atol:
        raise ValueError("POVM effects do not resolve the identity")
    pm = joint.sum(axis=0)
    pi = joint.sum(axis=1)
    mask = joint > 0
    terms = joint[mask] * np.log(joint[mask] / (pi[:, None] * pm[None, :])[mask])
    return float(terms.sum())

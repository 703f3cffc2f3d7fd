import numpy as np
import pytest
from numpy.testing import assert_allclose

from monitored_shadows import circuits as ct
from monitored_shadows import stabilizer as sb
from monitored_shadows import xeb
from monitored_shadows.dense import DenseState
from monitored_shadows.errors import DegenerateWeingarten, NonInvertible
from monitored_shadows.shadows import PrescrambledChannel, make_snapshot
from oracles import enumerate_snapshots, exact_moments


class TestWeingarten:
    def test_d4_exact_rationals(self):
        wg_e, wg_tau, wg_chi = xeb.weingarten3(4)
        g = 4 * 15 * 12  # 720
        assert g == 720
        assert wg_e == pytest.approx(14 / 720, rel=1e-14)
        assert wg_tau == pytest.approx(-4 / 720, rel=1e-14)
        assert wg_chi == pytest.approx(2 / 720, rel=1e-14)

    def test_gram_orthogonality(self):
        # sum over S3 of Wg(nu) D^{cycles(nu mu^-1)} is 1 at mu=e, 0 otherwise
        for d in (3, 4, 7):
            wg_e, wg_tau, wg_chi = xeb.weingarten3(d)
            # mu = e: cycles(nu) for nu in classes (e, 3 transpositions, 2 cycles)
            val_e = wg_e * d**3 + 3 * wg_tau * d**2 + 2 * wg_chi * d
            assert val_e == pytest.approx(1.0, abs=1e-12)
            # mu = transposition
            val_t = wg_e * d**2 + wg_tau * (d**3 + 2 * d) + 2 * wg_chi * d**2
            assert val_t == pytest.approx(0.0, abs=1e-12)
            # mu = 3-cycle
            val_c = wg_e * d + 3 * wg_tau * d**2 + wg_chi * (d**3 + d)
            assert val_c == pytest.approx(0.0, abs=1e-12)

    def test_rejects_degenerate(self):
        with pytest.raises(DegenerateWeingarten):
            xeb.weingarten3(2)

    def test_third_moment_haar_mc(self, rng):
        # E_U[Tr(U rho U+ A) Tr(U rho U+ B) Tr(U rho U+ C)] against the
        # permutation expansion with c-coefficients, D=4
        d = 4
        rho_v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        rho_v /= np.linalg.norm(rho_v)
        rho = np.outer(rho_v, rho_v.conj())
        pur, p3 = 1.0, 1.0
        trip = xeb.WeingartenTriple.from_moments(pur, p3, d)
        mats = []
        for _ in range(3):
            a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            mats.append(a + a.conj().T)
        a, b, c = mats
        want = (
            trip.c_e * np.trace(a) * np.trace(b) * np.trace(c)
            + trip.c_tau * (
                np.trace(a @ b) * np.trace(c)
                + np.trace(b @ c) * np.trace(a)
                + np.trace(a @ c) * np.trace(b)
            )
            + trip.c_chi * (np.trace(a @ b @ c) + np.trace(a @ c @ b))
        ).real
        n_mc = 200000
        acc = 0.0
        acc2 = 0.0
        chunk = 10000
        done = 0
        while done < n_mc:
            b_sz = min(chunk, n_mc - done)
            zs = rng.standard_normal((b_sz, d, d)) + 1j * rng.standard_normal((b_sz, d, d))
            qs, rs = np.linalg.qr(zs)
            ph = np.einsum("bii->bi", rs)
            qs = qs * (ph / np.abs(ph))[:, None, :]
            sig = np.einsum("bij,jk,blk->bil", qs, rho, qs.conj())
            ta = np.real(np.einsum("bij,ji->b", sig, a))
            tb = np.real(np.einsum("bij,ji->b", sig, b))
            tc = np.real(np.einsum("bij,ji->b", sig, c))
            vals = ta * tb * tc
            acc += vals.sum()
            acc2 += (vals * vals).sum()
            done += b_sz
        mean = acc / n_mc
        err = np.sqrt((acc2 / n_mc - mean**2) / n_mc)
        assert abs(mean - want) < 5 * err


class TestThirdMomentCoeffs:
    def test_pure_haar_limit(self):
        for d in (4, 8):
            c_e, c_tau, c_chi = xeb.third_moment_coeffs(1.0, 1.0, d)
            want = 1.0 / (d * (d + 1) * (d + 2))
            for c in (c_e, c_tau, c_chi):
                assert c == pytest.approx(want, rel=1e-12)

    def test_fully_mixed_limit(self):
        d = 8
        c_e, c_tau, c_chi = xeb.third_moment_coeffs(1.0 / d, 1.0 / d**2, d)
        assert c_e == pytest.approx(d**-3, rel=1e-12)
        assert c_tau == pytest.approx(0.0, abs=1e-15)
        assert c_chi == pytest.approx(0.0, abs=1e-15)

    def test_leading_order_sum(self):
        d = 64
        pur, p3 = 0.3, 0.12
        c_e, c_tau, c_chi = xeb.third_moment_coeffs(pur, p3, d)
        assert c_e + c_tau == pytest.approx((1 + pur) / d**3, rel=0.1)

    def test_recontraction_validates(self):
        trip = xeb.WeingartenTriple.from_moments(0.5, 0.2, 8)
        assert trip.contract("e") == pytest.approx(1.0, abs=1e-10)
        assert trip.contract("tau") == pytest.approx(0.5, abs=1e-10)
        assert trip.contract("chi") == pytest.approx(0.2, abs=1e-10)


class TestGamma:
    def test_fully_mixed_f0(self):
        d = 8
        assert xeb.gamma(1.0 / d, 1.0 / d**2, 0.0, d) == pytest.approx(d**-3, rel=1e-12)

    def test_exact_vs_leading_large_d(self):
        d = 1024
        pur, p3, f = 0.37, 0.2, 0.6
        exact = xeb.gamma(pur, p3, f, d, "exact")
        lead = xeb.gamma(pur, p3, f, d, "leading")
        assert exact == pytest.approx(lead, rel=5.0 / d)

    def test_gamma_against_clifford_mc(self, rng):
        # D=8 Clifford trajectories: Gamma from exact moments matches the
        # Monte Carlo of Tr[(rho x rho0 x rho0) sigma^(3)] (the Clifford
        # group is a 3-design for qubits)
        spec = ct.MonitoredCircuitSpec(3, 2, 0.5, gate_ensemble="clifford2q",
                                       prescramble="global_clifford", seed=77)
        base = ct.MonitoredCircuitSpec(3, 2, 0.5, gate_ensemble="clifford2q", seed=77)
        real0 = ct.realize(base)
        snaps = enumerate_snapshots(real0)
        pur, p3, _, _, _ = exact_moments(snaps)
        d = 8
        rho0 = DenseState.computational(3, 0).matrix
        psi = np.zeros(8)
        psi[0] = psi[4] = 1.0 / np.sqrt(2)  # F = 1/2 exercises both Gamma terms
        rho = np.outer(psi, psi)
        f = float(np.real(np.trace(rho @ rho0)))
        want = xeb.gamma(pur, p3, f, d, "exact")
        n_mc = 4000
        vals = np.empty(n_mc)
        for i in range(n_mc):
            # same monitored layers; fresh pre-scrambler + record each shot
            v = sb.random_clifford_tableau(3, np.random.default_rng(50_000 + i))
            framed = ct.CircuitRealization(spec, real0.layers, v)
            _, rec = ct.run_trajectory(framed, DenseState(3, rho.copy()),
                                       rng=np.random.default_rng(90_000 + i))
            snap = make_snapshot("petz", framed, rec)
            vals[i] = snap.matrix_overlap(rho0) ** 2
        # E_m~p(m|rho)[Tr(rho0 sigma')^2] = D Tr[(rho x rho0 x rho0) sigma3]
        mean = vals.mean() / d
        err = vals.std(ddof=1) / np.sqrt(n_mc) / d
        assert abs(mean - want) < 3.5 * err


class TestXEBLinear:
    def test_same_state_is_one(self):
        spec = ct.MonitoredCircuitSpec(3, 2, 0.6, gate_ensemble="clifford2q",
                                       prescramble="global_clifford", seed=2)
        rho0 = sb.StabilizerMixedState.computational(3, 0)
        val, err, num, den = xeb.xeb_linear(spec, rho0, rho0, 1500, 1500, master_seed=4)
        assert abs(val - 1.0) < max(4 * err, 0.05)

    def test_no_records_raises(self):
        # p=0 gives empty records: the diagnostic is undefined
        spec = ct.MonitoredCircuitSpec(3, 2, 0.0, gate_ensemble="clifford2q", seed=2)
        rho0 = sb.StabilizerMixedState.computational(3, 0)
        with pytest.raises(ValueError):
            xeb.xeb_linear(spec, rho0, rho0, 10, 10)

    def test_exhaustive_second_moment_form(self):
        # on a fixed realization, the large-sample XEB equals the ratio of
        # second-moment contractions sum pi^2 Tr(sigma x sigma rho x rho0)
        spec = ct.MonitoredCircuitSpec(3, 2, 0.5, seed=19)
        real = ct.realize(spec)
        snaps = enumerate_snapshots(real)
        d = 8
        rho = DenseState.computational(3, 0b011).matrix
        rho0_v = np.zeros(8)
        rho0_v[0] = 1.0
        rho0 = np.outer(rho0_v, rho0_v)
        num = sum(
            (d * pi) ** 2 * np.real(np.trace(sigma @ rho)) * np.real(np.trace(sigma @ rho0))
            for _, sigma, pi in snaps
        )
        den = sum(
            (d * pi) ** 2 * np.real(np.trace(sigma @ rho0)) ** 2 for _, sigma, pi in snaps
        )
        want = num / den
        # direct definition on the same fixed realization
        num2 = sum(
            np.exp(rec.log_prob) * _p_given(real, rec, rho) for rec, _, _ in snaps
        )
        den2 = sum(
            np.exp(rec.log_prob) * _p_given(real, rec, rho0) for rec, _, _ in snaps
        )
        # numerator of the definition: E_{m~rho}[p(m|rho0)]
        num3 = sum(
            _p_given(real, rec, rho) * _p_given(real, rec, rho0) for rec, _, _ in snaps
        )
        den3 = sum(_p_given(real, rec, rho0) ** 2 for rec, _, _ in snaps)
        assert_allclose(num3 / den3, want, atol=1e-10)
        del num2, den2


def _p_given(real, rec, rho_mat):
    st = DenseState(3, rho_mat.astype(complex).copy())
    _, r = ct.run_trajectory(real, st, engine="dense", forced=rec)
    return float(np.exp(r.log_prob))


class TestXEBPrime:
    def test_no_measurements_unit(self):
        spec = ct.MonitoredCircuitSpec(3, 2, 0.0, gate_ensemble="clifford2q",
                                       prescramble="global_clifford", seed=6)
        rho0 = sb.StabilizerMixedState.computational(3, 0)
        mean, std = xeb.xeb_prime(spec, rho0, rho0, 40, master_seed=1)
        assert mean == pytest.approx(1.0, abs=1e-10)
        assert std == pytest.approx(0.0, abs=1e-10)

    def test_exact_mean_formula_pure_f1(self):
        d = 16
        assert xeb.xeb_prime_expected(1.0, 1.0, d) == pytest.approx(2 * d / (d + 1), rel=1e-12)

    def test_per_shot_average_matches_channel_contraction(self):
        # exhaustive N=3: E_m~p(m|rho)[D Tr(rho0 sigma_m)] = D Tr(rho0 M(rho))
        spec = ct.MonitoredCircuitSpec(3, 2, 0.5, seed=19)
        real = ct.realize(spec)
        snaps = enumerate_snapshots(real)
        d = 8
        rho = DenseState.computational(3, 0b011).matrix
        rho0 = DenseState.computational(3, 0).matrix
        per_shot = sum(
            _p_given(real, rec, rho) * d * np.real(np.trace(rho0 @ sigma))
            for rec, sigma, _ in snaps
        )
        m_rho = sum(
            (d * pi) * np.real(np.trace(sigma @ rho)) * sigma for _, sigma, pi in snaps
        )
        contraction = d * np.real(np.trace(rho0 @ m_rho))
        assert_allclose(per_shot, contraction, atol=1e-8)

    def test_xebprime_statistics_match_formulas(self):
        # Clifford N=6, pure phase: mean and std against the 2-design
        # formulas with measured moments
        from monitored_shadows.ensemble import moments, sample_ensemble

        n = 6
        spec = ct.MonitoredCircuitSpec(n, 12, 0.35, gate_ensemble="clifford2q",
                                       prescramble="global_clifford", seed=33)
        rho0 = sb.StabilizerMixedState.computational(n, 0)
        moms = moments(sample_ensemble(spec, 1200, master_seed=8))
        d = 1 << n
        n_shots = 1200
        mean, std = xeb.xeb_prime(spec, rho0, rho0, n_shots, master_seed=9)
        want = xeb.xeb_prime_expected(moms.purity, 1.0, d)
        tol = 4 * (std / np.sqrt(n_shots) + moms.purity_stderr)
        assert abs(mean - want) < tol
        want_std = xeb.xeb_prime_std_expected(moms.purity, moms.p3, 1.0, d)
        assert abs(std - want_std) < 0.25 * want_std + 4 * moms.p3_stderr


class TestFidelityShadow:
    def test_pure_phase_f0_near_one(self):
        # exact value D/(D+2) -> 1: constant sample complexity
        d = 64
        val = xeb.fidelity_shadow_norm(1.0, 1.0, 0.0, d)
        assert val == pytest.approx(d / (d + 2.0), rel=1e-12)
        assert abs(val - 1.0) < 0.05

    def test_exact_f1_pure_limit(self):
        # P = P3 = 1, F = 1: exact 3D/(D+2), the random-Clifford limit
        for d in (8, 64, 1024):
            val = xeb.fidelity_shadow_norm(1.0, 1.0, 1.0, d)
            assert val == pytest.approx(3.0 * d / (d + 2.0), rel=1e-12)

    def test_exact_matches_leading_large_d(self):
        d = 2**16
        pur, p3, f = 0.3, 0.1, 0.7
        exact = xeb.fidelity_shadow_norm(pur, p3, f, d)
        lead = xeb.fidelity_shadow_norm(pur, p3, f, d, mode="leading")
        assert exact == pytest.approx(lead, rel=50.0 / (d * pur))

    def test_scaling_with_purity(self):
        # ~ D^s up to a factor approaching 1 as D P grows
        d = 2**16
        for s in (0.3, 0.5, 0.8):
            pur = d**-s
            val = xeb.fidelity_shadow_norm(pur, pur**1.5, 0.0, d)
            assert val == pytest.approx(d**s, rel=0.25)
        # and the log-log slope across sizes is s
        s = 0.6
        vals = [xeb.fidelity_shadow_norm(d**-s, d**-1.2, 0.0, d) for d in (2**12, 2**18)]
        slope = np.log(vals[1] / vals[0]) / np.log(2**18 / 2**12)
        assert slope == pytest.approx(s, abs=0.05)

    def test_noninvertible(self):
        with pytest.raises(NonInvertible):
            xeb.fidelity_shadow_norm(1.0 / 8, 1.0 / 64, 0.5, 8)

    def test_estimate_fidelity_unbiased_small_n(self):
        # rho = |psi><psi| and rho orthogonal: estimates -> 1 and 0
        n = 3
        d = 8
        spec = ct.MonitoredCircuitSpec(n, 3, 0.5, gate_ensemble="clifford2q",
                                       prescramble="global_clifford", seed=15)
        from monitored_shadows.ensemble import moments, sample_ensemble

        moms = moments(sample_ensemble(spec, 1500, master_seed=2))
        chan = PrescrambledChannel(d, moms.purity)
        psi = np.zeros(d)
        psi[0] = 1.0
        for bits, want in ((0, 1.0), (1, 0.0)):
            rho = sb.StabilizerMixedState.computational(n, bits)
            snaps = []
            for i in range(3000):
                real = ct.realize(spec, np.random.default_rng(3_000_000 + i))
                _, rec = ct.run_trajectory(real, rho, rng=np.random.default_rng(4_000_000 + i))
                snaps.append(make_snapshot("petz", real, rec))
            est, err = xeb.estimate_fidelity(snaps, psi, chan)
            assert abs(est - want) < 4 * (err + moms.purity_stderr)

    def test_fidelity_completeness_over_basis(self):
        # summing fidelity estimates over a complete basis gives exactly
        # Tr(M^-1(payload)) = 1 per shot
        n = 2
        d = 4
        spec = ct.MonitoredCircuitSpec(n, 2, 0.6, gate_ensemble="clifford2q",
                                       prescramble="global_clifford", seed=10)
        real = ct.realize(spec)
        _, rec = ct.run_trajectory(real, "fully_mixed", rng=np.random.default_rng(1))
        snap = make_snapshot("petz", real, rec)
        chan = PrescrambledChannel(d, 0.7)
        total = 0.0
        for b in range(d):
            psi = np.zeros(d)
            psi[b] = 1.0
            total += xeb.fidelity_estimates([snap], psi, chan)[0]
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_mc_variance_vs_analytic(self):
        # shadow-norm MC of the fidelity estimator against the analytic
        # value within a factor 2 at N=4
        n, d = 4, 16
        spec = ct.MonitoredCircuitSpec(n, 8, 0.45, gate_ensemble="clifford2q",
                                       prescramble="global_clifford", seed=12)
        from monitored_shadows.ensemble import moments, sample_ensemble

        moms = moments(sample_ensemble(spec, 1500, master_seed=5))
        chan = PrescrambledChannel(d, moms.purity)
        psi = np.zeros(d)
        psi[0] = 1.0
        rho = sb.StabilizerMixedState.computational(n, 0)
        vals = []
        for i in range(1500):
            real = ct.realize(spec, np.random.default_rng(7_000_000 + i))
            _, rec = ct.run_trajectory(real, rho, rng=np.random.default_rng(8_000_000 + i))
            snap = make_snapshot("petz", real, rec)
            vals.append(xeb.fidelity_estimates([snap], psi, chan)[0])
        second_moment = float(np.mean(np.square(vals)))
        want = xeb.fidelity_shadow_norm(moms.purity, moms.p3, 1.0, d)
        assert second_moment < 2 * want and second_moment > want / 2

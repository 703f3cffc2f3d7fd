"""Reproducible experiment orchestration.

Each subcommand maps a family of library computations onto files:
CSV for curves, JSON for summaries, plus a manifest with config hash,
code version and wall time.  Everything is deterministic given
(config, master seed): all randomness descends through the seed tree, so
the result files are byte-identical across runs and worker counts (the
manifest, which records the wall time, is not).

Exit codes: 0 ok, 2 config error, 3 resource guard, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import charge as ch
from . import circuits as ct
from . import ensemble as en
from . import shadows as sh
from . import stabilizer as sb
from .errors import ConfigError, MonitoredShadowsError, ResourceGuard
from .pauli import PauliString
from .settings import TOLERANCES

EXPERIMENTS = ("shadow-norms", "purify", "info-power", "xeb", "charge", "estimate")


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment run."""

    experiment: str
    n_list: list
    p_grid: list
    depth_factor: int = 2  # circuit depth is depth_factor * N
    gate_ensemble: str = "haar"
    prescramble: str = "none"
    boundary: str = "open"
    engine: str = "auto"
    n_traj: int = 1000
    n_shots: int = 1000
    prescription: str = "petz"
    observable: str = ""  # Pauli string for `estimate`
    times: list = field(default_factory=list)  # checkpoints for curves
    master_seed: int = 0
    output: str = "results"

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if not self.n_list or not all(int(n) >= 1 for n in self.n_list):
            raise ConfigError("n_list must be a nonempty list of sizes")
        if self.experiment != "purify" and not self.p_grid and self.experiment != "estimate":
            raise ConfigError("p_grid must be nonempty")
        if self.n_traj < 1 or self.n_shots < 1:
            raise ConfigError("n_traj and n_shots must be >= 1")
        if self.prescription not in sh.PRESCRIPTIONS:
            raise ConfigError(f"prescription must be one of {sh.PRESCRIPTIONS}")
        for p in self.p_grid:
            if not 0.0 <= float(p) <= 1.0:
                raise ConfigError(f"measurement rate {p} outside [0, 1]")
        dense_needed = self.gate_ensemble != "clifford2q" or self.engine == "dense"
        if dense_needed:
            for n in self.n_list:
                if int(n) > TOLERANCES.max_dense_qubits:
                    raise ResourceGuard(
                        f"N={n} exceeds the dense-engine guard "
                        f"({TOLERANCES.max_dense_qubits}); use the clifford2q ensemble"
                    )

    def to_json(self) -> str:
        # the output path is where results land, not part of the
        # experiment's identity
        payload = asdict(self)
        payload.pop("output")
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))

    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    def circuit_spec(self, n: int, p: float) -> ct.MonitoredCircuitSpec:
        return ct.MonitoredCircuitSpec(
            n_qubits=int(n),
            depth=self.depth_factor * int(n),
            measurement_rate=float(p),
            gate_ensemble=self.gate_ensemble,
            prescramble=self.prescramble,
            boundary=self.boundary,
            seed=self.master_seed,
        )


def _seed_for(config: ExperimentConfig, *path_parts) -> int:
    """Stable per-task master seed derived from the config seed and a path."""
    h = hashlib.sha256()
    h.update(str(config.master_seed).encode())
    for part in path_parts:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "little")


# -- experiment bodies ----------------------------------------------------------


def _run_shadow_norms(config: ExperimentConfig, outdir: Path):
    rows = []
    workers = en.default_workers()
    for n in config.n_list:
        for p in config.p_grid:
            spec = config.circuit_spec(n, p)
            seed = _seed_for(config, "shadow-norms", n, p)
            batches = _feature_batches(spec, config.n_traj, seed, workers, n_batches=16)
            means = {"harmonic": [], "arithmetic": [], "geometric": []}
            feat_total = None
            for feat in batches:
                lam = sh.lambdas_from_feature(feat)
                m = sh.shadow_norm_means(lam)
                for k in means:
                    means[k].append(m[k])
                feat_total = feat if feat_total is None else _merge_features(feat_total, feat)
            lam = sh.lambdas_from_feature(feat_total)
            m = sh.shadow_norm_means(lam)
            row = {"N": int(n), "p": float(p)}
            for k in ("harmonic", "arithmetic", "geometric"):
                vals = np.array(means[k])
                row[k] = m[k]
                row[f"stderr_{k}"] = float(vals.std(ddof=1) / np.sqrt(vals.size))
            row["n_unlearnable"] = m["n_unlearnable"]
            rows.append(row)
    _write_csv(outdir / "shadow_norms.csv",
               ["N", "p", "harmonic", "stderr_harmonic", "arithmetic",
                "stderr_arithmetic", "geometric", "stderr_geometric", "n_unlearnable"],
               rows)
    return {"rows": rows}


def _feature_batches(spec, n_traj, seed, workers, n_batches):
    """Split a feature sweep into batches (for batch-mean error bars)."""
    per = max(2, n_traj // n_batches)
    out = []
    done = 0
    b = 0
    while done < n_traj:
        take = min(per, n_traj - done)
        out.append(en.feature_sweep(
            spec, take, master_seed=seed + 1000003 * b, workers=workers))
        done += take
        b += 1
    return out


def _merge_features(a, b):
    acc = en._WelfordTable(a.purity.size)
    for f in (a, b):
        part = en._WelfordTable(f.purity.size)
        part.n = f.n_samples
        part.mean = f.purity.copy()
        part.m2 = (f.stderr**2) * f.n_samples * max(f.n_samples - 1, 1)
        acc.merge(part)
    feat = en.EntanglementFeature(a.n_qubits, acc.mean, acc.stderr(), acc.n)
    feat.purity[0] = 1.0
    feat.stderr[0] = 0.0
    return feat


def _run_purify(config: ExperimentConfig, outdir: Path):
    rows = []
    for n in config.n_list:
        for p in (config.p_grid or [0.0]):
            spec = config.circuit_spec(n, p)
            times = config.times or list(range(0, spec.depth + 1, max(1, spec.depth // 8)))
            t, s, err = en.purification_curve(
                spec, times, config.n_traj,
                master_seed=_seed_for(config, "purify", n, p), engine=config.engine)
            for ti, si, ei in zip(t, s, err):
                rows.append({"N": int(n), "p": float(p), "t": int(ti),
                             "s": float(si), "stderr": float(ei)})
    _write_csv(outdir / "purification.csv", ["N", "p", "t", "s", "stderr"], rows)
    return {"rows": rows}


def _run_info_power(config: ExperimentConfig, outdir: Path):
    from .infopower import infopower_clifford

    if config.gate_ensemble != "clifford2q":
        raise ConfigError("info-power runs on the clifford2q ensemble")
    rows = []
    for n in config.n_list:
        for p in config.p_grid:
            spec = config.circuit_spec(n, p)
            seed = _seed_for(config, "info-power", n, p)
            entropies = [
                s.state.entropy
                for s in en.sample_ensemble(spec, config.n_traj, master_seed=seed)
            ]
            w, err = infopower_clifford(entropies, q=2, n=int(n))
            rows.append({"N": int(n), "p": float(p), "W": w, "stderr": err})
    _write_csv(outdir / "info_power.csv", ["N", "p", "W", "stderr"], rows)
    return {"rows": rows}


def _run_xeb(config: ExperimentConfig, outdir: Path):
    from .xeb import xeb_linear, xeb_prime_shots
    from .ensemble import moments, sample_ensemble

    rows = []
    shots_all = {}
    for n in config.n_list:
        for p in config.p_grid:
            spec = config.circuit_spec(n, p)
            seed = _seed_for(config, "xeb", n, p)
            rho0 = _model_state(spec)
            moms = moments(sample_ensemble(spec, config.n_traj, master_seed=seed))
            val, err, num, den = xeb_linear(
                spec, rho0, rho0, config.n_shots, config.n_shots,
                master_seed=seed + 1, engine=config.engine)
            shots = xeb_prime_shots(spec, rho0, rho0, config.n_shots,
                                    master_seed=seed + 2, engine=config.engine)
            shots_all[f"N{n}_p{p}"] = shots.tolist()
            rows.append({
                "N": int(n), "p": float(p), "xeb": val, "xeb_stderr": err,
                "xeb_prime": float(shots.mean()), "std": float(shots.std(ddof=1)),
                "n": int(shots.size), "P": moms.purity, "P3": moms.p3,
            })
    _write_csv(outdir / "xeb.csv",
               ["N", "p", "xeb", "xeb_stderr", "xeb_prime", "std", "n", "P", "P3"], rows)
    (outdir / "xeb_shots.json").write_text(json.dumps(shots_all))
    return {"rows": rows}


def _model_state(spec):
    if spec.gate_ensemble == "clifford2q":
        return sb.StabilizerMixedState.computational(spec.n_qubits, 0)
    from .dense import DenseState

    return DenseState.computational(spec.n_qubits, 0)


def _run_charge(config: ExperimentConfig, outdir: Path):
    if config.gate_ensemble != "u1_haar":
        raise ConfigError("charge runs need the u1_haar ensemble")
    rows = []
    for n in config.n_list:
        for p in config.p_grid:
            spec = config.circuit_spec(n, p)
            times = config.times or list(range(0, spec.depth + 1))
            stats = ch.sharpening_curve(spec, times, config.n_traj,
                                        master_seed=_seed_for(config, "charge", n, p))
            for i, t in enumerate(stats.times):
                dq = float(stats.delta_q[i])
                try:
                    bound = ch.charge_shadow_bound(dq, stats.delta_q0)
                except MonitoredShadowsError:
                    bound = float("inf")
                rows.append({
                    "N": int(n), "p": float(p), "t": int(t), "deltaQ": dq,
                    "stderr": float(stats.delta_q_stderr[i]),
                    "varQ": float(stats.var_q[i]), "bound": bound,
                })
    _write_csv(outdir / "charge.csv", ["N", "p", "t", "deltaQ", "stderr", "varQ", "bound"], rows)
    return {"rows": rows}


def _run_estimate(config: ExperimentConfig, outdir: Path):
    """The eavesdropper workflow: calibrate, collect records, estimate."""
    if not config.observable:
        raise ConfigError("estimate needs --observable (a Pauli string)")
    results = []
    for n in config.n_list:
        obs = PauliString.from_str(config.observable)
        if obs.n_qubits != int(n):
            raise ConfigError("observable length must match N")
        for p in config.p_grid:
            spec = config.circuit_spec(n, p)
            if spec.prescramble == "none":
                raise ConfigError("estimate requires a pre-scrambled spec")
            seed = _seed_for(config, "estimate", n, p)
            # calibration and estimation use disjoint sample sets
            moms = en.moments(en.sample_ensemble(spec, config.n_traj, master_seed=seed))
            channel = sh.PrescrambledChannel.from_moments(1 << int(n), moms,
                                                          "petz" if config.prescription == "least_squares" else config.prescription)
            if config.prescription == "least_squares":
                samples = list(en.sample_ensemble(spec, config.n_traj, master_seed=seed + 7))
                n2 = float(np.mean([np.exp(s.log_prob) for s in samples]))
                channel = sh.calibrate_least_squares(1 << int(n), moms.p_tilde, n2)
            rho = _model_state(spec)
            snaps = []
            from .seeding import REALM_REALIZATION, REALM_SHOT, REALM_TRAJECTORY, rng_at

            records = []
            for i in range(config.n_shots):
                real = ct.realize(spec, rng_at(seed + 13, REALM_REALIZATION, i))
                _, rec = ct.run_trajectory(real, rho, engine=config.engine,
                                           rng=rng_at(seed + 13, REALM_TRAJECTORY, i))
                records.append(rec)
                snaps.append(sh.make_snapshot(config.prescription, real, rec,
                                              rng=rng_at(seed + 13, REALM_SHOT, i)))
            est, err = sh.estimate_pauli(snaps, obs, channel)
            var, ci = sh.estimator_variance(snaps, obs, channel)
            lam = channel.lam * channel.scale
            report = {
                "observable": str(obs), "prescription": config.prescription,
                "n_shots": config.n_shots, "estimate": est, "stderr": err,
                "variance": var, "variance_ci": list(ci),
                "lambda_or_P": {"lambda": lam, "P": channel.purity},
                "calibration_meta": {
                    "n_traj": config.n_traj, "purity": moms.purity,
                    "purity_stderr": moms.purity_stderr, "seed": seed,
                },
                "N": int(n), "p": float(p),
            }
            results.append(report)
            spec_dir = outdir / f"records_N{n}_p{p}.txt"
            ct.write_records(spec_dir, spec, records)
    (outdir / "estimates.json").write_text(json.dumps(results, indent=1))
    return {"rows": results}


_BODIES = {
    "shadow-norms": _run_shadow_norms,
    "purify": _run_purify,
    "info-power": _run_info_power,
    "xeb": _run_xeb,
    "charge": _run_charge,
    "estimate": _run_estimate,
}


def run(config: ExperimentConfig):
    """Execute one experiment; writes outputs and returns the summary."""
    config.validate()
    outdir = Path(config.output)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    summary = _BODIES[config.experiment](config, outdir)
    wall = time.perf_counter() - t0
    payload = {
        "experiment": config.experiment,
        "config": json.loads(config.to_json()),
        "config_hash": config.hash(),
        **summary,
    }
    (outdir / "summary.json").write_text(json.dumps(payload, indent=1, sort_keys=True))
    manifest = {
        "config_hash": config.hash(),
        "code_version": __version__,
        "wall_time_s": wall,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return payload


def replay(record_file, task: str, config: ExperimentConfig):
    """Recompute snapshots or estimates from stored records.

    The record file's spec hash must match the spec derived from the
    config; outcomes are replayed in forced mode, so no new quantum
    sampling happens (the eavesdropper workflow).
    """
    n = int(config.n_list[0])
    p = float(config.p_grid[0])
    spec = config.circuit_spec(n, p)
    records = ct.read_records(record_file, spec)
    seed = _seed_for(config, "estimate", n, p)
    from .seeding import REALM_REALIZATION, REALM_SHOT, rng_at

    out = []
    for i, rec in enumerate(records):
        real = ct.realize(spec, rng_at(seed + 13, REALM_REALIZATION, i))
        if task == "log_prob":
            _, rec2 = ct.run_trajectory(real, _model_state(spec), engine=config.engine,
                                        forced=rec)
            out.append(rec2.log_prob)
        elif task == "snapshot_purity":
            sigma, _ = ct.eavesdropper_snapshot(real, rec)
            out.append(en.state_purity(sigma))
        elif task.startswith("pauli:"):
            obs = PauliString.from_str(task.split(":", 1)[1])
            snap = sh.make_snapshot(config.prescription, real, rec,
                                    rng=rng_at(seed + 13, REALM_SHOT, i))
            out.append(snap.pauli_overlap(obs))
        else:
            raise ConfigError(f"unknown replay task {task!r}")
    return out


def _write_csv(path: Path, columns, rows):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in columns})


# -- argument parsing ------------------------------------------------------------


def _parse_grid(text: str):
    """'0.1:0.5:0.05' (start:stop:step, inclusive) or '0.1,0.2,0.3'."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        n = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    return [float(x) for x in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="monitored-shadows",
        description="Monitored-circuit shadow estimation experiments",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    specs = {
        "shadow-norms": "entanglement feature sweep and Pauli shadow-norm means",
        "purify": "entropy-density purification curves",
        "info-power": "informational power of Clifford record ensembles",
        "xeb": "linear cross-entropy and its Bayesian variant",
        "charge": "charge-sharpening curves and shadow-norm bounds",
        "estimate": "calibrated Pauli estimation from collected records",
        "replay": "recompute quantities from a stored record file",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--N", default="4", help="comma-separated system sizes")
        p.add_argument("--p", default="0.2", help="rate grid start:stop:step or list")
        p.add_argument("--depth-factor", type=int, default=2)
        p.add_argument("--ensemble", default=None,
                       choices=ct.GATE_ENSEMBLES, help="gate ensemble")
        p.add_argument("--prescramble", default=None, choices=ct.PRESCRAMBLES)
        p.add_argument("--boundary", default="open", choices=ct.BOUNDARIES)
        p.add_argument("--engine", default="auto")
        p.add_argument("--ntraj", type=int, default=1000)
        p.add_argument("--nshots", type=int, default=1000)
        p.add_argument("--prescription", default="petz", choices=sh.PRESCRIPTIONS)
        p.add_argument("--observable", default="")
        p.add_argument("--times", default="", help="comma-separated checkpoints")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="results")
        if name == "replay":
            p.add_argument("--records", required=True)
            p.add_argument("--task", default="log_prob")
    return parser


_DEFAULT_ENSEMBLE = {
    "shadow-norms": "haar",
    "purify": "clifford2q",
    "info-power": "clifford2q",
    "xeb": "clifford2q",
    "charge": "u1_haar",
    "estimate": "haar",
    "replay": "haar",
}
_DEFAULT_PRESCRAMBLE = {
    "info-power": "global_clifford",
    "xeb": "global_clifford",
    "estimate": "global_clifford",
}


def config_from_args(args) -> ExperimentConfig:
    ensemble = args.ensemble or _DEFAULT_ENSEMBLE[args.experiment]
    prescramble = args.prescramble
    if prescramble is None:
        prescramble = _DEFAULT_PRESCRAMBLE.get(args.experiment, "none")
    return ExperimentConfig(
        experiment=args.experiment if args.experiment != "replay" else "estimate",
        n_list=[int(x) for x in args.N.split(",")],
        p_grid=_parse_grid(args.p),
        depth_factor=args.depth_factor,
        gate_ensemble=ensemble,
        prescramble=prescramble,
        boundary=args.boundary,
        engine=args.engine,
        n_traj=args.ntraj,
        n_shots=args.nshots,
        prescription=args.prescription,
        observable=args.observable,
        times=[int(x) for x in args.times.split(",") if x],
        master_seed=args.seed,
        output=args.out,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        if args.experiment == "replay":
            config.validate()
            values = replay(args.records, args.task, config)
            print(json.dumps({"task": args.task, "values": values}))
            return 0
        run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ResourceGuard as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return 3
    except MonitoredShadowsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Monitored brickwork circuits: specification, realization, trajectories.

A `MonitoredCircuitSpec` fixes the architecture distribution; `realize`
draws one concrete circuit (gates, measured sites, optional global
pre-scrambler) deterministically from a seed.  `run_trajectory` executes
a realization on the dense, stabilizer or Pauli-transfer engine, either
sampling measurement outcomes with Born probabilities or replaying a
forced record, and returns the final state with its `TrajectoryRecord`.

Within a layer, gates act first and measurements follow in ascending
site order (single-site Z projectors commute, so the order is fixed only
for reproducibility).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import dense as dn
from . import stabilizer as sb
from .errors import ImpossibleRecord
from .ptm import PTMState, transfer_matrix_2q
from .seeding import REALM_REALIZATION, rng_at

GATE_ENSEMBLES = ("haar", "clifford2q", "u1_haar")
PRESCRAMBLES = ("none", "global_clifford", "global_haar")
BOUNDARIES = ("open", "periodic")


@dataclass(frozen=True)
class MonitoredCircuitSpec:
    """Distribution over monitored brickwork circuits."""

    n_qubits: int
    depth: int
    measurement_rate: float
    gate_ensemble: str = "haar"
    prescramble: str = "none"
    boundary: str = "open"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.measurement_rate <= 1.0:
            raise ValueError("measurement_rate must lie in [0, 1]")
        if self.depth < 0 or self.n_qubits < 1:
            raise ValueError("need depth >= 0 and n_qubits >= 1")
        if self.gate_ensemble not in GATE_ENSEMBLES:
            raise ValueError(f"gate_ensemble must be one of {GATE_ENSEMBLES}")
        if self.prescramble not in PRESCRAMBLES:
            raise ValueError(f"prescramble must be one of {PRESCRAMBLES}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")

    def hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def brickwork_bonds(n: int, layer: int, boundary: str):
    """Bonds of one brickwork layer: even bonds on even layers."""
    start = 0 if layer % 2 == 0 else 1
    bonds = [(i, i + 1) for i in range(start, n - 1, 2)]
    if boundary == "periodic" and n % 2 == 0 and start == 1 and n > 2:
        bonds.append((n - 1, 0))
    return bonds


@dataclass
class LayerRealization:
    gates: list  # (sites, payload); payload is a 4x4 array or 2q CliffordTableau
    measured: tuple  # ascending site indices


@dataclass
class CircuitRealization:
    spec: MonitoredCircuitSpec
    layers: list
    prescrambler: object = None  # CliffordTableau | ndarray | None

    @property
    def n_events(self) -> int:
        return sum(len(l.measured) for l in self.layers)

    def event_sites(self):
        """(layer, site) pairs in execution order."""
        out = []
        for t, layer in enumerate(self.layers):
            out.extend((t, s) for s in layer.measured)
        return out


def _draw_gate(ensemble: str, rng) -> object:
    if ensemble == "haar":
        return dn.haar_unitary(4, rng)
    if ensemble == "u1_haar":
        from .charge import u1_haar_unitary

        return u1_haar_unitary(rng)
    # shared objects from the full-group enumeration: their local tables,
    # inverses and unitaries are cached once across all draws
    return sb.random_clifford_2q(rng)


def realize(spec: MonitoredCircuitSpec, rng=None) -> CircuitRealization:
    """Draw a concrete circuit; same (spec, seed) gives a bit-identical one.

    Draw order is fixed: pre-scrambler, then per layer the gates in bond
    order followed by one uniform variate per site for measurement
    placement (site measured iff u < p).
    """
    if rng is None:
        rng = rng_at(spec.seed, REALM_REALIZATION)
    n = spec.n_qubits
    prescrambler = None
    if spec.prescramble == "global_clifford":
        prescrambler = sb.random_clifford_tableau(n, rng)
    elif spec.prescramble == "global_haar":
        prescrambler = dn.haar_unitary(1 << n, rng)
    layers = []
    for t in range(spec.depth):
        gates = []
        for bond in brickwork_bonds(n, t, spec.boundary):
            gates.append((bond, _draw_gate(spec.gate_ensemble, rng)))
        u = rng.random(n)
        measured = tuple(int(s) for s in np.nonzero(u < spec.measurement_rate)[0])
        layers.append(LayerRealization(gates, measured))
    return CircuitRealization(spec, layers, prescrambler)


@dataclass
class TrajectoryRecord:
    """Outcome string of one run: (layer, site, outcome) in execution order."""

    events: list
    log_prob: float = 0.0
    input_tag: str = "fully_mixed"

    def outcomes_for(self, realization: CircuitRealization):
        """Iterator of outcomes checked against the realization's events."""
        expect = realization.event_sites()
        if len(expect) != len(self.events):
            raise ImpossibleRecord(
                f"record has {len(self.events)} events, circuit has {len(expect)}"
            )
        for (lt, ls, out), (et, es) in zip(self.events, expect):
            if (lt, ls) != (et, es):
                raise ImpossibleRecord(
                    f"record event at ({lt},{ls}) does not match circuit ({et},{es})"
                )
            yield out


# -- engine adapters -----------------------------------------------------------


class _DenseRun:
    def __init__(self, realization, input_state):
        spec = realization.spec
        n = spec.n_qubits
        if input_state == "fully_mixed":
            self.state = dn.DenseState.fully_mixed(n)
            self.mixed_input = True
        elif isinstance(input_state, dn.DenseState):
            self.state = input_state.copy()
            self.mixed_input = False
        elif isinstance(input_state, sb.StabilizerMixedState):
            self.state = dn.DenseState(n, sb.stab_state_to_dense(input_state))
            self.mixed_input = False
        else:
            raise ValueError("dense engine cannot take this input state")
        self._gate_cache = {}

    def prescramble(self, payload):
        if payload is None or self.mixed_input:
            return  # the fully mixed state is invariant under any unitary
        if isinstance(payload, np.ndarray):
            u = payload
        else:
            u = sb.tableau_unitary_cached(payload)
        self.state.matrix = u @ self.state.matrix @ u.conj().T

    def gate(self, sites, payload):
        if isinstance(payload, sb.CliffordTableau):
            u = sb.tableau_unitary_cached(payload)
            # tableau qubit 0 sits on the unitary's least significant bit,
            # while apply_unitary orders sites most-significant-first
            dn.apply_unitary(self.state, u, tuple(reversed(sites)))
            return
        dn.apply_unitary(self.state, payload, sites)

    def measure(self, site, rng=None, forced=None):
        _, outcome, prob = dn.measure_z(self.state, site, rng=rng, forced=forced)
        return outcome, prob

    def finish(self):
        return self.state


class _StabRun:
    def __init__(self, realization, input_state):
        spec = realization.spec
        if spec.gate_ensemble != "clifford2q":
            raise ValueError("stabilizer engine requires the clifford2q ensemble")
        if spec.prescramble == "global_haar":
            raise ValueError("stabilizer engine cannot apply a Haar pre-scrambler")
        n = spec.n_qubits
        if input_state == "fully_mixed":
            self.state = sb.StabilizerMixedState.fully_mixed(n)
            self.mixed_input = True
        elif isinstance(input_state, sb.StabilizerMixedState):
            self.state = input_state.copy()
            self.mixed_input = False
        else:
            raise ValueError("stabilizer engine takes tableau or fully_mixed input")

    def prescramble(self, payload):
        if payload is None or self.mixed_input:
            return
        sb.apply_tableau(self.state, payload)

    def gate(self, sites, payload):
        if not isinstance(payload, sb.CliffordTableau):
            raise ValueError("stabilizer engine got a non-Clifford gate")
        sb.apply_embedded_tableau(self.state, payload, sites)

    def measure(self, site, rng=None, forced=None):
        _, outcome, prob = sb.measure_z_stab(self.state, site, rng=rng, forced=forced)
        return outcome, prob

    def finish(self):
        return self.state


class _PTMRun:
    def __init__(self, realization, input_state):
        if input_state != "fully_mixed":
            raise ValueError("ptm engine supports fully_mixed input only")
        self.state = PTMState(realization.spec.n_qubits)
        self._gate_cache = {}

    def prescramble(self, payload):
        return  # fully mixed input is invariant

    def gate(self, sites, payload):
        if isinstance(payload, sb.CliffordTableau):
            # tableau qubit 0 = the unitary's least significant factor
            hi_first = sites[1] == max(sites)
            key = (id(payload), hi_first)
            r = self._gate_cache.get(key)
            if r is None:
                r = transfer_matrix_2q(sb.tableau_unitary_cached(payload), hi_first)
                self._gate_cache[key] = r
            self.state.apply_transfer(r, sites)
        else:
            self.state.apply_gate_unitary(payload, sites)

    def measure(self, site, rng=None, forced=None):
        return self.state.measure_z(site, rng=rng, forced=forced)

    def finish(self):
        return self.state


_ENGINES = {"dense": _DenseRun, "stabilizer": _StabRun, "ptm": _PTMRun}


def pick_engine(spec: MonitoredCircuitSpec, input_state) -> str:
    """Prefer the stabilizer engine whenever the circuit allows it."""
    stab_ok = (
        spec.gate_ensemble == "clifford2q"
        and spec.prescramble in ("none", "global_clifford")
        and (input_state == "fully_mixed" or isinstance(input_state, sb.StabilizerMixedState))
    )
    return "stabilizer" if stab_ok else "dense"


def run_trajectory(
    realization: CircuitRealization,
    input_state="fully_mixed",
    engine: str = "auto",
    rng=None,
    forced: TrajectoryRecord | None = None,
    observer=None,
):
    """Execute one trajectory of a realized circuit.

    Sample mode (rng given) draws each outcome with its Born probability;
    forced mode replays `forced` and raises `ImpossibleRecord` on a
    zero-probability event.  `record.log_prob` accumulates log p(record)
    for the given input state in both modes (log pi_m for the fully
    mixed input).  `observer(state_adapter, layer_index)` runs after each
    completed layer.
    """
    if (rng is None) == (forced is None):
        raise ValueError("pass exactly one of rng (sample) or forced (replay)")
    if engine == "auto":
        engine = pick_engine(realization.spec, input_state)
    run = _ENGINES[engine](realization, input_state)
    tag = input_state if isinstance(input_state, str) else "state"
    record = TrajectoryRecord([], 0.0, tag)
    forced_iter = iter(forced.outcomes_for(realization)) if forced is not None else None

    run.prescramble(realization.prescrambler)
    for t, layer in enumerate(realization.layers):
        for sites, payload in layer.gates:
            run.gate(sites, payload)
        for site in layer.measured:
            if forced_iter is None:
                outcome, prob = run.measure(site, rng=rng)
            else:
                outcome, prob = run.measure(site, forced=next(forced_iter))
            record.events.append((t, site, outcome))
            record.log_prob += float(np.log(prob))
        if observer is not None:
            observer(run.state, t)
    return run.finish(), record


def _dagger_payload(payload):
    if isinstance(payload, sb.CliffordTableau):
        return sb.tableau_inverse_cached(payload)
    return np.ascontiguousarray(payload.conj().T)


def adjoint_realization(realization: CircuitRealization) -> CircuitRealization:
    """The circuit implementing the adjoint Kraus factors K_m^dagger.

    With K_m = (Pi_t G_t) ... (Pi_1 G_1), the adjoint applies, for each
    original layer from last to first, the layer's measurements first and
    then its daggered gates.  Forward-evolving the fully mixed state
    through it yields the exact dual states sigma_m = E_m / Tr(E_m) of
    the record POVM (E_m = K_m^dag K_m), at the cost of a normal run.

    Encoded as 2t layers alternating (measurements only, gates only); the
    monitored part only, without the pre-scrambler.  Cached per
    realization.
    """
    cached = getattr(realization, "_adjoint", None)
    if cached is not None:
        return cached
    layers = []
    for src in reversed(realization.layers):
        layers.append(LayerRealization([], src.measured))
        layers.append(
            LayerRealization([(sites, _dagger_payload(p)) for sites, p in src.gates], ())
        )
    adj = CircuitRealization(realization.spec, layers, None)
    realization._adjoint = adj
    return adj


def record_to_adjoint(realization: CircuitRealization, record: TrajectoryRecord) -> TrajectoryRecord:
    """Re-index a record onto the adjoint realization's event coordinates."""
    t_total = len(realization.layers)
    by_event = {(t, s): o for t, s, o in record.events}
    if len(by_event) != len(record.events):
        raise ImpossibleRecord("duplicate events in record")
    events = []
    for t in range(t_total - 1, -1, -1):
        for s in realization.layers[t].measured:
            events.append((2 * (t_total - 1 - t), s, by_event[(t, s)]))
    return TrajectoryRecord(events, record.log_prob, record.input_tag)


def record_from_adjoint(realization: CircuitRealization, adj_record: TrajectoryRecord) -> TrajectoryRecord:
    """Inverse of `record_to_adjoint` (original execution-order coordinates)."""
    t_total = len(realization.layers)
    by_site = {}
    for at, s, o in adj_record.events:
        t = t_total - 1 - at // 2
        by_site[(t, s)] = o
    events = []
    for t in range(t_total):
        for s in realization.layers[t].measured:
            events.append((t, s, by_site[(t, s)]))
    return TrajectoryRecord(events, adj_record.log_prob, adj_record.input_tag)


def sample_dual_trajectory(realization: CircuitRealization, rng, engine="auto", observer=None):
    """Draw a record with probability pi_m and its exact dual state.

    Runs the adjoint circuit on the fully mixed input (record
    probabilities are the same pi_m in both pictures); the returned
    record carries original-circuit coordinates.
    """
    adj = adjoint_realization(realization)
    state, rec = run_trajectory(adj, "fully_mixed", engine=engine, rng=rng, observer=observer)
    return state, record_from_adjoint(realization, rec)


def eavesdropper_snapshot(realization: CircuitRealization, record: TrajectoryRecord, engine="auto"):
    """(sigma_m, log pi_m): the exact dual state E_m/Tr(E_m) of a record.

    Computed by forced replay of the adjoint circuit on the fully mixed
    input.  A global pre-scrambler V contributes V^dag sigma V on top of
    the monitored part returned here; that conjugation is applied by
    `shadows.make_snapshot`.
    """
    adj = adjoint_realization(realization)
    state, rec = run_trajectory(
        adj, "fully_mixed", engine=engine, forced=record_to_adjoint(realization, record)
    )
    return state, rec.log_prob


# -- record files --------------------------------------------------------------

_HEADER = "# monitored-shadows records v1"


def write_records(path, spec: MonitoredCircuitSpec, records):
    """One record per line: input tag, log_prob, and layer,site,outcome
    triples joined by ';', under a header carrying the spec hash."""
    with open(path, "w") as fh:
        fh.write(_HEADER + "\n")
        fh.write(f"# spec_hash={spec.hash()}\n")
        for rec in records:
            triples = ";".join(f"{t},{s},{o}" for t, s, o in rec.events)
            fh.write(f"{rec.input_tag}|{rec.log_prob!r}|{triples}\n")


def read_records(path, spec: MonitoredCircuitSpec | None = None):
    """Parse a record file; verifies the spec hash when a spec is given."""
    records = []
    with open(path) as fh:
        lines = [l.rstrip("\n") for l in fh]
    if not lines or lines[0] != _HEADER:
        raise ValueError(f"{path} is not a monitored-shadows record file")
    stored_hash = None
    for line in lines[1:]:
        if line.startswith("# spec_hash="):
            stored_hash = line.split("=", 1)[1]
            continue
        if not line or line.startswith("#"):
            continue
        tag, lp, triples = line.split("|")
        events = []
        if triples:
            for trip in triples.split(";"):
                t, s, o = trip.split(",")
                events.append((int(t), int(s), int(o)))
        records.append(TrajectoryRecord(events, float(lp), tag))
    if spec is not None:
        if stored_hash != spec.hash():
            raise ValueError(
                f"record file hash {stored_hash} does not match spec {spec.hash()}"
            )
    return records


def enumerate_records(realization: CircuitRealization, input_state="fully_mixed", engine="auto"):
    """All records with nonzero probability, by exhaustive forced replay.

    Yields (record, final_state); sum of exp(record.log_prob) over the
    yield is 1 by POVM completeness.  Cost grows as 2**n_events.
    """
    m = realization.n_events
    sites = realization.event_sites()
    for bits in range(1 << m):
        events = [
            (t, s, (bits >> i) & 1) for i, (t, s) in enumerate(sites)
        ]
        try:
            state, rec = run_trajectory(
                realization, input_state, engine=engine,
                forced=TrajectoryRecord(events, 0.0, "enum"),
            )
        except ImpossibleRecord:
            continue
        yield rec, state

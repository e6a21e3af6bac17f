"""The LOCC-assisted execution model.

A Protocol is a program of steps over a register: circuit chunks, single-qudit
measurements with fixed bases, and outcome-conditioned local corrections.
Running it samples one history; enumerating it explores every measurement
branch and certifies determinism (all branches agree up to a global phase)
plus, if a target is given, the fidelity to it.

The layer-exact circuit structure of each protocol is kept in a separate
Circuit object for depth accounting and validation; the program may order
commuting operations differently (ancillas created late, measured ancillas
dropped early) to keep dense states small.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import circuits as cx
from . import gates
from .lattice import Lattice
from .stabilizer import TableauState
from .statevector import EntryKey, PureState, QuditRegister

DETERMINISM_TOL = 1e-9
DEFAULT_BRANCH_CAP = 2**16
DEFAULT_PROB_FLOOR = 1e-12


class ProtocolError(RuntimeError):
    pass


class BranchCapExceeded(ProtocolError):
    pass


@dataclass
class MeasurementSpec:
    entry: EntryKey
    tag: str
    basis: Optional[np.ndarray] = None  # columns = basis vectors; None = computational
    remove: bool = True

    def __post_init__(self):
        self.entry = (int(self.entry[0]), str(self.entry[1]))


@dataclass
class ApplyLayers:
    layers: List[cx.Layer]


@dataclass
class Measure:
    spec: MeasurementSpec


@dataclass
class Correct:
    """Outcome-conditioned local correction: fn(outcomes) -> list[LocalAction]."""

    fn: Callable[[Dict[str, int]], List[cx.LocalAction]]
    name: str = "correction"


Step = Union[ApplyLayers, Measure, Correct]


@dataclass
class OutcomeRecord:
    outcomes: Tuple[Tuple[str, int, float], ...] = ()

    def as_dict(self) -> Dict[str, int]:
        return {tag: k for tag, k, _ in self.outcomes}

    def probability(self) -> float:
        p = 1.0
        for _, _, pk in self.outcomes:
            p *= pk
        return p

    def key(self) -> Tuple[int, ...]:
        return tuple(k for _, k, _ in self.outcomes)


@dataclass
class BranchReport:
    record: OutcomeRecord
    probability: float
    fidelity: float


@dataclass
class EnumerationResult:
    reports: List[BranchReport]
    deterministic: bool
    min_fidelity: float
    max_fidelity: float
    reference: object  # final state of the first branch
    finals: Optional[List[object]] = None  # all branch states when requested

    @property
    def verdict(self) -> str:
        return "DETERMINISTIC" if self.deterministic else "NOT_DETERMINISTIC"

    def total_probability(self) -> float:
        return sum(r.probability for r in self.reports)

    def to_json(self) -> str:
        return json.dumps(
            {
                "verdict": self.verdict,
                "n_branches": len(self.reports),
                "min_fidelity": self.min_fidelity,
                "max_fidelity": self.max_fidelity,
                "total_probability": self.total_probability(),
                "branches": [
                    {
                        "outcomes": [[t, k, p] for t, k, p in r.record.outcomes],
                        "probability": r.probability,
                        "fidelity": r.fidelity,
                    }
                    for r in self.reports
                ],
            }
        )


@dataclass
class Protocol:
    name: str
    lattice: Lattice
    register: List[Tuple[int, str, int]]
    program: List[Step]
    circuit: cx.Circuit
    system_entries: List[EntryKey]
    target: Optional[PureState] = None
    target_generators: Optional[list] = None  # PauliStrings over system_entries order
    clifford: bool = False

    def __post_init__(self):
        # single-shot schedule: at most one measurement per qudit
        seen = set()
        for step in self.program:
            if isinstance(step, Measure):
                key = tuple(step.spec.entry)
                if key in seen:
                    raise ProtocolError(f"entry {key} is measured more than once")
                seen.add(key)

    def n_measurements(self) -> int:
        return sum(1 for s in self.program if isinstance(s, Measure))

    def depth(self) -> int:
        return self.circuit.depth()

    def validate_circuit(self) -> List[cx.Violation]:
        return cx.validate(self.circuit, self.register)


def initial_state(protocol: Protocol, backend: str = "dense"):
    if backend == "dense":
        return PureState.product(QuditRegister(protocol.register))
    if backend == "tableau":
        if not protocol.clifford:
            raise ProtocolError(f"protocol {protocol.name!r} is not Clifford; tableau backend unavailable")
        return TableauState(protocol.register)
    raise ValueError(f"unknown backend {backend!r}")


def _apply_correction(state, actions: List[cx.LocalAction]) -> None:
    for act in actions:
        sites = {s for s, _ in act.entries}
        if act.kind == "op" and len(sites) != 1:
            raise ProtocolError("corrections must be strictly site-local")
    cx.apply_layer(state, cx.LocalLayer(actions))


def _finalize(state, protocol: Protocol):
    """Remove leftover ancillas (must be decoupled) and order the system register."""
    system = [tuple(e) for e in protocol.system_entries]
    leftover = [k for k in (state.register.keys if isinstance(state, PureState) else state.keys) if tuple(k) not in system]
    for k in leftover:
        try:
            state.remove_entry(k)
        except ValueError as exc:
            raise ProtocolError(
                f"ancilla {k} not decoupled at the end of protocol {protocol.name!r}: {exc}"
            ) from exc
    return state.permuted(system)


def _branch_fidelity(state, reference) -> float:
    if isinstance(state, PureState):
        return state.fidelity(reference)
    return 1.0 if state.states_equal(reference) else 0.0


def run_sampled(
    protocol: Protocol,
    seed: int,
    backend: str = "dense",
    input_state=None,
) -> Tuple[object, OutcomeRecord]:
    """Execute one sampled history; returns (final system state, record)."""
    rng = np.random.default_rng(seed)
    state = input_state.clone() if input_state is not None else initial_state(protocol, backend)
    outcomes: List[Tuple[str, int, float]] = []
    for step in protocol.program:
        if isinstance(step, ApplyLayers):
            for layer in step.layers:
                cx.apply_layer(state, layer)
        elif isinstance(step, Measure):
            spec = step.spec
            k, p = _measure_step(state, spec, rng=rng)
            outcomes.append((spec.tag, int(k), float(p)))
        elif isinstance(step, Correct):
            acts = step.fn({t: k for t, k, _ in outcomes})
            _apply_correction(state, acts)
        else:
            raise TypeError(f"unknown step {step!r}")
    state = _finalize(state, protocol)
    return state, OutcomeRecord(tuple(outcomes))


def _measure_step(state, spec: MeasurementSpec, force=None, rng=None):
    if spec.remove and hasattr(state, "measure_remove"):
        return state.measure_remove(spec.entry, basis=spec.basis, force=force, rng=rng)
    k, p = state.measure(spec.entry, basis=spec.basis, force=force, rng=rng)
    if spec.remove:
        state.remove_entry(spec.entry)
    return k, p


def enumerate_branches(
    protocol: Protocol,
    backend: str = "dense",
    prob_floor: float = DEFAULT_PROB_FLOOR,
    branch_cap: int = DEFAULT_BRANCH_CAP,
    input_state=None,
    target: Optional[object] = "protocol",
    keep_states: bool = False,
) -> EnumerationResult:
    """Depth-first exploration of every measurement branch above prob_floor.

    Branch fidelity is measured against the protocol target when one exists,
    otherwise against the first branch; the DETERMINISTIC verdict additionally
    requires all branches to agree with the first branch up to global phase.
    """
    if target == "protocol":
        target = protocol.target_generators if backend == "tableau" else protocol.target
    reports: List[BranchReport] = []
    finals: List[object] = []

    def walk(state, idx: int, outcomes: List[Tuple[str, int, float]], prob: float):
        for j in range(idx, len(protocol.program)):
            step = protocol.program[j]
            if isinstance(step, ApplyLayers):
                for layer in step.layers:
                    cx.apply_layer(state, layer)
            elif isinstance(step, Correct):
                acts = step.fn({t: k for t, k, _ in outcomes})
                _apply_correction(state, acts)
            elif isinstance(step, Measure):
                spec = step.spec
                probs = state.branch_probabilities(spec.entry, spec.basis)
                live = [k for k, p in enumerate(probs) if p > prob_floor]
                for pos, k in enumerate(live):
                    child = state if pos == len(live) - 1 else state.clone()
                    _, pk = _measure_step(child, spec, force=k)
                    walk(child, j + 1, outcomes + [(spec.tag, k, float(pk))], prob * pk)
                return
        if len(reports) >= branch_cap:
            raise BranchCapExceeded(f"more than {branch_cap} branches")
        final = _finalize(state, protocol)
        finals.append(final)
        reports.append(BranchReport(OutcomeRecord(tuple(outcomes)), prob, 0.0))

    state0 = input_state.clone() if input_state is not None else initial_state(protocol, backend)
    walk(state0, 0, [], 1.0)

    reference = finals[0]
    deterministic = True
    fids = []
    for st, rep in zip(finals, reports):
        agree_first = _branch_fidelity(st, reference)
        if agree_first < 1.0 - DETERMINISM_TOL:
            deterministic = False
        if target is None:
            fid = agree_first
        elif isinstance(target, PureState):
            fid = st.fidelity(target) if isinstance(st, PureState) else float("nan")
        else:  # generator list for the tableau backend
            from .stabilizer import StabilizerTableau

            tt = StabilizerTableau.from_generators(list(target))
            fid = 1.0 if st.tab.states_equal(tt) else 0.0
        rep.fidelity = float(fid)
        fids.append(float(fid))
    return EnumerationResult(
        reports, deterministic, min(fids), max(fids), reference, finals if keep_states else None
    )


# -- teleportation ------------------------------------------------------------------


def bell_rotation_ops(source: EntryKey, partner: EntryKey, d: int) -> List[cx.LocalAction]:
    """Rotate the generalized Bell basis of (source, partner) to the computational one.

    The Bell state (X^a Z^b x 1)|Phi+> is mapped to |b>_source |(-a) mod d>_partner,
    so computational outcomes (m_s, m_p) identify a = -m_p mod d and b = m_s.
    """
    if d == 2:
        return [
            cx.local_op([source, partner], [("CNOT", (0, 1)), ("H", (0,))]),
        ]
    rot = np.kron(gates.fourier(d).conj().T, np.eye(d)) @ gates.cnot_d(d)
    return [cx.local_op([source, partner], rot)]


def bell_outcome_to_pauli(m_source: int, m_partner: int, d: int) -> Tuple[int, int]:
    """(a, b) of the measured Bell state from raw computational outcomes."""
    return (-m_partner) % d, m_source % d


def teleport_correction(target: EntryKey, a: int, b: int, d: int) -> List[cx.LocalAction]:
    """Pauli-frame fix X^a Z^b on the receiving qudit."""
    corr = gates.shift_x(d, a) @ np.linalg.matrix_power(gates.clock_z(d), b)
    if d == 2:
        ops = []
        if b:
            ops.append(("Z", (0,)))
        if a:
            ops.append(("X", (0,)))
        return [cx.local_op([target], ops)] if ops else []
    return [cx.local_op([target], corr)]


def teleport(
    state: PureState,
    source: EntryKey,
    pair: Tuple[EntryKey, EntryKey],
    d: int,
    rng: Optional[np.random.Generator] = None,
    force: Optional[Tuple[int, int]] = None,
    tol: float = 1e-9,
) -> PureState:
    """Teleport the quantum content of `source` onto pair[1] (in place).

    pair must hold the maximally entangled state sum_k |kk>/sqrt(d); source
    and pair[0] are measured and removed.
    """
    e1, e2 = pair
    for e in (source, e1, e2):
        if state.register.dim(e) != d:
            raise ValueError(f"entry {e} does not have dimension {d}")
    rho = state.reduced_density([e1, e2])
    bell = gates.bell_state(d)
    if abs(np.vdot(bell, rho @ bell) - 1.0) > tol:
        raise ValueError("pair entries do not hold the maximally entangled state")
    _apply_correction(state, bell_rotation_ops(source, e1, d))
    if force is not None:
        m_s, _ = state.measure(source, force=force[0])
        m_p, _ = state.measure(e1, force=force[1])
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        m_s, _ = state.measure(source, rng=rng)
        m_p, _ = state.measure(e1, rng=rng)
    state.remove_entry(source)
    state.remove_entry(e1)
    a, b = bell_outcome_to_pauli(m_s, m_p, d)
    _apply_correction(state, teleport_correction(e2, a, b, d))
    return state


# -- channels ------------------------------------------------------------------------


@dataclass
class Ensemble:
    """Probability-weighted pure branches over a common register."""

    branches: List[Tuple[float, PureState]]

    def density_matrix(self) -> np.ndarray:
        dim = self.branches[0][1].register.total_dim
        rho = np.zeros((dim, dim), dtype=complex)
        for p, st in self.branches:
            rho += p * np.outer(st.amps, st.amps.conj())
        return rho

    def trace_distance_to_pure(self, target: PureState) -> float:
        """|| sigma - |t><t| ||_1 computed in the span of the branches and target."""
        vecs = [target.amps] + [st.amps for _, st in self.branches]
        basis: List[np.ndarray] = []
        for v in vecs:
            w = v.astype(complex).copy()
            for b in basis:
                w -= np.vdot(b, w) * b
            nw = np.linalg.norm(w)
            if nw > 1e-12:
                basis.append(w / nw)
        r = len(basis)
        coeff = np.array([[np.vdot(b, v) for b in basis] for v in vecs])  # vec x basis
        sigma = np.zeros((r, r), dtype=complex)
        for (p, _), c in zip(self.branches, coeff[1:]):
            sigma += p * np.outer(c, c.conj())
        t = coeff[0]
        diff = sigma - np.outer(t, t.conj())
        eig = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
        return float(np.sum(np.abs(eig)))


class Channel:
    """The quantum channel induced by a protocol (ancillas traced out)."""

    def __init__(self, protocol: Protocol, prob_floor: float = DEFAULT_PROB_FLOOR, branch_cap: int = DEFAULT_BRANCH_CAP):
        self.protocol = protocol
        self.prob_floor = prob_floor
        self.branch_cap = branch_cap

    def apply(self, input_state: Optional[PureState] = None) -> Ensemble:
        res = enumerate_branches(
            self.protocol,
            backend="dense",
            prob_floor=self.prob_floor,
            branch_cap=self.branch_cap,
            input_state=input_state,
            target=None,
            keep_states=True,
        )
        return Ensemble([(rep.probability, st) for rep, st in zip(res.reports, res.finals)])

    def then(self, other: "Channel") -> "ComposedChannel":
        return ComposedChannel([self, other])


class ComposedChannel:
    def __init__(self, channels: List[Channel]):
        self.channels = channels

    def apply(self, input_state: Optional[PureState] = None) -> Ensemble:
        ensembles = [(1.0, input_state)]
        for ch in self.channels:
            new: List[Tuple[float, Optional[PureState]]] = []
            for p, st in ensembles:
                out = ch.apply(st)
                for q, branch in out.branches:
                    new.append((p * q, branch))
            ensembles = new
        return Ensemble([(p, st) for p, st in ensembles])

    def then(self, other: Channel) -> "ComposedChannel":
        return ComposedChannel(self.channels + [other])


def _replay(protocol: Protocol, record: OutcomeRecord, input_state=None):
    """Re-run a specific branch by forcing its recorded outcomes."""
    state = input_state.clone() if input_state is not None else initial_state(protocol, "dense")
    forced = list(record.outcomes)
    outcomes: List[Tuple[str, int, float]] = []
    for step in protocol.program:
        if isinstance(step, ApplyLayers):
            for layer in step.layers:
                cx.apply_layer(state, layer)
        elif isinstance(step, Measure):
            tag, k, _ = forced.pop(0)
            if tag != step.spec.tag:
                raise ProtocolError("record does not match protocol schedule")
            _, p = _measure_step(state, step.spec, force=k)
            outcomes.append((tag, k, p))
        elif isinstance(step, Correct):
            _apply_correction(state, step.fn({t: k for t, k, _ in outcomes}))
    state = _finalize(state, protocol)
    return state, OutcomeRecord(tuple(outcomes))


def as_channel(protocol: Protocol, **kw) -> Channel:
    return Channel(protocol, **kw)

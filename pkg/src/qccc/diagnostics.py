"""Executable no-go criteria and the measurement-based Clifford gadget.

Three families of checks:

* factorization witness: far-separated operators must have factorizing
  expectation values in any state produced by a depth-ell circuit, so a
  nonzero residual at distance > 2 ell rules such circuits out;
* area-law audit: max-entropy across every cut, compared against a
  per-boundary-site budget;
* Choi-state unitaries: a stabilizer resource, entangled site-by-site with
  ancillas, implements a Clifford deterministically through Bell measurements
  and Pauli frame fixes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import circuits as cx
from . import gates
from .lattice import Lattice, Region, boundary, distance
from .locc import Protocol, run_sampled
from .stabilizer import (
    CliffordMap,
    GraphState,
    PauliString,
    StabilizerTableau,
    TableauState,
    to_graph_state,
)
from .statevector import EntryKey, PureState, QuditRegister, RegionOperator

# -- factorization of distant observables ------------------------------------------


@dataclass
class FactorizationReport:
    region_a: Tuple[int, ...]
    region_b: Tuple[int, ...]
    separation: int
    lhs: complex
    rhs: complex
    residual: float
    depth_claim: Optional[int] = None
    violates_depth_claim: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            "region_a": list(self.region_a),
            "region_b": list(self.region_b),
            "separation": self.separation,
            "lhs": [self.lhs.real, self.lhs.imag],
            "rhs": [self.rhs.real, self.rhs.imag],
            "residual": self.residual,
            "depth_claim": self.depth_claim,
            "violates_depth_claim": self.violates_depth_claim,
        }


def check_factorization(
    state: PureState,
    lat: Lattice,
    op_a: RegionOperator,
    op_b: RegionOperator,
    depth_claim: Optional[int] = None,
    tol: float = 1e-6,
) -> FactorizationReport:
    """Compare <X_A Y_B> with <X_A><Y_B> for operators on disjoint supports.

    A residual above tol at separation d(A, B) > 2 ell witnesses that no
    depth-ell circuit (without measurements) prepares the state.
    """
    sites_a = tuple(sorted({s for s, _ in op_a.entries}))
    sites_b = tuple(sorted({s for s, _ in op_b.entries}))
    if set(op_a.entries) & set(op_b.entries):
        raise ValueError("operators must have disjoint supports")
    sep = distance(lat, sites_a, sites_b)
    work = state.clone()
    work.apply(op_b, unitary_check=False)
    work.apply(op_a, unitary_check=False)
    lhs = complex(np.vdot(state.amps, work.amps))
    rhs = complex(state.expectation(op_a) * state.expectation(op_b))
    residual = abs(lhs - rhs)
    violates = None
    if depth_claim is not None:
        violates = bool(residual > tol and sep > 2 * depth_claim)
    return FactorizationReport(sites_a, sites_b, sep, lhs, rhs, residual, depth_claim, violates)


# -- area law ------------------------------------------------------------------------


@dataclass
class AreaLawEntry:
    region: Tuple[int, ...]
    boundary_size: int
    s0: float
    budget: float
    passes: bool


@dataclass
class AreaLawReport:
    constant: float
    depth: int
    entries: List[AreaLawEntry]

    @property
    def passes(self) -> bool:
        return all(e.passes for e in self.entries)

    @property
    def max_ratio(self) -> float:
        return max((e.s0 / e.boundary_size) for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "depth": self.depth,
            "passes": self.passes,
            "entries": [
                {
                    "region": list(e.region),
                    "boundary": e.boundary_size,
                    "s0": e.s0,
                    "budget": e.budget,
                    "passes": e.passes,
                }
                for e in self.entries
            ],
        }


def area_law_audit(
    subject,
    regions: Sequence[Sequence[int]],
    c: Optional[float] = None,
    depth: Optional[int] = None,
    lat: Optional[Lattice] = None,
    seed: int = 1,
    rank_tol: float = 1e-10,
) -> AreaLawReport:
    """Audit S0(A) <= c |dA| over the given regions.

    `subject` is a Protocol (one sampled branch is prepared; deterministic
    protocols make the branch choice irrelevant) or a PureState with `lat` and
    `depth` supplied. The default budget constant is c = 2 * depth * log2(d):
    each gate layer can add at most one cut-crossing two-qudit gate per
    boundary site.
    """
    if isinstance(subject, Protocol):
        lat = subject.lattice
        depth = subject.depth() if depth is None else depth
        state, _ = run_sampled(subject, seed=seed, backend="dense")
    else:
        state = subject
        if lat is None or depth is None:
            raise ValueError("state audits need an explicit lattice and depth")
    if c is None:
        c = 2.0 * depth * math.log2(lat.local_dim)
    entries = []
    for sites in regions:
        reg = lat.region(sites)
        _, bsize = boundary(lat, reg)
        keys = [k for k in state.register.keys if k[0] in set(reg.sites)]
        s0 = state.max_entropy(keys, rank_tol=rank_tol)
        budget = c * bsize
        entries.append(AreaLawEntry(tuple(reg.sites), bsize, s0, budget, s0 <= budget + 1e-9))
    return AreaLawReport(c, depth, entries)


# -- deterministic Clifford unitaries from stabilizer resources ------------------------


@dataclass
class CJProtocol:
    """A stabilizer resource compiled into a deterministic unitary gadget.

    The resource (on the "s" carriers) is entangled with one ancilla per site,
    producing the Choi state of a Clifford U; Bell-measuring the ancillas
    against an input register and fixing the Pauli frame applies U to the
    input, deterministically on every branch.
    """

    n: int
    resource: StabilizerTableau  # state placed on the s register (graph form)
    prep_gates: List[Tuple[str, int]]  # local gates from the raw resource to `resource`
    entangler: str  # "CZ" (graph resources) or "CNOT" (Bell-pair convention)
    u_map: CliffordMap
    graph: Optional[GraphState] = None

    def u_dense(self) -> np.ndarray:
        """Dense matrix of the implied unitary (small n): columns from the
        Choi state, U|j> = sqrt(2^n) <j|_a R. Global phase fixed so that the
        first entry of largest magnitude in column 0 is real positive."""
        r = self._choi_tableau()
        vec = r.tab.to_statevector()
        dim = 1 << self.n
        t = vec.reshape(dim, dim)  # s-block slowest: rows = s, cols = a
        u = t * math.sqrt(dim)
        col = u[:, 0]
        pivot = int(np.argmax(np.abs(col) > np.max(np.abs(col)) - 1e-9))
        u = u * (abs(col[pivot]) / col[pivot])
        return u

    def _choi_tableau(self) -> TableauState:
        ts = TableauState(
            [(k, "s", 2) for k in range(self.n)] + [(k, "a", 2) for k in range(self.n)]
        )
        ts.tab = self.resource.add_qubits(self.n)
        for k in range(self.n):
            ts.apply_named("H", [(k, "a")])
            ts.apply_named(self.entangler, [(k, "a"), (k, "s")])
        return ts

    def correction(self, outcomes: Dict[int, Tuple[int, int]]) -> PauliString:
        """w^dag for Bell outcomes {site: (m_in, m_a)}; w = U (tensor sigma) U^dag.

        The rotation CNOT(a -> in), H(a) maps the Bell state
        (X^alpha Z^beta x 1)_{a,in}|Phi+> to |beta>_a |alpha>_in, and the
        measurement inserts X^alpha Z^beta on the input carrier.
        """
        sigma = PauliString.identity(self.n)
        for k, (m_in, m_a) in outcomes.items():
            part = PauliString.identity(self.n)
            part.x[k] = m_in % 2
            part.z[k] = m_a % 2
            sigma = sigma * part
        w = self.u_map.conjugate(sigma)
        wdag = w.copy()
        wdag.phase = (-wdag.phase) % 4
        return wdag


def _extract_clifford_map(choi: TableauState, n: int) -> CliffordMap:
    """Read off U X_k U^dag and U Z_k U^dag from the Choi state's stabilizers.

    Phi+ pairs are stabilized by X_s X_a and Z_s Z_a, so R = (U x 1) Phi+ has
    group elements (U X_k U^dag)_s X_{a_k} and (U Z_k U^dag)_s Z_{a_k}; they
    are isolated by solving a GF(2) system over the generators' a-side bits.
    """
    gens = choi.tab.generators()
    m = len(gens)  # = 2n
    a_cols = np.zeros((2 * n, m), dtype=np.uint8)  # rows: a-side x bits then z bits
    for j, g in enumerate(gens):
        a_cols[:n, j] = g.x[n:]
        a_cols[n:, j] = g.z[n:]
    from .stabilizer import _gf2_solve

    def image(pauli: str, k: int) -> PauliString:
        target = np.zeros(2 * n, dtype=np.uint8)
        if pauli == "X":
            target[k] = 1
        else:
            target[n + k] = 1
        sol = _gf2_solve(a_cols, target)
        if sol is None:
            raise ValueError("resource is not maximally entangled with the ancillas")
        acc = PauliString.identity(2 * n)
        for j in range(m):
            if sol[j]:
                acc = acc * gens[j]
        # sanity: a-side must be exactly the single target Pauli
        if not (np.array_equal(acc.x[n:], target[:n]) and np.array_equal(acc.z[n:], target[n:])):
            raise AssertionError("a-side isolation failed")
        return PauliString(acc.x[:n].copy(), acc.z[:n].copy(), acc.phase)

    xs = [image("X", k) for k in range(n)]
    zs = [image("Z", k) for k in range(n)]
    return CliffordMap(xs, zs)


def build_cj_protocol(resource: StabilizerTableau) -> CJProtocol:
    """General resource path: convert to graph form, entangle with CZ."""
    gs = to_graph_state(resource)
    graph_tab = gs.tableau()
    cj = CJProtocol(
        n=resource.n,
        resource=graph_tab,
        prep_gates=list(gs.local_cliffords),
        entangler="CZ",
        u_map=CliffordMap.identity(resource.n),
        graph=gs,
    )
    cj.u_map = _extract_clifford_map(cj._choi_tableau(), resource.n)
    return cj


def ghz_unitary_cj(n: int, dagger: bool = False) -> CJProtocol:
    """The GHZ-resource construction: a phase gate on one qubit, then CNOTs
    onto |+> ancillas (ancilla = control). The implied unitary is exactly
    (1 +- i X^(x)n) / sqrt(2)."""
    from .protocols import ghz_generators

    tab = StabilizerTableau.from_generators(ghz_generators(n))
    phase = [("S", 0)] if not dagger else [("SDG", 0)]
    for name, q in phase:
        tab.apply_gate(name, q)
    cj = CJProtocol(
        n=n,
        resource=tab,
        prep_gates=list(phase),
        entangler="CNOT",
        u_map=CliffordMap.identity(n),
        graph=None,
    )
    cj.u_map = _extract_clifford_map(cj._choi_tableau(), n)
    return cj


def verify_clifford_table(cj: CJProtocol, dense_max: int = 4) -> bool:
    """Every single-site Pauli must conjugate to a Hermitian Pauli string;
    dense cross-check of the map at small sizes."""
    for k in range(cj.n):
        for p in ("X", "Y", "Z"):
            img = cj.u_map.conjugate(PauliString.single(cj.n, k, p))
            if img.phase % 2 != 0:
                return False
    if cj.n <= dense_max:
        u = cj.u_dense()
        if not gates.is_unitary(u, tol=1e-9):
            return False
        for k in range(cj.n):
            for p in ("X", "Z"):
                img = cj.u_map.conjugate(PauliString.single(cj.n, k, p))
                lhs = u @ PauliString.single(cj.n, k, p).dense() @ u.conj().T
                if np.linalg.norm(lhs - img.dense()) > 1e-8:
                    return False
    return True


def run_cj_unitary(
    cj: CJProtocol,
    input_state,
    backend: str = "dense",
    force: Optional[Sequence[Tuple[int, int]]] = None,
    seed: int = 0,
):
    """Apply the implied unitary to an input via Bell measurements + frame fix.

    input_state: PureState over entries (k, "in") for the dense backend, or a
    list of named Clifford gates preparing the input from |0...0> for the
    tableau backend. Returns the output state on the (k, "s") register.
    """
    n = cj.n
    rng = np.random.default_rng(seed)
    if backend == "dense":
        state = _cj_dense_premeasure(cj, input_state)
        outcomes = {}
        for k in range(n):
            _apply_bell_rotation(state, k)
            if force is not None:
                m_in, _ = state.measure_remove((k, "in"), force=force[k][0])
                m_a, _ = state.measure_remove((k, "a"), force=force[k][1])
            else:
                m_in, _ = state.measure_remove((k, "in"), rng=rng)
                m_a, _ = state.measure_remove((k, "a"), rng=rng)
            outcomes[k] = (m_in, m_a)
        wdag = cj.correction(outcomes)
        _apply_pauli_dense(state, wdag)
        return state.permuted([(k, "s") for k in range(n)])
    if backend == "tableau":
        ts = TableauState(
            [(k, "s", 2) for k in range(n)]
            + [(k, "a", 2) for k in range(n)]
            + [(k, "in", 2) for k in range(n)]
        )
        base = cj.resource.add_qubits(2 * n)
        ts.tab = base
        for k in range(n):
            ts.apply_named("H", [(k, "a")])
            ts.apply_named(cj.entangler, [(k, "a"), (k, "s")])
        for name, qubits in input_state or []:
            ts.apply_named(name, [(q, "in") for q in qubits])
        outcomes = {}
        for k in range(n):
            ts.apply_named("CNOT", [(k, "a"), (k, "in")])
            ts.apply_named("H", [(k, "a")])
            if force is not None:
                m_in, _ = ts.measure((k, "in"), force=force[k][0])
                m_a, _ = ts.measure((k, "a"), force=force[k][1])
            else:
                m_in, _ = ts.measure((k, "in"), rng=rng)
                m_a, _ = ts.measure((k, "a"), rng=rng)
            ts.remove_entry((k, "in"))
            ts.remove_entry((k, "a"))
            outcomes[k] = (m_in, m_a)
        wdag = cj.correction(outcomes)
        for k in range(n):
            if wdag.x[k] and wdag.z[k]:
                ts.apply_named("Y", [(k, "s")])
            elif wdag.x[k]:
                ts.apply_named("X", [(k, "s")])
            elif wdag.z[k]:
                ts.apply_named("Z", [(k, "s")])
        return ts
    raise ValueError(f"unknown backend {backend!r}")


def _cj_dense_premeasure(cj: CJProtocol, input_state: PureState) -> PureState:
    n = cj.n
    res_vec = cj.resource.to_statevector()
    reg = QuditRegister(
        [(k, "s", 2) for k in range(n)]
        + [(k, "a", 2) for k in range(n)]
        + [(k, "in", 2) for k in range(n)]
    )
    plus = np.array([1.0, 1.0]) / math.sqrt(2.0)
    a_block = plus
    for _ in range(n - 1):
        a_block = np.kron(a_block, plus)
    amps = np.kron(np.kron(res_vec, a_block), input_state.amps)
    state = PureState(reg, amps)
    for k in range(n):
        state.apply_named(cj.entangler, [(k, "a"), (k, "s")])
    return state


def _apply_bell_rotation(state: PureState, k: int) -> None:
    # source = input carrier, partner = ancilla; outcomes (m_in, m_a)
    state.apply_named("CNOT", [(k, "a"), (k, "in")])
    state.apply_named("H", [(k, "a")])


def _apply_pauli_dense(state: PureState, p: PauliString) -> None:
    for k in range(p.n):
        if p.x[k] and p.z[k]:
            state.apply_named("Y", [(k, "s")])
        elif p.x[k]:
            state.apply_named("X", [(k, "s")])
        elif p.z[k]:
            state.apply_named("Z", [(k, "s")])


def enumerate_cj_branches(
    cj: CJProtocol, input_state: PureState, reference: Optional[np.ndarray] = None
) -> Tuple[bool, float]:
    """Run every Bell-outcome pattern; returns (deterministic, min fidelity).

    Fidelity is against `reference` amplitudes when given, else against the
    first branch.
    """
    n = cj.n
    base = _cj_dense_premeasure(cj, input_state)
    for k in range(n):
        _apply_bell_rotation(base, k)
    first = None
    min_fid = 1.0
    deterministic = True
    for pattern in np.ndindex(*(4,) * n):
        st = base.clone()
        outcomes = {}
        ok = True
        for k in range(n):
            m_in, m_a = pattern[k] // 2, pattern[k] % 2
            try:
                st.measure_remove((k, "in"), force=m_in)
                st.measure_remove((k, "a"), force=m_a)
            except ValueError:
                ok = False
                break
            outcomes[k] = (m_in, m_a)
        if not ok:
            deterministic = False
            continue
        _apply_pauli_dense(st, cj.correction(outcomes))
        out = st.permuted([(k, "s") for k in range(n)])
        if reference is not None:
            fid = float(abs(np.vdot(reference, out.amps)) ** 2)
        else:
            if first is None:
                first = out.amps
                fid = 1.0
            else:
                fid = float(abs(np.vdot(first, out.amps)) ** 2)
        min_fid = min(min_fid, fid)
        if fid < 1 - 1e-9:
            deterministic = False
    return deterministic, min_fid


def graph_clifford_unitary(adjacency: np.ndarray) -> np.ndarray:
    """Dense graph-Clifford: U = sum_i Z^{i_1}...Z^{i_n} (prod_e CZ)|+...+><i|."""
    n = adjacency.shape[0]
    dim = 1 << n
    plus = np.ones(dim, dtype=complex) / math.sqrt(dim)
    graph_vec = plus.copy()
    t = graph_vec.reshape((2,) * n)
    for i in range(n):
        for j in range(i + 1, n):
            if adjacency[i, j]:
                idx = [slice(None)] * n
                idx[i] = 1
                idx[j] = 1
                t[tuple(idx)] *= -1
    graph_vec = t.reshape(-1)
    u = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        col = graph_vec.copy().reshape((2,) * n)
        for k in range(n):
            if (i >> (n - 1 - k)) & 1:
                idx = [slice(None)] * n
                idx[k] = 1
                col[tuple(idx)] *= -1
        u[:, i] = col.reshape(-1)
    return u

"""Measurement-assisted preparation protocols: GHZ, W, 1D RG fixed points,
and the toric code.

Each constructor returns a Protocol whose `circuit` field is the layer-exact
entangling circuit (its depth is asserted by tests) and whose `program` field
is the runnable step sequence. The program applies the same gates; commuting
blocks are ordered so that ancillas live only while needed, which keeps the
dense backend inside its amplitude cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import circuits as cx
from . import gates
from .lattice import Lattice
from .locc import (
    ApplyLayers,
    Correct,
    Measure,
    MeasurementSpec,
    Protocol,
    bell_outcome_to_pauli,
    teleport_correction,
)
from .stabilizer import PauliString, StabilizerTableau
from .statevector import EntryKey, PureState, QuditRegister


# -- GHZ (ring of qubits, one ancilla per site except the first) --------------------


def ghz_state(n: int) -> PureState:
    reg = QuditRegister([(i, "s", 2) for i in range(n)])
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return PureState(reg, amps)


def ghz_generators(n: int) -> List[PauliString]:
    gens = [PauliString.from_label("+" + "X" * n)]
    for i in range(n - 1):
        z = ["I"] * n
        z[i] = z[i + 1] = "Z"
        gens.append(PauliString.from_label("+" + "".join(z)))
    return gens


def ghz_protocol(n: int) -> Tuple[Protocol, PureState]:
    """GHZ_n by a depth-2 circuit, ancilla parity measurements and X-string fixes."""
    if n < 2:
        raise ValueError("GHZ protocol needs n >= 2")
    lat = Lattice((n,))
    register = [(i, "s", 2) for i in range(n)]
    system = [(i, "s") for i in range(n)]

    adds = cx.LocalLayer([cx.add_ancilla(i, "a", 2) for i in range(1, n)])
    pair_gate = [("H", (0,)), ("CNOT", (0, 1))]
    even = cx.GateLayer(
        [cx.Gate(((i, "s"), (i + 1, "a")), list(pair_gate)) for i in range(0, n - 1, 2)]
    )
    odd = cx.GateLayer(
        [cx.Gate(((i, "s"), (i + 1, "a")), list(pair_gate)) for i in range(1, n - 1, 2)]
    )
    # v|0> = |+> on the last site, then parity CNOTs; all site-local, hence free
    locals_ = cx.LocalLayer(
        [cx.local_op([(n - 1, "s")], [("Z", (0,)), ("H", (0,))])]
        + [cx.local_op([(i, "s"), (i, "a")], [("CNOT", (0, 1))]) for i in range(1, n)]
    )
    circuit = cx.Circuit(lat, [adds, even, odd, locals_])

    def correction(outcomes: Dict[str, int]) -> List[cx.LocalAction]:
        acts = []
        acc = 0
        for i in range(1, n):
            acc ^= outcomes[f"k{i}"]
            if acc:
                acts.append(cx.local_op([(i, "s")], [("X", (0,))]))
        return acts

    program = [
        ApplyLayers([adds, even, odd, locals_]),
        *[Measure(MeasurementSpec((i, "a"), f"k{i}")) for i in range(1, n)],
        Correct(correction, "parity X string"),
    ]
    from .statevector import max_amplitudes

    target = ghz_state(n) if 2**n <= max_amplitudes() else None
    proto = Protocol(
        name=f"ghz[{n}]",
        lattice=lat,
        register=register,
        program=program,
        circuit=circuit,
        system_entries=system,
        target=target,
        target_generators=ghz_generators(n),
        clifford=True,
    )
    return proto, target


# -- W state (token-passing with teleport hops) ----------------------------------------


def w_state(n: int) -> PureState:
    reg = QuditRegister([(i, "s", 2) for i in range(n)])
    amps = np.zeros(2**n, dtype=complex)
    for k in range(n):
        amps[1 << (n - 1 - k)] = 1 / np.sqrt(n)
    return PureState(reg, amps)


def w_z_sequence(n: int) -> np.ndarray:
    """z_k = 1/sqrt(n - k + 1) for k = 1..n (closed form of the recursion)."""
    return np.array([1.0 / np.sqrt(n - k + 1) for k in range(1, n + 1)])


def _w_split_gate(z: float) -> np.ndarray:
    s = np.sqrt(max(0.0, 1.0 - z * z))
    return np.array(
        [
            [1, 0, 0, 0],
            [0, z, -s, 0],
            [0, s, z, 0],
            [0, 0, 0, 1],
        ],
        dtype=complex,
    )


def _teleport_steps(
    source: EntryKey, partner: EntryKey, target: EntryKey, d: int, tag: str
) -> List:
    """Bell-rotate two co-located qudits, measure them, fix the receiver."""
    if d == 2:
        rot = cx.local_op([source, partner], [("CNOT", (0, 1)), ("H", (0,))])
    else:
        mat = np.kron(gates.fourier(d).conj().T, np.eye(d)) @ gates.cnot_d(d)
        rot = cx.local_op([source, partner], mat)

    def fix(outcomes: Dict[str, int]) -> List[cx.LocalAction]:
        a, b = bell_outcome_to_pauli(outcomes[f"{tag}s"], outcomes[f"{tag}p"], d)
        return teleport_correction(target, a, b, d)

    return [
        ApplyLayers([cx.LocalLayer([rot])]),
        Measure(MeasurementSpec(source, f"{tag}s")),
        Measure(MeasurementSpec(partner, f"{tag}p")),
        Correct(fix, f"teleport fix {tag}"),
    ]


def w_protocol(n: int) -> Tuple[Protocol, PureState]:
    """W_n via pre-shared Bell pairs, local amplitude splitters and teleport hops."""
    if n < 2:
        raise ValueError("W protocol needs n >= 2")
    lat = Lattice((n,))
    register = [(i, "s", 2) for i in range(n)]
    system = [(i, "s") for i in range(n)]
    zs = w_z_sequence(n)

    pair_gate = [("H", (0,)), ("CNOT", (0, 1))]
    adds = cx.LocalLayer(
        [cx.add_ancilla(0, "al", 2)]
        + [cx.add_ancilla(i, "ar", 2) for i in range(n)]
        + [cx.add_ancilla(i + 1, "al", 2) for i in range(n - 1)]
        + [cx.add_ancilla(n - 1, "al2", 2)]
        + [cx.local_op([(0, "s")], [("X", (0,))])]
    )
    even = cx.GateLayer(
        [cx.Gate(((i, "ar"), (i + 1, "al")), list(pair_gate)) for i in range(0, n - 1, 2)]
    )
    odd = cx.GateLayer(
        [cx.Gate(((i, "ar"), (i + 1, "al")), list(pair_gate)) for i in range(1, n - 1, 2)]
    )
    last_pair = cx.LocalLayer(
        [cx.local_op([(n - 1, "ar"), (n - 1, "al2")], list(pair_gate))]
    )
    circuit = cx.Circuit(lat, [adds, even, odd, last_pair])

    # program: one lazily built hop per site so only one Bell pair is alive at a time
    program: List = [
        ApplyLayers(
            [
                cx.LocalLayer(
                    [
                        cx.add_ancilla(0, "al", 2),
                        cx.local_op([(0, "s")], [("X", (0,))]),
                    ]
                )
            ]
        )
    ]
    for i in range(n):
        hop_target = (i + 1, "al") if i < n - 1 else (n - 1, "al2")
        steps: List[cx.LocalAction] = [
            cx.add_ancilla(i, "ar", 2),
            cx.add_ancilla(hop_target[0], hop_target[1], 2),
        ]
        layers: List[cx.Layer] = [cx.LocalLayer(steps)]
        if i < n - 1:
            layers.append(cx.GateLayer([cx.Gate(((i, "ar"), hop_target), list(pair_gate))]))
        else:
            layers.append(cx.LocalLayer([cx.local_op([(i, "ar"), hop_target], list(pair_gate))]))
        token_ops: List[cx.LocalAction] = []
        if i > 0:
            token_ops.append(cx.local_op([(i, "al"), (i, "s")], gates.swap_d(2, 2)))
        token_ops.append(cx.local_op([(i, "al"), (i, "s")], _w_split_gate(zs[i])))
        layers.append(cx.LocalLayer(token_ops))
        program.append(ApplyLayers(layers))
        program.extend(_teleport_steps((i, "al"), (i, "ar"), hop_target, 2, f"t{i}"))
    target = w_state(n)
    proto = Protocol(
        name=f"w[{n}]",
        lattice=lat,
        register=register,
        program=program,
        circuit=circuit,
        system_entries=system,
        target=target,
        clifford=False,
    )
    return proto, target


# -- RG fixed points (label/bond normal-form states on C/L/R triples) ------------------


@dataclass
class RGFixedPointSpec:
    """The target Sum_k alpha_k (x)_n |k>_{C_n} |psi_k>_{R_n, L_{n+1}} on a ring.

    bond_states may be a single (D*D,) vector shared by all k (the literal
    fixed-point form) or one vector per k (the general block case); vectors are
    indexed (r, l) with the R leg slowest.
    """

    B: int
    alphas: np.ndarray
    bond_states: Union[np.ndarray, Sequence[np.ndarray]]
    N: int
    bond_dim: int = 2

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=complex).reshape(-1)
        if self.B < 1 or len(self.alphas) != self.B:
            raise ValueError("need B >= 1 and one alpha per superposition term")
        if abs(np.linalg.norm(self.alphas) - 1.0) > 1e-10:
            raise ValueError("alphas must be l2-normalized")
        if self.N < 2:
            raise ValueError("need N >= 2 sites")
        bonds = self.bond_states
        if isinstance(bonds, np.ndarray) and bonds.ndim == 1:
            bonds = [bonds] * self.B
        bonds = [np.asarray(b, dtype=complex).reshape(-1) for b in bonds]
        if len(bonds) != self.B:
            raise ValueError("need one bond state per term (or a single shared one)")
        d2 = self.bond_dim * self.bond_dim
        for b in bonds:
            if b.size != d2:
                raise ValueError("bond states must live on C^D (x) C^D")
            if abs(np.linalg.norm(b) - 1.0) > 1e-10:
                raise ValueError("bond states must be normalized")
        self.bond_states = bonds

    @property
    def c_dim(self) -> int:
        return max(self.B, 2)


def rg_target_state(spec: RGFixedPointSpec) -> PureState:
    """Direct dense construction of the target, independent of the protocol."""
    n, ddim, cdim = spec.N, spec.bond_dim, spec.c_dim
    reg = QuditRegister(
        [(i, slot, cdim if slot == "C" else ddim) for i in range(n) for slot in ("C", "L", "R")]
    )
    dims = reg.dims
    amps = np.zeros(dims, dtype=complex)
    bonds = [b.reshape(ddim, ddim) for b in spec.bond_states]
    # bond i connects R_i with L_{i+1}; sum over all bond index assignments
    for k in range(spec.B):
        psi = bonds[k]
        for rvals in np.ndindex(*(ddim,) * n):
            for lvals in np.ndindex(*(ddim,) * n):
                c = spec.alphas[k]
                for i in range(n):
                    c = c * psi[rvals[i], lvals[(i + 1) % n]]
                if c == 0:
                    continue
                idx = []
                for i in range(n):
                    idx.extend([k, lvals[i], rvals[i]])
                amps[tuple(idx)] += c
    flat = amps.reshape(-1)
    flat = flat / np.linalg.norm(flat)
    return PureState(reg, flat)


def rg_fixed_point_protocol(spec: RGFixedPointSpec) -> Tuple[Protocol, PureState]:
    """Example-2 style preparation: bond Bell pairs, a C-register superposition,
    conditioned bond writing, and teleport hops. Gate-layer depth 4 (2 if B=1)."""
    n, ddim, cdim, bdim = spec.N, spec.bond_dim, spec.c_dim, spec.B
    lat = Lattice((n,))
    register = [
        (i, slot, cdim if slot == "C" else ddim) for i in range(n) for slot in ("C", "L", "R")
    ]
    system = [(i, slot) for i in range(n) for slot in ("C", "L", "R")]

    bell_d = gates.bell_pair_gate(ddim)
    pair_layers = [
        cx.GateLayer(
            [cx.Gate(((i, "Rp"), ((i + 1) % n, "L")), bell_d) for i in range(0, n, 2) if i < n]
        ),
        cx.GateLayer(
            [cx.Gate(((i, "Rp"), ((i + 1) % n, "L")), bell_d) for i in range(1, n, 2)]
        ),
    ]
    adds_rp = cx.LocalLayer([cx.add_ancilla(i, "Rp", ddim) for i in range(n)])
    circuit_layers: List[cx.Layer] = [adds_rp] + pair_layers

    ghz_layers: List[cx.Layer] = []
    if bdim > 1:
        prep = gates.complete_to_unitary({0: np.asarray(spec.alphas, dtype=complex)})
        if cdim > bdim:
            full = np.eye(cdim, dtype=complex)
            full[:bdim, :bdim] = prep
            prep = full
        bell_b = gates.bell_pair_gate(cdim) if cdim == bdim else _embedded_bell(cdim, bdim)
        adds_cp = cx.LocalLayer(
            [cx.add_ancilla(i, "Cp", cdim) for i in range(1, n)]
            + [cx.local_op([(n - 1, "C")], prep)]
        )
        ghz_layers = [
            adds_cp,
            cx.GateLayer(
                [cx.Gate(((i, "C"), (i + 1, "Cp")), bell_b) for i in range(0, n - 1, 2)]
            ),
            cx.GateLayer(
                [cx.Gate(((i, "C"), (i + 1, "Cp")), bell_b) for i in range(1, n - 1, 2)]
            ),
            cx.LocalLayer(
                [
                    cx.local_op([(i, "C"), (i, "Cp")], gates.cnot_d(cdim))
                    for i in range(1, n)
                ]
            ),
        ]
        circuit_layers += ghz_layers
    circuit = cx.Circuit(lat, circuit_layers)

    program: List = [ApplyLayers([adds_rp] + pair_layers)]
    if bdim > 1:
        program.append(ApplyLayers(ghz_layers))
        program.extend(
            Measure(MeasurementSpec((i, "Cp"), f"c{i}")) for i in range(1, n)
        )

        def c_fix(outcomes: Dict[str, int]) -> List[cx.LocalAction]:
            acts = []
            for i in range(n - 1):
                shift = -sum(outcomes[f"c{j}"] for j in range(i + 1, n)) % cdim
                if shift:
                    acts.append(cx.local_op([(i, "C")], gates.shift_x(cdim, shift)))
            return acts

        program.append(Correct(c_fix, "C register alignment"))

    # conditioned bond writer |k>|0>|0> -> |k>|psi_k arranged (Lp, R)>
    cols = {}
    for k in range(bdim):
        psi = spec.bond_states[k].reshape(ddim, ddim)
        vec = np.zeros(cdim * ddim * ddim, dtype=complex)
        for r in range(ddim):
            for lp in range(ddim):
                vec[(k * ddim + lp) * ddim + r] = psi[r, lp]
        cols[k * ddim * ddim] = vec
    writer = gates.complete_to_unitary(cols)
    writer_ops = cx.LocalLayer(
        [cx.add_ancilla(i, "Lp", ddim) for i in range(n)]
        + [cx.local_op([(i, "C"), (i, "Lp"), (i, "R")], writer) for i in range(n)]
    )
    program.append(ApplyLayers([writer_ops]))
    for i in range(n):
        program.extend(
            _teleport_steps((i, "Lp"), (i, "Rp"), ((i + 1) % n, "L"), ddim, f"T{i}")
        )

    target = rg_target_state(spec)
    proto = Protocol(
        name=f"rg[B={bdim},N={n}]",
        lattice=lat,
        register=register,
        program=program,
        circuit=circuit,
        system_entries=system,
        target=target,
        clifford=False,
    )
    return proto, target


def _embedded_bell(cdim: int, bdim: int) -> np.ndarray:
    """|0,0> -> sum_{k<bdim} |k,k>/sqrt(bdim) on two cdim qudits."""
    v = np.zeros(cdim * cdim, dtype=complex)
    for k in range(bdim):
        v[k * cdim + k] = 1.0 / np.sqrt(bdim)
    return gates.complete_to_unitary({0: v})


# -- toric code ------------------------------------------------------------------------


@dataclass
class ToricCodeLayout:
    """Vertex qubits on an N x N torus; A-plaquettes on the chessboard pattern."""

    N: int

    def __post_init__(self):
        if self.N < 4 or self.N % 2:
            raise ValueError("toric code layout needs even N >= 4")
        self.lattice = Lattice((self.N, self.N))

    @property
    def plaquettes_a(self) -> List[Tuple[int, int]]:
        return [(i, j) for i in range(self.N) for j in range(self.N) if (i + j) % 2 == 0]

    @property
    def plaquettes_b(self) -> List[Tuple[int, int]]:
        return [(i, j) for i in range(self.N) for j in range(self.N) if (i + j) % 2 == 1]

    def plaquette_sites(self, p: Tuple[int, int]) -> List[int]:
        i, j = p
        n = self.N
        return [
            self.lattice.site_index(((i + di) % n, (j + dj) % n))
            for di, dj in ((0, 0), (0, 1), (1, 0), (1, 1))
        ]

    def x_p(self, p: Tuple[int, int]) -> PauliString:
        sites = self.plaquette_sites(p)
        ps = PauliString.identity(self.N * self.N)
        for s in sites:
            ps.x[s] = 1
        return ps

    def plaquette_neighbors(self, p: Tuple[int, int]) -> List[Tuple[int, int]]:
        i, j = p
        n = self.N
        return [((i + di) % n, (j + dj) % n) for di in (-1, 1) for dj in (-1, 1)]

    def shared_qubit(self, p: Tuple[int, int], q: Tuple[int, int]) -> int:
        a = set(self.plaquette_sites(p))
        b = set(self.plaquette_sites(q))
        shared = a & b
        if len(shared) != 1:
            raise ValueError(f"plaquettes {p} and {q} share {len(shared)} qubits")
        return shared.pop()

    def plaquette_distance_path(
        self, start: Tuple[int, int], goal: Tuple[int, int]
    ) -> List[Tuple[int, int]]:
        """Shortest path on the A-plaquette adjacency graph (BFS)."""
        from collections import deque

        prev = {start: None}
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            if cur == goal:
                path = [cur]
                while prev[path[-1]] is not None:
                    path.append(prev[path[-1]])
                return list(reversed(path))
            for nb in self.plaquette_neighbors(cur):
                if nb not in prev:
                    prev[nb] = cur
                    queue.append(nb)
        raise RuntimeError("plaquette graph is connected; unreachable")


def find_tc_correction(layout: ToricCodeLayout, outcomes: Dict[Tuple[int, int], int]) -> List[int]:
    """Qubits whose sigma^z product flips exactly the negative plaquettes.

    Negative plaquettes are paired greedily (nearest first); each pair is joined
    by a shortest path on the plaquette adjacency graph and the shared qubit of
    every path edge is toggled. Requires prod k_p = +1.
    """
    negatives = [p for p in layout.plaquettes_a if outcomes[p] == -1]
    if len(negatives) % 2:
        raise ValueError("product of outcomes is -1; impossible measurement record")
    chosen: set = set()
    remaining = list(negatives)
    while remaining:
        p = remaining.pop(0)
        best, best_path = None, None
        for q in remaining:
            path = layout.plaquette_distance_path(p, q)
            if best_path is None or len(path) < len(best_path):
                best, best_path = q, path
        remaining.remove(best)
        for a, b in zip(best_path, best_path[1:]):
            chosen ^= {layout.shared_qubit(a, b)}
    # verify the anticommutation parity for every plaquette
    for p in layout.plaquettes_a:
        parity = sum(1 for s in layout.plaquette_sites(p) if s in chosen) % 2
        want = 1 if outcomes[p] == -1 else 0
        if parity != want:
            raise AssertionError(f"correction parity check failed at plaquette {p}")
    return sorted(chosen)


def tc_target_state(layout: ToricCodeLayout) -> PureState:
    """Dense prod_p (1 + X_p)|0...0> / norm, for N = 4 scale."""
    m = layout.N * layout.N
    reg = QuditRegister([(s, "s", 2) for s in range(m)])
    vec = np.zeros(2**m, dtype=complex)
    vec[0] = 1.0
    for p in layout.plaquettes_a:
        vec = (vec + layout.x_p(p).apply_to_vector(vec)) / np.sqrt(2)
    vec /= np.linalg.norm(vec)
    return PureState(reg, vec)


def tc_target_generators(layout: ToricCodeLayout) -> List[PauliString]:
    """Stabilizer generators of |TC> via forced X_p measurements on |0...0>."""
    m = layout.N * layout.N
    tab = StabilizerTableau(m)
    for p in layout.plaquettes_a:
        tab.measure_pauli(layout.x_p(p), force=0)
    return tab.canonical_stabilizers()


def _tc_plaquette_block(layout: ToricCodeLayout, p: Tuple[int, int]) -> Tuple[List[cx.Layer], List[cx.GateLayer]]:
    """Swap-in / local V_p / swap-out gadget for one plaquette.

    Returns (ordered layers incl. local ones, the 8 gate layers alone).
    """
    i, j = p
    n = layout.N
    lat = layout.lattice
    c = lat.site_index((i, j))
    q_ur = lat.site_index((i, (j + 1) % n))
    q_ll = lat.site_index(((i + 1) % n, j))
    q_lr = lat.site_index(((i + 1) % n, (j + 1) % n))
    swap = [("SWAP", (0, 1))]
    g = [
        cx.GateLayer([cx.Gate(((q_ur, "s"), (c, "q1")), list(swap))]),
        cx.GateLayer([cx.Gate(((q_ll, "s"), (c, "q2")), list(swap))]),
        cx.GateLayer([cx.Gate(((q_lr, "s"), (q_ll, "h")), list(swap))]),
        cx.GateLayer([cx.Gate(((q_ll, "h"), (c, "q3")), list(swap))]),
        cx.GateLayer([cx.Gate(((c, "q3"), (q_ll, "h")), list(swap))]),
        cx.GateLayer([cx.Gate(((q_ll, "h"), (q_lr, "s")), list(swap))]),
        cx.GateLayer([cx.Gate(((c, "q2"), (q_ll, "s")), list(swap))]),
        cx.GateLayer([cx.Gate(((c, "q1"), (q_ur, "s")), list(swap))]),
    ]
    adds = cx.LocalLayer(
        [
            cx.add_ancilla(c, "ap", 2),
            cx.add_ancilla(c, "q1", 2),
            cx.add_ancilla(c, "q2", 2),
            cx.add_ancilla(c, "q3", 2),
            cx.add_ancilla(q_ll, "h", 2),
        ]
    )
    vp = cx.LocalLayer(
        [
            cx.local_op(
                [(c, "ap"), (c, "s"), (c, "q1"), (c, "q2"), (c, "q3")],
                [
                    ("H", (0,)),
                    ("CNOT", (0, 1)),
                    ("CNOT", (0, 2)),
                    ("CNOT", (0, 3)),
                    ("CNOT", (0, 4)),
                    ("H", (0,)),
                ],
            )
        ]
    )
    removes = cx.LocalLayer(
        [
            cx.remove_ancilla(c, "q1"),
            cx.remove_ancilla(c, "q2"),
            cx.remove_ancilla(c, "q3"),
            cx.remove_ancilla(q_ll, "h"),
        ]
    )
    ordered = [adds, g[0], g[1], g[2], g[3], vp, g[4], g[5], g[6], g[7], removes]
    return ordered, g


def toric_code_protocol(n: int) -> Tuple[Protocol, Optional[PureState]]:
    """|0...0> -> |TC> with depth-16 nearest-neighbor gates plus LOCC.

    The dense target state is attached for N = 4; larger sizes certify against
    the stabilizer generators on the tableau backend.
    """
    layout = ToricCodeLayout(n)
    lat = layout.lattice
    m = n * n
    register = [(s, "s", 2) for s in range(m)]
    system = [(s, "s") for s in range(m)]

    wave1 = [p for p in layout.plaquettes_a if p[0] % 2 == 0]
    wave2 = [p for p in layout.plaquettes_a if p[0] % 2 == 1]

    # layer-exact circuit: two waves of eight parallel gate layers each
    circuit_layers: List[cx.Layer] = []
    for wave in (wave1, wave2):
        blocks = [_tc_plaquette_block(layout, p) for p in wave]
        circuit_layers.append(
            cx.LocalLayer([a for ordered, _ in blocks for a in ordered[0].actions])
        )
        for li in range(4):
            circuit_layers.append(
                cx.GateLayer([g for _, gl in blocks for g in gl[li].gates])
            )
        circuit_layers.append(
            cx.LocalLayer([a for ordered, _ in blocks for a in ordered[5].actions])
        )
        for li in range(4, 8):
            circuit_layers.append(
                cx.GateLayer([g for _, gl in blocks for g in gl[li].gates])
            )
        circuit_layers.append(
            cx.LocalLayer([a for ordered, _ in blocks for a in ordered[10].actions])
        )
    circuit = cx.Circuit(lat, circuit_layers)

    # program: plaquette blocks in wave order, each measured and dropped right away
    program: List = []
    for p in wave1 + wave2:
        ordered, _ = _tc_plaquette_block(layout, p)
        program.append(ApplyLayers(ordered))
        corner = lat.site_index(p)
        program.append(Measure(MeasurementSpec((corner, "ap"), f"k{p[0]},{p[1]}")))

    def correction(outcomes: Dict[str, int]) -> List[cx.LocalAction]:
        signs = {p: 1 - 2 * outcomes[f"k{p[0]},{p[1]}"] for p in layout.plaquettes_a}
        flips = find_tc_correction(layout, signs)
        return [cx.local_op([(s, "s")], [("Z", (0,))]) for s in flips]

    program.append(Correct(correction, "plaquette sign fix"))

    target = tc_target_state(layout) if n == 4 else None
    proto = Protocol(
        name=f"tc[{n}]",
        lattice=lat,
        register=register,
        program=program,
        circuit=circuit,
        system_entries=system,
        target=target,
        target_generators=tc_target_generators(layout),
        clifford=True,
    )
    return proto, target

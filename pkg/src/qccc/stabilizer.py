"""Binary-symplectic stabilizer tableau backend (Aaronson-Gottesman style).

Pauli strings use the Y convention: bits (x, z) = (1, 1) denote Y, and a
string is i^phase * (tensor of I/X/Y/Z). Stabilizer generators are kept
Hermitian with phase in {0, 2} (plus / minus).

The tableau stores n destabilizers followed by n stabilizers, giving O(n^2)
measurements. Qubits can be appended freely and removed again once they are
decoupled, which is what LOCC protocols need when they discard measured
ancillas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

_PAULI_CHARS = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_CHAR_BITS = {c: b for b, c in _PAULI_CHARS.items()}


def _g_exponent(x1, z1, x2, z2):
    """Exponent of i when multiplying single-qubit Paulis (CHP convention)."""
    if x1 == 0 and z1 == 0:
        return 0
    if x1 == 1 and z1 == 1:
        return int(z2) - int(x2)
    if x1 == 1 and z1 == 0:
        return int(z2) * (2 * int(x2) - 1)
    return int(x2) * (1 - 2 * int(z2))


def _g_exponent_sum(x1, z1, x2, z2) -> int:
    """Vectorized sum of the i-exponents over all qubits."""
    x1 = x1.astype(np.int64)
    z1 = z1.astype(np.int64)
    x2 = x2.astype(np.int64)
    z2 = z2.astype(np.int64)
    y_case = (x1 & z1) * (z2 - x2)
    x_case = (x1 & (1 - z1)) * (z2 * (2 * x2 - 1))
    z_case = ((1 - x1) & z1) * (x2 * (1 - 2 * z2))
    return int(np.sum(y_case + x_case + z_case))


@dataclass
class PauliString:
    """i^phase times a tensor product of Paulis on n qubits."""

    x: np.ndarray
    z: np.ndarray
    phase: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.uint8) % 2
        self.z = np.asarray(self.z, dtype=np.uint8) % 2
        if self.x.shape != self.z.shape:
            raise ValueError("x and z bit vectors must have equal length")
        self.phase = int(self.phase) % 4

    @property
    def n(self) -> int:
        return self.x.size

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(np.zeros(n, dtype=np.uint8), np.zeros(n, dtype=np.uint8), 0)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse e.g. '+XZI', '-Y', 'iXX', '-iZZ'."""
        phase = 0
        s = label
        if s.startswith("+"):
            s = s[1:]
        elif s.startswith("-"):
            phase = 2
            s = s[1:]
        if s.startswith("i"):
            phase = (phase + 1) % 4
            s = s[1:]
        bits = [_CHAR_BITS[c] for c in s]
        x = np.array([b[0] for b in bits], dtype=np.uint8)
        z = np.array([b[1] for b in bits], dtype=np.uint8)
        return cls(x, z, phase)

    @classmethod
    def single(cls, n: int, qubit: int, pauli: str) -> "PauliString":
        p = cls.identity(n)
        xb, zb = _CHAR_BITS[pauli]
        p.x[qubit] = xb
        p.z[qubit] = zb
        return p

    def label(self) -> str:
        prefix = {0: "+", 1: "+i", 2: "-", 3: "-i"}[self.phase]
        return prefix + "".join(
            _PAULI_CHARS[(int(a), int(b))] for a, b in zip(self.x, self.z)
        )

    def copy(self) -> "PauliString":
        return PauliString(self.x.copy(), self.z.copy(), self.phase)

    def commutes(self, other: "PauliString") -> bool:
        sp = int(np.sum(self.x * other.z) + np.sum(self.z * other.x)) % 2
        return sp == 0

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ValueError("length mismatch")
        extra = _g_exponent_sum(self.x, self.z, other.x, other.z)
        phase = (self.phase + other.phase + extra) % 4
        return PauliString(self.x ^ other.x, self.z ^ other.z, phase)

    def support(self) -> Tuple[int, ...]:
        return tuple(int(k) for k in np.nonzero(self.x | self.z)[0])

    def dense(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix (small n only)."""
        from . import gates

        m = np.array([[1.0 + 0j]])
        for xb, zb in zip(self.x, self.z):
            p = gates.named_gate(_PAULI_CHARS[(int(xb), int(zb))])
            m = np.kron(m, p)
        return (1j**self.phase) * m

    def apply_to_vector(self, vec: np.ndarray) -> np.ndarray:
        """Apply to a dense 2^n amplitude vector, qubit 0 slowest-varying."""
        n = self.n
        dim = 1 << n
        idx = np.arange(dim, dtype=np.int64)
        xmask = 0
        zmask = 0
        for k in range(n):
            bitpos = n - 1 - k
            if self.x[k]:
                xmask |= 1 << bitpos
            if self.z[k]:
                zmask |= 1 << bitpos
        ny = int(np.sum(self.x & self.z))
        signs = (-1.0) ** _popcount64(idx & zmask)
        out = np.zeros(dim, dtype=complex)
        out[idx ^ xmask] = (1j ** ((self.phase + ny) % 4)) * signs * vec
        return out


def _popcount64(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a).astype(np.int64)


class StabilizerTableau:
    """CHP tableau: rows 0..n-1 destabilizers, rows n..2n-1 stabilizers."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one qubit")
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.r = np.zeros(2 * n, dtype=np.uint8)  # phase exponent mod 4
        for i in range(n):
            self.x[i, i] = 1
            self.z[n + i, i] = 1

    # -- bookkeeping ---------------------------------------------------------

    def copy(self) -> "StabilizerTableau":
        t = StabilizerTableau.__new__(StabilizerTableau)
        t.n = self.n
        t.x = self.x.copy()
        t.z = self.z.copy()
        t.r = self.r.copy()
        return t

    def stabilizer(self, i: int) -> PauliString:
        return PauliString(self.x[self.n + i].copy(), self.z[self.n + i].copy(), int(self.r[self.n + i]))

    def destabilizer(self, i: int) -> PauliString:
        return PauliString(self.x[i].copy(), self.z[i].copy(), int(self.r[i]))

    def generators(self) -> List[PauliString]:
        return [self.stabilizer(i) for i in range(self.n)]

    def to_text(self) -> str:
        return "\n".join(g.label() for g in self.generators())

    @classmethod
    def from_text(cls, text: str) -> "StabilizerTableau":
        gens = [PauliString.from_label(line.strip()) for line in text.strip().splitlines()]
        return cls.from_generators(gens)

    def _rowmult(self, h: int, i: int) -> None:
        """row_h <- row_h * row_i with phase tracking."""
        extra = _g_exponent_sum(self.x[h], self.z[h], self.x[i], self.z[i])
        self.r[h] = (int(self.r[h]) + int(self.r[i]) + extra) % 4
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]

    # -- gates ----------------------------------------------------------------

    def apply_gate(self, name: str, *qubits: int) -> "StabilizerTableau":
        for q in qubits:
            if not 0 <= q < self.n:
                raise ValueError(f"qubit {q} out of range")
        name = name.upper()
        x, z, r = self.x, self.z, self.r
        if name == "H":
            (q,) = qubits
            r += 2 * (x[:, q] & z[:, q])
            x[:, q], z[:, q] = z[:, q].copy(), x[:, q].copy()
        elif name == "S":
            (q,) = qubits
            r += 2 * (x[:, q] & z[:, q])
            z[:, q] ^= x[:, q]
        elif name == "SDG":
            (q,) = qubits
            self.apply_gate("S", q)
            self.apply_gate("S", q)
            self.apply_gate("S", q)
            return self
        elif name == "X":
            (q,) = qubits
            r += 2 * z[:, q]
        elif name == "Z":
            (q,) = qubits
            r += 2 * x[:, q]
        elif name == "Y":
            (q,) = qubits
            r += 2 * (x[:, q] ^ z[:, q])
        elif name == "CNOT":
            a, b = qubits
            if a == b:
                raise ValueError("CNOT requires distinct qubits")
            r += 2 * (x[:, a] & z[:, b] & (x[:, b] ^ z[:, a] ^ 1))
            x[:, b] ^= x[:, a]
            z[:, a] ^= z[:, b]
        elif name == "CZ":
            a, b = qubits
            if a == b:
                raise ValueError("CZ requires distinct qubits")
            r += 2 * (x[:, a] & x[:, b] & (z[:, a] ^ z[:, b]))
            z[:, a] ^= x[:, b]
            z[:, b] ^= x[:, a]
        elif name == "SWAP":
            a, b = qubits
            x[:, [a, b]] = x[:, [b, a]]
            z[:, [a, b]] = z[:, [b, a]]
        else:
            raise ValueError(f"gate {name!r} is not a supported Clifford primitive")
        self.r %= 4
        return self

    # -- measurement -----------------------------------------------------------

    def measure_z(
        self,
        q: int,
        force: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[int, float, bool]:
        """Measure Z on qubit q. Returns (outcome bit, probability, deterministic)."""
        return self.measure_pauli(PauliString.single(self.n, q, "Z"), force=force, rng=rng)

    def measure_pauli(
        self,
        p: PauliString,
        force: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[int, float, bool]:
        """Measure a Hermitian Pauli observable: outcome bit 0 <-> +1 eigenvalue."""
        if p.n != self.n:
            raise ValueError("length mismatch")
        if p.phase % 2 != 0:
            raise ValueError("measured Pauli must be Hermitian")
        sym = (
            self.x.astype(np.int64) @ p.z.astype(np.int64)
            + self.z.astype(np.int64) @ p.x.astype(np.int64)
        ) % 2
        anti = list(np.nonzero(sym)[0])
        anti_stab = [i for i in anti if i >= self.n]
        if anti_stab:
            pivot = anti_stab[0]
            for i in anti:
                if i != pivot:
                    self._rowmult(i, pivot)
            # pivot stabilizer row becomes +/- P; old row becomes its destabilizer
            d = pivot - self.n
            self.x[d] = self.x[pivot].copy()
            self.z[d] = self.z[pivot].copy()
            self.r[d] = self.r[pivot]
            if force is not None:
                bit = int(force)
            else:
                if rng is None:
                    raise ValueError("sampled measurement requires an rng")
                bit = int(rng.integers(0, 2))
            self.x[pivot] = p.x.copy()
            self.z[pivot] = p.z.copy()
            self.r[pivot] = (p.phase + (2 if bit else 0)) % 4
            return bit, 0.5, False
        # deterministic: accumulate stabilizer rows flagged by anticommuting destabilizers
        scratch = PauliString.identity(self.n)
        for i in np.nonzero(sym[: self.n])[0]:
            scratch = scratch * self.stabilizer(int(i))
        if not (np.array_equal(scratch.x, p.x) and np.array_equal(scratch.z, p.z)):
            raise AssertionError("deterministic measurement did not reproduce the Pauli")
        bit = 0 if scratch.phase == p.phase else 1
        if force is not None and int(force) != bit:
            raise ValueError(f"forced outcome {force} has probability 0")
        return bit, 1.0, True

    # -- structure ---------------------------------------------------------------

    @classmethod
    def from_generators(cls, gens: Sequence[PauliString]) -> "StabilizerTableau":
        """Build a tableau from n independent commuting Hermitian generators."""
        n = gens[0].n
        if len(gens) != n:
            raise ValueError(f"need exactly {n} generators, got {len(gens)}")
        for g in gens:
            if g.n != n:
                raise ValueError("generator length mismatch")
            if g.phase % 2 != 0:
                raise ValueError("generator phases must be +/-1")
        for i in range(n):
            for j in range(i + 1, n):
                if not gens[i].commutes(gens[j]):
                    raise ValueError(f"generators {i} and {j} anticommute")
        g_mat = np.zeros((n, 2 * n), dtype=np.uint8)
        for i, g in enumerate(gens):
            g_mat[i, :n] = g.x
            g_mat[i, n:] = g.z
        if _gf2_rank(g_mat) != n:
            raise ValueError("generators are not independent over GF(2)")
        # destabilizers: solve <d_i, g_j> = delta_ij, then orthogonalize pairwise
        a = np.zeros((n, 2 * n), dtype=np.uint8)
        a[:, :n] = g_mat[:, n:]  # z parts multiply vx
        a[:, n:] = g_mat[:, :n]  # x parts multiply vz
        sols = _gf2_solve_many(a, np.eye(n, dtype=np.uint8))
        if sols is None:
            raise ValueError("failed to construct destabilizers")
        destab_bits = [sols[:, i].copy() for i in range(n)]
        for i in range(1, n):
            done = np.array(destab_bits[:i])  # i x 2n
            sp = (
                done[:, n:].astype(np.int64) @ destab_bits[i][:n].astype(np.int64)
                + done[:, :n].astype(np.int64) @ destab_bits[i][n:].astype(np.int64)
            ) % 2
            for j in np.nonzero(sp)[0]:
                destab_bits[i] ^= g_mat[int(j)]
        tab = cls.__new__(cls)
        tab.n = n
        tab.x = np.zeros((2 * n, n), dtype=np.uint8)
        tab.z = np.zeros((2 * n, n), dtype=np.uint8)
        tab.r = np.zeros(2 * n, dtype=np.uint8)
        for i in range(n):
            tab.x[i] = destab_bits[i][:n]
            tab.z[i] = destab_bits[i][n:]
            tab.x[n + i] = gens[i].x
            tab.z[n + i] = gens[i].z
            tab.r[n + i] = gens[i].phase
        return tab

    def canonical_stabilizers(self) -> List[PauliString]:
        """Row-reduced echelon form of the stabilizer group (deterministic)."""
        rows = [self.stabilizer(i) for i in range(self.n)]
        rank = 0
        for col in range(2 * self.n):
            def bit(p: PauliString) -> int:
                return int(p.x[col]) if col < self.n else int(p.z[col - self.n])

            pivot = next((i for i in range(rank, len(rows)) if bit(rows[i])), None)
            if pivot is None:
                continue
            rows[rank], rows[pivot] = rows[pivot], rows[rank]
            for i in range(len(rows)):
                if i != rank and bit(rows[i]):
                    rows[i] = rows[i] * rows[rank]
            rank += 1
            if rank == len(rows):
                break
        return rows

    def states_equal(self, other: "StabilizerTableau") -> bool:
        if self.n != other.n:
            raise ValueError("qubit count mismatch")
        a = self.canonical_stabilizers()
        b = other.canonical_stabilizers()
        for ga, gb in zip(a, b):
            if not (
                np.array_equal(ga.x, gb.x)
                and np.array_equal(ga.z, gb.z)
                and ga.phase == gb.phase
            ):
                return False
        return True

    def add_qubits(self, k: int) -> "StabilizerTableau":
        """Append k fresh qubits in |0>, returning a new tableau."""
        n2 = self.n + k
        t = StabilizerTableau(n2)
        t.x[:] = 0
        t.z[:] = 0
        t.r[:] = 0
        t.x[: self.n, : self.n] = self.x[: self.n]
        t.z[: self.n, : self.n] = self.z[: self.n]
        t.r[: self.n] = self.r[: self.n]
        t.x[n2 : n2 + self.n, : self.n] = self.x[self.n :]
        t.z[n2 : n2 + self.n, : self.n] = self.z[self.n :]
        t.r[n2 : n2 + self.n] = self.r[self.n :]
        for j in range(k):
            t.x[self.n + j, self.n + j] = 1
            t.z[n2 + self.n + j, self.n + j] = 1
        return t

    def remove_qubit(self, q: int) -> "StabilizerTableau":
        """Drop a decoupled qubit, returning a new tableau on n-1 qubits."""
        gens = [self.stabilizer(i) for i in range(self.n)]
        # reduce the (x_q, z_q) column pair to at most two pivot generators
        pivot_x = next((i for i, g in enumerate(gens) if g.x[q]), None)
        if pivot_x is not None:
            for i, g in enumerate(gens):
                if i != pivot_x and g.x[q]:
                    gens[i] = g * gens[pivot_x]
        pivot_z = next(
            (i for i, g in enumerate(gens) if i != pivot_x and g.z[q]), None
        )
        if pivot_z is not None:
            for i, g in enumerate(gens):
                if i != pivot_z and g.z[q]:
                    gens[i] = g * gens[pivot_z]
        pivots = [i for i in (pivot_x, pivot_z) if i is not None]
        if len(pivots) == 2:
            raise ValueError(f"qubit {q} is entangled; cannot remove")
        if len(pivots) == 0:
            raise AssertionError("no stabilizer acts on the qubit")
        gq = gens[pivots[0]]
        others = [g for i, g in enumerate(gens) if i != pivots[0]]
        # reduce gq's support outside q against the other generators (GF(2) echelon)
        cols = [k for k in range(self.n) if k != q]
        work = [g.copy() for g in others]
        rank = 0
        for c in cols:
            for part in ("x", "z"):
                def bit(p, c=c, part=part):
                    return int(p.x[c]) if part == "x" else int(p.z[c])

                pivot = next((i for i in range(rank, len(work)) if bit(work[i])), None)
                if pivot is None:
                    continue
                work[rank], work[pivot] = work[pivot], work[rank]
                for i in range(len(work)):
                    if i != rank and bit(work[i]):
                        work[i] = work[i] * work[rank]
                if bit(gq):
                    gq = gq * work[rank]
                rank += 1
        if any((gq.x[k] or gq.z[k]) for k in cols):
            raise ValueError(f"qubit {q} is entangled; cannot remove")
        keep = np.array(cols, dtype=int)
        new_gens = [PauliString(p.x[keep], p.z[keep], p.phase) for p in work]
        return StabilizerTableau.from_generators(new_gens)

    def to_statevector(self, seed: int = 7) -> np.ndarray:
        """Dense amplitude vector (2^n), qubit 0 slowest-varying. Small n only."""
        if self.n > 20:
            raise ValueError("dense conversion capped at 20 qubits")
        dim = 1 << self.n
        rng = np.random.default_rng(seed)
        for attempt in range(8):
            v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
            for g in self.generators():
                v = 0.5 * (v + g.apply_to_vector(v))
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                return v / nv
        raise RuntimeError("failed to project onto the stabilizer state")


# -- GF(2) helpers -------------------------------------------------------------


def _gf2_rank(mat: np.ndarray) -> int:
    m = (mat.copy() % 2).astype(np.uint8)
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        hits = np.nonzero(m[rank:, c])[0]
        if hits.size == 0:
            continue
        pivot = rank + int(hits[0])
        if pivot != rank:
            m[[rank, pivot]] = m[[pivot, rank]]
        mask = m[:, c].copy().astype(bool)
        mask[rank] = False
        m[mask] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _gf2_solve_many(a: np.ndarray, b: np.ndarray) -> Optional[np.ndarray]:
    """Solutions V of A V = B over GF(2) (one column per RHS), or None."""
    rows, cols = a.shape
    b = (b % 2).astype(np.uint8)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    n_rhs = b.shape[1]
    m = np.concatenate([a.copy().astype(np.uint8) % 2, b], axis=1)
    pivot_cols = []
    rank = 0
    for c in range(cols):
        hits = np.nonzero(m[rank:, c])[0]
        if hits.size == 0:
            continue
        pivot = rank + int(hits[0])
        if pivot != rank:
            m[[rank, pivot]] = m[[pivot, rank]]
        mask = m[:, c].copy().astype(bool)
        mask[rank] = False
        m[mask] ^= m[rank]
        pivot_cols.append(c)
        rank += 1
        if rank == rows:
            break
    if rank < rows and m[rank:, cols:].any():
        return None
    v = np.zeros((cols, n_rhs), dtype=np.uint8)
    for r, c in enumerate(pivot_cols):
        v[c] = m[r, cols:]
    return v


def _gf2_solve(a: np.ndarray, b: np.ndarray) -> Optional[np.ndarray]:
    """One solution of A v = b over GF(2), or None."""
    v = _gf2_solve_many(a, b.reshape(-1, 1))
    return None if v is None else v[:, 0]


# -- graph states ----------------------------------------------------------------


@dataclass
class GraphState:
    """Adjacency matrix plus the per-site local Cliffords reaching graph form."""

    adjacency: np.ndarray
    local_cliffords: List[Tuple[str, int]]

    def tableau(self) -> StabilizerTableau:
        n = self.adjacency.shape[0]
        gens = []
        for v in range(n):
            x = np.zeros(n, dtype=np.uint8)
            z = np.zeros(n, dtype=np.uint8)
            x[v] = 1
            z[:] = self.adjacency[v] % 2
            gens.append(PauliString(x, z, 0))
        return StabilizerTableau.from_generators(gens)


def to_graph_state(tab: StabilizerTableau) -> GraphState:
    """Local-Clifford reduction of a stabilizer state to canonical graph form.

    Returns the adjacency matrix and the gate list (applied in order) that maps
    the input state to the graph state. Deterministic: pivots take the lowest
    available row, Hadamard fixes are used for rank repair, S for Y diagonals.
    """
    n = tab.n
    rows = [tab.stabilizer(i) for i in range(n)]
    applied: List[Tuple[str, int]] = []

    def conj_gate(name: str, q: int):
        for p in rows:
            if name == "H":
                if p.x[q] and p.z[q]:
                    p.phase = (p.phase + 2) % 4
                p.x[q], p.z[q] = p.z[q], p.x[q]
            elif name == "S":
                if p.x[q] and p.z[q]:
                    p.phase = (p.phase + 2) % 4
                p.z[q] ^= p.x[q]
            elif name == "Z":
                if p.x[q]:
                    p.phase = (p.phase + 2) % 4
            else:
                raise AssertionError(name)
        applied.append((name, q))

    for col in range(n):
        pivot = next((i for i in range(col, n) if rows[i].x[col]), None)
        if pivot is None:
            zrow = next((i for i in range(col, n) if rows[i].z[col]), None)
            if zrow is None:
                raise AssertionError("invalid tableau: empty pivot column")
            conj_gate("H", col)
            pivot = next(i for i in range(col, n) if rows[i].x[col])
        rows[col], rows[pivot] = rows[pivot], rows[col]
        for i in range(n):
            if i != col and rows[i].x[col]:
                rows[i] = rows[i] * rows[col]
    for q in range(n):
        if rows[q].z[q]:
            conj_gate("S", q)
    for q in range(n):
        if rows[q].phase == 2:
            conj_gate("Z", q)
    adj = np.zeros((n, n), dtype=np.uint8)
    for v in range(n):
        if rows[v].phase != 0:
            raise AssertionError("graph reduction left a nontrivial phase")
        adj[v] = rows[v].z
        if adj[v, v]:
            raise AssertionError("graph reduction left a diagonal entry")
    if not np.array_equal(adj, adj.T):
        raise AssertionError("graph adjacency not symmetric")
    return GraphState(adj, applied)


# -- Clifford maps (symbolic conjugation) ------------------------------------------


class CliffordMap:
    """A Clifford unitary U represented by the images U P U^dag of X_k and Z_k."""

    def __init__(self, x_images: Sequence[PauliString], z_images: Sequence[PauliString]):
        self.n = len(x_images)
        self.x_images = [p.copy() for p in x_images]
        self.z_images = [p.copy() for p in z_images]

    @classmethod
    def identity(cls, n: int) -> "CliffordMap":
        return cls(
            [PauliString.single(n, k, "X") for k in range(n)],
            [PauliString.single(n, k, "Z") for k in range(n)],
        )

    @classmethod
    def from_gates(cls, n: int, circuit: Iterable[Tuple[str, Tuple[int, ...]]]) -> "CliffordMap":
        m = cls.identity(n)
        for name, qubits in circuit:
            m = m.then_gate(name, *qubits)
        return m

    def then_gate(self, name: str, *qubits: int) -> "CliffordMap":
        """Compose with a named Clifford applied after this map."""
        out = CliffordMap(self.x_images, self.z_images)
        for imgs in (out.x_images, out.z_images):
            for p in imgs:
                _conjugate_inplace(p, name, qubits)
        return out

    def conjugate(self, p: PauliString) -> "PauliString":
        """U p U^dag for an arbitrary Pauli string."""
        if p.n != self.n:
            raise ValueError("length mismatch")
        out = PauliString.identity(self.n)
        out.phase = p.phase
        for k in range(self.n):
            if p.x[k]:
                out = out * self.x_images[k]
            if p.z[k]:
                out = out * self.z_images[k]
            if p.x[k] and p.z[k]:
                # (x,z)=(1,1) denotes Y = i X Z
                out.phase = (out.phase + 1) % 4
        return out

    def inverse(self) -> "CliffordMap":
        """Symplectic inverse: images of X_k, Z_k under U^dag . U."""
        n = self.n
        # build the 2n x 2n GF(2) matrix of the map on (x|z) bit vectors
        basis_imgs = self.x_images + self.z_images
        mat = np.zeros((2 * n, 2 * n), dtype=np.uint8)
        for j, img in enumerate(basis_imgs):
            mat[: n, j] = img.x
            mat[n:, j] = img.z
        inv_x = []
        inv_z = []
        for k in range(n):
            target = np.zeros(2 * n, dtype=np.uint8)
            target[k] = 1
            sol = _gf2_solve(mat, target)
            inv_x.append(self._build_preimage(sol))
        for k in range(n):
            target = np.zeros(2 * n, dtype=np.uint8)
            target[n + k] = 1
            sol = _gf2_solve(mat, target)
            inv_z.append(self._build_preimage(sol))
        return CliffordMap(inv_x, inv_z)

    def _build_preimage(self, sol: np.ndarray) -> PauliString:
        n = self.n
        pre = PauliString.identity(n)
        img = PauliString.identity(n)
        for k in range(n):
            if sol[k]:
                pre = pre * PauliString.single(n, k, "X")
                img = img * self.x_images[k]
        for k in range(n):
            if sol[n + k]:
                pre = pre * PauliString.single(n, k, "Z")
                img = img * self.z_images[k]
        # fix the sign so that conjugate(pre) is exactly the target single Pauli
        pre.phase = (pre.phase - img.phase) % 4
        return pre


def _conjugate_inplace(p: PauliString, name: str, qubits: Tuple[int, ...]) -> None:
    name = name.upper()
    if name == "H":
        (q,) = qubits
        if p.x[q] and p.z[q]:
            p.phase = (p.phase + 2) % 4
        p.x[q], p.z[q] = p.z[q], p.x[q]
    elif name == "S":
        (q,) = qubits
        if p.x[q] and p.z[q]:
            p.phase = (p.phase + 2) % 4
        p.z[q] ^= p.x[q]
    elif name == "SDG":
        (q,) = qubits
        for _ in range(3):
            _conjugate_inplace(p, "S", qubits)
    elif name == "X":
        (q,) = qubits
        if p.z[q]:
            p.phase = (p.phase + 2) % 4
    elif name == "Y":
        (q,) = qubits
        if p.x[q] ^ p.z[q]:
            p.phase = (p.phase + 2) % 4
    elif name == "Z":
        (q,) = qubits
        if p.x[q]:
            p.phase = (p.phase + 2) % 4
    elif name == "CNOT":
        a, b = qubits
        if p.x[a] and p.z[b] and (p.x[b] ^ p.z[a] ^ 1):
            p.phase = (p.phase + 2) % 4
        p.x[b] ^= p.x[a]
        p.z[a] ^= p.z[b]
    elif name == "CZ":
        a, b = qubits
        if p.x[a] and p.x[b] and (p.z[a] ^ p.z[b]):
            p.phase = (p.phase + 2) % 4
        p.z[a] ^= p.x[b]
        p.z[b] ^= p.x[a]
    elif name == "SWAP":
        a, b = qubits
        p.x[a], p.x[b] = p.x[b], p.x[a]
        p.z[a], p.z[b] = p.z[b], p.z[a]
    else:
        raise ValueError(f"gate {name!r} is not a supported Clifford primitive")


def conjugate_pauli(
    circuit: Iterable[Tuple[str, Tuple[int, ...]]], p: PauliString, n: Optional[int] = None
) -> PauliString:
    """U p U^dag for U given as an ordered gate list (first gate acts first)."""
    out = p.copy()
    for name, qubits in circuit:
        _conjugate_inplace(out, name, tuple(qubits))
    return out


class TableauState:
    """Stabilizer tableau dressed with (site, slot) register keys.

    Mirrors the PureState mutation API closely enough that the LOCC engine can
    drive either backend: named Clifford gates, computational measurements,
    and dynamic add/remove of qubit entries.
    """

    def __init__(self, entries: Iterable[Tuple[int, str, int]]):
        self.keys: List[Tuple[int, str]] = []
        for site, slot, dim in entries:
            if dim != 2:
                raise ValueError("tableau backend supports qubits only")
            key = (int(site), str(slot))
            if key in self.keys:
                raise ValueError(f"duplicate entry {key}")
            self.keys.append(key)
        self.tab = StabilizerTableau(len(self.keys))

    def index(self, key) -> int:
        try:
            return self.keys.index(tuple(key))
        except ValueError:
            raise KeyError(f"entry {key} not in register") from None

    def __contains__(self, key) -> bool:
        return tuple(key) in self.keys

    def clone(self) -> "TableauState":
        s = TableauState.__new__(TableauState)
        s.keys = list(self.keys)
        s.tab = self.tab.copy()
        return s

    def apply_named(self, name: str, entries) -> "TableauState":
        qubits = [self.index(e) for e in entries]
        self.tab.apply_gate(name, *qubits)
        return self

    def branch_probabilities(self, entry, basis=None) -> np.ndarray:
        if basis is not None:
            raise ValueError("tableau backend measures in the computational basis only")
        q = self.index(entry)
        if np.any(self.tab.x[self.tab.n :, q]):
            return np.array([0.5, 0.5])
        bit, _, _ = self.tab.copy().measure_z(q)
        probs = np.zeros(2)
        probs[bit] = 1.0
        return probs

    def measure(self, entry, basis=None, force=None, rng=None, prob_floor: float = 1e-12):
        if basis is not None:
            raise ValueError("tableau backend measures in the computational basis only")
        q = self.index(entry)
        bit, prob, _ = self.tab.measure_z(q, force=force, rng=rng)
        return bit, prob

    def add_entry(self, site: int, slot: str, dim: int = 2, local_state=None) -> "TableauState":
        if dim != 2:
            raise ValueError("tableau backend supports qubits only")
        if local_state is not None:
            ls = np.asarray(local_state, dtype=complex)
            if not (abs(ls[0]) > 1 - 1e-9):
                raise ValueError("tableau ancillas must start in |0>")
        key = (int(site), str(slot))
        if key in self.keys:
            raise ValueError(f"entry {key} already present")
        self.tab = self.tab.add_qubits(1)
        self.keys.append(key)
        return self

    def remove_entry(self, entry) -> "TableauState":
        q = self.index(entry)
        self.tab = self.tab.remove_qubit(q)
        self.keys.pop(q)
        return self

    def permuted(self, new_order) -> "TableauState":
        keys = [tuple(k) for k in new_order]
        if sorted(keys) != sorted(self.keys):
            raise ValueError("new order must be a permutation of the register")
        perm = [self.index(k) for k in keys]
        s = TableauState.__new__(TableauState)
        s.keys = keys
        t = self.tab.copy()
        t.x = t.x[:, perm]
        t.z = t.z[:, perm]
        s.tab = t
        return s

    def to_pure_state(self, seed: int = 7):
        from .statevector import PureState, QuditRegister

        reg = QuditRegister([(s, sl, 2) for s, sl in self.keys])
        return PureState(reg, self.tab.to_statevector(seed=seed))

    def states_equal(self, other: "TableauState") -> bool:
        if self.keys != other.keys:
            other = other.permuted(self.keys)
        return self.tab.states_equal(other.tab)


def random_stabilizer_tableau(n: int, rng: np.random.Generator, depth: int = 30) -> StabilizerTableau:
    """Random stabilizer state from a random Clifford circuit on |0...0>."""
    tab = StabilizerTableau(n)
    one_q = ["H", "S", "X", "Z"]
    for _ in range(depth):
        kind = rng.integers(0, 3)
        if kind == 0 or n == 1:
            tab.apply_gate(one_q[rng.integers(0, len(one_q))], int(rng.integers(0, n)))
        else:
            a, b = rng.choice(n, size=2, replace=False)
            tab.apply_gate("CNOT" if rng.integers(0, 2) else "CZ", int(a), int(b))
    return tab

"""Exact dense pure-state backend over a register of heterogeneous qudits.

A register entry is keyed by (site, slot): the slot "s" is the physical qudit
of that site (protocols with composite physical spaces use several system
slots), everything else is an ancilla. Entries can be added and removed
dynamically; removal requires the entry to be decoupled from the rest.

Amplitude layout: C order over the register, first entry slowest-varying.
Internally the tensor axes are kept in whatever order the applied operators
left them (with a label map back to register positions), so two-qudit SWAPs
and axis restores cost nothing; `amps` materializes the canonical order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import gates

EntryKey = Tuple[int, str]

DEFAULT_MAX_AMPLITUDES = 2**27
NORM_TOL = 1e-10
DECOUPLE_TOL = 1e-9


class CapacityError(RuntimeError):
    """Raised instead of allocating a state beyond the amplitude cap."""


def max_amplitudes() -> int:
    return int(os.environ.get("QCCC_MAX_AMPLITUDES", DEFAULT_MAX_AMPLITUDES))


class QuditRegister:
    """Ordered collection of (site, slot, dim) entries with unique (site, slot) keys."""

    def __init__(self, entries: Iterable[Tuple[int, str, int]]):
        self._keys: List[EntryKey] = []
        self._dims: List[int] = []
        for site, slot, dim in entries:
            key = (int(site), str(slot))
            if key in self._keys:
                raise ValueError(f"duplicate register entry {key}")
            if dim < 2:
                raise ValueError(f"local dimension must be >= 2, got {dim} for {key}")
            self._keys.append(key)
            self._dims.append(int(dim))
        total = 1
        for d in self._dims:
            total *= d
            if total > max_amplitudes():
                raise CapacityError(
                    f"register dimension {total}+ exceeds cap {max_amplitudes()}"
                )

    @property
    def keys(self) -> Tuple[EntryKey, ...]:
        return tuple(self._keys)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(self._dims)

    @property
    def size(self) -> int:
        return len(self._keys)

    @property
    def total_dim(self) -> int:
        total = 1
        for d in self._dims:
            total *= d
        return total

    def index(self, key: EntryKey) -> int:
        try:
            return self._keys.index(tuple(key))
        except ValueError:
            raise KeyError(f"entry {key} not in register") from None

    def dim(self, key: EntryKey) -> int:
        return self._dims[self.index(key)]

    def __contains__(self, key) -> bool:
        return tuple(key) in self._keys

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, QuditRegister)
            and self._keys == other._keys
            and self._dims == other._dims
        )

    def entries(self) -> List[Tuple[int, str, int]]:
        return [(s, sl, d) for (s, sl), d in zip(self._keys, self._dims)]

    def describe(self) -> List[dict]:
        return [{"site": s, "slot": sl, "dim": d} for (s, sl), d in zip(self._keys, self._dims)]


@dataclass
class RegionOperator:
    """Operator given as a dense matrix over an ordered tuple of register entries.

    Matrix index convention matches the register's: first listed entry is the
    slowest-varying index.
    """

    entries: Tuple[EntryKey, ...]
    matrix: np.ndarray

    def __post_init__(self):
        self.entries = tuple((int(s), str(sl)) for s, sl in self.entries)
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if len(set(self.entries)) != len(self.entries):
            raise ValueError("operator support has duplicate entries")
        n = self.matrix.shape[0]
        if self.matrix.ndim != 2 or self.matrix.shape != (n, n):
            raise ValueError("operator matrix must be square")


def pauli_on(entry: EntryKey, name: str) -> RegionOperator:
    return RegionOperator((entry,), gates.named_gate(name))


class PureState:
    """Normalized dense pure state over a QuditRegister."""

    def __init__(self, register: QuditRegister, amplitudes: np.ndarray, norm_tol: float = NORM_TOL):
        self.register = register
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if amps.size != register.total_dim:
            raise ValueError(
                f"amplitude vector of length {amps.size} does not match register dim {register.total_dim}"
            )
        n = np.linalg.norm(amps)
        if abs(n - 1.0) > norm_tol:
            raise ValueError(f"state not normalized: ||psi|| = {n}")
        self._t = amps.reshape(register.dims) if register.size else amps.reshape(())
        self._order = list(range(register.size))  # internal axis -> register position
        self.norm_tol = norm_tol

    # -- construction ------------------------------------------------------

    @classmethod
    def product(
        cls,
        register: QuditRegister,
        assignment: Optional[Dict[EntryKey, Sequence[complex]]] = None,
    ) -> "PureState":
        """Tensor product state; unassigned entries start in |0>."""
        assignment = {tuple(k): np.asarray(v, dtype=complex) for k, v in (assignment or {}).items()}
        amps = np.ones(1, dtype=complex)
        for (key, d) in zip(register.keys, register.dims):
            local = assignment.pop(key, None)
            if local is None:
                local = np.zeros(d, dtype=complex)
                local[0] = 1.0
            else:
                if local.size != d:
                    raise ValueError(f"local state for {key} has wrong dimension")
                n = np.linalg.norm(local)
                if abs(n - 1.0) > NORM_TOL:
                    raise ValueError(f"local state for {key} not normalized")
            amps = np.kron(amps, local)
        if assignment:
            raise ValueError(f"assignment refers to unknown entries {sorted(assignment)}")
        return cls(register, amps)

    def clone(self) -> "PureState":
        s = PureState.__new__(PureState)
        s.register = self.register
        s._t = self._t.copy()
        s._order = list(self._order)
        s.norm_tol = self.norm_tol
        return s

    # -- layout helpers ----------------------------------------------------

    @property
    def amps(self) -> np.ndarray:
        """Flat amplitudes in register order (first entry slowest-varying)."""
        if self._order == sorted(self._order):
            return np.ascontiguousarray(self._t).reshape(-1)
        inv = [self._order.index(j) for j in range(len(self._order))]
        return np.ascontiguousarray(self._t.transpose(inv)).reshape(-1)

    def tensor(self) -> np.ndarray:
        return self.amps.reshape(self.register.dims)

    def _axes_of(self, keys: Sequence[EntryKey]) -> List[int]:
        return [self._order.index(self.register.index(k)) for k in keys]

    def _split(self, keys: Sequence[EntryKey]):
        """(matrix with `keys` composite row index, column = rest) as a copy."""
        axes = self._axes_of(keys)
        rest = [a for a in range(self._t.ndim) if a not in axes]
        t = self._t.transpose(axes + rest)
        d_sel = 1
        for a in axes:
            d_sel *= self._t.shape[a]
        return t.reshape(d_sel, -1), rest

    # -- operations --------------------------------------------------------

    def apply(self, op: RegionOperator, unitary_check: bool = True) -> "PureState":
        """Apply an operator in place on its support; returns self."""
        for k in op.entries:
            if k not in self.register:
                raise KeyError(f"operator entry {k} not in register")
        dims = [self.register.dim(k) for k in op.entries]
        d_sup = int(np.prod(dims, dtype=np.int64))
        if op.matrix.shape[0] != d_sup:
            raise ValueError(
                f"operator dimension {op.matrix.shape[0]} does not match support dimension {d_sup}"
            )
        if unitary_check and not gates.is_unitary(op.matrix):
            raise ValueError("operator is not unitary (pass unitary_check=False to override)")
        axes = self._axes_of(op.entries)
        rest = [a for a in range(self._t.ndim) if a not in axes]
        mat = self._t.transpose(axes + rest).reshape(d_sup, -1)
        out = op.matrix @ mat
        shape = list(dims) + [self._t.shape[a] for a in rest]
        self._t = out.reshape(shape)
        self._order = [self._order[a] for a in axes] + [self._order[a] for a in rest]
        return self

    def apply_named(self, name: str, entries: Sequence[EntryKey]) -> "PureState":
        if name.upper() == "SWAP":
            a, b = self._axes_of(entries)
            if self._t.shape[a] != self._t.shape[b]:
                raise ValueError("swap requires equal local dimensions")
            self._order[a], self._order[b] = self._order[b], self._order[a]
            return self
        return self.apply(RegionOperator(tuple(entries), gates.named_gate(name)), unitary_check=False)

    def branch_probabilities(self, entry: EntryKey, basis: Optional[np.ndarray] = None) -> np.ndarray:
        """Born-rule probabilities for measuring one entry in the given basis.

        `basis` has the basis vectors as columns; None means computational.
        """
        d = self.register.dim(entry)
        (ax,) = self._axes_of([entry])
        if basis is None:
            weights = np.abs(self._t) ** 2
            other = tuple(a for a in range(self._t.ndim) if a != ax)
            probs = weights.sum(axis=other) if other else weights
        else:
            basis = np.asarray(basis, dtype=complex)
            if basis.shape != (d, d) or not gates.is_unitary(basis):
                raise ValueError("measurement basis must be an orthonormal d x d frame")
            proj = np.tensordot(basis.conj().T, self._t, axes=(1, ax))
            other = tuple(range(1, proj.ndim))
            probs = (np.abs(proj) ** 2).sum(axis=other) if other else np.abs(proj) ** 2
        return np.asarray(probs).real.reshape(-1)

    def _pick_outcome(self, probs, d, force, rng, prob_floor):
        if force is not None:
            k = int(force)
            if not 0 <= k < d:
                raise ValueError(f"forced outcome {k} out of range")
            if probs[k] < prob_floor:
                raise ValueError(f"forced outcome {k} has vanishing probability {probs[k]:.3e}")
            return k
        if rng is None:
            raise ValueError("sampled measurement requires an rng")
        return int(rng.choice(d, p=probs / probs.sum()))

    def measure(
        self,
        entry: EntryKey,
        basis: Optional[np.ndarray] = None,
        force: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
        prob_floor: float = 1e-12,
    ) -> Tuple[int, float]:
        """Projective measurement of one entry; collapses in place.

        Returns (outcome index, probability). Forced outcomes with probability
        below `prob_floor` raise.
        """
        d = self.register.dim(entry)
        probs = self.branch_probabilities(entry, basis)
        k = self._pick_outcome(probs, d, force, rng, prob_floor)
        (ax,) = self._axes_of([entry])
        comp = self._project(ax, k, basis) / np.sqrt(probs[k])
        vec = np.zeros(d, dtype=complex)
        if basis is None:
            vec[k] = 1.0
        else:
            vec = np.asarray(basis, dtype=complex)[:, k]
        self._t = np.multiply.outer(vec, comp)
        reg_pos = self._order[ax]
        self._order = [reg_pos] + [p for a, p in enumerate(self._order) if a != ax]
        return k, float(probs[k])

    def measure_remove(
        self,
        entry: EntryKey,
        basis: Optional[np.ndarray] = None,
        force: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
        prob_floor: float = 1e-12,
    ) -> Tuple[int, float]:
        """Measure one entry and drop it from the register in a single pass."""
        d = self.register.dim(entry)
        probs = self.branch_probabilities(entry, basis)
        k = self._pick_outcome(probs, d, force, rng, prob_floor)
        (ax,) = self._axes_of([entry])
        comp = self._project(ax, k, basis)
        self._t = comp / np.sqrt(probs[k])
        self._drop_register_entry(entry, ax)
        return k, float(probs[k])

    def _project(self, ax: int, k: int, basis) -> np.ndarray:
        if basis is None:
            return np.take(self._t, k, axis=ax)
        bk = np.asarray(basis, dtype=complex)[:, k]
        return np.tensordot(bk.conj(), self._t, axes=(0, ax))

    def _drop_register_entry(self, entry: EntryKey, ax: int) -> None:
        reg_pos = self.register.index(entry)
        entries = self.register.entries()
        kept = [entries[i] for i in range(len(entries)) if i != reg_pos]
        self.register = QuditRegister(kept)
        labels = [p for a, p in enumerate(self._order) if a != ax]
        self._order = [p - 1 if p > reg_pos else p for p in labels]

    def expectation(self, op: RegionOperator) -> complex:
        work = self.clone()
        work.apply(op, unitary_check=False)
        return complex(np.vdot(self.amps, work.amps))

    def fidelity(self, other: "PureState") -> float:
        if self.register != other.register:
            raise ValueError("fidelity requires identical registers")
        return float(abs(np.vdot(self.amps, other.amps)) ** 2)

    def max_entropy(self, entries: Sequence[EntryKey], rank_tol: float = 1e-10) -> float:
        """log2 of the Schmidt rank across the bipartition entries | rest."""
        keys = [tuple(k) for k in entries]
        if len(keys) == 0 or len(keys) == self.register.size:
            raise ValueError("max_entropy requires a proper non-empty sub-register")
        mat, _ = self._split(keys)
        s = np.linalg.svd(mat, compute_uv=False)
        rank = int(np.sum(s > rank_tol * s[0]))
        return float(np.log2(rank))

    def schmidt_values(self, entries: Sequence[EntryKey]) -> np.ndarray:
        mat, _ = self._split([tuple(k) for k in entries])
        return np.linalg.svd(mat, compute_uv=False)

    def reduced_density(self, keep: Sequence[EntryKey]) -> np.ndarray:
        """Reduced density matrix over the kept entries (in the given order)."""
        keys = [tuple(k) for k in keep]
        if len(keys) == 0:
            raise ValueError("cannot trace out every entry")
        mat, _ = self._split(keys)
        return mat @ mat.conj().T

    def purity(self, keep: Sequence[EntryKey]) -> float:
        rho = self.reduced_density(keep)
        return float(np.trace(rho @ rho).real)

    def is_product_across(self, entries: Sequence[EntryKey], tol: float = DECOUPLE_TOL) -> bool:
        """True when rho factorizes as rho_A (x) rho_rest, i.e. Schmidt rank one."""
        mat, _ = self._split([tuple(k) for k in entries])
        if mat.shape[0] <= mat.shape[1]:
            w = np.linalg.eigvalsh(mat @ mat.conj().T)
        else:
            w = np.linalg.eigvalsh(mat.conj().T @ mat)
        return bool(1.0 - w[-1] <= tol)

    # -- dynamic register --------------------------------------------------

    def add_entry(self, site: int, slot: str, dim: int, local_state=None) -> "PureState":
        """Append a fresh decoupled qudit (default |0>) at the end of the register."""
        key = (int(site), str(slot))
        if key in self.register:
            raise ValueError(f"entry {key} already present")
        if local_state is None:
            local_state = np.zeros(dim, dtype=complex)
            local_state[0] = 1.0
        local_state = np.asarray(local_state, dtype=complex)
        if local_state.size != dim or abs(np.linalg.norm(local_state) - 1.0) > NORM_TOL:
            raise ValueError("ancilla init state must be normalized and of the declared dim")
        new_reg = QuditRegister(self.register.entries() + [(site, slot, dim)])
        self._t = np.multiply.outer(self._t, local_state)
        self._order = self._order + [new_reg.size - 1]
        self.register = new_reg
        return self

    def remove_entry(self, entry: EntryKey, tol: float = DECOUPLE_TOL) -> "PureState":
        """Drop a decoupled entry; raises when it is still entangled with the rest."""
        key = tuple(entry)
        (ax,) = self._axes_of([key])
        d = self._t.shape[ax]
        mat = np.moveaxis(self._t, ax, 0).reshape(d, -1)
        rho = mat @ mat.conj().T
        w, v = np.linalg.eigh(rho)
        if 1.0 - w[-1] > tol:
            raise ValueError(f"entry {key} is not decoupled (residual {1.0 - w[-1]:.3e})")
        local = v[:, -1]
        rest = np.tensordot(local.conj(), self._t, axes=(0, ax))
        rest = rest / np.linalg.norm(rest)
        self._t = rest
        self._drop_register_entry(key, ax)
        return self

    def permuted(self, new_order: Sequence[EntryKey]) -> "PureState":
        """Return a copy with register entries reordered."""
        keys = [tuple(k) for k in new_order]
        if sorted(keys) != sorted(self.register.keys):
            raise ValueError("new order must be a permutation of the register")
        axes = self._axes_of(keys)
        entries = self.register.entries()
        reg = QuditRegister([entries[self.register.index(k)] for k in keys])
        return PureState(reg, np.ascontiguousarray(self._t.transpose(axes)).reshape(-1))

    # -- serialization -----------------------------------------------------

    def dump(self) -> dict:
        return {
            "register": self.register.describe(),
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amps],
        }

    def dumps(self) -> str:
        return json.dumps(self.dump())

    @classmethod
    def load(cls, data) -> "PureState":
        if isinstance(data, str):
            data = json.loads(data)
        reg = QuditRegister([(e["site"], e["slot"], e["dim"]) for e in data["register"]])
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
        return cls(reg, amps)


def init_product(register: QuditRegister, assignment=None) -> PureState:
    return PureState.product(register, assignment)


def fidelity(a: PureState, b: PureState) -> float:
    return a.fidelity(b)


def global_phase_equal(a: PureState, b: PureState, tol: float = 1e-9) -> bool:
    return a.fidelity(b) >= 1.0 - tol

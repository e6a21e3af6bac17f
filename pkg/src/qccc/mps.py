"""Translation-invariant MPS machinery: canonical form, blocking, transfer
spectra, renormalization fixed points, and the triviality pipeline that
compiles an MPS into a measurement-assisted preparation protocol.

Conventions. The site tensor A has shape (d, chi, chi) = (physical, left
bond, right bond). The transfer matrix is kept in two pairings:

  chain pairing  T[(i k), (j l)] = sum_s A[s,i,j] conj(A[s,k,l])
                 (traces of powers give overlaps of chain states)
  in/out pairing M[(i j), (k l)] = sum_s conj(A[s,i,j]) A[s,k,l]
                 (equals A^dag A for A read as a d x chi^2 matrix; PSD)

They are related by an index shuffle plus complex conjugation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .statevector import PureState, QuditRegister, max_amplitudes

SPECTRAL_TOL = 1e-9
RANK_TOL = 1e-9
BLOCK_CAP = 2**22


@dataclass
class MPS:
    tensor: np.ndarray  # (d, chi, chi)
    normal: Optional[bool] = None

    def __post_init__(self):
        self.tensor = np.asarray(self.tensor, dtype=complex)
        if self.tensor.ndim != 3 or self.tensor.shape[1] != self.tensor.shape[2]:
            raise ValueError("tensor must have shape (d, chi, chi)")
        if not np.isfinite(self.tensor).all() or np.linalg.norm(self.tensor) == 0:
            raise ValueError("tensor must be finite and nonzero")

    @property
    def d(self) -> int:
        return self.tensor.shape[0]

    @property
    def chi(self) -> int:
        return self.tensor.shape[1]

    def save(self) -> str:
        return json.dumps(
            {
                "d": self.d,
                "chi": self.chi,
                "tensor": [
                    [[[float(v.real), float(v.imag)] for v in row] for row in mat]
                    for mat in self.tensor
                ],
            }
        )

    @classmethod
    def load(cls, text: str) -> "MPS":
        data = json.loads(text) if isinstance(text, str) else text
        t = np.array(
            [[[complex(re, im) for re, im in row] for row in mat] for mat in data["tensor"]]
        )
        return cls(t)


def transfer_matrix(mps_or_tensor, chain: bool = True) -> np.ndarray:
    a = mps_or_tensor.tensor if isinstance(mps_or_tensor, MPS) else np.asarray(mps_or_tensor)
    chi = a.shape[1]
    if chain:
        return np.einsum("sij,skl->ikjl", a, a.conj()).reshape(chi * chi, chi * chi)
    return np.einsum("sij,skl->ijkl", a.conj(), a).reshape(chi * chi, chi * chi)


def mixed_transfer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Chain-pairing transfer of <chain(b)|chain(a)> contributions."""
    chi = a.shape[1]
    return np.einsum("sij,skl->ikjl", a, b.conj()).reshape(chi * chi, chi * chi)


def chain_from_io(io: np.ndarray) -> np.ndarray:
    """Re-pair (in,out) <-> (left pair, right pair); the shuffle is an involution."""
    chi = int(round(math.isqrt(io.shape[0])))
    return np.conj(io.reshape(chi, chi, chi, chi).transpose(0, 2, 1, 3)).reshape(io.shape)


io_from_chain = chain_from_io


def spectral_radius(t: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(t))))


def sorted_spectrum(t: np.ndarray) -> np.ndarray:
    vals = np.linalg.eigvals(t)
    return vals[np.argsort(-np.abs(vals))]


# -- canonical form -------------------------------------------------------------------


@dataclass
class CanonicalForm:
    """Blocks (mu_k, normal tensor) of the scaled tensor; mu is each block's
    relative weight (max mu = 1)."""

    blocks: List[Tuple[float, MPS]]

    @property
    def reducible(self) -> bool:
        return len(self.blocks) > 1


def _hermitian_fixed_basis(t: np.ndarray, tol: float) -> List[np.ndarray]:
    chi = int(round(math.isqrt(t.shape[0])))
    vals, vecs = np.linalg.eig(t)
    idx = [i for i, v in enumerate(vals) if abs(v - 1.0) < tol]
    cands: List[np.ndarray] = []
    for i in idx:
        m = vecs[:, i].reshape(chi, chi)
        for h in ((m + m.conj().T) / 2, (m - m.conj().T) / 2j):
            if np.linalg.norm(h) > 1e-12:
                cands.append(h / np.linalg.norm(h))
    return cands


def _invariant_projector(a: np.ndarray, tol: float = 1e-8) -> Optional[np.ndarray]:
    """A proper projector P with A^s P = P A^s P for all s, or None."""
    chi = a.shape[1]
    t = transfer_matrix(a)
    cands = _hermitian_fixed_basis(t, 1e-7)
    rng = np.random.default_rng(11)
    extras = []
    for _ in range(4):
        if cands:
            coef = rng.normal(size=len(cands))
            extras.append(sum(c * h for c, h in zip(coef, cands)))
    for h in cands + extras:
        w, v = np.linalg.eigh(h)
        # try every eigenvalue-gap split
        for cut in range(1, chi):
            if abs(w[cut] - w[cut - 1]) < 1e-9:
                continue
            basis = v[:, cut:]
            p = basis @ basis.conj().T
            ok = all(
                np.linalg.norm(a[s] @ p - p @ a[s] @ p) < tol for s in range(a.shape[0])
            )
            if ok:
                return p
            basis = v[:, :cut]
            p = basis @ basis.conj().T
            ok = all(
                np.linalg.norm(a[s] @ p - p @ a[s] @ p) < tol for s in range(a.shape[0])
            )
            if ok:
                return p
    return None


def canonicalize(mps: MPS) -> CanonicalForm:
    """Scale the leading transfer eigenvalue to one and split into normal blocks.

    Each block's weight mu is tracked relative to the top-level tensor and the
    whole list is rescaled so that max mu = 1.
    """

    def recurse_scaled(a: np.ndarray) -> List[Tuple[float, np.ndarray]]:
        t = transfer_matrix(a)
        r = spectral_radius(t)
        if r < 1e-14:
            return []
        scale = math.sqrt(r)
        a_n = a / scale
        p = _invariant_projector(a_n)
        if p is None:
            return [(scale, a_n)]
        w, v = np.linalg.eigh(p)
        inside = v[:, w > 0.5]
        outside = v[:, w <= 0.5]
        out: List[Tuple[float, np.ndarray]] = []
        for basis in (inside, outside):
            if basis.shape[1] == 0:
                continue
            sub = np.einsum("pi,spq,qj->sij", basis.conj(), a_n, basis)
            out.extend((scale * mu, blk) for mu, blk in recurse_scaled(sub))
        return out

    found = recurse_scaled(mps.tensor)
    if not found:
        raise ValueError("tensor has vanishing spectral radius")
    top = max(mu for mu, _ in found)
    blocks = [(mu / top, MPS(blk, normal=True)) for mu, blk in found]
    blocks.sort(key=lambda b: -b[0])
    return CanonicalForm(blocks)


def is_normal(mps: MPS, gap_tol: float = SPECTRAL_TOL) -> bool:
    """Spectral condition (unique leading eigenvalue 1, gapped) plus
    injectivity of blocked maps within chi^4 blocking steps."""
    a = mps.tensor
    chi = mps.chi
    t = transfer_matrix(a)
    vals = sorted_spectrum(t)
    if abs(vals[0] - 1.0) > 1e-7:
        raise ValueError("tensor is not canonically scaled (leading eigenvalue != 1)")
    if len(vals) > 1 and abs(vals[1]) > 1 - gap_tol:
        return False
    # injectivity: products of length L span the full matrix algebra
    span = [a[s] for s in range(a.shape[0])]
    for _ in range(chi**4):
        stack = np.array([m.reshape(-1) for m in span])
        svals = np.linalg.svd(stack, compute_uv=False)
        rank = int(np.sum(svals > RANK_TOL * svals[0]))
        if rank == chi * chi:
            return True
        new = [a[s] @ m for s in range(a.shape[0]) for m in span]
        # keep an orthonormal basis of the new span to bound the list size
        stack = np.array([m.reshape(-1) for m in new])
        u, svals, _ = np.linalg.svd(stack.T, full_matrices=False)
        keep = [
            u[:, i].reshape(chi, chi)
            for i in range(len(svals))
            if svals[i] > 1e-12 * svals[0]
        ]
        if not keep:
            return False
        span = keep
    return False


def block(mps: MPS, q: int) -> MPS:
    """Group q neighboring sites: A^(s1..sq) = A^{s1} ... A^{sq}."""
    if q < 1:
        raise ValueError("q must be >= 1")
    a = mps.tensor
    d, chi = mps.d, mps.chi
    if (d**q) * chi * chi > BLOCK_CAP:
        raise ValueError(f"blocked tensor would exceed the cap ({d}^{q} x {chi}^2)")
    out = a
    for _ in range(q - 1):
        out = np.einsum("aij,sjk->asik", out, a).reshape(-1, chi, chi)
    return MPS(out, normal=mps.normal)


# -- fixed points ----------------------------------------------------------------------


@dataclass
class FixedPointData:
    rho: np.ndarray  # right fixed point (PSD, trace-normalized against sigma)
    sigma: np.ndarray  # left fixed point (PSD)
    tau_bb_chain: np.ndarray
    tau_bb_io: np.ndarray
    b_tilde: np.ndarray
    bond_matrix: np.ndarray  # sqrt(sigma) sqrt(rho), indexed (right leg, left leg)


def transfer_fixed_points(t_chain: np.ndarray, tol: float = 1e-9) -> Tuple[np.ndarray, np.ndarray]:
    """Hermitian PSD right/left fixed points (rho, sigma) with tr(sigma rho) = 1."""
    chi = int(round(math.isqrt(t_chain.shape[0])))

    def principal(mat: np.ndarray) -> np.ndarray:
        vals, vecs = np.linalg.eig(mat)
        i = int(np.argmin(np.abs(vals - 1.0)))
        if abs(vals[i] - 1.0) > 1e-6:
            raise ValueError("no eigenvalue 1; tensor not canonically scaled")
        m = vecs[:, i].reshape(chi, chi)
        m = (m + m.conj().T) / 2
        if m.trace().real < 0:
            m = -m
        w = np.linalg.eigvalsh(m)
        if w[0] < -1e-8 * max(1.0, w[-1]):
            raise ValueError("fixed point is not PSD; tensor may not be normal")
        return m

    rho = principal(t_chain)
    sigma = principal(t_chain.conj().T)
    pairing = np.trace(sigma @ rho).real
    if pairing <= 0:
        raise ValueError("degenerate fixed-point pairing")
    sigma = sigma / pairing
    return rho, sigma


def _sqrt_psd(m: np.ndarray, clamp: float = 1e-12) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.where(w < clamp, np.maximum(w, 0.0), w)
    return (v * np.sqrt(w)) @ v.conj().T


def fixed_point_data(rho: np.ndarray, sigma: np.ndarray) -> FixedPointData:
    chi = rho.shape[0]
    a = rho.reshape(-1)
    b = sigma.reshape(-1)
    tau_bb_chain = np.outer(a, b.conj())
    tau_bb_io = np.kron(rho.conj(), sigma)
    b_tilde = np.kron(_sqrt_psd(rho).conj(), _sqrt_psd(sigma))
    bond = _sqrt_psd(sigma) @ _sqrt_psd(rho)
    return FixedPointData(rho, sigma, tau_bb_chain, tau_bb_io, b_tilde, bond)


@dataclass
class RGFixedPointTensor:
    b: MPS
    isometry: np.ndarray  # d_eff x chi^2, A = U A~ on the support
    data: FixedPointData


def rg_fixed_point_tensor(blocked: MPS, rank_cutoff: float = 1e-10) -> RGFixedPointTensor:
    """B = U sqrt(tau_BB) from a (blocked) normal tensor A = U sqrt(tau_AA).

    The square root of tau_AA and its pseudo-inverse come from one
    eigendecomposition with a shared relative rank cutoff, so the support
    projector is consistent.
    """
    a = blocked.tensor
    d_eff, chi = a.shape[0], a.shape[1]
    a_mat = a.reshape(d_eff, chi * chi)
    tau_aa_io = a_mat.conj().T @ a_mat
    w, v = np.linalg.eigh((tau_aa_io + tau_aa_io.conj().T) / 2)
    if w[-1] <= 0:
        raise ValueError("tau_AA is numerically zero")
    kept = w > rank_cutoff * w[-1]
    if w[0] < -1e-10 * w[-1]:
        raise ValueError("tau_AA is not PSD")
    if not kept.all():
        raise ValueError(
            "tau_AA is numerically singular beyond the pseudo-inverse tolerance; "
            "block more sites (need d^q >= chi^2 with injectivity)"
        )
    sq = np.where(kept, np.sqrt(np.abs(w)), 0.0)
    inv_sq = np.where(kept, 1.0 / np.where(kept, sq, 1.0), 0.0)
    a_tilde = (v * sq) @ v.conj().T
    a_pinv = (v * inv_sq) @ v.conj().T
    rho, sigma = transfer_fixed_points(transfer_matrix(a))
    data = fixed_point_data(rho, sigma)
    u = a_mat @ a_pinv
    support = a_tilde @ a_pinv
    if np.linalg.norm(u.conj().T @ u - support) > 1e-8 * chi * chi:
        raise ValueError("isometry check failed: U^dag U != 1 on the support")
    tau_bb = data.tau_bb_chain
    if np.linalg.norm(tau_bb @ tau_bb - tau_bb) > 1e-9 * max(1.0, np.linalg.norm(tau_bb)):
        raise ValueError("tau_BB is not idempotent")
    b_mat = u @ data.b_tilde
    b = MPS(b_mat.reshape(d_eff, chi, chi), normal=None)
    return RGFixedPointTensor(b, u, data)


def fidelity_deficit(a: MPS, b: MPS, m_sites: int) -> float:
    """|tr(tau_AB^M - tau_BB^M)| = |<psi_M|phi_M> - 1| via chi^2 matrix powers.

    tr(tau_BB^M) = 1 identically when b is a renormalization fixed point
    (its chain state is exactly normalized), which is the convention used
    here; rg_fixed_point_tensor asserts that property on construction. With
    b = a this reduces to the finite-chain normalization defect |<phi|phi>-1|.
    """
    if m_sites < 2:
        raise ValueError("need at least two blocked sites")
    if a.chi != b.chi or a.d != b.d:
        raise ValueError("tensors must share physical and bond dimensions")
    tab = mixed_transfer(a.tensor, b.tensor)
    val = np.trace(np.linalg.matrix_power(tab, m_sites)) - 1.0
    return float(abs(val))


def deficit_via_transfer_only(mps: MPS, q: int, m_sites: int, rank_cutoff: float = 1e-10) -> float:
    """Measured deficit at blocking q without materializing the d^q tensor.

    Uses tau_AB = A~ B~ (valid when tau_AA is full rank, i.e. the blocked map
    is injective) with all objects chi^2-sized.
    """
    t = transfer_matrix(mps)
    tau_aa_io = io_from_chain(np.linalg.matrix_power(t, q))
    w = np.linalg.eigvalsh((tau_aa_io + tau_aa_io.conj().T) / 2)
    if w[0] < rank_cutoff * w[-1]:
        raise ValueError("blocked tau_AA is rank-deficient; transfer-only route invalid")
    a_tilde = _sqrt_psd(tau_aa_io)
    rho, sigma = transfer_fixed_points(t)
    data = fixed_point_data(rho, sigma)
    tau_ab_io = a_tilde @ data.b_tilde
    tab = chain_from_io(tau_ab_io)
    tbb = data.tau_bb_chain
    val = np.trace(np.linalg.matrix_power(tab, m_sites)) - np.trace(
        np.linalg.matrix_power(tbb, m_sites)
    )
    return float(abs(val))


def state_from_mps(mps: MPS, n: int, normalize: bool = True) -> PureState:
    """Dense chain state sum tr(A^{s_1} ... A^{s_n}) |s_1 ... s_n>."""
    d, chi = mps.d, mps.chi
    if d**n > max_amplitudes():
        raise ValueError("dense expansion exceeds the amplitude cap")
    g = mps.tensor
    for _ in range(n - 1):
        g = np.einsum("aij,sjk->asik", g, mps.tensor).reshape(-1, chi, chi)
    amps = np.trace(g, axis1=1, axis2=2)
    reg = QuditRegister([(i, "s", d) for i in range(n)])
    if normalize:
        nrm = np.linalg.norm(amps)
        if nrm == 0:
            raise ValueError("chain state vanishes at this length")
        return PureState(reg, amps / nrm)
    state = PureState.__new__(PureState)
    state.register = reg
    state._t = amps.reshape(reg.dims)
    state._order = list(range(reg.size))
    state.norm_tol = np.inf
    return state


def raw_overlap(a: MPS, b: MPS, n: int) -> complex:
    """<chain(b)|chain(a)> without normalization (dense oracle partner)."""
    sa = state_from_mps(a, n, normalize=False)
    sb = state_from_mps(b, n, normalize=False)
    return complex(np.vdot(sb.amps, sa.amps))


# -- the bound quantities ---------------------------------------------------------------


@dataclass
class BoundReport:
    alpha: float
    q: int
    m_sites: int
    gamma_q: float
    c_v: float
    lambda_q: float
    c_q: float
    ctilde_q: float
    epsilon_q: float
    delta_q: float
    measured_deficit: float
    envelope_holds: Optional[bool]  # None when epsilon_q >= 1 (bound vacuous)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "q": self.q,
            "m_sites": self.m_sites,
            "gamma_q": self.gamma_q,
            "c_v": self.c_v,
            "lambda_q": self.lambda_q,
            "c_q": self.c_q,
            "ctilde_q": self.ctilde_q,
            "epsilon_q": self.epsilon_q,
            "delta_q": self.delta_q,
            "measured_deficit": self.measured_deficit,
            "envelope_holds": self.envelope_holds,
        }


def gauge_condition_number(t_chain: np.ndarray, gap_tol: float = 1e-8) -> float:
    """kappa of a similarity separating the leading eigenvalue from the rest.

    Schur-based two-block decoupling; an upper-bound surrogate for the exact
    Jordan gauge, reported as such.
    """
    n = t_chain.shape[0]
    if n == 1:
        return 1.0
    t, z, sdim = scipy.linalg.schur(
        t_chain.astype(complex), output="complex", sort=lambda x: abs(x - 1.0) < 0.5
    )
    if sdim != 1:
        raise ValueError("leading eigenvalue is not simple; tensor not normal")
    t12 = t[:1, 1:]
    t22 = t[1:, 1:]
    y = -t12 @ np.linalg.inv(np.eye(n - 1) - t22)
    s = np.eye(n, dtype=complex)
    s[:1, 1:] = y
    v = z @ s
    return float(np.linalg.norm(v, 2) * np.linalg.norm(np.linalg.inv(v), 2))


def bound_report(mps: MPS, q: int, m_sites: int) -> BoundReport:
    """All analytic envelope factors plus the measured deficit at (q, M)."""
    a = mps.tensor
    chi = mps.chi
    t = transfer_matrix(a)
    vals = sorted_spectrum(t)
    if abs(vals[0] - 1.0) > 1e-7:
        raise ValueError("tensor must be canonically scaled")
    lam1 = abs(vals[1]) if (chi > 1 and len(vals) > 1) else 0.0
    if lam1 < 1e-14:
        # zero correlation length: already a fixed point after any blocking
        blocked = block(mps, q)
        fp = rg_fixed_point_tensor(blocked)
        measured = fidelity_deficit(blocked, fp.b, m_sites)
        return BoundReport(math.inf, q, m_sites, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, measured, True)
    if lam1 > 1 - SPECTRAL_TOL:
        raise ValueError("no spectral gap; tensor not normal")
    alpha = -math.log(lam1)
    c_v = gauge_condition_number(t)
    rho, sigma = transfer_fixed_points(t)
    data = fixed_point_data(rho, sigma)
    gamma_q = (chi**3) * (q ** (chi * chi - 1)) * math.exp(alpha * (chi * chi - 1))
    lambda_q = chi * c_v * gamma_q
    tau_bb_norm = float(np.linalg.norm(data.tau_bb_chain, 2))
    btilde_norm = float(np.linalg.norm(data.b_tilde, 2))
    c_q = (chi**2) * max(1.0, tau_bb_norm) * btilde_norm * math.sqrt(lambda_q)
    ctilde_q = max(1.0, tau_bb_norm) * c_q
    epsilon_q = ctilde_q * m_sites * math.exp(-alpha * q / 2)
    delta_q = epsilon_q / m_sites
    if (mps.d**q) * chi * chi <= BLOCK_CAP:
        blocked = block(mps, q)
        fp = rg_fixed_point_tensor(blocked)
        measured = fidelity_deficit(blocked, fp.b, m_sites)
    else:
        measured = deficit_via_transfer_only(mps, q, m_sites)
    envelope: Optional[bool] = None
    if epsilon_q < 1.0:
        # floating-point deficits saturate around 1e-10; keep the envelope
        # check meaningful above that noise floor
        budget = epsilon_q + epsilon_q**2 * math.exp(epsilon_q) * (1 + epsilon_q / m_sites)
        envelope = bool(measured <= budget + 1e-10)
        if not envelope:
            raise AssertionError(
                f"measured deficit {measured:.3e} exceeds the envelope {budget:.3e}"
            )
    return BoundReport(
        alpha,
        q,
        m_sites,
        gamma_q,
        c_v,
        lambda_q,
        c_q,
        ctilde_q,
        epsilon_q,
        delta_q,
        measured,
        envelope,
    )


# -- bundled example tensors --------------------------------------------------------------


def product_mps(local_state: Sequence[complex] = (1.0, 0.0)) -> MPS:
    v = np.asarray(local_state, dtype=complex)
    v = v / np.linalg.norm(v)
    return MPS(v.reshape(-1, 1, 1))


def ghz_mps() -> MPS:
    t = np.zeros((2, 2, 2), dtype=complex)
    t[0, 0, 0] = 1.0
    t[1, 1, 1] = 1.0
    return MPS(t)


def aklt_mps() -> MPS:
    """Spin-1 AKLT tensor; transfer spectrum {1, -1/3, -1/3, -1/3} after scaling."""
    sp = np.array([[0, 1], [0, 0]], dtype=complex)
    sm = sp.T.copy()
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    t = np.stack(
        [
            math.sqrt(2.0 / 3.0) * sp,
            -math.sqrt(1.0 / 3.0) * sz,
            -math.sqrt(2.0 / 3.0) * sm,
        ]
    )
    cf = canonicalize(MPS(t))
    assert len(cf.blocks) == 1
    return cf.blocks[0][1]


def w_chi2_mps() -> MPS:
    """The textbook chi=2 'single excitation' tensor (identity / raising op).

    Note: with the periodic trace closure its chain state collapses onto the
    all-zero product state; the canonical form exposes that as two equal
    product blocks.
    """
    t = np.zeros((2, 2, 2), dtype=complex)
    t[0] = np.eye(2)
    t[1] = np.array([[0, 1], [0, 0]])
    return MPS(t)


def cluster_mps() -> MPS:
    """1D cluster state tensor A^s[t, t'] = delta(t', s) (-1)^(t s) / sqrt(2)."""
    t = np.zeros((2, 2, 2), dtype=complex)
    for s in range(2):
        for b in range(2):
            t[s, b, s] = (-1.0) ** (b * s) / math.sqrt(2.0)
    return MPS(t)


FIXTURES = {
    "product": product_mps,
    "ghz": ghz_mps,
    "aklt": aklt_mps,
    "w_chi2": w_chi2_mps,
    "cluster": cluster_mps,
}


def fixture(name: str) -> MPS:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; have {sorted(FIXTURES)}") from None


def load_fixture_file(name: str) -> MPS:
    """Read one of the packaged fixture JSON files."""
    from importlib import resources

    path = resources.files("qccc").joinpath(f"fixtures/{name}.json")
    return MPS.load(path.read_text())


def random_normal_mps(d: int, chi: int, rng: np.random.Generator, attempts: int = 20) -> MPS:
    """A random canonically-scaled normal tensor (rejection sampled)."""
    for _ in range(attempts):
        t = rng.normal(size=(d, chi, chi)) + 1j * rng.normal(size=(d, chi, chi))
        cf = canonicalize(MPS(t))
        if not cf.reducible and is_normal(cf.blocks[0][1]):
            return cf.blocks[0][1]
    raise RuntimeError("failed to sample a normal tensor")


# -- the triviality pipeline ----------------------------------------------------------


@dataclass
class PipelineResult:
    protocol: object  # locc.Protocol
    report: BoundReport
    alphas: np.ndarray
    block_dims: List[int]
    writer_defect: float
    depth: int


def _conveyor(lat, src, dst, dim: int, tmp: str):
    """Gate layers moving the content of entry `src` into existing entry `dst`
    one nearest-neighbor hop at a time; temps end in |0> and are removed."""
    from . import circuits as cx

    n = lat.n_sites
    s_site, _ = src
    d_site, _ = dst
    fwd = (d_site - s_site) % n
    bwd = (s_site - d_site) % n
    step = 1 if fwd <= bwd else -1
    path = []
    site = s_site
    while site != d_site:
        site = (site + step) % n
        path.append(site)
    layers = []
    temps = []
    prev = src
    for hop, site in enumerate(path):
        if site == d_site:
            layers.append(cx.GateLayer([cx.Gate((prev, dst), [("SWAP", (0, 1))])]))
        else:
            t_entry = (site, tmp)
            temps.append(t_entry)
            layers.append(cx.LocalLayer([cx.add_ancilla(site, tmp, dim)]))
            layers.append(cx.GateLayer([cx.Gate((prev, t_entry), [("SWAP", (0, 1))])]))
        prev = (site, tmp) if site != d_site else dst
    if temps:
        layers.append(
            cx.LocalLayer([cx.remove_ancilla(s, sl) for s, sl in temps])
        )
    return layers


def _polished_columns(cols: Dict[int, np.ndarray]) -> Tuple[Dict[int, np.ndarray], float]:
    """Gram-Schmidt polish of prescribed writer columns; returns the defect."""
    keys = sorted(cols)
    defect = 0.0
    basis: List[np.ndarray] = []
    out = {}
    for k in keys:
        v = np.asarray(cols[k], dtype=complex).copy()
        orig = v.copy()
        for b in basis:
            v = v - np.vdot(b, v) * b
        nv = np.linalg.norm(v)
        if nv < 1e-8:
            raise ValueError("writer columns are not independent; blocks overlap")
        v = v / nv
        defect = max(defect, float(np.linalg.norm(v - orig)))
        basis.append(v)
        out[k] = v
    return out, defect


def preparation_pipeline(mps: MPS, q: int, n_sites: int) -> PipelineResult:
    """Compile an MPS into a preparation protocol on the unblocked chain.

    Canonicalizes, blocks q sites, builds each block's renormalization fixed
    point, writes the fixed point in the entangled-pair normal form, and emits
    the bond-pair / superposition / conditioned-writer / teleport protocol.

    The returned protocol's `circuit` holds the staged nearest-neighbor form
    (blocked operations expanded into swap conveyors); its `program` applies
    the same unitaries block by block, taking the free-swap shortcuts that
    keep the dense register narrow.
    """
    from . import circuits as cx
    from . import gates
    from .lattice import Lattice
    from .locc import ApplyLayers, Correct, Measure, MeasurementSpec, Protocol
    from .protocols import _teleport_steps

    if n_sites % q:
        raise ValueError("chain length must be divisible by the blocking factor")
    m_sites = n_sites // q
    if m_sites < 2:
        raise ValueError("need at least two blocked sites")
    d = mps.d
    cf = canonicalize(mps)
    r = len(cf.blocks)
    mus = np.array([mu for mu, _ in cf.blocks])
    fps: List[RGFixedPointTensor] = []
    for _, blk in cf.blocks:
        fps.append(rg_fixed_point_tensor(block(blk, q)))
    chis = [blk.chi for _, blk in cf.blocks]
    bond_d = max(chis)
    cdim = max(r, 2)
    use_c = r > 1
    use_bonds = bond_d > 1

    weights = mus.astype(complex) ** n_sites
    alphas = weights / np.linalg.norm(weights)

    lat = Lattice((n_sites,), local_dim=d)
    register = [(i, "s", d) for i in range(n_sites)]
    system = [(i, "s") for i in range(n_sites)]
    hub = lambda b: b * q
    tail = lambda b: b * q + q - 1

    # ---- shared unitaries -------------------------------------------------
    bell = gates.bell_pair_gate(bond_d) if use_bonds else None
    prep = None
    bell_c = None
    if use_c:
        prep = gates.complete_to_unitary({0: np.concatenate([alphas, np.zeros(cdim - r)])})
        bell_c = gates.bell_pair_gate(cdim) if cdim == r else _embedded_bell_gate(cdim, r)
    bond_writer = None
    if use_bonds:
        cols: Dict[int, np.ndarray] = {}
        for k in range(r):
            chi_k = chis[k]
            bond = np.zeros((bond_d, bond_d), dtype=complex)
            bond[:chi_k, :chi_k] = fps[k].data.bond_matrix
            vec = np.zeros((cdim if use_c else 1) * bond_d * bond_d, dtype=complex)
            for rr in range(chi_k):
                for lp in range(chi_k):
                    slot = ((k if use_c else 0) * bond_d + lp) * bond_d + rr
                    vec[slot] = bond[rr, lp]
            cols[(k if use_c else 0) * bond_d * bond_d] = vec
        cols, _ = _polished_columns(cols)
        bond_writer = gates.complete_to_unitary(cols)
    wcols: Dict[int, np.ndarray] = {}
    dq = d**q
    in_dims = ([cdim] if use_c else []) + ([bond_d, bond_d] if use_bonds else [])
    head_dim = int(np.prod(in_dims, dtype=np.int64)) if in_dims else 1
    for k in range(r):
        chi_k = chis[k]
        u_k = fps[k].isometry
        for i in range(chi_k):
            for j in range(chi_k):
                if use_c and use_bonds:
                    head = (k * bond_d + i) * bond_d + j
                elif use_c:
                    head = k  # chi_k == 1 here, so (i, j) == (0, 0)
                elif use_bonds:
                    head = i * bond_d + j
                else:
                    head = 0
                # ancilla outputs land in |0...0>, so the column occupies the
                # leading d^q slice regardless of the input head index
                vec = np.zeros(head_dim * dq, dtype=complex)
                vec[:dq] = u_k[:, i * chi_k + j]
                wcols[head * dq] = vec
    wcols, writer_defect = _polished_columns(wcols)
    writer = gates.complete_to_unitary(wcols)

    # ---- helper fragments --------------------------------------------------
    def pair_add_actions(b):
        return [
            cx.add_ancilla(tail(b), "Rp", bond_d),
            cx.add_ancilla(hub((b + 1) % m_sites), "L", bond_d),
        ]

    def pair_gate(b):
        return cx.Gate(((tail(b), "Rp"), (hub((b + 1) % m_sites), "L")), bell)

    def bond_write_entries(b):
        ent = [(hub(b), "C")] if use_c else []
        return ent + [(tail(b), "Lp"), (tail(b), "R")]

    def writer_entries(b):
        ent = [(hub(b), "C")] if use_c else []
        if use_bonds:
            ent += [(hub(b), "L"), (tail(b), "R")]
        return ent + [(hub(b) + jj, "s") for jj in range(q)]

    def writer_removals(b):
        acts = []
        if use_c:
            acts.append(cx.remove_ancilla(hub(b), "C"))
        if use_bonds:
            acts += [cx.remove_ancilla(hub(b), "L"), cx.remove_ancilla(tail(b), "R")]
        return acts

    # ---- program (block-interleaved, narrow register) ----------------------
    program: List = []
    if use_c:
        program.append(
            ApplyLayers(
                [
                    cx.LocalLayer(
                        [cx.add_ancilla(hub(b), "C", cdim) for b in range(m_sites)]
                        + [cx.add_ancilla(hub(b), "Cp", cdim) for b in range(1, m_sites)]
                        + [cx.local_op([(hub(m_sites - 1), "C")], prep)]
                    ),
                    cx.LocalLayer(
                        [
                            cx.local_op([(hub(b), "C"), (hub(b + 1), "Cp")], bell_c)
                            for b in range(m_sites - 1)
                        ]
                    ),
                    cx.LocalLayer(
                        [
                            cx.local_op([(hub(b), "C"), (hub(b), "Cp")], gates.cnot_d(cdim))
                            for b in range(1, m_sites)
                        ]
                    ),
                ]
            )
        )
        for b in range(1, m_sites):
            program.append(Measure(MeasurementSpec((hub(b), "Cp"), f"c{b}")))

        def c_fix(outcomes):
            acts = []
            for b in range(m_sites - 1):
                shift = -sum(outcomes[f"c{j}"] for j in range(b + 1, m_sites)) % cdim
                if shift:
                    acts.append(cx.local_op([(hub(b), "C")], gates.shift_x(cdim, shift)))
            return acts

        program.append(Correct(c_fix, "block label alignment"))

    for b in range(m_sites):
        if use_bonds:
            layers = [
                cx.LocalLayer(
                    pair_add_actions(b)
                    + [cx.add_ancilla(tail(b), "Lp", bond_d), cx.add_ancilla(tail(b), "R", bond_d)]
                ),
                cx.GateLayer([pair_gate(b)]),
                cx.LocalLayer([cx.local_op(bond_write_entries(b), bond_writer)]),
            ]
            program.append(ApplyLayers(layers))
        if b >= 1:
            program.append(
                ApplyLayers(
                    [
                        cx.LocalLayer(
                            [cx.local_op(writer_entries(b), writer)] + writer_removals(b)
                        )
                    ]
                )
            )
        if use_bonds:
            program.extend(
                _teleport_steps(
                    (tail(b), "Lp"), (tail(b), "Rp"), (hub((b + 1) % m_sites), "L"), bond_d, f"T{b}"
                )
            )
    program.append(
        ApplyLayers(
            [cx.LocalLayer([cx.local_op(writer_entries(0), writer)] + writer_removals(0))]
        )
    )

    # ---- circuit view (staged, fully nearest-neighbor) ----------------------
    circuit_layers: List = []
    if use_bonds:
        circuit_layers.append(
            cx.LocalLayer(
                [a for b in range(m_sites) for a in pair_add_actions(b)]
                + [cx.add_ancilla(tail(b), "Lp", bond_d) for b in range(m_sites)]
                + [cx.add_ancilla(tail(b), "R", bond_d) for b in range(m_sites)]
            )
        )
        for par in (0, 1):
            circuit_layers.append(cx.GateLayer([pair_gate(b) for b in range(par, m_sites, 2)]))
    if use_c:
        circuit_layers.append(
            cx.LocalLayer(
                [cx.add_ancilla(hub(b), "C", cdim) for b in range(m_sites)]
                + [cx.add_ancilla(hub(b), "Cp", cdim) for b in range(1, m_sites)]
                + [cx.local_op([(hub(m_sites - 1), "C")], prep)]
            )
        )
        for par in (0, 1):
            for b in range(par, m_sites - 1, 2):
                circuit_layers.append(
                    cx.LocalLayer(
                        [
                            cx.add_ancilla(hub(b), "mv", cdim),
                            cx.local_op([(hub(b), "C"), (hub(b), "mv")], bell_c),
                        ]
                    )
                )
                circuit_layers.extend(
                    _conveyor(lat, (hub(b), "mv"), (hub(b + 1), "Cp"), cdim, "cchain")
                )
                circuit_layers.append(cx.LocalLayer([cx.remove_ancilla(hub(b), "mv")]))
        circuit_layers.append(
            cx.LocalLayer(
                [
                    cx.local_op([(hub(b), "C"), (hub(b), "Cp")], gates.cnot_d(cdim))
                    for b in range(1, m_sites)
                ]
            )
        )
    if use_bonds:
        for b in range(m_sites):
            if use_c and q > 1:
                circuit_layers.append(cx.LocalLayer([cx.add_ancilla(tail(b), "Cmv", cdim)]))
                circuit_layers.extend(_conveyor(lat, (hub(b), "C"), (tail(b), "Cmv"), cdim, "cpath"))
                circuit_layers.append(
                    cx.LocalLayer(
                        [
                            cx.local_op(
                                [(tail(b), "Cmv"), (tail(b), "Lp"), (tail(b), "R")], bond_writer
                            )
                        ]
                    )
                )
                circuit_layers.extend(_conveyor(lat, (tail(b), "Cmv"), (hub(b), "C"), cdim, "cpath"))
                circuit_layers.append(cx.LocalLayer([cx.remove_ancilla(tail(b), "Cmv")]))
            else:
                circuit_layers.append(
                    cx.LocalLayer([cx.local_op(bond_write_entries(b), bond_writer)])
                )
    for b in range(m_sites):
        circ = []
        entries = []
        if use_c:
            entries.append((hub(b), "C"))
        if use_bonds:
            circ.append(cx.LocalLayer([cx.add_ancilla(hub(b), "Rmv", bond_d)]))
            circ.extend(_conveyor(lat, (tail(b), "R"), (hub(b), "Rmv"), bond_d, "rpath"))
            entries += [(hub(b), "L"), (hub(b), "Rmv")]
        entries.append((hub(b), "s"))
        for jj in range(1, q):
            circ.append(cx.LocalLayer([cx.add_ancilla(hub(b), f"w{jj}", d)]))
            circ.extend(_conveyor(lat, (hub(b) + jj, "s"), (hub(b), f"w{jj}"), d, f"wpath{jj}"))
            entries.append((hub(b), f"w{jj}"))
        circ.append(cx.LocalLayer([cx.local_op(entries, writer)]))
        for jj in range(1, q):
            circ.extend(_conveyor(lat, (hub(b), f"w{jj}"), (hub(b) + jj, "s"), d, f"wpath{jj}"))
            circ.append(cx.LocalLayer([cx.remove_ancilla(hub(b), f"w{jj}")]))
        removals = []
        if use_c:
            removals.append(cx.remove_ancilla(hub(b), "C"))
        if use_bonds:
            removals += [cx.remove_ancilla(hub(b), "L"), cx.remove_ancilla(hub(b), "Rmv")]
        if removals:
            circ.append(cx.LocalLayer(removals))
        circuit_layers.extend(circ)

    circuit = cx.Circuit(lat, circuit_layers)
    target = None
    if d**n_sites <= max_amplitudes():
        target = state_from_mps(mps, n_sites)
    proto = Protocol(
        name=f"mps-pipeline[q={q},N={n_sites}]",
        lattice=lat,
        register=register,
        program=program,
        circuit=circuit,
        system_entries=system,
        target=target,
        clifford=False,
    )
    # aggregate bound data: worst block
    reports = []
    for (mu, blk) in cf.blocks:
        if blk.chi == 1:
            continue
        reports.append(bound_report(blk, q, m_sites))
    if reports:
        worst = max(reports, key=lambda rep: rep.epsilon_q)
    else:
        measured = sum(
            abs(alphas[k]) ** 2 * fidelity_deficit(block(cf.blocks[k][1], q), fps[k].b, m_sites)
            for k in range(r)
        )
        worst = BoundReport(
            math.inf, q, m_sites, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, float(measured), True
        )
    return PipelineResult(proto, worst, alphas, chis, writer_defect, circuit.depth())


def _embedded_bell_gate(cdim: int, r: int) -> np.ndarray:
    from . import gates

    v = np.zeros(cdim * cdim, dtype=complex)
    for k in range(r):
        v[k * cdim + k] = 1.0 / math.sqrt(r)
    return gates.complete_to_unitary({0: v})

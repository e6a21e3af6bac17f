"""Command-line front end: protocol runs, MPS sweeps, diagnostics, reports.

Exit codes: 0 success / certification passed; 1 certification failed;
2 configuration error; 3 capacity exceeded; 4 non-normal tensor without
--allow-blocks.

All sampling commands require an explicit --seed so reports are reproducible;
identical configurations produce identical reports except for the timing
fields. The dense amplitude cap can be overridden with QCCC_MAX_AMPLITUDES.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from . import circuits as cx
from . import gates, mps
from .lattice import Lattice
from .locc import BranchCapExceeded, ProtocolError, enumerate_branches, run_sampled
from .statevector import CapacityError, PureState, QuditRegister, RegionOperator, pauli_on

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_CAPACITY = 3
EXIT_NOT_NORMAL = 4


class ConfigError(ValueError):
    pass


def _write_report(report: dict, out_path):
    text = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _base_report(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    return {"version": __version__, "config": cfg, "timings": {}}


def _build_protocol(args):
    from . import protocols as P

    name = args.protocol
    if name == "ghz":
        if args.n < 2:
            raise ConfigError("ghz needs --n >= 2")
        return P.ghz_protocol(args.n)
    if name == "w":
        if args.n < 2:
            raise ConfigError("w needs --n >= 2")
        return P.w_protocol(args.n)
    if name == "tc":
        if args.n < 4 or args.n % 2:
            raise ConfigError("tc needs even --n >= 4")
        return P.toric_code_protocol(args.n)
    if name == "rg":
        if args.spec:
            with open(args.spec) as fh:
                raw = json.load(fh)
            spec = P.RGFixedPointSpec(
                B=int(raw["B"]),
                alphas=np.array([complex(re, im) for re, im in raw["alphas"]]),
                bond_states=(
                    [np.array([complex(re, im) for re, im in b]) for b in raw["bond_states"]]
                    if "bond_states" in raw
                    else np.array([complex(re, im) for re, im in raw["bond_state"]])
                ),
                N=int(raw.get("N", args.n)),
                bond_dim=int(raw.get("bond_dim", 2)),
            )
        else:
            if args.n < 2:
                raise ConfigError("rg needs --n >= 2")
            spec = P.RGFixedPointSpec(
                2, np.array([1.0, 1.0]) / np.sqrt(2.0), gates.bell_state(2), args.n
            )
        return P.rg_fixed_point_protocol(spec)
    raise ConfigError(f"unknown protocol {name!r}")


def cmd_prepare(args) -> int:
    report = _base_report(args)
    t0 = time.time()
    proto, _target = _build_protocol(args)
    report["protocol"] = proto.name
    report["depth"] = proto.depth()
    violations = proto.validate_circuit()
    report["circuit_valid"] = not violations
    if violations:
        report["violations"] = [
            {"layer": v.layer, "sites": list(v.sites), "reason": v.reason} for v in violations
        ]
    ok = True
    if args.mode == "enumerate":
        res = enumerate_branches(proto, backend=args.backend)
        report["verdict"] = res.verdict
        report["n_branches"] = len(res.reports)
        report["min_fidelity"] = res.min_fidelity
        report["max_fidelity"] = res.max_fidelity
        report["total_probability"] = res.total_probability()
        report["branches"] = [
            {
                "outcomes": [[t, k] for t, k, _ in r.record.outcomes],
                "probability": r.probability,
                "fidelity": r.fidelity,
            }
            for r in res.reports
        ]
        ok = res.deterministic and res.min_fidelity >= 1 - 1e-9
    else:
        if args.seed is None:
            raise ConfigError("sample mode requires --seed")
        state, record = run_sampled(proto, seed=args.seed, backend=args.backend)
        report["outcomes"] = [[t, k] for t, k, _ in record.outcomes]
        if args.backend == "dense" and proto.target is not None:
            fid = state.fidelity(proto.target)
            report["fidelity"] = fid
            ok = fid >= 1 - 1e-9
        elif args.backend == "tableau" and proto.target_generators is not None:
            from .stabilizer import StabilizerTableau

            tgt = StabilizerTableau.from_generators(proto.target_generators)
            match = state.tab.states_equal(tgt)
            report["stabilizer_match"] = match
            ok = match
    report["passed"] = bool(ok)
    report["timings"]["total_s"] = time.time() - t0
    _write_report(report, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_mps(args) -> int:
    report = _base_report(args)
    t0 = time.time()
    if args.fixture:
        tensor = mps.fixture(args.fixture)
    elif args.file:
        with open(args.file) as fh:
            tensor = mps.MPS.load(fh.read())
    else:
        raise ConfigError("provide --fixture or --file")
    cf = mps.canonicalize(tensor)
    report["blocks"] = [
        {"mu": mu, "chi": blk.chi, "normal": bool(mps.is_normal(blk))} for mu, blk in cf.blocks
    ]
    if cf.reducible and not args.allow_blocks:
        report["error"] = "tensor is not normal; rerun with --allow-blocks"
        _write_report(report, args.out)
        return EXIT_NOT_NORMAL
    qs = [int(x) for x in args.q_list.split(",")] if args.q_list else []
    if qs and not cf.reducible:
        sweeps = []
        for q in qs:
            rep = mps.bound_report(cf.blocks[0][1], q, args.m_sites)
            sweeps.append(rep.to_dict())
        report["bound_sweep"] = sweeps
    ok = True
    if args.pipeline:
        if args.n is None:
            raise ConfigError("--pipeline needs --n")
        res = mps.preparation_pipeline(tensor, args.q, args.n)
        out = enumerate_branches(res.protocol)
        report["pipeline"] = {
            "depth": res.depth,
            "verdict": out.verdict,
            "n_branches": len(out.reports),
            "min_fidelity": out.min_fidelity,
            "epsilon_q": res.report.epsilon_q,
            "measured_deficit": res.report.measured_deficit,
            "writer_defect": res.writer_defect,
        }
        ok = out.deterministic and out.min_fidelity >= 1 - max(res.report.epsilon_q, 1e-9)
    report["passed"] = bool(ok)
    report["timings"]["total_s"] = time.time() - t0
    _write_report(report, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_diagnose(args) -> int:
    from . import diagnostics as dg
    from . import protocols as P

    report = _base_report(args)
    t0 = time.time()
    ok = True
    if args.check == "prop1":
        n = args.n
        lat = Lattice((n,))
        if args.state_in:
            state = PureState.load(open(args.state_in).read())
            n = state.register.size
            lat = Lattice((n,))
            op_a = pauli_on((args.site_a, "s"), args.op_a)
            op_b = pauli_on((args.site_b if args.site_b is not None else n // 2, "s"), args.op_b)
        elif args.target == "ghz":
            state = P.ghz_state(n)
            op_a, op_b = pauli_on((0, "s"), "Z"), pauli_on((n // 2, "s"), "Z")
        elif args.target == "w":
            state = P.w_state(n)
            sp = np.array([[0, 1], [0, 0]], dtype=complex)
            op_a = RegionOperator(((0, "s"),), sp)
            op_b = RegionOperator(((n // 2, "s"),), sp.conj().T)
        elif args.target == "product":
            state = PureState.product(QuditRegister([(i, "s", 2) for i in range(n)]))
            op_a, op_b = pauli_on((0, "s"), "X"), pauli_on((n // 2, "s"), "Z")
        else:
            raise ConfigError("prop1 targets: ghz, w, product")
        rep = dg.check_factorization(state, lat, op_a, op_b, depth_claim=args.depth_claim)
        report["factorization"] = rep.to_dict()
    elif args.check == "arealaw":
        proto, _ = _build_protocol(args)
        n_sites = proto.lattice.n_sites
        regions = []
        if proto.lattice.ndim == 1:
            for ln in range(1, n_sites):
                regions.append(list(range(ln)))
        else:
            side = proto.lattice.dims[0]
            for rows in range(1, side):
                regions.append(
                    [proto.lattice.site_index((i, j)) for i in range(rows) for j in range(side)]
                )
        rep = dg.area_law_audit(proto, regions, seed=args.seed or 1, rank_tol=args.rank_tol)
        report["arealaw"] = rep.to_dict()
        report["rank_tol"] = args.rank_tol
        ok = rep.passes
    elif args.check == "cj":
        if args.target == "ghz":
            cj = dg.ghz_unitary_cj(args.n)
        else:
            raise ConfigError("cj targets: ghz")
        table_ok = dg.verify_clifford_table(cj)
        report["clifford_table"] = table_ok
        rng = np.random.default_rng(args.seed or 1)
        det = True
        minf = 1.0
        if args.n <= 3:
            u = cj.u_dense()
            for _ in range(5):
                psi = rng.normal(size=2**args.n) + 1j * rng.normal(size=2**args.n)
                psi /= np.linalg.norm(psi)
                inp = PureState(QuditRegister([(k, "in", 2) for k in range(args.n)]), psi)
                d, f = dg.enumerate_cj_branches(cj, inp, reference=u @ psi)
                det = det and d
                minf = min(minf, f)
        report["deterministic"] = det
        report["min_fidelity"] = minf
        ok = table_ok and det
    else:
        raise ConfigError(f"unknown check {args.check!r}")
    report["passed"] = bool(ok)
    report["timings"]["total_s"] = time.time() - t0
    _write_report(report, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_range(args) -> int:
    report = _base_report(args)
    t0 = time.time()
    lat = Lattice((args.n,), local_dim=args.d)
    if args.shift:
        circuit = cx.build_shift_circuit(lat)
        u = _shift_unitary(lat)
        r = cx.estimate_range(u, lat)
        report["operator"] = "shift"
    else:
        if args.seed is None:
            raise ConfigError("random circuits require --seed")
        rng = np.random.default_rng(args.seed)
        circuit = _random_circuit(lat, args.depth, rng)
        reg = [(i, "s", lat.local_dim) for i in range(lat.n_sites)]
        u = cx.circuit_unitary(circuit, reg)
        r = cx.estimate_range(u, lat)
        report["operator"] = f"random depth-{args.depth} circuit"
        report["depth"] = args.depth
    report["range"] = r
    report["passed"] = True
    report["timings"]["total_s"] = time.time() - t0
    _write_report(report, args.out)
    return EXIT_OK


def cmd_shift(args) -> int:
    report = _base_report(args)
    t0 = time.time()
    lat = Lattice((args.n,), local_dim=args.d)
    circuit = cx.build_shift_circuit(lat)
    report["depth"] = circuit.depth()
    ok = circuit.depth() == 2
    n, d = lat.n_sites, lat.local_dim
    reg = QuditRegister([(i, "s", d) for i in range(n)])
    checked = 0
    for basis in np.ndindex(*(d,) * n):
        st = PureState.product(reg, {(i, "s"): np.eye(d)[basis[i]] for i in range(n)})
        cx.run(circuit, st)
        shifted = tuple(basis[(i + 1) % n] for i in range(n))
        idx = 0
        for i in range(n):
            idx = idx * d + shifted[i]
        if abs(st.amps[idx]) < 1 - 1e-9:
            ok = False
            break
        checked += 1
    report["basis_states_checked"] = checked
    report["passed"] = bool(ok)
    report["timings"]["total_s"] = time.time() - t0
    _write_report(report, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def _shift_unitary(lat: Lattice) -> np.ndarray:
    n, d = lat.n_sites, lat.local_dim
    dim = d**n
    u = np.zeros((dim, dim), dtype=complex)
    for basis in np.ndindex(*(d,) * n):
        src = 0
        for i in range(n):
            src = src * d + basis[i]
        shifted = tuple(basis[(i + 1) % n] for i in range(n))
        dst = 0
        for i in range(n):
            dst = dst * d + shifted[i]
        u[dst, src] = 1.0
    return u


def _random_circuit(lat: Lattice, depth: int, rng: np.random.Generator) -> cx.Circuit:
    n = lat.n_sites
    d = lat.local_dim
    layers = []
    for layer_i in range(depth):
        offset = layer_i % 2
        gates_ = []
        for i in range(offset, n - 1, 2):
            gates_.append(cx.Gate(((i, "s"), (i + 1, "s")), gates.random_unitary(d * d, rng)))
        layers.append(cx.GateLayer(gates_))
    return cx.Circuit(lat, layers)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qccc",
        description="Simulate and certify measurement-assisted (LOCC) constant-depth circuits.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="run a preparation protocol and certify it")
    p.add_argument("--protocol", required=True, choices=["ghz", "w", "rg", "tc"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--spec", help="JSON spec file (rg only)")
    p.add_argument("--backend", default="dense", choices=["dense", "tableau"])
    p.add_argument("--mode", default="enumerate", choices=["sample", "enumerate"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("mps", help="canonical form, bound sweeps, pipeline certification")
    p.add_argument("--fixture", choices=sorted(mps.FIXTURES))
    p.add_argument("--file")
    p.add_argument("--q-list", default="")
    p.add_argument("--m-sites", type=int, default=6)
    p.add_argument("--allow-blocks", action="store_true")
    p.add_argument("--pipeline", action="store_true")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--n", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mps)

    p = sub.add_parser("diagnose", help="factorization witness, area law, Clifford gadget")
    p.add_argument("--check", required=True, choices=["prop1", "arealaw", "cj"])
    p.add_argument("--target", default="ghz")
    p.add_argument("--protocol", choices=["ghz", "w", "rg", "tc"])
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--depth-claim", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--spec")
    p.add_argument("--in", dest="state_in", help="state JSON for prop1 checks")
    p.add_argument("--site-a", type=int, default=0)
    p.add_argument("--site-b", type=int)
    p.add_argument("--op-a", default="Z")
    p.add_argument("--op-b", default="Z")
    p.add_argument("--rank-tol", type=float, default=1e-10)
    p.add_argument("--report", dest="out")
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("range", help="estimate the light-cone range of a unitary")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--shift", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_range)

    p = sub.add_parser("shift", help="build and verify the depth-2 shift circuit")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_shift)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except BranchCapExceeded as exc:
        print(f"capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())

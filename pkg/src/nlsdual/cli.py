"""Command-line front end: reproducible verification runs, machine output.

Every subcommand emits a JSON report (schema version 1) carrying its own
configuration, and exits nonzero when any requested identity fails.  LaTeX
and plain-text renderings of matrices are available where they make sense.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import hierarchy, brackets, numlab

REPORT_VERSION = 1


def _report(command: str, config: dict, status: str, body: dict) -> dict:
    return {"report_version": REPORT_VERSION, "command": command,
            "config": config, "status": status, **body}


def _emit(report: dict, args) -> int:
    text = json.dumps(report, indent=2, default=str)
    out = args.out
    if out is None and os.environ.get("NLSDUAL_OUTDIR"):
        out = os.path.join(os.environ["NLSDUAL_OUTDIR"], f"{report['command']}.json")
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
        print(f"wrote {out}")
    else:
        print(text)
    return 0 if report.get("status") in ("pass", "ok") else 1


def _matrix_payload(M, fmt: str):
    if fmt == "latex":
        return M.to_latex()
    if fmt == "text":
        return repr(M)
    return M.to_json_obj()


def _lagrangian(which: str):
    lvl = {"l2": 2, "l3": 3, "l4": 4}[which]
    return lvl, brackets.build_level_lagrangian(lvl)


def cmd_gen_v(args) -> int:
    U = hierarchy.build_u()
    V = hierarchy.generate_partner(U, args.gamma, args.level)
    ok = V.trace_zero() and V.sigma_symmetric() and V.graded()
    rep = _report("gen-v", {"level": args.level, "gamma": args.gamma, "format": args.format},
                  "pass" if ok else "fail",
                  {"matrix": _matrix_payload(V, args.format),
                   "structure": {"traceless": V.trace_zero(),
                                 "sigma_symmetric": V.sigma_symmetric(),
                                 "graded": V.graded()}})
    return _emit(rep, args)


def cmd_gen_dual(args) -> int:
    D = hierarchy.dual_hierarchy(args.base, args.level, rewrite_on_shell=args.on_shell)
    ok = D.trace_zero() and D.sigma_symmetric()
    rep = _report("gen-dual",
                  {"base": args.base, "level": args.level, "on_shell": args.on_shell,
                   "format": args.format},
                  "pass" if ok else "fail",
                  {"matrix": _matrix_payload(D, args.format)})
    return _emit(rep, args)


def cmd_charges(args) -> int:
    U = hierarchy.build_u()
    ladder = hierarchy.density_ladder(U, args.count)
    body = {"densities": []}
    ok = True
    for n, d in enumerate(ladder, start=1):
        real = (d.conjugate() - d).is_zero()
        dim = d.scaling_dimension()
        ok = ok and real and dim == n + 1
        body["densities"].append({
            "n": n, "dimension": dim, "real": real,
            "density": d.to_json_obj() if args.format == "json" else repr(d),
        })
    rep = _report("charges", {"count": args.count, "format": args.format},
                  "pass" if ok else "fail", body)
    return _emit(rep, args)


def cmd_verify_zc(args) -> int:
    U = hierarchy.build_u()
    V = hierarchy.generate_partner(U, +1, args.level)
    try:
        rules = hierarchy.solve_evolution(U, V)
        status = "pass"
        rules_repr = {repr(k): repr(v) for k, v in rules.items()}
    except ValueError as exc:
        status = "fail"
        rules_repr = {"error": str(exc)}
    rep = _report("verify-zc", {"level": args.level}, status,
                  {"evolution_rules": rules_repr})
    return _emit(rep, args)


_MATRIX_CHOICES = ("u", "v2", "v3", "v4")


def cmd_verify_rmatrix(args) -> int:
    U = hierarchy.build_u()
    if args.matrix == "u":
        A, gamma = U, +1
        table = brackets.dirac_pipeline(brackets.build_level_lagrangian(2), "time").table
    else:
        lvl = int(args.matrix[1:])
        A, gamma = hierarchy.generate_partner(U, +1, lvl), -1
        table = brackets.dirac_pipeline(brackets.build_level_lagrangian(lvl), "space").table
    report = brackets.verify_rmatrix(A, table, gamma)
    rep = _report("verify-rmatrix", {"matrix": args.matrix, "gamma": gamma},
                  report["status"], {"result": report})
    return _emit(rep, args)


def cmd_dirac(args) -> int:
    lvl, L = _lagrangian(args.lagrangian)
    res = brackets.dirac_pipeline(L, args.direction)
    cs = res.constraints
    body = {
        "level": lvl,
        "constraints": {name: repr(c) for name, c in zip(cs.constraint_names, cs.constraints)},
        "constraint_matrix": [[repr(c) for c in row] for row in cs.M],
        "multipliers": [repr(a) for a in cs.multipliers],
        "second_class": cs.second_class,
        "hamiltonian_density": repr(res.hamiltonian_density),
        "bracket_table": {f"{{{a!r}, {b!r}}}": repr(v) for a, b, v in res.table.nonzero_pairs()},
    }
    rules = hierarchy.evolution_rules(lvl)
    ham = brackets.hamilton_check(res, rules)
    body["hamilton_equations"] = ham
    rep = _report("dirac", {"lagrangian": args.lagrangian, "direction": args.direction},
                  ham["status"], body)
    return _emit(rep, args)


def cmd_sim(args) -> int:
    rng = np.random.default_rng(args.seed)
    n, L = args.grid, np.pi
    kappa = args.kappa
    if args.case == "planewave":
        mode = 2
        k = mode * np.pi / L
        amp = float(np.sqrt((2 * np.pi - k * k) / (2 * kappa)))
        state = numlab.plane_wave(n, L, kappa, amp, mode)
    elif args.case == "soliton":
        # approximately periodic on a finite box; exploratory only
        if kappa >= 0:
            kappa = -1.0
        x = -L + (2 * L / n) * np.arange(n)
        amp = 2.0
        state = numlab.GridState(amp / np.cosh(amp * x), L, kappa, "x")
    else:
        x = -L + (2 * L / n) * np.arange(n)
        prof = 0.7 + 0.2 * np.cos(x) + 0.1 * rng.standard_normal()
        state = numlab.GridState(prof * np.exp(1j * x), L, kappa, "x")

    traj = numlab.evolve_nls(state, (0.0, args.t_end), args.steps,
                             n_snapshots=5, record_fine=(args.check == "monodromy"))
    U = hierarchy.build_u()
    body: dict = {"case": args.case, "kappa": kappa}
    ok = True
    if args.check == "charges":
        ladder = hierarchy.density_ladder(U, 4)
        drifts = []
        series = []
        for i, d in enumerate(ladder, start=1):
            ch = numlab.charge_evaluate(d, traj)
            series.append(ch)
            scale = max(1e-12, float(np.abs(ch[0])))
            drift = float(np.max(np.abs(ch - ch[0])) / scale)
            drifts.append({"n": i, "value": complex(ch[0]), "rel_drift": drift})
            ok = ok and drift < args.tol
        body["charges"] = drifts
        if args.csv:
            with open(args.csv, "w") as fh:
                fh.write("time," + ",".join(f"charge_{i}" for i in range(1, len(series) + 1)) + "\n")
                for row, t in enumerate(traj.times):
                    vals = ",".join(repr(float(series[i][row].real)) for i in range(len(series)))
                    fh.write(f"{float(t)!r},{vals}\n")
            body["csv"] = args.csv
    else:
        lams = [0.5, -1.0, 1.5, 2.2, -1.7, 0.8, 2.7, -0.4]
        sub = max(2, 512 // n)      # keep the x-integration step resolution-independent
        traces = []
        for i in range(len(traj.snapshots)):
            s = numlab.transfer_matrix(U, traj.state(i), lams, "along_x",
                                       det_tol=1e-8, substeps=sub)
            traces.append(s.traces())
        traces = np.array(traces)
        drift_u = float(np.max(np.abs(traces - traces[0]) / np.abs(traces[0])))
        body["space_monodromy_trace_drift"] = drift_u
        ok = drift_u < args.tol
        if args.case == "planewave":
            V2 = hierarchy.generate_partner(U, +1, 2)
            trs = []
            for station in (0, n // 4, n // 2, (3 * n) // 4):
                s = numlab.transfer_matrix(V2, traj, lams, "along_t",
                                           station=station, det_tol=1e-8)
                trs.append(s.traces())
            trs = np.array(trs)
            drift_v = float(np.max(np.abs(trs - trs[0]) / np.abs(trs[0])))
            body["time_monodromy_trace_drift"] = drift_v
            ok = ok and drift_v < args.tol
        body["convergence"] = numlab.plane_wave_convergence(base_steps=100)
    rep = _report("sim", {"case": args.case, "check": args.check, "grid": n,
                          "steps": args.steps, "t_end": args.t_end,
                          "tol": args.tol, "seed": args.seed},
                  "pass" if ok else "fail", body)
    return _emit(rep, args)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlsdual",
                                description="exact and numerical verification of the "
                                            "dual Hamiltonian structures of the NLS hierarchy")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default=None, help="write the JSON report here")
        sp.add_argument("--format", choices=("json", "latex", "text"), default="text")

    sp = sub.add_parser("gen-v", help="generate a flow matrix of the hierarchy")
    sp.add_argument("--level", type=int, required=True)
    sp.add_argument("--gamma", type=int, choices=(1, -1), default=1)
    common(sp)
    sp.set_defaults(func=cmd_gen_v)

    sp = sub.add_parser("gen-dual", help="generate a dual-hierarchy matrix")
    sp.add_argument("--base", type=int, default=2)
    sp.add_argument("--level", type=int, required=True)
    sp.add_argument("--on-shell", action="store_true", help="rewrite t-jets into x-jets")
    common(sp)
    sp.set_defaults(func=cmd_gen_dual)

    sp = sub.add_parser("charges", help="conserved-density ladder")
    sp.add_argument("--count", type=int, default=4)
    common(sp)
    sp.set_defaults(func=cmd_charges)

    sp = sub.add_parser("verify-zc", help="zero-curvature evolution extraction")
    sp.add_argument("--level", type=int, required=True)
    common(sp)
    sp.set_defaults(func=cmd_verify_zc)

    sp = sub.add_parser("verify-rmatrix", help="ultralocal r-matrix identity")
    sp.add_argument("--matrix", choices=_MATRIX_CHOICES, required=True)
    common(sp)
    sp.set_defaults(func=cmd_verify_rmatrix)

    sp = sub.add_parser("dirac", help="Legendre/Dirac analysis of a level Lagrangian")
    sp.add_argument("--lagrangian", choices=("l2", "l3", "l4"), required=True)
    sp.add_argument("--direction", choices=("time", "space"), required=True)
    common(sp)
    sp.set_defaults(func=cmd_dirac)

    sp = sub.add_parser("sim", help="numerical conservation checks")
    sp.add_argument("--case", choices=("planewave", "custom", "soliton"), default="planewave")
    sp.add_argument("--check", choices=("charges", "monodromy"), default="charges")
    sp.add_argument("--grid", type=int, default=256)
    sp.add_argument("--steps", type=int, default=8000)
    sp.add_argument("--t-end", type=float, default=1.0)
    sp.add_argument("--kappa", type=float, default=1.0)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--csv", default=None, help="write the charge time series as CSV")
    common(sp)
    sp.set_defaults(func=cmd_sim)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FloatingPointError, ArithmeticError) as exc:
        err = {"report_version": REPORT_VERSION, "command": args.command,
               "status": "error", "error": str(exc)}
        print(json.dumps(err, indent=2))
        return 2


if __name__ == "__main__":
    sys.exit(main())

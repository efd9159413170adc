"""Command-line entry point: run, compare, certify, check."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .errors import BearingSlamError
from .harness import certificates, compare, export, run, summary, summary_json
from .scenario import Scenario, scenario_ie, scenario_pe


def build_scenario(args) -> Scenario:
    name = args.scenario
    noise = args.noise == "on"
    if name in ("pe", "ie"):
        factory = scenario_pe if name == "pe" else scenario_ie
        kw = {"noise": noise, "seed": args.seed if args.seed is not None else 0}
        if args.horizon is not None:
            kw["horizon"] = args.horizon
        sc = factory(**kw)
    else:
        sc = Scenario.load(name)
        if args.seed is not None:
            sc = replace(sc, seed=args.seed, noise=replace(sc.noise, seed=args.seed))
        if args.noise is not None:
            sc = sc.with_noise(noise) if noise != sc.noise.active else sc
        if args.horizon is not None:
            sc = replace(sc, horizon=args.horizon)
    if args.dt is not None:
        sc = replace(sc, dt=args.dt)
    if args.mapper is not None:
        sc = replace(sc, mapper=args.mapper)
    if args.barl is not None:
        sc = replace(sc, barl_mode=args.barl)
    return sc.validate()


def _common(p):
    p.add_argument("--scenario", default="pe", help="pe, ie, or a path to a JSON scenario file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--mapper", choices=("drem", "gradient"), default=None)
    p.add_argument("--barl", choices=("anchored", "feedback"), default=None)
    p.add_argument("--noise", choices=("on", "off"), default=None)


def _print_final(s: dict):
    f = s.get("final", {})
    if not f:
        return
    print(f"attitude error {f['attitude_error']:.3e}   position error {f['x_err']:.3e} m")
    print("landmark  |vl err|     |l err|      |kf err|")
    for i, (a, b, c) in enumerate(zip(f["vl_err"], f["l_err"], f["kf_err"])):
        print(f"{i:>8}  {a:.3e}    {b:.3e}    {c:.3e}")


def cmd_run(args) -> int:
    rec = run(build_scenario(args))
    s = summary(rec)
    _print_final(s)
    if args.out:
        for p in export(rec, args.out, s):
            print(p)
    return 0


def cmd_compare(args) -> int:
    sc = build_scenario(args)
    rec = run(sc)
    c = compare(sc, record=rec)
    print(f"split at t = {c['t_split']} s (baseline is a reconstructed robo-centric LTV Kalman filter)")
    print("landmark  observer@split  observer@end  baseline@split  baseline@end")
    for i in range(sc.n):
        print(f"{i:>8}  {c['pebo_at_split'][i]:.3e}       {c['pebo_final'][i]:.3e}     "
              f"{c['baseline_at_split'][i]:.3e}       {c['baseline_final'][i]:.3e}")
    if args.out:
        s = summary(rec)
        s["comparison"] = {k: v for k, v in c.items() if k != "traces"}
        for p in export(rec, args.out, s):
            print(p)
    return 0


def cmd_certify(args) -> int:
    rec = run(build_scenario(args))
    rows = []
    for i in range(rec.scenario.n):
        ie, pe = certificates(rec, i)
        rows.append({"IE": ie.to_dict(), "PE": pe.to_dict()})
        print(f"landmark {i}: IE {ie.kind} (t0={ie.t0:g}, t_c={ie.t_c:.3f}, delta={ie.delta:.3e})  "
              f"PE {pe.kind} (T={pe.window_T:g}, delta={pe.delta:.3e})")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "certificates.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_check(args) -> int:
    from .acceptance import run_all

    results = run_all(verbose=True)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "acceptance.json").write_text(summary_json({"checks": [r.to_dict() for r in results]}))
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bearing-slam", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, fn, help_ in (("run", cmd_run, "simulate and run all estimators"),
                            ("compare", cmd_compare, "observer vs baseline error norms"),
                            ("certify", cmd_certify, "excitation certificates per landmark"),
                            ("check", cmd_check, "run the acceptance checks")):
        p = sub.add_parser(verb, help=help_)
        if verb == "check":
            p.add_argument("--out", type=Path, default=None)
        else:
            _common(p)
        p.set_defaults(func=fn)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BearingSlamError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

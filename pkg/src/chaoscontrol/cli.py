"""Command-line entry point.

Exit codes: 0 success, 2 invalid config or usage, 3 verification failed,
4 run failed (partial results and errors.json written), 5 unreadable input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import ConfigError, RecordError, RunFailure, load_config, run, verify
from .torus import (HilbertSpec, TorusError, expectation_p, expectation_q, load_state, make_cat, make_gaussian,
                    make_random, save_state)

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4, 5


def _fail(category: str, message: str, code: int) -> int:
    print(f"error[{category}]: {message}", file=sys.stderr)
    return code


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config, figure_scale=args.figure_scale, output_dir=args.out)
        record = run(config, threads=args.threads)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"error[config]: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except RunFailure as exc:
        return _fail("runtime", f"{exc} (partial record at {exc.record_path})", EXIT_RUNTIME)
    out = config.output_dir if args.out is None else Path(args.out)
    print(json.dumps({"scenario": config.scenario, "output_dir": str(out),
                      "summary": record["results"].get("summary")}, indent=1, default=str))
    return EXIT_OK


def _cmd_verify(args) -> int:
    try:
        report = verify(args.record)
    except RecordError as exc:
        return _fail("io", str(exc), EXIT_IO)
    for line in report.lines():
        print(line)
    print("verification passed" if report.passed else "verification FAILED")
    return EXIT_OK if report.passed else EXIT_VERIFY


def _cmd_state_save(args) -> int:
    try:
        spec = HilbertSpec(args.N, args.grid_offset)
        if args.kind == "gaussian":
            st = make_gaussian(spec, args.q0, args.p0, args.sigma)
        elif args.kind == "cat":
            st = make_cat(spec, args.q1, args.q2, args.p0, args.sigma)
        else:
            st = make_random(spec, args.seed)
    except TorusError as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    try:
        save_state(st, args.path)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    print(f"wrote {args.kind} state, N={args.N}, to {args.path}")
    return EXIT_OK


def _cmd_state_load(args) -> int:
    try:
        st = load_state(args.path)
    except (OSError, ValueError, KeyError) as exc:
        return _fail("io", f"cannot read state {args.path}: {exc}", EXIT_IO)
    info = {"N": st.spec.N, "grid_offset": st.spec.grid_offset, "basis": st.basis.value, "norm": st.norm,
            "mean_q": expectation_q(st), "mean_p": expectation_p(st)}
    print(json.dumps(info, indent=1))
    if args.convert:
        try:
            save_state(st, args.convert)
        except OSError as exc:
            return _fail("io", str(exc), EXIT_IO)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chaoscontrol", description="Kicked-rotor weak-disorder control experiments")
    ap.add_argument("-v", "--verbose", action="store_true", help="log optimizer progress")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="YAML or JSON experiment config")
    r.add_argument("--out", help="output directory (overrides output_dir in the config)")
    r.add_argument("--threads", type=int, default=1, help="worker processes for independent runs")
    r.add_argument("--figure-scale", action="store_true", help="use the large figure-scale defaults (N=256)")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("verify", help="re-check a run record")
    v.add_argument("record", help="record.json or the run directory")
    v.set_defaults(func=_cmd_verify)

    s = sub.add_parser("state", help="save or inspect wavefunction files")
    ssub = s.add_subparsers(dest="state_command", required=True)
    sv = ssub.add_parser("save", help="build a state and write it (.json, else binary)")
    sv.add_argument("kind", choices=("gaussian", "cat", "random"))
    sv.add_argument("path")
    sv.add_argument("--N", type=int, required=True)
    sv.add_argument("--grid-offset", type=float, default=0.0)
    sv.add_argument("--q0", type=float, default=0.5)
    sv.add_argument("--p0", type=float, default=0.0)
    sv.add_argument("--q1", type=float, default=0.25)
    sv.add_argument("--q2", type=float, default=0.75)
    sv.add_argument("--sigma", type=float, default=None)
    sv.add_argument("--seed", type=int, default=0)
    sv.set_defaults(func=_cmd_state_save)
    ld = ssub.add_parser("load", help="read a state file and print a summary")
    ld.add_argument("path")
    ld.add_argument("--convert", help="write the state again to this path (format from suffix)")
    ld.set_defaults(func=_cmd_state_load)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "threads", 1) < 1:
        return _fail("config", "--threads must be >= 1", EXIT_CONFIG)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

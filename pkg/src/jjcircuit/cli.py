"""Command-line front end: bias sweeps and circuit dumps."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import METHODS, ConfigError, load_config
from .hamiltonian import dump_terms, make_basis
from .netlist import NetlistError
from .sweep import Pipeline, run_sweep, to_csv, to_json_lines


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jjcircuit", description=__doc__)
    p.add_argument("--netlist", help="netlist file (overrides the config's netlist)")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--method", choices=METHODS, help="pipeline (default: config value or brute)")
    p.add_argument("--levels", type=int, help="number of eigenvalues per sweep point")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--dump-topology", action="store_true", help="print the spanning forest as JSON and exit")
    p.add_argument("--dump-terms", action="store_true", help="print Hamiltonian terms as JSON and exit")
    p.add_argument("--corrections-report", metavar="PATH",
                   help="write per-point correction channels (hier+pt) as JSON")
    p.add_argument("--seed", type=int, default=0, help="Lanczos starting-vector seed")
    p.add_argument("--threads", type=int, default=1, help="sweep points solved concurrently")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.netlist and not args.config:
        print("error: give --netlist and/or --config", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.netlist)
        if args.method:
            cfg.method = args.method
            cfg.validate()
        if args.dump_topology or args.dump_terms:
            pipe = Pipeline(cfg, args.seed)
            if args.dump_topology:
                _emit(json.dumps(pipe.forest.to_json(), indent=1) + "\n", args.out)
            else:
                cc = pipe.compile(cfg.sweep.values()[0])
                basis = make_basis(pipe.transform, pipe.truncations)
                _emit(dump_terms(cc.terms(basis), pipe.transform.names) + "\n", args.out)
            return 0
        levels = args.levels or cfg.levels
        results = run_sweep(cfg, cfg.method, levels, args.threads, args.seed)
    except (ConfigError, NetlistError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    text = to_csv(results, cfg, levels) if args.format == "csv" else to_json_lines(results, cfg)
    _emit(text, args.out)
    if args.corrections_report:
        Path(args.corrections_report).write_text(json.dumps(
            [{"index": r.index, "value": r.value, "report": r.report} for r in results], indent=1))
    failed = [r.index for r in results if r.error]
    if failed:
        print(f"warning: {len(failed)} sweep point(s) failed: {failed}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

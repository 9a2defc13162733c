"""Qubit-splitting error of hierarchical diagonalization over a retention grid.

Runs the shipped example (or any config with a two-group partition) at one
bias point, solves the full Hamiltonian once, then repeats the hierarchical
solve for every (N_first, N_second) pair and prints the splitting error.
"""

import argparse
import time
from dataclasses import replace

from jjcircuit.config import load_config
from jjcircuit.hierarchy import Group, run_hierarchy
from jjcircuit.sweep import Pipeline


def _ints(text):
    return [int(x) for x in text.split(",")]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default=None, help="YAML config (default: shipped example)")
    p.add_argument("--value", type=float, default=None, help="sweep parameter value (default: sweep start)")
    p.add_argument("--first", type=_ints, default=[5, 10, 20, 40, 60], help="retention list, first group")
    p.add_argument("--second", type=_ints, default=[3, 5, 10, 25], help="retention list, second group")
    p.add_argument("--excite", type=int, default=0, help="extra levels per group for corrections")
    args = p.parse_args()

    if args.config is None:
        from importlib.resources import files
        args.config = files("jjcircuit") / "data" / "jpsq.yaml"
    cfg = load_config(args.config)
    first, second = cfg.partition.children[:2]
    pipe = Pipeline(cfg)
    value = cfg.sweep.values()[0] if args.value is None else args.value

    t = time.time()
    ref = pipe.point(0, value, "brute", 2).energies[1]
    print(f"# brute-force splitting {ref:.9f} GHz ({time.time() - t:.1f} s)")
    cc = pipe.compile(value)
    basis = cc.basis(pipe.truncations)
    print("N_first," + ",".join(f"N_second={n}" for n in args.second))
    for nb in args.first:
        row = []
        for ng in args.second:
            tree = Group("root", [replace(first, keep=nb, window=None, excite=args.excite),
                                  replace(second, keep=ng, window=None, excite=args.excite)])
            v = run_hierarchy(cc, basis, tree, 2, denominator=cfg.denominator).spectrum.values
            row.append(abs(v[1] - v[0] - ref))
        print(f"{nb}," + ",".join(f"{x:.3e}" for x in row), flush=True)


if __name__ == "__main__":
    main()

"""Bias sweeps through the brute-force or hierarchical pipelines."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .hamiltonian import CompiledCircuit, Term, compile_circuit, expectation, make_basis
from .hierarchy import Group, run_hierarchy
from .modes import OSCILLATOR, build_mode_transform, build_node_matrices
from .operators import Op
from .solver import converge_truncation, eigensolve_lowest
from .topology import build_spanning_forest

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass
class PointResult:
    index: int
    value: float
    energies: np.ndarray | None = None
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    report: dict | None = None
    error: str | None = None


def observable_terms(names: tuple[str, ...], specs: list[str]) -> list[Term]:
    out = []
    for s in specs:
        kind, _, mode = s.partition(":")
        if mode not in names:
            raise ValueError(f"observable refers to unknown mode {mode!r}")
        label = ("Phi_" if kind == "flux" else "Q_") + mode
        out.append(Term(1.0, ((names.index(mode), Op(kind)),), label))
    return out


def _truncations(cfg: RunConfig, mt) -> dict[str, int]:
    out = {}
    for name, kind in zip(mt.names, mt.kinds):
        default = cfg.default_truncation["oscillator" if kind == OSCILLATOR else "periodic"]
        out[name] = int(cfg.truncations.get(name, default))
    unknown = set(cfg.truncations) - set(mt.names)
    if unknown:
        raise ValueError(f"truncations given for unknown modes {sorted(unknown)}")
    return out


def method_tree(cfg: RunConfig, method: str, names) -> Group:
    if method == "brute":
        return Group("root", list(names))
    if cfg.partition is None:
        raise ValueError(f"method {method!r} needs a partition")
    if method == "hier+pt":
        return cfg.partition

    def strip(g: Group) -> Group:
        return Group(g.name, [strip(c) if isinstance(c, Group) else c for c in g.children],
                     g.keep, g.window, 0)
    return strip(cfg.partition)


class Pipeline:
    """Circuit artifacts shared across sweep points; per-point work is independent."""

    def __init__(self, cfg: RunConfig, seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        c = cfg.circuit
        self.forest = build_spanning_forest(c, cfg.fluxoids or None)
        self.transform = build_mode_transform(c, build_node_matrices(c), self.forest, user=cfg.transform)
        self.truncations = _truncations(cfg, self.transform)
        if cfg.converge:
            self.truncations = self._converged()

    def compile(self, value: float) -> CompiledCircuit:
        c = self.cfg.sweep.apply(self.cfg.circuit, value)
        return compile_circuit(c, self.forest, mt=self.transform)

    def _converged(self) -> dict[str, int]:
        conv = self.cfg.converge
        cc = self.compile(self.cfg.sweep.values()[0])
        names = self.transform.names
        levels = max(max(max(p) for p in conv.get("targets", [[0, 1]])) + 1, 2)

        def build(tr):
            return eigensolve_lowest(cc.hamiltonian(dict(zip(names, tr))), levels, seed=self.seed)

        res = converge_truncation(build, self.transform.kinds, [self.truncations[n] for n in names],
                                  [tuple(p) for p in conv.get("targets", [[0, 1]])],
                                  float(conv.get("tol", 1e-3)), int(conv.get("max_steps", 6)))
        if not res.converged:
            log.warning("truncation did not converge; using the largest basis tried")
        return dict(zip(names, res.truncations))

    def point(self, index: int, value: float, method: str, levels: int) -> PointResult:
        cfg = self.cfg
        cc = self.compile(value)
        names = self.transform.names
        basis = make_basis(self.transform, self.truncations)
        obs = observable_terms(names, cfg.observables)
        out = PointResult(index, float(value))
        if method == "brute":
            h = cc.hamiltonian(self.truncations)
            spec = eigensolve_lowest(h, min(levels, h.dimension - 1) if h.dimension > 1 else 1,
                                     seed=self.seed)
            out.energies = spec.values
            for t in obs:
                out.observables[t.label] = np.array(
                    [expectation(t, spec.vectors[:, k], basis).real for k in range(len(spec.values))])
            out.meta = {"dimension": h.dimension, "method": method,
                        "max_residual": float(spec.residuals.max())}
        else:
            tree = method_tree(cfg, method, names)
            res = run_hierarchy(cc, basis, tree, levels, obs, self.seed, cfg.denominator)
            out.energies = res.spectrum.values
            out.observables = {k: np.real(v) for k, v in res.observables.items()}
            out.meta = {"dimension": res.effective_dimension, "method": method,
                        "max_residual": float(res.spectrum.residuals.max())}
            if method == "hier+pt" and res.report is not None:
                out.report = res.report.to_json()
        if not cfg.absolute:
            out.energies = out.energies - out.energies[0]
        return out


def run_sweep(cfg: RunConfig, method: str | None = None, levels: int | None = None,
              threads: int = 1, seed: int = 0) -> list[PointResult]:
    """One result per sweep point, ordered by index; failing points carry an error."""
    method = method or cfg.method
    levels = levels or cfg.levels
    pipe = Pipeline(cfg, seed)
    values = cfg.sweep.values()

    def task(i):
        try:
            return pipe.point(i, values[i], method, levels)
        except Exception as err:  # report and continue with remaining points
            log.error("sweep point %d (value %s) failed: %s", i, values[i], err)
            return PointResult(i, float(values[i]), error=f"{type(err).__name__}: {err}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, range(len(values))))
    else:
        results = [task(i) for i in range(len(values))]
    return sorted(results, key=lambda r: r.index)


def _num(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.12g}"


def to_csv(results: list[PointResult], cfg: RunConfig, levels: int) -> str:
    obs_labels = sorted({k for r in results for k in r.observables})
    n_states = {k: max(len(r.observables.get(k, ())) for r in results) for k in obs_labels}
    header = ["index", "param", "value"] + [f"E{k}" for k in range(levels)]
    header += [f"{k}[{s}]" for k in obs_labels for s in range(n_states[k])]
    header += ["dimension", "max_residual", "error"]
    buf = io.StringIO()
    buf.write(f"# jjcircuit sweep schema {SCHEMA_VERSION}; energies in GHz"
              + ("" if cfg.absolute else " relative to the ground state") + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in results:
        row = [str(r.index), cfg.sweep.param or "", _num(r.value)]
        e = list(r.energies) if r.energies is not None else []
        row += [_num(float(e[k])) if k < len(e) else "" for k in range(levels)]
        for k in obs_labels:
            v = list(r.observables.get(k, []))
            row += [_num(float(v[s])) if s < len(v) else "" for s in range(n_states[k])]
        row += [str(r.meta.get("dimension", "")), _num(r.meta.get("max_residual")), r.error or ""]
        writer.writerow(row)
    return buf.getvalue()


def to_json_lines(results: list[PointResult], cfg: RunConfig) -> str:
    lines = []
    for r in results:
        lines.append(json.dumps({
            "schema": SCHEMA_VERSION,
            "index": r.index,
            "param": cfg.sweep.param,
            "value": None if math.isnan(r.value) else float(f"{r.value:.12g}"),
            "energies": None if r.energies is None else [float(f"{x:.12g}") for x in r.energies],
            "observables": {k: [float(f"{x:.12g}") for x in v] for k, v in r.observables.items()},
            "meta": r.meta,
            "error": r.error,
        }))
    return "\n".join(lines) + "\n"

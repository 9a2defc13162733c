"""Run configuration loaded from YAML.

Schema (all keys optional except where noted)::

    netlist: path            # relative to the config file; or --netlist
    transform:               # user mode transform, validated not constructed
      nodes: [1, 2, ...]     # column order of the rows (default: sorted node ids)
      modes:
        - {name: delta, kind: oscillator, row: ["1/2", 0, ...]}
    fluxoids: {branch: m}    # closure fluxoid numbers
    truncations: {mode: nu_m or q_m}
    default_truncation: {oscillator: 8, periodic: 10}
    converge: {tol: 1.0e-3, targets: [[0, 1]], max_steps: 6}
    partition: {name: root, children: [{name: b, children: [m1, m2], keep: 6, excite: 20}, ...]}
    corrections: {denominator: state}   # state | ground | ground-sc
    sweep: {param: "flux:Lz", start: 0.48, stop: 0.52, steps: 11}
    output: {levels: 4, observables: ["flux:delta"], absolute: false}
    method: brute            # brute | hier | hier+pt
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .hierarchy import Group
from .netlist import Circuit, parse_netlist
from .perturbation import DENOMINATORS

METHODS = ("brute", "hier", "hier+pt")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    param: str | None = None
    start: float = 0.0
    stop: float = 0.0
    steps: int = 1

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("sweep steps must be >= 1")
        if self.param is not None:
            kind, _, target = self.param.partition(":")
            if kind not in ("flux", "qoff") or not target:
                raise ConfigError(f"sweep param must be 'flux:<inductor>' or 'qoff:<node>', got {self.param!r}")

    def values(self) -> np.ndarray:
        if self.param is None:
            return np.array([np.nan])
        return np.linspace(self.start, self.stop, self.steps)

    def apply(self, c: Circuit, value: float) -> Circuit:
        if self.param is None:
            return c
        kind, _, target = self.param.partition(":")
        if kind == "flux":
            return c.with_flux(target, float(value))
        return c.with_charge_offset(target, float(value))


@dataclass
class RunConfig:
    circuit: Circuit
    netlist_path: str | None = None
    transform: dict | None = None
    fluxoids: dict[str, int] = field(default_factory=dict)
    truncations: dict[str, int] = field(default_factory=dict)
    default_truncation: dict[str, int] = field(default_factory=lambda: {"oscillator": 8, "periodic": 10})
    converge: dict | None = None
    partition: Group | None = None
    denominator: str = "state"
    sweep: SweepSpec = field(default_factory=SweepSpec)
    levels: int = 4
    observables: list[str] = field(default_factory=list)
    absolute: bool = False
    method: str = "brute"

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.sweep.param:
            kind, _, target = self.sweep.param.partition(":")
            if kind == "flux" and target not in [b.id for b in self.circuit.inductors]:
                raise ConfigError(f"sweep references unknown inductor {target!r}")
            if kind == "qoff" and target not in self.circuit.nodes:
                raise ConfigError(f"sweep references unknown node {target!r}")
        for ob in self.observables:
            kind, _, mode = ob.partition(":")
            if kind not in ("flux", "charge") or not mode:
                raise ConfigError(f"observable must be 'flux:<mode>' or 'charge:<mode>', got {ob!r}")
        if self.denominator not in DENOMINATORS:
            raise ConfigError(f"corrections denominator must be one of {DENOMINATORS}")
        if self.method != "brute" and self.partition is None:
            raise ConfigError(f"method {self.method!r} needs a partition")


def transform_spec(raw: dict | None) -> dict | None:
    if not raw:
        return None
    modes = raw.get("modes")
    if not modes:
        raise ConfigError("transform needs a 'modes' list")
    out = {"names": [str(m["name"]) for m in modes], "kinds": [str(m["kind"]) for m in modes],
           "rows": [list(m["row"]) for m in modes]}
    if "nodes" in raw:
        out["nodes"] = [str(n) for n in raw["nodes"]]
    return out


def load_config(path: str | Path | None = None, netlist: str | Path | None = None) -> RunConfig:
    raw = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        raw = yaml.safe_load(path.read_text()) or {}
        base = path.parent
    net_path = Path(netlist) if netlist is not None else (base / raw["netlist"] if "netlist" in raw else None)
    if net_path is None:
        raise ConfigError("no netlist given (config key 'netlist' or --netlist)")
    circuit = parse_netlist(Path(net_path).read_text())
    output = raw.get("output", {}) or {}
    sweep = raw.get("sweep") or {}
    cfg = RunConfig(
        circuit=circuit,
        netlist_path=str(net_path),
        transform=transform_spec(raw.get("transform")),
        fluxoids={str(k): int(v) for k, v in (raw.get("fluxoids") or {}).items()},
        truncations={str(k): int(v) for k, v in (raw.get("truncations") or {}).items()},
        converge=raw.get("converge"),
        partition=Group.from_dict(raw["partition"]) if raw.get("partition") else None,
        denominator=str((raw.get("corrections") or {}).get("denominator", "state")),
        sweep=SweepSpec(sweep.get("param"), float(sweep.get("start", 0.0)),
                        float(sweep.get("stop", sweep.get("start", 0.0))), int(sweep.get("steps", 1))),
        levels=int(output.get("levels", 4)),
        observables=[str(o) for o in output.get("observables", [])],
        absolute=bool(output.get("absolute", False)),
        method=str(raw.get("method", "brute")),
    )
    if "default_truncation" in raw:
        cfg.default_truncation.update({str(k): int(v) for k, v in raw["default_truncation"].items()})
    cfg.validate()
    return cfg

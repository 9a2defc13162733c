"""Lumped-element circuit description: parsing, validation and emission.

Grammar, one statement per line, ``#`` starts a comment::

    cap <id> <nodeA> <nodeB> <fF>
    ind <id> <nodeA> <nodeB> <pH> [flux=<Phi0>]
    jj  <id> <nodeA> <nodeB> <EJ GHz> [cj=<fF>]
    mut <id> <indA> <indB> <pH>
    qoff <node> <offset in 2e>

Node ``0`` is ground.  A positive ``flux`` is aligned with the branch
orientation nodeA -> nodeB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

GROUND = "0"
KINDS = ("capacitor", "inductor", "junction")


@dataclass(frozen=True)
class Diagnostic:
    message: str
    line: int | None = None
    col: int | None = None

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        loc = f"line {self.line}" + (f", col {self.col}" if self.col else "")
        return f"{loc}: {self.message}"


class NetlistError(ValueError):
    """Raised when a netlist cannot be parsed; carries every diagnostic."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


@dataclass(frozen=True)
class Branch:
    id: str
    kind: str
    node_from: str
    node_to: str
    capacitance: float = 0.0
    inductance: float = 0.0
    ej: float = 0.0
    flux: float = 0.0

    @property
    def is_inductive(self) -> bool:
        """Inductor or junction: a member of the superconducting subgraph."""
        return self.kind in ("inductor", "junction")


@dataclass(frozen=True)
class Mutual:
    id: str
    branch_a: str
    branch_b: str
    inductance: float


def node_key(node: str):
    """Sort key: integer-looking ids numerically, others lexically after."""
    try:
        return (0, int(node), "")
    except ValueError:
        return (1, 0, node)


@dataclass(frozen=True)
class Circuit:
    nodes: tuple[str, ...] = ()
    branches: tuple[Branch, ...] = ()
    mutuals: tuple[Mutual, ...] = ()
    charge_offsets: tuple[tuple[str, float], ...] = ()

    @classmethod
    def build(cls, branches: Iterable[Branch], mutuals: Iterable[Mutual] = (),
              charge_offsets: dict[str, float] | None = None) -> "Circuit":
        branches = tuple(branches)
        nodes = {n for b in branches for n in (b.node_from, b.node_to)}
        offsets = dict(charge_offsets or {})
        nodes |= set(offsets)
        nodes.discard(GROUND)
        return cls(
            nodes=tuple(sorted(nodes, key=node_key)),
            branches=branches,
            mutuals=tuple(mutuals),
            charge_offsets=tuple(sorted(offsets.items(), key=lambda kv: node_key(kv[0]))),
        )

    @property
    def node_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    def branch(self, branch_id: str) -> Branch:
        for b in self.branches:
            if b.id == branch_id:
                return b
        raise KeyError(branch_id)

    @property
    def inductors(self) -> list[Branch]:
        return [b for b in self.branches if b.kind == "inductor"]

    @property
    def junctions(self) -> list[Branch]:
        return [b for b in self.branches if b.kind == "junction"]

    @property
    def inductive_branches(self) -> list[Branch]:
        return [b for b in self.branches if b.is_inductive]

    def offsets(self) -> dict[str, float]:
        return dict(self.charge_offsets)

    def canonical(self) -> "Circuit":
        """Id-sorted copy; two netlists with permuted lines canonicalize equal."""
        return Circuit(
            nodes=self.nodes,
            branches=tuple(sorted(self.branches, key=lambda b: b.id)),
            mutuals=tuple(sorted(self.mutuals, key=lambda m: m.id)),
            charge_offsets=self.charge_offsets,
        )

    def with_flux(self, branch_id: str, flux: float) -> "Circuit":
        if self.branch(branch_id).kind != "inductor":
            raise ValueError(f"external flux can only thread inductor branches, not {branch_id!r}")
        branches = tuple(replace(b, flux=flux) if b.id == branch_id else b
                         for b in self.branches)
        return replace(self, branches=branches)

    def with_charge_offset(self, node: str, offset: float) -> "Circuit":
        if node not in self.nodes:
            raise KeyError(node)
        offsets = self.offsets()
        offsets[node] = offset
        return replace(self, charge_offsets=tuple(
            sorted(offsets.items(), key=lambda kv: node_key(kv[0]))))

    def inductance_matrix(self) -> np.ndarray:
        """Full branch inductance matrix L_b + M over inductor branches, pH."""
        inds = self.inductors
        index = {b.id: i for i, b in enumerate(inds)}
        lmat = np.diag([b.inductance for b in inds]).astype(float)
        for m in self.mutuals:
            i, j = index[m.branch_a], index[m.branch_b]
            lmat[i, j] += m.inductance
            lmat[j, i] += m.inductance
        return lmat


def _parse_value(tok: str, line: int, col: int, diags: list[Diagnostic]) -> float | None:
    try:
        val = float(tok)
    except ValueError:
        diags.append(Diagnostic(f"expected a number, got {tok!r}", line, col))
        return None
    if not math.isfinite(val):
        diags.append(Diagnostic(f"non-finite value {tok!r}", line, col))
        return None
    return val


def _columns(raw: str) -> list[tuple[str, int]]:
    out, pos = [], 0
    for tok in raw.split():
        pos = raw.index(tok, pos)
        out.append((tok, pos + 1))
        pos += len(tok)
    return out


def parse_netlist(text: str) -> Circuit:
    """Parse netlist text into a validated :class:`Circuit`.

    All problems are collected and raised together as :class:`NetlistError`.
    """
    diags: list[Diagnostic] = []
    branches: list[Branch] = []
    mutuals: list[tuple[Mutual, int]] = []
    offsets: dict[str, float] = {}
    seen_ids: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        raw = raw.split("#", 1)[0]
        toks = _columns(raw)
        if not toks:
            continue
        stmt = toks[0][0].lower()
        args = [t for t in toks[1:] if "=" not in t[0]]
        opts = {}
        for tok, col in toks[1:]:
            if "=" in tok:
                key, _, val = tok.partition("=")
                opts[key.lower()] = (val, col)

        if stmt in ("cap", "ind", "jj"):
            if len(args) != 4:
                diags.append(Diagnostic(f"{stmt!r} expects 4 positional fields, got {len(args)}",
                                        lineno, toks[0][1]))
                continue
            (bid, _), (na, _), (nb, _), (vtok, vcol) = args
            allowed = {"ind": {"flux"}, "jj": {"cj"}, "cap": set()}[stmt]
            for key, (_, col) in opts.items():
                if key not in allowed:
                    diags.append(Diagnostic(f"unknown option {key!r} for {stmt!r}", lineno, col))
            value = _parse_value(vtok, lineno, vcol, diags)
            if value is None:
                continue
            if bid in seen_ids:
                diags.append(Diagnostic(f"duplicate id {bid!r} (first on line {seen_ids[bid]})",
                                        lineno, args[0][1]))
                continue
            seen_ids[bid] = lineno
            if na == nb:
                diags.append(Diagnostic(f"branch {bid!r} connects node {na!r} to itself",
                                        lineno, args[1][1]))
                continue
            if stmt == "cap":
                if value < 0:
                    diags.append(Diagnostic(f"negative capacitance {value}", lineno, vcol))
                    continue
                branches.append(Branch(bid, "capacitor", na, nb, capacitance=value))
            elif stmt == "ind":
                flux = 0.0
                if "flux" in opts:
                    flux = _parse_value(opts["flux"][0], lineno, opts["flux"][1], diags)
                    if flux is None:
                        continue
                if value <= 0:
                    diags.append(Diagnostic(f"nonpositive inductance {value}", lineno, vcol))
                    continue
                branches.append(Branch(bid, "inductor", na, nb, inductance=value, flux=flux))
            else:
                cj = 0.0
                if "cj" in opts:
                    cj = _parse_value(opts["cj"][0], lineno, opts["cj"][1], diags)
                    if cj is None:
                        continue
                    if cj < 0:
                        diags.append(Diagnostic(f"negative capacitance {cj}", lineno, opts["cj"][1]))
                        continue
                if value <= 0:
                    diags.append(Diagnostic(f"nonpositive Josephson energy {value}", lineno, vcol))
                    continue
                branches.append(Branch(bid, "junction", na, nb, capacitance=cj, ej=value))
        elif stmt == "mut":
            if len(args) != 4 or opts:
                diags.append(Diagnostic("'mut' expects: mut <id> <indA> <indB> <pH>",
                                        lineno, toks[0][1]))
                continue
            (mid, _), (ba, _), (bb, _), (vtok, vcol) = args
            value = _parse_value(vtok, lineno, vcol, diags)
            if value is None:
                continue
            if mid in seen_ids:
                diags.append(Diagnostic(f"duplicate id {mid!r} (first on line {seen_ids[mid]})",
                                        lineno, args[0][1]))
                continue
            seen_ids[mid] = lineno
            mutuals.append((Mutual(mid, ba, bb, value), lineno))
        elif stmt == "qoff":
            if len(args) != 2 or opts:
                diags.append(Diagnostic("'qoff' expects: qoff <node> <offset>", lineno, toks[0][1]))
                continue
            (node, ncol), (vtok, vcol) = args
            value = _parse_value(vtok, lineno, vcol, diags)
            if value is None:
                continue
            if node == GROUND:
                diags.append(Diagnostic("charge offset on ground", lineno, ncol))
                continue
            offsets[node] = value
        else:
            diags.append(Diagnostic(f"unknown statement {stmt!r}", lineno, toks[0][1]))

    kinds = {b.id: b.kind for b in branches}
    for m, lineno in mutuals:
        for ref in (m.branch_a, m.branch_b):
            if ref not in kinds:
                diags.append(Diagnostic(f"mutual {m.id!r} references unknown branch {ref!r}", lineno))
    node_set = {n for b in branches for n in (b.node_from, b.node_to)}
    for node in offsets:
        if node not in node_set:
            diags.append(Diagnostic(f"charge offset on unknown node {node!r}"))
    if diags:
        raise NetlistError(diags)

    circuit = Circuit.build(branches, [m for m, _ in mutuals], offsets)
    problems = validate_circuit(circuit)
    if problems:
        raise NetlistError(problems)
    return circuit


def validate_circuit(c: Circuit) -> list[Diagnostic]:
    """Return diagnostics for every violated invariant (empty if valid)."""
    out: list[Diagnostic] = []
    declared = set(c.nodes) | {GROUND}
    ids: set[str] = set()
    for b in c.branches:
        if b.id in ids:
            out.append(Diagnostic(f"duplicate branch id {b.id!r}"))
        ids.add(b.id)
        if b.kind not in KINDS:
            out.append(Diagnostic(f"branch {b.id!r} has unknown kind {b.kind!r}"))
        for n in (b.node_from, b.node_to):
            if n not in declared:
                out.append(Diagnostic(f"branch {b.id!r} references undeclared node {n!r}"))
        if b.node_from == b.node_to:
            out.append(Diagnostic(f"branch {b.id!r} connects node {b.node_from!r} to itself"))
        if not b.capacitance >= 0:
            out.append(Diagnostic(f"branch {b.id!r} has negative capacitance"))
        if b.kind == "inductor" and not b.inductance > 0:
            out.append(Diagnostic(f"inductor {b.id!r} has nonpositive inductance"))
        if b.kind == "junction" and not b.ej > 0:
            out.append(Diagnostic(f"junction {b.id!r} has nonpositive Josephson energy"))
        if not math.isfinite(b.flux):
            out.append(Diagnostic(f"branch {b.id!r} has non-finite external flux"))
        if b.flux != 0 and b.kind != "inductor":
            out.append(Diagnostic(f"external flux on non-inductor branch {b.id!r}"))

    by_id = {b.id: b for b in c.branches}
    pairs: set[frozenset] = set()
    mutual_ok = True
    for m in c.mutuals:
        if m.id in ids:
            out.append(Diagnostic(f"duplicate id {m.id!r}"))
        ids.add(m.id)
        a, b = by_id.get(m.branch_a), by_id.get(m.branch_b)
        if a is None or b is None:
            out.append(Diagnostic(f"mutual {m.id!r} references an unknown branch"))
            mutual_ok = False
            continue
        if a.kind != "inductor" or b.kind != "inductor":
            out.append(Diagnostic(f"mutual {m.id!r} must couple two inductors"))
            mutual_ok = False
            continue
        if a.id == b.id:
            out.append(Diagnostic(f"mutual {m.id!r} couples {a.id!r} to itself"))
            mutual_ok = False
            continue
        key = frozenset((a.id, b.id))
        if key in pairs:
            out.append(Diagnostic(f"second mutual between {a.id!r} and {b.id!r}"))
        pairs.add(key)
        if abs(m.inductance) > math.sqrt(a.inductance * b.inductance):
            out.append(Diagnostic(f"mutual {m.id!r}: passivity violated "
                                  f"(|M|={abs(m.inductance)} > sqrt(La*Lb))"))
            mutual_ok = False

    for node, _ in c.charge_offsets:
        if node not in c.nodes:
            out.append(Diagnostic(f"charge offset on undeclared node {node!r}"))

    if mutual_ok and not out and c.inductors:
        eig = np.linalg.eigvalsh(c.inductance_matrix())
        if eig.min() <= 1e-12 * eig.max():
            out.append(Diagnostic("branch inductance matrix L_b + M is not positive definite"))
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_netlist(c: Circuit) -> str:
    """Netlist text that parses back to an identical :class:`Circuit`."""
    lines = []
    for b in c.branches:
        if b.kind == "capacitor":
            lines.append(f"cap {b.id} {b.node_from} {b.node_to} {_fmt(b.capacitance)}")
        elif b.kind == "inductor":
            extra = f" flux={_fmt(b.flux)}" if b.flux else ""
            lines.append(f"ind {b.id} {b.node_from} {b.node_to} {_fmt(b.inductance)}{extra}")
        else:
            extra = f" cj={_fmt(b.capacitance)}" if b.capacitance else ""
            lines.append(f"jj {b.id} {b.node_from} {b.node_to} {_fmt(b.ej)}{extra}")
    for m in c.mutuals:
        lines.append(f"mut {m.id} {m.branch_a} {m.branch_b} {_fmt(m.inductance)}")
    for node, q in c.charge_offsets:
        lines.append(f"qoff {node} {_fmt(q)}")
    return "\n".join(lines) + ("\n" if lines else "")

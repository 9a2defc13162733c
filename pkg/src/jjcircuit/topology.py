"""Superconducting spanning forest, islands, closure loops, branch matrix."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .netlist import GROUND, Branch, Circuit, node_key

_KIND_PRIORITY = {"inductor": 0, "junction": 1}


@dataclass(frozen=True)
class ClosureLoop:
    branch: str
    # tree path from the closure branch's end node back to its start node;
    # sign +1 when a branch is traversed along its own orientation
    path: tuple[tuple[str, int], ...]
    fluxoid: int = 0


@dataclass(frozen=True)
class SpanningForest:
    tree_branches: frozenset[str]
    islands: tuple[tuple[frozenset[str], str], ...]
    closures: tuple[ClosureLoop, ...]
    roots: dict = field(default_factory=dict)  # node -> (virtual) ground of its component

    @property
    def closure_branches(self) -> list[str]:
        return [cl.branch for cl in self.closures]

    def with_fluxoids(self, fluxoids: dict[str, int]) -> "SpanningForest":
        unknown = set(fluxoids) - set(self.closure_branches)
        if unknown:
            raise ValueError(f"fluxoid numbers given for non-closure branches: {sorted(unknown)}")
        closures = tuple(ClosureLoop(cl.branch, cl.path, int(fluxoids.get(cl.branch, cl.fluxoid)))
                         for cl in self.closures)
        return SpanningForest(self.tree_branches, self.islands, closures, self.roots)

    def to_json(self) -> dict:
        return {
            "tree_branches": sorted(self.tree_branches),
            "islands": [{"nodes": sorted(nodes, key=node_key), "virtual_ground": vg}
                        for nodes, vg in self.islands],
            "closures": [{"branch": cl.branch, "path": [[b, s] for b, s in cl.path],
                          "fluxoid": cl.fluxoid} for cl in self.closures],
        }


@dataclass(frozen=True)
class BranchMatrix:
    branch_ids: tuple[str, ...]
    matrix: np.ndarray  # int, shape (n_branches, n_nodes)

    def rows(self, ids) -> np.ndarray:
        index = {b: i for i, b in enumerate(self.branch_ids)}
        return self.matrix[[index[b] for b in ids]]


def _components(c: Circuit) -> list[set[str]]:
    adj: dict[str, set[str]] = defaultdict(set)
    for b in c.inductive_branches:
        adj[b.node_from].add(b.node_to)
        adj[b.node_to].add(b.node_from)
    seen: set[str] = set()
    comps = []
    for start in (GROUND, *c.nodes):
        if start in seen:
            continue
        comp, stack = {start}, [start]
        while stack:
            n = stack.pop()
            for m in adj[n]:
                if m not in comp:
                    comp.add(m)
                    stack.append(m)
        seen |= comp
        comps.append(comp)
    return comps


def find_islands(c: Circuit) -> list[tuple[frozenset[str], str]]:
    """Components of the inductive/Josephson subgraph that exclude ground.

    Nodes touching no inductive branch form single-node islands.  The
    virtual ground of each island is its lowest node id.
    """
    islands = []
    for comp in _components(c):
        if GROUND in comp:
            continue
        vg = min(comp, key=node_key)
        islands.append((frozenset(comp), vg))
    islands.sort(key=lambda it: node_key(it[1]))
    return islands


def build_spanning_forest(c: Circuit, fluxoids: dict[str, int] | None = None,
                          prefer: str = "inductor",
                          virtual_grounds: dict[str, str] | None = None) -> SpanningForest:
    """Deterministic superconducting spanning forest.

    Grows from ground and from each island's virtual ground; among the
    branches leaving the grown set, the preferred kind comes first (inductors
    by default), then shallower attachment points, then lower branch ids.
    ``virtual_grounds`` maps any island node to a replacement virtual ground
    for that island.
    """
    if prefer not in _KIND_PRIORITY:
        raise ValueError(f"prefer must be one of {sorted(_KIND_PRIORITY)}")
    priority = {k: int(k != prefer) for k in _KIND_PRIORITY}
    islands = find_islands(c)
    for old, new in (virtual_grounds or {}).items():
        hit = [i for i, (nodes, _) in enumerate(islands) if old in nodes]
        if not hit or new not in islands[hit[0]][0]:
            raise ValueError(f"virtual ground {new!r} is not on the island of node {old!r}")
        islands[hit[0]] = (islands[hit[0]][0], new)
    adj: dict[str, list[Branch]] = defaultdict(list)
    for b in c.inductive_branches:
        adj[b.node_from].append(b)
        adj[b.node_to].append(b)

    roots = [GROUND] + [vg for _, vg in islands]
    tree: set[str] = set()
    parent: dict[str, tuple[Branch, str] | None] = {}
    root_of: dict[str, str] = {}
    depth: dict[str, int] = {}
    for root in roots:
        parent[root] = None
        depth[root] = 0
        root_of[root] = root
        grown = {root}
        while True:
            best = None
            for n in grown:
                for b in adj[n]:
                    other = b.node_to if b.node_from == n else b.node_from
                    if other in grown:
                        continue
                    key = (priority[b.kind], depth[n], b.id)
                    if best is None or key < best[0]:
                        best = (key, b, n, other)
            if best is None:
                break
            _, b, n, other = best
            tree.add(b.id)
            parent[other] = (b, n)
            depth[other] = depth[n] + 1
            root_of[other] = root
            grown.add(other)

    def path_to_root(node: str) -> list[tuple[str, str, int]]:
        # (branch id, node reached, sign of traversal node -> parent)
        out = []
        while parent[node] is not None:
            b, up = parent[node]
            sign = 1 if b.node_from == node else -1
            out.append((b.id, up, sign))
            node = up
        return out

    def tree_path(src: str, dst: str) -> list[tuple[str, int]]:
        up_src = path_to_root(src)
        up_dst = path_to_root(dst)
        nodes_src = [src] + [n for _, n, _ in up_src]
        nodes_dst = [dst] + [n for _, n, _ in up_dst]
        common = set(nodes_src) & set(nodes_dst)
        meet = next(n for n in nodes_src if n in common)
        first = []
        for (bid, n, s), cur in zip(up_src, nodes_src):
            if cur == meet:
                break
            first.append((bid, s))
        second = []
        for (bid, n, s), cur in zip(up_dst, nodes_dst):
            if cur == meet:
                break
            second.append((bid, -s))
        return first + second[::-1]

    closures = []
    fluxoids = fluxoids or {}
    for b in c.inductive_branches:
        if b.id in tree:
            continue
        closures.append(ClosureLoop(b.id, tuple(tree_path(b.node_to, b.node_from)),
                                    int(fluxoids.get(b.id, 0))))
    unknown = set(fluxoids) - {cl.branch for cl in closures}
    if unknown:
        raise ValueError(f"fluxoid numbers given for non-closure branches: {sorted(unknown)}")
    return SpanningForest(frozenset(tree), tuple(islands), tuple(closures), root_of)


def branch_matrix(c: Circuit, f: SpanningForest | None = None) -> BranchMatrix:
    """Rows +1 at the start node and -1 at the end node, ground omitted."""
    index = c.node_index
    rows = c.inductive_branches
    mat = np.zeros((len(rows), len(c.nodes)), dtype=int)
    for i, b in enumerate(rows):
        if b.node_from != GROUND:
            mat[i, index[b.node_from]] += 1
        if b.node_to != GROUND:
            mat[i, index[b.node_to]] -= 1
    return BranchMatrix(tuple(b.id for b in rows), mat)


def loop_incidence(c: Circuit, loop: ClosureLoop) -> np.ndarray:
    """Signed node incidence of a closure loop (ground included as last entry)."""
    nodes = list(c.nodes) + [GROUND]
    index = {n: i for i, n in enumerate(nodes)}
    inc = np.zeros(len(nodes), dtype=int)

    def add(bid: str, sign: int):
        b = c.branch(bid)
        inc[index[b.node_from]] += sign
        inc[index[b.node_to]] -= sign

    add(loop.branch, 1)
    for bid, s in loop.path:
        add(bid, s)
    return inc

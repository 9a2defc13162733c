"""Node matrices, the canonical mode transform and bias offsets.

The transform ``R`` maps node fluxes to mode fluxes, ``Phi = R @ Phi_n``, and
node charges by ``Q = inv(R).T @ Q_n``.  Its inverse ``S`` is what the rest
of the package mostly needs: column ``k`` of ``S`` is the node-flux pattern
moved by a unit step of mode ``k``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import units
from .netlist import GROUND, Circuit, node_key
from .topology import BranchMatrix, SpanningForest, branch_matrix, build_spanning_forest, find_islands

log = logging.getLogger(__name__)

OSCILLATOR, ISLAND, JOSEPHSON = "oscillator", "island", "josephson"
REGULARIZING_CAPACITANCE = 1e-6  # fF
RANK_CUTOFF = 1e-10


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class NodeMatrices:
    nodes: tuple[str, ...]
    cap: np.ndarray        # C_n, fF
    ind_full: np.ndarray   # L_b + M over inductors, pH
    linv_nodes: np.ndarray  # R^T (L_b + M)^-1 R, 1/pH
    regularized: tuple[str, ...] = ()


@dataclass(frozen=True)
class ModeTransform:
    names: tuple[str, ...]
    kinds: tuple[str, ...]
    R: np.ndarray
    S: np.ndarray
    cinv: np.ndarray  # R C_n^-1 R^T, 1/fF
    linv: np.ndarray  # S^T L_n^-1 S, 1/pH (zero outside oscillator block)

    @property
    def n_modes(self) -> int:
        return len(self.kinds)

    def indices(self, kind: str) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k == kind]

    @property
    def counts(self) -> tuple[int, int, int]:
        return tuple(len(self.indices(k)) for k in (OSCILLATOR, ISLAND, JOSEPHSON))

    def oscillator_params(self, i: int) -> tuple[float, float, float]:
        """(frequency GHz, impedance ohm, phase impedance) of oscillator mode i."""
        if self.kinds[i] != OSCILLATOR:
            raise ValueError(f"mode {self.names[i]!r} is not an oscillator")
        ci, li = self.cinv[i, i], self.linv[i, i]
        return units.frequency_ghz(ci, li), units.impedance_ohm(ci, li), units.phase_impedance(ci, li)

    @property
    def linv_oscillator(self) -> np.ndarray:
        osc = self.indices(OSCILLATOR)
        return self.linv[np.ix_(osc, osc)]

    def index(self, name: str) -> int:
        return self.names.index(name)


def _capacitive_components(c: Circuit, cap: np.ndarray) -> list[list[int]]:
    n = len(c.nodes)
    grounded = np.abs(cap).sum(axis=1) - 2 * np.abs(np.triu(cap, 1) + np.tril(cap, -1)).sum(axis=1)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if cap[i, j] != 0:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    # a component is floating if no member has capacitance to ground
    return [g for g in groups.values() if not any(grounded[i] > 0 for i in g)]


def build_node_matrices(c: Circuit, bm: BranchMatrix | None = None) -> NodeMatrices:
    """Node capacitance matrix and inverse node inductance matrix.

    Capacitively floating node groups (including isolated zero-capacitance
    nodes) receive a 1e-6 fF capacitor to ground so that C_n is invertible.
    """
    bm = bm or branch_matrix(c)
    index = c.node_index
    n = len(c.nodes)
    cap = np.zeros((n, n))
    for b in c.branches:
        if b.capacitance == 0:
            continue
        ends = [index[x] for x in (b.node_from, b.node_to) if x != GROUND]
        for i in ends:
            cap[i, i] += b.capacitance
        if len(ends) == 2:
            i, j = ends
            cap[i, j] -= b.capacitance
            cap[j, i] -= b.capacitance

    regularized = []
    for group in _capacitive_components(c, cap):
        i = min(group, key=lambda k: node_key(c.nodes[k]))
        cap[i, i] += REGULARIZING_CAPACITANCE
        regularized.append(c.nodes[i])
    if regularized:
        log.info("regularizing capacitance added at nodes %s", regularized)

    lfull = c.inductance_matrix()
    inductor_ids = [b.id for b in c.inductors]
    if inductor_ids:
        r_ind = bm.rows(inductor_ids).astype(float)
        try:
            linv_b = np.linalg.inv(lfull)
        except np.linalg.LinAlgError as err:
            raise ValueError("singular branch inductance matrix") from err
        linv_n = r_ind.T @ linv_b @ r_ind
        linv_n = 0.5 * (linv_n + linv_n.T)
    else:
        linv_n = np.zeros((n, n))
    return NodeMatrices(c.nodes, cap, lfull, linv_n, tuple(regularized))


def inductive_clusters(c: Circuit) -> list[frozenset[str]]:
    """Connected components of the inductor-only graph that exclude ground.

    Their indicator vectors form an integer basis of the node-flux
    directions that leave every inductor branch flux unchanged.
    """
    parent = {n: n for n in (*c.nodes, GROUND)}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for b in c.inductors:
        parent[find(b.node_from)] = find(b.node_to)
    groups: dict[str, set[str]] = {}
    for n in c.nodes:
        groups.setdefault(find(n), set()).add(n)
    ground_root = find(GROUND)
    clusters = [frozenset(g) for root, g in groups.items() if root != ground_root]
    return sorted(clusters, key=lambda g: node_key(min(g, key=node_key)))


def _indicator(c: Circuit, nodes) -> np.ndarray:
    index = c.node_index
    v = np.zeros(len(c.nodes))
    for n in nodes:
        v[index[n]] = 1.0
    return v


def _null_space_basis(c: Circuit, forest: SpanningForest):
    """Island and Josephson columns of S from inductive clusters."""
    clusters = inductive_clusters(c)
    island_cols, josephson_cols = [], []
    for nodes, vg in forest.islands:
        island_cols.append(_indicator(c, nodes))
    for cl in clusters:
        island = next(((nodes, vg) for nodes, vg in forest.islands if cl <= nodes), None)
        if island is not None and vg in cl:
            continue  # the cluster holding the virtual ground is implied by the island column
        josephson_cols.append(_indicator(c, cl))
    return island_cols, josephson_cols, clusters


def parse_rational(entry) -> float:
    if isinstance(entry, (int, float)):
        return float(entry)
    try:
        return float(Fraction(str(entry).strip()))
    except ZeroDivisionError as err:
        raise ValueError(f"zero denominator in transform entry {entry!r}") from err


def _finish(c: Circuit, nm: NodeMatrices, names, kinds, R: np.ndarray, S: np.ndarray) -> ModeTransform:
    cinv_n = np.linalg.inv(nm.cap)
    cinv = R @ cinv_n @ R.T
    linv = S.T @ nm.linv_nodes @ S
    cinv = 0.5 * (cinv + cinv.T)
    linv = 0.5 * (linv + linv.T)
    non_osc = [i for i, k in enumerate(kinds) if k != OSCILLATOR]
    scale = max(np.abs(linv).max(), 1e-300)
    linv[non_osc, :] = np.where(np.abs(linv[non_osc, :]) < 1e-9 * scale, 0.0, linv[non_osc, :])
    linv[:, non_osc] = np.where(np.abs(linv[:, non_osc]) < 1e-9 * scale, 0.0, linv[:, non_osc])
    return ModeTransform(tuple(names), tuple(kinds), R, S, cinv, linv)


def build_mode_transform(c: Circuit, nm: NodeMatrices | None = None,
                         forest: SpanningForest | None = None,
                         user: dict | None = None) -> ModeTransform:
    """Canonical transform separating oscillator, island and Josephson modes.

    ``user`` (optional) holds ``rows`` (rational entries, one row per mode,
    columns in node order), ``kinds`` and optionally ``names``; it is
    validated rather than constructed.
    """
    nm = nm or build_node_matrices(c)
    forest = forest or build_spanning_forest(c)
    if user is not None:
        return _validated_user_transform(c, nm, forest, user)

    n = len(c.nodes)
    evals, evecs = np.linalg.eigh(nm.linv_nodes) if n else (np.zeros(0), np.zeros((0, 0)))
    cutoff = RANK_CUTOFF * (evals.max() if evals.size and evals.max() > 0 else 0.0)
    osc = [k for k in range(len(evals)) if evals[k] > cutoff and evals[k] > 0]
    u_osc = evecs[:, osc]
    for k in range(u_osc.shape[1]):
        col = u_osc[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            u_osc[:, k] = -col

    island_cols, josephson_cols, _ = _null_space_basis(c, forest)
    s_null = np.array(island_cols + josephson_cols).T.reshape(n, -1)
    if u_osc.shape[1] + s_null.shape[1] != n:
        raise TransformError(
            f"mode count mismatch: {u_osc.shape[1]} oscillator + {s_null.shape[1]} "
            f"null-space directions for {n} nodes")
    r_null = np.linalg.pinv(s_null) if s_null.size else np.zeros((0, n))
    R = np.vstack([u_osc.T, r_null])
    S = np.hstack([u_osc, s_null])
    if not np.allclose(R @ S, np.eye(n), atol=1e-10):
        raise TransformError("automatic transform construction failed: R S != 1")

    kinds = ([OSCILLATOR] * u_osc.shape[1] + [ISLAND] * len(island_cols)
             + [JOSEPHSON] * len(josephson_cols))
    names = ([f"O{k}" for k in range(u_osc.shape[1])] + [f"I{k}" for k in range(len(island_cols))]
             + [f"J{k}" for k in range(len(josephson_cols))])
    mt = _finish(c, nm, names, kinds, R, S)
    check_transform(c, nm, mt)
    return mt


def _validated_user_transform(c: Circuit, nm: NodeMatrices, forest: SpanningForest,
                              user: dict) -> ModeTransform:
    rows = [[parse_rational(x) for x in row] for row in user["rows"]]
    kinds = [str(k).lower() for k in user["kinds"]]
    n = len(c.nodes)
    names = list(user.get("names") or [f"{k[0].upper()}{i}" for i, k in enumerate(kinds)])
    if "nodes" in user:
        order = [str(x) for x in user["nodes"]]
        if sorted(order, key=node_key) != list(c.nodes):
            raise TransformError("transform 'nodes' must list every circuit node exactly once")
        perm = [order.index(node) for node in c.nodes]
        rows = [[row[p] for p in perm] for row in rows]
    R = np.array(rows, dtype=float)
    if R.shape != (n, n) or len(kinds) != n or len(names) != n:
        raise TransformError(f"user transform must be {n}x{n} with {n} kinds and names")
    bad = set(kinds) - {OSCILLATOR, ISLAND, JOSEPHSON}
    if bad:
        raise TransformError(f"unknown mode kinds {sorted(bad)}")
    if len(set(names)) != n:
        raise TransformError("mode names must be unique")
    if abs(np.linalg.det(R)) < 1e-12:
        raise TransformError("user transform is singular")
    S = np.linalg.inv(R)
    mt = _finish(c, nm, names, kinds, R, S)
    check_transform(c, nm, mt)
    return mt


def check_transform(c: Circuit, nm: NodeMatrices, mt: ModeTransform) -> None:
    """Raise :class:`TransformError` unless every transform invariant holds."""
    n = len(c.nodes)
    if n == 0:
        return
    S = mt.S
    osc = mt.indices(OSCILLATOR)
    isl = mt.indices(ISLAND)
    jos = mt.indices(JOSEPHSON)
    evals = np.linalg.eigvalsh(nm.linv_nodes)
    top = evals.max() if evals.size else 0.0
    rank = int(np.sum(evals > RANK_CUTOFF * top)) if top > 0 else 0
    if len(osc) != rank:
        raise TransformError(f"{len(osc)} oscillator modes but inverse inductance rank is {rank}")
    islands = find_islands(c)
    if len(isl) != len(islands):
        raise TransformError(f"{len(isl)} island modes but circuit has {len(islands)} islands")

    scale = max(np.abs(nm.linv_nodes).max(), 1e-300)
    for k in isl + jos:
        if np.abs(nm.linv_nodes @ S[:, k]).max() > 1e-9 * scale * max(1.0, np.abs(S[:, k]).max()):
            raise TransformError(f"mode {mt.names[k]!r} is not free of inductive energy")

    bm = branch_matrix(c)
    rows = bm.rows([b.id for b in c.inductive_branches]).astype(float)
    for k in isl:
        if np.abs(rows @ S[:, k]).max(initial=0.0) > 1e-9:
            raise TransformError(f"island mode {mt.names[k]!r} changes a branch flux")
    if c.junctions:
        rj = bm.rows([b.id for b in c.junctions]).astype(float)
        coeff = rj @ S[:, jos]
        if np.abs(coeff - np.round(coeff)).max(initial=0.0) > 1e-9:
            raise TransformError("junction fluxes have non-integer Josephson-mode coefficients")
        if np.abs(np.round(coeff)).max(initial=0.0) > 1:
            log.warning("junction couples to a Josephson mode with |n| > 1; "
                        "charge-basis requirements grow")

    # Josephson and island columns must generate exactly the integer lattice
    # of inductance-free node translations
    clusters = inductive_clusters(c)
    if clusters:
        K = np.array([_indicator(c, cl) for cl in clusters]).T
        island_ind = [_indicator(c, nodes) for nodes, _ in islands]
        cols = [K.T @ v / (K.T @ K).diagonal() for v in island_ind]
        xj, *_ = np.linalg.lstsq(K, S[:, jos], rcond=None) if jos else (np.zeros((len(clusters), 0)),)
        if jos and np.abs(K @ xj - S[:, jos]).max() > 1e-9:
            raise TransformError("Josephson columns leave the inductance-free subspace")
        X = np.hstack([np.array(cols).T.reshape(len(clusters), -1), xj])
        if X.shape[0] != X.shape[1] or abs(abs(np.linalg.det(X)) - 1) > 1e-9:
            raise TransformError("Josephson/island modes do not form a unimodular charge lattice")


def bias_offsets(c: Circuit, mt: ModeTransform, nm: NodeMatrices | None = None,
                 forest: SpanningForest | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Mode charge offsets (2e) and mode flux offsets (Phi0).

    Flux offsets are nonzero only on oscillator modes.  Closure inductors
    with fluxoid number m contribute as an extra external flux of -m.
    """
    nm = nm or build_node_matrices(c)
    n = len(c.nodes)
    index = c.node_index
    dq_n = np.zeros(n)
    for node, q in c.charge_offsets:
        dq_n[index[node]] = q
    dq = mt.S.T @ dq_n

    dphi = np.zeros(n)
    inds = c.inductors
    fluxoid = {}
    if forest is not None:
        fluxoid = {cl.branch: cl.fluxoid for cl in forest.closures}
    ext = np.array([b.flux - fluxoid.get(b.id, 0) for b in inds])
    if inds and np.any(ext != 0):
        bm = branch_matrix(c)
        r_ind = bm.rows([b.id for b in inds]).astype(float)
        rhs = r_ind.T @ np.linalg.solve(nm.ind_full, ext)
        dphi_n = np.linalg.pinv(nm.linv_nodes, rcond=1e-10) @ rhs
        dphi = mt.R @ dphi_n
        dphi[[i for i, k in enumerate(mt.kinds) if k != OSCILLATOR]] = 0.0
    return dq, dphi


def transform_from_config(entries: Sequence) -> dict:
    """Accept a list of {name, kind, row} records as used in config files."""
    return {
        "names": [e["name"] for e in entries],
        "kinds": [e["kind"] for e in entries],
        "rows": [e["row"] for e in entries],
    }

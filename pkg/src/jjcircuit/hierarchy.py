"""Hierarchical diagonalization over a tree of mode groups.

Every node of the tree is a *block* with its own basis: a leaf is a single
mode in its truncated basis, a group is the set of retained eigenstates of
the Hamiltonian of its children.  A group Hamiltonian is the sum of its
children's eigenvalues plus every remaining term whose factors all lie
inside the group; those terms are consumed.  Terms reaching outside the
group have their inside factors projected into the retained eigenbasis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .hamiltonian import CompiledCircuit, Term
from .operators import ModeBasisSpec, Op
from .perturbation import Coupling, CorrectionReport, Projection, pair_corrections
from .solver import Spectrum, eigensolve_lowest

log = logging.getLogger(__name__)

DENSE_GROUP_LIMIT = 2048
WINDOW_LEVEL_CAP = 400


@dataclass
class Group:
    """A node of the partition tree.

    ``keep`` retained levels (or all levels within ``window`` GHz of the
    group ground state); ``excite`` further levels used only as truncated
    states for corrections in the parent group.
    """
    name: str
    children: list = field(default_factory=list)  # mode names or Groups
    keep: int | None = None
    window: float | None = None
    excite: int = 0

    def modes(self) -> list[str]:
        out = []
        for ch in self.children:
            out += ch.modes() if isinstance(ch, Group) else [ch]
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Group":
        children = [cls.from_dict(ch) if isinstance(ch, dict) else str(ch) for ch in d["children"]]
        return cls(str(d.get("name", "root")), children, d.get("keep"), d.get("window"),
                   int(d.get("excite", 0)))


@dataclass
class BTerm:
    """Term over blocks: coefficient times one matrix per block."""
    coeff: complex
    factors: dict[str, np.ndarray]
    label: str = ""
    labels: dict[str, str] = field(default_factory=dict)  # block -> operator label


@dataclass
class Block:
    name: str
    dim: int
    energies: np.ndarray | None = None  # None for leaves (energy lives in terms)
    retained: int | None = None          # g levels; the rest up to dim are e levels
    full_dim: int | None = None          # dimension before truncation


@dataclass
class HierarchyResult:
    spectrum: Spectrum
    blocks: dict[str, Block]
    root_children: list[str]
    observables: dict[str, np.ndarray] = field(default_factory=dict)  # label -> per-state values
    report: CorrectionReport | None = None
    groups: dict[str, Block] = field(default_factory=dict)  # every diagonalized group

    @property
    def effective_dimension(self) -> int:
        return self.spectrum.vectors.shape[0]


def factor_label(mode_name: str, op: Op) -> str:
    base = {"charge": "Q", "flux": "Phi", "charge2": "Q2", "flux2": "Phi2", "number": "N"}
    if op.kind in base:
        return f"{base[op.kind]}_{mode_name}"
    if op.kind == "displacement":
        return f"D_{mode_name}({op.param:+g})"
    if op.kind == "raise":
        return f"E_{mode_name}({int(op.param):+d})"
    return f"{op.kind}_{mode_name}"


def leaf_terms(terms: list[Term], basis: ModeBasisSpec, names: tuple[str, ...]) -> list[BTerm]:
    out = []
    for t in terms:
        out.append(BTerm(t.coeff, {names[m]: basis.matrix(m, op) for m, op in t.factors}, t.label,
                         {names[m]: factor_label(names[m], op) for m, op in t.factors}))
    return out


def split_matrices(mt, groups: dict[str, list[str]]) -> dict:
    """Per-group diagonal blocks and cross blocks of Cinv and Linv."""
    idx = {g: [mt.index(n) for n in modes] for g, modes in groups.items()}
    out = {"blocks": {}, "cross": {}}
    for g, ii in idx.items():
        out["blocks"][g] = {"cinv": mt.cinv[np.ix_(ii, ii)], "linv": mt.linv[np.ix_(ii, ii)]}
    for g in idx:
        for h in idx:
            if g < h:
                out["cross"][(g, h)] = {"cinv": mt.cinv[np.ix_(idx[g], idx[h])],
                                        "linv": mt.linv[np.ix_(idx[g], idx[h])]}
    return out


def _kron_term(t: BTerm, order: list[str], dims: list[int]) -> sp.csr_matrix:
    out = None
    run = 1
    for name, d in zip(order, dims):
        if name not in t.factors:
            run *= d
            continue
        m = sp.csr_matrix(t.factors[name])
        if run > 1:
            m = sp.kron(sp.identity(run, format="csr"), m, format="csr")
            run = 1
        out = m if out is None else sp.kron(out, m, format="csr")
    if out is None:
        out = sp.identity(run, format="csr", dtype=complex)
    elif run > 1:
        out = sp.kron(out, sp.identity(run, format="csr"), format="csr")
    return out * t.coeff


def group_matrix(order: list[str], blocks: dict[str, Block], terms: list[BTerm]) -> sp.csr_matrix:
    dims = [blocks[n].dim for n in order]
    dim = math.prod(dims)
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for i, n in enumerate(order):
        e = blocks[n].energies
        if e is None:
            continue
        left, right = math.prod(dims[:i]), math.prod(dims[i + 1:])
        h = h + sp.kron(sp.kron(sp.identity(left), sp.diags(e[:dims[i]])), sp.identity(right), format="csr")
    for t in terms:
        h = h + _kron_term(t, order, dims)
    h = 0.5 * (h + h.getH())
    return h.tocsr()


def project(vectors: np.ndarray, order: list[str], dims: list[int], factors: dict[str, np.ndarray]) -> np.ndarray:
    """V^+ (product of factors, identity elsewhere) V over the group's children."""
    k = vectors.shape[1]
    psi = vectors.reshape(*dims, k)
    out = psi
    for i, n in enumerate(order):
        if n in factors:
            out = np.moveaxis(np.tensordot(factors[n], out, axes=([1], [i])), 0, i)
    return vectors.conj().T @ out.reshape(-1, k)


def _solve(h: sp.csr_matrix, n_levels: int, seed: int) -> Spectrum:
    dim = h.shape[0]
    n_levels = min(n_levels, dim)
    if dim <= DENSE_GROUP_LIMIT or n_levels >= dim - 1:
        dense = h.toarray()
        vals, vecs = sla.eigh(dense, subset_by_index=(0, n_levels - 1))
        res = np.linalg.norm(dense @ vecs - vecs * vals, axis=0)
        return Spectrum(vals, vecs, res, {"method": "dense", "dimension": dim})
    return eigensolve_lowest(h, n_levels, seed=seed)


def _levels_needed(g: Group, dim: int) -> int:
    if g.keep is not None:
        n = int(g.keep)
    elif g.window is not None:
        n = min(dim, WINDOW_LEVEL_CAP)
    else:
        n = dim
    if n < 1:
        raise ValueError(f"group {g.name!r} must retain at least one level")
    return min(dim, n + g.excite)


class Hierarchy:
    def __init__(self, cc: CompiledCircuit, basis: ModeBasisSpec, root: Group,
                 observables: list[Term] = (), seed: int = 0, denominator: str = "state"):
        self.cc, self.basis, self.root = cc, basis, root
        self.names = cc.transform.names
        modes = root.modes()
        if sorted(modes) != sorted(self.names):
            missing = set(self.names) - set(modes)
            extra = [m for m in modes if m not in self.names]
            dup = {m for m in modes if modes.count(m) > 1}
            raise ValueError(f"partition must use every mode exactly once "
                             f"(missing {sorted(missing)}, unknown {extra}, repeated {sorted(dup)})")
        self.seed, self.denominator = seed, denominator
        self.blocks = {n: Block(n, d) for n, d in zip(self.names, basis.dims)}
        self.terms = leaf_terms(cc.terms(basis), basis, self.names)
        self.observables = leaf_terms(list(observables), basis, self.names)
        self.report = CorrectionReport(denominator=denominator)
        self.groups: dict[str, Block] = {}

    # -- one group -------------------------------------------------------
    def _diagonalize(self, g: Group, final_levels: int | None = None):
        order = [ch.name if isinstance(ch, Group) else ch for ch in g.children]
        child_blocks = [self.blocks[n] for n in order]
        members = set(order)
        inside = [t for t in self.terms if set(t.factors) <= members]
        rest = [t for t in self.terms if not set(t.factors) <= members]

        corrected = any(b.retained is not None and b.retained < b.dim for b in child_blocks)
        if corrected:
            inside = self._apply_corrections(g, order, inside)
        dims = [self.blocks[n].dim for n in order]
        h = group_matrix(order, self.blocks, inside)
        dim = h.shape[0]
        n_levels = final_levels if final_levels is not None else _levels_needed(g, dim)
        spec = _solve(h, n_levels, self.seed)
        vals, vecs = spec.values, spec.vectors
        retained = len(vals)
        if final_levels is None:
            if g.keep is not None:
                retained = min(int(g.keep), len(vals))
            elif g.window is not None:
                retained = int(np.sum(vals - vals[0] <= g.window))
            stop = min(len(vals), retained + g.excite)
            if stop < len(vals) and vals[stop] - vals[stop - 1] < 1e-9 * max(1.0, abs(vals[stop])):
                log.warning("group %s: retained set splits a degenerate multiplet", g.name)
            vals, vecs = vals[:stop], vecs[:, :stop]

        new_terms = []
        for t in rest:
            mine = {n: m for n, m in t.factors.items() if n in members}
            if not mine:
                new_terms.append(t)
                continue
            others = {n: m for n, m in t.factors.items() if n not in members}
            others[g.name] = project(vecs, order, dims, mine)
            labels = {n: l for n, l in t.labels.items() if n not in members}
            labels[g.name] = "*".join(t.labels[n] for n in order if n in mine)
            new_terms.append(BTerm(t.coeff, others, t.label, labels))
        self.terms = new_terms
        new_obs = []
        for t in self.observables:
            mine = {n: m for n, m in t.factors.items() if n in members}
            others = {n: m for n, m in t.factors.items() if n not in members}
            if mine:
                others[g.name] = project(vecs, order, dims, mine)
            new_obs.append(BTerm(t.coeff, others, t.label, t.labels))
        self.observables = new_obs
        for n in order:
            self.blocks.pop(n)
        self.blocks[g.name] = Block(g.name, vecs.shape[1], np.asarray(vals, float),
                                    retained if g.excite else None, dim)
        self.groups[g.name] = self.blocks[g.name]
        return Spectrum(vals, vecs, spec.residuals[:len(vals)], spec.meta), order, dims

    def _apply_corrections(self, g: Group, order: list[str], inside: list[BTerm]) -> list[BTerm]:
        """Restrict children to their g levels and add second-order corrections."""
        proj = {}
        for n in order:
            b = self.blocks[n]
            r = b.retained if b.retained is not None else b.dim
            proj[n] = Projection.counts(r, b.dim - r)
        pairs: dict[tuple[str, str], list[Coupling]] = {}
        for t in inside:
            names = [n for n in order if n in t.factors]
            if len(names) == 2:
                pairs.setdefault(tuple(names), []).append(
                    Coupling(t.coeff, t.factors[names[0]], t.factors[names[1]],
                             t.labels.get(names[0], names[0]), t.labels.get(names[1], names[1])))
            elif len(names) > 2 and any(proj[n].e for n in names):
                log.warning("term %s couples %d blocks; no truncation correction applied",
                            t.label, len(names))
        out = []
        for (nb, nc), couplings in pairs.items():
            bb, bc = self.blocks[nb], self.blocks[nc]
            rep = pair_corrections(bb.energies if bb.energies is not None else np.zeros(bb.dim), proj[nb],
                                   bc.energies if bc.energies is not None else np.zeros(bc.dim), proj[nc],
                                   couplings, (nb, nc), self.denominator)
            self.report.merge(rep)
            total = rep.total()
            if total is None:
                continue
            # Schmidt-decompose the correction into products over the two blocks
            gb, gc = len(proj[nb].g), len(proj[nc].g)
            m = total.reshape(gb, gc, gb, gc).transpose(0, 2, 1, 3).reshape(gb * gb, gc * gc)
            u, s, vh = np.linalg.svd(m, full_matrices=False)
            keep = s > 1e-14 * max(s[0], 1e-300)
            for k in np.flatnonzero(keep):
                out.append(BTerm(s[k], {nb: u[:, k].reshape(gb, gb), nc: vh[k].reshape(gc, gc)},
                                 f"corr:{nb},{nc}"))
        # restrict all blocks and terms to g levels
        for n in order:
            b = self.blocks[n]
            r = len(proj[n].g)
            if r < b.dim:
                self.blocks[n] = Block(n, r, b.energies[:r] if b.energies is not None else None, None, b.full_dim)
        restricted = []
        for t in inside + out:
            restricted.append(BTerm(t.coeff, {n: m[:len(proj[n].g), :len(proj[n].g)]
                                               for n, m in t.factors.items()}, t.label, t.labels))
        self.observables = [BTerm(t.coeff, {n: (m[:len(proj[n].g), :len(proj[n].g)] if n in proj else m)
                                            for n, m in t.factors.items()}, t.label, t.labels)
                            for t in self.observables]
        return restricted

    # -- the tree --------------------------------------------------------
    def run(self, levels: int) -> HierarchyResult:
        """Diagonalize subgroups depth-first, then the root for ``levels`` states."""
        def walk(g: Group):
            for ch in g.children:
                if isinstance(ch, Group):
                    walk(ch)
            self._diagonalize(g)

        for ch in self.root.children:
            if isinstance(ch, Group):
                walk(ch)
        spec, order, _ = self._diagonalize(self.root, final_levels=levels)
        obs = {}
        for t in self.observables:
            mat = t.factors.get(self.root.name, np.eye(spec.vectors.shape[1]))
            obs[t.label] = np.real_if_close(t.coeff * np.diag(mat))
        return HierarchyResult(spec, dict(self.blocks), order, obs, self.report, dict(self.groups))


def run_hierarchy(cc: CompiledCircuit, basis: ModeBasisSpec, root: Group, levels: int,
                  observables: list[Term] = (), seed: int = 0, denominator: str = "state") -> HierarchyResult:
    return Hierarchy(cc, basis, root, observables, seed, denominator=denominator).run(levels)


def brute_force_group(names) -> Group:
    return Group("root", list(names))


def interaction_matrix(terms: list[BTerm], name_b: str, name_c: str, dim_b: int, dim_c: int) -> np.ndarray:
    """V_{(k l),(k' l')} from the terms coupling exactly blocks b and c."""
    v = np.zeros((dim_b * dim_c, dim_b * dim_c), dtype=complex)
    for t in terms:
        if set(t.factors) == {name_b, name_c}:
            v += t.coeff * np.kron(t.factors[name_b], t.factors[name_c])
    return v

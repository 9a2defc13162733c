"""Hamiltonian terms and their sparse tensor-product assembly.

In mode coordinates (flux in Phi0, charge in 2e, energy in GHz)

    H = 1/2 E_C (Q - dQ)^T Cinv (Q - dQ) + 1/2 E_L Phi_O^T Linv_O Phi_O
        - sum_J E_J cos(2 pi (a.Phi_O + n.Phi_J) + dphi).

Oscillator offsets are absorbed into a displaced basis, which leaves their
charge and flux operators unshifted and moves the flux offsets into the
junction phases dphi.  Island and Josephson charges keep explicit offsets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import units
from .modes import ISLAND, JOSEPHSON, OSCILLATOR, ModeTransform, bias_offsets, build_node_matrices
from .netlist import Circuit
from .operators import ModeBasisSpec, Op
from .topology import SpanningForest, branch_matrix

DIMENSION_CAP = 2**26
NEGLIGIBLE = 1e-12


@dataclass(frozen=True)
class JunctionDecomposition:
    branch: str
    ej: float
    osc: tuple[float, ...]    # coefficient per oscillator mode (model order)
    jos: tuple[int, ...]      # integer per Josephson mode
    phase: float              # constant offset, radians


@dataclass(frozen=True)
class Term:
    coeff: complex
    factors: tuple[tuple[int, Op], ...]
    label: str = ""

    def modes(self) -> tuple[int, ...]:
        return tuple(m for m, _ in self.factors)

    def to_json(self, names=None) -> dict:
        return {
            "label": self.label,
            "coeff": [self.coeff.real, self.coeff.imag],
            "factors": [[names[m] if names else m, *op.to_json()] for m, op in self.factors],
        }


@dataclass(frozen=True)
class AssembledHamiltonian:
    matrix: sp.csr_matrix
    basis: ModeBasisSpec
    names: tuple[str, ...] = ()

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def _wrap(phase: float) -> float:
    return float(math.remainder(phase, 2 * math.pi))


def junction_phase_decomposition(c: Circuit, mt: ModeTransform, f: SpanningForest | None = None,
                                 dphi: np.ndarray | None = None) -> list[JunctionDecomposition]:
    """Express each junction phase in mode coordinates plus a constant offset.

    ``dphi`` are the oscillator flux offsets; they enter as
    2 pi a.dPhi_O once the displaced basis is used.
    """
    if dphi is None:
        _, dphi = bias_offsets(c, mt, forest=f)
    bm = branch_matrix(c, f)
    osc, isl, jos = mt.indices(OSCILLATOR), mt.indices(ISLAND), mt.indices(JOSEPHSON)
    out = []
    for b in c.junctions:
        row = bm.rows([b.id])[0].astype(float)
        coeff = row @ mt.S
        if isl and np.abs(coeff[isl]).max() > 1e-9:
            raise ValueError(f"junction {b.id} depends on an island coordinate")
        n = coeff[jos]
        if np.abs(n - np.round(n)).max(initial=0.0) > 1e-9:
            raise ValueError(f"junction {b.id} has non-integer Josephson coefficients")
        a = coeff[osc]
        a = np.where(np.abs(a) < 1e-12, 0.0, a)
        phase = 2 * math.pi * float(a @ dphi[osc]) if osc else 0.0
        out.append(JunctionDecomposition(b.id, b.ej, tuple(float(x) for x in a),
                                         tuple(int(round(x)) for x in n), _wrap(phase)))
    return out


def make_basis(mt: ModeTransform, truncations) -> ModeBasisSpec:
    """Basis spec from per-mode truncations (list in mode order or dict by name)."""
    if isinstance(truncations, dict):
        missing = set(mt.names) - set(truncations)
        if missing:
            raise ValueError(f"missing truncations for modes {sorted(missing)}")
        truncations = [truncations[n] for n in mt.names]
    if len(truncations) != mt.n_modes:
        raise ValueError(f"expected {mt.n_modes} truncations")
    z = tuple(mt.oscillator_params(i)[2] if k == OSCILLATOR else 1.0 for i, k in enumerate(mt.kinds))
    return ModeBasisSpec(tuple(mt.kinds), tuple(int(t) for t in truncations), z)


def _reduced_offset(x: float) -> float:
    # integer charge relabelling is exact, so keep offsets in [-1/2, 1/2)
    return float(x - math.floor(x + 0.5))


def build_terms(c: Circuit, mt: ModeTransform, jd: list[JunctionDecomposition] | None = None,
                basis: ModeBasisSpec | None = None, dq: np.ndarray | None = None,
                f: SpanningForest | None = None) -> list[Term]:
    if dq is None or jd is None:
        dq0, dphi = bias_offsets(c, mt, forest=f)
        dq = dq0 if dq is None else dq
        jd = jd if jd is not None else junction_phase_decomposition(c, mt, f, dphi)
    n = mt.n_modes
    osc = mt.indices(OSCILLATOR)
    offset = [0.0 if k == OSCILLATOR else _reduced_offset(dq[i]) for i, k in enumerate(mt.kinds)]
    ec = units.CHARGE_ENERGY * mt.cinv
    el = units.FLUX_ENERGY * mt.linv
    terms: list[Term] = []

    def charge(i, sq=False):
        return (i, Op("charge2" if sq else "charge", offset[i]))

    for i in range(n):
        if ec[i, i] != 0:
            terms.append(Term(0.5 * ec[i, i], (charge(i, True),), f"C:{mt.names[i]}"))
        for j in range(i + 1, n):
            if ec[i, j] != 0:
                terms.append(Term(complex(ec[i, j]), (charge(i), charge(j)),
                                  f"C:{mt.names[i]},{mt.names[j]}"))
    for p, i in enumerate(osc):
        terms.append(Term(0.5 * el[i, i], ((i, Op("flux2")),), f"L:{mt.names[i]}"))
        for j in osc[p + 1:]:
            if el[i, j] != 0:
                terms.append(Term(complex(el[i, j]), ((i, Op("flux")), (j, Op("flux"))),
                                  f"L:{mt.names[i]},{mt.names[j]}"))

    jos = mt.indices(JOSEPHSON)
    for d in jd:
        fac = [(i, Op("displacement", a)) for i, a in zip(osc, d.osc) if a != 0]
        fac += [(j, Op("raise", k)) for j, k in zip(jos, d.jos) if k != 0]
        if not fac:
            continue
        fac.sort(key=lambda t: t[0])
        conj = [(m, Op(op.kind, -op.param)) for m, op in fac]
        w = -0.5 * d.ej * complex(math.cos(d.phase), math.sin(d.phase))
        terms.append(Term(w, tuple(fac), f"J:{d.branch}"))
        terms.append(Term(w.conjugate(), tuple(conj), f"J:{d.branch}*"))

    scale = max((abs(t.coeff) for t in terms), default=0.0)
    return [Term(complex(t.coeff), t.factors, t.label) for t in terms
            if abs(t.coeff) > NEGLIGIBLE * scale]


def dump_terms(terms: list[Term], names=None) -> str:
    return json.dumps([t.to_json(names) for t in terms], indent=1)


def _term_matrix(t: Term, basis: ModeBasisSpec, dims=None) -> sp.csr_matrix:
    dims = dims or basis.dims
    factors = dict(t.factors)
    out = None
    run = 1  # accumulate consecutive identities into one block
    for m, d in enumerate(dims):
        if m not in factors:
            run *= d
            continue
        mat = sp.csr_matrix(basis.matrix(m, factors[m]))
        if run > 1:
            mat = sp.kron(sp.identity(run, format="csr"), mat, format="csr")
            run = 1
        out = mat if out is None else sp.kron(out, mat, format="csr")
    if out is None:
        return sp.identity(run, format="csr", dtype=complex) * t.coeff
    if run > 1:
        out = sp.kron(out, sp.identity(run, format="csr"), format="csr")
    return out * t.coeff


def assemble(terms: list[Term], basis: ModeBasisSpec, cap: int = DIMENSION_CAP,
             names=()) -> AssembledHamiltonian:
    dim = basis.dimension
    if dim > cap:
        raise ValueError(f"Hilbert-space dimension {dim} exceeds cap {cap}")
    for t in terms:
        if any(m >= len(basis.dims) for m in t.modes()):
            raise ValueError(f"term {t.label!r} references a mode outside the basis")
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for t in terms:
        h = h + _term_matrix(t, basis)
    h = 0.5 * (h + h.getH())
    h.sum_duplicates()
    h.eliminate_zeros()
    if h.nnz and np.abs(h.data.imag).max() <= 1e-14 * np.abs(h.data).max():
        h = h.real.tocsr()
    return AssembledHamiltonian(h.tocsr(), basis, tuple(names))


def apply_factors(factors, basis: ModeBasisSpec, vec: np.ndarray) -> np.ndarray:
    """Apply a product of single-mode operators to a state vector."""
    dims = basis.dims
    psi = np.asarray(vec).reshape(dims)
    for m, op in factors:
        mat = basis.matrix(m, op)
        psi = np.moveaxis(np.tensordot(mat, psi, axes=([1], [m])), 0, m)
    return psi.reshape(-1)


def expectation(op, state: np.ndarray, basis: ModeBasisSpec) -> complex:
    """<psi|O|psi> for a Term, a (mode, Op) pair or a list of such factors."""
    state = np.asarray(state)
    if state.shape[0] != basis.dimension:
        raise ValueError(f"state dimension {state.shape[0]} != basis dimension {basis.dimension}")
    if isinstance(op, Term):
        factors, coeff = op.factors, op.coeff
    elif isinstance(op, tuple) and isinstance(op[1], Op):
        factors, coeff = (op,), 1.0
    else:
        factors, coeff = tuple(op), 1.0
    return complex(coeff * np.vdot(state, apply_factors(factors, basis, state)))


@dataclass
class CompiledCircuit:
    """Everything needed to build Hamiltonians for one circuit and transform."""
    circuit: Circuit
    forest: SpanningForest
    transform: ModeTransform
    dq: np.ndarray
    dphi: np.ndarray
    junctions: list[JunctionDecomposition] = field(default_factory=list)

    def basis(self, truncations) -> ModeBasisSpec:
        return make_basis(self.transform, truncations)

    def terms(self, basis: ModeBasisSpec | None = None) -> list[Term]:
        return build_terms(self.circuit, self.transform, self.junctions, basis, self.dq, self.forest)

    def hamiltonian(self, truncations, cap: int = DIMENSION_CAP) -> AssembledHamiltonian:
        basis = self.basis(truncations)
        return assemble(self.terms(basis), basis, cap, self.transform.names)


def compile_circuit(c: Circuit, forest: SpanningForest | None = None, transform: dict | None = None,
                    mt: ModeTransform | None = None) -> CompiledCircuit:
    from .modes import build_mode_transform
    from .topology import build_spanning_forest

    forest = forest or build_spanning_forest(c)
    nm = build_node_matrices(c)
    mt = mt or build_mode_transform(c, nm, forest, user=transform)
    dq, dphi = bias_offsets(c, mt, nm, forest)
    jd = junction_phase_decomposition(c, mt, forest, dphi)
    return CompiledCircuit(c, forest, mt, dq, dphi, jd)

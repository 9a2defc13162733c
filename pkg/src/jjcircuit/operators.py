"""Single-mode operator matrices in truncated bases.

Units: flux in Phi0, charge in 2e, so [Phi, Q] = i/(2 pi).

Oscillators use the occupation basis |0>..|nu_m>.  With the phase impedance
``z = pi Z / R_Q`` (the squared zero-point phase),

    Phi = sqrt(z)/(2 pi) (b + b^+),    Q = -i/(2 sqrt(z)) (b - b^+),

and the charge displacement D(a) = exp(2 pi i a Phi) shifts Q by +a.

Island and Josephson modes use charge states ordered q_m, q_m-1, ..., -q_m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

OSCILLATOR_KINDS = ("flux", "charge", "flux2", "charge2", "number", "displacement")
PERIODIC_KINDS = ("charge", "charge2", "flux", "shift+", "shift-", "raise")


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    size: int
    hermitian: bool = False
    unitary: bool = False

    def __post_init__(self):
        m = self.matrix
        if m.shape != (self.size, self.size):
            raise ValueError(f"matrix shape {m.shape} does not match basis size {self.size}")
        if self.hermitian and not np.allclose(m, m.conj().T, atol=1e-13 * max(1.0, np.abs(m).max())):
            raise ValueError("operator flagged hermitian is not")
        m.setflags(write=False)


def _ladder(size: int) -> np.ndarray:
    """Annihilation operator b on size occupation states."""
    return np.diag(np.sqrt(np.arange(1, size, dtype=float)), 1)


def _key(x: float) -> float:
    # collapse rounding noise so rational coefficients share cache entries
    r = round(x * 48) / 48
    return r if abs(r - x) < 1e-12 else float(x)


def oscillator_operator(kind: str, nu_m: int, z: float = 1.0, a: float = 0.0) -> OperatorMatrix:
    """Oscillator operator on nu_m + 1 occupation states.

    ``flux2``/``charge2`` are truncations of the untruncated squares, so a
    lone oscillator is exactly diagonal at any truncation.
    """
    if nu_m < 1:
        raise ValueError("nu_m must be >= 1")
    if z <= 0:
        raise ValueError("phase impedance z must be positive")
    if kind not in OSCILLATOR_KINDS:
        raise ValueError(f"unknown oscillator operator {kind!r}")
    return _oscillator_cached(kind, int(nu_m), float(z), _key(a) if kind == "displacement" else 0.0)


@lru_cache(maxsize=4096)
def _oscillator_cached(kind: str, nu_m: int, z: float, a: float) -> OperatorMatrix:
    size = nu_m + 1
    if kind == "displacement":
        return OperatorMatrix(_displacement(size, a * math.sqrt(z)), size, unitary=True)
    if kind == "number":
        return OperatorMatrix(np.diag(np.arange(size, dtype=float)).astype(complex), size, hermitian=True)
    big = size + 2 if kind.endswith("2") else size
    b = _ladder(big)
    if kind.startswith("flux"):
        op = math.sqrt(z) / (2 * math.pi) * (b + b.T)
    else:
        op = -0.5j / math.sqrt(z) * (b - b.T)
    if kind.endswith("2"):
        op = op @ op
    op = op[:size, :size].astype(complex)
    return OperatorMatrix(0.5 * (op + op.conj().T), size, hermitian=True)


def _displacement(size: int, s: float) -> np.ndarray:
    """Matrix elements of exp(i s (b + b^+)) between the lowest size states.

    For m >= n: <m|D|n> = sqrt(n!/m!) alpha^(m-n) exp(-|alpha|^2/2) L_n^(m-n)(|alpha|^2)
    with alpha = i s; the matrix is complex symmetric.
    """
    x = s * s
    out = np.zeros((size, size), dtype=complex)
    if s == 0:
        np.fill_diagonal(out, 1.0)
        return out
    for n in range(size):
        for m in range(n, size):
            d = m - n
            log_mag = 0.5 * (gammaln(n + 1) - gammaln(m + 1)) + d * math.log(abs(s)) - 0.5 * x
            lag = eval_genlaguerre(n, d, x)
            phase = (1j * math.copysign(1.0, s)) ** d
            out[m, n] = math.exp(log_mag) * lag * phase
            out[n, m] = out[m, n]
    return out


def flux_states(q_m: int) -> np.ndarray:
    """Columns are the flux basis states |Phi_k>, k = -q_m..q_m, in the charge basis.

    <q|Phi_k> = exp(2 pi i k q / (2 q_m + 1)) / sqrt(2 q_m + 1).
    """
    n = 2 * q_m + 1
    q = np.arange(q_m, -q_m - 1, -1)
    k = np.arange(-q_m, q_m + 1)
    return np.exp(2j * np.pi * np.outer(q, k) / n) / math.sqrt(n)


def charge_values(q_m: int) -> np.ndarray:
    return np.arange(q_m, -q_m - 1, -1, dtype=float)


def periodic_mode_operator(kind: str, q_m: int, offset: float = 0.0) -> OperatorMatrix:
    """Island/Josephson operator on 2 q_m + 1 charge states.

    ``shift+`` is the subdiagonal (|q> -> |q-1>), ``shift-`` the
    superdiagonal (|q> -> |q+1>); ``raise`` is an alias of ``shift-`` and is
    the charge-basis representation of exp(2 pi i Phi).  ``charge`` and
    ``charge2`` accept a charge offset: diag(q - offset) and its square.
    """
    if q_m < 1:
        raise ValueError("q_m must be >= 1")
    if kind not in PERIODIC_KINDS:
        raise ValueError(f"unknown periodic-mode operator {kind!r}")
    return _periodic_cached(kind, int(q_m), float(offset) if kind.startswith("charge") else 0.0)


@lru_cache(maxsize=1024)
def _periodic_cached(kind: str, q_m: int, offset: float) -> OperatorMatrix:
    n = 2 * q_m + 1
    if kind == "charge":
        return OperatorMatrix(np.diag(charge_values(q_m) - offset).astype(complex), n, hermitian=True)
    if kind == "charge2":
        return OperatorMatrix(np.diag((charge_values(q_m) - offset) ** 2).astype(complex), n,
                              hermitian=True)
    if kind == "flux":
        states = flux_states(q_m)
        k = np.arange(-q_m, q_m + 1) / n
        op = (states * k) @ states.conj().T
        op = 0.5 * (op + op.conj().T)
        np.fill_diagonal(op, 0.0)
        return OperatorMatrix(op, n, hermitian=True)
    if kind == "shift+":
        return OperatorMatrix(np.eye(n, k=-1, dtype=complex), n)
    return OperatorMatrix(np.eye(n, k=1, dtype=complex), n)


def flux_matrix_closed_form(q_m: int) -> np.ndarray:
    """Josephson flux operator from its closed-form off-diagonal elements."""
    n = 2 * q_m + 1
    q = charge_values(q_m)
    d = q[:, None] - q[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        num = (q_m * np.sin(2 * np.pi * (q_m + 1) * d / n)
               - (q_m + 1) * np.sin(2 * np.pi * q_m * d / n))
        den = 1j * n**2 * (1 - np.cos(2 * np.pi * d / n))
        out = num / den
    out[d == 0] = 0.0
    return out


@dataclass(frozen=True)
class Op:
    """Operator descriptor: a kind plus one numeric parameter.

    Oscillator kinds take ``param`` as the displacement amount; periodic
    ``charge``/``charge2`` take it as the charge offset and ``raise`` as the
    (integer, possibly negative) number of charge steps.
    """
    kind: str
    param: float = 0.0

    def to_json(self):
        return [self.kind, self.param] if self.param else [self.kind]


@dataclass(frozen=True)
class ModeBasisSpec:
    kinds: tuple[str, ...]
    truncations: tuple[int, ...]  # nu_m for oscillators, q_m otherwise
    z: tuple[float, ...]          # phase impedance, ignored for periodic modes

    def __post_init__(self):
        if not (len(self.kinds) == len(self.truncations) == len(self.z)):
            raise ValueError("kinds, truncations and z must have equal length")
        for k, t, zz in zip(self.kinds, self.truncations, self.z):
            if t < 1:
                raise ValueError("truncations must be >= 1")
            if k == "oscillator" and not zz > 0:
                raise ValueError("oscillator phase impedance must be positive")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(t + 1 if k == "oscillator" else 2 * t + 1
                     for k, t in zip(self.kinds, self.truncations))

    @property
    def dimension(self) -> int:
        return math.prod(self.dims)

    def matrix(self, mode: int, op: Op) -> np.ndarray:
        if self.kinds[mode] == "oscillator":
            if op.kind == "displacement":
                return oscillator_operator("displacement", self.truncations[mode], self.z[mode], op.param).matrix
            return oscillator_operator(op.kind, self.truncations[mode], self.z[mode]).matrix
        q_m = self.truncations[mode]
        if op.kind == "raise":
            n = int(round(op.param))
            base = periodic_mode_operator("shift-" if n > 0 else "shift+", q_m).matrix
            return np.linalg.matrix_power(base, abs(n))
        return periodic_mode_operator(op.kind, q_m, op.param).matrix

    def with_truncations(self, truncations) -> "ModeBasisSpec":
        return ModeBasisSpec(self.kinds, tuple(int(t) for t in truncations), self.z)

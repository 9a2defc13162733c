"""Second-order corrections for couplings through truncated subsystem states.

Two subsystems b and c are split into retained (g) and truncated (e) levels.
A cross coupling V = sum_t c_t A_t (x) B_t is projected onto g_b (x) g_c and
corrected by virtual transitions into three intermediate blocks:

    (e_b, g_c)  polarizability of b, keyed by the b-side operator
    (g_b, e_c)  polarizability of c, keyed by the c-side operator
    (e_b, e_c)  dispersion, keyed by the coupling term

A pair of different couplings (t, s) contributes half to the channel of each.
Every channel matrix is Hermitian-symmetrized, so channels add up exactly to
the total correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RESONANCE_TOL = 1e-6  # GHz
DENOMINATORS = ("state", "ground", "ground-sc")


class PerturbationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Projection:
    g: tuple[int, ...]
    e: tuple[int, ...]

    def __post_init__(self):
        if set(self.g) & set(self.e):
            raise ValueError("g and e level sets must be disjoint")

    @classmethod
    def counts(cls, n_g: int, n_e: int) -> "Projection":
        return cls(tuple(range(n_g)), tuple(range(n_g, n_g + n_e)))


@dataclass(frozen=True)
class Coupling:
    """One product coupling c A (x) B between subsystems b and c."""
    coeff: complex
    a: np.ndarray
    b: np.ndarray
    label_a: str
    label_b: str

    @property
    def label(self) -> str:
        return f"{self.label_a};{self.label_b}"


@dataclass
class CorrectionReport:
    channels: dict[str, np.ndarray] = field(default_factory=dict)
    denominator: str = "state"
    windows: dict[str, dict] = field(default_factory=dict)

    @property
    def polarizabilities(self) -> list[str]:
        return [k for k in self.channels if k.startswith("alpha[")]

    @property
    def dispersions(self) -> list[str]:
        return [k for k in self.channels if k.startswith("Ud[")]

    def total(self) -> np.ndarray | None:
        mats = list(self.channels.values())
        return sum(mats[1:], mats[0].copy()) if mats else None

    def magnitudes(self) -> dict[str, float]:
        return {k: float(np.linalg.norm(v, 2)) for k, v in self.channels.items()}

    def merge(self, other: "CorrectionReport", prefix: str = "") -> None:
        for k, v in other.channels.items():
            self.channels[prefix + k] = v
        self.windows.update(other.windows)

    def to_json(self) -> dict:
        return {
            "denominator": self.denominator,
            "windows": self.windows,
            "channels": {k: {"norm": float(np.linalg.norm(v, 2)),
                             "diagonal": np.real(np.diag(v)).tolist()}
                         for k, v in self.channels.items()},
        }


def _inverse_gaps(e_rows: np.ndarray, e_mid: np.ndarray, numer: np.ndarray, what: str) -> np.ndarray:
    gap = e_rows[:, None] - e_mid[None, :]
    close = (np.abs(gap) < RESONANCE_TOL) & (np.abs(numer) > 1e-12)
    if np.any(close):
        r, m = np.argwhere(close)[0]
        raise PerturbationError(
            f"resonant energy denominator in {what}: g-level {r} vs intermediate level {m} "
            f"(gap {gap[r, m]:.3e} GHz); enlarge the retained set")
    with np.errstate(divide="ignore"):
        inv = np.where(np.abs(gap) < RESONANCE_TOL, 0.0, 1.0 / np.where(gap == 0, 1.0, gap))
    return inv


def polarizability(energies: np.ndarray, o: np.ndarray, p: np.ndarray, proj: Projection,
                   energy: float) -> np.ndarray:
    """alpha_gg' = sum_e O_ge P_eg' / (energy - E_e) on the g levels."""
    g, e = list(proj.g), list(proj.e)
    if not e:
        return np.zeros((len(g), len(g)), dtype=complex)
    energies = np.asarray(energies)
    gap = energy - energies[e]
    if np.any(np.abs(gap) < RESONANCE_TOL):
        k = e[int(np.argmin(np.abs(gap)))]
        raise PerturbationError(f"resonant energy denominator at level {k}")
    return (o[np.ix_(g, e)] / gap) @ p[np.ix_(e, g)]


def dispersion_term(energies_b: np.ndarray, energies_c: np.ndarray, couplings: list[Coupling],
                    proj_b: Projection, proj_c: Projection, energy: float) -> np.ndarray:
    """sum_{e_b, e_c} V_{g, e_b e_c} V_{e_b e_c, g'} / (energy - E_eb - E_ec)."""
    gb, eb, gc, ec = map(list, (proj_b.g, proj_b.e, proj_c.g, proj_c.e))
    n = len(gb) * len(gc)
    if not eb or not ec or not couplings:
        return np.zeros((n, n), dtype=complex)
    x = sum(cp.coeff * np.kron(cp.a[np.ix_(gb, eb)], cp.b[np.ix_(gc, ec)]) for cp in couplings)
    y = sum(cp.coeff * np.kron(cp.a[np.ix_(eb, gb)], cp.b[np.ix_(ec, gc)]) for cp in couplings)
    mid = (np.asarray(energies_b)[eb][:, None] + np.asarray(energies_c)[ec][None, :]).ravel()
    inv = _inverse_gaps(np.array([energy]), mid, np.ones((1, mid.size)), "dispersion")[0]
    return (x * inv) @ y


def pair_corrections(energies_b: np.ndarray, proj_b: Projection, energies_c: np.ndarray,
                     proj_c: Projection, couplings: list[Coupling], names: tuple[str, str] = ("b", "c"),
                     denominator: str = "state", energy: float | None = None) -> CorrectionReport:
    """Channel-resolved second-order correction on g_b (x) g_c.

    ``denominator="state"`` uses 1/2 [1/(E_r - E_m) + 1/(E_c - E_m)] with the
    unperturbed energies of the row and column g states; ``"ground"`` uses a
    constant E, by default the sum of the two subsystem ground energies;
    ``"ground-sc"`` repeats the constant-E pass once with E set to the
    corrected g-space ground energy.
    """
    if denominator not in DENOMINATORS:
        raise ValueError(f"denominator must be one of {DENOMINATORS}")
    if denominator == "ground-sc":
        first = pair_corrections(energies_b, proj_b, energies_c, proj_c, couplings, names, "ground", energy)
        gb, gc = list(proj_b.g), list(proj_c.g)
        h = np.diag((np.asarray(energies_b, float)[gb][:, None]
                     + np.asarray(energies_c, float)[gc][None, :]).ravel()).astype(complex)
        h += sum(cp.coeff * np.kron(cp.a[np.ix_(gb, gb)], cp.b[np.ix_(gc, gc)]) for cp in couplings)
        if first.channels:
            h += first.total()
        report = pair_corrections(energies_b, proj_b, energies_c, proj_c, couplings, names, "ground",
                                  float(np.linalg.eigvalsh(0.5 * (h + h.conj().T))[0]))
        report.denominator = denominator
        return report
    eb_all, ec_all = np.asarray(energies_b, float), np.asarray(energies_c, float)
    gb, eb, gc, ec = map(list, (proj_b.g, proj_b.e, proj_c.g, proj_c.e))
    e_g = (eb_all[gb][:, None] + ec_all[gc][None, :]).ravel()
    if energy is None:
        energy = eb_all[gb[0]] + ec_all[gc[0]]
    report = CorrectionReport(denominator=denominator)
    report.windows = {
        names[0]: {"g": len(gb), "e": len(eb), "e_max": float(eb_all[eb].max() - eb_all[gb[0]]) if eb else 0.0},
        names[1]: {"g": len(gc), "e": len(ec), "e_max": float(ec_all[ec].max() - ec_all[gc[0]]) if ec else 0.0},
    }
    ng = len(e_g)
    blocks = [
        ("b", eb, gc, lambda cp: f"alpha[{names[0]}:{cp.label_a}]"),
        ("c", gb, ec, lambda cp: f"alpha[{names[1]}:{cp.label_b}]"),
        ("d", eb, ec, lambda cp: f"Ud[{cp.label}]"),
    ]
    for tag, xs, ys, key in blocks:
        if not xs or not ys:
            continue
        mid = (eb_all[xs][:, None] + ec_all[ys][None, :]).ravel()
        xt = [cp.coeff * np.kron(cp.a[np.ix_(gb, xs)], cp.b[np.ix_(gc, ys)]) for cp in couplings]
        yt = [cp.coeff * np.kron(cp.a[np.ix_(xs, gb)], cp.b[np.ix_(ys, gc)]) for cp in couplings]
        numer = np.abs(sum(xt)) + np.abs(sum(yt)).T
        if denominator == "state":
            inv = _inverse_gaps(e_g, mid, numer, f"block {tag}")
        else:
            inv = np.broadcast_to(_inverse_gaps(np.array([energy]), mid, numer.max(axis=0, keepdims=True),
                                                f"block {tag}"), (ng, mid.size))
        # group couplings by channel key, then split cross pairs evenly
        keys: dict[str, list[int]] = {}
        for i, cp in enumerate(couplings):
            keys.setdefault(key(cp), []).append(i)
        xk = {k: sum(xt[i] for i in idx) for k, idx in keys.items()}
        yk = {k: sum(yt[i] for i in idx) for k, idx in keys.items()}

        def second(x, y):
            if denominator == "state":
                return 0.5 * ((x * inv) @ y + x @ (inv.T * y))
            return (x * inv[0]) @ y

        for k in keys:
            acc = np.zeros((ng, ng), dtype=complex)
            for k2 in keys:
                acc += 0.5 * (second(xk[k], yk[k2]) + second(xk[k2], yk[k]))
            acc = 0.5 * (acc + acc.conj().T)
            report.channels[k] = report.channels.get(k, 0) + acc
    return report

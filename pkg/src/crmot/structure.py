"""Hyperfine + Zeeman structure of a fine-structure level at arbitrary field.

Basis: product states ``|m_J, m_I>`` ordered with ``m_J`` descending, then
``m_I`` descending. Energies are in MHz. ``B`` is the signed field
projection on the quantization axis in gauss, so negative fields (the
far end of a zero-crossing slower) are handled without re-quantizing.

The Hamiltonian is block diagonal in ``m_F = m_J + m_I``. Inside a block
eigenvalues never cross, so the adiabatic label of a state at any field
is fixed by its energy rank within the block: the k-th lowest state of
a block is connected to the k-th lowest zero-field ``F`` level with that
``m_F``. :func:`eigensystem` uses that rule directly; :func:`eigenlevels`
tracks eigenvectors by overlap along a field grid, which agrees with the
rank rule on any grid fine enough to pass its ambiguity check.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .angular import twice, fmt_half, clebsch_gordan_twice
from .units import MU_B_MHZ_PER_G


class ConfigurationError(ValueError):
    """Level lacks the constants needed to build its Hamiltonian."""


class TrackingError(RuntimeError):
    """Eigenvector overlap matching between grid points is ambiguous."""


@dataclass(frozen=True, order=True)
class StateLabel:
    """Adiabatic label ``|F, m_F>`` stored as twice-values."""
    F2: int
    mF2: int

    @classmethod
    def of(cls, F, mF):
        return cls(twice(F), twice(mF))

    @classmethod
    def parse(cls, text):
        """Parse ``'11/2,11/2'`` or ``'F=11/2,mF=11/2'``."""
        parts = [p.split("=")[-1].strip() for p in text.replace(";", ",").split(",")]
        if len(parts) != 2:
            raise ValueError(f"cannot parse state label {text!r}")
        return cls.of(Fraction(parts[0]), Fraction(parts[1]))

    @property
    def F(self):
        return Fraction(self.F2, 2)

    @property
    def mF(self):
        return Fraction(self.mF2, 2)

    def __str__(self):
        return f"F={fmt_half(self.F2)},mF={fmt_half(self.mF2)}"


def _spin_ops(j2):
    m = np.arange(j2, -j2 - 1, -2) / 2.0
    j = j2 / 2.0
    jp = np.zeros((len(m), len(m)))
    for k in range(1, len(m)):
        jp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    return np.diag(m), jp, jp.T


def product_basis(J2, I2):
    """Twice-values ``(m_J, m_I)`` of the product basis, in basis order."""
    mj = np.repeat(np.arange(J2, -J2 - 1, -2), I2 + 1)
    mi = np.tile(np.arange(I2, -I2 - 1, -2), J2 + 1)
    return mj, mi


def zero_field_energy(level, I, F):
    """Zero-field hyperfine energy (MHz) of level ``F`` relative to the centroid."""
    i, j, f = float(I), float(level.J), float(F)
    K = f * (f + 1) - i * (i + 1) - j * (j + 1)
    e = 0.5 * (level.A or 0.0) * K
    if level.B and i >= 1 and j >= 1:
        e += level.B * (1.5 * K * (K + 1) - 2 * i * (i + 1) * j * (j + 1)) / (
            4 * i * (2 * i - 1) * j * (2 * j - 1))
    return e


class LevelStructure:
    """Field-independent pieces of ``H(B) = H0 + B * Z`` for one level."""

    def __init__(self, level, I, nuclear_g=0.0, nuclear_zeeman=False):
        self.level = level
        self.J2 = level.J2
        self.I2 = twice(I)
        if self.I2 > 0 and (level.A is None or level.B is None):
            raise ConfigurationError(f"level {level.label} needs hyperfine constants A and B for I={fmt_half(self.I2)}")
        self.mj2, self.mi2 = product_basis(self.J2, self.I2)
        self.mf2 = self.mj2 + self.mi2
        self.dim = len(self.mj2)

        Jz, Jp, Jm = _spin_ops(self.J2)
        Iz, Ip, Im = _spin_ops(self.I2)
        eI = np.eye(self.I2 + 1)
        eJ = np.eye(self.J2 + 1)
        IJ = np.kron(Jz, Iz) + 0.5 * (np.kron(Jp, Im) + np.kron(Jm, Ip))
        h0 = (level.A or 0.0) * IJ
        i, j = self.I2 / 2, self.J2 / 2
        if level.B and i >= 1 and j >= 1:
            h0 = h0 + level.B * (3 * IJ @ IJ + 1.5 * IJ - i * (i + 1) * j * (j + 1) * np.eye(self.dim)) / (
                2 * i * (2 * i - 1) * j * (2 * j - 1))
        z = level.g_J * MU_B_MHZ_PER_G * np.kron(Jz, eI)
        if nuclear_zeeman:
            z = z + nuclear_g * MU_B_MHZ_PER_G * np.kron(eJ, Iz)
        self.h0 = h0
        self.z = z

        # adiabatic labels by energy rank inside each m_F block
        self.blocks = {}
        for mf2 in sorted(set(self.mf2.tolist()), reverse=True):
            idx = np.flatnonzero(self.mf2 == mf2)
            fs = [f2 for f2 in range(abs(self.J2 - self.I2), self.J2 + self.I2 + 1, 2) if f2 >= abs(mf2)]
            fs.sort(key=lambda f2: zero_field_energy(level, i, f2 / 2))
            es = [zero_field_energy(level, i, f2 / 2) for f2 in fs]
            if any(abs(a - b) < 1e-9 for a, b in zip(es, es[1:])):
                raise ConfigurationError(f"level {level.label}: zero-field F levels are degenerate, labels undefined")
            self.blocks[mf2] = (idx, [StateLabel(f2, mf2) for f2 in fs])
        self._sub = {mf2: (self.h0[np.ix_(idx, idx)], self.z[np.ix_(idx, idx)])
                     for mf2, (idx, _) in self.blocks.items()}
        self.labels = tuple(sorted((lab for _, labs in self.blocks.values() for lab in labs), reverse=True))
        self._pos = {lab: n for n, lab in enumerate(self.labels)}
        self._cols = {mf2: np.array([self._pos[lab] for lab in labs]) for mf2, (_, labs) in self.blocks.items()}
        # blocks of equal size are diagonalized together
        self._groups = []
        for size in sorted({len(idx) for idx, _ in self.blocks.values()}):
            keys = [m for m, (idx, _) in self.blocks.items() if len(idx) == size]
            self._groups.append((
                np.array([self._sub[m][0] for m in keys]),
                np.array([self._sub[m][1] for m in keys]),
                np.array([self.blocks[m][0] for m in keys])[:, :, None],
                np.array([self._cols[m] for m in keys])[:, None, :],
            ))

    def hamiltonian(self, b_gauss):
        return self.h0 + b_gauss * self.z

    def block_eigen(self, b_gauss, mf2):
        h0, z = self._sub[mf2]
        if len(h0) == 1:
            return h0[0] + b_gauss * z[0], np.ones((1, 1))
        return np.linalg.eigh(h0 + b_gauss * z)

    def eigensystem(self, b_gauss):
        n = self.dim
        energies = np.empty(n)
        vectors = np.zeros((n, n))
        for h0, z, rows, cols in self._groups:
            w, v = np.linalg.eigh(h0 + b_gauss * z)
            # deterministic phase: largest component of each vector positive
            k = np.abs(v).argmax(axis=1)
            big = np.take_along_axis(v, k[:, None, :], axis=1)
            v = v * np.where(big < 0, -1.0, 1.0)
            energies[cols[:, 0, :]] = w
            vectors[rows, cols] = v
        return EigenLevelSet(self.level.label, float(b_gauss), self.J2, self.I2, energies, vectors, self.labels)


@lru_cache(maxsize=64)
def level_structure(level, I2, nuclear_g=0.0, nuclear_zeeman=False) -> LevelStructure:
    return LevelStructure(level, Fraction(I2, 2), nuclear_g, nuclear_zeeman)


@dataclass(frozen=True, eq=False)
class EigenLevelSet:
    """Eigen-decomposition of one level at one field value.

    ``vectors[:, n]`` is the eigenvector (product basis) of the state
    labelled ``labels[n]`` with energy ``energies[n]`` (MHz).
    """
    level: str
    b_gauss: float
    J2: int
    I2: int
    energies: np.ndarray
    vectors: np.ndarray
    labels: tuple

    def index(self, label):
        if isinstance(label, (int, np.integer)):
            return int(label)
        return self.labels.index(label)

    def energy(self, label):
        return self.energies[self.index(label)]

    def vector(self, label):
        return self.vectors[:, self.index(label)]

    @property
    def m_f2(self):
        return np.array([lab.mF2 for lab in self.labels])


def hamiltonian(level, I, b_gauss, *, nuclear_g=0.0, nuclear_zeeman=False):
    """Hyperfine + Zeeman Hamiltonian (MHz) in the ``|m_J, m_I>`` basis.

    ``A I.J`` + electric quadrupole term + ``g_J mu_B B J_z`` and, if
    ``nuclear_zeeman``, ``g_I mu_B B I_z``.
    """
    return level_structure(level, twice(I), nuclear_g, nuclear_zeeman).hamiltonian(b_gauss)


def eigensystem(level, I, b_gauss, *, nuclear_g=0.0, nuclear_zeeman=False) -> EigenLevelSet:
    """Eigenstates at a single field, labelled by within-block energy rank."""
    return level_structure(level, twice(I), nuclear_g, nuclear_zeeman).eigensystem(b_gauss)


def eigenlevels(level, I, b_grid, *, threshold=0.5, ramp_step=0.25, nuclear_g=0.0, nuclear_zeeman=False):
    """Eigenstates along a strictly monotone field grid with overlap tracking.

    Labels are propagated from zero field: if the grid does not start at
    0 G an internal ramp with ``ramp_step`` spacing leads up to it.
    Between successive points each state follows the eigenvector of its
    block with the largest overlap; the match must exceed ``threshold``
    and be one-to-one, otherwise :class:`TrackingError` asks for a finer
    grid.
    """
    st = level_structure(level, twice(I), nuclear_g, nuclear_zeeman)
    grid = np.asarray(b_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("b_grid must be a non-empty 1-D sequence")
    d = np.diff(grid)
    if len(grid) > 1 and not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("b_grid must be strictly monotone")
    ramp = []
    if grid[0] != 0.0:
        n = int(np.ceil(abs(grid[0]) / ramp_step))
        ramp = list(np.linspace(0.0, grid[0], n + 1)[:-1])

    # tracked state per block: list of (label, vector)
    tracked = {}
    for mf2, (idx, labs) in st.blocks.items():
        w, v = st.block_eigen(0.0, mf2)
        tracked[mf2] = [(lab, v[:, k]) for k, lab in enumerate(labs)]

    out = []
    points = ramp + list(grid)
    for n, b in enumerate(points):
        energies = np.empty(st.dim)
        vectors = np.zeros((st.dim, st.dim))
        for mf2, (idx, labs) in st.blocks.items():
            w, v = st.block_eigen(b, mf2)
            prev = np.array([vec for _, vec in tracked[mf2]]).T
            ov = prev.T @ v
            choice = np.argmax(np.abs(ov), axis=1)
            best = np.abs(ov[np.arange(len(choice)), choice])
            if np.any(best <= threshold) or len(set(choice.tolist())) != len(choice):
                b_prev = points[n - 1] if n else 0.0
                raise TrackingError(
                    f"{level.label}: ambiguous eigenvector matching in block mF={fmt_half(mf2)} "
                    f"between B={b_prev:g} G and B={b:g} G; use a finer field grid")
            new = []
            for (lab, _), k in zip(tracked[mf2], choice):
                vec = v[:, k] * np.sign(ov[len(new), k])
                new.append((lab, vec))
                col = st._pos[lab]
                energies[col] = w[k]
                vectors[idx, col] = vec
            tracked[mf2] = new
        if n >= len(ramp):
            out.append(EigenLevelSet(level.label, float(b), st.J2, st.I2, energies, vectors, st.labels))
    return out


# ------------------------------------------------------------------ crossings

@dataclass(frozen=True)
class CrossingReport:
    label_a: object
    label_b: object
    found: bool
    b_crossing: float = None  # G; location of minimum gap for avoided crossings
    gap: float = None  # MHz
    exact: bool = False

    def record(self):
        b = "nan" if self.b_crossing is None else f"{self.b_crossing:.6f}"
        g = "nan" if self.gap is None else f"{self.gap:.6e}"
        return (f"crossing a={self.label_a} b={self.label_b} found={int(self.found)} "
                f"exact={int(self.exact)} B_G={b} gap_MHz={g}")


def locate_crossing(diff, lo, hi, *, step=0.25, tol=1e-3):
    """First sign change of ``diff(B)`` on ``[lo, hi]``, refined by bisection.

    Returns the crossing field or ``None`` when ``diff`` keeps its sign
    on the scan grid.
    """
    n = max(1, int(np.ceil((hi - lo) / step)))
    grid = np.linspace(lo, hi, n + 1)
    vals = np.array([diff(b) for b in grid])
    if vals[0] == 0.0:
        return float(grid[0])
    sign = np.sign(vals)
    hits = np.flatnonzero(sign[1:] * sign[:-1] <= 0)
    if len(hits) == 0:
        return None
    a, b = grid[hits[0]], grid[hits[0] + 1]
    fa = vals[hits[0]]
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = diff(m)
        if fm == 0.0:
            return float(m)
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    return float(0.5 * (a + b))


def find_crossing(level, I, label_a, label_b, b_range, *, step=0.25, tol=1e-3,
                  nuclear_g=0.0, nuclear_zeeman=False) -> CrossingReport:
    """Field at which two adiabatically labelled states become degenerate.

    States with different ``m_F`` can cross exactly; this is located by a
    scan plus bisection to ``tol`` gauss. States sharing ``m_F`` anticross,
    in which case the report carries the minimum gap and its field with
    ``found=False``.
    """
    st = level_structure(level, twice(I), nuclear_g, nuclear_zeeman)
    for lab in (label_a, label_b):
        if lab not in st.labels:
            raise KeyError(f"{level.label} has no state {lab}")
    if label_a == label_b:
        return CrossingReport(label_a, label_b, False)
    ia, ib = st._pos[label_a], st._pos[label_b]

    def diff(b):
        e = st.eigensystem(b).energies
        return e[ia] - e[ib]

    lo, hi = b_range
    if label_a.mF2 == label_b.mF2:
        grid = np.linspace(lo, hi, max(2, int(np.ceil((hi - lo) / step)) + 1))
        vals = np.abs([diff(b) for b in grid])
        k = int(np.argmin(vals))
        a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        res = minimize_scalar(lambda x: abs(diff(x)), bounds=(a, b), method="bounded",
                              options={"xatol": tol})
        return CrossingReport(label_a, label_b, False, float(res.x), float(res.fun), exact=False)
    bc = locate_crossing(diff, lo, hi, step=step, tol=tol)
    if bc is None:
        return CrossingReport(label_a, label_b, False)
    # difference at the bisection midpoint is below slope * tol; report as exact
    return CrossingReport(label_a, label_b, True, bc, 0.0, exact=True)


# ---------------------------------------------------------- transition strengths

Q_VALUES = (-1, 0, 1)


@lru_cache(maxsize=32)
def dipole_matrices(Jg2, Je2, I2):
    """CG matrices ``D[q][e, g] = <J m_J; 1 q | J' m_J+q> delta(m_I)`` (q = -1, 0, +1)."""
    mjg, mig = product_basis(Jg2, I2)
    mje, mie = product_basis(Je2, I2)
    out = np.zeros((3, len(mje), len(mjg)))
    for qi, q in enumerate(Q_VALUES):
        for g in range(len(mjg)):
            for e in range(len(mje)):
                if mie[e] == mig[g] and mje[e] == mjg[g] + 2 * q:
                    out[qi, e, g] = clebsch_gordan_twice(Jg2, int(mjg[g]), 2, 2 * q, Je2, int(mje[e]))
    out.setflags(write=False)
    return out


def strength_matrix(ground: EigenLevelSet, excited: EigenLevelSet):
    """Relative strengths ``S[q, e, g]`` for all dressed-state pairs.

    The nuclear spin is a spectator; the stretched cycling transition has
    strength 1.
    """
    if ground.b_gauss != excited.b_gauss:
        raise ValueError(f"states evaluated at different fields ({ground.b_gauss} G vs {excited.b_gauss} G)")
    if ground.I2 != excited.I2:
        raise ValueError("ground and excited states belong to different nuclear spins")
    D = dipole_matrices(ground.J2, excited.J2, ground.I2)
    amp = excited.vectors.T @ D @ ground.vectors
    return amp * amp


def transition_strength(ground: EigenLevelSet, g, excited: EigenLevelSet, e, q) -> float:
    """Relative strength of the ``g -> e`` transition driven by polarization ``q``."""
    if q not in Q_VALUES:
        raise ValueError(f"polarization q must be -1, 0 or +1, got {q}")
    if ground.b_gauss != excited.b_gauss:
        raise ValueError(f"states evaluated at different fields ({ground.b_gauss} G vs {excited.b_gauss} G)")
    D = dipole_matrices(ground.J2, excited.J2, ground.I2)[q + 1]
    amp = excited.vector(e) @ D @ ground.vector(g)
    return float(amp * amp)

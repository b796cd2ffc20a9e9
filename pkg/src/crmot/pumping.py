"""Optical-pumping rate equations over field-dressed ground sublevels.

Excited states are eliminated adiabatically: at each step the excitation
rate from ground state ``g`` to excited state ``e`` is

    R_ge = sum_{beam, q} (gamma/2) s_b f_q S_q(e, g) / (1 + s_g + (2 Delta/Gamma)^2)

with ``S_q`` the dressed-state strengths (stretched cycling line = 1),
``s_g`` the saturation summed over every transition leaving ``g`` and
``Delta`` the detuning of the beam from the dressed transition including
the Doppler shift. The excited population ``R_ge P_g / (gamma + gamma_leak)``
decays back to the ground states with branching ratios ``sum_q S_q(e, g')``
or into the metastable levels. No optical coherences are kept.

Frequencies are referred to the line of the isotope without nuclear
spin. A species with hyperfine structure is placed on that scale through
its isotope shift, quoted for one zero-field ``F -> F'`` component.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .structure import StateLabel, eigensystem, strength_matrix, zero_field_energy


class StepSizeError(RuntimeError):
    """Explicit step produced a negative population; shrink dt."""


@dataclass(frozen=True)
class PolarizationMix:
    """Intensity fractions in sigma+, pi and sigma- (quantization axis = beam axis)."""
    plus: float = 1.0
    pi: float = 0.0
    minus: float = 0.0

    def __post_init__(self):
        for x in (self.plus, self.pi, self.minus):
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"polarization fractions must lie in [0, 1], got {self}")
        if abs(self.plus + self.pi + self.minus - 1.0) > 1e-12:
            raise ValueError(f"polarization fractions must sum to 1, got {self}")

    @classmethod
    def contaminated(cls, f_minus):
        """sigma+ beam with a fraction ``f_minus`` of its power in sigma-."""
        return cls(1.0 - f_minus, 0.0, f_minus)

    @property
    def weights(self):
        """Fractions indexed by ``q + 1`` for q = -1, 0, +1."""
        return np.array([self.minus, self.pi, self.plus])


def line_offset(species):
    """Zero-field centroid transition frequency (MHz) relative to the I=0 line."""
    if species.I2 == 0 or species.shift_transition is None:
        return species.isotope_shift_mhz
    f2, fp2 = species.shift_transition
    split = (zero_field_energy(species.excited, species.I, fp2 / 2)
             - zero_field_energy(species.ground, species.I, f2 / 2))
    return species.isotope_shift_mhz - split


def stretched_label(species, level="ground"):
    lv = species.ground if level == "ground" else species.excited
    f2 = lv.J2 + species.I2
    return StateLabel(f2, f2)


def stretched_frequency(species):
    """Zero-field frequency (MHz, I=0 line scale) of the F_max -> F'_max line."""
    fg = (species.ground.J2 + species.I2) / 2
    fe = (species.excited.J2 + species.I2) / 2
    return (line_offset(species) + zero_field_energy(species.excited, species.I, fe)
            - zero_field_energy(species.ground, species.I, fg))


@dataclass(frozen=True)
class PumpBeam:
    """Laser beam described relative to the cycling line of ``reference``."""
    detuning: float  # MHz from the zero-field stretched transition of `reference`
    intensity: float  # mW/cm^2
    reference: object  # AtomicSpecies
    polarization: PolarizationMix = PolarizationMix()
    counter_propagating: bool = True
    name: str = ""
    waist_mm: float = None  # 1/e^2 radius; None for a flat-top beam

    def at_radius(self, r_mm):
        """Copy of the beam with the local intensity at distance ``r_mm`` from its axis."""
        if self.waist_mm is None:
            return self
        return replace(self, intensity=self.intensity * np.exp(-2 * (r_mm / self.waist_mm) ** 2))

    @property
    def frequency(self):
        return stretched_frequency(self.reference) + self.detuning

    def doppler(self, v, wavelength):
        """Frequency shift (MHz) seen by an atom moving with +v along z."""
        return (1 if self.counter_propagating else -1) * v / wavelength * 1e-6


@dataclass
class PopulationVector:
    labels: tuple
    populations: np.ndarray
    dark: float = 0.0  # dropped out of the slowing cycle
    leaked: float = 0.0  # decayed to the metastable levels

    def __post_init__(self):
        self.populations = np.asarray(self.populations, dtype=float)
        if len(self.populations) != len(self.labels):
            raise ValueError("one population per label required")

    @classmethod
    def uniform(cls, labels):
        n = len(labels)
        return cls(tuple(labels), np.full(n, 1.0 / n))

    @classmethod
    def pure(cls, labels, label):
        p = np.zeros(len(labels))
        p[list(labels).index(label)] = 1.0
        return cls(tuple(labels), p)

    @property
    def total(self):
        return float(self.populations.sum() + self.dark + self.leaked)

    def fraction(self, label):
        return float(self.populations[self.labels.index(label)])

    def as_array(self):
        return np.concatenate([self.populations, [self.dark, self.leaked]])

    def with_array(self, x):
        return PopulationVector(self.labels, x[:-2].copy(), float(x[-2]), float(x[-1]))


@lru_cache(maxsize=4096)
def _dressed(species, b_gauss, nuclear_zeeman):
    kw = dict(nuclear_g=species.nuclear_g, nuclear_zeeman=nuclear_zeeman)
    g = eigensystem(species.ground, species.I, b_gauss, **kw)
    e = eigensystem(species.excited, species.I, b_gauss, **kw)
    S = strength_matrix(g, e)
    # transition frequencies (MHz, I=0 line scale), shape (n_e, n_g)
    nu = line_offset(species) + e.energies[:, None] - g.energies[None, :]
    S.setflags(write=False)
    nu.setflags(write=False)
    return g.labels, S, nu


class PumpingSystem:
    """Rate-equation generator for one species illuminated by a set of beams."""

    def __init__(self, species, beams, nuclear_zeeman=False):
        self.species = species
        self.beams = tuple(beams)
        self.nuclear_zeeman = nuclear_zeeman
        line = species.line
        self.gamma = line.gamma
        self.width = line.linewidth_mhz
        self.wavelength = line.wavelength
        self.gamma_leak = species.excited.leak_rate
        self.labels = _dressed(species, 0.0, nuclear_zeeman)[0]
        self.stretched = stretched_label(species)
        self.i_stretched = self.labels.index(self.stretched)
        self._sat = np.array([line.saturation(b.intensity) for b in self.beams])
        self._pol = np.array([b.polarization.weights for b in self.beams]).reshape(len(self.beams), 3)
        self._freq = np.array([b.frequency for b in self.beams])

    def initial(self, kind="uniform"):
        if kind == "uniform":
            return PopulationVector.uniform(self.labels)
        if kind == "stretched":
            return PopulationVector.pure(self.labels, self.stretched)
        raise ValueError(f"unknown initial state {kind!r}")

    def excitation_rates(self, b_gauss, v):
        """Matrix ``R[g, e]`` (1/s) at field ``b_gauss`` and velocity ``v``."""
        _, S, nu = _dressed(self.species, float(b_gauss), self.nuclear_zeeman)
        n_e, n_g = nu.shape
        if len(self.beams) == 0:
            return np.zeros((n_g, n_e))
        # per-beam saturation of each (e, g) pair summed over polarization components
        s_beg = np.einsum("b,bq,qeg->beg", self._sat, self._pol, S)
        s_g = s_beg.sum(axis=(0, 1))
        dop = np.array([b.doppler(v, self.wavelength) for b in self.beams])
        delta = (self._freq + dop)[:, None, None] - nu[None]
        x = 2 * delta / self.width
        r = 0.5 * self.gamma * s_beg / (1 + s_g[None, None, :] + x * x)
        return r.sum(axis=0).T

    def generator(self, b_gauss, v, escape_rate=0.0):
        """Markov generator on (ground states, dark, leaked); columns sum to 0."""
        _, S, _ = _dressed(self.species, float(b_gauss), self.nuclear_zeeman)
        R = self.excitation_rates(b_gauss, v)
        n = R.shape[0]
        branch = S.sum(axis=0)  # (n_e, n_g): decay e -> g
        gtot = self.gamma + self.gamma_leak
        M = np.zeros((n + 2, n + 2))
        M[:n, :n] = (self.gamma / gtot) * branch.T @ R.T
        out = R.sum(axis=1)
        M[np.arange(n), np.arange(n)] -= out
        M[n + 1, :n] = (self.gamma_leak / gtot) * out
        if escape_rate > 0:
            esc = np.full(n, escape_rate)
            esc[self.i_stretched] = 0.0
            M[np.arange(n), np.arange(n)] -= esc
            M[n, :n] = esc
        return M

    def scattering_rate(self, pop, b_gauss, v):
        """Photon scattering rate (1/s) of the given ground populations."""
        R = self.excitation_rates(b_gauss, v)
        return float(pop.populations @ R.sum(axis=1)) * self.gamma / (self.gamma + self.gamma_leak)

    def pump_step(self, pop, b_gauss, v, dt, escape_rate=0.0, method="expm"):
        M = self.generator(b_gauss, v, escape_rate)
        x = pop.as_array()
        if method == "expm":
            y = expm(M * dt) @ x
            y = np.where((y < 0) & (y > -1e-14), 0.0, y)
        elif method == "euler":
            y = x + dt * (M @ x)
        else:
            raise ValueError(f"unknown method {method!r}")
        if np.any(y < 0):
            raise StepSizeError(f"negative population after a step of {dt:g} s at B={b_gauss:g} G; "
                                "reduce the step size")
        return pop.with_array(y)


def pump_step(pop, b_gauss, v, system: PumpingSystem, dt, **kw):
    """One rate-equation step of length ``dt`` at fixed field and velocity."""
    return system.pump_step(pop, b_gauss, v, dt, **kw)


@dataclass
class PumpingResult:
    populations: PopulationVector
    boundary_fractions: dict = field(default_factory=dict)  # z -> stretched fraction
    z: np.ndarray = None
    history: np.ndarray = None  # (n_steps, n_states + 2) when recorded
    steps: int = 0


def _segments(z, v, B, i0, i1, db_max, dv_max, dz_max):
    """Group trajectory samples into steps with bounded changes of B, v and z."""
    out = []
    i = i0
    while i < i1:
        j = i + 1
        while (j < i1 and abs(B[j + 1] - B[i]) <= db_max and abs(v[j + 1] - v[i]) <= dv_max
               and z[j + 1] - z[i] <= dz_max):
            j += 1
        out.append((i, j))
        i = j
    return out


def propagate_along(system: PumpingSystem, trajectory, pop, *, z_range=None, db_max=0.2, dv_max=0.5,
                    dz_max=5e-3, escape_rate=0.0, escape_range=None, boundaries=(), record=False,
                    method="expm") -> PumpingResult:
    """Integrate the rate equations along a slower trajectory.

    Samples are grouped into steps over which the field changes by at most
    ``db_max`` gauss and the velocity by at most ``dv_max`` m/s (longer
    sample intervals are subdivided); rates are evaluated at the midpoint
    field and velocity and held constant over the step. ``escape_rate``
    removes population from every non-stretched state into the dark
    accumulator while ``z`` lies inside ``escape_range``. The stretched
    fraction is reported at each z in ``boundaries`` crossed on the way.
    """
    z, v, t, B = trajectory.z, trajectory.v, trajectory.t, trajectory.b
    lo, hi = z_range if z_range is not None else (z[0], z[-1])
    i0 = int(np.searchsorted(z, lo, side="left"))
    i1 = int(np.searchsorted(z, hi, side="right")) - 1
    # stop where the atom came to rest
    alive = np.flatnonzero(v[i0:i1 + 1] <= 0)
    if len(alive):
        i1 = i0 + int(alive[0]) - 1
    bounds = sorted(b for b in boundaries if lo <= b <= hi)
    fractions = {}
    zs, hist = [], []
    steps = 0
    for i, j in _segments(z, v, B, i0, i1, db_max, dv_max, dz_max):
        while bounds and bounds[0] <= z[i]:
            fractions[bounds.pop(0)] = pop.fraction(system.stretched)
        nsub = max(1, int(np.ceil(max(abs(B[j] - B[i]) / db_max, abs(v[j] - v[i]) / dv_max))))
        esc = escape_rate if (escape_range and escape_range[0] <= z[i] < escape_range[1]) else 0.0
        dt = (t[j] - t[i]) / nsub
        for k in range(nsub):
            u = (k + 0.5) / nsub
            bm = B[i] + u * (B[j] - B[i])
            vm = v[i] + u * (v[j] - v[i])
            pop = system.pump_step(pop, bm, vm, dt, esc, method)
            steps += 1
        if record:
            zs.append(z[j])
            hist.append(pop.as_array())
    for b in bounds:
        if b <= z[i1]:
            fractions[b] = pop.fraction(system.stretched)
    return PumpingResult(pop, fractions, np.array(zs) if record else None,
                         np.array(hist) if record else None, steps)


# --------------------------------------------------------------- slower scenarios

def slowing_window(species, beam_intensity):
    """Power-broadened half width (m/s) of the slowing resonance in velocity."""
    s = species.line.saturation(beam_intensity)
    return 0.5 * species.line.linewidth_mhz * 1e6 * np.sqrt(1 + s) * species.line.wavelength


def branching_zone_fraction(species, profile, beams, *, slowing=0, velocities=(250.0, 350.0, 450.0), **kw):
    """Stretched fraction at the start of the slowing zone, from uniform populations.

    Atoms launched at each of ``velocities`` cross the branching zone on
    the beam axis, decelerated by ``beams[slowing]``. Returns the mean
    weighted by the effusive flux (``~ v^3`` at speeds well below the most
    probable one) and the per-velocity values.
    """
    from .slower import SlowingBeam, integrate_trajectory
    main = beams[slowing]
    sb = SlowingBeam(detuning=main.detuning, intensity=main.intensity)
    system = PumpingSystem(species, beams)
    z1 = profile.boundaries[1]
    vals = []
    for v0 in velocities:
        tr = integrate_trajectory(v0, species, profile, sb)
        res = propagate_along(system, tr, system.initial("uniform"), z_range=(0.0, z1), **kw)
        vals.append(res.populations.fraction(system.stretched))
    w = np.asarray(velocities, dtype=float) ** 3
    return float(np.dot(w, vals) / w.sum()), vals


@dataclass
class LossReport:
    lost: float  # fraction dropped out of the slowing cycle into dark states
    leaked: float  # fraction decayed to the metastable levels (reported separately)
    stretched_exit: float
    radii_mm: tuple = ()  # transverse sample points (empty for an on-axis run)
    node_losses: tuple = ()


def _loss_on_axis(species, profile, beams, slowing, v0, escape_rate, **kw):
    from .slower import SlowingBeam, integrate_trajectory
    main = beams[slowing]
    sb = SlowingBeam(detuning=main.detuning, intensity=main.intensity)
    tr = integrate_trajectory(v0, species, profile, sb)
    if not tr.captured:
        return None
    if escape_rate is None:
        escape_rate = profile.deceleration / slowing_window(species, main.intensity)
    system = PumpingSystem(species, beams)
    _, z1, z2, z3 = profile.boundaries
    res = propagate_along(system, tr, system.initial("stretched"), z_range=(z1, z3),
                          escape_rate=escape_rate, escape_range=(z1, z2), **kw)
    p = res.populations
    return p.dark, p.leaked, p.fraction(system.stretched)


def sigma_minus_loss(species, profile, beams, *, slowing=0, v0=400.0, transverse_nodes=4,
                     escape_rate=None, **kw) -> LossReport:
    """Fraction of slowed atoms that drop out of the slowing cycle.

    Atoms start in the stretched state at the beginning of the slowing
    zone and follow the trajectory launched at ``v0`` under
    ``beams[slowing]``. An atom in any other ground state stops
    decelerating while the resonance keeps moving down in velocity at the
    design deceleration; once it lags by more than the power-broadened
    window it is lost. This is an escape rate ``a / dv_window`` into the
    dark accumulator, active in the slowing zone.

    If the slowing beam has a waist the loss is averaged over the atoms'
    transverse positions: atoms are taken uniform over the part of the
    cross-section where the local saturation can sustain the design
    deceleration (``s / (1 + s) > eta``). In that disc ``ln s`` of the slowing
    beam is uniformly distributed, which is sampled with
    ``transverse_nodes`` Gauss-Legendre points. Positions whose trajectory
    is not captured are dropped and the weights renormalized.
    """
    from .slower import max_deceleration
    main = beams[slowing]
    if main.waist_mm is None or transverse_nodes == 0:
        out = _loss_on_axis(species, profile, beams, slowing, v0, escape_rate, **kw)
        if out is None:
            raise ValueError(f"v0 = {v0} m/s is not captured by this slower")
        return LossReport(*out)
    eta = profile.deceleration / max_deceleration(species)
    s_c = eta / (1 - eta)
    s0 = species.line.saturation(main.intensity)
    if s0 <= s_c:
        raise ValueError(f"peak saturation {s0:.2f} cannot sustain the design deceleration")
    x, w = np.polynomial.legendre.leggauss(transverse_nodes)
    umax = np.log(s0 / s_c)
    u = 0.5 * umax * (x + 1)
    radii = main.waist_mm * np.sqrt(u / 2)
    vals, weights = [], []
    for r, wk in zip(radii, w):
        out = _loss_on_axis(species, profile, [b.at_radius(r) for b in beams], slowing, v0, escape_rate, **kw)
        if out is not None:
            vals.append(out)
            weights.append(wk)
    if not vals:
        raise ValueError(f"v0 = {v0} m/s is not captured anywhere in the beam")
    weights = np.array(weights) / np.sum(weights)
    vals = np.array(vals)
    avg = weights @ vals
    return LossReport(float(avg[0]), float(avg[1]), float(avg[2]), tuple(radii), tuple(vals[:, 0]))

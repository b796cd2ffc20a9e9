"""Zeeman slower: field profile, single-atom deceleration, capture statistics.

Sign conventions. The slowing beam counter-propagates against the atoms,
so an atom of velocity ``v > 0`` sees the laser blue-shifted by
``v / lambda``. ``detuning`` is the laser detuning (MHz) from the zero-field
stretched cycling transition and the Zeeman shift of that transition is
``mu' B / h`` with ``mu' = (g_J' J' - g_J J) mu_B`` (sigma+ light, B the
signed field along the beam axis). The effective detuning seen by an
atom is therefore ``delta + v / lambda - mu' B / h`` and resonance means
it vanishes.

The field has three zones: a half-cosine rise to ``B_max`` (branching
zone), the square-root decrease designed for a constant deceleration
``eta * a_max`` down to ``B_min`` (slowing zone), and a short quarter-sine
return to zero (final zone), followed by field-free tube. The final zone
leaves ``B_min`` with a steep slope so that atoms drop out of resonance at
once; a long or initially flat return keeps decelerating them well below
the design final velocity. Only the longitudinal motion is modelled.
"""

from dataclasses import dataclass

import numpy as np

from .units import hbar, k_B, MU_B_MHZ_PER_G


class DomainError(ValueError):
    pass


def effective_moment(species):
    """``mu'`` of the stretched sigma+ transition in units of mu_B."""
    g, e = species.ground, species.excited
    return e.g_J * float(e.J) - g.g_J * float(g.J)


def max_deceleration(species):
    """Saturated radiation-pressure deceleration ``hbar k gamma / 2m`` (m/s^2)."""
    line = species.line
    return hbar * line.k * line.gamma / (2 * species.mass)


def resonance_velocity(b_gauss, detuning_mhz, moment_mub, wavelength):
    """Velocity (m/s) resonant at field ``b_gauss`` for a counter-propagating beam.

    ``moment_mub`` is ``mu'`` in Bohr magnetons and ``wavelength`` in metres.
    Negative results mean no forward-moving atom is resonant.
    """
    shift = moment_mub * MU_B_MHZ_PER_G * np.asarray(b_gauss, dtype=float)
    return (shift - detuning_mhz) * 1e6 * wavelength


def field_for_velocity(v, detuning_mhz, moment_mub, wavelength):
    """Inverse of :func:`resonance_velocity`: field (G) resonant with ``v``."""
    return (np.asarray(v, dtype=float) / wavelength * 1e-6 + detuning_mhz) / (moment_mub * MU_B_MHZ_PER_G)


def peak_intensity(power_mw, waist_mm):
    """Peak intensity (mW/cm^2) of a Gaussian beam with 1/e^2 radius ``waist_mm``."""
    w = waist_mm * 0.1
    return 2 * power_mw / (np.pi * w * w)


@dataclass(frozen=True)
class SlowerProfile:
    b_max: float  # G
    b_min: float  # G
    b_zero: float  # G, field at which the design resonance velocity would be 0
    branch_length: float  # m
    slow_length: float  # m
    final_length: float  # m
    v_initial: float  # m/s, design resonance velocity at B_max
    v_final: float  # m/s, design resonance velocity at B_min
    deceleration: float  # m/s^2, design value

    tube_length: float = None  # m; field-free drift after the final zone up to here

    @classmethod
    def design(cls, species, detuning=-450.0, b_max=460.0, b_min=-260.0, eta=0.5,
               branch_length=0.1, final_length=0.02, total_length=1.0):
        """Square-root profile for a constant deceleration ``eta * a_max``.

        The slowing-zone length follows from the endpoint velocities and
        the design deceleration. ``final_length`` is the short return to
        zero field set by the last coil; whatever is left of
        ``total_length`` is field-free tube. ``total_length=None`` ends the
        tube at the end of the final zone.
        """
        if not 0 < eta <= 1:
            raise DomainError(f"eta must be in (0, 1], got {eta}")
        if not (branch_length > 0 and final_length > 0):
            raise DomainError("zone lengths must be > 0")
        mu = effective_moment(species)
        lam = species.line.wavelength
        vi = float(resonance_velocity(b_max, detuning, mu, lam))
        vf = float(resonance_velocity(b_min, detuning, mu, lam))
        if not vi > vf >= 0:
            raise DomainError(f"resonance velocities at B_max ({vi:.1f} m/s) and B_min ({vf:.1f} m/s) "
                              "must satisfy v_max > v_min >= 0")
        a = eta * max_deceleration(species)
        slow = (vi * vi - vf * vf) / (2 * a)
        used = branch_length + slow + final_length
        if total_length is not None and used > total_length:
            raise DomainError(f"zones need {used:.3f} m, more than the {total_length} m tube")
        return cls(b_max=b_max, b_min=b_min,
                   b_zero=float(field_for_velocity(0.0, detuning, mu, lam)),
                   branch_length=branch_length, slow_length=slow, final_length=final_length,
                   v_initial=vi, v_final=vf, deceleration=a,
                   tube_length=used if total_length is None else total_length)

    @property
    def boundaries(self):
        z1 = self.branch_length
        z2 = z1 + self.slow_length
        return 0.0, z1, z2, z2 + self.final_length

    @property
    def length(self):
        return self.tube_length if self.tube_length is not None else self.boundaries[3]

    def field(self, z):
        """B(z) in gauss; zero before the tube entrance and after the exit."""
        z = np.asarray(z, dtype=float)
        z0, z1, z2, z3 = self.boundaries
        L0 = self.v_initial ** 2 / (2 * self.deceleration)
        out = np.zeros_like(z)
        m = (z > z0) & (z < z1)
        out[m] = 0.5 * self.b_max * (1 - np.cos(np.pi * (z[m] - z0) / (z1 - z0)))
        m = (z >= z1) & (z <= z2)
        out[m] = self.b_zero + (self.b_max - self.b_zero) * np.sqrt(np.clip(1 - (z[m] - z1) / L0, 0, None))
        m = (z > z2) & (z < z3)
        out[m] = self.b_min * (1 - np.sin(0.5 * np.pi * (z[m] - z2) / (z3 - z2)))
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class SlowingBeam:
    detuning: float = -450.0  # MHz from the zero-field stretched transition
    intensity: float = 21.2  # mW/cm^2; 3 mW in a 3 mm 1/e^2 radius
    focus_gain: float = 1.0  # intensity at the oven end relative to the exit (linear in z)
    sigma_minus: float = 0.0  # fraction of power in sigma- (used by the pumping module)

    def intensity_at(self, z, length):
        z = np.asarray(z, dtype=float)
        return self.intensity * (1 + (self.focus_gain - 1) * np.clip(1 - z / length, 0, 1))


@dataclass(frozen=True)
class BeamSource:
    temperature: float  # K
    species: object
    gain: float = 1.0  # transverse-cooling gain on the slowed flux
    aperture_mm: float = 9.0  # differential pumping tube diameter, documentation only

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError("oven temperature must be > 0 K")
        if self.gain < 1:
            raise DomainError(f"transverse-cooling gain must be >= 1, got {self.gain}")

    @property
    def alpha(self):
        """Most probable speed in the oven, sqrt(2 k_B T / m)."""
        return np.sqrt(2 * k_B * self.temperature / self.species.mass)


@dataclass
class Trajectory:
    z: np.ndarray
    v: np.ndarray
    t: np.ndarray
    scatter_rate: np.ndarray
    photons: float
    exit_velocity: float
    captured: bool
    stopped: bool = False
    b: np.ndarray = None  # field (G) at each z sample


# ------------------------------------------------------------ integration

class _Slower:
    """Force law on a fixed z grid, shared by every atom in a batch."""

    def __init__(self, species, profile, beam, dz):
        line = species.line
        self.profile = profile
        n = int(np.ceil(profile.length / dz))
        self.dz = profile.length / n
        self.z = np.linspace(0.0, profile.length, n + 1)
        zh = self.z[:-1] + 0.5 * self.dz
        mu = effective_moment(species)
        # field-dependent part of the detuning (MHz) and saturation at nodes and midpoints
        self.zee = mu * MU_B_MHZ_PER_G * profile.field(self.z)
        self.zee_h = mu * MU_B_MHZ_PER_G * profile.field(zh)
        self.s = line.saturation(beam.intensity_at(self.z, profile.length))
        self.s_h = line.saturation(beam.intensity_at(zh, profile.length))
        self.delta = beam.detuning
        self.inv_lam = 1e-6 / line.wavelength  # MHz per m/s
        self.gamma = line.gamma
        self.width = line.linewidth_mhz
        self.recoil = hbar * line.k / species.mass

    def rate(self, v, zee, s):
        x = 2 * (self.delta + v * self.inv_lam - zee) / self.width
        return 0.5 * self.gamma * s / (1 + s + x * x)

    def run(self, v0, v_floor=1.0, record=False):
        """RK4 in z for state (v, t, photons); vectorized over atoms."""
        v = np.array(v0, dtype=float)
        t = np.zeros_like(v)
        ph = np.zeros_like(v)
        alive = np.ones(v.shape, bool)
        h = self.dz
        rec = [(v.copy(), t.copy(), self.rate(v, self.zee[0], self.s[0]))] if record else None

        def deriv(v, zee, s):
            r = self.rate(v, zee, s)
            return -self.recoil * r / v, 1.0 / v, r / v

        for i in range(len(self.z) - 1):
            va = np.where(alive, v, 1.0)
            k1 = deriv(va, self.zee[i], self.s[i])
            k2 = deriv(va + 0.5 * h * k1[0], self.zee_h[i], self.s_h[i])
            k3 = deriv(va + 0.5 * h * k2[0], self.zee_h[i], self.s_h[i])
            k4 = deriv(va + h * k3[0], self.zee[i + 1], self.s[i + 1])
            dv = h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            dt = h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            dn = h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            v = np.where(alive, v + dv, v)
            t = np.where(alive, t + dt, t)
            ph = np.where(alive, ph + dn, ph)
            # atoms brought (nearly) to rest turn around inside the tube
            alive &= v > v_floor
            if record:
                rec.append((v.copy(), t.copy(), self.rate(np.where(alive, v, 1.0), self.zee[i + 1], self.s[i + 1])))
            if not alive.any():
                if record:
                    rec.extend([rec[-1]] * (len(self.z) - 2 - i))
                break
        return v, t, ph, ~alive, rec


DEFAULT_STEP = 1e-4  # m


def capture_threshold(profile, factor=1.2):
    return factor * profile.v_final


def integrate_trajectory(v0, species, profile, beam, dz=DEFAULT_STEP, v_floor=1.0) -> Trajectory:
    """Decelerate one atom through the slower.

    Fixed-step RK4 in position (step ``dz``, default 0.1 mm, about a
    quarter of the resonance width in velocity at the steepest part of
    the profile). An atom whose speed drops below ``v_floor`` counts as
    stopped and is not captured.
    """
    if not v0 > 0:
        raise DomainError(f"initial velocity must be > 0, got {v0}")
    model = _Slower(species, profile, beam, dz)
    v, t, ph, stopped, rec = model.run(np.array([float(v0)]), v_floor, record=True)
    vv = np.array([r[0][0] for r in rec])
    tt = np.array([r[1][0] for r in rec])
    rr = np.array([r[2][0] for r in rec])
    stopped = bool(stopped[0])
    vexit = 0.0 if stopped else float(v[0])
    return Trajectory(model.z, vv, tt, np.where(vv > v_floor, rr, 0.0), float(ph[0]), vexit,
                      captured=(not stopped) and vexit <= capture_threshold(profile), stopped=stopped,
                      b=profile.field(model.z))


def captured(v0, species, profile, beam, dz=DEFAULT_STEP, v_floor=1.0):
    """Vectorized capture predicate over initial velocities."""
    model = _Slower(species, profile, beam, dz)
    v, _, _, stopped, _ = model.run(np.atleast_1d(np.asarray(v0, float)), v_floor)
    return (~stopped) & (v <= capture_threshold(profile))


def capture_velocity(species, profile, beam, resolution=1.0, v_max=1500.0, dz=DEFAULT_STEP, points=48):
    """Largest initial velocity that is still captured (m/s).

    Coarse scan of ``points`` velocities followed by batched refinement
    of the bracket around the highest captured one, down to ``resolution``.
    Returns 0 if no scanned velocity is captured.
    """
    lo_v = min(resolution, capture_threshold(profile))
    grid = np.linspace(lo_v, v_max, points)
    ok = captured(grid, species, profile, beam, dz)
    if not ok.any():
        return 0.0
    k = int(np.flatnonzero(ok)[-1])
    if k == len(grid) - 1:
        return float(grid[-1])
    lo, hi = grid[k], grid[k + 1]
    while hi - lo > resolution:
        sub = np.linspace(lo, hi, 10)[1:-1]
        ok = captured(sub, species, profile, beam, dz)
        good = sub[ok]
        bad = sub[~ok]
        if len(good):
            lo = good.max()
        hi = bad[bad > lo].min() if (bad > lo).any() else hi
    return float(0.5 * (lo + hi))


# ------------------------------------------------------------ flux statistics

def capture_fraction(source: BeamSource, v_c):
    """Fraction of the effusive flux (``~ v^3 exp(-v^2/alpha^2)``) slower than ``v_c``."""
    if np.isinf(v_c):
        return 1.0
    if v_c <= 0:
        return 0.0
    x = (v_c / source.alpha) ** 2
    return float(-np.expm1(-x) - x * np.exp(-x))


def slowed_flux_ratio(fermion_fraction, abundance_ratio, boson_fraction=1.0):
    """Slowed fermion/boson flux: pumped stretched fractions times abundances."""
    for name, x in (("fermion_fraction", fermion_fraction), ("boson_fraction", boson_fraction)):
        if not 0 <= x <= 1:
            raise DomainError(f"{name} must be in [0, 1], got {x}")
    if abundance_ratio < 0:
        raise DomainError("abundance ratio must be >= 0")
    if boson_fraction == 0:
        raise DomainError("boson stretched fraction must be > 0")
    return fermion_fraction * abundance_ratio / boson_fraction

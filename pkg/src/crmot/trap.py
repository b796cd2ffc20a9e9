"""Rate-equation kinetics of one or two MOT clouds and their metastable reservoirs.

Per species ``s`` with ground-state number ``N`` and trapped metastable
number ``M``::

    dN/dt = G [MOT on, oven open] - N/tau_eff - N/tau_bg
            - beta N^2 / (2^{3/2} V_1) - beta_BF n_other N + M/t_r [red on]
    dM/dt = eta_trap r N/tau [MOT on, red off] - M/tau_m - M/t_r [red on]

``r`` is the fraction of the metastable leak that lands in the level the
red repumper addresses. With the red repumper on that part of the leak is
recycled, so ``1/tau_eff = (1 - r)/tau``. Light-induced terms (depumping,
two-body, interspecies) act only while the MOT beams of that species are
on; with the beams off the ground-state atoms sit in the quadrupole field
and only background collisions remove them.

Cloud sizes are held fixed. Densities are in cm^-3, volumes in cm^3 and
two-body coefficients in cm^3/s, so the laboratory units pass through
unchanged.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .units import k_B

SQRT8 = 2.0 ** 1.5
UM_TO_CM = 1e-4


class IntegrationError(RuntimeError):
    """The kinetics integration failed or produced a negative population."""


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class CloudShape:
    """Gaussian density ``exp(-(x^2+y^2)/w_h^2 - (z-dz)^2/w_v^2)``, radii in um."""
    w_h: float
    w_v: float
    dz: float = 0.0

    def __post_init__(self):
        if not (self.w_h > 0 and self.w_v > 0):
            raise ValueError(f"cloud radii must be > 0, got {self.w_h}, {self.w_v}")
        if not np.isfinite(self.dz):
            raise ValueError("cloud offset must be finite")

    @property
    def volume(self):
        """``int f d^3r`` in cm^3."""
        return np.pi ** 1.5 * (self.w_h * UM_TO_CM) ** 2 * (self.w_v * UM_TO_CM)

    def density(self, x, y, z):
        """Normalized profile at positions in um (peak 1)."""
        return np.exp(-(x * x + y * y) / self.w_h ** 2 - (z - self.dz) ** 2 / self.w_v ** 2)

    def peak_density(self, n_atoms):
        return n_atoms / self.volume


def overlap_volume(a: CloudShape, b: CloudShape):
    """Effective volume ``int f_a int f_b / int f_a f_b`` (cm^3).

    Each Cartesian factor is a Gaussian product integral; along z the
    center offset adds ``exp(dz^2 / (a_v^2 + b_v^2))``.
    """
    sh = (a.w_h ** 2 + b.w_h ** 2) * UM_TO_CM ** 2
    sv = (a.w_v ** 2 + b.w_v ** 2) * UM_TO_CM ** 2
    dz = (b.dz - a.dz) * UM_TO_CM
    return np.pi ** 1.5 * sh * np.sqrt(sv) * np.exp(dz * dz / sv)


def self_overlap_volume(a: CloudShape):
    """``(int f)^2 / int f^2 = 2^{3/2} V_1``; the two-body loss rate is ``beta N^2 / this``."""
    return SQRT8 * a.volume


@dataclass(frozen=True)
class SpeciesKinetics:
    loading_rate: float  # 1/s
    tau: float  # s, depump time to all metastable levels, red repumper off
    beta: float = 0.0  # cm^3/s
    cloud: CloudShape = CloudShape(100.0, 100.0)
    repumpable: float = 0.5  # fraction of the leak addressed by the red repumper
    eta_trap: float = 0.5  # fraction of repumpable decays that stay magnetically trapped
    tau_bg: float = np.inf  # s
    held: float = None  # if set, N is fixed at this value while the MOT is on

    def __post_init__(self):
        for name in ("loading_rate", "beta"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("tau", "tau_bg"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("repumpable", "eta_trap"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if self.held is not None and not self.held >= 0:
            raise ValueError("held atom number must be >= 0")

    def depump_rate(self, red_on):
        return (1.0 - self.repumpable) / self.tau if red_on else 1.0 / self.tau

    def two_body_rate(self):
        """``k`` in ``dN/dt = -k N^2``."""
        return self.beta / self_overlap_volume(self.cloud)


@dataclass(frozen=True)
class MotModel:
    species: dict  # name -> SpeciesKinetics
    beta_bf: float = 0.0  # cm^3/s
    tau_m_open: float = 8.0  # s, reservoir lifetime, oven shutter open
    tau_m_closed: float = 30.0  # s, shutter closed
    transfer_time: float = 1e-3  # s, red-repumper transfer M -> N

    def __post_init__(self):
        if not 1 <= len(self.species) <= 2:
            raise ValueError("a MotModel holds one or two species")
        if not self.beta_bf >= 0:
            raise ValueError("beta_bf must be >= 0")
        if not (self.tau_m_open > 0 and self.transfer_time > 0):
            raise ValueError("reservoir lifetime and transfer time must be > 0")
        if not self.tau_m_open <= self.tau_m_closed:
            raise ValueError("reservoir lifetime with the oven open cannot exceed the shutter-closed value")

    @property
    def names(self):
        return tuple(self.species)

    def partner(self, name):
        others = [n for n in self.species if n != name]
        return others[0] if others else None

    def overlap(self):
        """Effective interspecies volume (cm^3), None for one species."""
        if len(self.species) < 2:
            return None
        a, b = (s.cloud for s in self.species.values())
        return overlap_volume(a, b)

    def tau_m(self, shutter_open):
        return self.tau_m_open if shutter_open else self.tau_m_closed

    def with_species(self, name, **changes):
        sp = dict(self.species)
        sp[name] = replace(sp[name], **changes)
        return replace(self, species=sp)


# ------------------------------------------------------------------ schedule

@dataclass(frozen=True)
class Event:
    """Switch settings at time ``t``.

    ``changes`` holds ``(kind, target, value)`` triples with kind ``"mot"`` or
    ``"red"`` (target = species, value bool), ``"shutter"`` (target None,
    value bool = open) or ``"pulse"`` (target = species, value = duration s).
    """
    t: float
    changes: tuple


_KINDS = ("mot", "red", "shutter", "pulse")


@dataclass(frozen=True)
class Schedule:
    horizon: float
    events: tuple = ()
    mot_on: frozenset = frozenset()  # species with MOT beams on at t = 0
    red_on: frozenset = frozenset()
    shutter_open: bool = True
    initial: dict = field(default_factory=dict)  # name -> (N, M) at t = 0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ScheduleError(f"horizon must be > 0, got {self.horizon}")
        prev = None
        for ev in self.events:
            if not 0 <= ev.t <= self.horizon:
                raise ScheduleError(f"event at t={ev.t} s lies outside [0, {self.horizon}] s")
            if prev is not None and not ev.t > prev:
                raise ScheduleError(f"event times must increase strictly: t={ev.t} s follows t={prev} s")
            prev = ev.t
            for kind, target, value in ev.changes:
                if kind not in _KINDS:
                    raise ScheduleError(f"unknown event kind {kind!r} at t={ev.t} s")
                if kind == "pulse" and not value > 0:
                    raise ScheduleError(f"pulse duration must be > 0 at t={ev.t} s")
        for ev in self.events:
            for kind, _, value in ev.changes:
                if kind == "pulse" and ev.t + value > self.horizon:
                    raise ScheduleError(f"pulse at t={ev.t} s runs past the horizon")

    def switch_times(self):
        """Times at which any setting changes, pulses expanded into on/off pairs."""
        ts = {0.0, self.horizon}
        for ev in self.events:
            ts.add(ev.t)
            for kind, _, value in ev.changes:
                if kind == "pulse":
                    ts.add(ev.t + value)
        return sorted(ts)

    def state_at(self, t):
        """Settings (mot_on, red_on, shutter_open) in force on ``[t, next switch)``."""
        mot, red, shutter = set(self.mot_on), set(self.red_on), self.shutter_open
        for ev in self.events:
            if ev.t > t:
                break
            for kind, target, value in ev.changes:
                if kind == "mot":
                    (mot.add if value else mot.discard)(target)
                elif kind == "red":
                    (red.add if value else red.discard)(target)
                elif kind == "shutter":
                    shutter = bool(value)
        # pulses override the red repumper for their duration
        for ev in self.events:
            for kind, target, value in ev.changes:
                if kind == "pulse" and ev.t <= t < ev.t + value:
                    red.add(target)
        return frozenset(mot), frozenset(red), shutter


@dataclass(frozen=True)
class LoadingCurve:
    t: np.ndarray
    ground: dict  # name -> N(t)
    reservoir: dict  # name -> M(t)
    signal: np.ndarray = None

    def n(self, name):
        return self.ground[name]

    def at(self, name, t):
        return float(np.interp(t, self.t, self.ground[name]))


# --------------------------------------------------------------- integration

def _rhs_factory(model, mot, red, shutter, dynamic):
    """Build the right-hand side for one constant-settings segment."""
    vbar = model.overlap()
    tau_m = model.tau_m(shutter)
    tr = 1.0 / model.transfer_time
    idx = {n: i for i, n in enumerate(dynamic)}
    nd = len(dynamic)

    def held_value(name):
        sp = model.species[name]
        return sp.held if name in mot else 0.0

    coef = []
    for name in dynamic:
        sp = model.species[name]
        on = name in mot
        load = sp.loading_rate if (on and shutter) else 0.0
        lin = 1.0 / sp.tau_bg
        k2 = 0.0
        feed = 0.0
        if on:
            lin += sp.depump_rate(name in red)
            k2 = sp.two_body_rate()
            if name not in red:
                feed = sp.eta_trap * sp.repumpable / sp.tau
        other = model.partner(name)
        kbf, jo, const_other = 0.0, None, 0.0
        if other is not None and on and other in mot and model.beta_bf > 0:
            kbf = model.beta_bf / vbar
            if other in idx:
                jo = idx[other]
            else:
                const_other = held_value(other)
        pump = tr if name in red else 0.0
        coef.append((load, lin, k2, feed, kbf, jo, const_other, pump))

    def rhs(t, y):
        out = np.empty_like(y)
        for i, (load, lin, k2, feed, kbf, jo, const_other, pump) in enumerate(coef):
            n, m = y[i], y[nd + i]
            n_other = y[jo] if jo is not None else const_other
            out[i] = load - lin * n - k2 * n * n - kbf * n_other * n + pump * m
            out[nd + i] = feed * n - m / tau_m - pump * m
        return out

    return rhs


def integrate_schedule(model: MotModel, schedule: Schedule, *, t_eval=None, points=2001,
                       rtol=1e-10, atol=1e-6, detection=None, method="LSODA"):
    """Integrate the kinetics over ``schedule`` and sample on ``t_eval``.

    Species with ``held`` set are not integrated: their number is the held
    value while their MOT is on and zero otherwise. Sample times that fall
    exactly on a switch take the value at the switch (continuous states).
    """
    names = model.names
    for name in schedule.initial:
        if name not in model.species:
            raise ScheduleError(f"initial state given for unknown species {name!r}")
    for ev in schedule.events:
        for kind, target, _ in ev.changes:
            if kind != "shutter" and target not in model.species:
                raise ScheduleError(f"event at t={ev.t} s refers to unknown species {target!r}")

    dynamic = [n for n in names if model.species[n].held is None]
    nd = len(dynamic)
    y = np.zeros(2 * nd)
    for i, name in enumerate(dynamic):
        n0, m0 = schedule.initial.get(name, (0.0, 0.0))
        y[i], y[nd + i] = n0, m0
    if t_eval is None:
        t_eval = np.linspace(0.0, schedule.horizon, points)
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) < 0) or t_eval[0] < 0 or t_eval[-1] > schedule.horizon:
        raise ScheduleError("sample times must be sorted and lie within the horizon")

    out = np.zeros((2 * nd, t_eval.size))
    mot_at = np.zeros((len(names), t_eval.size), dtype=bool)
    switches = schedule.switch_times()
    for t0, t1 in zip(switches[:-1], switches[1:]):
        mot, red, shutter = schedule.state_at(t0)
        sel = (t_eval >= t0) & ((t_eval < t1) | ((t1 == switches[-1]) & (t_eval <= t1)))
        for j, name in enumerate(names):
            mot_at[j, sel] = name in mot
        rhs = _rhs_factory(model, mot, red, shutter, dynamic)
        if nd == 0:
            continue
        # the stiffest rate sets a step bound so short pulses are not skipped
        sol = solve_ivp(rhs, (t0, t1), y, method=method, rtol=rtol, atol=atol,
                        dense_output=True, max_step=max((t1 - t0) / 20, 1e-9))
        if not sol.success:
            raise IntegrationError(f"integration failed on [{t0}, {t1}] s: {sol.message}")
        scale = max(1.0, float(np.max(np.abs(sol.y))))
        if np.min(sol.y) < -1e-6 * scale:
            raise IntegrationError(f"negative population on [{t0}, {t1}] s; tighten tolerances")
        if sel.any():
            out[:, sel] = sol.sol(t_eval[sel])
        y = np.clip(sol.y[:, -1], 0.0, None)

    out = np.clip(out, 0.0, None)
    ground, reservoir = {}, {}
    for j, name in enumerate(names):
        sp = model.species[name]
        if sp.held is None:
            i = dynamic.index(name)
            ground[name], reservoir[name] = out[i], out[nd + i]
        else:
            ground[name] = np.where(mot_at[j], sp.held, 0.0)
            reservoir[name] = np.zeros(t_eval.size)
    signal = None
    if detection:
        signal = np.zeros(t_eval.size)
        for j, name in enumerate(names):
            if name in detection:
                signal += np.where(mot_at[j], detection[name].signal(ground[name]), 0.0)
    return LoadingCurve(t_eval, ground, reservoir, signal)


def steady_state(model: MotModel, *, mot_on=None, red_on=(), shutter_open=True):
    """Closed-form steady ground-state number per species.

    Solves ``G - N/tau_tot - k N^2 = 0`` for the positive root, written as
    ``2G / (1/tau_tot + sqrt(1/tau_tot^2 + 4 k G))`` to stay accurate when
    ``k -> 0``. A held partner adds ``beta_BF n_other`` to ``1/tau_tot``;
    two dynamic species are not coupled here.
    """
    mot_on = set(model.names if mot_on is None else mot_on)
    vbar = model.overlap()
    out = {}
    for name, sp in model.species.items():
        if sp.held is not None:
            out[name] = sp.held if name in mot_on else 0.0
            continue
        if name not in mot_on:
            out[name] = 0.0
            continue
        g = sp.loading_rate if shutter_open else 0.0
        lin = sp.depump_rate(name in red_on) + 1.0 / sp.tau_bg
        other = model.partner(name)
        if other is not None and other in mot_on and model.species[other].held:
            lin += model.beta_bf * model.species[other].held / vbar
        k = sp.two_body_rate()
        out[name] = 2.0 * g / (lin + np.sqrt(lin * lin + 4.0 * k * g))
    return out


def reservoir_gain(model: MotModel, name, *, accumulate=10.0, pulse=10e-3, points=2001):
    """Ground-state number after accumulation plus a red pulse, over the steady MOT number.

    The MOT runs with the red repumper off for ``accumulate`` seconds, then
    its beams go off and a red pulse of length ``pulse`` returns the trapped
    metastable atoms. Returns ``(gain, recovered, steady, curve)``.
    """
    ss = steady_state(model, mot_on={name})[name]
    sched = Schedule(
        horizon=accumulate + pulse,
        events=(Event(accumulate, (("mot", name, False), ("pulse", name, pulse))),),
        mot_on=frozenset({name}),
        initial={name: (ss, 0.0)},
    )
    solo = replace(model, species={name: model.species[name]})
    curve = integrate_schedule(solo, sched, points=points)
    recovered = float(curve.ground[name][-1])
    return recovered / ss, recovered, ss, curve


# ---------------------------------------------------------------- observables

@dataclass(frozen=True)
class Detection:
    """Fluorescence calibration of one species' MOT.

    ``intensity`` is the total MOT intensity (mW/cm^2), ``cg`` the average
    squared Clebsch-Gordan factor, ``collection`` the solid-angle fraction
    ``Omega/4pi`` and ``efficiency`` the detector gain.
    """
    intensity: float
    detuning: float  # MHz
    cg: float
    linewidth: float = 5.02  # MHz
    saturation: float = 8.52  # mW/cm^2
    collection: float = 1.0
    efficiency: float = 1.0

    def rate_per_atom(self):
        """Photons per second per atom into the detector."""
        s = self.intensity / self.saturation * self.cg
        gamma = 2 * np.pi * self.linewidth * 1e6
        x = 2.0 * self.detuning / self.linewidth
        return 0.5 * gamma * s / (1.0 + s + x * x) * self.collection * self.efficiency

    def signal(self, n):
        return fluorescence_signal(n, self)

    def atoms(self, signal):
        return atom_number_from_signal(signal, self)


def fluorescence_signal(n, detection: Detection):
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("atom number must be >= 0")
    return n * detection.rate_per_atom()


def atom_number_from_signal(signal, detection: Detection):
    """Exact inverse of :func:`fluorescence_signal`."""
    rate = detection.rate_per_atom()
    signal = np.asarray(signal, dtype=float)
    if rate == 0:
        if np.any(signal != 0):
            raise ValueError("no scattered light at zero intensity: atom number undefined for a nonzero signal")
        return np.zeros_like(signal)
    return signal / rate


def tof_width(sigma0, temperature, mass, t):
    """Ballistic cloud width ``sqrt(sigma0^2 + k_B T t^2 / m)`` (SI)."""
    if sigma0 < 0 or temperature < 0 or mass <= 0 or np.any(np.asarray(t) < 0):
        raise ValueError("tof_width needs sigma0, T, t >= 0 and m > 0")
    t = np.asarray(t, dtype=float)
    return np.sqrt(sigma0 ** 2 + k_B * temperature / mass * t * t)

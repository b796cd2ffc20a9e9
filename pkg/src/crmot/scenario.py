"""Scenario files: sectioned key-value text describing one reproducible run.

Keys carry their unit in the name (``detuning_MHz``, ``tau_s``...). Every
number is range-checked, unknown keys and sections are rejected, and
errors cite the file and line. See README.md for the full key list.
"""

from dataclasses import dataclass, field
import copy

from . import kvfile
from .atomic import species_by_name
from .pumping import PolarizationMix, PumpBeam
from .slower import SlowerProfile, SlowingBeam
from .structure import StateLabel
from .trap import CloudShape, Detection, Event, MotModel, Schedule, ScheduleError, SpeciesKinetics

INF = float("inf")


class ScenarioError(kvfile.FormatError):
    """Base class of scenario validation errors."""


class UnknownKeyError(ScenarioError):
    pass


class UnitRangeError(ScenarioError):
    pass


class ScheduleOrderError(ScenarioError, ScheduleError):
    pass


class MissingSectionError(ScenarioError):
    pass


# key -> (lo, hi, integer); bounds inclusive
RANGES = {
    "gradient_G_cm": (0.0, 1000.0),
    "seed": (0, 2 ** 64 - 1, True),
    "b_max_G": (-5000.0, 5000.0),
    "b_min_G": (-5000.0, 5000.0),
    "detuning_MHz": (-5000.0, 5000.0),
    "eta": (1e-6, 1.0),
    "branch_length_m": (1e-6, 10.0),
    "final_length_m": (1e-6, 10.0),
    "length_m": (1e-3, 10.0),
    "intensity_mW_cm2": (0.0, 1e5),
    "power_mW": (0.0, 1e5),
    "waist_mm": (1e-3, 100.0),
    "oven_temperature_K": (1.0, 5000.0),
    "v0_m_s": (1e-3, 5000.0),
    "focus_gain": (1.0, 100.0),
    "b_start_G": (-5000.0, 5000.0),
    "b_stop_G": (-5000.0, 5000.0),
    "b_step_G": (1e-6, 1000.0),
    "transverse_nodes": (0, 64, True),
    "loading_rate_1_s": (0.0, 1e12),
    "tau_s": (1e-9, 1e6),
    "tau_bg_s": (1e-9, INF),
    "beta_cm3_s": (0.0, 1e-5),
    "beta_bf_cm3_s": (0.0, 1e-5),
    "w_h_um": (1e-3, 1e5),
    "w_v_um": (1e-3, 1e5),
    "dz_um": (-1e5, 1e5),
    "repumpable": (0.0, 1.0),
    "eta_trap": (0.0, 1.0),
    "held": (0.0, 1e12),
    "tau_m_open_s": (1e-9, 1e6),
    "tau_m_closed_s": (1e-9, 1e6),
    "transfer_time_s": (1e-9, 1e3),
    "horizon_s": (1e-9, 1e6),
    "points": (2, 10 ** 7, True),
    "signal_noise": (0.0, 1.0),
    "cg": (0.0, 1.0),
    "collection": (0.0, 1.0),
    "efficiency": (0.0, 1e12),
    "noise": (0.0, 1.0),
    "t1_s": (0.0, 1e6),
    "t2_s": (0.0, 1e6),
    "nbar_cm3": (0.0, 1e20),
    "temperature_uK": (0.0, 1e7),
    "sigma0_um": (0.0, 1e6),
    "tof_max_s": (1e-9, 10.0),
    "workers": (1, 256, True),
}

COMMANDS = ("structure", "slower", "pump", "mot", "fit", "sweep")
FIT_MODELS = ("loading", "decay", "interspecies", "tof")

_SECTION_KEYS = {
    "scenario": {"name", "species", "gradient_G_cm", "seed", "output", "command"},
    "slower": {"species", "b_max_G", "b_min_G", "detuning_MHz", "eta", "branch_length_m",
               "final_length_m", "length_m", "intensity_mW_cm2", "power_mW", "waist_mm",
               "oven_temperature_K", "v0_m_s", "focus_gain"},
    "structure": {"species", "level", "b_start_G", "b_stop_G", "b_step_G", "crossing"},
    "beam": {"reference", "detuning_MHz", "intensity_mW_cm2", "power_mW", "waist_mm",
             "polarization", "direction"},
    "pump": {"species", "slowing", "beams", "v0_m_s", "initial", "labels", "transverse_nodes"},
    "mot": {"loading_rate_1_s", "tau_s", "beta_cm3_s", "w_h_um", "w_v_um", "dz_um", "repumpable",
            "eta_trap", "tau_bg_s", "held"},
    "detection": {"intensity_mW_cm2", "detuning_MHz", "cg", "collection", "efficiency"},
    "coupling": {"beta_bf_cm3_s", "tau_m_open_s", "tau_m_closed_s", "transfer_time_s"},
    "schedule": {"horizon_s", "points", "mot_on", "red_on", "shutter", "initial", "event",
                 "signal_noise"},
    "fit": {"model", "input", "time_column", "column", "species", "t1_s", "t2_s", "nbar_cm3",
            "noise", "temperature_uK", "sigma0_um", "tof_max_s", "points"},
    "sweep": {"parameter", "values", "command", "workers"},
}
_REPEATABLE = {"structure": {"crossing"}, "schedule": {"initial", "event"}}
_NAMED = {"beam", "mot", "detection"}  # sections that take one argument
REQUIRED = ("scenario",)


@dataclass(frozen=True)
class SlowerSpec:
    species: str
    profile: SlowerProfile
    beam: SlowingBeam
    oven_temperature: float
    v0: float


@dataclass(frozen=True)
class StructureSpec:
    species: str
    level: str
    b_start: float
    b_stop: float
    b_step: float
    crossings: tuple  # ((StateLabel, StateLabel), ...)


@dataclass(frozen=True)
class PumpSpec:
    species: str
    beams: tuple  # beam names, slowing beam first
    v0: float
    initial: str
    labels: tuple  # StateLabel selection; empty = all
    transverse_nodes: int


@dataclass(frozen=True)
class FitSpec:
    model: str
    input: str = None
    time_column: str = "t_s"
    column: str = None
    species: str = None
    t1: float = None
    t2: float = None
    nbar: float = None
    noise: float = 0.0
    temperature: float = 100.0  # uK
    sigma0: float = 110.0  # um
    tof_max: float = 10e-3
    points: int = 10


@dataclass(frozen=True)
class SweepSpec:
    section: str
    key: str
    values: tuple
    command: str
    workers: int = 1


@dataclass(frozen=True)
class Scenario:
    name: str
    species: tuple
    gradient: float
    seed: int
    command: str = None
    output: str = None
    path: str = None
    slower: SlowerSpec = None
    structure: StructureSpec = None
    beams: dict = field(default_factory=dict)  # name -> PumpBeam
    pump: PumpSpec = None
    mot: MotModel = None
    schedule: Schedule = None
    detection: dict = field(default_factory=dict)
    signal_noise: float = 0.0
    fit: FitSpec = None
    sweep: SweepSpec = None
    sections: tuple = ()  # raw sections, for sweep overrides

    def species_obj(self, name):
        return species_by_name(name)


# ----------------------------------------------------------------- helpers

def _num(sec, key, default=None):
    e = sec.get(key)
    if e is None:
        if default is None:
            raise ScenarioError(f"missing key {key!r} in [{sec.title}]", sec.line, sec.path)
        return default
    return _check(key, e.value, e.line, sec.path)


def _check(key, text, line, path):
    lo, hi, *integer = RANGES[key]
    try:
        x = float(text)
    except ValueError:
        raise UnitRangeError(f"{key} = {text!r} is not a number", line, path) from None
    if integer:
        if x != x or x in (INF, -INF) or x != int(x):
            raise UnitRangeError(f"{key} = {text!r} must be an integer", line, path)
        x = int(text) if text.strip().lstrip("+-").isdigit() else int(x)
    if not lo <= x <= hi:
        raise UnitRangeError(f"{key} = {text} outside the allowed range [{lo}, {hi}]", line, path)
    return x


def _choice(sec, key, options, default=None):
    e = sec.get(key)
    if e is None:
        if default is None:
            raise ScenarioError(f"missing key {key!r} in [{sec.title}]", sec.line, sec.path)
        return default
    if e.value not in options:
        raise ScenarioError(f"{key} = {e.value!r}; expected one of {', '.join(options)}", e.line, sec.path)
    return e.value


def _species_name(sec, key, allowed, default=None):
    e = sec.get(key)
    if e is None:
        if default is None:
            raise ScenarioError(f"missing key {key!r} in [{sec.title}]", sec.line, sec.path)
        return default
    if e.value not in allowed:
        raise ScenarioError(f"{key} = {e.value!r} is not one of the scenario species {allowed}",
                            e.line, sec.path)
    return e.value


def _intensity(sec, waist=None):
    """Intensity from ``intensity_mW_cm2`` or from ``power_mW`` and the waist (peak)."""
    from .slower import peak_intensity
    has_i, has_p = sec.get("intensity_mW_cm2"), sec.get("power_mW")
    if has_i and has_p:
        raise ScenarioError(f"give either intensity_mW_cm2 or power_mW in [{sec.title}], not both",
                            has_p.line, sec.path)
    if has_p:
        if waist is None:
            raise ScenarioError(f"power_mW in [{sec.title}] needs waist_mm", has_p.line, sec.path)
        return float(peak_intensity(_num(sec, "power_mW"), waist))
    return _num(sec, "intensity_mW_cm2", None if has_i else 21.2)


def _check_sections(sections, path):
    if not sections:
        raise MissingSectionError(
            "empty scenario; required sections: " + ", ".join(f"[{s}]" for s in REQUIRED)
            + "; each subcommand also needs its own section ([structure], [slower], [pump] with "
              "[beam NAME], [mot NAME] with [schedule], [fit], [sweep])", None, path)
    seen = {}
    for sec in sections:
        if sec.name not in _SECTION_KEYS:
            raise UnknownKeyError(f"unknown section [{sec.title}]", sec.line, path)
        want = 1 if sec.name in _NAMED else 0
        if len(sec.args) != want:
            form = f"[{sec.name} NAME]" if want else f"[{sec.name}]"
            raise ScenarioError(f"section header must be {form}, got [{sec.title}]", sec.line, path)
        if sec.title in seen:
            raise ScenarioError(f"duplicate section [{sec.title}] (first at line {seen[sec.title]})",
                                sec.line, path)
        seen[sec.title] = sec.line
        try:
            sec.check_keys(_SECTION_KEYS[sec.name], repeatable=_REPEATABLE.get(sec.name, ()))
        except kvfile.FormatError as exc:
            cls = UnknownKeyError if "unknown key" in str(exc) else ScenarioError
            raise cls(str(exc).split(": ", 1)[-1], exc.line, path) from None
        for e in sec.entries:
            if e.key in RANGES and not (sec.name == "sweep"):
                _check(e.key, e.value, e.line, path)
    missing = [s for s in REQUIRED if s not in {x.name for x in sections}]
    if missing:
        raise MissingSectionError("missing required sections: " + ", ".join(f"[{s}]" for s in missing),
                                  None, path)


# ----------------------------------------------------------------- builders

def _build_slower(sec, names):
    name = _species_name(sec, "species", names, names[0])
    sp = species_by_name(name)
    waist = _num(sec, "waist_mm", 0.0) or None
    try:
        profile = SlowerProfile.design(
            sp, detuning=_num(sec, "detuning_MHz", -450.0), b_max=_num(sec, "b_max_G", 460.0),
            b_min=_num(sec, "b_min_G", -260.0), eta=_num(sec, "eta", 0.5),
            branch_length=_num(sec, "branch_length_m", 0.1), final_length=_num(sec, "final_length_m", 0.02),
            total_length=_num(sec, "length_m", 1.0))
    except ValueError as exc:
        raise ScenarioError(str(exc), sec.line, sec.path) from None
    beam = SlowingBeam(detuning=_num(sec, "detuning_MHz", -450.0), intensity=_intensity(sec, waist),
                       focus_gain=_num(sec, "focus_gain", 1.0))
    return SlowerSpec(name, profile, beam, _num(sec, "oven_temperature_K", 1773.15), _num(sec, "v0_m_s", 400.0))


def _label(text, line, path):
    try:
        return StateLabel.parse(text.strip())
    except (ValueError, KeyError) as exc:
        raise ScenarioError(f"bad state label {text!r}: {exc}", line, path) from None


def _build_structure(sec, names):
    name = _species_name(sec, "species", names, names[-1])
    level = sec.text("level", "7P4")
    try:
        species_by_name(name).level(level)
    except KeyError:
        raise ScenarioError(f"{name} has no level {level!r}", sec.get("level").line, sec.path) from None
    crossings = []
    for e in sec.all("crossing"):
        parts = e.value.split(";")
        if len(parts) != 2:
            raise ScenarioError("crossing must be 'F=..,mF=.. ; F=..,mF=..'", e.line, sec.path)
        crossings.append(tuple(_label(p, e.line, sec.path) for p in parts))
    lo, hi = _num(sec, "b_start_G", 0.0), _num(sec, "b_stop_G", 100.0)
    if not hi > lo:
        raise UnitRangeError(f"b_stop_G must exceed b_start_G ({hi} <= {lo})", sec.line, sec.path)
    return StructureSpec(name, level, lo, hi, _num(sec, "b_step_G", 0.5), tuple(crossings))


def _build_beam(sec, names):
    ref = _species_name(sec, "reference", names + ("52Cr", "53Cr"))
    pol = (1.0, 0.0, 0.0)
    e = sec.get("polarization")
    if e is not None:
        try:
            pol = tuple(float(x) for x in e.value.split())
            mix = PolarizationMix(*pol)
        except (ValueError, TypeError) as exc:
            raise UnitRangeError(f"polarization must be three fractions 'plus pi minus' summing to 1 ({exc})",
                                 e.line, sec.path) from None
    else:
        mix = PolarizationMix()
    waist = _num(sec, "waist_mm", 0.0) or None
    return PumpBeam(_num(sec, "detuning_MHz"), _intensity(sec, waist), species_by_name(ref), mix,
                    counter_propagating=_choice(sec, "direction", ("counter", "co"), "counter") == "counter",
                    name=sec.args[0], waist_mm=waist)


def _build_pump(sec, names, beams):
    name = _species_name(sec, "species", names, names[-1])
    e = sec.get("beams")
    order = tuple(e.value.split()) if e else tuple(beams)
    for b in order:
        if b not in beams:
            raise ScenarioError(f"pump beam {b!r} has no [beam {b}] section", e.line if e else sec.line, sec.path)
    slowing = sec.text("slowing", order[0] if order else "")
    if slowing not in order:
        raise ScenarioError(f"slowing beam {slowing!r} is not among the pump beams", sec.line, sec.path)
    order = (slowing,) + tuple(b for b in order if b != slowing)
    e = sec.get("labels")
    labels = ()
    if e is not None and e.value != "all":
        labels = tuple(_label(x, e.line, sec.path) for x in e.value.split())
    return PumpSpec(name, order, _num(sec, "v0_m_s", 400.0),
                    _choice(sec, "initial", ("uniform", "stretched"), "uniform"), labels,
                    _num(sec, "transverse_nodes", 0))


def _build_mot(secs, coupling, names):
    kin = {}
    for sec in secs:
        name = sec.args[0]
        if name not in names:
            raise ScenarioError(f"[mot {name}] is not a scenario species {names}", sec.line, sec.path)
        held = sec.get("held")
        kin[name] = SpeciesKinetics(
            loading_rate=_num(sec, "loading_rate_1_s"), tau=_num(sec, "tau_s"),
            beta=_num(sec, "beta_cm3_s", 0.0),
            cloud=CloudShape(_num(sec, "w_h_um", 100.0), _num(sec, "w_v_um", 100.0), _num(sec, "dz_um", 0.0)),
            repumpable=_num(sec, "repumpable", 0.5), eta_trap=_num(sec, "eta_trap", 0.5),
            tau_bg=_num(sec, "tau_bg_s", INF), held=_num(sec, "held") if held else None)
    kw = {}
    if coupling is not None:
        kw = dict(beta_bf=_num(coupling, "beta_bf_cm3_s", 0.0), tau_m_open=_num(coupling, "tau_m_open_s", 8.0),
                  tau_m_closed=_num(coupling, "tau_m_closed_s", 30.0),
                  transfer_time=_num(coupling, "transfer_time_s", 1e-3))
    # ordering follows the scenario species list
    kin = {n: kin[n] for n in names if n in kin}
    try:
        return MotModel(kin, **kw)
    except ValueError as exc:
        where = coupling or secs[0]
        raise ScenarioError(str(exc), where.line, where.path) from None


def _bool_word(text, line, path, words=("on", "off")):
    if text not in words:
        raise ScenarioError(f"expected {' or '.join(words)}, got {text!r}", line, path)
    return text == words[0]


def _build_schedule(sec, names):
    path = sec.path
    horizon = _num(sec, "horizon_s")

    def species_set(key):
        e = sec.get(key)
        if e is None or e.value in ("", "none"):
            return frozenset()
        out = frozenset(e.value.split())
        bad = out - set(names)
        if bad:
            raise ScenarioError(f"{key} names unknown species {sorted(bad)}", e.line, path)
        return out

    initial = {}
    for e in sec.all("initial"):
        parts = e.value.split()
        if len(parts) != 3 or parts[0] not in names:
            raise ScenarioError("initial must be 'SPECIES N_ground N_reservoir'", e.line, path)
        try:
            n, m = float(parts[1]), float(parts[2])
        except ValueError:
            raise UnitRangeError(f"initial numbers must be numeric, got {e.value!r}", e.line, path) from None
        if n < 0 or m < 0:
            raise UnitRangeError("initial atom numbers must be >= 0", e.line, path)
        initial[parts[0]] = (n, m)

    grouped, last = [], None
    for e in sec.all("event"):
        parts = e.value.split()
        try:
            t = float(parts[0])
        except (ValueError, IndexError):
            raise ScenarioError(f"event must start with a time in s, got {e.value!r}", e.line, path) from None
        if not 0 <= t <= horizon:
            raise UnitRangeError(f"event time {t} s outside [0, {horizon}] s", e.line, path)
        kind = parts[1] if len(parts) > 1 else ""
        if kind == "shutter" and len(parts) == 3:
            change = ("shutter", None, _bool_word(parts[2], e.line, path, ("open", "closed")))
        elif kind in ("mot", "red") and len(parts) == 4:
            if parts[2] not in names:
                raise ScenarioError(f"event refers to unknown species {parts[2]!r}", e.line, path)
            change = (kind, parts[2], _bool_word(parts[3], e.line, path))
        elif kind == "pulse" and len(parts) == 4:
            if parts[2] not in names:
                raise ScenarioError(f"event refers to unknown species {parts[2]!r}", e.line, path)
            change = ("pulse", parts[2], _check("transfer_time_s", parts[3], e.line, path))
        else:
            raise ScenarioError("event must be 'T mot|red SPECIES on|off', 'T shutter open|closed' "
                                f"or 'T pulse SPECIES DURATION_S', got {e.value!r}", e.line, path)
        if last is not None and t < last[0]:
            raise ScheduleOrderError(f"events out of order: t={t} s (line {e.line}) comes after "
                                     f"t={last[0]} s (line {last[1]})", e.line, path)
        if last is not None and t == last[0]:
            grouped[-1][1].append(change)
        else:
            grouped.append((t, [change]))
        last = (t, e.line)
    try:
        return Schedule(horizon, tuple(Event(t, tuple(ch)) for t, ch in grouped),
                        mot_on=species_set("mot_on"), red_on=species_set("red_on"),
                        shutter_open=_bool_word(sec.text("shutter", "open"), sec.line, path, ("open", "closed")),
                        initial=initial)
    except ScheduleError as exc:
        raise ScheduleOrderError(str(exc), sec.line, path) from None


def _build_detection(sec, names):
    name = sec.args[0]
    if name not in names:
        raise ScenarioError(f"[detection {name}] is not a scenario species {names}", sec.line, sec.path)
    line = species_by_name(name).line
    cg_default = 3 / 7 if species_by_name(name).I2 == 0 else 2 / 5
    return Detection(_num(sec, "intensity_mW_cm2"), _num(sec, "detuning_MHz"), _num(sec, "cg", cg_default),
                     linewidth=line.linewidth_mhz, saturation=line.saturation_mw_cm2,
                     collection=_num(sec, "collection", 1.0), efficiency=_num(sec, "efficiency", 1.0))


def _build_fit(sec, names):
    model = _choice(sec, "model", FIT_MODELS)
    t1, t2 = sec.get("t1_s"), sec.get("t2_s")
    spec = FitSpec(
        model=model, input=sec.text("input", "") or None, time_column=sec.text("time_column", "t_s"),
        column=sec.text("column", "") or None, species=_species_name(sec, "species", names, names[0]),
        t1=_num(sec, "t1_s") if t1 else None, t2=_num(sec, "t2_s") if t2 else None,
        nbar=_num(sec, "nbar_cm3") if sec.get("nbar_cm3") else None, noise=_num(sec, "noise", 0.0),
        temperature=_num(sec, "temperature_uK", 100.0), sigma0=_num(sec, "sigma0_um", 110.0),
        tof_max=_num(sec, "tof_max_s", 10e-3), points=_num(sec, "points", 10))
    if model == "interspecies" and (spec.t1 is None or spec.t2 is None):
        raise ScenarioError("interspecies fit needs t1_s and t2_s", sec.line, sec.path)
    return spec


def _build_sweep(sec):
    e = sec.get("parameter")
    if e is None or "." not in e.value:
        raise ScenarioError("sweep parameter must be 'SECTION.key' (e.g. 'slower.detuning_MHz')",
                            e.line if e else sec.line, sec.path)
    title, key = e.value.rsplit(".", 1)
    ve = sec.get("values")
    if ve is None or not ve.value.split():
        raise ScenarioError("sweep needs a non-empty 'values' list", sec.line, sec.path)
    values = tuple(ve.value.split())
    command = _choice(sec, "command", tuple(c for c in COMMANDS if c != "sweep"))
    return SweepSpec(title, key, values, command, _num(sec, "workers", 1))


def build_scenario(sections, path=None) -> Scenario:
    _check_sections(sections, path)
    by = {}
    for s in sections:
        by.setdefault(s.name, []).append(s)
    head = by["scenario"][0]
    e = head.get("species")
    names = tuple(e.value.split()) if e else ("52Cr",)
    for n in names:
        try:
            species_by_name(n)
        except KeyError:
            raise ScenarioError(f"unknown species {n!r}", e.line, path) from None
    if not 1 <= len(names) <= 2 or len(set(names)) != len(names):
        raise ScenarioError("species must list one or two distinct isotopes", e.line if e else head.line, path)
    command = head.text("command", "") or None
    if command is not None and command not in COMMANDS:
        raise ScenarioError(f"command = {command!r}; expected one of {', '.join(COMMANDS)}",
                            head.get("command").line, path)
    beams = {s.args[0]: _build_beam(s, names) for s in by.get("beam", [])}
    sched = by.get("schedule", [None])[0]
    return Scenario(
        name=head.text("name", "scenario"),
        species=names,
        gradient=_num(head, "gradient_G_cm", 18.0),
        seed=_num(head, "seed", 0),
        command=command,
        output=head.text("output", "") or None,
        path=path,
        slower=_build_slower(by["slower"][0], names) if "slower" in by else None,
        structure=_build_structure(by["structure"][0], names) if "structure" in by else None,
        beams=beams,
        pump=_build_pump(by["pump"][0], names, beams) if "pump" in by else None,
        mot=_build_mot(by["mot"], by.get("coupling", [None])[0], names) if "mot" in by else None,
        schedule=_build_schedule(sched, names) if sched else None,
        detection={s.args[0]: _build_detection(s, names) for s in by.get("detection", [])},
        signal_noise=_num(sched, "signal_noise", 0.0) if sched else 0.0,
        fit=_build_fit(by["fit"][0], names) if "fit" in by else None,
        sweep=_build_sweep(by["sweep"][0]) if "sweep" in by else None,
        sections=tuple(sections),
    )


def parse_scenario_text(text, path=None) -> Scenario:
    try:
        sections = kvfile.parse_text(text, path)
    except kvfile.FormatError as exc:
        raise ScenarioError(str(exc).split(": ", 1)[-1] if exc.line else str(exc), exc.line, path) from None
    return build_scenario(sections, path)


def parse_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario_text(fh.read(), str(path))


def with_override(scenario: Scenario, title, key, value) -> Scenario:
    """Rebuild ``scenario`` with ``[title] key = value`` set (added if absent)."""
    sections = copy.deepcopy(list(scenario.sections))
    for sec in sections:
        if sec.title == title:
            for e in sec.entries:
                if e.key == key:
                    e.value = str(value)
                    break
            else:
                sec.entries.append(kvfile.Entry(key, str(value), sec.line))
            break
    else:
        raise ScenarioError(f"sweep parameter refers to missing section [{title}]", None, scenario.path)
    return build_scenario([s for s in sections if s.name != "sweep"], scenario.path)


def shipped_scenarios():
    """Paths of the example scenarios distributed with the package."""
    from importlib import resources
    root = resources.files("crmot") / "scenarios"
    return sorted((p for p in root.iterdir() if p.name.endswith(".scn")), key=lambda p: p.name)

"""Static atomic structure of the two chromium isotopes.

Data live in ``data/chromium.dat`` (sectioned key-value text). Loading
returns immutable :class:`AtomicSpecies` objects which every other
module reads but never mutates.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from math import pi

from . import kvfile
from .angular import twice, fmt_half, AngularMomentumError
from .units import atomic_mass, h, mu_B, mu_N


class SchemaError(kvfile.FormatError):
    """Species data file is missing a constant or has an invalid one."""


@dataclass(frozen=True)
class Level:
    label: str
    J: Fraction
    g_J: float
    A: float = 0.0  # MHz, magnetic dipole hyperfine constant
    B: float = 0.0  # MHz, electric quadrupole hyperfine constant
    decays: tuple = ()  # ((destination label, rate 1/s), ...)
    hyperfine_gap: float = None  # MHz, stored datum only

    @property
    def J2(self):
        return twice(self.J)

    @property
    def leak_rate(self):
        """Total decay rate (1/s) into the listed destination levels."""
        return sum(rate for _, rate in self.decays)

    def decay_rate(self, destination):
        return sum(rate for dest, rate in self.decays if dest == destination)


@dataclass(frozen=True)
class TransitionLine:
    lower: str
    upper: str
    wavelength_nm: float
    linewidth_mhz: float  # gamma / 2pi
    saturation_mw_cm2: float

    @property
    def wavelength(self):
        return self.wavelength_nm * 1e-9

    @property
    def k(self):
        """Wavevector (1/m)."""
        return 2 * pi / self.wavelength

    @property
    def gamma(self):
        """Natural linewidth as an angular rate (1/s)."""
        return 2 * pi * self.linewidth_mhz * 1e6

    @property
    def recoil_momentum(self):
        return h / self.wavelength

    def saturation(self, intensity_mw_cm2):
        """On-resonance saturation parameter of the cycling transition."""
        return intensity_mw_cm2 / self.saturation_mw_cm2


@dataclass(frozen=True)
class AtomicSpecies:
    name: str
    mass_u: float
    I: Fraction
    abundance: float
    isotope_shift_mhz: float
    line: TransitionLine
    levels: tuple = field(default_factory=tuple)
    nuclear_moment: float = 0.0  # in nuclear magnetons
    shift_transition: tuple = None  # (2F, 2F') the quoted isotope shift refers to

    @property
    def mass(self):
        """Mass in kg."""
        return self.mass_u * atomic_mass

    @property
    def I2(self):
        return twice(self.I)

    @property
    def nuclear_g(self):
        """Nuclear g-factor in Bohr-magneton units, sign such that the
        Zeeman term is ``+ g_I mu_B B m_I``."""
        if self.I == 0:
            return 0.0
        return -self.nuclear_moment * (mu_N / mu_B) / float(self.I)

    def level(self, label) -> Level:
        for lv in self.levels:
            if lv.label == label:
                return lv
        raise KeyError(f"{self.name} has no level {label!r}")

    @property
    def ground(self) -> Level:
        return self.level(self.line.lower)

    @property
    def excited(self) -> Level:
        return self.level(self.line.upper)

    def dimension(self, level) -> int:
        lv = self.level(level) if isinstance(level, str) else level
        return (lv.J2 + 1) * (self.I2 + 1)


# ---------------------------------------------------------------- loading

_SPECIES_KEYS = {"mass_u", "nuclear_spin", "abundance", "nuclear_moment_muN",
                 "isotope_shift_MHz", "isotope_shift_transition",
                 "cooling_lower", "cooling_upper"}
_LEVEL_KEYS = {"J", "g_J", "A_MHz", "B_MHz", "decay", "hyperfine_gap_MHz"}
_LINE_KEYS = {"wavelength_nm", "linewidth_MHz", "saturation_mW_cm2"}


def default_data_path():
    return resources.files("crmot") / "data" / "chromium.dat"


def _spin(section, key):
    e = section.get(key)
    if e is None:
        raise SchemaError(f"missing constant {key!r} in [{section.title}]", section.line, section.path)
    try:
        return Fraction(e.value) if "/" in e.value else Fraction(twice(float(e.value)), 2)
    except (ValueError, AngularMomentumError):
        raise SchemaError(f"{key} = {e.value!r} is not a half-integer", e.line, section.path) from None


def _number(section, key, default=None, **kw):
    try:
        return section.number(key, default, **kw)
    except kvfile.FormatError as exc:
        raise SchemaError(str(exc).split(": ", 1)[-1].replace("missing key", "missing constant"),
                          exc.line, exc.path) from None


def _parse_species(sec):
    sec.check_keys(_SPECIES_KEYS)
    spin = _spin(sec, "nuclear_spin")
    shift_tr = None
    e = sec.get("isotope_shift_transition")
    if e is not None:
        try:
            f, fp = e.value.split()
            shift_tr = (twice(Fraction(f)), twice(Fraction(fp)))
        except (ValueError, AngularMomentumError):
            raise SchemaError(f"isotope_shift_transition must be 'F Fprime', got {e.value!r}",
                              e.line, sec.path) from None
    fields = dict(
        name=sec.args[0],
        mass_u=_number(sec, "mass_u", positive=True),
        I=spin,
        abundance=_number(sec, "abundance", nonnegative=True),
        isotope_shift_mhz=_number(sec, "isotope_shift_MHz"),
        nuclear_moment=_number(sec, "nuclear_moment_muN", 0.0),
        shift_transition=shift_tr,
    )
    if fields["abundance"] > 1:
        raise SchemaError("abundance must be a fraction in [0, 1]", sec.get("abundance").line, sec.path)
    lower, upper = sec.text("cooling_lower", ""), sec.text("cooling_upper", "")
    for key, val in (("cooling_lower", lower), ("cooling_upper", upper)):
        if not val:
            raise SchemaError(f"missing constant {key!r} in [{sec.title}]", sec.line, sec.path)
    return fields, lower, upper


def _parse_level(sec, needs_hyperfine):
    sec.check_keys(_LEVEL_KEYS, repeatable={"decay"})
    decays = []
    for e in sec.all("decay"):
        parts = e.value.split()
        try:
            dest, rate = parts[0], float(parts[1])
            if len(parts) != 2 or rate < 0:
                raise ValueError
        except (ValueError, IndexError):
            raise SchemaError(f"decay must be 'LEVEL RATE' with RATE >= 0, got {e.value!r}",
                              e.line, sec.path) from None
        decays.append((dest, rate))
    hf_default = None if needs_hyperfine else 0.0
    return Level(
        label=sec.args[1],
        J=_spin(sec, "J"),
        g_J=_number(sec, "g_J"),
        A=_number(sec, "A_MHz", hf_default),
        B=_number(sec, "B_MHz", hf_default),
        decays=tuple(decays),
        hyperfine_gap=_number(sec, "hyperfine_gap_MHz", None) if sec.get("hyperfine_gap_MHz") else None,
    )


def parse_species_text(text, path=None):
    """Parse species data from text; see :func:`load_species_data`."""
    sections = kvfile.parse_text(text, path)
    species, level_secs, line_secs, order = {}, {}, {}, []
    for sec in sections:
        if sec.name == "species" and len(sec.args) == 1:
            species[sec.args[0]] = (sec, *_parse_species(sec))
            order.append(sec.args[0])
        elif sec.name == "level" and len(sec.args) == 2:
            level_secs.setdefault(sec.args[0], []).append(sec)
        elif sec.name == "line" and len(sec.args) == 1:
            line_secs[sec.args[0]] = sec
        else:
            raise SchemaError(f"unexpected section [{sec.title}]", sec.line, path)
    for name in list(level_secs) + list(line_secs):
        if name not in species:
            sec = (level_secs.get(name) or [line_secs.get(name)])[0]
            raise SchemaError(f"section [{sec.title}] refers to undeclared species {name!r}", sec.line, path)
    if not species:
        raise SchemaError("no [species NAME] section found", None, path)

    out = []
    for name in order:
        sec, fields, lower, upper = species[name]
        lsec = line_secs.get(name)
        if lsec is None:
            raise SchemaError(f"missing [line {name}] section", sec.line, path)
        lsec.check_keys(_LINE_KEYS)
        line = TransitionLine(
            lower=lower, upper=upper,
            wavelength_nm=_number(lsec, "wavelength_nm", positive=True),
            linewidth_mhz=_number(lsec, "linewidth_MHz", positive=True),
            saturation_mw_cm2=_number(lsec, "saturation_mW_cm2", positive=True),
        )
        levels = []
        for ls in level_secs.get(name, []):
            needs_hf = fields["I"] > 0 and ls.args[1] in (lower, upper)
            levels.append(_parse_level(ls, needs_hf))
        labels = {lv.label for lv in levels}
        for key, val in (("cooling_lower", lower), ("cooling_upper", upper)):
            if val not in labels:
                raise SchemaError(f"{key} = {val!r} has no [level {name} {val}] section", sec.line, path)
        for ls, lv in zip(level_secs.get(name, []), levels):
            for dest, _ in lv.decays:
                if dest not in labels:
                    raise SchemaError(f"decay destination {dest!r} is not a level of {name}", ls.line, path)
        out.append(AtomicSpecies(levels=tuple(levels), line=line, **fields))
    return out


def load_species_data(path=None):
    """Load the isotopes from a species data file (default: shipped data)."""
    if path is None:
        path = default_data_path()
    text = path.read_text(encoding="utf-8") if hasattr(path, "read_text") else open(path, encoding="utf-8").read()
    return parse_species_text(text, str(path))


def species_by_name(name, path=None) -> AtomicSpecies:
    for sp in load_species_data(path):
        if sp.name == name:
            return sp
    raise KeyError(f"unknown species {name!r}")


def _spin_text(x):
    return fmt_half(twice(x))


def dump_species(species_list):
    """Render species back to the data-file format (floats round-trip exactly)."""
    sections = []
    for sp in species_list:
        rows = [("mass_u", sp.mass_u), ("nuclear_spin", _spin_text(sp.I)),
                ("abundance", sp.abundance), ("nuclear_moment_muN", sp.nuclear_moment),
                ("isotope_shift_MHz", sp.isotope_shift_mhz)]
        if sp.shift_transition:
            rows.append(("isotope_shift_transition",
                         " ".join(fmt_half(x) for x in sp.shift_transition)))
        rows += [("cooling_lower", sp.line.lower), ("cooling_upper", sp.line.upper)]
        sections.append((f"species {sp.name}", rows))
        for lv in sp.levels:
            lrows = [("J", _spin_text(lv.J)), ("g_J", lv.g_J), ("A_MHz", lv.A), ("B_MHz", lv.B)]
            lrows += [("decay", f"{dest} {rate!r}") for dest, rate in lv.decays]
            if lv.hyperfine_gap is not None:
                lrows.append(("hyperfine_gap_MHz", lv.hyperfine_gap))
            sections.append((f"level {sp.name} {lv.label}", lrows))
        sections.append((f"line {sp.name}", [
            ("wavelength_nm", sp.line.wavelength_nm),
            ("linewidth_MHz", sp.line.linewidth_mhz),
            ("saturation_mW_cm2", sp.line.saturation_mw_cm2)]))
    return kvfile.dump(sections)


def save_species_data(species_list, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_species(species_list))

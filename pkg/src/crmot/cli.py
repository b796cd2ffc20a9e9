"""Command-line front end: ``crmot <command> --scenario FILE [--out FILE] [--seed N]``.

Exit status: 0 on success, 1 on invalid input (scenario, data file,
arguments), 2 on a numerical failure (integration, eigenstate tracking,
non-converged fit).
"""

import argparse
import csv
import io
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import kvfile
from .atomic import species_by_name
from .estimation import (FitDomainError, add_noise, fit_interspecies, fit_linear_loading,
                         fit_tof_temperature, fit_two_body_decay)
from .pumping import PumpingSystem, StepSizeError, propagate_along, slowing_window
from .scenario import COMMANDS, FIT_MODELS, ScenarioError, parse_scenario, with_override
from .slower import (BeamSource, DomainError, SlowingBeam, capture_fraction, capture_velocity,
                     integrate_trajectory)
from .structure import TrackingError, eigenlevels, find_crossing
from .trap import IntegrationError, integrate_schedule, steady_state, tof_width

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(RuntimeError):
    pass


class Result:
    """Tabular artifact plus a flat summary record."""

    def __init__(self, columns=(), rows=(), comments=(), summary=None, text=None):
        self.columns = list(columns)
        self.rows = rows
        self.comments = list(comments)
        self.summary = summary or {}
        self.text = text  # preformatted record (fit)


def fmt(x):
    """Scientific notation with 9 significant digits; strings pass through."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    return format(float(x), ".8e")


def render_csv(result, header):
    buf = io.StringIO()
    for line in [header] + result.comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def render_record(summary):
    return "".join(f"{k} = {fmt(v)}\n" for k, v in summary.items())


def short(name):
    return name.replace("Cr", "")


def _need(sc, attr, section):
    if getattr(sc, attr) is None:
        raise ScenarioError(f"this command needs a [{section}] section", None, sc.path)
    return getattr(sc, attr)


# ----------------------------------------------------------------- commands

def run_structure(sc, seed, **_):
    spec = _need(sc, "structure", "structure")
    sp = species_by_name(spec.species)
    level = sp.level(spec.level)
    n = int(round((spec.b_stop - spec.b_start) / spec.b_step))
    grid = spec.b_start + spec.b_step * np.arange(n + 1)
    sets = eigenlevels(level, sp.I, grid, nuclear_g=sp.nuclear_g)
    rows = [(s.b_gauss, str(lab), s.energies[k]) for s in sets for k, lab in enumerate(s.labels)]
    comments, summary = [], {}
    for i, (a, b) in enumerate(spec.crossings):
        rep = find_crossing(level, sp.I, a, b, (spec.b_start, spec.b_stop), nuclear_g=sp.nuclear_g)
        comments.append(rep.record())
        summary[f"crossing{i}_found"] = bool(rep.found)
        summary[f"crossing{i}_B_G"] = np.nan if rep.b_crossing is None else rep.b_crossing
    return Result(("B_G", "state_label", "energy_MHz"), rows, comments, summary)


def _capture(sc):
    spec = sc.slower
    sp = species_by_name(spec.species)
    vc = capture_velocity(sp, spec.profile, spec.beam)
    frac = capture_fraction(BeamSource(spec.oven_temperature, sp), vc)
    return vc, frac


def run_slower(sc, seed, capture=False, **_):
    spec = _need(sc, "slower", "slower")
    sp = species_by_name(spec.species)
    tr = integrate_trajectory(spec.v0, sp, spec.profile, spec.beam)
    rows = list(zip(tr.z, tr.v, tr.t, tr.scatter_rate))
    summary = {"v0_m_s": spec.v0, "exit_velocity_m_s": tr.exit_velocity, "captured": tr.captured,
               "photons": tr.photons, "slow_length_m": spec.profile.slow_length}
    if capture:
        vc, frac = _capture(sc)
        summary.update(capture_velocity_m_s=vc, capture_fraction=frac)
    return Result(("z_m", "v_mps", "t_s", "scatter_rate"), rows, [], summary)


def run_pump(sc, seed, **_):
    spec = _need(sc, "pump", "pump")
    slow = _need(sc, "slower", "slower")
    sp = species_by_name(spec.species)
    beams = [sc.beams[n] for n in spec.beams]
    main = beams[0]
    profile = slow.profile
    tr = integrate_trajectory(spec.v0, sp, profile, SlowingBeam(detuning=main.detuning, intensity=main.intensity))
    system = PumpingSystem(sp, beams)
    _, z1, z2, z3 = profile.boundaries
    esc = profile.deceleration / slowing_window(sp, main.intensity)
    res = propagate_along(system, tr, system.initial(spec.initial), z_range=(0.0, z3), escape_rate=esc,
                          escape_range=(z1, z2), boundaries=(z1,), record=True)
    labels = list(system.labels)
    pick = [labels.index(l) for l in spec.labels] if spec.labels else list(range(len(labels)))
    for l in spec.labels:
        if l not in labels:
            raise ScenarioError(f"{sp.name} ground level has no state {l}", None, sc.path)
    n = len(labels)
    rows = [(z,) + tuple(h[k] for k in pick) + (h[n], h[n + 1]) for z, h in zip(res.z, res.history)]
    cols = ["z_m"] + [f"P[{labels[k]}]" for k in pick] + ["dark", "leaked"]
    p = res.populations
    summary = {"stretched_fraction": p.fraction(system.stretched), "dark_fraction": p.dark,
               "leaked_fraction": p.leaked,
               "branching_fraction": res.boundary_fractions.get(z1, np.nan),
               "captured": tr.captured}
    return Result(cols, rows, [f"species={sp.name} v0={spec.v0:g} m/s initial={spec.initial}"], summary)


def _mot_curve(sc, seed):
    model = _need(sc, "mot", "mot NAME")
    sched = _need(sc, "schedule", "schedule")
    points = 2001
    for sec in sc.sections:
        if sec.name == "schedule" and sec.get("points"):
            points = int(float(sec.get("points").value))
    try:
        curve = integrate_schedule(model, sched, points=points, detection=sc.detection or None)
    except IntegrationError as exc:
        raise NumericalFailure(str(exc)) from None
    signal = curve.signal if curve.signal is not None else np.zeros_like(curve.t)
    if sc.signal_noise > 0 and curve.signal is not None:
        signal = add_noise(signal, sc.signal_noise, seed)
    return model, sched, curve, signal


def run_mot(sc, seed, **_):
    model, sched, curve, signal = _mot_curve(sc, seed)
    zero = np.zeros_like(curve.t)
    cols = {"N52": curve.ground.get("52Cr", zero), "N53": curve.ground.get("53Cr", zero),
            "Nm52": curve.reservoir.get("52Cr", zero), "Nm53": curve.reservoir.get("53Cr", zero)}
    rows = list(zip(curve.t, cols["N52"], cols["N53"], cols["Nm52"], cols["Nm53"], signal))
    comments = [] if sc.detection else ["signal column is zero: no [detection NAME] section"]
    summary = {}
    ss = steady_state(model, mot_on=sched.mot_on, red_on=sched.red_on, shutter_open=sched.shutter_open)
    for name in model.names:
        s = short(name)
        summary[f"N{s}_final"] = curve.ground[name][-1]
        summary[f"N{s}_min"] = float(np.min(curve.ground[name]))
        summary[f"N{s}_max"] = float(np.max(curve.ground[name]))
        summary[f"Nm{s}_final"] = curve.reservoir[name][-1]
        summary[f"N{s}_steady_initial_config"] = ss[name]
    vbar = model.overlap()
    if vbar is not None:
        summary["overlap_volume_cm3"] = vbar
    return Result(("t_s", "N52", "N53", "Nm52", "Nm53", "signal"), rows, comments, summary)


def read_csv_columns(path):
    """Columns of a CSV file (``#`` comment lines skipped) as float arrays."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [l for l in fh if l.strip() and not l.lstrip().startswith("#")]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise ScenarioError("input CSV has no header row", None, path) from None
    data = {h.strip(): [] for h in header}
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise ScenarioError(f"row has {len(row)} fields, header has {len(header)}", lineno, path)
        for h, x in zip(header, row):
            data[h.strip()].append(x)
    out = {}
    for h, vals in data.items():
        try:
            out[h] = np.array([float(v) for v in vals])
        except ValueError:
            out[h] = np.array(vals)
    return out


def _fit_data(sc, spec, seed, model_name, input_path):
    name = spec.species
    if model_name == "tof":
        if input_path:
            cols = read_csv_columns(input_path)
            t = _column(cols, spec.time_column, input_path)
            return t, _column(cols, spec.column or "sigma_um", input_path) * 1e-6
        t = np.linspace(0.0, spec.tof_max, spec.points)
        w = tof_width(spec.sigma0 * 1e-6, spec.temperature * 1e-6, species_by_name(name).mass, t)
        return t, add_noise(w, spec.noise, seed) if spec.noise > 0 else w
    column = spec.column or f"N{short(name)}"
    if input_path:
        cols = read_csv_columns(input_path)
        t, y = _column(cols, spec.time_column, input_path), _column(cols, column, input_path)
    else:
        _, _, curve, signal = _mot_curve(sc, seed)
        t = curve.t
        y = signal if column == "signal" else curve.ground[name] if column.startswith("N") and not column.startswith("Nm") \
            else curve.reservoir[name]
        if spec.noise > 0:
            y = add_noise(y, spec.noise, seed)
    if column == "signal":
        det = sc.detection.get(name)
        if det is None:
            raise ScenarioError(f"fitting the signal column needs [detection {name}]", None, sc.path)
        y = det.atoms(y)
    return t, y


def _column(cols, name, path):
    if name not in cols:
        raise ScenarioError(f"input has no column {name!r} (columns: {', '.join(cols)})", None, path)
    return cols[name]


def run_fit(sc, seed, model=None, input_path=None, **_):
    spec = _need(sc, "fit", "fit")
    model_name = model or spec.model
    if model_name not in FIT_MODELS:
        raise ScenarioError(f"unknown fit model {model_name!r}", None, sc.path)
    input_path = input_path or spec.input
    t, y = _fit_data(sc, spec, seed, model_name, input_path)
    name = spec.species
    if model_name == "loading":
        sel = t < spec.t1 if spec.t1 is not None else np.ones(t.shape, bool)
        res = fit_linear_loading(t[sel] - t[0], y[sel])
    elif model_name == "decay":
        mot = _need(sc, "mot", "mot NAME")
        res = fit_two_body_decay(t, y, mot.species[name].cloud.volume)
    elif model_name == "interspecies":
        mot = _need(sc, "mot", "mot NAME")
        nbar = spec.nbar
        if nbar is None:
            other = mot.partner(name)
            if other is None or mot.species[other].held is None:
                raise ScenarioError("interspecies fit needs nbar_cm3 or a held partner species", None, sc.path)
            nbar = mot.species[other].held / mot.overlap()
        pre = t < spec.t1
        load = fit_linear_loading(t[pre] - t[0], y[pre])
        res = fit_interspecies(t, y, spec.t1, spec.t2, nbar, load["gamma"], load["tau"])
        res.meta.update(gamma=load["gamma"], tau=load["tau"], nbar_cm3=float(nbar),
                        loading_converged=bool(load.converged))
        res.converged = res.converged and load.converged
    else:
        res = fit_tof_temperature(t, y, species_by_name(name).mass)
        res.meta.update(temperature_uK=res["temperature"] * 1e6, sigma0_um=res["sigma0"] * 1e6)
    res.meta.update(model=model_name, seed=int(seed), points=int(t.size))
    summary = {k: v for k, v in res.as_dict().items()}
    return Result(summary=summary, text=res.record()), res


def _sweep_point(args):
    sc, title, key, value, command, seed = args
    point = with_override(sc, title, key, value)
    return summarize(point, command, seed)


def summarize(sc, command, seed):
    if command == "fit":
        result, fit = run_fit(sc, seed)
        return result.summary
    kw = {"capture": True} if command == "slower" else {}
    return RUNNERS[command](sc, seed, **kw).summary


def run_sweep(sc, seed, **_):
    spec = _need(sc, "sweep", "sweep")
    # validate every grid point up front so errors exit before any work starts
    points = [with_override(sc, spec.section, spec.key, v) for v in spec.values]
    del points
    jobs = [(sc, spec.section, spec.key, v, spec.command, seed) for v in spec.values]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as ex:
            out = list(ex.map(_sweep_point, jobs))
    else:
        out = [_sweep_point(j) for j in jobs]
    keys = []
    for d in out:
        keys += [k for k in d if k not in keys and not isinstance(d[k], str)]
    rows = [(i, float(v)) + tuple(d.get(k, np.nan) for k in keys) for i, (v, d) in enumerate(zip(spec.values, out))]
    cols = ["index", f"{spec.section}.{spec.key}"] + keys
    return Result(cols, [(str(r[0]),) + r[1:] for r in rows],
                  [f"sweep command={spec.command} points={len(jobs)}"], {"points": len(jobs)})


RUNNERS = {"structure": run_structure, "slower": run_slower, "pump": run_pump, "mot": run_mot,
           "fit": run_fit, "sweep": run_sweep}


# --------------------------------------------------------------------- main

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario file (.scn)")
    common.add_argument("--out", help="output path (default: scenario 'output' key, else stdout)")
    common.add_argument("--seed", type=int, help="RNG seed, unsigned 64-bit (overrides the scenario)")
    common.add_argument("--summary", action="store_true", help="print the summary record")
    p = argparse.ArgumentParser(prog="crmot", description="Chromium slower / pumping / MOT simulations")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "slower":
            sp.add_argument("--capture", action="store_true", help="compute capture velocity and fraction")
        if name == "fit":
            sp.add_argument("--model", choices=FIT_MODELS, help="fit model (overrides the scenario)")
            sp.add_argument("--input", help="CSV with the data to fit (overrides the scenario)")
    return p


def _write(path, text, stdout):
    if path is None:
        stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ScenarioError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
        sc = parse_scenario(args.scenario)
        seed = sc.seed if args.seed is None else args.seed
        kw = {}
        if args.command == "slower":
            kw["capture"] = args.capture
        if args.command == "fit":
            kw.update(model=args.model, input_path=args.input)
        out = RUNNERS[args.command](sc, seed, **kw)
        if args.command == "fit":
            result, fit = out
            header = f"crmot fit scenario={sc.name} seed={seed}"
            _write(args.out or sc.output, f"# {header}\n" + result.text, stdout)
            if not fit.converged:
                stderr.write(f"crmot: fit did not converge: {fit.message}\n")
                return EXIT_NUMERIC
            return EXIT_OK
        header = f"crmot {args.command} scenario={sc.name} seed={seed}"
        dest = args.out or sc.output
        wants_record = args.summary or getattr(args, "capture", False)
        if dest is not None or not wants_record:
            _write(dest, render_csv(out, header), stdout)
        if wants_record:
            stdout.write(f"# {header}\n" + render_record(out.summary))
        return EXIT_OK
    except (kvfile.FormatError, FitDomainError, DomainError, KeyError, ValueError, OSError) as exc:
        stderr.write(f"crmot: error: {exc}\n")
        return EXIT_INVALID
    except (IntegrationError, NumericalFailure, TrackingError, StepSizeError, ArithmeticError,
            np.linalg.LinAlgError, RuntimeError) as exc:
        stderr.write(f"crmot: numerical failure: {exc}\n")
        return EXIT_NUMERIC


def main(argv=None):
    sys.exit(run(argv))

import csv
import io
import re

import numpy as np
import pytest

from crmot.cli import fmt, read_csv_columns, run
from crmot.scenario import (MissingSectionError, ScheduleOrderError, ScenarioError, UnitRangeError,
                            UnknownKeyError, parse_scenario, parse_scenario_text, shipped_scenarios,
                            with_override)

SHIPPED = {p.name[:-4]: str(p) for p in shipped_scenarios()}
FAST = ["boson_mot", "dual_mot_loss", "dual_mot_small", "fermion_reservoir", "fit_two_body",
        "structure_fermion", "tof_boson", "slower_boson"]


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, text, name="s.scn"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


MINIMAL = """[scenario]
name = t
species = 52Cr
command = mot

[mot 52Cr]
loading_rate_1_s = 1e6
tau_s = 0.02

[schedule]
horizon_s = 0.2
points = 201
mot_on = 52Cr
"""


# ------------------------------------------------------------------ scenarios

def test_all_shipped_scenarios_parse():
    assert len(SHIPPED) >= 10
    for name, path in SHIPPED.items():
        sc = parse_scenario(path)
        assert sc.name == name
        assert sc.command is not None


@pytest.mark.parametrize("name", FAST)
def test_shipped_scenario_runs(name, tmp_path):
    sc = parse_scenario(SHIPPED[name])
    out = tmp_path / "o.csv"
    code, _, err = cli(sc.command, "--scenario", SHIPPED[name], "--out", str(out))
    assert code == 0, err
    text = out.read_text()
    assert text.startswith(f"# crmot {sc.command} scenario={name} seed=")


def test_pump_and_sweep_scenarios_run(tmp_path):
    code, out, err = cli("pump", "--scenario", SHIPPED["pumping_fermion"], "--summary")
    assert code == 0, err
    frac = float(re.search(r"branching_fraction = (\S+)", out).group(1))
    assert 0.03 < frac < 0.15
    code, out, err = cli("sweep", "--scenario", SHIPPED["sweep_detuning"])
    assert code == 0, err
    rows = [r for r in csv.reader(l for l in out.splitlines() if not l.startswith("#"))]
    assert rows[0][:2] == ["index", "slower.detuning_MHz"]
    assert [float(r[1]) for r in rows[1:]] == [-480.0, -450.0, -420.0]
    assert [int(r[0]) for r in rows[1:]] == [0, 1, 2]
    vc = [float(r[rows[0].index("capture_velocity_m_s")]) for r in rows[1:]]
    assert vc[0] > vc[1] > vc[2]


def test_sweep_serial_equals_parallel(tmp_path):
    text = open(SHIPPED["sweep_detuning"]).read()
    serial = write(tmp_path, text.replace("workers = 2", "workers = 1"), "a.scn")
    parallel = write(tmp_path, text, "b.scn")
    a = cli("sweep", "--scenario", serial)[1]
    b = cli("sweep", "--scenario", parallel)[1]
    strip = lambda s: "\n".join(l for l in s.splitlines() if not l.startswith("# crmot"))
    assert strip(a) == strip(b)


def test_default_gradient(tmp_path):
    sc = parse_scenario_text(MINIMAL)
    assert sc.gradient == 18.0
    assert sc.seed == 0


def test_override_rebuilds():
    sc = parse_scenario(SHIPPED["slower_boson"])
    sc2 = with_override(sc, "slower", "detuning_MHz", -400.0)
    assert sc2.slower.beam.detuning == -400.0
    assert sc.slower.beam.detuning == -450.0


# ------------------------------------------------------------------ parse errors

def test_unknown_key_cites_line(tmp_path):
    bad = MINIMAL.replace("tau_s = 0.02", "tau_s = 0.02\nlifetime = 3")
    with pytest.raises(UnknownKeyError, match=r":9: .*lifetime"):
        parse_scenario(write(tmp_path, bad))


def test_unknown_section(tmp_path):
    with pytest.raises(UnknownKeyError, match="unknown section"):
        parse_scenario_text(MINIMAL + "\n[oven]\nx = 1\n")


def test_unit_range_error():
    with pytest.raises(UnitRangeError, match="tau_s"):
        parse_scenario_text(MINIMAL.replace("tau_s = 0.02", "tau_s = -1"))
    with pytest.raises(UnitRangeError, match="not a number"):
        parse_scenario_text(MINIMAL.replace("tau_s = 0.02", "tau_s = fast"))


def test_schedule_disorder_names_both_times():
    text = MINIMAL + "event = 0.15 mot 52Cr off\nevent = 0.05 mot 52Cr on\n"
    with pytest.raises(ScheduleOrderError) as info:
        parse_scenario_text(text)
    msg = str(info.value)
    assert "0.05" in msg and "0.15" in msg


def test_same_time_events_merge():
    text = MINIMAL + "event = 0.1 mot 52Cr off\nevent = 0.1 red 52Cr on\n"
    sc = parse_scenario_text(text)
    assert len(sc.schedule.events) == 1
    assert len(sc.schedule.events[0].changes) == 2


def test_empty_file_lists_required_sections():
    with pytest.raises(MissingSectionError, match=r"\[scenario\]"):
        parse_scenario_text("")
    with pytest.raises(MissingSectionError, match=r"\[scenario\]"):
        parse_scenario_text("[mot 52Cr]\ntau_s = 1\n")


def test_unknown_species():
    with pytest.raises(ScenarioError, match="54Cr"):
        parse_scenario_text(MINIMAL.replace("species = 52Cr", "species = 54Cr"))


def test_power_without_waist():
    text = MINIMAL + "\n[slower]\nspecies = 52Cr\npower_mW = 3\n"
    with pytest.raises(ScenarioError, match="waist"):
        parse_scenario_text(text)


# ------------------------------------------------------------------ CLI behaviour

def test_exit_code_validation(tmp_path):
    code, _, err = cli("mot", "--scenario", write(tmp_path, MINIMAL.replace("tau_s = 0.02", "tau_s = 0")))
    assert code == 1
    assert "tau_s" in err
    assert cli("mot", "--scenario", str(tmp_path / "missing.scn"))[0] == 1
    assert cli("nonsense")[0] == 1
    # command needs a section the scenario lacks
    assert cli("slower", "--scenario", write(tmp_path, MINIMAL))[0] == 1


def test_exit_code_fit_not_identifiable(tmp_path):
    data = tmp_path / "flat.csv"
    data.write_text("t_s,N52\n" + "".join(f"{0.001 * i},{5e5}\n" for i in range(100)))
    text = MINIMAL + "\n[fit]\nmodel = loading\nspecies = 52Cr\ncolumn = N52\n"
    code, _, err = cli("fit", "--scenario", write(tmp_path, text), "--input", str(data))
    assert code == 2
    assert "not identifiable" in err


def test_fit_from_mot_csv(tmp_path):
    path = write(tmp_path, MINIMAL)
    csv_out = tmp_path / "load.csv"
    assert cli("mot", "--scenario", path, "--out", str(csv_out))[0] == 0
    text = MINIMAL + "\n[fit]\nmodel = loading\nspecies = 52Cr\ncolumn = N52\n"
    code, out, err = cli("fit", "--scenario", write(tmp_path, text, "f.scn"), "--input", str(csv_out))
    assert code == 0, err
    gamma = float(re.search(r"^gamma = (\S+)", out, re.M).group(1))
    assert gamma == pytest.approx(1e6, rel=1e-4)


def test_mot_dip_between_switch_times(tmp_path):
    out = tmp_path / "dual.csv"
    assert cli("mot", "--scenario", SHIPPED["dual_mot_loss"], "--out", str(out))[0] == 0
    cols = read_csv_columns(str(out))
    t, n = cols["t_s"], cols["N52"]
    before = n[np.searchsorted(t, 0.299)]
    during = n[(t > 0.5) & (t < 0.6)]
    after = n[-1]
    assert during.max() < before
    assert after == pytest.approx(before, rel=1e-3)
    assert set(np.unique(cols["N53"])) == {0.0, 7e5}


def test_number_format_and_seed_header(tmp_path):
    out = tmp_path / "o.csv"
    assert cli("mot", "--scenario", SHIPPED["boson_mot"], "--seed", "17", "--out", str(out))[0] == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# crmot mot scenario=boson_mot seed=17"
    row = next(l for l in lines if not l.startswith("#") and not l.startswith("t_s"))
    for field in row.split(","):
        mant = field.split("e")[0].lstrip("-").replace(".", "")
        assert len(mant) == 9
    assert fmt(1 / 3) == "3.33333333e-01"
    assert fmt(True) == "1"


def test_reruns_byte_identical_and_seed_changes_noise(tmp_path):
    a, b, c = (tmp_path / f"{k}.csv" for k in "abc")
    for p, seed in ((a, "3"), (b, "3"), (c, "4")):
        assert cli("mot", "--scenario", SHIPPED["dual_mot_loss"], "--seed", seed, "--out", str(p))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    sig = lambda p: read_csv_columns(str(p))["signal"]
    assert not np.array_equal(sig(a), sig(c))
    np.testing.assert_array_equal(read_csv_columns(str(a))["N52"], read_csv_columns(str(c))["N52"])


def test_seed_range():
    assert cli("mot", "--scenario", SHIPPED["boson_mot"], "--seed", "-1")[0] == 1


def test_summary_only_prints_record():
    code, out, _ = cli("structure", "--scenario", SHIPPED["structure_fermion"], "--summary")
    assert code == 0
    assert "B_G" not in out.splitlines()[1]
    b = float(re.search(r"crossing0_B_G = (\S+)", out).group(1))
    assert 20 < b < 30


def test_structure_csv_long_format():
    code, out, _ = cli("structure", "--scenario", SHIPPED["structure_fermion"])
    assert code == 0
    rows = [r for r in csv.reader(l for l in out.splitlines() if not l.startswith("#"))]
    assert rows[0] == ["B_G", "state_label", "energy_MHz"]
    # 7P4 with I = 3/2: 36 states on 201 fields
    assert len(rows) - 1 == 36 * 201


def test_slower_capture_flag():
    code, out, _ = cli("slower", "--scenario", SHIPPED["slower_boson"], "--capture")
    assert code == 0
    vc = float(re.search(r"capture_velocity_m_s = (\S+)", out).group(1))
    assert vc == pytest.approx(460, rel=0.05)


def test_fit_interspecies_from_scenario():
    code, out, err = cli("fit", "--scenario", SHIPPED["dual_mot_loss"])
    assert code == 0, err
    beta = float(re.search(r"^beta_bf = (\S+)", out, re.M).group(1))
    assert beta == pytest.approx(1.8e-9, rel=0.10)

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from escdys.cli import experiment, io
from escdys.cli.config import (ExperimentConfig, GridConfig, InitConfig, ModelConfig,
                               SplittingConfig, StepConfig, StopConfig, emit, load, parse)
from escdys.cli.initial import CIRCLE_WIDTH, make_initial
from escdys.cli.main import main
from escdys.errors import ConfigurationError, StructuralError
from escdys.grid import GridSpec

SMALL = """
grid.m = 32
model.kind = isotropic
splitting.eps = 0.1
stop.max_iter = 20000
output.kkt_every = 0
gradflow.record_every = 1
"""


def write_config(tmp_path, text=SMALL, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# ---------------------------------------------------------------- configuration


def test_defaults():
    c = ExperimentConfig()
    assert (c.grid.m, c.step.tau0, c.splitting.a, c.splitting.b, c.step.c0, c.step.c1, c.stop.tol) == \
        (256, 1.0, 10.0, 2.0, 1.0, 10.0, 1e-8)
    assert c.splitting.use_truncated and c.splitting.M == 1.0
    assert (c.gradflow.beta, c.gradflow.dt) == (1e-4, 1e-3)


@settings(max_examples=50, deadline=None)
@given(m=st.integers(2, 512), eps=st.floats(1e-4, 1.0), tau0=st.floats(1e-6, 10.0),
       kind=st.sampled_from(["isotropic", "fourfold", "kfold", "riemannian", "ellipsoidal"]),
       seed=st.integers(0, 2 ** 64 - 1), trunc=st.booleans(),
       deltas=st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=4))
def test_round_trip(m, eps, tau0, kind, seed, trunc, deltas):
    c = ExperimentConfig(grid=GridConfig(2, m),
                         model=ModelConfig(kind=kind, deltas=tuple(deltas), psis=tuple(range(len(deltas)))),
                         splitting=SplittingConfig(eps=eps, use_truncated=trunc),
                         step=StepConfig(tau0=tau0), init=InitConfig("random", seed))
    c = dataclasses.replace(c, model=dataclasses.replace(c.model, psis=tuple(float(p) for p in c.model.psis)))
    assert parse(emit(c)) == c


def test_parse_comments_and_errors(tmp_path):
    c = parse("# comment\n\ngrid.m = 64  # trailing\nsplitting.use_truncated = false\n")
    assert c.grid.m == 64 and not c.splitting.use_truncated
    for bad in ("grid.q = 1", "nosuch.m = 1", "grid.m = abc", "gridm = 3", "grid.m", "model.kind = hexagonal",
                "init.seed = -1", "output.record_every = 0"):
        with pytest.raises(ConfigurationError):
            parse(bad)
    with pytest.raises(ConfigurationError):
        load(tmp_path / "missing.cfg")


def test_builders():
    c = parse("model.kind = kfold\nmodel.k = 6\nmodel.alpha = 0.4")
    assert c.build_model().k == 6
    with pytest.raises(ConfigurationError):
        parse("grid.dim = 3\nmodel.kind = kfold").build_model()
    with pytest.raises(ConfigurationError):
        parse("model.kind = ellipsoidal").build_model()  # 9 entries on a 2D grid
    assert parse("grid.dim = 3\nmodel.kind = ellipsoidal").build_model().dim == 3
    with pytest.raises(ConfigurationError):
        parse("model.alpha = 2.0").build_model()


# ---------------------------------------------------------------- initial fields


def test_circle_initial():
    spec = GridSpec(2, 256)
    phi = make_initial("circle", spec, 0.02)
    # no node sits on the centre; the closest ones are h / sqrt(2) away
    r_min = spec.h / np.sqrt(2)
    assert phi.max() == pytest.approx(-np.tanh((r_min - 0.3) / CIRCLE_WIDTH), abs=1e-15)
    assert 1 - phi.max() == pytest.approx(1.4896e-9, rel=1e-3)
    # independent of eps
    np.testing.assert_array_equal(phi, make_initial("circle", spec, 0.08))


def test_random_initial_deterministic():
    spec = GridSpec(2, 64)
    a = make_initial("random", spec, 0.02, seed=42)
    b = make_initial("random", spec, 0.02, seed=42)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, make_initial("random", spec, 0.02, seed=43))
    assert a.min() >= -0.5 and a.max() <= -0.499
    # the documented generator: PCG64 seeded with the u64 seed, uniform doubles
    ref = -0.5 + 1e-3 * np.random.Generator(np.random.PCG64(42)).random(spec.shape)
    assert a.tobytes() == ref.tobytes()


def test_two_circles_mass():
    spec = GridSpec(2, 256)
    eps = 0.02
    phi = make_initial("two_circles", spec, eps)
    target = 2 * (np.pi * 0.25 ** 2 + np.pi * 0.16 ** 2) - 1
    assert abs(phi.sum() * spec.h ** 2 - target) <= 2 * np.pi * (0.25 + 0.16) * eps


def test_ball_initial():
    spec = GridSpec(3, 32)
    phi = make_initial("ball", spec, 0.05)
    assert phi.shape == (32, 32, 32) and phi[16, 16, 16] > 0.99 and phi[0, 0, 0] < -0.99


@pytest.mark.parametrize("kind,dim", [("circle", 3), ("two_circles", 3), ("ball", 2), ("square", 2)])
def test_initial_kind_mismatch(kind, dim):
    with pytest.raises(ConfigurationError):
        make_initial(kind, GridSpec(dim, 8), 0.1)


# ---------------------------------------------------------------- file formats


def test_snapshot_format(tmp_path, rng):
    phi = rng.normal(size=(16, 16))
    path = tmp_path / "f.f64"
    io.write_field(path, phi, 1234)
    raw = path.read_bytes()
    assert len(raw) == 32 + 16 * 16 * 8
    assert raw[:32] == b"esc-field 2 16 1234".ljust(31) + b"\n"
    assert np.frombuffer(raw[32:], dtype="<f8").tobytes() == phi.astype("<f8").tobytes()
    back, it = io.read_field(path)
    assert it == 1234 and np.array_equal(back, phi)
    (tmp_path / "bad.f64").write_bytes(b"nonsense" * 8)
    with pytest.raises(StructuralError):
        io.read_field(tmp_path / "bad.f64")
    with pytest.raises(StructuralError):
        io.write_field(path, np.zeros((4, 5)), 0)


def test_table_cells(tmp_path):
    io.write_table(tmp_path / "t.csv", ("a", "b", "c", "d"), [(1, 0.1, float("nan"), True)])
    assert (tmp_path / "t.csv").read_text() == "a,b,c,d\n1,0.1,,1\n"


# ---------------------------------------------------------------- verbs


def test_solve_outputs_and_determinism(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL + "output.snapshot_every = 50\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "b"), "--quiet"]) == 0
    out = capsys.readouterr().out
    assert "converged = true" in out
    a, b = tmp_path / "a", tmp_path / "b"
    names = sorted(p.name for p in a.iterdir())
    for required in ("config.txt", "diagnostics.csv", "summary.txt", "contour.csv", "orientation.csv",
                     "field_0.f64", "field_50.f64"):
        assert required in names
    for name in names:
        if name != "config.txt":
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
    header = (a / "diagnostics.csv").read_text().splitlines()[0]
    assert header == "iter,tau,energy_raw,energy_scaled,theta,mass_rel,z_min,z_max,step_norm,kkt,wall_s"
    data = np.genfromtxt(a / "diagnostics.csv", delimiter=",", names=True)
    assert np.all(data["z_min"] >= -1) and np.all(data["z_max"] <= 1)
    assert np.all(np.abs(data["mass_rel"]) <= 1e-13)
    summary = io.read_summary(a / "summary.txt")
    final = [p for p in names if p.startswith("field_") and p != "field_0.f64"]
    assert f"field_{summary['iterations']}.f64" in final
    # the resolved config is recorded and reloads to the same run
    assert load(a / "config.txt").grid.m == 32


def test_seed_flag_changes_random_runs(tmp_path):
    text = SMALL + "init.kind = random\nstop.max_iter = 3\n"
    cfg = write_config(tmp_path, text)
    main(["solve", "--config", cfg, "--out", str(tmp_path / "s1"), "--seed", "1", "--quiet"])
    main(["solve", "--config", cfg, "--out", str(tmp_path / "s2"), "--seed", "2", "--quiet"])
    main(["solve", "--config", cfg, "--out", str(tmp_path / "s1b"), "--seed", "1", "--quiet"])
    f1, f2, f1b = (io.read_field(tmp_path / d / "field_0.f64")[0] for d in ("s1", "s2", "s1b"))
    assert np.array_equal(f1, f1b) and not np.array_equal(f1, f2)
    assert load(tmp_path / "s2" / "config.txt").init.seed == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_exit_codes(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["solve", "--config", write_config(tmp_path, SMALL + "stop.max_iter = 3\n", "short.cfg"),
                 "--out", str(tmp_path / "nc"), "--quiet"]) == 2
    assert main(["frobnicate"]) == 1
    assert main(["solve", "--bogus"]) == 1
    assert main(["solve", "--config", write_config(tmp_path, "grid.q = 3", "bad.cfg")]) == 1
    assert main(["solve", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["wulff", "--config", write_config(tmp_path, "grid.dim = 3\nmodel.kind = ellipsoidal\n"
                                                                "init.kind = ball", "w3.cfg"),
                 "--out", str(tmp_path / "w3")]) == 1
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["solve", "--config", cfg, "--out", str(blocker / "sub"), "--quiet"]) == 3
    assert main(["gradflow", "--config", write_config(tmp_path, SMALL + "gradflow.dt = 1e9\n"
                                                      "gradflow.a_s = 0\ngradflow.b_s = 0\n"
                                                      "gradflow.beta = 0\n", "blow.cfg"),
                 "--out", str(tmp_path / "blow"), "--quiet"]) == 3


def test_gradflow_verb(tmp_path):
    cfg = write_config(tmp_path, SMALL + "gradflow.tol = 1e-6\n")
    assert main(["gradflow", "--config", cfg, "--out", str(tmp_path / "g"), "--quiet"]) == 0
    s = io.read_summary(tmp_path / "g" / "summary.txt")
    assert s["solver"] == "gradflow" and s["converged"] == "true"
    assert (tmp_path / "g" / "contour.csv").exists()


def test_wulff_verb(tmp_path, capsys):
    cfg = write_config(tmp_path, "grid.m = 64\nmodel.kind = fourfold\nmodel.alpha = 0.2\n")
    assert main(["wulff", "--config", cfg, "--out", str(tmp_path / "w")]) == 0
    table = np.genfromtxt(tmp_path / "w" / "wulff.csv", delimiter=",", names=True)
    assert int(table["corner"].sum()) == 4
    iso = write_config(tmp_path, "grid.m = 64\nmodel.kind = isotropic\n", "iso.cfg")
    assert main(["wulff", "--config", iso, "--out", str(tmp_path / "wi"), "--area", "0.2"]) == 0
    table = np.genfromtxt(tmp_path / "wi" / "wulff.csv", delimiter=",", names=True)
    assert table["corner"].sum() == 0
    area = 0.5 * (np.sum(table["x"] * np.roll(table["y"], -1) - np.roll(table["x"], -1) * table["y"]))
    assert area == pytest.approx(0.2, rel=1e-6)
    # distance of the Wulff polygon to itself through the distance verb
    capsys.readouterr()
    wcsv = str(tmp_path / "wi" / "wulff.csv")
    assert main(["distance", wcsv, wcsv]) == 0
    assert float(capsys.readouterr().out.split("=")[1]) <= 1e-12
    assert main(["wulff", "--config", iso, "--out", str(tmp_path / "wj"), "--area", "0.2",
                 "--contour", wcsv]) == 0
    assert float(io.read_summary(tmp_path / "wj" / "wulff_summary.txt")["manifold_distance"]) <= 1e-12


def test_distance_verb_errors(tmp_path):
    assert main(["distance", str(tmp_path / "nope.csv"), str(tmp_path / "nope.csv")]) == 1


def test_compare_verb(tmp_path):
    text = SMALL.replace("isotropic", "fourfold") + "gradflow.tol = 1e-6\noutput.kkt_every = 50\n"
    cfg = write_config(tmp_path, text)
    code = main(["compare", "--config", cfg, "--out", str(tmp_path / "c"), "--quiet"])
    assert code in (0, 2)
    base = tmp_path / "c"
    lines = (base / "compare.csv").read_text().splitlines()
    assert lines[0] == "solver,iter,wall_s,kkt,energy_scaled"
    assert {l.split(",")[0] for l in lines[1:]} == {"dys", "gradflow"}
    assert (base / "dys" / "diagnostics.csv").exists() and (base / "gradflow" / "diagnostics.csv").exists()
    for name in ("dys", "gradflow"):
        prof = np.genfromtxt(base / f"corner_{name}.csv", delimiter=",", names=True)
        assert len(prof) > 10 and np.all(np.diff(prof["arclength"]) > 0)
    s = io.read_summary(base / "summary.txt")
    assert "corner_width_dys" in s and "energy_gradflow" in s
    other = write_config(tmp_path, text.replace("grid.m = 32", "grid.m = 16"), "other.cfg")
    assert main(["compare", "--config", cfg, "--gf-config", other, "--out", str(tmp_path / "x")]) == 1
    with pytest.raises(experiment.ComparisonError):
        experiment.compare(load(cfg), load(other))


def test_run_many(tmp_path):
    base = load(write_config(tmp_path, SMALL + "stop.max_iter = 40\n"))
    configs = [dataclasses.replace(base, output=dataclasses.replace(base.output, directory=str(tmp_path / f"r{i}")),
                                   splitting=dataclasses.replace(base.splitting, eps=e))
               for i, e in enumerate((0.1, 0.12, 0.14))]
    par = experiment.run_many(configs, workers=2)
    seq = [experiment.solve(dataclasses.replace(c, output=dataclasses.replace(
        c.output, directory=c.output.directory + "s"))) for c in configs]
    for p, s in zip(par, seq):
        assert p.field.tobytes() == s.field.tobytes()
    with pytest.raises(ConfigurationError):
        experiment.run_many([configs[0], configs[0]])

import csv
import functools
import hashlib

import numpy as np
import pytest

from hno import cli, datagen
from hno import operator as op
from hno import training


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


# --- config parsing -------------------------------------------------------------------------


def test_read_config(tmp_path):
    p = write(tmp_path / "c.cfg", "# comment\nseed = 3   # trailing\n\n  width=8\n")
    assert cli.read_config(p) == {"seed": "3", "width": "8"}
    with pytest.raises(cli.ConfigError, match="c2.cfg:1"):
        cli.read_config(write(tmp_path / "c2.cfg", "no equals sign\n"))
    with pytest.raises(cli.ConfigError, match="duplicate"):
        cli.read_config(write(tmp_path / "c3.cfg", "a=1\na=2\n"))


def test_typed_config():
    schema = {"seed": int, "lr": float, "flag": bool, "modes": "ints", "kind": str}
    cfg = cli.typed_config({"seed": "4", "lr": "1e-3", "flag": "yes", "modes": "12, 10", "kind": "hno"}, schema)
    assert cfg == {"seed": 4, "lr": 1e-3, "flag": True, "modes": (12, 10), "kind": "hno"}
    with pytest.raises(cli.ConfigError, match="bogus"):
        cli.typed_config({"bogus": "1"}, schema)
    with pytest.raises(cli.ConfigError, match="seed"):
        cli.typed_config({"seed": "four"}, schema)
    with pytest.raises(cli.ConfigError, match="seed"):
        cli.typed_config({}, schema, required=("seed",))


# --- gen-data -----------------------------------------------------------------------------------


def test_gen_data_burgers_defaults(tmp_path, capsys):
    cfg = write(tmp_path / "burgers.cfg", "seed = 0\n")
    out = tmp_path / "data" / "burgers.nopd"
    code, text, _ = run(capsys, "gen-data", "burgers1d", "--config", cfg, "--out", out)
    assert code == 0
    pair = datagen.read_dataset(out)
    assert pair.inputs.shape == (320, 256, 1)
    assert "samples=320" in text and "resolution=256" in text and "seed=0" in text and "time=" in text


def test_gen_data_missing_seed(tmp_path, capsys):
    cfg = write(tmp_path / "c.cfg", "n_samples = 2\n")
    code, _, err = run(capsys, "gen-data", "lorenz63", "--config", cfg, "--out", tmp_path / "x.nopd")
    assert code == 2 and "seed" in err
    assert not (tmp_path / "x.nopd").exists()


@pytest.mark.parametrize("dt", ["0", "-0.01"])
def test_gen_data_lorenz_bad_dt(dt, tmp_path, capsys):
    cfg = write(tmp_path / "c.cfg", f"seed = 1\ndt = {dt}\n")
    code, _, err = run(capsys, "gen-data", "lorenz63", "--config", cfg, "--out", tmp_path / "x.nopd")
    assert code == 2 and "dt" in err


def test_gen_data_unknown_key_and_seed_flag(tmp_path, capsys):
    cfg = write(tmp_path / "c.cfg", "n_samples = 2\nresolution = 8\nviscosity = 0.1\n")
    code, _, err = run(capsys, "gen-data", "darcy2d", "--config", cfg, "--out", tmp_path / "x.nopd", "--seed", 3)
    assert code == 2 and "viscosity" in err
    write(cfg, "n_samples = 2\nresolution = 8\n")
    code, text, _ = run(capsys, "gen-data", "darcy2d", "--config", cfg, "--out", tmp_path / "x.nopd", "--seed", 3)
    assert code == 0 and "seed=3" in text
    assert datagen.read_dataset(tmp_path / "x.nopd").metadata["seed"] == "3"


def test_gen_data_generation_failure(tmp_path, capsys, monkeypatch):
    @functools.wraps(datagen.make_darcy_dataset)
    def boom(**kw):
        raise datagen.SolverError("CG did not converge")

    monkeypatch.setitem(cli.GENERATORS, "darcy2d", boom)
    cfg = write(tmp_path / "c.cfg", "seed = 1\n")
    code, _, err = run(capsys, "gen-data", "darcy2d", "--config", cfg, "--out", tmp_path / "x.nopd")
    assert code == 3 and "CG" in err


def test_usage_errors(capsys):
    assert cli.main(["gen-data", "navier-stokes"]) == 2
    assert cli.main([]) == 2
    capsys.readouterr()


# --- train / eval ---------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "b.nopd"
    datagen.write_dataset(datagen.make_burgers_dataset(n_samples=20, resolution=32, seed=2), path)
    return path


def train_cfg(tmp_path, dataset, name="t.cfg", **extra):
    base = dict(seed=1, dataset=dataset, epochs=3, width=6, n_layers=2, modes=5, proj_width=8, record_wall_time="false")
    base.update(extra)
    return write(tmp_path / name, "".join(f"{k} = {v}\n" for k, v in base.items()))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_train_hno_and_fno_reports(tmp_path, capsys, small_dataset):
    before = digest(small_dataset)
    for kind in ("hno", "fno"):
        cfg = train_cfg(tmp_path, small_dataset, f"{kind}.cfg", layer_kind=kind)
        code, text, _ = run(capsys, "train", "--config", cfg, "--out", tmp_path / "run")
        assert code == 0
        assert f"final validation relative L2 ({kind})" in text
        rows = read_csv(tmp_path / "run" / f"{kind}_report.csv")
        assert rows[0] == ["epoch", "train_loss", "val_rel_l2", "seconds"] and len(rows) == 4
        params = op.load_checkpoint(tmp_path / "run" / f"{kind}_checkpoint.hnom")
        assert params.config.layer_kind == kind
    assert digest(small_dataset) == before


def test_train_zero_learning_rate_is_flat(tmp_path, capsys, small_dataset):
    cfg = train_cfg(tmp_path, small_dataset, learning_rate=0)
    assert run(capsys, "train", "--config", cfg, "--out", tmp_path)[0] == 0
    vals = {r[2] for r in read_csv(tmp_path / "hno_report.csv")[1:]}
    assert len(vals) == 1


def test_train_twice_gives_identical_csv(tmp_path, capsys, small_dataset):
    blobs = []
    for i in range(2):
        cfg = train_cfg(tmp_path, small_dataset)
        assert run(capsys, "train", "--config", cfg, "--out", tmp_path / f"r{i}")[0] == 0
        blobs.append((tmp_path / f"r{i}" / "hno_report.csv").read_bytes())
    assert blobs[0] == blobs[1]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_divergence_exit_code(tmp_path, capsys, small_dataset):
    cfg = train_cfg(tmp_path, small_dataset, epochs=30, learning_rate=1e4, normalize="false")
    code, _, err = run(capsys, "train", "--config", cfg, "--out", tmp_path)
    assert code == 3 and "diverged" in err
    rows = read_csv(tmp_path / "hno_report.csv")
    assert rows[0][0] == "epoch" and len(rows) - 1 < 30
    summary = dict(read_csv(tmp_path / "hno_report_summary.csv")[1:])
    assert summary["diverged"] == "1"


def test_train_config_errors(tmp_path, capsys, small_dataset):
    cfg = train_cfg(tmp_path, small_dataset, epochs=0)
    assert run(capsys, "train", "--config", cfg)[0] == 2
    cfg = train_cfg(tmp_path, small_dataset, layer_kind="wno")
    assert run(capsys, "train", "--config", cfg)[0] == 2
    cfg = train_cfg(tmp_path, tmp_path / "missing.nopd")
    assert run(capsys, "train", "--config", cfg)[0] == 2


def test_eval_validation_split_matches_report(tmp_path, capsys, small_dataset):
    cfg = train_cfg(tmp_path, small_dataset, epochs=4)
    assert run(capsys, "train", "--config", cfg, "--out", tmp_path)[0] == 0
    final = float(dict(read_csv(tmp_path / "hno_report_summary.csv")[1:])["final_val_rel_l2"])
    ckpt = tmp_path / "hno_checkpoint.hnom"
    before = digest(ckpt)
    code, text, _ = run(
        capsys, "eval", "--checkpoint", ckpt, "--dataset", small_dataset, "--split", "val",
        "--config", cfg, "--out", tmp_path / "m.csv", "--dump-predictions", tmp_path / "pred.nopd",
    )
    assert code == 0 and "mean=" in text and "median=" in text and "max=" in text
    metrics = dict(read_csv(tmp_path / "m.csv")[1:])
    assert abs(float(metrics["mean"]) - final) < 1e-12
    preds = datagen.read_dataset(tmp_path / "pred.nopd")
    assert preds.outputs.shape == (int(metrics["n_samples"]), 32, 1)
    assert digest(ckpt) == before


def test_eval_split_needs_training_config(tmp_path, capsys, small_dataset):
    p = op.init_model(op.ModelConfig(1, 1, (32,), width=4, n_layers=1, modes=4, proj_width=4), 0)
    op.save_checkpoint(p, tmp_path / "m.hnom")
    code, _, err = run(capsys, "eval", "--checkpoint", tmp_path / "m.hnom", "--dataset", small_dataset, "--split", "val")
    assert code == 2 and "--config" in err


def synthetic_pair(n, n_samples=24, seed=0):
    """Band-limited inputs and their Hilbert transforms, sampled on ``n`` points."""
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((n_samples, 5, 2))
    x = np.arange(n) / n
    k = np.arange(1, 6)[:, None]
    v = coef[..., 0] @ np.cos(2 * np.pi * k * x) + coef[..., 1] @ np.sin(2 * np.pi * k * x)
    hv = coef[..., 0] @ np.sin(2 * np.pi * k * x) - coef[..., 1] @ np.cos(2 * np.pi * k * x)
    return datagen.DatasetPair(v[..., None], hv[..., None], "synthetic", {"n": str(n)})


def test_eval_zero_checkpoint_scores_one(tmp_path, capsys):
    pair = synthetic_pair(32)
    datagen.write_dataset(pair, tmp_path / "d.nopd")
    p = op.init_model(op.ModelConfig(1, 1, (32,), width=4, n_layers=1, modes=4, proj_width=4), 0).zeros_like()
    op.save_checkpoint(p, tmp_path / "z.hnom")
    code, text, _ = run(capsys, "eval", "--checkpoint", tmp_path / "z.hnom", "--dataset", tmp_path / "d.nopd")
    assert code == 0
    mean = float(text.split("mean=")[1].split()[0])
    assert abs(mean - 1.0) < 1e-12


def test_eval_shape_mismatch(tmp_path, capsys):
    datagen.write_dataset(synthetic_pair(64), tmp_path / "d64.nopd")
    p = op.init_model(op.ModelConfig(1, 1, (32,), width=4, n_layers=1, modes=4, proj_width=4), 0)
    op.save_checkpoint(p, tmp_path / "m.hnom")
    code, _, err = run(capsys, "eval", "--checkpoint", tmp_path / "m.hnom", "--dataset", tmp_path / "d64.nopd")
    assert code == 2 and "(32,)" in err and "(64,)" in err


def test_resolution_transfer(tmp_path, capsys):
    datagen.write_dataset(synthetic_pair(32, 48), tmp_path / "d32.nopd")
    datagen.write_dataset(synthetic_pair(64, 48), tmp_path / "d64.nopd")
    cfg = train_cfg(tmp_path, tmp_path / "d32.nopd", epochs=25, width=8, modes=8, proj_width=16, learning_rate=3e-3)
    assert run(capsys, "train", "--config", cfg, "--out", tmp_path)[0] == 0
    ckpt = tmp_path / "hno_checkpoint.hnom"

    def mean_err(*extra):
        code, text, _ = run(capsys, "eval", "--checkpoint", ckpt, *extra)
        assert code == 0
        return float(text.split("mean=")[1].split()[0])

    native = mean_err("--dataset", tmp_path / "d32.nopd")
    transfer = mean_err("--dataset", tmp_path / "d64.nopd", "--resolution-transfer", 64)
    assert native < 0.5
    assert transfer < 2 * native
    code, _, err = run(capsys, "eval", "--checkpoint", ckpt, "--dataset", tmp_path / "d64.nopd", "--resolution-transfer", 128)
    assert code == 2 and "128" in err


# --- hilbert-demo ----------------------------------------------------------------------------------


def demo(tmp_path, capsys, t, v):
    src = tmp_path / "in.csv"
    np.savetxt(src, np.c_[t, v], delimiter=",", header="t,v", comments="", fmt="%.17g")
    before = digest(src)
    code, _, _ = run(capsys, "hilbert-demo", src, "--out", tmp_path / "out.csv")
    assert code == 0 and digest(src) == before
    rows = read_csv(tmp_path / "out.csv")
    assert rows[0] == ["t", "v", "hilbert_v", "envelope", "phase"]
    return np.array(rows[1:], dtype=float)


def test_hilbert_demo_cosine(tmp_path, capsys):
    t = np.arange(128) / 128
    out = demo(tmp_path, capsys, t, np.cos(2 * np.pi * 4 * t))
    assert np.max(np.abs(out[:, 2] - np.sin(2 * np.pi * 4 * t))) < 1e-10
    assert np.max(np.abs(out[:, 3] - 1)) < 1e-10
    np.testing.assert_array_equal(out[:, 0], t)


def test_hilbert_demo_zero_signal(tmp_path, capsys):
    out = demo(tmp_path, capsys, np.arange(16), np.zeros(16))
    assert not np.any(out[:, 1:])


def test_hilbert_demo_modulated_tone(tmp_path, capsys):
    n = 1024
    t = np.arange(n) / n
    env = 1.0 + 0.5 * np.sin(2 * np.pi * 3 * t)
    out = demo(tmp_path, capsys, t, env * np.cos(2 * np.pi * 120 * t))
    assert np.max(np.abs(out[:, 3] - env)) < 1e-2


def test_hilbert_demo_is_deterministic_and_accepts_single_column(tmp_path, capsys):
    src = write(tmp_path / "v.csv", "\n".join(str(np.sin(0.3 * i)) for i in range(50)) + "\n")
    code, first, _ = run(capsys, "hilbert-demo", src)
    code2, second, _ = run(capsys, "hilbert-demo", src)
    assert code == code2 == 0 and first == second
    assert first.splitlines()[1].startswith("0,")


def test_hilbert_demo_non_numeric_row(tmp_path, capsys):
    src = write(tmp_path / "bad.csv", "t,v\n0,1\n1,2\n2,oops\n")
    code, _, err = run(capsys, "hilbert-demo", src)
    assert code == 2 and ":4:" in err


# --- gradcheck -----------------------------------------------------------------------------------


def test_gradcheck_default_passes(tmp_path, capsys):
    cfg = write(tmp_path / "g.cfg", "seed = 0\n")
    code, text, _ = run(capsys, "gradcheck", "--config", cfg)
    assert code == 0 and "PASS" in text and "max relative deviation" in text


def test_gradcheck_identity_activation(tmp_path, capsys):
    cfg = write(tmp_path / "g.cfg", "seed = 0\nactivation = identity\ntolerance = 1e-6\ngrid = 16,12\nmodes = 5,4\nhilbert_axis = 1\n")
    assert run(capsys, "gradcheck", "--config", cfg)[0] == 0


def test_gradcheck_corrupted_vjp_fails(tmp_path, capsys, monkeypatch):
    real = training.backward

    def corrupted(params, batch, layer_kind=None):
        loss, grads = real(params, batch, layer_kind)
        grads["lift_w"] = -grads["lift_w"]
        return loss, grads

    monkeypatch.setattr(training, "backward", corrupted)
    code, text, _ = run(capsys, "gradcheck", "--seed", 0)
    assert code == 4 and "FAIL" in text


def test_gradcheck_bad_config(tmp_path, capsys):
    cfg = write(tmp_path / "g.cfg", "seed = 0\nactivation = swish\n")
    assert run(capsys, "gradcheck", "--config", cfg)[0] == 2


def test_common_flags_before_or_after_command(tmp_path, capsys):
    cfg = write(tmp_path / "c.cfg", "n_samples = 2\nn_points = 64\n")
    code, text, _ = run(capsys, "--seed", 5, "--config", cfg, "gen-data", "lorenz63", "--out", tmp_path / "a.nopd")
    assert code == 0 and "seed=5" in text
    code, text, _ = run(capsys, "gen-data", "lorenz63", "--seed", 5, "--config", cfg, "--out", tmp_path / "b.nopd")
    assert code == 0
    assert (tmp_path / "a.nopd").read_bytes() == (tmp_path / "b.nopd").read_bytes()


def test_gen_data_boolean_key(tmp_path, capsys):
    cfg = write(tmp_path / "c.cfg", "seed = 1\nn_samples = 2\nresolution = 32\nzero_mean = false\n")
    assert run(capsys, "gen-data", "burgers1d", "--config", cfg, "--out", tmp_path / "b.nopd")[0] == 0
    pair = datagen.read_dataset(tmp_path / "b.nopd")
    assert pair.metadata["zero_mean"] == "False"
    assert np.max(np.abs(pair.inputs.mean(axis=1))) > 1e-3

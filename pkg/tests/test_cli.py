import numpy as np
import pytest
from click.testing import CliRunner

from talents.cli import main
from talents.clusters import load_clusters


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def _run(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def test_env_describe_emits_key_value_tables(runner):
    result = _run(runner, ["env", "describe", "--layout", "open"])
    lines = result.output.splitlines()
    actions = [ln for ln in lines if ln.startswith("action.")]
    assert len(actions) == 27
    assert "action.5=stay:primitive" in lines
    assert "reward.delivery_base=40.0" in lines
    assert any(ln.startswith("layout.row.0=") for ln in lines)
    assert any(ln.startswith("order.0=") for ln in lines)


def test_collect_rejects_bad_preference_code(runner, workdir):
    result = runner.invoke(main, [
        "collect", "--code", "XYZ", "--out", str(workdir / "bad.ds")])
    assert result.exit_code != 0


@pytest.fixture(scope="module")
def dataset_path(runner, workdir):
    path = workdir / "mini.ds"
    _run(runner, [
        "collect", "--code", "NNENNNNNN", "--code", "NNDNNNNNN",
        "--episodes", "1", "--ticks", "60", "--seed", "5",
        "--out", str(path)])
    return path


def test_collect_and_export(runner, workdir, dataset_path):
    out = workdir / "mini.jsonl"
    result = _run(runner, ["dataset", "export",
                           "--dataset", str(dataset_path),
                           "--out", str(out)])
    assert "2 records" in result.output
    assert len(out.read_text().splitlines()) == 2


@pytest.fixture(scope="module")
def vae_path(runner, workdir, dataset_path):
    path = workdir / "vae.ckpt"
    _run(runner, ["vae", "train", "--dataset", str(dataset_path),
                  "--preset", "tiny", "--epochs", "2", "--seed", "7",
                  "--out", str(path), "--eval"])
    return path


def test_vae_train_writes_curve_artifacts(vae_path, workdir):
    assert vae_path.exists()
    curve_csv = workdir / "vae.curve.csv"
    assert curve_csv.exists()
    header = curve_csv.read_text().splitlines()[0]
    assert header.startswith("epoch,")
    assert (workdir / "vae.curve.png").read_bytes()[:4] == b"\x89PNG"


@pytest.fixture(scope="module")
def clusters_path(runner, workdir, vae_path, dataset_path):
    path = workdir / "clusters.bin"
    _run(runner, ["clusters", "fit", "--vae", str(vae_path),
                  "--dataset", str(dataset_path), "--k", "2",
                  "--seed", "3", "--out", str(path)])
    return path


def test_clusters_fit_roundtrip(clusters_path):
    clusters = load_clusters(clusters_path)
    assert clusters.k == 2
    assert np.isfinite(clusters.means).all()


def test_clusters_select_reports_scores(runner, workdir, vae_path,
                                        dataset_path):
    out = workdir / "selected.bin"
    result = _run(runner, ["clusters", "select", "--vae", str(vae_path),
                           "--dataset", str(dataset_path),
                           "--k-min", "2", "--k-max", "3",
                           "--seed", "3", "--out", str(out)])
    assert "k=2  silhouette=" in result.output
    assert "chosen k=" in result.output
    assert out.exists()


@pytest.fixture(scope="module")
def policy_path(runner, workdir, vae_path, clusters_path):
    path = workdir / "policy.ckpt"
    _run(runner, ["train", "cooperator", "--vae", str(vae_path),
                  "--clusters", str(clusters_path), "--preset", "tiny",
                  "--total-steps", "160", "--ticks", "40", "--seed", "11",
                  "--out", str(path)])
    return path


def test_train_cooperator_writes_checkpoint(policy_path, workdir):
    assert policy_path.exists()
    assert (workdir / "policy.curve.png").exists()


def test_eval_crossplay_renders_tables_and_figure(runner, workdir,
                                                  vae_path, clusters_path,
                                                  policy_path):
    out = workdir / "crossplay"
    result = _run(runner, ["eval", "crossplay", "--vae", str(vae_path),
                           "--clusters", str(clusters_path),
                           "--policy", str(policy_path),
                           "--episodes", "2", "--ticks", "30",
                           "--seed", "13", "--out", str(out)])
    table = (out / "crossplay.csv").read_text().splitlines()
    # 12 holdout partners + the pooled row + the header.
    assert len(table) == 14
    assert table[0].startswith("layout,cooperator,partner")
    assert (out / "crossplay.jsonl").exists()
    assert (out / "crossplay.png").read_bytes()[:4] == b"\x89PNG"
    assert "partner=__all__" in result.output


def test_eval_swap_renders_summary_and_figure(runner, workdir, vae_path,
                                              clusters_path, policy_path):
    import json

    out = workdir / "swap"
    result = _run(runner, ["eval", "swap", "--vae", str(vae_path),
                           "--clusters", str(clusters_path),
                           "--policy", str(policy_path),
                           "--episodes", "2", "--ticks", "40",
                           "--swap-tick", "20", "--seed", "17",
                           "--out", str(out)])
    summary = json.loads((out / "swap.json").read_text())
    assert summary["swap_tick"] == 20
    assert set(summary["modes"]) == {"fixed-share", "static"}
    assert (out / "swap.png").read_bytes()[:4] == b"\x89PNG"
    assert "fixed-share: mean final score" in result.output


def test_eval_sweep_reports_per_k(runner, workdir, vae_path,
                                  dataset_path):
    out = workdir / "sweep"
    result = _run(runner, ["eval", "sweep", "--vae", str(vae_path),
                           "--dataset", str(dataset_path),
                           "--k", "1", "--k", "2",
                           "--train-preset", "tiny",
                           "--total-steps", "80",
                           "--episodes", "2", "--ticks", "20",
                           "--seed", "19", "--out", str(out)])
    assert (out / "sweep_k1.csv").exists()
    assert (out / "sweep_k2.csv").exists()
    assert (out / "sweep.png").read_bytes()[:4] == b"\x89PNG"
    assert "k=1  pooled mean return" in result.output

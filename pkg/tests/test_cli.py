import json

import numpy as np
import pytest

from gpmvs import tensorio
from gpmvs.batch import batch_posterior
from gpmvs.cli import main
from gpmvs.kernels import KernelSpec, gram_matrix
from gpmvs.online import filter_sequence, load_state
from gpmvs.poses import Pose, read_poses_jsonl, write_poses_jsonl
from gpmvs.simulate import collinear_trajectory


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def sequence(tmp_path, rng):
    poses = collinear_trajectory(8, spacing=rng.uniform(0.1, 1.0, 7))
    Y = rng.normal(size=(8, 6)).astype(np.float32)
    write_poses_jsonl(tmp_path / "poses.jsonl", poses)
    tensorio.write_tensor(tmp_path / "lat.gpmv", Y)
    return poses, Y.astype(np.float64)


def test_fuse_batch(tmp_path, capsys, sequence):
    poses, Y = sequence
    code, out, _ = run_cli(
        capsys, "fuse-batch", "--latents", tmp_path / "lat.gpmv", "--poses", tmp_path / "poses.jsonl",
        "--gamma2", 2.0, "--ell", 0.8, "--sigma2", 0.3, "--out", tmp_path / "z.gpmv",
        "--var-out", tmp_path / "v.gpmv",
    )
    assert code == 0 and json.loads(out)["frames"] == 8
    spec = KernelSpec("matern32", 2.0, 0.8, 0.3)
    ref = batch_posterior(gram_matrix(poses, spec), Y, 0.3)
    np.testing.assert_allclose(tensorio.read_tensor(tmp_path / "z.gpmv"), ref.mean, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(tensorio.read_tensor(tmp_path / "v.gpmv"), ref.var, rtol=1e-6)


def test_fuse_online_with_resume(tmp_path, capsys, sequence):
    poses, Y = sequence
    spec = KernelSpec.trained()
    whole = filter_sequence(spec, poses, Y)
    write_poses_jsonl(tmp_path / "a.jsonl", poses[:5])
    write_poses_jsonl(tmp_path / "b.jsonl", poses[5:])
    tensorio.write_tensor(tmp_path / "a.gpmv", Y[:5])
    tensorio.write_tensor(tmp_path / "b.gpmv", Y[5:])
    code, _, _ = run_cli(
        capsys, "fuse-online", "--latents", tmp_path / "a.gpmv", "--poses", tmp_path / "a.jsonl",
        "--save-state", tmp_path / "s.bin", "--out", tmp_path / "za.gpmv",
    )
    assert code == 0
    assert load_state(tmp_path / "s.bin").frame_count == 5
    code, out, _ = run_cli(
        capsys, "fuse-online", "--latents", tmp_path / "b.gpmv", "--poses", tmp_path / "b.jsonl",
        "--resume", tmp_path / "s.bin", "--out", tmp_path / "zb.gpmv",
    )
    assert code == 0 and json.loads(out)["frame_count"] == 8
    got = np.concatenate([tensorio.read_tensor(tmp_path / "za.gpmv"), tensorio.read_tensor(tmp_path / "zb.gpmv")])
    np.testing.assert_allclose(got, whole, rtol=1e-6, atol=1e-6)


def test_costvol(tmp_path, capsys):
    ref = np.full((3, 12, 16), 0.2)
    nbr = np.full((3, 12, 16), 0.5)
    tensorio.write_tensor(tmp_path / "ref.gpmv", ref)
    tensorio.write_tensor(tmp_path / "nbr.gpmv", nbr)
    write_poses_jsonl(tmp_path / "p.jsonl", [Pose(), Pose()])
    code, out, _ = run_cli(
        capsys, "costvol", "--ref", tmp_path / "ref.gpmv", "--nbr", tmp_path / "nbr.gpmv",
        "--poses", tmp_path / "p.jsonl", "--K", "20,20,7.5,5.5", "--planes", 5,
        "--out", tmp_path / "cv.gpmv", "--planes-out", tmp_path / "pl.gpmv",
    )
    assert code == 0 and json.loads(out)["shape"] == [5, 12, 16]
    np.testing.assert_allclose(tensorio.read_tensor(tmp_path / "cv.gpmv"), 0.9, rtol=1e-6)
    assert tensorio.read_tensor(tmp_path / "pl.gpmv").shape == (5,)


def test_metrics(tmp_path, capsys):
    tensorio.write_tensor(tmp_path / "p.gpmv", np.full((4, 4), 4.0))
    tensorio.write_tensor(tmp_path / "g.gpmv", np.full((4, 4), 2.0))
    mask = np.ones((4, 4))
    mask[0] = 0
    tensorio.write_tensor(tmp_path / "m.gpmv", mask)
    code, out, _ = run_cli(capsys, "metrics", "--pred", tmp_path / "p.gpmv", "--gt", tmp_path / "g.gpmv", "--mask", tmp_path / "m.gpmv")
    assert code == 0
    report = json.loads(out)
    assert (report["l1"], report["l1_rel"], report["l1_inv"], report["sc_inv"]) == (2.0, 1.0, 0.25, 0.0)
    assert report["n_valid"] == 12


def test_simulate(tmp_path, capsys):
    code, _, _ = run_cli(capsys, "simulate", "--kind", "arc", "--n", 3, "--seed", 1,
                         "--out-dir", tmp_path / "sim", "--width", 32, "--height", 24, "--fx", 30)
    assert code == 0
    assert len(read_poses_jsonl(tmp_path / "sim" / "poses.jsonl")) == 3
    assert tensorio.read_tensor(tmp_path / "sim" / "images.gpmv").shape == (3, 3, 24, 32)
    assert tensorio.read_tensor(tmp_path / "sim" / "depths.gpmv").shape == (3, 24, 32)


def _write_config(path, **extra):
    cfg = {
        "kernel": {"family": "matern32", "gamma_sq": 13.82, "ell": 1.098, "sigma_sq": 1.443},
        "mode": "online",
        "planes": {"d_min": 0.5, "d_max": 50.0, "count": 8},
        "latent_dims": [4, 2, 2],
        "input": {"simulate": {"kind": "collinear", "n": 4, "width": 32, "height": 24, "fx": 30, "spacing": 0.15}},
        "output_dir": "out",
    }
    cfg.update(extra)
    path.write_text(json.dumps(cfg))


def test_run_from_simulated_input(tmp_path, capsys):
    _write_config(tmp_path / "cfg.json")
    code, out, _ = run_cli(capsys, "run", "--config", tmp_path / "cfg.json")
    assert code == 0
    summary = json.loads(out)
    assert summary["frames"] == 4 and "metrics" in summary
    assert tensorio.read_tensor(tmp_path / "out" / "fused_latents.gpmv").shape == (4, 16)
    assert tensorio.read_tensor(tmp_path / "out" / "disparities.gpmv").shape == (4, 24, 32)


def test_run_no_gp_flag(tmp_path, capsys):
    _write_config(tmp_path / "cfg.json")
    code, _, _ = run_cli(capsys, "run", "--config", tmp_path / "cfg.json", "--no-gp", "--out-dir", tmp_path / "o")
    assert code == 0
    np.testing.assert_array_equal(
        tensorio.read_tensor(tmp_path / "o" / "fused_latents.gpmv"),
        tensorio.read_tensor(tmp_path / "o" / "latents.gpmv"),
    )


def test_run_from_files(tmp_path, capsys, sequence):
    _write_config(tmp_path / "cfg.json", input={"poses": "poses.jsonl", "latents": "lat.gpmv"},
                  latent_dims=[6, 1, 1], mode="batch")
    code, out, _ = run_cli(capsys, "run", "--config", tmp_path / "cfg.json")
    assert code == 0, out
    assert tensorio.read_tensor(tmp_path / "out" / "fused_latents.gpmv").shape == (8, 6)


@pytest.mark.parametrize(
    "argv",
    [
        ["metrics", "--pred", "missing.gpmv", "--gt", "missing.gpmv"],
        ["fuse-batch", "--latents", "x"],
        ["nonsense"],
    ],
)
def test_errors_are_json(capsys, argv):
    code, out, err = run_cli(capsys, *argv)
    assert code != 0 and out == ""
    obj = json.loads(err)
    assert set(obj) == {"error", "message"}


def test_dimension_mismatch_reported(tmp_path, capsys, sequence):
    write_poses_jsonl(tmp_path / "short.jsonl", sequence[0][:3])
    code, _, err = run_cli(capsys, "fuse-batch", "--latents", tmp_path / "lat.gpmv", "--poses",
                           tmp_path / "short.jsonl", "--out", tmp_path / "z.gpmv")
    assert code == 1 and json.loads(err)["error"] == "DimensionMismatch"

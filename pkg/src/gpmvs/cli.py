"""Command-line interface: ``gpmvs <subcommand> ...``.

All tensors are GPMV files. On failure a JSON object ``{"error", "message"}``
is written to stderr and the exit status is nonzero.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import online, tensorio
from .batch import DEFAULT_MAX_FRAMES, batch_posterior
from .errors import DimensionMismatch
from .kernels import KernelFamily, KernelSpec, gram_matrix
from .metrics import DepthMap, evaluate
from .pipeline import Frame, FusionMode, PipelineConfig, run_sequence, with_overrides
from .planesweep import Intrinsics, cost_volume, depth_planes
from .poses import read_poses_jsonl, relative_pose, write_poses_jsonl
from .simulate import simulate_scene

logger = logging.getLogger("gpmvs")

TRAINED = KernelSpec.trained()


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


def _parse_K(text: str, width: int, height: int) -> Intrinsics:
    try:
        fx, fy, cx, cy = (float(v) for v in text.split(","))
    except ValueError:
        raise CLIError(f"--K expects fx,fy,cx,cy, got {text!r}") from None
    return Intrinsics(fx, fy, cx, cy, width, height)


def _add_kernel_args(p, defaults: bool = True):
    d = TRAINED if defaults else None
    p.add_argument("--kernel", choices=[f.value for f in KernelFamily], default="matern32" if defaults else None)
    p.add_argument("--gamma2", type=float, default=d.gamma_sq if d else None)
    p.add_argument("--ell", type=float, default=d.ell if d else None)
    p.add_argument("--sigma2", type=float, default=d.sigma_sq if d else None)


def _kernel_from_args(args) -> KernelSpec:
    return KernelSpec(KernelFamily(args.kernel), args.gamma2, args.ell, args.sigma2)


def _load_latents(path, n_poses: int) -> np.ndarray:
    Y = tensorio.read_tensor(path).astype(np.float64)
    if Y.ndim != 2:
        raise DimensionMismatch(f"latents must be a rank-2 N x M tensor, got shape {Y.shape}")
    if Y.shape[0] != n_poses:
        raise DimensionMismatch(f"{Y.shape[0]} latent rows but {n_poses} poses")
    return Y


def cmd_costvol(args) -> dict:
    ref = tensorio.read_tensor(args.ref)
    nbrs = [tensorio.read_tensor(p) for p in args.nbr]
    poses = read_poses_jsonl(args.poses)
    if len(poses) != 1 + len(nbrs):
        raise DimensionMismatch(f"need {1 + len(nbrs)} poses (reference first), got {len(poses)}")
    if ref.ndim == 2:
        ref = ref[None]
    K = _parse_K(args.K, ref.shape[-1], ref.shape[-2])
    planes = depth_planes(args.dmin, args.dmax, args.planes)
    pairs = [(img, relative_pose(poses[0], p)) for img, p in zip(nbrs, poses[1:])]
    vol = cost_volume(ref, pairs, K, planes)
    tensorio.write_tensor(args.out, vol.cost)
    if args.planes_out:
        tensorio.write_tensor(args.planes_out, vol.planes)
    return {"out": str(args.out), "shape": list(vol.cost.shape)}


def cmd_fuse_batch(args) -> dict:
    poses = read_poses_jsonl(args.poses)
    Y = _load_latents(args.latents, len(poses))
    spec = _kernel_from_args(args)
    inputs = list(range(len(poses))) if spec.family is KernelFamily.TEMPORAL_DIFFERENCE else poses
    post = batch_posterior(gram_matrix(inputs, spec), Y, spec.sigma_sq, args.max_frames)
    tensorio.write_tensor(args.out, post.mean)
    if args.var_out:
        tensorio.write_tensor(args.var_out, post.var)
    return {"out": str(args.out), "frames": len(poses), "dims": int(Y.shape[1])}


def cmd_fuse_online(args) -> dict:
    poses = read_poses_jsonl(args.poses)
    Y = _load_latents(args.latents, len(poses))
    if args.resume:
        state = online.load_state(args.resume)
        if state.m != Y.shape[1]:
            raise DimensionMismatch(f"resumed state has M={state.m}, latents have M={Y.shape[1]}")
    else:
        state = online.init_state(_kernel_from_args(args), Y.shape[1])
    out = np.empty_like(Y)
    for i, (pose, y) in enumerate(zip(poses, Y)):
        state, out[i] = online.step(state, pose, y)
    tensorio.write_tensor(args.out, out)
    if args.save_state:
        online.save_state(args.save_state, state)
    return {"out": str(args.out), "frames": len(poses), "frame_count": state.frame_count}


def cmd_metrics(args) -> dict:
    pred = tensorio.read_tensor(args.pred)
    gt = tensorio.read_tensor(args.gt)
    mask = tensorio.read_tensor(args.mask) != 0 if args.mask else None
    report = evaluate(DepthMap.from_array(pred), DepthMap.from_array(gt, mask))
    return report.to_dict()


def cmd_simulate(args) -> dict:
    K = Intrinsics(args.fx, args.fx, (args.width - 1) / 2, (args.height - 1) / 2, args.width, args.height)
    scene = simulate_scene(args.n, args.kind, args.seed, K, args.plane_z)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_poses_jsonl(out / "poses.jsonl", scene.poses)
    tensorio.write_tensor(out / "images.gpmv", scene.images)
    tensorio.write_tensor(out / "depths.gpmv", scene.depths)
    (out / "intrinsics.json").write_text(json.dumps(K.to_dict()) + "\n", encoding="utf-8")
    return {"out_dir": str(out), "frames": args.n}


def _frames_from_config(cfg: PipelineConfig, base: Path):
    spec = dict(cfg.input)
    if "simulate" in spec:
        sim = dict(spec["simulate"])
        w, h = int(sim.pop("width", 64)), int(sim.pop("height", 48))
        fx = float(sim.pop("fx", 60.0))
        K = Intrinsics(fx, fx, (w - 1) / 2, (h - 1) / 2, w, h)
        scene = simulate_scene(
            int(sim.pop("n", 8)), sim.pop("kind", "collinear"), int(sim.pop("seed", cfg.seed)),
            K, float(sim.pop("plane_z", 3.0)), **sim,
        )
        frames = [Frame(p, img, gt_depth=d) for p, img, d in zip(scene.poses, scene.images, scene.depths)]
        return frames, K

    def path(key):
        p = Path(spec[key])
        return p if p.is_absolute() else base / p

    poses = read_poses_jsonl(path("poses"))
    K = None
    if "intrinsics" in spec:
        intr = spec["intrinsics"]
        if isinstance(intr, str):
            intr = json.loads(path("intrinsics").read_text(encoding="utf-8"))
        K = Intrinsics.from_dict(intr)
    depths = tensorio.read_tensor(path("depths")) if "depths" in spec else [None] * len(poses)
    if "latents" in spec:
        Y = _load_latents(path("latents"), len(poses))
        frames = [Frame(p, latent=y, gt_depth=d) for p, y, d in zip(poses, Y, depths)]
    else:
        images = tensorio.read_tensor(path("images"))
        if len(images) != len(poses):
            raise DimensionMismatch(f"{len(images)} images but {len(poses)} poses")
        frames = [Frame(p, img, gt_depth=d) for p, img, d in zip(poses, images, depths)]
    return frames, K


def cmd_run(args) -> dict:
    cfg_path = Path(args.config)
    cfg = PipelineConfig.from_json(cfg_path)
    cfg = with_overrides(
        cfg,
        mode=FusionMode(args.mode) if args.mode else None,
        seed=args.seed,
        no_gp=True if args.no_gp else None,
        output_dir=args.out_dir,
        family=KernelFamily(args.kernel) if args.kernel else None,
        gamma_sq=args.gamma2,
        ell=args.ell,
        sigma_sq=args.sigma2,
    )
    if not cfg.output_dir:
        raise CLIError("no output directory: set output_dir in the config or pass --out-dir")
    frames, K = _frames_from_config(cfg, cfg_path.parent)
    result = run_sequence(cfg, frames, K)
    out = Path(cfg.output_dir)
    if not out.is_absolute() and args.out_dir is None:
        out = cfg_path.parent / out
    out.mkdir(parents=True, exist_ok=True)
    tensorio.write_tensor(out / "latents.gpmv", np.stack([r.latent for r in result.records]))
    tensorio.write_tensor(out / "fused_latents.gpmv", np.stack([r.fused_latent for r in result.records]))
    if all(r.disparity is not None for r in result.records):
        tensorio.write_tensor(out / "disparities.gpmv", np.stack([r.disparity for r in result.records]))
    summary = {
        "out_dir": str(out),
        "frames": len(result.records),
        "mode": cfg.mode.value,
        "no_gp": cfg.no_gp,
        "neighbors": [r.neighbor for r in result.records],
    }
    if result.metrics is not None:
        summary["metrics"] = result.metrics.to_dict()
        (out / "metrics.json").write_text(json.dumps(result.metrics.to_dict(), indent=2) + "\n")
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gpmvs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("costvol", help="plane-sweep cost volume for a reference view")
    p.add_argument("--ref", required=True)
    p.add_argument("--nbr", required=True, action="append", help="neighbour image (repeatable)")
    p.add_argument("--poses", required=True, help="JSONL poses: reference first, then neighbours")
    p.add_argument("--K", required=True, help="fx,fy,cx,cy in pixels")
    p.add_argument("--dmin", type=float, default=0.5)
    p.add_argument("--dmax", type=float, default=50.0)
    p.add_argument("--planes", type=int, default=64)
    p.add_argument("--out", required=True)
    p.add_argument("--planes-out")
    p.set_defaults(func=cmd_costvol)

    p = sub.add_parser("fuse-batch", help="batch GP fusion of an N x M latent tensor")
    p.add_argument("--latents", required=True)
    p.add_argument("--poses", required=True)
    _add_kernel_args(p)
    p.add_argument("--max-frames", type=int, default=DEFAULT_MAX_FRAMES)
    p.add_argument("--out", required=True)
    p.add_argument("--var-out")
    p.set_defaults(func=cmd_fuse_batch)

    p = sub.add_parser("fuse-online", help="online (filtering) GP fusion")
    p.add_argument("--latents", required=True)
    p.add_argument("--poses", required=True)
    _add_kernel_args(p)
    p.add_argument("--resume", help="state snapshot to continue from (its hyperparameters win)")
    p.add_argument("--save-state")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse_online)

    p = sub.add_parser("metrics", help="depth error metrics as JSON")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", help="synthetic trajectory with rendered planar scene")
    p.add_argument("--kind", choices=["collinear", "arc", "random"], default="collinear")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--fx", type=float, default=300.0)
    p.add_argument("--plane-z", type=float, default=3.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="end-to-end pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=[m.value for m in FusionMode])
    p.add_argument("--seed", type=int)
    p.add_argument("--no-gp", action="store_true", help="bypass fusion (fused latent = encoder output)")
    p.add_argument("--out-dir")
    _add_kernel_args(p, defaults=False)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        result = args.func(args)
    except Exception as exc:  # report every failure as JSON
        err = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return 2 if isinstance(exc, CLIError) else 1
    print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())

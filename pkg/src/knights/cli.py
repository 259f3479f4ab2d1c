"""Command-line front door: one ``knights`` binary with subcommands.

Every run prints a JSON report to stdout that embeds a manifest (tool
version, command, resolved parameters, sha256 digests of the inputs, output
paths); commands that write files also drop the manifest next to the main
output as ``<out>.manifest.json``. Exit codes are stable: 0 success, 1 a
verification command found a violation, 2 IO/format errors, 3 parameter or
validation errors. Flags override values from an optional ``--config``
key=value file. ``KNIGHTS_THREADS`` caps the worker count for directory
batch modes (0 or unset means auto).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from knights import __version__
from knights.attention import (
    StageWeights,
    TokenTensor,
    random_stage_weights,
    run_schedule,
    schedule_from_config,
)
from knights.contrastive import (
    EmbeddingBatch,
    TemporalClipSet,
    combined_tclr_loss,
    global_local_loss,
    instance_contrastive_loss,
    local_local_loss,
)
from knights.ensemble import EnsembleSpec, aggregate_crops, aggregate_ensemble
from knights.formats import (
    CodecError,
    read_config,
    read_csv_preds,
    read_emb1,
    read_flo,
    read_pgm,
    write_flo,
)
from knights.gradcheck import central_difference_gradient, max_relative_error
from knights.pretrain import (
    DatasetConfig,
    TinyEncoder,
    TrainConfig,
    encoder_chain_gradcheck,
    generate_dataset,
    train,
)
from knights.sampling import ClipSpec, sample_clip_indices, spatial_crop_boxes, temporal_crop_starts
from knights.tvl1 import FlowField, Tvl1Params, compute_flow, effective_lambda, energy

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_IO = 2
EXIT_PARAMS = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default calls sys.exit(2)
        raise _UsageError(message)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(command: str, params: dict, inputs: list, outputs: list) -> dict:
    return {
        "tool_version": __version__,
        "command": command,
        "params": params,
        "input_digests": {str(p): _sha256(Path(p)) for p in inputs},
        "output_paths": [str(p) for p in outputs],
    }


def _emit(report: dict, out_path: str | None = None) -> None:
    text = json.dumps(report, indent=2)
    print(text)
    if out_path is not None:
        Path(out_path).with_suffix(Path(out_path).suffix + ".manifest.json").write_text(
            json.dumps(report["manifest"], indent=2) + "\n"
        )


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input file does not exist: {path}")
    return p


def _config_overrides(args, parser_defaults: dict) -> dict[str, str]:
    if getattr(args, "config", None) is None:
        return {}
    cfg = read_config(_require_file(args.config))
    unknown = set(cfg) - set(parser_defaults)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _resolve(args, flag_names: dict[str, type], argv_flags: set[str]) -> dict:
    """Merge config-file values under explicitly passed flags."""
    merged = {}
    cfg = _config_overrides(args, flag_names)
    for name, cast in flag_names.items():
        if name in argv_flags or name not in cfg:
            merged[name] = getattr(args, name)
        else:
            raw = cfg[name]
            merged[name] = raw.lower() in ("1", "true", "yes") if cast is bool else cast(raw)
    return merged


def _passed_flags(argv: list[str]) -> set[str]:
    flags = set()
    for a in argv:
        if not a.startswith("--"):
            continue
        name = a.lstrip("-").split("=")[0].replace("-", "_")
        flags.add(name)
        if name.startswith("no_"):  # BooleanOptionalAction negatives
            flags.add(name[3:])
    return flags


def _threads() -> int:
    raw = os.environ.get("KNIGHTS_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"KNIGHTS_THREADS must be an integer, got {raw!r}") from None
    return n if n > 0 else min(8, os.cpu_count() or 1)


_FLOW_FLAGS = {
    "lam": float,
    "theta": float,
    "tau_step": float,
    "n_scales": int,
    "zoom": float,
    "n_warps": int,
    "max_iters": int,
    "epsilon": float,
    "median_filtering": bool,
}


def _flow_params(resolved: dict) -> Tvl1Params:
    return Tvl1Params(**{k: resolved[k] for k in _FLOW_FLAGS})


def _flow_one(i0_path: Path, i1_path: Path, out_path: Path, params: Tvl1Params) -> dict:
    i0 = read_pgm(i0_path)
    i1 = read_pgm(i1_path)
    flow = compute_flow(i0, i1, params)
    write_flo(out_path, flow)
    zero = FlowField.zeros(*i0.shape)
    lam = effective_lambda(params)  # the objective the solver minimizes
    return {
        "i0": str(i0_path),
        "i1": str(i1_path),
        "out": str(out_path),
        "energy_zero_flow": energy(i0, i1, zero, lam),
        "energy_final": energy(i0, i1, flow, lam),
        "mean_abs_flow": float(np.mean(np.hypot(flow.u1, flow.u2))),
    }


def cmd_flow(args, argv_flags) -> int:
    resolved = _resolve(args, _FLOW_FLAGS, argv_flags)
    params = _flow_params(resolved)
    i0 = _require_file(args.i0)
    i1 = _require_file(args.i1)

    if i0.is_dir() != i1.is_dir():
        raise ValueError("--i0 and --i1 must both be files or both be directories")
    if i0.is_dir():
        frames0 = sorted(i0.glob("*.pgm"))
        frames1 = sorted(i1.glob("*.pgm"))
        if len(frames0) != len(frames1) or not frames0:
            raise ValueError(
                f"directories must hold equal nonzero PGM counts, "
                f"got {len(frames0)} vs {len(frames1)}"
            )
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        jobs = [
            (a, b, out_dir / (a.stem + ".flo")) for a, b in zip(frames0, frames1)
        ]
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            results = list(pool.map(lambda j: _flow_one(*j, params), jobs))
        inputs = frames0 + frames1
        outputs = [j[2] for j in jobs]
        report = {
            "pairs": results,
            "manifest": _manifest("flow", resolved, inputs, outputs),
        }
        print(json.dumps(report, indent=2))
        (out_dir / "manifest.json").write_text(
            json.dumps(report["manifest"], indent=2) + "\n"
        )
        return EXIT_OK

    result = _flow_one(i0, i1, Path(args.out), params)
    report = dict(result)
    report["manifest"] = _manifest("flow", resolved, [i0, i1], [args.out])
    _emit(report, args.out)
    return EXIT_OK


def cmd_energy(args, argv_flags) -> int:
    i0 = read_pgm(_require_file(args.i0))
    i1 = read_pgm(_require_file(args.i1))
    flow = read_flo(_require_file(args.flow))
    value = energy(i0, i1, flow, args.lam)
    report = {
        "energy": value,
        "lam": args.lam,
        "manifest": _manifest(
            "energy", {"lam": args.lam}, [args.i0, args.i1, args.flow], []
        ),
    }
    _emit(report)
    return EXIT_OK


def _loss_report(result) -> dict:
    return {
        "loss": result.value,
        "per_term": [float(x) for x in result.per_term],
        "grad_norm": result.grad_norm(),
    }


def cmd_tclr_loss(args, argv_flags) -> int:
    def load(flag: str):
        path = getattr(args, flag)
        if path is None:
            raise ValueError(f"--{flag.replace('_', '-')} is required for kind={args.kind}")
        return read_emb1(_require_file(path))

    inputs = []
    if args.kind == "instance":
        batch = EmbeddingBatch(load("embeddings"), load("twins"))
        result = instance_contrastive_loss(batch, args.tau)
        report = _loss_report(result)
        inputs = [args.embeddings, args.twins]
    elif args.kind in ("local-local", "global-local"):
        clips = TemporalClipSet(
            locals=load("locals"),
            locals_twin=load("locals_twin"),
            global_slices=load("global_slices"),
            local_anchors=load("local_anchors"),
        )
        fn = local_local_loss if args.kind == "local-local" else global_local_loss
        result = fn(clips, args.tau)
        report = _loss_report(result)
        inputs = [args.locals, args.locals_twin, args.global_slices, args.local_anchors]
    else:  # combined
        batch = EmbeddingBatch(load("embeddings"), load("twins"))
        clips = TemporalClipSet(
            locals=load("locals"),
            locals_twin=load("locals_twin"),
            global_slices=load("global_slices"),
            local_anchors=load("local_anchors"),
        )
        result = combined_tclr_loss(batch, [clips], args.tau, tuple(args.weights))
        report = {
            "loss": result.value,
            "per_term": [
                result.instance_value,
                result.local_local_value,
                result.global_local_value,
            ],
            "grad_norm": result.grad_norm(),
        }
        inputs = [
            args.embeddings,
            args.twins,
            args.locals,
            args.locals_twin,
            args.global_slices,
            args.local_anchors,
        ]

    params = {"kind": args.kind, "tau": args.tau, "weights": list(args.weights)}
    report["manifest"] = _manifest("tclr-loss", params, inputs, [])
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    _emit(report)
    return EXIT_OK


def cmd_tclr_gradcheck(args, argv_flags) -> int:
    rng = np.random.default_rng(args.seed)
    worst = {"instance": 0.0, "local_local": 0.0, "global_local": 0.0, "encoder": 0.0}
    for _ in range(args.trials):
        n = int(rng.integers(2, 6))
        d = int(rng.integers(2, 7))
        tau = float(rng.choice([0.1, 0.5, 1.0]))
        g = rng.standard_normal((n, d))
        gp = rng.standard_normal((n, d))
        res = instance_contrastive_loss(EmbeddingBatch(g, gp), tau)
        num = central_difference_gradient(
            lambda m: instance_contrastive_loss(EmbeddingBatch(m, gp), tau).value, g
        )
        worst["instance"] = max(
            worst["instance"], max_relative_error(res.grads["embeddings"], num)
        )

        mats = {k: rng.standard_normal((n, d)) for k in ("l", "lt", "g", "a")}

        def clip_set(l=None, gl=None):
            return TemporalClipSet(
                locals=mats["l"] if l is None else l,
                locals_twin=mats["lt"],
                global_slices=mats["g"] if gl is None else gl,
                local_anchors=mats["a"],
            )

        res = local_local_loss(clip_set(), tau)
        num = central_difference_gradient(
            lambda m: local_local_loss(clip_set(l=m), tau).value, mats["l"]
        )
        worst["local_local"] = max(
            worst["local_local"], max_relative_error(res.grads["locals"], num)
        )

        res = global_local_loss(clip_set(), tau)
        num = central_difference_gradient(
            lambda m: global_local_loss(clip_set(gl=m), tau).value, mats["g"]
        )
        worst["global_local"] = max(
            worst["global_local"], max_relative_error(res.grads["global_slices"], num)
        )

    dataset = generate_dataset(DatasetConfig(n_instances=3, n_segments=2, feature_dim=4, seed=args.seed))
    encoder = TinyEncoder.create(4, 5, 4, seed=args.seed)
    worst["encoder"] = encoder_chain_gradcheck(
        dataset, encoder, TrainConfig(steps=1, run_gradcheck=False)
    )

    passed = (
        worst["instance"] < 1e-5
        and worst["local_local"] < 1e-5
        and worst["global_local"] < 1e-5
        and worst["encoder"] < 1e-4
    )
    report = {
        "max_relative_errors": worst,
        "tolerances": {"losses": 1e-5, "encoder": 1e-4},
        "passed": passed,
        "manifest": _manifest(
            "tclr-gradcheck", {"trials": args.trials, "seed": args.seed}, [], []
        ),
    }
    _emit(report)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


_PRETRAIN_FLAGS = {
    "steps": int,
    "instances": int,
    "segments": int,
    "feature_dim": int,
    "hidden_dim": int,
    "embed_dim": int,
    "tau": float,
    "learning_rate": float,
    "drift": float,
    "noise": float,
    "seed": int,
    "encoder_seed": int,
}


def cmd_pretrain(args, argv_flags) -> int:
    r = _resolve(args, _PRETRAIN_FLAGS, argv_flags)
    dataset = generate_dataset(
        DatasetConfig(
            n_instances=r["instances"],
            n_segments=r["segments"],
            feature_dim=r["feature_dim"],
            seed=r["seed"],
            drift=r["drift"],
            noise=r["noise"],
        )
    )
    config = TrainConfig(
        steps=r["steps"],
        tau=r["tau"],
        learning_rate=r["learning_rate"],
        weights=tuple(args.weights),
        hidden_dim=r["hidden_dim"],
        embed_dim=r["embed_dim"],
        encoder_seed=r["encoder_seed"],
        run_gradcheck=not args.skip_gradcheck,
    )
    encoder = TinyEncoder.create(
        r["feature_dim"], r["hidden_dim"], r["embed_dim"], seed=r["encoder_seed"]
    )
    result = train(dataset, encoder, config)

    outputs = []
    if args.trace:
        lines = ["step,loss,grad_norm"]
        lines += [
            f"{i},{float(loss)!r},{float(gn)!r}"
            for i, (loss, gn) in enumerate(zip(result.losses, result.grad_norms))
        ]
        Path(args.trace).write_text("\n".join(lines) + "\n")
        outputs.append(args.trace)
    if args.summary:
        outputs.append(args.summary)

    summary = {
        "steps": r["steps"],
        "initial_loss": float(result.losses[0]),
        "final_loss": float(result.losses[-1]),
        "loss_ratio": float(result.losses[-1] / result.losses[0]),
        "distinctness_before": result.distinctness_before,
        "distinctness_after": result.distinctness_after,
        "gradcheck_error": result.gradcheck_error,
    }
    params = dict(r)
    params["weights"] = list(args.weights)
    report = dict(summary)
    report["manifest"] = _manifest("pretrain", params, [], outputs)
    if args.summary:
        Path(args.summary).write_text(json.dumps(report, indent=2) + "\n")
    _emit(report)
    return EXIT_OK


def cmd_mhpa_run(args, argv_flags) -> int:
    schedule = schedule_from_config(read_config(_require_file(args.schedule)))
    grid = tuple(int(x) for x in args.grid.lower().split("x"))
    if len(grid) != 3:
        raise ValueError(f"--grid must look like 1x8x8, got {args.grid!r}")

    inputs = [args.schedule]
    if args.tokens:
        data = read_emb1(_require_file(args.tokens))
        inputs.append(args.tokens)
    else:
        rng = np.random.default_rng(args.tokens_seed)
        rows = grid[0] * grid[1] * grid[2] + int(args.class_token)
        data = rng.standard_normal((rows, schedule.stages[0].dim_in))
    x = TokenTensor(data, grid, has_class_token=args.class_token)

    if args.weights_dir:
        # one EMB1 matrix per projection: stage<k>.{wq,wk,wv,wo}.emb1
        wd = Path(args.weights_dir)
        weights = []
        for i, stage in enumerate(schedule.stages, start=1):
            mats = {}
            for name in ("wq", "wk", "wv", "wo"):
                p = _require_file(wd / f"stage{i}.{name}.emb1")
                mats[name] = read_emb1(p)
                inputs.append(p)
            weights.append(StageWeights(**mats))
    else:
        wrng = np.random.default_rng(args.weights_seed)
        weights = [random_stage_weights(stage, wrng) for stage in schedule.stages]
    out, trace = run_schedule(x, schedule, weights)

    params = {
        "grid": args.grid,
        "class_token": args.class_token,
        "weights_seed": args.weights_seed,
        "tokens_seed": args.tokens_seed,
        "weights_dir": args.weights_dir,
    }
    report = {
        "trace": [[int(s), int(d)] for s, d in trace],
        "output_shape": [out.seq_len, out.dim],
        "output_norm": float(np.linalg.norm(out.data)),
        "manifest": _manifest("mhpa-run", params, inputs, [args.out] if args.out else []),
    }
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    _emit(report)
    return EXIT_OK


def cmd_sample_clips(args, argv_flags) -> int:
    spec = ClipSpec(frames=args.frames, skip=args.skip, resolution=args.side or 224)
    if args.start is not None:
        starts = np.array([args.start])
    else:
        starts = temporal_crop_starts(args.video_len, spec, args.n_temporal)
    clips = [
        [int(i) for i in sample_clip_indices(args.video_len, spec, int(s))]
        for s in starts
    ]
    report = {
        "video_len": args.video_len,
        "frames": args.frames,
        "skip": args.skip,
        "temporal_starts": [int(s) for s in starts],
        "clip_indices": clips,
    }
    if args.height and args.width and args.side:
        report["spatial_boxes"] = [
            list(b)
            for b in spatial_crop_boxes(args.height, args.width, args.side, args.n_spatial)
        ]
    report["manifest"] = _manifest(
        "sample-clips",
        {
            k: getattr(args, k)
            for k in ("video_len", "frames", "skip", "start", "n_temporal",
                      "n_spatial", "height", "width", "side")
        },
        [],
        [],
    )
    _emit(report)
    return EXIT_OK


def _load_pred_matrix(path: Path) -> np.ndarray:
    if path.suffix == ".emb1":
        return read_emb1(path)
    classes, probs = read_csv_preds(path)
    return probs


def cmd_aggregate(args, argv_flags) -> int:
    paths = [_require_file(p) for p in args.preds]
    if args.weights:
        weights = args.weights
    elif args.spec:
        cfg = read_config(_require_file(args.spec))
        weights = []
        for p in paths:
            if p.stem not in cfg:
                raise ValueError(f"ensemble spec {args.spec} has no weight for {p.stem!r}")
            weights.append(float(cfg[p.stem]))
    else:
        weights = [1.0] * len(paths)
    if len(weights) != len(paths):
        raise ValueError(
            f"got {len(weights)} weights for {len(paths)} prediction files"
        )
    per_model = [aggregate_crops(_load_pred_matrix(p)) for p in paths]
    spec = EnsembleSpec(tuple((p.stem, w) for p, w in zip(paths, weights)))
    probs, top1 = aggregate_ensemble(per_model, spec)
    report = {
        "video_id": args.video_id or paths[0].stem,
        "probs": [float(x) for x in probs],
        "top1": top1,
        "per_model_probs": [[float(x) for x in v] for v in per_model],
        "manifest": _manifest(
            "aggregate",
            {"weights": [float(w) for w in weights], "spec": args.spec,
             "video_id": args.video_id},
            paths,
            [args.out] if args.out else [],
        ),
    }
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    _emit(report, args.out if args.out else None)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="knights", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flow", help="TV-L1 optical flow between two PGM frames (or directories)")
    p.add_argument("--i0", required=True, help="first frame (PGM) or directory of frames")
    p.add_argument("--i1", required=True, help="second frame (PGM) or directory")
    p.add_argument("--out", required=True, help=".flo output path (or directory)")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--lam", type=float, default=0.15)
    p.add_argument("--theta", type=float, default=0.3)
    p.add_argument("--tau-step", type=float, default=0.25, dest="tau_step")
    p.add_argument("--n-scales", type=int, default=5, dest="n_scales")
    p.add_argument("--zoom", type=float, default=0.5)
    p.add_argument("--n-warps", type=int, default=5, dest="n_warps")
    p.add_argument("--max-iters", type=int, default=300, dest="max_iters")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--median-filtering", action=argparse.BooleanOptionalAction,
                   default=True, dest="median_filtering")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("energy", help="evaluate the TV-L1 energy of a stored flow field")
    p.add_argument("--i0", required=True)
    p.add_argument("--i1", required=True)
    p.add_argument("--flow", required=True, help=".flo file")
    p.add_argument("--lam", type=float, default=0.15)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("tclr-loss", help="evaluate a contrastive loss on EMB1 matrices")
    p.add_argument("--kind", choices=["instance", "local-local", "global-local", "combined"],
                   default="instance")
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--weights", type=float, nargs=3, default=[1.0, 1.0, 1.0],
                   help="combination weights (combined kind)")
    p.add_argument("--embeddings", help="EMB1 matrix of instance embeddings")
    p.add_argument("--twins", help="EMB1 matrix of augmented twins")
    p.add_argument("--locals", help="EMB1 matrix of per-segment embeddings")
    p.add_argument("--locals-twin", dest="locals_twin")
    p.add_argument("--global-slices", dest="global_slices")
    p.add_argument("--local-anchors", dest="local_anchors")
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_tclr_loss)

    p = sub.add_parser("tclr-gradcheck",
                       help="verify analytic gradients against central differences")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_tclr_gradcheck)

    p = sub.add_parser("pretrain", help="train the tiny encoder on synthetic data")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--instances", type=int, default=8)
    p.add_argument("--segments", type=int, default=4)
    p.add_argument("--feature-dim", type=int, default=12, dest="feature_dim")
    p.add_argument("--hidden-dim", type=int, default=32, dest="hidden_dim")
    p.add_argument("--embed-dim", type=int, default=16, dest="embed_dim")
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--learning-rate", type=float, default=0.02, dest="learning_rate")
    p.add_argument("--weights", type=float, nargs=3, default=[1.0, 1.0, 1.0])
    p.add_argument("--drift", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--encoder-seed", type=int, default=0, dest="encoder_seed")
    p.add_argument("--skip-gradcheck", action="store_true", dest="skip_gradcheck")
    p.add_argument("--trace", help="write a step,loss,grad_norm CSV here")
    p.add_argument("--summary", help="write the JSON summary here")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("mhpa-run", help="run a pooling-attention stage schedule")
    p.add_argument("--schedule", required=True, help="key=value schedule config")
    p.add_argument("--grid", required=True, help="token grid, e.g. 1x8x8")
    p.add_argument("--tokens", help="EMB1 token matrix; random when omitted")
    p.add_argument("--tokens-seed", type=int, default=0, dest="tokens_seed")
    p.add_argument("--weights-seed", type=int, default=1, dest="weights_seed")
    p.add_argument("--weights-dir", dest="weights_dir",
                   help="directory of stage<k>.{wq,wk,wv,wo}.emb1 matrices")
    p.add_argument("--class-token", action="store_true", dest="class_token")
    p.add_argument("--out", help="write the JSON trace here")
    p.set_defaults(func=cmd_mhpa_run)

    p = sub.add_parser("sample-clips", help="clip indices, temporal starts and crop boxes")
    p.add_argument("--video-len", type=int, required=True, dest="video_len")
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--skip", type=int, default=2)
    p.add_argument("--start", type=int, help="sample one clip at this start frame")
    p.add_argument("--n-temporal", type=int, default=10, dest="n_temporal")
    p.add_argument("--n-spatial", type=int, default=3, dest="n_spatial")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--side", type=int)
    p.set_defaults(func=cmd_sample_clips)

    p = sub.add_parser("aggregate", help="TTA + ensemble aggregation of prediction files")
    p.add_argument("--preds", nargs="+", required=True,
                   help="CSV or EMB1 prediction matrices, one per model")
    p.add_argument("--weights", type=float, nargs="+", help="one weight per file")
    p.add_argument("--spec", help="key=value ensemble spec (file stem = weight); "
                                  "--weights overrides it")
    p.add_argument("--video-id", dest="video_id")
    p.add_argument("--out", help="write the JSON predictions here")
    p.set_defaults(func=cmd_aggregate)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    try:
        return args.func(args, _passed_flags(argv))
    except (CodecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS


if __name__ == "__main__":
    sys.exit(main())

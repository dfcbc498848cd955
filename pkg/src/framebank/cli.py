"""Command-line interface.

Subcommands: simulate (toy end-to-end edit), replay (recorded-feature
run), mask (standalone mask extraction), metrics (PSNR/SSIM/drift
tables), fmp-bench (propagation timing, compiled vs pure-Python kernel),
sfm-trace (memory-evolution dump).

Flag precedence: built-in defaults < --config file < explicit flags.
Every output directory receives a run.meta with the resolved settings.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from framebank import kernels
from framebank.masks import AttentionRecord, BinaryMask, MaskConfig, WordSelection, aggregate, extract_mask, temporal_overlap
from framebank.memory import FeatureTokenMap, MemoryBank
from framebank.metrics import psnr, ssim, token_drift
from framebank.pipeline import (
    EditConfig,
    LatentVideo,
    SyntheticEditBackend,
    edit_video,
    replay_edit,
)
from framebank.propagation import PropagationConfig, propagate
from framebank.tensorio import (
    ManifestError,
    ManifestRecord,
    read_manifest,
    read_mask_pgm,
    read_tensor,
    write_manifest,
    write_mask_pgm,
    write_tensor,
)

_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(EditConfig)}
_KEY_ALIASES = {"lambda": "lam"}
_FIELD_TO_KEY = {"lam": "lambda"}


def _parse_value(key: str, raw: str):
    field = _CONFIG_FIELDS[key]
    raw = raw.strip()
    if key == "sfm_update_step":
        return None if raw in ("", "mid", "none") else int(raw)
    if key == "mask_layers":
        return None if raw in ("", "auto", "none") else tuple(x for x in raw.split(",") if x)
    if field.type in ("int", int):
        return int(raw)
    if field.type in ("float", float):
        return float(raw)
    if field.type in ("bool", bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {key}: expected boolean, got {raw!r}")
    return raw


def parse_runconfig(path: Path) -> dict:
    """key=value file mirroring EditConfig; unknown keys are rejected."""
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, _, raw = line.partition("=")
        key = key.strip()
        key = _KEY_ALIASES.get(key, key)
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def resolve_config(args: argparse.Namespace) -> EditConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(parse_runconfig(Path(args.config)))
    for name in _CONFIG_FIELDS:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    return EditConfig(**values)


def config_meta(cfg: EditConfig) -> str:
    lines = []
    for name in sorted(_CONFIG_FIELDS):
        value = getattr(cfg, name)
        key = _FIELD_TO_KEY.get(name, name)
        if value is None:
            rendered = "auto" if name == "mask_layers" else "mid"
        elif isinstance(value, tuple):
            rendered = ",".join(value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        else:
            rendered = str(value)
        lines.append(f"{key}={rendered}")
    return "\n".join(lines) + "\n"


def _write_meta(out_dir: Path, cfg: EditConfig, extras: dict) -> None:
    text = config_meta(cfg)
    for key in sorted(extras):
        text += f"{key}={extras[key]}\n"
    (out_dir / "run.meta").write_text(text)


def _add_shared_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--steps", type=int, default=None)
    sp.add_argument("--guidance", type=float, default=None)
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--tau", type=float, default=None)
    sp.add_argument("--sfm-len", dest="sfm_len", type=int, default=None)
    sp.add_argument(
        "--sfm-metric",
        dest="sfm_metric",
        choices=("frame-gap", "mean-token-cosine-distance"),
        default=None,
    )
    sp.add_argument("--inject-start", dest="inject_start", type=float, default=None)
    sp.add_argument("--inject-end", dest="inject_end", type=float, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--config", default=None)
    sp.add_argument("--out-dir", dest="out_dir", default=None)


def _require_out_dir(args: argparse.Namespace) -> Path:
    if not args.out_dir:
        raise ValueError("--out-dir is required for this subcommand")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def synth_video(seed: int, frames: int, shape: tuple[int, int, int] = (4, 16, 16)) -> LatentVideo:
    """Deterministic smooth test video with values inside [0.2, 0.8]."""
    c, h, w = shape
    ci = np.arange(c)[:, None, None]
    yi = np.arange(h)[None, :, None]
    xi = np.arange(w)[None, None, :]
    out = []
    for f in range(frames):
        phase = 0.13 * seed + 0.9 * ci + 2.0 * np.pi * (xi + yi) / (h + w) + 0.21 * f
        out.append(0.5 + 0.3 * np.sin(phase))
    return LatentVideo(out)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _require_out_dir(args)
    backend = SyntheticEditBackend(
        seed=cfg.seed, drift_rate=args.drift, eps_mode="cond"
    )
    src = synth_video(cfg.seed, args.frames, backend.latent_shape)
    words = WordSelection.from_indices([backend.hotspot_word], backend.n_words)
    started = time.perf_counter()
    edited, masks, report = edit_video(
        src, 0.25, 0.75, cfg, backend, uncond=0.0, word_selection=words
    )
    elapsed = time.perf_counter() - started
    (out / "latents").mkdir(exist_ok=True)
    (out / "masks").mkdir(exist_ok=True)
    for f, frame in enumerate(edited.frames):
        write_tensor(out / "latents" / f"frame_{f:03d}.eyit", frame)
        write_mask_pgm(out / "masks" / f"frame_{f:03d}.pgm", masks[f])
    for layer, maps in sorted(report.designated_features.items()):
        layer_dir = out / "features" / layer
        layer_dir.mkdir(parents=True, exist_ok=True)
        for fmap in maps:
            write_tensor(layer_dir / f"frame_{fmap.frame_index:03d}.eyit", fmap.tokens)
    (out / "report.jsonl").write_text(report.to_jsonl())
    _write_meta(out, cfg, {"frames": args.frames, "drift": args.drift, "mode": "simulate"})
    print(
        f"simulate: {args.frames} frames, {cfg.steps} steps -> {out} "
        f"({elapsed:.2f}s, peak retained {report.peak_retained_floats} floats)"
    )
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _require_out_dir(args)
    word_indices = [int(x) for x in args.words.split(",") if x]
    features, masks, report = replay_edit(args.manifest_dir, cfg, word_indices)
    feat_dir = out / "features"
    feat_dir.mkdir(exist_ok=True)
    for (f, step, layer), tokens in sorted(features.items()):
        write_tensor(feat_dir / f"frame_{f:03d}_step_{step:03d}_{layer}.eyit", tokens)
    mask_dir = out / "masks"
    mask_dir.mkdir(exist_ok=True)
    for f, mask in enumerate(masks):
        write_mask_pgm(mask_dir / f"frame_{f:03d}.pgm", mask)
    (out / "report.jsonl").write_text(report.to_jsonl())
    _write_meta(out, cfg, {"manifest_dir": args.manifest_dir, "words": args.words, "mode": "replay"})
    print(f"replay: {len(report.frames)} frames -> {out}")
    return 0


def cmd_mask(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _require_out_dir(args)
    manifest_dir = Path(args.manifest_dir)
    records = read_manifest(manifest_dir / "manifest.tsv")
    word_indices = [int(x) for x in args.words.split(",") if x]
    by_frame: dict[int, list[AttentionRecord]] = {}
    pending_q: dict[tuple, tuple] = {}
    for rec in records:
        if rec.kind not in ("cross_q", "cross_k"):
            continue
        key = (rec.frame_index, rec.step_index, rec.layer_id, rec.head_index)
        pending_q.setdefault(key, [None, None, None])
        slot = 0 if rec.kind == "cross_q" else 1
        pending_q[key][slot] = read_tensor(manifest_dir / rec.path)
        pending_q[key][2] = rec.spatial_shape
    for (f, step, layer, head), (q, k, shape) in sorted(pending_q.items()):
        if q is None or k is None:
            raise ManifestError(
                f"unpaired attention record frame={f} step={step} layer={layer}"
            )
        by_frame.setdefault(f, []).append(
            AttentionRecord(
                frame_index=f,
                step_index=step,
                layer_id=layer,
                head_index=head or 0,
                q=q,
                k=k,
                spatial_shape=shape,
            )
        )
    if not by_frame:
        raise ManifestError("manifest contains no attention records")
    prev: Optional[BinaryMask] = None
    print("frame\tforeground_pixels")
    for f, recs in sorted(by_frame.items()):
        steps = sorted({r.step_index for r in recs})
        layers = cfg.mask_layers or tuple(sorted({r.layer_id for r in recs}))
        mask_cfg = MaskConfig(
            tau=cfg.tau, step_range=(steps[0], steps[-1]), layer_set=layers
        )
        prob, shape = aggregate(recs, mask_cfg, mode=cfg.attention_mode)
        sel = WordSelection.from_indices(word_indices, prob.shape[1])
        raw = extract_mask(prob, sel, cfg.tau, shape)
        merged = (
            temporal_overlap(prev, raw, cfg.connectivity)
            if args.overlap and prev is not None
            else temporal_overlap(raw, raw, cfg.connectivity)
            if args.overlap
            else raw
        )
        prev = raw
        write_mask_pgm(out / f"frame_{f:03d}.pgm", merged)
        print(f"{f}\t{merged.pixel_count()}")
    _write_meta(out, cfg, {"manifest_dir": args.manifest_dir, "words": args.words, "mode": "mask"})
    return 0


def _load_frame_dir(path: Path) -> list[tuple[str, np.ndarray]]:
    files = sorted(p for p in path.iterdir() if p.suffix == ".eyit")
    if not files:
        raise ValueError(f"no .eyit tensors in {path}")
    return [(p.name, read_tensor(p)) for p in files]


def cmd_metrics(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    frames_a = _load_frame_dir(Path(args.dir_a))
    frames_b = _load_frame_dir(Path(args.dir_b))
    if [n for n, _ in frames_a] != [n for n, _ in frames_b]:
        raise ValueError("frame directories do not contain matching file names")
    regions: list[Optional[BinaryMask]] = [None] * len(frames_a)
    if args.masks:
        mask_files = sorted(Path(args.masks).glob("*.pgm"))
        if len(mask_files) != len(frames_a):
            raise ValueError(
                f"{len(mask_files)} masks for {len(frames_a)} frames"
            )
        regions = [read_mask_pgm(p).complement() for p in mask_files]
    drift_maps = [
        FeatureTokenMap(frame_index=i, layer_id="frame", tokens=v.reshape(v.shape[0], -1).T)
        for i, (_, v) in enumerate(frames_a)
    ]
    print("frame\tpsnr\tssim\tdrift")
    psnrs, ssims = [], []
    for i, ((name, va), (_, vb)) in enumerate(zip(frames_a, frames_b)):
        p = psnr(va, vb, regions[i])
        s = ssim(va, vb, regions[i])
        psnrs.append(p)
        ssims.append(s)
        drift = (
            token_drift(drift_maps[i - 1 : i + 1]) if i > 0 else float("nan")
        )
        print(f"{name}\t{p:.4f}\t{s:.6f}\t{drift:.6f}" if i > 0 else f"{name}\t{p:.4f}\t{s:.6f}\t-")
    overall_drift = token_drift(drift_maps) if len(drift_maps) > 1 else float("nan")
    print(
        f"mean\t{np.mean(psnrs):.4f}\t{np.mean(ssims):.6f}\t"
        + (f"{overall_drift:.6f}" if len(drift_maps) > 1 else "-")
    )
    return 0


def cmd_fmp_bench(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _require_out_dir(args)
    current = read_tensor(args.current)
    if current.ndim != 2:
        raise ValueError("current-frame tensor must be 2-D (tokens x dim)")
    bank = MemoryBank(capacity=max(len(args.bank), 1), metric=cfg.sfm_metric)
    for i, path in enumerate(args.bank):
        tokens = read_tensor(path)
        bank.insert(FeatureTokenMap(frame_index=i, layer_id="bench", tokens=tokens))
    fmap = FeatureTokenMap(frame_index=len(args.bank), layer_id="bench", tokens=current)
    prop_cfg = PropagationConfig(lam=cfg.lam, similarity=cfg.similarity)

    impls = ["python"]
    if kernels.have_compiled_kernel():
        impls.insert(0, "compiled")
    results = {}
    print("impl\tbest_ms\truns")
    for impl in impls:
        best = float("inf")
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            results[impl] = propagate(fmap, bank, prop_cfg, impl=impl)
            best = min(best, time.perf_counter() - t0)
        print(f"{impl}\t{best * 1e3:.3f}\t{args.repeats}")
    if len(results) == 2:
        same = np.array_equal(
            results["compiled"].source_frame, results["python"].source_frame
        ) and np.array_equal(
            results["compiled"].source_token, results["python"].source_token
        )
        print(f"agreement\t{'ok' if same else 'MISMATCH'}")
        if not same:
            raise RuntimeError("compiled and pure-Python kernels disagree")

    chosen = results[impls[0]]
    write_tensor(out / "propagated.eyit", chosen.tokens_out)
    with open(out / "provenance.tsv", "w") as fh:
        fh.write("token\tsource_frame\tsource_token\tbest_similarity\n")
        for i in range(chosen.tokens_out.shape[0]):
            fh.write(
                f"{i}\t{chosen.source_frame[i]}\t{chosen.source_token[i]}"
                f"\t{chosen.best_similarity[i]:.9f}\n"
            )
    _write_meta(out, cfg, {"current": args.current, "mode": "fmp-bench"})
    return 0


def cmd_sfm_trace(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    backend = SyntheticEditBackend(seed=cfg.seed)
    bank = MemoryBank(capacity=cfg.sfm_len, metric=cfg.sfm_metric)
    print("frame\tadmitted\tevicted\tbank")
    for f in range(args.frames):
        entry = FeatureTokenMap(
            frame_index=f, layer_id="trace", tokens=backend.features_for(f, 0)
        )
        rep = bank.insert(entry)
        evicted = "-" if rep.evicted_frame is None else str(rep.evicted_frame)
        print(
            f"{f}\t{'yes' if rep.admitted else 'no'}\t{evicted}\t"
            + ",".join(str(i) for i in bank.frame_indices)
        )
    print("final-bank\t" + ",".join(str(i) for i in bank.frame_indices))
    if args.out_dir:
        out = _require_out_dir(args)
        records = []
        for entry in bank.entries:
            name = f"entry_{entry.frame_index:03d}.eyit"
            write_tensor(out / name, entry.tokens)
            records.append(
                ManifestRecord(
                    frame_index=entry.frame_index,
                    step_index=0,
                    layer_id=entry.layer_id,
                    head_index=None,
                    kind="spatial_features",
                    path=name,
                    spatial_shape=backend.grid,
                )
            )
        write_manifest(out / "manifest.tsv", records)
        _write_meta(out, cfg, {"frames": args.frames, "mode": "sfm-trace"})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="framebank",
        description="Video-editing consistency engine: feature memory, most-similar propagation, attention masks, DDIM.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="toy end-to-end edit over a synthetic video")
    _add_shared_flags(sp)
    sp.add_argument("--frames", type=int, default=8)
    sp.add_argument("--drift", type=float, default=0.05)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("replay", help="run memory/propagation/masks over a recorded dump")
    _add_shared_flags(sp)
    sp.add_argument("manifest_dir")
    sp.add_argument("--words", default="1")
    sp.set_defaults(func=cmd_replay)

    sp = sub.add_parser("mask", help="extract instance masks from recorded attention")
    _add_shared_flags(sp)
    sp.add_argument("manifest_dir")
    sp.add_argument("--words", default="1")
    sp.add_argument("--no-overlap", dest="overlap", action="store_false")
    sp.set_defaults(func=cmd_mask)

    sp = sub.add_parser("metrics", help="PSNR/SSIM/token-drift between two frame dirs")
    _add_shared_flags(sp)
    sp.add_argument("dir_a")
    sp.add_argument("dir_b")
    sp.add_argument("--masks", default=None, help="instance masks; metrics use their complement")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("fmp-bench", help="time the propagation search (compiled vs python)")
    _add_shared_flags(sp)
    sp.add_argument("--current", required=True)
    sp.add_argument("--bank", nargs="+", required=True)
    sp.add_argument("--repeats", type=int, default=5)
    sp.set_defaults(func=cmd_fmp_bench)

    sp = sub.add_parser("sfm-trace", help="dump memory-bank evolution for a frame stream")
    _add_shared_flags(sp)
    sp.add_argument("--frames", type=int, default=9)
    sp.set_defaults(func=cmd_sfm_trace)

    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()

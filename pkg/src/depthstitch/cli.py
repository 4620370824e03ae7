"""Command-line front end: stitch, eval, bench-synthetic, embed-analyze, lmr-loss.

Every job is driven entirely by explicit flags (plus an optional flat
``key = value`` config file for the benchmark); environment variables are
never consulted.  Directory-producing jobs write a ``run_log.json`` with
the resolved config, library versions, and per-window fit records, and
mark their output directory with a ``FAILED`` file when they abort, so a
partial directory is never mistaken for a finished one.  Logs contain no
timestamps: reruns with equal config produce byte-identical artifacts
(the benchmark's wall_ms column is the single documented exception).
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .embedding import EmbeddingConfig, similarity_matrix_csv
from .formats import DEPTH_FORMATS, FormatError, read_depth_map, read_raw_tensor, \
    write_depth_map, write_raw_tensor
from .losses import LossWeights, video_objective
from .metrics import (
    DEFAULT_BOUNDARY_THRESHOLDS,
    MetricDomainError,
    abs_rel,
    align_for_eval,
    boundary_prf,
    delta1,
    evaluate_sequence,
)
from .stitching import (
    AffineParams,
    DegenerateOverlapError,
    WindowPrediction,
    plan_windows,
    stitch_sequence_detailed,
)
from .synthetic import CorruptionConfig, SceneConfig, run_overlap_ablation
from .tensors import DepthSequence

__all__ = ["JobConfig", "ConfigError", "main", "run"]

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_NUMERIC = 5

_EXIT_CODE_HELP = """\
exit codes:
  0  success
  1  unexpected internal error
  2  invalid usage, configuration, or manifest
  3  missing or unreadable/unwritable path
  4  malformed or out-of-range file content
  5  degenerate numeric input (constant overlap, empty mask, non-positive depth)
"""

_FORMAT_EXT = {"pfm": ".pfm", "png16": ".png", "raw": ".raw"}
_EXT_FORMAT = {".pfm": "pfm", ".png": "png16", ".raw": "raw"}


class ConfigError(ValueError):
    """Invalid flags, config file, or manifest contents."""


@dataclass(frozen=True)
class JobConfig:
    """A resolved job: subcommand name plus its effective options."""

    subcommand: str
    options: dict


def _versions() -> dict:
    return {
        "depthstitch": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _fmt(x: float) -> str:
    return "%.12g" % x


# ---------------------------------------------------------------------------
# config file / flag parsing helpers


def _parse_kv_file(path: Path) -> dict:
    """Flat `key = value` pairs; blank lines and # comments ignored."""
    try:
        text = path.read_text()
    except OSError:
        raise
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def _parse_timesteps(spec: str) -> list[float]:
    """Either a comma list ('0,0.25,0.5') or an inclusive range ('0:1:0.1')."""
    spec = spec.strip()
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ValueError("range form is start:stop:step")
            start, stop, step = (float(p) for p in parts)
            if step <= 0:
                raise ValueError("step must be positive")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            if count < 1:
                raise ValueError("empty range")
            return [start + i * step for i in range(count)]
        return [float(p) for p in spec.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad --timesteps {spec!r}: {exc}") from None


def _parse_int_list(spec: str, what: str) -> list[int]:
    try:
        values = [int(p) for p in spec.split(",") if p.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad {what} {spec!r}: expected comma-separated integers") from None
    if not values:
        raise ConfigError(f"{what} must not be empty")
    return values


def _detect_format(files: list[Path], flag: str) -> str:
    if flag != "auto":
        return flag
    ext = files[0].suffix.lower()
    fmt = _EXT_FORMAT.get(ext)
    if fmt is None:
        raise ConfigError(
            f"cannot infer depth format from extension {ext!r} of {files[0].name}; "
            "pass --format"
        )
    return fmt


def _read_depth_dir(directory: Path, fmt_flag: str, png16_scale) -> tuple[DepthSequence, list[str], str]:
    if not directory.is_dir():
        raise NotADirectoryError(f"not a directory: {directory}")
    files = sorted(p for p in directory.iterdir() if p.is_file() and not p.name.startswith("."))
    if not files:
        raise ConfigError(f"no depth files in {directory}")
    fmt = _detect_format(files, fmt_flag)
    files = [p for p in files if p.suffix.lower() == _FORMAT_EXT[fmt]]
    if not files:
        raise ConfigError(f"no {fmt} files in {directory}")
    if fmt == "png16" and png16_scale is None:
        raise ConfigError("png16 input needs --png16-scale")
    frames = [read_depth_map(p, fmt, png16_scale=png16_scale) for p in files]
    return DepthSequence.from_frames(frames), [p.name for p in files], fmt


# ---------------------------------------------------------------------------
# subcommand handlers


def _require(doc: dict, key: str, kind, what: str):
    if key not in doc:
        raise ConfigError(f"{what} is missing required key {key!r}")
    value = doc[key]
    if kind is int and (not isinstance(value, int) or isinstance(value, bool)):
        raise ConfigError(f"{what} key {key!r} must be an integer, got {value!r}")
    if kind is list and not isinstance(value, list):
        raise ConfigError(f"{what} key {key!r} must be a list, got {type(value).__name__}")
    return value


def _load_manifest(path: Path):
    try:
        text = path.read_text()
    except OSError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: manifest must be a JSON object")

    frame_count = _require(doc, "frame_count", int, "manifest")
    window_size = _require(doc, "window_size", int, "manifest")
    has_stride = "stride" in doc
    has_overlap = "overlap" in doc
    if has_stride == has_overlap:
        raise ConfigError("manifest must set exactly one of 'stride' or 'overlap'")
    if has_stride:
        stride = _require(doc, "stride", int, "manifest")
    else:
        overlap = _require(doc, "overlap", int, "manifest")
        stride = window_size - overlap
    raw_windows = _require(doc, "windows", list, "manifest")
    if not raw_windows:
        raise ConfigError("manifest has no windows")

    windows = []
    for i, entry in enumerate(raw_windows):
        what = f"manifest window {i}"
        if not isinstance(entry, dict):
            raise ConfigError(f"{what} must be a JSON object")
        start = _require(entry, "start", int, what)
        files = _require(entry, "files", list, what)
        fmt = _require(entry, "format", str, what)
        if fmt not in DEPTH_FORMATS:
            raise ConfigError(f"{what}: unknown format {fmt!r}, expected one of {DEPTH_FORMATS}")
        scale = entry.get("png16_scale")
        if fmt == "png16":
            if not isinstance(scale, (int, float)) or isinstance(scale, bool):
                raise ConfigError(f"{what}: png16 windows need a numeric png16_scale")
        elif scale is not None:
            raise ConfigError(f"{what}: png16_scale is only meaningful for png16 windows")
        paths = [path.parent / f for f in files]
        windows.append({"start": start, "paths": paths, "format": fmt, "scale": scale})
    windows.sort(key=lambda w: w["start"])
    return frame_count, window_size, stride, windows


def _cmd_stitch(config: JobConfig, out_dirs: list) -> int:
    opts = config.options
    manifest_path = Path(opts["manifest"])
    frame_count, window_size, stride, entries = _load_manifest(manifest_path)

    try:
        plan = plan_windows(frame_count, window_size, stride)
    except ValueError as exc:
        raise ConfigError(f"manifest window geometry is invalid: {exc}") from None
    starts = tuple(e["start"] for e in entries)
    if starts != plan.starts:
        raise ConfigError(
            f"manifest window starts {list(starts)} do not match the plan {list(plan.starts)}"
        )
    for i, e in enumerate(entries):
        if len(e["paths"]) != plan.window_size:
            raise ConfigError(
                f"manifest window {i} lists {len(e['paths'])} files, "
                f"plan window size is {plan.window_size}"
            )
    # Fail before any decoding if any input is missing.
    for e in entries:
        for p in e["paths"]:
            if not p.is_file():
                raise FileNotFoundError(f"depth file not found: {p}")

    out_dir = Path(opts["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    # A marker left by an earlier aborted run must not outlive this one.
    (out_dir / "FAILED").unlink(missing_ok=True)
    out_dirs.append(out_dir)

    windows = []
    for e in entries:
        frames = [read_depth_map(p, e["format"], png16_scale=e["scale"]) for p in e["paths"]]
        windows.append(WindowPrediction(e["start"], DepthSequence.from_frames(frames)))

    result = stitch_sequence_detailed(windows, plan)

    out_format = entries[0]["format"]
    out_scale = entries[0]["scale"]
    ext = _FORMAT_EXT[out_format]
    for f in range(result.sequence.frame_count):
        write_depth_map(
            result.sequence.frame(f), out_dir / f"frame_{f:06d}{ext}", out_format,
            png16_scale=out_scale,
        )

    fallbacks = sum(1 for fit in result.fits if fit.fallback)
    _write_json(out_dir / "run_log.json", {
        "subcommand": "stitch",
        "config": {
            "manifest": str(manifest_path),
            "frame_count": frame_count,
            "window_size": plan.window_size,
            "stride": plan.stride,
            "starts": list(plan.starts),
            "format": out_format,
            "png16_scale": out_scale,
        },
        "versions": _versions(),
        "fits": [
            {
                "window_index": fit.window_index,
                "start": fit.start,
                "scale": fit.params.scale,
                "shift": fit.params.shift,
                "fallback": fit.fallback,
            }
            for fit in result.fits
        ],
        "fallback_count": fallbacks,
    })
    print(
        f"stitched {result.sequence.frame_count} frames from {len(windows)} windows "
        f"({len(result.fits)} fits, {fallbacks} fallbacks) -> {out_dir}"
    )
    return EXIT_OK


def _cmd_eval(config: JobConfig, out_dirs: list) -> int:
    opts = config.options
    thresholds = opts["boundary_thresholds"]
    pred_seq, pred_files, pred_fmt = _read_depth_dir(
        Path(opts["pred"]), opts["format"], opts["png16_scale"]
    )
    gt_seq, gt_files, _ = _read_depth_dir(Path(opts["gt"]), opts["format"], opts["png16_scale"])
    if pred_seq.frame_count != gt_seq.frame_count:
        raise ConfigError(
            f"prediction has {pred_seq.frame_count} frames, ground truth has "
            f"{gt_seq.frame_count}"
        )

    report = evaluate_sequence(pred_seq, gt_seq, opts["granularity"], thresholds)

    out_dir = Path(opts["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    # A marker left by an earlier aborted run must not outlive this one.
    (out_dir / "FAILED").unlink(missing_ok=True)
    out_dirs.append(out_dir)

    if isinstance(report.alignment, AffineParams):
        alignment_json = {"scale": report.alignment.scale, "shift": report.alignment.shift}
    else:
        alignment_json = [{"scale": p.scale, "shift": p.shift} for p in report.alignment]
    _write_json(out_dir / "report.json", {
        "abs_rel": report.abs_rel,
        "delta1": report.delta1,
        "b_recall": report.b_recall,
        "b_f1": report.b_f1,
        "valid_pixel_count": report.valid_pixel_count,
        "granularity": report.granularity,
        "boundary_thresholds": list(report.boundary_thresholds),
        "alignment": alignment_json,
    })

    aligned, params = align_for_eval(pred_seq, gt_seq, opts["granularity"])
    rows = ["frame,file,abs_rel,delta1,b_recall,b_f1,valid_pixels,scale,shift"]
    for f in range(aligned.frame_count):
        pf, gf = aligned.frame(f), gt_seq.frame(f)
        r, _, f1 = boundary_prf(pf, gf, thresholds)
        p = params if isinstance(params, AffineParams) else params[f]
        rows.append(",".join([
            str(f),
            pred_files[f],
            _fmt(abs_rel(pf, gf)),
            _fmt(delta1(pf, gf)),
            "" if r is None else _fmt(r),
            "" if f1 is None else _fmt(f1),
            str(int((pf.valid & gf.valid).sum())),
            _fmt(p.scale),
            _fmt(p.shift),
        ]))
    (out_dir / "per_frame.csv").write_text("\n".join(rows) + "\n")

    _write_json(out_dir / "run_log.json", {
        "subcommand": "eval",
        "config": {
            "pred": str(opts["pred"]),
            "gt": str(opts["gt"]),
            "format": pred_fmt,
            "png16_scale": opts["png16_scale"],
            "granularity": opts["granularity"],
            "boundary_thresholds": list(thresholds),
            "pred_files": pred_files,
            "gt_files": gt_files,
        },
        "versions": _versions(),
    })
    print(
        f"abs_rel={_fmt(report.abs_rel)} delta1={_fmt(report.delta1)} "
        f"b_recall={'n/a' if report.b_recall is None else _fmt(report.b_recall)} "
        f"b_f1={'n/a' if report.b_f1 is None else _fmt(report.b_f1)} -> {out_dir}"
    )
    return EXIT_OK


_BENCH_DEFAULTS = {
    "scene_seed": 7,
    "frames": 450,
    "height": 48,
    "width": 48,
    "motion": 1.0,
    "near": 1.0,
    "far": 10.0,
    "s_lo": 0.9,
    "s_hi": 1.1,
    "t_lo": -1.0,
    "t_hi": 1.0,
    "sigma": 0.01,
    "noise_seed": 100,
    "overlaps": "3,6,9,14,19",
    "seeds": 20,
    "window_size": 45,
}

_BENCH_CASTS = {
    "scene_seed": int, "frames": int, "height": int, "width": int,
    "motion": float, "near": float, "far": float,
    "s_lo": float, "s_hi": float, "t_lo": float, "t_hi": float,
    "sigma": float, "noise_seed": int,
    "overlaps": str, "seeds": int, "window_size": int,
}


def _resolve_bench_options(opts: dict) -> dict:
    resolved = dict(_BENCH_DEFAULTS)
    if opts.get("config") is not None:
        for key, raw in _parse_kv_file(Path(opts["config"])).items():
            if key not in _BENCH_DEFAULTS:
                raise ConfigError(f"unknown bench config key {key!r}")
            try:
                resolved[key] = _BENCH_CASTS[key](raw)
            except ValueError:
                raise ConfigError(f"bench config key {key!r} has bad value {raw!r}") from None
    for key in _BENCH_DEFAULTS:
        if opts.get(key) is not None:  # CLI flags take precedence
            resolved[key] = opts[key]
    return resolved


def _cmd_bench(config: JobConfig, out_dirs: list) -> int:
    opts = _resolve_bench_options(config.options)
    overlaps = (
        _parse_int_list(opts["overlaps"], "overlaps")
        if isinstance(opts["overlaps"], str)
        else list(opts["overlaps"])
    )
    for o in overlaps:
        if o < 1 or o >= opts["window_size"]:
            raise ConfigError(
                f"overlap {o} must satisfy 1 <= O < window_size {opts['window_size']}"
            )
    if len(set(overlaps)) != len(overlaps):
        raise ConfigError("overlap sizes must be distinct")
    if opts["seeds"] < 1:
        raise ConfigError("seeds must be >= 1")
    try:
        scene = SceneConfig(
            seed=opts["scene_seed"], frames=opts["frames"], height=opts["height"],
            width=opts["width"], motion_amplitude=opts["motion"],
            near=opts["near"], far=opts["far"],
        )
        corruption = CorruptionConfig(
            s_lo=opts["s_lo"], s_hi=opts["s_hi"], t_lo=opts["t_lo"], t_hi=opts["t_hi"],
            sigma=opts["sigma"], seed=opts["noise_seed"],
        )
    except ValueError as exc:
        raise ConfigError(f"bad bench configuration: {exc}") from None

    result = run_overlap_ablation(scene, corruption, overlaps, opts["seeds"], opts["window_size"])

    out_path = Path(config.options["out"])
    if out_path.parent != Path("."):
        out_path.parent.mkdir(parents=True, exist_ok=True)
    rows = ["O,seed,abs_rel,delta1,wall_ms"]
    for r in result.records:
        rows.append(
            f"{r.overlap},{r.seed},{_fmt(r.abs_rel)},{_fmt(r.delta1)},{r.wall_ms:.3f}"
        )
    out_path.write_text("\n".join(rows) + "\n")

    log_path = out_path.with_name(out_path.stem + ".run_log.json")
    _write_json(log_path, {
        "subcommand": "bench-synthetic",
        "config": {k: opts[k] for k in sorted(_BENCH_DEFAULTS)},
        "overlaps": overlaps,
        "versions": _versions(),
    })

    print("O    mean_abs_rel    sem_abs_rel     mean_delta1  rel_runtime")
    for s in result.summaries:
        print(
            f"{s.overlap:<4d} {s.mean_abs_rel:<15.9f} {s.sem_abs_rel:<15.9f} "
            f"{s.mean_delta1:<12.6f} {s.rel_runtime:.2f}x"
        )
    print(f"wrote {len(result.records)} rows -> {out_path}")
    return EXIT_OK


def _cmd_embed(config: JobConfig, out_dirs: list) -> int:
    opts = config.options
    ts = _parse_timesteps(opts["timesteps"])
    bad = [t for t in ts if not (0.0 <= t <= 1.0)]
    if bad:
        raise ConfigError(f"timesteps must lie in [0, 1], got {bad}")
    try:
        cfg = EmbeddingConfig(dim=opts["dim"], base=opts["base"], time_scale=opts["time_scale"])
    except ValueError as exc:
        raise ConfigError(f"bad embedding configuration: {exc}") from None
    csv_text = similarity_matrix_csv(ts, cfg)
    if opts.get("out"):
        out_path = Path(opts["out"])
        if out_path.parent != Path("."):
            out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(csv_text)
        print(
            f"wrote {len(ts)}x{len(ts)} similarity matrix "
            f"(dim={cfg.dim} base={_fmt(cfg.base)} time_scale={_fmt(cfg.time_scale)}) "
            f"-> {out_path}"
        )
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def _cmd_lmr_loss(config: JobConfig, out_dirs: list) -> int:
    opts = config.options
    pred = read_raw_tensor(Path(opts["pred"]))
    target = read_raw_tensor(Path(opts["target"]))
    for name, arr in (("pred", pred), ("target", target)):
        if arr.ndim != 4:
            raise FormatError(
                f"{opts[name]}: expected a rank-4 (f, c, h, w) latent tensor, "
                f"got rank {arr.ndim}"
            )
    try:
        weights = LossWeights(lambda_sp=opts["lambda_sp"], lambda_temp=opts["lambda_temp"])
    except ValueError as exc:
        raise ConfigError(f"bad loss weights: {exc}") from None
    report = video_objective(pred, target, weights)
    print(json.dumps({
        "total": report.total,
        "l2": report.l2,
        "l_sp": report.l_sp,
        "l_temp": report.l_temp,
        "lambda_sp": weights.lambda_sp,
        "lambda_temp": weights.lambda_temp,
    }, indent=2, sort_keys=True))
    if opts.get("emit_grad"):
        write_raw_tensor(Path(opts["emit_grad"]), report.gradient)
    return EXIT_OK


_HANDLERS = {
    "stitch": _cmd_stitch,
    "eval": _cmd_eval,
    "bench-synthetic": _cmd_bench,
    "embed-analyze": _cmd_embed,
    "lmr-loss": _cmd_lmr_loss,
}


# ---------------------------------------------------------------------------
# parser and dispatch


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthstitch",
        description="Deterministic video-depth post-processing toolkit.",
        epilog=_EXIT_CODE_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"depthstitch {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("stitch", help="stitch overlapping depth windows into one sequence")
    p.add_argument("--manifest", required=True, help="JSON job manifest")
    p.add_argument("--out", required=True, help="output directory for frames and run log")

    p = sub.add_parser("eval", help="affine-invariant depth metrics for two frame directories")
    p.add_argument("--pred", required=True, help="directory of predicted depth frames")
    p.add_argument("--gt", required=True, help="directory of ground-truth depth frames")
    p.add_argument("--format", default="auto", choices=("auto",) + DEPTH_FORMATS)
    p.add_argument("--png16-scale", type=float, default=None, dest="png16_scale")
    p.add_argument(
        "--granularity", default="per_sequence", choices=("per_sequence", "per_frame")
    )
    p.add_argument(
        "--boundary-thresholds", default=None, dest="boundary_thresholds",
        help="comma-separated ratio thresholds (> 1, ascending)",
    )
    p.add_argument("--out", required=True, help="output directory for report and CSV")

    p = sub.add_parser("bench-synthetic", help="overlap-size ablation on synthetic scenes")
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--out", required=True, help="output CSV path (columns O,seed,abs_rel,delta1,wall_ms)")
    p.add_argument("--scene-seed", type=int, default=None, dest="scene_seed")
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--motion", type=float, default=None)
    p.add_argument("--near", type=float, default=None)
    p.add_argument("--far", type=float, default=None)
    p.add_argument("--s-lo", type=float, default=None, dest="s_lo")
    p.add_argument("--s-hi", type=float, default=None, dest="s_hi")
    p.add_argument("--t-lo", type=float, default=None, dest="t_lo")
    p.add_argument("--t-hi", type=float, default=None, dest="t_hi")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--noise-seed", type=int, default=None, dest="noise_seed")
    p.add_argument("--overlaps", default=None, help="comma-separated overlap sizes")
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--window-size", type=int, default=None, dest="window_size")

    p = sub.add_parser("embed-analyze", help="timestep embedding similarity matrix as CSV")
    p.add_argument(
        "--timesteps", required=True,
        help="comma list ('0,0.5,1') or inclusive range ('0:1:0.1'), all in [0, 1]",
    )
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--base", type=float, default=10000.0)
    p.add_argument("--time-scale", type=float, default=1000.0, dest="time_scale")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")

    p = sub.add_parser("lmr-loss", help="loss report for two rank-4 raw latent tensors")
    p.add_argument("--pred", required=True, help="raw tensor of predicted latents")
    p.add_argument("--target", required=True, help="raw tensor of target latents")
    p.add_argument("--lambda-sp", type=float, default=0.5, dest="lambda_sp")
    p.add_argument("--lambda-temp", type=float, default=0.5, dest="lambda_temp")
    p.add_argument("--emit-grad", default=None, dest="emit_grad",
                   help="also write d(total)/d(pred) as a raw tensor")
    return parser


def run(config: JobConfig) -> int:
    """Execute one resolved job, mapping failures to documented exit codes."""
    handler = _HANDLERS.get(config.subcommand)
    if handler is None:
        print(f"error: unknown subcommand {config.subcommand!r}", file=sys.stderr)
        return EXIT_CONFIG
    out_dirs: list[Path] = []
    try:
        return handler(config, out_dirs)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_FORMAT
    except (DegenerateOverlapError, MetricDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    except Exception as exc:  # pragma: no cover - defensive
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_UNEXPECTED
    for d in out_dirs:
        try:
            (d / "FAILED").write_text("job aborted; this directory is incomplete\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return EXIT_OK
        return code if isinstance(code, int) else EXIT_CONFIG
    options = {k: v for k, v in vars(args).items() if k != "subcommand"}
    if args.subcommand == "eval":
        if options.get("boundary_thresholds") is None:
            options["boundary_thresholds"] = list(DEFAULT_BOUNDARY_THRESHOLDS)
        else:
            try:
                options["boundary_thresholds"] = [
                    float(t) for t in options["boundary_thresholds"].split(",")
                ]
            except ValueError:
                print("error: bad --boundary-thresholds", file=sys.stderr)
                return EXIT_CONFIG
    return run(JobConfig(args.subcommand, options))


if __name__ == "__main__":
    sys.exit(main())

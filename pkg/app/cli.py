"""Batch command line for saliency maps and fixation metrics.

Metrics print CSV on stdout: one row per frame, then ``mean`` and
``variance`` rows. Exit status is 0 on success, 1 on input errors and 2 on
internal errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence

from pydantic import ValidationError

from app.core import bench
from app.core.config import PipelineSettings
from app.core.errors import InputError, SaliencyError
from app.core.evaluation import (
    auc,
    cas,
    importance_from_labels,
    intersubject_roc,
    mean_nsv,
    normxcorr,
    nsv,
    roc_curve,
    summarize,
)
from app.core.io_formats import (
    DEFAULT_FRAME_PATTERN,
    default_importance_table,
    list_frame_sequence,
    read_fixations,
    read_frame_stack,
    read_image,
    read_importance_table,
    read_label_map,
    read_map,
    read_sample_csv,
    write_saliency,
)
from app.core.kdp_entropy import (
    estimate_conditional_entropy,
    estimate_joint_entropy,
    estimate_kl_divergence,
)
from app.core.saliency import bias_ratio, spatial_saliency, spatiotemporal_saliency, temporal_saliency
from app.models.domain import SampleMatrix, parse_roles

logger = logging.getLogger(__name__)

SWEEP_PATCH_SIZES = tuple(range(7, 22, 2))
EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fmt(value: float) -> str:
    text = f"{value:.6f}"
    return "0.000000" if text == "-0.000000" else text


def _print_rows(rows: Sequence[Sequence[object]]) -> None:
    for row in rows:
        print(",".join(_fmt(cell) if isinstance(cell, float) else str(cell) for cell in row))


def _print_metric(metric: str, values: Sequence[float], extra: Sequence[tuple[str, float]] = ()) -> None:
    mean, variance = summarize(values)
    rows: list[tuple[object, object]] = [("frame", metric)]
    rows.extend((index, float(value)) for index, value in enumerate(values))
    rows.extend([("mean", mean), ("variance", variance)])
    rows.extend(extra)
    _print_rows(rows)


def _settings(args: argparse.Namespace) -> PipelineSettings:
    fields = (
        "method",
        "patch_size",
        "denoise",
        "pca",
        "frames",
        "nsv_radius",
        "random_count",
        "seed",
        "decay_length",
        "format",
    )
    return PipelineSettings(
        **{name: getattr(args, name) for name in fields if getattr(args, name, None) is not None}
    )


def _cmd_spatial(args: argparse.Namespace, settings: PipelineSettings) -> int:
    saliency = spatial_saliency(
        read_image(args.image),
        method=settings.method,
        patch_size=settings.resolved_patch_size,
        denoise=settings.denoise_enabled,
        pca=settings.pca_enabled,
    )
    write_saliency(saliency, args.out, settings.format)
    return EXIT_OK


def _load_stack(args: argparse.Namespace, settings: PipelineSettings):
    manifest = list_frame_sequence(args.directory, args.pattern)
    return read_frame_stack(manifest, settings.frames)


def _cmd_temporal(args: argparse.Namespace, settings: PipelineSettings) -> int:
    saliency = temporal_saliency(
        _load_stack(args, settings),
        method=settings.method,
        patch_size=settings.resolved_patch_size,
        denoise=settings.denoise_enabled,
        frames=settings.frames,
    )
    write_saliency(saliency, args.out, settings.format)
    return EXIT_OK


def _cmd_spatiotemporal(args: argparse.Namespace, settings: PipelineSettings) -> int:
    saliency = spatiotemporal_saliency(
        _load_stack(args, settings),
        method=settings.method,
        patch_size=settings.resolved_patch_size,
        denoise=settings.denoise_enabled,
        frames=settings.frames,
        pca=settings.pca_enabled,
    )
    write_saliency(saliency, args.out, settings.format)
    return EXIT_OK


def _cmd_bias_ratio(args: argparse.Namespace, settings: PipelineSettings) -> int:
    plane = read_image(args.image)
    sizes = SWEEP_PATCH_SIZES if args.sweep else (settings.patch_size or 7,)
    rows: list[tuple[object, object]] = [("patch_size", "bias_ratio")]
    for size in sizes:
        rows.append((size, bias_ratio(plane, size, settings.denoise_enabled)))
    _print_rows(rows)
    return EXIT_OK


def _cmd_eval_roc(args: argparse.Namespace, settings: PipelineSettings) -> int:
    fixations = read_fixations(args.fixations)
    values = [auc(roc_curve(read_map(path), fixations, frame)) for frame, path in enumerate(args.maps)]
    _print_metric("auc", values)
    return EXIT_OK


def _cmd_eval_nsv(args: argparse.Namespace, settings: PipelineSettings) -> int:
    fixations = read_fixations(args.fixations)
    per_frame, pooled = [], []
    for frame, path in enumerate(args.maps):
        grid = read_map(path)
        per_frame.append(mean_nsv(grid, fixations, frame, settings.nsv_radius))
        pooled.extend(nsv(grid, (r.x, r.y), settings.nsv_radius) for r in fixations.for_frame(frame))
    _print_metric("nsv", per_frame, [("pooled", summarize(pooled)[0])])
    return EXIT_OK


def _cmd_eval_cas(args: argparse.Namespace, settings: PipelineSettings) -> int:
    fixations = read_fixations(args.fixations)
    values = [
        cas(read_map(path), fixations, frame, settings.nsv_radius, settings.random_count, settings.seed)
        for frame, path in enumerate(args.maps)
    ]
    _print_metric("cas", values)
    return EXIT_OK


def _cmd_eval_isroc(args: argparse.Namespace, settings: PipelineSettings) -> int:
    fixations = read_fixations(args.fixations)
    shape = read_map(args.reference).shape
    subjects = fixations.by_subject()
    frames = fixations.frames()
    if not frames:
        raise InputError(f"No fixations in {args.fixations}.")
    values = [intersubject_roc(subjects, shape, frame, settings.decay_length) for frame in frames]
    _print_metric("isroc", values)
    return EXIT_OK


def _cmd_eval_xcorr(args: argparse.Namespace, settings: PipelineSettings) -> int:
    if len(args.pairs) % 2:
        raise InputError("eval-xcorr expects MAP IMPORTANCE pairs.")
    table = None
    if args.labels:
        table = read_importance_table(args.table) if args.table else default_importance_table()
    values = []
    for index in range(0, len(args.pairs), 2):
        saliency = read_map(args.pairs[index])
        if table is None:
            importance = read_map(args.pairs[index + 1])
        else:
            importance = importance_from_labels(read_label_map(args.pairs[index + 1]), table).values
        values.append(normxcorr(saliency, importance))
    _print_metric("normxcorr", values)
    return EXIT_OK


def _cmd_entropy(args: argparse.Namespace, settings: PipelineSettings) -> int:
    samples = read_sample_csv(args.samples)
    if args.roles is None:
        value = estimate_joint_entropy(samples)
    else:
        samples = SampleMatrix(samples.values, parse_roles(args.roles))
        if settings.method == "con":
            value = estimate_conditional_entropy(samples)
        else:
            value = estimate_kl_divergence(samples)
    print(_fmt(value))
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace, settings: PipelineSettings) -> int:
    plane = read_image(args.image) if args.image else bench.textured_scene(seed=settings.seed)
    medians = bench.method_timings(plane, args.repeats, settings.patch_size, settings.denoise_enabled)
    scaling = bench.entropy_scaling()
    rows: list[tuple[object, object]] = [("method", "median_seconds")]
    rows.extend((method, seconds) for method, seconds in medians.items())
    rows.append(("kld_over_con", medians["kld"] / medians["con"]))
    rows.append(("n", "seconds"))
    rows.extend(scaling)
    rows.append(("loglog_slope", bench.loglog_slope(scaling)))
    rows.append(("rss_mb", bench.resident_memory_mb()))
    _print_rows(rows)
    return EXIT_OK


def _add_pipeline_options(parser: argparse.ArgumentParser, out: bool = True) -> None:
    parser.add_argument("--method", choices=("con", "kld"), default="kld")
    parser.add_argument("--patch-size", dest="patch_size", type=int)
    parser.add_argument("--denoise", choices=("on", "off"), default="on")
    parser.add_argument("--pca", choices=("on", "off"), default="off")
    if out:
        parser.add_argument("--out", required=True)
        parser.add_argument("--format", choices=("pgm8", "raw64"), default="pgm8")


def _add_frame_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("directory")
    parser.add_argument("--frames", type=int, default=8)
    parser.add_argument("--pattern", default=DEFAULT_FRAME_PATTERN)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="saliency", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name: str, handler: Callable[..., int], help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.set_defaults(handler=handler)
        return sub

    sub = command("spatial", _cmd_spatial, "spatial saliency map of one image")
    sub.add_argument("image")
    _add_pipeline_options(sub)

    for name, handler in (("temporal", _cmd_temporal), ("spatiotemporal", _cmd_spatiotemporal)):
        sub = command(name, handler, f"{name} saliency map of the last frames in a directory")
        _add_frame_options(sub)
        _add_pipeline_options(sub)

    sub = command("bias-ratio", _cmd_bias_ratio, "share of negative KL patches")
    sub.add_argument("image")
    sub.add_argument("--patch-size", dest="patch_size", type=int)
    sub.add_argument("--sweep", action="store_true", help="patch sizes 7, 9, ..., 21")
    sub.add_argument("--denoise", choices=("on", "off"), default="on")

    for name, handler in (("eval-roc", _cmd_eval_roc), ("eval-nsv", _cmd_eval_nsv), ("eval-cas", _cmd_eval_cas)):
        sub = command(name, handler, f"{name[5:]} per frame; map i scores frame i")
        sub.add_argument("fixations")
        sub.add_argument("maps", nargs="+")
        sub.add_argument("--nsv-radius", dest="nsv_radius", type=int, default=16)
        sub.add_argument("--random-count", dest="random_count", type=int, default=100)
        sub.add_argument("--seed", type=int, default=0)

    sub = command("eval-isroc", _cmd_eval_isroc, "inter-subject ROC per frame")
    sub.add_argument("fixations")
    sub.add_argument("reference", help="any map or image with the frame size")
    sub.add_argument("--decay-length", dest="decay_length", type=float, default=25.0)

    sub = command("eval-xcorr", _cmd_eval_xcorr, "normalized cross-correlation per map pair")
    sub.add_argument("pairs", nargs="+", metavar="MAP IMPORTANCE")
    sub.add_argument("--labels", action="store_true", help="importance files are label PGMs")
    sub.add_argument("--table", help="class importance CSV (default: shipped table)")

    sub = command("entropy", _cmd_entropy, "entropy, CON or KLD of a CSV sample matrix")
    sub.add_argument("samples")
    sub.add_argument("--roles", help="one s/c code per column, e.g. ssssc")
    sub.add_argument("--method", choices=("con", "kld"), default="kld")

    sub = command("bench", _cmd_bench, "CON vs KLD timing and N-scaling report")
    sub.add_argument("image", nargs="?")
    sub.add_argument("--patch-size", dest="patch_size", type=int)
    sub.add_argument("--denoise", choices=("on", "off"), default="on")
    sub.add_argument("--repeats", type=int, default=5)
    sub.add_argument("--seed", type=int, default=0)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        settings = _settings(args)
        return args.handler(args, settings)
    except (SaliencyError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        logger.exception("Internal error while running %s", args.command)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())

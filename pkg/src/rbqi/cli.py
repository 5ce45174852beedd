"""Command-line interface: ``rbqi score | evaluate | sweep``.

Exit codes:
  0  success
  2  usage, I/O or manifest error
  3  reference and reconstruction differ in size
  4  evaluation finished but some pairs were skipped
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import replace

from .baselines import PSNR_IDENTICAL, BaselineParams, psnr
from .color import ColorParams
from .errors import DimensionMismatch, InputError, ManifestError, RBQIError, UnknownParameter
from .evaluation import (
    METRICS,
    MetricConfig,
    compute_metrics,
    evaluate,
    load_external_scores,
    load_manifest,
)
from .image import ImagePair, load_pair, write_pgm
from .pooling import PoolingParams, difference_maps, rbqi
from .pyramid import check_levels
from .structure import StructureParams

EXIT_OK = 0
EXIT_IO = 2
EXIT_DIMENSIONS = 3
EXIT_SKIPPED = 4

SWEEPABLE = {"nhood": "nhood", "l": "levels", "levels": "levels"}

log = logging.getLogger("rbqi")


def _metric_list(text):
    names = [m.strip().lower() for m in text.split(",") if m.strip()]
    unknown = [m for m in names if m not in METRICS]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown metric(s) {', '.join(unknown)}; choose from {', '.join(METRICS)}"
        )
    return names


def _odd_positive(text):
    v = int(text)
    if v < 1 or v % 2 == 0:
        raise argparse.ArgumentTypeError(f"must be an odd integer >= 1, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _exponent(text):
    v = float(text)
    if not v >= 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _add_common(p, default_metrics):
    p.add_argument("--metrics", type=_metric_list, default=default_metrics,
                   help=f"comma-separated subset of: {', '.join(METRICS)}")
    p.add_argument("--nhood", type=_odd_positive, default=17, help="search window width (odd)")
    p.add_argument("--levels", "-L", type=_positive_int, default=3, help="pyramid levels")
    p.add_argument("--beta-s", type=_exponent, default=3.5)
    p.add_argument("--beta-c", type=_exponent, default=3.5)
    p.add_argument("--ep-threshold", type=_positive_float, default=20.0,
                   help="error-pixel threshold in gray levels")
    p.add_argument("--output", choices=("csv", "json", "table"), default="table")
    p.add_argument("--workers", type=_positive_int, default=None,
                   help="parallel workers for batch scoring (default: all cores)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rbqi",
        description="Quality of reconstructed background images against a reference.",
        epilog="exit codes: 0 ok, 2 usage/I/O/manifest error, 3 size mismatch, 4 pairs skipped",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score one reference/reconstruction pair")
    p.add_argument("reference")
    p.add_argument("reconstructed")
    _add_common(p, ["rbqi"])
    p.add_argument("--dump-maps", metavar="DIR", help="write per-level difference maps as PGM")

    p = sub.add_parser("evaluate", help="correlate metrics with MOS over a manifest")
    p.add_argument("manifest")
    _add_common(p, ["rbqi", "age", "ep", "pep", "cep", "pcep", "psnr", "ssim", "msssim"])
    p.add_argument("--subset", metavar="TAG", help="restrict to one subset tag")
    p.add_argument("--external", metavar="CSV", action="append", default=[],
                   help="extra pair_id,metric,score CSV (repeatable)")

    p = sub.add_parser("sweep", help="RBQI performance over nhood or L values")
    p.add_argument("manifest")
    _add_common(p, ["rbqi"])
    p.add_argument("--param", required=True, help="nhood or L")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--subset", metavar="TAG")
    return parser


def config_from_args(args) -> MetricConfig:
    return MetricConfig(
        structure=StructureParams(nhood=args.nhood),
        color=ColorParams(),
        pooling=PoolingParams(beta_s=args.beta_s, beta_c=args.beta_c),
        baseline=BaselineParams(ep_threshold=args.ep_threshold),
        levels=args.levels,
    )


def _json_value(v):
    if v is PSNR_IDENTICAL:
        return "identical"
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return _json_value(obj)


def _text_value(v):
    if v is PSNR_IDENTICAL:
        return "identical"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def score_record(pair: ImagePair, metrics, cfg: MetricConfig):
    """Metric values for one pair, as printed by ``rbqi score``."""
    record = {}
    details = None
    for m in metrics:
        if m == "rbqi":
            res = rbqi(pair, cfg.levels, cfg.structure, cfg.color, cfg.pooling)
            record[m] = res.rbqi
            details = {k: v for k, v in res.as_dict().items() if k not in ("rbqi", "params")}
        elif m == "psnr":
            record[m] = psnr(pair)
        else:
            record.update(compute_metrics(pair, [m], cfg))
    return record, details


def _dump_maps(directory, pair, cfg):
    os.makedirs(directory, exist_ok=True)
    for l, lv in enumerate(difference_maps(pair, cfg.levels, cfg.structure, cfg.color)):
        s = lv.structure
        write_pgm(os.path.join(directory, f"si_l{l}.pgm"), s.si, -1.0, 1.0)
        write_pgm(os.path.join(directory, f"ds_l{l}.pgm"), s.d_s, 0.0, 1.0)
        write_pgm(os.path.join(directory, f"ftex_l{l}.pgm"), s.texture_flags, 0.0, 1.0)
        write_pgm(os.path.join(directory, f"dc_l{l}.pgm"), lv.d_c)
        write_pgm(os.path.join(directory, f"alphac_l{l}.pgm"), lv.alpha_c)


def cmd_score(args, out) -> int:
    cfg = config_from_args(args)
    try:
        pair = load_pair(args.reference, args.reconstructed)
    except DimensionMismatch as exc:
        print(f"rbqi: {exc}", file=sys.stderr)
        return EXIT_DIMENSIONS
    except (OSError, RBQIError) as exc:
        print(f"rbqi: cannot read image: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        if "rbqi" in args.metrics:
            check_levels(pair.reference.shape, cfg.levels)
        record, details = score_record(pair, args.metrics, cfg)
        if args.dump_maps:
            _dump_maps(args.dump_maps, pair, cfg)
    except InputError as exc:
        print(f"rbqi: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"rbqi: {exc}", file=sys.stderr)
        return EXIT_IO

    if args.output == "json":
        doc = {
            "reference": args.reference,
            "reconstructed": args.reconstructed,
            "scores": record,
            "params": cfg.as_dict(),
        }
        if details is not None:
            doc["rbqi_details"] = details
        json.dump(_jsonable(doc), out, indent=2, sort_keys=False)
        out.write("\n")
    elif args.output == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["reference", "reconstructed"] + list(record))
        w.writerow([args.reference, args.reconstructed] + [_text_value(v) for v in record.values()])
    else:
        for k, v in record.items():
            out.write(f"{k:<8} {_text_value(v)}\n")
    return EXIT_OK


def _workers(args):
    return args.workers or os.cpu_count() or 1


def _load(args):
    manifest = load_manifest(args.manifest, check_files=False)
    external = {}
    for path in getattr(args, "external", []):
        for metric, table in load_external_scores(path).items():
            external.setdefault(metric, {}).update(table)
    return manifest, external


def _report_failures(failures):
    for pid, why in failures.items():
        print(f"rbqi: skipped {pid}: {why}", file=sys.stderr)


def cmd_evaluate(args, out) -> int:
    cfg = config_from_args(args)
    try:
        manifest, external = _load(args)
    except (OSError, ManifestError) as exc:
        print(f"rbqi: {exc}", file=sys.stderr)
        return EXIT_IO
    report = evaluate(manifest, args.metrics, cfg, external=external, subset=args.subset,
                      workers=_workers(args))
    if args.output == "json":
        json.dump(_jsonable(report.as_dict()), out, indent=2)
        out.write("\n")
    elif args.output == "csv":
        out.write(report.to_csv())
    else:
        out.write(report.to_table() + "\n")
    _report_failures(report.failures)
    return EXIT_SKIPPED if report.failures else EXIT_OK


def parse_sweep(param, values):
    key = SWEEPABLE.get(param.strip().lower())
    if key is None:
        raise UnknownParameter(f"cannot sweep {param!r}; only nhood and L are sweepable")
    try:
        vals = [int(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"sweep values must be integers: {values!r}") from None
    if not vals:
        raise InputError("no sweep values given")
    if key == "nhood" and any(v < 1 or v % 2 == 0 for v in vals):
        raise InputError("nhood values must be odd and >= 1")
    if key == "levels" and any(v < 1 for v in vals):
        raise InputError("L values must be >= 1")
    return key, vals


def sweep(manifest, key, values, cfg: MetricConfig, subset=None, workers=1):
    """One RBQI evaluation report per swept value, as ``[(value, report)]``."""
    out = []
    for v in values:
        if key == "nhood":
            c = replace(cfg, structure=replace(cfg.structure, nhood=v))
        else:
            c = replace(cfg, levels=v)
        out.append((v, evaluate(manifest, ["rbqi"], c, subset=subset, workers=workers)))
    return out


def sweep_table(key, results) -> str:
    label = "nhood" if key == "nhood" else "L"
    groups = [r.subset for r in results[0][1].rows]
    head = f"{'':<10}" + "".join(f"| {g:^28} " for g in groups)
    sub = f"{label:<10}" + "".join(f"| {'PCC':>8} {'SROCC':>8} {'RMSE':>8} " for _ in groups)
    lines = [head, sub, "-" * len(sub)]
    for v, rep in results:
        cells = "".join(f"| {r.pcc:>8.4f} {r.srocc:>8.4f} {r.rmse:>8.4f} " for r in rep.rows)
        lines.append(f"{label + '=' + str(v):<10}" + cells)
    return "\n".join(lines)


def cmd_sweep(args, out) -> int:
    try:
        key, values = parse_sweep(args.param, args.values)
    except InputError as exc:
        print(f"rbqi: {exc}", file=sys.stderr)
        return EXIT_IO
    cfg = config_from_args(args)
    try:
        manifest, _ = _load(args)
    except (OSError, ManifestError) as exc:
        print(f"rbqi: {exc}", file=sys.stderr)
        return EXIT_IO
    results = sweep(manifest, key, values, cfg, subset=args.subset, workers=_workers(args))
    failures = {}
    for _, rep in results:
        failures.update(rep.failures)
    if args.output == "json":
        doc = [{"param": key, "value": v, "report": rep.as_dict()} for v, rep in results]
        json.dump(_jsonable(doc), out, indent=2)
        out.write("\n")
    elif args.output == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "value", "subset", "n", "pcc", "srocc", "rmse", "p_pcc", "p_srocc"])
        for v, rep in results:
            for r in rep.rows:
                w.writerow([key, v, r.subset, r.n] + [repr(x) for x in (r.pcc, r.srocc, r.rmse, r.p_pcc, r.p_srocc)])
        out.write(buf.getvalue())
    else:
        out.write(sweep_table(key, results) + "\n")
    _report_failures(failures)
    return EXIT_SKIPPED if failures else EXIT_OK


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"score": cmd_score, "evaluate": cmd_evaluate, "sweep": cmd_sweep}[args.command]
    return handler(args, out)


if __name__ == "__main__":
    sys.exit(main())

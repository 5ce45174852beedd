"""Metric-versus-MOS evaluation: manifests, logistic mapping, correlations."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.special import expit

from .baselines import PSNR_IDENTICAL, BaselineParams, age, error_pixels, msssim, psnr, ssim
from .color import ColorParams
from .errors import (
    DegenerateInput,
    MissingFile,
    MosOutOfRange,
    ParseError,
    RBQIError,
    TooFewSamples,
    UnknownParameter,
)
from .image import ImagePair, load_pair
from .pooling import PoolingParams, rbqi
from .structure import StructureParams

__all__ = [
    "ManifestEntry",
    "DatasetManifest",
    "LogisticFit",
    "ReportRow",
    "EvaluationReport",
    "MetricConfig",
    "METRICS",
    "load_manifest",
    "load_external_scores",
    "logistic",
    "fit_logistic",
    "correlations",
    "score_pairs",
    "evaluate",
]

log = logging.getLogger(__name__)

MOS_RANGE = (1.0, 5.0)
MIN_SAMPLES = 5
ALL = "all"


@dataclass(frozen=True)
class ManifestEntry:
    pair_id: str
    reference: str
    reconstructed: str
    mos: float
    subset: str


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    path: str | None = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def subsets(self) -> list[str]:
        seen = []
        for e in self.entries:
            if e.subset not in seen:
                seen.append(e.subset)
        return seen


_MANIFEST_COLUMNS = ("pair_id", "reference", "reconstructed", "mos", "subset")


def load_manifest(path, mos_range=MOS_RANGE, check_files: bool = True) -> DatasetManifest:
    """Read and validate a manifest CSV.

    Relative image paths are resolved against the manifest's directory.
    """
    path = os.fspath(path)
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty manifest", line=1) from None
        header = [h.strip() for h in header]
        missing = [c for c in _MANIFEST_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"missing columns: {', '.join(missing)}", line=1)
        col = {name: header.index(name) for name in _MANIFEST_COLUMNS}
        entries, seen = [], {}
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=line)
            get = lambda name: row[col[name]].strip()  # noqa: E731
            pair_id = get("pair_id")
            if not pair_id:
                raise ParseError("empty pair_id", line=line)
            if pair_id in seen:
                raise ParseError(
                    f"duplicate pair_id {pair_id!r} (first seen on line {seen[pair_id]})",
                    line=line,
                )
            seen[pair_id] = line
            try:
                mos = float(get("mos"))
            except ValueError:
                raise ParseError(f"bad mos value {get('mos')!r}", line=line) from None
            if not math.isfinite(mos) or not mos_range[0] <= mos <= mos_range[1]:
                raise MosOutOfRange(
                    f"line {line}: mos {mos:g} outside [{mos_range[0]:g}, {mos_range[1]:g}]"
                )
            paths = []
            for name in ("reference", "reconstructed"):
                p = get(name)
                if not p:
                    raise ParseError(f"empty {name} path", line=line)
                p = os.path.normpath(os.path.join(base, p))
                if check_files and not os.path.exists(p):
                    raise MissingFile(p, line=line)
                paths.append(p)
            entries.append(ManifestEntry(pair_id, paths[0], paths[1], mos, get("subset")))
    return DatasetManifest(tuple(entries), path=path)


def load_external_scores(path) -> dict[str, dict[str, float]]:
    """Read a ``pair_id, metric, score`` CSV into ``{metric: {pair_id: score}}``."""
    out: dict[str, dict[str, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for need in ("pair_id", "metric", "score"):
            if need not in (reader.fieldnames or []):
                raise ParseError(f"external score file lacks column {need!r}", line=1)
        for row in reader:
            try:
                value = float(row["score"])
            except ValueError:
                raise ParseError(f"bad score {row['score']!r}", line=reader.line_num) from None
            out.setdefault(row["metric"].strip(), {})[row["pair_id"].strip()] = value
    return out


# -- logistic mapping -------------------------------------------------------


def logistic(scores, gamma):
    """Four-parameter logistic mapping of metric scores to predicted MOS."""
    g1, g2, g3, g4 = gamma
    return (g1 - g2) * expit((np.asarray(scores, dtype=np.float64) - g3) / abs(g4)) + g2


def _jacobian(x, gamma):
    g1, g2, g3, g4 = gamma
    s4 = abs(g4)
    z = (x - g3) / s4
    s = expit(z)
    ds = s * (1.0 - s)
    J = np.empty((x.size, 4))
    J[:, 0] = s
    J[:, 1] = 1.0 - s
    J[:, 2] = -(g1 - g2) * ds / s4
    J[:, 3] = -(g1 - g2) * ds * z / s4 * np.sign(g4)
    return J


@dataclass(frozen=True)
class LogisticFit:
    gamma: tuple[float, float, float, float]
    converged: bool
    iterations: int
    residual_norm: float

    def predict(self, scores):
        return logistic(scores, self.gamma)


def fit_logistic(scores, mos, max_iter: int = 2000, tol: float = 1e-10) -> LogisticFit:
    """Least-squares fit of the logistic mapping by Levenberg-Marquardt.

    Starts from ``(max(mos), min(mos), median(scores), std(scores))``
    with the first two swapped when scores and MOS are anti-correlated.
    A fit that hits ``max_iter`` or collapses the slope parameter is
    returned with ``converged=False``.
    """
    x = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(mos, dtype=np.float64).ravel()
    if x.size != y.size:
        raise DegenerateInput(f"{x.size} scores but {y.size} MOS values")
    if x.size < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInput("scores and MOS must be finite")

    if np.ptp(y) == 0:
        c = float(y[0])
        spread = float(np.std(x))
        return LogisticFit((c, c, float(np.median(x)), spread if spread > 0 else 1.0), True, 0, 0.0)
    if np.ptp(x) == 0:
        raise DegenerateInput("all scores are identical")

    hi, lo = float(y.max()), float(y.min())
    if stats.spearmanr(x, y)[0] < 0:
        hi, lo = lo, hi
    g = np.array([hi, lo, float(np.median(x)), float(np.std(x))])

    def cost(gamma):
        r = logistic(x, gamma) - y
        return float(r @ r), r

    c, r = cost(g)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = _jacobian(x, g)
        A = J.T @ J
        grad = J.T @ r
        improved = False
        while lam < 1e16:
            damp = A + lam * np.diag(np.maximum(np.diag(A), 1e-12))
            try:
                step = np.linalg.solve(damp, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            g_new = g + step
            if g_new[3] == 0:
                lam *= 10.0
                continue
            c_new, r_new = cost(g_new)
            if c_new <= c:
                improved = True
                break
            lam *= 10.0
        if not improved:
            # No descent direction left: a (local) minimum.
            converged = True
            break
        rel = (c - c_new) / c if c > 0 else 0.0
        g, c, r = g_new, c_new, r_new
        lam = max(lam / 10.0, 1e-15)
        if c == 0 or rel < tol:
            converged = True
            break

    if not abs(g[3]) > 1e-12 * max(1.0, float(np.ptp(x))):
        converged = False
    return LogisticFit(tuple(float(v) for v in g), converged, it, math.sqrt(c))


# -- correlation statistics --------------------------------------------------


def _t_pvalue(rho, n):
    if n <= 2:
        return float("nan")
    if abs(rho) >= 1.0:
        return 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return float(2.0 * stats.t.sf(abs(t), n - 2))


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0:
        return float("nan")
    return max(-1.0, min(1.0, float(a @ b) / den))


@dataclass(frozen=True)
class ReportRow:
    metric: str
    subset: str
    n: int
    pcc: float
    srocc: float
    rmse: float
    p_pcc: float
    p_srocc: float
    fit_converged: bool = True

    def as_dict(self):
        return asdict(self)


def correlations(predicted, raw, mos, metric: str = "", subset: str = ALL) -> ReportRow:
    """PCC and RMSE on fitted predictions, SROCC on raw scores, with
    two-tailed t-test p-values."""
    p = np.asarray(predicted, dtype=np.float64).ravel()
    x = np.asarray(raw, dtype=np.float64).ravel()
    y = np.asarray(mos, dtype=np.float64).ravel()
    n = y.size
    if not p.size == x.size == n:
        raise DegenerateInput("predicted, raw and mos must have equal lengths")
    if n < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {n}")
    pcc = _pearson(p, y)
    srocc = _pearson(stats.rankdata(x), stats.rankdata(y))
    rmse = math.sqrt(float(np.mean((p - y) ** 2)))
    return ReportRow(
        metric=metric,
        subset=subset,
        n=n,
        pcc=pcc,
        srocc=srocc,
        rmse=rmse,
        p_pcc=_t_pvalue(pcc, n) if math.isfinite(pcc) else float("nan"),
        p_srocc=_t_pvalue(srocc, n) if math.isfinite(srocc) else float("nan"),
    )


# -- metric registry and batch scoring ----------------------------------------


@dataclass(frozen=True)
class MetricConfig:
    structure: StructureParams = field(default_factory=StructureParams)
    color: ColorParams = field(default_factory=ColorParams)
    pooling: PoolingParams = field(default_factory=PoolingParams)
    baseline: BaselineParams = field(default_factory=BaselineParams)
    levels: int = 3

    def as_dict(self):
        return {
            "levels": self.levels,
            "structure": self.structure.as_dict(),
            "color": self.color.as_dict(),
            "pooling": self.pooling.as_dict(),
            "baseline": self.baseline.as_dict(),
        }


def _psnr_finite(pair, cfg):
    value = psnr(pair)
    if value is PSNR_IDENTICAL:
        # Bound set by the smallest nonzero 8-bit MSE, one level at one pixel.
        n = pair.reference.width * pair.reference.height
        return 10.0 * math.log10(cfg.baseline.dynamic_range**2 * n)
    return value


def _ep(pair, cfg):
    return error_pixels(pair, tau=cfg.baseline.ep_threshold)


METRICS = {
    "rbqi": lambda pair, cfg: rbqi(pair, cfg.levels, cfg.structure, cfg.color, cfg.pooling).rbqi,
    "age": lambda pair, cfg: age(pair),
    "ep": lambda pair, cfg: float(_ep(pair, cfg).ep),
    "pep": lambda pair, cfg: _ep(pair, cfg).pep,
    "cep": lambda pair, cfg: float(_ep(pair, cfg).cep),
    "pcep": lambda pair, cfg: _ep(pair, cfg).pcep,
    "psnr": _psnr_finite,
    "ssim": lambda pair, cfg: ssim(pair, params=cfg.baseline),
    "msssim": lambda pair, cfg: msssim(pair, params=cfg.baseline),
}


def compute_metrics(pair: ImagePair, metrics, cfg: MetricConfig) -> dict[str, float]:
    unknown = [m for m in metrics if m not in METRICS]
    if unknown:
        raise UnknownParameter(f"unknown metric(s): {', '.join(unknown)}")
    return {m: float(METRICS[m](pair, cfg)) for m in metrics}


def _score_entry(args):
    entry, metrics, cfg = args
    try:
        pair = load_pair(entry.reference, entry.reconstructed)
        return entry.pair_id, compute_metrics(pair, metrics, cfg), None
    except (OSError, RBQIError) as exc:
        return entry.pair_id, None, f"{type(exc).__name__}: {exc}"


def score_pairs(manifest: DatasetManifest, metrics, cfg: MetricConfig | None = None, workers: int = 1):
    """Score every manifest pair with every metric.

    Returns ``(scores, failures)`` where ``scores`` maps pair_id to a
    ``{metric: value}`` dict in manifest order and ``failures`` maps the
    pair_ids that could not be scored to a reason.
    """
    cfg = cfg or MetricConfig()
    unknown = [m for m in metrics if m not in METRICS]
    if unknown:
        raise UnknownParameter(f"unknown metric(s): {', '.join(unknown)}")
    jobs = [(e, tuple(metrics), cfg) for e in manifest]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_score_entry, jobs))
    else:
        results = [_score_entry(j) for j in jobs]
    scores, failures = {}, {}
    for pair_id, values, err in results:
        if err is None:
            scores[pair_id] = values
        else:
            log.warning("skipping pair %s: %s", pair_id, err)
            failures[pair_id] = err
    return scores, failures


# -- reports ------------------------------------------------------------------


@dataclass
class EvaluationReport:
    rows: list[ReportRow]
    scores: dict[str, dict[str, float]] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def row(self, metric, subset=ALL) -> ReportRow:
        for r in self.rows:
            if r.metric == metric and r.subset == subset:
                return r
        raise KeyError((metric, subset))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "subset", "n", "pcc", "srocc", "rmse", "p_pcc", "p_srocc", "fit_converged"])
        for r in self.rows:
            writer.writerow(
                [r.metric, r.subset, r.n]
                + [_fmt(v) for v in (r.pcc, r.srocc, r.rmse, r.p_pcc, r.p_srocc)]
                + [int(r.fit_converged)]
            )
        return buf.getvalue()

    def to_table(self) -> str:
        head = f"{'metric':<10} {'subset':<10} {'n':>5} {'PCC':>8} {'SROCC':>8} {'RMSE':>8} {'P_PCC':>10} {'P_SROCC':>10}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r.metric:<10} {r.subset:<10} {r.n:>5} {r.pcc:>8.4f} {r.srocc:>8.4f} "
                f"{r.rmse:>8.4f} {r.p_pcc:>10.6f} {r.p_srocc:>10.6f}"
            )
        return "\n".join(lines)

    def as_dict(self):
        return {
            "rows": [r.as_dict() for r in self.rows],
            "scores": self.scores,
            "failures": self.failures,
            "params": self.params,
        }


def _fmt(v):
    return repr(float(v))


def _nan_row(metric, subset, n, converged=False):
    nan = float("nan")
    return ReportRow(metric, subset, n, nan, nan, nan, nan, nan, converged)


def report_rows(metric, values, mos, subset) -> ReportRow:
    """Fit the logistic mapping and compute one report row.

    Groups that are too small or have unidentifiable fits produce a row
    of NaN statistics rather than an error.
    """
    x = np.asarray(values, dtype=np.float64)
    y = np.asarray(mos, dtype=np.float64)
    if x.size < MIN_SAMPLES:
        return _nan_row(metric, subset, int(x.size))
    try:
        fit = fit_logistic(x, y)
    except DegenerateInput:
        return _nan_row(metric, subset, int(x.size))
    row = correlations(fit.predict(x), x, y, metric=metric, subset=subset)
    return ReportRow(**{**row.as_dict(), "fit_converged": fit.converged})


def evaluate(
    manifest: DatasetManifest,
    metrics=("rbqi",),
    cfg: MetricConfig | None = None,
    external: dict[str, dict[str, float]] | None = None,
    subset: str | None = None,
    workers: int = 1,
    scores: dict | None = None,
) -> EvaluationReport:
    """Score, fit and correlate every metric per subset tag plus ``all``.

    ``external`` adds precomputed scores (``{metric: {pair_id: score}}``)
    for metrics not implemented here. With ``subset`` only that tag's
    pairs are evaluated and only its rows emitted. Precomputed
    ``scores`` skip image scoring.
    """
    cfg = cfg or MetricConfig()
    entries = [e for e in manifest if subset is None or e.subset == subset]
    sub_manifest = DatasetManifest(tuple(entries), manifest.path)
    metrics = list(metrics)
    failures: dict[str, str] = {}
    if scores is None:
        scores, failures = score_pairs(sub_manifest, metrics, cfg, workers) if metrics else ({}, {})
    else:
        scores = {k: v for k, v in scores.items() if any(e.pair_id == k for e in entries)}
    scores = {pid: dict(v) for pid, v in scores.items()}
    all_metrics = list(metrics)
    for name, table in (external or {}).items():
        if name not in all_metrics:
            all_metrics.append(name)
        for e in entries:
            if e.pair_id in table and e.pair_id not in failures:
                scores.setdefault(e.pair_id, {})[name] = table[e.pair_id]

    groups = [subset] if subset is not None else sub_manifest.subsets + [ALL]
    rows = []
    for metric in all_metrics:
        for tag in groups:
            members = [
                e
                for e in entries
                if (tag == ALL or e.subset == tag) and metric in scores.get(e.pair_id, {})
            ]
            values = [scores[e.pair_id][metric] for e in members]
            mos = [e.mos for e in members]
            rows.append(report_rows(metric, values, mos, tag))
    return EvaluationReport(rows=rows, scores=scores, failures=failures, params=cfg.as_dict())

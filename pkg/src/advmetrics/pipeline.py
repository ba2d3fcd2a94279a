"""Batch commands: synthesize pairs, compute the metric matrix, and analyse it.

Interchange files are UTF-8 CSV with a header row. Floats are written in
shortest round-trip form. Detector label columns carry a ``label_`` prefix.
"""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .datagen import (
    FAMILIES,
    OracleDetectorSpec,
    PerturbationSpec,
    flat_base,
    flip,
    generate_pair,
    oracle_decision,
    textured_base,
)
from .errors import AdvMetricsError, DegenerateInput, ParseError, UnknownLabel
from .features import FEATURE_NAMES, cap_infinite, metric_vector, resolve_features
from .forest import (
    EvalReport,
    ForestHyperparams,
    LooReport,
    SampleRecord,
    evaluate,
    leave_one_attack_out,
    load_model,
    pearson,
    rank_features,
    save_model,
    stratified_split,
    train,
)
from .quality import DEFAULT_CONFIG, QualityConfig
from .tensor import ImagePair, load_png, quantize, save_png

LABEL_PREFIX = "label_"
MANIFEST_FIELDS = ("pair_id", "original_path", "adversarial_path", "attack_family", "config_id")
MATRIX_ID_FIELDS = ("pair_id", "attack_family", "config_id")


class BatchError(AdvMetricsError):
    """One or more rows of a batch failed; ``failures`` lists ``(pair_id, message)``."""

    def __init__(self, failures):
        self.failures = list(failures)
        lines = "\n".join(f"  {pid}: {msg}" for pid, msg in self.failures)
        super().__init__(f"{len(self.failures)} row(s) failed:\n{lines}")


@dataclass(frozen=True)
class ManifestRow:
    pair_id: str
    original_path: str
    adversarial_path: str
    attack_family: str
    config_id: str
    labels: dict


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_label(value: str, where: str) -> int:
    if value not in ("0", "1"):
        raise ParseError(f"{where}: label must be 0 or 1, got {value!r}")
    return int(value)


def _label_columns(header: Sequence[str], where) -> list[str]:
    cols = [c for c in header if c.startswith(LABEL_PREFIX) and len(c) > len(LABEL_PREFIX)]
    if not cols:
        raise ParseError(f"{where}: no {LABEL_PREFIX}<detector> column")
    return cols


# --------------------------------------------------------------------------
# manifest


def read_manifest(path) -> list[ManifestRow]:
    """Parse a manifest. Relative image paths are resolved against its folder."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MANIFEST_FIELDS if c not in header]
        if missing:
            raise ParseError(f"{path}: missing manifest columns {missing}")
        label_cols = _label_columns(header, path)
        rows, seen = [], set()
        for n, rec in enumerate(reader, start=2):
            where = f"{path}:{n}"
            pid = rec["pair_id"]
            if not pid:
                raise ParseError(f"{where}: empty pair_id")
            if pid in seen:
                raise ParseError(f"{where}: duplicate pair_id {pid!r}")
            seen.add(pid)
            rows.append(
                ManifestRow(
                    pair_id=pid,
                    original_path=str(path.parent / rec["original_path"]),
                    adversarial_path=str(path.parent / rec["adversarial_path"]),
                    attack_family=rec["attack_family"],
                    config_id=rec["config_id"],
                    labels={c[len(LABEL_PREFIX):]: _parse_label(rec[c], where) for c in label_cols},
                )
            )
    return rows


def write_manifest(path, rows: Sequence[ManifestRow]) -> None:
    """Write manifest rows; image paths are stored relative to the manifest folder."""
    path = Path(path)
    detectors = sorted(rows[0].labels) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(MANIFEST_FIELDS) + [LABEL_PREFIX + d for d in detectors])
    for r in rows:
        w.writerow(
            [
                r.pair_id,
                os.path.relpath(r.original_path, path.parent),
                os.path.relpath(r.adversarial_path, path.parent),
                r.attack_family,
                r.config_id,
            ]
            + [r.labels[d] for d in detectors]
        )
    _write_atomic(path, buf.getvalue())


# --------------------------------------------------------------------------
# metric matrix


def _row_metrics(args):
    row, l0_tolerance, cfg = args
    try:
        pair = ImagePair(load_png(row.original_path), load_png(row.adversarial_path), row.pair_id)
        values = cap_infinite(metric_vector(pair, cfg, l0_tolerance), cfg)
        bad = [k for k, v in values.items() if not math.isfinite(v)]
        if bad:
            return row.pair_id, None, f"non-finite metric(s) {bad}"
        return row.pair_id, values, None
    except (OSError, AdvMetricsError) as exc:
        return row.pair_id, None, f"{type(exc).__name__}: {exc}"


def compute_matrix(
    rows: Sequence[ManifestRow],
    jobs: int = 1,
    l0_tolerance: float = 0.0,
    cfg: QualityConfig = DEFAULT_CONFIG,
) -> list[SampleRecord]:
    """Metric records for every manifest row, sorted by pair_id.

    Raises :class:`BatchError` listing every failed row; nothing is returned
    in that case.
    """
    tasks = [(r, l0_tolerance, cfg) for r in rows]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_row_metrics, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_row_metrics(t) for t in tasks]
    failures = [(pid, msg) for pid, _, msg in results if msg is not None]
    if failures:
        raise BatchError(sorted(failures))
    by_id = {r.pair_id: r for r in rows}
    records = [
        SampleRecord(pid, by_id[pid].attack_family, by_id[pid].config_id, values, dict(by_id[pid].labels))
        for pid, values, _ in results
    ]
    return sorted(records, key=lambda r: r.sample_id)


def write_matrix(path, records: Sequence[SampleRecord]) -> None:
    detectors = sorted(records[0].labels) if records else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(MATRIX_ID_FIELDS) + list(FEATURE_NAMES) + [LABEL_PREFIX + d for d in detectors])
    for r in records:
        w.writerow(
            [r.sample_id, r.attack_family, r.config_id]
            + [_fmt(r.features[f]) for f in FEATURE_NAMES]
            + [int(r.labels[d]) for d in detectors]
        )
    _write_atomic(Path(path), buf.getvalue())


def read_matrix(path) -> list[SampleRecord]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MATRIX_ID_FIELDS + FEATURE_NAMES if c not in header]
        if missing:
            raise ParseError(f"{path}: missing matrix columns {missing}")
        label_cols = _label_columns(header, path)
        out = []
        for n, rec in enumerate(reader, start=2):
            where = f"{path}:{n}"
            try:
                feats = {f: float(rec[f]) for f in FEATURE_NAMES}
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{where}: {exc}") from None
            if not all(math.isfinite(v) for v in feats.values()):
                raise ParseError(f"{where}: non-finite metric value")
            labels = {c[len(LABEL_PREFIX):]: _parse_label(rec[c], where) for c in label_cols}
            out.append(SampleRecord(rec["pair_id"], rec["attack_family"], rec["config_id"], feats, labels))
    return out


def cmd_metrics(
    manifest,
    out,
    jobs: int = 1,
    l0_tolerance: float = 0.0,
    cfg: QualityConfig = DEFAULT_CONFIG,
) -> list[SampleRecord]:
    records = compute_matrix(read_manifest(manifest), jobs=jobs, l0_tolerance=l0_tolerance, cfg=cfg)
    write_matrix(out, records)
    return records


# --------------------------------------------------------------------------
# analyses


def _require_label(records: Sequence[SampleRecord], label: str) -> None:
    if not records:
        raise DegenerateInput("metric matrix has no rows")
    if label not in records[0].labels:
        raise UnknownLabel(f"no label column {LABEL_PREFIX}{label} (have {sorted(records[0].labels)})")


def correlations(records: Sequence[SampleRecord], label: str) -> list[tuple[str, Optional[float]]]:
    """Pearson r of every metric against ``label``; ``None`` marks a degenerate column."""
    _require_label(records, label)
    y = [r.labels[label] for r in records]
    out = []
    for f in FEATURE_NAMES:
        try:
            out.append((f, pearson([r.features[f] for r in records], y)))
        except (DegenerateInput, ValueError):
            out.append((f, None))
    return out


def cmd_corr(matrix, label: str) -> list[tuple[str, Optional[float]]]:
    return correlations(read_matrix(matrix), label)


def train_and_evaluate(
    records: Sequence[SampleRecord],
    label: str,
    features="all",
    train_fraction: float = 0.66,
    hp: ForestHyperparams = ForestHyperparams(),
    stratify: bool = True,
    jobs: int = 1,
):
    """Split with ``hp.seed``, fit on the training part, score the held-out part."""
    _require_label(records, label)
    names = resolve_features(features)
    train_part, test_part = stratified_split(records, train_fraction, label, hp.seed, stratify=stratify)
    model = train(train_part, names, label, hp, jobs=jobs)
    return evaluate(model, test_part, label), model


def cmd_train(
    matrix,
    label: str,
    features="all",
    train_fraction: float = 0.66,
    seed: int = 0,
    hp: Optional[ForestHyperparams] = None,
    model_out=None,
    stratify: bool = True,
    jobs: int = 1,
):
    hp = replace(hp or ForestHyperparams(), seed=seed)
    report, model = train_and_evaluate(
        read_matrix(matrix), label, features, train_fraction, hp, stratify=stratify, jobs=jobs
    )
    if model_out is not None:
        save_model(model, model_out)
    return report, model


def cmd_loo(
    matrix,
    labels: Sequence[str],
    features="all",
    hp: ForestHyperparams = ForestHyperparams(),
    jobs: int = 1,
) -> dict[str, LooReport]:
    records = read_matrix(matrix)
    names = resolve_features(features)
    out = {}
    for label in labels:
        _require_label(records, label)
        out[label] = leave_one_attack_out(records, names, label, hp, jobs=jobs)
    return out


def cmd_importance(model_path) -> list[tuple[str, float]]:
    return rank_features(load_model(model_path))


# --------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class FamilyConfig:
    """One synthetic attack family: a perturbation kind and its parameter ranges."""

    name: str
    kind: str
    magnitude: tuple[float, float]
    count: tuple[int, int] = (1, 1)

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown perturbation family {self.kind!r}")
        lo, hi = self.magnitude
        if not 0 < lo <= hi:
            raise ValueError(f"bad magnitude range {self.magnitude}")
        if not 1 <= self.count[0] <= self.count[1]:
            raise ValueError(f"bad count range {self.count}")


# Ranges chosen so every family spans a similar L2 band (~50-900) on 32x32x3.
DEFAULT_FAMILIES = (
    FamilyConfig("uniform_linf", "uniform_linf", (1.5, 28.0)),
    FamilyConfig("gaussian", "gaussian", (1.0, 16.0)),
    FamilyConfig("sparse_pixels", "sparse_pixels", (20.0, 120.0), (8, 60)),
    FamilyConfig("block_patch", "block_patch", (10.0, 60.0), (3, 9)),
)


def _range(text: str, cast):
    lo, sep, hi = text.partition("-")
    lo = cast(lo)
    return (lo, cast(hi) if sep else lo)


def parse_family(text: str) -> FamilyConfig:
    """Parse ``[name=]kind:lo-hi[:count_lo-count_hi]``, e.g. ``twin=gaussian:2-20``."""
    name, sep, rest = text.partition("=")
    if not sep:
        name, rest = "", text
    parts = rest.split(":")
    if not 2 <= len(parts) <= 3:
        raise ValueError(f"cannot parse family {text!r}")
    kind = parts[0]
    return FamilyConfig(
        name or kind,
        kind,
        _range(parts[1], float),
        _range(parts[2], int) if len(parts) == 3 else (1, 1),
    )


@dataclass(frozen=True)
class OracleConfig:
    """A named threshold detector; ``threshold=None`` means the median of the generated data."""

    name: str
    metric: str
    threshold: Optional[float] = None
    flip_noise: float = 0.0


def parse_oracle(text: str) -> OracleConfig:
    """Parse ``[name=]metric:threshold|auto[:flip_noise]``."""
    name, sep, rest = text.partition("=")
    if not sep:
        name, rest = "oracle", text
    parts = rest.split(":")
    if not 2 <= len(parts) <= 3:
        raise ValueError(f"cannot parse oracle {text!r}")
    thr = None if parts[1] == "auto" else float(parts[1])
    return OracleConfig(name, parts[0], thr, float(parts[2]) if len(parts) == 3 else 0.0)


def cmd_synth(
    out_dir,
    families: Sequence[FamilyConfig] = DEFAULT_FAMILIES,
    n_per_family: int = 250,
    oracles: Sequence[OracleConfig] = (OracleConfig("oracle", "mse"),),
    seed: int = 0,
    base: str = "texture",
    shape: tuple[int, int, int] = (32, 32, 3),
    cfg: QualityConfig = DEFAULT_CONFIG,
) -> Path:
    """Write ``n_per_family`` PNG pairs per family plus ``manifest.csv``.

    ``base`` is ``"texture"`` (random smooth image per pair), ``"gray"`` (flat
    mid-gray) or a directory of PNGs, which are used in sorted order.
    """
    out_dir = Path(out_dir)
    if n_per_family < 1:
        raise ValueError("n_per_family must be positive")
    if len({f.name for f in families}) != len(families):
        raise ValueError("family names must be unique")
    if len({o.name for o in oracles}) != len(oracles) or not oracles:
        raise ValueError("need at least one oracle, with unique names")
    base_files = None
    if base not in ("texture", "gray"):
        base_files = sorted(Path(base).glob("*.png"))
        if not base_files:
            raise OSError(f"no PNG files in base directory {base}")
    h, w, c = shape
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)

    generated = []  # (row stub, metric map, flip seeds)
    for fi, fam in enumerate(families):
        rng = np.random.default_rng([seed, fi])
        for i in range(n_per_family):
            mag = float(rng.uniform(*fam.magnitude))
            count = int(rng.integers(fam.count[0], fam.count[1] + 1))
            pert_seed, base_seed = (int(s) for s in rng.integers(0, 2**63, size=2))
            flip_seeds = [int(s) for s in rng.integers(0, 2**63, size=len(oracles))]
            if base_files is not None:
                original = load_png(base_files[(fi * n_per_family + i) % len(base_files)])
            elif base == "gray":
                original = flat_base(h, w, c)
            else:
                original = textured_base(h, w, c, seed=base_seed)
            pid = f"{fam.name}-{i:05d}"
            pair = generate_pair(original, PerturbationSpec(fam.kind, mag, count, pert_seed), pid)
            pair = ImagePair(pair.original, quantize(pair.adversarial), pid)
            orig_path = img_dir / f"{pid}_orig.png"
            adv_path = img_dir / f"{pid}_adv.png"
            save_png(pair.original, orig_path)
            save_png(pair.adversarial, adv_path)
            config_id = f"{fam.kind}_m{mag:.2f}" + (f"_c{count}" if fam.kind in ("sparse_pixels", "block_patch") else "")
            stub = (pid, str(orig_path), str(adv_path), fam.name, config_id)
            generated.append((stub, cap_infinite(metric_vector(pair, cfg), cfg), flip_seeds))

    specs = []
    for o in oracles:
        thr = o.threshold
        if thr is None:
            thr = float(np.median([m[o.metric] for _, m, _ in generated]))
        specs.append(OracleDetectorSpec(o.metric, thr, o.flip_noise))

    rows = []
    for stub, metrics, flip_seeds in generated:
        labels = {
            o.name: flip(oracle_decision(metrics, s, cfg), s.flip_noise, fs)
            for o, s, fs in zip(oracles, specs, flip_seeds)
        }
        rows.append(ManifestRow(*stub, labels=labels))
    manifest = out_dir / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest


# --------------------------------------------------------------------------
# plain-text tables


def format_eval(report: EvalReport) -> str:
    return "\n".join(
        [
            f"features  {','.join(report.feature_set)}",
            f"n_test    {report.n_test}",
            f"accuracy  {report.accuracy:.4f}",
            f"tp {report.tp}  fp {report.fp}  fn {report.fn}  tn {report.tn}",
        ]
    )


def format_corr(rows) -> str:
    lines = [f"{'metric':<8} pearson_r"]
    for name, r in rows:
        lines.append(f"{name:<8} {'degenerate' if r is None else f'{r:+.4f}'}")
    return "\n".join(lines)


def format_loo(reports: dict[str, LooReport]) -> str:
    labels = list(reports)
    families = sorted({f for rep in reports.values() for f in rep.per_attack})
    lines = [f"{'attack':<16}" + "".join(f"{lab:>12}" for lab in labels)]
    for fam in families:
        cells = "".join(
            f"{reports[lab].per_attack[fam].accuracy:>12.3f}" if fam in reports[lab].per_attack else f"{'-':>12}"
            for lab in labels
        )
        lines.append(f"{fam:<16}{cells}")
    return "\n".join(lines)


def format_importance(rows) -> str:
    return "\n".join([f"{'feature':<8} importance"] + [f"{n:<8} {v:.6f}" for n, v in rows])

"""Pipeline stages: gen -> detect -> eval -> report.

Every stage reads and writes plain files under the database root (``db``)
and the results directory (``out``), so region files from external
detector binaries can be dropped in between stages. Work items run on an
optional process pool; results are sorted on canonical keys before the
single writer persists them, so output bytes never depend on ``jobs``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import detect as detectors
from .imgcore import load_image
from .rank import LabelError, build_series, format_rankings, lowest_ranking, read_labels, top_ranking, trait_indices
from .repeat import (
    DEFAULT_EPS_OVERLAP,
    RepeatabilityRecord,
    UndefinedRepeatabilityError,
    format_records,
    read_records,
    repeatability,
)
from .report import ReportRow, table_csv, table_svg, table_text
from .xform import (
    BLUR,
    KINDS,
    LIGHT,
    MANIFEST_NAME,
    ConfigurationError,
    DatasetManifest,
    generate_database,
    write_text_if_changed,
)

logger = logging.getLogger(__name__)

__all__ = [
    "RunConfig",
    "StageResult",
    "cmd_gen",
    "cmd_detect",
    "cmd_eval",
    "cmd_report",
    "cmd_all",
    "region_path",
    "DEFAULT_DETECTORS",
]

DEFAULT_DETECTORS = ("HARLAP", "HESLAP", "MSER", "FASTHESS")
DEFAULT_STEPS_BLUR = (0.5, 2.0, 3.0)
DEFAULT_STEPS_LIGHT = (10.0, 40.0, 60.0)  # percent reduction

REPEATABILITY_CSV = "repeatability.csv"
EXCLUSIONS_CSV = "exclusions.csv"
GAPS_TXT = "gaps.txt"
DETECT_FAILURES_TXT = "detect_failures.txt"
RUN_JSON = "run.json"
EVAL_STAMP = ".eval.stamp"
REPORT_STAMP = ".report.stamp"

CRITERION = {
    "ratio": "N_rep / N_ref",
    "n_ref": "reference regions whose centres map inside the test frame",
    "n_rep": "maximum one-to-one matching over pairs with overlap error < eps_overlap",
    "overlap_error": "1 - area(intersection) / area(union), reference ellipse mapped by the homography",
    "homography": "identity (photometric and blur datasets)",
}


@dataclass
class RunConfig:
    db: Path | None = None
    out: Path | None = None
    refs: Path | None = None
    labels: Path | None = None
    detectors: tuple = DEFAULT_DETECTORS
    detector_settings: dict = field(default_factory=dict)
    eps_overlap: float = DEFAULT_EPS_OVERLAP
    normalize_radius: float | None = None
    j: int = 20
    blur_schedule: tuple | None = None
    light_schedule: tuple | None = None
    steps_blur: tuple = DEFAULT_STEPS_BLUR
    steps_light: tuple = DEFAULT_STEPS_LIGHT
    jobs: int = 1
    force: bool = False

    def __post_init__(self):
        for name in ("db", "out", "refs", "labels"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, Path):
                setattr(self, name, Path(value))
        self.detectors = tuple(detectors.parse_detector_id(d) for d in self.detectors)
        if len(set(self.detectors)) != len(self.detectors):
            raise ConfigurationError(f"duplicate detector names in {self.detectors}")
        for name in self.detector_settings:
            if name not in detectors.NATIVE_DETECTORS:
                raise ConfigurationError(f"settings given for non-native detector {name!r}")
        if not 0 < self.eps_overlap < 1:
            raise ConfigurationError("eps_overlap must lie in (0, 1)")
        if self.j < 1:
            raise ConfigurationError("j must be at least 1")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be at least 1")

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        clean = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(clean) - cls.field_names()
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        for key in ("detectors", "blur_schedule", "light_schedule", "steps_blur", "steps_light"):
            if clean.get(key) is not None:
                clean[key] = tuple(clean[key])
        return cls(**clean)

    def require(self, *names):
        for name in names:
            if getattr(self, name) is None:
                raise ConfigurationError(f"--{name.replace('_', '-')} is required for this command")

    def settings_for(self, name: str):
        if detectors.is_external(name):
            return None
        return detectors._resolve_settings(name, self.detector_settings.get(name))


@dataclass
class StageResult:
    stage: str
    partial: bool = False
    cached: bool = False
    written: int = 0
    skipped: int = 0
    notes: list = field(default_factory=list)


def _pool_map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [fn(item) for item in items]


def _load_manifest(config: RunConfig) -> DatasetManifest:
    config.require("db")
    if not (config.db / MANIFEST_NAME).is_file():
        raise ConfigurationError(f"no {MANIFEST_NAME} in {config.db}; run 'gen' first")
    return DatasetManifest.load(config.db)


def detector_dirname(name: str) -> str:
    return name.replace(":", "_")


def region_path(out: Path, manifest: DatasetManifest, detector: str, scene: int, kind: str, k: int) -> Path:
    image_rel = Path(manifest.scenes[scene].paths[kind][k - 1])
    return out / "regions" / detector_dirname(detector) / manifest.scene_key(scene) / kind / (image_rel.stem + ".txt")


def _json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# -- gen ----------------------------------------------------------------------

def cmd_gen(config: RunConfig) -> DatasetManifest:
    config.require("refs", "db")
    return generate_database(
        config.refs, config.db,
        blur=config.blur_schedule, light=config.light_schedule,
        jobs=config.jobs, force=config.force,
    )


# -- detect -------------------------------------------------------------------

def _detect_one(item):
    name, settings, image_path = item
    try:
        img = load_image(image_path)
        regions = detectors.detect(name, img, settings)
        return detectors.format_regions(regions), None
    except Exception as exc:  # one bad image must not stop the run
        return None, f"{type(exc).__name__}: {exc}"


def cmd_detect(config: RunConfig) -> StageResult:
    """Write one region file per (native detector, image); existing files are kept."""
    config.require("out")
    manifest = _load_manifest(config)
    result = StageResult("detect")
    missing = [
        manifest.image_path(s, kind, k)
        for s in manifest.scene_ids for kind in KINDS
        for k in range(1, len(manifest.schedules[kind]) + 1)
        if not manifest.image_path(s, kind, k).is_file()
    ]
    if missing:
        raise OSError(f"database image missing: {missing[0]} ({len(missing)} missing in total)")

    work, targets = [], []
    for name in config.detectors:
        det_dir = config.out / "regions" / detector_dirname(name)
        if detectors.is_external(name):
            present = sum(
                region_path(config.out, manifest, name, s, kind, k).is_file()
                for s in manifest.scene_ids for kind in KINDS
                for k in range(1, len(manifest.schedules[kind]) + 1)
            )
            result.notes.append(f"{name}: external, {present}/{manifest.image_count()} region files present")
            continue
        settings = detectors.settings_dict(config.settings_for(name))
        settings_file = det_dir / "settings.json"
        stale = settings_file.is_file() and settings_file.read_text() != _json(settings)
        if stale:
            logger.info("%s settings changed; recomputing its region files", name)
        det_dir.mkdir(parents=True, exist_ok=True)
        write_text_if_changed(settings_file, _json(settings))
        for s in manifest.scene_ids:
            for kind in KINDS:
                for k in range(1, len(manifest.schedules[kind]) + 1):
                    target = region_path(config.out, manifest, name, s, kind, k)
                    if target.is_file() and not (config.force or stale):
                        result.skipped += 1
                        continue
                    work.append((name, settings, str(manifest.image_path(s, kind, k))))
                    targets.append(target)

    failures = []
    for target, item, (text, error) in zip(targets, work, _pool_map(_detect_one, work, config.jobs)):
        if error is not None:
            logger.error("%s failed on %s: %s", item[0], item[2], error)
            failures.append(f"{item[0]}\t{item[2]}\t{error}")
            continue
        target.parent.mkdir(parents=True, exist_ok=True)
        if write_text_if_changed(target, text):
            result.written += 1
    failure_file = config.out / DETECT_FAILURES_TXT
    if failures:
        write_text_if_changed(failure_file, "\n".join(sorted(failures)) + "\n")
        result.partial = True
        result.notes.append(f"{len(failures)} detections failed, see {failure_file}")
    elif failure_file.exists():
        failure_file.unlink()
    logger.info("detect: %d written, %d cached, %d failed", result.written, result.skipped, len(failures))
    return result


# -- eval ---------------------------------------------------------------------

def _eval_one(item):
    """Repeatability of every step of one (detector, scene, kind) dataset."""
    name, scene, kind, steps, paths, frame, eps, normalize = item
    records, exclusions, gaps = [], [], []
    try:
        ref = detectors.read_region_file(paths[0])
    except FileNotFoundError:
        gaps.append(f"{name}\t{scene}\t{kind}\tall steps\tmissing reference region file {paths[0]}")
        return records, exclusions, gaps
    except (OSError, ValueError) as exc:
        gaps.append(f"{name}\t{scene}\t{kind}\tall steps\t{exc}")
        return records, exclusions, gaps
    for (k, param), path in zip(steps, paths):
        try:
            test = ref if k == 1 else detectors.read_region_file(path)
        except FileNotFoundError:
            gaps.append(f"{name}\t{scene}\t{kind}\t{k}\tmissing region file {path}")
            continue
        except (OSError, ValueError) as exc:
            gaps.append(f"{name}\t{scene}\t{kind}\t{k}\t{exc}")
            continue
        try:
            rep = repeatability(ref, test, None, frame, eps, normalize_radius=normalize)
        except UndefinedRepeatabilityError:
            exclusions.append((name, kind, scene, k, param, "N_ref = 0"))
            continue
        records.append(RepeatabilityRecord(name, kind, scene, k, param, rep.n_ref, rep.n_rep))
    return records, exclusions, gaps


def _eval_fingerprint(config: RunConfig, manifest: DatasetManifest) -> str:
    h = hashlib.sha256()
    h.update(_json(_run_metadata(config, manifest)).encode())
    for name in config.detectors:
        for s in manifest.scene_ids:
            for kind in KINDS:
                for k in range(1, len(manifest.schedules[kind]) + 1):
                    p = region_path(config.out, manifest, name, s, kind, k)
                    digest = _sha256(p.read_bytes()) if p.is_file() else "-"
                    h.update(f"{p.relative_to(config.out).as_posix()}:{digest}\n".encode())
    return h.hexdigest()


def _run_metadata(config: RunConfig, manifest: DatasetManifest) -> dict:
    return {
        "detectors": {
            name: ("external region files" if detectors.is_external(name)
                   else detectors.settings_dict(config.settings_for(name)))
            for name in config.detectors
        },
        "eps_overlap": config.eps_overlap,
        "normalize_radius": config.normalize_radius,
        "criterion": CRITERION,
        "schedules": {kind: list(manifest.schedules[kind]) for kind in KINDS},
        "scenes": len(manifest.scenes),
    }


def _format_exclusions(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("detector", "kind", "scene", "step", "param", "reason"))
    for name, kind, scene, k, param, reason in sorted(rows):
        writer.writerow((name, kind, scene, k, f"{param:.2f}", reason))
    return buf.getvalue()


def cmd_eval(config: RunConfig) -> StageResult:
    config.require("out")
    manifest = _load_manifest(config)
    config.out.mkdir(parents=True, exist_ok=True)
    result = StageResult("eval")
    stamp_file = config.out / EVAL_STAMP
    gaps_file = config.out / GAPS_TXT
    fingerprint = _eval_fingerprint(config, manifest)
    if (not config.force and stamp_file.is_file() and stamp_file.read_text() == fingerprint
            and (config.out / REPEATABILITY_CSV).is_file()):
        result.cached = True
        result.partial = gaps_file.is_file()
        logger.info("eval: inputs unchanged, nothing to do")
        return result

    work = []
    for name in config.detectors:
        for s in manifest.scene_ids:
            entry = manifest.scenes[s]
            for kind in KINDS:
                steps = list(enumerate(manifest.schedules[kind], start=1))
                paths = [str(region_path(config.out, manifest, name, s, kind, k)) for k, _ in steps]
                work.append((name, s, kind, steps, paths, (entry.width, entry.height),
                             config.eps_overlap, config.normalize_radius))

    records, exclusions, gaps = [], [], []
    for recs, excl, gp in _pool_map(_eval_one, work, config.jobs):
        records += recs
        exclusions += excl
        gaps += gp
    excluded_sets = {}
    for name, kind, scene, k, _, _ in exclusions:
        excluded_sets.setdefault((name, kind, scene), []).append(k)
    for (name, kind, scene), ks in sorted(excluded_sets.items()):
        logger.warning("excluded %s %s scene %d, %d step(s): N_ref = 0", name, kind, scene, len(ks))

    if write_text_if_changed(config.out / REPEATABILITY_CSV, format_records(records)):
        result.written += 1
    write_text_if_changed(config.out / EXCLUSIONS_CSV, _format_exclusions(exclusions))
    write_text_if_changed(config.out / RUN_JSON, _json(_run_metadata(config, manifest)))
    if gaps:
        write_text_if_changed(gaps_file, "detector\tscene\tkind\tstep\tproblem\n" + "\n".join(sorted(gaps)) + "\n")
        result.partial = True
        result.notes.append(f"{len(gaps)} gaps, see {gaps_file}")
    elif gaps_file.exists():
        gaps_file.unlink()
    write_text_if_changed(stamp_file, fingerprint)
    result.notes.append(f"{len(records)} rows, {len(exclusions)} exclusions")
    logger.info("eval: %d rows, %d exclusions, %d gaps", len(records), len(exclusions), len(gaps))
    return result


# -- report -------------------------------------------------------------------

def _select_steps(records, kind: str, wanted) -> list[tuple[int, float]]:
    """Map requested amounts (blur sigma / light reduction %) to (step, param)."""
    available = sorted({(r.step, r.param) for r in records if r.kind == kind})
    chosen = []
    for amount in wanted:
        param = amount if kind == BLUR else 1.0 - amount / 100.0
        match = [(k, p) for k, p in available if abs(p - param) < 1e-6]
        if not match:
            label = f"sigma {amount}" if kind == BLUR else f"{amount}% reduction"
            raise ConfigurationError(f"{kind} amount {label} is not in the evaluated schedule")
        if match[0][0] == 1:
            raise ConfigurationError(f"{kind} reference step cannot be ranked")
        chosen.append(match[0])
    return chosen


def cmd_report(config: RunConfig) -> StageResult:
    config.require("out", "labels")
    csv_path = config.out / REPEATABILITY_CSV
    if not csv_path.is_file():
        raise ConfigurationError(f"{csv_path} not found; run 'eval' first")
    result = StageResult("report")
    raw = csv_path.read_bytes()
    labels_raw = config.labels.read_bytes()
    settings_key = _json({
        "j": config.j, "detectors": list(config.detectors),
        "steps_blur": list(config.steps_blur), "steps_light": list(config.steps_light),
    })
    fingerprint = _sha256(raw + b"\0" + labels_raw + b"\0" + settings_key.encode())
    report_dir = config.out / "report"
    stamp_file = config.out / REPORT_STAMP
    if not config.force and stamp_file.is_file() and stamp_file.read_text() == fingerprint and report_dir.is_dir():
        result.cached = True
        logger.info("report: inputs unchanged, nothing to do")
        return result

    records = read_records(csv_path)
    scenes = sorted({r.scene for r in records})
    labels = read_labels(config.labels, expected=scenes)
    present = {r.detector for r in records}
    roster = [d for d in config.detectors if d in present]
    if not roster:
        raise ConfigurationError("none of the requested detectors has repeatability records")

    outputs = {}
    ranking_entries = []
    for kind, wanted in ((LIGHT, config.steps_light), (BLUR, config.steps_blur)):
        steps = _select_steps(records, kind, wanted)
        rows = []
        for name in roster:
            for k, param in steps:
                series = build_series(records, name, kind, k)
                if config.j > series.n:
                    raise ConfigurationError(
                        f"j = {config.j} exceeds the {series.n} ranked scenes for {name} {kind} step {k}"
                    )
                top = top_ranking(series, config.j)
                low = lowest_ranking(series, config.j)
                ranking_entries += [(series, top), (series, low)]
                rows.append(ReportRow(name, kind, param, trait_indices(top, labels), trait_indices(low, labels)))
        outputs[f"traits_{kind}.csv"] = table_csv(rows)
        outputs[f"traits_{kind}.txt"] = table_text(rows, kind, config.j)
        outputs[f"traits_{kind}.svg"] = table_svg(rows, kind, config.j)
    outputs["rankings.csv"] = format_rankings(ranking_entries)

    report_dir.mkdir(parents=True, exist_ok=True)
    for fname in sorted(outputs):
        if write_text_if_changed(report_dir / fname, outputs[fname]):
            result.written += 1
    write_text_if_changed(stamp_file, fingerprint)
    logger.info("report: %d files written to %s", result.written, report_dir)
    return result


def cmd_all(config: RunConfig) -> list[StageResult]:
    config.require("db", "out", "labels")
    results = []
    if config.refs is not None:
        cmd_gen(config)
        results.append(StageResult("gen"))
    results.append(cmd_detect(config))
    results.append(cmd_eval(config))
    results.append(cmd_report(config))
    return results


__all__ += ["LabelError"]

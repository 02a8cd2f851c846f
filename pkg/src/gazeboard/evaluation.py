"""Label-accuracy evaluation against wearable eye-tracker references.

Per record: estimate the image->board homography from marker-corner
correspondences, map the measured gaze point to board millimeters, recover
the scene-camera origin from the planar pose, and report the angle between
the camera-origin rays to the measured gaze point and to the target letter.
Reports aggregate per-condition statistics, box-plot/scatter tables,
condition comparisons, and z-score outlier analysis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import InsufficientData
from .geometry import (
    CameraIntrinsics,
    angular_error_deg,
    estimate_homography,
    map_gaze_to_board,
    pose_from_homography,
)
from .stats import MannWhitneyResult, mann_whitney_u, pearson_r, spearman_rho, zscore_outliers

SCATTER_CLIP_MM = 150.0  # relative-position scatter is clipped to +-150 mm


@dataclass
class EvalRecord:
    sample_id: str
    scene_intrinsics: CameraIntrinsics
    gaze_px: tuple[float, float]
    markers: list  # [( (u, v) image px, (x, y) board mm ), ...]
    target_board_mm: tuple[float, float] | None = None
    gaze_offset_px: tuple[float, float] = (0.0, 0.0)  # per-participant constant offset
    quality_flags: tuple[str, ...] = ()

    def __post_init__(self):
        # Degraded records are kept but flagged, so exclusions stay countable.
        flags = set(self.quality_flags)
        if len(self.markers) < 4:
            flags.add("insufficient_markers")
        if not np.all(np.isfinite(self.gaze_px)):
            flags.add("nonfinite_gaze")
        self.quality_flags = tuple(sorted(flags))

    @property
    def usable(self) -> bool:
        return "insufficient_markers" not in self.quality_flags \
            and "nonfinite_gaze" not in self.quality_flags


def load_eval_records(path) -> list[EvalRecord]:
    """Line-delimited JSON; see README for the field list. Records with
    fewer than four markers are returned flagged, not silently dropped."""
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            k = d["scene_intrinsics"]
            records.append(EvalRecord(
                sample_id=d["sample_id"],
                scene_intrinsics=CameraIntrinsics(
                    fx=k["fx"], fy=k["fy"], cx=k["cx"], cy=k["cy"],
                    image_w=k["image_w"], image_h=k["image_h"]),
                gaze_px=tuple(d["gaze_px"]),
                markers=[(tuple(m[0]), tuple(m[1])) for m in d["markers"]],
                target_board_mm=tuple(d["target_board_mm"]) if d.get("target_board_mm") else None,
                gaze_offset_px=tuple(d.get("gaze_offset_px", (0.0, 0.0))),
                quality_flags=tuple(d.get("quality_flags", ())),
            ))
    return records


def reference_error(record: EvalRecord, letter_board_mm) -> float:
    """Angular distance (degrees) between the eye-tracker gaze and the
    target letter, both seen from the recovered scene-camera origin."""
    if not record.usable:
        raise InsufficientData(
            f"{record.sample_id}: record is degraded ({record.quality_flags})")
    H = estimate_homography(record.markers)
    gaze_px = (record.gaze_px[0] + record.gaze_offset_px[0],
               record.gaze_px[1] + record.gaze_offset_px[1])
    gaze_board = map_gaze_to_board(gaze_px, H)
    pose = pose_from_homography(H, record.scene_intrinsics)
    origin = pose.camera_origin_board()
    gaze_3d = np.array([gaze_board[0], gaze_board[1], 0.0]) - origin
    letter_3d = np.array([letter_board_mm[0], letter_board_mm[1], 0.0]) - origin
    return angular_error_deg(gaze_3d, letter_3d)


def gaze_board_position(record: EvalRecord) -> np.ndarray:
    H = estimate_homography(record.markers)
    gaze_px = (record.gaze_px[0] + record.gaze_offset_px[0],
               record.gaze_px[1] + record.gaze_offset_px[1])
    return map_gaze_to_board(gaze_px, H)


@dataclass
class BoxStats:
    n: int
    mean: float
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float


def box_stats(values) -> BoxStats:
    v = np.sort(np.asarray(values, dtype=float))
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo = float(v[v >= q1 - 1.5 * iqr][0])
    hi = float(v[v <= q3 + 1.5 * iqr][-1])
    return BoxStats(n=len(v), mean=float(v.mean()), median=float(med),
                    q1=float(q1), q3=float(q3), whisker_low=lo, whisker_high=hi)


@dataclass
class ConditionReport:
    condition: str
    n_samples: int
    n_participants: int
    sample_ids: list
    errors_deg: list
    box: BoxStats
    relative_positions_mm: list  # [sample_id, dx, dy, clipped]
    outliers: list  # [sample_id, z]
    outlier_threshold: float
    outlier_removed_mean: float | None = None
    comparison: dict | None = None
    correlation: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        lines = [
            f"condition: {self.condition}",
            f"samples: {self.n_samples}  participants: {self.n_participants}",
            f"mean error: {self.box.mean:.4f} deg  median: {self.box.median:.4f} deg",
            f"quartiles: [{self.box.q1:.4f}, {self.box.q3:.4f}]  "
            f"whiskers: [{self.box.whisker_low:.4f}, {self.box.whisker_high:.4f}]",
        ]
        if self.outliers:
            flagged = ", ".join(f"{sid} (z={z:.2f})" for sid, z in self.outliers)
            lines.append(f"outliers (|z| > {self.outlier_threshold}): {flagged}")
        else:
            lines.append(f"outliers (|z| > {self.outlier_threshold}): none")
        if self.outlier_removed_mean is not None:
            lines.append(f"outlier-removed mean: {self.outlier_removed_mean:.4f} deg")
        if self.comparison:
            c = self.comparison
            lines.append(f"vs {c['other']}: Mann-Whitney U = {c['u']:.1f}, "
                         f"p = {c['p_value']:.4g} ({c['method']})")
        if self.correlation:
            c = self.correlation
            lines.append(f"estimator-vs-reference correlation: "
                         f"r = {c['pearson_r']:.3f} (p = {c['pearson_p']:.3g}), "
                         f"rho = {c['spearman_rho']:.3f} (p = {c['spearman_p']:.3g})")
        return "\n".join(lines)


@dataclass
class EvaluatedSample:
    sample_id: str
    participant_id: str
    error_deg: float
    relative_mm: tuple[float, float]
    estimator_error_deg: float | None = None


def evaluate_records(records, targets, participant_ids=None) -> list[EvaluatedSample]:
    """Run the geometric pipeline over records paired with target letter
    positions (board mm)."""
    out = []
    pids = participant_ids or {}
    for rec, target in zip(records, targets):
        if not rec.usable:
            continue
        err = reference_error(rec, target)
        gaze_b = gaze_board_position(rec)
        out.append(EvaluatedSample(
            sample_id=rec.sample_id,
            participant_id=pids.get(rec.sample_id, "unknown"),
            error_deg=err,
            relative_mm=(float(gaze_b[0] - target[0]), float(gaze_b[1] - target[1])),
        ))
    return out


def build_condition_report(evaluated: list[EvaluatedSample], condition: str,
                           other: list[EvaluatedSample] | None = None,
                           other_name: str = "other",
                           outlier_threshold: float = 3.0,
                           remove_outliers: bool = False) -> ConditionReport:
    """Aggregate per-sample errors into a deterministic report."""
    if not evaluated:
        raise InsufficientData("no evaluated samples")
    evaluated = sorted(evaluated, key=lambda s: s.sample_id)
    errors = [s.error_deg for s in evaluated]
    ids = [s.sample_id for s in evaluated]

    rel = []
    for s in evaluated:
        dx, dy = s.relative_mm
        clipped = abs(dx) > SCATTER_CLIP_MM or abs(dy) > SCATTER_CLIP_MM
        rel.append([s.sample_id, dx, dy, clipped])

    flags = zscore_outliers(errors, threshold=outlier_threshold, ids=ids) \
        if len(errors) >= 3 else []
    removed_mean = None
    if remove_outliers and flags:
        flagged = {sid for sid, _ in flags}
        kept = [e for sid, e in zip(ids, errors) if sid not in flagged]
        if kept:
            removed_mean = float(np.mean(kept))

    comparison = None
    if other:
        res: MannWhitneyResult = mann_whitney_u(errors, [s.error_deg for s in other])
        comparison = {"other": other_name, "u": res.u, "p_value": res.p_value,
                      "method": res.method}

    correlation = None
    paired = [(s.estimator_error_deg, s.error_deg) for s in evaluated
              if s.estimator_error_deg is not None]
    if len(paired) >= 3:
        ex = [p[0] for p in paired]
        ey = [p[1] for p in paired]
        try:
            pr = pearson_r(ex, ey)
            sr = spearman_rho(ex, ey)
            correlation = {"pearson_r": pr.r, "pearson_p": pr.p_value,
                           "spearman_rho": sr.r, "spearman_p": sr.p_value}
        except Exception:
            correlation = None

    return ConditionReport(
        condition=condition,
        n_samples=len(evaluated),
        n_participants=len({s.participant_id for s in evaluated}),
        sample_ids=ids,
        errors_deg=errors,
        box=box_stats(errors),
        relative_positions_mm=rel,
        outliers=[[sid, z] for sid, z in flags],
        outlier_threshold=outlier_threshold,
        outlier_removed_mean=removed_mean,
        comparison=comparison,
        correlation=correlation,
    )


def write_report(report: ConditionReport, out_dir):
    """Structured report + flat per-sample tables for plotting tools."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8") as f:
        json.dump(report.to_dict(), f, ensure_ascii=False, indent=1, sort_keys=True)
    with open(out / "report.txt", "w", encoding="utf-8") as f:
        f.write(report.to_text() + "\n")
    with open(out / "errors.tsv", "w", encoding="utf-8") as f:
        f.write("sample_id\terror_deg\n")
        for sid, e in zip(report.sample_ids, report.errors_deg):
            f.write(f"{sid}\t{e:.9f}\n")
    with open(out / "scatter.tsv", "w", encoding="utf-8") as f:
        f.write("sample_id\tdx_mm\tdy_mm\tclipped\n")
        for sid, dx, dy, clipped in report.relative_positions_mm:
            f.write(f"{sid}\t{dx:.6f}\t{dy:.6f}\t{int(clipped)}\n")

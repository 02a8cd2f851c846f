"""Durable, append-only session persistence and dataset export.

Layout under the store root:

    index.json                      participant registry + session list
    sessions/<session_id>/events.jsonl
    sessions/<session_id>/samples.jsonl
    sessions/<session_id>/images/

Everything is line-delimited JSON, so a store can be inspected and diffed
with ordinary text tools. Writes are flushed per record; re-opening a store
after an interrupted run yields exactly the records appended so far.
"""

from __future__ import annotations

import json
import logging
import os
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .capture import GazeSample
from .engine import SessionEvent
from .errors import (
    EmptyExport,
    InsufficientParticipants,
    StorageError,
    ValidationError,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Bit-exact field order of exported sample records.
SAMPLE_FIELDS = [
    "sample_id", "session_id", "participant_id", "mode", "letter_id",
    "stimulus_xy_mm", "label_pitch_rad", "label_yaw_rad", "label_vec_xyz",
    "wearing_eyetracker", "image_ref", "normalized_image_ref",
    "estimator_output", "eyetracker_ref", "timestamp",
]


@dataclass
class Participant:
    participant_id: str
    wearing_eyetracker: bool = False
    exclude_from_dataset: bool = False


@dataclass
class FoldSplit:
    k: int
    assignment: dict  # participant_id -> fold index
    finetune_draws: dict = field(default_factory=dict)  # fold -> [sample_id]


def _sample_record(sample: GazeSample) -> dict:
    rec = {
        "sample_id": sample.sample_id,
        "session_id": sample.session_id,
        "participant_id": sample.participant_id,
        "mode": sample.mode,
        "letter_id": sample.letter_id,
        "stimulus_xy_mm": list(sample.stimulus_xy_mm) if sample.stimulus_xy_mm else None,
        "label_pitch_rad": sample.label_pitchyaw_norm[0],
        "label_yaw_rad": sample.label_pitchyaw_norm[1],
        "label_vec_xyz": list(sample.label_vector_camera),
        "wearing_eyetracker": sample.wearing_eyetracker,
        "image_ref": sample.image_ref,
        "normalized_image_ref": sample.normalized_image_ref,
        "estimator_output": list(sample.estimator_output) if sample.estimator_output else None,
        "eyetracker_ref": sample.eyetracker_ref,
        "timestamp": sample.timestamp,
    }
    return {k: rec[k] for k in SAMPLE_FIELDS}


class SessionStore:
    """Single writer per session; any number of readers."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._index_path = self.root / "index.json"
        if self._index_path.exists():
            with open(self._index_path, encoding="utf-8") as f:
                self._index = json.load(f)
        else:
            self._index = {"schema_version": SCHEMA_VERSION,
                           "participants": {}, "sessions": []}
            self._write_index()
        self._sample_ids: set[str] = set()
        for rec in self.iter_samples():
            self._sample_ids.add(rec["sample_id"])

    def _write_index(self):
        tmp = self._index_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(self._index, f, ensure_ascii=False, indent=1, sort_keys=True)
            f.flush()
            os.fsync(f.fileno())
        tmp.replace(self._index_path)

    # -- participants ----------------------------------------------------------

    def register_participant(self, participant_id: str,
                             wearing_eyetracker: bool = False,
                             exclude_from_dataset: bool = False) -> Participant:
        p = Participant(participant_id, wearing_eyetracker, exclude_from_dataset)
        self._index["participants"][participant_id] = {
            "wearing_eyetracker": wearing_eyetracker,
            "exclude_from_dataset": exclude_from_dataset,
        }
        self._write_index()
        return p

    def participants(self) -> dict:
        return dict(self._index["participants"])

    # -- sessions --------------------------------------------------------------

    def session_dir(self, session_id: str) -> Path:
        return self.root / "sessions" / session_id

    def open_session(self, session_id: str) -> Path:
        d = self.session_dir(session_id)
        (d / "images").mkdir(parents=True, exist_ok=True)
        if session_id not in self._index["sessions"]:
            self._index["sessions"].append(session_id)
            self._write_index()
        return d

    def session_ids(self) -> list[str]:
        return list(self._index["sessions"])

    def mark_abandoned(self, session_id: str):
        flags = self._index.setdefault("abandoned", [])
        if session_id not in flags:
            flags.append(session_id)
            self._write_index()

    def append_event(self, session_id: str, event: SessionEvent):
        d = self.open_session(session_id)
        with open(d / "events.jsonl", "a", encoding="utf-8") as f:
            f.write(event.to_json() + "\n")
            f.flush()
            os.fsync(f.fileno())

    def read_events(self, session_id: str) -> list[SessionEvent]:
        path = self.session_dir(session_id) / "events.jsonl"
        if not path.exists():
            return []
        with open(path, encoding="utf-8") as f:
            return [SessionEvent.from_json(line) for line in f if line.strip()]

    # -- samples ----------------------------------------------------------------

    def append_sample(self, sample: GazeSample, image=None, normalized_image=None) -> str:
        """Durable append. Idempotent on duplicate sample_id. Optionally writes
        the raster images the sample references."""
        if sample.sample_id in self._sample_ids:
            logger.warning("duplicate sample_id %s ignored", sample.sample_id)
            return sample.sample_id
        d = self.open_session(sample.session_id)
        if image is not None:
            _write_image(d / sample.image_ref, image)
        if normalized_image is not None:
            _write_image(d / sample.normalized_image_ref, normalized_image)
        if not (d / sample.image_ref).exists():
            raise ValidationError(f"image_ref does not resolve: {sample.image_ref}")
        try:
            with open(d / "samples.jsonl", "a", encoding="utf-8") as f:
                f.write(json.dumps(_sample_record(sample), ensure_ascii=False,
                                   sort_keys=False) + "\n")
                f.flush()
                os.fsync(f.fileno())
        except OSError as e:
            raise StorageError(str(e)) from e
        self._sample_ids.add(sample.sample_id)
        return sample.sample_id

    def iter_samples(self, session_id: str | None = None):
        ids = [session_id] if session_id else self._index["sessions"]
        for sid in ids:
            path = self.session_dir(sid) / "samples.jsonl"
            if not path.exists():
                continue
            with open(path, encoding="utf-8") as f:
                for line in f:
                    if line.strip():
                        yield json.loads(line)

    def sample_count(self) -> int:
        return len(self._sample_ids)


def _write_image(path: Path, image):
    """Write an 8-bit grayscale or RGB raster as PGM/PPM (plain, portable)."""
    import numpy as np

    arr = np.asarray(image, dtype=np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    if arr.ndim == 2:
        header = b"P5\n%d %d\n255\n" % (arr.shape[1], arr.shape[0])
    else:
        header = b"P6\n%d %d\n255\n" % (arr.shape[1], arr.shape[0])
    with open(path, "wb") as f:
        f.write(header + arr.tobytes())


@dataclass
class ExportFilter:
    """Selection for export_dataset. eyetracker: 'exclude' (default training
    export), 'only', or 'all'."""
    eyetracker: str = "exclude"
    mode: str | None = None


@dataclass
class DatasetManifest:
    dataset_id: str
    created_at: str
    schema_version: int
    board_layout_hash: str
    normalization_params: dict
    participants: dict
    samples: list

    def to_dict(self) -> dict:
        return asdict(self)


def export_dataset(store: SessionStore, out_dir, filter: ExportFilter | None = None,
                   dataset_id: str = "dataset", board_layout_hash: str = "",
                   normalization_params: dict | None = None,
                   created_at: str = "") -> DatasetManifest:
    """Write a training-ready manifest + sample table to out_dir."""
    filt = filter or ExportFilter()
    participants = store.participants()
    samples = []
    for rec in store.iter_samples():
        pid = rec["participant_id"]
        pinfo = participants.get(pid, {})
        if pinfo.get("exclude_from_dataset"):
            continue
        wearing = bool(rec["wearing_eyetracker"])
        if filt.eyetracker == "exclude" and wearing:
            continue
        if filt.eyetracker == "only" and not wearing:
            continue
        if filt.mode and rec["mode"] != filt.mode:
            continue
        samples.append(rec)
    if not samples:
        raise EmptyExport("no samples match the export filter")
    samples.sort(key=lambda r: r["sample_id"])

    manifest = DatasetManifest(
        dataset_id=dataset_id,
        created_at=created_at,
        schema_version=SCHEMA_VERSION,
        board_layout_hash=board_layout_hash,
        normalization_params=normalization_params or {},
        participants={pid: info for pid, info in sorted(participants.items())
                      if not info.get("exclude_from_dataset")},
        samples=samples,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest.to_dict(), f, ensure_ascii=False, indent=1, sort_keys=True)
    with open(out / "samples.jsonl", "w", encoding="utf-8") as f:
        for rec in samples:
            f.write(json.dumps({k: rec[k] for k in SAMPLE_FIELDS},
                               ensure_ascii=False) + "\n")
    return manifest


def import_manifest(path) -> DatasetManifest:
    with open(Path(path) / "manifest.json", encoding="utf-8") as f:
        d = json.load(f)
    return DatasetManifest(**d)


def make_fold_split(participants, k: int = 3, rng_seed: int = 0,
                    samples=None, finetune_draw: int = 15) -> FoldSplit:
    """Participant-level fold assignment balanced on the eye-tracker subset.

    participants: iterable of (participant_id, wearing_eyetracker).
    Per-fold counts of eye-tracker wearers (and of non-wearers) differ by
    at most one. When samples are given, each fold also gets a seeded draw
    of finetune_draw sample ids from its fine-tuning group (the samples of
    all participants outside the fold).
    """
    plist = list(participants)
    if k < 1 or k > len(plist):
        raise InsufficientParticipants(f"need >= {k} participants, got {len(plist)}")
    rng = random.Random(rng_seed)
    wearers = sorted(pid for pid, w in plist if w)
    others = sorted(pid for pid, w in plist if not w)
    rng.shuffle(wearers)
    rng.shuffle(others)
    assignment = {}
    for i, pid in enumerate(wearers):
        assignment[pid] = i % k
    for i, pid in enumerate(others):
        assignment[pid] = i % k

    draws = {}
    if samples is not None:
        by_pid: dict[str, list[str]] = {}
        for rec in samples:
            by_pid.setdefault(rec["participant_id"], []).append(rec["sample_id"])
        for fold in range(k):
            pool = sorted(sid for pid, sids in by_pid.items()
                          for sid in sids
                          if assignment.get(pid) is not None and assignment[pid] != fold)
            n = min(finetune_draw, len(pool))
            draws[fold] = sorted(rng.sample(pool, n))
    return FoldSplit(k=k, assignment=assignment, finetune_draws=draws)

"""Dataset manifests (UTF-8 JSON lines).

The first line is a header object::

    {"name": "koniq10k", "scale": {"scores": [1, 2, 3, 4, 5], "range": [1, 5]},
     "category": "DOS_AVAILABLE"}

Every further line is one image::

    {"image_path": "images/0001.jpg", "mos": 3.2, "dos": [0.0, 0.2, 0.4, 0.4, 0.0]}

``sos``, ``dos`` and ``raw_ratings`` are optional.  Image paths are relative to
``$DOSIQA_DATA_ROOT`` when set, otherwise to the manifest's directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..errors import DosIqaError, ParseError, ValidationError
from ..rating_stats import (
    LabelCategory,
    OpinionDistribution,
    QualityScale,
    SampleLabels,
    dos_from_ratings,
)

DATA_ROOT_ENV = "DOSIQA_DATA_ROOT"
DOS_SUM_TOL = 1e-6


@dataclass
class ManifestEntry:
    image_path: str
    mos: float
    sos: Optional[float] = None
    dos: Optional[List[float]] = None
    raw_ratings: Optional[List[int]] = None

    def to_json(self) -> dict:
        d = {"image_path": self.image_path, "mos": self.mos}
        for k in ("sos", "dos", "raw_ratings"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d


@dataclass
class DatasetManifest:
    name: str
    scale: QualityScale
    category: LabelCategory
    entries: List[ManifestEntry]
    root: Optional[Path] = None
    # hidden ground truth kept by the synthetic generator; never serialized
    oracle: Optional[dict] = field(default=None, repr=False, compare=False)

    def __len__(self):
        return len(self.entries)

    @property
    def has_dos(self) -> bool:
        return self.category is LabelCategory.DOS_AVAILABLE

    def image_file(self, i: int) -> Path:
        env = os.environ.get(DATA_ROOT_ENV)
        base = Path(env) if env else (self.root or Path("."))
        return base / self.entries[i].image_path

    def labels(self, i: int) -> SampleLabels:
        e = self.entries[i]
        dos = None
        if self.category is LabelCategory.DOS_AVAILABLE:
            dos = _entry_dos(e, self.scale)
        sos = e.sos if self.category is LabelCategory.MOS_SOS_AVAILABLE else None
        return SampleLabels(mos=e.mos, category=self.category, sos=sos, dos=dos)

    def mos_array(self, indices=None) -> np.ndarray:
        idx = range(len(self)) if indices is None else indices
        return np.array([self.entries[i].mos for i in idx], dtype=np.float64)

    def header(self) -> dict:
        return {"name": self.name, "scale": self.scale.to_dict(), "category": self.category.value}


def _entry_dos(e: ManifestEntry, scale: QualityScale) -> OpinionDistribution:
    if e.dos is not None:
        return OpinionDistribution.normalized(e.dos, scale)
    return dos_from_ratings(e.raw_ratings, scale)


def infer_category(entries) -> LabelCategory:
    has_dos = [e.dos is not None or e.raw_ratings is not None for e in entries]
    has_sos = [e.sos is not None for e in entries]
    if entries and all(has_dos):
        return LabelCategory.DOS_AVAILABLE
    if entries and all(has_sos) and not any(has_dos):
        return LabelCategory.MOS_SOS_AVAILABLE
    if not any(has_dos) and not any(has_sos):
        return LabelCategory.MOS_ONLY
    raise ValidationError("entries mix label types; declare the category in the header")


def validate_entry(i: int, e: ManifestEntry, scale: QualityScale, category: LabelCategory):
    where = f"entry {i} ({e.image_path})"
    if not scale.range_start <= e.mos <= scale.range_end:
        raise ValidationError(f"{where}: mos {e.mos} outside [{scale.range_start}, {scale.range_end}]")
    if category is LabelCategory.MOS_ONLY and (e.sos is not None or e.dos is not None):
        raise ValidationError(f"{where}: MOS_ONLY manifest but the entry carries sos/dos")
    if category is LabelCategory.MOS_SOS_AVAILABLE:
        if e.sos is None:
            raise ValidationError(f"{where}: MOS_SOS_AVAILABLE manifest but sos is missing")
        if e.dos is not None:
            raise ValidationError(f"{where}: MOS_SOS_AVAILABLE manifest but the entry carries dos")
    if category is LabelCategory.DOS_AVAILABLE:
        if e.dos is None and e.raw_ratings is None:
            raise ValidationError(f"{where}: DOS_AVAILABLE manifest but no dos or raw_ratings")
        if e.dos is not None:
            if len(e.dos) != scale.num_levels:
                raise ValidationError(f"{where}: dos has {len(e.dos)} bins, scale has {scale.num_levels}")
            if abs(sum(e.dos) - 1.0) > DOS_SUM_TOL:
                raise ValidationError(f"{where}: dos sums to {sum(e.dos)!r}")
    try:
        if category is LabelCategory.DOS_AVAILABLE:
            SampleLabels(e.mos, category, dos=_entry_dos(e, scale))
        elif category is LabelCategory.MOS_SOS_AVAILABLE:
            SampleLabels(e.mos, category, sos=e.sos)
    except DosIqaError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def _parse_entry(obj, lineno) -> ManifestEntry:
    if not isinstance(obj, dict) or "image_path" not in obj or "mos" not in obj:
        raise ParseError(f"line {lineno}: an entry needs 'image_path' and 'mos'")
    unknown = set(obj) - {"image_path", "mos", "sos", "dos", "raw_ratings"}
    if unknown:
        raise ParseError(f"line {lineno}: unknown fields {sorted(unknown)}")
    try:
        return ManifestEntry(
            image_path=str(obj["image_path"]),
            mos=float(obj["mos"]),
            sos=None if obj.get("sos") is None else float(obj["sos"]),
            dos=None if obj.get("dos") is None else [float(v) for v in obj["dos"]],
            raw_ratings=None if obj.get("raw_ratings") is None else [int(v) for v in obj["raw_ratings"]],
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"line {lineno}: {exc}") from exc


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append((lineno, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: {exc.msg}") from exc
    if not records:
        raise ParseError(f"{path}: empty manifest")
    lineno, header = records[0]
    if not isinstance(header, dict) or "scale" not in header:
        raise ParseError(f"{path}:{lineno}: the first line must be a header with a 'scale'")
    try:
        scale = QualityScale.from_dict(header["scale"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}:{lineno}: bad scale: {exc}") from exc
    entries = [_parse_entry(obj, n) for n, obj in records[1:]]
    if header.get("category"):
        try:
            category = LabelCategory(header["category"])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: unknown category {header['category']!r}") from exc
    else:
        category = infer_category(entries)
    for i, e in enumerate(entries):
        validate_entry(i, e, scale, category)
    return DatasetManifest(str(header.get("name", path.stem)), scale, category, entries,
                           root=path.parent)


def save_manifest(manifest: DatasetManifest, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(manifest.header())]
    lines += [json.dumps(e.to_json()) for e in manifest.entries]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path

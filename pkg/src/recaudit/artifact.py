"""On-disk run artifacts: one JSON document per run under ``runs/{config_digest}/``."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from ._io import atomic_write_text, canonical_json
from .errors import IoFailure
from .metrics import BiasScores
from .promptgen import NEUTRAL_ID

ARTIFACT_FILE = "artifact.json"
STATS_FILE = "stats.json"
FORMAT_VERSION = 1


@dataclass
class Record:
    attribute_id: str
    seed: int
    prompt_fingerprint: str = ""
    backend_id: str = ""
    response_text: str | None = None
    item_ids: list[str] = field(default_factory=list)
    diagnostics: dict[str, int] = field(default_factory=dict)
    degraded: bool = False
    scores: dict[str, float] | None = None
    tag_ratios: dict[str, float] = field(default_factory=dict)
    excluded: str | None = None
    note: str | None = None

    @property
    def is_neutral(self) -> bool:
        return self.attribute_id == NEUTRAL_ID

    def bias_scores(self, k: int, prag_mode: str) -> BiasScores | None:
        if self.scores is None:
            return None
        return BiasScores(
            self.attribute_id,
            self.scores["iou"],
            self.scores["serp"],
            self.scores["prag"],
            prag_mode,
            k,
            bool(self.scores.get("degraded_input", False)),
        )


@dataclass
class RunArtifact:
    config_digest: str
    model: str
    dataset: str
    domain: str
    catalog_hash: str
    k: int
    seeds: list[int]
    prag_mode: str
    context: str | None
    attributes: list[dict[str, str]]
    tags: list[str]
    backend_id: str = ""
    records: list[Record] = field(default_factory=list)
    stats: dict[str, Any] = field(default_factory=dict)

    def document(self) -> dict[str, Any]:
        doc = asdict(self)
        doc.pop("stats")
        doc["format_version"] = FORMAT_VERSION
        return doc

    def digest(self) -> str:
        blob = json.dumps(self.document(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def attribute_ids(self) -> list[str]:
        return [a["id"] for a in self.attributes]

    def by_attribute(self) -> dict[str, dict[int, Record]]:
        out: dict[str, dict[int, Record]] = {NEUTRAL_ID: {}}
        for a in self.attribute_ids():
            out[a] = {}
        for r in self.records:
            out.setdefault(r.attribute_id, {})[r.seed] = r
        return out

    def exclusions(self) -> list[Record]:
        return [r for r in self.records if r.excluded]

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        path = atomic_write_text(directory / ARTIFACT_FILE, canonical_json(self.document()))
        atomic_write_text(directory / STATS_FILE, canonical_json(self.stats))
        return path

    @classmethod
    def from_document(cls, doc: dict[str, Any], stats: dict[str, Any] | None = None) -> "RunArtifact":
        doc = dict(doc)
        doc.pop("format_version", None)
        records = [Record(**r) for r in doc.pop("records", [])]
        return cls(**doc, records=records, stats=stats or {})

    @classmethod
    def load(cls, directory: str | Path) -> "RunArtifact":
        directory = Path(directory)
        path = directory / ARTIFACT_FILE if directory.is_dir() else directory
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise IoFailure(f"cannot read artifact {path}: {exc}") from exc
        stats_path = path.parent / STATS_FILE
        stats = json.loads(stats_path.read_text(encoding="utf-8")) if stats_path.is_file() else {}
        return cls.from_document(doc, stats)


def find_artifacts(root: str | Path) -> list[Path]:
    """Artifact directories at or below ``root``, sorted by path."""
    root = Path(root)
    if (root / ARTIFACT_FILE).is_file():
        return [root]
    return sorted(p.parent for p in root.rglob(ARTIFACT_FILE))

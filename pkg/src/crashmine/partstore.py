"""Content-addressed catalog of part instances.

Layout of a store root::

    parts/<md5>.mesh     canonical sub-mesh bytes, written once per digest
    catalog.jsonl        one JSON object per part instance, append-only
    previews/            SVG previews, keyed by digest

One writer at a time; readers may run concurrently since mesh files appear
atomically (temp file + rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .disassemble import PartMesh, canonicalize, md5_hex, parse_canonical
from .errors import ConflictError, StorageError
from .metageom import PartMetadata


@dataclass(frozen=True)
class CatalogEntry:
    digest: str
    part_id: int
    source_model: str
    simulation_id: str
    metadata: PartMetadata
    part_name: str | None = None
    preview_paths: tuple[str, ...] = field(default=())

    @property
    def key(self):
        return (self.simulation_id, self.part_id)

    def to_json(self) -> str:
        return json.dumps({
            "digest": self.digest,
            "part_id": self.part_id,
            "part_name": self.part_name,
            "source_model": self.source_model,
            "simulation_id": self.simulation_id,
            "metadata": self.metadata.to_dict(),
            "preview_paths": list(self.preview_paths),
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "CatalogEntry":
        d = json.loads(line)
        return cls(
            digest=d["digest"],
            part_id=int(d["part_id"]),
            source_model=d["source_model"],
            simulation_id=d["simulation_id"],
            metadata=PartMetadata.from_dict(d["metadata"]),
            part_name=d.get("part_name"),
            preview_paths=tuple(d.get("preview_paths") or ()),
        )


@dataclass(frozen=True)
class DedupStats:
    total_instances: int
    distinct_digests: int
    reduction_ratio: float


def _atomic_write(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


class PartStore:
    def __init__(self, root):
        self.root = Path(root)
        self.parts_dir = self.root / "parts"
        self.previews_dir = self.root / "previews"
        self.catalog_path = self.root / "catalog.jsonl"
        try:
            self.parts_dir.mkdir(parents=True, exist_ok=True)
            self.previews_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot create store at {self.root}: {exc}") from exc
        self._entries: dict[tuple[str, int], CatalogEntry] = {}
        self._load()

    def _load(self):
        if not self.catalog_path.exists():
            return
        try:
            text = self.catalog_path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot read {self.catalog_path}: {exc}") from exc
        for line in text.splitlines():
            if line.strip():
                entry = CatalogEntry.from_json(line)
                self._entries[entry.key] = entry

    def mesh_path(self, digest: str) -> Path:
        return self.parts_dir / f"{digest}.mesh"

    def ingest(self, part: PartMesh, metadata: PartMetadata, simulation_id: str,
               part_name: str | None = None) -> CatalogEntry:
        """Record one part instance; write its mesh only if the digest is new.

        Re-ingesting the same (simulation, part, digest) returns the stored entry
        unchanged. A different digest for an existing (simulation, part) raises
        :class:`ConflictError`.
        """
        data = canonicalize(part)
        digest = md5_hex(data)
        if metadata.digest != digest:
            raise ValueError(f"metadata digest {metadata.digest} does not match part "
                             f"{part.part_id} ({digest})")
        key = (simulation_id, part.part_id)
        old = self._entries.get(key)
        if old is not None:
            if old.digest != digest:
                raise ConflictError(
                    f"simulation {simulation_id} part {part.part_id} already stored with "
                    f"digest {old.digest}, refusing {digest}")
            return old

        entry = CatalogEntry(digest, part.part_id, part.source_model, simulation_id,
                             metadata, part_name)
        try:
            path = self.mesh_path(digest)
            if not path.exists():
                _atomic_write(path, data)
            with open(self.catalog_path, "a", encoding="utf-8") as fh:
                fh.write(entry.to_json() + "\n")
        except OSError as exc:
            raise StorageError(f"failed to store part {part.part_id}: {exc}") from exc
        self._entries[key] = entry
        return entry

    def entries(self, simulations: Iterable[str] | None = None) -> list[CatalogEntry]:
        """Entries sorted by (simulation_id, part_id), optionally filtered."""
        sims = None if simulations is None else set(simulations)
        return [self._entries[k] for k in sorted(self._entries)
                if sims is None or k[0] in sims]

    def simulations(self) -> list[str]:
        return sorted({k[0] for k in self._entries})

    def load_mesh(self, digest: str, source_model: str = "") -> PartMesh:
        try:
            return parse_canonical(self.mesh_path(digest).read_bytes(), source_model)
        except OSError as exc:
            raise StorageError(f"cannot read mesh {digest}: {exc}") from exc

    def mesh_file_count(self) -> int:
        return sum(1 for _ in self.parts_dir.glob("*.mesh"))

    def __len__(self):
        return len(self._entries)


def modified_parts(catalog: Iterable[CatalogEntry], simulations: Iterable[str] | None = None,
                   key: Callable[[CatalogEntry], object] | None = None) -> set:
    """Part keys that occur with more than one distinct digest.

    ``key`` maps an entry to its part identity; by default the part number,
    in the pipeline the part-cluster id.
    """
    key = key or (lambda e: e.part_id)
    sims = None if simulations is None else set(simulations)
    digests = defaultdict(set)
    for e in catalog:
        if sims is None or e.simulation_id in sims:
            digests[key(e)].add(e.digest)
    return {k for k, ds in digests.items() if len(ds) > 1}


def dedup_stats(catalog: Iterable[CatalogEntry]) -> DedupStats:
    entries = list(catalog)
    total = len(entries)
    distinct = len({e.digest for e in entries})
    ratio = 0.0 if total == 0 else 1.0 - distinct / total
    return DedupStats(total, distinct, ratio)

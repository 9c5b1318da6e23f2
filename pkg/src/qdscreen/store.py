"""Directory-backed record store.

Layout::

    <root>/index              flat text map, one "defect_id<TAB>relative path" per line
    <root>/records/<id>.json  one record document per defect
    <root>/host.json          HostSpec
    <root>/chempots.json      ChemPotSet

Writes follow a single-writer contract; any number of readers may query.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .records import (
    ChemPotSet,
    DefectRecord,
    HostSpec,
    RecordError,
    parse_record,
    serialize_record,
)


class StoreError(RuntimeError):
    pass


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


@dataclass
class DefectStore:
    root: Path
    host: HostSpec
    chempots: ChemPotSet
    index: dict[str, str]

    @classmethod
    def create(cls, root, host: HostSpec | None = None, chempots: ChemPotSet | None = None) -> DefectStore:
        root = Path(root)
        (root / "records").mkdir(parents=True, exist_ok=True)
        store = cls(root, host or HostSpec(), chempots or ChemPotSet({}), {})
        if (root / "index").exists():
            store.index = _read_index(root / "index")
        store._write_meta()
        store._write_index()
        return store

    @classmethod
    def open(cls, root) -> DefectStore:
        root = Path(root)
        if not (root / "index").exists():
            raise StoreError(f"{root} is not a defect store (no index)")
        try:
            host = HostSpec.from_dict(json.loads((root / "host.json").read_text()))
            chempots = ChemPotSet.from_dict(json.loads((root / "chempots.json").read_text()))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise StoreError(f"cannot read store metadata: {exc}") from exc
        return cls(root, host, chempots, _read_index(root / "index"))

    def set_host(self, host: HostSpec) -> None:
        self.host = host
        self._write_meta()

    def set_chempots(self, chempots: ChemPotSet) -> None:
        self.chempots = chempots
        self._write_meta()

    def _write_meta(self) -> None:
        _atomic_write(self.root / "host.json", json.dumps(self.host.to_dict(), indent=1, sort_keys=True) + "\n")
        _atomic_write(self.root / "chempots.json", json.dumps(self.chempots.to_dict(), indent=1, sort_keys=True) + "\n")

    def _write_index(self) -> None:
        lines = "".join(f"{k}\t{v}\n" for k, v in sorted(self.index.items()))
        _atomic_write(self.root / "index", lines)

    def put(self, record: DefectRecord, *, flush: bool = True) -> str:
        """Store ``record``; re-putting identical content is a no-op.

        Raises StoreError if a different record already uses the same id.
        """
        text = serialize_record(record)
        did = record.defect_id
        rel = f"records/{did}.json"
        path = self.root / rel
        if did in self.index:
            existing = (self.root / self.index[did]).read_text(encoding="utf-8")
            if existing != text:
                raise StoreError(f"id collision: {did} already stored with different content")
        _atomic_write(path, text)
        if self.index.get(did) != rel:
            self.index[did] = rel
            if flush:
                self._write_index()
        return did

    def put_many(self, records: Iterable[DefectRecord]) -> list[str]:
        ids = [self.put(r, flush=False) for r in records]
        self._write_index()
        return ids

    def get(self, defect_id: str) -> DefectRecord:
        try:
            rel = self.index[defect_id]
        except KeyError:
            raise KeyError(defect_id) from None
        return parse_record((self.root / rel).read_text(encoding="utf-8"))

    def query(
        self,
        element: str | None = None,
        site: str | None = None,
        charge: int | None = None,
        predicate: Callable[[DefectRecord], bool] | None = None,
    ) -> list[DefectRecord]:
        """Records matching every given filter, sorted by defect_id."""
        out = []
        for did in sorted(self.index):
            el, st, q = did.split(":")
            if element is not None and el != element:
                continue
            if site is not None and st != site:
                continue
            if charge is not None and _charge(q) != charge:
                continue
            rec = self.get(did)
            if predicate is None or predicate(rec):
                out.append(rec)
        return out

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, defect_id: str) -> bool:
        return defect_id in self.index


def _charge(token: str) -> int:
    return int(token[1:])


def _read_index(path: Path) -> dict[str, str]:
    index = {}
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            did, rel = line.split("\t")
        except ValueError:
            raise StoreError(f"{path}:{n}: malformed index line") from None
        index[did] = rel
    return index


def load_records(paths: Iterable[Path]) -> list[DefectRecord]:
    """Parse record files, annotating validation errors with the file name."""
    out = []
    for p in paths:
        try:
            out.append(parse_record(Path(p).read_text(encoding="utf-8")))
        except RecordError as exc:
            err = RecordError(f"{p}: {exc}")
            err.field = exc.field
            raise err from None
    return out

"""Content-addressed bundle store: write-once directories keyed by digest.

Bundles are built into a temp directory and renamed into place, so
concurrent writers can never expose a partial bundle. Editing never
mutates an existing bundle; it always produces a new id.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import uuid
import zipfile
from io import BytesIO
from pathlib import Path
from typing import Callable


class StoreError(KeyError):
    """Unknown id or unusable store directory."""


def bundle_digest(bundle_dir) -> str:
    root = Path(bundle_dir)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode("utf-8") + b"\0")
        h.update(path.read_bytes() + b"\0")
    return h.hexdigest()


def bundle_zip_bytes(bundle_dir) -> bytes:
    """Deterministic archive: sorted entries, fixed timestamps, stored."""
    root = Path(bundle_dir)
    buf = BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        for path in sorted(p for p in root.rglob("*") if p.is_file()):
            info = zipfile.ZipInfo(str(path.relative_to(root)), date_time=(1980, 1, 1, 0, 0, 0))
            info.external_attr = 0o644 << 16
            zf.writestr(info, path.read_bytes())
    return buf.getvalue()


class BundleStore:
    def __init__(self, root) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, build: Callable[[Path], None]) -> str:
        """Build a bundle via `build(tmp_dir)`, file it under its digest."""
        tmp = self.root / f".tmp-{uuid.uuid4().hex}"
        tmp.mkdir(parents=True)
        try:
            build(tmp)
            digest = bundle_digest(tmp)
            final = self.root / digest
            if final.exists():
                shutil.rmtree(tmp)
            else:
                tmp.rename(final)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise
        self._write_index()
        return digest

    def path(self, bundle_id: str) -> Path:
        p = self.root / bundle_id
        if not bundle_id or bundle_id.startswith(".") or "/" in bundle_id or not p.is_dir():
            raise StoreError(f"unknown bundle id {bundle_id!r}")
        return p

    def exists(self, bundle_id: str) -> bool:
        try:
            self.path(bundle_id)
            return True
        except StoreError:
            return False

    def ids(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if p.is_dir() and not p.name.startswith("."))

    def _write_index(self) -> None:
        index = {"bundles": self.ids()}
        (self.root / "index.json").write_text(
            json.dumps(index, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
        )

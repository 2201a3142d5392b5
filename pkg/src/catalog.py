"""
Results catalog for trace-posets

A catalog is one JSON file holding CatalogEntry records, plus a sidecar
directory `<catalog>.witnesses/` of witness families stored under the
sha256 of their canonical JSON. Writes go through a single writer holding
`<catalog>.lock`; readers parse whatever snapshot is on disk, and every
write replaces the file atomically.
"""

import hashlib
import json
import os
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple, Type, TypeVar, Union

from src import __version__
from src.core_sets import Family
from src.errors import IntegrityError, SchemaError
from src.logger import Logger
from src.models import RESULT_KINDS, STATUSES, CatalogEntry, CatalogKey, ExtremalResult

T = TypeVar('T')

CATALOG_VERSION = 1
WITNESS_SUFFIX = ".witnesses"
LOCK_SUFFIX = ".lock"


def retry_with_exponential_backoff(max_retries: int, base_delay: float,
                                   retry_on: Tuple[Type[BaseException], ...] = (FileExistsError,)) -> Callable:
    """
    Decorator that retries a call failing with one of `retry_on`.

    The delay between attempts doubles each time: base_delay, base_delay * 2,
    base_delay * 4, ... After max_retries attempts the last error propagates.

    Example:
        @retry_with_exponential_backoff(max_retries=5, base_delay=0.05)
        def acquire():
            return os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    """
    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @wraps(func)
        def wrapper(*args, **kwargs) -> T:
            for attempt in range(max_retries):
                try:
                    return func(*args, **kwargs)
                except retry_on:
                    if attempt < max_retries - 1:
                        time.sleep(base_delay * (2 ** attempt))
                        continue
                    raise
            return func(*args, **kwargs)

        return wrapper
    return decorator


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def witness_hash(fam: Family) -> str:
    """sha256 of the family's canonical JSON; the blob's file name."""
    return hashlib.sha256(canonical_json(fam.to_json()).encode()).hexdigest()


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def entry_from_dict(doc: Dict[str, Any]) -> CatalogEntry:
    """
    Parse one catalog record.

    Raises:
        SchemaError: On a missing field, a wrong type, or an unknown kind or status
    """
    if not isinstance(doc, dict):
        raise SchemaError("catalog entry must be an object")
    required = ("kind", "poset_id", "n", "value", "status")
    missing = [name for name in required if name not in doc]
    if missing:
        raise SchemaError(f"catalog entry is missing {', '.join(missing)}")
    if doc["kind"] not in RESULT_KINDS:
        raise SchemaError(f"unknown catalog kind {doc['kind']!r}")
    if doc["status"] not in STATUSES:
        raise SchemaError(f"unknown catalog status {doc['status']!r}")
    for name in ("n", "value"):
        if not isinstance(doc[name], int) or isinstance(doc[name], bool):
            raise SchemaError(f"catalog field {name!r} must be an integer")
    l = doc.get("l")
    if l is not None and not isinstance(l, int):
        raise SchemaError("catalog field 'l' must be an integer or null")
    witness_ref = doc.get("witness_ref")
    if witness_ref is not None and (not isinstance(witness_ref, str) or len(witness_ref) != 64):
        raise SchemaError("catalog field 'witness_ref' must be a sha256 hex digest")
    return CatalogEntry(
        key=CatalogKey(doc["kind"], str(doc["poset_id"]), doc["n"], l),
        poset_label=str(doc.get("poset", "")),
        value=doc["value"],
        status=doc["status"],
        witness_ref=witness_ref,
        method=dict(doc.get("method") or {}),
        tool_version=str(doc.get("tool_version", "")),
        timestamp=str(doc.get("timestamp", "")),
    )


def entry_from_result(result: ExtremalResult, witness_ref: Optional[str] = None,
                      extra_method: Optional[Dict[str, Any]] = None) -> CatalogEntry:
    method = {"bounds": result.bounds, "symmetry": result.symmetry, "nodes": result.nodes}
    if extra_method:
        method.update(extra_method)
    return CatalogEntry(
        key=CatalogKey(result.kind, result.poset_id, result.n, result.l),
        poset_label=result.poset_label,
        value=result.value,
        status=result.status,
        witness_ref=witness_ref,
        method=method,
        tool_version=__version__,
        timestamp=utc_now(),
    )


def _preference(entry: CatalogEntry) -> Tuple[bool, int]:
    return entry.status == "exact", entry.value


def merge_entries(a: CatalogEntry, b: CatalogEntry) -> CatalogEntry:
    """
    Reconcile two records of one key.

    Exact beats any bound; among bounds the larger value wins. Full ties go
    to the record with the smaller canonical JSON, so merging is commutative
    and idempotent.

    Raises:
        IntegrityError: If both records are exact with different values
    """
    if a.key != b.key:
        raise IntegrityError(f"cannot merge entries of different keys {a.key} and {b.key}")
    if a.status == "exact" and b.status == "exact" and a.value != b.value:
        raise IntegrityError(
            f"conflicting exact values for {a.key.kind}({a.key.n}, {a.poset_label or a.key.poset_id}): "
            f"{a.value} vs {b.value}"
        )
    if _preference(a) != _preference(b):
        return a if _preference(a) > _preference(b) else b
    return min(a, b, key=lambda e: canonical_json(e.to_dict()))


class Catalog:
    """
    File-backed catalog with content-addressed witness blobs.

    Example:
        catalog = Catalog("catalog.json", logger)
        catalog.put(entry, witness=result.witness)
        stored = catalog.get(entry.key)
    """

    def __init__(self, path: Union[str, Path], logger: Optional[Logger] = None,
                 lock_retries: int = 5, lock_base_delay: float = 0.05):
        self.path = Path(path)
        self.logger = logger
        self.lock_retries = lock_retries
        self.lock_base_delay = lock_base_delay

    @property
    def witness_dir(self) -> Path:
        return self.path.with_name(self.path.name + WITNESS_SUFFIX)

    @property
    def lock_path(self) -> Path:
        return self.path.with_name(self.path.name + LOCK_SUFFIX)

    def load(self) -> Dict[CatalogKey, CatalogEntry]:
        """
        Parse the catalog file; a missing file is an empty catalog.

        Raises:
            SchemaError: If the file is not a catalog document
            IntegrityError: If the file repeats a key with conflicting exact values
        """
        if not self.path.exists():
            return {}
        try:
            doc = json.loads(self.path.read_text())
        except json.JSONDecodeError as e:
            raise SchemaError(f"catalog {self.path} is not valid JSON: {e}")
        if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
            raise SchemaError(f"catalog {self.path} needs an 'entries' list")
        if doc.get("version", CATALOG_VERSION) != CATALOG_VERSION:
            raise SchemaError(f"unsupported catalog version {doc.get('version')!r}")
        entries: Dict[CatalogKey, CatalogEntry] = {}
        for raw in doc["entries"]:
            entry = entry_from_dict(raw)
            entries[entry.key] = merge_entries(entries[entry.key], entry) if entry.key in entries else entry
        return entries

    def entries(self) -> List[CatalogEntry]:
        return sorted(self.load().values(), key=lambda e: e.key.as_tuple())

    def get(self, key: CatalogKey) -> Optional[CatalogEntry]:
        return self.load().get(key)

    def _write(self, entries: Dict[CatalogKey, CatalogEntry]) -> None:
        ordered = sorted(entries.values(), key=lambda e: e.key.as_tuple())
        doc = {"version": CATALOG_VERSION, "entries": [e.to_dict() for e in ordered]}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_name(f"{self.path.name}.{os.getpid()}.tmp")
        tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, self.path)

    def _try_lock(self) -> int:
        return os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)

    @contextmanager
    def _locked(self) -> Iterator[None]:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        acquire = retry_with_exponential_backoff(self.lock_retries, self.lock_base_delay)(self._try_lock)
        try:
            fd = acquire()
        except FileExistsError:
            raise IntegrityError(f"catalog {self.path} is locked by another writer ({self.lock_path})")
        try:
            yield
        finally:
            os.close(fd)
            os.unlink(self.lock_path)

    def store_witness(self, fam: Family) -> str:
        digest = witness_hash(fam)
        blob = self.witness_dir / f"{digest}.json"
        if not blob.exists():
            self.witness_dir.mkdir(parents=True, exist_ok=True)
            tmp = blob.with_suffix(f".{os.getpid()}.tmp")
            tmp.write_text(canonical_json(fam.to_json()))
            os.replace(tmp, blob)
        return digest

    def load_witness(self, digest: str) -> Family:
        """
        Read a witness blob and check it against its name.

        Raises:
            IntegrityError: If the blob is missing or its hash does not match
        """
        blob = self.witness_dir / f"{digest}.json"
        if not blob.exists():
            raise IntegrityError(f"witness blob {digest} is missing from {self.witness_dir}")
        try:
            fam = Family.from_json(json.loads(blob.read_text()))
        except (json.JSONDecodeError, SchemaError) as e:
            raise IntegrityError(f"witness blob {digest} is corrupt: {e}")
        if witness_hash(fam) != digest:
            raise IntegrityError(f"witness blob {digest} does not match its hash")
        return fam

    def put(self, entry: CatalogEntry, witness: Optional[Family] = None) -> CatalogEntry:
        """
        Store an entry (and its witness), reconciling with any stored record of the key.

        Returns:
            The record now stored under the key

        Raises:
            IntegrityError: On conflicting exact values or a held lock
        """
        with self._locked():
            if witness is not None:
                entry.witness_ref = self.store_witness(witness)
            entries = self.load()
            stored = merge_entries(entries[entry.key], entry) if entry.key in entries else entry
            entries[entry.key] = stored
            self._write(entries)
        if self.logger:
            self.logger.info("Catalog entry stored", catalog=str(self.path), kind=entry.key.kind,
                             n=entry.key.n, poset=entry.poset_label, value=stored.value, status=stored.status)
        return stored

    def merge_from(self, other: 'Catalog') -> int:
        """
        Fold another catalog (entries and witness blobs) into this one.

        Returns:
            Number of keys whose stored record changed
        """
        incoming = other.load()
        with self._locked():
            entries = self.load()
            changed = 0
            for key, entry in incoming.items():
                if entry.witness_ref is not None:
                    self.store_witness(other.load_witness(entry.witness_ref))
                merged = merge_entries(entries[key], entry) if key in entries else entry
                if key not in entries or merged is not entries[key]:
                    changed += 1
                entries[key] = merged
            self._write(entries)
        if self.logger:
            self.logger.info("Catalog merged", catalog=str(self.path), source=str(other.path),
                             incoming=len(incoming), changed=changed)
        return changed


def catalog_put(path: Union[str, Path], entry: CatalogEntry, witness: Optional[Family] = None,
                logger: Optional[Logger] = None) -> CatalogEntry:
    return Catalog(path, logger).put(entry, witness)


def catalog_get(path: Union[str, Path], key: CatalogKey) -> Optional[CatalogEntry]:
    return Catalog(path).get(key)


def catalog_merge(path_a: Union[str, Path], path_b: Union[str, Path], out_path: Union[str, Path],
                  logger: Optional[Logger] = None) -> Catalog:
    """
    Merge two catalog files into out_path (which may be one of the inputs).

    Raises:
        IntegrityError: If the inputs disagree on an exact value
    """
    left, right = Catalog(path_a).load(), Catalog(path_b).load()
    for key in left.keys() & right.keys():
        merge_entries(left[key], right[key])
    out = Catalog(out_path, logger)
    for source in (path_a, path_b):
        if Path(source).resolve() != out.path.resolve():
            out.merge_from(Catalog(source))
    if not out.path.exists():
        out.merge_from(Catalog(path_a))
    return out

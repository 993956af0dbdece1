"""Map and reduce operations for the two distribution schemes.

Simple scheme
    Data points are keyed by their full inner bucket id; a query sends one
    message per distinct probe bucket.  Every distinct probe therefore
    crosses the network, so query traffic grows with the probe count L.

Layered scheme
    Data points are keyed by the outer hash of their inner bucket; the
    message payload carries the inner bucket id so the reducer can index
    the machine-local store exactly.  A query sends one message per
    distinct outer key, and the reducer regenerates the query's offsets
    from (seed, query_id) to recover which inner buckets to search there.
    Nearby probe buckets share outer keys, so query traffic stays nearly
    flat in L.

Both schemes emit exactly the pairs at distance <= c*r (closed threshold)
among the probed buckets, and both deduplicate probe buckets per query, so
their outputs agree configuration for configuration.

Serialized message sizes (shuffle byte accounting) use a fixed layout:
identifiers are 8 bytes, bucket coordinates are 8-byte signed little-endian
integers, point coordinates are 4-byte little-endian IEEE-754 floats.
``KeyValueMessage.encode`` produces exactly these bytes and ``byte_size``
equals their length.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import BucketId, InnerHashFamily, LshParams, MachineKey, OuterHash
from .errors import IntegrityError, ParameterError
from .probe import build_probe_plan, sample_offsets


class Scheme(str, Enum):
    SIMPLE = "simple"
    LAYERED = "layered"


@dataclass(frozen=True)
class DataRecord:
    point_id: int
    point: np.ndarray

    def __post_init__(self):
        if self.point_id < 0:
            raise ParameterError(f"point_id must be non-negative, got {self.point_id}")


@dataclass(frozen=True)
class QueryRecord:
    query_id: int
    point: np.ndarray

    def __post_init__(self):
        if self.query_id < 0:
            raise ParameterError(f"query_id must be non-negative, got {self.query_id}")


@dataclass(frozen=True)
class MatchResult:
    query_id: int
    point_id: int
    distance: float


def key_bytes(key) -> bytes:
    """Canonical bytes of a routing key (int or bucket id)."""
    if isinstance(key, (int, np.integer)):
        return struct.pack("<q", int(key))
    return np.asarray(key, dtype="<i8").tobytes()


def _record_bytes(rec_id: int, point: np.ndarray) -> bytes:
    return struct.pack("<Q", rec_id) + np.asarray(point, dtype="<f4").tobytes()


@dataclass(frozen=True)
class KeyValueMessage:
    """One shuffled (key, value) pair.

    ``bucket`` is present exactly on layered data messages, where the value
    carries the inner bucket id alongside the point.
    """

    key: MachineKey | BucketId
    record: DataRecord | QueryRecord
    bucket: BucketId | None = None

    def encode(self) -> bytes:
        body = key_bytes(self.key)
        if self.bucket is not None:
            body += key_bytes(self.bucket)
        rec_id = (
            self.record.point_id
            if isinstance(self.record, DataRecord)
            else self.record.query_id
        )
        return body + _record_bytes(rec_id, self.record.point)

    @property
    def byte_size(self) -> int:
        key_len = 8 if isinstance(self.key, (int, np.integer)) else 8 * len(self.key)
        bucket_len = 0 if self.bucket is None else 8 * len(self.bucket)
        return key_len + bucket_len + 8 + 4 * self.record.point.shape[-1]


def data_message_size(scheme: Scheme, dim: int, k: int) -> int:
    """Serialized size of one data message, from the documented layout."""
    if scheme is Scheme.SIMPLE:
        return 8 * k + 8 + 4 * dim
    return 8 + 8 * k + 8 + 4 * dim


def query_message_size(scheme: Scheme, dim: int, k: int) -> int:
    """Serialized size of one query message."""
    if scheme is Scheme.SIMPLE:
        return 8 * k + 8 + 4 * dim
    return 8 + 8 + 4 * dim


def map_data_simple(rec: DataRecord, inner: InnerHashFamily) -> KeyValueMessage:
    """Key a data point by its full inner bucket id."""
    return KeyValueMessage(key=inner.hash(rec.point), record=rec)


def map_data_layered(
    rec: DataRecord, inner: InnerHashFamily, outer: OuterHash
) -> KeyValueMessage:
    """Key a data point by the outer hash of its bucket; payload keeps the bucket."""
    bucket = inner.hash(rec.point)
    return KeyValueMessage(key=outer.hash(bucket), record=rec, bucket=bucket)


def map_query(
    rec: QueryRecord,
    scheme: Scheme,
    inner: InnerHashFamily,
    outer: OuterHash | None,
    params: LshParams,
    seed: int,
    probe_self: bool = True,
) -> list[KeyValueMessage]:
    """One message per distinct routing key of the query's probe set.

    Simple routes by inner bucket; layered routes by outer key and the
    message is just (key, query), offsets being regenerable downstream.
    """
    offsets = sample_offsets(rec.query_id, params, seed)
    if scheme is Scheme.SIMPLE:
        plan = build_probe_plan(rec.point, offsets, inner, probe_self=probe_self)
        return [KeyValueMessage(key=b, record=rec) for b in plan.buckets]
    if outer is None:
        raise ParameterError("layered scheme needs an outer hash")
    plan = build_probe_plan(rec.point, offsets, inner, outer, probe_self=probe_self)
    assert plan.outer_keys is not None
    distinct: list[MachineKey] = []
    seen: set[MachineKey] = set()
    for x in plan.outer_keys:
        if x not in seen:
            seen.add(x)
            distinct.append(x)
    return [KeyValueMessage(key=x, record=rec) for x in distinct]


def scan_bucket(
    query: np.ndarray, ids: np.ndarray, pts: np.ndarray, cutoff: float
) -> list[tuple[int, float]]:
    """Exact distances from one query to a bucket; keep <= cutoff (closed).

    This is the one distance filter in the package; both schemes and all
    callers share it so boundary behavior cannot diverge.
    """
    diffs = pts - query
    dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    hit = np.flatnonzero(dists <= cutoff)
    return [(int(ids[i]), float(dists[i])) for i in hit]


def reduce_simple(
    key: BucketId,
    data: list[DataRecord],
    queries: list[QueryRecord],
    params: LshParams,
) -> list[MatchResult]:
    """Cross-filter one bucket: all (query, point) pairs within c*r.

    Callers guarantee every data record hashes to ``key``; the op itself
    does not rehash.
    """
    if not data or not queries:
        return []
    ids = np.array([rec.point_id for rec in data], dtype=np.int64)
    pts = np.stack([rec.point for rec in data]).astype(np.float64)
    cutoff = params.c * params.r
    out: list[MatchResult] = []
    for q in queries:
        qv = np.asarray(q.point, dtype=np.float64)
        for pid, dist in scan_bucket(qv, ids, pts, cutoff):
            out.append(MatchResult(q.query_id, pid, dist))
    return out


class _BucketStore:
    """Machine-local index: inner bucket id -> (ids, points) matrices."""

    def __init__(self, payload: list[tuple[BucketId, DataRecord]]):
        groups: dict[bytes, list[DataRecord]] = {}
        for bucket, rec in payload:
            groups.setdefault(key_bytes(bucket), []).append(rec)
        self._groups = groups
        self._stacked: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}

    def lookup(self, bucket: BucketId) -> tuple[np.ndarray, np.ndarray] | None:
        kb = key_bytes(bucket)
        recs = self._groups.get(kb)
        if recs is None:
            return None
        cached = self._stacked.get(kb)
        if cached is None:
            ids = np.array([r.point_id for r in recs], dtype=np.int64)
            pts = np.stack([r.point for r in recs]).astype(np.float64)
            cached = (ids, pts)
            self._stacked[kb] = cached
        return cached


def _reduce_layered_stats(
    key: MachineKey,
    data: list[tuple[BucketId, DataRecord]],
    queries: list[QueryRecord],
    inner: InnerHashFamily,
    outer: OuterHash,
    params: LshParams,
    seed: int,
    probe_self: bool = True,
) -> tuple[list[MatchResult], int]:
    """reduce_layered plus the number of distance evaluations performed."""
    if data:
        buckets = np.array([b for b, _ in data], dtype=np.int64)
        recomputed = outer.hash_batch(buckets)
        bad = np.flatnonzero(recomputed != key)
        if bad.size:
            rec = data[int(bad[0])][1]
            raise IntegrityError(
                f"point {rec.point_id} carries outer key {int(recomputed[bad[0]])}"
                f" but was routed to {key}; routing is inconsistent"
            )
    store = _BucketStore(data)
    cutoff = params.c * params.r
    out: list[MatchResult] = []
    evals = 0
    for q in queries:
        offsets = sample_offsets(q.query_id, params, seed)
        plan = build_probe_plan(q.point, offsets, inner, outer, probe_self=probe_self)
        qv = np.asarray(q.point, dtype=np.float64)
        emitted: set[int] = set()
        for bucket in plan.buckets_for_key(key):
            found = store.lookup(bucket)
            if found is None:
                continue
            ids, pts = found
            evals += ids.shape[0]
            for pid, dist in scan_bucket(qv, ids, pts, cutoff):
                if pid not in emitted:
                    emitted.add(pid)
                    out.append(MatchResult(q.query_id, pid, dist))
    return out, evals


def reduce_layered(
    key: MachineKey,
    data: list[tuple[BucketId, DataRecord]],
    queries: list[QueryRecord],
    inner: InnerHashFamily,
    outer: OuterHash,
    params: LshParams,
    seed: int,
    probe_self: bool = True,
) -> list[MatchResult]:
    """Search this machine's share of each query's probe set.

    Offsets are regenerated from (seed, query_id); only probe buckets whose
    outer key equals ``key`` are searched here, and each is searched once.
    Payloads must satisfy outer(bucket) == key or IntegrityError is raised.
    Result pairs are deduplicated within the machine.
    """
    out, _ = _reduce_layered_stats(
        key, data, queries, inner, outer, params, seed, probe_self
    )
    return out

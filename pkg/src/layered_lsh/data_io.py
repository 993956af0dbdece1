"""Datasets, the exact-scan oracle, and on-disk formats.

Planted workload
    Data points are isotropic Gaussian with per-coordinate deviation
    1/sqrt(dim), so a point's expected squared norm is 1.  Each query picks
    a uniformly random data point (its parent, with replacement) and adds a
    Gaussian perturbation with per-coordinate deviation r/sqrt(dim), so the
    expected squared query-to-parent distance is r^2.  At moderate dim and
    desk-scale n the parent is almost always the only point within c*r of
    the query, which makes recall measurements unambiguous.

LSHV vector file (version 1, little-endian)
    offset  size  field
    0       4     magic "LSHV"
    4       4     uint32 format version, currently 1
    8       4     uint32 dim, >= 1
    12      8     uint64 n
    20      n*dim*4  float32 coordinates, row-major

    Total size is exactly 20 + n*dim*4 bytes.  Point ids are implicit row
    numbers 0..n-1.  Malformed files raise FormatError carrying the byte
    offset where the problem was detected.

Ground-truth cache (version 1, little-endian)
    One file per (data file, query file, radius) triple, named by a SHA-256
    key over the two LSHV payloads and the radius, plus a human-readable
    JSON sidecar index listing the entries.

    offset  size  field
    0       4     magic "LSHG"
    4       4     uint32 format version, currently 1
    8       8     float64 radius
    16      8     uint64 number of query entries
    24      ...   per query: uint64 query_id, uint32 count m,
                  then m * (uint64 point_id, float64 distance)
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ParameterError
from .rng import STREAM_DATA, STREAM_QUERY, substream

LSHV_MAGIC = b"LSHV"
LSHV_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")

GT_MAGIC = b"LSHG"
GT_VERSION = 1


@dataclass(frozen=True)
class Dataset:
    """An (n, dim) float32 point matrix with implicit ids 0..n-1.

    Coordinates are stored as float32, matching the file format, so that a
    write/read round trip is the identity.  ``provenance`` is a free-text
    tag; it does not survive a trip through the file format.
    """

    points: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        arr = np.array(self.points, dtype=np.float32)
        if arr.ndim != 2:
            raise ParameterError(f"points must be 2-d, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class GroundTruth:
    """Exact neighbors within ``radius`` per query.

    neighbors maps query_id to a list of (point_id, distance) sorted by
    ascending distance, ties broken by point_id.  Queries with no neighbor
    in range map to an empty list.
    """

    radius: float
    neighbors: dict[int, list[tuple[int, float]]] = field(default_factory=dict)


def generate_planted(
    n: int, n_queries: int, dim: int, r: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Deterministic planted workload; returns (data, queries).

    Parent indices are drawn with replacement and recorded in the query
    dataset's provenance tag (``planted_parent_ids`` parses them back).
    """
    if n < 1 or n_queries < 0 or dim < 1:
        raise ParameterError(
            f"need n >= 1, n_queries >= 0, dim >= 1; got {n}, {n_queries}, {dim}"
        )
    if not r > 0:
        raise ParameterError(f"r must be > 0, got {r}")
    g_data = substream(seed, STREAM_DATA)
    points = g_data.standard_normal((n, dim)) / math.sqrt(dim)
    g_query = substream(seed, STREAM_QUERY)
    parents = g_query.integers(0, n, size=n_queries)
    noise = g_query.standard_normal((n_queries, dim)) * (r / math.sqrt(dim))
    queries = points[parents] + noise
    data_ds = Dataset(
        points=points,
        provenance=f"planted-data n={n} dim={dim} r={r} seed={seed}",
    )
    parent_list = ",".join(str(int(p)) for p in parents)
    query_ds = Dataset(
        points=queries,
        provenance=(
            f"planted-queries n={n_queries} dim={dim} r={r} seed={seed}"
            f" parents={parent_list}"
        ),
    )
    return data_ds, query_ds


def planted_parent_ids(queries: Dataset) -> np.ndarray:
    """Parent index per query, parsed from a planted provenance tag."""
    for token in queries.provenance.split():
        if token.startswith("parents="):
            text = token[len("parents="):]
            if not text:
                return np.empty(0, dtype=np.int64)
            return np.array([int(x) for x in text.split(",")], dtype=np.int64)
    raise ParameterError("dataset provenance carries no planted parent ids")


def brute_force_near(data: Dataset, query, rho: float) -> list[tuple[int, float]]:
    """All (point_id, distance) with distance <= rho, exact linear scan.

    Sorted by ascending distance, ties by point_id.  rho may be inf.
    """
    if not (rho >= 0):
        raise ParameterError(f"rho must be >= 0, got {rho}")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (data.dim,):
        raise ParameterError(
            f"query must have shape ({data.dim},), got {q.shape}"
        )
    diffs = data.points.astype(np.float64) - q
    dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    idx = np.flatnonzero(dists <= rho)
    out = [(int(i), float(dists[i])) for i in idx]
    out.sort(key=lambda t: (t[1], t[0]))
    return out


def ground_truth(
    data: Dataset, queries: Dataset, rho: float, chunk: int = 256
) -> GroundTruth:
    """Exact neighbors within rho for every query, via blocked scans."""
    if not (rho >= 0):
        raise ParameterError(f"rho must be >= 0, got {rho}")
    if data.dim != queries.dim:
        raise ParameterError(
            f"dimension mismatch: data dim {data.dim}, queries dim {queries.dim}"
        )
    pts = data.points.astype(np.float64)
    neighbors: dict[int, list[tuple[int, float]]] = {}
    for start in range(0, queries.n, chunk):
        block = queries.points[start : start + chunk].astype(np.float64)
        # (b, n) distance block; memory stays modest for desk-scale n.
        d2 = (
            np.sum(block * block, axis=1)[:, None]
            + np.sum(pts * pts, axis=1)[None, :]
            - 2.0 * (block @ pts.T)
        )
        np.maximum(d2, 0.0, out=d2)
        dist = np.sqrt(d2)
        for row in range(block.shape[0]):
            qid = start + row
            idx = np.flatnonzero(dist[row] <= rho)
            found = [(int(i), float(dist[row, i])) for i in idx]
            found.sort(key=lambda t: (t[1], t[0]))
            neighbors[qid] = found
    for qid in range(queries.n):
        neighbors.setdefault(qid, [])
    return GroundTruth(radius=rho, neighbors=neighbors)


def write_vectors(path, dataset: Dataset) -> None:
    """Write a dataset in the LSHV layout documented in the module docstring."""
    if dataset.dim > 0xFFFFFFFF:
        raise FormatError(f"dim {dataset.dim} exceeds the format's uint32 field", 8)
    path = Path(path)
    payload = dataset.points.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(LSHV_MAGIC, LSHV_VERSION, dataset.dim, dataset.n))
        fh.write(payload)


def read_vectors(path) -> Dataset:
    """Read an LSHV file; FormatError explains malformed input."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(
            f"file is {len(raw)} bytes, shorter than the {_HEADER.size}-byte header",
            len(raw),
        )
    magic, version, dim, n = _HEADER.unpack_from(raw, 0)
    if magic != LSHV_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {LSHV_MAGIC!r}", 0)
    if version != LSHV_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if dim < 1:
        raise FormatError("dim must be >= 1", 8)
    expected = _HEADER.size + n * dim * 4
    if len(raw) != expected:
        raise FormatError(
            f"expected {expected} bytes for n={n} dim={dim}, found {len(raw)}",
            min(len(raw), expected),
        )
    coords = np.frombuffer(raw, dtype="<f4", count=n * dim, offset=_HEADER.size)
    points = coords.reshape(n, dim)
    return Dataset(points=points, provenance=f"lshv:{path.name}")


def _dataset_digest(ds: Dataset) -> bytes:
    h = hashlib.sha256()
    h.update(_HEADER.pack(LSHV_MAGIC, LSHV_VERSION, ds.dim, ds.n))
    h.update(ds.points.astype("<f4").tobytes(order="C"))
    return h.digest()


def ground_truth_cache_key(data: Dataset, queries: Dataset, rho: float) -> str:
    """Stable hex key for one (data, queries, radius) triple."""
    h = hashlib.sha256()
    h.update(b"gtc-v1")
    h.update(_dataset_digest(data))
    h.update(_dataset_digest(queries))
    h.update(struct.pack("<d", rho))
    return h.hexdigest()


def write_ground_truth(path, gt: GroundTruth) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(GT_MAGIC)
        fh.write(struct.pack("<IdQ", GT_VERSION, gt.radius, len(gt.neighbors)))
        for qid in sorted(gt.neighbors):
            found = gt.neighbors[qid]
            fh.write(struct.pack("<QI", qid, len(found)))
            for pid, dist in found:
                fh.write(struct.pack("<Qd", pid, dist))


def read_ground_truth(path) -> GroundTruth:
    raw = Path(path).read_bytes()
    if len(raw) < 24:
        raise FormatError("ground-truth file shorter than its header", len(raw))
    if raw[:4] != GT_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {GT_MAGIC!r}", 0)
    version, radius, n_q = struct.unpack_from("<IdQ", raw, 4)
    if version != GT_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    pos = 24
    neighbors: dict[int, list[tuple[int, float]]] = {}
    for _ in range(n_q):
        if pos + 12 > len(raw):
            raise FormatError("truncated query entry", pos)
        qid, m = struct.unpack_from("<QI", raw, pos)
        pos += 12
        need = m * 16
        if pos + need > len(raw):
            raise FormatError(f"truncated neighbor list for query {qid}", pos)
        found = []
        for _ in range(m):
            pid, dist = struct.unpack_from("<Qd", raw, pos)
            pos += 16
            found.append((int(pid), float(dist)))
        neighbors[int(qid)] = found
    if pos != len(raw):
        raise FormatError(f"{len(raw) - pos} trailing bytes", pos)
    return GroundTruth(radius=radius, neighbors=neighbors)


def load_or_compute_ground_truth(
    data: Dataset, queries: Dataset, rho: float, cache_dir=None
) -> GroundTruth:
    """Exact neighbors within rho, cached on disk when cache_dir is given.

    Cache entries are keyed by the content of both datasets and the radius;
    an ``index.json`` sidecar lists what the directory holds.
    """
    if cache_dir is None:
        return ground_truth(data, queries, rho)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = ground_truth_cache_key(data, queries, rho)
    entry = cache_dir / f"{key}.gtc"
    if entry.exists():
        return read_ground_truth(entry)
    gt = ground_truth(data, queries, rho)
    write_ground_truth(entry, gt)
    index_path = cache_dir / "index.json"
    try:
        index = json.loads(index_path.read_text()) if index_path.exists() else {}
    except json.JSONDecodeError:
        index = {}
    index[key] = {
        "file": entry.name,
        "radius": rho,
        "n_data": data.n,
        "n_queries": queries.n,
        "dim": data.dim,
        "format_version": GT_VERSION,
    }
    index_path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return gt

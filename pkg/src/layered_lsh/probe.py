"""Query offsets and probe-key enumeration.

Instead of maintaining many hash tables, a query probes several perturbed
copies of itself in a single table: offsets drawn uniformly on the sphere
of radius r around the query land, with useful probability, in the buckets
its near neighbors occupy.

Offsets for a query are a pure function of (seed, query_id), so any party
holding the seed can regenerate them; query messages never carry offsets.
Offsets are drawn as one (L, dim) block from the query's substream, which
gives a prefix property: the first L' rows of an L-offset draw equal the
L'-offset draw.  Growing L therefore only ever adds probes, and recall is
exactly nondecreasing in L under a fixed seed.

``build_probe_plan`` is the single code path that turns a query into its
distinct probe buckets and outer keys.  The mapper and the reducer both
call it, so the two sides always agree bit for bit on routing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BucketId, InnerHashFamily, LshParams, MachineKey, OuterHash
from .errors import DimensionError, ParameterError
from .rng import STREAM_OFFSETS, substream


@dataclass(frozen=True)
class OffsetSet:
    """Probe offsets for one query.

    Fields:
        query_id: the query these offsets belong to.
        offsets: (L, dim) float64, every row of euclidean norm ``radius``.
        radius: sphere radius the offsets were scaled to.
    """

    query_id: int
    offsets: np.ndarray
    radius: float

    def __post_init__(self):
        arr = np.array(self.offsets, dtype=np.float64)
        arr.setflags(write=False)
        if arr.ndim != 2:
            raise DimensionError(f"offsets must be 2-d, got shape {arr.shape}")
        object.__setattr__(self, "offsets", arr)

    def __len__(self) -> int:
        return self.offsets.shape[0]


def default_offset_count(n: int, c: float) -> int:
    """Suggested probe count: min(ceil(n^(2/c)), 1000).

    The theory wants about n^(2/c) probes; the cap keeps desk-scale runs
    tractable and is configurable by just passing an explicit count.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not c > 1:
        raise ParameterError(f"c must be > 1, got {c}")
    return min(math.ceil(n ** (2.0 / c)), 1000)


def sample_offsets(query_id: int, params: LshParams, seed: int) -> OffsetSet:
    """Draw params.n_offsets uniform sphere-surface offsets of norm r.

    Gaussian direction normalized to the radius; the substream is
    (STREAM_OFFSETS, query_id), so reducers can regenerate the exact set.
    L = 0 yields an empty set, which is only useful when the query itself
    is probed.
    """
    if query_id < 0:
        raise ParameterError(f"query_id must be non-negative, got {query_id}")
    count = params.n_offsets
    if count == 0:
        return OffsetSet(
            query_id=query_id,
            offsets=np.empty((0, params.dim)),
            radius=params.r,
        )
    g = substream(seed, STREAM_OFFSETS, query_id)
    raw = g.standard_normal((count, params.dim))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    return OffsetSet(
        query_id=query_id, offsets=raw * (params.r / norms), radius=params.r
    )


@dataclass(frozen=True)
class ProbePlan:
    """Distinct probe buckets of one query, in first-occurrence order.

    Fields:
        buckets: distinct bucket ids over {query (if probed)} + offsets.
        outer_keys: outer key per bucket, aligned with ``buckets``; None
            when the plan was built without an outer hash.
    """

    buckets: tuple[BucketId, ...]
    outer_keys: tuple[MachineKey, ...] | None

    def key_count(self) -> int:
        """Distinct routing keys: buckets (inner routing) or outer keys."""
        if self.outer_keys is None:
            return len(self.buckets)
        return len(set(self.outer_keys))

    def buckets_for_key(self, key: MachineKey) -> list[BucketId]:
        """Buckets this plan routes to ``key``, in plan order."""
        if self.outer_keys is None:
            raise ParameterError("plan was built without an outer hash")
        return [b for b, x in zip(self.buckets, self.outer_keys) if x == key]


def build_probe_plan(
    point,
    offsets: OffsetSet,
    inner: InnerHashFamily,
    outer: OuterHash | None = None,
    probe_self: bool = True,
) -> ProbePlan:
    """Hash the query and its offsets, deduplicate buckets, key them.

    The query point itself is probed first when ``probe_self`` is set, then
    offsets in draw order; duplicate buckets keep their first occurrence.
    Both the map side and the reduce side call this with identical inputs,
    which is what makes regenerated routing decisions exact.
    """
    point = np.asarray(point, dtype=np.float64)
    if point.shape != (inner.dim,):
        raise DimensionError(
            f"query point must have shape ({inner.dim},), got {point.shape}"
        )
    if offsets.offsets.shape[0] and offsets.offsets.shape[1] != inner.dim:
        raise DimensionError(
            f"offsets have dim {offsets.offsets.shape[1]}, family expects {inner.dim}"
        )
    if probe_self:
        probes = np.vstack([point[None, :], point[None, :] + offsets.offsets])
    else:
        if len(offsets) == 0:
            raise ParameterError(
                "no probes: zero offsets with the query-self probe disabled"
            )
        probes = point[None, :] + offsets.offsets
    coords = inner.hash_batch(probes)

    seen: set[bytes] = set()
    distinct_rows: list[int] = []
    row_view = coords.astype("<i8", copy=False)
    for i in range(row_view.shape[0]):
        b = row_view[i].tobytes()
        if b not in seen:
            seen.add(b)
            distinct_rows.append(i)
    distinct = coords[distinct_rows]

    buckets = tuple(tuple(row) for row in distinct.tolist())
    if outer is None:
        return ProbePlan(buckets=buckets, outer_keys=None)
    keys = tuple(int(x) for x in outer.hash_batch(distinct))
    return ProbePlan(buckets=buckets, outer_keys=keys)


def probe_buckets(
    point,
    offsets: OffsetSet,
    inner: InnerHashFamily,
    probe_self: bool = True,
) -> set[BucketId]:
    """Set of distinct inner buckets the query probes."""
    plan = build_probe_plan(point, offsets, inner, outer=None, probe_self=probe_self)
    return set(plan.buckets)


def probe_outer_keys(
    point,
    offsets: OffsetSet,
    inner: InnerHashFamily,
    outer: OuterHash,
    probe_self: bool = True,
) -> set[MachineKey]:
    """Set of distinct outer keys; its size is the query's fan-out f_q."""
    plan = build_probe_plan(point, offsets, inner, outer=outer, probe_self=probe_self)
    assert plan.outer_keys is not None
    return set(plan.outer_keys)

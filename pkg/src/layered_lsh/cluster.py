"""Simulated key-value cluster with exact shuffle and load accounting.

The simulator runs one synchronous map -> shuffle -> reduce round. Nothing
actually crosses a network; instead every message that would be shuffled is
counted (and sized per the documented serialization), every reduce group is
attributed to a machine, and per-machine work is tallied. Reduce groups are
keyed by the scheme's routing key; machines are labels that one or more
groups land on.

Machine mapping modes:
    identity  an integer key is its own machine id; composite bucket keys
              are collapsed through the stable hash first.  Machines are
              materialized lazily, so ids need not be dense.
    modulo    stable_hash(key) mod num_machines.  The stable hash is
              keyed BLAKE2b (8-byte digest) over the canonical key bytes,
              salted by the cluster seed; it is platform independent and
              documented, unlike Python's builtin hash.

Worker threads only parallelize reduce groups. Group membership, per-group
arithmetic, and the final canonical sort are all independent of the thread
layout, so results, ledgers, and loads are byte-identical for any worker
count.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    LshParams,
    sample_inner_family,
    sample_outer_hash,
)
from .errors import IntegrityError, ParameterError
from .probe import build_probe_plan, sample_offsets
from .schemes import (
    DataRecord,
    MatchResult,
    QueryRecord,
    Scheme,
    _reduce_layered_stats,
    data_message_size,
    key_bytes,
    query_message_size,
    reduce_simple,
)

MAPPING_MODES = ("identity", "modulo")


@dataclass(frozen=True)
class ClusterConfig:
    """Machine count, key-to-machine mapping mode, and mapping salt."""

    num_machines: int = 16
    mapping_mode: str = "modulo"
    seed: int = 0

    def __post_init__(self):
        if self.num_machines < 1:
            raise ParameterError(
                f"num_machines must be >= 1, got {self.num_machines}"
            )
        if self.mapping_mode not in MAPPING_MODES:
            raise ParameterError(
                f"mapping_mode must be one of {MAPPING_MODES}, got {self.mapping_mode!r}"
            )
        if self.seed < 0:
            raise ParameterError(f"seed must be non-negative, got {self.seed}")


@dataclass
class ShuffleLedger:
    """Exact counts of what the shuffle would move."""

    data_messages: int = 0
    query_messages: int = 0
    data_bytes: int = 0
    query_bytes: int = 0
    # query_id -> number of distinct routing keys the query emitted (the
    # query's fan-out; for the layered scheme this is f_q).
    per_query_keys: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class MachineLoad:
    machine_id: int
    num_points: int = 0
    num_queries: int = 0
    num_distance_evals: int = 0


def stable_key_hash(kb: bytes, salt: int = 0) -> int:
    """Keyed BLAKE2b of canonical key bytes, as an unsigned 64-bit int."""
    digest = hashlib.blake2b(
        kb, digest_size=8, key=salt.to_bytes(8, "little")
    ).digest()
    return int.from_bytes(digest, "little")


def assign_machine(key, config: ClusterConfig) -> int:
    """Machine id for a routing key under the config's mapping mode."""
    if config.mapping_mode == "identity":
        if isinstance(key, (int, np.integer)):
            return int(key)
        return stable_key_hash(key_bytes(key), config.seed)
    return stable_key_hash(key_bytes(key), config.seed) % config.num_machines


class _LoadTally:
    __slots__ = ("points", "queries", "evals")

    def __init__(self):
        self.points = 0
        self.queries = 0
        self.evals = 0


def run_job(
    data: list[DataRecord],
    queries: list[QueryRecord],
    scheme: Scheme | str,
    params: LshParams,
    cluster: ClusterConfig,
    seed: int,
    probe_self: bool = True,
    workers: int = 1,
) -> tuple[list[MatchResult], ShuffleLedger, list[MachineLoad]]:
    """One complete map -> shuffle -> reduce round.

    Returns (results, ledger, loads): results are all (query, point) pairs
    within c*r among the probed buckets, sorted by (query_id, point_id);
    the ledger counts shuffled messages and bytes; loads list per-machine
    work for every machine that received anything.

    The same seed always produces the same three outputs, for any worker
    count, and the simple and layered schemes produce identical results
    because they search identical probe buckets.
    """
    scheme = Scheme(scheme)
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    if params.n_offsets == 0 and not probe_self:
        raise ParameterError(
            "n_offsets = 0 requires the query-self probe to stay enabled"
        )
    if len({rec.point_id for rec in data}) != len(data):
        raise ParameterError("duplicate point_id in data")
    if len({rec.query_id for rec in queries}) != len(queries):
        raise ParameterError("duplicate query_id in queries")

    inner = sample_inner_family(params, seed)
    outer = sample_outer_hash(params, seed)
    layered = scheme is Scheme.LAYERED

    ledger = ShuffleLedger()
    tallies: dict[int, _LoadTally] = {}

    def tally(machine: int) -> _LoadTally:
        t = tallies.get(machine)
        if t is None:
            t = _LoadTally()
            tallies[machine] = t
        return t

    # Data side: one message per point, keyed per scheme. Hashing is done
    # in one batch; the per-record map ops produce the same keys.
    n = len(data)
    data_groups: dict[object, list[int]] = {}
    if n:
        try:
            pts = np.stack([rec.point for rec in data]).astype(np.float64)
        except ValueError as exc:
            raise ParameterError(f"data points are not uniformly shaped: {exc}")
        if pts.ndim != 2 or pts.shape[1] != params.dim:
            raise ParameterError(
                f"data points have shape {pts.shape[1:]}, params say ({params.dim},)"
            )
        buckets = inner.hash_batch(pts)
        canon = buckets.astype("<i8")
        if layered:
            outer_keys = outer.hash_batch(buckets)
            for i in range(n):
                data_groups.setdefault(int(outer_keys[i]), []).append(i)
        else:
            for i in range(n):
                data_groups.setdefault(canon[i].tobytes(), []).append(i)
    ledger.data_messages = n
    ledger.data_bytes = n * data_message_size(scheme, params.dim, params.k)

    group_machine: dict[object, int] = {}
    for gid, members in data_groups.items():
        key = gid if layered else tuple(np.frombuffer(gid, dtype="<i8").tolist())
        machine = assign_machine(key, cluster)
        group_machine[gid] = machine
        tally(machine).points += len(members)

    # Query side: route by the probe plan; reducers will regenerate it.
    query_groups: dict[object, list[QueryRecord]] = {}
    qmsg_size = query_message_size(scheme, params.dim, params.k)
    for q in queries:
        if q.point.shape[-1] != params.dim:
            raise ParameterError(
                f"query {q.query_id} has dim {q.point.shape[-1]}, params say {params.dim}"
            )
        offsets = sample_offsets(q.query_id, params, seed)
        plan = build_probe_plan(
            q.point, offsets, inner, outer if layered else None, probe_self=probe_self
        )
        if layered:
            assert plan.outer_keys is not None
            keys: list[object] = []
            seen: set[int] = set()
            for x in plan.outer_keys:
                if x not in seen:
                    seen.add(x)
                    keys.append(x)
        else:
            keys = [key_bytes(b) for b in plan.buckets]
        ledger.per_query_keys[q.query_id] = len(keys)
        ledger.query_messages += len(keys)
        ledger.query_bytes += len(keys) * qmsg_size
        for gid in keys:
            query_groups.setdefault(gid, []).append(q)
            machine = group_machine.get(gid)
            if machine is None:
                key = gid if layered else tuple(np.frombuffer(gid, dtype="<i8").tolist())
                machine = assign_machine(key, cluster)
                group_machine[gid] = machine
            tally(machine).queries += 1

    # Reduce: only groups holding both data and queries can emit matches.
    # Group ids are homogeneous per scheme (ints or bytes), so sorting them
    # fixes the merge order independent of dict insertion or threads.
    active = sorted(gid for gid in query_groups if gid in data_groups)

    def reduce_group(gid) -> tuple[list[MatchResult], int]:
        members = data_groups[gid]
        qlist = query_groups[gid]
        if layered:
            payload = [
                (tuple(canon[i].tolist()), data[i]) for i in members
            ]
            return _reduce_layered_stats(
                gid, payload, qlist, inner, outer, params, seed, probe_self
            )
        bucket = tuple(np.frombuffer(gid, dtype="<i8").tolist())
        recs = [data[i] for i in members]
        matches = reduce_simple(bucket, recs, qlist, params)
        return matches, len(recs) * len(qlist)

    if workers == 1 or len(active) <= 1:
        outcomes = [reduce_group(gid) for gid in active]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(reduce_group, active))

    results: list[MatchResult] = []
    for gid, (matches, evals) in zip(active, outcomes):
        tally(group_machine[gid]).evals += evals
        results.extend(matches)
    results.sort(key=lambda m: (m.query_id, m.point_id))
    for a, b in zip(results, results[1:]):
        if a.query_id == b.query_id and a.point_id == b.point_id:
            raise IntegrityError(
                f"pair (query {a.query_id}, point {a.point_id}) was emitted twice;"
                " a bucket was searched on more than one machine"
            )

    loads = [
        MachineLoad(
            machine_id=m,
            num_points=t.points,
            num_queries=t.queries,
            num_distance_evals=t.evals,
        )
        for m, t in sorted(tallies.items())
    ]
    return results, ledger, loads


def load_summary(loads: list[MachineLoad]) -> tuple[float, int]:
    """(average, max) of num_points over machines that received anything.

    Raises:
        ParameterError: if no machine received a point or a query.
    """
    busy = [ld for ld in loads if ld.num_points >= 1 or ld.num_queries >= 1]
    if not busy:
        raise ParameterError("no machine received any point or query")
    counts = [ld.num_points for ld in busy]
    return sum(counts) / len(busy), max(counts)

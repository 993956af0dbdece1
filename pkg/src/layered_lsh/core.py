"""Gaussian bucket hashing for l2 similarity, in two layers.

The inner layer concatenates ``k`` one-dimensional bucket hashes

    h_i(v) = floor((a_i . v + b_i) / w)

where each row ``a_i`` has independent standard normal entries and each
shift ``b_i`` is uniform on the half-open interval [0, w).  A point maps to
a k-vector of bucket indices.  Because Gaussian projections are 2-stable,
``a_i . (u - v)`` is normal with standard deviation ``||u - v||``, so bucket
collision probabilities depend on distance only.

The outer layer applies one more bucket hash of width ``outer_w`` to the
inner bucket vector (read as a vector of reals), collapsing nearby inner
buckets to a single integer.  Routing data by that integer keeps the probe
set of a query on few machines while the inner vector still identifies the
exact bucket to search.

The closed-form collision probability of a single bucket hash at bin width
``width`` for two points at distance ``lam`` is

    collision_probability(width / (sqrt(2) * lam))

with ``collision_probability(z) = erf(z) - (1 - exp(-z^2)) / (sqrt(pi) z)``.

Floors round toward minus infinity everywhere (floor(-0.2) == -1); this is
what makes bucket ids translation-consistent, and several tests pin it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .rng import STREAM_INNER_ROW, STREAM_OUTER, substream

# Bucket ids are k-tuples of Python ints; machine keys are single ints.
BucketId = tuple[int, ...]
MachineKey = int

# Concentration slack used by distance_threshold. With slack eps, the norm of
# an m-dimensional standard normal vector lies within (1 +- eps) sqrt(m)
# except with probability exponentially small in eps^2 m.
DEFAULT_EPSILON = 0.1


def _as_vector(v, dim: int, what: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise DimensionError(
            f"{what} must be a vector of length {dim}, got shape {arr.shape}"
        )
    return arr


def _as_matrix(pts, dim: int, what: str) -> np.ndarray:
    arr = np.asarray(pts, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionError(
            f"{what} must have shape (n, {dim}), got {arr.shape}"
        )
    return arr


def _frozen_array(value, dtype=np.float64) -> np.ndarray:
    arr = np.array(value, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LshParams:
    """Immutable parameter bundle for one hashing configuration.

    Fields:
        dim: point dimensionality d, >= 1.
        k: number of concatenated inner hashes, >= 1.
        w: inner bucket width, > 0.
        outer_w: outer bucket width applied to inner bucket vectors, > 0.
        r: target near radius, > 0.
        c: approximation factor, > 1 (far radius is c * r).
        n_offsets: probe offsets drawn per query, >= 0.  Zero is legal only
            when the query itself is probed; job-level validation enforces
            that pairing.
        n_points: dataset size this configuration is sized for, >= 1.
    """

    dim: int
    k: int
    w: float
    outer_w: float
    r: float
    c: float
    n_offsets: int
    n_points: int

    def __post_init__(self):
        checks = [
            (self.dim >= 1, "dim must be >= 1"),
            (self.k >= 1, "k must be >= 1"),
            (self.w > 0, "w must be > 0"),
            (self.outer_w > 0, "outer_w must be > 0"),
            (self.r > 0, "r must be > 0"),
            (self.c > 1, "c must be > 1"),
            (self.n_offsets >= 0, "n_offsets must be >= 0"),
            (self.n_points >= 1, "n_points must be >= 1"),
        ]
        bad = [msg for ok, msg in checks if not ok]
        if bad:
            raise ParameterError("; ".join(bad))


@dataclass(frozen=True)
class InnerHashFamily:
    """k concatenated Gaussian bucket hashes.

    Fully determined by (seed, dim, k, width) when built through
    ``sample_inner_family``; constructing one directly with explicit rows
    and shifts is supported for tests and tools.

    Fields:
        rows: (k, dim) float64 projection rows.
        shifts: (k,) float64, each in [0, width).
        width: bucket width w.
        seed: seed recorded at sampling time (0 for hand-built families).
    """

    rows: np.ndarray
    shifts: np.ndarray
    width: float
    seed: int = 0

    def __post_init__(self):
        rows = _frozen_array(self.rows)
        shifts = _frozen_array(self.shifts)
        if rows.ndim != 2:
            raise DimensionError(f"rows must be 2-d, got shape {rows.shape}")
        if shifts.shape != (rows.shape[0],):
            raise DimensionError(
                f"shifts must have shape ({rows.shape[0]},), got {shifts.shape}"
            )
        if not self.width > 0:
            raise ParameterError("width must be > 0")
        if shifts.size and (shifts.min() < 0 or shifts.max() >= self.width):
            raise ParameterError("every shift must lie in [0, width)")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "shifts", shifts)

    @property
    def k(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def project(self, v) -> np.ndarray:
        """Unfloored bucket coordinates (rows @ v + shifts) / width.

        The floored hash and this projection differ per coordinate by the
        fractional remainder in [0, 1), so the euclidean distance between
        two projections and between the corresponding bucket vectors can
        differ by at most sqrt(k).
        """
        v = _as_vector(v, self.dim, "point")
        return (self.rows @ v + self.shifts) / self.width

    def hash(self, v) -> BucketId:
        """Bucket id of one point: floor of the projection, per coordinate."""
        coords = np.floor(self.project(v)).astype(np.int64)
        return tuple(coords.tolist())

    def project_batch(self, pts) -> np.ndarray:
        """Unfloored coordinates for an (n, dim) batch; returns (n, k)."""
        pts = _as_matrix(pts, self.dim, "points")
        return (pts @ self.rows.T + self.shifts) / self.width

    def hash_batch(self, pts) -> np.ndarray:
        """Bucket coordinates for an (n, dim) batch; returns (n, k) int64."""
        return np.floor(self.project_batch(pts)).astype(np.int64)


@dataclass(frozen=True)
class OuterHash:
    """Single Gaussian bucket hash over inner bucket vectors.

    Fully determined by (seed, k, width) when built through
    ``sample_outer_hash``.

    Fields:
        coeffs: (k,) float64 standard normal coefficients.
        shift: uniform on [0, width).
        width: outer bucket width.
        seed: seed recorded at sampling time (0 for hand-built hashes).
    """

    coeffs: np.ndarray
    shift: float
    width: float
    seed: int = 0

    def __post_init__(self):
        coeffs = _frozen_array(self.coeffs)
        if coeffs.ndim != 1:
            raise DimensionError(f"coeffs must be 1-d, got shape {coeffs.shape}")
        if not self.width > 0:
            raise ParameterError("width must be > 0")
        if not 0 <= self.shift < self.width:
            raise ParameterError("shift must lie in [0, width)")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def k(self) -> int:
        return self.coeffs.shape[0]

    def hash(self, u) -> MachineKey:
        """floor((coeffs . u + shift) / width) for one k-vector.

        Accepts bucket ids (integer tuples) or real vectors; integer
        coordinates convert to float64 exactly as long as their magnitude
        stays below 2**53, which holds for any bucket a finite point can
        land in at sane widths.
        """
        u = _as_vector(u, self.k, "bucket vector")
        return int(np.floor((self.coeffs @ u + self.shift) / self.width))

    def hash_batch(self, buckets) -> np.ndarray:
        """Keys for an (n, k) batch of bucket vectors; returns (n,) int64."""
        arr = np.asarray(buckets)
        if arr.ndim != 2 or arr.shape[1] != self.k:
            raise DimensionError(
                f"bucket batch must have shape (n, {self.k}), got {arr.shape}"
            )
        arr = arr.astype(np.float64)
        proj = (arr @ self.coeffs + self.shift) / self.width
        return np.floor(proj).astype(np.int64)


def sample_inner_family(params: LshParams, seed: int) -> InnerHashFamily:
    """Draw the inner family for (seed, dim, k, w); deterministic.

    Row i consumes its own substream (STREAM_INNER_ROW, i): dim standard
    normal entries followed by one uniform shift in [0, w).
    """
    rows = np.empty((params.k, params.dim))
    shifts = np.empty(params.k)
    for i in range(params.k):
        g = substream(seed, STREAM_INNER_ROW, i)
        rows[i] = g.standard_normal(params.dim)
        shifts[i] = g.uniform(0.0, params.w)
    return InnerHashFamily(rows=rows, shifts=shifts, width=params.w, seed=seed)


def sample_outer_hash(params: LshParams, seed: int) -> OuterHash:
    """Draw the outer hash for (seed, k, outer_w); deterministic."""
    g = substream(seed, STREAM_OUTER)
    return OuterHash(
        coeffs=g.standard_normal(params.k),
        shift=g.uniform(0.0, params.outer_w),
        width=params.outer_w,
        seed=seed,
    )


def composite_key(inner: InnerHashFamily, outer: OuterHash, v) -> MachineKey:
    """Outer key of a point: outer.hash(inner.hash(v))."""
    if inner.k != outer.k:
        raise DimensionError(
            f"inner family emits {inner.k} coordinates but outer hash expects {outer.k}"
        )
    return outer.hash(inner.hash(v))


def collision_probability(z: float) -> float:
    """Collision probability of one Gaussian bucket hash, parameterized.

    For two points at distance lam and bucket width ``width``, the collision
    probability is this function at z = width / (sqrt(2) * lam):

        P(z) = erf(z) - (1 - exp(-z^2)) / (sqrt(pi) * z)

    P is strictly increasing from 0 to 1 on z > 0 (wider bins or closer
    points collide more).

    Raises:
        ParameterError: if z <= 0.
    """
    if not z > 0:
        raise ParameterError(f"z must be > 0, got {z}")
    return math.erf(z) - (1.0 - math.exp(-z * z)) / (math.sqrt(math.pi) * z)


def inverse_collision_probability(p: float) -> float:
    """The z > 0 with collision_probability(z) == p, by bisection.

    Raises:
        ParameterError: if p is not strictly between 0 and 1.
    """
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie strictly between 0 and 1, got {p}")
    lo, hi = 1e-9, 1.0
    while collision_probability(hi) < p:
        hi *= 2.0
        if hi > 1e12:
            raise ParameterError(f"no finite z reaches collision probability {p}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if collision_probability(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def suggest_concat_length(n: int, p2: float) -> int:
    """Concatenation length k = ceil(ln n / ln(1/p2)).

    Sized so that a far pair (single-hash collision probability p2) collides
    on all k coordinates with probability at most 1/n.

    Raises:
        ParameterError: if n < 2 or p2 is outside (0, 1).
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if not 0.0 < p2 < 1.0:
        raise ParameterError(f"p2 must lie strictly between 0 and 1, got {p2}")
    return math.ceil(math.log(n) / math.log(1.0 / p2))


def nominal_collision_probs(params: LshParams) -> tuple[float, float]:
    """(p1, p2): single-hash collision probabilities at distances r and c*r."""
    p1 = collision_probability(params.w / (math.sqrt(2.0) * params.r))
    p2 = collision_probability(params.w / (math.sqrt(2.0) * params.c * params.r))
    return p1, p2


def distance_threshold(
    params: LshParams, xi: float, epsilon: float = DEFAULT_EPSILON
) -> float:
    """Distance beyond which two points share an outer key w.p. about <= xi.

    With z_xi the inverse of collision_probability at xi,

        threshold = (1 / (1 - epsilon)) * (1 + outer_w / (z_xi * sqrt(2k))) * w

    Two points at distance >= threshold have inner projections at least
    (1 - epsilon) sqrt(k) threshold / w apart (up to the concentration slack),
    bucket vectors at least sqrt(k) closer than that, and the outer hash then
    collides with probability at most about xi.

    Raises:
        ParameterError: if xi is outside (0, 1) or epsilon outside [0, 1).
    """
    if not 0.0 < xi < 1.0:
        raise ParameterError(f"xi must lie strictly between 0 and 1, got {xi}")
    if not 0.0 <= epsilon < 1.0:
        raise ParameterError(f"epsilon must lie in [0, 1), got {epsilon}")
    z = inverse_collision_probability(xi)
    spread = params.outer_w / (z * math.sqrt(2.0 * params.k))
    return (1.0 + spread) * params.w / (1.0 - epsilon)

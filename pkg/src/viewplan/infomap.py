"""
Sparse voxel information map.

Feature points are binned into cubic voxels.  Each occupied voxel caches the
mean/std of feature counts over its 3x3x3 neighbourhood and the resulting
distribution score ``mu * (1 + exp(-sigma))``; the observation-geometry term
(trace of the bearing Fisher information) is evaluated per query since it
depends on the camera position.
"""

from dataclasses import dataclass
import itertools
import logging
import math

import numpy as np
from scipy.spatial import cKDTree

from .errors import NonFiniteInput, RangeTooSmall
from .geometry import skew

logger = logging.getLogger(__name__)

R_MIN = 0.05
DEFAULT_VOXEL_SIZE = 0.4
NEIGHBOR_OFFSETS = tuple(itertools.product((-1, 0, 1), repeat=3))


@dataclass(frozen=True)
class NoiseModel:
    """Bearing-noise covariance.

    ``isotropic``: ``Q = sigma2 * I``.
    ``depth_dependent``: ``Q = diag(pixel_var, pixel_var, dz**2)`` with
    ``dz = depth_coeff * depth**2`` in metres.  The default coefficient is the
    1.425e-6 mm^-1 structured-light model rescaled to metres (1.425e-3 m^-1).
    """

    mode: str = "isotropic"
    sigma2: float = 1.0
    pixel_var: float = 0.25
    depth_coeff: float = 1.425e-3

    def __post_init__(self):
        if self.mode not in ("isotropic", "depth_dependent"):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        if self.sigma2 <= 0 or self.pixel_var <= 0 or self.depth_coeff <= 0:
            raise ValueError("noise variances must be positive")

    @classmethod
    def depth_dependent(cls, pixel_var=0.25, depth_coeff=1.425e-3):
        return cls(mode="depth_dependent", pixel_var=pixel_var, depth_coeff=depth_coeff)

    def covariance(self, depth=1.0):
        if self.mode == "isotropic":
            return self.sigma2 * np.eye(3)
        dz = self.depth_coeff * depth * depth
        return np.diag([self.pixel_var, self.pixel_var, dz * dz])

    def precision_diag(self, depths):
        """Diagonal of ``Q^-1`` for each depth, shape (N, 3)."""
        depths = np.asarray(depths, dtype=float)
        if self.mode == "isotropic":
            return np.full(depths.shape + (3,), 1.0 / self.sigma2)
        dz = self.depth_coeff * depths ** 2
        out = np.empty(depths.shape + (3,))
        out[..., 0] = out[..., 1] = 1.0 / self.pixel_var
        out[..., 2] = 1.0 / (dz * dz)
        return out


def fisher_matrix(camera_position, voxel_center, noise=NoiseModel()):
    """6x6 bearing FIM ``J^T Q^-1 J`` of a voxel seen from ``camera_position``.

    Evaluated at identity camera orientation; the trace does not depend on it.
    """
    pc = np.asarray(voxel_center, dtype=float) - np.asarray(camera_position, dtype=float)
    r = float(np.linalg.norm(pc))
    if r < R_MIN:
        raise RangeTooSmall(f"range {r:.3g} m below {R_MIN} m")
    u = pc / r
    proj = (np.eye(3) - np.outer(u, u)) / r
    jac = proj @ np.hstack([-np.eye(3), skew(pc)])
    info = jac.T @ np.linalg.solve(noise.covariance(r), jac)
    return 0.5 * (info + info.T)


def fisher_trace(camera_position, voxel_center, noise=NoiseModel()):
    return float(np.trace(fisher_matrix(camera_position, voxel_center, noise)))


def fisher_trace_many(camera_position, centers, noise=NoiseModel()):
    """Vectorised FIM trace for many voxel centres.

    Uses ``J J^T = (1 + 1/r^2) (I - u u^T)``, hence
    ``trace(J^T W J) = (1 + 1/r^2) (trace W - u^T W u)``.
    """
    d = np.asarray(centers, dtype=float).reshape(-1, 3) - np.asarray(camera_position, dtype=float)
    r2 = np.einsum("ij,ij->i", d, d)
    r = np.sqrt(r2)
    if r.size and r.min() < R_MIN:
        raise RangeTooSmall(f"range {r.min():.3g} m below {R_MIN} m")
    w = noise.precision_diag(r)
    u2 = d * d / r2[:, None]
    return (1.0 + 1.0 / r2) * (w.sum(axis=1) - np.einsum("ij,ij->i", w, u2))


def stats_from_counts(counts):
    """Population mean and std of a neighbourhood's feature counts."""
    c = np.asarray(counts, dtype=float)
    mu = c.mean()
    return float(mu), float(math.sqrt(((c - mu) ** 2).mean()))


def distribution_score(mu, sigma):
    return mu * (1.0 + math.exp(-sigma))


@dataclass(frozen=True)
class Voxel:
    key: tuple
    center: np.ndarray
    feature_count: int
    cached_mu: float
    cached_sigma: float
    cached_dist_info: float
    stats_dirty: bool


@dataclass(frozen=True)
class LayerRow:
    key: tuple
    center: np.ndarray
    fisher: float
    dist: float
    weighted: float


class InfoMap:
    """Sparse voxel grid of feature counts with lazily cached distribution statistics."""

    def __init__(self, voxel_size=DEFAULT_VOXEL_SIZE):
        if not voxel_size > 0:
            raise ValueError("voxel_size must be positive")
        self.voxel_size = float(voxel_size)
        self.counts = {}
        self._stats = {}
        self._dirty = set()
        self.epoch = 0
        self._snapshot = None

    def __len__(self):
        return len(self.counts)

    def key_of(self, point):
        p = np.asarray(point, dtype=float)
        return tuple(int(k) for k in np.floor(p / self.voxel_size))

    def center_of(self, key):
        return (np.asarray(key, dtype=float) + 0.5) * self.voxel_size

    def insert_points(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise NonFiniteInput("feature points must be finite")
        if len(pts) == 0:
            return self
        keys, added = np.unique(np.floor(pts / self.voxel_size).astype(np.int64), axis=0, return_counts=True)
        touched = set()
        for k, n in zip(map(tuple, keys.tolist()), added.tolist()):
            self.counts[k] = self.counts.get(k, 0) + n
            touched.add(k)
        for k in touched:
            for off in NEIGHBOR_OFFSETS:
                nk = (k[0] + off[0], k[1] + off[1], k[2] + off[2])
                if nk in self.counts:
                    self._dirty.add(nk)
        self.epoch += 1
        return self

    def _neighborhood_counts(self, key):
        get = self.counts.get
        return [get((key[0] + o[0], key[1] + o[1], key[2] + o[2]), 0) for o in NEIGHBOR_OFFSETS]

    def _compute_stats(self, key):
        mu, sigma = stats_from_counts(self._neighborhood_counts(key))
        return mu, sigma, distribution_score(mu, sigma)

    def refresh(self):
        """Recompute every dirty cache entry."""
        for k in self._dirty:
            self._stats[k] = self._compute_stats(k)
        self._dirty.clear()

    def _stats_for(self, key):
        if key not in self.counts:
            return self._compute_stats(key)
        if key in self._dirty or key not in self._stats:
            self._stats[key] = self._compute_stats(key)
            self._dirty.discard(key)
        return self._stats[key]

    def distribution_stats(self, key):
        mu, sigma, _ = self._stats_for(tuple(key))
        return mu, sigma

    def distribution_info(self, key):
        return self._stats_for(tuple(key))[2]

    def voxel(self, key):
        key = tuple(key)
        if key not in self.counts:
            raise KeyError(key)
        dirty = key in self._dirty or key not in self._stats
        mu, sigma, dist = self._stats.get(key, (math.nan, math.nan, math.nan))
        return Voxel(key, self.center_of(key), self.counts[key], mu, sigma, dist, dirty)

    def weighted_info(self, camera_position, key, noise=NoiseModel()):
        key = tuple(key)
        if key not in self.counts:
            return 0.0
        dist = self.distribution_info(key)
        if dist == 0.0:
            return 0.0
        return dist * fisher_trace(camera_position, self.center_of(key), noise)

    def neighbor_sum_info(self, camera_position, point, d_n, noise=NoiseModel()):
        if not d_n > 0:
            raise ValueError("d_n must be positive")
        return float(self.snapshot().neighbor_sums(camera_position, np.atleast_2d(point), d_n, noise)[0])

    def dump_layers(self, camera_position, noise=NoiseModel()):
        rows = []
        for key in sorted(self.counts):
            center = self.center_of(key)
            fi = fisher_trace(camera_position, center, noise)
            di = self.distribution_info(key)
            rows.append(LayerRow(key, center, fi, di, fi * di))
        return rows

    def snapshot(self):
        """Immutable array view of the current epoch (cached until the next mutation)."""
        if self._snapshot is None or self._snapshot.epoch != self.epoch:
            self.refresh()
            keys = sorted(self.counts)
            karr = np.array(keys, dtype=np.int64).reshape(-1, 3)
            self._snapshot = MapSnapshot(
                epoch=self.epoch,
                voxel_size=self.voxel_size,
                keys=karr,
                centers=(karr + 0.5) * self.voxel_size,
                counts=np.array([self.counts[k] for k in keys], dtype=np.int64),
                dist_info=np.array([self._stats[k][2] for k in keys], dtype=float),
            )
            # index construction is part of map maintenance, not of query time
            self._snapshot.build_index()
        return self._snapshot


class MapSnapshot:
    """Frozen arrays of one map epoch, with a planar k-d tree for local queries."""

    def __init__(self, epoch, voxel_size, keys, centers, counts, dist_info):
        self.epoch = epoch
        self.voxel_size = voxel_size
        self.keys = keys
        self.centers = centers
        self.counts = counts
        self.dist_info = dist_info
        self._tree = None
        self._tree3 = None

    def __len__(self):
        return len(self.keys)

    def build_index(self):
        return self.tree3

    @property
    def tree(self):
        """Planar (x, y) k-d tree over voxel centres."""
        if self._tree is None and len(self):
            self._tree = cKDTree(self.centers[:, :2])
        return self._tree

    @property
    def tree3(self):
        if self._tree3 is None and len(self):
            self._tree3 = cKDTree(self.centers)
        return self._tree3

    def weighted_info(self, camera_position, idx=None, noise=NoiseModel()):
        idx = slice(None) if idx is None else idx
        return self.dist_info[idx] * fisher_trace_many(camera_position, self.centers[idx], noise)

    def local_indices(self, points, radius):
        """Voxels whose planar distance to any of ``points`` is within ``radius``."""
        if not len(self):
            return np.zeros(0, dtype=np.int64)
        lists = self.tree.query_ball_point(np.atleast_2d(points)[:, :2], radius)
        if isinstance(lists, np.ndarray) and lists.dtype == object:
            lists = lists.tolist()
        flat = [i for sub in lists for i in sub]
        return np.unique(np.asarray(flat, dtype=np.int64))

    def neighbor_sums(self, camera_position, points, d_n, noise=NoiseModel(), use_index=True):
        """Sum of weighted information over voxels within ``d_n`` of each point.

        With ``use_index=False`` every voxel of the map is scanned.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not len(self):
            return np.zeros(len(pts))
        if use_index:
            return self._indexed_sums(camera_position, pts, d_n, noise)
        idx = np.arange(len(self))
        out = np.zeros(len(pts))
        centers = self.centers[idx]
        w = self.weighted_info(camera_position, idx, noise)
        chunk = max(1, 2_000_000 // max(len(idx), 1))
        for s in range(0, len(pts), chunk):
            d = pts[s : s + chunk, None, :] - centers[None, :, :]
            inside = np.einsum("ijk,ijk->ij", d, d) <= d_n * d_n
            out[s : s + chunk] = inside @ w
        return out

    def _indexed_sums(self, camera_position, pts, d_n, noise):
        lists = self.tree3.query_ball_point(pts, d_n)
        lengths = np.fromiter((len(x) for x in lists), dtype=np.int64, count=len(pts))
        out = np.zeros(len(pts))
        if not lengths.sum():
            return out
        flat = np.fromiter((i for x in lists for i in x), dtype=np.int64, count=int(lengths.sum()))
        uniq, inv = np.unique(flat, return_inverse=True)
        vals = self.weighted_info(camera_position, uniq, noise)[inv]
        nonempty = lengths > 0
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])[nonempty]
        out[nonempty] = np.add.reduceat(vals, starts)
        return out

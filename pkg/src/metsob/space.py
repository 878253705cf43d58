"""Discretized metric measure spaces.

A space is a finite point cloud split into an interior part (carrying the
mass weights mu_i) and a boundary part (carrying the Hausdorff weights H_i).
Integrals over a region are weighted sums and averages over a ball are
mass-weighted means over its members.  Balls are open: a point at distance
exactly ``r`` from the center is not a member.

Ball queries go through ``scipy.spatial.cKDTree`` for Euclidean spaces.  The
tree is asked for a slightly inflated radius and the candidates are then
filtered with the strict inequality, so ties at the radius are excluded
exactly as in a brute-force scan.  Spaces given by an explicit distance
matrix use dense row scans instead.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import cdist

__all__ = [
    "Region", "Ball", "ScalarField", "Neighborhoods", "PointCloudSpace",
    "MassExponents", "CodimBounds", "ball_members", "ball_mass",
    "estimate_mass_exponents", "estimate_codim_bounds", "shell_mass",
    "codim_hausdorff", "mass_profile", "default_probe_radii", "load_space", "save_space", "load_distance_matrix",
    "save_distance_matrix", "load_field", "save_field",
]

_INFLATE = 1e-9


class Region(str, enum.Enum):
    INTERIOR = "mu"
    BOUNDARY = "bd"

    @classmethod
    def parse(cls, value: Union["Region", str]) -> "Region":
        if isinstance(value, Region):
            return value
        key = str(value).strip().lower()
        aliases = {"mu": cls.INTERIOR, "interior": cls.INTERIOR, "omega": cls.INTERIOR,
                   "bd": cls.BOUNDARY, "boundary": cls.BOUNDARY}
        if key not in aliases:
            raise ValueError(f"unknown region {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class Ball:
    """Open ball.  ``center`` is a global point index or a coordinate vector."""

    center: Union[int, Sequence[float], np.ndarray]
    radius: float

    def __post_init__(self):
        if not (self.radius > 0):
            raise ValueError("ball radius must be positive")


@dataclass
class ScalarField:
    """Values on one region, aligned with ``space.region_indices(region)``."""

    region: Region
    values: np.ndarray

    def __post_init__(self):
        self.region = Region.parse(self.region)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("field values must be one-dimensional")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def __len__(self) -> int:
        return self.values.size

    def copy(self, values: Optional[np.ndarray] = None) -> "ScalarField":
        return ScalarField(self.region, self.values.copy() if values is None else values)


@dataclass
class Neighborhoods:
    """CSR layout of ball memberships: row i lists region positions with d < r_i."""

    indptr: np.ndarray
    indices: np.ndarray
    dist: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.indptr.size - 1

    def row(self, i: int) -> Tuple[np.ndarray, np.ndarray]:
        a, b = self.indptr[i], self.indptr[i + 1]
        return self.indices[a:b], self.dist[a:b]

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_rows), np.diff(self.indptr))

    def weighted_sum(self, weights: np.ndarray, values: Optional[np.ndarray] = None) -> np.ndarray:
        """Per-row sum of weights[j] * values[j] over the row's members."""
        w = weights[self.indices]
        if values is not None:
            w = w * values[self.indices]
        out = np.zeros(self.n_rows)
        np.add.at(out, self.row_ids(), w)
        return out


@dataclass
class MassExponents:
    s: float
    c_s: float
    c_dbl: float


@dataclass
class CodimBounds:
    vartheta: float
    c_vartheta: float
    theta: float
    c_theta: float


class PointCloudSpace:
    """Weighted point cloud with an interior/boundary partition.

    Parameters
    ----------
    coords : (n, d) array
    is_boundary : (n,) bool array
    weights : (n,) positive array; mu on interior points, H on boundary points
    dist_matrix : optional (n, n) array replacing the Euclidean metric
    spacing : grid spacing of the generator; estimated from nearest
        neighbours when omitted
    """

    def __init__(self, coords, is_boundary, weights, dist_matrix=None,
                 spacing: Optional[float] = None, meta: Optional[dict] = None):
        self.coords = np.ascontiguousarray(np.asarray(coords, dtype=float))
        if self.coords.ndim == 1:
            self.coords = self.coords[:, None]
        n = self.coords.shape[0]
        self.is_boundary = np.asarray(is_boundary, dtype=bool).reshape(n)
        self.weights = np.asarray(weights, dtype=float).reshape(n)
        if n == 0:
            raise ValueError("empty space")
        if not np.all(self.weights > 0):
            raise ValueError("all weights must be positive")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("coordinates must be finite")
        self.dist_matrix = None
        if dist_matrix is not None:
            dm = np.asarray(dist_matrix, dtype=float)
            if dm.shape != (n, n):
                raise ValueError("distance matrix shape mismatch")
            if not np.allclose(dm, dm.T) or np.any(np.diag(dm) != 0) or np.any(dm < 0):
                raise ValueError("distance matrix must be symmetric, nonnegative, zero diagonal")
            self.dist_matrix = dm
        self.meta = dict(meta or {})
        self._idx = {Region.INTERIOR: np.flatnonzero(~self.is_boundary),
                     Region.BOUNDARY: np.flatnonzero(self.is_boundary)}
        self._pos = np.full(n, -1, dtype=np.int64)
        for ids in self._idx.values():
            self._pos[ids] = np.arange(ids.size)
        self._trees = {}
        self._diam = {}
        self._bdist = None
        self._spacing = spacing

    # -- basic accessors ---------------------------------------------------
    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def euclidean(self) -> bool:
        return self.dist_matrix is None

    def region_indices(self, region) -> np.ndarray:
        return self._idx[Region.parse(region)]

    def region_weights(self, region) -> np.ndarray:
        return self.weights[self.region_indices(region)]

    def region_coords(self, region) -> np.ndarray:
        return self.coords[self.region_indices(region)]

    def region_of(self, index: int) -> Region:
        self._check_index(index)
        return Region.BOUNDARY if self.is_boundary[index] else Region.INTERIOR

    def position(self, index: int) -> int:
        """Position of a global index inside its region's ordering."""
        self._check_index(index)
        return int(self._pos[index])

    @property
    def mu(self) -> np.ndarray:
        return self.region_weights(Region.INTERIOR)

    @property
    def hmass(self) -> np.ndarray:
        return self.region_weights(Region.BOUNDARY)

    def _check_index(self, index):
        if not (isinstance(index, (int, np.integer)) and 0 <= int(index) < self.n):
            raise IndexError("no such point")

    @property
    def spacing(self) -> float:
        if self._spacing is None:
            region = Region.INTERIOR
            ids = self.region_indices(region)
            if ids.size < 2:
                region, ids = None, np.arange(self.n)
            if ids.size < 2:
                self._spacing = 1.0
            elif self.euclidean:
                d, _ = self.tree(region).query(self.coords[ids], k=2)
                self._spacing = float(np.median(d[:, 1]))
            else:
                sub = self.dist_matrix[np.ix_(ids, ids)].copy()
                np.fill_diagonal(sub, np.inf)
                self._spacing = float(np.median(sub.min(axis=1)))
        return self._spacing

    # -- metric ------------------------------------------------------------
    def tree(self, region=None) -> cKDTree:
        key = None if region is None else Region.parse(region)
        if key not in self._trees:
            pts = self.coords if key is None else self.region_coords(key)
            self._trees[key] = cKDTree(pts)
        return self._trees[key]

    def distances(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Dense block of distances between global index arrays."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if self.euclidean:
            return cdist(self.coords[rows], self.coords[cols])
        return self.dist_matrix[np.ix_(rows, cols)]

    def center_coords(self, center) -> np.ndarray:
        if isinstance(center, (int, np.integer)):
            self._check_index(center)
            return self.coords[int(center)]
        return np.asarray(center, dtype=float).reshape(self.dim)

    def _center_dists(self, center, cols: np.ndarray) -> np.ndarray:
        if isinstance(center, (int, np.integer)):
            self._check_index(center)
            if not self.euclidean:
                return self.dist_matrix[int(center), cols]
        elif not self.euclidean:
            raise ValueError("coordinate centers need a Euclidean space")
        c = self.center_coords(center)
        return np.sqrt(((self.coords[cols] - c) ** 2).sum(axis=1))

    def neighborhoods(self, centers, radii, region) -> Neighborhoods:
        """Open-ball memberships of ``region`` for many centers at once.

        ``centers`` is an array of global indices (1-D int) or of coordinates
        (2-D float).  ``radii`` is a scalar or one radius per center.
        Indices in the result are positions inside ``region``.
        """
        region = Region.parse(region)
        ids = self.region_indices(region)
        centers = np.asarray(centers)
        by_index = centers.ndim == 1 and np.issubdtype(centers.dtype, np.integer)
        m = centers.shape[0]
        radii = np.broadcast_to(np.asarray(radii, dtype=float), (m,)).copy()
        if np.any(~(radii > 0)):
            raise ValueError("ball radius must be positive")
        if ids.size == 0 or m == 0:
            return Neighborhoods(np.zeros(m + 1, dtype=np.int64), np.zeros(0, dtype=np.int64),
                                 np.zeros(0))
        if self.euclidean:
            cc = self.coords[centers] if by_index else np.asarray(centers, float).reshape(m, self.dim)
            lists = self.tree(region).query_ball_point(cc, radii * (1 + _INFLATE) + 1e-300,
                                                       return_sorted=False)
            counts = np.fromiter((len(l) for l in lists), dtype=np.int64, count=m)
            cand = np.fromiter((j for l in lists for j in l), dtype=np.int64, count=int(counts.sum()))
            rid = np.repeat(np.arange(m), counts)
            d = np.sqrt(((self.coords[ids[cand]] - cc[rid]) ** 2).sum(axis=1))
        else:
            if not by_index:
                raise ValueError("coordinate centers need a Euclidean space")
            block = self.dist_matrix[np.ix_(centers.astype(np.int64), ids)]
            rid, cand = np.nonzero(block < radii[:, None])
            d = block[rid, cand]
        keep = d < radii[rid]
        rid, cand, d = rid[keep], cand[keep], d[keep]
        order = np.lexsort((cand, rid))
        rid, cand, d = rid[order], cand[order], d[order]
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(np.bincount(rid, minlength=m), out=indptr[1:])
        return Neighborhoods(indptr, cand, d)

    def boundary_distance(self, region=Region.INTERIOR) -> np.ndarray:
        """dist(x, boundary point set) for every point of ``region``."""
        region = Region.parse(region)
        bd = self.region_indices(Region.BOUNDARY)
        if bd.size == 0:
            raise ValueError("empty boundary")
        if region is Region.BOUNDARY:
            return np.zeros(bd.size)
        if self._bdist is None:
            ids = self.region_indices(Region.INTERIOR)
            if self.euclidean:
                self._bdist = self.tree(Region.BOUNDARY).query(self.coords[ids])[0]
            else:
                self._bdist = self.dist_matrix[np.ix_(ids, bd)].min(axis=1)
        return self._bdist

    def nearest_boundary(self, x_coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Distance to and global id of the nearest boundary point (lowest id on ties)."""
        bd = self.region_indices(Region.BOUNDARY)
        x_coords = np.atleast_2d(x_coords)
        d, j = self.tree(Region.BOUNDARY).query(x_coords, k=min(8, bd.size))
        d = np.atleast_2d(d.reshape(x_coords.shape[0], -1))
        j = np.atleast_2d(j.reshape(x_coords.shape[0], -1))
        # exact recomputation so that ties are resolved on equal footing
        exact = np.sqrt(((self.coords[bd[j]] - x_coords[:, None, :]) ** 2).sum(axis=2))
        best = exact.min(axis=1, keepdims=True)
        tied = np.where(exact <= best, bd[j], np.iinfo(np.int64).max)
        return best[:, 0], tied.min(axis=1)

    def diam(self, region) -> float:
        region = Region.parse(region)
        if region not in self._diam:
            ids = self.region_indices(region)
            self._diam[region] = _diameter(self, ids)
        return self._diam[region]

    @property
    def diam_interior(self) -> float:
        return self.diam(Region.INTERIOR)

    @property
    def diam_boundary(self) -> float:
        return self.diam(Region.BOUNDARY)

    def total_mass(self, region) -> float:
        return float(self.region_weights(region).sum())

    def integrate(self, field: ScalarField, power: float = 1.0) -> float:
        w = self.region_weights(field.region)
        if power == 1.0:
            return float(np.dot(w, field.values))
        return float(np.dot(w, np.abs(field.values) ** power))

    def lp_norm(self, field: ScalarField, p: float) -> float:
        w = self.region_weights(field.region)
        if math.isinf(p):
            return float(np.abs(field.values).max(initial=0.0))
        return float(np.dot(w, np.abs(field.values) ** p) ** (1.0 / p))

    def mean(self, field: ScalarField) -> float:
        w = self.region_weights(field.region)
        return float(np.dot(w, field.values) / w.sum())

    def field(self, region, func) -> ScalarField:
        """Sample ``func(coords)`` on a region."""
        region = Region.parse(region)
        return ScalarField(region, np.asarray(func(self.region_coords(region)), dtype=float))

    def __repr__(self) -> str:
        return (f"PointCloudSpace(n_interior={self._idx[Region.INTERIOR].size}, "
                f"n_boundary={self._idx[Region.BOUNDARY].size}, dim={self.dim})")


def _diameter(space: PointCloudSpace, ids: np.ndarray) -> float:
    if ids.size < 2:
        return 0.0
    if not space.euclidean:
        return float(space.dist_matrix[np.ix_(ids, ids)].max())
    pts = space.coords[ids]
    cand = ids
    if pts.shape[0] > 64 and space.dim >= 2:
        try:
            cand = ids[ConvexHull(pts).vertices]
        except (QhullError, ValueError):
            cand = ids
    best = 0.0
    for a in range(0, cand.size, 2048):
        best = max(best, float(space.distances(cand[a:a + 2048], cand).max()))
    return best


# ---------------------------------------------------------------------------
# ball primitives
# ---------------------------------------------------------------------------

def ball_members(space: PointCloudSpace, b: Ball, region) -> np.ndarray:
    """Global indices of ``region`` at distance strictly below ``b.radius``."""
    region = Region.parse(region)
    ids = space.region_indices(region)
    if isinstance(b.center, (int, np.integer)):
        space._check_index(b.center)
        centers = np.array([int(b.center)])
    else:
        centers = np.asarray(b.center, dtype=float).reshape(1, space.dim)
    nb = space.neighborhoods(centers, b.radius, region)
    return np.sort(ids[nb.indices])


def ball_mass(space: PointCloudSpace, b: Ball, region) -> float:
    members = ball_members(space, b, region)
    return float(space.weights[members].sum())


def _ball_masses(space, centers, radii, region=Region.INTERIOR) -> np.ndarray:
    nb = space.neighborhoods(centers, radii, region)
    return nb.weighted_sum(space.region_weights(region))


def mass_profile(space: PointCloudSpace, centers, radii, region=Region.INTERIOR,
                 chunk: int = 64) -> np.ndarray:
    """Open-ball masses for every (center, radius) pair, shape (len(centers), len(radii)).

    Distances from each center are sorted once and the weights accumulated,
    so the mass of B(x, r) is read off with a left-sided binary search.
    """
    region = Region.parse(region)
    ids = space.region_indices(region)
    w = space.weights[ids]
    radii = np.asarray(radii, dtype=float)
    centers = np.asarray(centers)
    out = np.zeros((centers.shape[0], radii.size))
    if ids.size == 0:
        return out
    for a in range(0, centers.shape[0], chunk):
        cc = centers[a:a + chunk]
        if cc.ndim == 1:
            D = space.distances(cc, ids)
        else:
            D = cdist(cc, space.coords[ids])
        order = np.argsort(D, axis=1, kind="stable")
        Ds = np.take_along_axis(D, order, axis=1)
        cw = np.concatenate([np.zeros((len(cc), 1)), np.cumsum(w[order], axis=1)], axis=1)
        for i in range(len(cc)):
            k = np.searchsorted(Ds[i], radii, side="left")
            out[a + i] = cw[i, k]
    return out


def _default_probe_centers(space: PointCloudSpace, limit: int = 160) -> np.ndarray:
    out = []
    for region in (Region.INTERIOR, Region.BOUNDARY):
        ids = space.region_indices(region)
        step = max(1, ids.size // (limit // 2))
        out.append(ids[::step])
    return np.concatenate(out)


def default_probe_radii(space: PointCloudSpace, count: int = 8, top: Optional[float] = None) -> np.ndarray:
    """Geometric radii between 4x spacing and ``top``.

    The default top is a quarter of the interior diameter; larger balls
    saturate and flatten the mass ratios.
    """
    lo = 4.0 * space.spacing
    hi = space.diam_interior / 4.0 if top is None else top
    if hi <= lo:
        return np.array([hi])
    return np.geomspace(lo, hi, count)


def _round_up(x: float, step: float = 0.05) -> float:
    return math.ceil(x / step - 1e-9) * step


def _round_down(x: float, step: float = 0.05) -> float:
    return math.floor(x / step + 1e-9) * step


def estimate_mass_exponents(space: PointCloudSpace, probe_schedule: Iterable[float],
                            centers: Optional[np.ndarray] = None) -> MassExponents:
    """Doubling constant and lower mass-bound exponent of mu on probed balls.

    c_dbl is the largest mass ratio between B(x, 2r) and B(x, r).  The
    exponent s is the largest per-center log-log slope rounded up to a 0.05
    grid, and c_s is the smallest observed mu(B(x, r))/r^s.
    """
    radii = np.asarray(sorted(probe_schedule), dtype=float)
    if radii.size == 0:
        raise ValueError("empty probe schedule")
    if space.region_indices(Region.INTERIOR).size < 3 or space.diam_interior == 0:
        raise ValueError("insufficient geometry")
    if centers is None:
        centers = _default_probe_centers(space)
    m = len(centers)
    prof = mass_profile(space, centers, np.concatenate([radii, 2 * radii]))
    mass, mass2 = prof[:, :radii.size], prof[:, radii.size:]
    ok = mass > 0
    if not ok.any():
        raise ValueError("insufficient geometry")
    c_dbl = float(np.max(mass2[ok] / mass[ok]))
    slopes = []
    lr = np.log(radii)
    for i in range(m):
        sel = ok[i]
        if sel.sum() >= 2 and np.ptp(lr[sel]) > 0:
            slopes.append(np.polyfit(lr[sel], np.log(mass[i, sel]), 1)[0])
    s = _round_up(max(slopes)) if slopes else 1.0
    s = max(s, 0.05)
    c_s = float(np.min(mass[ok] / radii[None, :].repeat(m, 0)[ok] ** s))
    return MassExponents(s=float(s), c_s=c_s, c_dbl=max(c_dbl, 1.0))


def estimate_codim_bounds(space: PointCloudSpace, probe_schedule: Iterable[float],
                          centers: Optional[np.ndarray] = None) -> CodimBounds:
    """Lower codimension exponent vartheta and upper exponent theta.

    With m(r) = mu(B(z,r) in interior)/H(B(z,r) on boundary) over boundary
    centers z, the upper envelope max_z m(r) decays like r^vartheta and the
    lower envelope min_z m(r) like r^theta.  Both exponents are log-log
    slopes of the envelopes, rounded outward to a 0.05 grid; the constants
    are the extremal observed ratios H r^t / mu over all probes.
    """
    bd = space.region_indices(Region.BOUNDARY)
    if bd.size == 0:
        raise ValueError("empty boundary")
    if space.region_indices(Region.INTERIOR).size == 0:
        raise ValueError("empty interior")
    radii = np.asarray(sorted(probe_schedule), dtype=float)
    if radii.size < 2:
        raise ValueError("need at least two probe radii")
    if centers is None:
        centers = bd
    mu = mass_profile(space, centers, radii, Region.INTERIOR)
    hm = mass_profile(space, centers, radii, Region.BOUNDARY)
    ok = (mu > 0) & (hm > 0)
    if not ok.all(axis=0).any():
        raise ValueError("insufficient geometry")
    ratio = np.where(ok, mu / np.where(ok, hm, 1.0), np.nan)
    cols = ok.any(axis=0)
    lr = np.log(radii[cols])
    upper = np.nanmax(ratio[:, cols], axis=0)
    lower = np.nanmin(ratio[:, cols], axis=0)
    vartheta = max(_round_down(np.polyfit(lr, np.log(upper), 1)[0]), 0.05)
    theta = max(_round_up(np.polyfit(lr, np.log(lower), 1)[0]), vartheta)
    R = np.broadcast_to(radii, mu.shape)
    c_vt = float(np.min(hm[ok] * R[ok] ** vartheta / mu[ok]))
    c_th = float(np.max(hm[ok] * R[ok] ** theta / mu[ok]))
    return CodimBounds(vartheta=float(vartheta), c_vartheta=c_vt, theta=float(theta), c_theta=c_th)


def shell_mass(space: PointCloudSpace, rho: float) -> float:
    """mu-mass of interior points with distance < rho to the boundary point set."""
    if not (rho > 0):
        raise ValueError("rho must be positive")
    d = space.boundary_distance()
    return float(space.mu[d < rho].sum())


def codim_hausdorff(space: PointCloudSpace, subset: Sequence[int], theta: float, delta: float,
                    centers: str = "boundary") -> float:
    """Greedy upper estimate of the codimension-theta Hausdorff content.

    For each radius of the dyadic menu delta/2, delta/4, ... down to the
    resolvable scale (one grid spacing), a farthest-first greedy places balls
    of that radius on uncovered points of ``subset`` until everything is
    covered.  The cheapest cover, measured by sum mu(B)/r^theta, is returned.
    Because the ball choice does not depend on theta, the value is monotone
    in theta for radii below 1.
    """
    subset = np.unique(np.asarray(subset, dtype=np.int64))
    if subset.size == 0:
        raise ValueError("empty subset")
    if not np.all(space.is_boundary[subset]):
        raise ValueError("subset must consist of boundary points")
    r_min = space.spacing
    menu = []
    r = delta / 2.0
    while r >= r_min:
        menu.append(r)
        r /= 2.0
    if not menu:
        raise ValueError("unresolvable scale")
    best = math.inf
    sub_d = space.distances(subset, subset)
    for r in menu:
        uncovered = np.ones(subset.size, dtype=bool)
        chosen = []
        far = np.full(subset.size, np.inf)
        while uncovered.any():
            cand = np.flatnonzero(uncovered)
            k = cand[np.argmax(far[cand])]  # first index on ties
            chosen.append(k)
            uncovered &= ~(sub_d[k] < r)
            far = np.minimum(far, sub_d[k])
        masses = mass_profile(space, subset[np.array(chosen)], [r], Region.INTERIOR)[:, 0]
        best = min(best, float(masses.sum() / r ** theta))
    return best


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

_DM_MAGIC = b"MSDM1"


def save_space(space: PointCloudSpace, path) -> None:
    """Write the text point-cloud format: ``x y [z] region weight`` per line."""
    with open(path, "w") as fh:
        fh.write(f"# metsob point cloud; dim={space.dim} spacing={space.spacing!r}\n")
        for key, val in sorted(space.meta.items()):
            fh.write(f"# meta {key}={val}\n")
        for x, bd, w in zip(space.coords, space.is_boundary, space.weights):
            xs = " ".join(repr(float(v)) for v in x)
            fh.write(f"{xs} {'bd' if bd else 'mu'} {float(w)!r}\n")


def load_space(path, dist_path=None) -> PointCloudSpace:
    coords, regions, weights = [], [], []
    spacing = None
    meta = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if s.startswith("#"):
                for tok in s[1:].split():
                    if tok.startswith("spacing="):
                        spacing = float(tok.split("=", 1)[1])
                if s.startswith("# meta "):
                    key, _, val = s[7:].partition("=")
                    meta[key.strip()] = val.strip()
                continue
            if not s:
                continue
            toks = s.split()
            if len(toks) < 3:
                raise ValueError(f"{path}:{lineno}: malformed record")
            try:
                reg = Region.parse(toks[-2])
                w = float(toks[-1])
                x = [float(t) for t in toks[:-2]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if not (w > 0):
                raise ValueError(f"{path}:{lineno}: weight must be positive")
            coords.append(x)
            regions.append(reg is Region.BOUNDARY)
            weights.append(w)
    if not coords:
        raise ValueError(f"{path}: no points")
    if len({len(c) for c in coords}) != 1:
        raise ValueError(f"{path}: inconsistent dimension")
    dm = load_distance_matrix(dist_path) if dist_path else None
    return PointCloudSpace(np.array(coords), np.array(regions), np.array(weights),
                           dist_matrix=dm, spacing=spacing, meta=meta)


def save_distance_matrix(dm: np.ndarray, path) -> None:
    dm = np.ascontiguousarray(dm, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_DM_MAGIC)
        fh.write(struct.pack("<Q", dm.shape[0]))
        fh.write(dm.tobytes())


def load_distance_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(5) != _DM_MAGIC:
            raise ValueError("not an MSDM1 distance matrix")
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError("truncated distance matrix")
    return data.reshape(n, n).copy()


def save_field(space: PointCloudSpace, fld: ScalarField, path) -> None:
    ids = space.region_indices(fld.region)
    with open(path, "w") as fh:
        fh.write(f"# region={fld.region.value}\n")
        for i, v in zip(ids, fld.values):
            fh.write(f"{int(i)} {float(v)!r}\n")


def load_field(space: PointCloudSpace, path) -> ScalarField:
    idx, vals = [], []
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            a, b = s.split()[:2]
            idx.append(int(a))
            vals.append(float(b))
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty field file")
    for i in idx:
        space._check_index(int(i))
    region = Region.BOUNDARY if space.is_boundary[idx[0]] else Region.INTERIOR
    ids = space.region_indices(region)
    if idx.size != ids.size or not np.all(space.is_boundary[idx] == (region is Region.BOUNDARY)):
        raise ValueError("field must cover exactly one region")
    out = np.empty(ids.size)
    out[space._pos[idx]] = vals
    return ScalarField(region, out)

"""Whitney-type covers of the interior and their partition of unity.

Every interior point p gets the radius r = dist(p, boundary)/8 and the
dyadic level j with 2^(j-1) < r <= 2^j.  Levels are processed from the top
down; inside a level, points are swept in index order and a ball is added
whenever its center is not yet covered by a ball already chosen at that
level.  The partition of unity normalizes the tents

    eta(x) = max(0, min(1, (2r - d(x, p)) / r)),

which equal 1 on B and vanish outside 2B.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .space import PointCloudSpace, Region

__all__ = [
    "WhitneyCover", "build_cover", "check_cover", "partition_of_unity",
    "partition_matrix", "partition_lipschitz", "boundary_patch", "patch_matrix",
    "save_cover", "load_cover",
]


@dataclass
class WhitneyCover:
    centers: np.ndarray     # global interior ids
    radii: np.ndarray
    levels: np.ndarray
    anchors: np.ndarray     # global boundary ids
    j0: int
    overlap_bound: int
    _W: Optional[sparse.csr_matrix] = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.centers.size

    def to_dict(self) -> dict:
        return dict(schema=1, j0=int(self.j0), overlap_bound=int(self.overlap_bound),
                    balls=[dict(center=int(c), radius=float(r), level=int(j), anchor=int(q))
                           for c, r, j, q in zip(self.centers, self.radii, self.levels, self.anchors)])

    @classmethod
    def from_dict(cls, d: dict) -> "WhitneyCover":
        b = d["balls"]
        return cls(np.array([x["center"] for x in b], dtype=np.int64),
                   np.array([x["radius"] for x in b], dtype=float),
                   np.array([x["level"] for x in b], dtype=np.int64),
                   np.array([x["anchor"] for x in b], dtype=np.int64),
                   int(d["j0"]), int(d["overlap_bound"]))


def _levels(r: np.ndarray) -> np.ndarray:
    j = np.ceil(np.log2(r)).astype(np.int64)
    # repair rounding at exact powers of two
    j = np.where(2.0 ** j < r, j + 1, j)
    j = np.where(2.0 ** (j - 1) >= r, j - 1, j)
    return j


def build_cover(space: PointCloudSpace) -> WhitneyCover:
    ids = space.region_indices(Region.INTERIOR)
    if ids.size == 0 or space.region_indices(Region.BOUNDARY).size == 0:
        raise ValueError("need a nonempty interior and boundary")
    X = space.coords[ids]
    delta, anchor = space.nearest_boundary(X)
    if np.any(delta <= 0):
        raise ValueError("zero distance to boundary")
    r = delta / 8.0
    lev = _levels(r)
    chosen = []
    for j in sorted(np.unique(lev))[::-1]:
        cand = np.flatnonzero(lev == j)
        tree = cKDTree(X[cand])
        covered = np.zeros(cand.size, dtype=bool)
        for k in range(cand.size):
            if covered[k]:
                continue
            chosen.append(cand[k])
            hit = np.asarray(tree.query_ball_point(X[cand[k]], r[cand[k]] * (1 + 1e-9)), dtype=np.int64)
            if hit.size:
                dd = np.sqrt(((X[cand[hit]] - X[cand[k]]) ** 2).sum(axis=1))
                covered[hit[dd < r[cand[k]]]] = True
            covered[k] = True
    chosen = np.asarray(chosen, dtype=np.int64)
    cover = WhitneyCover(ids[chosen], r[chosen], lev[chosen], anchor[chosen],
                         int(lev.max()), 0)
    cover.overlap_bound = int(_overlap_counts(space, cover).max())
    return cover


def _overlap_counts(space, cover) -> np.ndarray:
    nb = space.neighborhoods(cover.centers, 2.0 * cover.radii, Region.INTERIOR)
    n = space.region_indices(Region.INTERIOR).size
    return np.bincount(nb.indices, minlength=n)


def partition_matrix(space: PointCloudSpace, cover: WhitneyCover) -> sparse.csr_matrix:
    """Sparse (interior x balls) matrix of partition weights phi_B(x)."""
    if cover._W is not None:
        return cover._W
    nb = space.neighborhoods(cover.centers, 2.0 * cover.radii, Region.INTERIOR)
    rows = nb.row_ids()
    r = cover.radii[rows]
    eta = np.clip((2.0 * r - nb.dist) / r, 0.0, 1.0)
    keep = eta > 0
    n = space.region_indices(Region.INTERIOR).size
    E = sparse.csr_matrix((eta[keep], (nb.indices[keep], rows[keep])), shape=(n, len(cover)))
    tot = np.asarray(E.sum(axis=1)).ravel()
    if np.any(tot <= 0):
        raise AssertionError("interior point outside every doubled ball")
    W = sparse.diags(1.0 / tot) @ E
    cover._W = W.tocsr()
    return cover._W


def partition_of_unity(space: PointCloudSpace, cover: WhitneyCover, x: int) -> Tuple[np.ndarray, np.ndarray]:
    """Ball indices and weights phi_B(x) for one interior point."""
    if space.is_boundary[x]:
        raise ValueError("x must be an interior point")
    W = partition_matrix(space, cover)
    row = W.getrow(space.position(x))
    order = np.argsort(row.indices)
    return row.indices[order], row.data[order]


def partition_lipschitz(space: PointCloudSpace, cover: WhitneyCover, rho: Optional[float] = None) -> float:
    """max over balls of r_B * (discrete Lipschitz constant of phi_B)."""
    W = partition_matrix(space, cover)
    rho = 2.0 * space.spacing if rho is None else rho
    ids = space.region_indices(Region.INTERIOR)
    pairs = space.tree(Region.INTERIOR).query_pairs(rho, output_type="ndarray")
    if pairs.size == 0:
        return 0.0
    a, b = pairs[:, 0], pairs[:, 1]
    d = np.sqrt(((space.coords[ids[a]] - space.coords[ids[b]]) ** 2).sum(axis=1))
    best = 0.0
    for s in range(0, a.size, 200000):
        Dm = (W[a[s:s + 200000]] - W[b[s:s + 200000]]).tocoo()
        if Dm.nnz == 0:
            continue
        val = np.abs(Dm.data) / d[s:s + 200000][Dm.row] * cover.radii[Dm.col]
        best = max(best, float(val.max()))
    return best


def boundary_patch(space: PointCloudSpace, cover: WhitneyCover, ball: int, expansion: float = 1.0) -> np.ndarray:
    """Boundary points within expansion * r of the anchor (open ball)."""
    q = int(cover.anchors[ball])
    r = float(cover.radii[ball]) * expansion
    nb = space.neighborhoods(np.array([q]), r, Region.BOUNDARY)
    if nb.indices.size == 0:
        raise ValueError("boundary resolution too coarse for this ball")
    return space.region_indices(Region.BOUNDARY)[nb.indices]


def patch_matrix(space: PointCloudSpace, cover: WhitneyCover, expansion: float = 1.0) -> sparse.csr_matrix:
    """Sparse (balls x boundary) matrix of H-weighted patch averages."""
    nb = space.neighborhoods(cover.anchors, expansion * cover.radii, Region.BOUNDARY)
    if np.any(np.diff(nb.indptr) == 0):
        raise ValueError("boundary resolution too coarse for this ball")
    H = space.hmass
    rows = nb.row_ids()
    w = H[nb.indices]
    tot = np.zeros(len(cover))
    np.add.at(tot, rows, w)
    nbd = space.region_indices(Region.BOUNDARY).size
    return sparse.csr_matrix((w / tot[rows], (rows, nb.indices)), shape=(len(cover), nbd))


def check_cover(space: PointCloudSpace, cover: WhitneyCover, partition_tol: float = 1e-12) -> Dict:
    """Independent verification of the cover invariants.

    Distances to the boundary are recomputed by brute force rather than taken
    from the builder.
    """
    ids = space.region_indices(Region.INTERIOR)
    bd = space.region_indices(Region.BOUNDARY)
    out = {}
    C = space.coords[cover.centers]
    Db = cdist(C, space.coords[bd])
    dmin = Db.min(axis=1)
    out["radius"] = bool(np.all(np.abs(cover.radii - dmin / 8.0) <= 1e-12 * dmin / 8.0))
    lv = cover.levels.astype(float)
    out["levels"] = bool(np.all((2.0 ** (lv - 1) < cover.radii) & (cover.radii <= 2.0 ** lv))
                         and cover.levels.max() == cover.j0)
    first = np.argmax(Db <= dmin[:, None], axis=1)
    out["anchors"] = bool(np.all(bd[first] == cover.anchors))
    nb = space.neighborhoods(cover.centers, cover.radii, Region.INTERIOR)
    hit = np.zeros(ids.size, dtype=bool)
    hit[nb.indices] = True
    out["coverage"] = bool(hit.all())
    counts = _overlap_counts(space, cover)
    out["max_overlap"] = int(counts.max())
    out["overlap"] = bool(counts.max() <= cover.overlap_bound)
    ok = True
    levels = np.unique(cover.levels)
    for j in levels:
        a = np.flatnonzero(cover.levels == j)
        b = np.flatnonzero(cover.levels == j + 2)
        if a.size == 0 or b.size == 0:
            continue
        tb = cKDTree(C[b])
        reach = cover.radii[a] + cover.radii[b].max()
        lists = tb.query_ball_point(C[a], reach)
        for ia, lst in zip(a, lists):
            if lst:
                bb = b[np.asarray(lst)]
                dd = np.sqrt(((C[bb] - C[ia]) ** 2).sum(axis=1))
                if np.any(dd < cover.radii[ia] + cover.radii[bb]):
                    ok = False
                    break
        if not ok:
            break
    out["level_disjoint"] = ok
    W = partition_matrix(space, cover).tocoo()
    sums = np.asarray(partition_matrix(space, cover).sum(axis=1)).ravel()
    out["partition_max_error"] = float(np.abs(sums - 1.0).max())
    out["partition_sum"] = bool(out["partition_max_error"] <= partition_tol)
    dsup = np.sqrt(((space.coords[ids[W.row]] - C[W.col]) ** 2).sum(axis=1))
    out["partition_support"] = bool(np.all(dsup < 2.0 * cover.radii[W.col]))
    out["passed"] = all(v for k, v in out.items() if isinstance(v, bool))
    return out


def save_cover(cover: WhitneyCover, path) -> None:
    with open(path, "w") as fh:
        json.dump(cover.to_dict(), fh, indent=1, sort_keys=True)


def load_cover(path) -> WhitneyCover:
    with open(path) as fh:
        return WhitneyCover.from_dict(json.load(fh))

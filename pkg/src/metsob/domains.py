"""Example domains as point clouds, plus John/uniform geometry.

Interior points come from a square grid of cell size 1/resolution.  Each cell
is subsampled on a 6x6 lattice; the cell's weight is the cell area times the
mean of density*indicator over the subsamples, and its point sits at the
centroid of the subsamples that fall inside the domain.  Boundary curves are
sampled at arclength midpoints with weight equal to the arclength share.

Curves for the John and uniform checks are shortest paths in a neighbour
graph of interior points.  Edges carry quasihyperbolic length
``|e| * (1/delta(a) + 1/delta(b)) / 2`` with delta the distance to the
boundary point set, so that paths keep away from the boundary the way
quasihyperbolic geodesics do; plain Euclidean edge lengths are available
through ``weighting="length"``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .space import PointCloudSpace, Region

__all__ = [
    "DomainKind", "DomainSpec", "generate", "analytic_boundary_distance",
    "known_exponents", "JohnTree", "john_tree", "john_check", "uniform_check",
    "Chain", "build_chain", "verify_chain", "C_GRID",
]

C_GRID = tuple(round(0.05 * k, 2) for k in range(1, 20))
_SUB = 6


class DomainKind(str, enum.Enum):
    CUSP = "cusp"
    WEIGHTED_SQUARE = "weighted_square"
    WEIGHTED_DISC = "weighted_disc"
    SHARPNESS_DISC = "sharpness_disc"
    UNIT_SQUARE = "square"


@dataclass(frozen=True)
class DomainSpec:
    kind: DomainKind
    resolution: int
    boundary_resolution: Optional[int] = None
    eps: float = 0.25
    n: int = 2

    def __post_init__(self):
        object.__setattr__(self, "kind", DomainKind(self.kind))
        if self.resolution < 8:
            raise ValueError("resolution must be at least 8")
        if self.boundary_resolution is not None and self.boundary_resolution < 1:
            raise ValueError("boundary_resolution must be positive")
        if self.kind is DomainKind.SHARPNESS_DISC and self.n < 1:
            raise ValueError("n must be positive")

    @property
    def bres(self) -> int:
        return self.boundary_resolution or 2 * self.resolution


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _cells(lo, hi, res):
    h = 1.0 / res
    nx = int(round((hi[0] - lo[0]) * res))
    ny = int(round((hi[1] - lo[1]) * res))
    off = (np.arange(_SUB) + 0.5) / _SUB * h
    cx = lo[0] + np.arange(nx) * h
    cy = lo[1] + np.arange(ny) * h
    # subsample coordinates, shape (ncell, SUB*SUB, 2)
    sx = (cx[:, None] + off[None, :]).reshape(-1)
    sy = (cy[:, None] + off[None, :]).reshape(-1)
    X = sx.reshape(nx, 1, _SUB, 1)
    Y = sy.reshape(1, ny, 1, _SUB)
    X, Y = np.broadcast_arrays(X, Y)
    sub = np.stack([X, Y], axis=-1).reshape(nx * ny, _SUB * _SUB, 2)
    return sub, h


def _grid_points(inside, density, lo, hi, res):
    sub, h = _cells(lo, hi, res)
    flat = sub.reshape(-1, 2)
    ins = inside(flat).reshape(sub.shape[:2])
    dens = np.where(ins.reshape(-1), density(flat), 0.0).reshape(sub.shape[:2])
    w = h * h * dens.mean(axis=1)
    keep = ins.any(axis=1) & (w > 0)
    sub, ins, w = sub[keep], ins[keep], w[keep]
    cnt = ins.sum(axis=1, keepdims=True)
    cen = (sub * ins[..., None]).sum(axis=1) / cnt
    bad = ~inside(cen)
    if bad.any():
        for i in np.flatnonzero(bad):
            cand = sub[i][ins[i]]
            cen[i] = cand[np.argmin(((cand - cen[i]) ** 2).sum(axis=1))]
    return cen, w


def _sample_polyline(verts, bres):
    verts = np.asarray(verts, dtype=float)
    seg = np.diff(verts, axis=0)
    seglen = np.sqrt((seg ** 2).sum(axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    L = cum[-1]
    m = max(1, int(round(L * bres)))
    s = (np.arange(m) + 0.5) * L / m
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, seglen.size - 1)
    frac = (s - cum[k]) / seglen[k]
    pts = verts[k] + frac[:, None] * seg[k]
    return pts, np.full(m, L / m)


def _sample_segment(a, b, bres):
    return _sample_polyline([a, b], bres)


def _sample_parabola(bres, fine=20001):
    # x2 = x1^2 from (0,0) to (1,1); dense polyline is accurate to ~1e-9
    x = np.linspace(0.0, 1.0, fine)
    return _sample_polyline(np.column_stack([x, x * x]), bres)


def _sample_circle(bres):
    m = max(8, int(round(2 * math.pi * bres)))
    a = (np.arange(m) + 0.5) * 2 * math.pi / m
    return np.column_stack([np.cos(a), np.sin(a)]), np.full(m, 2 * math.pi / m)


def analytic_boundary_distance(spec: DomainSpec, x: np.ndarray) -> np.ndarray:
    """Exact distance to the continuous boundary (disc and square kinds)."""
    x = np.atleast_2d(x)
    if spec.kind in (DomainKind.WEIGHTED_DISC, DomainKind.SHARPNESS_DISC):
        return np.maximum(1.0 - np.sqrt((x ** 2).sum(axis=1)), 0.0)
    if spec.kind in (DomainKind.UNIT_SQUARE, DomainKind.WEIGHTED_SQUARE):
        return np.minimum.reduce([x[:, 0], x[:, 1], 1 - x[:, 0], 1 - x[:, 1]])
    raise ValueError("no closed form for this domain")


def known_exponents(spec: DomainSpec) -> Dict[str, float]:
    """Codimension exponents and lower mass exponent of the example measures."""
    table = {
        DomainKind.UNIT_SQUARE: dict(vartheta=1.0, theta=1.0, s=2.0),
        DomainKind.CUSP: dict(vartheta=1.0, theta=2.0, s=3.0),
        DomainKind.WEIGHTED_SQUARE: dict(vartheta=1.0, theta=2.0, s=3.0),
        DomainKind.WEIGHTED_DISC: dict(vartheta=2.0, theta=2.0, s=3.0),
        DomainKind.SHARPNESS_DISC: dict(vartheta=float(spec.n), theta=float(spec.n), s=float(spec.n + 1)),
    }
    return dict(table[spec.kind])


def generate(spec: DomainSpec) -> PointCloudSpace:
    res, bres = spec.resolution, spec.bres
    kind = spec.kind
    if kind in (DomainKind.UNIT_SQUARE, DomainKind.WEIGHTED_SQUARE):
        inside = lambda x: (x[:, 0] > 0) & (x[:, 0] < 1) & (x[:, 1] > 0) & (x[:, 1] < 1)
        if kind is DomainKind.UNIT_SQUARE:
            density = lambda x: np.ones(x.shape[0])
        else:
            density = lambda x: np.sqrt((x ** 2).sum(axis=1))
        pts, w = _grid_points(inside, density, (0, 0), (1, 1), res)
        bpts, bw = _sample_polyline([(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)], bres)
    elif kind is DomainKind.CUSP:
        inside = lambda x: (x[:, 1] > 0) & (x[:, 1] < x[:, 0] ** 2) & (x[:, 0] < 1)
        density = lambda x: np.ones(x.shape[0])
        pts, w = _grid_points(inside, density, (0, 0), (1, 1), res)
        b1, w1 = _sample_segment((0, 0), (1, 0), bres)
        b2, w2 = _sample_segment((1, 0), (1, 1), bres)
        b3, w3 = _sample_parabola(bres)
        bpts, bw = np.vstack([b1, b2, b3]), np.concatenate([w1, w2, w3])
        if (pts[:, 0] < 0.25).sum() < 3:
            raise ValueError("resolution too low to resolve the cusp tip")
    elif kind in (DomainKind.WEIGHTED_DISC, DomainKind.SHARPNESS_DISC):
        inside = lambda x: (x ** 2).sum(axis=1) < 1.0
        power = 1 if kind is DomainKind.WEIGHTED_DISC else spec.n - 1
        density = lambda x: np.maximum(1.0 - np.sqrt((x ** 2).sum(axis=1)), 0.0) ** power
        pts, w = _grid_points(inside, density, (-1, -1), (1, 1), res)
        bpts, bw = _sample_circle(bres)
    else:  # pragma: no cover
        raise ValueError(f"unknown domain {kind}")
    coords = np.vstack([pts, bpts])
    is_bd = np.concatenate([np.zeros(len(pts), bool), np.ones(len(bpts), bool)])
    weights = np.concatenate([w, bw])
    meta = dict(kind=kind.value, resolution=res, boundary_resolution=bres, eps=spec.eps, n=spec.n)
    return PointCloudSpace(coords, is_bd, weights, spacing=1.0 / res, meta=meta)


def spec_from_meta(meta: dict) -> DomainSpec:
    return DomainSpec(DomainKind(meta["kind"]), int(meta["resolution"]),
                      int(meta["boundary_resolution"]), float(meta.get("eps", 0.25)),
                      int(meta.get("n", 2)))


# ---------------------------------------------------------------------------
# neighbour graph and path trees
# ---------------------------------------------------------------------------

def _interior_graph(space: PointCloudSpace, weighting: str, radius_factor: float = 2.0):
    ids = space.region_indices(Region.INTERIOR)
    delta = space.boundary_distance()
    if np.any(delta <= 0):
        raise ValueError("zero distance to boundary")
    r = radius_factor * space.spacing
    pairs = space.tree(Region.INTERIOR).query_pairs(r * (1 + 1e-9), output_type="ndarray")
    a, b = pairs[:, 0], pairs[:, 1]
    elen = np.sqrt(((space.coords[ids[a]] - space.coords[ids[b]]) ** 2).sum(axis=1))
    keep = elen < r
    a, b, elen = a[keep], b[keep], elen[keep]
    if weighting == "quasihyperbolic":
        wgt = elen * 0.5 * (1.0 / delta[a] + 1.0 / delta[b])
    elif weighting == "length":
        wgt = elen
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    n = ids.size
    G = coo_matrix((np.concatenate([wgt, wgt]), (np.concatenate([a, b]), np.concatenate([b, a]))),
                   shape=(n, n)).tocsr()
    ncomp, _ = connected_components(G, directed=False)
    if ncomp != 1:
        raise ValueError("not connected at this resolution")
    return G, delta


@dataclass
class JohnTree:
    """Shortest-path tree towards a center; positions are interior positions."""

    center: int               # interior position of the center
    pred: np.ndarray          # predecessor position, -9999 at the center
    arclength: np.ndarray     # Euclidean length of the tree path to the center
    delta: np.ndarray         # distance to the boundary point set
    ratio: np.ndarray         # per-point John ratio min_v delta(v)/t(v)

    def path(self, pos: int) -> np.ndarray:
        out = [pos]
        while out[-1] != self.center:
            out.append(int(self.pred[out[-1]]))
        return np.asarray(out)


def john_tree(space: PointCloudSpace, center: int, weighting: str = "quasihyperbolic") -> JohnTree:
    if space.region_of(center) is not Region.INTERIOR:
        raise ValueError("center must be an interior point")
    ids = space.region_indices(Region.INTERIOR)
    G, delta = _interior_graph(space, weighting)
    c = space.position(center)
    dist, pred = dijkstra(G, directed=False, indices=c, return_predecessors=True)
    X = space.coords[ids]
    order = np.argsort(dist, kind="stable")
    L = np.zeros(ids.size)
    for v in order[1:]:
        u = pred[v]
        L[v] = L[u] + math.sqrt(((X[v] - X[u]) ** 2).sum())
    ratio = np.full(ids.size, np.inf)
    cur = np.arange(ids.size)
    active = cur != c
    while active.any():
        cur_a = cur[active]
        nxt = pred[cur_a]
        who = np.flatnonzero(active)
        t = L[who] - L[nxt]
        r = np.where(t > 0, delta[nxt] / np.where(t > 0, t, 1.0), np.inf)
        ratio[who] = np.minimum(ratio[who], r)
        cur[who] = nxt
        active = cur != c
    return JohnTree(c, pred, L, delta, ratio)


def _grid_pick(value: float, c_grid: Sequence[float]) -> Tuple[bool, float]:
    ok = [c for c in c_grid if c <= value + 1e-12]
    return (bool(ok), float(max(ok)) if ok else 0.0)


def john_check(space: PointCloudSpace, center: int, c_grid: Sequence[float] = C_GRID,
               weighting: str = "quasihyperbolic") -> Tuple[bool, float]:
    """Largest grid constant c with delta(gamma(t)) >= c t along every tree path."""
    tree = john_tree(space, center, weighting)
    return _grid_pick(float(tree.ratio.min()), c_grid)


def uniform_check(space: PointCloudSpace, pair_sample: Sequence[Tuple[int, int]],
                  c_grid: Sequence[float] = C_GRID,
                  weighting: str = "quasihyperbolic") -> Tuple[bool, float]:
    """Largest grid constant passing the length and cigar conditions on all pairs.

    For a pair (x, y) joined by the graph path of Euclidean length l, the pair
    constant is min(d(x,y)/l, min_v delta(v)/min(t_v, l - t_v)).
    """
    pairs = [(int(a), int(b)) for a, b in pair_sample if int(a) != int(b)]
    if not pairs:
        return True, float(max(c_grid))
    for a, b in pairs:
        if space.is_boundary[a] or space.is_boundary[b]:
            raise ValueError("uniform pairs must be interior points")
    ids = space.region_indices(Region.INTERIOR)
    G, delta = _interior_graph(space, weighting)
    X = space.coords[ids]
    worst = np.inf
    by_src: Dict[int, List[int]] = {}
    for a, b in pairs:
        by_src.setdefault(space.position(a), []).append(space.position(b))
    for src, dsts in sorted(by_src.items()):
        _, pred = dijkstra(G, directed=False, indices=src, return_predecessors=True)
        for dst in dsts:
            path = [dst]
            while path[-1] != src:
                path.append(int(pred[path[-1]]))
            P = X[np.asarray(path)]
            seg = np.sqrt(((np.diff(P, axis=0)) ** 2).sum(axis=1))
            t = np.concatenate([[0.0], np.cumsum(seg)])
            l = t[-1]
            d = math.sqrt(((X[src] - X[dst]) ** 2).sum())
            m = np.minimum(t, l - t)
            inner = m > 0
            cigar = np.min(delta[np.asarray(path)][inner] / m[inner]) if inner.any() else np.inf
            worst = min(worst, d / l, cigar)
    return _grid_pick(float(worst), c_grid)


# ---------------------------------------------------------------------------
# chains of balls
# ---------------------------------------------------------------------------

@dataclass
class ChainBall:
    index: int
    center: np.ndarray
    radius: float
    t: float
    anchor: int    # boundary endpoint whose curve carries the ball


@dataclass
class Chain:
    balls: List[ChainBall]
    endpoints: Tuple[int, int]
    john_constant: float
    dilation: float

    @property
    def alpha(self) -> float:
        return 2.0 - self.john_constant / (2.0 * self.dilation)

    @property
    def beta(self) -> float:
        c, lam = self.john_constant, self.dilation
        return c / (2.0 * lam * (self.alpha + 2.0 / c))


def _boundary_curve(space, tree: JohnTree, z: int):
    """Polyline from boundary point z into the tree and on to its center."""
    ids = space.region_indices(Region.INTERIOR)
    _, j = space.tree(Region.INTERIOR).query(space.coords[z])
    path = tree.path(int(j))
    P = np.vstack([space.coords[z][None, :], space.coords[ids[path]]])
    s = np.concatenate([[0.0], np.cumsum(np.sqrt((np.diff(P, axis=0) ** 2).sum(axis=1)))])
    return P, s


def _point_at(P, s, t):
    k = int(np.clip(np.searchsorted(s, t, side="right") - 1, 0, len(s) - 2))
    seg = s[k + 1] - s[k]
    f = 0.0 if seg == 0 else (t - s[k]) / seg
    return P[k] + f * (P[k + 1] - P[k])


def build_chain(space: PointCloudSpace, z: int, y: int, c_J: float, lam: float = 1.0,
                center: Optional[int] = None, tree: Optional[JohnTree] = None) -> Chain:
    """Chain of balls joining boundary points z and y through John curves.

    Ball k >= 1 sits at gamma_z(t_k) with t_k = d(y,z)(1 - c_J/2lam)^k and
    radius r_k = (c_J/2lam) t_k; ball -k is the same construction on the
    curve of y; ball 0 is B(z, 3 d(y,z)).  Balls whose parameter exceeds the
    curve length are skipped and the chain stops once r_k < 2x spacing.
    """
    if z == y:
        raise ValueError("endpoints must differ")
    if not (space.is_boundary[z] and space.is_boundary[y]):
        raise ValueError("endpoints must be boundary points")
    if not (0 < c_J <= 1) or lam < 1:
        raise ValueError("need 0 < c_J <= 1 and lambda >= 1")
    if tree is None:
        if center is None:
            ids = space.region_indices(Region.INTERIOR)
            center = int(ids[np.argmax(space.boundary_distance())])
        tree = john_tree(space, center)
    d_zy = float(space.distances([z], [y])[0, 0])
    q = c_J / (2.0 * lam)
    balls = [ChainBall(0, space.coords[z].copy(), 3.0 * d_zy, 0.0, z)]
    r_floor = 2.0 * space.spacing
    for sign, end in ((1, z), (-1, y)):
        P, s = _boundary_curve(space, tree, end)
        k = 1
        while True:
            t = d_zy * (1.0 - q) ** k
            r = q * t
            if r < r_floor:
                break
            if t <= s[-1]:
                c = _point_at(P, s, t)
                dc = float(space.tree(Region.BOUNDARY).query(c)[0])
                if dc < c_J * t * (1 - 1e-12):
                    raise ValueError("no admissible curve at this resolution")
                balls.append(ChainBall(sign * k, c, r, t, end))
            k += 1
    balls.sort(key=lambda b: b.index)
    return Chain(balls, (int(z), int(y)), float(c_J), float(lam))


def verify_chain(space: PointCloudSpace, chain: Chain) -> Dict[str, float]:
    """Worst violations of the chain invariants (all must be <= 0)."""
    ids = space.region_indices(Region.INTERIOR)
    X = space.coords[ids]
    delta = space.boundary_distance()
    a, lam, c, beta = chain.alpha, chain.dilation, chain.john_constant, chain.beta
    z, y = chain.endpoints
    d_zy = float(space.distances([z], [y])[0, 0])
    out = dict(containment=-np.inf, sandwich=-np.inf, carrot=-np.inf)
    by_index = {b.index: b for b in chain.balls}
    for b in chain.balls:
        if b.index == 0:
            continue
        prev = by_index.get(b.index - 1 if b.index > 0 else b.index + 1)
        if prev is None:
            # first ball that fits on the curve; the chain continues from B_0
            prev = by_index[0]
        mem = space.neighborhoods(b.center[None, :], b.radius, Region.INTERIOR).indices
        if mem.size:
            dd = np.sqrt(((X[mem] - prev.center) ** 2).sum(axis=1))
            out["containment"] = max(out["containment"], float((dd - a * prev.radius).max()))
        infl = space.neighborhoods(b.center[None, :], a * lam * b.radius, Region.INTERIOR).indices
        if infl.size == 0:
            continue
        anchor = space.coords[b.anchor]
        other = d_zy
        dx = np.sqrt(((X[infl] - anchor) ** 2).sum(axis=1))
        lo = dx / (lam * (a + 2.0 / c)) - b.radius
        hi = b.radius - 2.0 * dx / c
        out["sandwich"] = max(out["sandwich"], float(lo.max()), float(hi.max()))
        carrot_lo = beta * dx - delta[infl]
        carrot_hi = delta[infl] - 2.0 * other
        out["carrot"] = max(out["carrot"], float(carrot_lo.max()), float(carrot_hi.max()))
    return {k: (v if np.isfinite(v) else 0.0) for k, v in out.items()}

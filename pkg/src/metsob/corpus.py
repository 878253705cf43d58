"""Seeded random field corpora.

Fields cycle through five families so that a corpus mixes smooth, Hölder,
Lipschitz, discontinuous and rough samples.  Field i of a corpus depends
only on (seed, i), so corpora are reproducible and prefix-stable.
"""
from __future__ import annotations

import json
from typing import List, Optional, Sequence

import numpy as np

from .space import PointCloudSpace, Region, ScalarField, load_field, save_field

__all__ = ["FAMILIES", "LIPSCHITZ_FAMILIES", "random_field", "random_corpus",
           "save_corpus", "load_corpus"]

FAMILIES = ("trig", "holder", "tent", "step", "noise")
LIPSCHITZ_FAMILIES = ("trig", "tent")


def _unit(rng, dim):
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_field(space: PointCloudSpace, region, seed: int, index: int,
                 family: Optional[str] = None) -> ScalarField:
    region = Region.parse(region)
    X = space.region_coords(region)
    rng = np.random.default_rng([seed, index])
    fam = FAMILIES[index % len(FAMILIES)] if family is None else family
    lo, hi = X.min(axis=0), X.max(axis=0)
    scale = float(np.max(hi - lo))
    x0 = X[rng.integers(X.shape[0])]
    if fam == "trig":
        v = np.zeros(X.shape[0])
        for k in range(1, 4):
            w = _unit(rng, X.shape[1]) * (2 * np.pi * k / scale)
            v += rng.normal() / k * np.sin(X @ w + rng.uniform(0, 2 * np.pi))
    elif fam == "holder":
        beta = rng.uniform(0.2, 0.9)
        v = (np.sqrt(((X - x0) ** 2).sum(axis=1)) / scale) ** beta
    elif fam == "tent":
        r = rng.uniform(0.2, 0.6) * scale
        v = np.maximum(0.0, 1.0 - np.sqrt(((X - x0) ** 2).sum(axis=1)) / r) * rng.uniform(0.5, 2.0)
    elif fam == "step":
        w = _unit(rng, X.shape[1])
        proj = X @ w
        cut = np.quantile(proj, rng.uniform(0.2, 0.8))
        v = np.where(proj > cut, 1.0, -0.5) * rng.uniform(0.5, 2.0)
    elif fam == "noise":
        v = rng.normal(size=X.shape[0])
    else:
        raise ValueError(f"unknown family {fam!r}")
    v = v + rng.normal() * 0.1
    return ScalarField(region, v)


def random_corpus(space: PointCloudSpace, region, count: int, seed: int = 0,
                  families: Optional[Sequence[str]] = None) -> List[ScalarField]:
    if count <= 0:
        raise ValueError("empty corpus")
    if families is None:
        return [random_field(space, region, seed, i) for i in range(count)]
    return [random_field(space, region, seed, i, families[i % len(families)]) for i in range(count)]


def save_corpus(space: PointCloudSpace, fields: Sequence[ScalarField], directory, seed: int) -> str:
    """Write one field file per item plus a JSON manifest; returns its path."""
    import os
    os.makedirs(directory, exist_ok=True)
    names = []
    for i, f in enumerate(fields):
        name = f"field_{i:04d}.fld"
        save_field(space, f, os.path.join(directory, name))
        names.append(name)
    path = os.path.join(directory, "manifest.json")
    with open(path, "w") as fh:
        json.dump(dict(schema=1, seed=int(seed), fields=names), fh, indent=1, sort_keys=True)
    return path


def load_corpus(space: PointCloudSpace, manifest) -> List[ScalarField]:
    import os
    with open(manifest) as fh:
        m = json.load(fh)
    base = os.path.dirname(os.path.abspath(manifest))
    return [load_field(space, os.path.join(base, n)) for n in m["fields"]]

"""Seeded synthetic geo-textual datasets."""
from __future__ import annotations

import numpy as np

from .geo import Dataset, GeoObject, Point

UNIFORM = "uniform"
GAUSSIAN = "gaussian"


def keyword_names(n: int) -> list:
    width = len(str(n - 1))
    return [f"kw{i:0{width}d}" for i in range(n)]


def generate(n: int, n_keywords: int, distribution: str = UNIFORM, seed: int = 0,
             extent: float = 1000.0, max_keywords: int = 3, zipf_s: float = 1.0,
             sigma: float = 0.15) -> Dataset:
    """``n`` objects in ``[0, extent]^2`` carrying 1..``max_keywords`` keywords.

    Keyword popularity follows a Zipf law with exponent ``zipf_s``.  Gaussian
    coordinates have standard deviation ``sigma * extent`` around the center
    and are clipped to the square.
    """
    if n < 1 or n_keywords < 1:
        raise ValueError("need n >= 1 and n_keywords >= 1")
    rng = np.random.default_rng(seed)
    if distribution == UNIFORM:
        xy = rng.uniform(0.0, extent, size=(n, 2))
    elif distribution == GAUSSIAN:
        xy = np.clip(rng.normal(extent / 2, sigma * extent, size=(n, 2)), 0.0, extent)
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    names = keyword_names(n_keywords)
    weights = 1.0 / np.arange(1, n_keywords + 1) ** zipf_s
    weights /= weights.sum()
    top = min(max_keywords, n_keywords)
    counts = rng.integers(1, top + 1, size=n)
    # Gumbel top-k: weighted sampling without replacement, one row per object
    scores = np.log(weights) + rng.gumbel(size=(n, n_keywords))
    picks = np.argsort(-scores, axis=1)[:, :top]
    width = len(str(n - 1))
    objects = []
    for i in range(n):
        objects.append(GeoObject(f"o{i:0{width}d}", Point(float(xy[i, 0]), float(xy[i, 1])),
                                 frozenset(names[j] for j in picks[i, :counts[i]])))
    return Dataset.from_objects(objects)

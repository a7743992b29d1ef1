"""Weight generators, random lattices and random verification instances.

Reproducibility contract: every randomized routine takes an explicit
numpy Generator; experiment drivers derive the trial-k generator as
``trial_rng(master_seed, k)``, a counter-based split, so any trial replays
in isolation.
"""

from __future__ import annotations

import numpy as np

from .dyadic import (CarlesonSeq, DistFn, Lattice, Weight, a2_constant,
                     bump_constant, compute_loads)
from .gauge import BumpGauge

__all__ = [
    "trial_rng",
    "generate_weights",
    "constant_weight",
    "lognormal_weight",
    "power_weight",
    "a2_extremal_pair",
    "explicit_weight",
    "random_lattice",
    "random_carleson",
    "random_dist",
    "random_dist_pair",
    "random_multi_instance",
]


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial, derived without running others."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial,)))


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def constant_weight(lattice: Lattice, value: float = 1.0) -> Weight:
    if value < 0:
        raise ValueError("constant weights must be nonnegative")
    return Weight(lattice, np.full(lattice.n_leaves, float(value)))


def lognormal_weight(lattice: Lattice, rng: np.random.Generator,
                     sigma: float = 1.0, mu: float = 0.0) -> Weight:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    return Weight(lattice, np.exp(mu + sigma * rng.normal(size=lattice.n_leaves)))


def _leaf_intervals(lattice: Lattice) -> tuple[np.ndarray, np.ndarray]:
    # leaves tile [0, 1) proportionally to their masses
    edges = np.concatenate([[0.0], np.cumsum(lattice.leaf_mass)]) / lattice.mass[0]
    return edges[:-1], edges[1:]


def power_weight(lattice: Lattice, exponent: float) -> Weight:
    """Leaf averages of x^a on [0, 1); needs a > -1 for integrability."""
    if exponent <= -1.0:
        raise ValueError("power exponent must exceed -1")
    lo, hi = _leaf_intervals(lattice)
    p = exponent + 1.0
    vals = (hi ** p - lo ** p) / (p * (hi - lo))
    return Weight(lattice, vals)


def a2_extremal_pair(lattice: Lattice, exponent: float):
    """(v, w) = leaf-averaged (x^a, x^-a); the bump constant blows up as a -> 1.

    Returns (v, w, info) with the A2 and product-bump diagnostics a caller
    reports alongside the pair.
    """
    if not 0.0 <= exponent < 1.0:
        raise ValueError("extremal-pair exponent must lie in [0, 1)")
    v = power_weight(lattice, exponent)
    w = power_weight(lattice, -exponent)
    a2, a2_cell = a2_constant(v, w)
    info = {"a2_constant": a2, "a2_argmax": a2_cell}
    return v, w, info


def explicit_weight(lattice: Lattice, values) -> Weight:
    return Weight(lattice, np.asarray(values, dtype=float))


def generate_weights(spec: dict, lattice: Lattice,
                     rng: np.random.Generator | None = None):
    """Build a weight (or an extremal pair) from the config wire format.

    {"kind": "constant"|"lognormal"|"power"|"a2-extremal-pair"|"explicit",
     params..., "seed": int}; the seed key overrides the passed generator.
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"weight spec must be a dict with a 'kind', got {spec!r}")
    kind = spec["kind"]
    if "seed" in spec:
        rng = np.random.default_rng(int(spec["seed"]))
    if kind == "constant":
        return constant_weight(lattice, float(spec.get("value", 1.0)))
    if kind == "lognormal":
        if rng is None:
            raise ValueError("lognormal weights need a seed")
        return lognormal_weight(lattice, rng, float(spec.get("sigma", 1.0)),
                                float(spec.get("mu", 0.0)))
    if kind == "power":
        return power_weight(lattice, float(spec.get("a", 0.0)))
    if kind == "a2-extremal-pair":
        return a2_extremal_pair(lattice, float(spec.get("a", 0.5)))
    if kind == "explicit":
        return explicit_weight(lattice, spec["values"])
    raise ValueError(f"unknown weight kind {kind!r}")


# ---------------------------------------------------------------------------
# lattices and Carleson sequences
# ---------------------------------------------------------------------------

def random_lattice(depth: int, rng: np.random.Generator, max_branching: int = 4,
                   root_mass: float = 1.0, uneven: bool = True) -> Lattice:
    """Random leveled tree: branching 2..max per cell, Dirichlet-ish masses."""
    def grow(mass, d):
        if d == depth:
            return (mass, None)
        b = int(rng.integers(2, max_branching + 1))
        parts = rng.uniform(0.3, 1.0, size=b) if uneven else np.ones(b)
        parts = parts / parts.sum() * mass
        parts[-1] = mass - parts[:-1].sum()  # exact additivity
        return (mass, [grow(p, d + 1) for p in parts])

    return Lattice.from_nested(grow(root_mass, 0))


def random_carleson(lattice: Lattice, rng: np.random.Generator,
                    density: float = 1.0) -> CarlesonSeq:
    """Random coefficients rescaled so the maximal load is exactly 1."""
    a = rng.uniform(0.0, 1.0, lattice.n_cells)
    if density < 1.0:
        a *= rng.random(lattice.n_cells) < density
    peak = compute_loads(lattice, a).max()
    if peak > 0:
        a /= peak
    return CarlesonSeq(lattice, a)


# ---------------------------------------------------------------------------
# random distribution functions and Bellman instances
# ---------------------------------------------------------------------------

def random_dist(rng: np.random.Generator, max_breaks: int = 6,
                v_min: float = 1e-3, t_scale: float = 1.0,
                end: float | None = None) -> DistFn:
    """Random decreasing step function with heights in [v_min, 1].

    Passing `end` pins the final breakpoint, which keeps families of
    distributions on a common support (useful for derivative oracles).
    """
    k = int(rng.integers(1, max_breaks + 1))
    if end is None:
        ts = np.unique(np.sort(rng.uniform(0.0, t_scale, size=k)) + t_scale * 0.01)
    else:
        inner = np.unique(rng.uniform(0.02 * end, 0.98 * end, size=k - 1))
        ts = np.concatenate([inner, [end]])
    vs = np.sort(rng.uniform(v_min, 1.0, size=len(ts)))[::-1]
    # enforce strict decrease under rare ties
    vs = np.minimum.accumulate(vs - np.arange(len(vs)) * 1e-12)
    keep = vs > 0
    return DistFn(ts[keep], vs[keep])


def random_dist_pair(rng: np.random.Generator, max_breaks: int = 6,
                     v_min: float = 1e-3, common_end: bool = False):
    """Two independent step functions, optionally sharing the support end."""
    if common_end:
        end = float(rng.uniform(0.5, 1.5))
        return (random_dist(rng, max_breaks, v_min, end=end),
                random_dist(rng, max_breaks, v_min, end=end))
    return (random_dist(rng, max_breaks, v_min, t_scale=float(rng.uniform(0.5, 1.5))),
            random_dist(rng, max_breaks, v_min, t_scale=float(rng.uniform(0.5, 1.5))))


def random_multi_instance(rng: np.random.Generator, n_max: int = 16,
                          max_breaks: int = 4, v_min: float = 1e-3):
    """(alphas, fs, dists) for the multi-point checkers, weights summing to 1."""
    n = int(rng.integers(2, n_max + 1))
    alphas = rng.uniform(0.05, 1.0, size=n)
    alphas /= alphas.sum()
    fs = rng.normal(scale=2.0, size=n)
    dists = [random_dist(rng, max_breaks, v_min) for _ in range(n)]
    return alphas, fs, dists

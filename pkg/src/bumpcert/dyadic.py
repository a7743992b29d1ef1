"""Finite martingale lattices, weights and distribution functionals.

A lattice is a leveled rooted tree: every level is a partition of the root
cell, children masses add up to the parent mass, leaves all sit at the
bottom level.  Cells are integer ids in breadth-first order, so the
descendants of a cell at any fixed depth form a contiguous id range and all
per-cell quantities vectorize level by level.

Weights are leaf-level step functions; distribution functions are stored as
exact breakpoint lists, so every integral functional below is a finite sum
(up to gauge evaluation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .gauge import BumpGauge, YoungFunction, orlicz_norm

__all__ = [
    "Lattice",
    "Weight",
    "DistFn",
    "CellDists",
    "CarlesonSeq",
    "compute_loads",
    "average",
    "apply_E",
    "apply_Delta",
    "apply_Delta_n",
    "dist_fn",
    "all_dist_fns",
    "n_psi",
    "bump_constant",
    "a2_constant",
    "orlicz_bump_constant",
    "carleson_load",
]

_MASS_RTOL = 1e-15


class Lattice:
    """Leveled tree of cells with positive masses.

    Use the constructors `binary`, `uniform` or `from_nested`; the raw
    __init__ consumes per-cell arrays produced by them.
    """

    def __init__(self, depth, level_off, parent, child_start, child_count, mass):
        self.depth = int(depth)
        self.level_off = np.asarray(level_off, dtype=np.int64)
        self.parent = np.asarray(parent, dtype=np.int64)
        self.child_start = np.asarray(child_start, dtype=np.int64)
        self.child_count = np.asarray(child_count, dtype=np.int64)
        self.mass = np.asarray(mass, dtype=float)
        self.n_cells = len(self.mass)
        self._index()
        self._validate()

    # ---- construction -------------------------------------------------
    @classmethod
    def binary(cls, depth: int, root_mass: float = 1.0) -> "Lattice":
        return cls.uniform(depth, 2, root_mass)

    @classmethod
    def uniform(cls, depth: int, branching: int, root_mass: float = 1.0) -> "Lattice":
        if depth < 0 or branching < 1:
            raise ValueError("need depth >= 0 and branching >= 1")
        counts = [branching ** d for d in range(depth + 1)]
        level_off = np.concatenate([[0], np.cumsum(counts)])
        n = level_off[-1]
        parent = np.full(n, -1, dtype=np.int64)
        child_start = np.zeros(n, dtype=np.int64)
        child_count = np.zeros(n, dtype=np.int64)
        mass = np.empty(n, dtype=float)
        for d in range(depth + 1):
            lo, hi = level_off[d], level_off[d + 1]
            mass[lo:hi] = root_mass / counts[d]
            if d < depth:
                ids = np.arange(lo, hi)
                child_start[lo:hi] = level_off[d + 1] + (ids - lo) * branching
                child_count[lo:hi] = branching
            if d > 0:
                ids = np.arange(lo, hi)
                parent[lo:hi] = level_off[d - 1] + (ids - lo) // branching
        return cls(depth, level_off, parent, child_start, child_count, mass)

    @classmethod
    def from_nested(cls, tree) -> "Lattice":
        """Build from nested (mass, children) tuples; a leaf is a bare mass
        or (mass, None).

        All leaves must sit at the same depth and children masses must add
        up to the parent mass.
        """
        def unpack(node):
            if isinstance(node, (int, float)):
                return float(node), None
            m, kids = node
            return float(m), (list(kids) if kids else None)

        levels = []          # per level: list of (mass, kids, parent_id)
        current = [(tree, -1)]
        while current:
            parsed = [(*unpack(node), par) for node, par in current]
            has_kids = [kids is not None for _, kids, _ in parsed]
            if any(has_kids) and not all(has_kids):
                raise ValueError("all leaves must sit at the same depth")
            levels.append(parsed)
            if not any(has_kids):
                break
            base = sum(len(lv) for lv in levels[:-1])
            current = [(k, base + pos)
                       for pos, (_, kids, _) in enumerate(parsed) for k in kids]

        depth = len(levels) - 1
        level_off = np.concatenate([[0], np.cumsum([len(lv) for lv in levels])])
        n = level_off[-1]
        parent = np.full(n, -1, dtype=np.int64)
        child_start = np.zeros(n, dtype=np.int64)
        child_count = np.zeros(n, dtype=np.int64)
        mass = np.empty(n, dtype=float)
        idx = 0
        for d, parsed in enumerate(levels):
            run = level_off[d + 1]
            for m, kids, par in parsed:
                mass[idx] = m
                parent[idx] = par
                if kids:
                    child_start[idx] = run
                    child_count[idx] = len(kids)
                    run += len(kids)
                idx += 1
        return cls(depth, level_off, parent, child_start, child_count, mass)

    # ---- indexing helpers ----------------------------------------------
    def _index(self):
        D = self.depth
        self.n_leaves = int(self.level_off[D + 1] - self.level_off[D])
        self.leaf_level_start = int(self.level_off[D])
        # leaf span per cell, bottom-up
        self.leaf_lo = np.zeros(self.n_cells, dtype=np.int64)
        self.leaf_hi = np.zeros(self.n_cells, dtype=np.int64)
        lo, hi = self.level_off[D], self.level_off[D + 1]
        self.leaf_lo[lo:hi] = np.arange(self.n_leaves)
        self.leaf_hi[lo:hi] = np.arange(self.n_leaves) + 1
        for d in range(D - 1, -1, -1):
            for i in range(self.level_off[d], self.level_off[d + 1]):
                cs, cc = self.child_start[i], self.child_count[i]
                self.leaf_lo[i] = self.leaf_lo[cs]
                self.leaf_hi[i] = self.leaf_hi[cs + cc - 1]
        self.leaf_mass = self.mass[self.level_off[D]:self.level_off[D + 1]]
        # ancestor id of each leaf at every depth
        self.leaf_ancestor = np.empty((D + 1, self.n_leaves), dtype=np.int64)
        for d in range(D + 1):
            ids = np.arange(self.level_off[d], self.level_off[d + 1])
            self.leaf_ancestor[d] = np.repeat(ids, self.leaf_hi[ids] - self.leaf_lo[ids])

    def _validate(self):
        if np.any(self.mass <= 0):
            raise ValueError("cell masses must be positive")
        for d in range(self.depth):
            ids = np.arange(self.level_off[d], self.level_off[d + 1])
            child_sum = np.array([
                self.mass[self.child_start[i]:self.child_start[i] + self.child_count[i]].sum()
                for i in ids])
            if np.any(np.abs(child_sum - self.mass[ids]) > _MASS_RTOL * self.mass[ids] * 4):
                raise ValueError("children masses must add up to the parent mass")

    # ---- navigation ----------------------------------------------------
    def cells_at_depth(self, d: int) -> np.ndarray:
        return np.arange(self.level_off[d], self.level_off[d + 1])

    def depth_of(self, i: int) -> int:
        return int(np.searchsorted(self.level_off, i, side="right") - 1)

    def children(self, i: int) -> np.ndarray:
        return np.arange(self.child_start[i], self.child_start[i] + self.child_count[i])

    def descendants(self, i: int, n: int) -> np.ndarray:
        """ch_n(i): ids of order-n children (contiguous at depth(i)+n)."""
        d = self.depth_of(i) + n
        if d > self.depth:
            raise ValueError(f"cell at depth {d - n} has no order-{n} children "
                             f"(lattice depth {self.depth})")
        lo, hi = self.level_off[d], self.level_off[d + 1]
        level_lo = self.leaf_lo[lo:hi]
        j0 = lo + np.searchsorted(level_lo, self.leaf_lo[i], side="left")
        j1 = lo + np.searchsorted(level_lo, self.leaf_hi[i], side="left")
        return np.arange(j0, j1)

    def subtree(self, i: int) -> np.ndarray:
        """All cells contained in cell i (including i), any depth."""
        out = [np.array([i])]
        d0 = self.depth_of(i)
        for n in range(1, self.depth - d0 + 1):
            out.append(self.descendants(i, n))
        return np.concatenate(out)

    def path(self, i: int) -> str:
        digits = []
        while self.parent[i] >= 0:
            p = self.parent[i]
            digits.append(int(i - self.child_start[p]))
            i = p
        if any(d > 9 for d in digits):
            raise ValueError("digit-string paths need branching <= 10")
        return "".join(str(d) for d in reversed(digits))

    def cell_at(self, path: str) -> int:
        i = 0
        for ch in path:
            j = int(ch)
            if j >= self.child_count[i]:
                raise ValueError(f"path {path!r} leaves the lattice")
            i = int(self.child_start[i]) + j
        return i

    # ---- vectorized integrals -------------------------------------------
    def cell_integrals(self, leaf_values: np.ndarray) -> np.ndarray:
        """int_I v dmu for every cell, via one cumulative sum."""
        cs = np.concatenate([[0.0], np.cumsum(leaf_values * self.leaf_mass)])
        return cs[self.leaf_hi] - cs[self.leaf_lo]

    def cell_averages(self, leaf_values: np.ndarray) -> np.ndarray:
        return self.cell_integrals(leaf_values) / self.mass

    def __repr__(self):
        return (f"<Lattice depth={self.depth} cells={self.n_cells} "
                f"leaves={self.n_leaves} root_mass={self.mass[0]:g}>")


@dataclass(frozen=True)
class Weight:
    """Nonnegative leaf-level step function on a lattice."""

    lattice: Lattice
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.lattice.n_leaves,):
            raise ValueError(f"weight needs {self.lattice.n_leaves} leaf values, "
                             f"got shape {v.shape}")
        if np.any(v < 0):
            raise ValueError("weights are nonnegative")
        object.__setattr__(self, "values", v)

    def scaled(self, factor: float) -> "Weight":
        return Weight(self.lattice, self.values * factor)

    def average(self, i: int = 0) -> float:
        return average(self, i)


def average(w: Weight, i: int) -> float:
    """<w>_I, the mass-weighted average over cell i."""
    lat = w.lattice
    lo, hi = lat.leaf_lo[i], lat.leaf_hi[i]
    return float(np.dot(w.values[lo:hi], lat.leaf_mass[lo:hi]) / lat.mass[i])


def apply_E(lattice: Lattice, f: np.ndarray, i: int) -> np.ndarray:
    """E_I f = <f>_I 1_I as a leaf vector."""
    out = np.zeros(lattice.n_leaves)
    lo, hi = lattice.leaf_lo[i], lattice.leaf_hi[i]
    out[lo:hi] = np.dot(f[lo:hi], lattice.leaf_mass[lo:hi]) / lattice.mass[i]
    return out


def apply_Delta_n(lattice: Lattice, f: np.ndarray, i: int, n: int) -> np.ndarray:
    """Order-n martingale difference: -E_I f + sum over ch_n(I) of E_J f."""
    if n < 1:
        raise ValueError("difference order must be >= 1")
    kids = lattice.descendants(i, n)  # raises on depth overflow
    out = np.zeros(lattice.n_leaves)
    lo, hi = lattice.leaf_lo[i], lattice.leaf_hi[i]
    avg_i = np.dot(f[lo:hi], lattice.leaf_mass[lo:hi]) / lattice.mass[i]
    for j in kids:
        jl, jh = lattice.leaf_lo[j], lattice.leaf_hi[j]
        out[jl:jh] = np.dot(f[jl:jh], lattice.leaf_mass[jl:jh]) / lattice.mass[j] - avg_i
    return out


def apply_Delta(lattice: Lattice, f: np.ndarray, i: int) -> np.ndarray:
    return apply_Delta_n(lattice, f, i, 1)


# ---------------------------------------------------------------------------
# distribution functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistFn:
    """Decreasing step function N on [0, inf), compactly supported.

    N(t) = vs[j] on [ts[j-1], ts[j]) with ts[-1] the support end (ts[0-1]
    read as 0) and N = 0 beyond; heights are strictly decreasing in (0, 1].
    The zero distribution has empty arrays.
    """

    ts: np.ndarray
    vs: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        vs = np.asarray(self.vs, dtype=float)
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "vs", vs)
        if ts.shape != vs.shape or ts.ndim != 1:
            raise ValueError("breakpoints and heights must be 1-d and aligned")
        if len(ts):
            if ts[0] <= 0 or np.any(np.diff(ts) <= 0):
                raise ValueError("breakpoints must be positive and increasing")
            if vs[0] > 1.0 + 1e-12 or vs[-1] <= 0 or np.any(np.diff(vs) >= 0):
                raise ValueError("heights must decrease strictly within (0, 1]")

    @property
    def is_zero(self) -> bool:
        return len(self.ts) == 0

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """(dt, v) pairs with dt the segment lengths below each height."""
        if self.is_zero:
            return np.empty(0), np.empty(0)
        dt = np.diff(np.concatenate([[0.0], self.ts]))
        return dt, self.vs

    def integral(self) -> float:
        dt, v = self.segments()
        return float(np.dot(dt, v))

    def eval(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.is_zero:
            return np.zeros_like(t)
        idx = np.searchsorted(self.ts, t, side="right")
        padded = np.concatenate([self.vs, [0.0]])
        return padded[idx]

    def scale_weight(self, lam: float) -> "DistFn":
        """Distribution of lam * w: breakpoints scale, heights stay."""
        if lam <= 0:
            raise ValueError("scaling factor must be positive")
        return DistFn(self.ts * lam, self.vs.copy())


def _clean_steps(ts: np.ndarray, vs: np.ndarray) -> DistFn:
    """Drop zero-height tail segments and merge equal adjacent heights."""
    keep = vs > 0.0
    ts, vs = ts[keep], vs[keep]
    if len(ts) == 0:
        return DistFn(np.empty(0), np.empty(0))
    # merge runs of equal height: keep the last breakpoint of each run
    last = np.concatenate([vs[1:] != vs[:-1], [True]])
    return DistFn(ts[last], np.minimum(vs[last], 1.0))


def align(dists: Sequence[DistFn]) -> tuple[np.ndarray, np.ndarray]:
    """Common breakpoints plus each distribution's heights per segment.

    Returns (ts, V) where V[k, j] is the k-th distribution's value on
    [ts[j-1], ts[j]).
    """
    all_ts = np.unique(np.concatenate([d.ts for d in dists if len(d.ts)] or [np.empty(0)]))
    if len(all_ts) == 0:
        return np.empty(0), np.zeros((len(dists), 0))
    left = np.concatenate([[0.0], all_ts[:-1]])
    V = np.stack([d.eval(left) for d in dists])
    return all_ts, V


def mix(coeffs: Sequence[float], dists: Sequence[DistFn]) -> DistFn:
    """Convex (or nonnegative) combination of distribution functions, exact."""
    ts, V = align(dists)
    if len(ts) == 0:
        return DistFn(np.empty(0), np.empty(0))
    vs = np.asarray(coeffs, dtype=float) @ V
    return _clean_steps(ts, vs)


def dist_fn(w: Weight, i: int = 0) -> DistFn:
    """Normalized distribution function of w on cell i, exact."""
    lat = w.lattice
    lo, hi = lat.leaf_lo[i], lat.leaf_hi[i]
    return _dist_from_leaves(w.values[lo:hi], lat.leaf_mass[lo:hi], lat.mass[i])


def _dist_from_leaves(values, masses, cell_mass) -> DistFn:
    order = np.argsort(values, kind="stable")
    v = values[order]
    tail = np.cumsum(masses[order][::-1])[::-1]  # mass of {w >= v_j}
    first = np.concatenate([[True], v[1:] != v[:-1]])
    keep = first & (v > 0)
    return DistFn(v[keep], np.minimum(tail[keep] / cell_mass, 1.0))


def n_psi(dist: DistFn, gauge: BumpGauge) -> float:
    """n_Psi(N) = int N(t) Psi(N(t)) dt as an exact step sum."""
    if dist.is_zero:
        return 0.0
    dt, v = dist.segments()
    return float(np.dot(dt, gauge.phi(v)))


# ---------------------------------------------------------------------------
# all cells at once
# ---------------------------------------------------------------------------

class CellDists:
    """Distribution functions of one weight on every cell, flattened.

    Per-cell breakpoints and heights live in flat arrays indexed by
    offsets[i]:offsets[i+1]; gauge functionals evaluate vectorized over the
    whole lattice in one shot.
    """

    def __init__(self, lattice: Lattice, flat_t, flat_v, offsets):
        self.lattice = lattice
        self.flat_t = flat_t
        self.flat_v = flat_v
        self.offsets = offsets

    def dist(self, i: int) -> DistFn:
        sl = slice(self.offsets[i], self.offsets[i + 1])
        return DistFn(self.flat_t[sl].copy(), self.flat_v[sl].copy())

    def _segment_sum(self, integrand: np.ndarray) -> np.ndarray:
        cs = np.concatenate([[0.0], np.cumsum(integrand)])
        return cs[self.offsets[1:]] - cs[self.offsets[:-1]]

    def _dt(self) -> np.ndarray:
        dt = np.diff(self.flat_t, prepend=0.0)
        starts = self.offsets[:-1][np.diff(self.offsets) > 0]
        dt[starts] = self.flat_t[starts]
        return dt

    def integrals(self) -> np.ndarray:
        """<w>_I for every cell (the layer-cake identity)."""
        return self._segment_sum(self._dt() * self.flat_v)

    def n_psi_all(self, gauge: BumpGauge) -> np.ndarray:
        if len(self.flat_v) == 0:
            return np.zeros(self.lattice.n_cells)
        return self._segment_sum(self._dt() * gauge.phi(self.flat_v))

    def u_all(self, gauge: BumpGauge) -> np.ndarray:
        """u(N_I) = int (2 N - m(N)) for every cell."""
        if len(self.flat_v) == 0:
            return np.zeros(self.lattice.n_cells)
        return self._segment_sum(self._dt() * (2.0 * self.flat_v - gauge.m(self.flat_v)))


def all_dist_fns(w: Weight) -> CellDists:
    """Distribution functions on all cells, built level by level."""
    lat = w.lattice
    counts = np.zeros(lat.n_cells, dtype=np.int64)
    per_level = []
    for d in range(lat.depth + 1):
        owner = lat.leaf_ancestor[d]
        order = np.lexsort((w.values, owner))
        ov = w.values[order]
        om = lat.leaf_mass[order]
        oo = owner[order]
        # within each cell: tail mass of {w >= v} at each distinct value
        cum = np.cumsum(om)
        lo, hi = lat.level_off[d], lat.level_off[d + 1]
        ends = np.searchsorted(oo, np.arange(lo, hi), side="right")
        seg_end_cum = cum[ends - 1]  # cumulative mass at each cell's last leaf
        total_below = np.repeat(seg_end_cum, np.diff(np.concatenate([[0], ends])))
        tail = total_below - cum + om
        # tail mass at the first occurrence of each (cell, value) pair counts
        # the whole tie run, i.e. mass{w >= v}; positive values only
        first = np.concatenate([[True], (oo[1:] != oo[:-1]) | (ov[1:] != ov[:-1])])
        keep = first & (ov > 0)
        t_lvl, v_lvl, o_lvl = ov[keep], tail[keep] / lat.mass[oo[keep]], oo[keep]
        np.add.at(counts, o_lvl, 1)
        per_level.append((t_lvl, np.minimum(v_lvl, 1.0)))
    offsets = np.concatenate([[0], np.cumsum(counts)])
    flat_t = np.empty(offsets[-1])
    flat_v = np.empty(offsets[-1])
    for d, (t_lvl, v_lvl) in enumerate(per_level):
        # level-d cells form one contiguous id block, so their flat entries
        # form one contiguous slice, already grouped by cell and sorted
        start = offsets[lat.level_off[d]]
        flat_t[start:start + len(t_lvl)] = t_lvl
        flat_v[start:start + len(t_lvl)] = v_lvl
    return CellDists(lat, flat_t, flat_v, offsets)


# ---------------------------------------------------------------------------
# bump and A2 constants
# ---------------------------------------------------------------------------

def bump_constant(v: Weight, w: Weight, gauge_v: BumpGauge, gauge_w: BumpGauge):
    """sup over cells of n_{gauge_v}(N_I^v) * n_{gauge_w}(N_I^w).

    Returns (value, argmax cell id, rescale) where dividing either weight by
    `rescale` makes the recomputed constant <= 1.
    """
    if v.lattice is not w.lattice:
        raise ValueError("weights must share a lattice")
    nv = all_dist_fns(v).n_psi_all(gauge_v)
    nw = all_dist_fns(w).n_psi_all(gauge_w)
    prod = nv * nw
    i = int(np.argmax(prod))
    value = float(prod[i])
    return value, i, (value if value > 0 else 1.0)


def a2_constant(v: Weight, w: Weight):
    """sup over cells of <v>_I^(1/2) <w>_I^(1/2) (the two-weight A2 form)."""
    if v.lattice is not w.lattice:
        raise ValueError("weights must share a lattice")
    lat = v.lattice
    prod = np.sqrt(lat.cell_averages(v.values) * lat.cell_averages(w.values))
    i = int(np.argmax(prod))
    return float(prod[i]), i


def orlicz_bump_constant(v: Weight, w: Weight, phi_v: YoungFunction, phi_w: YoungFunction):
    """sup over cells of ||v||_{L^{Phi_v}(I)} ||w||_{L^{Phi_w}(I)}."""
    if v.lattice is not w.lattice:
        raise ValueError("weights must share a lattice")
    lat = v.lattice
    best, arg = -1.0, 0
    for i in range(lat.n_cells):
        lo, hi = lat.leaf_lo[i], lat.leaf_hi[i]
        pairs_v = list(zip(lat.leaf_mass[lo:hi], v.values[lo:hi]))
        pairs_w = list(zip(lat.leaf_mass[lo:hi], w.values[lo:hi]))
        val = orlicz_norm(pairs_v, phi_v) * orlicz_norm(pairs_w, phi_w)
        if val > best:
            best, arg = val, i
    return best, arg


# ---------------------------------------------------------------------------
# Carleson sequences
# ---------------------------------------------------------------------------

def compute_loads(lattice: Lattice, a: np.ndarray) -> np.ndarray:
    """Mass-weighted subtree loads M_I = mass(I)^-1 sum_{I' in I} a_{I'} mass(I'),
    by the upward recursion M_I = a_I + sum_k alpha_k M_k over children."""
    M = np.asarray(a, dtype=float).copy()
    for d in range(lattice.depth - 1, -1, -1):
        ids = lattice.cells_at_depth(d)
        starts = lattice.child_start[ids]
        stops = starts + lattice.child_count[ids]
        lo, hi = lattice.level_off[d + 1], lattice.level_off[d + 2]
        cs = np.concatenate([[0.0], np.cumsum(M[lo:hi] * lattice.mass[lo:hi])])
        M[ids] += (cs[stops - lo] - cs[starts - lo]) / lattice.mass[ids]
    return M


@dataclass
class CarlesonSeq:
    """Nonnegative per-cell coefficients with mass-weighted loads <= 1."""

    lattice: Lattice
    a: np.ndarray
    loads: np.ndarray = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.shape != (self.lattice.n_cells,):
            raise ValueError("need one coefficient per cell")
        if np.any(a < 0):
            raise ValueError("Carleson coefficients are nonnegative")
        self.a = a
        self.loads = compute_loads(self.lattice, a)
        if self.loads.max(initial=0.0) > 1.0 + 1e-12:
            raise ValueError(
                f"Carleson normalization violated: max load {self.loads.max():.6g} > 1")


def carleson_load(seq: CarlesonSeq, i: int) -> float:
    """M_I for cell i (precomputed by the recursion)."""
    return float(seq.loads[i])

"""Haar shifts, paraproducts, two-weight compositions and domination forms.

A shift of complexity n acts cell by cell: on each cell I deep enough to
have order-n children it applies the order-n martingale difference, an
integral operator with a piecewise-constant kernel block bounded by
1/mass(I), and the difference again (two-sided compression, so each piece is
well defined on the whole space).  A paraproduct is specified directly by
the martingale differences of its symbol, with the usual Carleson
normalization of their sup norms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyadic import CarlesonSeq, Lattice, Weight, all_dist_fns, compute_loads
from .gauge import BumpGauge

__all__ = [
    "HaarShift",
    "Paraproduct",
    "random_shift",
    "random_paraproduct",
    "decompose_complexity",
    "two_weight_norm",
    "worst_kernel",
    "DominationReport",
    "domination_form_shift",
    "domination_form_para",
    "bilinear_form",
]

_KERNEL_TOL = 1e-12


class HaarShift:
    """Sum over cells of (order-n difference) o (kernel block) o (order-n difference).

    kernels maps cell id -> (b, b) array with b = number of order-n children;
    entries are bounded by 1/mass(cell).  Cells absent from the map act as
    zero.
    """

    def __init__(self, lattice: Lattice, complexity: int, kernels: dict[int, np.ndarray]):
        if complexity < 1:
            raise ValueError("complexity must be >= 1")
        if complexity > lattice.depth:
            raise ValueError(f"complexity {complexity} exceeds lattice depth {lattice.depth}")
        self.lattice = lattice
        self.complexity = int(complexity)
        self.kernels = {}
        for i, K in kernels.items():
            i = int(i)
            if lattice.depth_of(i) + complexity > lattice.depth:
                raise ValueError(f"cell {i} too deep for complexity {complexity}")
            kids = lattice.descendants(i, complexity)
            K = np.asarray(K, dtype=float)
            if K.shape != (len(kids), len(kids)):
                raise ValueError(f"kernel block at cell {i} must be "
                                 f"{len(kids)}x{len(kids)}, got {K.shape}")
            bound = 1.0 / lattice.mass[i]
            if np.max(np.abs(K), initial=0.0) > bound * (1.0 + _KERNEL_TOL):
                raise ValueError(f"kernel bound violated at cell {i}: "
                                 f"max |entry| = {np.max(np.abs(K)):.6g} > 1/mass = {bound:.6g}")
            self.kernels[i] = K

    def eligible_cells(self) -> np.ndarray:
        lat = self.lattice
        return np.arange(lat.level_off[0], lat.level_off[lat.depth - self.complexity + 1])

    def apply(self, h: np.ndarray, transpose: bool = False) -> np.ndarray:
        """Leaf vector of (sum over cells S_I Delta_I^n) h."""
        lat = self.lattice
        h = np.asarray(h, dtype=float)
        avg = lat.cell_averages(h)
        out = np.zeros(lat.n_leaves)
        for i, K in self.kernels.items():
            kids = lat.descendants(i, self.complexity)
            g = avg[kids] - avg[i]                    # order-n difference values
            kmass = lat.mass[kids]
            kern = K.T if transpose else K
            img = kern @ (kmass * g)                  # integral operator, per child value
            img -= np.dot(kmass, img) / lat.mass[i]   # project back onto mean zero
            for val, j in zip(img, kids):
                out[lat.leaf_lo[j]:lat.leaf_hi[j]] += val
        return out

    def apply_adjoint(self, h: np.ndarray) -> np.ndarray:
        """Adjoint in L2(mass); its kernel blocks are the transposes."""
        return self.apply(h, transpose=True)

    def transpose(self) -> "HaarShift":
        return HaarShift(self.lattice, self.complexity,
                         {i: K.T.copy() for i, K in self.kernels.items()})

    def assemble(self) -> np.ndarray:
        """Dense leaf matrix, built blockwise (independent of `apply`)."""
        lat = self.lattice
        L = lat.n_leaves
        out = np.zeros((L, L))
        for i, K in self.kernels.items():
            kids = lat.descendants(i, self.complexity)
            b = len(kids)
            kmass = lat.mass[kids]
            # averaging matrix child-values <- leaves and its indicator right inverse
            P = np.zeros((b, L))
            E = np.zeros((L, b))
            for r, j in enumerate(kids):
                lo, hi = lat.leaf_lo[j], lat.leaf_hi[j]
                P[r, lo:hi] = lat.leaf_mass[lo:hi] / lat.mass[j]
                E[lo:hi, r] = 1.0
            # order-n difference in child coordinates: subtract the I-average
            D = np.eye(b) - np.outer(np.ones(b), kmass) / lat.mass[i]
            block = D @ K @ np.diag(kmass) @ D @ P
            out += E @ block
        return out

    def to_json(self) -> dict:
        return {
            "complexity": self.complexity,
            "kernels": {self.lattice.path(i): K.ravel().tolist()
                        for i, K in self.kernels.items()},
        }

    @classmethod
    def from_json(cls, lattice: Lattice, spec: dict) -> "HaarShift":
        n = int(spec["complexity"])
        kernels = {}
        for path, flat in spec["kernels"].items():
            i = lattice.cell_at(path)
            b = len(lattice.descendants(i, n))
            kernels[i] = np.asarray(flat, dtype=float).reshape(b, b)
        return cls(lattice, n, kernels)

    def __repr__(self):
        return (f"<HaarShift complexity={self.complexity} "
                f"blocks={len(self.kernels)} on {self.lattice!r}>")


def random_shift(lattice: Lattice, complexity: int, rng: np.random.Generator,
                 fill: float = 1.0) -> HaarShift:
    """Admissible shift with kernel entries uniform in [-1/mass, 1/mass]."""
    kernels = {}
    for i in range(int(lattice.level_off[lattice.depth - complexity + 1])):
        if fill < 1.0 and rng.random() > fill:
            continue
        b = len(lattice.descendants(i, complexity))
        bound = 1.0 / lattice.mass[i]
        kernels[i] = rng.uniform(-bound, bound, size=(b, b))
    return HaarShift(lattice, complexity, kernels)


def decompose_complexity(shift: HaarShift) -> list[HaarShift]:
    """Split a complexity-n shift into n pieces along depth classes mod n.

    Piece k keeps the kernel blocks of cells at depths k, k+n, k+2n, ...;
    on the coarsened lattice made of those levels it is a shift of
    complexity 1 (its difference subspaces are mutually orthogonal), and the
    pieces sum back to the original operator cell by cell.
    """
    n = shift.complexity
    parts = []
    for k in range(n):
        kern = {i: K for i, K in shift.kernels.items()
                if shift.lattice.depth_of(i) % n == k}
        parts.append(HaarShift(shift.lattice, n, kern))
    return parts


def worst_kernel(f: np.ndarray, g: np.ndarray, v: Weight, w: Weight,
                 complexity: int = 1) -> HaarShift:
    """The admissible shift maximizing <S(f w^1/2), g v^1/2>.

    Block entries are mass(I)^-1 * sgn(Delta(g v^1/2) at x) * sgn(Delta(f w^1/2) at y),
    which turns the pairing into sum of mass(I)^-1 ||Delta(f w^1/2)||_1 ||Delta(g v^1/2)||_1.
    """
    lat = v.lattice
    F = np.asarray(f, dtype=float) * np.sqrt(w.values)
    G = np.asarray(g, dtype=float) * np.sqrt(v.values)
    avg_f = lat.cell_averages(F)
    avg_g = lat.cell_averages(G)
    kernels = {}
    for i in range(int(lat.level_off[lat.depth - complexity + 1])):
        kids = lat.descendants(i, complexity)
        sf = np.sign(avg_f[kids] - avg_f[i])
        sg = np.sign(avg_g[kids] - avg_g[i])
        kernels[i] = np.outer(sg, sf) / lat.mass[i]
    return HaarShift(lat, complexity, kernels)


# ---------------------------------------------------------------------------
# paraproducts
# ---------------------------------------------------------------------------

class Paraproduct:
    """Pi h = sum over cells of <h>_I * (difference block of the symbol at I).

    delta_b maps cell id -> per-child values of the symbol's martingale
    difference (mean zero against the children masses).  The derived
    coefficients a_I = ||Delta_I b||_inf^2 must form a normalized Carleson
    sequence.
    """

    def __init__(self, lattice: Lattice, delta_b: dict[int, np.ndarray]):
        self.lattice = lattice
        self.delta_b = {}
        for i, vals in delta_b.items():
            i = int(i)
            if lattice.depth_of(i) >= lattice.depth:
                raise ValueError(f"cell {i} is a leaf; symbols differ above leaf level")
            kids = lattice.children(i)
            vals = np.asarray(vals, dtype=float)
            if vals.shape != (len(kids),):
                raise ValueError(f"difference block at cell {i} needs "
                                 f"{len(kids)} child values")
            mean = float(np.dot(vals, lattice.mass[kids])) / lattice.mass[i]
            if abs(mean) > 1e-10 * max(1.0, np.max(np.abs(vals))):
                raise ValueError(f"difference block at cell {i} is not mean zero")
            self.delta_b[i] = vals
        self.carleson = CarlesonSeq(lattice, self.carleson_coeffs())

    def carleson_coeffs(self) -> np.ndarray:
        a = np.zeros(self.lattice.n_cells)
        for i, vals in self.delta_b.items():
            a[i] = float(np.max(np.abs(vals))) ** 2 if len(vals) else 0.0
        return a

    def apply(self, h: np.ndarray) -> np.ndarray:
        lat = self.lattice
        avg = lat.cell_averages(np.asarray(h, dtype=float))
        out = np.zeros(lat.n_leaves)
        for i, vals in self.delta_b.items():
            kids = lat.children(i)
            for val, j in zip(vals, kids):
                out[lat.leaf_lo[j]:lat.leaf_hi[j]] += avg[i] * val
        return out

    def apply_adjoint(self, h: np.ndarray) -> np.ndarray:
        """Pi* h = sum over cells of <(Delta_I b) h>_I * 1_I."""
        lat = self.lattice
        h = np.asarray(h, dtype=float)
        integ = lat.cell_integrals(h)
        out = np.zeros(lat.n_leaves)
        for i, vals in self.delta_b.items():
            kids = lat.children(i)
            coeff = float(np.dot(vals, integ[kids])) / lat.mass[i]
            out[lat.leaf_lo[i]:lat.leaf_hi[i]] += coeff
        return out

    def assemble(self) -> np.ndarray:
        lat = self.lattice
        L = lat.n_leaves
        out = np.zeros((L, L))
        for i, vals in self.delta_b.items():
            lo, hi = lat.leaf_lo[i], lat.leaf_hi[i]
            col = np.zeros(L)
            col[lo:hi] = lat.leaf_mass[lo:hi] / lat.mass[i]
            row = np.zeros(L)
            for val, j in zip(vals, lat.children(i)):
                row[lat.leaf_lo[j]:lat.leaf_hi[j]] = val
            out += np.outer(row, col)
        return out

    def to_json(self) -> dict:
        return {"delta_b": {self.lattice.path(i): vals.tolist()
                            for i, vals in self.delta_b.items()}}

    @classmethod
    def from_json(cls, lattice: Lattice, spec: dict) -> "Paraproduct":
        delta_b = {lattice.cell_at(p): np.asarray(v, dtype=float)
                   for p, v in spec["delta_b"].items()}
        return cls(lattice, delta_b)

    def __repr__(self):
        return f"<Paraproduct blocks={len(self.delta_b)} on {self.lattice!r}>"


def random_paraproduct(lattice: Lattice, rng: np.random.Generator,
                       saturate_root: bool = False) -> Paraproduct:
    """Random symbol differences rescaled to a normalized Carleson sequence.

    With saturate_root=True the root block is enlarged so the root load is
    exactly 1 (the root's coefficient enters no other cell's load).
    """
    raw = {}
    for i in range(int(lattice.level_off[lattice.depth])):
        kids = lattice.children(i)
        vals = rng.normal(size=len(kids))
        vals -= np.dot(vals, lattice.mass[kids]) / lattice.mass[i]
        raw[i] = vals

    def coeffs(blocks):
        a = np.zeros(lattice.n_cells)
        for i, vals in blocks.items():
            a[i] = float(np.max(np.abs(vals))) ** 2
        return a

    loads = compute_loads(lattice, coeffs(raw))
    if loads.max() > 0:
        # loads are quadratic in the symbol
        raw = {i: vals / np.sqrt(loads.max()) for i, vals in raw.items()}
    if saturate_root:
        a = coeffs(raw)
        deficit = 1.0 - float(compute_loads(lattice, a)[0])
        if deficit > 0:
            root_vals = raw[0]
            if np.max(np.abs(root_vals)) == 0:
                kids = lattice.children(0)
                root_vals = np.zeros(len(kids))
                root_vals[0] = 1.0
                root_vals -= np.dot(root_vals, lattice.mass[kids]) / lattice.mass[0]
            target = np.sqrt(a[0] + deficit)
            raw[0] = root_vals * (target / np.max(np.abs(root_vals)))
    return Paraproduct(lattice, raw)


# ---------------------------------------------------------------------------
# two-weight norms
# ---------------------------------------------------------------------------

def _compose_apply(op, v_half, w_half, lat):
    def fwd(x):
        return v_half * op.apply(w_half * x)

    def adj(x):
        return w_half * op.apply_adjoint(v_half * x)

    return fwd, adj


def two_weight_norm(op, v: Weight, w: Weight, dense_cutoff: int = 4096,
                    tol: float = 1e-6, max_iter: int = 5000, seed: int = 0) -> float:
    """Operator norm of x -> v^(1/2) op(w^(1/2) x) on L2(mass).

    Dense singular values up to `dense_cutoff` leaves; beyond that, power
    iteration on the Gram operator, certified by the Rayleigh residual
    |lam - theta| <= ||G y - theta y|| / ||y||.
    """
    lat = op.lattice
    if v.lattice is not lat or w.lattice is not lat:
        raise ValueError("operator and weights must share a lattice")
    v_half = np.sqrt(v.values)
    w_half = np.sqrt(w.values)
    if lat.n_leaves <= dense_cutoff:
        A = op.assemble()
        A = v_half[:, None] * A * w_half[None, :]
        # unitary change to Euclidean coordinates: conjugate by sqrt(mass)
        r = np.sqrt(lat.leaf_mass)
        A = r[:, None] * A / r[None, :]
        return float(np.linalg.svd(A, compute_uv=False)[0])
    fwd, adj = _compose_apply(op, v_half, w_half, lat)
    mass = lat.leaf_mass

    def gram(x):
        return adj(fwd(x))

    def mdot(a, b):
        return float(np.dot(a * mass, b))

    rng = np.random.default_rng(seed)
    y = np.ones(lat.n_leaves) + rng.uniform(-0.5, 0.5, lat.n_leaves)
    y /= np.sqrt(mdot(y, y))
    theta = 0.0
    for _ in range(max_iter):
        z = gram(y)
        theta = mdot(y, z)
        resid = z - theta * y
        if np.sqrt(max(mdot(resid, resid), 0.0)) <= 0.5 * tol * max(theta, 1e-300):
            break
        norm_z = np.sqrt(mdot(z, z))
        if norm_z == 0.0:
            return 0.0
        y = z / norm_z
    return float(np.sqrt(max(theta, 0.0)))


def bilinear_form(op, h: np.ndarray, k: np.ndarray, lattice: Lattice) -> float:
    """<op h, k> in L2(mass)."""
    return float(np.dot(op.apply(h) * lattice.leaf_mass, k))


# ---------------------------------------------------------------------------
# domination forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DominationReport:
    value: float            # the dominating sum
    embed_f: float          # square-sum on the (f, w) side
    embed_g: float          # square-sum on the (g, v) side
    t_opt: float            # optimizer of t^2 a + t^-2 b over t > 0
    split_bound: float      # sqrt(embed_f * embed_g), what the split proves
    per_cell_value: np.ndarray


def _l1_diff_norms(lat: Lattice, F: np.ndarray, order: int) -> np.ndarray:
    """||Delta_I^order F||_1 for every cell eligible at the given order."""
    avg = lat.cell_averages(F)
    top = int(lat.level_off[lat.depth - order + 1])
    out = np.zeros(lat.n_cells)
    for d in range(lat.depth - order + 1):
        ids = lat.cells_at_depth(d)
        kid_level = lat.leaf_ancestor[d + order]
        diffs = np.abs(avg[kid_level] - np.repeat(avg[ids], lat.leaf_hi[ids] - lat.leaf_lo[ids]))
        # each order-d-child contributes once; sum leaf masses within children
        contrib = diffs * lat.leaf_mass
        cs = np.concatenate([[0.0], np.cumsum(contrib)])
        out[ids] = cs[lat.leaf_hi[ids]] - cs[lat.leaf_lo[ids]]
    return out[:top]


def domination_form_shift(f, g, v: Weight, w: Weight, gauge_w: BumpGauge,
                          gauge_v: BumpGauge, complexity: int = 1) -> DominationReport:
    """sum over cells of mass^-1 ||Delta(f w^1/2)||_1 ||Delta(g v^1/2)||_1
    plus the two embedding sums it splits into under the product
    normalization n_{gauge_w}(N^w) n_{gauge_v}(N^v) <= 1.
    """
    lat = v.lattice
    F = np.asarray(f, dtype=float) * np.sqrt(w.values)
    G = np.asarray(g, dtype=float) * np.sqrt(v.values)
    df = _l1_diff_norms(lat, F, complexity)
    dg = _l1_diff_norms(lat, G, complexity)
    top = len(df)
    per_cell = df * dg / lat.mass[:top]
    nw = all_dist_fns(w).n_psi_all(gauge_w)[:top]
    nv = all_dist_fns(v).n_psi_all(gauge_v)[:top]
    live_f = nw > 0
    live_g = nv > 0
    embed_f = float(np.sum(df[live_f] ** 2 / (nw[live_f] * lat.mass[:top][live_f])))
    embed_g = float(np.sum(dg[live_g] ** 2 / (nv[live_g] * lat.mass[:top][live_g])))
    t_opt = (embed_g / embed_f) ** 0.25 if embed_f > 0 and embed_g > 0 else 1.0
    return DominationReport(float(per_cell.sum()), embed_f, embed_g, t_opt,
                            float(np.sqrt(embed_f * embed_g)), per_cell)


def domination_form_para(f, g, v: Weight, w: Weight, pp: Paraproduct,
                         gauge_w: BumpGauge, gauge_v: BumpGauge) -> DominationReport:
    """sum over cells of |<f w^1/2>_I| sqrt(a_I) ||Delta(g v^1/2)||_1 plus the
    Carleson-type and square-difference embedding sums it splits into.
    """
    lat = v.lattice
    F = np.asarray(f, dtype=float) * np.sqrt(w.values)
    G = np.asarray(g, dtype=float) * np.sqrt(v.values)
    a = pp.carleson_coeffs()
    avg_f = lat.cell_averages(F)
    dg_full = np.zeros(lat.n_cells)
    dg = _l1_diff_norms(lat, G, 1)
    dg_full[:len(dg)] = dg
    per_cell = np.abs(avg_f) * np.sqrt(a) * dg_full
    nw = all_dist_fns(w).n_psi_all(gauge_w)
    nv = all_dist_fns(v).n_psi_all(gauge_v)
    live_f = nw > 0
    live_g = nv > 0
    embed_f = float(np.sum(avg_f[live_f] ** 2 * a[live_f] * lat.mass[live_f] / nw[live_f]))
    embed_g = float(np.sum(dg_full[live_g] ** 2 / (nv[live_g] * lat.mass[live_g])))
    t_opt = (embed_g / embed_f) ** 0.25 if embed_f > 0 and embed_g > 0 else 1.0
    return DominationReport(float(per_cell.sum()), embed_f, embed_g, t_opt,
                            float(np.sqrt(embed_f * embed_g)), per_cell)

"""Embedding sums, telescoping audits and the adversarial ratio probe.

The square-difference embedding bounds

    sum over cells of ||Delta_I(f w^1/2)||_1^2 / (n_Psi(N_I^w) mass(I))

by diff_embed_bound * ||f||^2, and the Carleson embedding bounds

    sum over cells of <f w^1/2>_I^2 a_I mass(I) / n_Psi(N_I^w)

by 16 * ||f||^2, for any normalized Carleson sequence a.  Cells where the
weight vanishes are skipped throughout.  The telescoping audits replay the
proofs of these bounds generation by generation: the cumulative left side up
to depth g is dominated by the Bellman mass at generation g, which in turn
is dominated by the energy of f.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bellman import b_value
from .dyadic import CarlesonSeq, CellDists, Lattice, Weight, all_dist_fns
from .gauge import BumpGauge

__all__ = [
    "EmbeddingReport",
    "embed_sum_25",
    "embed_sum_26",
    "LedgerRow",
    "telescope_audit_25",
    "telescope_audit_26",
    "adversarial_ratio",
]


@dataclass(frozen=True)
class EmbeddingReport:
    total: float
    ratio: float
    bound: float
    passed: bool
    f_norm_sq: float
    per_cell: np.ndarray
    per_generation: np.ndarray
    skipped_cells: int
    argmax_cell: int


def _f_norm_sq(lat: Lattice, f: np.ndarray) -> float:
    return float(np.dot(f * f, lat.leaf_mass))


def _diff_l1(lat: Lattice, F: np.ndarray) -> np.ndarray:
    """||Delta_I F||_1 for every non-leaf cell (zero at leaves)."""
    avg = lat.cell_averages(F)
    out = np.zeros(lat.n_cells)
    for d in range(lat.depth):
        ids = lat.cells_at_depth(d)
        kid_level = lat.leaf_ancestor[d + 1]
        spread = np.abs(avg[kid_level] -
                        np.repeat(avg[ids], lat.leaf_hi[ids] - lat.leaf_lo[ids]))
        cs = np.concatenate([[0.0], np.cumsum(spread * lat.leaf_mass)])
        out[ids] = cs[lat.leaf_hi[ids]] - cs[lat.leaf_lo[ids]]
    return out


def _per_generation(lat: Lattice, per_cell: np.ndarray) -> np.ndarray:
    return np.array([per_cell[lat.level_off[d]:lat.level_off[d + 1]].sum()
                     for d in range(lat.depth + 1)])


def embed_sum_25(f: np.ndarray, w: Weight, gauge: BumpGauge,
                 dists: CellDists | None = None) -> EmbeddingReport:
    """The square-difference embedding sum and its ratio to ||f||^2."""
    lat = w.lattice
    f = np.asarray(f, dtype=float)
    dists = dists or all_dist_fns(w)
    npsi = dists.n_psi_all(gauge)
    dl1 = _diff_l1(lat, f * np.sqrt(w.values))
    live = npsi > 0
    per_cell = np.zeros(lat.n_cells)
    per_cell[live] = dl1[live] ** 2 / (npsi[live] * lat.mass[live])
    total = float(per_cell.sum())
    fsq = _f_norm_sq(lat, f)
    ratio = total / fsq if fsq > 0 else 0.0
    bound = gauge.diff_embed_bound
    return EmbeddingReport(total, ratio, bound, ratio <= bound, fsq, per_cell,
                           _per_generation(lat, per_cell),
                           int(np.count_nonzero(~live)), int(np.argmax(per_cell)))


def embed_sum_26(f: np.ndarray, w: Weight, gauge: BumpGauge, seq: CarlesonSeq,
                 dists: CellDists | None = None) -> EmbeddingReport:
    """The Carleson embedding sum and its ratio to ||f||^2."""
    lat = w.lattice
    if seq.lattice is not lat:
        raise ValueError("Carleson sequence and weight must share a lattice")
    f = np.asarray(f, dtype=float)
    dists = dists or all_dist_fns(w)
    npsi = dists.n_psi_all(gauge)
    avg = lat.cell_averages(f * np.sqrt(w.values))
    live = npsi > 0
    per_cell = np.zeros(lat.n_cells)
    per_cell[live] = avg[live] ** 2 * seq.a[live] * lat.mass[live] / npsi[live]
    total = float(per_cell.sum())
    fsq = _f_norm_sq(lat, f)
    ratio = total / fsq if fsq > 0 else 0.0
    bound = gauge.carleson_embed_bound
    return EmbeddingReport(total, ratio, bound, ratio <= bound, fsq, per_cell,
                           _per_generation(lat, per_cell),
                           int(np.count_nonzero(~live)), int(np.argmax(per_cell)))


# ---------------------------------------------------------------------------
# telescoping audits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LedgerRow:
    root_path: str
    generation: int
    partial_lhs: float      # cumulative embedding sum below the root, scaled
    rhs: float              # telescoped right side at this generation
    slack: float
    energy_cap: float       # integral of |f|^2 over the root cell


def _bellman_masses(lat: Lattice, f, w, gauge, dists, Ms=None) -> np.ndarray:
    """mass(I) * B at every cell, with B the two- or three-variable functional."""
    F = np.asarray(f, dtype=float) * np.sqrt(w.values)
    avg = lat.cell_averages(F)
    if Ms is None:
        u = dists.u_all(gauge)
    else:
        # u(M, N) = 2 int N - int T(M+1, N): reuse the flat segment arrays
        dt = dists._dt()
        v = dists.flat_v
        A = np.repeat(Ms + 1.0, np.diff(dists.offsets))
        integrand = dt * (2.0 * v - v * gauge.m_prime(v / A))
        cs = np.concatenate([[0.0], np.cumsum(integrand)])
        u = cs[dists.offsets[1:]] - cs[dists.offsets[:-1]]
    out = np.zeros(lat.n_cells)
    for i in range(lat.n_cells):
        out[i] = lat.mass[i] * b_value(float(avg[i]), float(u[i]))
    return out


def _audit(lat: Lattice, terms: np.ndarray, bmass: np.ndarray, scale: float,
           f: np.ndarray, roots) -> list[LedgerRow]:
    energy = lat.cell_integrals(np.asarray(f, dtype=float) ** 2)
    rows = []
    for root in roots:
        path = lat.path(root)
        d0 = lat.depth_of(root)
        cap = float(energy[root])
        partial = 0.0
        for gen in range(1, lat.depth - d0 + 1):
            prev = lat.descendants(root, gen - 1)
            partial += float(terms[prev].sum())
            kids = lat.descendants(root, gen)
            rhs = float(bmass[kids].sum()) - float(bmass[root])
            rows.append(LedgerRow(path, gen, scale * partial, rhs,
                                  rhs - scale * partial, cap))
    return rows


def telescope_audit_25(f: np.ndarray, w: Weight, gauge: BumpGauge,
                       roots=None, dists: CellDists | None = None) -> list[LedgerRow]:
    """Generation-by-generation replay of the square-difference embedding proof.

    For each root I0 and generation g the cumulative sum of
    ||Delta_I(f w^1/2)||_1^2 / (n mass) over the first g generations, scaled
    by c_gap/16, must stay below the telescoped Bellman mass
    sum over ch_g(I0) of mass*B minus mass(I0)*B(I0); the final energy cap
    mass(I)*B <= int_I |f|^2 is recorded per row.
    """
    lat = w.lattice
    dists = dists or all_dist_fns(w)
    npsi = dists.n_psi_all(gauge)
    dl1 = _diff_l1(lat, np.asarray(f, dtype=float) * np.sqrt(w.values))
    live = npsi > 0
    terms = np.zeros(lat.n_cells)
    terms[live] = dl1[live] ** 2 / (npsi[live] * lat.mass[live])
    bmass = _bellman_masses(lat, f, w, gauge, dists)
    roots = range(lat.n_cells) if roots is None else roots
    return _audit(lat, terms, bmass, gauge.c_gap / 16.0, f, roots)


def telescope_audit_26(f: np.ndarray, w: Weight, gauge: BumpGauge,
                       seq: CarlesonSeq, roots=None,
                       dists: CellDists | None = None) -> list[LedgerRow]:
    """Generation-by-generation replay of the Carleson embedding proof,
    with the three-variable functional at budgets M_I = subtree loads."""
    lat = w.lattice
    dists = dists or all_dist_fns(w)
    npsi = dists.n_psi_all(gauge)
    avg = lat.cell_averages(np.asarray(f, dtype=float) * np.sqrt(w.values))
    live = npsi > 0
    terms = np.zeros(lat.n_cells)
    terms[live] = avg[live] ** 2 * seq.a[live] * lat.mass[live] / npsi[live]
    bmass = _bellman_masses(lat, f, w, gauge, dists, Ms=seq.loads)
    roots = range(lat.n_cells) if roots is None else roots
    return _audit(lat, terms, bmass, 1.0 / 16.0, f, roots)


# ---------------------------------------------------------------------------
# adversarial ratio search
# ---------------------------------------------------------------------------

def adversarial_ratio(w: Weight, gauge: BumpGauge, budget: int = 20,
                      restarts: int = 8, seed: int = 0):
    """Heuristic maximizer of the square-difference embedding ratio over f.

    Alternates between freezing the sign pattern of the differences, which
    turns the embedding sum into the quadratic form sum_I <s_I, f>^2 with
    s_I = mass * w^(1/2) * Delta_I(signs) / sqrt(n_I mass(I)), and stepping
    towards the leading generalized eigenvector of that form against the mass
    form.  The frozen-sign value never exceeds the true sum, so accepted
    steps are certified improvements.  Returns (best f, ratio, per-restart
    history); the ratio is a lower-bound probe, not a certified maximizer,
    and never exceeds diff_embed_bound.
    """
    lat = w.lattice
    dists = all_dist_fns(w)
    npsi = dists.n_psi_all(gauge)
    live = np.flatnonzero(npsi > 0)
    live = live[live < lat.level_off[lat.depth]]  # differences need children
    w_half = np.sqrt(w.values)
    mass = lat.leaf_mass
    rng = np.random.default_rng(seed)

    def true_ratio(f):
        return embed_sum_25(f, w, gauge, dists=dists).ratio

    def sign_vectors(f):
        avg = lat.cell_averages(f * w_half)
        vecs = np.zeros((len(live), lat.n_leaves))
        for row, i in enumerate(live):
            lo, hi = lat.leaf_lo[i], lat.leaf_hi[i]
            kid = lat.leaf_ancestor[lat.depth_of(i) + 1][lo:hi]
            sigma = np.where(avg[kid] >= avg[i], 1.0, -1.0)
            # Delta_I sigma: per-child average of sigma minus the I-average
            avg_i = np.dot(sigma, mass[lo:hi]) / lat.mass[i]
            dsig = np.empty(hi - lo)
            for j in lat.descendants(i, 1):
                jl, jh = lat.leaf_lo[j] - lo, lat.leaf_hi[j] - lo
                dsig[jl:jh] = np.dot(sigma[jl:jh], mass[lo + jl:lo + jh]) / lat.mass[j] - avg_i
            vecs[row, lo:hi] = dsig * mass[lo:hi] * w_half[lo:hi] \
                / np.sqrt(npsi[i] * lat.mass[i])
        return vecs

    best_f, best_ratio, history = None, -np.inf, []
    for _ in range(max(1, restarts)):
        f = rng.normal(size=lat.n_leaves)
        f /= np.sqrt(max(_f_norm_sq(lat, f), 1e-300))
        current = true_ratio(f)
        for _ in range(max(1, budget)):
            S = sign_vectors(f)
            y = f.copy()
            for _ in range(10):
                z = (S.T @ (S @ y)) / mass
                y = z / np.sqrt(max(_f_norm_sq(lat, z), 1e-300))
            cand = true_ratio(y)
            if cand > current + 1e-15:
                f, current = y, cand
            else:
                break
        history.append(float(current))
        if current > best_ratio:
            best_ratio, best_f = current, f
    return best_f, float(best_ratio), history

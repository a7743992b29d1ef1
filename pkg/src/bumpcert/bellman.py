"""Bellman functionals on distribution functions and their inequality checkers.

Two functionals are certified here.  The two-variable one,

    B(f, N) = f^2 / u(N),      u(N) = int (2 N(t) - m(N(t))) dt,

obeys a convexity gap: averaging over points costs at least
c * (spread of f)^2 / n_Psi(N), with c = gauge.c_gap.  The three-variable one,

    B(f, N, M) = f^2 / u(M, N),   u(M, N) = 2 int N - int T(M+1, N(t)) dt,

is convex and drops by at least a * f^2 / (16 n_Psi(N)) when the Carleson
budget M exceeds the average of the children's budgets by a.

Every checker returns a report whose `slack` is (left side) - (right side)
of the inequality it certifies; nonnegative up to rounding means pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as _iter_product

import numpy as np

from .dyadic import DistFn, align
from .gauge import BumpGauge

__all__ = [
    "u_of_N",
    "u_of_MN",
    "b_value",
    "DerivReport",
    "directional_derivs",
    "TwoPointReport",
    "check_two_point",
    "MultiPointReport",
    "check_multi_point",
    "balanced_signs",
    "MDerivReport",
    "check_dB_dM",
    "DropReport",
    "check_drop",
]


def _u_from_segments(dt: np.ndarray, v: np.ndarray, gauge: BumpGauge) -> float:
    if len(v) == 0:
        return 0.0
    return float(np.dot(dt, 2.0 * v - gauge.m(v)))


def u_of_N(dist: DistFn, gauge: BumpGauge) -> float:
    """u(N) = int (2N - m(N)); satisfies w <= u <= 2w for w = int N."""
    dt, v = dist.segments()
    return _u_from_segments(dt, v, gauge)


def b_value(f: float, u: float) -> float:
    """f^2/u with the zero-weight convention B(0, 0) = 0."""
    if u <= 0.0:
        if f == 0.0:
            return 0.0
        raise ValueError("f^2/u undefined for u = 0 with f != 0 "
                         "(cells where the weight vanishes are skipped)")
    return f * f / u


# ---------------------------------------------------------------------------
# directional derivatives of u
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivReport:
    """Analytic and finite-difference directional derivatives of u at N."""

    u_prime: float
    u_second: float
    w_delta: float          # int |dN|
    kappa: float            # u_prime / w_delta (0 if w_delta = 0)
    fd_first: float | None
    fd_second: float | None


def directional_derivs(center: DistFn, toward: DistFn, gauge: BumpGauge,
                       fd_step: float = 1e-4, fd_step_second: float = 2e-3,
                       with_fd: bool = True) -> DerivReport:
    """Derivatives of tau -> u(N + tau*dN) at tau = 0, where N = center and
    the direction is dN = toward - N.

    Both N + dN (= toward) and the mirror N - dN must be genuine distribution
    functions; this forces dN to vanish on {N = 0}, where 1/phi(N) is
    singular.  Analytic values:

        u'  = int (2 - m'(N)) dN,      u'' = -int dN^2 / phi(N).

    Finite-difference counterparts go through segmentwise differences of m
    (the linear part of u cancels exactly).  The second difference measures
    its step relative to the direction size (u'' is exactly quadratic in the
    direction) and Richardson-extrapolates two central differences: a plain
    second difference cannot reach 1e-6 relative, since its roundoff floor
    eps/step^2 meets its step^2 truncation right around that level.
    """
    ts, V = align([center, toward])
    vc, vp = V
    dv = vp - vc
    vm = vc - dv
    if np.any(vm > 1.0 + 1e-12) or np.any(vm < -1e-12):
        raise ValueError("the mirror N - dN must keep values in [0, 1]")
    if np.any(np.diff(vm) > 1e-12):
        raise ValueError("the mirror N - dN must stay decreasing")
    zero = vc <= 0.0
    if np.any(np.abs(dv[zero]) > 1e-15):
        raise ValueError("perturbations must vanish where the center vanishes")

    dt = np.diff(np.concatenate([[0.0], ts]))
    pos = ~zero
    u_prime = 2.0 * float(np.dot(dt, dv)) \
        - float(np.dot(dt[pos], gauge.m_prime(vc[pos]) * dv[pos]))
    u_second = -float(np.dot(dt[pos], dv[pos] ** 2 / gauge.phi(vc[pos])))
    w_delta = float(np.dot(dt, np.abs(dv)))
    kappa = u_prime / w_delta if w_delta > 0 else 0.0

    fd1 = fd2 = None
    if with_fd:
        vpos, dpos, tpos = vc[pos], dv[pos], dt[pos]

        def m_at(tau):
            return gauge.m(np.clip(vpos + tau * dpos, 0.0, 1.0))

        tau = fd_step
        # u(N + tau dN) - u(N - tau dN) = 4 tau int dN - int (m+ - m-)
        fd1 = 2.0 * float(np.dot(dt, dv)) \
            - float(np.dot(tpos, m_at(tau) - m_at(-tau))) / (2.0 * tau)
        m0 = gauge.m(vpos)

        def second(t):
            return -float(np.dot(tpos, m_at(t) - 2.0 * m0 + m_at(-t))) / t ** 2

        # tau <= 1 keeps the perturbations inside the admissible segment
        tau2 = min(1.0, fd_step_second / w_delta) if w_delta > 0 else 1.0
        fd2 = (4.0 * second(0.5 * tau2) - second(tau2)) / 3.0
    return DerivReport(u_prime, u_second, w_delta, kappa, fd1, fd2)


# ---------------------------------------------------------------------------
# the two-point and multi-point convexity gaps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoPointReport:
    slack: float
    lhs: float
    rhs: float
    b1: float
    b2: float
    b_mid: float
    n_mid: float
    c_gap: float


def check_two_point(f1: float, n1: DistFn, f2: float, n2: DistFn,
                    gauge: BumpGauge) -> TwoPointReport:
    """Gap of the midpoint inequality

        (B(f1,N1) + B(f2,N2))/2 - B(f,N) >= (c/4) (f1-f)^2 / n_Psi(N)

    at f = (f1+f2)/2, N = (N1+N2)/2, with c = gauge.c_gap.
    """
    ts, V = align([n1, n2])
    dt = np.diff(np.concatenate([[0.0], ts]))
    v1, v2 = V
    vmid = 0.5 * (v1 + v2)
    posm = vmid > 0
    nm = float(np.dot(dt[posm], gauge.phi(vmid[posm]))) if posm.any() else 0.0
    f = 0.5 * (f1 + f2)
    if nm <= 0.0:
        # both weights vanish; only f1 = f2 = 0 keeps B finite, and then
        # both sides are exactly 0
        if f1 != 0.0 or f2 != 0.0:
            raise ValueError("midpoint weight vanishes but f1, f2 are not 0")
        return TwoPointReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, gauge.c_gap)
    pos1, pos2 = v1 > 0, v2 > 0
    b1 = b_value(f1, _u_from_segments(dt[pos1], v1[pos1], gauge))
    b2 = b_value(f2, _u_from_segments(dt[pos2], v2[pos2], gauge))
    bm = b_value(f, _u_from_segments(dt[posm], vmid[posm], gauge))
    lhs = 0.5 * (b1 + b2) - bm
    rhs = 0.25 * gauge.c_gap * (f1 - f) ** 2 / nm
    return TwoPointReport(lhs - rhs, lhs, rhs, b1, b2, bm, nm, gauge.c_gap)


@dataclass(frozen=True)
class MultiPointReport:
    slack: float
    lhs: float
    rhs: float
    b_mean: float
    b_center: float
    n_center: float


def check_multi_point(alphas, fs, dists, gauge: BumpGauge) -> MultiPointReport:
    """Gap of the convex-combination inequality

        -B(f,N) + sum_k alpha_k B(f_k,N_k) >= (c/16) (sum alpha_k |f_k - f|)^2 / n_Psi(N)

    at f = sum alpha_k f_k, N = sum alpha_k N_k; weights must sum to 1.
    """
    alphas = np.asarray(alphas, dtype=float)
    fs = np.asarray(fs, dtype=float)
    if np.any(alphas < 0) or abs(alphas.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    if len(alphas) != len(fs) or len(fs) != len(dists):
        raise ValueError("weights, scalars and distributions must align")
    ts, V = align(dists)
    dt = np.diff(np.concatenate([[0.0], ts]))
    vc = alphas @ V
    posc = vc > 0
    nc = float(np.dot(dt[posc], gauge.phi(vc[posc]))) if posc.any() else 0.0
    f = float(alphas @ fs)
    if nc <= 0.0:
        if np.any(fs != 0.0):
            raise ValueError("combined weight vanishes but the f_k are not 0")
        return MultiPointReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    b_mean = 0.0
    for k in range(len(alphas)):
        pk = V[k] > 0
        b_mean += alphas[k] * b_value(float(fs[k]),
                                      _u_from_segments(dt[pk], V[k][pk], gauge))
    bc = b_value(f, _u_from_segments(dt[posc], vc[posc], gauge))
    lhs = b_mean - bc
    rhs = (gauge.c_gap / 16.0) * float(alphas @ np.abs(fs - f)) ** 2 / nc
    return MultiPointReport(lhs - rhs, lhs, rhs, b_mean, bc, nc)


# ---------------------------------------------------------------------------
# balanced signs: the quotient-norm maximizer
# ---------------------------------------------------------------------------

def balanced_signs(alphas, x) -> np.ndarray:
    """Maximizer beta of sum alpha_k beta_k x_k over |beta_k| <= 1 with
    sum alpha_k beta_k = 0, for x with weighted mean zero.

    The optimum equals the weighted-l1 distance of x to the constants, which
    is at least half of ||x||_{l1(alpha)}.  Solved exactly: vertex
    enumeration for n <= 8, weighted-median exchange above.
    """
    alphas = np.asarray(alphas, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(x)
    if len(alphas) != n:
        raise ValueError("weights and vector must align")
    if np.any(alphas <= 0):
        raise ValueError("weights must be positive")
    if abs(float(alphas @ x)) > 1e-9 * max(1.0, float(alphas @ np.abs(x))):
        raise ValueError("x must have weighted mean zero")
    if not np.any(x != 0.0):
        return np.zeros(n)
    if n <= 8:
        beta = _signs_by_vertices(alphas, x)
    else:
        beta = _signs_by_median(alphas, x)
    # restore the balance constraint to machine precision
    drift = float(alphas @ beta)
    interior = np.abs(beta) < 1.0
    if drift != 0.0 and interior.any():
        j = int(np.flatnonzero(interior)[0])
        beta[j] -= drift / alphas[j]
    return beta


def _signs_by_vertices(alphas, x) -> np.ndarray:
    # vertices of {|beta| <= 1, <alpha, beta> = 0}: all-but-one coordinates
    # at +-1, the last one solving the balance equation
    n = len(x)
    best_val, best = -np.inf, None
    for j in range(n):
        others = [k for k in range(n) if k != j]
        for eps in _iter_product((-1.0, 1.0), repeat=n - 1):
            beta = np.empty(n)
            beta[others] = eps
            bj = -float(alphas[others] @ beta[others]) / alphas[j]
            if abs(bj) > 1.0 + 1e-12:
                continue
            beta[j] = min(1.0, max(-1.0, bj))
            val = float(alphas @ (beta * x))
            if val > best_val:
                best_val, best = val, beta
    return best


def _signs_by_median(alphas, x) -> np.ndarray:
    # beta_k = sign(x_k - lam) at the weighted median lam; the tied group is
    # exchanged fractionally to balance the constraint
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], alphas[order]
    cum = np.cumsum(ws)
    j = int(np.searchsorted(cum, 0.5 * cum[-1]))
    lam = xs[j]
    beta_s = np.where(xs > lam, 1.0, -1.0)
    tied = xs == lam
    balance = float(ws[xs < lam].sum()) - float(ws[xs > lam].sum())
    beta_s[tied] = balance / float(ws[tied].sum())
    out = np.empty_like(beta_s)
    out[order] = beta_s
    return out


# ---------------------------------------------------------------------------
# the three-variable functional and the budget drop
# ---------------------------------------------------------------------------

def _u_mn_from_segments(dt, v, M: float, gauge: BumpGauge) -> float:
    if len(v) == 0:
        return 0.0
    A = M + 1.0
    return float(np.dot(dt, 2.0 * v - v * gauge.m_prime(v / A)))


def u_of_MN(M: float, dist: DistFn, gauge: BumpGauge) -> float:
    """u(M, N) = 2 int N - int T(M+1, N(t)) dt; lies in [w, 2w]."""
    if not 0.0 <= M <= 1.0 + 1e-12:
        raise ValueError(f"Carleson budget M must lie in [0, 1], got {M}")
    dt, v = dist.segments()
    return _u_mn_from_segments(dt, v, M, gauge)


@dataclass(frozen=True)
class MDerivReport:
    slack: float
    lhs: float              # -dB/dM, analytic
    rhs: float              # f^2 / (16 n_Psi(N))
    fd: float | None        # -dB/dM by central differences
    skipped: bool


def check_dB_dM(f: float, dist: DistFn, M: float, gauge: BumpGauge,
                fd_step: float = 1e-5, with_fd: bool = False) -> MDerivReport:
    """Budget monotonicity: -dB/dM >= f^2 / (16 n_Psi(N)) for B = f^2/u(M,N).

    Skipped (slack 0) when the weight vanishes, matching the convention that
    cells with w = 0 never enter the sums.
    """
    if dist.is_zero:
        return MDerivReport(0.0, 0.0, 0.0, None, True)
    dt, v = dist.segments()
    A = M + 1.0
    u = _u_mn_from_segments(dt, v, M, gauge)
    minus_dT = float(np.dot(dt, v * v / (A * A * gauge.phi(v / A))))
    nn = float(np.dot(dt, gauge.phi(v)))
    lhs = (f * f / (u * u)) * minus_dT
    rhs = f * f / (16.0 * nn)
    fd = None
    if with_fd:
        h = min(fd_step, M, 1.0 - M)
        if h <= 0.0:
            h = fd_step  # one-sided fallback never needed for interior M
        bp = b_value(f, _u_mn_from_segments(dt, v, M + h, gauge))
        bm = b_value(f, _u_mn_from_segments(dt, v, M - h, gauge))
        fd = -(bp - bm) / (2.0 * h)
    return MDerivReport(lhs - rhs, lhs, rhs, fd, False)


@dataclass(frozen=True)
class DropReport:
    slack: float
    lhs: float
    rhs: float
    b_mean: float
    b_center: float
    n_center: float


def check_drop(alphas, a: float, fs, dists, Ms, gauge: BumpGauge) -> DropReport:
    """Gap of the budget-drop inequality

        -B(f,N,M) + sum alpha_k B(f_k,N_k,M_k) >= (1/16) a f^2 / n_Psi(N)

    with f, N the convex combinations and M = a + sum alpha_k M_k <= 1.
    """
    alphas = np.asarray(alphas, dtype=float)
    fs = np.asarray(fs, dtype=float)
    Ms = np.asarray(Ms, dtype=float)
    if a < 0:
        raise ValueError("the budget excess a must be nonnegative")
    if np.any(alphas < 0) or abs(alphas.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    if np.any(Ms < 0) or np.any(Ms > 1.0 + 1e-12):
        raise ValueError("children budgets must lie in [0, 1]")
    M = a + float(alphas @ Ms)
    if M > 1.0 + 1e-12:
        raise ValueError(f"combined budget {M:.6g} exceeds 1")
    ts, V = align(dists)
    dt = np.diff(np.concatenate([[0.0], ts]))
    vc = alphas @ V
    posc = vc > 0
    nc = float(np.dot(dt[posc], gauge.phi(vc[posc]))) if posc.any() else 0.0
    f = float(alphas @ fs)
    if nc <= 0.0:
        if np.any(fs != 0.0):
            raise ValueError("combined weight vanishes but the f_k are not 0")
        return DropReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    bc = b_value(f, _u_mn_from_segments(dt[posc], vc[posc], min(M, 1.0), gauge))
    b_mean = 0.0
    for k in range(len(alphas)):
        pk = V[k] > 0
        b_mean += alphas[k] * b_value(float(fs[k]),
                                      _u_mn_from_segments(dt[pk], V[k][pk],
                                                          float(Ms[k]), gauge))
    lhs = b_mean - bc
    rhs = a * f * f / (16.0 * nc)
    return DropReport(lhs - rhs, lhs, rhs, b_mean, bc, nc)

"""Young functions, bump gauges and their scalar companions.

A bump gauge is a decreasing function Psi on (0, 1] with s*Psi(s) increasing
and integrable 1/(s*Psi(s)).  After normalization the antiderivatives

    m'(s) = int_0^s dr / phi(r),   phi(s) = s*Psi(s),   m'(1) = 1,
    m(s)  = int_0^s m'(r) dr,

satisfy 0 <= m' <= 1 and 0 <= m(s) <= s.  Every inequality checker in this
package draws its constants from the gauge:

    s_star            largest s with Psi(s) >= 1
    c_psi             max(1, 1/s_star), certifies <w> <= c_psi * n_Psi(N^w)
    w_over_n_bound    min(c_psi, 1/Psi(1)), the sharper certified constant
    c_gap             2 / (8 + 2*w_over_n_bound), the two-point convexity gap
    diff_embed_bound  16 / c_gap, bound for the square-difference embedding
    carleson_embed_bound = 16, bound for the Carleson-sequence embedding
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import exp1, gamma as gamma_fn, gammaincc

__all__ = [
    "YoungFunction",
    "BumpGauge",
    "LogGauge",
    "ParametricGauge",
    "make_log_gauge",
    "psi_from_young",
    "gauge_from_config",
    "orlicz_norm",
    "young_inverse",
    "TReport",
    "T_scalar",
    "comparability_profile",
    "head_tail_constant",
]

# bisection policy: relative width 1e-12 or 200 iterations, whichever first
_BISECT_RTOL = 1e-12
_BISECT_MAXIT = 200


def _bisect_decreasing(fn: Callable[[float], float], target: float,
                       lo: float, hi: float) -> float:
    """Solve fn(x) = target for decreasing fn on [lo, hi]."""
    for _ in range(_BISECT_MAXIT):
        mid = 0.5 * (lo + hi)
        if fn(mid) >= target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _BISECT_RTOL * max(abs(lo), abs(hi), 1e-300):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Young functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class YoungFunction:
    """Convex increasing Phi with Phi(0) = 0, given by value and derivative.

    tail_exact, when provided by a family constructor, evaluates
    int_T^inf dt/Phi(t) in closed form for T >= tail_from; tail integrals of
    bump families decay only logarithmically, so quadrature alone cannot
    reach them (a visible fraction of the mass sits beyond floating range).
    """

    eval_fn: Callable[[np.ndarray], np.ndarray]
    deriv_fn: Callable[[np.ndarray], np.ndarray]
    family: str = "custom"
    alpha: float | None = None
    tail_exact: Callable[[float], float] | None = None
    tail_from: float = 1e30

    def __call__(self, t):
        return self.eval_fn(np.asarray(t, dtype=float))

    def deriv(self, t):
        return self.deriv_fn(np.asarray(t, dtype=float))

    @classmethod
    def log_power(cls, alpha: float) -> "YoungFunction":
        """Phi(t) = t * ln(e + t)^alpha, integrable tail for alpha > 1."""
        if alpha <= 1:
            raise ValueError(f"log-power Young function needs alpha > 1, got {alpha}")
        e = math.e

        def ev(t):
            return t * np.log(e + t) ** alpha

        def dv(t):
            lg = np.log(e + t)
            return lg ** alpha + alpha * t * lg ** (alpha - 1) / (e + t)

        def tail(T):
            # int_T^inf dt/(t ln(t)^alpha) = ln(T)^(1-alpha)/(alpha-1); replacing
            # ln(e+t) by ln(t) costs a relative e/(t ln t) per point, which
            # integrates to < 1e-30 for T >= 1e30
            return math.log(T) ** (1.0 - alpha) / (alpha - 1.0)

        return cls(ev, dv, family="log-power", alpha=alpha, tail_exact=tail)

    def tail_integral(self, a: float, b: float) -> float:
        """int_a^b dt / Phi(t); the infinite upper end uses the family's
        closed-form tail when available."""
        if np.isinf(b) and self.tail_exact is not None:
            cut = max(self.tail_from, a)
            head = self._finite_tail(a, cut) if a < cut else 0.0
            return head + self.tail_exact(cut)
        if np.isinf(b):
            out = quad(lambda t: 1.0 / float(self(t)), a, b, limit=800, full_output=1)
            return out[0]
        return self._finite_tail(a, b)

    def _finite_tail(self, a: float, b: float) -> float:
        # integrate in u = ln t over wide ranges; the integrand e^u/Phi(e^u)
        # is slowly varying there
        if a <= 0:
            raise ValueError("tail integrals start at a > 0")
        if b <= a:
            return 0.0
        split = min(b, max(a, 1.0))
        total = 0.0
        if a < split:
            total += quad(lambda t: 1.0 / float(self(t)), a, split,
                          limit=300, full_output=1)[0]
        if split < b:
            total += quad(lambda u: math.exp(u) / float(self(math.exp(u))),
                          math.log(split), math.log(b), limit=500, full_output=1)[0]
        return total


def young_inverse(phi: YoungFunction, y: float, hi: float = 1.0) -> float:
    """Smallest t with Phi(t) = y, by bisection on the increasing Phi."""
    if y < 0:
        raise ValueError("Young functions are nonnegative")
    if y == 0:
        return 0.0
    lo = 0.0
    while float(phi(hi)) < y:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("Young inverse bracket failed")
    # increasing function: reuse the decreasing solver on -Phi
    return _bisect_decreasing(lambda t: -float(phi(t)), -y, lo, hi)


def orlicz_norm(pairs: Sequence[tuple[float, float]], phi: YoungFunction) -> float:
    """Normalized Orlicz norm of a nonnegative step weight.

    pairs are (mass, value); returns inf{lam > 0 : sum m*Phi(v/lam) / sum m <= 1},
    located by bisection on the decreasing map lam -> mean Phi(v/lam).
    """
    masses = np.asarray([p[0] for p in pairs], dtype=float)
    values = np.asarray([p[1] for p in pairs], dtype=float)
    if np.any(values < 0) or np.any(masses < 0):
        raise ValueError("orlicz_norm needs nonnegative masses and values")
    total = masses.sum()
    if total <= 0:
        raise ValueError("orlicz_norm needs positive total mass")
    if not np.any((values > 0) & (masses > 0)):
        return 0.0

    def mean_phi(lam):
        return float(np.dot(masses, phi(values / lam))) / total

    hi = max(1.0, float(values.max()))
    while mean_phi(hi) > 1.0:
        hi *= 2.0
    lo = hi
    while mean_phi(lo) <= 1.0 and lo > 1e-300:
        lo *= 0.5
    for _ in range(_BISECT_MAXIT):
        mid = 0.5 * (lo + hi)
        if mean_phi(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= _BISECT_RTOL * hi:
            break
    return hi


# ---------------------------------------------------------------------------
# scaled upper incomplete gamma, backbone of the closed-form m for log gauges
# ---------------------------------------------------------------------------

def _upper_gamma_scaled(a: float, x: np.ndarray) -> np.ndarray:
    """e^x * Gamma(a, x) for real a <= 1, x > 0, vectorized in x."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    big = x >= 40.0
    if big.any():
        out[big] = _ugs_series(a, x[big])
    if (~big).any():
        out[~big] = _ugs_ladder(a, x[~big])
    return out


def _ugs_series(a, x):
    # asymptotic expansion x^(a-1) * sum prod_{k<j}(a-1-k) x^-j; terms decay
    # fast for x >= 40 and the moderate a used here
    term = np.ones_like(x)
    total = np.ones_like(x)
    for j in range(60):
        term = term * (a - 1 - j) / x
        total = total + term
        if np.all(np.abs(term) < 1e-17 * np.abs(total)):
            break
    return x ** (a - 1) * total


def _ugs_ladder(a, x):
    # descend from a base parameter in [0, 1] via
    # Gamma(a, x) = (Gamma(a+1, x) - x^a e^-x) / a, in scaled form
    if a == 1.0:
        return np.ones_like(x)
    if a > 0:
        return np.exp(x) * gammaincc(a, x) * gamma_fn(a)
    steps = int(np.ceil(-a)) if a < 0 else 0
    base = a + steps  # 0 exactly for integer a, else in (0, 1)
    if base == 0.0:
        g = np.exp(x) * exp1(x)
    else:
        g = np.exp(x) * gammaincc(base, x) * gamma_fn(base)
    aa = base
    for _ in range(steps):
        aa -= 1.0
        g = (g - x ** aa) / aa
    return g


# ---------------------------------------------------------------------------
# bump gauges
# ---------------------------------------------------------------------------

def _check_unit_interval(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.0) or np.any(s > 1.0):
        raise ValueError("gauge arguments live in (0, 1]")
    return s


class BumpGauge:
    """Normalized bump gauge with derived antiderivatives and constants.

    Instances are immutable after construction; all evaluators accept scalars
    or arrays and are pure.
    """

    family = "abstract"
    alpha: float | None = None

    # subclasses must set self.k (normalization constant) before _finalize
    def _finalize(self):
        psi1 = float(self.psi(1.0))
        self.psi_at_1 = psi1
        if psi1 >= 1.0:
            self.s_star = 1.0
        else:
            self.s_star = _bisect_decreasing(lambda s: float(self.psi(s)), 1.0,
                                             1e-300, 1.0)
        self.c_psi = max(1.0, 1.0 / self.s_star)
        self.w_over_n_bound = min(self.c_psi, 1.0 / psi1)
        self.c_gap = 2.0 / (8.0 + 2.0 * self.w_over_n_bound)
        self.diff_embed_bound = 16.0 / self.c_gap
        self.carleson_embed_bound = 16.0

    # --- evaluators ---------------------------------------------------
    def psi(self, s):
        raise NotImplementedError

    def psi_raw(self, s):
        """Un-normalized gauge Psi0 = Psi / k."""
        return self.psi(s) / self.k

    def phi(self, s):
        s = np.asarray(s, dtype=float)
        return s * self.psi(s)

    def phi_prime(self, s):
        raise NotImplementedError

    def m_prime(self, s):
        raise NotImplementedError

    def m(self, s):
        raise NotImplementedError

    # --- diagnostics ---------------------------------------------------
    def psi_at_exp(self, y):
        """Psi(e^-y) for y >= 0, usable far beyond floating underflow of e^-y."""
        s = math.exp(-float(y))
        if s <= 0.0:
            raise ValueError("plain gauges cannot be evaluated below s = 1e-308")
        return float(self.psi(s))

    def normalization_defect(self) -> float:
        """Quadrature estimate of int_0^1 ds/phi(s) minus 1.

        Computed through the substitution s = e^-y, which removes the
        endpoint singularity: the integral becomes int_0^inf dy / Psi(e^-y).
        The deep tail carries visible mass (power-law decay in y), so the
        integrand goes through psi_at_exp rather than a raw s evaluation.
        """
        out = quad(lambda y: 1.0 / self.psi_at_exp(y), 0.0, np.inf,
                   limit=500, full_output=1)
        return out[0] - 1.0

    def describe(self) -> dict:
        return {
            "family": self.family,
            "alpha": self.alpha,
            "k": self.k,
            "psi(1)": self.psi_at_1,
            "s_star": self.s_star,
            "c_psi": self.c_psi,
            "w_over_n_bound": self.w_over_n_bound,
            "c_gap": self.c_gap,
            "diff_embed_bound": self.diff_embed_bound,
            "carleson_embed_bound": self.carleson_embed_bound,
        }

    def __repr__(self):
        a = f", alpha={self.alpha}" if self.alpha is not None else ""
        return f"<{type(self).__name__} {self.family}{a}, c_gap={self.c_gap:.6g}>"


class LogGauge(BumpGauge):
    """Shifted log-power gauge Psi0(s) = (alpha + ln(1/s))^alpha.

    The shift keeps Psi positive and s*Psi(s) increasing on all of (0, 1]
    while matching the (ln(1/s))^alpha asymptotics near 0.  Everything is in
    closed form:

        k      = alpha^(1-alpha) / (alpha - 1)
        m'(s)  = (1 + ln(1/s)/alpha)^(1-alpha)
        m(s)   = s * alpha^(alpha-1) * e^x Gamma(2-alpha, x),  x = alpha + ln(1/s)
    """

    family = "log"

    def __init__(self, alpha: float):
        if alpha <= 1.0:
            raise ValueError(
                f"log gauge needs alpha > 1 (1/phi not integrable otherwise), got {alpha}")
        self.alpha = float(alpha)
        self.k = alpha ** (1.0 - alpha) / (alpha - 1.0)
        self._gamma_par = 2.0 - alpha
        self._finalize()

    def psi(self, s):
        s = _check_unit_interval(s)
        return self.k * (self.alpha - np.log(s)) ** self.alpha

    def psi_at_exp(self, y):
        if np.any(np.asarray(y) < 0):
            raise ValueError("psi_at_exp needs y >= 0")
        return self.k * (self.alpha + np.asarray(y, dtype=float)) ** self.alpha

    def phi_prime(self, s):
        s = _check_unit_interval(s)
        L = -np.log(s)
        return self.k * L * (self.alpha + L) ** (self.alpha - 1.0)

    def m_prime(self, s):
        s = _check_unit_interval(s)
        return (1.0 - np.log(s) / self.alpha) ** (1.0 - self.alpha)

    def m(self, s):
        s = _check_unit_interval(s)
        x = self.alpha - np.log(s)
        scaled = _upper_gamma_scaled(self._gamma_par, x)
        return s * self.alpha ** (self.alpha - 1.0) * scaled


class ParametricGauge(BumpGauge):
    """Gauge built from a Young function: Psi0(s) = Phi'(t) at s = 1/(Phi(t)Phi'(t)).

    The map t -> 1/(Phi(t)Phi'(t)) is strictly decreasing, so each query is a
    bisection.  The construction requires the parametric range for t >= t_min
    to cover (0, 1]; queries of the raw gauge outside that range raise.

    The parametrization turns the antiderivatives into Young-function tail
    integrals: since ds/phi0(s) pulls back to (1/Phi + Phi''/Phi'^2) dt and
    the second piece has antiderivative -1/Phi', both the normalization and
    m' reduce to int dt/Phi plus a boundary term.  m itself falls back to
    adaptive quadrature of m' (absolute tolerance 1e-10).
    """

    family = "parametric"

    def __init__(self, phi: YoungFunction, t_min: float = 1e-8):
        self.young = phi
        self.t_min = float(t_min)
        self.alpha = phi.alpha
        if phi.family == "log-power":
            self.family = "young-log"
        s_max = 1.0 / (float(phi(self.t_min)) * float(phi.deriv(self.t_min)))
        if not s_max >= 1.0:
            raise ValueError(
                "parametric range must cover (0, 1]: need Phi(t_min)*Phi'(t_min) <= 1, "
                f"got {1.0 / s_max:.3g} at t_min={t_min}")
        self._s_max = s_max
        self._t1 = self._t_of_s(1.0)
        self.k = self._mass_above(self._t1)
        self._finalize()

    # t solving s = 1/(Phi(t) Phi'(t))
    @lru_cache(maxsize=100_000)
    def _t_of_s(self, s: float) -> float:
        if s > self._s_max or s <= 0.0:
            raise ValueError(f"s={s:g} outside the parametric range (0, {self._s_max:g}]")
        ph, dph = self.young, self.young.deriv

        def shifted(t):
            return 1.0 / (float(ph(t)) * float(dph(t)))

        hi = max(2.0 * self.t_min, 1.0)
        while shifted(hi) > s:
            hi *= 2.0
            if hi > 1e300:
                raise ValueError("parametric bisection bracket failed")
        return _bisect_decreasing(shifted, s, self.t_min, hi)

    def _mass_above(self, t0: float) -> float:
        """int_0^{s(t0)} dr/phi0(r) = int_{t0}^inf dt/Phi + 1/Phi'(t0)."""
        return self.young.tail_integral(t0, np.inf) + 1.0 / float(self.young.deriv(t0))

    def _psi0_scalar(self, s: float) -> float:
        return float(self.young.deriv(self._t_of_s(s)))

    def psi_at_exp(self, y):
        # solve ln Phi(t) + ln Phi'(t) = y, increasing in t, in log space
        y = float(y)
        if y < 0:
            raise ValueError("psi_at_exp needs y >= 0")
        ph, dph = self.young, self.young.deriv

        def log_inv_s(t):
            return -(math.log(float(ph(t))) + math.log(float(dph(t))))

        hi = max(2.0 * self.t_min, 1.0)
        while log_inv_s(hi) > -y:
            hi *= 2.0
            if hi > 1e306:
                raise ValueError(f"y={y:g} beyond the floating range of the "
                                 "parametric family")
        t = _bisect_decreasing(log_inv_s, -y, self.t_min, hi)
        return self.k * float(dph(t))

    def psi_raw(self, s):
        s = np.asarray(s, dtype=float)
        if s.ndim == 0:
            return self._psi0_scalar(float(s))
        return np.array([self._psi0_scalar(float(x)) for x in s.ravel()]).reshape(s.shape)

    def psi(self, s):
        s = _check_unit_interval(s)
        return self.k * self.psi_raw(s)

    def phi_prime(self, s):
        # no closed derivative available; central difference with relative step
        s = np.asarray(s, dtype=float)
        h = 1e-6 * s
        hi = np.minimum(s + h, 1.0)
        lo = s - h
        return (self.phi(hi) - self.phi(lo)) / (hi - lo)

    @lru_cache(maxsize=100_000)
    def _m_prime_scalar(self, s: float) -> float:
        if s >= 1.0:
            return 1.0
        return self._mass_above(self._t_of_s(s)) / self.k

    def normalization_defect(self) -> float:
        # independent head quadrature down to s = e^-40; the remaining mass
        # below the cut is exactly m'(e^-40)
        y_cut = 40.0
        head = quad(lambda y: 1.0 / float(self.psi(math.exp(-y))), 0.0, y_cut,
                    limit=500, full_output=1)[0]
        return head + self._m_prime_scalar(math.exp(-y_cut)) - 1.0

    def m_prime(self, s):
        s = _check_unit_interval(s)
        if s.ndim == 0:
            return np.float64(self._m_prime_scalar(float(s)))
        return np.array([self._m_prime_scalar(float(x)) for x in s.ravel()]).reshape(s.shape)

    @lru_cache(maxsize=100_000)
    def _m_scalar(self, s: float) -> float:
        val, _ = quad(lambda r: self._m_prime_scalar(r), 0.0, s,
                      epsabs=1e-10, limit=200)
        return val

    def m(self, s):
        s = _check_unit_interval(s)
        if s.ndim == 0:
            return np.float64(self._m_scalar(float(s)))
        return np.array([self._m_scalar(float(x)) for x in s.ravel()]).reshape(s.shape)


def make_log_gauge(alpha: float) -> LogGauge:
    """Normalized shifted log-power gauge with parameter alpha > 1."""
    return LogGauge(alpha)


def psi_from_young(phi: YoungFunction, t_min: float = 1e-8) -> ParametricGauge:
    """Normalized gauge defined parametrically from a tail-integrable Young function."""
    return ParametricGauge(phi, t_min=t_min)


def gauge_from_config(spec: dict) -> BumpGauge:
    """Build a gauge from the wire format {"family": ..., "alpha": ...}."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ValueError(f"gauge spec must be a dict with a 'family' key, got {spec!r}")
    family = spec["family"]
    if family == "log":
        return make_log_gauge(float(spec["alpha"]))
    if family == "young-log":
        alpha = float(spec["alpha"])
        return psi_from_young(YoungFunction.log_power(alpha),
                              t_min=float(spec.get("t_min", 1e-8)))
    raise ValueError(f"unknown gauge family {family!r}")


# ---------------------------------------------------------------------------
# the scalar auxiliary function T(A, N) = N * m'(N/A)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TReport:
    """Value and derivatives of T(A, N) = N * int_0^{N/A} ds/phi(s)."""

    value: np.ndarray
    dA: np.ndarray
    dN: np.ndarray
    dAA: np.ndarray
    dAN: np.ndarray
    dNN: np.ndarray

    def hessian_det(self):
        return self.dAA * self.dNN - self.dAN ** 2


def T_scalar(gauge: BumpGauge, A, N, hessian: bool = True) -> TReport:
    """Evaluate T and its partials on A in [1,2], N in [0,1] (broadcasting).

    The Hessian entries require N > 0 (T is not C^2 at N = 0); pass
    hessian=False to evaluate value and gradient only.
    """
    A = np.asarray(A, dtype=float)
    N = np.asarray(N, dtype=float)
    if np.any(A < 1.0 - 1e-12) or np.any(A > 2.0 + 1e-12):
        raise ValueError("A must lie in [1, 2]")
    if np.any(N < 0.0) or np.any(N > 1.0 + 1e-12):
        raise ValueError("N must lie in [0, 1]")
    A, N = np.broadcast_arrays(A, N)
    pos = N > 0.0
    s = np.where(pos, N / A, 1.0)  # dummy 1.0 where N == 0
    mp_ = gauge.m_prime(s)
    ph = gauge.phi(s)
    value = np.where(pos, N * mp_, 0.0)
    dA = np.where(pos, -(N * N) / (A * A * ph), 0.0)
    dN = np.where(pos, mp_ + s / ph, 0.0)
    if not hessian:
        z = np.zeros_like(value)
        return TReport(value, dA, dN, z, z, z)
    if not np.all(pos):
        raise ValueError("Hessian entries of T need N > 0")
    php = gauge.phi_prime(s)
    dAA = N * N * (2.0 * A * ph - N * php) / (A * A * ph) ** 2
    dAN = -2.0 * N / (A * A * ph) + N * N * php / (A ** 3 * ph * ph)
    dNN = 2.0 / (A * ph) - N * php / (A * A * ph * ph)
    return TReport(value, dA, dN, dAA, dAN, dNN)


# ---------------------------------------------------------------------------
# matched-pair comparability diagnostics
# ---------------------------------------------------------------------------

def comparability_profile(gauge: BumpGauge, phi: YoungFunction,
                          t_grid: np.ndarray) -> np.ndarray:
    """Ratios Psi(s(t)) / Phi'(t) at s(t) = 1/(Phi(t) Phi'(t)) along t_grid.

    Evaluated through ln(1/s) = ln Phi + ln Phi' so huge t never overflows.
    """
    ratios = np.empty(len(t_grid), dtype=float)
    for i, t in enumerate(np.asarray(t_grid, dtype=float)):
        log_inv_s = math.log(float(phi(t))) + math.log(float(phi.deriv(t)))
        if log_inv_s < 0:
            raise ValueError(f"t={t:g} gives s > 1; start the grid later")
        s = math.exp(-log_inv_s)
        ratios[i] = float(gauge.psi(s)) / float(phi.deriv(t))
    return ratios


def head_tail_constant(gauge: BumpGauge, phi: YoungFunction, t0: float = 1.0,
                       t_hi: float = 1e30, grid_points: int = 20_000) -> dict:
    """Certified constant C_L with n_Psi(N_I^w) <= C_L * ||w||_{L^Phi(I)}.

    Splits the defining integral at t0: the head is bounded by t0 * phi(1)
    (phi increasing and N <= 1), the remainder by C_cmp * (1 + tail) where
    C_cmp dominates Psi(s(t))/Phi'(t) on [t0, inf) and tail = int_t0 dt/Phi.
    The comparability constant is certified on a dense geometric grid; the
    ratio decays at the far end, which the caller can inspect via 'ratios'.
    """
    grid = np.geomspace(t0, t_hi, grid_points)
    ratios = comparability_profile(gauge, phi, grid)
    c_cmp = float(ratios.max()) * (1.0 + 1e-6)
    tail = phi.tail_integral(t0, np.inf)
    head = t0 * float(gauge.phi(1.0))
    return {
        "t0": t0,
        "c_cmp": c_cmp,
        "tail_integral": tail,
        "head": head,
        "C_L": head + c_cmp * (1.0 + tail),
        "ratios": ratios,
        "grid": grid,
    }

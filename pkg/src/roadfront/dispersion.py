"""Plane-wave dispersion relations of the field-road system.

Every speed here comes from looking for exponential solutions

    (u, v) = exp(-a (x - c t)) * (1, gamma * exp(-b y))

of the system linearised at zero.  The exchange condition fixes
gamma = mu / (nu + d b); what remains is a pair of relations in (a, b):

    line:   -D phi_L(a) + (c - q) a + d mu b / (nu + d b) >= 0
    field:  (a - c/2d)^2 + b^2 <= (c^2 - c_K^2) / 4d^2

The field relation is a closed disk, the line relation the region above the
graph b = G1(a).  The spreading speed is the least c at which the two meet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .errors import CriticalR0, NonPositiveGrowth
from .kernel import EXPONENT_BOUND, Kernel
from .nonlinearity import KppLogistic, Nonlinearity, SirCumulative

SCAN_POINTS = 2000
C_RTOL = 1e-12
MAX_BISECT = 200

FIELD_DOMINATED = "FieldDominated"
LINE_BOOSTED = "LineBoosted"


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the field-road model.

    d: field diffusivity; D: line diffusion intensity; mu: road -> field
    exchange rate; nu: field -> road exchange rate; q: transport velocity on
    the line (0 for the pure diffusion models).
    """

    d: float = 1.0
    D: float = 1.0
    kernel: Kernel = field(default_factory=Kernel)
    mu: float = 1.0
    nu: float = 1.0
    f: Nonlinearity = field(default_factory=KppLogistic)
    q: float = 0.0

    def __post_init__(self):
        for key in ("d", "mu", "nu"):
            val = getattr(self, key)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{key} must be positive, got {val}")
        if not (np.isfinite(self.D) and self.D >= 0):
            raise ValueError(f"D must be nonnegative, got {self.D}")
        if not np.isfinite(self.q):
            raise ValueError(f"q must be finite, got {self.q}")

    @property
    def L(self) -> float:
        return self.kernel.L

    @property
    def fprime0(self) -> float:
        return self.f.fprime0()

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DispersionResult:
    c_star: float
    regime: str
    a: float
    b: float
    gamma: float
    residual_line: float = 0.0
    residual_field: float = 0.0
    residual_radius: float = 0.0


@dataclass(frozen=True)
class DecayResult:
    a_star: float
    b_star: float
    gamma_star: float
    baseline: float
    baseline_u: float
    a_inf: float
    radius: float
    residual_graph: float
    residual_circle: float


class TransportSpeeds(NamedTuple):
    c_plus: float
    c_minus: float


def _require_growth(p: ModelParams) -> float:
    fp = p.fprime0
    if fp <= 0:
        raise NonPositiveGrowth(f"f'(0) = {fp:.6g} <= 0: no invasion front")
    return fp


def _bisect_predicate(pred, lo, hi, rtol=C_RTOL, max_iter=MAX_BISECT):
    """Smallest x in (lo, hi] with pred(x) true, assuming pred is monotone."""
    for _ in range(max_iter):
        if hi - lo <= rtol * abs(hi):
            break
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def c_field(p: ModelParams) -> float:
    """Fisher-KPP speed 2 sqrt(d f'(0)) of the field alone."""
    return 2.0 * math.sqrt(p.d * _require_growth(p))


def c_benchmark(p: ModelParams) -> tuple[float, float]:
    """Minimal speed of the scalar nonlocal KPP equation u_t = D J u + f(u).

    Minimises c(a) = (D phi_L(a) + f'(0)) / a over a > 0 through its
    stationarity condition a phi'(a) - phi(a) = f'(0) / D.
    Returns (c, minimiser).
    """
    fp = _require_growth(p)
    if p.D <= 0:
        raise ValueError("c_benchmark needs D > 0")
    k, target = p.kernel, fp / p.D

    def stationarity(a):
        return a * k.phi_prime(a) - k.phi(a) - target

    a_max = EXPONENT_BOUND / k.L
    hi = 1.0 / k.L
    while stationarity(hi) < 0:
        hi = min(2.0 * hi, a_max)
        if hi == a_max and stationarity(hi) < 0:
            raise ValueError("minimiser lies beyond the kernel exponent bound")
    a_min = optimize.brentq(stationarity, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                            maxiter=500)
    return (p.D * k.phi(a_min) + fp) / a_min, a_min


def phi_prime_fd(k: Kernel, a: float) -> float:
    """Centred difference of phi_L at step 1e-6 max(1, a)."""
    h = 1e-6 * max(1.0, abs(a))
    return (k.phi(a + h) - k.phi(a - h)) / (2 * h)


def benchmark_stationarity_residual(p: ModelParams, a: float) -> float:
    """|a phi'(a) - phi(a) - f'(0)/D| with phi' by centred differences."""
    k = p.kernel
    return abs(a * phi_prime_fd(k, a) - k.phi(a) - p.fprime0 / p.D)


def D_threshold(p: ModelParams) -> float:
    """Critical line intensity D_* = 2 f'(0) / phi_L(c_K / 2d)."""
    fp = _require_growth(p)
    return 2.0 * fp / p.kernel.phi(c_field(p) / (2.0 * p.d))


def a_inf_plus(p: ModelParams, c: float) -> float:
    """Right vertical asymptote of G1: positive root of D phi(a) = (c - q) a + mu."""
    s = c - p.q
    if p.D == 0:
        return p.mu / (-s) if s < 0 else math.inf
    k = p.kernel

    def h(a):
        return p.D * k.phi(a) - s * a - p.mu

    a_max = EXPONENT_BOUND / k.L
    hi = 1.0 / k.L
    while h(hi) <= 0:
        if hi >= a_max:
            return a_max
        hi = min(2.0 * hi, a_max)
    return optimize.brentq(h, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def a_zero(p: ModelParams, c: float) -> float:
    """Positive zero a_0 of G1: root of D phi(a) = (c - q) a."""
    s = c - p.q
    if p.D <= 0 or s <= 0:
        raise ValueError("G1 has no positive zero for D = 0 or c <= q")
    k = p.kernel

    def h(a):
        return p.D * k.phi(a) - s * a

    hi = 1.0 / k.L
    while h(hi) <= 0:
        hi *= 2.0
    lo = hi / 2.0
    while h(lo) > 0:
        lo /= 2.0
    return optimize.brentq(h, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def G1(p: ModelParams, c: float, a):
    """Graph b = G1^c(a) of the line relation; +inf outside its domain."""
    a = np.asarray(a, dtype=float)
    line = p.mu + (c - p.q) * a
    if p.D > 0:
        a_ok = np.abs(a) * p.L <= EXPONENT_BOUND
        phi = np.full_like(a, np.inf)
        phi[a_ok] = p.kernel.phi(a[a_ok])
        line = line - p.D * phi
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(line > 0, (p.nu / p.d) * (p.mu / line - 1.0), np.inf)
    return float(val) if val.ndim == 0 else val


def _upper_arc(p: ModelParams, c: float, cK: float, a):
    b2 = a * (c / p.d - a) - cK * cK / (4.0 * p.d * p.d)
    return np.sqrt(np.maximum(b2, 0.0))


def _disk_range(p: ModelParams, c: float, cK: float) -> tuple[float, float]:
    root = math.sqrt(max(c * c - cK * cK, 0.0))
    # left point written without cancellation for large c
    return cK * cK / (2.0 * p.d * (c + root)), (c + root) / (2.0 * p.d)


def feasibility_gap(p: ModelParams, c: float, cK: float | None = None) -> tuple[float, float, float]:
    """max over the disk of (upper arc - G1^c) with its argmax (a, b).

    Nonnegative iff a plane-wave supersolution with speed c exists.
    """
    if cK is None:
        cK = c_field(p)
    if c < cK:
        return -math.inf, math.nan, math.nan
    a_lo, a_hi = _disk_range(p, c, cK)
    a_top = min(a_hi, a_inf_plus(p, c))
    if a_top <= a_lo:
        return -math.inf, math.nan, math.nan

    def gap(a):
        return _upper_arc(p, c, cK, a) - G1(p, c, a)

    if a_top == a_lo or a_hi - a_lo <= 1e-300:
        a0 = a_lo
        return float(gap(a0)), a0, float(_upper_arc(p, c, cK, a0))
    right = a_top if a_top == a_hi else np.nextafter(a_top, a_lo)
    grid = np.linspace(a_lo, right, SCAN_POINTS)
    vals = gap(grid)
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, SCAN_POINTS - 1)]
    a_best, v_best = grid[i], vals[i]
    if hi > lo:
        res = optimize.minimize_scalar(lambda a: -float(gap(a)), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-15 * max(1.0, hi)})
        if -res.fun > v_best:
            a_best, v_best = float(res.x), -float(res.fun)
    return float(v_best), float(a_best), float(_upper_arc(p, c, cK, a_best))


def _residuals(p: ModelParams, c: float, cK: float, a: float, b: float) -> tuple[float, float, float]:
    line = -p.D * p.kernel.phi(a) + (c - p.q) * a + p.d * p.mu * b / (p.nu + p.d * b) if p.D > 0 \
        else (c - p.q) * a + p.d * p.mu * b / (p.nu + p.d * b)
    fld = -(a * a + b * b) + c * a / p.d - cK * cK / (4.0 * p.d * p.d)
    rho = math.sqrt(max(c * c - cK * cK, 0.0)) / (2.0 * p.d)
    radius = abs(math.hypot(a - c / (2.0 * p.d), b) - rho)
    return abs(line), abs(fld), radius


def least_speed(p: ModelParams) -> DispersionResult:
    """Least c admitting a plane-wave supersolution, for any D >= 0 and q."""
    cK = c_field(p)
    a_c = cK / (2.0 * p.d)
    if p.q == 0:
        field_dominated = p.D == 0 or p.D <= D_threshold(p)
    else:
        line = (cK - p.q) * a_c - (p.D * p.kernel.phi(a_c) if p.D > 0 else 0.0)
        field_dominated = line >= 0
    if field_dominated:
        return DispersionResult(cK, FIELD_DOMINATED, a_c, 0.0, p.mu / p.nu)

    def feasible(c):
        return feasibility_gap(p, c, cK)[0] >= 0

    hi = 2.0 * cK
    while not feasible(hi):
        hi *= 2.0
        if hi > 1e12 * cK:
            raise RuntimeError("no feasible speed found")
    _, c = _bisect_predicate(feasible, cK, hi)
    _, a, b = feasibility_gap(p, c, cK)
    r_line, r_field, r_rad = _residuals(p, c, cK, a, b)
    return DispersionResult(c, LINE_BOOSTED, a, b, p.mu / (p.nu + p.d * b), r_line, r_field, r_rad)


def c_star(p: ModelParams) -> DispersionResult:
    """Spreading speed of the field-road model with nonlocal line diffusion."""
    return least_speed(p.with_(q=0.0))


def w_star_reduced(mu: float, nu: float, d: float, fprime0: float) -> float:
    """Limit factor w_* of c_* / sqrt(D L^2) as D L^2 -> infinity.

    Least w > 0 for which the parabola alpha = (1 + beta^2/c_K^2) / (2 w)
    reaches the curve alpha^2 - 2 w alpha = mu beta / (f'(0) (2 nu + beta)),
    beta > -2 nu.
    """
    for name, val in (("mu", mu), ("nu", nu), ("d", d), ("fprime0", fprime0)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    cK2 = 4.0 * d * fprime0
    m = mu / fprime0

    def gap(w, beta):
        g = m * beta / (2.0 * nu + beta)
        disc = np.maximum(w * w + g, 0.0)
        upper = np.where(w * w + g >= 0, w + np.sqrt(disc), -np.inf)
        return upper - (1.0 + beta * beta / cK2) / (2.0 * w)

    def feasible(w):
        top = w + math.sqrt(w * w + m)
        beta_hi = math.sqrt(cK2 * max(2.0 * w * top - 1.0, 0.0)) + 1e-12
        beta_lo = -2.0 * nu * (1.0 - 1e-12)
        grid = np.linspace(beta_lo, beta_hi, 4 * SCAN_POINTS)
        vals = gap(w, grid)
        i = int(np.argmax(vals))
        if vals[i] >= 0:
            return True
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(lambda bt: -float(gap(w, bt)), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-14})
        return -res.fun >= 0

    _, w = _bisect_predicate(feasible, 1e-9, 0.5)
    return w


def w_star_limit_speed(p: ModelParams) -> float:
    """Predicted lim c_* / sqrt(D L^2) = sqrt(2 f'(0) <x^2 K>) w_*."""
    fp = _require_growth(p)
    return math.sqrt(2.0 * fp * p.kernel.second_moment()) * w_star_reduced(p.mu, p.nu, p.d, fp)


def decay_rates(p: ModelParams) -> DecayResult:
    """Exponential decay of the SIRT steady state along the line.

    Intersects the graph b = (nu/d)(mu / (mu - D phi_L(a)) - 1) with the circle
    a^2 + b^2 = -f'(level)/d, where level is 0 for R0 < 1 and v_* for R0 > 1.
    """
    f = p.f
    if not isinstance(f, SirCumulative):
        raise TypeError("decay_rates needs the SIR nonlinearity")
    if abs(f.R0 - 1.0) < 1e-9:
        raise CriticalR0(f"R0 = {f.R0} is critical; no exponential decay")
    if p.D <= 0:
        raise ValueError("decay_rates needs D > 0")
    if f.R0 < 1:
        fp, base_v = f.fprime0(), 0.0
    else:
        base_v = f.v_star()
        fp = float(f.fprime(base_v))
    assert fp < 0
    rho = math.sqrt(-fp / p.d)
    k = p.kernel
    a_inf = optimize.brentq(lambda a: p.D * k.phi(a) - p.mu, 0.0, _grow_until(lambda a: p.D * k.phi(a) > p.mu, 1.0 / k.L),
                            xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)

    def graph(a):
        return (p.nu / p.d) * (p.mu / (p.mu - p.D * k.phi(a)) - 1.0)

    def h(a):
        return graph(a) - math.sqrt(max(rho * rho - a * a, 0.0))

    a_hi = min(a_inf * (1.0 - 1e-12), rho)
    # existence follows from the graph/circle geometry
    assert h(a_hi) > 0 > h(0.0)
    a = optimize.brentq(h, 0.0, a_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    b = graph(a)
    return DecayResult(
        a_star=a, b_star=b, gamma_star=p.mu / (p.nu + p.d * b),
        baseline=base_v, baseline_u=p.nu / p.mu * base_v, a_inf=a_inf, radius=rho,
        residual_graph=abs(b - graph(a)), residual_circle=abs(a * a + b * b - rho * rho),
    )


def _grow_until(pred, x):
    while not pred(x):
        x *= 2.0
    return x


def transport_speeds(p: ModelParams) -> TransportSpeeds:
    """Rightward and leftward spreading speeds with transport q on the line."""
    _require_growth(p)
    return TransportSpeeds(least_speed(p).c_star, least_speed(p.with_(q=-p.q)).c_star)


def kappa_star(p: ModelParams) -> float:
    """Limit of c_+ / q as q -> infinity.

    Least kappa in (0, 1) for which (c_K^2/4d^2 + b^2)(1 - kappa)/kappa equals
    d mu b / (nu + d b) for some b >= 0, i.e. 1 / (1 + max_b ratio(b)).
    """
    cK = c_field(p)
    r2 = cK * cK / (4.0 * p.d * p.d)

    def ratio(b):
        return p.d * p.mu * b / ((p.nu + p.d * b) * (r2 + b * b))

    scale = cK / (2.0 * p.d) + p.nu / p.d
    grid = scale * np.logspace(-8, 8, SCAN_POINTS)
    vals = ratio(grid)
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda b: -ratio(b), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-14 * hi})
    best = max(vals[i], -res.fun)
    return 1.0 / (1.0 + best)


def sir_nondimensional(p: ModelParams) -> dict:
    """Nondimensional groups (D_nd, Lambda, R0, mu_bar, nu_bar) of an SIR model."""
    f = p.f
    if not isinstance(f, SirCumulative):
        raise TypeError("nondimensionalisation needs the SIR nonlinearity")
    al = f.alpha
    return dict(D_nd=p.D / al, Lambda=p.L * math.sqrt(al / p.d), R0=f.R0,
                mu_bar=p.mu / al, nu_bar=p.nu / math.sqrt(al * p.d))


def omega_sirt_reduced(D_nd: float, Lambda: float, R0: float, mu_bar: float, nu_bar: float,
                       profile: str = "epanechnikov") -> float:
    """Minimal nondimensional SIRT speed w_SIR^T.

    Same disk/graph problem as ``c_star`` with d = alpha = 1; the dimensional
    speed is sqrt(d alpha) times the returned value.
    """
    if not R0 > 1:
        raise NonPositiveGrowth(f"R0 = {R0} <= 1: no epidemic wave")
    p = ModelParams(d=1.0, D=D_nd, kernel=Kernel(profile, Lambda), mu=mu_bar, nu=nu_bar,
                    f=SirCumulative(S0=R0, beta=1.0, alpha=1.0))
    return c_star(p).c_star


def omega_sirt_limit(lam: float) -> float:
    """Limit factor omega_SIR^T(lambda) of the joint limit R0 -> 1, D L^2 -> infinity.

    Least W for which A >= (1/4 + b^2)/W and A^2 - W A <= lam b hold at some
    (A, b); equivalently (1/4 + b^2)/W <= (W + sqrt(W^2 + 4 lam b))/2.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")

    def best_gap(W):
        def gap(b):
            return 0.5 * (W + np.sqrt(W * W + 4.0 * lam * b)) - (0.25 + b * b) / W

        b_hi = 2.0 * (W + math.sqrt(W) + lam + 1.0) ** 2
        grid = np.linspace(0.0, b_hi, 4 * SCAN_POINTS)
        vals = gap(grid)
        i = int(np.argmax(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(lambda b: -gap(b), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-14})
        return max(vals[i], -res.fun)

    _, W = _bisect_predicate(lambda W: best_gap(W) >= 0, 1e-9, 2.0)
    return W

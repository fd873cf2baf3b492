"""Test functions, weighted norms, and the double-weight Poincare checks.

The natural function space for a degenerate weight w and exponent p pairs
two integrals: the p-energy seminorm  integral of |u'|^p w  over the
structure intervals, and the Lebesgue norm of u against the (p-1) power of
the auxiliary weight.  Membership in the space needs both finite.  The
checks in this module evaluate the pointwise and averaged Poincare
inequalities tying the two weights together, the vanishing/extension
dichotomy at interval endpoints, and provide seeded families of spline test
functions for batteries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .auxweight import AuxWeight
from .degeneracy import DegeneracyStructure
from .quadrature import DEFAULT_CONFIG, IntegralResult, QuadratureConfig, integrate
from .weights import Exponent, Interval, Weight


@dataclass(frozen=True)
class TestFunction:
    """A function with an explicit derivative and a regularity tag.

    tag is one of "AC" (absolutely continuous), "C1", or "Grid" (merely
    sampled; such functions carry no meaningful derivative and never have
    finite original energy).  breakpoints list derivative kinks so
    quadrature can cut panels there.
    """

    __test__ = False  # not a test case, despite the Test prefix

    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Optional[Callable[[np.ndarray], np.ndarray]]
    tag: str
    label: str = ""
    breakpoints: tuple = ()

    def __post_init__(self):
        if self.tag not in ("AC", "C1", "Grid"):
            raise ValueError(f"unknown regularity tag {self.tag!r}")

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def d(self, x):
        if self.deriv is None:
            raise ValueError(f"function {self.label!r} carries no derivative")
        return np.asarray(self.deriv(np.asarray(x, dtype=float)), dtype=float)


def poly_function(coeffs: Sequence[float], label: str = "") -> TestFunction:
    """Polynomial sum(c_k x^k) from low to high degree."""
    c = np.asarray(list(coeffs), dtype=float)
    dc = np.array([k * c[k] for k in range(1, c.size)]) if c.size > 1 else np.zeros(1)
    return TestFunction(
        fn=lambda x: np.polynomial.polynomial.polyval(x, c),
        deriv=lambda x: np.polynomial.polynomial.polyval(x, dc),
        tag="C1",
        label=label or f"poly{list(c)}",
    )


def constant_function(value: float, label: str = "") -> TestFunction:
    v = float(value)
    return TestFunction(
        fn=lambda x: np.full(np.shape(x), v),
        deriv=lambda x: np.zeros(np.shape(x)),
        tag="C1",
        label=label or f"const{v}",
    )


def spline_function(knot_x: Sequence[float], knot_y: Sequence[float],
                    label: str = "") -> TestFunction:
    cs = CubicSpline(np.asarray(knot_x, dtype=float), np.asarray(knot_y, dtype=float),
                     bc_type="natural")
    return TestFunction(fn=cs, deriv=cs.derivative(), tag="C1", label=label or "spline")


def sqrt_edge_function(domain: Interval, label: str = "") -> TestFunction:
    """u(x) = sqrt(x - lo): AC with an unbounded (but integrable) derivative."""
    lo = domain.lo
    return TestFunction(
        fn=lambda x: np.sqrt(np.maximum(x - lo, 0.0)),
        deriv=lambda x: 0.5 / np.sqrt(np.maximum(x - lo, 1e-300)),
        tag="AC",
        label=label or "sqrt-edge",
    )


def log_edge_function(domain: Interval, label: str = "") -> TestFunction:
    """u(x) = log(x - lo): unbounded near lo; useful for infinite-norm cases."""
    lo = domain.lo
    return TestFunction(
        fn=lambda x: np.log(np.maximum(x - lo, 1e-300)),
        deriv=lambda x: 1.0 / np.maximum(x - lo, 1e-300),
        tag="AC",
        label=label or "log-edge",
    )


def random_test_functions(domain: Interval, count: int, seed: int,
                          knots: int = 9) -> list[TestFunction]:
    """Seeded natural cubic splines through uniform [-1, 1] knot values."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(domain.lo, domain.hi, knots)
    out = []
    for i in range(count):
        ys = rng.uniform(-1.0, 1.0, size=knots)
        out.append(spline_function(xs, ys, label=f"spline-{seed}-{i}"))
    return out


# ---------------------------------------------------------------------------
# norms and membership


def seminorm_energy(u: TestFunction, w: Weight, structure: DegeneracyStructure,
                    p: Exponent, cfg: Optional[QuadratureConfig] = None,
                    per_interval: bool = False):
    """Integral of |u'|^p w over the structure intervals (summed IntegralResult).

    With per_interval=True returns (total, tuple of per-interval results).
    """
    cfg = cfg or DEFAULT_CONFIG
    pp = p.p
    removable = [z.location for z in structure.removable_zeros]

    def f(x, _u=u, _w=w):
        return np.abs(_u.d(x)) ** pp * np.asarray(_w(x), dtype=float)

    parts = []
    for iv in structure.intervals:
        hints = [r for r in removable if iv.lo < r < iv.hi]
        cuts = [bp for bp in u.breakpoints if iv.lo < bp < iv.hi]
        parts.append(integrate(f, iv.lo, iv.hi, cfg, singular=hints, breakpoints=cuts))
    total = parts[0] if parts else IntegralResult.finite(0.0, 0.0)
    for r in parts[1:]:
        total = total + r
    if per_interval:
        return total, tuple(parts)
    return total


def lp_aux_norm(u: TestFunction, aux: AuxWeight,
                cfg: Optional[QuadratureConfig] = None) -> IntegralResult:
    """Integral of |u|^p aux^(p-1) over the structure intervals.

    The auxiliary weight vanishes off the interval closures, so this is the
    norm integral over the whole domain.  An empty structure gives 0.
    """
    cfg = cfg or DEFAULT_CONFIG
    pp = aux.exponent.p

    def f(x, _u=u, _a=aux):
        return np.abs(_u(x)) ** pp * np.asarray(_a(x), dtype=float) ** (pp - 1.0)

    total = IntegralResult.finite(0.0, 0.0)
    for part in aux.parts:
        iv = part.base
        cuts = [part.q1, part.q3] + [bp for bp in u.breakpoints if iv.lo < bp < iv.hi]
        res = integrate(f, iv.lo, iv.hi, cfg, breakpoints=cuts)
        total = total + res
    return total


@dataclass(frozen=True)
class MembershipReport:
    """Whether u belongs to the domain of the energy: finite seminorm on the structure."""

    in_space: bool
    seminorm: IntegralResult
    per_interval: tuple


def check_membership(u: TestFunction, w: Weight, structure: DegeneracyStructure,
                     p: Exponent, cfg: Optional[QuadratureConfig] = None) -> MembershipReport:
    if u.tag == "Grid":
        return MembershipReport(False, IntegralResult.divergent(math.inf), ())
    total, parts = seminorm_energy(u, w, structure, p, cfg, per_interval=True)
    return MembershipReport(total.is_finite, total, parts)


def space_norm(u: TestFunction, w: Weight, aux: AuxWeight,
               structure: DegeneracyStructure, p: Exponent,
               cfg: Optional[QuadratureConfig] = None) -> float:
    """(lp_aux_norm^p + seminorm)^(1/p); math.inf when either part diverges."""
    lp = lp_aux_norm(u, aux, cfg)
    semi = seminorm_energy(u, w, structure, p, cfg)
    if not (lp.is_finite and semi.is_finite):
        return math.inf
    return (lp.value + semi.value) ** (1.0 / p.p)


# ---------------------------------------------------------------------------
# pointwise and averaged Poincare checks


@dataclass(frozen=True)
class PointwiseCheck:
    side: str        # "left" | "right"
    gap_lhs: float   # |u(x)-u(eta)| aux(eta)^(1/p')
    gap_rhs: float   # (integral of |u'|^p w between eta and x)^(1/p)
    gap_ok: bool
    mass_lhs: float  # |u(eta)|^p aux(eta)^(p-1)
    mass_rhs: float  # 2^(p-1) (|u(x)|^p aux(eta)^(p-1) + outer energy integral)
    mass_ok: bool

    @property
    def ok(self) -> bool:
        return self.gap_ok and self.mass_ok


def pointwise_poincare_check(u: TestFunction, w: Weight, aux: AuxWeight,
                             interval_index: int, eta: float, x: float,
                             cfg: Optional[QuadratureConfig] = None) -> PointwiseCheck:
    """Check the two pointwise inequalities at an ordered pair (eta, x).

    Left half: lo < eta <= x <= mid; right half: mid <= x <= eta < hi.  The
    gap inequality bounds |u(x) - u(eta)| by the energy between them; the
    mass inequality bounds the weighted size of u(eta) by u(x) plus the
    energy over the outer stretch (lo to x on the left, x to hi on the
    right).
    """
    cfg = cfg or DEFAULT_CONFIG
    part = aux.parts[interval_index]
    iv = part.base
    mid = iv.mid
    pp = aux.exponent.p
    if iv.lo < eta <= x <= mid:
        side = "left"
        gap_span = (eta, x)
        mass_span = (iv.lo, x)
    elif mid <= x <= eta < iv.hi:
        side = "right"
        gap_span = (x, eta)
        mass_span = (x, iv.hi)
    else:
        raise ValueError(
            f"(eta, x)=({eta}, {x}) violates the ordering for interval ({iv.lo}, {iv.hi})")

    def energy(xv):
        return np.abs(u.d(xv)) ** pp * np.asarray(w(xv), dtype=float)

    aux_eta = float(aux(eta))
    u_eta = float(u(np.array([eta]))[0])
    u_x = float(u(np.array([x]))[0])

    gap_lhs = abs(u_x - u_eta) * aux_eta ** (1.0 / aux.exponent.conj)
    if gap_span[0] < gap_span[1]:
        g = integrate(energy, gap_span[0], gap_span[1], cfg,
                      breakpoints=[b for b in u.breakpoints if gap_span[0] < b < gap_span[1]])
        gap_rhs = g.value ** (1.0 / pp) if g.is_finite else math.inf
    else:
        gap_rhs = 0.0
    slack = 1e-9 * max(gap_rhs, 1.0) + 1e-12
    gap_ok = gap_lhs <= gap_rhs + slack

    mass_lhs = abs(u_eta) ** pp * aux_eta ** (pp - 1.0)
    m = integrate(energy, mass_span[0], mass_span[1], cfg,
                  breakpoints=[b for b in u.breakpoints if mass_span[0] < b < mass_span[1]])
    m_val = m.value if m.is_finite else math.inf
    mass_rhs = 2.0 ** (pp - 1.0) * (abs(u_x) ** pp * aux_eta ** (pp - 1.0) + m_val)
    mass_ok = mass_lhs <= mass_rhs + 1e-9 * max(mass_rhs, 1.0) + 1e-12
    return PointwiseCheck(side, gap_lhs, gap_rhs, gap_ok, mass_lhs, mass_rhs, mass_ok)


@dataclass(frozen=True)
class PoincareReport:
    """Averaged double-weight Poincare inequality, per interval and summed.

    lhs_i averages |u - u(mid_i)|^p aux^(p-1) over interval i (integral
    divided by the width); rhs_i is the p-energy on that interval.  The
    global inequality sums both sides.  ratio is lhs/rhs (0 when both sides
    vanish, inf when only rhs does).
    """

    per_interval: tuple
    lhs: float
    rhs: float
    ratio: float
    ok: bool


def poincare_global_check(u: TestFunction, w: Weight, aux: AuxWeight,
                          structure: DegeneracyStructure, p: Exponent,
                          cfg: Optional[QuadratureConfig] = None) -> PoincareReport:
    cfg = cfg or DEFAULT_CONFIG
    pp = p.p
    removable = [z.location for z in structure.removable_zeros]
    rows = []
    lhs_total = rhs_total = 0.0
    for idx, part in enumerate(aux.parts):
        iv = part.base
        u_mid = float(u(np.array([iv.mid]))[0])

        def num(xv, _um=u_mid):
            return np.abs(u(xv) - _um) ** pp * np.asarray(aux(xv), dtype=float) ** (pp - 1.0)

        def den(xv):
            return np.abs(u.d(xv)) ** pp * np.asarray(w(xv), dtype=float)

        cuts = [part.q1, part.q3] + [b for b in u.breakpoints if iv.lo < b < iv.hi]
        n = integrate(num, iv.lo, iv.hi, cfg, breakpoints=cuts)
        hints = [r for r in removable if iv.lo < r < iv.hi]
        d_ = integrate(den, iv.lo, iv.hi, cfg, singular=hints,
                       breakpoints=[b for b in u.breakpoints if iv.lo < b < iv.hi])
        lhs_i = n.value / iv.width if n.is_finite else math.inf
        rhs_i = d_.value if d_.is_finite else math.inf
        rows.append((lhs_i, rhs_i))
        lhs_total += lhs_i
        rhs_total += rhs_i
    if rhs_total == 0.0:
        ratio = 0.0 if lhs_total <= 1e-12 else math.inf
    else:
        ratio = lhs_total / rhs_total
    ok = lhs_total <= rhs_total * (1.0 + 1e-8) + 1e-12
    return PoincareReport(tuple(rows), lhs_total, rhs_total, ratio, ok)


# ---------------------------------------------------------------------------
# endpoint behavior: vanishing on divergent sides, AC extension on integrable ones


@dataclass(frozen=True)
class VanishingCheck:
    """Decay of |u|^p aux^(p-1) toward an interval endpoint.

    Sampled at geometric offsets width * 2^-k; ok requires the last three
    samples to sit below tol_factor times the largest sample.  The samples
    themselves are reported so callers can judge slow (logarithmic) decay.
    """

    side: str
    offsets: tuple
    samples: tuple
    peak: float
    tail: float
    ok: bool


def endpoint_vanishing_check(u: TestFunction, aux: AuxWeight, interval_index: int,
                             side: str, k_lo: int = 4, k_hi: int = 40,
                             tol_factor: float = 1e-6) -> VanishingCheck:
    part = aux.parts[interval_index]
    iv = part.base
    pp = aux.exponent.p
    anchor = iv.lo if side == "left" else iv.hi
    sgn = 1.0 if side == "left" else -1.0
    ks = np.arange(k_lo, k_hi + 1)
    offs = iv.width * 2.0 ** (-ks.astype(float))
    xs = anchor + sgn * offs
    keep = xs != anchor  # drop offsets that collapse at float resolution
    xs = xs[keep]
    offs = offs[keep]
    vals = np.abs(u(xs)) ** pp * np.asarray(aux(xs), dtype=float) ** (pp - 1.0)
    peak = float(np.max(vals)) if vals.size else 0.0
    tail = float(np.max(vals[-3:])) if vals.size >= 3 else peak
    ok = vals.size >= 3 and tail <= tol_factor * max(peak, 1e-300)
    return VanishingCheck(side, tuple(map(float, offs)), tuple(map(float, vals)),
                          peak, tail, bool(ok))


@dataclass(frozen=True)
class ExtensionCheck:
    """Continuous extension of u to an endpoint where the transform is integrable.

    holder_lhs is the L1 norm of u' over the half interval; holder_rhs the
    product of the p-energy root and the transform integral root that bounds
    it.  extension_value is u(mid) minus the signed integral of u' over the
    half, the limit of u at the endpoint.
    """

    side: str
    holder_lhs: float
    holder_rhs: float
    extension_value: float
    ok: bool


def ac_extension_check(u: TestFunction, w: Weight, aux: AuxWeight,
                       structure: DegeneracyStructure, interval_index: int, side: str,
                       cfg: Optional[QuadratureConfig] = None) -> ExtensionCheck:
    cfg = cfg or DEFAULT_CONFIG
    part = aux.parts[interval_index]
    iv = part.base
    p = aux.exponent
    pp = p.p
    cls = iv.lo_class if side == "left" else iv.hi_class
    if not cls.integrable:
        raise ValueError(f"transform not integrable on the {side} side; no AC extension there")
    lo, hi = (iv.lo, iv.mid) if side == "left" else (iv.mid, iv.hi)
    removable = [z.location for z in structure.removable_zeros if lo < z.location < hi]
    cuts = [b for b in u.breakpoints if lo < b < hi]

    def du_abs(xv):
        return np.abs(u.d(xv))

    def energy(xv):
        return np.abs(u.d(xv)) ** pp * np.asarray(w(xv), dtype=float)

    l1 = integrate(du_abs, lo, hi, cfg, singular=removable, breakpoints=cuts)
    en = integrate(energy, lo, hi, cfg, singular=removable, breakpoints=cuts)
    holder_lhs = l1.value if l1.is_finite else math.inf
    if en.is_finite:
        holder_rhs = en.value ** (1.0 / pp) * cls.value ** (1.0 / p.conj)
    else:
        holder_rhs = math.inf
    signed = integrate(u.d, lo, hi, cfg, singular=removable, breakpoints=cuts)
    u_mid = float(u(np.array([iv.mid]))[0])
    if side == "left":
        ext = u_mid - (signed.value if signed.is_finite else math.nan)
    else:
        ext = u_mid + (signed.value if signed.is_finite else math.nan)
    ok = (math.isfinite(holder_lhs)
          and holder_lhs <= holder_rhs * (1.0 + 1e-8) + 1e-10
          and math.isfinite(ext))
    return ExtensionCheck(side, holder_lhs, holder_rhs, float(ext), bool(ok))

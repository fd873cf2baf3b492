"""Weight models on a bounded open interval.

A weight is a nonnegative, locally integrable function w on a bounded open
interval (a, b).  Weights here may vanish (degenerate) at isolated points or
on whole subintervals; everything downstream (degeneracy detection, the
auxiliary weight, energy functionals) is driven by the negative-power
transform w^(-1/(p-1)) for an exponent 1 < p < infinity.

Three representations are supported:

* ClosedFormWeight: arbitrary vectorized callable, optionally annotated with
  the locations and one-sided power exponents of its zeros.
* PiecewisePowerWeight: a tiling of the domain by pure power pieces
  m * |x - pivot|^alpha; uncovered subintervals mean w == 0 there.  All
  transform integrals have closed forms, which the classifier exploits.
* GridSampledWeight: samples on a grid, evaluated by linear interpolation.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class WeightSpecError(ValueError):
    """Malformed weight specification (JSON/CSV/inline string or constructor args)."""


@dataclass(frozen=True)
class Exponent:
    """Integrability exponent p with 1 < p < infinity."""

    p: float

    def __post_init__(self):
        if not (isinstance(self.p, (int, float)) and math.isfinite(self.p) and self.p > 1.0):
            raise WeightSpecError(f"exponent p must satisfy 1 < p < inf, got {self.p!r}")
        object.__setattr__(self, "p", float(self.p))

    @property
    def conj(self) -> float:
        """Conjugate exponent p/(p-1); satisfies 1/p + 1/conj == 1."""
        return self.p / (self.p - 1.0)

    def alpha_p(self, alpha: float) -> float:
        """Rescaled power alpha/(p-1); the transform of |x|^alpha behaves like |x|^-alpha_p."""
        return alpha / (self.p - 1.0)


@dataclass(frozen=True)
class Interval:
    """Open interval (lo, hi) with the quarter points used by the auxiliary weight."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise WeightSpecError(f"need finite lo < hi, got ({self.lo!r}, {self.hi!r})")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def q1(self) -> float:
        return self.lo + 0.25 * self.width

    @property
    def q3(self) -> float:
        return self.lo + 0.75 * self.width


@dataclass(frozen=True)
class ZeroInfo:
    """An isolated zero of the weight and its one-sided local power exponents.

    An exponent of 0.0 means the one-sided limit of w is positive (no decay on
    that side).  math.inf means w vanishes identically on that side (adjacent
    zero region).  None means the side lies outside the domain.
    """

    location: float
    left_exponent: Optional[float]
    right_exponent: Optional[float]


class Weight:
    """Base class; concrete weights implement __call__ on float arrays."""

    domain: Interval
    family: str = "custom"
    truncated: bool = False  # finite truncation of an infinite bump family
    truncation_count: int = 0

    def __call__(self, x) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def known_zeros(self) -> Optional[tuple[ZeroInfo, ...]]:
        """Exact zero metadata, or None when only scanning can find zeros."""
        return None

    def zero_regions(self) -> tuple[tuple[float, float], ...]:
        """Maximal positive-length subintervals where w == 0 identically."""
        return ()

    def transform(self, p: Exponent) -> Callable[[np.ndarray], np.ndarray]:
        """The function w^(-1/(p-1)), with +inf wherever w == 0."""
        expo = -1.0 / (p.p - 1.0)

        def sigma(x):
            vals = np.asarray(self(x), dtype=float)
            out = np.full(vals.shape, np.inf)
            pos = vals > 0.0
            out[pos] = vals[pos] ** expo
            return out

        return sigma

    def spec_dict(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError


def eval_weight(w: Weight, x) -> np.ndarray:
    """Evaluate a weight, checking nonnegativity and finiteness of the values."""
    vals = np.asarray(w(np.asarray(x, dtype=float)), dtype=float)
    if np.any(~np.isfinite(vals)):
        bad = np.asarray(x, dtype=float)[~np.isfinite(vals)]
        raise WeightSpecError(f"weight evaluated non-finite at x={bad[:3]!r}")
    if np.any(vals < 0.0):
        bad = np.asarray(x, dtype=float)[vals < 0.0]
        raise WeightSpecError(f"weight evaluated negative at x={bad[:3]!r}")
    return vals


def neg_power_transform(w: Weight, p: Exponent) -> Callable[[np.ndarray], np.ndarray]:
    """w^(-1/(p-1)) as a vectorized callable; zeros of w map to +inf."""
    return w.transform(p)


# ---------------------------------------------------------------------------
# closed form weights


@dataclass(frozen=True)
class ClosedFormWeight(Weight):
    fn: Callable[[np.ndarray], np.ndarray] = None
    domain: Interval = None
    family: str = "custom"
    params: dict = field(default_factory=dict)
    zeros: Optional[tuple[ZeroInfo, ...]] = None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.asarray(self.fn(x), dtype=float)

    def known_zeros(self):
        return self.zeros

    def spec_dict(self) -> dict:
        return {"family": self.family, **self.params}


def builtin_figure1() -> ClosedFormWeight:
    """w(x) = (1 - x^2)^2 on (-2, 2); interior double zeros at -1 and +1."""
    return ClosedFormWeight(
        fn=lambda x: (1.0 - x * x) ** 2,
        domain=Interval(-2.0, 2.0),
        family="figure1",
        zeros=(ZeroInfo(-1.0, 2.0, 2.0), ZeroInfo(1.0, 2.0, 2.0)),
    )


def builtin_power(alpha: float) -> ClosedFormWeight:
    """w(x) = x^alpha on (0, 1); requires alpha > -1 so w stays locally integrable."""
    alpha = float(alpha)
    if not (alpha > -1.0 and math.isfinite(alpha)):
        raise WeightSpecError(f"power weight needs alpha > -1, got {alpha}")
    if alpha == 0.0:
        fn = lambda x: np.ones_like(np.asarray(x, dtype=float))
    else:
        def fn(x, _a=alpha):
            x = np.asarray(x, dtype=float)
            with np.errstate(divide="ignore", over="ignore"):
                out = np.where(x > 0.0, np.abs(x) ** _a, np.inf if _a < 0 else 0.0)
            return out

    zeros = (ZeroInfo(0.0, None, alpha),) if alpha > 0.0 else None
    return ClosedFormWeight(
        fn=fn,
        domain=Interval(0.0, 1.0),
        family="power",
        params={"alpha": alpha},
        zeros=zeros,
    )


# ---------------------------------------------------------------------------
# piecewise power weights


@dataclass(frozen=True)
class PowerPiece:
    """w(x) = scale * |x - pivot|^exponent on [lo, hi).

    Scale may be given exactly through its base-2 log (log2scale) so that
    families with astronomically large coefficients never round through a
    float scale; scale itself may then overflow to inf and is only used for
    display.
    """

    lo: float
    hi: float
    scale: float
    pivot: float
    exponent: float
    log2scale: Optional[float] = None

    def __post_init__(self):
        if not (self.lo < self.hi and math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise WeightSpecError(f"bad piece span ({self.lo}, {self.hi})")
        if self.log2scale is None:
            if not (self.scale > 0.0 and math.isfinite(self.scale)):
                raise WeightSpecError(f"piece scale must be positive finite, got {self.scale}")
        elif not math.isfinite(self.log2scale):
            raise WeightSpecError(f"piece log2scale must be finite, got {self.log2scale}")
        if not (self.exponent > -1.0 and math.isfinite(self.exponent)):
            raise WeightSpecError(f"piece exponent must be > -1, got {self.exponent}")
        # interior zeros are not representable by one piece; split at the pivot
        if self.exponent != 0.0 and self.lo < self.pivot < self.hi:
            raise WeightSpecError(
                f"piece pivot {self.pivot} lies strictly inside ({self.lo}, {self.hi}); split there"
            )

    @property
    def log2_scale(self) -> float:
        return math.log2(self.scale) if self.log2scale is None else self.log2scale


class PiecewisePowerWeight(Weight):
    """Tiling of the domain by power pieces; uncovered spans carry w == 0.

    Piece scales can be astronomically large (cascade bumps); evaluation and
    transform go through base-2 logs whenever direct arithmetic could
    overflow or underflow.
    """

    def __init__(self, domain: Interval, pieces: Sequence[PowerPiece],
                 family: str = "piecewise_power", params: Optional[dict] = None,
                 truncated: bool = False, truncation_count: int = 0):
        self.domain = domain
        ps = sorted(pieces, key=lambda q: q.lo)
        for q in ps:
            if q.lo < domain.lo - 1e-12 or q.hi > domain.hi + 1e-12:
                raise WeightSpecError(f"piece ({q.lo}, {q.hi}) outside domain {domain}")
        for qa, qb in zip(ps, ps[1:]):
            if qb.lo < qa.hi - 1e-12 * domain.width:
                raise WeightSpecError(f"pieces overlap near x={qb.lo}")
        self.pieces: tuple[PowerPiece, ...] = tuple(ps)
        self.family = family
        self.params = dict(params or {})
        self.truncated = truncated
        self.truncation_count = truncation_count
        self._los = np.array([q.lo for q in self.pieces])
        self._his = np.array([q.hi for q in self.pieces])

    def _piece_index(self, x: np.ndarray) -> np.ndarray:
        # index of the piece containing each x ([lo, hi) half open, last piece closed), -1 if none
        idx = np.searchsorted(self._los, x, side="right") - 1
        idx = np.clip(idx, 0, len(self.pieces) - 1) if len(self.pieces) else np.full(x.shape, -1, dtype=int)
        if len(self.pieces):
            inside = (x >= self._los[idx]) & ((x < self._his[idx]) | (x <= self._his[idx]) & (idx == len(self.pieces) - 1))
            idx = np.where(inside, idx, -1)
        return idx

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        out = np.zeros(flat.shape)
        idx = self._piece_index(flat)
        for i, q in enumerate(self.pieces):
            m = idx == i
            if not m.any():
                continue
            d = np.abs(flat[m] - q.pivot)
            if abs(q.log2_scale) > 512.0:
                # log-domain path: exp2(log2 m + alpha*log2 d), exact 0 at the pivot
                with np.errstate(divide="ignore"):
                    out[m] = np.exp2(q.log2_scale + q.exponent * np.log2(d))
            else:
                out[m] = q.scale * d ** q.exponent
        return out.reshape(np.shape(x)) if np.shape(x) else float(out[0])

    def transform(self, p: Exponent) -> Callable[[np.ndarray], np.ndarray]:
        inv = 1.0 / (p.p - 1.0)

        def sigma(x, _inv=inv):
            x = np.asarray(x, dtype=float)
            flat = np.atleast_1d(x).ravel()
            out = np.full(flat.shape, np.inf)
            idx = self._piece_index(flat)
            for i, q in enumerate(self.pieces):
                m = idx == i
                if not m.any():
                    continue
                d = np.abs(flat[m] - q.pivot)
                with np.errstate(divide="ignore", over="ignore"):
                    out[m] = np.exp2(-_inv * q.log2_scale - _inv * q.exponent * np.log2(d))
            return out.reshape(np.shape(x)) if np.shape(x) else float(out[0])

        return sigma

    def known_zeros(self) -> tuple[ZeroInfo, ...]:
        regions = self.zero_regions()

        def _side_exponent(z: float, side: int) -> Optional[float]:
            # side -1: behavior on (z-eps, z); +1: on (z, z+eps)
            if (side < 0 and z <= self.domain.lo) or (side > 0 and z >= self.domain.hi):
                return None
            for lo, hi in regions:
                if (side < 0 and abs(hi - z) <= 1e-14 * self.domain.width) or \
                   (side > 0 and abs(lo - z) <= 1e-14 * self.domain.width):
                    return math.inf
            for q in self.pieces:
                if side < 0 and abs(q.hi - z) <= 1e-14 * self.domain.width:
                    return q.exponent if q.pivot == q.hi else 0.0
                if side > 0 and abs(q.lo - z) <= 1e-14 * self.domain.width:
                    return q.exponent if q.pivot == q.lo else 0.0
            return math.inf  # no piece on that side: uncovered, treated as zero region

        candidates = set()
        for q in self.pieces:
            if q.exponent > 0.0 and q.pivot in (q.lo, q.hi):
                candidates.add(q.pivot)
        zeros = []
        for z in sorted(candidates):
            zeros.append(ZeroInfo(z, _side_exponent(z, -1), _side_exponent(z, +1)))
        return tuple(zeros)

    def zero_regions(self) -> tuple[tuple[float, float], ...]:
        tol = 1e-14 * self.domain.width
        regions = []
        cursor = self.domain.lo
        for q in self.pieces:
            if q.lo > cursor + tol:
                regions.append((cursor, q.lo))
            cursor = max(cursor, q.hi)
        if self.domain.hi > cursor + tol:
            regions.append((cursor, self.domain.hi))
        return tuple(regions)

    def exact_transform_integral(self, p: Exponent, lo: float, hi: float) -> float:
        """Closed-form integral of w^(-1/(p-1)) over [lo, hi]; math.inf when divergent.

        Pure power pieces integrate to power or log antiderivatives; any
        positive-length overlap with an uncovered region makes the integral
        infinite outright.
        """
        if not (self.domain.lo - 1e-12 <= lo < hi <= self.domain.hi + 1e-12):
            raise ValueError(f"span ({lo}, {hi}) outside domain")
        tol = 1e-14 * self.domain.width
        for rlo, rhi in self.zero_regions():
            if min(hi, rhi) - max(lo, rlo) > tol:
                return math.inf
        inv = 1.0 / (p.p - 1.0)
        total = 0.0
        for q in self.pieces:
            s, e = max(lo, q.lo), min(hi, q.hi)
            if e - s <= 0.0:
                continue
            ap = q.exponent * inv  # transform behaves like d^-ap near the pivot
            c_log2 = -inv * q.log2_scale
            d0, d1 = sorted((abs(s - q.pivot), abs(e - q.pivot)))
            if ap >= 1.0 and d0 <= tol:
                return math.inf
            if abs(ap - 1.0) < 1e-15:
                if d0 <= 0.0:
                    return math.inf
                total += (2.0 ** c_log2) * math.log(d1 / d0)
            else:
                # antiderivative d^(1-ap)/(1-ap), one-sided limit 0 at the pivot when ap < 1
                g = 1.0 - ap
                total += (2.0 ** c_log2) * (d1 ** g - d0 ** g) / g
        return total

    def local_exponent_at(self, z: float, side: int) -> Optional[float]:
        """Exact power exponent of w at z on the given side (+1 right, -1 left)."""
        for info in self.known_zeros():
            if abs(info.location - z) <= 1e-14 * self.domain.width:
                return info.right_exponent if side > 0 else info.left_exponent
        tol = 1e-14 * self.domain.width
        for lo, hi in self.zero_regions():
            if (side > 0 and lo - tol <= z < hi) or (side < 0 and lo < z <= hi + tol):
                return math.inf
        return 0.0  # w positive on that side

    def spec_dict(self) -> dict:
        if self.params:
            return {"family": self.family, **self.params}
        return {
            "family": "piecewise_power",
            "domain": [self.domain.lo, self.domain.hi],
            "pieces": [
                {"lo": q.lo, "hi": q.hi, "scale": q.scale, "pivot": q.pivot, "exponent": q.exponent}
                for q in self.pieces
            ],
        }


def builtin_cascade(alpha: float, p: Exponent, bumps: int) -> PiecewisePowerWeight:
    """Packed power bumps on (0, 1): bump i has width 2^-i and scale 2^((i+1)*alpha).

    Bump i occupies (a_i, b_i) with a_1 = 0 and a_{i+1} = b_i, rising like
    scale*(x-a_i)^alpha to the bump midpoint and falling like
    scale*(b_i-x)^alpha after it.  Requires alpha/(p-1) > 1, which makes every
    bump boundary a non-removable degeneracy for that p.  The tail
    (1 - 2^-bumps, 1) is left uncovered (w == 0 there); the truncation marker
    records that the family continues past any finite cut.
    """
    alpha = float(alpha)
    if not alpha / (p.p - 1.0) > 1.0:
        raise WeightSpecError(
            f"cascade needs alpha/(p-1) > 1; alpha={alpha}, p={p.p} gives {alpha / (p.p - 1.0):.6g}"
        )
    if not (1 <= bumps <= 40):
        raise WeightSpecError(f"bump count must be in 1..40, got {bumps}")
    pieces = []
    for i in range(1, bumps + 1):
        a_i = 1.0 - 2.0 ** (-(i - 1))
        b_i = 1.0 - 2.0 ** (-i)
        mid = 0.5 * (a_i + b_i)
        lg2 = (i + 1) * alpha  # scale = 2^((i+1)*alpha), kept exact in log2 form
        scale = 2.0 ** lg2 if lg2 < 1020 else math.inf
        pieces.append(PowerPiece(a_i, mid, scale, a_i, alpha, log2scale=lg2))
        pieces.append(PowerPiece(mid, b_i, scale, b_i, alpha, log2scale=lg2))
    return PiecewisePowerWeight(
        Interval(0.0, 1.0), pieces,
        family="cascade", params={"alpha": alpha, "bumps": bumps},
        truncated=True, truncation_count=bumps,
    )


# ---------------------------------------------------------------------------
# grid sampled weights


class GridSampledWeight(Weight):
    """Linear interpolation of nonnegative samples on a strictly increasing grid."""

    family = "grid"

    def __init__(self, x: Sequence[float], values: Sequence[float], source: str = ""):
        x = np.asarray(x, dtype=float)
        v = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
            raise WeightSpecError("grid weight needs a strictly increasing 1-d grid with >= 2 nodes")
        if v.shape != x.shape or np.any(~np.isfinite(v)):
            raise WeightSpecError("grid weight values must be finite and match the grid")
        vmax = float(np.max(v)) if v.size else 0.0
        if np.any(v < -1e-12 * max(vmax, 1.0)):
            raise WeightSpecError("grid weight has significantly negative samples")
        self.x = x
        self.values = np.maximum(v, 0.0)
        self.domain = Interval(float(x[0]), float(x[-1]))
        self.source = source

    def __call__(self, xq) -> np.ndarray:
        xq = np.asarray(xq, dtype=float)
        return np.interp(xq, self.x, self.values)

    @property
    def zero_tol(self) -> float:
        return 1e-14 * float(np.max(self.values))

    def cell_width_near(self, z: float) -> float:
        j = int(np.clip(np.searchsorted(self.x, z), 1, self.x.size - 1))
        lo = max(j - 2, 0)
        hi = min(j + 2, self.x.size - 1)
        return float(np.max(np.diff(self.x[lo:hi + 1])))

    def spec_dict(self) -> dict:
        if self.source:
            return {"family": "grid", "csv": self.source}
        return {"family": "grid", "x": self.x.tolist(), "w": self.values.tolist()}


# ---------------------------------------------------------------------------
# loading


def weight_from_csv(path: str) -> GridSampledWeight:
    """Two-column CSV (x, w), optional header row."""
    xs, ws = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                xs.append(float(row[0]))
                ws.append(float(row[1]))
            except (ValueError, IndexError):
                if xs:
                    raise WeightSpecError(f"malformed CSV row {row!r} in {path}")
                continue  # header
    if len(xs) < 2:
        raise WeightSpecError(f"CSV {path} holds fewer than 2 numeric rows")
    return GridSampledWeight(xs, ws, source=path)


def weight_from_spec(spec: dict, p: Optional[Exponent] = None) -> Weight:
    """Build a weight from its JSON-style dict specification."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise WeightSpecError(f"weight spec must be a dict with a 'family' key, got {spec!r}")
    family = spec["family"]
    if family == "figure1":
        return builtin_figure1()
    if family == "power":
        return builtin_power(spec.get("alpha", 0.0))
    if family == "cascade":
        if p is None:
            raise WeightSpecError("cascade weight needs the run exponent p for validation")
        return builtin_cascade(spec.get("alpha", 2.0), p, int(spec.get("bumps", spec.get("M", 8))))
    if family == "grid":
        if "csv" in spec:
            return weight_from_csv(spec["csv"])
        if "x" in spec and "w" in spec:
            return GridSampledWeight(spec["x"], spec["w"])
        raise WeightSpecError("grid weight spec needs 'csv' or 'x'+'w'")
    if family == "piecewise_power":
        dom = spec.get("domain")
        if not (isinstance(dom, (list, tuple)) and len(dom) == 2):
            raise WeightSpecError("piecewise_power spec needs 'domain': [lo, hi]")
        pieces = [
            PowerPiece(float(q["lo"]), float(q["hi"]), float(q.get("scale", 1.0)),
                       float(q["pivot"]), float(q.get("exponent", 0.0)))
            for q in spec.get("pieces", [])
        ]
        return PiecewisePowerWeight(Interval(float(dom[0]), float(dom[1])), pieces)
    raise WeightSpecError(f"unknown weight family {family!r}")


def parse_weight_arg(text: str, p: Optional[Exponent] = None) -> Weight:
    """Parse a CLI weight argument.

    Accepts 'figure1', 'power:alpha=0', 'cascade:alpha=2,bumps=8',
    'grid:PATH.csv', a path to a .json spec file, or a path to a .csv grid.
    """
    text = text.strip()
    if text.endswith(".json") and os.path.exists(text):
        with open(text) as fh:
            return weight_from_spec(json.load(fh), p)
    if text.endswith(".csv") and os.path.exists(text):
        return weight_from_csv(text)
    name, _, argstr = text.partition(":")
    name = name.strip().lower()
    kwargs = {}
    if argstr:
        if name == "grid":
            return weight_from_csv(argstr.strip())
        for part in argstr.split(","):
            if not part.strip():
                continue
            k, _, v = part.partition("=")
            if not _:
                raise WeightSpecError(f"bad weight argument fragment {part!r}")
            kwargs[k.strip()] = float(v)
    spec = {"family": name, **kwargs}
    if "m" in spec:  # allow cascade:alpha=2,M=8 spelling
        spec["bumps"] = spec.pop("m")
    return weight_from_spec(spec, p)

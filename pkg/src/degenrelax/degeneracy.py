"""Degeneracy structure of a weight: where the transform w^(-1/(p-1)) is locally integrable.

The structure of a weight w on (a, b) for an exponent p is the maximal open
set where w^(-1/(p-1)) is locally integrable, decomposed into finitely many
ordered disjoint open intervals.  Interval boundaries arise three ways:

* the domain endpoints themselves,
* boundaries of zero regions (w == 0 on a span, so the transform is +inf
  on a set of positive measure there),
* isolated zeros z where the transform fails local integrability on at
  least one side, i.e. the local power exponent alpha of w satisfies
  alpha/(p-1) >= 1 on that side.

Isolated zeros that are integrable from both sides are removable: they stay
strictly inside an interval and are reported as diagnostics only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .quadrature import (DEFAULT_CONFIG, EndpointClass, QuadratureConfig,
                         classify_endpoint_integrability, local_exponent_estimate)
from .weights import (Exponent, GridSampledWeight, Interval, PiecewisePowerWeight,
                      Weight, ZeroInfo)


@dataclass(frozen=True)
class DegeneracyInterval:
    """One maximal interval of the structure, with one-sided endpoint behavior."""

    lo: float
    hi: float
    lo_class: EndpointClass  # integrability of the transform next to lo, toward mid
    hi_class: EndpointClass

    @property
    def span(self) -> Interval:
        return Interval(self.lo, self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class DegeneracyStructure:
    """Ordered decomposition of the local-integrability set of the transform.

    kind is "zero" when the set is empty (w vanishes a.e.), "finite" for an
    ordinary finite decomposition, and "infinite_truncated" when the weight
    is a finite truncation of an infinite family, so the finite interval
    list stands in for an infinite one.
    """

    p: float
    intervals: tuple[DegeneracyInterval, ...]
    kind: str
    removable_zeros: tuple[ZeroInfo, ...]
    split_zeros: tuple[ZeroInfo, ...]
    zero_regions: tuple[tuple[float, float], ...]

    @property
    def count(self) -> int:
        return len(self.intervals)

    def interval_containing(self, x: float) -> Optional[int]:
        for i, iv in enumerate(self.intervals):
            if iv.lo <= x <= iv.hi:
                return i
        return None


def _golden_min(f, lo: float, hi: float, iters: int = 90) -> float:
    """Golden-section minimum of a unimodal-ish scalar function."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        if b - a <= 1e-13 * max(abs(a), abs(b), 1.0):
            break
    return 0.5 * (a + b)


def _bisect_threshold(f, below: float, above: float, tol_per_unit: float = 1e-12) -> float:
    """Boundary point between f <= 0 at `below` and f > 0 at `above`."""
    span = abs(above - below)
    a, b = below, above
    for _ in range(200):
        m = 0.5 * (a + b)
        if f(m) <= 0.0:
            a = m
        else:
            b = m
        if abs(b - a) <= tol_per_unit * span:
            break
    return 0.5 * (a + b)


def _scan_weight(w: Weight):
    """Zero candidates of a weight without metadata: (isolated zeros, zero regions)."""
    dom = w.domain
    if isinstance(w, GridSampledWeight):
        # the interpolant vanishes exactly at zero nodes and on spans between
        # consecutive zero nodes, nowhere else
        tol = w.zero_tol
        below = w.values <= tol
        zeros, regions = [], []
        i = 0
        while i < w.x.size:
            if not below[i]:
                i += 1
                continue
            j = i
            while j + 1 < w.x.size and below[j + 1]:
                j += 1
            if j > i:
                regions.append((float(w.x[i]), float(w.x[j])))
            else:
                zeros.append(float(w.x[i]))
            i = j + 1
        return zeros, regions

    n = 8193
    xs = np.linspace(dom.lo, dom.hi, n)
    vals = np.asarray(w(xs), dtype=float)
    peak = float(np.max(vals))
    if peak <= 0.0:
        return [], [(dom.lo, dom.hi)]
    tol = 1e-14 * peak

    regions = []
    below = vals <= tol
    i = 0
    run_bounds = []
    while i < n:
        if not below[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and below[j + 1]:
            j += 1
        run_bounds.append((i, j))
        i = j + 1
    covered = []
    for i0, i1 in run_bounds:
        if i1 > i0:  # a genuine flat span; refine its edges
            lo_edge = xs[i0] if i0 == 0 else _bisect_threshold(
                lambda t: float(w(np.array([t]))[0]) - tol, xs[i0], xs[i0 - 1])
            hi_edge = xs[i1] if i1 == n - 1 else _bisect_threshold(
                lambda t: float(w(np.array([t]))[0]) - tol, xs[i1], xs[i1 + 1])
            regions.append((float(min(lo_edge, hi_edge)), float(max(lo_edge, hi_edge))))
            covered.append((i0, i1))

    # isolated zeros: small local minima of the samples, sharpened by golden search
    zeros = []
    soft = 1e-5 * peak
    for i in range(n):
        if any(i0 - 1 <= i <= i1 + 1 for i0, i1 in covered):
            continue
        is_min = (vals[i] <= soft
                  and (i == 0 or vals[i] <= vals[i - 1])
                  and (i == n - 1 or vals[i] <= vals[i + 1]))
        if not is_min:
            continue
        lo_b = xs[max(i - 1, 0)]
        hi_b = xs[min(i + 1, n - 1)]
        z = _golden_min(lambda t: float(w(np.array([t]))[0]), lo_b, hi_b)
        if float(w(np.array([z]))[0]) <= tol:
            zeros.append(float(z))
    # dedupe refined locations that collapsed together
    zeros = sorted(zeros)
    merged = []
    for z in zeros:
        if not merged or z - merged[-1] > 1e-10 * dom.width:
            merged.append(z)
    return merged, regions


def _merge_regions(regions, width):
    tol = 1e-12 * width
    regions = sorted((lo, hi) for lo, hi in regions if hi - lo > tol)
    out = []
    for lo, hi in regions:
        if out and lo <= out[-1][1] + tol:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def _side_exponent(w: Weight, p: Exponent, z: float, side: int,
                   neighbors: Sequence[float]) -> float:
    """Local power exponent of w at z toward `side`, exact when metadata allows."""
    if isinstance(w, PiecewisePowerWeight):
        e = w.local_exponent_at(z, side)
        return math.inf if e is None else e
    known = w.known_zeros()
    if known is not None:
        for info in known:
            if abs(info.location - z) <= 1e-12 * w.domain.width:
                e = info.right_exponent if side > 0 else info.left_exponent
                return math.inf if e is None else e
        return 0.0
    gaps = [abs(nb - z) for nb in neighbors if abs(nb - z) > 0.0]
    h0 = 0.5 * min(gaps) if gaps else 0.25 * w.domain.width
    return local_exponent_estimate(w, z, side, h0)


def detect_structure(w: Weight, p: Exponent,
                     cfg: Optional[QuadratureConfig] = None) -> DegeneracyStructure:
    """Compute the degeneracy structure of w for exponent p.

    Deterministic; calling it twice on the same weight yields identical
    structures.  Raises IndeterminateIntegrabilityError when a sampled
    weight sits numerically on the integrability threshold at some zero.
    """
    cfg = cfg or DEFAULT_CONFIG
    dom = w.domain
    width = dom.width
    tol = 1e-12 * width

    known = w.known_zeros()
    if known is not None:
        zero_pts = [info.location for info in known]
        regions = list(w.zero_regions())
    else:
        zero_pts, regions = _scan_weight(w)
    regions = _merge_regions(regions, width)

    # zeros sitting on a region or domain boundary are edges already, not splits
    def _is_edge(z: float) -> bool:
        if z <= dom.lo + tol or z >= dom.hi - tol:
            return True
        return any(abs(z - r[0]) <= tol or abs(z - r[1]) <= tol for r in regions)

    def _in_region(z: float) -> bool:
        return any(r[0] + tol < z < r[1] - tol for r in regions)

    interior = sorted(z for z in zero_pts if not _is_edge(z) and not _in_region(z))

    neighbors = ([dom.lo, dom.hi] + interior
                 + [r[0] for r in regions] + [r[1] for r in regions])
    removable, splitting = [], []
    for z in interior:
        near = [nb for nb in neighbors if abs(nb - z) > tol]
        e_l = _side_exponent(w, p, z, -1, near)
        e_r = _side_exponent(w, p, z, +1, near)
        ap_l = math.inf if e_l == math.inf else p.alpha_p(e_l)
        ap_r = math.inf if e_r == math.inf else p.alpha_p(e_r)
        info = ZeroInfo(z, e_l, e_r)
        if ap_l >= 1.0 or ap_r >= 1.0:
            splitting.append(info)
        else:
            removable.append(info)

    # carve the domain: remove zero regions, then split at the splitting zeros
    segments = []
    cursor = dom.lo
    for r_lo, r_hi in regions:
        if r_lo - cursor > tol:
            segments.append((cursor, r_lo))
        cursor = max(cursor, r_hi)
    if dom.hi - cursor > tol:
        segments.append((cursor, dom.hi))
    for info in splitting:
        z = info.location
        for k, (s_lo, s_hi) in enumerate(segments):
            if s_lo + tol < z < s_hi - tol:
                segments[k:k + 1] = [(s_lo, z), (z, s_hi)]
                break

    removable_pts = [info.location for info in removable]
    intervals = []
    for s_lo, s_hi in segments:
        mid = 0.5 * (s_lo + s_hi)
        inner = [r for r in removable_pts if s_lo < r < s_hi]
        lo_cls = classify_endpoint_integrability(w, p, s_lo, mid, cfg,
                                                 interior_singular=inner)
        hi_cls = classify_endpoint_integrability(w, p, s_hi, mid, cfg,
                                                 interior_singular=inner)
        intervals.append(DegeneracyInterval(s_lo, s_hi, lo_cls, hi_cls))

    if not intervals:
        kind = "zero"
    elif w.truncated:
        kind = "infinite_truncated"
    else:
        kind = "finite"
    return DegeneracyStructure(
        p=p.p,
        intervals=tuple(intervals),
        kind=kind,
        removable_zeros=tuple(removable),
        split_zeros=tuple(splitting),
        zero_regions=tuple((float(a), float(b)) for a, b in regions),
    )

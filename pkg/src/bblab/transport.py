"""1-D cumulative-mass transports and the five level-set diagnostics.

Two monotone rearrangements are built by matching piecewise-linear
cumulatives: the spatial transport matches position CDFs, the height
transport matches cumulative level-set measures.  In both cases the map is
returned as a piecewise-linear monotone function whose breakpoints carry
exact conservation (up to floating-point rounding of the shared cumsum
arrays, in practice <= 1e-15 on unit mass).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gridfn import GridFunction, ZeroMassError, integral, level_set, normalize
from .hull import convex_hull_set, hull_deficit
from .means import MeanParams, _mean
from .supconv import minkowski_combination

__all__ = [
    "MassMismatchError",
    "TransportMap1D",
    "spatial_transport",
    "height_transport",
    "pushforward_check",
    "DiagnosticsReport",
    "level_diagnostics",
]


class MassMismatchError(ValueError):
    """Masses must agree to relative 1e-9 before transporting."""


@dataclass(frozen=True)
class TransportMap1D:
    """Piecewise-linear monotone map given by cumulative matching."""

    domain_breaks: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    source_mass: float
    target_mass: float
    kind: str  # "spatial" or "height"

    def __post_init__(self):
        db = np.asarray(self.domain_breaks, dtype=float)
        vv = np.asarray(self.values, dtype=float)
        if db.shape != vv.shape or db.ndim != 1:
            raise ValueError("breaks and values must be 1-D arrays of equal length")
        if np.any(np.diff(db) < 0) or np.any(np.diff(vv) < -1e-12):
            raise ValueError("transport map must be monotone nondecreasing")
        db.setflags(write=False)
        vv.setflags(write=False)
        object.__setattr__(self, "domain_breaks", db)
        object.__setattr__(self, "values", vv)

    def __call__(self, x):
        return np.interp(x, self.domain_breaks, self.values)


def _check_masses(f: GridFunction, g: GridFunction):
    mf, mg = integral(f), integral(g)
    if mf <= 0 or mg <= 0:
        raise ZeroMassError("transport needs positive masses")
    if abs(mf - mg) > 1e-9 * mf:
        raise MassMismatchError(f"masses differ: {mf} vs {mg}")
    return mf, mg


def _pl_inverse(knots: np.ndarray, cums: np.ndarray, m):
    """Invert a nondecreasing piecewise-linear cumulative at masses m.

    Flat stretches (zero density) are crossed by mapping onto their left
    endpoint, which keeps the inverse monotone.
    """
    m = np.clip(np.asarray(m, dtype=float), cums[0], cums[-1])
    idx = np.clip(np.searchsorted(cums, m, side="left"), 1, len(cums) - 1)
    c0, c1 = cums[idx - 1], cums[idx]
    y0, y1 = knots[idx - 1], knots[idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(c1 > c0, (m - c0) / np.maximum(c1 - c0, 1e-300), 1.0)
    return y0 + t * (y1 - y0)


def _spatial_cdf(f: GridFunction):
    """Cell-boundary knots and the CDF of the normalized function there."""
    idx = np.flatnonzero(f.values > 0)
    if idx.size == 0:
        raise ZeroMassError("empty support")
    lo, hi = int(idx.min()), int(idx.max())
    vals = f.values[lo : hi + 1]
    knots = f.origin[0] + (np.arange(lo, hi + 2)) * f.spacing
    cums = np.concatenate(([0.0], np.cumsum(vals) * f.spacing))
    cums /= cums[-1]
    return knots, cums


def _height_cdf(f: GridFunction):
    """Height knots (0 and the distinct values) and Phi(t) = int_0^t |F_s| ds
    of the normalized function."""
    vals = f.values[f.values > 0]
    uniq = np.unique(vals)
    knots = np.concatenate(([0.0], uniq))
    cv = f.cell_volume
    counts = np.array([(f.values > 0.5 * (a + b)).sum() for a, b in zip(knots[:-1], knots[1:])])
    seg = counts * cv * np.diff(knots)
    cums = np.concatenate(([0.0], np.cumsum(seg)))
    cums /= cums[-1]
    return knots, cums


def _match(knots_f, cums_f, knots_g, cums_g, kind, mf, mg) -> TransportMap1D:
    extra = _pl_inverse(knots_f, cums_f, cums_g)
    breaks = np.unique(np.concatenate([knots_f, extra]))
    masses = np.interp(breaks, knots_f, cums_f)
    images = _pl_inverse(knots_g, cums_g, masses)
    images = np.maximum.accumulate(images)
    return TransportMap1D(breaks, images, mf, mg, kind)


def spatial_transport(f: GridFunction, g: GridFunction) -> TransportMap1D:
    """Monotone T with int_{-inf}^x f = int_{-inf}^{T(x)} g (after
    normalization); derivative f(x)/g(T(x)) wherever both are positive."""
    if f.dim != 1 or g.dim != 1:
        raise ValueError("spatial_transport is 1-D")
    mf, mg = _check_masses(f, g)
    kf, cf = _spatial_cdf(f)
    kg, cg = _spatial_cdf(g)
    return _match(kf, cf, kg, cg, "spatial", mf, mg)


def height_transport(f: GridFunction, g: GridFunction) -> TransportMap1D:
    """Monotone map on heights matching cumulative level-set measures:
    int_0^t |F_s| ds = int_0^{T(t)} |G_s| ds."""
    mf, mg = _check_masses(f, g)
    kf, cf = _height_cdf(f)
    kg, cg = _height_cdf(g)
    return _match(kf, cf, kg, cg, "height", mf, mg)


def pushforward_check(T: TransportMap1D, f: GridFunction, g: GridFunction) -> float:
    """Max cumulative mismatch |F(x) - G(T(x))| over the map's breakpoints
    (normalized masses); zero-mass pairs check trivially."""
    if integral(f) == 0.0 and integral(g) == 0.0:
        return 0.0
    if T.kind == "spatial":
        kf, cf = _spatial_cdf(f)
        kg, cg = _spatial_cdf(g)
    else:
        kf, cf = _height_cdf(f)
        kg, cg = _height_cdf(g)
    left = np.interp(T.domain_breaks, kf, cf)
    right = np.interp(T.values, kg, cg)
    return float(np.abs(left - right).max())


# ---------------------------------------------------------------------------
# level-set diagnostics


@dataclass(frozen=True)
class DiagnosticsReport:
    alpha: float
    masses: tuple  # bad-mass integrals for the five criteria
    hull_gap_integral: float
    h_convention: str  # "canonical" (h = M*(f,g)) or "user"

    @property
    def total_bad_mass(self) -> float:
        return float(sum(self.masses))


def _mask_union_box(A, B):
    """Embed two level sets into one common index box; returns bool arrays."""
    h = A.spacing
    offs = [round((b - a) / h) for a, b in zip(A.origin, B.origin)]
    lo = [min(0, o) for o in offs]
    hi = [max(sa, o + sb) for sa, sb, o in zip(A.mask.shape, B.mask.shape, offs)]
    shape = tuple(int(b - a) for a, b in zip(lo, hi))
    ma = np.zeros(shape, dtype=bool)
    mb = np.zeros(shape, dtype=bool)
    sa = tuple(slice(-l, -l + s) for l, s in zip(lo, A.mask.shape))
    sb = tuple(slice(o - l, o - l + s) for o, l, s in zip(offs, lo, B.mask.shape))
    ma[sa] = A.mask
    mb[sb] = B.mask
    return ma, mb


def _min_shift_symdiff(A, B) -> float:
    """min over integer cell shifts v of |(v + A) symdiff B| (measure).

    Exhaustive via full cross-correlation of the masks, which covers every
    shift with nonzero overlap; shifts beyond that cannot do better than the
    no-overlap value, which the correlation window also contains.
    """
    ma, mb = _mask_union_box(A, B)
    na, nb = int(ma.sum()), int(mb.sum())
    cv = A.spacing ** A.dim
    if na == 0 or nb == 0:
        return (na + nb) * cv
    if A.dim == 1:
        corr = np.correlate(ma.astype(float), mb.astype(float), mode="full")
    else:
        from scipy.signal import correlate

        corr = correlate(ma.astype(float), mb.astype(float), mode="full", method="auto")
    best_overlap = float(np.round(corr.max()))
    return (na + nb - 2.0 * best_overlap) * cv


def level_diagnostics(
    f: GridFunction,
    g: GridFunction,
    h: GridFunction | None,
    params: MeanParams,
    alpha: float,
) -> DiagnosticsReport:
    """Integrate |F_t| over the five bad height sets.

    The five criteria at height t (with s = T(t) from the height transport):
      1. dT/dt = |F_t| / |G_s| outside [1 - alpha, 1 + alpha];
      2. hull deficit of F_t or of G_s at least alpha;
      3. |lam F_t + (1-lam) G_s| >= (1 + alpha) M_{lam,1/n}(|F_t|, |G_s|);
      4. no translate of F_t within alpha |F_t| of H_{M(t, s)};
      5. no translate of co(F_t) within alpha |F_t| of co(G_s).
    Heights are sampled at the midpoints of a knot set on which every
    level-set measure is constant, so the integrals are exact for staircase
    inputs.  h=None uses the canonical h = M*(f, g).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    _check_masses(f, g)
    fn = normalize(f)
    gn = normalize(g)
    if h is None:
        from .supconv import sup_convolution

        hn = sup_convolution(fn, gn, params)
        h_convention = "canonical"
    else:
        hn = h.with_values(h.values / integral(f))
        h_convention = "user"

    T = height_transport(fn, gn)
    kf, cf = _height_cdf(fn)
    kg, cg = _height_cdf(gn)
    lam, p, n = params.lam_float, params.p, fn.dim

    # knots where any of |F_t|, |G_T(t)|, |H_M(t,T(t))| can change
    knots = set(kf.tolist())
    knots.update(np.asarray(_pl_inverse(kf, cf, cg)).tolist())
    maxf = fn.max()
    hvals = np.unique(hn.values[hn.values > 0])

    def mt(t):
        return _mean(lam, p, t, float(T(t))) if t > 0 else 0.0

    top = mt(maxf)
    for u in hvals:
        if not 0.0 < u < top:
            continue
        lo, hi = 1e-300, maxf
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mt(mid) < u:
                lo = mid
            else:
                hi = mid
        knots.add(0.5 * (lo + hi))
    knots = np.array(sorted(k for k in knots if 0.0 <= k <= maxf))
    if knots[0] > 0.0:
        knots = np.concatenate(([0.0], knots))

    masses = np.zeros(5)
    gap_integral = 0.0
    for t0, t1 in zip(knots[:-1], knots[1:]):
        dt = t1 - t0
        if dt <= 0:
            continue
        tm = 0.5 * (t0 + t1)
        F = level_set(fn, tm)
        if F.cell_count == 0:
            continue
        s = float(T(tm))
        G = level_set(gn, s)
        u = mt(tm)
        H = level_set(hn, u)
        mF, mG = F.measure, G.measure
        weight = mF * dt

        bad = [False] * 5
        dT = mF / mG if mG > 0 else np.inf
        bad[0] = not (1.0 - alpha <= dT <= 1.0 + alpha)
        hdF = hull_deficit(F)
        hdG = hull_deficit(G) if G.cell_count else 0.0
        bad[1] = hdF >= alpha or hdG >= alpha
        if G.cell_count:
            mink = minkowski_combination(F, G, params.lam_fraction).measure
            bad[2] = mink >= (1.0 + alpha) * _mean(lam, 1.0 / n, mF, mG)
        else:
            bad[2] = True
        if H.cell_count:
            bad[3] = _min_shift_symdiff(F, H) >= alpha * mF
        else:
            bad[3] = True
        if G.cell_count:
            bad[4] = _min_shift_symdiff(convex_hull_set(F), convex_hull_set(G)) >= alpha * mF
        else:
            bad[4] = True

        for k in range(5):
            if bad[k]:
                masses[k] += weight
        if not any(bad):
            gap_integral += (hdF * mF + hdG * mG) * dt

    return DiagnosticsReport(alpha, tuple(masses.tolist()), gap_integral, h_convention)

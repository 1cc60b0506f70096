"""Superlevel-set measures of the difference quotient |u(x)-u(y)| / |x-y|^alpha.

The membership function along a ray from x in direction w is
g(r) = |u(x + r w) - u(x)| - lambda r^alpha.  All estimators share one scan
kernel: uniform bracketing in r, vectorized bisection of every sign change,
then exact closed-form integration of r^{N-1} over the membership runs.

Truncation: members satisfy lambda r^{alpha-1} <= lip_bound, so the scan stops
at r_cap = (lip_bound/lambda)^{1/(alpha-1)} clipped to the support-dilate
diameter; below lambda <= lip_bound an additional |u(x)-u(y)| <= 2 sup_norm
cap applies.  For lambda > lip_bound the truncation is exact (no members x
farther than r_cap from the support).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import InvalidParameterError, PreconditionError
from .quadrature import (
    BallSampler,
    QuadratureResult,
    SphereRule,
    TensorGrid,
    _unit_vectors,
    centered_box_grid,
    monte_carlo,
    sphere_rule,
    surface_area,
    unit_ball_volume,
)

__all__ = [
    "DistributionProfile",
    "LevelSetQuery",
    "LimitEstimate",
    "RadialProfile",
    "SandwichBounds",
    "default_lambda_grid",
    "distribution_profile",
    "pair_measure_mc",
    "pair_measure_polar",
    "radial_levelset",
    "sandwich_bounds",
    "tail_limit",
    "truncation_radius",
    "verify_sandwich",
    "weak_quasinorm",
]

CROSSING_CAP = 64


@dataclass(frozen=True)
class LevelSetQuery:
    """One superlevel set: field, integrability exponent p, quotient exponent
    alpha (the two-sided theorems use alpha = N/p + 1), and threshold."""

    field: object
    p: float
    alpha: float
    lam: float

    def __post_init__(self):
        if self.p < 1:
            raise InvalidParameterError("p must be >= 1")
        if self.alpha <= 1:
            raise InvalidParameterError("alpha must exceed 1 for the radial truncation")
        if self.lam <= 0:
            raise InvalidParameterError("lambda must be positive")
        if self.field.dim > 3:
            raise InvalidParameterError("pair measures support N <= 3")


def truncation_radius(f, lam, alpha):
    """Largest radius any member pair can have, given the certified bounds."""
    r = (f.lip_bound / lam) ** (1.0 / (alpha - 1.0))
    r = min(r, 2.0 * (f.support_radius + 1.0))
    if lam <= f.lip_bound:
        r = min(r, 2.0 * (2.0 * f.sup_norm / lam) ** (1.0 / alpha))
    return r


@dataclass
class RadialProfile:
    """Membership runs (r_lo, r_hi] along one ray, endpoints bisected to tol."""

    x: np.ndarray
    omega: np.ndarray
    intervals: list
    r_cap: float
    flagged: bool = False     # set when the crossing count exceeds CROSSING_CAP

    def measure(self, n_dim):
        return sum((b ** n_dim - a ** n_dim) / n_dim for a, b in self.intervals)


# ---------------------------------------------------------------------------
# shared scan kernel
# ---------------------------------------------------------------------------

def _bisect_crossings(f, ux_flat, X_flat, W_flat, lam, alpha, lo, hi, cell, iters):
    """Refine sign-change brackets; `cell` indexes the flattened (x, w) pairs."""
    xs = X_flat[cell]
    ws = W_flat[cell]
    uxs = ux_flat[cell].ravel()
    up = np.abs(f.evaluate(xs + lo[:, None] * ws) - uxs) - lam * lo ** alpha >= 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = np.abs(f.evaluate(xs + mid[:, None] * ws) - uxs) - lam * mid ** alpha >= 0.0
        same = pos == up
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def _scan_measures(f, lam, alpha, X, W, r_cap, scan, tol, n_dim):
    """Membership measure int 1_E r^{N-1} dr for every (x, w) pair.

    Returns (measures (nx*nw,), crossings (nx*nw,), scan state) with all
    endpoint refinement done by batched bisection.  The run pairing trick:
    sum over runs of (b^N - a^N) equals sum over down-crossings of b^N minus
    sum over up-crossings of a^N, so no explicit pairing is needed.
    """
    nx, nw = X.shape[0], W.shape[0]
    r = np.linspace(r_cap / scan, r_cap, scan)
    pts = X[:, None, None, :] + r[None, None, :, None] * W[None, :, None, :]
    vals = f.evaluate(pts)
    ux = f.evaluate(X)
    g = np.abs(vals - ux[:, None, None]) - lam * r[None, None, :] ** alpha
    member = (g >= 0.0).reshape(nx * nw, scan)
    del pts, vals, g

    X_flat = np.repeat(X, nw, axis=0)
    W_flat = np.tile(W, (nx, 1))
    ux_flat = np.repeat(ux, nw)[:, None]

    diff = np.diff(member.astype(np.int8), axis=1)
    iters = max(8, min(60, int(math.ceil(math.log2(max((r_cap / scan) / max(tol, 1e-300), 2.0))))))

    acc = np.zeros(nx * nw)
    up_cell, up_i = np.nonzero(diff == 1)
    dn_cell, dn_i = np.nonzero(diff == -1)
    up_r = np.empty(0)
    dn_r = np.empty(0)
    if up_cell.size:
        up_r = _bisect_crossings(
            f, ux_flat, X_flat, W_flat, lam, alpha, r[up_i], r[up_i + 1], up_cell, iters
        )
        np.subtract.at(acc, up_cell, up_r ** n_dim)
    if dn_cell.size:
        dn_r = _bisect_crossings(
            f, ux_flat, X_flat, W_flat, lam, alpha, r[dn_i], r[dn_i + 1], dn_cell, iters
        )
        np.add.at(acc, dn_cell, dn_r ** n_dim)
    # runs starting at 0+ contribute nothing to subtract; runs still open at
    # r_cap close there
    acc[member[:, -1]] += r_cap ** n_dim
    measures = acc / n_dim

    crossings = np.zeros(nx * nw, dtype=int)
    np.add.at(crossings, up_cell, 1)
    np.add.at(crossings, dn_cell, 1)
    state = {"member": member, "up": (up_cell, up_r), "dn": (dn_cell, dn_r), "r": r}
    return measures, crossings, state


def radial_levelset(q: LevelSetQuery, x, omega, scan=1024, tol=1e-10):
    """Membership runs along the ray x + r*omega, r in (0, r_cap]."""
    if scan < 16:
        raise InvalidParameterError("scan must be >= 16")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    f = q.field
    r_cap = truncation_radius(f, q.lam, q.alpha)
    if r_cap <= 0.0:
        return RadialProfile(x, omega, [], 0.0, False)
    X = x[None, :]
    W = omega[None, :]
    _, crossings, state = _scan_measures(f, q.lam, q.alpha, X, W, r_cap, scan, tol, f.dim)
    member = state["member"][0]
    starts = sorted(state["up"][1].tolist())
    ends = sorted(state["dn"][1].tolist())
    if member[0]:
        starts = [0.0] + starts
    if member[-1]:
        ends = ends + [r_cap]
    flagged = crossings[0] > CROSSING_CAP or len(starts) != len(ends)
    intervals = list(zip(starts, ends))[: CROSSING_CAP]
    return RadialProfile(x, omega, intervals, r_cap, bool(flagged))


# ---------------------------------------------------------------------------
# sandwich radii
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichBounds:
    """Radii with (0, lower] inside and the membership set inside (0, upper]."""

    lower: float
    upper: float
    delta: float


def sandwich_bounds(f, p, lam, x, omega, delta):
    """Certified inner/outer radii for the ray set at alpha = N/p + 1.

    Requires lambda > lip_bound; the outer radius is 0 once x sits more than
    unit distance from the support.
    """
    if not 0.0 < delta < 1.0:
        raise InvalidParameterError("delta must lie in (0, 1)")
    if lam <= f.lip_bound:
        raise PreconditionError("sandwich radii need lambda > lip_bound")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    n = f.dim
    g = abs(float(np.dot(f.gradient(x[None, :])[0], omega)))
    A = f.hess_bound
    L = f.lip_bound
    lower_n = min(
        (delta ** n) * g ** n / A ** n if A > 0 else math.inf,
        ((1.0 - delta) ** p) * g ** p / lam ** p,
    )
    lower = lower_n ** (1.0 / n) if lower_n > 0 else 0.0
    if float(f.support_distance(x[None, :])[0]) > 1.0:
        upper = 0.0
    else:
        upper = (((g + A * (L / lam) ** (p / n)) / lam) ** p) ** (1.0 / n)
    return SandwichBounds(lower, upper, delta)


def verify_sandwich(f, p, lam, samples, delta, stream, scan=1024, tol=1e-9):
    """Check (0, lower] <= membership runs <= (0, upper] on sampled rays.

    Returns a dict of violation counts (target zero on the catalogue).
    """
    if lam <= f.lip_bound:
        raise PreconditionError("verify_sandwich needs lambda > lip_bound")
    n = f.dim
    q = LevelSetQuery(f, p, n / p + 1.0, lam)
    u = stream.uniform_matrix(0, samples, 2 * n + 1)
    sampler = BallSampler(np.zeros(n), f.support_radius + 1.0)
    xs, _ = sampler.map(u[:, : n + 1])
    ws = _unit_vectors(u[:, n + 1 : 2 * n + 1], n)
    rel = max(tol, 1e-12)
    bad_upper = 0
    bad_lower = 0
    flagged = 0
    for i in range(samples):
        sb = sandwich_bounds(f, p, lam, xs[i], ws[i], delta)
        prof = radial_levelset(q, xs[i], ws[i], scan=scan, tol=tol)
        if prof.flagged:
            flagged += 1
        hi_lim = sb.upper * (1.0 + rel) + tol
        if any(b > hi_lim for _, b in prof.intervals):
            bad_upper += 1
        need = sb.lower * (1.0 - rel) - tol
        if need > 0:
            # the inner radius can sit below the scan's first grid point, so
            # check membership directly on a dense sample of (0, need]
            rr = need * np.geomspace(1e-3, 1.0, 64)
            pts = xs[i][None, :] + rr[:, None] * ws[i][None, :]
            gv = np.abs(f.evaluate(pts) - f.evaluate(xs[i][None, :])[0]) - lam * rr ** q.alpha
            if np.any(gv < -tol):
                bad_lower += 1
    return {
        "samples": samples,
        "violations_upper": bad_upper,
        "violations_lower": bad_lower,
        "flagged_profiles": flagged,
        "lam": lam,
        "delta": delta,
    }


# ---------------------------------------------------------------------------
# pair measures
# ---------------------------------------------------------------------------

def _required_half_width(f, lam, alpha):
    r_cap = truncation_radius(f, lam, alpha)
    return f.support_radius + min(1.0, r_cap), r_cap


def pair_measure_polar(
    q: LevelSetQuery,
    x_grid: TensorGrid,
    sphere: SphereRule,
    scan=512,
    tol=1e-10,
    x_chunk=512,
    with_error=True,
):
    """L^{2N} measure of the superlevel set by polar pair coordinates.

    The inner radial integral is exact on each membership run; the outer
    integrals use the tensor grid and sphere rule.  Error estimate comes
    from one combined coarsening step (half the panels and scan).
    """
    f = q.field
    need, r_cap = _required_half_width(f, q.lam, q.alpha)
    if np.any(x_grid.box[:, 0] > -need + 1e-12) or np.any(x_grid.box[:, 1] < need - 1e-12):
        raise PreconditionError(
            f"x grid must cover the support dilate (need half-width {need:.6g})"
        )

    def run(grid, scan_n):
        if r_cap <= 0.0:
            return 0.0, 0
        pts, w = grid.points_weights()
        total = 0.0
        nodes = 0
        for c0 in range(0, pts.shape[0], x_chunk):
            Xc = pts[c0 : c0 + x_chunk]
            m, _, _ = _scan_measures(
                f, q.lam, q.alpha, Xc, sphere.nodes, r_cap, scan_n, tol, f.dim
            )
            m = m.reshape(Xc.shape[0], -1)
            total += float(np.sum(w[c0 : c0 + x_chunk] * (m * sphere.weights[None, :]).sum(axis=1)))
            nodes += Xc.shape[0] * sphere.nodes.shape[0] * scan_n
        return total, nodes

    value, nodes = run(x_grid, scan)
    if not with_error:
        return QuadratureResult(value, 0.0, nodes, True)
    coarse_grid = TensorGrid(x_grid.box, max(2, x_grid.panels // 2), x_grid.order)
    coarse, n2 = run(coarse_grid, max(64, scan // 2))
    err = abs(value - coarse)
    return QuadratureResult(value, err, nodes + n2, err <= 0.05 * max(abs(value), 1e-300))


class _PairSampler:
    """Importance sampler over (x, w, r): x uniform on the support dilate,
    w uniform on the sphere, r with density proportional to r^{N-1}."""

    def __init__(self, f, lam, alpha):
        self.f = f
        self.dim = f.dim
        self.half, self.r_cap = _required_half_width(f, lam, alpha)
        self.draws = 2 * self.dim + 2
        self.weight = (
            unit_ball_volume(self.dim)
            * self.half ** self.dim
            * surface_area(self.dim)
            * self.r_cap ** self.dim
            / self.dim
        )

    def map(self, u):
        n = self.dim
        xdir = _unit_vectors(u[:, :n], n)
        xr = self.half * u[:, n] ** (1.0 / n)
        x = xr[:, None] * xdir
        w = _unit_vectors(u[:, n + 1 : 2 * n + 1], n)
        r = self.r_cap * u[:, 2 * n + 1] ** (1.0 / n)
        pts = np.concatenate([x, w, r[:, None]], axis=1)
        return pts, np.full(pts.shape[0], self.weight)


def pair_measure_mc(q: LevelSetQuery, n, stream, workers=1):
    """Unbiased Monte Carlo estimate of the same truncated pair measure."""
    if n < 1000:
        raise InvalidParameterError("need at least 1e3 samples")
    f = q.field
    sampler = _PairSampler(f, q.lam, q.alpha)
    d = f.dim

    def member(pts):
        x = pts[:, :d]
        w = pts[:, d : 2 * d]
        r = pts[:, 2 * d]
        dv = np.abs(f.evaluate(x + r[:, None] * w) - f.evaluate(x))
        return ((dv >= q.lam * r ** q.alpha) & (r > 0.0)).astype(float)

    return monte_carlo(member, sampler, n, stream, workers=workers)


# ---------------------------------------------------------------------------
# distribution profiles and the weak quasinorm
# ---------------------------------------------------------------------------

def default_lambda_grid(f, n=64, lo_factor=0.1, hi_factor=1e3):
    """Log-spaced thresholds bracketing both the sup region and the tail."""
    scale = f.lip_bound if f.lip_bound > 0 else 1.0    # zero field: any grid works
    return np.geomspace(lo_factor * scale, hi_factor * scale, n)


@dataclass
class DistributionProfile:
    """Per-threshold measure estimates with the lambda^p * mu column."""

    field_label: str
    p: float
    alpha: float
    lambdas: np.ndarray
    mu: np.ndarray
    err: np.ndarray
    tags: list
    monotonicity_flags: list = dc_field(default_factory=list)
    _estimator: object = None     # lambda -> QuadratureResult, for refinement

    @property
    def lam_pow_p_mu(self):
        return self.lambdas ** self.p * self.mu

    def rows(self):
        lpm = self.lam_pow_p_mu
        return [
            (float(l), float(m), float(e), float(v), t)
            for l, m, e, v, t in zip(self.lambdas, self.mu, self.err, lpm, self.tags)
        ]


def _polar_budget_estimate(f, p, alpha, lam, budgets):
    need, _ = _required_half_width(f, lam, alpha)
    grid = centered_box_grid(need, f.dim, budgets.get("x_nodes", 48 if f.dim > 1 else 256))
    sphere = sphere_rule(f.dim, budgets.get("sphere_order", 16))
    return pair_measure_polar(
        LevelSetQuery(f, p, alpha, lam),
        grid,
        sphere,
        scan=budgets.get("scan", 224 if f.dim > 1 else 768),
        tol=budgets.get("bisect_tol", 1e-10),
    )


def distribution_profile(f, p, alpha, lam_grid, estimator="polar", budgets=None, stream=None, workers=1):
    """Estimate mu(E_lambda) on an ascending threshold grid with shared budgets."""
    lam_grid = np.asarray(lam_grid, dtype=float)
    if lam_grid.size == 0:
        raise InvalidParameterError("empty lambda grid")
    if np.any(lam_grid <= 0) or np.any(np.diff(lam_grid) <= 0):
        raise InvalidParameterError("lambda grid must be positive and ascending")
    budgets = dict(budgets or {})
    if estimator == "polar":
        def one(lam):
            return _polar_budget_estimate(f, p, alpha, lam, budgets)
    elif estimator == "mc":
        if stream is None:
            raise InvalidParameterError("mc estimator needs a RandomStream")
        n_mc = budgets.get("mc_samples", 200_000)

        def one(lam):
            # sub-stream keyed by the threshold's bit pattern: reproducible
            # and independent of evaluation order
            tag = int(np.float64(lam).view(np.uint64) % (2 ** 62))
            return pair_measure_mc(
                LevelSetQuery(f, p, alpha, lam), n_mc, stream.derived(tag), workers=workers
            )
    else:
        raise InvalidParameterError(f"unknown estimator {estimator!r}")

    results = [one(lam) for lam in lam_grid]
    mu = np.array([r.value for r in results])
    err = np.array([r.error_estimate for r in results])
    flags = [
        i
        for i in range(len(lam_grid) - 1)
        if mu[i + 1] > mu[i] + err[i] + err[i + 1] + 1e-15
    ]
    return DistributionProfile(
        f.label, p, alpha, lam_grid, mu, err, [estimator] * len(lam_grid), flags, one
    )


def weak_quasinorm(profile: DistributionProfile, refine=16, root=False, with_flag=False):
    """sup over lambda of lambda^p * mu, golden-section refined near the argmax.

    Ties at the sup resolve to the smallest lambda.  Set `root=True` for the
    quasinorm itself (power 1/p).  With `with_flag=True` also returns whether
    the estimate at the argmax was unconverged (error above 5% of the value).
    """
    vals = profile.lam_pow_p_mu
    if vals.size == 0:
        raise InvalidParameterError("profile is empty")
    i = int(np.argmax(vals))      # first index wins ties
    flagged = bool(profile.err[i] > 0.05 * profile.mu[i]) if profile.mu[i] > 0 else False
    best = float(vals[i])
    if refine > 0 and profile._estimator is not None and vals.size > 1:
        lo = profile.lambdas[max(i - 1, 0)]
        hi = profile.lambdas[min(i + 1, vals.size - 1)]
        if hi > lo:
            phi = (math.sqrt(5.0) - 1.0) / 2.0
            a, b = math.log(lo), math.log(hi)
            c = b - phi * (b - a)
            d = a + phi * (b - a)

            def val_at(t):
                lam = math.exp(t)
                return lam ** profile.p * profile._estimator(lam).value

            fc, fd = val_at(c), val_at(d)
            best = max(best, fc, fd)
            for _ in range(max(refine - 2, 0)):
                if fc >= fd:
                    b, d, fd = d, c, fc
                    c = b - phi * (b - a)
                    fc = val_at(c)
                else:
                    a, c, fc = c, d, fd
                    d = a + phi * (b - a)
                    fd = val_at(d)
                best = max(best, fc, fd)
    out = best ** (1.0 / profile.p) if root else best
    return (out, flagged) if with_flag else out


@dataclass(frozen=True)
class LimitEstimate:
    """Tail plateau of lambda^p * mu with a flatness-based convergence flag."""

    plateau: float
    flatness: float
    converged: bool
    window: int


def tail_limit(profile: DistributionProfile, window=8, tol=0.03):
    """Plateau of the last `window` values of lambda^p * mu.

    The limit has no known convergence rate, so this is plateau detection:
    converged means the relative spread across the window is below `tol`.
    """
    lams = profile.lambdas
    if window > lams.size:
        raise InvalidParameterError("window exceeds the grid size")
    if lams[-1] < 1e3 * lams[0] * (1 - 1e-9):
        raise PreconditionError("profile must cover at least three decades")
    vals = profile.lam_pow_p_mu[-window:]
    plateau = float(np.mean(vals))
    if plateau <= 0:
        return LimitEstimate(0.0, 0.0, True, window)
    flatness = float(np.max(np.abs(vals - plateau)) / plateau)
    return LimitEstimate(plateau, flatness, flatness < tol, window)

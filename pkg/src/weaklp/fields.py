"""Smooth compactly supported test fields with exact gradients and certified bounds.

Fields are immutable after construction; evaluation is vectorized over point
arrays of shape (..., N) and is safe to call concurrently.  Every field
vanishes *exactly* (returns 0.0, not something small) outside the centered
ball of radius `support_radius`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .quadrature import QuadratureResult, centered_box_grid

__all__ = [
    "FieldBounds",
    "ScalarField",
    "catalogue",
    "catalogue_names",
    "field_from_spec",
    "gradient_lp_norm",
    "lp_norm",
    "make_bump",
    "make_mollified_indicator",
    "make_product_bump",
    "make_sum",
    "scale_field",
]

_CERT_GRID = 2 ** 12          # per-axis certification sweep resolution
_CERT_SAFETY = 1.05


@dataclass(frozen=True)
class FieldBounds:
    """Upper bounds for |grad u|, the Hessian norm, and |u|, with provenance."""

    lip_bound: float
    hess_bound: float
    sup_norm: float
    provenance: str          # "closed-form" or "certified"


class ScalarField:
    """Base class; subclasses implement `evaluate` and `gradient`."""

    dim: int
    support_radius: float
    label: str
    bounds: FieldBounds

    @property
    def lip_bound(self):
        return self.bounds.lip_bound

    @property
    def hess_bound(self):
        return self.bounds.hess_bound

    @property
    def sup_norm(self):
        return self.bounds.sup_norm

    def evaluate(self, pts):
        raise NotImplementedError

    def gradient(self, pts):
        raise NotImplementedError

    def support_distance(self, pts):
        """Distance to the support ball (a lower bound on the distance to supp u)."""
        pts = np.asarray(pts, dtype=float)
        return np.maximum(np.sqrt(np.sum(pts ** 2, axis=-1)) - self.support_radius, 0.0)

    def __repr__(self):
        return f"<ScalarField {self.label!r} N={self.dim}>"


# ---------------------------------------------------------------------------
# 1-D profiles used as building blocks
# ---------------------------------------------------------------------------

def _bump_profile(t, radius, amplitude):
    """amplitude * exp(-1/(1 - (t/radius)^2)) inside |t| < radius, 0 outside."""
    t = np.asarray(t, dtype=float)
    q = (t / radius) ** 2
    out = np.zeros_like(q)
    m = q < 1.0
    out[m] = amplitude * np.exp(-1.0 / (1.0 - q[m]))
    return out


def _bump_profile_d1(t, radius, amplitude):
    t = np.asarray(t, dtype=float)
    q = (t / radius) ** 2
    out = np.zeros_like(q)
    m = q < 1.0
    w = 1.0 / (1.0 - q[m])
    out[m] = _bump_profile(t[m], radius, amplitude) * (-(w ** 2) * 2.0 * t[m] / radius ** 2)
    return out


def _bump_profile_d2(t, radius, amplitude):
    t = np.asarray(t, dtype=float)
    q = (t / radius) ** 2
    out = np.zeros_like(q)
    m = q < 1.0
    w = 1.0 / (1.0 - q[m])
    c = 2.0 * t[m] / radius ** 2
    out[m] = _bump_profile(t[m], radius, amplitude) * (
        w ** 4 * c ** 2 - 2.0 * w ** 3 * c ** 2 - 2.0 * w ** 2 / radius ** 2
    )
    return out


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    out[t >= 1.0] = 1.0
    m = (t > 0.0) & (t < 1.0)
    tm = t[m]
    f = np.exp(-1.0 / tm)
    g = np.exp(-1.0 / (1.0 - tm))
    out[m] = f / (f + g)
    return out


def _smooth_step_d1(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = (t > 0.0) & (t < 1.0)
    tm = t[m]
    f = np.exp(-1.0 / tm)
    g = np.exp(-1.0 / (1.0 - tm))
    fp = f / tm ** 2
    gp = -g / (1.0 - tm) ** 2
    out[m] = (fp * (f + g) - f * (fp + gp)) / (f + g) ** 2
    return out


def _smooth_step_d2(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = (t > 0.0) & (t < 1.0)
    tm = t[m]
    f = np.exp(-1.0 / tm)
    g = np.exp(-1.0 / (1.0 - tm))
    fp = f / tm ** 2
    gp = -g / (1.0 - tm) ** 2
    fpp = f * (1.0 / tm ** 4 - 2.0 / tm ** 3)
    gpp = g * (1.0 / (1.0 - tm) ** 4 - 2.0 / (1.0 - tm) ** 3)
    s = f + g
    sp = fp + gp
    spp = fpp + gpp
    out[m] = ((fpp * s - f * spp) * s - 2.0 * sp * (fp * s - f * sp)) / s ** 3
    return out


class _Window1D:
    """Smooth window: 1 on [lo+eps, hi-eps], 0 outside [lo-eps, hi+eps]."""

    def __init__(self, lo, hi, eps):
        self.lo, self.hi, self.eps = float(lo), float(hi), float(eps)

    def value(self, t):
        a = (t - (self.lo - self.eps)) / (2.0 * self.eps)
        b = ((self.hi + self.eps) - t) / (2.0 * self.eps)
        return _smooth_step(a) * _smooth_step(b)

    def d1(self, t):
        a = (t - (self.lo - self.eps)) / (2.0 * self.eps)
        b = ((self.hi + self.eps) - t) / (2.0 * self.eps)
        sa, sb = _smooth_step(a), _smooth_step(b)
        da = _smooth_step_d1(a) / (2.0 * self.eps)
        db = -_smooth_step_d1(b) / (2.0 * self.eps)
        return da * sb + sa * db

    def d2(self, t):
        a = (t - (self.lo - self.eps)) / (2.0 * self.eps)
        b = ((self.hi + self.eps) - t) / (2.0 * self.eps)
        sa, sb = _smooth_step(a), _smooth_step(b)
        da = _smooth_step_d1(a) / (2.0 * self.eps)
        db = -_smooth_step_d1(b) / (2.0 * self.eps)
        dda = _smooth_step_d2(a) / (2.0 * self.eps) ** 2
        ddb = _smooth_step_d2(b) / (2.0 * self.eps) ** 2
        return dda * sb + 2.0 * da * db + sa * ddb

    def sweep_extent(self):
        return self.lo - self.eps, self.hi + self.eps


class _Bump1DProfile:
    """Axis profile wrapper sharing the _Window1D interface."""

    def __init__(self, center, radius):
        self.center, self.radius = float(center), float(radius)

    def value(self, t):
        return _bump_profile(np.asarray(t) - self.center, self.radius, 1.0)

    def d1(self, t):
        return _bump_profile_d1(np.asarray(t) - self.center, self.radius, 1.0)

    def d2(self, t):
        return _bump_profile_d2(np.asarray(t) - self.center, self.radius, 1.0)

    def sweep_extent(self):
        return self.center - self.radius, self.center + self.radius


def _profile_maxima(profile):
    lo, hi = profile.sweep_extent()
    t = np.linspace(lo, hi, _CERT_GRID)
    return (
        float(np.max(np.abs(profile.value(t)))),
        float(np.max(np.abs(profile.d1(t)))),
        float(np.max(np.abs(profile.d2(t)))),
    )


# ---------------------------------------------------------------------------
# concrete fields
# ---------------------------------------------------------------------------

class _RadialBump(ScalarField):
    def __init__(self, center, radius, amplitude):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        self.dim = self.center.shape[0]
        self.support_radius = float(np.linalg.norm(self.center) + self.radius)
        self.label = f"bump(N={self.dim},R={self.radius},a={self.amplitude})"
        self.bounds = self._certify()
        self.spec = {
            "kind": "bump",
            "center": self.center.tolist(),
            "radius": self.radius,
            "amplitude": self.amplitude,
        }

    def _certify(self):
        # radial structure: |grad u| = |phi'(r)| and the Hessian eigenvalues
        # are phi''(r) and phi'(r)/r, so 1-D sweeps certify both bounds
        r = np.linspace(0.0, self.radius, _CERT_GRID)
        d1 = np.abs(_bump_profile_d1(r, self.radius, self.amplitude))
        d2 = np.abs(_bump_profile_d2(r, self.radius, self.amplitude))
        rad = d1[1:] / r[1:]
        lip = _CERT_SAFETY * float(np.max(d1))
        hess = _CERT_SAFETY * float(max(np.max(d2), np.max(rad)))
        sup = abs(self.amplitude) * math.exp(-1.0)
        return FieldBounds(lip, hess, sup, "certified")

    def evaluate(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.sqrt(np.sum((pts - self.center) ** 2, axis=-1))
        return _bump_profile(r, self.radius, self.amplitude)

    def gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        d = pts - self.center
        q = np.sum(d ** 2, axis=-1) / self.radius ** 2
        out = np.zeros_like(d)
        m = q < 1.0
        w = 1.0 / (1.0 - q[m])
        val = self.amplitude * np.exp(-1.0 / (1.0 - q[m]))
        out[m] = (-2.0 * val * w ** 2 / self.radius ** 2)[..., None] * d[m]
        return out


class _SeparableField(ScalarField):
    """Product of per-axis profiles times an amplitude."""

    def __init__(self, profiles, amplitude, label, spec):
        self.profiles = tuple(profiles)
        self.amplitude = float(amplitude)
        self.dim = len(profiles)
        ext = np.array([p.sweep_extent() for p in profiles])
        self.support_radius = float(np.sqrt(np.sum(np.max(np.abs(ext), axis=1) ** 2)))
        self.label = label
        self.bounds = self._certify()
        self.spec = spec

    def _certify(self):
        a = abs(self.amplitude)
        mx = [_profile_maxima(p) for p in self.profiles]
        m0 = [m[0] for m in mx]
        m1 = [m[1] for m in mx]
        m2 = [m[2] for m in mx]

        def others(vals, skip):
            out = 1.0
            for j, v in enumerate(vals):
                if j not in skip:
                    out *= v
            return out

        sup = a * others(m0, set())
        lip = a * math.sqrt(sum((m1[i] * others(m0, {i})) ** 2 for i in range(self.dim)))
        diag = sum((m2[i] * others(m0, {i})) ** 2 for i in range(self.dim))
        off = sum(
            (m1[i] * m1[j] * others(m0, {i, j})) ** 2
            for i in range(self.dim)
            for j in range(self.dim)
            if i != j
        )
        hess = a * math.sqrt(diag + off)   # Frobenius norm dominates the operator norm
        return FieldBounds(_CERT_SAFETY * lip, _CERT_SAFETY * hess, sup, "certified")

    def evaluate(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.full(pts.shape[:-1], self.amplitude)
        for i, prof in enumerate(self.profiles):
            out = out * prof.value(pts[..., i])
        return out

    def gradient(self, pts):
        pts = np.asarray(pts, dtype=float)
        vals = [prof.value(pts[..., i]) for i, prof in enumerate(self.profiles)]
        ders = [prof.d1(pts[..., i]) for i, prof in enumerate(self.profiles)]
        out = np.empty_like(pts)
        for i in range(self.dim):
            g = np.full(pts.shape[:-1], self.amplitude) * ders[i]
            for j in range(self.dim):
                if j != i:
                    g = g * vals[j]
            out[..., i] = g
        return out


class _SumField(ScalarField):
    def __init__(self, fields):
        dims = {f.dim for f in fields}
        if len(dims) != 1:
            raise InvalidParameterError("summands must share a dimension")
        self.fields = tuple(fields)
        self.dim = dims.pop()
        self.support_radius = max(f.support_radius for f in fields)
        self.label = "sum(" + ",".join(f.label for f in fields) + ")"
        lip = sum(f.lip_bound for f in fields)
        hess = sum(f.hess_bound for f in fields)
        sup = sum(f.sup_norm for f in fields)
        self.bounds = FieldBounds(lip, hess, sup, "certified")
        self.spec = {"kind": "sum", "terms": [f.spec for f in fields]}

    def evaluate(self, pts):
        out = self.fields[0].evaluate(pts)
        for f in self.fields[1:]:
            out = out + f.evaluate(pts)
        return out

    def gradient(self, pts):
        out = self.fields[0].gradient(pts)
        for f in self.fields[1:]:
            out = out + f.gradient(pts)
        return out


class _ScaledField(ScalarField):
    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)
        self.dim = base.dim
        self.support_radius = base.support_radius
        self.label = f"{factor}*{base.label}"
        a = abs(self.factor)
        self.bounds = FieldBounds(
            a * base.lip_bound, a * base.hess_bound, a * base.sup_norm, base.bounds.provenance
        )
        self.spec = {"kind": "scaled", "factor": self.factor, "base": base.spec}

    def evaluate(self, pts):
        return self.factor * self.base.evaluate(pts)

    def gradient(self, pts):
        return self.factor * self.base.gradient(pts)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def make_bump(center, radius, amplitude=1.0):
    """Radial bump supported on the closed ball B(center, radius)."""
    if radius <= 0:
        raise InvalidParameterError("radius must be positive")
    return _RadialBump(center, radius, amplitude)


def make_mollified_indicator(box, epsilon):
    """Smooth version of a box indicator: 1 on the eps-eroded box, 0 outside
    the eps-dilated box, one smooth transition layer per axis."""
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    sides = box[:, 1] - box[:, 0]
    if np.any(sides <= 0):
        raise InvalidParameterError("box sides must have positive length")
    if not 0 < epsilon < 0.5 * np.min(sides):
        raise InvalidParameterError("epsilon must lie in (0, half the shortest side)")
    profiles = [_Window1D(lo, hi, epsilon) for lo, hi in box]
    label = f"mollified_indicator(N={box.shape[0]},eps={epsilon})"
    spec = {"kind": "mollified_indicator", "box": box.tolist(), "epsilon": float(epsilon)}
    return _SeparableField(profiles, 1.0, label, spec)


def make_product_bump(centers, radii, amplitude=1.0):
    """Product of 1-D bumps, one per axis."""
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if radii.shape != centers.shape or np.any(radii <= 0):
        raise InvalidParameterError("need one positive radius per axis")
    profiles = [_Bump1DProfile(c, r) for c, r in zip(centers, radii)]
    label = f"product_bump(N={centers.shape[0]})"
    spec = {
        "kind": "product_bump",
        "centers": centers.tolist(),
        "radii": radii.tolist(),
        "amplitude": float(amplitude),
    }
    return _SeparableField(profiles, amplitude, label, spec)


def make_sum(fields):
    if not fields:
        raise InvalidParameterError("need at least one summand")
    return _SumField(list(fields))


def scale_field(f, factor):
    """c*u with bounds scaled exactly; used by homogeneity checks."""
    return _ScaledField(f, factor)


def field_from_spec(spec):
    """Build a field from its JSON description (CLI config surface)."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InvalidParameterError("field spec must be an object with a 'kind'")
    kind = spec["kind"]
    try:
        if kind == "bump":
            return make_bump(spec["center"], spec["radius"], spec.get("amplitude", 1.0))
        if kind == "mollified_indicator":
            return make_mollified_indicator(spec["box"], spec["epsilon"])
        if kind == "product_bump":
            return make_product_bump(spec["centers"], spec["radii"], spec.get("amplitude", 1.0))
        if kind == "sum":
            return make_sum([field_from_spec(t) for t in spec["terms"]])
        if kind == "scaled":
            return scale_field(field_from_spec(spec["base"]), spec["factor"])
        if kind == "catalogue":
            return catalogue()[spec["name"]]
    except KeyError as exc:
        raise InvalidParameterError(f"field spec missing key {exc}") from exc
    raise InvalidParameterError(f"unknown field kind {kind!r}")


_CATALOGUE = None


def catalogue():
    """The finite field catalogue exercised by every experiment suite."""
    global _CATALOGUE
    if _CATALOGUE is None:
        _CATALOGUE = {
            "bump1": make_bump([0.0], 1.0, 1.0),
            "bump1_wide": make_bump([0.2], 1.6, 0.75),
            "bumps1_pair": make_sum(
                [make_bump([-0.8], 0.6, 1.0), make_bump([0.8], 0.5, -0.6)]
            ),
            "plateau1": make_mollified_indicator([[-0.5, 0.5]], 0.1),
            "bump2": make_bump([0.0, 0.0], 1.0, 1.0),
            "bump2_off": make_bump([0.3, -0.2], 1.2, 0.8),
            "plateau2": make_mollified_indicator([[-0.5, 0.5], [-0.5, 0.5]], 0.12),
            "bumps2_pair": make_sum(
                [make_bump([-0.7, 0.0], 0.7, 1.0), make_bump([0.7, 0.1], 0.6, 0.8)]
            ),
            "product2": make_product_bump([0.0, 0.1], [1.0, 0.8], 1.0),
            "bump3": make_bump([0.0, 0.0, 0.0], 1.0, 1.0),
        }
    return _CATALOGUE


def catalogue_names(dim=None):
    return [k for k, f in catalogue().items() if dim is None or f.dim == dim]


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def _box_integral(field, integrand, budget, rtol):
    if budget < 16 ** field.dim:
        raise InvalidParameterError("budget below the minimum node count")
    per_axis = max(16, int(round(budget ** (1.0 / field.dim))))
    grid = centered_box_grid(field.support_radius, field.dim, per_axis)

    def run(g):
        pts, w = g.points_weights()
        return float(np.sum(w * integrand(pts))), pts.shape[0]

    coarse, n1 = run(grid)
    fine, n2 = run(grid.refined())
    err = abs(fine - coarse)
    converged = err <= rtol * max(abs(fine), 1e-300)
    return QuadratureResult(fine, err, n1 + n2, converged)


def gradient_lp_norm(field, p, budget=4096, rtol=1e-6):
    """int |grad u|^p over R^N (restricted to the support ball, which is exact).

    Unconverged results are still returned, flagged via `converged`.
    """
    if p < 1:
        raise InvalidParameterError("p must be >= 1")
    return _box_integral(
        field, lambda pts: np.sum(field.gradient(pts) ** 2, axis=-1) ** (p / 2.0), budget, rtol
    )


def lp_norm(field, p, budget=4096, rtol=1e-6):
    """int |u|^p over R^N, same contract as gradient_lp_norm."""
    if p < 1:
        raise InvalidParameterError("p must be >= 1")
    return _box_integral(field, lambda pts: np.abs(field.evaluate(pts)) ** p, budget, rtol)

"""Probes that measure, on solver output, the quantities bounded by the
regularity theory: cylinder norms, level-set measures, oscillation decay and
its fitted exponent, Harnack quotients, doubling constants, weighted-mean
energy ratios, fractional seminorms, reverse-Hoelder data and minimum
propagation.

Probes are pure functions of (trajectory, geometry, seeds).  Points and
regions handed to a probe are interpreted in the frame the trajectory is
viewed in, so transforming both the trajectory and the probe geometry by the
same Galilean change of frame leaves every measured constant unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .fields import CoefficientField
from .geometry import (
    Cylinder,
    CylinderShape,
    GalileanTransform,
    KineticPoint,
    compose,
)
from .iteration import holder_alpha, sobolev_p
from .trajectory import PhaseBox, Trajectory, region_mask


@dataclass(frozen=True)
class ProbeReport:
    """Named measured constants with the geometry that produced them."""

    name: str
    params: dict
    constants: dict
    verdict: str
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        clean = {
            k: float(v) if isinstance(v, (int, float, np.floating, np.integer)) else v
            for k, v in self.constants.items()
        }
        object.__setattr__(self, "constants", clean)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "constants": {k: _jsonable(v) for k, v in self.constants.items()},
            "verdict": self.verdict,
        }
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def c01_constant(r_ext: float, r_int: float) -> float:
    """Cutoff constant 1/(r0^2-r1^2) + r0/(r0^3-r1^3) + 1/(r0-r1)^2 + 1."""
    if not 0.0 < r_int < r_ext:
        raise ValueError(f"need 0 < r_int < r_ext, got {r_int}, {r_ext}")
    r0, r1 = r_ext, r_int
    return 1.0 / (r0**2 - r1**2) + r0 / (r0**3 - r1**3) + 1.0 / (r0 - r1) ** 2 + 1.0


def _native(traj: Trajectory, *objs):
    """View the trajectory base-free and pull probe geometry into that frame."""
    if traj.base is None:
        return (traj, *objs)
    inv = GalileanTransform(traj.base)
    out = []
    for obj in objs:
        if isinstance(obj, KineticPoint):
            out.append(inv.apply_inverse(obj))
        elif isinstance(obj, (Cylinder, PhaseBox)):
            out.append(replace(obj, center=inv.apply_inverse(obj.center)))
        elif obj is None:
            out.append(None)
        else:
            raise TypeError(f"cannot pull back {type(obj)!r}")
    return (replace(traj, base=None), *out)


def _domain(traj: Trajectory) -> tuple[float, float, float, float, float, float]:
    g = traj.grid
    return (
        float(g.x_axis[0]),
        float(g.x_axis[-1]),
        float(g.v_axis[0]),
        float(g.v_axis[-1]),
        float(traj.times[0]),
        float(traj.times[-1]),
    )


def _fits_domain(traj: Trajectory, region) -> bool:
    """Whether the region (with its slant) stays inside the grid box and times."""
    x_lo, x_hi, v_lo, v_hi, t_lo, t_hi = _domain(traj)
    wx, wv, w_lo, w_hi = region.windows()
    c = region.center
    for m in range(traj.d):
        drift = (min(w_lo * c.v[m], w_hi * c.v[m]), max(w_lo * c.v[m], w_hi * c.v[m]))
        if c.x[m] + drift[0] - wx < x_lo or c.x[m] + drift[1] + wx > x_hi:
            return False
        if c.v[m] - wv < v_lo or c.v[m] + wv > v_hi:
            return False
    return c.t + w_lo >= t_lo and c.t + w_hi <= t_hi


def _source_values(traj: Trajectory, n: int) -> np.ndarray:
    if traj.field is None:
        return np.zeros(traj.grid.shape)
    x, v = traj.grid.meshes()
    return traj.field.s(x, v, float(traj.times[n]))


def _grad_v_sq(traj: Trajectory, n: int) -> np.ndarray:
    vals = traj.values[n]
    g = traj.grid
    out = np.zeros_like(vals)
    for m in range(g.d):
        grad = np.gradient(vals, g.hv, axis=g.d + m)
        out += grad * grad
    return out


def source_nonnegative(field: CoefficientField | None) -> bool:
    if field is None:
        return True
    if field.s_bound == 0.0:
        return True
    desc = field.descriptor
    return desc.get("kind") == "constant" and desc.get("s_value", 0.0) >= 0.0


def lower_order_free(field: CoefficientField | None) -> bool:
    if field is None:
        return True
    desc = field.descriptor
    kind = desc.get("kind")
    if kind == "constant":
        return desc.get("b_value", 0.0) == 0.0 and desc.get("s_value", 0.0) == 0.0
    if kind == "rotating":
        return True
    return desc.get("b_max", None) == 0.0 and desc.get("s_max", 1.0) == 0.0 and field.s_bound == 0.0


def norm_on_cylinder(traj: Trajectory, region, p, normalized: bool = False) -> float:
    """Grid quadrature of the L^p norm of f over the region.

    p = inf returns the plain maximum of f over in-region grid points (the
    half-open time window makes the top time slice count).  With
    ``normalized`` the measure is normalised (integral average), making the
    result monotone non-decreasing in p.
    """
    traj, region = _native(traj, region)
    tw = traj.time_weights()
    cell = traj.grid.cell_volume
    total = 0.0
    measure = 0.0
    sup = -math.inf
    seen = False
    for n in range(traj.n_times):
        mask = region_mask(traj, region, n)
        if not mask.any():
            continue
        seen = True
        vals = traj.values[n][mask]
        if p == math.inf:
            sup = max(sup, float(vals.max()))
        else:
            w = cell * tw[n]
            total += float(np.sum(np.abs(vals) ** p)) * w
            measure += float(mask.sum()) * w
    if not seen:
        raise ValueError("region does not intersect the stored grid points")
    if p == math.inf:
        return sup
    if normalized:
        return (total / measure) ** (1.0 / p)
    return total ** (1.0 / p)


def grid_measure(traj: Trajectory, region) -> float:
    """Counting-measure x cell-volume x time-weight measure of the region."""
    traj, region = _native(traj, region)
    tw = traj.time_weights()
    cell = traj.grid.cell_volume
    return float(
        sum(region_mask(traj, region, n).sum() * cell * tw[n] for n in range(traj.n_times))
    )


def gain_probe(traj: Trajectory, q_int: Cylinder, q_ext: Cylinder) -> ProbeReport:
    """Empirical constant of the integrability gain on nested cylinders.

    Measures ||f||_{L^p(Q_int)}^2 against
    C01^2 ||f||_{L^2(Q_ext)}^2 + C01 int_{Q_ext} s^2 1_{f>0} with
    p = 6(2d+1)/(6d+1), and reports the ratio.
    """
    traj, q_int, q_ext = _native(traj, q_int, q_ext)
    _require_nested(q_int, q_ext)
    if float(traj.values.min()) < -1e-10 * max(1.0, float(np.abs(traj.values).max())):
        raise ValueError("gain probe requires a non-negative run")
    p = sobolev_p(traj.d)
    lhs = norm_on_cylinder(traj, q_int, p) ** 2
    f_l2_sq = norm_on_cylinder(traj, q_ext, 2) ** 2
    tw = traj.time_weights()
    cell = traj.grid.cell_volume
    src = 0.0
    for n in range(traj.n_times):
        mask = region_mask(traj, q_ext, n)
        if not mask.any():
            continue
        active = mask & (traj.values[n] > 0.0)
        if active.any():
            s_vals = _source_values(traj, n)[active]
            src += float(np.sum(s_vals**2)) * cell * tw[n]
    c01 = c01_constant(q_ext.radius, q_int.radius)
    rhs = c01**2 * f_l2_sq + c01 * src
    degenerate = rhs == 0.0
    return ProbeReport(
        name="gain",
        params={"r_int": q_int.radius, "r_ext": q_ext.radius, "p": p},
        constants={
            "p": p,
            "lhs_lp_sq": lhs,
            "f_l2_sq": f_l2_sq,
            "source_sq": src,
            "c01": c01,
            "cbar": math.nan if degenerate else lhs / rhs,
        },
        verdict="degenerate" if degenerate else "ok",
    )


def _require_nested(q_int: Cylinder, q_ext: Cylinder) -> None:
    same_center = (
        np.array_equal(q_int.center.x, q_ext.center.x)
        and np.array_equal(q_int.center.v, q_ext.center.v)
        and q_int.center.t == q_ext.center.t
    )
    if not same_center or q_int.shape is not q_ext.shape or q_int.radius >= q_ext.radius:
        raise ValueError("cylinders must be concentric, same shape and strictly nested")


@dataclass(frozen=True)
class LevelSetMeasures:
    high: float       # measure of {f >= 1 - theta}
    low: float        # measure of {f <= 0}
    mid: float        # measure of {0 < f < 1 - theta}
    region: float     # grid measure of the region


def level_set_measures(traj: Trajectory, theta: float, region) -> LevelSetMeasures:
    """Grid measures of the level buckets of f, intersected with the region.

    The three buckets partition the range, so high + low + mid equals the grid
    measure of the region exactly.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    traj, region = _native(traj, region)
    tw = traj.time_weights()
    cell = traj.grid.cell_volume
    high = low = mid = total = 0.0
    cut = 1.0 - theta
    for n in range(traj.n_times):
        mask = region_mask(traj, region, n)
        if not mask.any():
            continue
        vals = traj.values[n][mask]
        w = cell * tw[n]
        high += float(np.count_nonzero(vals >= cut)) * w
        low += float(np.count_nonzero(vals <= 0.0)) * w
        mid += float(np.count_nonzero((vals > 0.0) & (vals < cut))) * w
        total += float(vals.size) * w
    return LevelSetMeasures(high=high, low=low, mid=mid, region=total)


def oscillation(traj: Trajectory, region) -> float:
    """max - min of f over in-region grid points."""
    traj, region = _native(traj, region)
    lo = math.inf
    hi = -math.inf
    for n in range(traj.n_times):
        mask = region_mask(traj, region, n)
        if not mask.any():
            continue
        vals = traj.values[n][mask]
        lo = min(lo, float(vals.min()))
        hi = max(hi, float(vals.max()))
    if not math.isfinite(lo):
        raise ValueError("region does not intersect the stored grid points")
    return hi - lo


def holder_fit(
    traj: Trajectory,
    z1: KineticPoint,
    theta: float | None = None,
    omega: float = 0.25,
    k_levels: int = 4,
    r_base: float | None = None,
) -> ProbeReport:
    """Oscillation-decay ladder osc over Q_{r_k}(z1) with r_k = (omega/2)^k r/2.

    Fits log osc against log r_k (slope = measured Hoelder exponent) and also
    converts the measured per-level contraction theta_hat into the predicted
    exponent ln theta_hat / ln(omega/2).  Levels with oscillation at roundoff
    are dropped; fewer than three usable levels is an error.
    """
    traj, z1 = _native(traj, z1)
    if not 0.0 < omega < 1.0:
        raise ValueError(f"omega must lie in (0, 1), got {omega}")
    if r_base is None:
        r_base = _largest_radius(traj, z1, factor=2.0)
    else:
        probe = Cylinder(z1, 2.0 * r_base)
        if not _fits_domain(traj, probe):
            raise ValueError("Q_{2 r_base}(z1) does not fit inside the domain")
    radii = [(omega / 2.0) ** k * r_base / 2.0 for k in range(1, k_levels + 1)]
    scale = float(np.abs(traj.values).max())
    floor = 10.0 * np.finfo(float).eps * max(scale, 1.0)

    levels: list[tuple[float, float]] = []
    all_roundoff = True
    for r in radii:
        try:
            osc = oscillation(traj, Cylinder(z1, r))
        except ValueError:
            continue
        all_roundoff = all_roundoff and osc <= floor
        if osc > floor:
            levels.append((r, osc))
    if len(levels) < 3:
        if all_roundoff:
            # oscillation at roundoff on every resolvable level (constant data)
            return ProbeReport(
                name="holder",
                params={"omega": omega, "k_levels": k_levels, "r_base": float(r_base)},
                constants={"alpha_fit": math.nan, "levels_used": 0.0},
                verdict="degenerate",
            )
        raise ValueError(f"only {len(levels)} usable oscillation levels, need >= 3")

    rs = np.array([r for r, _ in levels])
    oscs = np.array([o for _, o in levels])
    slope, intercept = np.polyfit(np.log(rs), np.log(oscs), 1)
    ratios = np.clip(oscs[1:] / oscs[:-1], 1e-15, 1.0 - 1e-15)
    theta_hat = float(np.exp(np.mean(np.log(ratios))))
    constants = {
        "alpha_fit": float(slope),
        "amplitude": float(np.exp(intercept)),
        "theta_hat": theta_hat,
        "alpha_predicted": holder_alpha(theta_hat, omega),
        "levels_used": float(len(levels)),
    }
    for i, (r, o) in enumerate(levels, start=1):
        constants[f"r_{i}"] = float(r)
        constants[f"osc_{i}"] = float(o)
    if theta is not None:
        constants["alpha_target"] = holder_alpha(theta, omega)
    return ProbeReport(
        name="holder",
        params={"omega": omega, "k_levels": k_levels, "r_base": float(r_base)},
        constants=constants,
        verdict="ok",
    )


def _largest_radius(traj: Trajectory, z1: KineticPoint, factor: float = 2.0) -> float:
    """Largest r <= 1 with Q_{factor r}(z1) inside the grid box and time range."""
    x_lo, x_hi, v_lo, v_hi, t_lo, t_hi = _domain(traj)
    if z1.t > t_hi or z1.t <= t_lo:
        raise ValueError("base point time outside the stored range")
    r = min(1.0, math.sqrt(z1.t - t_lo) / factor)
    for m in range(traj.d):
        r = min(r, (v_hi - z1.v[m]) / factor, (z1.v[m] - v_lo) / factor)
        slack = min(x_hi - z1.x[m], z1.x[m] - x_lo)
        # window (factor r)^3 plus slant drift (factor r)^2 |v| must fit
        lo, hi = 0.0, r
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            need = (factor * mid) ** 3 + (factor * mid) ** 2 * abs(z1.v[m])
            if need <= slack:
                lo = mid
            else:
                hi = mid
        r = min(r, lo)
    if r <= 0.0:
        raise ValueError("no admissible radius at this base point")
    return r


@dataclass(frozen=True)
class HarnackParams:
    """Geometry of the Harnack quotient: Q+ = Q_R(c), Q- = Q_R(c o (0,0,-Delta)).

    rho1 < rho2 bound the intermediate cylinders used by the propagation
    probe; q is the propagation exponent and fixes
    C_pm = ((1/2 + R^2)/4)^{q/2}.
    """

    r: float
    delta: float
    rho1: float
    rho2: float
    q: float = 2.0
    center: KineticPoint = KineticPoint.origin(1)

    def __post_init__(self) -> None:
        if not 0.0 < self.r < 1.0 or not 0.0 < self.delta < 1.0:
            raise ValueError("need 0 < R, Delta < 1")
        if not self.r < self.rho1 < self.rho2 < 1.0:
            raise ValueError("need R < rho1 < rho2 < 1")
        if self.delta <= self.r**2:
            raise ValueError("need Delta > R^2 so that Q+ and Q- are disjoint")
        if self.q <= 0:
            raise ValueError("q must be positive")

    @property
    def c_pm(self) -> float:
        return ((0.5 + self.r**2) / 4.0) ** (self.q / 2.0)

    def q_plus(self) -> Cylinder:
        return Cylinder(self.center, self.r)

    def _minus_center(self) -> KineticPoint:
        shift = KineticPoint(np.zeros(self.center.d), np.zeros(self.center.d), -self.delta)
        return compose(self.center, shift)

    def q_minus(self, rho: float | None = None) -> Cylinder:
        return Cylinder(self._minus_center(), self.r if rho is None else rho)


def harnack_probe(traj: Trajectory, params: HarnackParams) -> ProbeReport:
    """sup_{Q^-} f / (inf_{Q^+} f + sup |s|), the empirical Harnack constant.

    Scale-invariant: multiplying f and s by c > 0 leaves the quotient fixed.
    Degenerate (0/0) runs are flagged instead of reported as constants.
    """
    traj, center = _native(traj, params.center)
    params = replace(params, center=center)
    q_plus = params.q_plus()
    q_minus = params.q_minus()
    q_unit = Cylinder(center, 1.0)

    f_min_unit = math.inf
    sup_minus = -math.inf
    inf_plus = math.inf
    s_sup = 0.0
    for n in range(traj.n_times):
        unit_mask = region_mask(traj, q_unit, n)
        if unit_mask.any():
            vals = traj.values[n][unit_mask]
            f_min_unit = min(f_min_unit, float(vals.min()))
            s_here = _source_values(traj, n)[unit_mask]
            if s_here.size:
                s_sup = max(s_sup, float(np.abs(s_here).max()))
        m_minus = region_mask(traj, q_minus, n)
        if m_minus.any():
            sup_minus = max(sup_minus, float(traj.values[n][m_minus].max()))
        m_plus = region_mask(traj, q_plus, n)
        if m_plus.any():
            inf_plus = min(inf_plus, float(traj.values[n][m_plus].min()))

    if not math.isfinite(sup_minus) or not math.isfinite(inf_plus):
        raise ValueError("Harnack cylinders do not intersect the stored grid")
    scale = max(1.0, float(np.abs(traj.values).max()))
    if f_min_unit < -1e-10 * scale:
        raise ValueError(f"non-negative run required, min over Q_1 is {f_min_unit:.3e}")

    denom = inf_plus + s_sup
    degenerate = denom <= 0.0
    constants = {
        "sup_minus": sup_minus,
        "inf_plus": inf_plus,
        "source_sup": s_sup,
        "c_emp": math.nan if degenerate else sup_minus / denom,
    }
    return ProbeReport(
        name="harnack",
        params={"R": params.r, "Delta": params.delta, "rho1": params.rho1,
                "rho2": params.rho2, "q": params.q},
        constants=constants,
        verdict="degenerate" if degenerate else "ok",
    )


def doubling_probe(
    traj: Trajectory,
    omega: float = 0.25,
    n_levels: int = 2,
    z0: KineticPoint | None = None,
    r: float | None = None,
) -> ProbeReport:
    """Per-level doubling constants h_k = (inf_{Q^k} f / inf_{Q^0} f)^{1/k}.

    Q^0 is the elongated cylinder at (z0, r) and Q^k the iterated cylinders,
    all moved by the group action; requires a non-negative-source run.
    """
    traj, z0 = _native(traj, z0)
    if not source_nonnegative(traj.field):
        raise ValueError("doubling probe requires a sign-definite (s >= 0) run")
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    x_lo, x_hi, v_lo, v_hi, t_lo, t_hi = _domain(traj)
    from .geometry import iterated_times

    t_top = iterated_times(n_levels)[1]
    if r is None:
        r = 0.95 * math.sqrt((t_hi - t_lo) / (t_top + 1.0))
    if z0 is None:
        g = traj.grid
        x_mid = float(g.x_axis[g.nx // 2])
        v_mid = float(g.v_axis[int(np.argmin(np.abs(g.v_axis)))])
        z0 = KineticPoint.of([x_mid] * traj.d, [v_mid] * traj.d, t_lo + r**2 * 1.0001)
    if z0.t - r**2 < t_lo or z0.t + r**2 * t_top > t_hi:
        raise ValueError("iterated cylinders do not fit in the stored time range")

    q0 = Cylinder(z0, r, CylinderShape.ELONGATED, omega=omega)
    inf0 = _region_min(traj, q0)
    constants: dict = {"r": float(r), "inf_q0": inf0}
    if inf0 <= 0.0:
        return ProbeReport(
            name="doubling",
            params={"omega": omega, "n_levels": n_levels},
            constants=constants,
            verdict="degenerate",
        )
    h_min = math.inf
    for k in range(1, n_levels + 1):
        qk = Cylinder(z0, r, CylinderShape.ITERATED, omega=omega, k=k)
        inf_k = _region_min(traj, qk)
        h_k = (max(inf_k, 0.0) / inf0) ** (1.0 / k)
        constants[f"inf_q{k}"] = inf_k
        constants[f"h_{k}"] = h_k
        h_min = min(h_min, h_k)
    constants["h_min"] = h_min
    return ProbeReport(
        name="doubling",
        params={"omega": omega, "n_levels": n_levels},
        constants=constants,
        verdict="ok",
    )


def _region_min(traj: Trajectory, region) -> float:
    lo = math.inf
    for n in range(traj.n_times):
        mask = region_mask(traj, region, n)
        if mask.any():
            lo = min(lo, float(traj.values[n][mask].min()))
    if not math.isfinite(lo):
        raise ValueError("region does not intersect the stored grid points")
    return lo


def smooth_bump(u: np.ndarray) -> np.ndarray:
    """Plateau cutoff: 1 on [-1, 1], 0 outside [-2, 2], square root C-infinity."""
    a = np.abs(np.asarray(u, dtype=float))
    out = np.zeros_like(a)
    out[a <= 1.0] = 1.0
    mid = (a > 1.0) & (a < 2.0)
    s = a[mid] - 1.0
    g0 = np.exp(-1.0 / s)
    g1 = np.exp(-1.0 / (1.0 - s))
    out[mid] = (g1 / (g0 + g1)) ** 2
    return out


def weighted_mean(traj: Trajectory, z0: KineticPoint, r_scale: float, t: float) -> float:
    """Cutoff-weighted spatial mean of f at one snapshot time.

    The cutoff is the product bump with plateau (r^3, r) per (x, v) axis,
    support (2r)^3, 2r (all offsets taken in the co-moving frame of z0); the
    normalisation is the grid integral of the cutoff, so a function constant
    on the support is reproduced exactly.
    """
    if traj.base is not None:
        t = t - traj.base.t
    traj, z0 = _native(traj, z0)
    if r_scale <= 0:
        raise ValueError("scale must be positive")
    n = int(np.argmin(np.abs(traj.times - t)))
    if abs(float(traj.times[n]) - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"no stored snapshot at time {t}")
    chi = _cutoff(traj, z0, r_scale, n)
    denom = float(chi.sum())
    if denom == 0.0:
        raise ValueError("cutoff support does not intersect the grid")
    return float((traj.values[n] * chi).sum() / denom)


def _cutoff(traj: Trajectory, z0: KineticPoint, r_scale: float, n: int) -> np.ndarray:
    g = traj.grid
    t = float(traj.times[n])
    chi = np.ones(g.shape)
    for m in range(g.d):
        x_off = g.x_axis - z0.x[m] - (t - z0.t) * z0.v[m]
        shape = [1] * (2 * g.d)
        shape[m] = g.nx
        chi = chi * smooth_bump(x_off / r_scale**3).reshape(shape)
        v_off = g.v_axis - z0.v[m]
        shape = [1] * (2 * g.d)
        shape[g.d + m] = g.nv
        chi = chi * smooth_bump(v_off / r_scale).reshape(shape)
    return chi


def caccioppoli_probe(traj: Trajectory, z0: KineticPoint, r_scale: float) -> ProbeReport:
    """Empirical constants of the weighted-mean energy and Poincare estimates.

    On cube cylinders: int_{Q_R} |grad_v f|^2 against
    R^{-2} int_{Q_2R} |f - mean_{2R}(t)|^2, and
    sup_t int_{Q_R^t} |f - mean_R(t)|^2 against int_{Q_3R} |grad_v f|^2.
    """
    traj, z0 = _native(traj, z0)
    r = r_scale
    q_r = Cylinder(z0, r, CylinderShape.CUBE)
    q_2r = Cylinder(z0, 2.0 * r, CylinderShape.CUBE)
    q_3r = Cylinder(z0, 3.0 * r, CylinderShape.CUBE)
    if not _fits_domain(traj, q_3r):
        raise ValueError("Q_{3R}(z0) exceeds the computational domain")

    tw = traj.time_weights()
    cell = traj.grid.cell_volume
    grad_r = 0.0
    grad_3r = 0.0
    diff_2r = 0.0
    sup_slice = 0.0
    for n in range(traj.n_times):
        m_r = region_mask(traj, q_r, n)
        m_2r = region_mask(traj, q_2r, n)
        m_3r = region_mask(traj, q_3r, n)
        if m_3r.any():
            gsq = _grad_v_sq(traj, n)
            grad_3r += float(gsq[m_3r].sum()) * cell * tw[n]
            if m_r.any():
                grad_r += float(gsq[m_r].sum()) * cell * tw[n]
        if m_2r.any():
            mean_2r = weighted_mean(traj, z0, r, float(traj.times[n]))
            diff_2r += float(((traj.values[n][m_2r] - mean_2r) ** 2).sum()) * cell * tw[n]
        if m_r.any():
            mean_r = weighted_mean(traj, z0, r / 2.0, float(traj.times[n]))
            sup_slice = max(
                sup_slice,
                float(((traj.values[n][m_r] - mean_r) ** 2).sum()) * cell,
            )
    rhs1 = diff_2r / r**2
    c1 = math.nan if rhs1 == 0.0 else grad_r / rhs1
    c2 = math.nan if grad_3r == 0.0 else sup_slice / grad_3r
    degenerate = rhs1 == 0.0 and grad_3r == 0.0
    return ProbeReport(
        name="caccioppoli",
        params={"R": r},
        constants={
            "grad_sq_qr": grad_r,
            "mean_diff_sq_q2r": diff_2r,
            "energy_constant": c1,
            "sup_slice_diff_sq": sup_slice,
            "grad_sq_q3r": grad_3r,
            "poincare_constant": c2,
        },
        verdict="degenerate" if degenerate else "ok",
    )


def fractional_seminorm(
    traj: Trajectory,
    s_order: float,
    region,
    n_pairs: int = 20_000,
    seed: int = 0,
) -> float:
    """Discrete Gagliardo seminorm over the region by pair subsampling.

    sum over point pairs of |f(z) - f(z')|^2 / |z - z'|^{D + 2s} with
    D = 2d + 1, distances taken in the trajectory's native frame; Monte Carlo
    over pairs with a fixed seed, or the exact double sum when small enough.
    """
    if not 0.0 < s_order < 1.0:
        raise ValueError(f"s_order must lie in (0, 1), got {s_order}")
    traj, region = _native(traj, region)
    coords = []
    vals = []
    weights = []
    tw = traj.time_weights()
    cell = traj.grid.cell_volume
    x_mesh, v_mesh = traj.grid.meshes()
    for n in range(traj.n_times):
        mask = region_mask(traj, region, n)
        if not mask.any():
            continue
        xs = x_mesh[mask]
        vs = v_mesh[mask]
        ts = np.full(xs.shape[0], float(traj.times[n]))
        coords.append(np.concatenate([xs, vs, ts[:, None]], axis=1))
        vals.append(traj.values[n][mask])
        weights.append(np.full(xs.shape[0], cell * tw[n]))
    if not coords:
        raise ValueError("region does not intersect the stored grid points")
    z = np.concatenate(coords)
    f = np.concatenate(vals)
    w = np.concatenate(weights)
    n_pts = z.shape[0]
    if n_pts < 2:
        raise ValueError("need at least two in-region points")
    power = (2 * traj.d + 1) + 2.0 * s_order

    if n_pts * n_pts <= n_pairs:
        total = 0.0
        for i in range(n_pts):
            diff = z - z[i]
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            dist[i] = np.inf
            total += float(np.sum((f - f[i]) ** 2 / dist**power * w * w[i]))
        return total

    rng = np.random.default_rng(seed)
    ii = rng.integers(0, n_pts, size=n_pairs)
    jj = rng.integers(0, n_pts, size=n_pairs)
    keep = ii != jj
    ii, jj = ii[keep], jj[keep]
    diff = z[ii] - z[jj]
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    contrib = (f[ii] - f[jj]) ** 2 / dist**power * w[ii] * w[jj]
    return float(n_pts * n_pts * contrib.mean())


def gehring_probe(
    traj: Trajectory,
    q: float,
    q0: Cylinder,
    theta: float = 0.5,
    n_radii: int = 3,
    n_time_shifts: int = 3,
    eps_cap: float = 1.0,
) -> ProbeReport:
    """Reverse-Hoelder scan of g = |grad_v f|^2 on cube cylinders.

    For the trial theta, reports the minimal b making
    avg_{Q_R} g^q <= b (avg_{Q_4R} g)^q + theta avg_{Q_4R} g^q hold on every
    scanned (center, R); separately fits the distribution tail of g to
    estimate the largest finite moment order and evaluates the higher-
    integrability ratio on the nested slanted cylinders.
    """
    traj, q0 = _native(traj, q0)
    if q <= 1.0:
        raise ValueError(f"q must exceed 1, got {q}")
    if not lower_order_free(traj.field):
        raise ValueError("gehring probe requires a run without lower-order terms (B = 0, s = 0)")

    grads = [_grad_v_sq(traj, n) for n in range(traj.n_times)]
    c = q0.center
    r0 = q0.radius

    scan: list[tuple[Cylinder, Cylinder]] = []
    for j in range(n_radii):
        r_small = r0 / 4.0 * 0.5**j
        for k in range(n_time_shifts):
            t_c = c.t - (r0**2 - (4.0 * r_small) ** 2) * k / max(1, n_time_shifts - 1)
            center = KineticPoint(c.x, c.v, t_c)
            inner = Cylinder(center, r_small, CylinderShape.CUBE)
            outer = Cylinder(center, 4.0 * r_small, CylinderShape.CUBE)
            if _contained_in(outer, q0):
                scan.append((inner, outer))
    if not scan:
        raise ValueError("no admissible scan cylinders inside Q0")

    def _avg(region, power: float) -> float | None:
        tw = traj.time_weights()
        cell = traj.grid.cell_volume
        tot = 0.0
        measure = 0.0
        for n in range(traj.n_times):
            mask = region_mask(traj, region, n)
            if not mask.any():
                continue
            tot += float(np.sum(grads[n][mask] ** power)) * cell * tw[n]
            measure += float(mask.sum()) * cell * tw[n]
        if measure == 0.0:
            return None
        return tot / measure

    b_worst = -math.inf
    b_arg = None
    for inner, outer in scan:
        lhs = _avg(inner, q)
        g_mean = _avg(outer, 1.0)
        g_q_mean = _avg(outer, q)
        if lhs is None or g_mean is None or g_q_mean is None or g_mean <= 0.0:
            # scan cylinders below the stored snapshot resolution are skipped
            continue
        b_needed = (lhs - theta * g_q_mean) / g_mean**q
        if b_needed > b_worst:
            b_worst = b_needed
            b_arg = (float(inner.radius), float(inner.center.t))
    b_emp = max(0.0, b_worst) if b_arg is not None else math.nan

    # tail fit of g on Q[2] for the largest finite moment order
    q_2 = Cylinder(c, 0.5 * r0)
    q_1 = Cylinder(c, 0.75 * r0)
    g_vals = []
    for n in range(traj.n_times):
        mask = region_mask(traj, q_2, n)
        if mask.any():
            g_vals.append(grads[n][mask])
    g_all = np.sort(np.concatenate(g_vals))[::-1]
    positive = g_all[g_all > 0.0]
    eps_emp = eps_cap
    if positive.size >= 16:
        m = max(8, positive.size // 10)
        lam = positive[:m]
        # a flat top decile means no polynomial tail: every moment is finite
        if np.ptp(np.log(lam)) > 1e-8:
            survival = (np.arange(m) + 1.0) / positive.size
            slope, _ = np.polyfit(np.log(lam), np.log(survival), 1)
            a_tail = -slope
            if a_tail > 1.0:
                eps_emp = float(min(eps_cap, 2.0 * (a_tail - 1.0)))
            else:
                eps_emp = 0.0

    def _integral(region, power: float) -> float:
        tw = traj.time_weights()
        cell = traj.grid.cell_volume
        tot = 0.0
        for n in range(traj.n_times):
            mask = region_mask(traj, region, n)
            if mask.any():
                tot += float(np.sum(grads[n][mask] ** power)) * cell * tw[n]
        return tot

    num = _integral(q_2, (2.0 + eps_emp) / 2.0)
    den = _integral(q_1, 1.0) ** ((2.0 + eps_emp) / 2.0)
    ratio = math.nan if den == 0.0 else num / den
    return ProbeReport(
        name="gehring",
        params={"q": q, "theta": theta, "r0": r0, "n_scanned": len(scan)},
        constants={
            "b_emp": b_emp,
            "theta_emp": theta,
            "epsilon_emp": eps_emp,
            "l2eps_ratio": ratio,
            "b_arg_radius": math.nan if b_arg is None else b_arg[0],
            "b_arg_time": math.nan if b_arg is None else b_arg[1],
        },
        verdict="ok" if b_arg is not None else "degenerate",
    )


def _contained_in(inner: Cylinder, outer: Cylinder) -> bool:
    """Sufficient containment check via window bounds (same-frame cylinders)."""
    wx_i, wv_i, tlo_i, thi_i = inner.windows()
    wx_o, wv_o, tlo_o, thi_o = outer.windows()
    d = inner.d
    for m in range(d):
        dv = inner.center.v[m] - outer.center.v[m]
        if abs(dv) + wv_i > wv_o:
            return False
        # x offset in the outer frame over the inner time window
        for t_rel in (tlo_i, thi_i):
            t_abs = inner.center.t + t_rel
            off = (
                inner.center.x[m]
                + t_rel * inner.center.v[m]
                - outer.center.x[m]
                - (t_abs - outer.center.t) * outer.center.v[m]
            )
            if abs(off) + wx_i > wx_o:
                return False
    in_t = (
        inner.center.t + tlo_i >= outer.center.t + tlo_o
        and inner.center.t + thi_i <= outer.center.t + thi_o
    )
    return in_t


def propagation_probe(
    traj: Trajectory,
    params: HarnackParams,
    r_ladder,
    z: KineticPoint | None = None,
) -> ProbeReport:
    """Minimum propagation: min_{Q^el_r(z)} f against C_pm r^{-q} min_{Q^+} f.

    Fits the empirical exponent q_hat from the log-log decay of
    min_{Q^el_r} f / min_{Q^+} f over the ladder of r values.
    """
    traj, center, z = _native(traj, params.center, z)
    params = replace(params, center=center)
    if not source_nonnegative(traj.field):
        raise ValueError("propagation probe requires a sign-definite (s >= 0) run")
    if z is None:
        z = params._minus_center()
    q_minus_2 = params.q_minus(params.rho2)
    m_plus = _region_min(traj, params.q_plus())

    rs = sorted(float(r) for r in r_ladder)
    if not rs or rs[0] <= 0.0:
        raise ValueError("r ladder must contain positive radii")
    mins = []
    omega = 0.25
    for r in rs:
        q_el = Cylinder(z, r, CylinderShape.ELONGATED, omega=omega)
        if not _contained_in(q_el, q_minus_2):
            raise ValueError(f"Q^el_{r}(z) is not contained in Q^-[2]")
        mins.append(_region_min(traj, q_el))

    constants: dict = {"c_pm": params.c_pm, "min_q_plus": m_plus}
    for i, (r, m) in enumerate(zip(rs, mins), start=1):
        constants[f"r_{i}"] = r
        constants[f"min_el_{i}"] = m
        constants[f"bound_{i}"] = params.c_pm * r ** (-params.q) * m_plus
    if m_plus <= 0.0:
        return ProbeReport(
            name="propagation",
            params={"q": params.q, "R": params.r, "Delta": params.delta},
            constants=constants,
            verdict="degenerate",
        )
    ratios = np.array(mins) / m_plus
    if len(rs) >= 2 and np.all(ratios > 0.0):
        slope, _ = np.polyfit(np.log(rs), np.log(ratios), 1)
        constants["q_hat"] = float(-slope)
    else:
        constants["q_hat"] = math.nan
    return ProbeReport(
        name="propagation",
        params={"q": params.q, "R": params.r, "Delta": params.delta},
        constants=constants,
        verdict="ok",
    )


def energy_estimate_check(traj: Trajectory, q_int: Cylinder, q_ext: Cylinder) -> ProbeReport:
    """Discrete local energy estimate on nested cylinders.

    Measures sup_t int_{Q_int^t} f^2 + int_{Q_int} |grad_v f|^2 against
    C01 int_{Q_ext} f^2 + int_{Q_ext} s^2 and reports the empirical ratio.
    """
    traj, q_int, q_ext = _native(traj, q_int, q_ext)
    _require_nested(q_int, q_ext)
    tw = traj.time_weights()
    cell = traj.grid.cell_volume
    sup_slice = 0.0
    grad_int = 0.0
    f_sq_ext = 0.0
    s_sq_ext = 0.0
    for n in range(traj.n_times):
        m_int = region_mask(traj, q_int, n)
        m_ext = region_mask(traj, q_ext, n)
        if m_int.any():
            vals = traj.values[n][m_int]
            sup_slice = max(sup_slice, float((vals**2).sum()) * cell)
            grad_int += float(_grad_v_sq(traj, n)[m_int].sum()) * cell * tw[n]
        if m_ext.any():
            f_sq_ext += float((traj.values[n][m_ext] ** 2).sum()) * cell * tw[n]
            s_here = _source_values(traj, n)[m_ext]
            s_sq_ext += float((s_here**2).sum()) * cell * tw[n]
    c01 = c01_constant(q_ext.radius, q_int.radius)
    lhs = sup_slice + grad_int
    rhs = c01 * f_sq_ext + s_sq_ext
    degenerate = rhs == 0.0
    return ProbeReport(
        name="energy",
        params={"r_int": q_int.radius, "r_ext": q_ext.radius},
        constants={
            "c01": c01,
            "sup_slice_f_sq": sup_slice,
            "grad_sq_int": grad_int,
            "f_sq_ext": f_sq_ext,
            "source_sq_ext": s_sq_ext,
            "cbar": math.nan if degenerate else lhs / rhs,
        },
        verdict="trivial" if degenerate else "ok",
    )

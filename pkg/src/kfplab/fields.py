"""Seeded generators for rough (merely measurable, bounded) coefficient data
(A, B, s) with a certified ellipticity window.

A field is never stored pointwise: it is a pure function of (point, recipe,
seed), so evaluation order and process boundaries cannot change it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.stats import qmc


@dataclass(frozen=True)
class EllipticityBounds:
    """0 < lam I <= A <= Lam I."""

    lam: float
    big_lam: float

    def __post_init__(self) -> None:
        if not 0.0 < self.lam <= self.big_lam:
            raise ValueError(f"need 0 < lambda <= Lambda, got {self.lam}, {self.big_lam}")


@dataclass(frozen=True)
class CoefficientField:
    """Rough data (A, B, s) with its declared bounds and generation descriptor.

    ``a_fn``/``b_fn``/``s_fn`` accept x, v of shape (..., d) and t of shape
    (...,) (or scalar) and return (..., d, d) / (..., d) / (...,) arrays.
    ``time_key`` buckets times into intervals on which the field is constant,
    allowing solvers to reuse factorisations; the default never reuses.
    """

    d: int
    bounds: EllipticityBounds
    s_bound: float
    descriptor: dict
    a_fn: Callable
    b_fn: Callable
    s_fn: Callable
    time_key: Callable[[float], object] = field(default=lambda t: t)

    def a(self, x, v, t) -> np.ndarray:
        x, v, t = _as_points(x, v, t, self.d)
        return self.a_fn(x, v, t)

    def b(self, x, v, t) -> np.ndarray:
        x, v, t = _as_points(x, v, t, self.d)
        return self.b_fn(x, v, t)

    def s(self, x, v, t) -> np.ndarray:
        x, v, t = _as_points(x, v, t, self.d)
        return self.s_fn(x, v, t)


def _as_points(x, v, t, d: int):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.ndim == 0 or x.shape[-1] != d:
        raise ValueError(f"x must have trailing dimension {d}")
    if v.shape != x.shape:
        raise ValueError("x and v must have matching shapes")
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:-1])
    return x, v, t


@dataclass(frozen=True)
class ConstantRecipe:
    """A = a_value * I (default midpoint of the ellipticity window), constant B, s."""

    kind: str = "constant"
    a_value: float | None = None
    b_value: float = 0.0
    s_value: float = 0.0


@dataclass(frozen=True)
class CheckerboardRecipe:
    """Independent draws per cell of a kinetic-scaled lattice.

    Cells have extents (cell^3, cell, cell^2) in (x, v, t) so the roughness
    pattern survives the parabolic scaling of the equation.  Per cell,
    A = Q^T diag(mu) Q with mu_i ~ U[lam, Lam] and Q a random rotation,
    B uniform in the ball of radius b_max (default Lambda), s uniform in
    [-s_max, s_max].
    """

    kind: str = "checkerboard"
    cell: float = 1.0
    b_max: float | None = None
    s_max: float = 0.0


@dataclass(frozen=True)
class SmoothRandomRecipe:
    """Random-Fourier eigenvalue fields, clipped into [lam, Lam]."""

    kind: str = "smooth"
    corr_x: float = 1.0
    corr_v: float = 1.0
    corr_t: float = 1.0
    n_modes: int = 8
    b_max: float | None = None
    s_max: float = 0.0


@dataclass(frozen=True)
class RotatingAnisotropyRecipe:
    """Eigenvalues pinned at (lam, Lam, ..., Lam) with a rotating eigenframe."""

    kind: str = "rotating"
    period: float = 1.0


Recipe = ConstantRecipe | CheckerboardRecipe | SmoothRandomRecipe | RotatingAnisotropyRecipe


def _zigzag(i: np.ndarray) -> np.ndarray:
    return np.where(i >= 0, 2 * i, -2 * i - 1)


def _rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    if d == 1:
        return np.eye(1)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _ball_draw(rng: np.random.Generator, d: int, radius: float) -> np.ndarray:
    if radius == 0.0:
        return np.zeros(d)
    g = rng.standard_normal(d)
    norm = np.linalg.norm(g)
    if norm == 0.0:
        return np.zeros(d)
    return g / norm * radius * rng.uniform() ** (1.0 / d)


def sample_field(recipe: Recipe, bounds: EllipticityBounds, seed: int, d: int = 1) -> CoefficientField:
    """Build a coefficient field for the given recipe, bounds, seed and dimension."""
    if isinstance(recipe, ConstantRecipe):
        return _constant_field(recipe, bounds, seed, d)
    if isinstance(recipe, CheckerboardRecipe):
        return _checkerboard_field(recipe, bounds, seed, d)
    if isinstance(recipe, SmoothRandomRecipe):
        return _smooth_field(recipe, bounds, seed, d)
    if isinstance(recipe, RotatingAnisotropyRecipe):
        return _rotating_field(recipe, bounds, seed, d)
    raise ValueError(f"unknown recipe {recipe!r}")


def _descriptor(recipe: Recipe, bounds: EllipticityBounds, seed: int, d: int) -> dict:
    desc = {"kind": recipe.kind, "seed": int(seed), "d": int(d),
            "lambda": bounds.lam, "Lambda": bounds.big_lam}
    for key, val in vars(recipe).items():
        if key != "kind":
            desc[key] = val
    return desc


def _constant_field(recipe: ConstantRecipe, bounds: EllipticityBounds, seed: int, d: int) -> CoefficientField:
    a_value = recipe.a_value if recipe.a_value is not None else 0.5 * (bounds.lam + bounds.big_lam)
    if not bounds.lam <= a_value <= bounds.big_lam:
        raise ValueError(f"a_value {a_value} outside [{bounds.lam}, {bounds.big_lam}]")
    if abs(recipe.b_value) > bounds.big_lam:
        raise ValueError("constant drift exceeds Lambda")
    eye = np.eye(d)

    def a_fn(x, v, t):
        return np.broadcast_to(a_value * eye, x.shape + (d,)).copy()

    def b_fn(x, v, t):
        out = np.zeros(x.shape)
        out[..., 0] = recipe.b_value
        return out

    def s_fn(x, v, t):
        return np.full(t.shape, recipe.s_value)

    return CoefficientField(
        d=d, bounds=bounds, s_bound=abs(recipe.s_value),
        descriptor=_descriptor(recipe, bounds, seed, d),
        a_fn=a_fn, b_fn=b_fn, s_fn=s_fn, time_key=lambda t: 0,
    )


def _checkerboard_field(recipe: CheckerboardRecipe, bounds: EllipticityBounds, seed: int, d: int) -> CoefficientField:
    if recipe.cell <= 0:
        raise ValueError(f"cell size must be positive, got {recipe.cell}")
    ell = recipe.cell
    b_max = bounds.big_lam if recipe.b_max is None else recipe.b_max
    if b_max > bounds.big_lam:
        raise ValueError("b_max may not exceed Lambda")
    cache: dict[tuple, tuple[np.ndarray, np.ndarray, float]] = {}

    def _cell_values(idx: tuple) -> tuple[np.ndarray, np.ndarray, float]:
        got = cache.get(idx)
        if got is None:
            rng = np.random.default_rng((int(seed), 0xC4E11) + tuple(int(_zigzag(np.int64(i))) for i in idx))
            mu = rng.uniform(bounds.lam, bounds.big_lam, size=d)
            q = _rotation(rng, d)
            a = q.T @ np.diag(mu) @ q
            a = 0.5 * (a + a.T)
            b = _ball_draw(rng, d, b_max)
            s = float(rng.uniform(-recipe.s_max, recipe.s_max)) if recipe.s_max > 0 else 0.0
            got = (a, b, s)
            cache[idx] = got
        return got

    def _indices(x, v, t):
        ix = np.floor(x / ell**3).astype(np.int64)
        iv = np.floor(v / ell).astype(np.int64)
        it = np.floor(t / ell**2).astype(np.int64)
        return np.concatenate([ix, iv, it[..., None]], axis=-1)

    def _eval(x, v, t, pick):
        idx = _indices(x, v, t)
        flat = idx.reshape(-1, idx.shape[-1])
        uniq, inv = np.unique(flat, axis=0, return_inverse=True)
        table = [pick(_cell_values(tuple(row))) for row in uniq]
        out = np.asarray(table)[inv]
        return out.reshape(x.shape[:-1] + out.shape[1:])

    def a_fn(x, v, t):
        return _eval(x, v, t, lambda cell: cell[0])

    def b_fn(x, v, t):
        return _eval(x, v, t, lambda cell: cell[1])

    def s_fn(x, v, t):
        return _eval(x, v, t, lambda cell: cell[2])

    return CoefficientField(
        d=d, bounds=bounds, s_bound=recipe.s_max,
        descriptor=_descriptor(recipe, bounds, seed, d),
        a_fn=a_fn, b_fn=b_fn, s_fn=s_fn,
        time_key=lambda t: int(np.floor(t / ell**2)),
    )


def _smooth_field(recipe: SmoothRandomRecipe, bounds: EllipticityBounds, seed: int, d: int) -> CoefficientField:
    if min(recipe.corr_x, recipe.corr_v, recipe.corr_t) <= 0:
        raise ValueError("correlation lengths must be positive")
    rng = np.random.default_rng((int(seed), 0x5A007))
    m = recipe.n_modes
    n_fields = d + d + 1  # d eigenvalue fields, d drift components, 1 source
    freqs = rng.standard_normal((n_fields, m, 2 * d + 1))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_fields, m))
    amps = rng.standard_normal((n_fields, m)) / np.sqrt(m)
    b_max = bounds.big_lam if recipe.b_max is None else recipe.b_max
    scales = np.concatenate([
        np.full(d, 1.0 / recipe.corr_x),
        np.full(d, 1.0 / recipe.corr_v),
        [1.0 / recipe.corr_t],
    ])

    def _raw(x, v, t, k):
        z = np.concatenate([x, v, t[..., None]], axis=-1) * scales
        phase = np.einsum("...j,mj->...m", z, freqs[k]) + phases[k]
        return np.einsum("...m,m->...", np.cos(phase), amps[k])

    def _unit(x, v, t, k):
        # three-sigma clip into [0, 1]
        return np.clip(0.5 + _raw(x, v, t, k) / (3.0 * 0.7071), 0.0, 1.0)

    def a_fn(x, v, t):
        lam, big = bounds.lam, bounds.big_lam
        eigs = np.stack([lam + (big - lam) * _unit(x, v, t, k) for k in range(d)], axis=-1)
        out = np.zeros(x.shape + (d,))
        for i in range(d):
            out[..., i, i] = eigs[..., i]
        return out

    def b_fn(x, v, t):
        if b_max == 0.0:
            return np.zeros(x.shape)
        comps = np.stack([2.0 * _unit(x, v, t, d + k) - 1.0 for k in range(d)], axis=-1)
        return (b_max / np.sqrt(d)) * comps

    def s_fn(x, v, t):
        if recipe.s_max == 0.0:
            return np.zeros(t.shape)
        return recipe.s_max * (2.0 * _unit(x, v, t, 2 * d) - 1.0)

    return CoefficientField(
        d=d, bounds=bounds, s_bound=recipe.s_max,
        descriptor=_descriptor(recipe, bounds, seed, d),
        a_fn=a_fn, b_fn=b_fn, s_fn=s_fn,
    )


def _rotating_field(recipe: RotatingAnisotropyRecipe, bounds: EllipticityBounds, seed: int, d: int) -> CoefficientField:
    if recipe.period <= 0:
        raise ValueError("period must be positive")
    rng = np.random.default_rng((int(seed), 0x807A7))
    shift = rng.uniform(0.0, 2.0 * np.pi)
    lam, big = bounds.lam, bounds.big_lam

    def _angle(x, v, t):
        return 2.0 * np.pi * (x[..., 0] / recipe.period**3 + t / recipe.period**2) + shift

    def a_fn(x, v, t):
        ang = _angle(x, v, t)
        if d == 1:
            val = 0.5 * (lam + big) + 0.5 * (big - lam) * np.cos(ang)
            return val[..., None, None]
        out = np.zeros(x.shape + (d,))
        c, s = np.cos(ang), np.sin(ang)
        for i in range(d):
            out[..., i, i] = big
        # rotate the lam-eigenvector within the (0, 1) plane
        out[..., 0, 0] = lam * c**2 + big * s**2
        out[..., 1, 1] = lam * s**2 + big * c**2
        out[..., 0, 1] = out[..., 1, 0] = (lam - big) * c * s
        return out

    def b_fn(x, v, t):
        return np.zeros(x.shape)

    def s_fn(x, v, t):
        return np.zeros(t.shape)

    return CoefficientField(
        d=d, bounds=bounds, s_bound=0.0,
        descriptor=_descriptor(recipe, bounds, seed, d),
        a_fn=a_fn, b_fn=b_fn, s_fn=s_fn,
    )


def field_from_descriptor(desc: dict) -> CoefficientField:
    """Reconstruct a field from its stored (recipe, seed) descriptor."""
    bounds = EllipticityBounds(desc["lambda"], desc["Lambda"])
    kind = desc["kind"]
    seed = int(desc["seed"])
    d = int(desc["d"])
    if kind == "constant":
        recipe: Recipe = ConstantRecipe(
            a_value=desc.get("a_value"),
            b_value=desc.get("b_value", 0.0),
            s_value=desc.get("s_value", 0.0),
        )
    elif kind == "checkerboard":
        recipe = CheckerboardRecipe(
            cell=desc.get("cell", 1.0),
            b_max=desc.get("b_max"),
            s_max=desc.get("s_max", 0.0),
        )
    elif kind == "smooth":
        recipe = SmoothRandomRecipe(
            corr_x=desc.get("corr_x", 1.0),
            corr_v=desc.get("corr_v", 1.0),
            corr_t=desc.get("corr_t", 1.0),
            n_modes=desc.get("n_modes", 8),
            b_max=desc.get("b_max"),
            s_max=desc.get("s_max", 0.0),
        )
    elif kind == "rotating":
        recipe = RotatingAnisotropyRecipe(period=desc.get("period", 1.0))
    else:
        raise ValueError(f"unknown field kind {kind!r}")
    out = sample_field(recipe, bounds, seed, d)
    if "corrupted_scale" in desc:
        out = scaled_diffusion(out, desc["corrupted_scale"])
    return out


def scaled_diffusion(field_in: CoefficientField, factor: float) -> CoefficientField:
    """Multiply A by a factor while keeping the declared bounds (negative control)."""
    inner = field_in.a_fn

    def a_fn(x, v, t):
        return factor * inner(x, v, t)

    desc = dict(field_in.descriptor)
    desc["corrupted_scale"] = factor
    return replace(field_in, a_fn=a_fn, descriptor=desc)


@dataclass(frozen=True)
class CertReport:
    """Sampled ellipticity certificate."""

    n_samples: int
    min_eig: float
    max_eig: float
    max_drift: float
    max_source: float
    verdict: str
    witness: tuple | None

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "min_eig": self.min_eig,
            "max_eig": self.max_eig,
            "max_drift": self.max_drift,
            "max_source": self.max_source,
            "verdict": self.verdict,
            "witness": None if self.witness is None else [float(w) for w in self.witness],
        }


def certify_field(
    field_in: CoefficientField,
    n_samples: int = 512,
    box: tuple[tuple[float, float], ...] = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 0.0)),
    seed: int = 0,
    rtol: float = 1e-9,
) -> CertReport:
    """Sample the field and check eigenvalues, |B| and |s| against the bounds.

    ``box`` gives (lo, hi) per group (x, v, t); the x/v windows apply to every
    component.  The verdict is "ok" or "violated" with a witness point.
    """
    d = field_in.d
    u = qmc.Halton(d=2 * d + 1, seed=seed).random(n_samples)
    (x_lo, x_hi), (v_lo, v_hi), (t_lo, t_hi) = box
    xs = x_lo + (x_hi - x_lo) * u[:, :d]
    vs = v_lo + (v_hi - v_lo) * u[:, d : 2 * d]
    ts = t_lo + (t_hi - t_lo) * u[:, 2 * d]

    a = field_in.a(xs, vs, ts)
    eigs = np.linalg.eigvalsh(a)
    b = field_in.b(xs, vs, ts)
    b_norm = np.sqrt(np.einsum("ij,ij->i", b, b))
    s = np.abs(field_in.s(xs, vs, ts))

    lam, big = field_in.bounds.lam, field_in.bounds.big_lam
    tol_lo = lam * (1.0 - rtol)
    tol_hi = big * (1.0 + rtol)
    bad = (
        (eigs.min(axis=-1) < tol_lo)
        | (eigs.max(axis=-1) > tol_hi)
        | (b_norm > tol_hi)
        | (s > field_in.s_bound * (1.0 + rtol) + 1e-300)
    )
    witness = None
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        witness = tuple(xs[i]) + tuple(vs[i]) + (float(ts[i]),)
    return CertReport(
        n_samples=n_samples,
        min_eig=float(eigs.min()),
        max_eig=float(eigs.max()),
        max_drift=float(b_norm.max()),
        max_source=float(s.max()),
        verdict="violated" if witness is not None else "ok",
        witness=witness,
    )

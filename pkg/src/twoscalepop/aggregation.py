"""Generic two-time-scale framework and its numerical harnesses.

A complete system is a family of maps X(t+1) = H_k(X(t)) on the nonnegative
orthant of R^N, indexed by the number k of fast steps per slow step.  As k
grows H_k approaches a limit map H that factors through a lower-dimensional
space: H = T o G with G linear onto R^q and T a lift back.  The reduced
system iterates Hbar = G o T on R^q.

The harnesses below check, by direct sampling, the three dynamical claims
that justify replacing the complete system by the reduced one: balls around
lifted attractors trap H_k^m orbits, orbits from the basin enter those
balls, and lifted repellers push boundary points out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.stats import norm as _norm_dist

from .errors import DomainExitError, InvalidCenterError
from .solvers import fd_jacobian

Vector = NDArray[np.float64]
StateMap = Callable[[Vector], Vector]

BOX_BOUND = 1e9
DEFAULT_SEED = 42
DEFAULT_HORIZON = 10**5


@dataclass(frozen=True)
class TwoScaleSystem:
    """Complete family H_k, its limit H, and the factorization H = T o G."""

    state_dim: int
    reduced_dim: int
    complete_map: Callable[[int, Vector], Vector]
    limit_map: StateMap
    projection: StateMap
    lift: StateMap

    def __post_init__(self):
        if self.state_dim < 1 or self.reduced_dim < 1:
            raise ValueError("dimensions must be positive")
        if self.reduced_dim >= self.state_dim:
            raise ValueError("reduced dimension must be smaller than state dimension")

    def complete(self, k: int) -> StateMap:
        """The map H_k with k bound."""
        if k < 1:
            raise ValueError("k must be a positive integer")
        return lambda x: self.complete_map(k, x)


@dataclass(frozen=True)
class TrapSpec:
    """Ball, period, and sampling budget for the trapping-style checks."""

    center: Vector
    radius: float
    period: int = 1
    sample_count: int = 64
    k_values: Sequence[int] = (1, 5, 10, 50, 100)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0.0:
            raise ValueError("radius must be positive")
        if self.period < 1:
            raise ValueError("period must be at least 1")
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")
        ks = tuple(int(k) for k in self.k_values)
        if not ks or any(k < 1 for k in ks):
            raise ValueError("k_values must be a nonempty list of positive integers")
        object.__setattr__(self, "k_values", ks)


@dataclass(frozen=True)
class TrapVerdict:
    trapped: bool
    witness: Optional[Vector]
    max_image_distance: float


@dataclass(frozen=True)
class AttractionVerdict:
    entered: bool
    entry_index: Optional[int]
    closest_approach: float


@dataclass(frozen=True)
class InstabilityVerdict:
    escapes_boundary: bool
    witness: Optional[Vector]
    expansion_ratio: float
    random_escape_fraction: float


@dataclass(frozen=True)
class ConvergenceTable:
    """Empirical sup-norm gaps max_X ||H_k^m(X) - H^m(X)|| per k."""

    gaps: dict[int, float]
    skipped: tuple[int, ...]


def default_radius(center) -> float:
    """Shipped ball radius: 0.05 relative to the center, absolute at zero."""
    scale = float(np.linalg.norm(np.asarray(center, dtype=float)))
    return 0.05 * scale if scale > 0.0 else 0.05


def _require_admissible(x: Vector, step: int) -> None:
    if not np.all(np.isfinite(x)):
        raise DomainExitError("state has a non-finite coordinate", step=step, state=x)
    if np.any(x < 0.0):
        raise DomainExitError("state left the nonnegative orthant", step=step, state=x)
    if np.any(x > BOX_BOUND):
        raise DomainExitError("state exceeded the box bound", step=step, state=x)


def iterate(map_fn: StateMap, x0, steps: int) -> list[Vector]:
    """Orbit segment [X0, map(X0), ..., map^steps(X0)].

    Raises DomainExitError as soon as an iterate leaves the admissible set
    (nonnegative orthant, coordinates at most BOX_BOUND, finite).
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    x = np.asarray(x0, dtype=float)
    _require_admissible(x, 0)
    out = [x]
    for t in range(steps):
        x = np.asarray(map_fn(x), dtype=float)
        _require_admissible(x, t + 1)
        out.append(x)
    return out


def reduced_map(sys: TwoScaleSystem) -> StateMap:
    """The aggregated map Hbar = G o T on R^q."""
    return lambda y: sys.projection(sys.lift(y))


def _compose(map_fn: StateMap, x: Vector, m: int) -> Vector:
    for _ in range(m):
        x = map_fn(x)
    return x


def convergence_table(sys: TwoScaleSystem, samples, m: int, k_values) -> ConvergenceTable:
    """Max Euclidean gap between H_k^m and H^m over the sampled states.

    Samples whose orbit leaves the admissible set under any of the maps are
    reported in ``skipped`` and excluded from every column, so the per-k
    maxima range over a common set.
    """
    pts = [np.asarray(s, dtype=float) for s in samples]
    if not pts:
        raise ValueError("samples must be nonempty")
    ks = [int(k) for k in k_values]

    def _guarded(map_fn, x):
        y = x
        for step in range(m):
            y = np.asarray(map_fn(y), dtype=float)
            _require_admissible(y, step + 1)
        return y

    skipped: set[int] = set()
    limit_images: dict[int, Vector] = {}
    for i, x in enumerate(pts):
        try:
            limit_images[i] = _guarded(sys.limit_map, x)
        except DomainExitError:
            skipped.add(i)

    complete_images: dict[int, dict[int, Vector]] = {k: {} for k in ks}
    for k in ks:
        hk = sys.complete(k)
        for i, x in enumerate(pts):
            if i in skipped:
                continue
            try:
                complete_images[k][i] = _guarded(hk, x)
            except DomainExitError:
                skipped.add(i)

    gaps: dict[int, float] = {}
    for k in ks:
        worst = 0.0
        for i in range(len(pts)):
            if i in skipped:
                continue
            worst = max(worst, float(np.linalg.norm(complete_images[k][i] - limit_images[i])))
        gaps[k] = worst
    return ConvergenceTable(gaps=gaps, skipped=tuple(sorted(skipped)))


def _kronecker_sphere_mesh(count: int, dim: int) -> Vector:
    # Low-discrepancy direction set: a Kronecker sequence driven by the real
    # root of x**(dim+1) = x + 1, pushed through the normal quantile and
    # radially normalized.  Deterministic, no RNG involved.
    phi = 2.0
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (dim + 1))
    alpha = (1.0 / phi) ** np.arange(1, dim + 1)
    idx = np.arange(1, count + 1)[:, None]
    u = np.mod(0.5 + idx * alpha[None, :], 1.0)
    g = _norm_dist.ppf(np.clip(u, 1e-12, 1.0 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def ball_samples(center, radius: float, count: int, seed: int = DEFAULT_SEED) -> Vector:
    """Sample ``count`` points of the closed ball around ``center``.

    The first ceil(count/2) points form a deterministic mesh on the boundary
    sphere; the remainder are uniform in the interior, drawn from a seeded
    generator so repeated calls agree.
    """
    c = np.asarray(center, dtype=float)
    dim = c.size
    n_sphere = math.ceil(count / 2)
    pts = [c + radius * _kronecker_sphere_mesh(n_sphere, dim)]
    n_inner = count - n_sphere
    if n_inner > 0:
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((n_inner, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = radius * rng.random(n_inner) ** (1.0 / dim)
        pts.append(c + radii[:, None] * dirs)
    return np.vstack(pts)


def _check_center(sys: TwoScaleSystem, trap: TrapSpec) -> None:
    drift = float(np.linalg.norm(_compose(sys.limit_map, trap.center, trap.period) - trap.center))
    if drift > trap.radius / 10.0:
        raise InvalidCenterError(
            f"center moves by {drift:.3e} under the limit map, exceeding radius/10"
        )


def trapping_check(sys: TwoScaleSystem, trap: TrapSpec) -> dict[int, TrapVerdict]:
    """Per-k test that H_k^period maps the closed ball into the open ball.

    trapped means every sampled point lands strictly inside; otherwise the
    first offending sample is returned as witness.
    """
    _check_center(sys, trap)
    pts = ball_samples(trap.center, trap.radius, trap.sample_count)
    out: dict[int, TrapVerdict] = {}
    for k in trap.k_values:
        hk = sys.complete(k)
        witness = None
        worst = 0.0
        for p in pts:
            d = float(np.linalg.norm(_compose(hk, p, trap.period) - trap.center))
            worst = max(worst, d)
            if d >= trap.radius and witness is None:
                witness = p
        out[k] = TrapVerdict(trapped=witness is None, witness=witness, max_image_distance=worst)
    return out


def attraction_check(sys: TwoScaleSystem, trap: TrapSpec, x0,
                     horizon: int = DEFAULT_HORIZON) -> dict[int, AttractionVerdict]:
    """Per-k entry test for the orbit of X0 under H_k.

    Watches the iterates H_k^(m*n+1)(X0) for n = 0, 1, ... up to ``horizon``
    complete-map steps and reports the smallest n from which every watched
    iterate stays in the open ball.  When no such n exists within the
    horizon the verdict carries the closest approach observed.
    """
    _check_center(sys, trap)
    m = trap.period
    out: dict[int, AttractionVerdict] = {}
    for k in trap.k_values:
        hk = sys.complete(k)
        x = np.asarray(x0, dtype=float)
        _require_admissible(x, 0)
        dists: list[float] = []
        for t in range(1, horizon + 1):
            x = np.asarray(hk(x), dtype=float)
            _require_admissible(x, t)
            if (t - 1) % m == 0:
                dists.append(float(np.linalg.norm(x - trap.center)))
        entry: Optional[int] = None
        for n in range(len(dists) - 1, -1, -1):
            if dists[n] >= trap.radius:
                break
            entry = n
        if entry is None:
            out[k] = AttractionVerdict(entered=False, entry_index=None,
                                       closest_approach=min(dists))
        else:
            out[k] = AttractionVerdict(entered=True, entry_index=entry,
                                       closest_approach=min(dists))
    return out


def _expanding_direction(map_m: StateMap, center: Vector) -> tuple[Vector, float]:
    jac = fd_jacobian(map_m, center)
    eigvals, eigvecs = np.linalg.eig(jac)
    lead = int(np.argmax(np.abs(eigvals)))
    vec = eigvecs[:, lead]
    real = np.real(vec)
    if np.linalg.norm(real) < 1e-8:
        real = np.imag(vec)
    real = real / np.linalg.norm(real)
    return real, float(np.abs(eigvals[lead]))


def instability_check(sys: TwoScaleSystem, trap: TrapSpec) -> dict[int, InstabilityVerdict]:
    """Per-k test that boundary points on the expanding direction leave the ball.

    For each k the leading eigendirection u of the finite-difference Jacobian
    of H_k^period at the center is estimated, and the two points center +-
    radius*u are mapped once by H_k^period.  escapes_boundary requires both
    images to fall outside the closed ball.  Random boundary points are
    mapped as well; their escape fraction is reported but not asserted.
    """
    _check_center(sys, trap)
    m = trap.period
    rng = np.random.default_rng(DEFAULT_SEED)
    dirs = rng.standard_normal((trap.sample_count, trap.center.size))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    out: dict[int, InstabilityVerdict] = {}
    for k in trap.k_values:
        hk = sys.complete(k)
        map_m = lambda x: _compose(hk, x, m)
        u, _ = _expanding_direction(map_m, trap.center)
        witness = None
        ratio = np.inf
        for sign in (1.0, -1.0):
            p = trap.center + sign * trap.radius * u
            d = float(np.linalg.norm(map_m(p) - trap.center))
            ratio = min(ratio, d / trap.radius)
            if d <= trap.radius and witness is None:
                witness = p
        n_escaped = 0
        for v in dirs:
            p = trap.center + trap.radius * v
            if float(np.linalg.norm(map_m(p) - trap.center)) > trap.radius:
                n_escaped += 1
        out[k] = InstabilityVerdict(
            escapes_boundary=witness is None,
            witness=witness,
            expansion_ratio=float(ratio),
            random_escape_fraction=n_escaped / trap.sample_count,
        )
    return out

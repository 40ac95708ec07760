"""Three-stage, two-patch model: juveniles, active adults, inactive adults.

Demography on each patch sends juveniles to active adults with survival s1,
active adults to inactive with s2, and lets inactive adults either re-enter
the active stage (rate g) or remain inactive, surviving s3 either way.
Births are produced by surviving active adults at the crowding-limited rate
f(x2) = phi / (1 + c x2); re-entry is depressed by active-adult density as
g(x2) = 1 / (1 + d x2).  Dispersal between the two patches is fast and
per-stage.

Aggregating over patches gives a 3-dimensional reduced map whose projection
matrix at total-active-density y2 is

    [ 0        b h1(y2)        0              ]
    [ s1       0               s3 h2(y2)      ]
    [ 0        s2              s3 (1-h2(y2))  ]

with coefficients depending on the variant: slow_survival averages rates
along the dispersal Perron fractions (arithmetic means), rescaled moves
survival onto the fast scale and produces weighted geometric means.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from . import metapop
from .aggregation import TwoScaleSystem
from .errors import NegativeDensityError
from .metapop import VARIANT_RESCALED, VARIANT_SLOW, VARIANTS

Vector = NDArray[np.float64]

DEFAULT_MIXING = 0.9  # theta: migration intensity realizing prescribed Perron fractions

STAGES = 3
PATCHES = 2


def _as_pair(x, name: str) -> NDArray[np.float64]:
    a = np.asarray(x, dtype=float)
    if a.shape != (2,):
        raise ValueError(f"{name} must have one value per patch")
    return a


@dataclass(frozen=True)
class ThreeStageParams:
    """Parameter record; rates indexed [stage, patch] or [patch].

    migration[i] = (p_i, q_i) are the patch-1 -> 2 and 2 -> 1 rates for
    stage i, giving the dispersal matrix [[1-p, q], [p, 1-q]].
    """

    survivals: NDArray[np.float64]     # (3, 2), entries in (0, 1)
    fertilities: NDArray[np.float64]   # (2,), > 0
    crowding_c: NDArray[np.float64]    # (2,), > 0
    crowding_d: NDArray[np.float64]    # (2,), > 0
    migration: NDArray[np.float64]     # (3, 2) rows (p_i, q_i), entries in (0, 1)

    def __post_init__(self):
        s = np.asarray(self.survivals, dtype=float)
        mig = np.asarray(self.migration, dtype=float)
        object.__setattr__(self, "survivals", s)
        object.__setattr__(self, "fertilities", _as_pair(self.fertilities, "fertilities"))
        object.__setattr__(self, "crowding_c", _as_pair(self.crowding_c, "crowding_c"))
        object.__setattr__(self, "crowding_d", _as_pair(self.crowding_d, "crowding_d"))
        object.__setattr__(self, "migration", mig)
        if s.shape != (STAGES, PATCHES):
            raise ValueError("survivals must be a (3, 2) table")
        if np.any(s <= 0.0) or np.any(s >= 1.0):
            raise ValueError("survivals must lie strictly inside (0, 1)")
        if np.any(self.fertilities <= 0.0):
            raise ValueError("fertilities must be positive")
        if np.any(self.crowding_c <= 0.0) or np.any(self.crowding_d <= 0.0):
            raise ValueError("crowding coefficients must be positive")
        if mig.shape != (STAGES, PATCHES):
            raise ValueError("migration must be a (3, 2) table of (p, q) rows")
        if np.any(mig <= 0.0) or np.any(mig >= 1.0):
            raise ValueError("migration rates must lie strictly inside (0, 1)")

    @classmethod
    def from_fractions(cls, survivals, fertilities, crowding_c, crowding_d,
                       fractions, mixing: float = DEFAULT_MIXING) -> "ThreeStageParams":
        """Build migration rates realizing prescribed patch-1 Perron fractions.

        p_i = mixing*(1 - v_i), q_i = mixing*v_i gives Perron fraction
        q/(p+q) = v_i exactly for any mixing strength in (0, 1).
        """
        v = np.asarray(fractions, dtype=float)
        if v.shape != (STAGES,):
            raise ValueError("fractions must give one patch-1 share per stage")
        if np.any(v <= 0.0) or np.any(v >= 1.0):
            raise ValueError("fractions must lie strictly inside (0, 1)")
        if not 0.0 < mixing < 1.0:
            raise ValueError("mixing strength must lie strictly inside (0, 1)")
        mig = np.column_stack([mixing * (1.0 - v), mixing * v])
        return cls(survivals, fertilities, crowding_c, crowding_d, mig)

    def fraction_table(self) -> NDArray[np.float64]:
        """Perron fractions (v_i^1, v_i^2) of each stage's dispersal matrix."""
        p = self.migration[:, 0]
        q = self.migration[:, 1]
        v1 = q / (p + q)
        return np.column_stack([v1, 1.0 - v1])

    def is_patch_homogeneous(self, tol: float = 1e-12) -> bool:
        """True when survivals, fertilities, and crowding match across patches."""
        return bool(
            np.max(np.abs(self.survivals[:, 0] - self.survivals[:, 1])) <= tol
            and abs(self.fertilities[0] - self.fertilities[1]) <= tol
            and abs(self.crowding_c[0] - self.crowding_c[1]) <= tol
            and abs(self.crowding_d[0] - self.crowding_d[1]) <= tol
        )


def _guarded_reciprocal(den: float) -> float:
    # rational responses stay smooth for small negative densities; only a
    # nonpositive denominator (at or beyond the pole) is a caller error
    if den <= 0.0:
        raise NegativeDensityError("density argument at or beyond the response pole")
    return 1.0 / den


def fertility_response(phi: float, c: float, x2: float) -> float:
    """phi / (1 + c x2)."""
    return phi * _guarded_reciprocal(1.0 + c * x2)


def recovery_response(d: float, x2: float) -> float:
    """1 / (1 + d x2)."""
    return _guarded_reciprocal(1.0 + d * x2)


def dispersal_matrices(params: ThreeStageParams) -> list[NDArray[np.float64]]:
    out = []
    for i in range(STAGES):
        p, q = params.migration[i]
        out.append(np.array([[1.0 - p, q], [p, 1.0 - q]]))
    return out


@dataclass(frozen=True)
class DemographyFactors:
    """Demography matrix D, its survival-free residual, and the survival diagonal."""

    full: NDArray[np.float64]
    residual: NDArray[np.float64]
    survival_diagonal: NDArray[np.float64]


def demography_matrix(params: ThreeStageParams, x) -> DemographyFactors:
    """The 6x6 demography at state X, factored as full = residual * diag(survival).

    State order is (x1^1, x1^2, x2^1, x2^2, x3^1, x3^2); the matrix has
    exactly ten structurally nonzero entries.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (STAGES * PATCHES,):
        raise ValueError("state must have six coordinates")
    s = params.survivals
    dt = np.zeros((6, 6))
    for a in range(PATCHES):
        x2 = float(x[2 + a])
        f = fertility_response(params.fertilities[a], params.crowding_c[a], x2)
        g = recovery_response(params.crowding_d[a], x2)
        dt[0 + a, 2 + a] = f
        dt[2 + a, 0 + a] = 1.0
        dt[2 + a, 4 + a] = g
        dt[4 + a, 2 + a] = 1.0
        dt[4 + a, 4 + a] = 1.0 - g
    diag = s.ravel()  # column order (stage, patch) matches the state order
    full = dt * diag[None, :]
    return DemographyFactors(full=full, residual=dt, survival_diagonal=diag)


def make_model(params: ThreeStageParams) -> metapop.MetapopModel:
    """Constant-rate stage-patch model for the generic machinery."""
    mats = dispersal_matrices(params)
    return metapop.MetapopModel(
        stages=STAGES,
        patches=PATCHES,
        dispersal=lambda y: mats,
        demography=lambda x: demography_matrix(params, x).full,
        survival=lambda y: params.survivals,
        constant_rates=True,
    )


def make_system(params: ThreeStageParams, variant: str) -> TwoScaleSystem:
    return metapop.make_system(make_model(params), variant)


@dataclass(frozen=True)
class ReducedCoefficients:
    """Aggregated rates and density responses of the 3-dimensional map."""

    variant: str
    s1: float
    s2: float
    s3: float
    b: float
    h1: Callable[[float], float]
    h2: Callable[[float], float]
    h1_prime0: float
    h2_prime0: float


def _h_closure(weights: NDArray[np.float64], slopes: NDArray[np.float64],
               scale: float) -> Callable[[float], float]:
    # sum_a (weights_a / scale) / (1 + slopes_a * y2)
    w = weights / scale

    def h(y2: float) -> float:
        return float(w[0] * _guarded_reciprocal(1.0 + slopes[0] * y2)
                     + w[1] * _guarded_reciprocal(1.0 + slopes[1] * y2))

    return h


def coefficients_from_fractions(survivals, fertilities, crowding_c, crowding_d,
                                fractions, variant: str) -> ReducedCoefficients:
    """Aggregated coefficients for prescribed patch-1 Perron shares.

    ``fractions`` is one share per stage, from the closed interval [0, 1];
    the endpoints describe all-in-one-patch dispersal limits, useful in
    design sweeps even though a migration matrix cannot realize them.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    v1 = np.asarray(fractions, dtype=float)
    if v1.shape != (STAGES,) or np.any(v1 < 0.0) or np.any(v1 > 1.0):
        raise ValueError("fractions must be three shares in [0, 1]")
    v = np.column_stack([v1, 1.0 - v1])
    s = np.asarray(survivals, dtype=float)
    phi = _as_pair(fertilities, "fertilities")
    c = _as_pair(crowding_c, "crowding_c")
    d = _as_pair(crowding_d, "crowding_d")
    if variant == VARIANT_RESCALED:
        s1, s2, s3 = (float(np.prod(s[i] ** v[i])) for i in range(STAGES))
        birth_w = phi * s2 * v[1]
        b = float(birth_w.sum())
        h1_slopes = c * s2 * v[1]
        h2_w = v[2]
        h2_slopes = d * s2 * v[1]
        h1 = _h_closure(birth_w, h1_slopes, b)
        h2 = _h_closure(h2_w, h2_slopes, 1.0)
        h1p = -float((birth_w * h1_slopes).sum()) / b
        h2p = -float((h2_w * h2_slopes).sum())
    else:
        s1, s2, s3 = (float(s[i] @ v[i]) for i in range(STAGES))
        birth_w = phi * s[1] * v[1]
        b = float(birth_w.sum())
        h1_slopes = c * v[1]
        h2_w = s[2] * v[2]
        h2_slopes = d * v[1]
        h1 = _h_closure(birth_w, h1_slopes, b)
        h2 = _h_closure(h2_w, h2_slopes, s3)
        h1p = -float((birth_w * h1_slopes).sum()) / b
        h2p = -float((h2_w * h2_slopes).sum()) / s3
    return ReducedCoefficients(variant=variant, s1=s1, s2=s2, s3=s3, b=b,
                               h1=h1, h2=h2, h1_prime0=h1p, h2_prime0=h2p)


def reduced_coefficients(params: ThreeStageParams, variant: str) -> ReducedCoefficients:
    return coefficients_from_fractions(
        params.survivals, params.fertilities, params.crowding_c,
        params.crowding_d, params.fraction_table()[:, 0], variant,
    )


def reduced_matrix(co: ReducedCoefficients, y2: float) -> NDArray[np.float64]:
    """Projection matrix of the reduced map at total active density y2."""
    hh2 = co.h2(y2)
    return np.array([
        [0.0, co.b * co.h1(y2), 0.0],
        [co.s1, 0.0, co.s3 * hh2],
        [0.0, co.s2, co.s3 * (1.0 - hh2)],
    ])


def reduced_map(params: ThreeStageParams, variant: str) -> Callable[[Vector], Vector]:
    """Fast closure for the 3-dimensional reduced dynamics."""
    co = reduced_coefficients(params, variant)
    s1, s2, s3, b = co.s1, co.s2, co.s3, co.b
    h1, h2 = co.h1, co.h2

    def step(y):
        y = np.asarray(y, dtype=float)
        y2 = float(y[1])
        hh2 = h2(y2)
        return np.array([
            b * h1(y2) * y2,
            s1 * y[0] + s3 * hh2 * y[2],
            s2 * y2 + s3 * (1.0 - hh2) * y[2],
        ])

    return step


def reduced_step(params: ThreeStageParams, variant: str, y) -> Vector:
    return reduced_map(params, variant)(y)


def inherent_R0(params: ThreeStageParams, variant: str) -> float:
    """Net reproduction number b s1 / (1 - s2 s3) of the reduced map at 0."""
    co = reduced_coefficients(params, variant)
    return co.b * co.s1 / (1.0 - co.s2 * co.s3)


def local_map(params: ThreeStageParams, patch: int) -> Callable[[Vector], Vector]:
    """Single-patch dynamics with dispersal switched off."""
    s1, s2, s3 = params.survivals[:, patch]
    phi = float(params.fertilities[patch])
    c = float(params.crowding_c[patch])
    d = float(params.crowding_d[patch])

    def step(y):
        y = np.asarray(y, dtype=float)
        y2 = float(y[1])
        f = fertility_response(phi, c, y2)
        g = recovery_response(d, y2)
        return np.array([
            s2 * f * y2,
            s1 * y[0] + s3 * g * y[2],
            s2 * y2 + s3 * (1.0 - g) * y[2],
        ])

    return step


def local_quantities(params: ThreeStageParams, patch: int) -> tuple[float, float]:
    """(R0, a_minus) of the isolated patch.

    a_minus = -(1 - s2 s3) s1 c + s1 s2 s3 (1 - s3) d; its sign separates
    single-patch equilibrium stability from synchronous-cycle stability.
    """
    s1, s2, s3 = (float(t) for t in params.survivals[:, patch])
    phi = float(params.fertilities[patch])
    c = float(params.crowding_c[patch])
    d = float(params.crowding_d[patch])
    r0 = phi * s1 * s2 / (1.0 - s2 * s3)
    a_minus = -(1.0 - s2 * s3) * s1 * c + s1 * s2 * s3 * (1.0 - s3) * d
    return r0, a_minus


@dataclass(frozen=True)
class BifurcationData:
    """Scalar quantities deciding branch stability just above R0 = 1."""

    variant: str
    r0: float
    c_w: float
    c_b: float
    a_plus: float
    a_minus: float


def bifurcation_from_coefficients(co: ReducedCoefficients) -> BifurcationData:
    c_w = (1.0 - co.s2 * co.s3) * co.s1 * co.h1_prime0
    c_b = co.s1 * co.s2 * co.s3 * (1.0 - co.s3) * co.h2_prime0
    return BifurcationData(
        variant=co.variant,
        r0=co.b * co.s1 / (1.0 - co.s2 * co.s3),
        c_w=c_w,
        c_b=c_b,
        a_plus=c_w + c_b,
        a_minus=c_w - c_b,
    )


def bifurcation_data(params: ThreeStageParams, variant: str) -> BifurcationData:
    return bifurcation_from_coefficients(reduced_coefficients(params, variant))


@dataclass(frozen=True)
class BranchPrediction:
    """First-order branch points emerging from the extinction equilibrium.

    The equilibrium branch pairs r0_equilibrium with ``equilibrium``; the
    synchronous-cycle branch pairs r0_cycle with the alternating pair
    (cycle_active_phase, cycle_rest_phase).
    """

    epsilon: float
    r0_equilibrium: float
    equilibrium: Vector
    r0_cycle: float
    cycle_active_phase: Vector
    cycle_rest_phase: Vector


def branch_prediction(params: ThreeStageParams, variant: str, epsilon: float) -> BranchPrediction:
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    co = reduced_coefficients(params, variant)
    data = bifurcation_data(params, variant)
    gap = 1.0 - co.s2 * co.s3
    return BranchPrediction(
        epsilon=epsilon,
        r0_equilibrium=1.0 - data.a_plus * epsilon / gap,
        equilibrium=epsilon * np.array([gap, co.s1, co.s1 * co.s2]),
        r0_cycle=1.0 - data.c_w * epsilon / gap,
        cycle_active_phase=epsilon * np.array([0.0, co.s1, 0.0]),
        cycle_rest_phase=epsilon * np.array([gap, 0.0, co.s1 * co.s2]),
    )


def with_inherent_r0(params: ThreeStageParams, variant: str, target: float) -> ThreeStageParams:
    """Scale both fertilities so the variant's R0 hits ``target`` exactly.

    R0 is linear in a joint fertility scaling while the bifurcation
    coefficients are invariant under it, so this moves along the natural
    bifurcation parameter.
    """
    if target <= 0.0:
        raise ValueError("target R0 must be positive")
    current = inherent_R0(params, variant)
    return ThreeStageParams(
        survivals=params.survivals,
        fertilities=params.fertilities * (target / current),
        crowding_c=params.crowding_c,
        crowding_d=params.crowding_d,
        migration=params.migration,
    )

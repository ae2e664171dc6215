"""Control-oriented rotor model: rigid drive train plus first-order pitch.

The speed equation is rewritten as a convex blend of four linear vertex models
(sector nonlinearity on the two Jacobian entries d(omega_r_dot)/d(omega_r) and
d(omega_r_dot)/d(beta)), with a premise-dependent affine remainder that makes
the rewriting exact inside the scheduling box.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .aero import V_MIN, Aero, LowWindError
from .dynamics import RotorUnitParams

N_VERTICES = 4


class DecompositionError(ValueError):
    pass


class DegenerateSectorError(ValueError):
    """A scheduled term has zero width over the box, so memberships are undefined."""


@dataclass(frozen=True)
class PremiseVector:
    omega_r: float
    beta: float  # rad
    v: float
    t_g: float

    def as_array(self) -> np.ndarray:
        return np.array([self.omega_r, self.beta, self.v, self.t_g])


@dataclass(frozen=True)
class SchedulingBox:
    omega_r: tuple[float, float]
    beta: tuple[float, float]  # rad
    v: tuple[float, float]
    t_g: tuple[float, float]

    def __post_init__(self) -> None:
        for name in ("omega_r", "beta", "v", "t_g"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise DecompositionError(f"scheduling box bound {name}={lo, hi} must satisfy min < max")
        if self.v[0] <= V_MIN:
            raise DecompositionError("scheduling box must stay above the wind floor")

    @classmethod
    def around_rated(
        cls,
        omega_rated: float,
        t_g_rated: float,
        v_design: float,
        v_max: float = 25.0,
        beta_max_deg: float = 25.0,
        speed_band: float = 0.3,
        torque_max: float = 1.2,
    ) -> "SchedulingBox":
        return cls(
            omega_r=((1 - speed_band) * omega_rated, (1 + speed_band) * omega_rated),
            beta=(0.0, float(np.radians(beta_max_deg))),
            v=(v_design, v_max),
            t_g=(0.0, torque_max * t_g_rated),
        )

    def bounds(self) -> np.ndarray:
        return np.array([self.omega_r, self.beta, self.v, self.t_g])

    def clamp(self, z: PremiseVector) -> PremiseVector:
        b = self.bounds()
        c = np.clip(z.as_array(), b[:, 0], b[:, 1])
        return PremiseVector(*(float(x) for x in c))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n uniform points, columns (omega_r, beta, v, t_g)."""
        b = self.bounds()
        return b[:, 0] + rng.random((n, 4)) * (b[:, 1] - b[:, 0])


class SpeedDynamics(Protocol):
    """What the decomposition needs from a speed model."""

    def omega_dot(self, omega_r, beta, v, t_g): ...

    def terms(self, omega_r, beta, v, t_g): ...


class ReducedModel:
    """omega_r_dot = (T_r - n_g*T_g)/J_t,  beta_dot = (beta_ref - beta)/tau_beta."""

    def __init__(self, params: RotorUnitParams, aero: Aero):
        self.params = params
        self.aero = aero
        self.j_t = params.total_inertia
        self.n_g = params.n_g
        self.tau_beta = params.tau_beta

    def omega_dot(self, omega_r, beta, v, t_g):
        t_r, _ = self.aero.loads(v, omega_r, np.degrees(beta))
        return (t_r - self.n_g * np.asarray(t_g, dtype=float)) / self.j_t

    def terms(self, omega_r, beta, v, t_g=None):
        """(d omega_dot / d omega_r, d omega_dot / d beta[rad]) at the given points."""
        _, _, dtw, dtb, *_ = self.aero.loads(v, omega_r, np.degrees(beta), slopes=True)
        return dtw / self.j_t, dtb * (180.0 / np.pi) / self.j_t

    def rhs(self, x, beta_ref, t_g, v) -> np.ndarray:
        if v <= V_MIN:
            raise LowWindError(f"wind speed {v} m/s at or below floor {V_MIN} m/s")
        omega_r, beta = x
        return np.array(
            [
                float(self.omega_dot(omega_r, beta, v, t_g)),
                (beta_ref - beta) / self.tau_beta,
            ]
        )


def reduced_derivative(x, beta_ref, t_g, v, params: RotorUnitParams, aero: Aero) -> np.ndarray:
    return ReducedModel(params, aero).rhs(x, beta_ref, t_g, v)


@dataclass(frozen=True, eq=False)
class VertexModel:
    index: int
    a: np.ndarray  # 2x2 over (omega_r, beta)
    b: np.ndarray  # (2,), input beta_ref
    c: np.ndarray  # (2,), output omega_r


@dataclass(frozen=True, eq=False)
class MembershipWeights:
    h: np.ndarray

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=float)
        if h.shape != (N_VERTICES,) or np.any(h < 0) or np.any(h > 1) or abs(h.sum() - 1) > 1e-12:
            raise ValueError(f"invalid membership weights {h}")


def _vertex_pattern() -> list[tuple[int, int]]:
    # vertex i <- (extreme of term 1, extreme of term 2); 0 = min, 1 = max
    return [(0, 0), (0, 1), (1, 0), (1, 1)]


@dataclass(frozen=True, eq=False)
class SectorDecomposition:
    box: SchedulingBox
    model: SpeedDynamics
    term_bounds: np.ndarray  # [[min1, max1], [min2, max2]]
    vertices: tuple[VertexModel, ...]

    def terms(self, z: PremiseVector) -> tuple[float, float]:
        t1, t2 = self.model.terms(z.omega_r, z.beta, z.v, z.t_g)
        return float(t1), float(t2)

    def grades(self, terms) -> np.ndarray:
        """Weight of the lower sector bound for each scheduled term."""
        lo, hi = self.term_bounds[:, 0], self.term_bounds[:, 1]
        width = hi - lo
        if np.any(width <= 0):
            raise DegenerateSectorError("scheduled term has zero-width sector")
        eta = (hi - np.asarray(terms, dtype=float)) / width
        return np.clip(eta, 0.0, 1.0)

    def weights(self, z: PremiseVector) -> np.ndarray:
        eta1, eta2 = self.grades(self.terms(self.box.clamp(z)))
        g1 = (eta1, 1.0 - eta1)
        g2 = (eta2, 1.0 - eta2)
        return np.array([g1[i] * g2[j] for i, j in _vertex_pattern()])

    def affine_term(self, z: PremiseVector) -> float:
        """Remainder of omega_r_dot not captured by A(z) x at premise z."""
        t1, t2 = self.terms(z)
        f = float(self.model.omega_dot(z.omega_r, z.beta, z.v, z.t_g))
        return f - t1 * z.omega_r - t2 * z.beta

    def ts_derivative(self, x, beta_ref: float, z: PremiseVector) -> np.ndarray:
        """sum_i h_i(z) A_i x + B beta_ref + affine remainder; x = (omega_r, beta)."""
        A = blend(MembershipWeights(self.weights(z)), self.vertices)
        dx = A @ np.asarray(x, dtype=float) + self.vertices[0].b * beta_ref
        dx[0] += self.affine_term(z)
        return dx


def _beta_samples(box: SchedulingBox, model) -> np.ndarray:
    lo, hi = box.beta
    pts = [np.linspace(lo, hi, 26)]
    aero = getattr(model, "aero", None)
    if aero is not None:
        nodes = np.radians(aero.maps.beta_grid)
        inside = nodes[(nodes > lo) & (nodes < hi)]
        mids = 0.5 * (nodes[1:] + nodes[:-1])
        pts += [inside, mids[(mids > lo) & (mids < hi)]]
    return np.unique(np.concatenate(pts))


def sector_decompose(
    box: SchedulingBox,
    model: SpeedDynamics,
    resolution: int = 121,
    margin: float = 0.02,
) -> SectorDecomposition:
    """Bound both scheduled terms over the box and build the four vertex models.

    Bounds come from a dense grid (pitch samples include every map node inside
    the box) widened by ``margin`` of the sampled range on each side.
    """
    w = np.linspace(*box.omega_r, resolution)
    b = _beta_samples(box, model)
    v = np.linspace(*box.v, resolution)
    W, Bt, V = np.meshgrid(w, b, v, indexing="ij")
    t_mid = 0.5 * (box.t_g[0] + box.t_g[1])
    t1, t2 = model.terms(W, Bt, V, np.full_like(W, t_mid))
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if not (np.all(np.isfinite(t1)) and np.all(np.isfinite(t2))):
        raise DecompositionError("scheduled terms are not finite over the box")
    bounds = np.array([[t1.min(), t1.max()], [t2.min(), t2.max()]])
    pad = margin * (bounds[:, 1] - bounds[:, 0])
    bounds[:, 0] -= pad
    bounds[:, 1] += pad

    tau = getattr(model, "tau_beta", None)
    if tau is None:
        raise DecompositionError("speed model must expose tau_beta")
    bvec = np.array([0.0, 1.0 / tau])
    cvec = np.array([1.0, 0.0])
    vertices = []
    for idx, (i, j) in enumerate(_vertex_pattern(), start=1):
        a = np.array([[bounds[0, i], bounds[1, j]], [0.0, -1.0 / tau]])
        a.setflags(write=False)
        vertices.append(VertexModel(idx, a, bvec, cvec))
    return SectorDecomposition(box, model, bounds, tuple(vertices))


def membership(z: PremiseVector, decomposition: SectorDecomposition) -> MembershipWeights:
    return MembershipWeights(decomposition.weights(z))


def blend(h: MembershipWeights, vertices) -> np.ndarray:
    return sum(hi * vx.a for hi, vx in zip(h.h, vertices))

"""Lorentzian linear algebra on R^{n+1,1}.

Coordinates put the timelike axis first, so the form is G = diag(-1, 1, ..., 1).
Fixed null vectors: v_inf = e_0 + e_{n+1} and v_0 = (e_0 - e_{n+1}) / 2, with
<v_0, v_inf> = -1.  The span of e_1 .. e_n is the euclidean space R^n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import InvalidArgument, PointAtInfinity

NULL_TOL = 1e-12


def gram(n: int) -> np.ndarray:
    """The form matrix of R^{n+1,1}."""
    G = np.eye(n + 2)
    G[0, 0] = -1.0
    return G


@dataclass(frozen=True)
class MinkowskiSpace:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgument(f"ambient dimension must be >= 1, got {self.n}")

    @property
    def dim(self) -> int:
        return self.n + 2

    @property
    def G(self) -> np.ndarray:
        return gram(self.n)

    def e(self, i: int) -> np.ndarray:
        v = np.zeros(self.dim)
        v[i] = 1.0
        return v

    @property
    def v_inf(self) -> np.ndarray:
        v = np.zeros(self.dim)
        v[0] = 1.0
        v[-1] = 1.0
        return v

    @property
    def v_0(self) -> np.ndarray:
        v = np.zeros(self.dim)
        v[0] = 0.5
        v[-1] = -0.5
        return v


def inner(u, v) -> np.ndarray:
    """<u, v> with broadcasting over leading axes."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape[-1] != v.shape[-1]:
        raise InvalidArgument(f"dimension mismatch {u.shape[-1]} vs {v.shape[-1]}")
    return np.sum(u * v, axis=-1) - 2.0 * u[..., 0] * v[..., 0]


def lower(v) -> np.ndarray:
    """G v, applied along the last axis."""
    w = np.array(v, dtype=float, copy=True)
    w[..., 0] *= -1.0
    return w


def is_null(v, tol: float = NULL_TOL) -> np.ndarray:
    v = np.asarray(v)
    return np.abs(inner(v, v)) <= tol * np.sum(v * v, axis=-1)


def in_positive_cone(v, tol: float = NULL_TOL) -> np.ndarray:
    v = np.asarray(v)
    return is_null(v, tol) & (v[..., 0] > 0.0)


def stereo_lift(x) -> np.ndarray:
    """sigma = x + v_0 + |x|^2/2 v_inf, for points of R^n (last axis)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    out = np.zeros(x.shape[:-1] + (n + 2,))
    r2 = np.sum(x * x, axis=-1)
    out[..., 1:n + 1] = x
    out[..., 0] = 0.5 + 0.5 * r2
    out[..., n + 1] = -0.5 + 0.5 * r2
    return out


def stereo_project(sigma) -> np.ndarray:
    """Euclidean point of the null line through sigma."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[-1] - 2
    s_inf = -sigma[..., 0] + sigma[..., n + 1]  # <sigma, v_inf>
    if np.any(np.abs(s_inf) <= NULL_TOL * np.linalg.norm(sigma, axis=-1)):
        raise PointAtInfinity("<sigma, v_inf> vanishes: point at infinity")
    return sigma[..., 1:n + 1] / (-s_inf)[..., None]


@dataclass(frozen=True)
class MobiusTransform:
    matrix: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", T)
        n = T.shape[0] - 2
        G = gram(n)
        defect = np.max(np.abs(T.T @ G @ T - G))
        if defect > 1e-12 * max(1.0, np.max(np.abs(T)) ** 2):
            raise InvalidArgument(f"not Lorentz orthogonal, defect {defect:.3e}")
        if T[0, 0] <= 0.0:
            raise InvalidArgument("transform reverses time orientation")

    def apply(self, v) -> np.ndarray:
        return np.einsum("ij,...j->...i", self.matrix, v)

    def compose(self, other: "MobiusTransform") -> "MobiusTransform":
        return MobiusTransform(self.matrix @ other.matrix)

    def inverse(self) -> "MobiusTransform":
        n = self.matrix.shape[0] - 2
        G = gram(n)
        return MobiusTransform(G @ self.matrix.T @ G)


def lorentz_project(T: np.ndarray, G: np.ndarray, GF: np.ndarray | None = None) -> np.ndarray:
    """One Newton step of the polar-type projection onto {T^t G T = GF}.

    Works on stacks of matrices (leading axes).
    """
    if GF is None:
        GF = G
    GFinv = np.linalg.inv(GF)
    X = GFinv @ np.swapaxes(T, -1, -2) @ G @ T
    eye = np.eye(T.shape[-1])
    return T @ (1.5 * eye - 0.5 * X)


def so_generator(M: np.ndarray, n: int) -> np.ndarray:
    """Map an antisymmetric matrix to the Lie algebra: A = G M."""
    return gram(n) @ M


def random_mobius(seed: int, scale: float, n: int = 3) -> MobiusTransform:
    """T = exp(A) for a pseudo-random generator A with |A_ij| <= scale."""
    if scale < 0:
        raise InvalidArgument("scale must be non-negative")
    rng = np.random.default_rng(seed)
    B = rng.uniform(-scale, scale, size=(n + 2, n + 2))
    A = so_generator(np.triu(B, 1) - np.triu(B, 1).T, n)
    G = gram(n)
    T = expm(A)
    T = lorentz_project(T, G)
    return MobiusTransform(T)


def mobius_log(T: MobiusTransform) -> np.ndarray:
    from scipy.linalg import logm

    L = logm(T.matrix)
    return np.real(L)


def normalize_to(sigma, v) -> np.ndarray:
    """Rescale sigma so that <sigma, v> = -1."""
    sigma = np.asarray(sigma, dtype=float)
    s = inner(sigma, np.broadcast_to(v, sigma.shape))
    scale_ref = np.linalg.norm(sigma, axis=-1) * np.linalg.norm(v)
    if np.any(np.abs(s) <= NULL_TOL * scale_ref):
        raise PointAtInfinity("sigma orthogonal to the normalizing vector")
    return sigma / (-s)[..., None]


def projective_distance(s1, s2) -> np.ndarray:
    """Chordal distance on the unit round sphere between two null lines."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    for s in (s1, s2):
        if not np.all(in_positive_cone(s, 1e-9)):
            raise InvalidArgument("projective_distance needs null vectors in the positive cone")
    # <sigma, e_0> = -sigma_0
    a = s1 / s1[..., :1]
    b = s2 / s2[..., :1]
    return np.linalg.norm(a - b, axis=-1)


@dataclass(frozen=True)
class SpaceformGauge:
    v_inf: np.ndarray

    @property
    def kind(self) -> str:
        v = np.asarray(self.v_inf, dtype=float)
        s = float(inner(v, v))
        if abs(s) < NULL_TOL:
            return "euclidean"
        return "spherical" if s < 0 else "hyperbolic"


def spaceform_normalize(sigma, gauge: SpaceformGauge) -> np.ndarray:
    return normalize_to(sigma, np.asarray(gauge.v_inf, dtype=float))


def wedge_action(u, w) -> np.ndarray:
    """Matrix of (u ^ w): v -> <u,v> w - <w,v> u, stacked over leading axes."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    return np.einsum("...i,...j->...ij", w, lower(u)) - np.einsum("...i,...j->...ij", u, lower(w))

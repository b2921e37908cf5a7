"""Points on the unit sphere, associated Legendre functions and exact
quadrature for the isotropic measure.

Angles follow the physics convention: ``theta`` is the polar angle measured
from +z and ``psi`` the azimuth, so that

    n = (sin(theta) cos(psi), sin(theta) sin(psi), cos(theta)).

The Cartesian vector is cached on every :class:`Direction` and is the value
used in all numerical work; the angles are kept for reporting and for the
interchange format.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def _wrap_azimuth(psi: float) -> float:
    psi = math.fmod(psi, TWO_PI)
    if psi < 0.0:
        psi += TWO_PI
    # fmod of a tiny negative value can round up to exactly 2*pi
    if psi >= TWO_PI:
        psi = 0.0
    return psi


@dataclass(frozen=True)
class Direction:
    """A point on the unit sphere.

    Construct with :meth:`from_angles` or :meth:`from_vector`; the raw
    constructor does not check consistency, which is what
    :func:`povm_forge.povm.validate` is for.
    """

    theta: float
    psi: float
    cartesian: tuple[float, float, float]

    @classmethod
    def from_angles(cls, theta: float, psi: float) -> "Direction":
        psi = _wrap_azimuth(float(psi))
        theta = float(theta)
        st = math.sin(theta)
        vec = (st * math.cos(psi), st * math.sin(psi), math.cos(theta))
        return cls(theta, psi, vec)

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "Direction":
        v = np.asarray(vector, dtype=float)
        norm = float(np.linalg.norm(v))
        if not norm > 0.0 or not math.isfinite(norm):
            raise ValueError("cannot build a direction from a zero or non-finite vector")
        x, y, z = (float(c) for c in v / norm)
        theta = math.atan2(math.hypot(x, y), z)
        psi = _wrap_azimuth(math.atan2(y, x))
        return cls(theta, psi, (x, y, z))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.cartesian, dtype=float)

    def dot(self, other: "Direction") -> float:
        return float(np.dot(self.cartesian, other.cartesian))


def directions_array(directions: Sequence[Direction]) -> np.ndarray:
    """Stack the cached Cartesian vectors into an ``(n, 3)`` array."""
    if len(directions) == 0:
        return np.zeros((0, 3))
    return np.array([d.cartesian for d in directions], dtype=float)


# ---------------------------------------------------------------------------
# Associated Legendre functions
# ---------------------------------------------------------------------------

def assoc_legendre(L: int, M: int, x: float) -> float:
    """Associated Legendre function P_L^M(x) with the Condon-Shortley phase.

    Uses the upward recurrence in the degree starting from the sectoral
    value P_M^M(x) = (-1)^M (2M-1)!! (1-x^2)^(M/2):

        (L - M) P_L^M = (2L - 1) x P_{L-1}^M - (L + M - 1) P_{L-2}^M

    Parameters
    ----------
    L, M : int
        Degree and order, ``0 <= M <= L``.
    x : float
        Argument in ``[-1, 1]``.

    Raises
    ------
    ValueError
        If ``M > L``, ``M < 0`` or ``|x| > 1``.
    """
    if L < 0 or M < 0 or M > L:
        raise ValueError(f"need 0 <= M <= L, got L={L}, M={M}")
    x = float(x)
    if not abs(x) <= 1.0:
        raise ValueError(f"argument must lie in [-1, 1], got {x}")

    somx2 = math.sqrt((1.0 - x) * (1.0 + x))
    pmm = 1.0
    fact = 1.0
    for _ in range(M):
        pmm *= -fact * somx2
        fact += 2.0
    if L == M:
        return pmm
    pmmp1 = x * (2 * M + 1) * pmm
    if L == M + 1:
        return pmmp1
    prev, cur = pmm, pmmp1
    for ell in range(M + 2, L + 1):
        prev, cur = cur, ((2 * ell - 1) * x * cur - (ell + M - 1) * prev) / (ell - M)
    return cur


def assoc_legendre_table(max_degree: int, x: np.ndarray) -> np.ndarray:
    """Vectorised P_L^M for all ``0 <= M <= L <= max_degree``.

    Returns an array of shape ``(max_degree + 1, max_degree + 1) + x.shape``
    indexed ``[L, M]``; entries with ``M > L`` are zero.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("argument must lie in [-1, 1]")
    out = np.zeros((max_degree + 1, max_degree + 1) + x.shape)
    somx2 = np.sqrt((1.0 - x) * (1.0 + x))
    pmm = np.ones_like(x)
    for M in range(max_degree + 1):
        if M > 0:
            pmm = -(2 * M - 1) * somx2 * pmm
        out[M, M] = pmm
        if M + 1 <= max_degree:
            out[M + 1, M] = x * (2 * M + 1) * pmm
        for ell in range(M + 2, max_degree + 1):
            out[ell, M] = ((2 * ell - 1) * x * out[ell - 1, M]
                           - (ell + M - 1) * out[ell - 2, M]) / (ell - M)
    return out


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def gauss_legendre_nodes(count: int) -> list[tuple[float, float]]:
    """Gauss-Legendre abscissae and weights on [-1, 1].

    Exact for polynomials of degree ``2 * count - 1``; weights sum to 2.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    nodes, weights = np.polynomial.legendre.leggauss(count)
    return [(float(t), float(w)) for t, w in zip(nodes, weights)]


@dataclass(frozen=True)
class QuadratureRule:
    """Weighted nodes on the sphere, normalised to total weight 1."""

    nodes: tuple[tuple[Direction, float], ...]
    exact_degree: int

    @property
    def points(self) -> np.ndarray:
        return directions_array([d for d, _ in self.nodes])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.nodes], dtype=float)

    @property
    def directions(self) -> list[Direction]:
        return [d for d, _ in self.nodes]

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """Average of ``f`` over the sphere; ``f`` maps an ``(m, 3)`` array
        of unit vectors to ``m`` values."""
        values = np.asarray(f(self.points), dtype=float)
        return math.fsum(self.weights * values)


def sphere_rule(max_degree: int) -> QuadratureRule:
    """Product rule exact for spherical polynomials up to ``max_degree``.

    Gauss-Legendre in cos(theta) times a uniform azimuthal grid.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    n_theta = -(-(max_degree + 1) // 2) + 1
    n_psi = max_degree + 2
    gl = gauss_legendre_nodes(n_theta)
    nodes = []
    for t, w in gl:
        theta = math.acos(t)
        for j in range(n_psi):
            psi = TWO_PI * j / n_psi
            nodes.append((Direction.from_angles(theta, psi), 0.5 * w / n_psi))
    exact = min(2 * n_theta - 1, n_psi - 1)
    return QuadratureRule(tuple(nodes), exact)


# ---------------------------------------------------------------------------
# Rotations
# ---------------------------------------------------------------------------

def check_rotation(rotation: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    r = np.asarray(rotation, dtype=float)
    if r.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got shape {r.shape}")
    if not np.allclose(r @ r.T, np.eye(3), rtol=0.0, atol=atol):
        raise ValueError("rotation matrix is not orthogonal")
    if abs(np.linalg.det(r) - 1.0) > atol:
        raise ValueError("rotation matrix is not proper (det != +1)")
    return r


def rotate(direction: Direction, rotation: np.ndarray) -> Direction:
    r = check_rotation(rotation)
    return Direction.from_vector(r @ direction.vector)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-random proper rotation (QR of a Gaussian matrix)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_unit_vectors(rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniform points on the sphere by inverse CDF in cos(theta)."""
    z = rng.uniform(-1.0, 1.0, count)
    psi = rng.uniform(0.0, TWO_PI, count)
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.stack([s * np.cos(psi), s * np.sin(psi), z], axis=1)


def random_directions(rng: np.random.Generator, count: int) -> list[Direction]:
    return [Direction.from_vector(v) for v in random_unit_vectors(rng, count)]

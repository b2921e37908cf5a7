"""POVM data model: weighted coherent-state projectors on the sphere."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Direction, check_rotation, directions_array

MERGE_DISTANCE = 1e-9


@dataclass(frozen=True)
class Outcome:
    weight: float
    direction: Direction


@dataclass(frozen=True)
class Povm:
    """N copies plus an ordered list of (weight, direction) outcomes.

    ``weight`` is the coefficient c^2 multiplying the projector onto the
    N-fold coherent state along ``direction``.
    """

    copies: int
    outcomes: tuple[Outcome, ...]

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))

    @classmethod
    def from_arrays(cls, copies: int, weights: Sequence[float], vectors: np.ndarray) -> "Povm":
        vectors = np.asarray(vectors, dtype=float)
        outs = tuple(Outcome(float(w), Direction.from_vector(v))
                     for w, v in zip(weights, vectors))
        return cls(int(copies), outs)

    @classmethod
    def from_angles(cls, copies: int, weights: Sequence[float],
                    thetas: Sequence[float], psis: Sequence[float]) -> "Povm":
        outs = tuple(Outcome(float(w), Direction.from_angles(t, p))
                     for w, t, p in zip(weights, thetas, psis))
        return cls(int(copies), outs)

    def __len__(self) -> int:
        return len(self.outcomes)

    @property
    def size(self) -> int:
        return len(self.outcomes)

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.array([o.weight for o in self.outcomes], dtype=float)
        w.flags.writeable = False
        return w

    @cached_property
    def vectors(self) -> np.ndarray:
        v = directions_array([o.direction for o in self.outcomes])
        v.flags.writeable = False
        return v

    @property
    def directions(self) -> list[Direction]:
        return [o.direction for o in self.outcomes]

    def rotated(self, rotation: np.ndarray) -> "Povm":
        r = check_rotation(rotation)
        return Povm.from_arrays(self.copies, self.weights, self.vectors @ r.T)

    def gram(self) -> np.ndarray:
        """Matrix of pairwise dot products between outcome directions."""
        v = self.vectors
        return np.clip(v @ v.T, -1.0, 1.0)

    def pairwise_dots(self) -> np.ndarray:
        """Dot products for all pairs ``i < j``, in row-major order."""
        iu = np.triu_indices(self.size, k=1)
        return self.gram()[iu]


@dataclass(frozen=True)
class Violation:
    index: int | None
    invariant: str
    detail: str = ""


def validate(povm: Povm, atol: float = 1e-12) -> list[Violation]:
    """Check every outcome's weight and direction invariants.

    Returns an empty list when everything holds. ``index`` is the 0-based
    outcome index, or ``None`` for POVM-level problems.
    """
    out: list[Violation] = []
    if not isinstance(povm.copies, (int, np.integer)) or povm.copies < 1:
        out.append(Violation(None, "copies", f"copies must be a positive integer, got {povm.copies!r}"))
    if povm.size == 0:
        out.append(Violation(None, "empty", "POVM has no outcomes"))
    for i, o in enumerate(povm.outcomes):
        w = o.weight
        if not (math.isfinite(w) and 0.0 < w <= 1.0):
            out.append(Violation(i, "weight out of range", f"c^2={w!r} not in (0, 1]"))
        d = o.direction
        v = np.asarray(d.cartesian, dtype=float)
        norm = float(np.linalg.norm(v))
        if not abs(norm - 1.0) <= atol:
            out.append(Violation(i, "direction norm", f"|n|={norm!r}"))
        if not (0.0 <= d.theta <= math.pi):
            out.append(Violation(i, "theta range", f"theta={d.theta!r}"))
        if not (0.0 <= d.psi < 2.0 * math.pi):
            out.append(Violation(i, "psi range", f"psi={d.psi!r}"))
        if norm > 0.0:
            st = math.sin(d.theta)
            expected = np.array([st * math.cos(d.psi), st * math.sin(d.psi), math.cos(d.theta)])
            dev = float(np.max(np.abs(v / norm - expected)))
            if not dev <= 1e-12:
                out.append(Violation(i, "angle mismatch", f"max deviation {dev:.3e}"))
    return out


def merge_coincident(povm: Povm, distance: float = MERGE_DISTANCE) -> Povm:
    """Merge outcomes whose directions coincide to within ``distance``.

    Weights add; the first occurrence keeps its place in the order.
    """
    v = povm.vectors
    w = povm.weights
    keep: list[int] = []
    merged_w: list[float] = []
    for i in range(povm.size):
        for slot, j in enumerate(keep):
            if np.linalg.norm(v[i] - v[j]) < distance:
                merged_w[slot] += w[i]
                break
        else:
            keep.append(i)
            merged_w.append(float(w[i]))
    if len(keep) == povm.size:
        return povm
    return Povm(povm.copies, tuple(Outcome(merged_w[k], povm.outcomes[i].direction)
                                   for k, i in enumerate(keep)))


def gauge_rotation(vectors: np.ndarray, collinear_tol: float = 1e-9) -> tuple[np.ndarray, int]:
    """Rotation taking vector 0 to +z and the first vector not collinear
    with it into the x-z half-plane with x > 0.

    Returns the rotation and the index of that second vector.
    """
    v = np.asarray(vectors, dtype=float)
    e3 = v[0] / np.linalg.norm(v[0])
    for k in range(1, len(v)):
        perp = v[k] - np.dot(v[k], e3) * e3
        pn = np.linalg.norm(perp)
        if pn > collinear_tol:
            e1 = perp / pn
            break
    else:
        raise ValueError("all outcome directions are collinear; gauge is undefined")
    e2 = np.cross(e3, e1)
    return np.stack([e1, e2, e3]), k


def canonicalize(povm: Povm) -> Povm:
    """Fix the global rotation: outcome 1 along +z, the next non-collinear
    outcome in the x-z plane with x >= 0. Coincident outcomes are merged
    first."""
    p = merge_coincident(povm)
    if p.size < 2:
        raise ValueError("need at least two distinct outcomes to fix the gauge")
    r, k = gauge_rotation(p.vectors)
    rotated = p.vectors @ r.T
    # pin the gauge components so repeated canonicalisation is a fixed point
    rotated[0] = (0.0, 0.0, 1.0)
    rotated[k, 1] = 0.0
    outs = []
    for o, vec in zip(p.outcomes, rotated):
        outs.append(Outcome(o.weight, Direction.from_vector(vec)))
    return Povm(p.copies, tuple(outs))


def kabsch(source: np.ndarray, target: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Proper rotation R minimising sum_i w_i |R source_i - target_i|^2.

    No centring: directions share the sphere's centre.
    """
    a = np.asarray(source, dtype=float)
    b = np.asarray(target, dtype=float)
    w = np.ones(len(a)) if weights is None else np.asarray(weights, dtype=float)
    h = (a * w[:, None]).T @ b
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    return vt.T @ np.diag([1.0, 1.0, d]) @ u.T


@dataclass(frozen=True)
class Alignment:
    equivalent: bool
    rotation: np.ndarray | None = None
    matching: tuple[int, ...] | None = None
    max_angle: float = math.inf
    max_weight_diff: float = math.inf

    def __bool__(self) -> bool:
        return self.equivalent


def _angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # atan2 form stays accurate for tiny angles
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.sum(a * b, axis=-1)
    return np.arctan2(cross, dot)


def _anchor_pair(v: np.ndarray) -> tuple[int, int]:
    for k in range(1, len(v)):
        if np.linalg.norm(np.cross(v[0], v[k])) > 1e-6:
            return 0, k
    return 0, -1


def _frame(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    e1 = u / np.linalg.norm(u)
    e2 = w - np.dot(w, e1) * e1
    e2 /= np.linalg.norm(e2)
    return np.stack([e1, e2, np.cross(e1, e2)], axis=1)


def equivalent_up_to_rotation(a: Povm, b: Povm, tol: float = 1e-8,
                              weight_tol: float | None = None) -> Alignment:
    """Decide whether ``b`` is a rotated, re-ordered copy of ``a``.

    Candidate rotations come from mapping an anchor pair of ``a`` onto every
    pair of ``b`` with a matching opening angle; each candidate is scored by
    an optimal assignment on angular distance and then refined by a
    weighted Kabsch fit over the matched outcomes.

    Returns an :class:`Alignment`; ``matching[i]`` is the index in ``b``
    paired with outcome ``i`` of ``a`` and ``rotation`` maps ``a`` onto ``b``.
    """
    weight_tol = tol if weight_tol is None else weight_tol
    if a.copies != b.copies:
        return Alignment(False)
    a = merge_coincident(a)
    b = merge_coincident(b)
    if a.size != b.size:
        return Alignment(False)
    if not np.allclose(np.sort(a.weights), np.sort(b.weights), rtol=0.0, atol=weight_tol):
        return Alignment(False)

    va, vb = a.vectors, b.vectors
    n = a.size
    i0, i1 = _anchor_pair(va)

    candidates: list[np.ndarray] = []
    if i1 < 0:
        # all of ``a`` is collinear: only the image of one axis matters
        for j in range(n):
            axis = np.cross(va[0], vb[j])
            s = np.linalg.norm(axis)
            c = float(np.dot(va[0], vb[j]))
            if s < 1e-12:
                if c > 0:
                    candidates.append(np.eye(3))
                else:
                    perp = np.cross(va[0], [1.0, 0.0, 0.0])
                    if np.linalg.norm(perp) < 1e-6:
                        perp = np.cross(va[0], [0.0, 1.0, 0.0])
                    perp /= np.linalg.norm(perp)
                    candidates.append(2.0 * np.outer(perp, perp) - np.eye(3))
            else:
                k = axis / s
                kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
                candidates.append(np.eye(3) + s * kx + (1 - c) * kx @ kx)
    else:
        angle_a = _angles(va[i0], va[i1])
        fa = _frame(va[i0], va[i1])
        wa0, wa1 = a.weights[i0], a.weights[i1]
        for j0, j1 in itertools.permutations(range(n), 2):
            if abs(b.weights[j0] - wa0) > weight_tol or abs(b.weights[j1] - wa1) > weight_tol:
                continue
            if abs(_angles(vb[j0], vb[j1]) - angle_a) > max(10 * tol, 1e-9):
                continue
            if np.linalg.norm(np.cross(vb[j0], vb[j1])) < 1e-9:
                continue
            candidates.append(_frame(vb[j0], vb[j1]) @ fa.T)

    best = Alignment(False)
    for rot in candidates:
        moved = va @ rot.T
        cost = _angles(moved[:, None, :], vb[None, :, :])
        cost = cost + 10.0 * np.abs(a.weights[:, None] - b.weights[None, :])
        rows, cols = linear_sum_assignment(cost)
        match = np.empty(n, dtype=int)
        match[rows] = cols
        rot = kabsch(va, vb[match], a.weights)
        ang = float(np.max(_angles(va @ rot.T, vb[match])))
        wdiff = float(np.max(np.abs(a.weights - b.weights[match])))
        if ang < best.max_angle:
            best = Alignment(ang < tol and wdiff < weight_tol, rot, tuple(int(m) for m in match), ang, wdiff)
        if best.equivalent:
            break
    return best

"""Optimality checks for coherent-state POVMs.

A POVM made of N-copy coherent projectors is optimal exactly when its
weights and directions resolve the identity on the (N+1)-dimensional
symmetric subspace. This module evaluates that condition in six equivalent
forms, each returned as a :class:`ResidualReport`:

``identity_resolution``
    sum_r c_r^2 |n_r><n_r|^{(N)} - identity, entrywise.
``pointwise``
    sum_r c_r^2 ((1 + n.n_r)/2)^N - 1 at a set of probe directions.
``legendre``
    weighted sums of P_L^M(cos theta_r) e^{i M psi_r}, L = 1..N.
``monomial``
    weighted moments z^k x^m and z^k x^(m-1) y against their sphere averages.
``tensor``
    sum_r c_r^2 n_r^(x)q against ((N+1)/(q+1)) I^(q) for q = 0..N.
``contracted``
    the tensor conditions contracted with each n_i^(x)q.

All of them vanish together; :func:`verify` runs them side by side.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .geometry import (Direction, QuadratureRule, assoc_legendre_table,
                       random_directions, sphere_rule)
from .parallel import ordered_map
from .povm import Povm, Violation, validate

DEFAULT_TOL = 1e-10
PROBE_SEED = 20240601
N_RANDOM_PROBES = 50


@dataclass(frozen=True)
class SymmetricState:
    """Amplitudes of an N-copy coherent state in the |N/2, N/2 - k> basis."""

    amplitudes: np.ndarray

    @property
    def copies(self) -> int:
        return len(self.amplitudes) - 1

    def overlap(self, other: "SymmetricState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class ResidualReport:
    formulation: str
    residuals: np.ndarray
    tolerance: float = DEFAULT_TOL

    @property
    def max_abs(self) -> float:
        if self.residuals.size == 0:
            return 0.0
        return float(np.max(np.abs(self.residuals)))

    @property
    def passed(self) -> bool:
        return self.max_abs < self.tolerance

    def to_dict(self) -> dict:
        return {
            "formulation": self.formulation,
            "rows": int(self.residuals.size),
            "max_abs": self.max_abs,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class MomentTensor:
    rank: int
    components: np.ndarray

    def independent(self) -> np.ndarray:
        """Components with sorted index tuples, one per symmetric class."""
        return np.array([self.components[idx] for idx in symmetric_indices(self.rank)])


# ---------------------------------------------------------------------------
# States and kernels
# ---------------------------------------------------------------------------

def _half_angle_parts(direction: Direction) -> tuple[float, complex]:
    """cos(theta/2) and e^{i psi} sin(theta/2), from the Cartesian vector."""
    x, y, z = direction.cartesian
    a = math.sqrt(max(0.0, 0.5 * (1.0 + z)))
    if a > 1e-8:
        b = complex(x, y) / (2.0 * a)
    else:
        b = complex(math.cos(direction.psi), math.sin(direction.psi)) * math.sqrt(max(0.0, 0.5 * (1.0 - z)))
    return a, b


def coherent_state(copies: int, direction: Direction) -> SymmetricState:
    """N-copy coherent state |theta, psi>^N restricted to the symmetric subspace.

    The single-copy state is cos(theta/2)|0> + e^{i psi} sin(theta/2)|1>;
    component k is sqrt(C(N, k)) cos^(N-k)(theta/2) (e^{i psi} sin(theta/2))^k.
    """
    if copies < 1:
        raise ValueError("copies must be >= 1")
    a, b = _half_angle_parts(direction)
    amps = np.array([math.sqrt(math.comb(copies, k)) * a ** (copies - k) * b ** k
                     for k in range(copies + 1)], dtype=complex)
    return SymmetricState(amps)


def overlap_kernel(copies: int, dots: np.ndarray) -> np.ndarray:
    """|<a|b>^N|^2 = ((1 + a.b)/2)^N for coherent states."""
    return (0.5 * (1.0 + np.asarray(dots, dtype=float))) ** copies


# ---------------------------------------------------------------------------
# Formulations
# ---------------------------------------------------------------------------

def identity_resolution_residual(povm: Povm, tol: float = DEFAULT_TOL) -> ResidualReport:
    n1 = povm.copies + 1
    states = np.array([coherent_state(povm.copies, o.direction).amplitudes for o in povm.outcomes])
    op = (states.T * povm.weights) @ states.conj()
    dev = op - np.eye(n1)
    res = np.concatenate([dev.real.ravel(), dev.imag.ravel()])
    return ResidualReport("identity_resolution", res, tol)


def default_probes(copies: int) -> list[Direction]:
    """Nodes of an exact degree-2N rule plus fixed pseudo-random directions."""
    rule = sphere_rule(2 * copies)
    rng = np.random.default_rng(PROBE_SEED)
    return rule.directions + random_directions(rng, N_RANDOM_PROBES)


def pointwise_completeness_residual(povm: Povm,
                                    probes: QuadratureRule | Sequence[Direction] | None = None,
                                    tol: float = DEFAULT_TOL) -> ResidualReport:
    if probes is None:
        probes = default_probes(povm.copies)
    if isinstance(probes, QuadratureRule):
        pts = probes.points
    else:
        pts = np.array([d.cartesian for d in probes], dtype=float)
    if len(pts) == 0:
        raise ValueError("probe set is empty")
    k = overlap_kernel(povm.copies, pts @ povm.vectors.T)
    return ResidualReport("pointwise", k @ povm.weights - 1.0, tol)


def legendre_residuals(povm: Povm, tol: float = DEFAULT_TOL, normalized: bool = True) -> ResidualReport:
    """Rows: sum c^2 - (N+1), then Re and Im of sum c^2 P_L^M(cos theta) e^{iM psi}.

    With ``normalized`` each (L, M) row is scaled by sqrt((L-M)!/(L+M)!)
    (Schmidt semi-normalisation) so that every row is O(1); without it the
    raw Condon-Shortley functions reach (2N-1)!! and round-off on an exact
    solution grows accordingly.
    """
    N = povm.copies
    v, w = povm.vectors, povm.weights
    z = np.clip(v[:, 2], -1.0, 1.0)
    phase = np.exp(1j * np.arctan2(v[:, 1], v[:, 0]))
    table = assoc_legendre_table(N, z)
    rows = [math.fsum(w) - (N + 1)]
    for L in range(1, N + 1):
        for M in range(L + 1):
            scale = math.sqrt(math.factorial(L - M) / math.factorial(L + M)) if normalized else 1.0
            s = scale * np.sum(w * table[L, M] * phase ** M)
            rows.extend([s.real, s.imag])
    return ResidualReport("legendre", np.array(rows), tol)


def double_factorial(k: int) -> int:
    """k!! with (-1)!! = 0!! = 1."""
    if k < -1:
        raise ValueError("double factorial undefined below -1")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def monomial_target(copies: int, k: int, m: int) -> float:
    """Right-hand side for sum c^2 z^k x^m."""
    if k % 2 or m % 2:
        return 0.0
    return (copies + 1) * double_factorial(m - 1) * double_factorial(k - 1) / double_factorial(k + m + 1)


def monomial_residuals(povm: Povm, tol: float = DEFAULT_TOL) -> ResidualReport:
    N = povm.copies
    x, y, z = povm.vectors.T
    w = povm.weights
    rows = []
    for m in range(N + 1):
        for k in range(N - m + 1):
            rows.append(np.sum(w * z ** k * x ** m) - monomial_target(N, k, m))
            if m >= 1:
                rows.append(np.sum(w * z ** k * x ** (m - 1) * y))
    return ResidualReport("monomial", np.array(rows), tol)


@lru_cache(maxsize=None)
def symmetric_indices(rank: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations_with_replacement(range(3), rank))


@lru_cache(maxsize=None)
def invariant_tensor(rank: int) -> np.ndarray:
    """I^(q): the rotation-invariant symmetric tensor with trace-chain q+1.

    Built by the pairing recursion
    I^(q)_{i1..iq} = (1/(q-1)) sum_j delta_{i1 ij} I^(q-2)_{rest};
    zero for odd q.
    """
    if rank == 0:
        return np.array(1.0)
    shape = (3,) * rank
    if rank % 2:
        return np.zeros(shape)
    sub = invariant_tensor(rank - 2)
    out = np.zeros(shape)
    for idx in itertools.product(range(3), repeat=rank):
        first, rest = idx[0], idx[1:]
        total = 0.0
        for j in range(len(rest)):
            if rest[j] == first:
                total += sub[rest[:j] + rest[j + 1:]]
        out[idx] = total / (rank - 1)
    out.flags.writeable = False
    return out


def moment_tensor(povm: Povm, rank: int) -> MomentTensor:
    """sum_r c_r^2 n_r^(x)rank as a full 3^rank array."""
    v = povm.vectors
    prod = np.ones((povm.size, 1))
    for _ in range(rank):
        prod = (prod[:, :, None] * v[:, None, :]).reshape(povm.size, -1)
    comp = (povm.weights @ prod).reshape((3,) * rank) if rank else np.array(povm.weights.sum())
    return MomentTensor(rank, comp)


def target_tensor(copies: int, rank: int) -> MomentTensor:
    if rank % 2:
        return MomentTensor(rank, np.zeros((3,) * rank))
    return MomentTensor(rank, (copies + 1) / (rank + 1) * invariant_tensor(rank))


def tensor_residual_blocks(povm: Povm) -> list[np.ndarray]:
    """Independent-component residuals for each rank q = 0..N."""
    blocks = []
    for q in range(povm.copies + 1):
        diff = moment_tensor(povm, q).components - target_tensor(povm.copies, q).components
        blocks.append(np.array([diff[idx] for idx in symmetric_indices(q)]) if q else np.atleast_1d(diff))
    return blocks


def tensor_residuals(povm: Povm, tol: float = DEFAULT_TOL) -> ResidualReport:
    return ResidualReport("tensor", np.concatenate(tensor_residual_blocks(povm)), tol)


def contracted_residuals(povm: Povm, tol: float = DEFAULT_TOL) -> ResidualReport:
    """Rows ordered outcome-major: for i = 1..n, q = 0..N."""
    N = povm.copies
    g = povm.gram()
    w = povm.weights
    off = ~np.eye(povm.size, dtype=bool)
    rows = []
    for i in range(povm.size):
        t = g[i][off[i]]
        wr = w[off[i]]
        for q in range(N + 1):
            target = (N + 1) / (q + 1) if q % 2 == 0 else 0.0
            rows.append(np.sum(wr * t ** q) - (target - w[i]))
    return ResidualReport("contracted", np.array(rows), tol)


# ---------------------------------------------------------------------------
# Figures of merit
# ---------------------------------------------------------------------------

def optimal_fidelity(copies: int) -> float:
    return (copies + 1) / (copies + 2)


def mean_fidelity(povm: Povm, method: str = "quadrature", rule: QuadratureRule | None = None) -> float:
    """Mean fidelity of the measure-and-guess scheme.

    ``quadrature``
        sum_r c_r^2 * average over n of ((1 + n.n_r)/2)^(N+1), with an exact
        rule (``rule`` may be supplied; it must be exact to degree N+1).
    ``closed_form``
        (N+1)/(N+2); only meaningful once the POVM is known to be optimal.
    ``normalized``
        Born probabilities renormalised at every probe before scoring, which
        keeps the figure meaningful for configurations that do not resolve
        the identity. Uses a high-degree rule; equals ``quadrature`` for
        optimal POVMs.
    """
    N = povm.copies
    if method == "closed_form":
        return optimal_fidelity(N)
    if method == "quadrature":
        if rule is None:
            rule = sphere_rule(N + 1)
        elif rule.exact_degree < N + 1:
            raise ValueError(f"rule is exact to degree {rule.exact_degree}, need {N + 1}")
        k = overlap_kernel(N + 1, rule.points @ povm.vectors.T)
        return math.fsum(rule.weights * (k @ povm.weights))
    if method == "normalized":
        if rule is None:
            rule = sphere_rule(max(60, 4 * N))
        dots = rule.points @ povm.vectors.T
        p = overlap_kernel(N, dots) * povm.weights
        f = 0.5 * (1.0 + dots)
        per_probe = np.sum(p * f, axis=1) / np.sum(p, axis=1)
        return math.fsum(rule.weights * per_probe)
    raise ValueError(f"unknown fidelity method {method!r}")


def shannon_gain(copies: int) -> float:
    """Maximal mean information gain in bits: (ln(N+1) - N/(N+1)) / ln 2."""
    if copies < 1:
        raise ValueError("copies must be >= 1")
    return (math.log(copies + 1) - copies / (copies + 1)) / math.log(2.0)


# ---------------------------------------------------------------------------
# Full check
# ---------------------------------------------------------------------------

FORMULATIONS = ("identity_resolution", "pointwise", "legendre", "monomial", "tensor", "contracted")

_RUNNERS = {
    "identity_resolution": identity_resolution_residual,
    "pointwise": lambda p, tol: pointwise_completeness_residual(p, None, tol),
    "legendre": legendre_residuals,
    "monomial": monomial_residuals,
    "tensor": tensor_residuals,
    "contracted": contracted_residuals,
}


@dataclass
class VerificationReport:
    povm: Povm
    tolerance: float
    reports: dict[str, ResidualReport]
    fidelity_quadrature: float
    fidelity_closed_form: float
    violations: list[Violation] = field(default_factory=list)

    @property
    def fidelity_error(self) -> float:
        return abs(self.fidelity_quadrature - self.fidelity_closed_form)

    @property
    def passed(self) -> bool:
        return (not self.violations
                and all(r.passed for r in self.reports.values())
                and self.fidelity_error < self.tolerance)

    @property
    def max_residual(self) -> float:
        return max(r.max_abs for r in self.reports.values())

    def to_dict(self) -> dict:
        from .interchange import povm_to_dict
        return {
            "copies": self.povm.copies,
            "outcomes": self.povm.size,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "formulations": {k: r.to_dict() for k, r in self.reports.items()},
            "fidelity": {
                "quadrature": self.fidelity_quadrature,
                "closed_form": self.fidelity_closed_form,
                "abs_error": self.fidelity_error,
            },
            "violations": [{"index": v.index, "invariant": v.invariant, "detail": v.detail}
                           for v in self.violations],
            "povm": povm_to_dict(self.povm),
        }


def verify(povm: Povm, tol: float = DEFAULT_TOL, workers: int | None = 1) -> VerificationReport:
    """Run every formulation plus the fidelity cross-check.

    ``workers > 1`` evaluates the formulations on a thread pool; the report
    is identical either way.
    """
    violations = validate(povm)
    reports = ordered_map(lambda name: _RUNNERS[name](povm, tol), FORMULATIONS, workers)
    return VerificationReport(
        povm=povm,
        tolerance=tol,
        reports=dict(zip(FORMULATIONS, reports)),
        fidelity_quadrature=mean_fidelity(povm, "quadrature"),
        fidelity_closed_form=optimal_fidelity(povm.copies),
        violations=violations,
    )

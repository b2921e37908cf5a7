"""Lower bounds on the number of outcomes.

Two kinds live here.

*Counting*: the conjectured minimal size n_min(N), from comparing unknowns
with independent moment equations, with and without antipodal pairing.

*Certificates*: for each outcome i, the sum over r != i of
c_r^2 w(t_r) p(t_r)^2, with t_r = n_i . n_r, w(t) = 1 or 1 + t and p a monic
polynomial, is non-negative. Once the moment equations hold, every power sum
sum_{r != i} c_r^2 t_r^q equals a known constant minus c_i^2, so the
minimum over p is a function of c_i^2 alone. Its sign caps each weight, and
the cap together with sum c^2 = N+1 bounds n from below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .povm import Povm
from .verification import tensor_residual_blocks

MOMENT_TOL = 1e-8
SLACK_TOL = 1e-10


# ---------------------------------------------------------------------------
# Counting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CountingBound:
    copies: int
    general_bound: int
    antipodal_bound: int
    n_min: int

    def to_dict(self) -> dict:
        return {"copies": self.copies, "general_bound": self.general_bound,
                "antipodal_bound": self.antipodal_bound, "n_min": self.n_min}


def general_count_bound(copies: int) -> int:
    """Smallest n with 3n - 3 >= (N+1)^2."""
    return 1 + (2 + (copies + 1) ** 2) // 3


def antipodal_count_bound(copies: int) -> int:
    """Smallest even n with 3n/2 - 3 >= 1 + 3h + 2h^2, h = floor(N/2)."""
    h = copies // 2
    return 4 + 2 * h + 2 * ((2 * h * h) // 3)


def n_min(copies: int) -> CountingBound:
    if copies < 1:
        raise ValueError("copies must be >= 1")
    g = general_count_bound(copies)
    a = antipodal_count_bound(copies)
    return CountingBound(copies, g, a, min(g, a))


def unknowns(outcomes: int, antipodal: bool = False) -> int:
    """Free real parameters after removing global rotations."""
    if antipodal:
        return 3 * (outcomes // 2) - 3
    return 3 * outcomes - 3


def equations(copies: int, antipodal: bool = False) -> int:
    """Independent real moment equations (all q, or even q only)."""
    if antipodal:
        h = copies // 2
        return 1 + 3 * h + 2 * h * h
    return (copies + 1) ** 2


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

class CertificatePreconditionError(ValueError):
    """The POVM does not satisfy the moment equations the certificate needs."""

    def __init__(self, message: str, failed_orders: tuple[int, ...] = ()):
        super().__init__(message)
        self.failed_orders = failed_orders


@dataclass
class Certificate:
    copies: int
    ansatz: str
    degree: int
    linear_factor: bool
    coefficients: np.ndarray      # (n, degree): constant term first, b_i then d_i
    slacks: np.ndarray            # minimum of the quadratic form, per outcome
    direct_slacks: np.ndarray     # the sum of squares evaluated on the actual directions
    weight_cap: float
    sum_identity: float           # sum_i of the linear form whose sign the cap fixes
    sum_bound: int                # n bound implied by the cap and sum c^2 = N+1
    implied_n_bound: int
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    notes: list[str] = field(default_factory=list)

    @property
    def min_slack(self) -> float:
        return float(np.min(self.slacks))

    @property
    def valid(self) -> bool:
        return bool(np.all(self.slacks >= -SLACK_TOL))

    def to_dict(self) -> dict:
        per = []
        for i in range(len(self.slacks)):
            row = {"index": i, "slack": float(self.slacks[i]), "direct_slack": float(self.direct_slacks[i])}
            if self.coefficients.shape[1] >= 1:
                row["b"] = float(self.coefficients[i, 0])
            if self.coefficients.shape[1] >= 2:
                row["d"] = float(self.coefficients[i, 1])
            if self.coefficients.shape[1] >= 3:
                row["coefficients"] = [float(c) for c in self.coefficients[i]]
            if self.degenerate.size and self.degenerate[i]:
                row["degenerate"] = True
            per.append(row)
        return {
            "copies": self.copies,
            "ansatz": self.ansatz,
            "degree": self.degree,
            "linear_factor": self.linear_factor,
            "weight_cap": self.weight_cap,
            "sum_identity": self.sum_identity,
            "sum_bound": self.sum_bound,
            "implied_n_bound": self.implied_n_bound,
            "min_slack": self.min_slack,
            "valid": self.valid,
            "outcomes": per,
            "notes": list(self.notes),
        }


def power_sum_target(copies: int, q: int) -> float:
    """sum over all r of c_r^2 (n_i . n_r)^q for an optimal POVM."""
    return (copies + 1) / (q + 1) if q % 2 == 0 else 0.0


def require_moments(povm: Povm, max_order: int, tol: float = MOMENT_TOL) -> None:
    blocks = tensor_residual_blocks(povm)
    if max_order > povm.copies:
        raise CertificatePreconditionError(
            f"certificate needs moments up to q={max_order} but only q<={povm.copies} are constrained",
            tuple(range(povm.copies + 1, max_order + 1)))
    failed = tuple(q for q in range(max_order + 1) if np.max(np.abs(blocks[q])) >= tol)
    if failed:
        worst = max(float(np.max(np.abs(blocks[q]))) for q in failed)
        raise CertificatePreconditionError(
            f"moment equations fail at q={list(failed)} (max residual {worst:.3e})", failed)


def _form(copies: int, weight: float, degree: int, linear_factor: bool):
    """H, g, h of the quadratic form a^T H a + 2 g^T a + h in the free
    coefficients a_0..a_{degree-1} of p(t) = t^degree + sum a_j t^j."""
    def mom(q):
        m = power_sum_target(copies, q) - weight
        if linear_factor:
            m += power_sum_target(copies, q + 1) - weight
        return m
    k = degree
    H = np.array([[mom(i + j) for j in range(k)] for i in range(k)])
    g = np.array([mom(i + k) for i in range(k)])
    return H, g, mom(2 * k)


def optimal_slack(copies: int, weight: float, degree: int, linear_factor: bool):
    """Minimum of the certificate form for an outcome of weight ``weight``.

    Returns ``(slack, coefficients, degenerate)``; a singular or indefinite
    form is flagged degenerate and its slack reported as NaN.
    """
    H, g, h = _form(copies, weight, degree, linear_factor)
    if degree == 0:
        return float(h), np.zeros(0), False
    try:
        eig = np.linalg.eigvalsh(H)
        if eig[0] <= 1e-14 * max(1.0, abs(eig[-1])):
            raise np.linalg.LinAlgError("form is not positive definite")
        a = -np.linalg.solve(H, g)
    except np.linalg.LinAlgError:
        return math.nan, np.full(degree, math.nan), True
    return float(h + g @ a), a, False


def _direct_slack(povm: Povm, i: int, coeffs: np.ndarray, linear_factor: bool) -> float:
    t = np.delete(povm.gram()[i], i)
    w = np.delete(povm.weights, i)
    p = np.polynomial.polynomial.polyval(t, np.append(coeffs, 1.0))
    if linear_factor:
        w = w * (1.0 + t)
    return float(np.sum(w * p * p))


def weight_cap(copies: int, degree: int, linear_factor: bool) -> float:
    """Largest weight in (0, 1] for which the optimal slack is non-negative."""
    def s(c):
        val, _, deg = optimal_slack(copies, c, degree, linear_factor)
        return -1.0 if deg else val
    grid = np.linspace(1e-9, 1.0, 2001)
    vals = [s(c) for c in grid]
    for lo, hi, vlo, vhi in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if vlo >= 0.0 > vhi:
            return float(brentq(s, lo, hi, xtol=1e-15, rtol=1e-15))
    return 1.0


def _bound_from_cap(copies: int, cap: float) -> int:
    return math.ceil((copies + 1) / cap - 1e-9)


def certificate_generic(povm: Povm, polynomial_degree: int, include_linear_factor: bool,
                        moment_tol: float = MOMENT_TOL) -> Certificate:
    """Numeric certificate with a monic polynomial of the given degree.

    Needs the moment equations up to q = 2*degree (+1 with the linear
    factor), which must not exceed N.
    """
    order = 2 * polynomial_degree + (1 if include_linear_factor else 0)
    require_moments(povm, order, moment_tol)
    N = povm.copies
    slacks, direct, coeffs, degen = [], [], [], []
    for i, c in enumerate(povm.weights):
        s, a, d = optimal_slack(N, float(c), polynomial_degree, include_linear_factor)
        slacks.append(s)
        coeffs.append(a)
        degen.append(d)
        direct.append(math.nan if d else _direct_slack(povm, i, a, include_linear_factor))
    cap = weight_cap(N, polynomial_degree, include_linear_factor)
    bound = _bound_from_cap(N, cap)
    tag = "cubic_generic" if polynomial_degree == 3 else f"degree{polynomial_degree}_generic"
    return Certificate(
        copies=N, ansatz=tag, degree=polynomial_degree, linear_factor=include_linear_factor,
        coefficients=np.array(coeffs).reshape(povm.size, polynomial_degree),
        slacks=np.array(slacks), direct_slacks=np.array(direct),
        weight_cap=cap, sum_identity=float(povm.size * cap - np.sum(povm.weights)),
        sum_bound=bound, implied_n_bound=bound, degenerate=np.array(degen),
    )


# closed forms: (copies, degree, linear factor, slack(c), coefficients(c), cap,
#                per-outcome linear form whose sum fixes the bound, that sum as a function of n)
def _closed(copies, degree, linear, slack, coeffs, cap, form, total):
    return dict(copies=copies, degree=degree, linear=linear, slack=slack,
                coeffs=coeffs, cap=cap, form=form, total=total)


_CLOSED = {
    "quadratic": _closed(
        2, 1, False,
        lambda c: (3 - 4 * c) / (3 - c),
        lambda c: [c / (3 - c)],
        3 / 4, lambda c: 3 - 4 * c, lambda n: 3 * (n - 4)),
    "quadratic_with_linear_factor": _closed(
        3, 1, True,
        lambda c: 8 / 9 * (2 - 3 * c) / (2 - c),
        lambda c: [-(2 - 3 * c) / (3 * (2 - c))],
        2 / 3, lambda c: 2 - 3 * c, lambda n: 2 * (n - 6)),
    "quartic": _closed(
        4, 2, False,
        lambda c: 4 * (5 - 9 * c) / (9 * (5 - 4 * c)),
        lambda c: [(6 * c - 5) / (3 * (5 - 4 * c)), 2 * c / (5 - 4 * c)],
        5 / 9, lambda c: 5 / 9 - c, lambda n: 5 / 9 * (n - 9)),
    "quartic_with_linear_factor": _closed(
        5, 2, True,
        lambda c: 8 * (1 - 2 * c) / (25 * (1 - c)),
        lambda c: [-1 / 5, 2 * (2 * c - 1) / (5 * (1 - c))],
        1 / 2, lambda c: 1 - 2 * c, lambda n: n - 12),
}

ANSATZ_FOR_COPIES = {entry["copies"]: name for name, entry in _CLOSED.items()}


def _certificate_closed(povm: Povm, ansatz: str, moment_tol: float) -> Certificate:
    form = _CLOSED[ansatz]
    if povm.copies != form["copies"]:
        raise CertificatePreconditionError(
            f"{ansatz} certificate applies to N={form['copies']}, got N={povm.copies}")
    order = 2 * form["degree"] + (1 if form["linear"] else 0)
    require_moments(povm, order, moment_tol)
    w = povm.weights
    slacks = np.array([form["slack"](c) for c in w])
    coeffs = np.array([form["coeffs"](c) for c in w])
    direct = np.array([_direct_slack(povm, i, coeffs[i], form["linear"]) for i in range(povm.size)])
    cap = form["cap"]
    total = float(math.fsum(form["form"](c) for c in w))
    sum_bound = _bound_from_cap(povm.copies, cap)
    notes = [f"sum identity: {total:.6g} = {form['total'](povm.size):.6g} (expected from n={povm.size})"]
    implied = sum_bound
    if ansatz == "quartic":
        # n = 9 forces every weight to 5/9 with zero slack, which contradicts the moment equations
        implied = max(sum_bound, 10)
        notes.append("sum of (5/9 - c^2) equals (5/9)(n - 9) given sum c^2 = 5")
        notes.append("n = 9 would need all c^2 = 5/9 with zero slack; that configuration fails the moments, so n >= 10")
    return Certificate(
        copies=povm.copies, ansatz=ansatz, degree=form["degree"], linear_factor=form["linear"],
        coefficients=coeffs, slacks=slacks, direct_slacks=direct, weight_cap=cap,
        sum_identity=total, sum_bound=sum_bound, implied_n_bound=implied,
        degenerate=np.zeros(povm.size, dtype=bool), notes=notes,
    )


def certificate_quadratic(povm: Povm, moment_tol: float = MOMENT_TOL) -> Certificate:
    """N = 2: sum_{r != i} c_r^2 (b_i + t_r)^2 >= 0, so c^2 <= 3/4 and n >= 4."""
    return _certificate_closed(povm, "quadratic", moment_tol)


def certificate_quadratic_linear(povm: Povm, moment_tol: float = MOMENT_TOL) -> Certificate:
    """N = 3: weight (1 + t); c^2 <= 2/3 and n >= 6."""
    return _certificate_closed(povm, "quadratic_with_linear_factor", moment_tol)


def certificate_quartic(povm: Povm, moment_tol: float = MOMENT_TOL) -> Certificate:
    """N = 4: p(t) = b + d t + t^2; (5/4 - c^2)(5/9 - c^2) >= 0."""
    return _certificate_closed(povm, "quartic", moment_tol)


def certificate_quartic_linear(povm: Povm, moment_tol: float = MOMENT_TOL) -> Certificate:
    """N = 5: weight (1 + t), p(t) = b + d t + t^2; c^2 <= 1/2 and n >= 12."""
    return _certificate_closed(povm, "quartic_with_linear_factor", moment_tol)


def quartic_product(weight: float) -> float:
    """(5/4 - c^2)(5/9 - c^2), non-negative for every outcome when N = 4."""
    return (5 / 4 - weight) * (5 / 9 - weight)


def certify(povm: Povm, ansatz: str = "auto", moment_tol: float = MOMENT_TOL,
            degree: int | None = None, linear_factor: bool | None = None) -> Certificate:
    """Dispatch to the closed-form certificate for N = 2..5, else generic.

    ``auto`` picks the highest usable degree: floor(N/2), with the linear
    factor when N is odd.
    """
    N = povm.copies
    if ansatz == "auto":
        ansatz = ANSATZ_FOR_COPIES.get(N, "generic")
    if ansatz in _CLOSED:
        return _certificate_closed(povm, ansatz, moment_tol)
    if ansatz in ("generic", "cubic_generic"):
        if degree is None:
            degree = 3 if ansatz == "cubic_generic" else N // 2
        if linear_factor is None:
            linear_factor = (2 * degree + 1) <= N
        return certificate_generic(povm, degree, linear_factor, moment_tol)
    raise ValueError(f"unknown ansatz {ansatz!r}")


def certified_lower_bound(copies: int) -> int:
    """Smallest n not excluded by the weight-cap certificate of highest
    usable degree (10 for N = 4, where the n = 9 equality case is ruled out
    separately)."""
    if copies < 2:
        return copies + 2
    if copies == 4:
        return 10
    degree = copies // 2
    linear = (2 * degree + 1) <= copies
    return max(copies + 2, _bound_from_cap(copies, weight_cap(copies, degree, linear)))

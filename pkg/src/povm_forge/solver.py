"""Multi-start damped least squares for optimal POVMs of a given size.

The unknowns are the weights c_r^2 and directions n_r of an n-outcome POVM
for N copies; the residual is the moment system

    sum_r c_r^2 n_r^(x)q - ((N+1)/(q+1)) I^(q)   (q even),  0   (q odd)

over the independent components of each symmetric rank-q tensor,
q = 0..N. Global rotations are removed by pinning outcome 1 to +z and
outcome 2 to the x-z plane.

Encoding (``m`` independent outcomes; m = n, or n/2 with antipodal pairs):

* ``u[0:m]``: weights c^2 = u^2 in the moment rows, plus a penalty row
  max(u^2 - 1, 0) for the cap c^2 <= 1. The emitted POVM clamps at 1; a
  clamp inside the moment rows would freeze any weight that touches it;
* outcome 2: free (x, z); outcomes 3..m: free 3-vectors. Directions are
  normalised on decode.

The Jacobian is analytic.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import certified_lower_bound, n_min
from .parallel import default_workers, ordered_map
from .povm import Outcome, Povm, canonicalize
from .geometry import Direction, random_unit_vectors
from .verification import symmetric_indices, target_tensor, verify

CONVERGED = "converged"
RESIDUAL_FLOOR = "residual_floor"
ITERATION_LIMIT = "iteration_limit"

FLOOR_THRESHOLD = 1e-4
POLISH_TARGET = 1e-15


@dataclass(frozen=True)
class SolverConfig:
    copies: int
    outcomes: int
    seed: int = 0
    restarts: int = 32
    max_iterations: int = 400
    tolerance: float = 1e-10
    antipodal_mode: bool = False
    stop_on_convergence: bool = True
    min_weight: float = 1e-8

    def __post_init__(self):
        if self.copies < 1:
            raise ValueError("copies must be >= 1")
        if self.outcomes < 2:
            raise ValueError("need at least two outcomes")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.antipodal_mode and self.outcomes % 2:
            raise ValueError("antipodal mode needs an even number of outcomes")
        if self.antipodal_mode and self.outcomes < 4:
            raise ValueError("antipodal mode needs at least two pairs")

    @property
    def below_dimension(self) -> bool:
        """True when n <= N+1, where no optimal POVM can exist."""
        return self.outcomes < self.copies + 2


class MomentSystem:
    """Residuals and Jacobian of the gauge-fixed moment equations."""

    def __init__(self, copies: int, outcomes: int, antipodal: bool = False):
        self.copies = copies
        self.outcomes = outcomes
        self.antipodal = antipodal
        self.m = outcomes // 2 if antipodal else outcomes
        if self.m < 2:
            raise ValueError("need at least two independent outcomes")
        exps, targets, parity = [], [], []
        for q in range(copies + 1):
            tgt = target_tensor(copies, q).components
            for idx in symmetric_indices(q):
                exps.append((idx.count(0), idx.count(1), idx.count(2)))
                targets.append(float(tgt[idx]) if q else float(tgt))
                # an antipodal pair contributes (1 + (-1)^q) times one member
                parity.append((2.0 if q % 2 == 0 else 0.0) if antipodal else 1.0)
        self.exponents = np.array(exps, dtype=int)
        self.targets = np.array(targets)
        self.parity = np.array(parity)
        self.n_rows = len(targets) + self.m
        self.n_params = self.m + 2 + 3 * (self.m - 2)

    @property
    def degrees_of_freedom(self) -> int:
        """Free parameters after the gauge: m weights plus 2m - 3 angles."""
        return 3 * self.m - 3

    # -- encoding -----------------------------------------------------------
    def split(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape}")
        u = params[: self.m]
        raw = np.zeros((self.m, 3))
        raw[0] = (0.0, 0.0, 1.0)
        raw[1, 0] = params[self.m]
        raw[1, 2] = params[self.m + 1]
        raw[2:] = params[self.m + 2:].reshape(self.m - 2, 3)
        return u, raw

    def decode(self, params: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Weights, unit vectors and raw-vector norms."""
        u, raw = self.split(params)
        norms = np.linalg.norm(raw, axis=1)
        safe = np.where(norms > 0.0, norms, 1.0)
        unit = raw / safe[:, None]
        unit[norms == 0.0] = (1.0, 0.0, 0.0)
        return np.minimum(u * u, 1.0), unit, safe

    def encode(self, weights: np.ndarray, vectors: np.ndarray) -> np.ndarray:
        """Parameters for gauge-fixed weights and vectors of the ``m``
        independent outcomes (vector 0 must be +z, vector 1 must have y = 0)."""
        w = np.asarray(weights, dtype=float)
        v = np.asarray(vectors, dtype=float)
        return np.concatenate([np.sqrt(w), [v[1, 0], v[1, 2]], v[2:].ravel()])

    def encode_povm(self, povm: Povm) -> np.ndarray:
        p = canonicalize(povm)
        if p.size != self.outcomes or p.copies != self.copies:
            raise ValueError("POVM does not match this system's shape")
        if self.antipodal:
            return self.encode(p.weights[0::2], p.vectors[0::2])
        return self.encode(p.weights, p.vectors)

    def to_povm(self, params: np.ndarray) -> Povm:
        w, unit, _ = self.decode(params)
        if self.antipodal:
            outs = []
            for c, v in zip(w, unit):
                outs.append(Outcome(float(c), Direction.from_vector(v)))
                outs.append(Outcome(float(c), Direction.from_vector(-v)))
            return Povm(self.copies, tuple(outs))
        return Povm.from_arrays(self.copies, w, unit)

    # -- residuals ----------------------------------------------------------
    def _powers(self, unit: np.ndarray) -> np.ndarray:
        return unit[:, :, None] ** np.arange(self.copies + 1)[None, None, :]

    def residuals(self, params: np.ndarray) -> np.ndarray:
        u, _ = self.split(params)
        _, unit, _ = self.decode(params)
        w = u * u
        pw = self._powers(unit)
        a, b, g = self.exponents.T
        mono = pw[:, 0, a] * pw[:, 1, b] * pw[:, 2, g]
        moments = self.parity * (w @ mono) - self.targets
        penalty = np.maximum(u * u - 1.0, 0.0)
        return np.concatenate([moments, penalty])

    def jacobian(self, params: np.ndarray) -> np.ndarray:
        u, _ = self.split(params)
        _, unit, norms = self.decode(params)
        w = u * u
        pw = self._powers(unit)
        a, b, g = self.exponents.T
        px, py, pz = pw[:, 0, a], pw[:, 1, b], pw[:, 2, g]
        mono = px * py * pz
        dx = a * pw[:, 0, np.maximum(a - 1, 0)] * py * pz
        dy = b * px * pw[:, 1, np.maximum(b - 1, 0)] * pz
        dz = g * px * py * pw[:, 2, np.maximum(g - 1, 0)]

        E = len(self.targets)
        J = np.zeros((self.n_rows, self.n_params))
        active = u * u > 1.0
        J[:E, : self.m] = (self.parity[:, None] * mono.T) * (2.0 * u)[None, :]
        J[E + np.arange(self.m), np.arange(self.m)] = np.where(active, 2.0 * u, 0.0)

        # d(unit)/d(raw) = (I - n n^T) / |raw|
        grad = np.stack([dx, dy, dz], axis=2)            # (m, E, 3) w.r.t. unit vector
        proj = (np.eye(3)[None] - unit[:, :, None] * unit[:, None, :]) / norms[:, None, None]
        graw = np.einsum("mek,mkj->mej", grad, proj) * (w[:, None, None] * self.parity[None, :, None])
        col = self.m
        J[:E, col] = graw[1, :, 0]
        J[:E, col + 1] = graw[1, :, 2]
        col += 2
        for k in range(2, self.m):
            J[:E, col: col + 3] = graw[k]
            col += 3
        return J

    # -- initialisation -----------------------------------------------------
    def initial(self, rng: np.random.Generator) -> np.ndarray:
        vecs = random_unit_vectors(rng, self.m)
        vecs[0] = (0.0, 0.0, 1.0)
        vecs[1] = (math.hypot(vecs[1, 0], vecs[1, 1]), 0.0, vecs[1, 2])
        w = np.full(self.m, (self.copies + 1) / self.outcomes)
        return self.encode(w, vecs)

    def renormalize(self, params: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Rescale every raw direction to unit length (a residual-neutral move);
        re-draw any that collapsed to near zero."""
        p = params.copy()
        m = self.m
        v1 = p[m: m + 2]
        n1 = np.linalg.norm(v1)
        if n1 < 1e-8:
            v = random_unit_vectors(rng, 1)[0]
            p[m: m + 2] = (math.hypot(v[0], v[1]), v[2])
        else:
            p[m: m + 2] = v1 / n1
        rest = p[m + 2:].reshape(m - 2, 3)
        norms = np.linalg.norm(rest, axis=1)
        small = norms < 1e-8
        if np.any(small):
            rest[small] = random_unit_vectors(rng, int(small.sum()))
            norms = np.linalg.norm(rest, axis=1)
        p[m + 2:] = (rest / norms[:, None]).ravel()
        return p


def objective(params: np.ndarray, copies: int, outcomes: int, antipodal: bool = False) -> np.ndarray:
    """Residual vector of the moment system for an encoded parameter vector."""
    return MomentSystem(copies, outcomes, antipodal).residuals(params)


@dataclass(frozen=True)
class RestartRecord:
    restart_index: int
    residual: float
    iterations: int
    status: str


@dataclass
class SolverResult:
    status: str
    povm: Povm
    final_residual: float
    restart_index: int
    iterations: int
    seed: int
    config: SolverConfig
    restarts: list[RestartRecord] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "final_residual": self.final_residual,
            "restart_index": self.restart_index,
            "iterations": self.iterations,
            "seed": self.seed,
            "config": asdict(self.config),
            "restarts": [asdict(r) for r in self.restarts],
        }


def levenberg_marquardt(system: MomentSystem, x0: np.ndarray, rng: np.random.Generator,
                        max_iterations: int, tolerance: float) -> tuple[np.ndarray, float, int]:
    """Damped Gauss-Newton with Marquardt diagonal scaling.

    Runs until the residual norm drops below ``POLISH_TARGET`` (after first
    passing ``tolerance``), the damping blows up, progress stalls, or the
    iteration budget is spent. Returns (params, residual norm, iterations).
    """
    x = system.renormalize(x0, rng)
    r = system.residuals(x)
    cost = float(r @ r)
    lam = 1e-3
    stall = 0
    polish = 0
    it = 0
    for it in range(1, max_iterations + 1):
        norm = math.sqrt(cost)
        if norm < POLISH_TARGET:
            break
        if norm < tolerance:
            polish += 1
            if polish > 10:
                break
        J = system.jacobian(x)
        A = J.T @ J
        grad = J.T @ r
        diag = np.diag(A).copy()
        diag = np.maximum(diag, 1e-12 * max(diag.max(), 1.0))
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 4.0
                continue
            x_new = x + step
            r_new = system.residuals(x_new)
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                gain = cost - cost_new
                stall = stall + 1 if gain < 1e-10 * cost else 0
                x, r, cost = system.renormalize(x_new, rng), r_new, cost_new
                lam = max(lam / 3.0, 1e-15)
                accepted = True
                break
            lam *= 4.0
        if not accepted or stall >= 25:
            break
    return x, math.sqrt(cost), it


def _run_restart(config: SolverConfig, system: MomentSystem, index: int):
    rng = np.random.default_rng([config.seed, index])
    x0 = system.initial(rng)
    x, res, iters = levenberg_marquardt(system, x0, rng, config.max_iterations, config.tolerance)
    status = RESIDUAL_FLOOR if res > FLOOR_THRESHOLD else ITERATION_LIMIT
    if res < config.tolerance:
        povm = system.to_povm(x)
        if np.min(povm.weights) > config.min_weight and verify(povm, 10 * config.tolerance).passed:
            status = CONVERGED
    return x, res, iters, status


def solve(config: SolverConfig, workers: int | None = None) -> SolverResult:
    """Multistart search. Restart ``i`` is seeded by ``(seed, i)``.

    With ``stop_on_convergence`` the lowest-index converged restart wins;
    otherwise, and when nothing converges, the best is the smallest
    (residual, restart index). Either rule gives the same answer for any
    worker count.
    """
    system = MomentSystem(config.copies, config.outcomes, config.antipodal_mode)
    workers = default_workers() if workers is None else max(1, workers)
    records: list[RestartRecord] = []
    best = None
    batch = workers if config.stop_on_convergence else config.restarts
    for start in range(0, config.restarts, batch):
        idx = list(range(start, min(start + batch, config.restarts)))
        outs = ordered_map(lambda i: _run_restart(config, system, i), idx, workers)
        for i, (x, res, iters, status) in zip(idx, outs):
            records.append(RestartRecord(i, res, iters, status))
            key = (status != CONVERGED, res, i) if config.stop_on_convergence else (res, i)
            if best is None or key < best[0]:
                best = (key, i, x, res, iters, status)
        if config.stop_on_convergence and best[5] == CONVERGED:
            break

    _, i, x, res, iters, _ = best
    statuses = {r.status for r in records}
    if CONVERGED in statuses and best[5] == CONVERGED:
        status = CONVERGED
    elif res > FLOOR_THRESHOLD:
        status = RESIDUAL_FLOOR
    else:
        status = ITERATION_LIMIT
    return SolverResult(status, system.to_povm(x), res, i, iters, config.seed, config, records)


@dataclass(frozen=True)
class ScanRow:
    outcomes: int
    best_residual: float
    converged: bool
    status: str
    evidence_only: bool

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScanReport:
    copies: int
    rows: list[ScanRow]

    @property
    def empirical_minimum(self) -> int | None:
        for row in self.rows:
            if row.converged:
                return row.outcomes
        return None

    def to_dict(self) -> dict:
        return {
            "copies": self.copies,
            "n_min_formula": n_min(self.copies).n_min,
            "certified_lower_bound": certified_lower_bound(self.copies),
            "empirical_minimum": self.empirical_minimum,
            "rows": [r.to_dict() for r in self.rows],
        }


def feasibility_scan(copies: int, n_from: int, n_to: int, template: SolverConfig | None = None,
                     workers: int | None = None) -> ScanReport:
    """Solve for every n in ``[n_from, n_to]`` with the template's settings.

    A row that fails to converge is flagged ``evidence_only`` unless the
    certificate bound already excludes that n.
    """
    if n_from > n_to:
        raise ValueError("empty outcome range")
    if n_to > 3 * n_min(copies).n_min:
        raise ValueError("outcome range exceeds 3 * n_min")
    template = template or SolverConfig(copies, max(n_from, 2))
    certified = certified_lower_bound(copies)
    rows = []
    for n in range(n_from, n_to + 1):
        antipodal = template.antipodal_mode and n % 2 == 0 and n >= 4
        cfg = SolverConfig(copies, n, template.seed, template.restarts, template.max_iterations,
                           template.tolerance, antipodal, template.stop_on_convergence, template.min_weight)
        res = solve(cfg, workers)
        evidence_only = not res.converged and n >= certified
        rows.append(ScanRow(n, res.final_residual, res.converged, res.status, evidence_only))
    return ScanReport(copies, rows)

"""Hover controllability analysis for co-planar multicopters.

The attainable wrench set T is the image of the per-rotor thrust box
[0, F_max]^N under the 4xN effectiveness matrix -- a zonotope in wrench
space.  The craft can hold hover only if the gravity wrench
G = [m g, 0, 0, 0] lies strictly inside T; the signed distance from G to
the boundary of T is the available control authority index.  The same
index computed after deleting one wrench row (altitude or one Euler
angle channel) is the reduced index: it tells whether the remaining
states stay controllable when that channel is deliberately abandoned.

The index is evaluated with the facet-slab algorithm: for every
(m-1)-column subset of B spanning a hyperplane, the zonotope lies inside
the slab of half-width (F_max/2) * sum_k |xi . b_k| around its center,
and the minimum slab margin over all facet normals equals the boundary
distance for interior points (and a consistently signed violation for
exterior ones).

An independent Monte-Carlo / vertex-hull membership oracle is provided
for verification; it never shares code with the slab algorithm.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear
from scipy.spatial import ConvexHull, QhullError

from .vehicle import VehicleParams, build_effectiveness, health_from_failures

# wrench row index per channel name
CHANNELS = ("h", "phi", "theta", "psi")
WRENCH_ROW = {"h": 0, "phi": 1, "theta": 2, "psi": 3}

# attitude channels eligible for automatic reduction, in preference order
REDUCTION_PREFERENCE = ("psi", "theta", "phi")


# ---------------------------------------------------------------------------
# Linear hover models


@dataclass
class LinearHoverModel:
    """Double-integrator hover model x_dot = A x + Bc (tau - G).

    State order [h, phi, theta, psi, v_h, p, q, r]; J_f = diag(-m, J).
    """

    a_mat: np.ndarray  # 8x8
    b_mat: np.ndarray  # 8x4
    gravity_wrench: np.ndarray  # [m g, 0, 0, 0]
    j_f: np.ndarray  # 4x4 diagonal
    effectiveness: np.ndarray  # 4xN, health-masked
    state_labels: tuple = ("h", "phi", "theta", "psi", "v_h", "p", "q", "r")


def linear_hover_model(params: VehicleParams, health=None) -> LinearHoverModel:
    jx, jy, jz = params.inertia
    j_f = np.diag([-params.mass, jx, jy, jz])
    a = np.zeros((8, 8))
    a[0:4, 4:8] = np.eye(4)
    b = np.zeros((8, 4))
    b[4:8, :] = np.linalg.inv(j_f)
    return LinearHoverModel(
        a_mat=a,
        b_mat=b,
        gravity_wrench=params.gravity_wrench(),
        j_f=j_f,
        effectiveness=build_effectiveness(params, health),
    )


@dataclass
class ReducedHoverModel:
    """Hover model with one channel (and its derivative) deleted."""

    channel: str
    a_mat: np.ndarray  # 6x6
    b_mat: np.ndarray  # 6x3
    gravity_wrench: np.ndarray  # 3-vector
    effectiveness: np.ndarray  # 3xN, row for the dropped channel removed
    state_labels: tuple


def reduced_hover_model(params: VehicleParams, channel: str, health=None) -> ReducedHoverModel:
    if channel not in WRENCH_ROW:
        raise ValueError(f"unknown channel {channel!r}; expected one of {CHANNELS}")
    full = linear_hover_model(params, health)
    keep = [i for i in range(4) if i != WRENCH_ROW[channel]]
    a = np.zeros((6, 6))
    a[0:3, 3:6] = np.eye(3)
    b = np.zeros((6, 3))
    b[3:6, :] = np.linalg.inv(full.j_f[np.ix_(keep, keep)])
    labels = tuple(full.state_labels[i] for i in keep) + tuple(
        full.state_labels[4 + i] for i in keep
    )
    return ReducedHoverModel(
        channel=channel,
        a_mat=a,
        b_mat=b,
        gravity_wrench=full.gravity_wrench[keep],
        effectiveness=full.effectiveness[keep, :],
        state_labels=labels,
    )


def controllability_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """[B, AB, A^2 B, ...] up to A^(n-1) B."""
    n = a.shape[0]
    blocks = [b]
    for _ in range(1, n):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


def ctrb_rank(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.linalg.matrix_rank(controllability_matrix(a, b)))


# ---------------------------------------------------------------------------
# Signed boundary margin (the index itself)


@dataclass
class MarginResult:
    rho: float
    degenerate: bool = False  # attainable set has an empty interior


def _facet_normals(b: np.ndarray, rank_tol: float = 1e-10):
    """Unit normals of candidate facet hyperplanes of the zonotope.

    One normal per (m-1)-column subset of full rank; parallel duplicates
    are removed by hashing the sign-canonicalized normal at 1e-10
    resolution.
    """
    m, n = b.shape
    col_norm = np.linalg.norm(b, axis=0)
    active = [j for j in range(n) if col_norm[j] > rank_tol]
    seen = set()
    normals = []
    for subset in itertools.combinations(active, m - 1):
        sub = b[:, subset]
        u, s, _ = np.linalg.svd(sub)
        if s[-1] <= rank_tol * max(1.0, s[0]):
            continue  # subset does not span a hyperplane
        xi = u[:, -1]
        # canonical sign: first non-negligible component positive
        for comp in xi:
            if abs(comp) > 1e-12:
                if comp < 0.0:
                    xi = -xi
                break
        key = tuple(np.round(xi / 1e-10).astype(np.int64))
        if key in seen:
            continue
        seen.add(key)
        normals.append(xi)
    return normals


def _nearest_point_distance(b: np.ndarray, f_max: float, target: np.ndarray) -> float:
    """Euclidean distance from target to the attainable set (exact, convex)."""
    res = lsq_linear(b, target, bounds=(0.0, f_max), method="bvls")
    return float(np.linalg.norm(b @ res.x - target))


def attainable_margin(b, f_max: float, target, zero_tol: float | None = None) -> MarginResult:
    """Signed distance from ``target`` to the boundary of {B f : 0 <= f <= F_max}.

    Positive when the target is strictly attainable, with magnitude equal
    to the minimum distance to the boundary; non-positive otherwise (the
    exterior magnitude is the worst facet-slab violation, a lower bound
    on the true distance).  Values within ``zero_tol`` of zero are
    snapped to exactly 0.0 so that configurations whose hover point sits
    exactly on the boundary report a stable sign.

    When fewer than m-1 independent columns exist the set has an empty
    interior; the result is the negated nearest-point distance with the
    degenerate flag set.
    """
    b = np.asarray(b, dtype=float)
    target = np.asarray(target, dtype=float)
    m = b.shape[0]
    if f_max <= 0.0:
        raise ValueError("f_max must be positive")
    if zero_tol is None:
        zero_tol = 1e-9 * max(1.0, f_max)

    if np.linalg.matrix_rank(b) < m:
        dist = _nearest_point_distance(b, f_max, target)
        return MarginResult(rho=-dist if dist > zero_tol else 0.0, degenerate=True)

    center = b.sum(axis=1) * (0.5 * f_max)
    offset = center - target
    rho = math.inf
    for xi in _facet_normals(b):
        half_width = 0.5 * f_max * float(np.abs(xi @ b).sum())
        margin = half_width - abs(float(xi @ offset))
        if margin < rho:
            rho = margin
    if not math.isfinite(rho):
        # rank check above guarantees at least one spanning subset
        return MarginResult(rho=-_nearest_point_distance(b, f_max, target), degenerate=True)
    if abs(rho) <= zero_tol:
        rho = 0.0
    return MarginResult(rho=float(rho), degenerate=False)


def acai(b, f_max: float, gravity_wrench, zero_tol: float | None = None, scale=None) -> float:
    """Available control authority index of a 4xN effectiveness matrix.

    ``scale``, when given, is a length-4 diagonal normalization applied
    to the wrench rows before measuring distances (off by default: the
    raw mixed-unit index matches the definition).
    """
    b = np.asarray(b, dtype=float)
    g = np.asarray(gravity_wrench, dtype=float)
    if b.shape[0] != 4:
        raise ValueError("acai expects a 4-row effectiveness matrix")
    if scale is not None:
        d = np.asarray(scale, dtype=float)
        b = b * d[:, None]
        g = g * d
    return attainable_margin(b, f_max, g, zero_tol).rho


def arcai(b_alpha, f_max: float, gravity_alpha, zero_tol: float | None = None, scale=None) -> float:
    """Reduced index: same margin on the 3-row matrix of a kept channel set."""
    b = np.asarray(b_alpha, dtype=float)
    g = np.asarray(gravity_alpha, dtype=float)
    if b.shape[0] != 3:
        raise ValueError("arcai expects a 3-row reduced effectiveness matrix")
    if scale is not None:
        d = np.asarray(scale, dtype=float)
        b = b * d[:, None]
        g = g * d
    return attainable_margin(b, f_max, g, zero_tol).rho


# ---------------------------------------------------------------------------
# Independent membership oracle


@dataclass
class OracleResult:
    inside: bool
    distance: float  # signed boundary distance (exact on the hull path)
    conclusive: bool
    method: str


def membership_oracle(b, f_max: float, tau_query, n_samples: int = 10_000, rng=None) -> OracleResult:
    """Decide whether a wrench is attainable, independently of the slab index.

    For N <= 8 rotors the zonotope is built exactly: all 2^N thrust-box
    vertices are mapped through B and the convex hull's facet
    inequalities give an exact signed boundary distance.  For larger N a
    bounded least-squares feasibility solve decides membership and the
    interior boundary distance is estimated by bisection along random
    directions, with ``n_samples`` bounding the total iteration budget.
    """
    b = np.asarray(b, dtype=float)
    tau = np.asarray(tau_query, dtype=float)
    m, n = b.shape
    if n <= 8:
        verts = np.array(list(itertools.product((0.0, f_max), repeat=n)))
        points = verts @ b.T
        try:
            hull = ConvexHull(points)
        except QhullError:
            # flat zonotope: empty interior, query is outside (or on) it
            dist = _nearest_point_distance(b, f_max, tau)
            return OracleResult(inside=False, distance=-dist, conclusive=True, method="hull-flat")
        eqs = hull.equations
        margin = float(np.min(-(eqs[:, :m] @ tau + eqs[:, m])))
        return OracleResult(inside=margin > 0.0, distance=margin, conclusive=True, method="hull")

    # iterative path: alternating projections for speed, exact bounded
    # least squares as the membership decision
    if rng is None:
        rng = np.random.default_rng(0)
    outside_dist = _nearest_point_distance(b, f_max, tau)
    feas_tol = 1e-9 * max(1.0, f_max)
    if outside_dist > feas_tol:
        return OracleResult(inside=False, distance=-outside_dist, conclusive=True, method="lsq")

    pinv = np.linalg.pinv(b)
    pocs_iters = 200

    def _member(point) -> bool:
        f = np.clip(pinv @ point, 0.0, f_max)
        for _ in range(pocs_iters):
            f = np.clip(f - pinv @ (b @ f - point), 0.0, f_max)
        return bool(np.linalg.norm(b @ f - point) <= 1e-6 * max(1.0, f_max))

    n_dirs = max(8, n_samples // (pocs_iters + 40))
    reach = 0.5 * f_max * float(np.abs(b).sum())  # radius bound of the zonotope
    best = math.inf
    budget_ok = True
    for _ in range(n_dirs):
        u = rng.standard_normal(m)
        u /= np.linalg.norm(u)
        lo, hi = 0.0, reach
        if _member(tau + hi * u):
            budget_ok = False  # direction never exits within the bound
            continue
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if _member(tau + mid * u):
                lo = mid
            else:
                hi = mid
        best = min(best, hi)
    conclusive = math.isfinite(best) and budget_ok
    return OracleResult(
        inside=True,
        distance=best if math.isfinite(best) else 0.0,
        conclusive=conclusive,
        method="bisection",
    )


# ---------------------------------------------------------------------------
# Reports, sweeps and reduction planning


@dataclass
class ControllabilityReport:
    rho: float
    rank_ok: bool
    controllable: bool
    failure_set: tuple[int, ...]  # 1-based rotor indices
    channel: str  # "full" or the dropped channel name
    degenerate: bool = False


def assess(params: VehicleParams, failed=(), channel: str = "full") -> ControllabilityReport:
    """Controllability verdict for one failure set, full or reduced."""
    failure_set = tuple(sorted(failed))
    health = health_from_failures(params.n_rotors, failure_set)
    if channel == "full":
        model = linear_hover_model(params, health)
        rank_ok = ctrb_rank(model.a_mat, model.b_mat) == 8
        margin = attainable_margin(model.effectiveness, params.f_max, model.gravity_wrench)
    else:
        model = reduced_hover_model(params, channel, health)
        rank_ok = ctrb_rank(model.a_mat, model.b_mat) == 6
        margin = attainable_margin(model.effectiveness, params.f_max, model.gravity_wrench)
    return ControllabilityReport(
        rho=margin.rho,
        rank_ok=rank_ok,
        controllable=bool(rank_ok and margin.rho > 0.0),
        failure_set=failure_set,
        channel=channel,
        degenerate=margin.degenerate,
    )


@dataclass
class FailureGrid:
    """Index values for zero, single and pairwise rotor failures."""

    config: str
    nominal: ControllabilityReport
    cells: dict[tuple[int, int], ControllabilityReport] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.config)

    def cell(self, i: int, j: int) -> ControllabilityReport:
        return self.cells[(min(i, j), max(i, j))]

    def rho_matrix(self) -> np.ndarray:
        """NxN matrix: diagonal = single failures, off-diagonal = pairs.

        Pairs absent from a depth-1 grid come back as NaN.
        """
        n = self.n
        out = np.full((n, n), np.nan)
        for (i, j), report in self.cells.items():
            out[i - 1, j - 1] = report.rho
            out[j - 1, i - 1] = report.rho
        return out


def failure_grid(params: VehicleParams, max_failures: int = 2) -> FailureGrid:
    if not 1 <= max_failures <= 2:
        raise ValueError("max_failures must be 1 or 2")
    n = params.n_rotors
    grid = FailureGrid(config=params.config_string, nominal=assess(params))
    for i in range(1, n + 1):
        grid.cells[(i, i)] = assess(params, (i,))
    if max_failures >= 2:
        for i, j in itertools.combinations(range(1, n + 1), 2):
            grid.cells[(i, j)] = assess(params, (i, j))
    return grid


@dataclass
class ArcaiTable:
    """Single-failure table: full index plus each attitude-reduced index.

    Row 0 is the all-healthy vehicle, row k the failure of rotor k.  The
    altitude-reduced column is computed for completeness but kept apart:
    the usual presentation covers only the attitude channels, so treat it
    as an extrapolation.
    """

    config: str
    row_labels: tuple[str, ...]
    full: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    h_extrapolated: np.ndarray

    def column(self, name: str) -> np.ndarray:
        if name == "full":
            return self.full
        if name == "h":
            return self.h_extrapolated
        return getattr(self, name)


def arcai_table(params: VehicleParams) -> ArcaiTable:
    n = params.n_rotors
    failure_sets = [()] + [(i,) for i in range(1, n + 1)]
    cols = {"full": [], "phi": [], "theta": [], "psi": [], "h": []}
    for failed in failure_sets:
        cols["full"].append(assess(params, failed).rho)
        for ch in ("phi", "theta", "psi", "h"):
            cols[ch].append(assess(params, failed, channel=ch).rho)
    return ArcaiTable(
        config=params.config_string,
        row_labels=("none",) + tuple(str(i) for i in range(1, n + 1)),
        full=np.array(cols["full"]),
        phi=np.array(cols["phi"]),
        theta=np.array(cols["theta"]),
        psi=np.array(cols["psi"]),
        h_extrapolated=np.array(cols["h"]),
    )


@dataclass(frozen=True)
class ReductionDecision:
    mode: str  # "full" | "reduced" | "lost"
    channel: str | None  # set when mode == "reduced"
    rho: float

    @property
    def label(self) -> str:
        return self.mode if self.mode != "reduced" else f"reduced:{self.channel}"


class ReductionPlanner:
    """Pre-flight lookup of which states to keep for each failure set.

    All failure sets up to ``max_failures`` are evaluated ahead of time;
    unseen sets are computed on demand and cached.  An uncontrollable
    failure is mapped to the attitude channel with the largest positive
    reduced index, preferring psi over theta over phi on ties; the
    altitude channel is never selected automatically.
    """

    _TIE_TOL = 1e-12

    def __init__(self, params: VehicleParams, max_failures: int = 2):
        self.params = params
        self._cache: dict[tuple[int, ...], ReductionDecision] = {}
        n = params.n_rotors
        sets = [()]
        if max_failures >= 1:
            sets += [(i,) for i in range(1, n + 1)]
        if max_failures >= 2:
            sets += list(itertools.combinations(range(1, n + 1), 2))
        for failed in sets:
            self._cache[failed] = self._decide(failed)

    def _decide(self, failed: tuple[int, ...]) -> ReductionDecision:
        full = assess(self.params, failed)
        if full.controllable:
            return ReductionDecision("full", None, full.rho)
        candidates = {
            ch: assess(self.params, failed, channel=ch) for ch in REDUCTION_PREFERENCE
        }
        positive = {ch: r for ch, r in candidates.items() if r.controllable}
        if not positive:
            return ReductionDecision("lost", None, full.rho)
        best_rho = max(r.rho for r in positive.values())
        for ch in REDUCTION_PREFERENCE:  # preference order breaks ties
            if ch in positive and positive[ch].rho >= best_rho - self._TIE_TOL:
                return ReductionDecision("reduced", ch, positive[ch].rho)
        raise AssertionError("unreachable")

    def plan(self, failed) -> ReductionDecision:
        key = tuple(sorted(int(i) for i in failed))
        if key not in self._cache:
            self._cache[key] = self._decide(key)
        return self._cache[key]

    def plan_health(self, health) -> ReductionDecision:
        eps = np.asarray(health)
        failed = tuple(int(i) + 1 for i in np.flatnonzero(eps == 0.0))
        return self.plan(failed)


def plan_reduction(planner: ReductionPlanner, health_estimate) -> ReductionDecision:
    """Convenience wrapper: decision for an estimated health vector."""
    return planner.plan_health(health_estimate)

"""Problem data model: domain, per-regime coefficients, switching costs.

A problem instance is a regime-switching diffusion on a bounded convex
domain, with per-regime diffusion matrix a, drift b, discount c > 0,
running cost h >= 0 and singular-control marginal cost g >= 0, plus an
m x m matrix of switching costs.  Validation checks the standing
structural hypotheses: uniform ellipticity, positive discount,
non-negative costs, the switching-cost triangle condition, and the
absence of zero-cost switching loops.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .catalog import CatalogFn
from .errors import SingleRegimeError


@dataclass(frozen=True)
class Domain:
    """Bounded convex domain: interval (d=1), rectangle or disk (d=2)."""

    kind: str  # "interval" | "rectangle" | "disk"
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    center: tuple[float, ...] = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle", "disk"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "interval" and len(self.lower) != 1:
            raise ValueError("interval domain is one-dimensional")
        if self.kind == "rectangle" and len(self.lower) != 2:
            raise ValueError("rectangle domain is two-dimensional")
        if self.kind == "disk":
            if len(self.center) != 2:
                raise ValueError("disk domain needs a 2d center")
            if self.radius <= 0:
                raise ValueError("disk radius must be positive")
            bbox_lo = tuple(c - self.radius for c in self.center)
            bbox_hi = tuple(c + self.radius for c in self.center)
            object.__setattr__(self, "lower", bbox_lo)
            object.__setattr__(self, "upper", bbox_hi)
        if len(self.lower) != len(self.upper):
            raise ValueError("lower/upper must have equal length")
        if not all(lo < hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("domain must have nonempty interior (lower < upper)")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Closed-domain membership, vectorized over points (n, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.ones(x.shape[0], dtype=bool)
        for ax in range(self.dimension):
            inside &= (x[:, ax] >= self.lower[ax]) & (x[:, ax] <= self.upper[ax])
        if self.kind == "disk":
            r2 = np.sum((x - np.asarray(self.center)) ** 2, axis=1)
            inside &= r2 <= self.radius**2
        return inside

    def strictly_inside(self, x: np.ndarray) -> np.ndarray:
        """Open-domain membership (exit test of the simulator)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.ones(x.shape[0], dtype=bool)
        for ax in range(self.dimension):
            inside &= (x[:, ax] > self.lower[ax]) & (x[:, ax] < self.upper[ax])
        if self.kind == "disk":
            r2 = np.sum((x - np.asarray(self.center)) ** 2, axis=1)
            inside &= r2 < self.radius**2
        return inside


@dataclass(frozen=True)
class RegimeCoefficients:
    """Coefficient functions of a single regime.

    a   diffusion matrix, d x d of catalog entries (symmetric; diagonal in
        the monotone-scheme default)
    b   drift vector, d entries
    c   discount rate, must be positive on the closed domain
    h   running cost, non-negative
    g   marginal cost per unit of singular control, non-negative
    """

    a: tuple[tuple[CatalogFn, ...], ...]
    b: tuple[CatalogFn, ...]
    c: CatalogFn
    h: CatalogFn
    g: CatalogFn

    def a_is_diagonal(self) -> bool:
        d = len(self.b)
        for i in range(d):
            for j in range(d):
                if i != j:
                    fn = self.a[i][j]
                    if not (fn.kind == "constant" and fn.value == 0.0):
                        return False
        return True


def diagonal_a(entries: Sequence[CatalogFn]) -> tuple[tuple[CatalogFn, ...], ...]:
    """Build a diagonal diffusion matrix from d catalog entries."""
    from .catalog import constant

    d = len(entries)
    zero = constant(0.0)
    return tuple(
        tuple(entries[i] if i == j else zero for j in range(d)) for i in range(d)
    )


@dataclass(frozen=True)
class SwitchingCosts:
    """m x m matrix of non-negative switching costs; diagonal unused."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("switching-cost matrix must be square")
        object.__setattr__(self, "matrix", m)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    regime: int | None = None
    detail: str = ""
    data: dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.issues

    def kinds(self) -> set[str]:
        return {i.kind for i in self.issues}

    def add(self, kind: str, regime: int | None = None, detail: str = "", **data):
        self.issues.append(ValidationIssue(kind, regime, detail, dict(data)))

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "issues": [
                {"kind": i.kind, "regime": i.regime, "detail": i.detail, "data": i.data}
                for i in self.issues
            ],
            "stats": self.stats,
        }


@dataclass
class ProblemSpec:
    """Full problem instance plus its hypothesis-validation status."""

    domain: Domain
    regimes: int
    coefficients: tuple[RegimeCoefficients, ...]
    costs: SwitchingCosts
    validated: bool = False

    def __post_init__(self):
        if self.regimes < 1:
            raise ValueError("need at least one regime")
        if len(self.coefficients) != self.regimes:
            raise ValueError("one coefficient set per regime required")
        if self.costs.m != self.regimes:
            raise ValueError("switching-cost matrix size must match regime count")

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def validate(self, samples: int = 64) -> ValidationReport:
        """Run all hypothesis checks; marks the spec validated on pass."""
        report = validate_switching_costs(self.costs, self.regimes)
        coeff_report = validate_coefficients(self, samples)
        report.issues.extend(coeff_report.issues)
        report.stats.update(coeff_report.stats)
        self.validated = report.passed
        return report


def validate_switching_costs(costs: SwitchingCosts, m: int) -> ValidationReport:
    """Check non-negativity, the triangle condition, and zero-cost loops.

    Violations are report entries, not exceptions.  A zero-cost loop is a
    directed cycle in the graph with an edge l -> k whenever the switching
    cost from l to k vanishes.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    theta = costs.matrix
    if theta.shape != (m, m):
        raise ValueError(f"expected {m}x{m} cost matrix, got {theta.shape}")
    report = ValidationReport()

    for i in range(m):
        for j in range(m):
            if i != j and theta[i, j] < 0:
                report.add(
                    "NegativeSwitchingCost",
                    detail=f"cost {i}->{j} is negative",
                    pair=(i, j),
                    value=float(theta[i, j]),
                )

    # triangle condition: direct switch never dearer than any two-hop route
    for i in range(m):
        for j in range(m):
            for k in range(m):
                if k in (i, j) or i == j:
                    continue
                direct = theta[i, k]
                via = theta[i, j] + theta[j, k]
                if direct > via + 1e-15 * max(1.0, abs(via)):
                    report.add(
                        "TriangleViolation",
                        detail=f"cost {i}->{k} exceeds route via {j}",
                        triple=(i, j, k),
                        direct=float(direct),
                        via=float(via),
                    )

    cycle = _find_zero_cost_cycle(theta)
    if cycle is not None:
        report.add(
            "ZeroCostLoop",
            detail="->".join(str(r) for r in cycle),
            cycle=cycle,
        )
    return report


def _find_zero_cost_cycle(theta: np.ndarray) -> list[int] | None:
    """Return one directed cycle of zero-cost edges, or None if acyclic."""
    m = theta.shape[0]
    WHITE, GRAY, BLACK = 0, 1, 2
    color = [WHITE] * m
    parent: dict[int, int] = {}

    def neighbors(u: int):
        return [v for v in range(m) if v != u and theta[u, v] == 0.0]

    for start in range(m):
        if color[start] != WHITE:
            continue
        stack = [(start, iter(neighbors(start)))]
        color[start] = GRAY
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                if color[v] == GRAY:
                    # unwind the gray path u -> ... -> v to report the loop
                    cycle = [u]
                    node = u
                    while node != v:
                        node = parent[node]
                        cycle.append(node)
                    cycle.reverse()
                    cycle.append(cycle[0])
                    return cycle
                if color[v] == WHITE:
                    color[v] = GRAY
                    parent[v] = u
                    stack.append((v, iter(neighbors(v))))
                    advanced = True
                    break
            if not advanced:
                color[u] = BLACK
                stack.pop()
    return None


def validate_coefficients(spec: ProblemSpec, samples: int = 64) -> ValidationReport:
    """Sample coefficients on a lattice of the closed domain.

    Estimates the ellipticity constant theta (minimum sampled eigenvalue of
    the diffusion matrix) and the minima of c, h, g.  Pass requires
    theta > 0, min c > 0, min h >= 0 and min g >= 0.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    report = ValidationReport()
    pts = _lattice(spec.domain, samples)

    theta_min = np.inf
    c_min = np.inf
    h_min = np.inf
    g_min = np.inf
    for ell, co in enumerate(spec.coefficients):
        eig = _min_eig_samples(co, pts)
        cv = co.c(pts)
        hv = co.h(pts)
        gv = co.g(pts)
        theta_min = min(theta_min, eig.min())
        c_min = min(c_min, cv.min())
        h_min = min(h_min, hv.min())
        g_min = min(g_min, gv.min())
        if eig.min() <= 0:
            report.add(
                "DegenerateEllipticity",
                regime=ell,
                detail=f"min eigenvalue of a is {eig.min():g}",
                theta=float(eig.min()),
            )
        if cv.min() <= 0:
            report.add(
                "NonpositiveDiscount",
                regime=ell,
                detail=f"min c is {cv.min():g}",
                c_min=float(cv.min()),
            )
        if hv.min() < 0:
            report.add("NegativeCost", regime=ell, detail="h < 0", which="h", value=float(hv.min()))
        if gv.min() < 0:
            report.add("NegativeCost", regime=ell, detail="g < 0", which="g", value=float(gv.min()))

    report.stats.update(
        theta=float(theta_min),
        c_min=float(c_min),
        h_min=float(h_min),
        g_min=float(g_min),
        samples=int(pts.shape[0]),
    )
    return report


def _lattice(domain: Domain, samples: int) -> np.ndarray:
    axes = [
        np.linspace(domain.lower[ax], domain.upper[ax], samples)
        for ax in range(domain.dimension)
    ]
    if domain.dimension == 1:
        pts = axes[0][:, None]
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
    keep = domain.contains(pts)
    return pts[keep]


def _min_eig_samples(co: RegimeCoefficients, pts: np.ndarray) -> np.ndarray:
    d = len(co.b)
    if d == 1:
        return co.a[0][0](pts)
    p = co.a[0][0](pts)
    s = co.a[1][1](pts)
    q = 0.5 * (co.a[0][1](pts) + co.a[1][0](pts))
    half_tr = 0.5 * (p + s)
    return half_tr - np.sqrt((0.5 * (p - s)) ** 2 + q**2)


def switching_operator(
    values: Sequence[float], costs: SwitchingCosts, ell: int
) -> tuple[float, int]:
    """Best value achievable by an immediate switch out of regime ``ell``.

    Returns ``(min over k != ell of values[k] + cost[ell, k], argmin k)``,
    ties broken to the lowest regime index.
    """
    v = np.asarray(values, dtype=float)
    m = v.shape[0]
    if costs.m != m:
        raise ValueError("values/cost matrix size mismatch")
    if m == 1:
        raise SingleRegimeError("switching operator undefined with one regime")
    if not 0 <= ell < m:
        raise ValueError(f"regime index {ell} out of range")
    others = [k for k in range(m) if k != ell]
    cand = v[others] + costs.matrix[ell, others]
    best = int(np.argmin(cand))
    return float(cand[best]), others[best]

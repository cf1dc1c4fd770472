"""Finite-difference grid: node layout, Dirichlet masks, stencils, interpolation.

Nodes live on a tensor lattice over the domain's bounding box.  Box domains
classify the outermost ring as boundary; disk domains mask nodes outside
the disk as exterior and treat the first layer inside as boundary (value 0,
first-order boundary accuracy).

The generator is discretized with second-order central differences for
pure second derivatives, 4-point cross stencils for mixed ones, and
first-order upwinding of the drift so that the assembled operator c - D is
an M-matrix whenever the diffusion matrix is diagonal.  Gradients are
central in the bulk and one-sided second-order at nodes adjacent to the
boundary, which keeps the gradient-constraint check honest near the edge.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import NotValidatedError, OutOfDomainError
from .problem import Domain, ProblemSpec

INTERIOR, BOUNDARY, EXTERIOR = 0, 1, 2
_OFF_ARRAY = 3


class Grid:
    """Tensor-product grid with interior/boundary/exterior classification."""

    def __init__(self, domain: Domain, nodes: tuple[int, ...]):
        if len(nodes) != domain.dimension:
            raise ValueError("one node count per axis required")
        if any(n < 3 for n in nodes):
            raise ValueError("need at least 3 nodes per axis")
        self.domain = domain
        self.shape = tuple(int(n) for n in nodes)
        self.axes = [
            np.linspace(domain.lower[ax], domain.upper[ax], self.shape[ax])
            for ax in range(domain.dimension)
        ]
        self.spacing = tuple(
            (domain.upper[ax] - domain.lower[ax]) / (self.shape[ax] - 1)
            for ax in range(domain.dimension)
        )
        self.coords = self._build_coords()
        self.classes = self._classify()
        self.interior = self.classes == INTERIOR
        self.boundary = self.classes == BOUNDARY
        self.exterior = self.classes == EXTERIOR
        self.n_nodes = self.coords.shape[0]
        self._neighbor_classes = self._build_neighbor_classes()
        self._cache: dict = {}

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def _build_coords(self) -> np.ndarray:
        if self.dimension == 1:
            return self.axes[0][:, None]
        gx, gy = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    def _classify(self) -> np.ndarray:
        cls = np.full(self.shape, INTERIOR, dtype=np.int8)
        if self.domain.kind == "disk":
            inside = self.domain.contains(self.coords).reshape(self.shape)
            cls[~inside] = EXTERIOR
            # first layer inside the disk is the Dirichlet boundary
            nb_out = np.zeros(self.shape, dtype=bool)
            for ax in range(2):
                out = ~inside
                nb_out |= _shift_bool(out, ax, +1, fill=True)
                nb_out |= _shift_bool(out, ax, -1, fill=True)
            cls[inside & nb_out] = BOUNDARY
        else:
            for ax in range(self.dimension):
                sl_lo = [slice(None)] * self.dimension
                sl_hi = [slice(None)] * self.dimension
                sl_lo[ax] = 0
                sl_hi[ax] = -1
                cls[tuple(sl_lo)] = BOUNDARY
                cls[tuple(sl_hi)] = BOUNDARY
        return cls.ravel()

    def _build_neighbor_classes(self) -> dict:
        """Per axis and direction, the class of the neighboring node."""
        cls = self.classes.reshape(self.shape)
        out = {}
        for ax in range(self.dimension):
            out[(ax, +1)] = _shift_int(cls, ax, +1, fill=_OFF_ARRAY)
            out[(ax, -1)] = _shift_int(cls, ax, -1, fill=_OFF_ARRAY)
            out[(ax, +2)] = _shift_int(cls, ax, +2, fill=_OFF_ARRAY)
            out[(ax, -2)] = _shift_int(cls, ax, -2, fill=_OFF_ARRAY)
        return out

    def grid_view(self, flat: np.ndarray) -> np.ndarray:
        return flat.reshape(self.shape)

    def coeff_tables(self, spec: ProblemSpec) -> "CoeffTables":
        key = ("tables", id(spec))
        if key not in self._cache:
            self._cache[key] = CoeffTables.build(spec, self)
        return self._cache[key]


def _shift_bool(a: np.ndarray, axis: int, k: int, fill: bool) -> np.ndarray:
    out = np.full_like(a, fill)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k > 0:
        src[axis] = slice(k, None)
        dst[axis] = slice(None, -k)
    else:
        src[axis] = slice(None, k)
        dst[axis] = slice(-k, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _shift_int(a: np.ndarray, axis: int, k: int, fill: int) -> np.ndarray:
    out = np.full_like(a, fill)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k > 0:
        src[axis] = slice(k, None)
        dst[axis] = slice(None, -k)
    else:
        src[axis] = slice(None, k)
        dst[axis] = slice(-k, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _shift_vals(a: np.ndarray, axis: int, k: int) -> np.ndarray:
    """Shifted values with zero fill outside the array."""
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k > 0:
        src[axis] = slice(k, None)
        dst[axis] = slice(None, -k)
    else:
        src[axis] = slice(None, k)
        dst[axis] = slice(-k, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


@dataclass
class CoeffTables:
    """Coefficients tabulated at every grid node, one row set per regime."""

    a: np.ndarray  # (m, d, d, N)
    b: np.ndarray  # (m, d, N)
    c: np.ndarray  # (m, N)
    h: np.ndarray  # (m, N)
    g: np.ndarray  # (m, N)
    diagonal: bool

    @classmethod
    def build(cls, spec: ProblemSpec, grid: Grid) -> "CoeffTables":
        m, d, n = spec.regimes, spec.dimension, grid.n_nodes
        a = np.zeros((m, d, d, n))
        b = np.zeros((m, d, n))
        c = np.zeros((m, n))
        h = np.zeros((m, n))
        g = np.zeros((m, n))
        diagonal = True
        for ell, co in enumerate(spec.coefficients):
            diagonal &= co.a_is_diagonal()
            for i in range(d):
                for j in range(d):
                    a[ell, i, j] = co.a[i][j](grid.coords)
                b[ell, i] = co.b[i](grid.coords)
            c[ell] = co.c(grid.coords)
            h[ell] = co.h(grid.coords)
            g[ell] = co.g(grid.coords)
        return cls(a, b, c, h, g, diagonal)


@dataclass
class RegimeField:
    """One scalar grid function per regime; values of shape (m, n_nodes)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.n_nodes:
            raise ValueError("values must have shape (m, n_nodes)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field entries must be finite")

    @classmethod
    def zeros(cls, grid: Grid, m: int) -> "RegimeField":
        return cls(grid, np.zeros((m, grid.n_nodes)))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "RegimeField":
        return RegimeField(self.grid, self.values.copy())

    def sup_diff(self, other: "RegimeField") -> float:
        return float(np.max(np.abs(self.values - other.values)))


def apply_generator(
    field: RegimeField, ell: int, spec: ProblemSpec, grid: Grid
) -> np.ndarray:
    """Discrete generator D u = tr[a D^2 u] - <b, D^1 u> at interior nodes.

    Upwind one-sided differences for the drift term (direction per the sign
    of the advection velocity -b); zero at boundary and exterior nodes.
    """
    if not spec.validated:
        raise NotValidatedError("validate the ProblemSpec before applying the generator")
    return generator_raw(field.values[ell], ell, spec, grid)


def generator_raw(values: np.ndarray, ell: int, spec: ProblemSpec, grid: Grid) -> np.ndarray:
    """apply_generator on one flat value array, without the validation check."""
    tab = grid.coeff_tables(spec)
    u = grid.grid_view(np.asarray(values, dtype=float))
    d = grid.dimension
    out = np.zeros_like(u)

    for ax in range(d):
        h = grid.spacing[ax]
        u_p = _shift_vals(u, ax, +1)
        u_m = _shift_vals(u, ax, -1)
        a_ax = grid.grid_view(tab.a[ell, ax, ax])
        out += a_ax * (u_p - 2.0 * u + u_m) / (h * h)
        b_ax = grid.grid_view(tab.b[ell, ax])
        fwd = (u_p - u) / h
        bwd = (u - u_m) / h
        # -b du: backward difference where b > 0, forward where b < 0
        out -= np.maximum(b_ax, 0.0) * bwd + np.minimum(b_ax, 0.0) * fwd

    if d == 2 and not tab.diagonal:
        a01 = grid.grid_view(tab.a[ell, 0, 1])
        hx, hy = grid.spacing
        upp = _shift_vals(_shift_vals(u, 0, +1), 1, +1)
        upm = _shift_vals(_shift_vals(u, 0, +1), 1, -1)
        ump = _shift_vals(_shift_vals(u, 0, -1), 1, +1)
        umm = _shift_vals(_shift_vals(u, 0, -1), 1, -1)
        out += 2.0 * a01 * (upp - upm - ump + umm) / (4.0 * hx * hy)

    out = out.ravel()
    out[~grid.interior] = 0.0
    return out


def node_gradients(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Node-centered gradient of one scalar grid function; shape (N, d).

    Central differences in the bulk; one-sided second-order at nodes
    adjacent to the boundary and at boundary nodes (pointing into the
    domain); first-order one-sided when only one usable neighbor exists;
    zero at exterior nodes.
    """
    u = grid.grid_view(np.asarray(values, dtype=float))
    d = grid.dimension
    cls = grid.classes.reshape(grid.shape)
    grads = np.zeros(grid.shape + (d,))

    for ax in range(d):
        h = grid.spacing[ax]
        u_p = _shift_vals(u, ax, +1)
        u_m = _shift_vals(u, ax, -1)
        u_pp = _shift_vals(u, ax, +2)
        u_mm = _shift_vals(u, ax, -2)
        cp = grid._neighbor_classes[(ax, +1)]
        cm = grid._neighbor_classes[(ax, -1)]
        cpp = grid._neighbor_classes[(ax, +2)]
        cmm = grid._neighbor_classes[(ax, -2)]
        vp = cp <= BOUNDARY
        vm = cm <= BOUNDARY
        vpp = cpp <= BOUNDARY
        vmm = cmm <= BOUNDARY

        central = (u_p - u_m) / (2.0 * h)
        fwd2 = (-3.0 * u + 4.0 * u_p - u_pp) / (2.0 * h)
        bwd2 = (3.0 * u - 4.0 * u_m + u_mm) / (2.0 * h)
        fwd1 = (u_p - u) / h
        bwd1 = (u - u_m) / h

        is_int = cls == INTERIOR
        is_bnd = cls == BOUNDARY
        conds = [
            is_int & vp & vm & (cp == INTERIOR) & (cm == INTERIOR),
            is_int & (cm == BOUNDARY) & vp & vpp,
            is_int & (cp == BOUNDARY) & vm & vmm,
            is_int & vp & vm,
            is_bnd & vp & vpp,
            is_bnd & vm & vmm,
            is_bnd & vp & vm,
            is_bnd & vp,
            is_bnd & vm,
        ]
        choices = [central, fwd2, bwd2, central, fwd2, bwd2, central, fwd1, bwd1]
        grads[..., ax] = np.select(conds, choices, default=0.0)

    return grads.reshape(grid.n_nodes, d)


def gradient_norm(field: RegimeField, ell: int, grid: Grid) -> np.ndarray:
    """Euclidean norm of the discrete gradient at every node."""
    g = node_gradients(field.values[ell], grid)
    return np.sqrt(np.sum(g * g, axis=1))


def _locate(grid: Grid, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cell indices and fractional coordinates for points (n, d)."""
    n = x.shape[0]
    d = grid.dimension
    idx = np.empty((n, d), dtype=np.int64)
    frac = np.empty((n, d))
    for ax in range(d):
        lo = grid.domain.lower[ax]
        h = grid.spacing[ax]
        i = np.floor((x[:, ax] - lo) / h).astype(np.int64)
        i = np.clip(i, 0, grid.shape[ax] - 2)
        idx[:, ax] = i
        frac[:, ax] = (x[:, ax] - (lo + i * h)) / h
    return idx, frac


def interp_table(table: np.ndarray, grid: Grid, x: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of a node table (flat, length N) at points (n, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    idx, t = _locate(grid, x)
    vals = table.reshape(grid.shape)
    if grid.dimension == 1:
        i = idx[:, 0]
        tx = t[:, 0]
        return vals[i] * (1.0 - tx) + vals[i + 1] * tx
    i, j = idx[:, 0], idx[:, 1]
    tx, ty = t[:, 0], t[:, 1]
    v00 = vals[i, j]
    v10 = vals[i + 1, j]
    v01 = vals[i, j + 1]
    v11 = vals[i + 1, j + 1]
    return (
        v00 * (1.0 - tx) * (1.0 - ty)
        + v10 * tx * (1.0 - ty)
        + v01 * (1.0 - tx) * ty
        + v11 * tx * ty
    )


def interpolate(field: RegimeField, ell: int, x) -> float:
    """Multilinear field value at a point of the closed domain."""
    pt = np.atleast_2d(np.asarray(x, dtype=float))
    if not bool(field.grid.domain.contains(pt)[0]):
        raise OutOfDomainError(f"point {np.asarray(x).tolist()} outside the closed domain")
    return float(interp_table(field.values[ell], field.grid, pt)[0])


def interpolate_gradient(field: RegimeField, ell: int, x) -> np.ndarray:
    """Gradient at a point, interpolated componentwise from node gradients."""
    pt = np.atleast_2d(np.asarray(x, dtype=float))
    if not bool(field.grid.domain.contains(pt)[0]):
        raise OutOfDomainError(f"point {np.asarray(x).tolist()} outside the closed domain")
    grads = node_gradients(field.values[ell], field.grid)
    out = np.empty(field.grid.dimension)
    for ax in range(field.grid.dimension):
        out[ax] = interp_table(grads[:, ax], field.grid, pt)[0]
    return out


def write_field_csv(field: RegimeField, path) -> None:
    """One row per non-exterior node and regime: x1[,x2],regime,value."""
    grid = field.grid
    keep = ~grid.exterior
    coord_cols = [f"x{ax + 1}" for ax in range(grid.dimension)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(coord_cols + ["regime", "value"])
        for ell in range(field.m):
            vals = field.values[ell]
            for node in np.flatnonzero(keep):
                row = [f"{c:.17g}" for c in grid.coords[node]]
                row.append(str(ell))
                row.append(f"{vals[node]:.17g}")
                writer.writerow(row)

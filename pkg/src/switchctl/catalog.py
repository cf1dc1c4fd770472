"""Serializable coefficient-function catalog.

Problem coefficients (diffusion, drift, discount, running cost, control
cost) are restricted to a small parametric family -- constant, affine,
quadratic, cosine bump -- so that a problem spec written to JSON reproduces
bit-exactly.  Every entry evaluates vectorized over an ``(n, d)`` array of
points and can be encoded into a flat float row for the compiled path
kernel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

KINDS = ("constant", "affine", "quadratic", "cosine_bump")
KIND_CODES = {name: code for code, name in enumerate(KINDS)}

# Float layout used by the compiled kernel, d <= 2:
# [kind, value, amplitude, s0, s1, q00, q01, q11, c0, c1, w0, w1]
ENCODED_WIDTH = 12


@dataclass(frozen=True)
class CatalogFn:
    """One scalar coefficient function from the catalog.

    value       constant term (all kinds)
    slope       linear part, length d (affine, quadratic)
    curvature   symmetric d x d quadratic part (quadratic)
    amplitude, center, width
                cosine bump: value + amplitude * prod_i cos^2(pi (x_i-c_i) / (2 w_i))
                supported on |x_i - c_i| <= w_i, zero bump outside.  C^1.
    """

    kind: str
    value: float = 0.0
    slope: tuple[float, ...] = ()
    curvature: tuple[tuple[float, ...], ...] = ()
    amplitude: float = 0.0
    center: tuple[float, ...] = ()
    width: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown catalog kind {self.kind!r}; choose from {KINDS}")
        if self.kind == "cosine_bump":
            if len(self.center) != len(self.width) or not self.center:
                raise ValueError("cosine_bump needs center and width of equal length >= 1")
            if any(w <= 0 for w in self.width):
                raise ValueError("cosine_bump widths must be positive")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at points ``x`` of shape (n, d); returns shape (n,)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n, d = x.shape
        if self.kind == "constant":
            return np.full(n, self.value)
        if self.kind == "affine":
            s = self._vec(self.slope, d)
            return self.value + x @ s
        if self.kind == "quadratic":
            s = self._vec(self.slope, d)
            q = self._mat(self.curvature, d)
            return self.value + x @ s + np.einsum("ni,ij,nj->n", x, q, x)
        # cosine_bump
        c = self._vec(self.center, d)
        w = self._vec(self.width, d)
        t = (x - c) / w
        inside = np.all(np.abs(t) <= 1.0, axis=1)
        bump = np.prod(np.cos(0.5 * np.pi * t) ** 2, axis=1)
        return self.value + self.amplitude * np.where(inside, bump, 0.0)

    @staticmethod
    def _vec(v: Sequence[float], d: int) -> np.ndarray:
        a = np.zeros(d)
        a[: len(v)] = v[:d] if len(v) >= d else v
        return a

    @staticmethod
    def _mat(m: Sequence[Sequence[float]], d: int) -> np.ndarray:
        a = np.zeros((d, d))
        for i, row in enumerate(m[:d]):
            for j, val in enumerate(row[:d]):
                a[i, j] = val
        return 0.5 * (a + a.T)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "value": self.value}
        if self.slope:
            out["slope"] = list(self.slope)
        if self.curvature:
            out["curvature"] = [list(r) for r in self.curvature]
        if self.kind == "cosine_bump":
            out["amplitude"] = self.amplitude
            out["center"] = list(self.center)
            out["width"] = list(self.width)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CatalogFn":
        known = {"kind", "value", "slope", "curvature", "amplitude", "center", "width"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown catalog entry keys: {sorted(extra)}")
        return cls(
            kind=d["kind"],
            value=float(d.get("value", 0.0)),
            slope=tuple(d.get("slope", ())),
            curvature=tuple(tuple(r) for r in d.get("curvature", ())),
            amplitude=float(d.get("amplitude", 0.0)),
            center=tuple(d.get("center", ())),
            width=tuple(d.get("width", ())),
        )

    def encode(self, d: int) -> np.ndarray:
        """Flat float row consumed by the compiled path kernel."""
        row = np.zeros(ENCODED_WIDTH)
        row[0] = KIND_CODES[self.kind]
        row[1] = self.value
        row[2] = self.amplitude
        s = self._vec(self.slope, d)
        row[3 : 3 + d] = s
        q = self._mat(self.curvature, d)
        row[5] = q[0, 0]
        if d == 2:
            row[6] = q[0, 1]
            row[7] = q[1, 1]
        if self.kind == "cosine_bump":
            c = self._vec(self.center, d)
            w = self._vec(self.width, d)
            row[8 : 8 + d] = c
            row[10 : 10 + d] = np.where(w > 0, w, 1.0)
        else:
            row[10:12] = 1.0
        return row


def constant(value: float) -> CatalogFn:
    return CatalogFn("constant", value=value)


def affine(value: float, slope: Sequence[float]) -> CatalogFn:
    return CatalogFn("affine", value=value, slope=tuple(slope))


def quadratic(value: float, slope: Sequence[float], curvature: Sequence[Sequence[float]]) -> CatalogFn:
    return CatalogFn(
        "quadratic",
        value=value,
        slope=tuple(slope),
        curvature=tuple(tuple(r) for r in curvature),
    )


def cosine_bump(value: float, amplitude: float, center: Sequence[float], width: Sequence[float]) -> CatalogFn:
    return CatalogFn(
        "cosine_bump",
        value=value,
        amplitude=amplitude,
        center=tuple(center),
        width=tuple(width),
    )

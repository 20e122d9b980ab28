"""Piecewise-linear scalar-to-color and scalar-to-opacity transfer functions.

Control points are (scalar, value) pairs with strictly ascending scalars;
evaluation interpolates linearly between bracketing points and clamps to the
end values outside the range.  Three built-in palettes ship with documented
stop values (positions are fractions of the mapped scalar range):

    gray     0: (0,0,0)   1: (1,1,1)
    rainbow  0: (0,0,1)   0.25: (0,1,1)   0.5: (0,1,0)   0.75: (1,1,0)   1: (1,0,0)
    heat     0: (0,0,0)   1/3: (1,0,0)    2/3: (1,1,0)   1: (1,1,1)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PALETTES: dict[str, tuple[tuple[float, tuple[float, float, float]], ...]] = {
    "gray": (
        (0.0, (0.0, 0.0, 0.0)),
        (1.0, (1.0, 1.0, 1.0)),
    ),
    "rainbow": (
        (0.0, (0.0, 0.0, 1.0)),
        (0.25, (0.0, 1.0, 1.0)),
        (0.5, (0.0, 1.0, 0.0)),
        (0.75, (1.0, 1.0, 0.0)),
        (1.0, (1.0, 0.0, 0.0)),
    ),
    "heat": (
        (0.0, (0.0, 0.0, 0.0)),
        (1.0 / 3.0, (1.0, 0.0, 0.0)),
        (2.0 / 3.0, (1.0, 1.0, 0.0)),
        (1.0, (1.0, 1.0, 1.0)),
    ),
}


@dataclass(frozen=True)
class TransferFunction:
    color_points: tuple[tuple[float, tuple[float, float, float]], ...]
    opacity_points: tuple[tuple[float, float], ...]
    palette_name: str = "custom"

    def __post_init__(self) -> None:
        if len(self.color_points) < 2 or len(self.opacity_points) < 2:
            raise ValueError("transfer function needs >= 2 color and opacity points")
        for points, what in ((self.color_points, "color"), (self.opacity_points, "opacity")):
            scalars = [p[0] for p in points]
            if any(b <= a for a, b in zip(scalars, scalars[1:])):
                raise ValueError(f"{what} point scalars must be strictly ascending")
        for _, rgb in self.color_points:
            if len(rgb) != 3 or any(not 0.0 <= c <= 1.0 for c in rgb):
                raise ValueError("rgb components must lie in [0, 1]")
        for _, a in self.opacity_points:
            if not 0.0 <= a <= 1.0:
                raise ValueError("opacity must lie in [0, 1]")

    @property
    def scalar_range(self) -> tuple[float, float]:
        los = (self.color_points[0][0], self.opacity_points[0][0])
        his = (self.color_points[-1][0], self.opacity_points[-1][0])
        return min(los), max(his)

    def color(self, scalars) -> np.ndarray:
        """rgb at the given scalar(s); shape (..., 3), clamped at the ends."""
        s = np.asarray(scalars, dtype=np.float64)
        xs = np.array([p[0] for p in self.color_points])
        out = np.empty(s.shape + (3,))
        for c in range(3):
            ys = np.array([p[1][c] for p in self.color_points])
            out[..., c] = np.interp(s, xs, ys)
        return out

    def opacity(self, scalars) -> np.ndarray:
        s = np.asarray(scalars, dtype=np.float64)
        xs = np.array([p[0] for p in self.opacity_points])
        ys = np.array([p[1] for p in self.opacity_points])
        return np.interp(s, xs, ys)

    def rgba(self, scalar: float) -> tuple[float, float, float, float]:
        """Single-scalar rgba in [0, 1]."""
        r, g, b = self.color(float(scalar))
        return float(r), float(g), float(b), float(self.opacity(float(scalar)))


def palette_transfer_function(
    name: str,
    lo: float,
    hi: float,
    max_opacity: float = 1.0,
) -> TransferFunction:
    """Map a named palette over [lo, hi] with a linear 0..max_opacity ramp."""
    if name not in PALETTES:
        raise ValueError(f"unknown palette {name!r}; expected one of {sorted(PALETTES)}")
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ValueError(f"palette range must satisfy lo < hi, got [{lo}, {hi}]")
    colors = tuple(
        (lo + frac * (hi - lo), rgb) for frac, rgb in PALETTES[name]
    )
    opacity = ((lo, 0.0), (hi, float(max_opacity)))
    return TransferFunction(colors, opacity, palette_name=name)

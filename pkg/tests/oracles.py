"""Independent brute-force oracles used by the test suite.

Everything here is deliberately written with plain Python loops and index
tuples, never with the library's own array paths, so tests compare two
unrelated implementations.
"""

from __future__ import annotations

import itertools
import math


def flat_index(dims, idx):
    """Storage-order flat index: axis 0 fastest-varying."""
    f = 0
    for d, i in zip(reversed(dims), reversed(idx)):
        f = f * d + i
    return f


def all_indices(dims):
    """Multi-indices in storage order (axis 0 fastest)."""
    for rev in itertools.product(*[range(d) for d in reversed(dims)]):
        yield tuple(reversed(rev))


def slice_oracle(dims, values, mask, axis, index):
    """Slice by explicit per-voxel index arithmetic."""
    out_dims = tuple(d for a, d in enumerate(dims) if a != axis)
    out_values, out_mask = [], []
    for idx in all_indices(out_dims):
        src = idx[:axis] + (index,) + idx[axis:]
        f = flat_index(dims, src)
        out_values.append(values[f])
        out_mask.append(mask[f])
    return out_dims, out_values, out_mask


def project_oracle(dims, values, mask, axis, reducer):
    """Axis reduction by explicit enumeration along the collapsed axis."""
    out_dims = tuple(d for a, d in enumerate(dims) if a != axis)
    out_values, out_mask = [], []
    for idx in all_indices(out_dims):
        line = []
        for i in range(dims[axis]):
            src = idx[:axis] + (i,) + idx[axis:]
            f = flat_index(dims, src)
            if mask[f]:
                line.append(values[f])
        if not line:
            out_values.append(0.0)
            out_mask.append(False)
            continue
        if reducer == "sum":
            v = sum(line)
        elif reducer == "mean":
            v = sum(line) / len(line)
        elif reducer == "max":
            v = max(line)
        else:
            v = min(line)
        out_values.append(v)
        out_mask.append(True)
    return out_dims, out_values, out_mask


def composite_1d_oracle(alphas_and_colors, step_length, background):
    """Front-to-back emission-absorption compositing of one ray.

    ``alphas_and_colors`` is the sequence of (alpha, (r, g, b)) at the sample
    positions; alpha is per unit length and gets the same
    ``1 - (1 - a)**step`` correction the renderer documents.
    """
    color = [0.0, 0.0, 0.0]
    transmittance = 1.0
    for alpha, rgb in alphas_and_colors:
        a = 1.0 - (1.0 - alpha) ** step_length
        for c in range(3):
            color[c] += transmittance * a * rgb[c]
        transmittance *= 1.0 - a
        if transmittance < 1.0 / 255.0:
            break
    return [color[c] + transmittance * background[c] for c in range(3)], transmittance


def sphere_area(radius):
    return 4.0 * math.pi * radius * radius

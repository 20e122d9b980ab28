"""Small 3-vector and quaternion helpers on plain tuples.

Session state keeps positions and rotations as tuples of floats so that
structural equality of sessions is plain ``==``; numpy stays confined to the
bulk field/render code.  Quaternions are ``(w, x, y, z)``, unit norm.
"""

from __future__ import annotations

import math

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]

IDENTITY_QUAT: Quat = (1.0, 0.0, 0.0, 0.0)


def vadd(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def vsub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def vscale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def vdot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def vcross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def vnorm(a: Vec3) -> float:
    return math.sqrt(vdot(a, a))


def vnormalize(a: Vec3) -> Vec3:
    n = vnorm(a)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return (a[0] / n, a[1] / n, a[2] / n)


def quat_from_axis_angle(axis: Vec3, radians: float) -> Quat:
    ax = vnormalize(axis)
    half = 0.5 * radians
    s = math.sin(half)
    return (math.cos(half), ax[0] * s, ax[1] * s, ax[2] * s)


def quat_mul(a: Quat, b: Quat) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_conj(q: Quat) -> Quat:
    return (q[0], -q[1], -q[2], -q[3])


def quat_normalize(q: Quat) -> Quat:
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n == 0.0:
        raise ValueError("cannot normalize a zero quaternion")
    return (q[0] / n, q[1] / n, q[2] / n, q[3] / n)


def quat_rotate(q: Quat, v: Vec3) -> Vec3:
    # v' = q v q*  expanded without building intermediate quaternions
    w, x, y, z = q
    tx = 2.0 * (y * v[2] - z * v[1])
    ty = 2.0 * (z * v[0] - x * v[2])
    tz = 2.0 * (x * v[1] - y * v[0])
    return (
        v[0] + w * tx + (y * tz - z * ty),
        v[1] + w * ty + (z * tx - x * tz),
        v[2] + w * tz + (x * ty - y * tx),
    )


def rotate_about(point: Vec3, pivot: Vec3, q: Quat) -> Vec3:
    return vadd(pivot, quat_rotate(q, vsub(point, pivot)))


def quat_rotation_matrix(q: Quat) -> tuple[tuple[float, float, float], ...]:
    """Row-major 3x3 matrix applying the same rotation as ``quat_rotate``."""
    w, x, y, z = q
    return (
        (1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)),
        (2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)),
        (2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)),
    )


class RigidTransform:
    """Rotation about a pivot followed by a translation offset.

    Maps p to offset + pivot + R(p - pivot).  Length-preserving, so ray
    parameters survive a round trip through ``inverse_point``.
    """

    __slots__ = ("offset", "pivot", "rotation")

    def __init__(
        self,
        offset: Vec3 = (0.0, 0.0, 0.0),
        pivot: Vec3 = (0.0, 0.0, 0.0),
        rotation: Quat = IDENTITY_QUAT,
    ) -> None:
        self.offset = offset
        self.pivot = pivot
        self.rotation = rotation

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return (
            self.offset == other.offset
            and self.pivot == other.pivot
            and self.rotation == other.rotation
        )

    def __repr__(self) -> str:
        return (
            f"RigidTransform(offset={self.offset!r}, pivot={self.pivot!r}, "
            f"rotation={self.rotation!r})"
        )

    def apply_point(self, p: Vec3) -> Vec3:
        return vadd(self.offset, rotate_about(p, self.pivot, self.rotation))

    def inverse_point(self, w: Vec3) -> Vec3:
        return rotate_about(vsub(w, self.offset), self.pivot, quat_conj(self.rotation))

    def apply_direction(self, d: Vec3) -> Vec3:
        return quat_rotate(self.rotation, d)

    def inverse_direction(self, d: Vec3) -> Vec3:
        return quat_rotate(quat_conj(self.rotation), d)

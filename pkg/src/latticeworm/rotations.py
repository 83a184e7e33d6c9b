"""Batched SO(3) helpers used by the rod dynamics core.

All functions accept arrays whose last dimensions are (3,) for rotation
vectors or (3, 3) for rotation matrices, with arbitrary leading batch
dimensions. Components are assembled directly (no intermediate skew matrices)
because these run in the stepping hot loop.
"""

from __future__ import annotations

import numpy as np

_SMALL_ANGLE = 1e-6
_NEAR_PI = 1e-6


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over the last axis; faster than np.cross for (N, 3) batches."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def skew(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix S(v) with S(v) @ u = v x u."""
    out = np.zeros(v.shape[:-1] + (3, 3), dtype=float)
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def matrix_from_rotvec(phi: np.ndarray) -> np.ndarray:
    """Rodrigues formula exp(S(phi)); series expansion below 1e-6 rad.

    Assembled as (1 - b t^2) I + b phi phi^T + a S(phi) with a = sin t / t and
    b = (1 - cos t) / t^2.
    """
    phi = np.asarray(phi, dtype=float)
    x, y, z = phi[..., 0], phi[..., 1], phi[..., 2]
    theta2 = x * x + y * y + z * z
    theta = np.sqrt(theta2)
    small = theta < _SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    with np.errstate(invalid="ignore"):
        a = np.where(small, 1.0 - theta2 / 6.0, np.sin(safe) / safe)
        b = np.where(small, 0.5 - theta2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    out = np.empty(phi.shape[:-1] + (3, 3))
    bxy = b * x * y
    bxz = b * x * z
    byz = b * y * z
    ax, ay, az = a * x, a * y, a * z
    out[..., 0, 0] = 1.0 - b * (y * y + z * z)
    out[..., 0, 1] = bxy - az
    out[..., 0, 2] = bxz + ay
    out[..., 1, 0] = bxy + az
    out[..., 1, 1] = 1.0 - b * (x * x + z * z)
    out[..., 1, 2] = byz - ax
    out[..., 2, 0] = bxz - ay
    out[..., 2, 1] = byz + ax
    out[..., 2, 2] = 1.0 - b * (x * x + y * y)
    return out


def rotvec_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Inverse of matrix_from_rotvec; returns a rotation vector with angle in [0, pi].

    Robust at the identity and at half-turn rotations (where the antisymmetric
    part vanishes).
    """
    rot = np.asarray(rot, dtype=float)
    trace = rot[..., 0, 0] + rot[..., 1, 1] + rot[..., 2, 2]
    theta = np.arccos(np.clip((trace - 1.0) / 2.0, -1.0, 1.0))
    sin_t = np.sin(theta)
    small = theta < _SMALL_ANGLE
    near_pi = theta > np.pi - _NEAR_PI
    generic = ~(small | near_pi)

    # theta / (2 sin theta), series 1/2 + t^2/12 + 7 t^4/720 near zero
    t2 = theta * theta
    with np.errstate(invalid="ignore", divide="ignore"):
        factor = np.where(
            generic,
            theta / np.where(generic, 2.0 * sin_t, 1.0),
            0.5 + t2 / 12.0 + 7.0 * t2 * t2 / 720.0,
        )
    out = np.empty(rot.shape[:-1])
    out[..., 0] = factor * (rot[..., 2, 1] - rot[..., 1, 2])
    out[..., 1] = factor * (rot[..., 0, 2] - rot[..., 2, 0])
    out[..., 2] = factor * (rot[..., 1, 0] - rot[..., 0, 1])

    if np.any(near_pi):
        # R ~ 2 a a^T - I at theta = pi; |axis| from the diagonal, signs from
        # the symmetric off-diagonals relative to the largest component
        diag = np.stack([rot[..., 0, 0], rot[..., 1, 1], rot[..., 2, 2]], axis=-1)
        axis_abs = np.sqrt(np.clip((diag + 1.0) / 2.0, 0.0, 1.0))
        k = np.argmax(axis_abs, axis=-1)
        iterator = np.ndindex(*k.shape) if k.shape else [()]
        for idx in iterator:
            if not near_pi[idx]:
                continue
            kk = int(k[idx])
            a = np.array(axis_abs[idx], copy=True)
            if a[kk] < 1e-12:
                a = np.array([1.0, 0.0, 0.0])
            else:
                sym = (rot[idx] + rot[idx].T) / 2.0
                for j in range(3):
                    if j != kk and sym[kk, j] < 0.0:
                        a[j] = -a[j]
            out[idx] = theta[idx] * a / np.linalg.norm(a)
    return out


def inv_right_jacobian(phi: np.ndarray) -> np.ndarray:
    """Inverse right Jacobian of SO(3): J_r(phi)^{-1} = I + S(phi)/2 + eta S(phi)^2.

    eta = 1/theta^2 - 1/(2 theta tan(theta/2)), finite at theta = pi, series
    below 1e-4 rad; valid for theta < 2 pi. Assembled via S^2 = phi phi^T -
    theta^2 I.
    """
    phi = np.asarray(phi, dtype=float)
    x, y, z = phi[..., 0], phi[..., 1], phi[..., 2]
    theta2 = x * x + y * y + z * z
    theta = np.sqrt(theta2)
    small = theta < 1e-4
    safe = np.where(small, 1.0, theta)
    with np.errstate(invalid="ignore", divide="ignore"):
        eta = np.where(
            small,
            1.0 / 12.0 + theta2 / 720.0,
            1.0 / (safe * safe) - 1.0 / (2.0 * safe * np.tan(safe / 2.0)),
        )
    out = np.empty(phi.shape[:-1] + (3, 3))
    exy = eta * x * y
    exz = eta * x * z
    eyz = eta * y * z
    out[..., 0, 0] = 1.0 - eta * (y * y + z * z)
    out[..., 0, 1] = exy - z / 2.0
    out[..., 0, 2] = exz + y / 2.0
    out[..., 1, 0] = exy + z / 2.0
    out[..., 1, 1] = 1.0 - eta * (x * x + z * z)
    out[..., 1, 2] = eyz - x / 2.0
    out[..., 2, 0] = exz - y / 2.0
    out[..., 2, 1] = eyz + x / 2.0
    out[..., 2, 2] = 1.0 - eta * (x * x + y * y)
    return out


def orthonormalize_frames(directors: np.ndarray) -> np.ndarray:
    """Re-orthonormalize director frames (rows d1, d2, d3).

    Gram-Schmidt anchored on the tangent row d3 so the material tangent is
    preserved; d1 is projected onto its orthogonal plane and d2 rebuilt from
    the cross product.
    """
    out = np.empty_like(directors)
    d3 = directors[..., 2, :]
    d3 = d3 / np.sqrt(np.einsum("...i,...i->...", d3, d3))[..., None]
    d1 = directors[..., 0, :]
    d1 = d1 - np.einsum("...i,...i->...", d1, d3)[..., None] * d3
    d1 = d1 / np.sqrt(np.einsum("...i,...i->...", d1, d1))[..., None]
    out[..., 0, :] = d1
    out[..., 1, :] = cross3(d3, d1)
    out[..., 2, :] = d3
    return out

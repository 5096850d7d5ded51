"""Vectorized numpy kernels; fallback when the compiled extension is absent.

Same contracts as the Cython versions in ``_kernels.pyx``: results agree to
better than 1e-12 so the backend choice never changes physics.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"


def stokes_maps(tau: np.ndarray, stack: np.ndarray):
    """Synthesize S0..S3 from density coefficients and mode amplitudes.

    tau[m, n, a, b] are coefficients over (mode x polarization) with a, b in
    (R, L); stack[m] is mode m's complex amplitude map.
    """
    # rho_ab(x, y) = sum_mn tau[m,n,a,b] f_m f_n*
    rho = np.einsum("mnab,myx,nyx->abyx", tau, stack, stack.conj(),
                    optimize=True)
    rr = rho[0, 0].real
    ll = rho[1, 1].real
    rl = rho[0, 1]
    s0 = rr + ll
    s1 = 2.0 * rl.real
    s2 = -2.0 * rl.imag
    s3 = rr - ll
    return (np.ascontiguousarray(s0), np.ascontiguousarray(s1),
            np.ascontiguousarray(s2), np.ascontiguousarray(s3))


def quadrature_sum(sx, sy, sz, mask, dx, dy):
    """Central-difference sum of s . (d_x s x d_y s) over valid interior cells.

    Returns (integral, n_used, n_interior); the 1/(4 pi) factor is applied by
    the caller.
    """
    ok = ~mask.astype(bool)
    valid = (ok[1:-1, 1:-1] & ok[1:-1, 2:] & ok[1:-1, :-2]
             & ok[2:, 1:-1] & ok[:-2, 1:-1])

    def grads(a):
        gx = (a[1:-1, 2:] - a[1:-1, :-2]) / (2.0 * dx)
        gy = (a[2:, 1:-1] - a[:-2, 1:-1]) / (2.0 * dy)
        return gx, gy

    xx, xy = grads(sx)
    yx, yy = grads(sy)
    zx, zy = grads(sz)
    triple = (sx[1:-1, 1:-1] * (yx * zy - zx * yy)
              + sy[1:-1, 1:-1] * (zx * xy - xx * zy)
              + sz[1:-1, 1:-1] * (xx * yy - yx * xy))
    total = float(np.sum(triple[valid], dtype=np.float64)) * dx * dy
    return total, int(valid.sum()), int(valid.size)


def solid_angle_sum(sx, sy, sz, mask):
    """Signed spherical area swept by the map, plaquette by plaquette.

    Each grid plaquette splits into two triangles whose signed solid angles
    accumulate; returns (omega, n_used, n_plaquettes, bad_i, bad_j) where a
    non-negative bad index flags the first degenerate (antipodal-spread)
    triangle encountered.
    """
    v = np.stack([sx, sy, sz], axis=-1)
    a = v[:-1, :-1]
    b = v[:-1, 1:]
    c = v[1:, 1:]
    d = v[1:, :-1]
    ok = ~mask.astype(bool)
    valid = ok[:-1, :-1] & ok[:-1, 1:] & ok[1:, 1:] & ok[1:, :-1]

    def tri(p, q, r):
        num = np.einsum("...i,...i->...", p, np.cross(q, r))
        den = (1.0 + np.einsum("...i,...i->...", p, q)
               + np.einsum("...i,...i->...", q, r)
               + np.einsum("...i,...i->...", r, p))
        return num, den

    n1, d1 = tri(a, b, c)
    n2, d2 = tri(a, c, d)
    degenerate = valid & ((d1 <= 1e-9) | (d2 <= 1e-9))
    if degenerate.any():
        i, j = np.unravel_index(int(np.argmax(degenerate)), degenerate.shape)
        return 0.0, 0, int(valid.size), int(i), int(j)
    omega = np.where(valid, 2.0 * np.arctan2(n1, d1)
                     + 2.0 * np.arctan2(n2, d2), 0.0)
    return (float(np.sum(omega, dtype=np.float64)), int(valid.sum()),
            int(valid.size), -1, -1)


def coverage_count(sx, sy, sz, mask, n_rings, n_phi):
    """Number of visited equal-area bins and the sample count."""
    ok = ~mask.astype(bool)
    z = np.clip(sz[ok], -1.0, 1.0)
    ring = np.clip(((1.0 - z) * 0.5 * n_rings).astype(np.int64), 0, n_rings - 1)
    phi = np.arctan2(sy[ok], sx[ok])
    lon = np.clip(((phi + np.pi) / (2.0 * np.pi) * n_phi).astype(np.int64),
                  0, n_phi - 1)
    visited = np.zeros(n_rings * n_phi, dtype=bool)
    visited[ring * n_phi + lon] = True
    return int(visited.sum()), int(ok.sum())

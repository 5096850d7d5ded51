# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled topology kernels: Stokes synthesis, Skyrme-number estimators and
Poincare-sphere coverage.  Mirrors ``_kernels_py`` to within 1e-12; sums use
Kahan compensation so evaluation order cannot leak into results.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, pi

cnp.import_array()

BACKEND = "cython"


def stokes_maps(cnp.complex128_t[:, :, :, ::1] tau,
                cnp.complex128_t[:, :, ::1] stack):
    cdef Py_ssize_t nm = stack.shape[0]
    cdef Py_ssize_t ny = stack.shape[1]
    cdef Py_ssize_t nx = stack.shape[2]
    s0_arr = np.empty((ny, nx), dtype=np.float64)
    s1_arr = np.empty((ny, nx), dtype=np.float64)
    s2_arr = np.empty((ny, nx), dtype=np.float64)
    s3_arr = np.empty((ny, nx), dtype=np.float64)
    cdef double[:, ::1] s0 = s0_arr, s1 = s1_arr, s2 = s2_arr, s3 = s3_arr
    cdef Py_ssize_t i, j, m, n
    cdef double complex rr, ll, rl, fmn
    with nogil:
        for i in range(ny):
            for j in range(nx):
                rr = 0
                ll = 0
                rl = 0
                for m in range(nm):
                    for n in range(nm):
                        fmn = stack[m, i, j] * stack[n, i, j].conjugate()
                        rr = rr + tau[m, n, 0, 0] * fmn
                        ll = ll + tau[m, n, 1, 1] * fmn
                        rl = rl + tau[m, n, 0, 1] * fmn
                s0[i, j] = rr.real + ll.real
                s1[i, j] = 2.0 * rl.real
                s2[i, j] = -2.0 * rl.imag
                s3[i, j] = rr.real - ll.real
    return s0_arr, s1_arr, s2_arr, s3_arr


def quadrature_sum(double[:, ::1] sx, double[:, ::1] sy, double[:, ::1] sz,
                   cnp.uint8_t[:, ::1] mask, double dx, double dy):
    cdef Py_ssize_t ny = sx.shape[0], nx = sx.shape[1]
    cdef Py_ssize_t i, j
    cdef double gxx, gxy, gyx, gyy, gzx, gzy, triple
    cdef double total = 0.0, comp = 0.0, y, t
    cdef long used = 0
    with nogil:
        for i in range(1, ny - 1):
            for j in range(1, nx - 1):
                if mask[i, j] or mask[i, j + 1] or mask[i, j - 1] \
                        or mask[i + 1, j] or mask[i - 1, j]:
                    continue
                gxx = (sx[i, j + 1] - sx[i, j - 1]) / (2.0 * dx)
                gyx = (sy[i, j + 1] - sy[i, j - 1]) / (2.0 * dx)
                gzx = (sz[i, j + 1] - sz[i, j - 1]) / (2.0 * dx)
                gxy = (sx[i + 1, j] - sx[i - 1, j]) / (2.0 * dy)
                gyy = (sy[i + 1, j] - sy[i - 1, j]) / (2.0 * dy)
                gzy = (sz[i + 1, j] - sz[i - 1, j]) / (2.0 * dy)
                triple = (sx[i, j] * (gyx * gzy - gzx * gyy)
                          + sy[i, j] * (gzx * gxy - gxx * gzy)
                          + sz[i, j] * (gxx * gyy - gyx * gxy))
                # Kahan update
                y = triple - comp
                t = total + y
                comp = (t - total) - y
                total = t
                used += 1
    return total * dx * dy, int(used), int((ny - 2) * (nx - 2))


cdef inline double _tri(double ax, double ay, double az,
                        double bx, double by, double bz,
                        double cx, double cy, double cz,
                        int* bad) nogil:
    cdef double num, den
    num = (ax * (by * cz - bz * cy) + ay * (bz * cx - bx * cz)
           + az * (bx * cy - by * cx))
    den = (1.0 + ax * bx + ay * by + az * bz
           + bx * cx + by * cy + bz * cz
           + cx * ax + cy * ay + cz * az)
    if den <= 1e-9:
        bad[0] = 1
        return 0.0
    return 2.0 * atan2(num, den)


def solid_angle_sum(double[:, ::1] sx, double[:, ::1] sy, double[:, ::1] sz,
                    cnp.uint8_t[:, ::1] mask):
    cdef Py_ssize_t ny = sx.shape[0], nx = sx.shape[1]
    cdef Py_ssize_t i, j
    cdef double total = 0.0, comp = 0.0, y, t, omega
    cdef long used = 0
    cdef long bad_i = -1, bad_j = -1
    cdef int bad = 0
    with nogil:
        for i in range(ny - 1):
            if bad_i >= 0:
                break
            for j in range(nx - 1):
                if mask[i, j] or mask[i, j + 1] or mask[i + 1, j + 1] \
                        or mask[i + 1, j]:
                    continue
                bad = 0
                omega = _tri(sx[i, j], sy[i, j], sz[i, j],
                             sx[i, j + 1], sy[i, j + 1], sz[i, j + 1],
                             sx[i + 1, j + 1], sy[i + 1, j + 1], sz[i + 1, j + 1],
                             &bad)
                omega += _tri(sx[i, j], sy[i, j], sz[i, j],
                              sx[i + 1, j + 1], sy[i + 1, j + 1], sz[i + 1, j + 1],
                              sx[i + 1, j], sy[i + 1, j], sz[i + 1, j],
                              &bad)
                if bad:
                    bad_i = i
                    bad_j = j
                    break
                y = omega - comp
                t = total + y
                comp = (t - total) - y
                total = t
                used += 1
    if bad_i >= 0:
        return 0.0, 0, int((ny - 1) * (nx - 1)), int(bad_i), int(bad_j)
    return total, int(used), int((ny - 1) * (nx - 1)), -1, -1


def coverage_count(double[:, ::1] sx, double[:, ::1] sy, double[:, ::1] sz,
                   cnp.uint8_t[:, ::1] mask, int n_rings, int n_phi):
    cdef Py_ssize_t ny = sx.shape[0], nx = sx.shape[1]
    cdef Py_ssize_t i, j
    cdef long ring, lon
    cdef long samples = 0
    cdef double z, phi
    visited_arr = np.zeros(n_rings * n_phi, dtype=np.uint8)
    cdef cnp.uint8_t[::1] visited = visited_arr
    with nogil:
        for i in range(ny):
            for j in range(nx):
                if mask[i, j]:
                    continue
                z = sz[i, j]
                if z > 1.0:
                    z = 1.0
                elif z < -1.0:
                    z = -1.0
                ring = <long>((1.0 - z) * 0.5 * n_rings)
                if ring >= n_rings:
                    ring = n_rings - 1
                elif ring < 0:
                    ring = 0
                phi = atan2(sy[i, j], sx[i, j])
                lon = <long>((phi + pi) / (2.0 * pi) * n_phi)
                if lon >= n_phi:
                    lon = n_phi - 1
                elif lon < 0:
                    lon = 0
                visited[ring * n_phi + lon] = 1
                samples += 1
    return int(visited_arr.sum()), int(samples)

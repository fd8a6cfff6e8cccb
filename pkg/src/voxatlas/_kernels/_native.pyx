# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the purepy kernels.

Arithmetic mirrors purepy.py expression-for-expression (and the build turns
off FP contraction) so both backends return bit-identical results.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor

cnp.import_array()

EDT_INF = np.int64(1) << 40
cdef cnp.int64_t C_EDT_INF = (<cnp.int64_t> 1) << 40


def edt_sq(mask):
    """Exact squared EDT via the per-axis lower-envelope scan."""
    f = np.where(np.asarray(mask) != 0, np.int64(0), EDT_INF)
    cdef int axis
    for axis in range(f.ndim):
        f = _pass_axis(f, axis)
    return f


def _pass_axis(f, axis):
    f = np.ascontiguousarray(np.moveaxis(f, axis, -1))
    shape = f.shape
    # no negative indexing here: module-level wraparound=False applies to
    # Python-object subscripts too
    n = shape[len(shape) - 1]
    lines = f.reshape(-1, n)
    out = np.empty_like(lines)
    _envelope_lines(lines, out)
    return np.moveaxis(out.reshape(shape), -1, axis)


cdef void _envelope_lines(cnp.int64_t[:, ::1] lines, cnp.int64_t[:, ::1] out):
    cdef Py_ssize_t n_lines = lines.shape[0]
    cdef Py_ssize_t n = lines.shape[1]
    cdef cnp.int64_t[::1] v = np.empty(n, dtype=np.int64)
    cdef double[::1] z = np.empty(n + 1, dtype=np.float64)
    cdef Py_ssize_t li, q, k
    cdef cnp.int64_t dq
    cdef double s
    cdef double BIG = 1e308

    for li in range(n_lines):
        k = 0
        v[0] = 0
        z[0] = -BIG
        z[1] = BIG
        for q in range(1, n):
            while True:
                s = (<double> ((lines[li, q] + q * q)
                               - (lines[li, v[k]] + v[k] * v[k]))) \
                    / (<double> (2 * q - 2 * v[k]))
                if s <= z[k]:
                    k -= 1
                else:
                    break
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = BIG
        k = 0
        for q in range(n):
            while z[k + 1] < q:
                k += 1
            dq = q - v[k]
            out[li, q] = dq * dq + lines[li, v[k]]


def closest_points(verts, faces, pts, chunk=256):
    """Closest point on a triangle soup for each query point."""
    cdef cnp.float64_t[:, ::1] V = np.ascontiguousarray(verts, dtype=np.float64)
    cdef cnp.int32_t[:, ::1] F = np.ascontiguousarray(faces, dtype=np.int32)
    p_arr = np.ascontiguousarray(np.atleast_2d(np.asarray(pts, dtype=np.float64)))
    cdef cnp.float64_t[:, ::1] P = p_arr

    cdef Py_ssize_t n_pts = P.shape[0]
    dist2 = np.empty(n_pts, dtype=np.float64)
    face_idx = np.empty(n_pts, dtype=np.int64)
    bary = np.empty((n_pts, 3), dtype=np.float64)
    cdef cnp.float64_t[::1] d2v = dist2
    cdef cnp.int64_t[::1] fiv = face_idx
    cdef cnp.float64_t[:, ::1] bv = bary

    cdef Py_ssize_t n_faces = F.shape[0]
    cdef Py_ssize_t pi, fi
    cdef double px, py, pz
    cdef double ax, ay, az, bx, by, bz, cx, cy, cz
    cdef double abx, aby, abz, acx, acy, acz
    cdef double d1, d2, d3, d4, d5, d6, va, vb, vc, denom
    cdef double u, v, w, t
    cdef double clx, cly, clz, dx, dy, dz, dd
    cdef double best_d2, bu, bvv, bw
    cdef Py_ssize_t best_f
    cdef double eps = 1e-300

    for pi in range(n_pts):
        px = P[pi, 0]
        py = P[pi, 1]
        pz = P[pi, 2]
        best_d2 = 1e308
        best_f = 0
        bu = 1.0
        bvv = 0.0
        bw = 0.0
        for fi in range(n_faces):
            ax = V[F[fi, 0], 0]; ay = V[F[fi, 0], 1]; az = V[F[fi, 0], 2]
            bx = V[F[fi, 1], 0]; by = V[F[fi, 1], 1]; bz = V[F[fi, 1], 2]
            cx = V[F[fi, 2], 0]; cy = V[F[fi, 2], 1]; cz = V[F[fi, 2], 2]
            abx = bx - ax; aby = by - ay; abz = bz - az
            acx = cx - ax; acy = cy - ay; acz = cz - az
            d1 = abx * (px - ax) + aby * (py - ay) + abz * (pz - az)
            d2 = acx * (px - ax) + acy * (py - ay) + acz * (pz - az)
            d3 = abx * (px - bx) + aby * (py - by) + abz * (pz - bz)
            d4 = acx * (px - bx) + acy * (py - by) + acz * (pz - bz)
            d5 = abx * (px - cx) + aby * (py - cy) + abz * (pz - cz)
            d6 = acx * (px - cx) + acy * (py - cy) + acz * (pz - cz)
            vc = d1 * d4 - d3 * d2
            vb = d5 * d2 - d1 * d6
            va = d3 * d6 - d5 * d4

            if d1 <= 0.0 and d2 <= 0.0:
                u = 1.0; v = 0.0; w = 0.0
            elif d3 >= 0.0 and d4 <= d3:
                u = 0.0; v = 1.0; w = 0.0
            elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                t = d1 / (d1 - d3 + eps)
                u = 1.0 - t; v = t; w = 0.0
            elif d6 >= 0.0 and d5 <= d6:
                u = 0.0; v = 0.0; w = 1.0
            elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                t = d2 / (d2 - d6 + eps)
                u = 1.0 - t; v = 0.0; w = t
            elif va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0:
                t = (d4 - d3) / ((d4 - d3) + (d5 - d6) + eps)
                u = 0.0; v = 1.0 - t; w = t
            else:
                denom = va + vb + vc
                v = vb / (denom + eps)
                w = vc / (denom + eps)
                u = 1.0 - v - w

            clx = u * ax + v * bx + w * cx
            cly = u * ay + v * by + w * cy
            clz = u * az + v * bz + w * cz
            dx = px - clx
            dy = py - cly
            dz = pz - clz
            dd = dx * dx + dy * dy + dz * dz
            if dd < best_d2:
                best_d2 = dd
                best_f = fi
                bu = u; bvv = v; bw = w
        d2v[pi] = best_d2
        fiv[pi] = best_f
        bv[pi, 0] = bu
        bv[pi, 1] = bvv
        bv[pi, 2] = bw
    return dist2, face_idx, bary


def rasterize_mask(verts, faces, dims, origin, spacing, ray_axis=2):
    """Solid voxelization by ray-crossing parity along one grid axis."""
    cdef cnp.float64_t[:, ::1] V = np.ascontiguousarray(verts, dtype=np.float64)
    cdef cnp.int32_t[:, ::1] F = np.ascontiguousarray(faces, dtype=np.int32)
    dims_t = tuple(int(d) for d in dims)
    origin_a = np.asarray(origin, dtype=np.float64)
    spacing_a = np.asarray(spacing, dtype=np.float64)
    jitter_a = spacing_a * np.array([1e-7, 2e-7, 3e-7])

    cdef int r = int(ray_axis)
    cdef int u_ax = 1 if r == 0 else 0
    cdef int v_ax = 1 if r == 2 else 2
    cdef Py_ssize_t nu = dims_t[u_ax]
    cdef Py_ssize_t nv = dims_t[v_ax]
    cdef Py_ssize_t nr = dims_t[r]
    cdef double ou = origin_a[u_ax] + jitter_a[u_ax]
    cdef double ov = origin_a[v_ax] + jitter_a[v_ax]
    cdef double orr = origin_a[r] + jitter_a[r]
    cdef double su = spacing_a[u_ax]
    cdef double sv = spacing_a[v_ax]
    cdef double sr = spacing_a[r]

    diff = np.zeros((nu, nv, nr + 1), dtype=np.int32)
    cdef cnp.int32_t[:, :, ::1] D = diff

    cdef Py_ssize_t n_faces = F.shape[0]
    cdef Py_ssize_t fi, iu, iv, kend
    cdef Py_ssize_t iu_lo, iu_hi, iv_lo, iv_hi
    cdef double au, av, ar, bu, bvv, br, cu, cv, cr
    cdef double nrm_r, nrm_u, nrm_v
    cdef double mnu, mxu, mnv, mxv
    cdef double qu, qv, e0, e1, e2, xr, s
    cdef bint inside

    for fi in range(n_faces):
        au = V[F[fi, 0], u_ax]; av = V[F[fi, 0], v_ax]; ar = V[F[fi, 0], r]
        bu = V[F[fi, 1], u_ax]; bvv = V[F[fi, 1], v_ax]; br = V[F[fi, 1], r]
        cu = V[F[fi, 2], u_ax]; cv = V[F[fi, 2], v_ax]; cr = V[F[fi, 2], r]

        nrm_r = (bu - au) * (cv - av) - (bvv - av) * (cu - au)
        if nrm_r == 0.0:
            continue

        mnu = min(au, min(bu, cu)); mxu = max(au, max(bu, cu))
        mnv = min(av, min(bvv, cv)); mxv = max(av, max(bvv, cv))
        iu_lo = <Py_ssize_t> ceil((mnu - ou) / su - 0.5)
        iu_hi = <Py_ssize_t> floor((mxu - ou) / su - 0.5)
        iv_lo = <Py_ssize_t> ceil((mnv - ov) / sv - 0.5)
        iv_hi = <Py_ssize_t> floor((mxv - ov) / sv - 0.5)
        if iu_lo < 0:
            iu_lo = 0
        if iu_hi > nu - 1:
            iu_hi = nu - 1
        if iv_lo < 0:
            iv_lo = 0
        if iv_hi > nv - 1:
            iv_hi = nv - 1
        if iu_lo > iu_hi or iv_lo > iv_hi:
            continue

        nrm_u = (bvv - av) * (cr - ar) - (br - ar) * (cv - av)
        nrm_v = (br - ar) * (cu - au) - (bu - au) * (cr - ar)

        for iu in range(iu_lo, iu_hi + 1):
            qu = ou + su * (iu + 0.5)
            for iv in range(iv_lo, iv_hi + 1):
                qv = ov + sv * (iv + 0.5)
                e0 = (bu - au) * (qv - av) - (bvv - av) * (qu - au)
                e1 = (cu - bu) * (qv - bvv) - (cv - bvv) * (qu - bu)
                e2 = (au - cu) * (qv - cv) - (av - cv) * (qu - cu)
                inside = ((e0 > 0.0 and e1 > 0.0 and e2 > 0.0)
                          or (e0 < 0.0 and e1 < 0.0 and e2 < 0.0))
                if not inside:
                    continue
                xr = ar - (nrm_u * (qu - au) + nrm_v * (qv - av)) / nrm_r
                s = (xr - orr) / sr - 0.5
                kend = <Py_ssize_t> ceil(s)
                if kend < 0:
                    kend = 0
                if kend > nr:
                    kend = nr
                if kend > 0:
                    D[iu, iv, 0] += 1
                    D[iu, iv, kend] -= 1

    counts = np.cumsum(diff[:, :, :-1], axis=2)
    mask_uvr = (counts & 1).astype(np.uint8)

    if r == 2:
        return mask_uvr
    if r == 0:
        return np.ascontiguousarray(np.transpose(mask_uvr, (2, 0, 1)))
    return np.ascontiguousarray(np.transpose(mask_uvr, (0, 2, 1)))

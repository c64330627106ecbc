# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Contracts and tie-breaking match ``pykernels`` exactly; see there for
the reference semantics.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def conv2d_forward(x, w, b, int pad=1):
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, :, :, ::1] xv = x
    cdef double[:, :, :, ::1] wv = w
    cdef double[::1] bv = b
    cdef Py_ssize_t N = xv.shape[0], C = xv.shape[1], H = xv.shape[2], W = xv.shape[3]
    cdef Py_ssize_t F = wv.shape[0], KH = wv.shape[2], KW = wv.shape[3]
    cdef Py_ssize_t OH = H + 2 * pad - KH + 1, OW = W + 2 * pad - KW + 1
    y = np.empty((N, F, OH, OW), dtype=np.float64)
    cdef double[:, :, :, ::1] yv = y
    cdef Py_ssize_t n, f, oi, oj, c, i, j, ii, jj
    cdef double acc
    with nogil:
        for n in range(N):
            for f in range(F):
                for oi in range(OH):
                    for oj in range(OW):
                        acc = bv[f]
                        for c in range(C):
                            for i in range(KH):
                                ii = oi + i - pad
                                if ii < 0 or ii >= H:
                                    continue
                                for j in range(KW):
                                    jj = oj + j - pad
                                    if 0 <= jj < W:
                                        acc += xv[n, c, ii, jj] * wv[f, c, i, j]
                        yv[n, f, oi, oj] = acc
    return y


def conv2d_backward(x, w, dy, int pad=1):
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    dy = np.ascontiguousarray(dy, dtype=np.float64)
    cdef double[:, :, :, ::1] xv = x
    cdef double[:, :, :, ::1] wv = w
    cdef double[:, :, :, ::1] dyv = dy
    cdef Py_ssize_t N = xv.shape[0], C = xv.shape[1], H = xv.shape[2], W = xv.shape[3]
    cdef Py_ssize_t F = wv.shape[0], KH = wv.shape[2], KW = wv.shape[3]
    cdef Py_ssize_t OH = dyv.shape[2], OW = dyv.shape[3]
    dx = np.zeros((N, C, H, W), dtype=np.float64)
    dw = np.zeros((F, C, KH, KW), dtype=np.float64)
    db = np.zeros(F, dtype=np.float64)
    cdef double[:, :, :, ::1] dxv = dx
    cdef double[:, :, :, ::1] dwv = dw
    cdef double[::1] dbv = db
    cdef Py_ssize_t n, f, oi, oj, c, i, j, ii, jj
    cdef double g
    with nogil:
        for n in range(N):
            for f in range(F):
                for oi in range(OH):
                    for oj in range(OW):
                        g = dyv[n, f, oi, oj]
                        dbv[f] += g
                        for c in range(C):
                            for i in range(KH):
                                ii = oi + i - pad
                                if ii < 0 or ii >= H:
                                    continue
                                for j in range(KW):
                                    jj = oj + j - pad
                                    if 0 <= jj < W:
                                        dwv[f, c, i, j] += g * xv[n, c, ii, jj]
                                        dxv[n, c, ii, jj] += g * wv[f, c, i, j]
    return dx, dw, db


def maxpool2_forward(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, :, :, ::1] xv = x
    cdef Py_ssize_t N = xv.shape[0], C = xv.shape[1], H = xv.shape[2], W = xv.shape[3]
    cdef Py_ssize_t OH = H // 2, OW = W // 2
    y = np.empty((N, C, OH, OW), dtype=np.float64)
    idx = np.empty((N, C, OH, OW), dtype=np.int32)
    cdef double[:, :, :, ::1] yv = y
    cdef int[:, :, :, ::1] iv = idx
    cdef Py_ssize_t n, c, oi, oj, di, dj
    cdef double best, v
    cdef int k, bestk
    with nogil:
        for n in range(N):
            for c in range(C):
                for oi in range(OH):
                    for oj in range(OW):
                        best = xv[n, c, 2 * oi, 2 * oj]
                        bestk = 0
                        k = 0
                        for di in range(2):
                            for dj in range(2):
                                v = xv[n, c, 2 * oi + di, 2 * oj + dj]
                                if v > best:
                                    best = v
                                    bestk = k
                                k += 1
                        yv[n, c, oi, oj] = best
                        iv[n, c, oi, oj] = bestk
    return y, idx


def maxpool2_backward(dy, idx, Py_ssize_t h, Py_ssize_t w):
    dy = np.ascontiguousarray(dy, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int32)
    cdef double[:, :, :, ::1] dyv = dy
    cdef int[:, :, :, ::1] iv = idx
    cdef Py_ssize_t N = dyv.shape[0], C = dyv.shape[1], OH = dyv.shape[2], OW = dyv.shape[3]
    dx = np.zeros((N, C, h, w), dtype=np.float64)
    cdef double[:, :, :, ::1] dxv = dx
    cdef Py_ssize_t n, c, oi, oj
    cdef int k
    with nogil:
        for n in range(N):
            for c in range(C):
                for oi in range(OH):
                    for oj in range(OW):
                        k = iv[n, c, oi, oj]
                        dxv[n, c, 2 * oi + k // 2, 2 * oj + k % 2] += dyv[n, c, oi, oj]
    return dx


def label_components(mask):
    mask = np.ascontiguousarray(np.asarray(mask, dtype=bool), dtype=np.uint8)
    cdef unsigned char[:, ::1] mv = mask
    cdef Py_ssize_t rows = mv.shape[0], cols = mv.shape[1]
    labels = np.zeros((rows, cols), dtype=np.int32)
    cdef int[:, ::1] lv = labels
    stack_r = np.empty(rows * cols, dtype=np.intp)
    stack_c = np.empty(rows * cols, dtype=np.intp)
    cdef Py_ssize_t[::1] sr = stack_r
    cdef Py_ssize_t[::1] sc = stack_c
    cdef Py_ssize_t r0, c0, r, c, rr, cc, dr, dc, top
    cdef int n = 0
    with nogil:
        for r0 in range(rows):
            for c0 in range(cols):
                if mv[r0, c0] == 0 or lv[r0, c0] != 0:
                    continue
                n += 1
                top = 0
                sr[top] = r0
                sc[top] = c0
                lv[r0, c0] = n
                top += 1
                while top > 0:
                    top -= 1
                    r = sr[top]
                    c = sc[top]
                    for dr in range(-1, 2):
                        rr = r + dr
                        if rr < 0 or rr >= rows:
                            continue
                        for dc in range(-1, 2):
                            if dr == 0 and dc == 0:
                                continue
                            cc = c + dc
                            if cc < 0 or cc >= cols:
                                continue
                            if mv[rr, cc] != 0 and lv[rr, cc] == 0:
                                lv[rr, cc] = n
                                sr[top] = rr
                                sc[top] = cc
                                top += 1
    return labels, n

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numeric kernels. Mirrors ``_kernels_py`` signature for signature."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2

cnp.import_array()

MARGIN = 0
VARIANCE = 1
ENTROPY = 2


cdef inline double _iou(const double[:, ::1] a, Py_ssize_t i,
                        const double[:, ::1] b, Py_ssize_t j) noexcept nogil:
    cdef double iw = min(a[i, 2], b[j, 2]) - max(a[i, 0], b[j, 0])
    cdef double ih = min(a[i, 3], b[j, 3]) - max(a[i, 1], b[j, 1])
    if iw < 0.0:
        iw = 0.0
    if ih < 0.0:
        ih = 0.0
    cdef double inter = iw * ih
    cdef double area_a = (a[i, 2] - a[i, 0]) * (a[i, 3] - a[i, 1])
    cdef double area_b = (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1])
    return inter / (area_a + area_b - inter)


def box_scores(probs, int kind):
    cdef const double[:, ::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef Py_ssize_t M = p.shape[0], D = p.shape[1], i, d
    out_arr = np.zeros(M, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double top1, top2, v, mean, acc, log_d
    if kind < 0 or kind > 2:
        raise ValueError(f"unknown score kind {kind}")
    if M == 0:
        return out_arr
    with nogil:
        if kind == 0:
            for i in range(M):
                top1 = -1.0
                top2 = -1.0
                for d in range(D):
                    v = p[i, d]
                    if v > top1:
                        top2 = top1
                        top1 = v
                    elif v > top2:
                        top2 = v
                out[i] = 1.0 - (top1 - top2)
        elif kind == 1:
            for i in range(M):
                mean = 0.0
                for d in range(D):
                    mean += p[i, d]
                mean = mean / D
                acc = 0.0
                for d in range(D):
                    acc += (p[i, d] - mean) * (p[i, d] - mean)
                out[i] = 1.0 - acc / (D - 1)
        else:
            log_d = log2(<double>D)
            for i in range(M):
                acc = 0.0
                for d in range(D):
                    v = p[i, d]
                    if v > 0.0:
                        acc += v * log2(v)
                v = -acc / log_d
                if v < 0.0:
                    v = 0.0
                elif v > 1.0:
                    v = 1.0
                out[i] = v
    return out_arr


def iou_matrix(a, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(-1, 4))
    cdef const double[:, ::1] bv = np.ascontiguousarray(np.asarray(b, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], i, j
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            for j in range(m):
                out[i, j] = _iou(av, i, bv, j)
    return out_arr


def greedy_match(det_group, det_boxes, det_conf, gt_group, gt_boxes, double threshold):
    det_conf_arr = np.ascontiguousarray(det_conf, dtype=np.float64)
    cdef const cnp.int64_t[::1] dg = np.ascontiguousarray(det_group, dtype=np.int64)
    cdef const double[:, ::1] db = np.ascontiguousarray(np.asarray(det_boxes, dtype=np.float64).reshape(-1, 4))
    gt_group_arr = np.ascontiguousarray(gt_group, dtype=np.int64)
    gt_sort = np.argsort(gt_group_arr, kind="stable").astype(np.int64)
    cdef const cnp.int64_t[::1] gorder = gt_sort
    cdef const cnp.int64_t[::1] gsorted = np.ascontiguousarray(gt_group_arr[gt_sort])
    cdef const double[:, ::1] gb = np.ascontiguousarray(np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t n = det_conf_arr.shape[0], m = gsorted.shape[0]
    tp_arr = np.zeros(n, dtype=np.int8)
    matched_arr = np.full(n, -1, dtype=np.int64)
    if n == 0 or m == 0:
        return tp_arr, matched_arr
    cdef const cnp.int64_t[::1] order = np.argsort(-det_conf_arr, kind="stable").astype(np.int64)
    cdef cnp.int8_t[::1] tp = tp_arr
    cdef cnp.int64_t[::1] matched = matched_arr
    taken_arr = np.zeros(m, dtype=np.uint8)
    cdef cnp.uint8_t[::1] taken = taken_arr
    cdef Py_ssize_t k, i, lo, hi, mid, s, best_s
    cdef cnp.int64_t g
    cdef double best, v
    with nogil:
        for k in range(n):
            i = order[k]
            g = dg[i]
            lo = 0
            hi = m
            while lo < hi:
                mid = (lo + hi) // 2
                if gsorted[mid] < g:
                    lo = mid + 1
                else:
                    hi = mid
            best = -1.0
            best_s = -1
            s = lo
            while s < m and gsorted[s] == g:
                if not taken[s]:
                    v = _iou(db, i, gb, gorder[s])
                    if v > best:
                        best = v
                        best_s = s
                s += 1
            if best_s >= 0 and best >= threshold:
                taken[best_s] = 1
                tp[i] = 1
                matched[i] = gorder[best_s]
    return tp_arr, matched_arr


def average_precision(conf, tp, long n_gt, bint use_07_metric=False):
    if n_gt <= 0:
        return float("nan")
    conf_arr = np.ascontiguousarray(conf, dtype=np.float64)
    cdef Py_ssize_t n = conf_arr.shape[0], k, t
    if n == 0:
        return 0.0
    cdef const cnp.int64_t[::1] order = np.argsort(-conf_arr, kind="stable").astype(np.int64)
    cdef const double[::1] tpv = np.ascontiguousarray(tp, dtype=np.float64)
    prec_arr = np.empty(n, dtype=np.float64)
    rec_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] prec = prec_arr
    cdef double[::1] rec = rec_arr
    cdef double ctp = 0.0, cfp = 0.0, env, total = 0.0, thr, best
    with nogil:
        for k in range(n):
            if tpv[order[k]] > 0.0:
                ctp += 1.0
            else:
                cfp += 1.0
            prec[k] = ctp / (ctp + cfp)
            rec[k] = ctp / n_gt
        if use_07_metric:
            for t in range(11):
                thr = t / 10.0
                best = -1.0
                for k in range(n):
                    if rec[k] >= thr and prec[k] > best:
                        best = prec[k]
                if best > 0.0:
                    total += best
        else:
            env = 0.0
            for k in range(n - 1, -1, -1):
                if prec[k] > env:
                    env = prec[k]
                if tpv[order[k]] > 0.0:
                    total += env
    if use_07_metric:
        return total / 11.0
    return total / n_gt

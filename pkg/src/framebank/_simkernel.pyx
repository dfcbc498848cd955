# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loop of the most-similar-token search.

Blocks of the (tokens x memory) similarity product are computed with
BLAS dgemm into a reused scratch buffer and consumed by a fused
normalize/argmax scan, so the full score matrix is never materialized
and each block is touched exactly once. Ties keep the lowest memory row
index; zero-norm rows score 0 under the normalized metric.
"""

import numpy as np

from scipy.linalg.cython_blas cimport dgemm


def argmax_similarity(
    double[:, ::1] cur,
    double[::1] cur_norms,
    double[:, ::1] mem,
    double[::1] mem_norms,
    bint normalize,
    Py_ssize_t[::1] out_idx,
    double[::1] out_score,
):
    cdef Py_ssize_t n = cur.shape[0]
    cdef Py_ssize_t d = cur.shape[1]
    cdef Py_ssize_t m = mem.shape[0]
    cdef Py_ssize_t block = 512
    cdef Py_ssize_t j0, i, jj, b
    cdef double score, na, nb, dot
    cdef int bi, ni, di, ldc
    cdef double one = 1.0, zero = 0.0
    cdef char trans_t = b'T', trans_n = b'N'

    if mem.shape[1] != d:
        raise ValueError("dimension mismatch between current and memory tokens")
    if m == 0:
        raise ValueError("memory is empty")

    scratch_arr = np.empty(n * min(block, m), dtype=np.float64)
    cdef double[::1] scratch = scratch_arr

    ni = <int> n
    di = <int> d
    with nogil:
        j0 = 0
        while j0 < m:
            b = min(block, m - j0)
            bi = <int> b
            ldc = bi
            # scratch (column-major b x n) = mem[j0:j0+b] @ cur^T, i.e.
            # scratch[jj + i*b] holds <cur_i, mem_{j0+jj}>
            dgemm(
                &trans_t, &trans_n, &bi, &ni, &di,
                &one, &mem[j0, 0], &di, &cur[0, 0], &di,
                &zero, &scratch[0], &ldc,
            )
            for i in range(n):
                na = cur_norms[i]
                for jj in range(b):
                    dot = scratch[i * b + jj]
                    if normalize:
                        nb = mem_norms[j0 + jj]
                        score = 0.0 if (na == 0.0 or nb == 0.0) else dot / (na * nb)
                    else:
                        score = dot
                    if (j0 == 0 and jj == 0) or score > out_score[i]:
                        out_score[i] = score
                        out_idx[i] = j0 + jj
            j0 += block

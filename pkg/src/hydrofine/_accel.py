"""Index kernels for ladder-operator assembly on the occupation basis.

Each kernel has a numba implementation and a pure-numpy one with identical
output (same entries, same order). The numba path is used when numba imports
and the environment variable HYDROFINE_NUMBA is not set to 0/false/no.

Occupation-state layout for n_max <= 2 over M modes:
    0                     vacuum
    1 + m                 one photon in mode m
    1 + M + pair(a, b)    two photons, a <= b
with pair(a, b) = a*M - a*(a-1)/2 + (b - a).
"""
import os

import numpy as np

_flag = os.environ.get("HYDROFINE_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "no", "off")

try:
    if not _want_numba:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def n_states(M, n_max):
    if n_max == 0 or M == 0:
        return 1
    if n_max == 1:
        return 1 + M
    return 1 + M + M * (M + 1) // 2


def pair_index(a, b, M):
    """Vectorized pair(a, b) for a <= b."""
    return a * M - a * (a - 1) // 2 + (b - a)


def occupations(M, n_max):
    """(n_states, 2) array of occupied modes, -1 marking an empty slot."""
    occ = np.full((n_states(M, n_max), 2), -1, dtype=np.int64)
    if M == 0 or n_max == 0:
        return occ
    occ[1:1 + M, 0] = np.arange(M)
    if n_max >= 2:
        a, b = np.triu_indices(M)
        occ[1 + M:, 0] = a
        occ[1 + M:, 1] = b
    return occ


# ---------------------------------------------------------------- numpy path

def _creation_numpy(M, n_max):
    if M == 0 or n_max == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e, e, np.zeros(0)
    m = np.arange(M, dtype=np.int64)
    tgt = [1 + m]
    src = [np.zeros(M, dtype=np.int64)]
    mode = [m]
    amp = [np.ones(M)]
    if n_max >= 2:
        # source one-photon state n, created mode c
        n, c = np.meshgrid(m, m, indexing="ij")
        n = n.ravel()
        c = c.ravel()
        lo = np.minimum(n, c)
        hi = np.maximum(n, c)
        tgt.append(1 + M + pair_index(lo, hi, M))
        src.append(1 + n)
        mode.append(c)
        amp.append(np.where(n == c, np.sqrt(2.0), 1.0))
    return (np.concatenate(tgt), np.concatenate(src), np.concatenate(mode),
            np.concatenate(amp))


def _hop_numpy(M, n_max, C):
    """Entries of sum_{m,n} C[m,n] a†_m a_n as (rows, cols, vals)."""
    C = np.asarray(C)
    rows, cols, vals = [], [], []
    if M == 0 or n_max == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e, np.zeros(0, dtype=C.dtype)
    m = np.arange(M, dtype=np.int64)
    mm, nn = np.meshgrid(m, m, indexing="ij")
    rows.append((1 + mm).ravel())
    cols.append((1 + nn).ravel())
    vals.append(C.ravel())
    if n_max >= 2:
        a, b = np.triu_indices(M)
        src = 1 + M + pair_index(a, b, M)
        # remove a (always), then remove b if distinct
        for removed, rest, occ_rm in ((a, b, np.where(a == b, 2.0, 1.0)),
                                      (b, a, None)):
            keep = slice(None) if occ_rm is not None else (a != b)
            r_rm = removed[keep]
            r_rest = rest[keep]
            r_src = src[keep]
            amp_rm = np.sqrt(occ_rm) if occ_rm is not None else np.ones(r_rm.shape[0])
            # add mode c to the leftover single photon r_rest
            lo = np.minimum(r_rest[:, None], m[None, :])
            hi = np.maximum(r_rest[:, None], m[None, :])
            tgt = 1 + M + pair_index(lo, hi, M)
            amp_add = np.where(r_rest[:, None] == m[None, :], np.sqrt(2.0), 1.0)
            rows.append(tgt.ravel())
            cols.append(np.repeat(r_src, M))
            vals.append((C[m[None, :], r_rm[:, None]] * amp_rm[:, None] * amp_add).ravel())
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _creation_numba(M, n_max):
        n1 = M
        n2 = M * M if n_max >= 2 else 0
        tgt = np.empty(n1 + n2, dtype=np.int64)
        src = np.empty(n1 + n2, dtype=np.int64)
        mode = np.empty(n1 + n2, dtype=np.int64)
        amp = np.empty(n1 + n2)
        for c in range(M):
            tgt[c] = 1 + c
            src[c] = 0
            mode[c] = c
            amp[c] = 1.0
        if n_max >= 2:
            p = n1
            for n in range(M):
                for c in range(M):
                    lo = min(n, c)
                    hi = max(n, c)
                    tgt[p] = 1 + M + lo * M - lo * (lo - 1) // 2 + (hi - lo)
                    src[p] = 1 + n
                    mode[p] = c
                    amp[p] = np.sqrt(2.0) if n == c else 1.0
                    p += 1
        return tgt, src, mode, amp

    @njit(cache=True)
    def _hop_numba(M, n_max, C):
        size = M * M
        if n_max >= 2:
            n_pairs = M * (M + 1) // 2
            n_dist = M * (M - 1) // 2
            size += (n_pairs + n_dist) * M
        rows = np.empty(size, dtype=np.int64)
        cols = np.empty(size, dtype=np.int64)
        vals = np.empty(size, dtype=C.dtype)
        p = 0
        for m in range(M):
            for n in range(M):
                rows[p] = 1 + m
                cols[p] = 1 + n
                vals[p] = C[m, n]
                p += 1
        if n_max >= 2:
            # first pass removes a, second pass removes b (a != b); same order as numpy
            for sweep in range(2):
                for a in range(M):
                    for b in range(a, M):
                        if sweep == 1 and a == b:
                            continue
                        src = 1 + M + a * M - a * (a - 1) // 2 + (b - a)
                        if sweep == 0:
                            rm = a
                            rest = b
                            amp_rm = np.sqrt(2.0) if a == b else 1.0
                        else:
                            rm = b
                            rest = a
                            amp_rm = 1.0
                        for c in range(M):
                            lo = min(rest, c)
                            hi = max(rest, c)
                            rows[p] = 1 + M + lo * M - lo * (lo - 1) // 2 + (hi - lo)
                            cols[p] = src
                            amp_add = np.sqrt(2.0) if rest == c else 1.0
                            vals[p] = C[c, rm] * amp_rm * amp_add
                            p += 1
        return rows, cols, vals


def creation_transitions(M, n_max, backend=None):
    """All single-creation transitions a†_m: (target, source, mode, amplitude)."""
    backend = backend or BACKEND
    if backend == "numba" and HAVE_NUMBA and M > 0 and n_max > 0:
        return _creation_numba(M, n_max)
    return _creation_numpy(M, n_max)


def hop_entries(M, n_max, C, backend=None):
    """Sparse entries of sum_{m,n} C[m,n] a†_m a_n on the photon space."""
    backend = backend or BACKEND
    C = np.ascontiguousarray(C)
    if backend == "numba" and HAVE_NUMBA and M > 0 and n_max > 0:
        return _hop_numba(M, n_max, C)
    return _hop_numpy(M, n_max, C)


def pair_creation_entries(M, n_max, D):
    """Entries of sum_{m,n} D[m,n] a†_m a†_n acting on the vacuum (D symmetric)."""
    if n_max < 2 or M == 0:
        e = np.zeros(0, dtype=np.int64)
        return e, e, np.zeros(0, dtype=np.asarray(D).dtype)
    a, b = np.triu_indices(M)
    vals = np.where(a == b, np.sqrt(2.0) * D[a, a], D[a, b] + D[b, a])
    rows = 1 + M + pair_index(a, b, M)
    return rows, np.zeros_like(rows), vals

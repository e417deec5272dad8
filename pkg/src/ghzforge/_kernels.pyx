# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled frame-sampling kernel.

Same per-shot contract as the NumPy fallback (see ``_kernels_py``); the
inner loop runs without the GIL so shot ranges parallelize across Python
threads.
"""

from libc.stdint cimport int8_t, int32_t, uint64_t

BACKEND_NAME = "compiled"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV53 = 1.0 / 9007199254740992.0  # 2**-53


cdef inline uint64_t mix64(uint64_t x) nogil:
    x ^= x >> 30
    x *= 0xBF58476D1CE4E5B9ULL
    x ^= x >> 27
    x *= 0x94D049BB133111EBULL
    x ^= x >> 31
    return x


def sample_block(
    setting_key,
    shot0,
    double[::1] site_p,
    int8_t[::1] site_kind,
    int32_t[::1] site_tab,
    uint64_t[:, :, ::1] fixed_eff,
    uint64_t[:, :, :, ::1] gate_eff,
    uint64_t[:, ::1] out_x,
    uint64_t[:, ::1] out_z,
):
    cdef uint64_t key0 = <uint64_t> setting_key
    cdef uint64_t base = <uint64_t> shot0
    cdef Py_ssize_t n_shots = out_x.shape[0]
    cdef Py_ssize_t n_words = out_x.shape[1]
    cdef Py_ssize_t n_sites = site_p.shape[0]
    cdef Py_ssize_t i, s, w, tab
    cdef uint64_t shot_key, r
    cdef double u, p
    cdef long k
    with nogil:
        for i in range(n_shots):
            shot_key = mix64(key0 + (base + <uint64_t> i + 1ULL) * GOLDEN)
            for w in range(n_words):
                out_x[i, w] = 0
                out_z[i, w] = 0
            for s in range(n_sites):
                r = mix64(shot_key + (<uint64_t> s + 1ULL) * GOLDEN)
                u = <double> (r >> 11) * INV53
                p = site_p[s]
                if u >= p:
                    continue
                tab = site_tab[s]
                if site_kind[s] == 0:
                    for w in range(n_words):
                        out_x[i, w] ^= fixed_eff[tab, 0, w]
                        out_z[i, w] ^= fixed_eff[tab, 1, w]
                else:
                    k = <long> ((u / p) * 15.0)
                    if k > 14:
                        k = 14
                    for w in range(n_words):
                        out_x[i, w] ^= gate_eff[tab, k, 0, w]
                        out_z[i, w] ^= gate_eff[tab, k, 1, w]

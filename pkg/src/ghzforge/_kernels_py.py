"""Pure-NumPy frame-sampling kernel (fallback for ghzforge._kernels).

Implements exactly the per-shot contract of ``FramePlan.sample_one``:
shot i's substream key is SplitMix64(setting_key + (shot0+i+1)*GOLDEN);
site s consumes draw s; a firing gate site reuses its draw, scaled by the
site probability, to pick one of the 15 two-qubit Paulis.  All arithmetic
is uint64/IEEE-double identical to the compiled kernel, so both backends
produce the same bits.
"""

from __future__ import annotations

import numpy as np

from .rng import GOLDEN, MASK64, mix64_array

BACKEND_NAME = "numpy"

_U64_1 = np.uint64(1)
_SHIFT11 = np.uint64(11)
_INV53 = 2.0**-53


def sample_block(
    setting_key: int,
    shot0: int,
    site_p: np.ndarray,
    site_kind: np.ndarray,
    site_tab: np.ndarray,
    fixed_eff: np.ndarray,
    gate_eff: np.ndarray,
    out_x: np.ndarray,
    out_z: np.ndarray,
    chunk: int = 8192,
) -> None:
    n_shots = out_x.shape[0]
    n_sites = site_p.shape[0]
    for lo in range(0, n_shots, chunk):
        hi = min(lo + chunk, n_shots)
        idx = np.arange(shot0 + lo + 1, shot0 + hi + 1, dtype=np.uint64)
        keys = mix64_array(np.uint64(setting_key) + idx * np.uint64(GOLDEN))
        xacc = np.zeros((hi - lo, out_x.shape[1]), dtype=np.uint64)
        zacc = np.zeros_like(xacc)
        for s in range(n_sites):
            g = np.uint64(((s + 1) * GOLDEN) & MASK64)
            u = (mix64_array(keys + g) >> _SHIFT11) * _INV53
            p = site_p[s]
            fired = u < p
            if not fired.any():
                continue
            tab = site_tab[s]
            if site_kind[s] == 0:
                xacc[fired] ^= fixed_eff[tab, 0]
                zacc[fired] ^= fixed_eff[tab, 1]
            else:
                k = ((u[fired] / p) * 15.0).astype(np.int64)
                np.minimum(k, 14, out=k)
                xacc[fired] ^= gate_eff[tab, k, 0, :]
                zacc[fired] ^= gate_eff[tab, k, 1, :]
        out_x[lo:hi] = xacc
        out_z[lo:hi] = zacc

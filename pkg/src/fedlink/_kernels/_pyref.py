"""Pure-numpy reference implementations of the hot per-round kernels.

The compiled extension in ``_core.pyx`` mirrors these functions operation by
operation (same arithmetic, same accumulation order), so both backends produce
bit-identical results.  All randomness is drawn by the caller and passed in as
arrays; the kernels are deterministic transforms.
"""

import numpy as np

BACKEND = "python"


def stochastic_levels(mag, g_min, delta, n_points, u, out):
    """Randomly round moduli to one of the two bracketing grid indices.

    Grid point i sits at ``g_min + i*delta`` for i in [0, n_points-1].  A
    modulus between grid points i and i+1 rounds up with probability equal to
    its fractional position; ``u`` supplies one uniform draw per entry.
    """
    top = n_points - 1
    if delta == 0.0:
        out[:] = 0
        return
    inv = 1.0 / delta
    pos = (mag - g_min) * inv
    np.clip(pos, 0.0, float(top), out=pos)
    lo = np.floor(pos)
    frac = pos - lo
    lvl = lo.astype(np.int64)
    lvl += u < frac
    np.minimum(lvl, top, out=lvl)
    out[:] = lvl


def reconstruct(levels, signs, g_min, delta, out):
    """Map grid indices back to signed values: sign * (g_min + level*delta)."""
    out[:] = signs * (g_min + levels * delta)


def add_scaled(acc, coeff, vec):
    """acc += coeff * vec (in place)."""
    acc += coeff * vec


def quant_contrib(g, u, n_points, coeff, acc):
    """Fused per-device digital pipeline: quantize, reconstruct, accumulate.

    Computes the modulus range from ``g`` itself, stochastically rounds each
    modulus (uniforms ``u``), and adds ``coeff *`` the reconstruction to
    ``acc``.  Returns (g_min, g_max).
    """
    mag = np.abs(g)
    g_min = mag.min()
    g_max = mag.max()
    top = n_points - 1
    delta = (g_max - g_min) / top
    signs = np.where(g < 0, -1.0, 1.0)
    lvl = np.empty(g.shape[0], dtype=np.int64)
    if delta == 0.0:
        lvl[:] = 0
    else:
        inv = 1.0 / delta
        pos = (mag - g_min) * inv
        np.clip(pos, 0.0, float(top), out=pos)
        lo = np.floor(pos)
        frac = pos - lo
        lvl = lo.astype(np.int64)
        lvl += u < frac
        np.minimum(lvl, top, out=lvl)
    recon = signs * (g_min + lvl * delta)
    acc += coeff * recon
    return g_min, g_max

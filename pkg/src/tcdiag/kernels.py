"""Numba Metropolis kernels for the multi-flavor Ising models.

Spins are int8 arrays of shape (flavors, L, L) on a periodic square lattice.
Bond sign arrays follow the convention

    sign_h[s, r, c] : bond of flavor s between sites (r, c) and (r, c+1)
    sign_v[s, r, c] : bond of flavor s between sites (r, c) and (r+1, c)

and the per-bond energy is -J (sum_s xi_s sigma sigma + Xi prod_s sigma sigma)
with Xi the product of the per-flavor signs.  A sweep proposes one flip per
(flavor, site) with Metropolis acceptance min(1, e^(-dE)); one pre-drawn
uniform per proposal keeps runs bit-reproducible.

Each sweep visits the sites in one of the eight reflection/transposition
variants of row-major order, drawn per sweep.  A frozen scan order is not
ergodic on small even lattices: zero-cost proposals are always accepted, and
composing them in a fixed order creates exactly periodic orbits (the sweep
composition picks up unit-circle eigenvalues); mixing the eight patterns
restores a unique stationary distribution while still touching every
(site, flavor) exactly once per sweep.

Flip costs are integer multiples 2 J k with |k| <= 8, so acceptance draws
compare against a precomputed exp table, and the all-flavor spin product is
tracked incrementally instead of recomputed per proposal.
"""

import numpy as np
from numba import njit

ENERGY_STEPS = 8  # |k| bound: pairwise surplus 4 plus product surplus 4
N_SCAN_PATTERNS = 8


def acceptance_table(coupling: float) -> np.ndarray:
    """exp(-2 J k) for k = -ENERGY_STEPS .. ENERGY_STEPS."""
    ks = np.arange(-ENERGY_STEPS, ENERGY_STEPS + 1, dtype=np.float64)
    with np.errstate(over="ignore"):
        tab = np.exp(-2.0 * coupling * ks)
    return np.minimum(tab, 1.0)


@njit(cache=True)
def sweep_block(spins, prod_spins, sign_h, sign_v, prod_h, prod_v,
                include_product, exp_tab, patterns, u):
    """Run u.shape[0] sweeps; returns the accumulated energy change in units
    of 2J (integer-valued float)."""
    n_flavors, L, _ = spins.shape
    n_sweeps = u.shape[0]
    k_total = 0
    for b in range(n_sweeps):
        pat = patterns[b]
        flip_r = pat & 1
        flip_c = (pat >> 1) & 1
        transpose = (pat >> 2) & 1
        for s in range(n_flavors):
            for i in range(L):
                for j in range(L):
                    r = L - 1 - i if flip_r else i
                    c = L - 1 - j if flip_c else j
                    if transpose:
                        r, c = c, r
                    rp = r + 1 if r + 1 < L else 0
                    rm = r - 1 if r >= 1 else L - 1
                    cp = c + 1 if c + 1 < L else 0
                    cm = c - 1 if c >= 1 else L - 1
                    sig = spins[s, r, c]
                    k = sig * (sign_h[s, r, c] * spins[s, r, cp]
                               + sign_h[s, r, cm] * spins[s, r, cm]
                               + sign_v[s, r, c] * spins[s, rp, c]
                               + sign_v[s, rm, c] * spins[s, rm, c])
                    if include_product:
                        pc = prod_spins[r, c]
                        k += pc * (prod_h[r, c] * prod_spins[r, cp]
                                   + prod_h[r, cm] * prod_spins[r, cm]
                                   + prod_v[r, c] * prod_spins[rp, c]
                                   + prod_v[rm, c] * prod_spins[rm, c])
                    if k <= 0 or u[b, s, i, j] < exp_tab[k + ENERGY_STEPS]:
                        spins[s, r, c] = -sig
                        if include_product:
                            prod_spins[r, c] = -prod_spins[r, c]
                        k_total += k
    return float(k_total)


def total_energy(spins, coupling, sign_h, sign_v, prod_h, prod_v, include_product):
    """Energy recomputed from scratch (numpy reference for bookkeeping checks)."""
    s = spins.astype(np.float64)
    right = np.roll(s, -1, axis=2)
    down = np.roll(s, -1, axis=1)
    e = -coupling * float(np.sum(sign_h * s * right) + np.sum(sign_v * s * down))
    if include_product:
        ph = np.prod(s * right, axis=0)
        pv = np.prod(s * down, axis=0)
        e += -coupling * float(np.sum(prod_h * ph) + np.sum(prod_v * pv))
    return e

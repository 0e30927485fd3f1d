"""Seeded quasi-random sampling of points, jets and arrows."""

import numpy as np
from scipy.stats import qmc

from .chart import Box


def points(box: Box, count, seed, margin=1e-6):
    """``count`` scrambled-Sobol points inside ``box`` (shrunk by ``margin``)."""
    if count <= 0:
        return np.zeros((0, box.n))
    inner = box.shrink(margin)
    sobol = qmc.Sobol(d=box.n, scramble=True, seed=np.random.default_rng([seed, 0]))
    # Sobol prefers powers of two; draw the next one up and keep the prefix
    m = max(0, int(np.ceil(np.log2(count))))
    u = sobol.random_base2(m)[:count]
    return inner.scale(u)


def rng_for(seed, index, stream=1):
    """Independent generator for sample ``index`` (order-independent)."""
    return np.random.default_rng([seed, stream, index])


def pairs(box: Box, count, seed, margin=1e-6):
    """Point pairs built from one Sobol stream in doubled dimension."""
    n = box.n
    doubled = Box(box.lo + box.lo, box.hi + box.hi)
    pts = points(doubled, count, seed, margin)
    return pts[:, :n], pts[:, n:]


def orthogonal(n, rng):
    """Orthogonal matrix from the QR factorisation of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))

"""Random linear coding with Gaussian coefficients.

Worker ``i`` stores ``S_i @ A`` where ``S_i`` is an ``l_i x r`` matrix with
i.i.d. standard normal entries. Any ``r`` returned inner products form a
square system ``S_(r) y = z`` that is invertible with probability one.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

PIVOT_RTOL = 1e-10


class DecodeError(ValueError):
    """Raised when received results cannot be decoded."""


@dataclass(frozen=True, eq=False)
class RlcBlock:
    worker: int
    coeffs: np.ndarray
    data: np.ndarray

    @property
    def rows(self):
        return self.coeffs.shape[0]


def rlc_encode(A, loads, rng, coeffs=None):
    """Encode the rows of ``A`` into one block per worker.

    ``coeffs`` optionally fixes the coding matrices (one per worker) instead
    of drawing them from ``rng``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError("A must be a 2-D matrix")
    r = A.shape[0]
    loads = [int(l) for l in loads]
    if any(l < 0 for l in loads):
        raise ValueError("loads must be non-negative")
    if sum(loads) < r:
        raise ValueError(f"total load {sum(loads)} is below the {r} rows needed to decode")
    blocks = []
    for i, l in enumerate(loads):
        if coeffs is None:
            S = rng.standard_normal((l, r))
        else:
            S = np.asarray(coeffs[i], dtype=float)
            if S.shape != (l, r):
                raise ValueError(f"coefficients for worker {i} have shape {S.shape}, expected {(l, r)}")
        blocks.append(RlcBlock(i, S, S @ A))
    return blocks


def rlc_decode(S, z):
    """Solve ``S y = z`` for the ``r`` uncoded inner products.

    LU with partial pivoting; a pivot below ``PIVOT_RTOL`` times the
    largest one is treated as singular.
    """
    S = np.asarray(S, dtype=float)
    z = np.asarray(z, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square coding matrix, got shape {S.shape}")
    if z.shape[0] != S.shape[0]:
        raise ValueError(f"{z.shape[0]} results for a {S.shape[0]}-row system")
    with warnings.catch_warnings():
        # singularity is reported below through the pivot test
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(S)
    pivots = np.abs(np.diag(lu))
    if pivots.max() == 0 or pivots.min() <= PIVOT_RTOL * pivots.max():
        raise DecodeError("coding matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), z)

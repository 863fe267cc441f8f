"""Core types, the generative model, block counting and the exact ICL score.

The latent block model: each row carries a hidden group label drawn from
mixing proportions ``pi`` (g groups), each column one drawn from ``rho``
(m groups), and a cell whose row sits in group k and column in group l is
Bernoulli with success probability ``alpha[k, l]``.

Group labels are 0-based everywhere in memory; the I/O layer converts to the
1-based convention used in result files.  All functions here are pure and all
containers immutable, so shared data can be read from any number of threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ValidationError
from .rng import derive_rng

__all__ = [
    "BinaryDataMatrix",
    "LBMParameters",
    "CoPartition",
    "BlockCounts",
    "PriorHyperparams",
    "staircase_parameters",
    "simulate_dataset",
    "block_counts",
    "icl",
]

PROB_TOL = 1e-12


def _check_prob_vector(p, name):
    if not np.all(np.isfinite(p)):
        raise ValidationError(f"{name} must contain finite values")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValidationError(f"{name} entries must lie in [0, 1]")
    total = float(p.sum())
    if abs(total - 1.0) > PROB_TOL:
        raise ValidationError(f"{name} must sum to 1 within {PROB_TOL}, got {total!r}")


def _freeze(obj, name, arr):
    arr.setflags(write=False)
    object.__setattr__(obj, name, arr)


@dataclass(frozen=True)
class BinaryDataMatrix:
    """An n x q matrix of 0/1 responses (rows: students, columns: items)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValidationError("data matrix must be 2-d with at least one row and one column")
        if not np.isin(values, (0, 1)).all():
            raise ValidationError("data matrix cells must all be 0 or 1")
        _freeze(self, "values", values.astype(np.int8, copy=True))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LBMParameters:
    """Mixing proportions and the g x m matrix of block success rates."""

    g: int
    m: int
    pi: np.ndarray
    rho: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        if self.g < 1 or self.m < 1:
            raise ValidationError("g and m must be >= 1")
        pi = np.asarray(self.pi, dtype=float).copy()
        rho = np.asarray(self.rho, dtype=float).copy()
        alpha = np.asarray(self.alpha, dtype=float).copy()
        if pi.shape != (self.g,):
            raise ValidationError(f"pi must have shape ({self.g},), got {pi.shape}")
        if rho.shape != (self.m,):
            raise ValidationError(f"rho must have shape ({self.m},), got {rho.shape}")
        if alpha.shape != (self.g, self.m):
            raise ValidationError(f"alpha must have shape ({self.g}, {self.m}), got {alpha.shape}")
        _check_prob_vector(pi, "pi")
        _check_prob_vector(rho, "rho")
        if not np.all(np.isfinite(alpha)) or np.any(alpha < 0.0) or np.any(alpha > 1.0):
            raise ValidationError("alpha entries must lie in [0, 1]")
        _freeze(self, "pi", pi)
        _freeze(self, "rho", rho)
        _freeze(self, "alpha", alpha)


@dataclass(frozen=True)
class CoPartition:
    """Row labels ``z`` (length n, values 0..g-1) and column labels ``w``
    (length q, values 0..m-1).  A group index in range may be unused: empty
    groups are legal.
    """

    z: np.ndarray
    w: np.ndarray
    g: int
    m: int

    def __post_init__(self):
        if self.g < 1 or self.m < 1:
            raise ValidationError("g and m must be >= 1")
        for name, labels, bound in (("z", self.z, self.g), ("w", self.w, self.m)):
            arr = np.asarray(labels)
            if arr.ndim != 1 or arr.size < 1:
                raise ValidationError(f"{name} must be a non-empty 1-d vector")
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValidationError(f"{name} must be integer-valued")
            if int(arr.min()) < 0 or int(arr.max()) >= bound:
                raise ValidationError(f"{name} labels must lie in [0, {bound - 1}]")
            _freeze(self, name, arr.astype(np.int64, copy=True))

    @property
    def n(self) -> int:
        return self.z.size

    @property
    def q(self) -> int:
        return self.w.size


@dataclass(frozen=True)
class BlockCounts:
    """Per-block tallies of ones and zeros plus the group sizes."""

    n1: np.ndarray
    n0: np.ndarray
    row_sizes: np.ndarray
    col_sizes: np.ndarray

    def __post_init__(self):
        n1 = np.asarray(self.n1, dtype=np.int64)
        n0 = np.asarray(self.n0, dtype=np.int64)
        rows = np.asarray(self.row_sizes, dtype=np.int64)
        cols = np.asarray(self.col_sizes, dtype=np.int64)
        if n1.shape != (rows.size, cols.size) or n0.shape != n1.shape:
            raise ValidationError("block count shapes are inconsistent")
        if np.any(n1 < 0) or np.any(n0 < 0):
            raise ValidationError("block counts must be non-negative")
        if not np.array_equal(n1 + n0, np.outer(rows, cols)):
            raise ValidationError("n1 + n0 must equal the block cell counts")
        for name, arr in (("n1", n1), ("n0", n0), ("row_sizes", rows), ("col_sizes", cols)):
            _freeze(self, name, arr.copy())


@dataclass(frozen=True)
class PriorHyperparams:
    """Dirichlet concentration ``a`` for pi and rho, Beta concentration ``b``
    for every block rate.  Defaults a=4, b=1 are the estimation setup used
    throughout; a=4 is what keeps groups from emptying during fitting.
    """

    a: float = 4.0
    b: float = 1.0

    def __post_init__(self):
        for name, value in (("a", self.a), ("b", self.b)):
            if not np.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be a positive finite number, got {value!r}")


def staircase_parameters(g, m, epsilon):
    """Uniform mixing proportions with ``alpha[k, l] = epsilon`` on and below
    the block diagonal (k >= l) and ``1 - epsilon`` above it.

    ``epsilon`` is a difficulty dial: small values give sharply contrasted
    blocks, values near 1/2 nearly erase the structure.
    """
    if g < 1 or m < 1:
        raise ValidationError("g and m must be >= 1")
    eps = float(epsilon)
    if not np.isfinite(eps) or not 0.0 < eps < 1.0:
        raise ValidationError(f"epsilon must lie strictly between 0 and 1, got {epsilon!r}")
    rows = np.arange(g)[:, None]
    cols = np.arange(m)[None, :]
    alpha = np.where(rows >= cols, eps, 1.0 - eps)
    return LBMParameters(g, m, np.full(g, 1.0 / g), np.full(m, 1.0 / m), alpha)


def simulate_dataset(params, n, q, seed):
    """Draw row and column labels from the mixing proportions, then every
    cell from its block's Bernoulli rate.

    The same seed reproduces the matrix and partition bit for bit.
    """
    if n < 1 or q < 1:
        raise ValidationError("n and q must be >= 1")
    rng = derive_rng(seed)
    z = rng.choice(params.g, size=n, p=params.pi)
    w = rng.choice(params.m, size=q, p=params.rho)
    cells = (rng.random((n, q)) < params.alpha[z][:, w]).astype(np.int8)
    return BinaryDataMatrix(cells), CoPartition(z, w, params.g, params.m)


def _block_tallies(values, z, w, g, m):
    # integer one-hot contractions; exact, no float round-off
    row_sizes = np.bincount(z, minlength=g).astype(np.int64)
    col_sizes = np.bincount(w, minlength=m).astype(np.int64)
    z_onehot = np.zeros((g, values.shape[0]), dtype=np.int64)
    z_onehot[z, np.arange(values.shape[0])] = 1
    w_onehot = np.zeros((values.shape[1], m), dtype=np.int64)
    w_onehot[np.arange(values.shape[1]), w] = 1
    n1 = z_onehot @ values.astype(np.int64) @ w_onehot
    n0 = np.outer(row_sizes, col_sizes) - n1
    return n1, n0, row_sizes, col_sizes


def block_counts(data, part):
    """Count the ones and zeros falling in every (row group, column group)
    block of the partition."""
    if part.n != data.n or part.q != data.q:
        raise ValidationError(
            f"partition sized ({part.n}, {part.q}) does not match data ({data.n}, {data.q})")
    n1, n0, row_sizes, col_sizes = _block_tallies(data.values, part.z, part.w, part.g, part.m)
    return BlockCounts(n1, n0, row_sizes, col_sizes)


def icl(data, part, g, m, prior):
    """Exact integrated completed likelihood of a co-partition.

    Conjugate Dirichlet(a) priors on the mixing proportions and Beta(b, b)
    priors on the block rates integrate in closed form; the result is the log
    of the completed-data marginal likelihood.  Finite for every valid input,
    including partitions with empty groups.
    """
    if part.g != g or part.m != m:
        raise ValidationError(
            f"partition declares ({part.g}, {part.m}) groups, expected ({g}, {m})")
    counts = block_counts(data, part)
    a, b = prior.a, prior.b
    n, q = data.n, data.q
    zk = counts.row_sizes.astype(float)
    wl = counts.col_sizes.astype(float)
    value = (
        gammaln(g * a) + gammaln(m * a) - (g + m) * gammaln(a)
        + g * m * (gammaln(2.0 * b) - 2.0 * gammaln(b))
        - gammaln(n + g * a) - gammaln(q + m * a)
        + gammaln(zk + a).sum() + gammaln(wl + a).sum()
        + (gammaln(counts.n1 + b) + gammaln(counts.n0 + b)
           - gammaln(np.outer(zk, wl) + 2.0 * b)).sum()
    )
    return float(value)

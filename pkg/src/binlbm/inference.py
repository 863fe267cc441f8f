"""V-Bayes estimation seeded by a Gibbs sampler, with multi-restart fitting.

One estimation chain for a (g, m) cell: a short Gibbs run over labels and
parameters supplies the starting point, then deterministic variational
updates raise the free energy (expected complete log-likelihood plus
responsibility entropies plus log prior densities) until the relative change
falls under tolerance.  Parameter updates move to conjugate-posterior modes,
so the Dirichlet pseudo-counts keep every group's proportion strictly
positive and the chain cannot paint itself into empty groups.  Several
restarts are run from independent streams and the best free energy wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy, gammaln

from .errors import NumericalError, ValidationError
from .model import (
    CoPartition,
    LBMParameters,
    PriorHyperparams,
    _block_tallies,
    icl,
)
from .rng import derive_rng, derive_seed

__all__ = [
    "VariationalState",
    "FitResult",
    "gibbs_init",
    "vbayes_step",
    "free_energy",
    "fit",
]

_CLAMP = 1e-12
# 50 sweeps leave visibly too many single-restart chains in poor optima at
# n ~ 100; 100 sweeps restore near-certain selection on easy regimes
DEFAULT_GIBBS_SWEEPS = 100
DEFAULT_MAX_ITER = 500
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class VariationalState:
    """Row responsibilities ``tau`` (n x g) and column responsibilities
    ``nu`` (q x m); every row of each is a probability vector."""

    tau: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        for name, arr in (("tau", self.tau), ("nu", self.nu)):
            arr = np.asarray(arr, dtype=float)
            if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
                raise ValidationError(f"{name} must be a non-empty 2-d matrix")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
                raise ValidationError(f"{name} entries must lie in [0, 1]")
            if np.any(np.abs(arr.sum(axis=1) - 1.0) > 1e-10):
                raise ValidationError(f"each row of {name} must sum to 1 within 1e-10")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class FitResult:
    """Winning chain of a multi-restart fit.

    ``chain_free_energies`` holds the final free energy of every restart in
    order (None where a chain failed numerically); the winner is its maximum.
    """

    params: LBMParameters
    state: VariationalState
    map_part: CoPartition
    free_energy: float
    icl_value: float
    iterations: int
    restart_index: int
    chain_free_energies: tuple

    def __post_init__(self):
        if not np.isfinite(self.free_energy):
            raise ValidationError("free_energy must be finite")
        if self.map_part.g != self.params.g or self.map_part.m != self.params.m:
            raise ValidationError("map_part group counts must match the parameters")


def _safe_log(p):
    return np.log(np.clip(p, _CLAMP, None))


def _log_rate_tables(alpha):
    # clamp only inside the logs; stored rates may legitimately sit at 0 or 1
    clipped = np.clip(alpha, _CLAMP, 1.0 - _CLAMP)
    return np.log(clipped), np.log1p(-clipped)


def _row_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs


def _sample_labels(rng, log_weights, loglik):
    """One categorical draw per row of ``loglik``, via inverse CDF."""
    probs = _row_softmax(log_weights[None, :] + loglik)
    u = rng.random((probs.shape[0], 1))
    idx = (probs.cumsum(axis=1) < u).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def _sample_parameters(rng, values, z, w, g, m, prior):
    n1, n0, row_sizes, col_sizes = _block_tallies(values, z, w, g, m)
    pi = rng.dirichlet(row_sizes + prior.a)
    rho = rng.dirichlet(col_sizes + prior.a)
    alpha = rng.beta(n1 + prior.b, n0 + prior.b)
    return pi, rho, alpha


def gibbs_init(data, g, m, prior=PriorHyperparams(), sweeps=DEFAULT_GIBBS_SWEEPS, seed=0):
    """Sample a starting point for the variational loop.

    Starts from a uniform-random co-partition (parameters drawn from their
    posteriors given it), then each sweep resamples all row labels from their
    full conditionals given the column labels and parameters, all column
    labels given the fresh row labels, and finally the parameters from their
    conjugate posteriors: Dirichlet for pi and rho, Beta(N1 + b, N0 + b) per
    block.  Returns the parameters and partition after the last sweep;
    deterministic given the seed.
    """
    if sweeps < 1:
        raise ValidationError("sweeps must be >= 1")
    if g < 1 or m < 1:
        raise ValidationError("g and m must be >= 1")
    rng = derive_rng(seed)
    y = data.values.astype(float)
    y_not = 1.0 - y
    z = rng.integers(0, g, size=data.n)
    w = rng.integers(0, m, size=data.q)
    pi, rho, alpha = _sample_parameters(rng, data.values, z, w, g, m, prior)
    for _ in range(sweeps):
        log1, log0 = _log_rate_tables(alpha)
        z = _sample_labels(rng, _safe_log(pi), y @ log1[:, w].T + y_not @ log0[:, w].T)
        w = _sample_labels(rng, _safe_log(rho), y.T @ log1[z, :] + y_not.T @ log0[z, :])
        pi, rho, alpha = _sample_parameters(rng, data.values, z, w, g, m, prior)
    return LBMParameters(g, m, pi, rho, alpha), CoPartition(z, w, g, m)


def _dirichlet_mode(mass, a):
    # mode of Dirichlet(mass + a); the a-1 shift clips at the boundary when a < 1
    num = np.maximum(mass + (a - 1.0), 0.0)
    total = num.sum()
    if total <= 0.0:
        return np.full(mass.size, 1.0 / mass.size)
    return num / total


def _beta_mode(s1, s_tot, b):
    s0 = s_tot - s1
    den = s_tot + 2.0 * (b - 1.0)
    num = s1 + (b - 1.0)
    alpha = np.zeros_like(s1)
    interior = den > 0.0
    np.divide(num, den, out=alpha, where=interior)
    np.clip(alpha, 0.0, 1.0, out=alpha)
    # degenerate posteriors (only reachable for b < 1 on nearly empty blocks)
    # sit at whichever boundary carries the data mass
    if not interior.all():
        edge = ~interior
        alpha[edge] = np.where(s1[edge] > s0[edge], 1.0,
                               np.where(s1[edge] < s0[edge], 0.0, 0.5))
    return alpha


def vbayes_step(data, state, params, prior):
    """One full variational iteration.

    Updates tau row-wise from the incoming nu and parameters, then nu from
    the fresh tau, then moves pi, rho, alpha to their conjugate-posterior
    modes under the updated responsibilities.  Each sub-step is an exact
    coordinate maximization of the free energy, so the free energy never
    decreases across a step.  Responsibilities are computed in log space with
    per-row max subtraction.
    """
    y = data.values.astype(float)
    y_not = 1.0 - y
    n, q = y.shape
    g, m = params.g, params.m
    if state.tau.shape != (n, g) or state.nu.shape != (q, m):
        raise ValidationError("variational state shapes do not match the data and parameters")
    a, b = prior.a, prior.b
    log1, log0 = _log_rate_tables(params.alpha)

    ones_by_colgroup = y @ state.nu
    zeros_by_colgroup = state.nu.sum(axis=0)[None, :] - ones_by_colgroup
    tau = _row_softmax(_safe_log(params.pi)[None, :]
                       + ones_by_colgroup @ log1.T + zeros_by_colgroup @ log0.T)

    ones_by_rowgroup = y.T @ tau
    zeros_by_rowgroup = tau.sum(axis=0)[None, :] - ones_by_rowgroup
    nu = _row_softmax(_safe_log(params.rho)[None, :]
                      + ones_by_rowgroup @ log1 + zeros_by_rowgroup @ log0)

    row_mass = tau.sum(axis=0)
    col_mass = nu.sum(axis=0)
    pi = _dirichlet_mode(row_mass, a)
    rho = _dirichlet_mode(col_mass, a)
    s1 = tau.T @ y @ nu
    alpha = _beta_mode(s1, np.outer(row_mass, col_mass), b)

    for name, arr in (("tau", tau), ("nu", nu), ("pi", pi), ("rho", rho), ("alpha", alpha)):
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite values in updated {name}")
    return VariationalState(tau, nu), LBMParameters(g, m, pi, rho, alpha)


def _dirichlet_logpdf(p, a):
    return float(gammaln(p.size * a) - p.size * gammaln(a) + (a - 1.0) * _safe_log(p).sum())


def _beta_logpdf_total(alpha, b):
    clipped = np.clip(alpha, _CLAMP, 1.0 - _CLAMP)
    return float(alpha.size * (gammaln(2.0 * b) - 2.0 * gammaln(b))
                 + (b - 1.0) * (np.log(clipped) + np.log1p(-clipped)).sum())


def free_energy(data, state, params, prior):
    """Variational objective maximized by the fitting loop.

    Expected complete log-likelihood under the responsibilities, plus the
    responsibility entropies, plus the log prior densities of pi, rho and
    every block rate.  Logs of probabilities are clamped at 1e-12 so boundary
    rates never produce non-finite output, and 0*log(0) terms are 0.
    """
    y = data.values.astype(float)
    g, m = params.g, params.m
    if state.tau.shape != (data.n, g) or state.nu.shape != (data.q, m):
        raise ValidationError("variational state shapes do not match the data and parameters")
    a, b = prior.a, prior.b
    log1, log0 = _log_rate_tables(params.alpha)
    row_mass = state.tau.sum(axis=0)
    col_mass = state.nu.sum(axis=0)
    s1 = state.tau.T @ y @ state.nu
    s_tot = np.outer(row_mass, col_mass)
    value = (
        float(row_mass @ _safe_log(params.pi))
        + float(col_mass @ _safe_log(params.rho))
        + float((s1 * log1 + (s_tot - s1) * log0).sum())
        - float(xlogy(state.tau, state.tau).sum())
        - float(xlogy(state.nu, state.nu).sum())
        + _dirichlet_logpdf(params.pi, a)
        + _dirichlet_logpdf(params.rho, a)
        + _beta_logpdf_total(params.alpha, b)
    )
    if not np.isfinite(value):
        raise NumericalError("free energy evaluated to a non-finite value")
    return value


def _one_hot(labels, width):
    out = np.zeros((labels.size, width))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _run_chain(data, g, m, prior, gibbs_sweeps, max_iter, tol, chain_seed):
    params, part = gibbs_init(data, g, m, prior, sweeps=gibbs_sweeps, seed=chain_seed)
    state = VariationalState(_one_hot(part.z, g), _one_hot(part.w, m))
    previous = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        try:
            state, params = vbayes_step(data, state, params, prior)
            current = free_energy(data, state, params, prior)
        except NumericalError as exc:
            raise NumericalError(f"iteration {iterations}: {exc}") from exc
        converged = previous is not None and abs(current - previous) < tol * abs(current)
        previous = current
        if converged:
            break
    return state, params, previous, iterations


def fit(data, g, m, prior=PriorHyperparams(), restarts=1,
        gibbs_sweeps=DEFAULT_GIBBS_SWEEPS, max_iter=DEFAULT_MAX_ITER,
        tol=DEFAULT_TOL, seed=0):
    """Best-of-``restarts`` V-Bayes fit for one (g, m) cell.

    Each restart chain draws its Gibbs starting point from a stream derived
    from (seed, restart index), runs variational steps until the relative
    free-energy change drops below ``tol`` (or ``max_iter`` is reached), and
    the chain with the highest final free energy wins, the first one on ties.
    The reported partition applies the MAP rule (per-row arg-max of tau, of
    nu) and ``icl_value`` scores it with the exact criterion.
    """
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")
    if max_iter < 1:
        raise ValidationError("max_iter must be >= 1")
    if not tol > 0:
        raise ValidationError("tol must be > 0")
    best = None
    best_index = -1
    chain_free_energies = []
    failures = []
    for index in range(restarts):
        try:
            chain = _run_chain(data, g, m, prior, gibbs_sweeps, max_iter, tol,
                               derive_seed(seed, index))
        except NumericalError as exc:
            failures.append(f"restart {index}: {exc}")
            chain_free_energies.append(None)
            continue
        chain_free_energies.append(chain[2])
        if best is None or chain[2] > best[2]:
            best = chain
            best_index = index
    if best is None:
        raise NumericalError("all restart chains failed numerically: " + "; ".join(failures))
    state, params, best_fe, iterations = best
    map_part = CoPartition(np.argmax(state.tau, axis=1), np.argmax(state.nu, axis=1), g, m)
    return FitResult(
        params=params,
        state=state,
        map_part=map_part,
        free_energy=best_fe,
        icl_value=icl(data, map_part, g, m, prior),
        iterations=iterations,
        restart_index=best_index,
        chain_free_energies=tuple(chain_free_energies),
    )

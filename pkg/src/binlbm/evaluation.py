"""Partition comparison and the subsample robustness experiment.

Comparing an estimated row partition to a reference one has to look past
label switching: with equal group counts the misclassification count is
minimized over all label permutations, and with unequal counts the side with
more groups is merged onto the other through every surjective group union
before permuting.  Enumeration is exhaustive (bounded at 8 groups per side),
deliberately simple so it can be cross-checked against brute force.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    ExperimentError,
    InfeasibleSampleError,
    LbmError,
    ValidationError,
)
from .inference import DEFAULT_GIBBS_SWEEPS, DEFAULT_MAX_ITER, DEFAULT_TOL
from .model import BinaryDataMatrix, PriorHyperparams, simulate_dataset, staircase_parameters
from .parallel import ordered_map
from .rng import derive_rng, derive_seed
from .selection import select_model

__all__ = [
    "MatchResult",
    "DatasetReference",
    "RobustnessCell",
    "RobustnessReport",
    "contingency",
    "best_match",
    "stratified_subsample",
    "robustness_experiment",
    "MAX_MATCH_GROUPS",
]

MAX_MATCH_GROUPS = 8


def _check_labels(labels, bound, name):
    arr = np.asarray(labels)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError(f"{name} must be a non-empty 1-d vector")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValidationError(f"{name} must be integer-valued")
    if int(arr.min()) < 0 or int(arr.max()) >= bound:
        raise ValidationError(f"{name} labels must lie in [0, {bound - 1}]")
    return arr.astype(np.int64, copy=False)


def contingency(ref_z, est_z, g_ref, g_est):
    """Co-occurrence counts between reference and estimated row groups."""
    if g_ref < 1 or g_est < 1:
        raise ValidationError("group counts must be >= 1")
    ref = _check_labels(ref_z, g_ref, "ref_z")
    est = _check_labels(est_z, g_est, "est_z")
    if ref.size != est.size:
        raise ValidationError(f"label vectors differ in length: {ref.size} vs {est.size}")
    counts = np.zeros((g_ref, g_est), dtype=np.int64)
    np.add.at(counts, (ref, est), 1)
    return counts


@dataclass(frozen=True)
class MatchResult:
    """Minimal misclassification between two partitions.

    ``mapping`` sends each group of the merged side onto a group of the other
    side: estimated labels onto reference labels when g_est >= g_ref, and
    reference labels onto estimated labels otherwise (``merged_side`` says
    which).  Ties are broken toward the lexicographically smallest mapping.
    """

    misclassified: int
    rate: float
    mapping: tuple
    merged_side: str


def _partitions_into(items, k):
    """All ways to split ``items`` into exactly ``k`` non-empty blocks."""
    if k == 0:
        if not items:
            yield []
        return
    if len(items) < k:
        return
    head, tail = items[0], items[1:]
    for rest in _partitions_into(tail, k - 1):
        yield [[head], *rest]
    for rest in _partitions_into(tail, k):
        for i in range(len(rest)):
            yield [*rest[:i], [head, *rest[i]], *rest[i + 1:]]


def _best_surjection(score, n_from, n_to):
    """Maximize sum_j score[f(j), j] over surjections f: [n_from] -> [n_to].

    Every surjection is a set partition of the source labels into n_to
    blocks followed by a choice of distinct targets for the blocks, which
    enumerates each candidate exactly once.
    """
    best_total = -1
    best_map = None
    for blocks in _partitions_into(list(range(n_from)), n_to):
        block_scores = [score[:, block].sum(axis=1) for block in blocks]
        for perm in itertools.permutations(range(n_to)):
            total = 0
            mapping = [0] * n_from
            for block, target, sums in zip(blocks, perm, block_scores):
                total += int(sums[target])
                for j in block:
                    mapping[j] = target
            mapping = tuple(mapping)
            if total > best_total or (total == best_total and mapping < best_map):
                best_total = total
                best_map = mapping
    return best_total, best_map


def best_match(ref_z, est_z, g_ref, g_est):
    """Minimal misclassified count between two row partitions.

    With g_est == g_ref the minimum runs over all label permutations; with
    g_est > g_ref over all surjective unions of estimated groups onto the
    reference groups (and permutations); with g_est < g_ref the reference
    groups are merged symmetrically.
    """
    if g_ref > MAX_MATCH_GROUPS or g_est > MAX_MATCH_GROUPS:
        raise ValidationError(
            f"best_match enumerates exhaustively and supports at most {MAX_MATCH_GROUPS} groups per side")
    counts = contingency(ref_z, est_z, g_ref, g_est)
    total = int(counts.sum())
    if g_est >= g_ref:
        matched, mapping = _best_surjection(counts, g_est, g_ref)
        merged_side = "estimated"
    else:
        matched, mapping = _best_surjection(counts.T, g_ref, g_est)
        merged_side = "reference"
    misclassified = total - matched
    return MatchResult(misclassified=misclassified, rate=misclassified / total,
                       mapping=mapping, merged_side=merged_side)


def _largest_remainder(proportions, total):
    quota = proportions * total
    base = np.floor(quota).astype(np.int64)
    leftover = int(total - base.sum())
    if leftover < 0:
        raise ValidationError("proportions sum above 1; allocation is infeasible")
    order = np.lexsort((np.arange(proportions.size), -(quota - base)))
    allocation = base.copy()
    allocation[order[:leftover]] += 1
    return allocation


def stratified_subsample(data, ref_z, proportions, n_sub, seed):
    """Sample ``n_sub`` rows without replacement, allocating per reference
    group by largest-remainder rounding of ``n_sub * proportions`` (ties go
    to the smaller group index).

    Selected rows keep their original relative order; returns the submatrix,
    the reference labels of the selected rows, and the original row indices.
    """
    prop = np.asarray(proportions, dtype=float)
    if prop.ndim != 1 or prop.size < 1:
        raise ValidationError("proportions must be a non-empty 1-d vector")
    if not np.all(np.isfinite(prop)) or np.any(prop < 0.0):
        raise ValidationError("proportions must be non-negative and finite")
    if abs(float(prop.sum()) - 1.0) > 1e-8:
        raise ValidationError(f"proportions must sum to 1, got {float(prop.sum())!r}")
    ref = _check_labels(ref_z, prop.size, "ref_z")
    if ref.size != data.n:
        raise ValidationError("ref_z length must equal the number of data rows")
    if not 1 <= n_sub <= data.n:
        raise ValidationError(f"n_sub must lie in [1, {data.n}], got {n_sub}")
    allocation = _largest_remainder(prop, n_sub)
    sizes = np.bincount(ref, minlength=prop.size)
    for k in range(prop.size):
        if allocation[k] > sizes[k]:
            raise InfeasibleSampleError(
                f"group {k + 1} holds {sizes[k]} rows but the allocation asks for {allocation[k]}")
    rng = derive_rng(seed)
    chosen = []
    for k in range(prop.size):
        if allocation[k] == 0:
            continue
        members = np.flatnonzero(ref == k)
        chosen.append(rng.choice(members, size=allocation[k], replace=False))
    rows = np.sort(np.concatenate(chosen))
    return BinaryDataMatrix(data.values[rows]), ref[rows].copy(), rows


@dataclass(frozen=True)
class DatasetReference:
    """Accepted full-data fit backing one robustness data set."""

    epsilon: float
    dataset_index: int
    attempts: int
    proportions: np.ndarray


@dataclass(frozen=True)
class RobustnessCell:
    """Aggregated outcomes for one (epsilon, sample size) cell.

    ``pair_counts`` maps selected (g, m) pairs to how many subsamples chose
    them; ``rates_by_g`` collects the misclassification rates of every
    subsample whose selected row-group count was g (boxplot raw data).
    """

    epsilon: float
    sample_size: int
    pair_counts: dict
    rates_by_g: dict


@dataclass(frozen=True)
class RobustnessReport:
    cells: tuple
    references: tuple
    datasets_per_eps: int
    samples_per_size: int

    def cell(self, epsilon, sample_size):
        for entry in self.cells:
            if entry.epsilon == epsilon and entry.sample_size == sample_size:
                return entry
        raise KeyError((epsilon, sample_size))


def robustness_experiment(epsilon_list, datasets_per_eps, sample_sizes, samples_per_size,
                          grid, prior=PriorHyperparams(), seed=0, *,
                          target_pair=(3, 4), n=137, q=33, restarts=1,
                          max_attempts=200, gibbs_sweeps=DEFAULT_GIBBS_SWEEPS,
                          max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL, threads=1):
    """Stability of grid selection under stratified subsampling of the rows.

    Per epsilon and data set: simulate from the staircase design until the
    full-data selection returns ``target_pair`` (each failed attempt draws a
    fresh data set), keep that fit's MAP row partition and estimated row
    proportions as the reference; then for every sample size draw stratified
    subsamples, re-run the selection on each, tabulate the selected pair, and
    score the subsample's row partition against the reference labels of the
    sampled rows with :func:`best_match`.
    """
    if datasets_per_eps < 1 or samples_per_size < 1:
        raise ValidationError("datasets_per_eps and samples_per_size must be >= 1")
    sample_sizes = [int(s) for s in sample_sizes]
    if any(s < 1 or s > n for s in sample_sizes):
        raise ValidationError(f"sample sizes must lie in [1, {n}]")
    g_max, m_max = grid
    target_g, target_m = int(target_pair[0]), int(target_pair[1])
    if not (1 <= target_g <= g_max and 1 <= target_m <= m_max):
        raise ValidationError(f"target pair {target_pair} lies outside the grid {grid}")

    tasks = [(eps_index, float(epsilon), dataset_index)
             for eps_index, epsilon in enumerate(epsilon_list)
             for dataset_index in range(datasets_per_eps)]

    def run_dataset(task):
        eps_index, epsilon, dataset_index = task
        params = staircase_parameters(target_g, target_m, epsilon)
        accepted = None
        for attempt in range(max_attempts):
            dataset, _ = simulate_dataset(
                params, n, q, seed=derive_seed(seed, eps_index, dataset_index, attempt, 0))
            selection = select_model(
                dataset, g_max, m_max, prior, restarts=restarts,
                seed=derive_seed(seed, eps_index, dataset_index, attempt, 1),
                gibbs_sweeps=gibbs_sweeps, max_iter=max_iter, tol=tol)
            if selection.best_pair == (target_g, target_m):
                accepted = (dataset, selection, attempt + 1)
                break
        if accepted is None:
            raise ExperimentError(
                f"epsilon={epsilon}, dataset {dataset_index}: no accepted data set "
                f"within {max_attempts} attempts")
        dataset, selection, attempts = accepted
        reference_fit = selection.best_fit
        ref_labels = reference_fit.map_part.z
        proportions = reference_fit.params.pi
        outcomes = []
        for n_sub in sample_sizes:
            for sample_index in range(samples_per_size):
                try:
                    sub, sub_ref, _rows = stratified_subsample(
                        dataset, ref_labels, proportions, n_sub,
                        seed=derive_seed(seed, eps_index, dataset_index, n_sub, sample_index, 2))
                    sub_selection = select_model(
                        sub, g_max, m_max, prior, restarts=restarts,
                        seed=derive_seed(seed, eps_index, dataset_index, n_sub, sample_index, 3),
                        gibbs_sweeps=gibbs_sweeps, max_iter=max_iter, tol=tol)
                    match = best_match(sub_ref, sub_selection.best_fit.map_part.z,
                                       target_g, sub_selection.best_pair[0])
                except LbmError as exc:
                    raise ExperimentError(
                        f"epsilon={epsilon}, dataset {dataset_index}, n={n_sub}, "
                        f"sample {sample_index}: {exc}") from exc
                outcomes.append((n_sub, sub_selection.best_pair, match.rate))
        return DatasetReference(epsilon, dataset_index, attempts, proportions), outcomes

    results = ordered_map(run_dataset, tasks, threads=threads)

    cells = []
    for epsilon in (float(e) for e in epsilon_list):
        for n_sub in sample_sizes:
            pair_counts = {}
            rates_by_g = {}
            for (reference, outcomes), task in zip(results, tasks):
                if task[1] != epsilon:
                    continue
                for size, pair, rate in outcomes:
                    if size != n_sub:
                        continue
                    pair_counts[pair] = pair_counts.get(pair, 0) + 1
                    rates_by_g.setdefault(pair[0], []).append(rate)
            cells.append(RobustnessCell(
                epsilon=epsilon,
                sample_size=n_sub,
                pair_counts=dict(sorted(pair_counts.items())),
                rates_by_g={g: tuple(rates) for g, rates in sorted(rates_by_g.items())},
            ))
    return RobustnessReport(
        cells=tuple(cells),
        references=tuple(reference for reference, _ in results),
        datasets_per_eps=datasets_per_eps,
        samples_per_size=samples_per_size,
    )

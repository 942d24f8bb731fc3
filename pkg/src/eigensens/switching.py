"""Detection of eigenvalue switching caused by single-observation removal.

Removing one observation can reverse the order of two consecutive
eigenvalues.  The re-sorted eigenvalues of the reduced estimate carry no
trace of this, but the rank-indexed approximations of
:func:`eigensens.influence.loo_eigenvalue_table` do: a switch shows up as
``approx[j] < approx[j+1]``.  This module sweeps those approximations,
optionally confirms flagged events against true re-decompositions, adjusts
the retained component count away from disrupted boundaries, and builds
series in which only the flagged observations pay for an exact influence
value.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dataset import DataMatrix, EstimatorSpec, estimate_loo
from .eigen import EigenSystem, eigh
from .errors import CascadeUnderflowError, DataError, NoValidRetentionError
from .influence import _full_eigen, loo_eigenvalue_table
from .subspace_diag import eif_b_series, scia_series, sci, sif_b

__all__ = [
    "DEFAULT_NEAR_DELTA",
    "SwitchEvent",
    "RetentionAdvice",
    "HybridValue",
    "SwitchReport",
    "detect_switching",
    "detect_near_switch",
    "verify_exact",
    "recommend_L",
    "hybrid_influence",
    "build_switch_report",
    "cascade_scan",
]

DEFAULT_NEAR_DELTA = 0.1

KIND_SWITCH = "switch"
KIND_NEAR = "near_switch"

MEASURE_B = "B"
MEASURE_C = "C"


@dataclass(frozen=True)
class SwitchEvent:
    """One (observation, adjacent pair) order disruption or near miss."""

    obs_index: int
    obs_label: str
    pair: tuple[int, int]
    approx_lo: float
    approx_hi: float
    kind: str
    verified_exact: bool | None = None


@dataclass(frozen=True)
class RetentionAdvice:
    L: int
    rationale: str


@dataclass(frozen=True)
class HybridValue:
    """One entry of a hybrid influence series."""

    obs_index: int
    obs_label: str
    value: float
    replaced: bool


@dataclass
class SwitchReport:
    """Everything one switching analysis produced."""

    events: list[SwitchEvent]
    recommendation: RetentionAdvice
    delta: float
    hybrid_series: list[HybridValue] | None = None


def _normalise_pairs(pairs: Sequence[tuple[int, int]] | None, p: int
                     ) -> list[tuple[int, int]]:
    if pairs is None:
        return [(j, j + 1) for j in range(1, p)]
    out = []
    for pair in pairs:
        j, k = int(pair[0]), int(pair[1])
        if k != j + 1 or not 1 <= j < p:
            raise ValueError(
                f"pair {pair} is not a consecutive pair within 1..{p}"
            )
        out.append((j, k))
    return sorted(set(out))


def _sorted_events(events: Iterable[SwitchEvent]) -> list[SwitchEvent]:
    return sorted(events, key=lambda e: (e.pair, e.obs_index))


def detect_switching(
    X: DataMatrix,
    spec: EstimatorSpec,
    pairs: Sequence[tuple[int, int]] | None = None,
    *,
    eigen: EigenSystem | None = None,
    table: np.ndarray | None = None,
) -> list[SwitchEvent]:
    """Flag every (i, pair) where removal reverses the approximated order.

    One full-data decomposition covers the entire sweep; no reduced matrix
    is decomposed.
    """
    E = _full_eigen(X, spec, eigen)
    wanted = _normalise_pairs(pairs, E.p)
    if table is None:
        table = loo_eigenvalue_table(X, spec, eigen=E)
    events = []
    for j, k in wanted:
        for i in range(1, X.n + 1):
            lo, hi = table[i - 1, j - 1], table[i - 1, k - 1]
            if lo < hi:
                events.append(SwitchEvent(
                    i, X.row_labels[i - 1], (j, k), float(lo), float(hi),
                    KIND_SWITCH,
                ))
    return _sorted_events(events)


def detect_near_switch(
    X: DataMatrix,
    spec: EstimatorSpec,
    delta: float = DEFAULT_NEAR_DELTA,
    pairs: Sequence[tuple[int, int]] | None = None,
    *,
    eigen: EigenSystem | None = None,
    table: np.ndarray | None = None,
) -> list[SwitchEvent]:
    """Flag every (i, pair) whose approximated eigenvalues sit within delta.

    Pairs that are also fully reversed are reported with the stronger
    ``switch`` kind.  The default threshold of 0.1 suits data on the scale
    of the bundled example; it is a tuning knob, not a universal constant.
    """
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    E = _full_eigen(X, spec, eigen)
    wanted = _normalise_pairs(pairs, E.p)
    if table is None:
        table = loo_eigenvalue_table(X, spec, eigen=E)
    events = []
    for j, k in wanted:
        for i in range(1, X.n + 1):
            lo, hi = table[i - 1, j - 1], table[i - 1, k - 1]
            if abs(lo - hi) < delta:
                kind = KIND_SWITCH if lo < hi else KIND_NEAR
                events.append(SwitchEvent(
                    i, X.row_labels[i - 1], (j, k), float(lo), float(hi), kind,
                ))
    return _sorted_events(events)


def _merge_events(switches: Iterable[SwitchEvent],
                  nears: Iterable[SwitchEvent]) -> list[SwitchEvent]:
    merged: dict[tuple[int, tuple[int, int]], SwitchEvent] = {}
    for ev in nears:
        merged[(ev.obs_index, ev.pair)] = ev
    for ev in switches:
        merged[(ev.obs_index, ev.pair)] = ev
    return _sorted_events(merged.values())


def _align_ranks(full: EigenSystem, reduced: EigenSystem) -> np.ndarray:
    """Match reduced-data eigenvectors to full-data ranks, one to one.

    Returns ``where[j]`` = 0-based position, in the reduced spectrum, of the
    eigenvector best aligned with full-data rank j+1.  Uses an optimal
    assignment on absolute overlaps so that strongly rotated pairs cannot
    both claim the same reduced vector.
    """
    overlap = np.abs(full.vectors.T @ reduced.vectors)
    rows, cols = linear_sum_assignment(-overlap)
    where = np.empty(full.p, dtype=int)
    where[rows] = cols
    return where


def verify_exact(
    events: Sequence[SwitchEvent],
    X: DataMatrix,
    spec: EstimatorSpec,
    *,
    eigen: EigenSystem | None = None,
    delta: float = DEFAULT_NEAR_DELTA,
) -> list[SwitchEvent]:
    """Confirm approximation-flagged events with true re-decompositions.

    For each event the reduced matrix is decomposed and its eigenvalues are
    re-indexed by full-data rank via eigenvector alignment.  A switch event
    is confirmed when the aligned exact values are out of order; a
    near-switch event when they sit within ``delta``.
    """
    if not events:
        return []
    E = _full_eigen(X, spec, eigen)
    reduced_cache: dict[int, EigenSystem] = {}
    out = []
    for ev in events:
        if ev.obs_index not in reduced_cache:
            reduced_cache[ev.obs_index] = eigh(estimate_loo(X, spec, ev.obs_index))
        reduced = reduced_cache[ev.obs_index]
        where = _align_ranks(E, reduced)
        j, k = ev.pair
        lo = float(reduced.values[where[j - 1]])
        hi = float(reduced.values[where[k - 1]])
        confirmed = lo < hi if ev.kind == KIND_SWITCH else abs(lo - hi) < delta
        out.append(replace(ev, verified_exact=confirmed))
    return _sorted_events(out)


def recommend_L(
    X: DataMatrix,
    spec: EstimatorSpec,
    candidate_L: int,
    *,
    eigen: EigenSystem | None = None,
    events: Sequence[SwitchEvent] | None = None,
) -> RetentionAdvice:
    """Adjust a candidate retained count away from switching boundaries.

    A boundary (L, L+1) hit by switching means the retained set is not
    stable under single-observation removal.  Retaining one more component
    keeps both eigenvectors involved and is preferred; when that would mean
    retaining everything, one fewer is recommended instead.  The walk
    continues while the new boundary is also disrupted.
    """
    E = _full_eigen(X, spec, eigen)
    p = E.p
    if not 1 <= candidate_L < p:
        raise ValueError(f"candidate_L={candidate_L} out of range 1..{p - 1}")
    if events is None:
        events = detect_switching(X, spec, eigen=E)
    switched: dict[int, list[int]] = {}
    for ev in events:
        if ev.kind == KIND_SWITCH:
            switched.setdefault(ev.pair[0], []).append(ev.obs_index)

    if candidate_L not in switched:
        return RetentionAdvice(
            candidate_L,
            f"boundary ({candidate_L},{candidate_L + 1}) shows no switching; "
            f"candidate L={candidate_L} kept",
        )

    steps = [
        f"boundary ({candidate_L},{candidate_L + 1}) switches for "
        f"observations {sorted(set(switched[candidate_L]))}"
    ]
    tried = {candidate_L}
    current = candidate_L
    while True:
        if current + 1 < p and current + 1 not in tried:
            nxt = current + 1
            steps.append(f"trying L={nxt} to keep both eigenvectors of the "
                         f"disrupted pair")
        else:
            below = [c for c in range(current - 1, 0, -1) if c not in tried]
            if not below:
                raise NoValidRetentionError(
                    "every candidate boundary is disrupted by switching",
                    list(events),
                )
            nxt = below[0]
            if current + 1 == p:
                steps.append(f"L={p} would retain every component; "
                             f"falling back to L={nxt}")
            else:
                steps.append(f"no untried boundary above; falling back to "
                             f"L={nxt}")
        tried.add(nxt)
        if nxt not in switched:
            steps.append(f"boundary ({nxt},{nxt + 1}) is clean")
            return RetentionAdvice(nxt, "; ".join(steps))
        steps.append(
            f"boundary ({nxt},{nxt + 1}) also switches for observations "
            f"{sorted(set(switched[nxt]))}"
        )
        current = nxt


def hybrid_influence(
    X: DataMatrix,
    spec: EstimatorSpec,
    L: int,
    flagged: Iterable[int],
    measure: str = MEASURE_B,
    *,
    eigen: EigenSystem | None = None,
) -> list[HybridValue]:
    """Empirical influence series with exact values at the flagged indices.

    Costs one full-data decomposition plus one reduced decomposition per
    flagged observation, so a handful of exact replacements keeps the sweep
    cheap while fixing the entries the empirical formulas get wrong.
    """
    flagged_set = set(int(i) for i in flagged)
    for i in flagged_set:
        X._check_index(i)
    if measure not in (MEASURE_B, MEASURE_C):
        raise ValueError(f"measure must be 'B' or 'C', got {measure!r}")
    E = _full_eigen(X, spec, eigen)
    if measure == MEASURE_B:
        series = eif_b_series(X, L, spec, eigen=E)
        exact = lambda i: sif_b(X, spec, L, i, eigen=E)
    else:
        series = scia_series(X, L, spec, eigen=E)
        exact = lambda i: sci(X, spec, L, i, eigen=E)
    out = []
    for i in range(1, X.n + 1):
        if i in flagged_set:
            out.append(HybridValue(i, X.row_labels[i - 1], float(exact(i)), True))
        else:
            out.append(HybridValue(i, X.row_labels[i - 1], float(series[i - 1]),
                                   False))
    return out


def build_switch_report(
    X: DataMatrix,
    spec: EstimatorSpec,
    *,
    candidate_L: int,
    delta: float = DEFAULT_NEAR_DELTA,
    pairs: Sequence[tuple[int, int]] | None = None,
    verify: bool = False,
    hybrid_measure: str | None = None,
    eigen: EigenSystem | None = None,
) -> SwitchReport:
    """Run detection, recommendation and (optionally) a hybrid sweep."""
    E = _full_eigen(X, spec, eigen)
    table = loo_eigenvalue_table(X, spec, eigen=E)
    switches = detect_switching(X, spec, pairs, eigen=E, table=table)
    nears = detect_near_switch(X, spec, delta, pairs, eigen=E, table=table)
    events = _merge_events(switches, nears)
    if verify:
        events = verify_exact(events, X, spec, eigen=E, delta=delta)
    try:
        advice = recommend_L(X, spec, candidate_L, eigen=E, events=switches)
    except NoValidRetentionError as exc:
        advice = RetentionAdvice(candidate_L, f"retention advice failed: {exc}")
    hybrid = None
    if hybrid_measure is not None:
        boundary = {ev.obs_index for ev in events if ev.pair == (candidate_L,
                                                                 candidate_L + 1)}
        hybrid = hybrid_influence(X, spec, candidate_L, boundary,
                                  hybrid_measure, eigen=E)
    return SwitchReport(events, advice, delta, hybrid)


def cascade_scan(
    X: DataMatrix,
    spec: EstimatorSpec,
    max_rounds: int,
    *,
    candidate_L: int,
    delta: float = DEFAULT_NEAR_DELTA,
    pairs: Sequence[tuple[int, int]] | None = None,
) -> list[SwitchReport]:
    """Repeatedly delete switching observations and re-detect.

    Deleting the observations flagged in one round can surface new switching
    observations in the next, so the scan iterates until a round flags
    nothing or ``max_rounds`` is reached.  Event indices and labels in every
    round refer to the original matrix.
    """
    if max_rounds < 1:
        raise ValueError(f"max_rounds must be at least 1, got {max_rounds}")
    current = X
    original_pos = list(range(1, X.n + 1))
    rounds: list[SwitchReport] = []
    for _ in range(max_rounds):
        if current.n < 3:
            raise CascadeUnderflowError(
                f"only {current.n} observations remain; cannot continue the "
                "deletion cascade"
            )
        report = build_switch_report(
            current, spec, candidate_L=candidate_L, delta=delta, pairs=pairs,
        )
        report.events = [
            replace(ev, obs_index=original_pos[ev.obs_index - 1])
            for ev in report.events
        ]
        rounds.append(report)
        flagged = sorted({
            ev.obs_index for ev in report.events if ev.kind == KIND_SWITCH
        })
        if not flagged:
            break
        local = [original_pos.index(i) + 1 for i in flagged]
        try:
            current = current.drop_rows(local)
        except DataError as exc:
            raise CascadeUnderflowError(str(exc)) from exc
        original_pos = [pos for pos in original_pos if pos not in flagged]
    return rounds

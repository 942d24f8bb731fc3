"""Influence of single observations on retained eigenvector subspaces.

Two families of diagnostics, each with an exact (leave-one-out) and an
empirical (full-data-only) member:

* ``sif_b`` / ``eif_b`` -- based on the sines of the angles between the
  retained eigenvectors and their projections onto the perturbed subspace;
* ``sci`` / ``scia`` -- based on the average squared canonical correlation
  between the retained score sets with and without the observation.

The exact members cost one extra decomposition per observation; the
empirical members are computed for every observation from a single full-data
decomposition.  Sign conventions: ``sif_b``/``eif_b`` are non-positive and
``sci``/``scia`` non-negative; it is the magnitudes that matter when
comparing observations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import (
    COVARIANCE,
    DataMatrix,
    EstimatorSpec,
    estimate_loo,
    mean_vector,
)
from .eigen import (
    EigenSystem,
    GAP_TOL,
    Subspace,
    canonical_correlations,
    eigh,
    pc_scores,
    subspace,
)
from .errors import DegenerateEigenvaluesError, UnsupportedEstimatorError
from .influence import _full_eigen, _require_loo

__all__ = [
    "RecordFlags",
    "InfluenceRecord",
    "subspace_alignment",
    "sif_b",
    "eif_b",
    "sci",
    "scia",
    "eif_b_series",
    "scia_series",
    "influence_records",
]


@dataclass
class RecordFlags:
    switching: bool = False
    near_switch: bool = False
    replaced: bool = False


@dataclass
class InfluenceRecord:
    """Per-observation subspace influence values for one retained count L."""

    obs_index: int
    obs_label: str
    L: int
    sif_b: float | None = None
    eif_b: float | None = None
    sci: float | None = None
    scia: float | None = None
    flags: RecordFlags = field(default_factory=RecordFlags)
    note: str | None = None


def subspace_alignment(S_full: Subspace, S_loo: Subspace) -> float:
    """Mean alignment of the full-data basis with the perturbed subspace.

    1 - (1/L) * sum_l ||(I - P_loo) eta_l||, i.e. one minus the average sine
    of the angle between each retained eigenvector and its projection onto
    the perturbed span.  Equals 1 when the spans agree, 0 when orthogonal.
    """
    if S_full.p != S_loo.p or S_full.L != S_loo.L:
        raise ValueError(
            f"subspace shapes differ: {S_full.basis.shape} vs {S_loo.basis.shape}"
        )
    residual = S_full.basis - S_loo.basis @ (S_loo.basis.T @ S_full.basis)
    return 1.0 - float(np.mean(np.linalg.norm(residual, axis=0)))


def _boundary_note(E: EigenSystem, L: int, where: str) -> str | None:
    if L < E.p and (L, L + 1) in E.gap_warnings:
        return (
            f"eigenvalues {L} and {L + 1} of the {where} estimate are nearly "
            "tied; the retained subspace is weakly determined"
        )
    return None


def sif_b(
    X: DataMatrix,
    spec: EstimatorSpec,
    L: int,
    i: int,
    *,
    eigen: EigenSystem | None = None,
) -> float:
    """Sample influence of observation ``i`` on the retained L-dim subspace.

    (n-1) * [subspace_alignment(full basis, leave-one-out basis) - 1]; always <= 0, and
    identically 0 when L = p because both spans are the whole space.
    """
    _require_loo(X)
    X._check_index(i)
    E = _full_eigen(X, spec, eigen)
    if not 1 <= L <= E.p:
        raise ValueError(f"L={L} out of range 1..{E.p}")
    if L == E.p:
        warnings.warn(
            "L equals the full dimension; the subspace influence is "
            "identically zero",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0.0
    E_loo = eigh(estimate_loo(X, spec, i))
    for system, where in ((E, "full-data"), (E_loo, "leave-one-out")):
        note = _boundary_note(system, L, where)
        if note is not None:
            warnings.warn(note, RuntimeWarning, stacklevel=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        s_full = subspace(E, L)
        s_loo = subspace(E_loo, L)
    return (X.n - 1) * (subspace_alignment(s_full, s_loo) - 1.0)


def _check_denominators(E: EigenSystem, L: int) -> None:
    scale = 1.0 + abs(E.value(1))
    for l in range(1, L + 1):
        for k in range(L + 1, E.p + 1):
            if abs(E.value(l) - E.value(k)) < GAP_TOL * scale:
                raise DegenerateEigenvaluesError(
                    f"eigenvalues {l} and {k} are nearly equal; the empirical "
                    "influence denominator is degenerate"
                )


def _empirical_pieces(X: DataMatrix, spec: EstimatorSpec, L: int,
                      eigen: EigenSystem | None):
    if spec.kind != COVARIANCE:
        raise UnsupportedEstimatorError(
            "empirical subspace influence uses the covariance closed form; "
            f"got {spec.kind!r} (use the exact measures instead)"
        )
    E = _full_eigen(X, spec, eigen)
    if not 1 <= L < E.p:
        raise ValueError(f"L={L} out of range 1..{E.p - 1} for empirical measures")
    _check_denominators(E, L)
    scores = (X.values - mean_vector(X)) @ E.vectors
    return E, scores


def eif_b_series(
    X: DataMatrix,
    L: int,
    spec: EstimatorSpec = EstimatorSpec(),
    *,
    eigen: EigenSystem | None = None,
) -> np.ndarray:
    """Empirical subspace influence for every observation in one pass.

    Uses only the full-data eigenvalues and scores, so the entire series
    costs a single decomposition.
    """
    E, om = _empirical_pieces(X, spec, L, eigen)
    lam = E.values
    total = np.zeros(X.n)
    for l in range(L):
        inner = np.zeros(X.n)
        for k in range(L, E.p):
            inner += om[:, l] ** 2 * om[:, k] ** 2 / (lam[l] - lam[k]) ** 2
        total += np.sqrt(inner)
    return -total / L


def scia_series(
    X: DataMatrix,
    L: int,
    spec: EstimatorSpec = EstimatorSpec(),
    *,
    eigen: EigenSystem | None = None,
) -> np.ndarray:
    """Empirical score-space influence for every observation in one pass."""
    E, om = _empirical_pieces(X, spec, L, eigen)
    lam = E.values
    total = np.zeros(X.n)
    for l in range(L):
        if lam[l] == 0.0:
            raise DegenerateEigenvaluesError(
                f"eigenvalue {l + 1} is zero; the score-space influence "
                "ratio is undefined"
            )
        for k in range(L, E.p):
            total += (lam[k] / lam[l]) * om[:, l] ** 2 * om[:, k] ** 2 \
                / (lam[l] - lam[k]) ** 2
    return total / L


def eif_b(
    X: DataMatrix,
    L: int,
    i: int,
    spec: EstimatorSpec = EstimatorSpec(),
    *,
    eigen: EigenSystem | None = None,
) -> float:
    """Empirical counterpart of :func:`sif_b` for observation ``i``."""
    X._check_index(i)
    return float(eif_b_series(X, L, spec, eigen=eigen)[i - 1])


def scia(
    X: DataMatrix,
    L: int,
    i: int,
    spec: EstimatorSpec = EstimatorSpec(),
    *,
    eigen: EigenSystem | None = None,
) -> float:
    """Empirical counterpart of :func:`sci` for observation ``i``."""
    X._check_index(i)
    return float(scia_series(X, L, spec, eigen=eigen)[i - 1])


def sci(
    X: DataMatrix,
    spec: EstimatorSpec,
    L: int,
    i: int,
    *,
    eigen: EigenSystem | None = None,
) -> float:
    """Sample influence of observation ``i`` on the retained score space.

    (n-1)^2 * (1 - mean squared canonical correlation) between the n-row
    score sets built from the full-data and leave-one-out bases.  The data
    rows are the same on both sides; only the basis changes.
    """
    _require_loo(X)
    E = _full_eigen(X, spec, eigen)
    if not 1 <= L <= E.p:
        raise ValueError(f"L={L} out of range 1..{E.p}")
    E_loo = eigh(estimate_loo(X, spec, i))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = pc_scores(X, subspace(E, L))
        b = pc_scores(X, subspace(E_loo, L))
    r = canonical_correlations(a, b)
    return (X.n - 1) ** 2 * float(1.0 - np.mean(r**2))


def influence_records(
    X: DataMatrix,
    spec: EstimatorSpec,
    L: int,
    *,
    exact: bool = False,
    eigen: EigenSystem | None = None,
    jobs: int = 1,
) -> list[InfluenceRecord]:
    """Subspace influence values for every observation.

    The empirical columns are filled in one pass from a single full-data
    decomposition; when the denominators are degenerate they are left unset
    and the reason is recorded on each record instead of aborting the sweep.
    ``exact=True`` adds the sample columns at one pair of reduced
    decompositions per observation, optionally fanned out over ``jobs``
    worker threads.
    """
    _require_loo(X)
    E = _full_eigen(X, spec, eigen)
    note = _boundary_note(E, L, "full-data")
    empirical_b = empirical_c = None
    try:
        empirical_b = eif_b_series(X, L, spec, eigen=E)
        empirical_c = scia_series(X, L, spec, eigen=E)
    except (DegenerateEigenvaluesError, UnsupportedEstimatorError) as exc:
        note = str(exc) if note is None else f"{note}; {exc}"

    records = [
        InfluenceRecord(
            obs_index=i,
            obs_label=X.row_labels[i - 1],
            L=L,
            eif_b=None if empirical_b is None else float(empirical_b[i - 1]),
            scia=None if empirical_c is None else float(empirical_c[i - 1]),
            note=note,
        )
        for i in range(1, X.n + 1)
    ]
    if exact:
        def exact_pair(i: int) -> tuple[float, float]:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                b = sif_b(X, spec, L, i, eigen=E)
                c = sci(X, spec, L, i, eigen=E)
            return b, c

        if jobs > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=jobs) as pool:
                pairs = list(pool.map(exact_pair, range(1, X.n + 1)))
        else:
            pairs = [exact_pair(i) for i in range(1, X.n + 1)]
        for record, (b, c) in zip(records, pairs):
            record.sif_b = b
            record.sci = c
    return records

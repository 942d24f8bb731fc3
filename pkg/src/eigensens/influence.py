"""Influence of single observations on the eigenvalues of a symmetric estimate.

Three flavours are provided for each eigenvalue:

* ``sif_eigenvalue`` -- the sample influence, -(n-1) times the change in the
  eigenvalue when the observation is actually removed and the reduced matrix
  is re-decomposed;
* ``eif_eigenvalue`` -- the closed-form empirical influence available for the
  covariance estimator, computed from full-data quantities only;
* ``hif_eigenvalue`` -- the hybrid influence, which plugs the exact influence
  of the *matrix* into the eigenvalue formula and therefore works for any
  symmetric estimator, closed form or not.

The hybrid form is what yields the cheap post-removal eigenvalue
approximation ``approx_eigenvalues_loo``: the Rayleigh quotient of the
leave-one-out estimate at the full-data eigenvectors.  Crucially those
approximations are *not* re-sorted; they stay indexed by the full-data ranks,
which is what makes order disruptions visible to the switching detector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import (
    COVARIANCE,
    DataMatrix,
    EstimatorSpec,
    LooEstimator,
    SymmetricEstimate,
    estimate,
    estimate_loo,
    mean_vector,
)
from .eigen import EigenSystem, eigh
from .errors import DataError, DegenerateEigenvaluesError, UnsupportedEstimatorError

__all__ = [
    "LooEigenApprox",
    "EigenInfluence",
    "component_score",
    "approx_eigenvalues_loo",
    "loo_eigenvalue_table",
    "sif_eigenvalue",
    "eif_covariance",
    "eif_eigenvalue",
    "hif_eigenvalue",
    "eigen_influence",
    "eigenvalue_gradient_check",
]


@dataclass
class LooEigenApprox:
    """Approximated (and optionally exact) eigenvalues after removing one row.

    ``approx_values[j-1]`` is the Rayleigh quotient of the leave-one-out
    estimate at the j-th full-data eigenvector, kept in full-data rank order.
    """

    obs_index: int
    approx_values: np.ndarray
    exact_values: np.ndarray | None = None


@dataclass
class EigenInfluence:
    """Per-eigenvalue influence values for one observation."""

    obs_index: int
    sif: np.ndarray | None
    eif: np.ndarray | None
    hif: np.ndarray


def _full_eigen(X: DataMatrix, spec: EstimatorSpec,
                eigen: EigenSystem | None) -> EigenSystem:
    return eigen if eigen is not None else eigh(estimate(X, spec))


def component_score(E: EigenSystem, xbar: np.ndarray, x_i: np.ndarray, l: int) -> float:
    """Score of a point on the l-th eigenvector (1-based): eta_l . (x_i - xbar)."""
    return float(E.vector(l) @ (np.asarray(x_i, float) - np.asarray(xbar, float)))


def _require_loo(X: DataMatrix) -> None:
    if X.n < 3:
        raise DataError(f"leave-one-out needs at least 3 observations, got {X.n}")


def approx_eigenvalues_loo(
    X: DataMatrix,
    spec: EstimatorSpec,
    i: int,
    *,
    eigen: EigenSystem | None = None,
    exact: bool = False,
) -> LooEigenApprox:
    """Approximate all eigenvalues of the estimate with observation ``i`` removed.

    Uses the full-data eigenvectors as fixed directions, so no additional
    decomposition is required once ``eigen`` is available.  With
    ``exact=True`` the reduced matrix is also re-decomposed and the sorted
    exact eigenvalues are attached for comparison.
    """
    _require_loo(X)
    E = _full_eigen(X, spec, eigen)
    w_loo = LooEstimator(X, spec).loo(i).matrix
    approx = np.einsum("jp,jk,kp->p", E.vectors, w_loo, E.vectors)
    exact_values = None
    if exact:
        exact_values = eigh(estimate_loo(X, spec, i)).values
    return LooEigenApprox(i, approx, exact_values)


def loo_eigenvalue_table(
    X: DataMatrix,
    spec: EstimatorSpec,
    *,
    eigen: EigenSystem | None = None,
) -> np.ndarray:
    """n x p table of approximated leave-one-out eigenvalues, one row per i.

    The whole sweep reuses a single full-data decomposition and one scatter
    accumulator, so its cost is dominated by n rank-one downdates.
    """
    _require_loo(X)
    E = _full_eigen(X, spec, eigen)
    loo = LooEstimator(X, spec)
    table = np.empty((X.n, X.p))
    for i in range(1, X.n + 1):
        table[i - 1] = np.einsum(
            "jp,jk,kp->p", E.vectors, loo.loo(i).matrix, E.vectors
        )
    return table


def _check_unique(E: EigenSystem, j: int, what: str) -> None:
    if E.is_degenerate_at(j):
        raise DegenerateEigenvaluesError(
            f"eigenvalue {j} is nearly tied with a neighbour "
            f"(gap warnings {E.gap_warnings}); {what} is not defined for "
            "degenerate eigenvalues"
        )


def sif_eigenvalue(
    X: DataMatrix,
    spec: EstimatorSpec,
    j: int,
    i: int,
    *,
    eigen: EigenSystem | None = None,
) -> float:
    """Sample influence of observation ``i`` on the j-th eigenvalue (1-based).

    -(n-1) times the difference between the j-th eigenvalue with and without
    the observation, both taken in descending order from true decompositions.
    """
    _require_loo(X)
    E = _full_eigen(X, spec, eigen)
    _check_unique(E, j, "the sample influence of an eigenvalue")
    loo_values = eigh(estimate_loo(X, spec, i)).values
    return -(X.n - 1) * (float(loo_values[j - 1]) - E.value(j))


def eif_covariance(
    X: DataMatrix,
    i: int,
    spec: EstimatorSpec = EstimatorSpec(),
) -> np.ndarray:
    """Empirical influence of observation ``i`` on the covariance estimate.

    The closed form (x_i - xbar)(x_i - xbar)^T - Sigma_hat, valid only for
    the covariance estimator.
    """
    if spec.kind != COVARIANCE:
        raise UnsupportedEstimatorError(
            "the closed-form matrix influence is only available for the "
            f"covariance estimator, not {spec.kind!r}"
        )
    delta = X.row(i) - mean_vector(X)
    return np.outer(delta, delta) - estimate(X, spec).matrix


def eif_eigenvalue(
    X: DataMatrix,
    j: int,
    i: int,
    spec: EstimatorSpec = EstimatorSpec(),
    *,
    eigen: EigenSystem | None = None,
) -> float:
    """Closed-form empirical influence on the j-th covariance eigenvalue.

    The squared score of the observation on the j-th eigenvector minus
    the eigenvalue itself, using full-data quantities only.
    """
    if spec.kind != COVARIANCE:
        raise UnsupportedEstimatorError(
            "no closed-form eigenvalue influence is shipped for "
            f"{spec.kind!r} estimates; use hif_eigenvalue, which works for "
            "any symmetric estimator"
        )
    E = _full_eigen(X, spec, eigen)
    w = component_score(E, mean_vector(X), X.row(i), j)
    return w * w - E.value(j)


def hif_eigenvalue(
    X: DataMatrix,
    spec: EstimatorSpec,
    j: int,
    i: int,
    *,
    eigen: EigenSystem | None = None,
) -> float:
    """Hybrid influence on the j-th eigenvalue, valid for any estimator kind.

    Equals -(n-1) times the approximated eigenvalue shift of
    :func:`approx_eigenvalues_loo`, by construction exactly.
    """
    E = _full_eigen(X, spec, eigen)
    approx = approx_eigenvalues_loo(X, spec, i, eigen=E)
    return -(X.n - 1) * (float(approx.approx_values[j - 1]) - E.value(j))


def eigen_influence(
    X: DataMatrix,
    spec: EstimatorSpec,
    i: int,
    *,
    eigen: EigenSystem | None = None,
    exact: bool = False,
) -> EigenInfluence:
    """All per-eigenvalue influence values for one observation.

    The empirical column is present only for covariance estimates; the exact
    column only when ``exact`` is requested (it costs one decomposition).
    """
    E = _full_eigen(X, spec, eigen)
    n = X.n
    approx = approx_eigenvalues_loo(X, spec, i, eigen=E)
    hif = -(n - 1) * (approx.approx_values - E.values)
    eif = None
    if spec.kind == COVARIANCE:
        w = E.vectors.T @ (X.row(i) - mean_vector(X))
        eif = w * w - E.values
    sif = None
    if exact:
        loo_values = eigh(estimate_loo(X, spec, i)).values
        sif = -(n - 1) * (loo_values - E.values)
    return EigenInfluence(i, sif, eif, hif)


def eigenvalue_gradient_check(
    W: SymmetricEstimate | np.ndarray,
    x0: np.ndarray,
    mu: np.ndarray,
    j: int,
    eps: float = 1e-6,
) -> tuple[float, float]:
    """Finite-difference check of the eigenvalue influence direction.

    Contaminating a distribution with mass ``eps`` at ``x0`` perturbs the
    covariance to (1-eps) Sigma + eps (1-eps) (x0-mu)(x0-mu)^T.  The function
    returns the finite-difference slope of the j-th eigenvalue along that
    path together with the analytic directional derivative
    eta_j^T [(x0-mu)(x0-mu)^T - Sigma] eta_j; the caller asserts agreement.
    """
    if not 0.0 < eps <= 1e-4:
        raise ValueError(f"eps must be in (0, 1e-4], got {eps}")
    sigma = W.matrix if isinstance(W, SymmetricEstimate) else np.asarray(W, float)
    E = eigh(sigma)
    _check_unique(E, j, "the eigenvalue influence")
    delta = np.asarray(x0, float) - np.asarray(mu, float)
    rank_one = np.outer(delta, delta)
    analytic = float(E.vector(j) @ (rank_one - sigma) @ E.vector(j))
    perturbed = (1.0 - eps) * sigma + eps * (1.0 - eps) * rank_one
    fd = (eigh(perturbed).value(j) - E.value(j)) / eps
    return fd, analytic

"""Small dense-linear-algebra helpers for Gaussian and Student-t densities."""

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .errors import NumericalError, ValidationError

LOG_2PI = np.log(2.0 * np.pi)


def as_points(x, dim):
    """Coerce ``x`` to a ``(n, dim)`` float array.

    Returns the array and whether the input was a single point.
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        # a bare 1-D array is one point in R^dim, or n scalars when dim == 1
        if dim == 1 and arr.shape[0] != 1:
            arr = arr.reshape(-1, 1)
            single = False
        else:
            arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValidationError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return arr, single


def as_matrix(value, dim):
    """Accept a scalar (times identity), a 1-D diagonal or a full matrix."""
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(dim)
    if a.ndim == 1 and a.shape[0] == dim:
        return np.diag(a)
    if a.shape != (dim, dim):
        raise ValidationError(f"expected a {dim}x{dim} matrix, got shape {a.shape}")
    return a


def cholesky_spd(cov):
    """Lower Cholesky factor of a symmetric positive definite matrix."""
    cov = np.asarray(cov, dtype=float)
    if not np.all(np.isfinite(cov)):
        raise ValidationError("covariance has non-finite entries")
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        raise ValidationError("covariance is not symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValidationError("covariance is not positive definite") from None


def check_log_values(values, what):
    """Reject NaN and +inf in an array of log-densities."""
    if np.isnan(values).any():
        raise NumericalError(f"{what} returned NaN")
    if np.isposinf(values).any():
        raise NumericalError(f"{what} returned +inf")
    return values


def gaussian_logpdf(x, mean, chol):
    """Normalized Gaussian log-density for rows of ``x`` given ``cov = chol chol^T``."""
    dim = mean.shape[0]
    z = solve_triangular(chol, (x - mean).T, lower=True)
    half_logdet = np.log(np.diag(chol)).sum()
    return -0.5 * np.sum(z * z, axis=0) - half_logdet - 0.5 * dim * LOG_2PI


def student_t_logpdf(x, mean, chol, dof):
    """Normalized multivariate Student-t log-density with scale matrix ``chol chol^T``."""
    dim = mean.shape[0]
    z = solve_triangular(chol, (x - mean).T, lower=True)
    maha = np.sum(z * z, axis=0)
    half_logdet = np.log(np.diag(chol)).sum()
    const = (
        gammaln(0.5 * (dof + dim))
        - gammaln(0.5 * dof)
        - 0.5 * dim * np.log(dof * np.pi)
        - half_logdet
    )
    return const - 0.5 * (dof + dim) * np.log1p(maha / dof)

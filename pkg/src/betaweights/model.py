"""Core probability model for unit-interval survey responses.

Each response y is beta distributed with mean given by a convex combination
of the observed attribute scores and one latent score per observation:

    mu_i = w_1 x_{i,1} + ... + w_k x_{i,k} + w_{k+1} z_i

where the weights w live on the simplex. The beta distribution is
parameterized by (mean, variance) through

    a = mu * (mu (1 - mu) / sigma2 - 1)
    b = (1 - mu) * (mu (1 - mu) / sigma2 - 1)

so both shapes are positive exactly when sigma2 < mu (1 - mu). The prior is
flat Dirichlet on the weights, Beta(0.5, 0.5) on each latent score, and
uniform on sigma2 truncated at m = min_i mu_i (1 - mu_i).
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import betaln

from .errors import InvalidInputError, SupportError

# Absolute tolerance for the simplex-sum check; vectors inside it are
# renormalized, anything further off is rejected.
SIMPLEX_TOL = 1e-12

_LOG_PI = math.log(math.pi)


def weight_vector(values) -> np.ndarray:
    """Validate a weight vector and renormalize it onto the simplex.

    Entries must lie in [0, 1] and sum to 1 within ``SIMPLEX_TOL``. The last
    entry is the weight of the latent score.
    """
    w = np.asarray(values, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise InvalidInputError("weight vector must be 1-d with at least two entries")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("weight vector contains non-finite entries")
    if np.any(w < 0.0) or np.any(w > 1.0):
        raise InvalidInputError("weight entries must lie in [0, 1]")
    total = float(w.sum())
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise InvalidInputError(f"weights sum to {total!r}, not 1 within {SIMPLEX_TOL}")
    return w / total


def latent_vector(values) -> np.ndarray:
    """Validate latent scores: every entry strictly inside (0, 1)."""
    z = np.asarray(values, dtype=float)
    if z.ndim != 1:
        raise InvalidInputError("latent vector must be 1-d")
    if z.size and (not np.all(np.isfinite(z)) or np.any(z <= 0.0) or np.any(z >= 1.0)):
        raise InvalidInputError("latent scores must lie strictly in (0, 1)")
    return z


@dataclass
class Dataset:
    """Survey observations on the unit scale.

    x has one row per observation and one column per attribute, with entries
    in [0, 1]. y holds the overall scores, strictly inside (0, 1). period
    holds the group label (1 or 2) of each row. A zero-row dataset is legal
    and is used for prior-only sampling; any non-empty group must have at
    least two rows.
    """

    x: np.ndarray
    y: np.ndarray
    period: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.period = np.asarray(self.period, dtype=int).ravel()
        if self.x.size == 0:
            self.x = self.x.reshape(0, self.x.shape[-1] if self.x.ndim == 2 else 0)
        n = self.y.size
        if self.x.shape[0] != n or self.period.size != n:
            raise InvalidInputError("x, y and period must have matching row counts")
        if self.k < 1:
            raise InvalidInputError("at least one attribute column is required")
        if n == 0:
            return
        if np.any(self.x < 0.0) or np.any(self.x > 1.0) or not np.all(np.isfinite(self.x)):
            raise InvalidInputError("attribute scores must lie in [0, 1]")
        if np.any(self.y <= 0.0) or np.any(self.y >= 1.0):
            raise InvalidInputError("responses must lie strictly in (0, 1)")
        labels = set(self.period.tolist())
        if not labels <= {1, 2}:
            raise InvalidInputError(f"period labels must be 1 or 2, got {sorted(labels)}")
        for j in labels:
            if int(np.sum(self.period == j)) < 2:
                raise InvalidInputError(f"group {j} has fewer than 2 rows")

    @classmethod
    def empty(cls, k: int) -> "Dataset":
        """Zero-observation dataset with k attributes, for prior-only runs."""
        return cls(np.zeros((0, k)), np.zeros(0), np.zeros(0, dtype=int))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def k(self) -> int:
        return self.x.shape[1]

    @property
    def groups(self) -> list:
        return sorted(set(self.period.tolist()))

    def group(self, label: int) -> "Dataset":
        """Rows belonging to one period, as a new Dataset."""
        mask = self.period == label
        if not mask.any():
            raise InvalidInputError(f"no rows with period {label}")
        return Dataset(self.x[mask], self.y[mask], self.period[mask])


class BetaShape(NamedTuple):
    """Beta distribution shape pair; both entries must be positive."""

    a: float
    b: float


@dataclass
class ModelParams:
    """One group's parameter state: weights, latent scores, response variance.

    This is a plain container; use ``check_support`` to test whether a state
    is inside the model support. ``weights`` has length k+1 (the last entry
    weighs the latent score), ``latents`` has one entry per observation.
    """

    weights: np.ndarray
    latents: np.ndarray
    sigma2: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        self.latents = np.asarray(self.latents, dtype=float).ravel()
        self.sigma2 = float(self.sigma2)
        if self.weights.size < 2:
            raise InvalidInputError("weights must have at least two entries")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.latents))):
            raise InvalidInputError("parameters contain non-finite values")
        if not math.isfinite(self.sigma2) or self.sigma2 <= 0.0:
            raise InvalidInputError("sigma2 must be finite and positive")


def mean_response(weights, x_row, z: float) -> float:
    """Mean response for one observation: the convex combination of the
    attribute scores and the latent score.
    """
    w = np.asarray(weights, dtype=float)
    x = np.asarray(x_row, dtype=float)
    if x.ndim != 1 or w.size != x.size + 1:
        raise InvalidInputError(
            f"weights have {w.size} entries but the row has {x.size} attributes"
        )
    return float(x @ w[:-1] + w[-1] * z)


def mean_responses(weights, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Vector of mean responses for a whole group."""
    w = np.asarray(weights, dtype=float)
    if w.size != x.shape[1] + 1:
        raise InvalidInputError(
            f"weights have {w.size} entries but x has {x.shape[1]} columns"
        )
    z = np.asarray(z, dtype=float)
    if z.size != x.shape[0]:
        raise InvalidInputError("one latent score per observation is required")
    return x @ w[:-1] + w[-1] * z


def moments_to_shape(mu, sigma2) -> BetaShape:
    """Convert (mean, variance) to beta shape parameters.

    Accepts scalars or arrays. Raises SupportError when sigma2 >= mu(1-mu),
    where the implied shapes would not be positive.
    """
    mu_a = np.asarray(mu, dtype=float)
    s2_a = np.asarray(sigma2, dtype=float)
    if np.any(mu_a <= 0.0) or np.any(mu_a >= 1.0):
        raise InvalidInputError("mean must lie strictly in (0, 1)")
    if np.any(s2_a <= 0.0):
        raise InvalidInputError("variance must be positive")
    v = mu_a * (1.0 - mu_a)
    if np.any(s2_a >= v):
        raise SupportError("variance must be smaller than mu*(1-mu)")
    nu = v / s2_a - 1.0
    a = mu_a * nu
    b = (1.0 - mu_a) * nu
    if a.ndim == 0:
        return BetaShape(float(a), float(b))
    return BetaShape(a, b)


def shape_to_moments(shape) -> tuple:
    """Inverse of ``moments_to_shape``: beta shapes to (mean, variance)."""
    a, b = shape
    a_a = np.asarray(a, dtype=float)
    b_a = np.asarray(b, dtype=float)
    if np.any(a_a <= 0.0) or np.any(b_a <= 0.0):
        raise InvalidInputError("beta shapes must be positive")
    total = a_a + b_a
    mu = a_a / total
    sigma2 = a_a * b_a / (total * total * (total + 1.0))
    if mu.ndim == 0:
        return float(mu), float(sigma2)
    return mu, sigma2


def beta_logpdf(y, a, b):
    """Log density of Beta(a, b) at y, computed through log-gamma."""
    return (a - 1.0) * np.log(y) + (b - 1.0) * np.log1p(-y) - betaln(a, b)


def log_likelihood(params: ModelParams, data: Dataset) -> float:
    """Sum of beta log densities of the group's responses.

    Raises SupportError when the state violates sigma2 < min mu(1-mu);
    callers that need a total function should use ``log_posterior``.
    """
    if data.n == 0:
        return 0.0
    mu = mean_responses(params.weights, data.x, params.latents)
    a, b = moments_to_shape(mu, params.sigma2)
    return float(np.sum(beta_logpdf(data.y, a, b)))


def log_prior(params: ModelParams, data: Dataset, normalize_variance_prior: bool = True) -> float:
    """Log prior density at the current state.

    Flat Dirichlet over the simplex (a constant, log k!), Beta(0.5, 0.5) per
    latent score, and Unif(0, m) on sigma2 with m = min_i mu_i(1-mu_i)
    evaluated at the current weights and latents. When
    ``normalize_variance_prior`` is false the -log m term is omitted and the
    variance factor is just the truncation indicator.
    """
    w = weight_vector(params.weights)
    z = latent_vector(params.latents)
    if z.size != data.n:
        raise InvalidInputError("one latent score per observation is required")
    out = math.lgamma(w.size)
    if data.n > 0:
        mu = mean_responses(w, data.x, z)
        if np.any(mu <= 0.0) or np.any(mu >= 1.0):
            raise SupportError("a mean response is outside (0, 1)")
        m = float(np.min(mu * (1.0 - mu)))
    else:
        m = 0.25
    if params.sigma2 >= m:
        raise SupportError("sigma2 is at or beyond the truncation bound")
    if z.size:
        out += float(np.sum(-0.5 * np.log(z) - 0.5 * np.log1p(-z))) - z.size * _LOG_PI
    if normalize_variance_prior:
        out -= math.log(m)
    return out


def check_support(params: ModelParams, data: Dataset) -> bool:
    """True iff weights are on the simplex, latents are in (0, 1) and
    sigma2 < min_i mu_i(1-mu_i) strictly.
    """
    w = params.weights
    if np.any(w < 0.0) or np.any(w > 1.0) or abs(float(w.sum()) - 1.0) > SIMPLEX_TOL:
        return False
    z = params.latents
    if z.size != data.n or np.any(z <= 0.0) or np.any(z >= 1.0):
        return False
    if params.sigma2 <= 0.0:
        return False
    if data.n == 0:
        return params.sigma2 < 0.25
    mu = mean_responses(w, data.x, z)
    if np.any(mu <= 0.0) or np.any(mu >= 1.0):
        return False
    m = float(np.min(mu * (1.0 - mu)))
    return params.sigma2 < m


def log_posterior(params: ModelParams, data: Dataset, normalize_variance_prior: bool = True) -> float:
    """Log likelihood plus log prior; -inf anywhere outside the support."""
    if not check_support(params, data):
        return -math.inf
    return log_likelihood(params, data) + log_prior(
        params, data, normalize_variance_prior=normalize_variance_prior
    )

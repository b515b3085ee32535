"""Posterior post-processing: summaries, DIC, tail areas, fit and convergence.

Everything here is a pure function of completed chains (and the data they
were fit to), so the functions are safe to call from any thread and easy to
test against hand-computed values.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import Dataset, ModelParams, check_support, log_likelihood, weight_vector
from .sampler import Chain


@dataclass(frozen=True)
class SummaryRow:
    """One row of a posterior summary table."""

    label: str
    mean: float
    sd: float
    p2_5: float
    median: float
    p97_5: float

    def __post_init__(self):
        if not self.p2_5 <= self.median <= self.p97_5:
            raise InvalidInputError("summary quantiles must be monotone")


@dataclass(frozen=True)
class DicResult:
    """Deviance information criterion and its components.

    ``point_estimate`` records which plug-in anchored d_at_mean:
    "posterior_mean" normally, "closest_draw" when the mean parameters fall
    outside the support and the nearest recorded draw is used instead.
    """

    dbar: float
    d_at_mean: float
    p_d: float
    dic: float
    point_estimate: str = "posterior_mean"


def summarize(draws, label: str) -> SummaryRow:
    """Mean, SD (n-1 denominator) and 2.5/50/97.5 percentiles of a vector.

    Quantiles use linear interpolation of order statistics so the numbers
    are reproducible across implementations.
    """
    d = np.asarray(draws, dtype=float).ravel()
    if d.size == 0:
        raise InvalidInputError("cannot summarize an empty draw vector")
    if not np.all(np.isfinite(d)):
        raise InvalidInputError("draws must be finite")
    q = np.quantile(d, [0.025, 0.5, 0.975], method="linear")
    sd = float(np.std(d, ddof=1)) if d.size > 1 else 0.0
    return SummaryRow(
        label=label,
        mean=float(d.mean()),
        sd=sd,
        p2_5=float(q[0]),
        median=float(q[1]),
        p97_5=float(q[2]),
    )


def tail_area_pi0(draws) -> float:
    """min(P(draws > 0), P(draws < 0)); exact zeros count in neither tail."""
    d = np.asarray(draws, dtype=float).ravel()
    if d.size == 0:
        raise InvalidInputError("tail_area_pi0 needs at least one draw")
    n = d.size
    upper = float(np.count_nonzero(d > 0.0)) / n
    lower = float(np.count_nonzero(d < 0.0)) / n
    return min(upper, lower)


def weight_differences(chain1: Chain, chain2: Chain) -> np.ndarray:
    """Draw-wise weight differences, first chain minus second, paired by index."""
    a, b = chain1.weights, chain2.weights
    if a.shape != b.shape:
        raise InvalidInputError(
            f"chains disagree in shape: {a.shape} vs {b.shape}"
        )
    return a - b


def _slice_for(chain: Chain, data: Dataset) -> Dataset:
    """The group of observations a chain was fit to."""
    kind = chain.model_kind
    if kind == "joint":
        sub = data
    elif kind.startswith("separated:"):
        sub = data.group(int(kind.split(":", 1)[1]))
    else:
        raise InvalidInputError(f"unknown model kind {kind!r}")
    if sub.n != chain.latents.shape[1]:
        raise InvalidInputError(
            f"chain carries {chain.latents.shape[1]} latents but the data "
            f"slice has {sub.n} rows"
        )
    if sub.k + 1 != chain.n_weights:
        raise InvalidInputError("weight dimension does not match the data")
    return sub


def _deviances(chain: Chain, sub: Dataset) -> np.ndarray:
    out = np.empty(chain.n_draws)
    for i in range(chain.n_draws):
        out[i] = -2.0 * log_likelihood(chain.params(i), sub)
    return out


def _plugin_params(chain: Chain) -> tuple[ModelParams, str]:
    """Component-wise posterior mean (weights renormalized); if that point
    leaves the support, fall back to the recorded draw closest to it.
    """
    if (
        np.all(chain.weights == chain.weights[0])
        and np.all(chain.latents == chain.latents[0])
        and np.all(chain.sigma2 == chain.sigma2[0])
    ):
        # constant chain: use the draw itself so p_d is exactly zero
        return chain.params(0), "posterior_mean"
    w = weight_vector(chain.weights.mean(axis=0))
    z = chain.latents.mean(axis=0)
    s2 = float(chain.sigma2.mean())
    return ModelParams(w, z, s2), "posterior_mean"


def dic(chain: Chain, data: Dataset) -> DicResult:
    """Deviance information criterion for one fitted chain.

    dbar is the posterior mean of D = -2 log likelihood; d_at_mean evaluates
    D at the component-wise posterior mean (weights renormalized onto the
    simplex). When that plug-in point is outside the support, the recorded
    draw nearest to it is used instead and flagged in the result.
    """
    if chain.n_draws < 1:
        raise InvalidInputError("dic needs a non-empty chain")
    sub = _slice_for(chain, data)
    dev = _deviances(chain, sub)
    # a constant deviance sequence must average to itself exactly
    dbar = float(dev[0]) if np.all(dev == dev[0]) else float(dev.mean())
    params, anchor = _plugin_params(chain)
    if not check_support(params, sub):
        flat = np.hstack([chain.weights, chain.latents, chain.sigma2[:, None]])
        centre = np.hstack([params.weights, params.latents, [params.sigma2]])
        idx = int(np.argmin(((flat - centre) ** 2).sum(axis=1)))
        params, anchor = chain.params(idx), "closest_draw"
    d_at_mean = -2.0 * log_likelihood(params, sub)
    return DicResult(
        dbar=dbar,
        d_at_mean=d_at_mean,
        p_d=dbar - d_at_mean,
        dic=2.0 * dbar - d_at_mean,
        point_estimate=anchor,
    )


def dic_pair(chain1: Chain, chain2: Chain, data: Dataset) -> DicResult:
    """DIC of the two-period model: component-wise sum of the group DICs."""
    r1 = dic(chain1, data)
    r2 = dic(chain2, data)
    anchor = (
        r1.point_estimate
        if r1.point_estimate == r2.point_estimate
        else "mixed"
    )
    dbar = r1.dbar + r2.dbar
    d_at_mean = r1.d_at_mean + r2.d_at_mean
    return DicResult(
        dbar=dbar,
        d_at_mean=d_at_mean,
        p_d=dbar - d_at_mean,
        dic=2.0 * dbar - d_at_mean,
        point_estimate=anchor,
    )


def _mu_matrix(chain: Chain, sub: Dataset) -> np.ndarray:
    """(n_draws, n) matrix of model means, one row per posterior draw."""
    k = sub.k
    return chain.weights[:, :k] @ sub.x.T + chain.weights[:, -1:] * chain.latents


def _r2_draws(chain: Chain, sub: Dataset, ybar: float, sst: float) -> np.ndarray:
    resid = sub.y[None, :] - _mu_matrix(chain, sub)
    return 1.0 - (resid**2).sum(axis=1) / sst


def r_squared(chain: Chain, data: Dataset) -> SummaryRow:
    """Posterior summary of the per-draw proportion of explained variation.

    Per draw, R^2 = 1 - sum (y - mu)^2 / sum (y - ybar)^2. Values can be
    negative (fit worse than the constant model); they never exceed 1.
    """
    if chain.n_draws < 1:
        raise InvalidInputError("r_squared needs a non-empty chain")
    sub = _slice_for(chain, data)
    if sub.n < 2:
        raise InvalidInputError("r_squared needs at least two observations")
    ybar = float(sub.y.mean())
    sst = float(((sub.y - ybar) ** 2).sum())
    if sst == 0.0:
        raise InvalidInputError("all responses are equal; total variation is zero")
    return summarize(_r2_draws(chain, sub, ybar, sst), "r2")


def r_squared_pair(chain1: Chain, chain2: Chain, data: Dataset) -> SummaryRow:
    """R^2 of the two-period model, pooling residuals over both groups
    against the global response mean, pairing draws by index.
    """
    if chain1.n_draws != chain2.n_draws:
        raise InvalidInputError("chains disagree in draw count")
    sub1 = _slice_for(chain1, data)
    sub2 = _slice_for(chain2, data)
    y_all = np.concatenate([sub1.y, sub2.y])
    if y_all.size < 2:
        raise InvalidInputError("r_squared needs at least two observations")
    ybar = float(y_all.mean())
    sst = float(((y_all - ybar) ** 2).sum())
    if sst == 0.0:
        raise InvalidInputError("all responses are equal; total variation is zero")
    resid1 = sub1.y[None, :] - _mu_matrix(chain1, sub1)
    resid2 = sub2.y[None, :] - _mu_matrix(chain2, sub2)
    ssr = (resid1**2).sum(axis=1) + (resid2**2).sum(axis=1)
    return summarize(1.0 - ssr / sst, "r2")


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance at all lags via FFT."""
    n = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n]
    return acov / n


def _geyer_tau(x: np.ndarray) -> float:
    """Integrated autocorrelation time by the initial-positive-sequence rule.

    Pairs rho_{2m} + rho_{2m+1} are summed while positive; a constant
    series returns 1 by convention (its mean carries no MC error here).
    """
    n = x.size
    acov = _autocovariance(x)
    if acov[0] <= 0.0:
        return 1.0
    rho = acov / acov[0]
    tau = -1.0
    m = 0
    while 2 * m + 1 < n:
        gamma = rho[2 * m] + rho[2 * m + 1]
        if gamma <= 0.0:
            break
        tau += 2.0 * gamma
        m += 1
    return max(tau, 1e-8)


def effective_sample_size(draws) -> float:
    """ESS = n / integrated autocorrelation time (Geyer truncation).

    A perfectly constant chain returns n by convention.
    """
    x = np.asarray(draws, dtype=float).ravel()
    if x.size < 2:
        return float(x.size)
    if np.all(x == x[0]):
        return float(x.size)
    return x.size / _geyer_tau(x)


def geweke_z(draws, first: float = 0.1, last: float = 0.5) -> float:
    """Geweke convergence z-score comparing early and late segment means.

    Segment mean variances use the spectral estimate var * tau / len. A
    constant chain returns 0 by convention.
    """
    x = np.asarray(draws, dtype=float).ravel()
    if x.size < 10:
        raise InvalidInputError("geweke_z needs at least 10 draws")
    if np.all(x == x[0]):
        return 0.0
    a = x[: max(int(first * x.size), 2)]
    b = x[-max(int(last * x.size), 2):]
    var_a = np.var(a, ddof=1) * _geyer_tau(a) / a.size
    var_b = np.var(b, ddof=1) * _geyer_tau(b) / b.size
    denom = math.sqrt(var_a + var_b)
    if denom == 0.0:
        return 0.0
    return float((a.mean() - b.mean()) / denom)


def convergence_report(chain: Chain, include_latents: bool = False) -> list:
    """Per-parameter (label, ess, geweke_z) rows for the main parameters.

    Weights and sigma^2 are always reported; the per-observation latents
    only when asked for, since they are nuisance parameters and numerous.
    """
    if chain.n_draws < 100:
        raise InvalidInputError("convergence_report needs at least 100 draws")
    rows = []
    for j in range(chain.n_weights):
        col = chain.weights[:, j]
        rows.append((f"w{j + 1}", effective_sample_size(col), geweke_z(col)))
    rows.append(
        ("sigma2", effective_sample_size(chain.sigma2), geweke_z(chain.sigma2))
    )
    if include_latents:
        for i in range(chain.latents.shape[1]):
            col = chain.latents[:, i]
            rows.append((f"z{i + 1}", effective_sample_size(col), geweke_z(col)))
    return rows

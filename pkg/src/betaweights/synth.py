"""Synthetic data generation and a brute-force posterior oracle.

``generate_dataset`` draws survey-like data from the model's own generative
process, so sampler output can be checked against a known truth.

``grid_oracle_posterior`` computes posterior marginal means for tiny
instances (k = 2, n <= 4) by deterministic quadrature over the full
parameter space. It shares no code with the sampler: weights live on an
equal-area triangulation of the simplex, each latent is integrated on an
arcsine-substituted grid that absorbs its Beta(0.5, 0.5) prior, and the
variance on a midpoint grid. The coupling of all latents through
m = min_i mu_i(1 - mu_i) in the variance prior is handled exactly by
decomposing the latent integral over the levels the minimum can take,
so the cost stays linear in the latent grid instead of exponential.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .errors import InfeasibleTruthError, InvalidInputError
from .model import Dataset, weight_vector

X_LAWS = ("grid11",)  # independent uniform on {0, 0.1, ..., 1}

_SIGMA2_CAP = 0.9 * 0.25  # margin below the best achievable variance bound


@dataclass(frozen=True)
class Truth:
    """Generating parameters for synthetic data (shared by both periods)."""

    weights: tuple
    sigma2: float
    n_per_group: int
    k: int
    x_law: str = "grid11"

    def __post_init__(self):
        w = weight_vector(self.weights)
        if w.size != self.k + 1:
            raise InvalidInputError(
                f"need {self.k + 1} weights for k = {self.k}, got {w.size}"
            )
        object.__setattr__(self, "weights", tuple(float(v) for v in w))
        if not 0.0 < self.sigma2 < _SIGMA2_CAP:
            raise InvalidInputError(
                f"sigma2 must lie in (0, {_SIGMA2_CAP}) to leave support margin"
            )
        if self.n_per_group < 2:
            raise InvalidInputError("n_per_group must be at least 2")
        if self.k < 1:
            raise InvalidInputError("k must be at least 1")
        if self.x_law not in X_LAWS:
            raise InvalidInputError(f"unknown x_law {self.x_law!r}")

    @property
    def weight_array(self) -> np.ndarray:
        return np.array(self.weights)


def generate_dataset(truth: Truth, seed: int) -> tuple:
    """Draw a two-period dataset from the model; returns (dataset, latents).

    Per row: attributes from the 11-point grid, z ~ Beta(0.5, 0.5), then
    y ~ Beta(a, b) at the implied mean. Rows violating the support
    constraint sigma2 < mu(1 - mu), and rows whose y lands outside
    (0.001, 0.999), are rejected and redrawn; persistent rejection (rate
    above 99%) raises an infeasible-truth error. Deterministic given
    (truth, seed).
    """
    rng = np.random.default_rng(seed)
    w = truth.weight_array
    k = truth.k
    xs, ys, zs, periods = [], [], [], []
    attempted = accepted = 0
    for label in (1, 2):
        got = 0
        while got < truth.n_per_group:
            batch = max(2 * (truth.n_per_group - got), 64)
            x = rng.integers(0, 11, size=(batch, k)) / 10.0
            z = rng.beta(0.5, 0.5, size=batch)
            mu = x @ w[:k] + w[k] * z
            v = mu * (1.0 - mu)
            ok = (v > truth.sigma2) & (z > 0.0) & (z < 1.0)
            y = np.zeros(batch)
            if ok.any():
                nu = v[ok] / truth.sigma2 - 1.0
                y[ok] = rng.beta(mu[ok] * nu, (1.0 - mu[ok]) * nu)
            keep = ok & (y > 0.001) & (y < 0.999)
            attempted += batch
            accepted += int(keep.sum())
            take = np.flatnonzero(keep)[: truth.n_per_group - got]
            xs.append(x[take])
            ys.append(y[take])
            zs.append(z[take])
            got += take.size
            if attempted >= 1000 and accepted < 0.01 * attempted:
                raise InfeasibleTruthError(
                    f"rejection rate {1 - accepted / attempted:.4f} exceeds 0.99; "
                    "the requested truth cannot generate data"
                )
        periods.append(np.full(truth.n_per_group, label))
    data = Dataset(
        x=np.vstack(xs),
        y=np.concatenate(ys),
        period=np.concatenate(periods),
    )
    return data, np.concatenate(zs)


@dataclass(frozen=True)
class OracleResult:
    """Marginal posterior means from deterministic quadrature."""

    weight_means: tuple
    sigma2_mean: float
    grid_resolution: int
    z_resolution: int
    sigma2_resolution: int
    normalize_variance_prior: bool


def _simplex_centroids(r: int) -> np.ndarray:
    """Centroids of the r^2 equal-area triangles tiling the 2-simplex.

    The triangulation is invariant under coordinate permutations, so the
    quadrature inherits the exchangeability of the flat Dirichlet prior.
    """
    cells = []
    for i in range(r):
        for j in range(r - i):
            cells.append((3 * i + 1, 3 * j + 1, 3 * (r - i - j) - 2))
    for i in range(r - 1):
        for j in range(r - 1 - i):
            cells.append((3 * i + 2, 3 * j + 2, 3 * (r - i - j) - 4))
    return np.array(cells, dtype=float) / (3.0 * r)


def grid_oracle_posterior(data: Dataset, grid_resolution: int,
                          normalize_variance_prior: bool = True,
                          z_resolution: int | None = None,
                          sigma2_resolution: int | None = None) -> OracleResult:
    """Posterior marginal means of the three weights and sigma^2 for a tiny
    instance, by exhaustive quadrature of the exact unnormalized posterior.

    Restricted to k = 2 and n <= 4 as a cost guard. Resolutions of the
    latent and variance grids default to grid_resolution and
    3 * grid_resolution. Deterministic: fixed grids, fixed summation order.
    """
    if data.k != 2:
        raise InvalidInputError("the oracle handles exactly k = 2 attributes")
    if data.n > 4:
        raise InvalidInputError("the oracle is limited to n <= 4 observations")
    if grid_resolution < 4:
        raise InvalidInputError("grid_resolution must be at least 4")
    rz = z_resolution if z_resolution is not None else grid_resolution
    rs = sigma2_resolution if sigma2_resolution is not None else 3 * grid_resolution
    if rz < 4 or rs < 4:
        raise InvalidInputError("grid resolutions must be at least 4")

    if data.n == 0:
        # flat prior: Dirichlet(1,1,1) weight means and Unif(0, 1/4) variance
        return OracleResult((1 / 3, 1 / 3, 1 / 3), 0.125, grid_resolution,
                            rz, rs, normalize_variance_prior)

    n = data.n
    ws = _simplex_centroids(grid_resolution)
    u = (np.arange(rz) + 0.5) / rz
    z_grid = np.sin(0.5 * math.pi * u) ** 2  # absorbs the Beta(0.5,0.5) prior
    s_grid = (np.arange(rs) + 0.5) * (0.25 / rs)
    log_y = np.log(data.y)[:, None, None]
    log1m_y = np.log1p(-data.y)[:, None, None]

    total = 0.0
    w_acc = np.zeros(3)
    s_acc = 0.0
    for w in ws:
        mu = (data.x @ w[:2])[:, None] + w[2] * z_grid[None, :]  # (n, rz)
        v = mu * (1.0 - mu)
        v3 = v[:, :, None]
        ok = v3 > s_grid[None, None, :]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            nu = np.where(ok, v3 / s_grid[None, None, :] - 1.0, 1.0)
            a = mu[:, :, None] * nu
            b = (1.0 - mu[:, :, None]) * nu
            logg = (a - 1.0) * log_y + (b - 1.0) * log1m_y - betaln(a, b)
        g = np.where(ok, np.exp(logg), 0.0)  # (n, rz, rs)

        order = np.argsort(v, axis=1)
        v_sorted = np.take_along_axis(v, order, axis=1)
        g_sorted = np.take_along_axis(g, order[:, :, None], axis=1)
        suffix = np.zeros((n, rz + 1, rs))
        suffix[:, :rz] = np.cumsum(g_sorted[:, ::-1, :], axis=1)[:, ::-1, :]

        levels = np.unique(v)  # ascending; the values min_i v_i can take
        ss = np.empty((n, levels.size, rs))
        for i in range(n):
            pos = np.searchsorted(v_sorted[i], levels, side="left")
            ss[i] = suffix[i, pos]
        amount = ss.prod(axis=0)  # (L, rs): mass with every v_i >= level
        mass = amount.copy()
        mass[:-1] -= amount[1:]
        np.clip(mass, 0.0, None, out=mass)

        live = s_grid[None, :] < levels[:, None]  # sigma2 below the bound
        if normalize_variance_prior:
            psi = np.where(live, 1.0 / levels[:, None], 0.0)
        else:
            psi = live.astype(float)
        col = (mass * psi).sum(axis=0)  # (rs,)
        cw = float(col.sum())
        total += cw
        w_acc += w * cw
        s_acc += float((s_grid * col).sum())

    if not (total > 0.0) or not math.isfinite(total):
        raise InvalidInputError("oracle mass vanished; data incompatible with grid")
    wm = w_acc / total
    return OracleResult(
        weight_means=tuple(float(x) for x in wm),
        sigma2_mean=s_acc / total,
        grid_resolution=grid_resolution,
        z_resolution=rz,
        sigma2_resolution=rs,
        normalize_variance_prior=normalize_variance_prior,
    )

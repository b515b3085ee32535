"""Metropolis-within-Gibbs sampler for the simplex-weight beta regression.

Each iteration sweeps three blocks: a random-walk update of the weight
vector in additive log-ratio coordinates, a scan of single-site logit-space
updates of the latent scores, and a log-space update of the response
variance. Proposal scales adapt toward standard target acceptance rates
during burn-in only, so the post-burn-in chain has a fixed kernel.

The variance prior Unif(0, m) ties all blocks together through
m = min_i mu_i (1 - mu_i): every update accounts for the truncation
indicator, and for the -log m normalization term when it is enabled.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import betaln, expit

from .errors import InitializationError, InvalidInputError, SupportError
from .model import Dataset, ModelParams, check_support

_STEP_LOG_MIN = -12.0
_STEP_LOG_MAX = 6.0


@dataclass(frozen=True)
class SamplerConfig:
    """Run-length and adaptation settings for one chain."""

    iterations: int = 3000
    burnin: int = 1000
    thin: int = 1
    seed: int = 0
    target_accept_weights: float = 0.234
    target_accept_scalar: float = 0.44
    adapt_during_burnin: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidInputError("iterations must be positive")
        if not 0 <= self.burnin < self.iterations:
            raise InvalidInputError("burnin must satisfy 0 <= burnin < iterations")
        if self.thin < 1:
            raise InvalidInputError("thin must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must fit in 64 unsigned bits")
        for v in (self.target_accept_weights, self.target_accept_scalar):
            if not 0.0 < v < 1.0:
                raise InvalidInputError("target acceptance rates must lie in (0, 1)")

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burnin) // self.thin


@dataclass
class Chain:
    """Post-burn-in, thinned draws of one model fit."""

    weights: np.ndarray  # (n_draws, k+1)
    latents: np.ndarray  # (n_draws, n_obs)
    sigma2: np.ndarray  # (n_draws,)
    config: SamplerConfig
    model_kind: str  # "joint" or "separated:<group>"
    acceptance_rates: dict
    steps: dict  # proposal scales frozen at the end of burn-in
    step_history: dict | None = None

    @property
    def n_draws(self) -> int:
        return self.sigma2.size

    @property
    def n_weights(self) -> int:
        return self.weights.shape[1]

    def params(self, i: int) -> ModelParams:
        return ModelParams(self.weights[i].copy(), self.latents[i].copy(), float(self.sigma2[i]))


def alr_transform(weights) -> np.ndarray:
    """Additive log-ratio chart: log of each weight over the last one."""
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0.0):
        raise InvalidInputError("additive log-ratio requires strictly positive weights")
    return np.log(w[:-1]) - math.log(w[-1])


def alr_inverse(coords) -> np.ndarray:
    """Map unconstrained coordinates back to the simplex (inverse of alr)."""
    u = np.asarray(coords, dtype=float)
    g = np.append(u, 0.0)
    g = g - g.max()
    e = np.exp(g)
    return e / e.sum()


def acceptance_probability(log_ratio: float) -> float:
    """Metropolis acceptance probability min(1, exp(log_ratio))."""
    if log_ratio >= 0.0:
        return 1.0
    p = math.exp(log_ratio) if log_ratio > -745.0 else 0.0
    return p if math.isfinite(p) else 0.0


def mh_accept(log_ratio: float, rng) -> bool:
    """One Metropolis accept/reject decision; always consumes one uniform."""
    u = rng.random()
    if log_ratio >= 0.0:
        return True
    return u < acceptance_probability(log_ratio)


class GroupTarget:
    """Precomputed posterior pieces for one group of observations.

    ``include_likelihood=False`` turns the data term off, leaving the prior
    (with its truncation constraint); used to test prior recovery.
    """

    def __init__(self, x, y, include_likelihood=True, normalize_variance_prior=True):
        self.x = np.atleast_2d(np.asarray(x, dtype=float))
        self.y = np.asarray(y, dtype=float).ravel()
        self.n = self.y.size
        self.k = self.x.shape[1]
        self.include_likelihood = bool(include_likelihood) and self.n > 0
        self.normalize = bool(normalize_variance_prior)
        self.log_y = np.log(self.y) if self.n else np.zeros(0)
        self.log1m_y = np.log1p(-self.y) if self.n else np.zeros(0)

    def loglik_terms(self, mu: np.ndarray, sigma2: float) -> np.ndarray:
        """Per-observation beta log density; -inf where the support fails."""
        if not self.include_likelihood:
            return np.zeros(self.n)
        out = np.full(self.n, -np.inf)
        v = mu * (1.0 - mu)
        ok = v > sigma2
        if ok.any():
            nu = v[ok] / sigma2 - 1.0
            a = mu[ok] * nu
            b = (1.0 - mu[ok]) * nu
            out[ok] = (
                (a - 1.0) * self.log_y[ok]
                + (b - 1.0) * self.log1m_y[ok]
                - betaln(a, b)
            )
        return out


@dataclass
class _State:
    """Mutable chain state with cached mean/variance/likelihood vectors."""

    w: np.ndarray
    z: np.ndarray
    sigma2: float
    base: np.ndarray  # x @ w[:-1]
    mu: np.ndarray
    v: np.ndarray  # mu * (1 - mu)
    m: float  # min(v), or 0.25 with no observations
    ll: np.ndarray  # per-observation log likelihood terms

    def params(self) -> ModelParams:
        return ModelParams(self.w.copy(), self.z.copy(), self.sigma2)


def _build_state(target: GroupTarget, w, z, sigma2: float) -> _State:
    w = np.asarray(w, dtype=float).copy()
    z = np.asarray(z, dtype=float).copy()
    base = target.x @ w[:-1] if target.n else np.zeros(0)
    mu = base + w[-1] * z
    v = mu * (1.0 - mu)
    m = float(v.min()) if target.n else 0.25
    if sigma2 >= m or sigma2 <= 0.0:
        raise SupportError("state is outside the variance truncation region")
    ll = target.loglik_terms(mu, sigma2)
    return _State(w=w, z=z, sigma2=float(sigma2), base=base, mu=mu, v=v, m=m, ll=ll)


def _update_weights_inplace(state: _State, target: GroupTarget, rng, step: float):
    """Block random-walk move of the weights in alr coordinates.

    Returns (accepted, acceptance_probability).
    """
    if step == 0.0:
        rng.standard_normal(state.w.size - 1)
        rng.random()
        return True, 1.0
    u = alr_transform(state.w)
    up = u + step * rng.standard_normal(u.size)
    wp = alr_inverse(up)
    log_ratio = -math.inf
    if np.all(wp > 0.0):
        if target.n:
            basep = target.x @ wp[:-1]
            mup = basep + wp[-1] * state.z
            vp = mup * (1.0 - mup)
            mp = float(vp.min())
        else:
            basep = state.base
            mup = state.mu
            vp = state.v
            mp = 0.25
        if state.sigma2 < mp:
            llp = target.loglik_terms(mup, state.sigma2)
            # flat Dirichlet prior cancels; alr Jacobian is the product of
            # all weight entries
            log_ratio = (
                float(llp.sum() - state.ll.sum())
                + float(np.log(wp).sum() - np.log(state.w).sum())
            )
            if target.normalize and target.n:
                log_ratio += math.log(state.m) - math.log(mp)
    alpha = acceptance_probability(log_ratio)
    if mh_accept(log_ratio, rng):
        state.w = wp
        state.base = basep
        state.mu = mup
        state.v = vp
        state.m = mp
        state.ll = llp
        return True, alpha
    return False, alpha


def _update_latents_inplace(state: _State, target: GroupTarget, rng, steps: np.ndarray, order=None):
    """Sequential single-site logit random-walk scan over the latent scores.

    The per-site acceptance ratio splits into a part that only involves
    site i (likelihood term, Beta(0.5, 0.5) prior, logit Jacobian),
    precomputed vectorized, and the truncation coupling through
    m = min_i mu_i (1 - mu_i), resolved inside the scan with O(1)
    bookkeeping per site.

    Returns (accept_count, per-site acceptance probabilities).
    """
    n = target.n
    if n == 0:
        return 0, np.zeros(0)
    # resync cached vectors so incremental updates cannot drift
    wl = float(state.w[-1])
    mu = state.base + wl * state.z
    v = mu * (1.0 - mu)
    ll = target.loglik_terms(mu, state.sigma2)

    z = state.z
    eps = rng.standard_normal(n)
    delta = steps * eps
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logit_z = np.log(z) - np.log1p(-z)
        zp = expit(logit_z + delta)
        zp = np.where(delta == 0.0, z, zp)
        mup = mu + wl * (zp - z)
        llp = target.loglik_terms(mup, state.sigma2)
        sep = (
            llp
            - ll
            + 0.5 * (np.log(zp) + np.log1p(-zp))
            - 0.5 * (np.log(z) + np.log1p(-z))
        )
    vp = mup * (1.0 - mup)
    logu = np.log(rng.random(n))

    # plain lists keep the per-site loop cheap
    z_l = z.tolist()
    mu_l = mu.tolist()
    v_l = v.tolist()
    ll_l = ll.tolist()
    zp_l = zp.tolist()
    mup_l = mup.tolist()
    vp_l = vp.tolist()
    llp_l = llp.tolist()
    sep_l = sep.tolist()
    logu_l = logu.tolist()

    sigma2 = state.sigma2
    m_cur = min(v_l)
    normalize = target.normalize
    alphas = [0.0] * n
    accepted = 0
    indices = range(n) if order is None else order
    for i in indices:
        lr = sep_l[i]
        vpi = vp_l[i]
        if not (lr > -math.inf) or vpi <= sigma2:
            continue
        vi = v_l[i]
        if vi > m_cur:
            rest = m_cur
        else:
            v_l[i] = math.inf
            rest = min(v_l)
            v_l[i] = vi
        m_new = vpi if vpi < rest else rest
        if normalize:
            lr += math.log(m_cur) - math.log(m_new)
        alphas[i] = acceptance_probability(lr)
        if logu_l[i] < lr:
            z_l[i] = zp_l[i]
            mu_l[i] = mup_l[i]
            v_l[i] = vpi
            ll_l[i] = llp_l[i]
            m_cur = m_new
            accepted += 1

    state.z = np.array(z_l)
    state.mu = np.array(mu_l)
    state.v = np.array(v_l)
    state.ll = np.array(ll_l)
    state.m = m_cur
    return accepted, np.array(alphas)


def _update_sigma2_inplace(state: _State, target: GroupTarget, rng, step: float):
    """Random-walk move of log sigma2; proposals beyond the bound are rejected."""
    if step == 0.0:
        rng.standard_normal()
        rng.random()
        return True, 1.0
    ls = math.log(state.sigma2)
    lsp = ls + step * rng.standard_normal()
    s2p = math.exp(lsp)
    log_ratio = -math.inf
    if 0.0 < s2p < state.m:
        llp = target.loglik_terms(state.mu, s2p)
        log_ratio = float(llp.sum() - state.ll.sum()) + (lsp - ls)
    alpha = acceptance_probability(log_ratio)
    if mh_accept(log_ratio, rng):
        state.sigma2 = s2p
        state.ll = llp
        return True, alpha
    return False, alpha


def _state_from_params(target: GroupTarget, params: ModelParams, data: Dataset) -> _State:
    if not check_support(params, data):
        raise SupportError("starting parameters are outside the support")
    return _build_state(target, params.weights, params.latents, params.sigma2)


def update_weights(params: ModelParams, data: Dataset, rng, step: float,
                   include_likelihood=True, normalize_variance_prior=True):
    """One Metropolis move of the weight block. Returns (params, accepted)."""
    target = GroupTarget(data.x, data.y, include_likelihood, normalize_variance_prior)
    state = _state_from_params(target, params, data)
    accepted, _ = _update_weights_inplace(state, target, rng, step)
    return state.params(), accepted


def update_latents(params: ModelParams, data: Dataset, rng, steps, order=None,
                   include_likelihood=True, normalize_variance_prior=True):
    """One scan of single-site latent updates. Returns (params, accept_count)."""
    target = GroupTarget(data.x, data.y, include_likelihood, normalize_variance_prior)
    state = _state_from_params(target, params, data)
    steps = np.broadcast_to(np.asarray(steps, dtype=float), (target.n,)).copy()
    count, _ = _update_latents_inplace(state, target, rng, steps, order=order)
    return state.params(), count


def update_sigma2(params: ModelParams, data: Dataset, rng, step: float,
                  include_likelihood=True, normalize_variance_prior=True):
    """One Metropolis move of the variance. Returns (params, accepted)."""
    target = GroupTarget(data.x, data.y, include_likelihood, normalize_variance_prior)
    state = _state_from_params(target, params, data)
    accepted, _ = _update_sigma2_inplace(state, target, rng, step)
    return state.params(), accepted


def initial_state(target: GroupTarget) -> _State:
    """Deterministic starting point: uniform weights, latents set to the
    clamped responses, variance at half its truncation bound.
    """
    d = target.k + 1
    w0 = np.full(d, 1.0 / d)
    z0 = np.clip(target.y, 0.01, 0.99) if target.n else np.zeros(0)
    base = target.x @ w0[:-1] if target.n else np.zeros(0)
    mu0 = base + w0[-1] * z0
    v0 = mu0 * (1.0 - mu0)
    m0 = float(v0.min()) if target.n else 0.25
    if not (m0 > 0.0):
        raise InitializationError("initial mean responses leave no room for the variance")
    try:
        return _build_state(target, w0, z0, 0.5 * m0)
    except SupportError as exc:  # pragma: no cover - defensive
        raise InitializationError(str(exc)) from exc


def run_chain(data: Dataset, config: SamplerConfig, model_kind: str = "joint",
              group: int | None = None, normalize_variance_prior: bool = True,
              record_step_history: bool = False) -> Chain:
    """Run one MCMC chain and return its post-burn-in, thinned draws.

    ``model_kind`` is "joint" (all rows, one parameter set) or "separated"
    with ``group`` naming the period to fit. A zero-row dataset runs the
    prior-only chain, which is used by the recovery tests. Fully
    deterministic for a fixed (data, model_kind, config).
    """
    if model_kind == "joint":
        sub = data
        label = "joint"
    elif model_kind == "separated":
        if group not in (1, 2):
            raise InvalidInputError("separated runs need group=1 or group=2")
        sub = data.group(group)
        label = f"separated:{group}"
    else:
        raise InvalidInputError(f"unknown model kind {model_kind!r}")

    target = GroupTarget(sub.x, sub.y, include_likelihood=sub.n > 0,
                         normalize_variance_prior=normalize_variance_prior)
    rng = np.random.default_rng(config.seed)
    state = initial_state(target)

    d = target.k + 1
    log_step_w = math.log(2.38 / math.sqrt(max(d - 1, 1)))
    log_steps_z = np.zeros(target.n)
    log_step_s = math.log(0.5)

    n_draws = config.n_draws
    draws_w = np.empty((n_draws, d))
    draws_z = np.empty((n_draws, target.n))
    draws_s = np.empty(n_draws)

    acc_w = acc_s = 0
    acc_z = 0
    post_iters = 0
    history = {"weights": [], "latents": [], "sigma2": []} if record_step_history else None

    pos = 0
    for t in range(config.iterations):
        in_burnin = t < config.burnin
        moved_w, alpha_w = _update_weights_inplace(state, target, rng, math.exp(log_step_w))
        n_acc_z, alphas_z = _update_latents_inplace(
            state, target, rng, np.exp(log_steps_z)
        )
        moved_s, alpha_s = _update_sigma2_inplace(state, target, rng, math.exp(log_step_s))

        if in_burnin and config.adapt_during_burnin:
            gamma = (t + 1.0) ** -0.6
            log_step_w += gamma * (alpha_w - config.target_accept_weights)
            log_step_w = min(max(log_step_w, _STEP_LOG_MIN), _STEP_LOG_MAX)
            if target.n:
                log_steps_z += gamma * (alphas_z - config.target_accept_scalar)
                np.clip(log_steps_z, _STEP_LOG_MIN, _STEP_LOG_MAX, out=log_steps_z)
            log_step_s += gamma * (alpha_s - config.target_accept_scalar)
            log_step_s = min(max(log_step_s, _STEP_LOG_MIN), _STEP_LOG_MAX)

        if not in_burnin:
            post_iters += 1
            acc_w += moved_w
            acc_z += n_acc_z
            acc_s += moved_s
        if record_step_history:
            history["weights"].append(math.exp(log_step_w))
            history["latents"].append(np.exp(log_steps_z).copy())
            history["sigma2"].append(math.exp(log_step_s))

        if not in_burnin and (t - config.burnin + 1) % config.thin == 0:
            if not (state.sigma2 < state.m):
                raise RuntimeError("recorded draw violates the support constraint")
            if state.z.size and (state.z.min() <= 0.0 or state.z.max() >= 1.0):
                raise RuntimeError("recorded draw has a latent outside (0, 1)")
            draws_w[pos] = state.w
            draws_z[pos] = state.z
            draws_s[pos] = state.sigma2
            pos += 1

    rates = {
        "weights": acc_w / post_iters if post_iters else math.nan,
        "latents": acc_z / (post_iters * target.n) if post_iters and target.n else math.nan,
        "sigma2": acc_s / post_iters if post_iters else math.nan,
    }
    steps = {
        "weights": math.exp(log_step_w),
        "latents": np.exp(log_steps_z),
        "sigma2": math.exp(log_step_s),
    }
    if record_step_history:
        history = {
            "weights": np.array(history["weights"]),
            "latents": np.array(history["latents"]),
            "sigma2": np.array(history["sigma2"]),
        }
    return Chain(
        weights=draws_w,
        latents=draws_z,
        sigma2=draws_s,
        config=config,
        model_kind=label,
        acceptance_rates=rates,
        steps=steps,
        step_history=history,
    )


def run_separated_pair(data: Dataset, config: SamplerConfig,
                       normalize_variance_prior: bool = True) -> tuple:
    """Fit both periods independently; the second chain uses seed + 1."""
    present = data.groups
    for j in (1, 2):
        if j not in present:
            raise InvalidInputError(f"dataset has no rows for period {j}")
    first = run_chain(data, config, "separated", 1,
                      normalize_variance_prior=normalize_variance_prior)
    second_cfg = replace(config, seed=(config.seed + 1) % 2**64)
    second = run_chain(data, second_cfg, "separated", 2,
                       normalize_variance_prior=normalize_variance_prior)
    return first, second

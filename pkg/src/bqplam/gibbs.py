"""Partially collapsed Gibbs sampler for spike-and-slab additive quantile regression.

One sweep updates, in order: the linear block (each indicator collapsed
over its coefficient, then the coefficient given the fresh indicator),
the intercept, the nonlinear block (same interleaving), the scale, the
slab variances, and the mixture latents. Drawing each coefficient
immediately after its collapsed indicator is what makes the partially
collapsed scheme valid; reversing that order targets the wrong law.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import expit

from .model import ChainState, eval_f
from .samplers import GigParams, sample_gig, sample_inverse_gamma


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters of the hierarchy.

    ``pi`` switches the indicator prior from the default size-balanced
    combinatorial prior to independent Bernoulli(pi). The per-block rate
    overrides and the optional proper intercept prior default to the
    shared values and exist mostly for diagnostics (e.g. scale-matched
    reruns); production fits leave them unset.
    """

    a1: float = 0.5
    a2: float = 0.5
    pi: float = None
    a2_delta0: float = None
    a2_sigma: float = None
    a2_tau: float = None
    mu_mean: float = None   # None -> improper flat prior on the intercept
    mu_var: float = None

    def __post_init__(self):
        if self.a1 <= 0.0 or self.a2 <= 0.0:
            raise ValueError("inverse-gamma hyperparameters must be positive")
        if self.pi is not None and not (0.0 < self.pi < 1.0):
            raise ValueError("Bernoulli indicator prior needs pi in (0, 1)")

    @property
    def rate_delta0(self):
        return self.a2 if self.a2_delta0 is None else self.a2_delta0

    @property
    def rate_sigma(self):
        return self.a2 if self.a2_sigma is None else self.a2_sigma

    @property
    def rate_tau(self):
        return self.a2 if self.a2_tau is None else self.a2_tau


@dataclass(frozen=True)
class GibbsConfig:
    iterations: int = 5000
    burn_in: int = 2500
    thinning: int = 1
    prior: PriorConfig = field(default_factory=PriorConfig)
    store_traces: bool = False

    def __post_init__(self):
        if self.iterations <= 0 or self.burn_in < 0 or self.thinning <= 0:
            raise ValueError("iterations/thinning must be positive, burn_in nonnegative")
        if self.burn_in >= self.iterations:
            raise ValueError("burn_in must be smaller than iterations")

    @property
    def n_kept(self):
        return (self.iterations - self.burn_in - 1) // self.thinning + 1


@dataclass
class FitModel:
    """Everything one chain needs: data, design blocks, priors, and structure flags."""

    y: np.ndarray
    system: object              # SplineSystem, possibly variant-modified
    quant: object               # QuantileSpec, or None for the Gaussian mean engine
    prior: PriorConfig
    force_linear: np.ndarray    # (p,) bool, pins gamma_beta[j] = 0
    select_alpha: bool = True
    select_beta: bool = True
    tag: str = "BQPLAM"
    meta: dict = field(default_factory=dict)

    @property
    def mixture(self):
        return self.quant is not None

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.system.p

    @property
    def beta_width(self):
        return self.system.B[0].shape[1] if self.system.B is not None else 0

    def logdet_omega(self, j):
        """Cached log-determinant of the j-th penalty matrix."""
        cache = getattr(self, "_ld_omega", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_ld_omega", cache)
        if j not in cache:
            sign, val = np.linalg.slogdet(self.system.omega[j])
            if sign <= 0:
                raise np.linalg.LinAlgError(f"penalty matrix {j} is not positive definite")
            cache[j] = val
        return cache[j]


def error_precision(state, model):
    """Diagonal of the inverse error covariance."""
    if model.mixture:
        return 1.0 / (model.quant.k2 * state.delta0 * state.e)
    return np.full(model.n, 1.0 / state.delta0)


def latent_offset(state, model):
    """Mean offset k1 * e of the mixture representation (zero for the mean engine)."""
    if model.mixture:
        return model.quant.k1 * state.e
    return 0.0


def full_residual(state, model):
    """y minus the regression function minus the mixture offset."""
    return model.y - eval_f(state, model.system) - latent_offset(state, model)


def initial_state(model):
    """Deterministic all-in start: coefficients zero, indicators on, unit scales."""
    p, n, kb = model.p, model.n, model.beta_width
    mu0 = float(np.quantile(model.y, model.quant.tau)) if model.mixture else float(np.mean(model.y))
    has_lin = model.system.B0 is not None
    has_nl = model.system.B is not None
    gamma_beta = np.where(model.force_linear, 0, 1) if has_nl else np.zeros(p, dtype=int)
    return ChainState(
        mu=mu0,
        alpha=np.zeros(p),
        beta=np.zeros((p, kb)),
        gamma_alpha=np.ones(p, dtype=int) if has_lin else np.zeros(p, dtype=int),
        gamma_beta=np.asarray(gamma_beta, dtype=int),
        e=np.ones(n),
        delta0=1.0,
        sigma2=np.ones(p),
        tau2=np.ones(p),
    )


def _log_prior_odds_zero(gamma, j, pi):
    """log P(gamma_j = 0 | rest) - log P(gamma_j = 1 | rest)."""
    if pi is not None:
        return math.log(1.0 - pi) - math.log(pi)
    p = gamma.shape[0]
    q0 = int(np.sum(gamma)) - int(gamma[j])
    return math.log(p - q0) - math.log(1 + q0)


def _linear_y_star(state, model, j):
    return full_residual(state, model) + state.alpha[j] * model.system.B0[:, j]


def _nonlinear_y_star(state, model, j):
    return full_residual(state, model) + model.system.B[j] @ state.beta[j]


def alpha_moments(state, model, j, y_star=None):
    """(mean, variance) of the Gaussian conditional of alpha_j given inclusion.

    y_star must exclude alpha_j's own contribution (computed from state if omitted).
    """
    if y_star is None:
        y_star = _linear_y_star(state, model, j)
    w = error_precision(state, model)
    col = model.system.B0[:, j]
    wc = w * col
    prec = wc @ col + 1.0 / state.sigma2[j]
    if not prec > 0.0:
        raise np.linalg.LinAlgError(f"nonpositive posterior precision {prec} for alpha[{j}]")
    return (wc @ y_star) / prec, 1.0 / prec


def step_alpha(state, model, rng, j, y_star=None):
    """Draw alpha_j from its Gaussian conditional; exact zero when the indicator is off."""
    if state.gamma_alpha[j] == 0:
        state.alpha[j] = 0.0
        return 0.0
    mean, var = alpha_moments(state, model, j, y_star=y_star)
    draw = mean + rng.standard_normal() * math.sqrt(var)
    state.alpha[j] = draw
    return draw


def mu_moments(state, model, y_star=None):
    """(mean, variance) of the intercept conditional."""
    if y_star is None:
        y_star = full_residual(state, model) + state.mu
    w = error_precision(state, model)
    prec = w.sum()
    b = w @ y_star
    if model.prior.mu_var is not None:
        prec += 1.0 / model.prior.mu_var
        b += model.prior.mu_mean / model.prior.mu_var
    return b / prec, 1.0 / prec


def step_mu(state, model, rng, y_star=None):
    """Draw the intercept; flat prior unless a proper one is configured."""
    mean, var = mu_moments(state, model, y_star=y_star)
    draw = mean + rng.standard_normal() * math.sqrt(var)
    state.mu = draw
    return draw


def gamma_alpha_prob(state, model, j, y_star=None):
    """Inclusion probability of the linear indicator, alpha_j integrated out."""
    if y_star is None:
        y_star = _linear_y_star(state, model, j)
    w = error_precision(state, model)
    col = model.system.B0[:, j]
    wc = w * col
    s = wc @ col
    b = wc @ y_star
    log_h1 = -0.5 * b * b / (s + 1.0 / state.sigma2[j]) + 0.5 * math.log1p(state.sigma2[j] * s)
    log_h = log_h1 + _log_prior_odds_zero(state.gamma_alpha, j, model.prior.pi)
    return float(expit(-log_h))


def step_gamma_alpha(state, model, rng, j, y_star=None):
    """Collapsed Bernoulli draw of the linear indicator; zeroes alpha_j on exclusion.

    The caller must redraw alpha_j afterwards (run_chain always does) so
    that the pair (gamma, alpha) is a valid blocked update.
    """
    prob = gamma_alpha_prob(state, model, j, y_star=y_star)
    state.gamma_alpha[j] = 1 if rng.uniform() < prob else 0
    if state.gamma_alpha[j] == 0:
        state.alpha[j] = 0.0
    return state.gamma_alpha[j]


def _beta_factors(state, model, j, y_star):
    """Cholesky factor of the posterior precision and the whitened mean."""
    w = error_precision(state, model)
    Bj = model.system.B[j]
    Bw = Bj * w[:, None]
    A = Bw.T @ Bj + model.system.omega[j] / state.tau2[j]
    b = Bw.T @ y_star
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as err:
        raise np.linalg.LinAlgError(
            f"posterior precision for beta[{j}] not PD (cond ~ {np.linalg.cond(A):.3e})"
        ) from err
    z = linalg.solve_triangular(L, b, lower=True, check_finite=False)
    return L, z


def beta_moments(state, model, j, y_star=None):
    """(mean, covariance) of the conditional of beta_j given inclusion."""
    if y_star is None:
        y_star = _nonlinear_y_star(state, model, j)
    L, z = _beta_factors(state, model, j, y_star)
    mean = linalg.solve_triangular(L, z, lower=True, trans="T", check_finite=False)
    inv_l = linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)
    return mean, inv_l.T @ inv_l


def step_beta(state, model, rng, j, y_star=None):
    """Draw the nonlinear coefficient block; exact zero vector when excluded."""
    if state.gamma_beta[j] == 0:
        state.beta[j] = 0.0
        return state.beta[j]
    if y_star is None:
        y_star = _nonlinear_y_star(state, model, j)
    L, z = _beta_factors(state, model, j, y_star)
    zeta = rng.standard_normal(z.shape[0])
    draw = linalg.solve_triangular(L, z + zeta, lower=True, trans="T", check_finite=False)
    state.beta[j] = draw
    return draw


def gamma_beta_prob(state, model, j, y_star=None):
    """Inclusion probability of the nonlinear indicator, beta_j integrated out."""
    if y_star is None:
        y_star = _nonlinear_y_star(state, model, j)
    L, z = _beta_factors(state, model, j, y_star)
    kb = z.shape[0]
    logdet_prior_prec = model.logdet_omega(j) - kb * math.log(state.tau2[j])
    logdet_post_prec = 2.0 * np.sum(np.log(np.diag(L)))
    log_h1 = -0.5 * (z @ z) - 0.5 * logdet_prior_prec + 0.5 * logdet_post_prec
    log_h = log_h1 + _log_prior_odds_zero(state.gamma_beta, j, model.prior.pi)
    return float(expit(-log_h))


def step_gamma_beta(state, model, rng, j, y_star=None):
    """Collapsed draw of the nonlinear indicator; no-op 0 for forced-linear covariates."""
    if model.force_linear[j]:
        state.gamma_beta[j] = 0
        state.beta[j] = 0.0
        return 0
    prob = gamma_beta_prob(state, model, j, y_star=y_star)
    state.gamma_beta[j] = 1 if rng.uniform() < prob else 0
    if state.gamma_beta[j] == 0:
        state.beta[j] = 0.0
    return state.gamma_beta[j]


def delta0_params(state, model, resid=None):
    """(shape, rate) of the inverse-gamma conditional of the scale.

    Mixture engines use shape a1 + 3n/2 and rate a2 + sum(r^2 / (2 k2 e) + e)
    with r the full residual (mixture offset subtracted); the Gaussian mean
    engine updates the noise variance with shape a1 + n/2 and rate a2 + sum(r^2)/2.
    """
    if resid is None:
        resid = full_residual(state, model)
    prior = model.prior
    n = model.n
    if model.mixture:
        shape = prior.a1 + 1.5 * n
        rate = prior.rate_delta0 + np.sum(resid * resid / (2.0 * model.quant.k2 * state.e) + state.e)
    else:
        shape = prior.a1 + 0.5 * n
        rate = prior.rate_delta0 + 0.5 * np.sum(resid * resid)
    return shape, float(rate)


def step_delta0(state, model, rng, resid=None):
    """Inverse-gamma refresh of the scale (variance for the mean engine)."""
    shape, rate = delta0_params(state, model, resid=resid)
    state.delta0 = float(sample_inverse_gamma(rng, shape, rate))
    return state.delta0


def step_variances(state, model, rng):
    """Refresh slab variances; inactive components redraw from their priors."""
    prior = model.prior
    p = model.p
    if model.system.B0 is not None:
        shapes = np.where(state.gamma_alpha == 1, prior.a1 + 0.5, prior.a1)
        rates = prior.rate_sigma + np.where(state.gamma_alpha == 1, 0.5 * state.alpha ** 2, 0.0)
        state.sigma2 = sample_inverse_gamma(rng, shapes, rates, size=p)
    if model.system.B is not None:
        kb = model.beta_width
        quad = np.array([state.beta[j] @ model.system.omega[j] @ state.beta[j] for j in range(p)])
        shapes = np.where(state.gamma_beta == 1, prior.a1 + 0.5 * kb, prior.a1)
        rates = prior.rate_tau + np.where(state.gamma_beta == 1, 0.5 * quad, 0.0)
        state.tau2 = sample_inverse_gamma(rng, shapes, rates, size=p)
    return state.sigma2, state.tau2


def latent_e_params(state, model, resid=None):
    """GIG parameters of every mixture latent given the fitted residuals (no offset)."""
    if not model.mixture:
        raise ValueError("latent update only exists for the mixture engines")
    if resid is None:
        resid = model.y - eval_f(state, model.system)
    k1, k2 = model.quant.k1, model.quant.k2
    scale = k2 * state.delta0
    m = np.abs(resid) / math.sqrt(scale)
    nn = math.sqrt(k1 * k1 / scale + 2.0 / state.delta0)
    return GigParams(rho=0.5, m=m, n=np.full_like(m, nn))


def step_latent_e(state, model, rng, resid=None):
    """GIG refresh of the mixture latents."""
    state.e = sample_gig(rng, latent_e_params(state, model, resid=resid))
    return state.e


@dataclass
class PosteriorSummary:
    """Post-burn-in means, selection probabilities, curves, and optional traces."""

    tag: str
    tau: float                  # None for the mean engine
    mu_mean: float
    mu_sd: float
    delta0_mean: float
    delta0_sd: float
    alpha_mean: np.ndarray
    alpha_sd: np.ndarray
    beta_mean: np.ndarray
    beta_sd: np.ndarray
    probs: np.ndarray           # (p, 3): nonlinear, linear, zero
    labels: list
    gamma_alpha_trace: np.ndarray
    gamma_beta_trace: np.ndarray
    fitted_train: np.ndarray
    n_kept: int
    system: object
    structure: str              # 'separate' | 'folded' | 'linear_only'
    meta: dict = field(default_factory=dict)
    traces: dict = None

    @property
    def p(self):
        return self.alpha_mean.shape[0]

    def component_curve(self, j, x):
        """Posterior-mean component function of covariate j at the given points."""
        basis = self.system.centered_basis(j, x)
        if self.structure == "folded":
            return basis @ self.beta_mean[j]
        curve = self.alpha_mean[j] * basis[:, 0]
        if self.structure == "separate" and self.beta_mean.shape[1] > 0:
            curve = curve + basis[:, 1:] @ self.beta_mean[j]
        return curve

    def predict(self, X):
        """Posterior-mean prediction mu + sum_j f_j(x_j) for new covariate rows."""
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], self.mu_mean)
        for j in range(self.p):
            out += self.component_curve(j, X[:, j])
        return out

    def prediction_curves(self, n_points=200):
        """(p, n_points) predictions as one covariate varies and the rest sit at 0.5."""
        grid = np.linspace(0.0, 1.0, n_points)
        at_half = np.array([self.component_curve(j, np.array([0.5]))[0] for j in range(self.p)])
        base = self.mu_mean + at_half.sum()
        curves = np.empty((self.p, n_points))
        for j in range(self.p):
            curves[j] = self.component_curve(j, grid) + (base - at_half[j])
        return grid, curves


def run_chain(model, config, rng, init=None):
    """Run one chain and summarize it.

    Sweep order per iteration: (collapsed linear indicator, linear
    coefficient) for each covariate, intercept, (collapsed nonlinear
    indicator, coefficient block) for each covariate, scale, slab
    variances, mixture latents. Post-burn-in draws are recorded every
    ``thinning`` sweeps.
    """
    from .metrics import classify_components  # local import avoids a cycle

    n_kept = config.n_kept
    if n_kept <= 0:
        raise ValueError("no draws would remain after burn-in; increase iterations")
    state = initial_state(model) if init is None else init.copy()
    p, kb = model.p, model.beta_width
    sys_ = model.system
    has_lin = sys_.B0 is not None
    has_nl = sys_.B is not None

    mu_trace = np.empty(n_kept)
    delta0_trace = np.empty(n_kept)
    ga_trace = np.empty((n_kept, p), dtype=np.uint8)
    gb_trace = np.empty((n_kept, p), dtype=np.uint8)
    alpha_sum = np.zeros(p)
    alpha_sq = np.zeros(p)
    beta_sum = np.zeros((p, kb))
    beta_sq = np.zeros((p, kb))
    extra = {"alpha": np.empty((n_kept, p)), "beta": np.empty((n_kept, p, kb))} if config.store_traces else None

    resid = full_residual(state, model)
    kept = 0
    for it in range(config.iterations):
        try:
            if has_lin:
                B0 = sys_.B0
                for j in range(p):
                    y_star = resid + state.alpha[j] * B0[:, j]
                    if model.select_alpha:
                        step_gamma_alpha(state, model, rng, j, y_star=y_star)
                    step_alpha(state, model, rng, j, y_star=y_star)
                    resid = y_star - state.alpha[j] * B0[:, j]
            y_star = resid + state.mu
            step_mu(state, model, rng, y_star=y_star)
            resid = y_star - state.mu
            if has_nl:
                for j in range(p):
                    Bj = sys_.B[j]
                    y_star = resid + Bj @ state.beta[j]
                    if model.select_beta:
                        step_gamma_beta(state, model, rng, j, y_star=y_star)
                    resid = y_star - Bj @ step_beta(state, model, rng, j, y_star=y_star)
            step_delta0(state, model, rng, resid=resid)
            step_variances(state, model, rng)
            if model.mixture:
                fit_resid = resid + model.quant.k1 * state.e
                step_latent_e(state, model, rng, resid=fit_resid)
                resid = fit_resid - model.quant.k1 * state.e
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as err:
            raise RuntimeError(f"gibbs sweep {it} failed: {err}") from err

        if it >= config.burn_in and (it - config.burn_in) % config.thinning == 0:
            mu_trace[kept] = state.mu
            delta0_trace[kept] = state.delta0
            ga_trace[kept] = state.gamma_alpha
            gb_trace[kept] = state.gamma_beta
            alpha_sum += state.alpha
            alpha_sq += state.alpha ** 2
            beta_sum += state.beta
            beta_sq += state.beta ** 2
            if extra is not None:
                extra["alpha"][kept] = state.alpha
                extra["beta"][kept] = state.beta
            kept += 1

    alpha_mean = alpha_sum / n_kept
    beta_mean = beta_sum / n_kept
    mean_state = state.copy()
    mean_state.mu = float(mu_trace.mean())
    mean_state.alpha = alpha_mean
    mean_state.beta = beta_mean
    fitted = eval_f(mean_state, sys_)

    comps = classify_components(ga_trace, gb_trace)
    probs = np.array([[c.p_nonlinear, c.p_linear, c.p_zero] for c in comps])
    labels = [c.label for c in comps]

    if not has_lin:
        structure = "folded"
    elif not has_nl:
        structure = "linear_only"
    else:
        structure = "separate"

    traces = None
    if config.store_traces:
        traces = {
            "mu": mu_trace,
            "delta0": delta0_trace,
            "alpha": extra["alpha"],
            "beta": extra["beta"],
            "gamma_alpha": ga_trace,
            "gamma_beta": gb_trace,
        }

    def _sd(sq, total, mean):
        var = np.maximum(sq / total - mean ** 2, 0.0)
        return np.sqrt(var)

    return PosteriorSummary(
        tag=model.tag,
        tau=model.quant.tau if model.mixture else None,
        mu_mean=float(mu_trace.mean()),
        mu_sd=float(mu_trace.std()),
        delta0_mean=float(delta0_trace.mean()),
        delta0_sd=float(delta0_trace.std()),
        alpha_mean=alpha_mean,
        alpha_sd=_sd(alpha_sq, n_kept, alpha_mean),
        beta_mean=beta_mean,
        beta_sd=_sd(beta_sq, n_kept, beta_mean),
        probs=probs,
        labels=labels,
        gamma_alpha_trace=ga_trace,
        gamma_beta_trace=gb_trace,
        fitted_train=fitted,
        n_kept=n_kept,
        system=sys_,
        structure=structure,
        meta=dict(model.meta),
        traces=traces,
    )

"""Check loss, asymmetric Laplace errors, and the additive regression function."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QuantileSpec:
    """Quantile level plus the constants of the normal-exponential mixture."""

    tau: float
    k1: float
    k2: float


def mixture_constants(tau):
    """Mixture constants k1 = (1-2*tau)/(tau*(1-tau)), k2 = 2/(tau*(1-tau))."""
    if not (0.0 < tau < 1.0):
        raise ValueError(f"quantile level must lie in (0, 1), got {tau}")
    denom = tau * (1.0 - tau)
    return QuantileSpec(tau=tau, k1=(1.0 - 2.0 * tau) / denom, k2=2.0 / denom)


def check_loss(u, tau):
    """Check (pinball) loss u * (tau - 1{u <= 0}); vectorized in u."""
    if not (0.0 < tau < 1.0):
        raise ValueError(f"quantile level must lie in (0, 1), got {tau}")
    u = np.asarray(u, dtype=float)
    return u * (tau - (u <= 0.0))


def ald_log_density(eps, tau, delta0):
    """Log density of the asymmetric Laplace law with scale delta0."""
    if delta0 <= 0.0:
        raise ValueError(f"scale must be positive, got {delta0}")
    return np.log(tau * (1.0 - tau) / delta0) - check_loss(eps, tau) / delta0


@dataclass(frozen=True)
class ModelSpec:
    """Structural description of one fit: covariate count, design, quantile."""

    p: int
    system: object
    quant: QuantileSpec | None
    intercept: bool = True

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("need at least one covariate")


@dataclass
class ChainState:
    """All latent quantities of one MCMC chain.

    Inactive components carry exact zeros: gamma_alpha[j] == 0 implies
    alpha[j] == 0 and gamma_beta[j] == 0 implies beta[j] == 0. For the
    Gaussian mean engine ``delta0`` holds the noise variance and ``e`` is
    unused (kept at ones).
    """

    mu: float
    alpha: np.ndarray        # (p,)
    beta: np.ndarray         # (p, K_b); K_b may be 0
    gamma_alpha: np.ndarray  # (p,) int
    gamma_beta: np.ndarray   # (p,) int
    e: np.ndarray            # (n,) positive latents
    delta0: float
    sigma2: np.ndarray       # (p,)
    tau2: np.ndarray         # (p,)

    def copy(self):
        return ChainState(
            mu=self.mu,
            alpha=self.alpha.copy(),
            beta=self.beta.copy(),
            gamma_alpha=self.gamma_alpha.copy(),
            gamma_beta=self.gamma_beta.copy(),
            e=self.e.copy(),
            delta0=self.delta0,
            sigma2=self.sigma2.copy(),
            tau2=self.tau2.copy(),
        )


def eval_f(state, system):
    """Regression function mu + B0 @ alpha + sum_j B_j @ beta_j on the training points."""
    if system.B0 is not None:
        n = system.B0.shape[0]
    elif system.B:
        n = system.B[0].shape[0]
    else:
        raise ValueError("system carries no design blocks")
    f = np.full(n, state.mu)
    if system.B0 is not None:
        if system.B0.shape[1] != state.alpha.shape[0]:
            raise ValueError("alpha length does not match the linear design")
        f += system.B0 @ state.alpha
    if system.B is not None:
        for j, Bj in enumerate(system.B):
            if Bj.shape[1] != state.beta.shape[1]:
                raise ValueError("beta width does not match the nonlinear design")
            f += Bj @ state.beta[j]
    return f


@dataclass
class Dataset:
    """Response, unit-interval covariates, and per-covariate metadata."""

    y: np.ndarray
    X: np.ndarray
    force_linear: np.ndarray = None   # (p,) bool
    names: list = None                # covariate names
    truth_labels: list = None         # simulation ground truth, if any
    scaling: np.ndarray = None        # (p, 2) original (min, max) per covariate

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2 or self.y.shape[0] != self.X.shape[0]:
            raise ValueError("X must be (n, p) with one response per row")
        if self.force_linear is None:
            self.force_linear = np.zeros(self.X.shape[1], dtype=bool)
        else:
            self.force_linear = np.asarray(self.force_linear, dtype=bool)
        if self.names is None:
            self.names = [f"x{j + 1}" for j in range(self.X.shape[1])]

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

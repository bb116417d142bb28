"""Independent numerical oracles for the Gibbs conditionals.

Everything here recomputes the unnormalized log joint density straight
from the hierarchical model definition (likelihood x priors), without
touching the sampler's conditional formulas, and integrates it
numerically. The sampler is correct iff its analytic conditionals match
these integrals.
"""

import math

import numpy as np
from scipy import integrate
from scipy.special import gammaln


def log_inv_gamma_pdf(x, a, b):
    if x <= 0:
        return -np.inf
    return a * math.log(b) - gammaln(a) - (a + 1.0) * math.log(x) - b / x


def log_combinatorial_gamma_prior(gamma):
    """log of the size-balanced prior 1 / ((p+1) * C(p, q))."""
    gamma = np.asarray(gamma)
    p = gamma.shape[0]
    q = int(gamma.sum())
    log_binom = gammaln(p + 1) - gammaln(q + 1) - gammaln(p - q + 1)
    return -math.log(p + 1) - log_binom


def log_joint(y, B0, Blist, omegas, quant, prior, mu, alpha, beta, gamma_a, gamma_b,
              e, delta0, sigma2, tau2, gaussian=False):
    """Unnormalized log joint of data and every latent quantity.

    quant carries (tau, k1, k2); pass gaussian=True for the mean-regression
    hierarchy where delta0 is the noise variance and e is absent.
    Point-mass spikes: a zero indicator forces the coefficient to zero and
    contributes no density factor.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    p = len(gamma_a)
    if delta0 <= 0 or np.any(np.asarray(sigma2) <= 0) or np.any(np.asarray(tau2) <= 0):
        return -np.inf

    f = np.full(n, float(mu))
    if B0 is not None:
        for j in range(p):
            if gamma_a[j] == 0 and alpha[j] != 0.0:
                return -np.inf
            f = f + alpha[j] * B0[:, j]
    if Blist is not None:
        for j in range(p):
            if gamma_b[j] == 0 and np.any(np.asarray(beta[j]) != 0.0):
                return -np.inf
            f = f + Blist[j] @ np.asarray(beta[j], dtype=float)

    total = 0.0
    if gaussian:
        r = y - f
        total += -0.5 * np.sum(r * r) / delta0 - 0.5 * n * math.log(2 * math.pi * delta0)
    else:
        if np.any(np.asarray(e) <= 0):
            return -np.inf
        var = quant.k2 * delta0 * np.asarray(e)
        r = y - f - quant.k1 * np.asarray(e)
        total += np.sum(-0.5 * r * r / var - 0.5 * np.log(2 * math.pi * var))
        # exponential latents with mean delta0
        total += np.sum(-np.log(delta0) - np.asarray(e) / delta0)

    if B0 is not None:
        for j in range(p):
            if gamma_a[j] == 1:
                total += -0.5 * alpha[j] ** 2 / sigma2[j] - 0.5 * math.log(2 * math.pi * sigma2[j])
        if prior.pi is None:
            total += log_combinatorial_gamma_prior(gamma_a)
        else:
            q = int(np.sum(gamma_a))
            total += q * math.log(prior.pi) + (p - q) * math.log(1 - prior.pi)
    if Blist is not None:
        for j in range(p):
            if gamma_b[j] == 1:
                om = omegas[j]
                kb = om.shape[0]
                bj = np.asarray(beta[j], dtype=float)
                sign, logdet = np.linalg.slogdet(om / tau2[j])
                total += 0.5 * logdet - 0.5 * kb * math.log(2 * math.pi) - 0.5 * bj @ om @ bj / tau2[j]
        if prior.pi is None:
            total += log_combinatorial_gamma_prior(gamma_b)
        else:
            q = int(np.sum(gamma_b))
            total += q * math.log(prior.pi) + (p - q) * math.log(1 - prior.pi)

    total += log_inv_gamma_pdf(delta0, prior.a1, prior.rate_delta0)
    if B0 is not None:
        for j in range(p):
            total += log_inv_gamma_pdf(sigma2[j], prior.a1, prior.rate_sigma)
    if Blist is not None:
        for j in range(p):
            total += log_inv_gamma_pdf(tau2[j], prior.a1, prior.rate_tau)
    if prior.mu_var is not None:
        total += -0.5 * (mu - prior.mu_mean) ** 2 / prior.mu_var \
                 - 0.5 * math.log(2 * math.pi * prior.mu_var)
    return float(total)


def scalar_conditional_moments(logpdf, lo, hi, points=None):
    """Mean and variance of exp(logpdf) restricted to (lo, hi) via adaptive quadrature."""
    probe = np.linspace(lo + 1e-12, hi, 2001)
    vals = np.array([logpdf(x) for x in probe])
    ref = vals.max()

    def density(x):
        return math.exp(logpdf(x) - ref)

    kw = {"limit": 400, "epsabs": 1e-13, "epsrel": 1e-12}
    if points is not None:
        kw["points"] = points
    z, _ = integrate.quad(density, lo, hi, **kw)
    m1, _ = integrate.quad(lambda x: x * density(x), lo, hi, **kw)
    m2, _ = integrate.quad(lambda x: x * x * density(x), lo, hi, **kw)
    mean = m1 / z
    return mean, m2 / z - mean ** 2


def scalar_log_integral(logpdf, lo, hi):
    """log of the integral of exp(logpdf) over (lo, hi)."""
    probe = np.linspace(lo + 1e-12, hi, 2001)
    ref = max(logpdf(x) for x in probe)
    z, _ = integrate.quad(lambda x: math.exp(logpdf(x) - ref), lo, hi,
                          limit=400, epsabs=1e-13, epsrel=1e-12)
    return math.log(z) + ref


def gauss_legendre_grid(center, half_width, nodes):
    """1-d Gauss-Legendre nodes/weights on [center - h, center + h]."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    return center + half_width * x, half_width * w


def vector_conditional_moments(logpdf, centers, half_widths, nodes=120):
    """Mean vector and covariance of a 2-d conditional via tensor quadrature."""
    x1, w1 = gauss_legendre_grid(centers[0], half_widths[0], nodes)
    x2, w2 = gauss_legendre_grid(centers[1], half_widths[1], nodes)
    logs = np.array([[logpdf(np.array([a, b])) for b in x2] for a in x1])
    ref = logs.max()
    dens = np.exp(logs - ref)
    ww = np.outer(w1, w2)
    z = np.sum(dens * ww)
    g1, g2 = np.meshgrid(x1, x2, indexing="ij")
    mean = np.array([np.sum(g1 * dens * ww), np.sum(g2 * dens * ww)]) / z
    c11 = np.sum((g1 - mean[0]) ** 2 * dens * ww) / z
    c22 = np.sum((g2 - mean[1]) ** 2 * dens * ww) / z
    c12 = np.sum((g1 - mean[0]) * (g2 - mean[1]) * dens * ww) / z
    return mean, np.array([[c11, c12], [c12, c22]])


def vector_log_integral(logpdf, centers, half_widths, nodes=120):
    """log of the 2-d integral of exp(logpdf) over the given box."""
    x1, w1 = gauss_legendre_grid(centers[0], half_widths[0], nodes)
    x2, w2 = gauss_legendre_grid(centers[1], half_widths[1], nodes)
    logs = np.array([[logpdf(np.array([a, b])) for b in x2] for a in x1])
    ref = logs.max()
    z = np.sum(np.exp(logs - ref) * np.outer(w1, w2))
    return math.log(z) + ref


def gig_log_density(x, m, n):
    """Unnormalized log GIG(1/2, m, n) density."""
    if x <= 0:
        return -np.inf
    return -0.5 * math.log(x) - 0.5 * (m * m / x + n * n * x)


def gig_quadrature_moments(m, n):
    """Mean and variance of GIG(1/2, m, n) by adaptive quadrature."""
    # crude scale for the integration window
    scale = (m + 1.0) / n + 1.0 / n ** 2
    hi = 200.0 * scale
    return scalar_conditional_moments(lambda x: gig_log_density(x, m, n), 0.0, hi)


def tiny_instance(tau=0.3, pi=None, gaussian=False):
    """Fixed n=4, p=2, degree=2, one-knot instance for the conjugacy oracles."""
    from bqplam.gibbs import FitModel, PriorConfig
    from bqplam.model import ChainState, mixture_constants
    from bqplam.splines import KnotGrid, build_system

    X = np.array([[0.10, 0.80], [0.40, 0.30], [0.60, 0.90], [0.90, 0.20]])
    y = np.array([0.50, -0.30, 1.20, 0.10])
    grid = KnotGrid(degree=2, knots=(0.5,))
    system = build_system(X, grid)
    prior = PriorConfig(pi=pi)
    quant = None if gaussian else mixture_constants(tau)
    model = FitModel(
        y=y, system=system, quant=quant, prior=prior,
        force_linear=np.zeros(2, dtype=bool),
        select_alpha=True, select_beta=True,
        tag="BPLAM" if gaussian else "BQPLAM",
    )
    state = ChainState(
        mu=0.20,
        alpha=np.array([0.40, -0.50]),
        beta=np.array([[0.30, -0.20], [0.10, 0.25]]),
        gamma_alpha=np.array([1, 1]),
        gamma_beta=np.array([1, 1]),
        e=np.array([0.80, 1.30, 0.50, 2.00]),
        delta0=0.70,
        sigma2=np.array([1.20, 0.60]),
        tau2=np.array([0.90, 1.50]),
    )
    return model, state


def joint_of(model, state, gaussian=False, **overrides):
    """log_joint evaluated at the state with keyword overrides."""
    vals = {
        "mu": state.mu,
        "alpha": state.alpha.copy(),
        "beta": state.beta.copy(),
        "gamma_a": state.gamma_alpha.copy(),
        "gamma_b": state.gamma_beta.copy(),
        "e": state.e.copy(),
        "delta0": state.delta0,
        "sigma2": state.sigma2.copy(),
        "tau2": state.tau2.copy(),
    }
    vals.update(overrides)
    return log_joint(
        model.y, model.system.B0, model.system.B, model.system.omega,
        model.quant, model.prior,
        vals["mu"], vals["alpha"], vals["beta"], vals["gamma_a"], vals["gamma_b"],
        vals["e"], vals["delta0"], vals["sigma2"], vals["tau2"],
        gaussian=gaussian,
    )

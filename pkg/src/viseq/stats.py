"""Binomial probabilities, percentile bootstrap, and regression fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import EmptyInput, KOutOfRange, NotConverged, RankDeficient, Separation
from .kernels import resample_means

LOCATIONS = ("A", "B")


# -- binomial -------------------------------------------------------------

def _check(k, n, p):
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= k <= n:
        raise KOutOfRange(f"k={k} outside [0, {n}]")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")


def binom_logpmf(k, n, p):
    _check(k, n, p)
    if p == 0.0:
        return 0.0 if k == 0 else -math.inf
    if p == 1.0:
        return 0.0 if k == n else -math.inf
    return math.log(math.comb(n, k)) + k * math.log(p) + (n - k) * math.log1p(-p)


def binom_pmf(k, n, p):
    """pmf from the exact integer coefficient; log space only when the direct
    product would overflow or lose precision to underflow."""
    _check(k, n, p)
    if p == 0.0 or p == 1.0:
        return float(k == (0 if p == 0.0 else n))
    if n <= 1000:
        v = float(math.comb(n, k)) * p ** k * (1.0 - p) ** (n - k)
        if v >= 1e-280:
            return v
    return math.exp(binom_logpmf(k, n, p))


def binom_cdf(k, n, p):
    """P(K <= k). Equals 1.0 exactly at k = n."""
    if not 0 <= k <= n:
        raise KOutOfRange(f"k={k} outside [0, {n}]")
    if k == n:
        return 1.0
    return min(1.0, math.fsum(binom_pmf(j, n, p) for j in range(k + 1)))


def binom_pmf_vector(n, p):
    """pmf over k = 0..n as an array."""
    return np.array([binom_pmf(k, n, p) for k in range(n + 1)])


def ground_truth_prob(game, chosen, p_hat, n=30):
    """Probability the chosen location pays strictly more, ties counting one half.

    Others' A-count is ``K ~ Binomial(n, p_hat)`` and payoffs are evaluated
    at proportion ``K / n``.
    """
    if chosen not in LOCATIONS:
        raise ValueError(f"chosen must be 'A' or 'B', got {chosen!r}")
    if not 0.0 <= p_hat <= 1.0:
        raise ValueError(f"p_hat {p_hat} outside [0, 1]")
    sign = 1.0 if chosen == "A" else -1.0
    terms = []
    for k in range(n + 1):
        diff = sign * game.payoff_difference(k / n)
        if abs(diff) <= 1e-9:
            terms.append(0.5 * binom_pmf(k, n, p_hat))
        elif diff > 0:
            terms.append(binom_pmf(k, n, p_hat))
    return min(1.0, math.fsum(terms))


# -- bootstrap ------------------------------------------------------------

@dataclass(frozen=True)
class BootstrapConfig:
    # None resamples as many items as the input holds
    group_size: int | None = 30
    replications: int = 1000
    coverage: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.group_size is not None and self.group_size < 1:
            raise ValueError("group_size must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0.0 < self.coverage < 1.0:
            raise ValueError("coverage must lie in (0, 1)")


def percentile_interval(samples, coverage):
    alpha = 1.0 - coverage
    lo, hi = np.quantile(np.asarray(samples, dtype=float), [alpha / 2, 1 - alpha / 2])
    return float(lo), float(hi)


def bootstrap_proportion(choices, cfg=BootstrapConfig(), rng=None):
    """Full-sample proportion of ones and its percentile bootstrap interval."""
    x = np.asarray(choices, dtype=np.float64)
    if x.size == 0:
        raise EmptyInput("no choices to bootstrap")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    size = x.size if cfg.group_size is None else cfg.group_size
    idx = rng.integers(0, x.size, size=(cfg.replications, size))
    stats = resample_means(x, idx)
    return float(x.mean()), percentile_interval(stats, cfg.coverage)


# -- regression -----------------------------------------------------------

@dataclass
class RegressionFit:
    names: list
    coefficients: dict
    standard_errors: dict
    n: int
    converged: bool = True
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.coefficients[name]

    def coef_vector(self):
        return np.array([self.coefficients[k] for k in self.names])

    def to_dict(self):
        return {
            "coef": dict(self.coefficients),
            "se": dict(self.standard_errors),
            "n": self.n,
            "converged": self.converged,
        }


def _check_design(X, y, names):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"design {X.shape} and response {y.shape} do not conform")
    if X.shape[0] < X.shape[1]:
        raise RankDeficient(f"{X.shape[0]} rows for {X.shape[1]} columns")
    if names is None:
        names = [f"x{j}" for j in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise ValueError("names do not match design columns")
    return X, y, list(names)


def _rank(R):
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0.0:
        return 0
    return int(np.sum(d > d[0] * max(R.shape) * np.finfo(float).eps * 10))


def ols_fit(X, y, names=None):
    """Least squares through a column-pivoted QR factorisation."""
    X, y, names = _check_design(X, y, names)
    Q, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    p = X.shape[1]
    if _rank(R) < p:
        raise RankDeficient("design matrix is not of full column rank")
    beta_piv = scipy.linalg.solve_triangular(R, Q.T @ y)
    beta = np.empty(p)
    beta[piv] = beta_piv
    resid = y - X @ beta
    dof = X.shape[0] - p
    sigma2 = float(resid @ resid) / dof if dof > 0 else float("nan")
    Rinv = scipy.linalg.solve_triangular(R, np.eye(p))
    cov_piv = Rinv @ Rinv.T
    var = np.empty(p)
    var[piv] = np.diag(cov_piv)
    se = np.sqrt(sigma2 * var)
    return RegressionFit(names, dict(zip(names, beta.tolist())), dict(zip(names, se.tolist())),
                         n=X.shape[0], extra={"sigma2": sigma2})


def _sigmoid(eta):
    return 0.5 * (1.0 + np.tanh(0.5 * eta))


def logistic_fit(X, y, names=None, max_iter=100, tol=1e-8):
    """Maximum-likelihood logistic regression by iteratively reweighted least squares.

    Converged when the score vector ``X^T (y - mu)`` has norm <= ``tol``.
    Raises ``Separation`` when fitted probabilities saturate on correctly
    predicted observations, which is what diverging coefficients look like.
    """
    X, y, names = _check_design(X, y, names)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("logistic response must be 0/1")
    if y.min() == y.max():
        raise Separation("response is constant; the intercept diverges")
    _, R, _ = scipy.linalg.qr(X, mode="economic", pivoting=True)
    if _rank(R) < X.shape[1]:
        raise RankDeficient("design matrix is not of full column rank")

    beta = np.zeros(X.shape[1])
    score_norm = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        eta = X @ beta
        saturated = np.abs(eta) > 30.0
        if saturated.any() and np.all((eta[saturated] > 0) == (y[saturated] == 1)):
            raise Separation("fitted probabilities reached 0 or 1; the data are separated")
        mu = _sigmoid(eta)
        w = mu * (1.0 - mu)
        score = X.T @ (y - mu)
        score_norm = float(np.linalg.norm(score))
        if score_norm <= tol:
            break
        info = X.T @ (X * w[:, None])
        try:
            step = scipy.linalg.solve(info, score, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise Separation(f"information matrix became singular: {exc}") from exc
        beta = beta + step
        if np.max(np.abs(beta)) > 50.0:
            raise Separation("coefficients diverge; the data are (quasi-)separated")
    else:
        raise NotConverged(f"score norm {score_norm:.3g} > tol after {max_iter} iterations")

    eta = X @ beta
    saturated = np.abs(eta) > 15.0
    if saturated.any() and np.all((eta[saturated] > 0) == (y[saturated] == 1)):
        # converged only because the score vanished on perfectly predicted rows
        raise Separation("fitted probabilities are numerically 0 or 1; the data are separated")
    mu = _sigmoid(eta)
    info = X.T @ (X * (mu * (1.0 - mu))[:, None])
    se = np.sqrt(np.diag(np.linalg.inv(info)))
    return RegressionFit(names, dict(zip(names, beta.tolist())), dict(zip(names, se.tolist())),
                         n=X.shape[0], converged=True, iterations=it,
                         extra={"score_norm": score_norm})

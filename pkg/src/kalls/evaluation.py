"""Risk estimation, rate fitting and numeric checks of supporting inequalities."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .algorithm import KallsParams, delta_hat, k_cap, tau
from .classifier import NNClassifier
from .errors import InvalidInputError, UndefinedResultError
from .geometry import Pool, empirical_r_p, k_nearest
from .problems import ProblemSpec, bayes_labels, mc_slack


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    std_error: float
    m: int
    seed: object
    degenerate: bool = False


def excess_risk(classifier: NNClassifier, spec: ProblemSpec, m: int = 10_000, seed=0) -> RiskEstimate:
    """Monte Carlo estimate of ``E[|2 eta(X) - 1| 1{f(X) != f*(X)}]``."""
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    X = spec.sample(np.random.default_rng(seed), m)
    eta = spec.eta_many(X)
    loss = np.abs(2.0 * eta - 1.0) * (classifier.predict_many(X) != (eta >= 0.5))
    std_error = float(loss.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return RiskEstimate(float(loss.mean()), std_error, m, seed, classifier.degenerate)


def margin_agreement(classifier: NNClassifier, spec: ProblemSpec, delta_hat: float, m: int = 10_000, seed=0) -> float:
    """Fraction of draws with ``|eta - 1/2| > delta_hat`` on which the
    classifier matches the Bayes rule."""
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    X = spec.sample(np.random.default_rng(seed), m)
    eta = spec.eta_many(X)
    beyond = np.abs(eta - 0.5) > delta_hat
    if not beyond.any():
        raise UndefinedResultError(f"no draw beyond margin {delta_hat} in {m} attempts")
    Xb = X[beyond]
    return float(np.mean(classifier.predict_many(Xb) == (eta[beyond] >= 0.5)))


def bayes_classifier(spec: ProblemSpec) -> "_RuleClassifier":
    return _RuleClassifier(spec, flip=False)


def anti_bayes_classifier(spec: ProblemSpec) -> "_RuleClassifier":
    return _RuleClassifier(spec, flip=True)


class _RuleClassifier(NNClassifier):
    """The (anti-)Bayes rule, exposed with the classifier interface."""

    def __init__(self, spec: ProblemSpec, flip: bool):
        self.spec = spec
        self.flip = flip
        self.points = np.empty((0, spec.dim))
        self.labels = np.empty(0, dtype=np.int8)
        self.k = 1
        self.degenerate = False
        self.fallback_label = 0

    def predict_many(self, X, chunk=None) -> np.ndarray:
        y = bayes_labels(self.spec, X)
        return 1 - y if self.flip else y


def constant_classifier(label: int, dim: int = 1) -> NNClassifier:
    return NNClassifier(np.zeros((1, dim)), [label], k=1)


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: list[tuple[float, float]]
    dropped: list[tuple[float, float]] = field(default_factory=list)


def fit_rate(points) -> RateFit:
    """Least squares fit of ``log(risk) = intercept + slope * log(n)``.

    Points with non-positive risk are dropped with a warning.
    """
    kept, dropped = [], []
    for n, risk in points:
        (kept if risk > 0 else dropped).append((float(n), float(risk)))
    if dropped:
        warnings.warn(f"dropped {len(dropped)} point(s) with non-positive risk: {dropped}", stacklevel=2)
    if len(kept) < 2:
        raise InvalidInputError("need at least two points with positive risk")
    x = np.log([n for n, _ in kept])
    y = np.log([r for _, r in kept])
    if np.ptp(x) == 0:
        raise InvalidInputError("all points share the same n")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2, kept, dropped)


def active_exponent(alpha: float, beta: float, d: int) -> float:
    return -alpha * (beta + 1.0) / (2.0 * alpha + d - alpha * beta)


def passive_exponent(alpha: float, beta: float, d: int) -> float:
    return -alpha * (beta + 1.0) / (2.0 * alpha + d)


@dataclass
class LogInequalityReport:
    skipped: bool
    reason: str = ""
    checked: int = 0
    counterexamples: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples


def check_log_inequality(a: float, b: float, c: float, u_grid) -> LogInequalityReport:
    """For every u in the grid with ``u >= 2c + 2a ln(ab)``, check ``u > c + a ln(bu)``.

    Skipped unless ``a, b, c > 0``, ``a b e^(c/a) > 4 log2(e)``.
    """
    if min(a, b, c) <= 0:
        return LogInequalityReport(True, "a, b, c must be positive")
    if not a * b * math.exp(c / a) > 4.0 * math.log2(math.e):
        return LogInequalityReport(True, f"a*b*exp(c/a)={a * b * math.exp(c / a):.4g} <= 4*log2(e)")
    u = np.asarray(list(u_grid), dtype=float)
    u = u[u >= 1.0]
    u = u[u >= 2.0 * c + 2.0 * a * math.log(a * b)]
    bad = u[~(u > c + a * np.log(b * u))]
    return LogInequalityReport(False, "", int(u.size), bad.tolist())


def label_complexity_gate(epsilon: float, delta: float, alpha: float, beta: float, d: int, constant: float = 1.0) -> int:
    """Budget suggested for target excess risk ``epsilon``:
    ``ceil(K (1/eps)^((2a + d - ab)/(a(b+1))) ln(1/(eps delta)))``.

    A sizing aid with the hidden constant set to ``constant``; not a guarantee.
    """
    if not 0.0 < epsilon < 1.0 or not 0.0 < delta < 1.0:
        raise InvalidInputError("epsilon and delta must lie in (0, 1)")
    if alpha * beta > d:
        raise InvalidInputError(f"alpha*beta={alpha * beta:g} exceeds dimension {d}")
    exponent = (2.0 * alpha + d - alpha * beta) / (alpha * (beta + 1.0))
    return math.ceil(round(constant * (1.0 / epsilon) ** exponent * math.log(1.0 / (epsilon * delta)), 9))


@dataclass(frozen=True)
class MarginMassCheck:
    lhs: float
    epsilon: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.epsilon + self.slack


def check_margin_mass(spec: ProblemSpec, epsilon: float, m: int = 100_000, seed=0, slack_sigma: float = 3.0) -> MarginMassCheck:
    """``2 dh P(|eta - 1/2| < dh) <= epsilon`` for ``dh = delta_hat(epsilon, C, beta)``."""
    dh = delta_hat(epsilon, spec.C, spec.beta)
    X = spec.sample(np.random.default_rng(seed), m)
    p_hat = float(np.mean(np.abs(spec.eta_many(X) - 0.5) < dh))
    return MarginMassCheck(2.0 * dh * p_hat, epsilon, float(2.0 * dh * mc_slack(p_hat, m, slack_sigma)))


def entry_agreement(active_set, spec: ProblemSpec, params: KallsParams) -> bool:
    """Whether every confident entry lying beyond the margin carries the Bayes label."""
    dh = delta_hat(params.epsilon, params.C, params.beta)
    for e in active_set:
        if not e.confident(params.delta):
            continue
        eta = spec.eta_at(e.point)
        if abs(eta - 0.5) > dh and e.y_hat != int(eta >= 0.5):
            return False
    return True


@dataclass
class NeighborBallReport:
    checked: int
    condition_met: int
    violations: list[int]

    @property
    def passed(self) -> bool:
        return not self.violations


def check_neighbors_in_ball(
    pool: Pool,
    spec: ProblemSpec,
    centers,
    params: KallsParams,
    reference_size: int = 100_000,
    seed=0,
    slack: float = 0.0,
) -> NeighborBallReport:
    """For centers whose step satisfies ``k_s <= (1 - tau) p_eps (w - 1)``,
    check that the k_s nearest pool neighbors lie within r_{p_eps}(X_s).

    ``r_p`` is estimated on an independent reference sample, so the check is
    not a restatement of the pool's own order statistics.
    """
    dh = delta_hat(params.epsilon, params.C, params.beta)
    p_eps = (dh / params.L) ** (pool.dim / params.alpha)
    reference = Pool(spec.sample(np.random.default_rng(seed), reference_size), dim=pool.dim)
    w = len(pool)
    checked = met = 0
    violations = []
    for s, center in centers:
        checked += 1
        ks = k_cap(s, dh, params.delta)
        if not ks <= (1.0 - tau(ks, s, params.delta)) * p_eps * (w - 1):
            continue
        met += 1
        x = pool[center]
        far = k_nearest(pool, x, ks)[-1]
        radius = float(np.sqrt(np.sum((pool[far] - x) ** 2)))
        if radius > empirical_r_p(reference, x, p_eps) + slack:
            violations.append(int(center))
    return NeighborBallReport(checked, met, violations)

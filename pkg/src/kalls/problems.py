"""Synthetic binary classification problems with a known regression function.

A :class:`ProblemSpec` bundles a marginal sampler, the regression function
``eta(x) = P(Y=1 | X=x)`` and the smoothness / margin-noise constants it
declares. The ``verify_*`` functions test those declarations by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np
from scipy.special import gamma, ndtr

from .errors import InvalidInputError
from .geometry import Pool, as_point

Sampler = Callable[[np.random.Generator, int], np.ndarray]
RegressionFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_EPS_GRID = (0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class HolderConstants:
    """``|eta(x) - eta(z)| <= L * |x - z| ** alpha``."""

    alpha: float
    L: float


@dataclass(frozen=True)
class DensityFloor:
    """Strong-density metadata: density >= p_min on the support, and the
    support keeps a fraction >= c0 of every ball of radius <= r0."""

    p_min: float
    c0: float
    r0: float


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    sampler: Sampler = field(repr=False)
    eta: RegressionFn = field(repr=False)
    alpha: float
    L: float
    beta: float
    C: float
    holder: HolderConstants | None = None
    density: DensityFloor | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError("dim must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidInputError(f"alpha={self.alpha} must lie in (0, 1]")
        if self.L < 1.0:
            raise InvalidInputError(f"L={self.L} must be >= 1")
        if self.beta < 0.0:
            raise InvalidInputError(f"beta={self.beta} must be >= 0")
        if self.C < 1.0:
            raise InvalidInputError(f"C={self.C} must be >= 1")

    def eta_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return np.asarray(self.eta(X), dtype=float).reshape(-1)

    def eta_at(self, x) -> float:
        return float(self.eta_many(as_point(x, self.dim)[None, :])[0])

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        X = np.asarray(self.sampler(rng, m), dtype=float)
        return X.reshape(m, self.dim)


def sample_pool(spec: ProblemSpec, w: int, seed) -> Pool:
    """``w`` i.i.d. draws from the marginal of ``spec``; deterministic in ``seed``."""
    if w < 1:
        raise InvalidInputError(f"pool size must be >= 1, got {w}")
    rng = np.random.default_rng(seed)
    return Pool(spec.sample(rng, w), dim=spec.dim)


def bayes_label(spec: ProblemSpec, x) -> int:
    return int(spec.eta_at(x) >= 0.5)


def bayes_labels(spec: ProblemSpec, X) -> np.ndarray:
    return (spec.eta_many(X) >= 0.5).astype(np.int8)


# -- problem families -------------------------------------------------------


def _uniform_cube(dim: int) -> Sampler:
    def sampler(rng, m):
        return rng.random((m, dim))

    return sampler


def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / gamma(d / 2 + 1)


def holder_density_constant(holder: HolderConstants, density: DensityFloor, dim: int) -> float:
    """Smoothness constant L implied by Hölder continuity plus a density floor.

    For r <= r0 the open ball holds mass >= p_min * c0 * V_d * r^d, so
    L_h * r^a <= L_h * (mass / (p_min c0 V_d))^(a/d). For r > r0 the mass is
    at least p_min c0 V_d r0^d while |eta(x) - eta(z)| <= 1. The returned L
    covers both regimes and is at least 1.
    """
    a = holder.alpha
    unit = density.p_min * density.c0 * _unit_ball_volume(dim)
    near = holder.L * unit ** (-a / dim)
    far = (unit * density.r0**dim) ** (-a / dim)
    return max(1.0, near, far)


def linear_1d() -> ProblemSpec:
    """Uniform marginal on [0, 1] with ``eta(x) = x``."""
    return ProblemSpec(
        name="linear-1d",
        dim=1,
        sampler=_uniform_cube(1),
        eta=lambda X: X[:, 0],
        alpha=1.0,
        L=1.0,
        beta=1.0,
        C=2.0,
        holder=HolderConstants(alpha=1.0, L=1.0),
        density=DensityFloor(p_min=1.0, c0=0.5, r0=1.0),
    )


def power_margin(kappa: float = 2.0, d: int = 1) -> ProblemSpec:
    """Uniform marginal on [0, 1]^d, ``eta = 1/2 + sign(t) |t|^kappa / 2`` with
    ``t = 2 x_1 - 1``.

    The margin mass is ``min(1, (2 eps)^(1/kappa))`` so beta = 1/kappa. eta is
    kappa-Lipschitz for kappa >= 1 and kappa-Hölder with constant 1 otherwise;
    the smoothness constant follows from :func:`holder_density_constant` with the
    cube's corner fraction c0 = 2^-d.
    """
    if kappa <= 0:
        raise InvalidInputError(f"kappa={kappa} must be positive")
    d = int(d)

    def eta(X):
        t = 2.0 * X[:, 0] - 1.0
        return 0.5 + 0.5 * np.sign(t) * np.abs(t) ** kappa

    holder = HolderConstants(alpha=min(1.0, kappa), L=kappa if kappa >= 1 else 1.0)
    density = DensityFloor(p_min=1.0, c0=2.0**-d, r0=1.0)
    return ProblemSpec(
        name=f"power-margin:kappa={kappa:g}" + (f",d={d}" if d != 1 else ""),
        dim=d,
        sampler=_uniform_cube(d),
        eta=eta,
        alpha=holder.alpha,
        L=holder_density_constant(holder, density, d),
        beta=1.0 / kappa,
        C=max(2.0, 2.0 ** (1.0 / kappa)),
        holder=holder,
        density=density,
    )


def gaussian_1d() -> ProblemSpec:
    """Standard normal marginal with ``eta = Phi``.

    eta(X) is then uniform on [0, 1], so the margin mass is min(2 eps, 1).
    Smoothness holds with L = 1 because |Phi(x) - Phi(z)| never exceeds the
    normal mass of the open interval centred at x with radius |x - z|.
    There is no density floor: the support is the whole line.
    """
    return ProblemSpec(
        name="gaussian-1d",
        dim=1,
        sampler=lambda rng, m: rng.standard_normal((m, 1)),
        eta=lambda X: ndtr(X[:, 0]),
        alpha=1.0,
        L=1.0,
        beta=1.0,
        C=2.0,
        holder=HolderConstants(alpha=1.0, L=1.0 / math.sqrt(2.0 * math.pi)),
        density=None,
    )


def uniform_problem(eta: RegressionFn, name: str = "custom", dim: int = 1, **constants) -> ProblemSpec:
    """Uniform marginal on [0, 1]^dim with an arbitrary vectorized ``eta``."""
    values = dict(alpha=1.0, L=1.0, beta=1.0, C=2.0)
    values.update(constants)
    return ProblemSpec(name=name, dim=dim, sampler=_uniform_cube(dim), eta=eta, **values)


FAMILIES: dict[str, Callable[..., ProblemSpec]] = {
    "linear-1d": linear_1d,
    "power-margin": power_margin,
    "gaussian-1d": gaussian_1d,
}
_DECLARED = ("alpha", "L", "beta", "C")


def _parse_number(text: str) -> float | int:
    try:
        return int(text)
    except ValueError:
        return float(text)


def resolve_family(text: str) -> ProblemSpec:
    """Build a problem from ``name[:key=value,...]``.

    Keys are family arguments (``kappa``, ``d`` for power-margin) or
    overrides of the declared constants ``alpha``, ``L``, ``beta``, ``C``.
    """
    name, _, rest = text.strip().partition(":")
    if name not in FAMILIES:
        raise InvalidInputError(f"unknown problem family {name!r}; known: {', '.join(FAMILIES)}")
    family_args: dict[str, Any] = {}
    overrides: dict[str, float] = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise InvalidInputError(f"malformed family parameter {item!r}")
        try:
            number = _parse_number(value)
        except ValueError:
            raise InvalidInputError(f"non-numeric family parameter {item!r}") from None
        if key in _DECLARED:
            overrides[key] = float(number)
        else:
            family_args[key] = number
    try:
        spec = FAMILIES[name](**family_args)
    except TypeError as exc:
        raise InvalidInputError(f"bad parameters for {name}: {exc}") from None
    if overrides:
        spec = replace(spec, name=text.strip(), **overrides)
    return spec


# -- assumption verifiers ---------------------------------------------------


@dataclass
class AssumptionReport:
    assumption_id: str
    tested_points: int
    worst_ratio: float
    passed: bool
    details: list[dict] = field(default_factory=list)
    slack_sigma: float = 3.0

    def line(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (
            f"{self.assumption_id}: {verdict}  worst_ratio={self.worst_ratio:.4f}  "
            f"tested={self.tested_points}  slack={self.slack_sigma:g}sigma"
        )


def mc_slack(p_hat, m: int, sigma: float):
    """Normal-approximation band ``sigma * sqrt(p(1-p)/m)``.

    The variance is floored at 1/m so that an estimate of exactly 0 or 1
    still carries a band of ``sigma / m``.
    """
    var = np.maximum(np.asarray(p_hat) * (1.0 - np.asarray(p_hat)), 1.0 / m)
    return sigma * np.sqrt(var / m)


def _ratio(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(lhs == 0, 0.0, lhs / rhs)
    return np.where((lhs > 0) & (rhs == 0), np.inf, out)


def verify_margin_noise(
    spec: ProblemSpec,
    sample_size: int = 100_000,
    eps_grid=DEFAULT_EPS_GRID,
    seed=0,
    slack_sigma: float = 3.0,
) -> AssumptionReport:
    """Check ``P(|eta - 1/2| < eps) < C eps^beta`` on a grid of eps."""
    eps = np.asarray(list(eps_grid), dtype=float)
    if eps.size == 0:
        raise InvalidInputError("eps_grid must be nonempty")
    if np.any((eps <= 0) | (eps > 1)):
        raise InvalidInputError("eps values must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    gap = np.abs(spec.eta_many(spec.sample(rng, sample_size)) - 0.5)
    p_hat = np.array([np.count_nonzero(gap < e) for e in eps]) / sample_size
    slack = mc_slack(p_hat, sample_size, slack_sigma)
    bound = spec.C * eps**spec.beta
    rhs = bound + slack
    ok = p_hat < rhs
    ratio = _ratio(p_hat, rhs)
    details = [
        dict(eps=float(e), estimate=float(p), bound=float(b), slack=float(s), ratio=float(r), passed=bool(o))
        for e, p, b, s, r, o in zip(eps, p_hat, bound, slack, ratio, ok)
    ]
    return AssumptionReport("H3", len(eps), float(ratio.max()), bool(ok.all()), details, slack_sigma)


def _open_ball_mass(sample: np.ndarray, centers: np.ndarray, radii: np.ndarray, chunk: int = 64) -> np.ndarray:
    counts = np.empty(len(centers), dtype=np.int64)
    for start in range(0, len(centers), chunk):
        c = centers[start : start + chunk]
        diff = sample[None, :, :] - c[:, None, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        counts[start : start + chunk] = np.count_nonzero(dist < radii[start : start + chunk, None], axis=1)
    return counts / len(sample)


def _mass_smoothness_check(spec, exponent, constant, pair_count, mass_sample, seed, slack_sigma, tag):
    if pair_count < 1:
        raise InvalidInputError("pair_count must be >= 1")
    rng = np.random.default_rng(seed)
    x = spec.sample(rng, pair_count)
    z = spec.sample(rng, pair_count)
    sample = spec.sample(rng, mass_sample)
    r = np.sqrt(np.sum((x - z) ** 2, axis=1))
    mass = _open_ball_mass(sample, x, r)
    slack = mc_slack(mass, mass_sample, slack_sigma)
    lhs = np.abs(spec.eta_many(x) - spec.eta_many(z))
    rhs = constant * (mass + slack) ** (exponent / spec.dim)
    ok = lhs <= rhs
    ratio = _ratio(lhs, rhs)
    worst = np.argsort(-ratio, kind="stable")[:10]
    details = [
        dict(x=x[i].tolist(), z=z[i].tolist(), gap=float(lhs[i]), mass=float(mass[i]), bound=float(rhs[i]), ratio=float(ratio[i]))
        for i in worst
    ]
    return AssumptionReport(tag, pair_count, float(ratio.max()), bool(ok.all()), details, slack_sigma)


def verify_smoothness(
    spec: ProblemSpec,
    pair_count: int = 1000,
    mass_sample: int = 100_000,
    seed=0,
    slack_sigma: float = 3.0,
) -> AssumptionReport:
    """Check ``|eta(x) - eta(z)| <= L * P(open ball(x, |x-z|))^(alpha/d)`` on random pairs."""
    return _mass_smoothness_check(spec, spec.alpha, spec.L, pair_count, mass_sample, seed, slack_sigma, "H4")


def verify_holder(spec: ProblemSpec, pair_count: int = 1000, seed=0) -> AssumptionReport:
    """Deterministic check of the declared Hölder constants on random pairs."""
    if spec.holder is None:
        raise InvalidInputError(f"{spec.name} declares no Hölder constants")
    rng = np.random.default_rng(seed)
    x = spec.sample(rng, pair_count)
    z = spec.sample(rng, pair_count)
    r = np.sqrt(np.sum((x - z) ** 2, axis=1))
    lhs = np.abs(spec.eta_many(x) - spec.eta_many(z))
    rhs = spec.holder.L * r**spec.holder.alpha + 1e-12
    ratio = _ratio(lhs, rhs)
    return AssumptionReport("H1", pair_count, float(ratio.max()), bool(np.all(lhs <= rhs)), [], 0.0)


def verify_density_smoothness(
    spec: ProblemSpec,
    pair_count: int = 1000,
    seed=0,
    mass_sample: int = 100_000,
    slack_sigma: float = 3.0,
) -> AssumptionReport:
    """Check the smoothness inequality implied by Hölder continuity and a density floor.

    Raises :class:`InvalidInputError` when the problem has no density floor
    (e.g. a Gaussian marginal) or no Hölder constants.
    """
    if spec.density is None:
        raise InvalidInputError(f"{spec.name}: no density lower bound")
    if spec.holder is None:
        raise InvalidInputError(f"{spec.name}: no Hölder constants")
    constant = holder_density_constant(spec.holder, spec.density, spec.dim)
    report = _mass_smoothness_check(
        spec, spec.holder.alpha, constant, pair_count, mass_sample, seed, slack_sigma, "T1"
    )
    report.details.insert(0, dict(derived_L=constant))
    return report


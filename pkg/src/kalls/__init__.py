"""Pool-based nonparametric active learning with a 1-NN output rule."""

from .algorithm import KallsParams, KallsRun, delta_hat, k_cap, run_kalls, tau
from .baseline import PassiveParams, choose_k_n, train_passive
from .classifier import NNClassifier
from .errors import BudgetExhausted, InvalidInputError, UndefinedResultError
from .evaluation import excess_risk, fit_rate, margin_agreement
from .geometry import Pool
from .oracle import BudgetedOracle
from .problems import ProblemSpec, resolve_family, sample_pool

__all__ = [
    "BudgetExhausted",
    "BudgetedOracle",
    "InvalidInputError",
    "KallsParams",
    "KallsRun",
    "NNClassifier",
    "PassiveParams",
    "Pool",
    "ProblemSpec",
    "UndefinedResultError",
    "choose_k_n",
    "delta_hat",
    "excess_risk",
    "fit_rate",
    "k_cap",
    "margin_agreement",
    "resolve_family",
    "run_kalls",
    "sample_pool",
    "tau",
    "train_passive",
]

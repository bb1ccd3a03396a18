"""Risk estimation, excess risk, the synthetic-vs-original utility metric, and
model-comparison verdicts.

Risks are expectations under the true feature distribution.  Monte-Carlo
estimates share test draws across the models being compared (common random
numbers), so the utility of a model against itself is exactly zero and the
standard error of a difference reflects the coupled draws.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .datamodel import (
    NoiseModel,
    SeedSpec,
    TaskKind,
    labels_from_probabilities,
    sample_noise,
)
from .densities import DensityModel
from .erm import FittedModel, ModelClass, population_optimum
from .errors import Indeterminate, TaskMismatch, UnsupportedQuadrature
from .estimators import FittedEstimator

SQUARED = "squared"
ZERO_ONE = "zero-one"

Predictor = Union[FittedModel, FittedEstimator, Callable]


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    std_error: float
    method: str  # "monte-carlo" or "quadrature-1d"
    loss: str
    n_test: int = 0

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "method": self.method,
            "loss": self.loss,
            "n_test": self.n_test,
        }


@dataclass(frozen=True)
class RiskConfig:
    """Everything needed to evaluate risks in a scenario."""

    density: DensityModel
    truth: Callable  # conditional mean (regression) or P(Z=+1|x) (classification)
    loss: str = SQUARED
    noise: Optional[NoiseModel] = None
    n_test: int = 50_000
    method: str = "monte-carlo"
    seed: SeedSpec = SeedSpec(0)
    population_m: int = 100_000

    @property
    def task(self) -> TaskKind:
        return TaskKind.REGRESSION if self.loss == SQUARED else TaskKind.CLASSIFICATION


@dataclass(frozen=True)
class UtilityReport:
    task: TaskKind
    risk_synthetic: RiskEstimate
    risk_original: RiskEstimate
    utility: float
    combined_std_error: float

    def to_json_dict(self) -> dict:
        return {
            "task": self.task.value,
            "risk_synthetic": self.risk_synthetic.to_json_dict(),
            "risk_original": self.risk_original.to_json_dict(),
            "utility": self.utility,
            "combined_std_error": self.combined_std_error,
        }


@dataclass(frozen=True)
class ComparisonReport:
    """Population-optima comparison; all four risks are under the TRUE
    distribution.  Signs are declared only outside a two-standard-error dead
    band around zero."""

    risk_f1_real: RiskEstimate
    risk_f2_real: RiskEstimate
    risk_f1_synth: RiskEstimate
    risk_f2_synth: RiskEstimate
    original_sign: int
    synthetic_sign: int
    consistent: bool
    optima: dict

    def to_json_dict(self) -> dict:
        return {
            "risk_f1_real": self.risk_f1_real.to_json_dict(),
            "risk_f2_real": self.risk_f2_real.to_json_dict(),
            "risk_f1_synth": self.risk_f1_synth.to_json_dict(),
            "risk_f2_synth": self.risk_f2_synth.to_json_dict(),
            "original_sign": self.original_sign,
            "synthetic_sign": self.synthetic_sign,
            "consistent": self.consistent,
            "optima": {k: list(map(float, v)) for k, v in self.optima.items()},
        }


def _score_fn(model: Predictor, loss: str) -> Callable:
    """Normalize a predictor to a vectorized score function.

    FittedEstimator objects enter as plug-ins: the conditional mean for
    squared loss, the score eta_hat - 1/2 for zero-one loss.
    """
    if isinstance(model, FittedModel):
        return model.predict
    if isinstance(model, FittedEstimator):
        if loss == SQUARED:
            if model.task is not TaskKind.REGRESSION:
                raise TaskMismatch("squared loss requires a regression estimator")
            return model.mean
        if model.task is not TaskKind.CLASSIFICATION:
            raise TaskMismatch("zero-one loss requires a classification estimator")
        return lambda X: model.prob(X) - 0.5
    return model


def _truth_fn(truth, loss: str) -> Callable:
    if isinstance(truth, FittedEstimator):
        return truth.mean if loss == SQUARED else truth.prob
    return truth


def _model_knots(model: Predictor) -> tuple:
    if isinstance(model, FittedModel):
        return model.quadrature_knots()
    return ()


def _sign_pred(scores: np.ndarray) -> np.ndarray:
    return np.where(scores >= 0.0, 1.0, -1.0)


def _loss_vector(
    score: Callable, loss: str, X: np.ndarray, target: np.ndarray
) -> np.ndarray:
    s = np.asarray(score(X), dtype=float).reshape(-1)
    if loss == SQUARED:
        return (s - target) ** 2
    return (_sign_pred(s) != target).astype(float)


def _draw_targets(cfg: RiskConfig, X: np.ndarray, seed: SeedSpec) -> np.ndarray:
    values = np.asarray(_truth_fn(cfg.truth, cfg.loss)(X), dtype=float).reshape(-1)
    if cfg.loss == SQUARED:
        if cfg.noise is not None and cfg.noise.variance > 0:
            values = values + sample_noise(cfg.noise, X.shape[0], seed)
        return values
    return labels_from_probabilities(values, seed.rng())


def _quad_over_density(density: DensityModel, integrand: Callable, extra_knots=()) -> float:
    if density.dim != 1:
        raise UnsupportedQuadrature("quadrature risks require one-dimensional features")
    f = density.factors()[0]
    pts = sorted({k for k in (*f.knots(), *extra_knots) if f.a < k < f.b})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(
            lambda x: float(f.pdf1(x)) * integrand(x), f.a, f.b, points=pts or None, limit=200
        )
    return val


def estimate_risk(
    model: Predictor,
    density: DensityModel,
    truth,
    noise: Optional[NoiseModel] = None,
    loss: str = SQUARED,
    n_test: int = 50_000,
    seed: SeedSpec = SeedSpec(0),
    method: str = "monte-carlo",
) -> RiskEstimate:
    """Risk of a single predictor under (density, truth, noise).

    Monte-Carlo is unbiased with std_error = sample std / sqrt(n_test);
    one-dimensional quadrature is deterministic (std_error = 0).
    """
    score = _score_fn(model, loss)
    truth_fn = _truth_fn(truth, loss)
    if method == "quadrature":
        knots = _model_knots(model)
        if loss == SQUARED:
            sigma2 = noise.variance if noise is not None else 0.0

            def integrand(x):
                pt = np.array([[x]])
                return (float(score(pt)[0]) - float(truth_fn(pt)[0])) ** 2

            val = _quad_over_density(density, integrand, knots) + sigma2
        else:

            def integrand(x):
                pt = np.array([[x]])
                eta = float(truth_fn(pt)[0])
                return eta if float(score(pt)[0]) < 0.0 else 1.0 - eta

            val = _quad_over_density(density, integrand, knots)
        return RiskEstimate(val, 0.0, "quadrature-1d", loss)

    cfg = RiskConfig(density=density, truth=truth, loss=loss, noise=noise, seed=seed)
    X = density.sample(n_test, seed.child(91))
    target = _draw_targets(cfg, X, seed.child(92))
    lv = _loss_vector(score, loss, X, target)
    return RiskEstimate(
        float(lv.mean()), float(lv.std(ddof=1) / math.sqrt(n_test)), "monte-carlo", loss, n_test
    )


def excess_risk(
    model: Predictor,
    density: DensityModel,
    truth,
    loss: str = SQUARED,
    method: str = "quadrature",
    n_test: int = 50_000,
    seed: SeedSpec = SeedSpec(0),
) -> float:
    """Squared loss: E[(f - mu)^2].  Zero-one: E[1{sign f != Bayes} |2 eta - 1|]."""
    score = _score_fn(model, loss)
    truth_fn = _truth_fn(truth, loss)
    if method == "quadrature":
        if loss == SQUARED:

            def integrand(x):
                pt = np.array([[x]])
                return (float(score(pt)[0]) - float(truth_fn(pt)[0])) ** 2

        else:

            def integrand(x):
                pt = np.array([[x]])
                eta = float(truth_fn(pt)[0])
                bayes = 1.0 if eta >= 0.5 else -1.0
                pred = 1.0 if float(score(pt)[0]) >= 0.0 else -1.0
                return abs(2.0 * eta - 1.0) if pred != bayes else 0.0

        return _quad_over_density(density, integrand, _model_knots(model))

    X = density.sample(n_test, seed.child(93))
    truth_vals = np.asarray(truth_fn(X), dtype=float).reshape(-1)
    scores = np.asarray(score(X), dtype=float).reshape(-1)
    if loss == SQUARED:
        return float(np.mean((scores - truth_vals) ** 2))
    bayes = np.where(truth_vals >= 0.5, 1.0, -1.0)
    return float(np.mean((_sign_pred(scores) != bayes) * np.abs(2.0 * truth_vals - 1.0)))


def risks_common_draws(models: Sequence[Predictor], cfg: RiskConfig):
    """Risks of several predictors on one shared test draw.

    Returns (estimates, loss_matrix); the loss matrix enables exact standard
    errors for pairwise differences.
    """
    if cfg.method == "quadrature":
        ests = [
            estimate_risk(m, cfg.density, cfg.truth, cfg.noise, cfg.loss, method="quadrature")
            for m in models
        ]
        return ests, None
    X = cfg.density.sample(cfg.n_test, cfg.seed.child(91))
    target = _draw_targets(cfg, X, cfg.seed.child(92))
    vectors = [_loss_vector(_score_fn(m, cfg.loss), cfg.loss, X, target) for m in models]
    ests = [
        RiskEstimate(
            float(v.mean()),
            float(v.std(ddof=1) / math.sqrt(cfg.n_test)),
            "monte-carlo",
            cfg.loss,
            cfg.n_test,
        )
        for v in vectors
    ]
    return ests, np.vstack(vectors)


def _diff_std_error(loss_matrix, i: int, j: int, cfg: RiskConfig) -> float:
    if loss_matrix is None:
        return 0.0
    d = loss_matrix[i] - loss_matrix[j]
    return float(d.std(ddof=1) / math.sqrt(cfg.n_test))


def utility_metric(
    model_synthetic: Predictor, model_original: Predictor, cfg: RiskConfig
) -> UtilityReport:
    """|risk(synthetic-trained) - risk(original-trained)| on shared test draws."""
    (est_s, est_o), loss_matrix = risks_common_draws([model_synthetic, model_original], cfg)
    combined = _diff_std_error(loss_matrix, 0, 1, cfg)
    return UtilityReport(
        task=cfg.task,
        risk_synthetic=est_s,
        risk_original=est_o,
        utility=abs(est_s.value - est_o.value),
        combined_std_error=combined,
    )


def _band_sign(diff: float, se: float) -> int:
    if abs(diff) < 2.0 * se or diff == 0.0:
        return 0
    return 1 if diff > 0 else -1


def compare_models(
    class1: ModelClass,
    class2: ModelClass,
    real_density: DensityModel,
    synth_density: DensityModel,
    truth,
    estimator_for_synth: FittedEstimator,
    cfg: RiskConfig,
) -> ComparisonReport:
    """Does synthetic training preserve the ranking of two model classes?

    Computes population optima of both classes under the real and the
    synthetic distribution (the latter with responses generated by the
    estimation model), evaluates all four risks under the TRUE distribution,
    and reports sign agreement of the two risk gaps.  Raises Indeterminate
    when either gap falls inside the two-standard-error dead band.
    """
    m = cfg.population_m
    truth_fn = _truth_fn(truth, cfg.loss)
    # noise-free targets: the population argmin is unchanged, MC error smaller
    f1 = population_optimum(class1, real_density, truth_fn, None, m, cfg.seed.child(1))
    f2 = population_optimum(class2, real_density, truth_fn, None, m, cfg.seed.child(2))
    synth_truth = (
        estimator_for_synth.mean if cfg.loss == SQUARED else estimator_for_synth.prob
    )
    f1s = population_optimum(class1, synth_density, synth_truth, None, m, cfg.seed.child(3))
    f2s = population_optimum(class2, synth_density, synth_truth, None, m, cfg.seed.child(4))

    ests, loss_matrix = risks_common_draws([f1, f2, f1s, f2s], cfg)
    gap_orig = ests[0].value - ests[1].value
    gap_synth = ests[2].value - ests[3].value
    sign_orig = _band_sign(gap_orig, _diff_std_error(loss_matrix, 0, 1, cfg))
    sign_synth = _band_sign(gap_synth, _diff_std_error(loss_matrix, 2, 3, cfg))
    if sign_orig == 0 or sign_synth == 0:
        raise Indeterminate(
            f"risk gap inside dead band (original {gap_orig:.3g}, synthetic {gap_synth:.3g})"
        )
    return ComparisonReport(
        risk_f1_real=ests[0],
        risk_f2_real=ests[1],
        risk_f1_synth=ests[2],
        risk_f2_synth=ests[3],
        original_sign=sign_orig,
        synthetic_sign=sign_synth,
        consistent=sign_orig == sign_synth,
        optima={
            "f1_real": f1.coefficients,
            "f2_real": f2.coefficients,
            "f1_synth": f1s.coefficients,
            "f2_synth": f2s.coefficients,
        },
    )

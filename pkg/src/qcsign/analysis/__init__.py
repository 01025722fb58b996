"""Fairness analysis: probabilities to reject and to cheat, and their sweeps."""

from qcsign.analysis.distributions import AlphaDistribution, AlphaKind, SplitModel
from qcsign.analysis.fairness import (
    FairnessCurve,
    RiskCheck,
    ScalingFit,
    chebyshev_risk_check,
    expected_prob_cheat,
    fairness_curve,
    prob_cheat_mixture,
    reject_matrix,
    scaling_fit,
    sup_expected_cheat,
)
from qcsign.analysis.logspace import LogProb
from qcsign.analysis.probabilities import (
    binom_tail,
    detection_prob,
    detection_prob_rotated,
    detection_prob_rotated_exact,
    hypergeom_pmf,
    prob_cheat,
    prob_reject,
    prob_reject_avg,
    reject_ability,
)
from qcsign.analysis.quadrature import QuadratureError

__all__ = [
    "AlphaDistribution", "AlphaKind", "SplitModel", "FairnessCurve", "RiskCheck",
    "ScalingFit", "LogProb", "QuadratureError", "binom_tail", "chebyshev_risk_check",
    "detection_prob", "detection_prob_rotated", "detection_prob_rotated_exact",
    "expected_prob_cheat", "fairness_curve", "hypergeom_pmf", "prob_cheat",
    "prob_cheat_mixture", "prob_reject", "prob_reject_avg", "reject_ability",
    "reject_matrix", "scaling_fit", "sup_expected_cheat",
]

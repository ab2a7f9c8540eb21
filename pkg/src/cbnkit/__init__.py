"""Discrete causal Bayesian networks: discovery, back-door identification,
exact estimation and refutation."""

from cbnkit.bayesnet import Cpt, DiscreteBayesNet, Factor, eliminate, fit_mle, joint_probability, marginal
from cbnkit.causal import (
    AdjustmentEstimand,
    EffectReport,
    RiskRatioReport,
    aggregate_bands,
    backdoor_adjust,
    identify,
    observational_contrast,
    risk_ratio,
    treatment_effect,
)
from cbnkit.data import Dataset, Variable, VariableSchema, forward_sample, load_csv, write_csv
from cbnkit.discovery import Blacklist, discover
from cbnkit.graph import CausalDag, Edge, MixedGraph, Path, d_separated, expand_latents, mutilate, read_graph
from cbnkit.refutation import RefutationConfig, RefutationReport, placebo_test, subsample_test

__version__ = "0.1.0"

"""Streaming fraud detection for mobile-money transactions.

Instance-incremental classifiers (naive Bayes, Hoeffding tree, windowed k-NN)
that score each transaction as it occurs and learn from it immediately, an
online bagging ensemble over them, batch baselines, a seeded synthetic
transaction generator and a cost-weighted evaluation harness.
"""
from ._backend import BACKEND, available_backends
from .bagging import BootstrapBagging, OnlineBagging
from .base import (ClassDistribution, ContractError, IncrementalLearner, classify, verdict,
                   verdicts)
from .baselines import BatchTree, LogisticRegression
from .data import (FRAUD, LEGAL, TRANSACTION_SCHEMA, DatasetSchema, FeatureVector,
                   LabeledDataset, Transaction, TxType, balance_dataset, parse_csv,
                   split_stratified_folds, to_features, write_csv)
from .evaluation import (ConfusionMatrix, CostParams, EvalReport, compare, cost,
                         kfold_evaluate, prequential_evaluate, rmse)
from .generator import GeneratorConfig, generate, inject_fraud_scenario
from .hoeffding import HoeffdingTree, hoeffding_bound
from .knn import WindowedKNN
from .naive_bayes import NaiveBayesUpdateable

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "available_backends",
    "BootstrapBagging", "OnlineBagging",
    "ClassDistribution", "ContractError", "IncrementalLearner", "classify", "verdict",
    "verdicts",
    "BatchTree", "LogisticRegression",
    "FRAUD", "LEGAL", "TRANSACTION_SCHEMA", "DatasetSchema", "FeatureVector",
    "LabeledDataset", "Transaction", "TxType", "balance_dataset", "parse_csv",
    "split_stratified_folds", "to_features", "write_csv",
    "ConfusionMatrix", "CostParams", "EvalReport", "compare", "cost", "kfold_evaluate",
    "prequential_evaluate", "rmse",
    "GeneratorConfig", "generate", "inject_fraud_scenario",
    "HoeffdingTree", "hoeffding_bound",
    "WindowedKNN",
    "NaiveBayesUpdateable",
]

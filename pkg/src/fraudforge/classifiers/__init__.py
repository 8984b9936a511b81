"""The four downstream classifiers. Each model exposes ``score(rows) -> [0, 1]``."""

from .linear import LinearSvmModel, LogisticModel, lr_predict, lr_train, svm_score, svm_train
from .trees import (
    DecisionTree,
    GbtModel,
    RandomForestModel,
    ensemble_predict,
    gbt_train,
    rf_train,
    tree_train,
)

CLASSIFIERS = ("lr", "rf", "gbt", "svm")
DISPLAY_NAMES = {
    "lr": "Logistic Regression",
    "rf": "Random Forest",
    "gbt": "XGBoost-style GBT",
    "svm": "SVM",
}

"""Knowledge-guided cascade of heterogeneous classifiers.

Expert rules over atomic propositions drive a rule-based classifier; a
pool of such rule machines, learned baselines and external score adapters
is organized into a decision tree of experts by entropy-imbalance-gain
selection and rare-class Gini cascading, with optional confidence-weighted
fusion against an external neural branch and structured per-proposition
explanations.
"""

from .cascade import (
    CascadeConfig,
    CascadeNode,
    CascadeTree,
    FusionConfig,
    Leaf,
    build_cascade,
    export_tree,
    fit_fusion_alpha,
    fuse,
    import_tree,
    infer,
    tree_scores,
)
from .data import Dataset, Instance, load_dataset, save_dataset
from .dsl import (
    And,
    Atom,
    Expr,
    ExtractorDecl,
    Not,
    Or,
    RuleSet,
    format_expr,
    format_ruleset,
    load_ruleset,
    parse_expr,
    parse_ruleset,
    tokenize,
)
from .engine import (
    ClassScore,
    class_score,
    eval_expr,
    extract_satisfaction,
    fit_weights,
    rule_classifier_predict,
    satisfaction_vector,
)
from .evaluate import MetricsReport, evaluate_predictions, metrics_from_pairs
from .explain import explain, explanation_json
from .metrics import (
    EIGReport,
    RepresentationView,
    class_entropy,
    eig,
    entropy_imbalance,
    gini,
    local_density,
)
from .pool import ClassifierSpec, Pool, Prediction, TrainedClassifier, partition_by_prediction, train
from .resample import SmoteConfig, oversample_dataset, smote
from .synth import SynthConfig, load_synth_config, synth_config_from_json, synth_generate

__version__ = "0.1.0"

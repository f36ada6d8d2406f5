"""Rank-1 gradient features from fully connected network stacks.

The gradient of a cross-entropy loss (taken against a uniform label vector)
with respect to one layer's weights is an outer product of a forward
activation and a back-propagated signal. This package extracts those factor
pairs, compares them with the factorized trace kernel, and evaluates them
with one-vs-rest kernel SVMs and mean average precision.
"""

from .data import Dataset, load_dataset, make_synthetic_task, save_dataset
from .features import (
    ForwardFeature,
    GradientFeature,
    backprop_to,
    backward_seed,
    explicit_gradient,
    forward_feature,
    gradient_feature,
    gradient_sizes,
    load_features,
    save_features,
    uniform_labels,
)
from .kernels import GramMatrix, KernelKind, cross_gram, dot_kernel, gram, trace_kernel
from .metrics import average_precision, mean_ap
from .network import (
    Activation,
    LayerSpec,
    Network,
    forward,
    load_network,
    make_synthetic_network,
    save_network,
    tempered_softmax,
)
from .pipeline import PipelineConfig
from .svm import OvrSvmModel, SvmBinaryModel, decision_scores, train_binary, train_ovr

__version__ = "0.1.0"

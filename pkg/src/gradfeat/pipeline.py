"""End-to-end orchestration: extract, Gram, train, evaluate, compare.

Feature modes
-------------
``gradient``
    rank-1 factors of the layer-k weight gradient (trace kernel).
``forward``
    one normalized activation: x_k for hidden layers, y_L for the top layer.
``concat``
    the activations feeding and leaving layer k, normalized per block:
    x_{k-1}; x_k (x_{L-1}; y_L at the top).

Explicit ``blocks`` (e.g. ``["x2"]`` or ``["x1", "y3"]``) override the
defaults of the two forward modes.
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import features as feat
from . import kernels, metrics, svm
from ._binio import atomic_write
from .network import forward

MODES = ("gradient", "forward", "concat")


@dataclass
class PipelineConfig:
    layer: int
    mode: str = "gradient"
    tau: float = 2.0
    C: float = 1.0
    kernel: str | None = None
    blocks: list | None = None
    threads: int = 1
    interpolated_ap: bool = False
    tol: float = 1e-3

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown feature mode {self.mode!r}; choose from {MODES}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.kernel is None:
            self.kernel = "trace" if self.mode == "gradient" else "dot"
        kernels.KernelKind.parse(self.kernel)

    def validate_for(self, net):
        if not 1 <= self.layer <= net.depth:
            raise ValueError(f"layer {self.layer} outside 1..{net.depth} for this network")
        if self.mode == "gradient" and kernels.KernelKind.parse(self.kernel) != kernels.KernelKind.TRACE:
            raise ValueError("gradient features are compared with the trace kernel")

    def selectors(self, net):
        return default_blocks(self.mode, self.layer, net.depth) if self.blocks is None \
            else list(self.blocks)


def default_blocks(mode, k, L):
    top = f"y{L}" if k == L else f"x{k}"
    if mode == "forward":
        return [top]
    if mode == "concat":
        return [f"x{k - 1}", top]
    raise ValueError(f"mode {mode!r} has no activation blocks")


def _map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def extract(net, samples, config):
    """One feature per row of ``samples``; order and bits independent of threads."""
    config.validate_for(net)
    selectors = None if config.mode == "gradient" else config.selectors(net)

    def one(x):
        trace = forward(net, x, config.tau)
        if config.mode == "gradient":
            return feat.gradient_feature(trace, net, config.layer)
        return feat.forward_feature(trace, selectors)

    return _map(one, np.asarray(samples), config.threads)


def feature_metadata(net, config):
    meta = {"mode": config.mode, "layer": config.layer, "tau": config.tau,
            "kernel": config.kernel}
    if config.mode != "gradient":
        meta["blocks"] = config.selectors(net)
    return meta


def fingerprint_features(features):
    return svm.fingerprint_bytes(feat.features_to_bytes(features))


def train(features, labels, config, gram=None):
    """Train one-vs-rest SVMs; the model records the training-feature fingerprint."""
    kind = kernels.KernelKind.parse(config.kernel)
    if gram is None:
        gram = kernels.gram(features, kind, threads=config.threads)
    elif gram.kind != kind:
        raise ValueError(f"gram was built with the {gram.kind.name.lower()} kernel, "
                         f"config asks for {config.kernel}")
    model = svm.train_ovr(gram, labels, C=config.C, tol=config.tol)
    model.fingerprint = fingerprint_features(features)
    return model


def evaluate(model, train_features, test_features, labels, config=None, meta=None):
    """Score test features and return the report dictionary."""
    svm.check_fingerprint(model, fingerprint_features(train_features))
    threads = config.threads if config is not None else 1
    cross = kernels.cross_gram(train_features, test_features, model.kernel, threads=threads)
    scores = svm.decision_scores(model, cross)
    interpolated = bool(config.interpolated_ap) if config is not None else False
    m, per_class = metrics.mean_ap(scores, labels, interpolated=interpolated)
    info = dict(model.meta)
    info.update(meta or {})
    return {
        "mode": info.get("mode"),
        "layer": info.get("layer"),
        "tau": info.get("tau"),
        "blocks": info.get("blocks"),
        "kernel": model.kernel.name.lower(),
        "C": model.models[0].C,
        "ap_variant": "11-point" if interpolated else "non-interpolated",
        "n_test": int(scores.shape[0]),
        "classes": [{"class": c, "ap": None if np.isnan(ap) else float(ap)}
                    for c, ap in enumerate(per_class)],
        "map": m,
    }


def report_to_text(report):
    return json.dumps(report, indent=1, sort_keys=True) + "\n"


@dataclass
class RunResult:
    config: PipelineConfig
    report: dict
    model: object = field(repr=False)
    train_features: list = field(repr=False)
    test_features: list = field(repr=False)


def run(net, train_set, test_set, config):
    """Extract, train on ``train_set`` and evaluate on ``test_set``."""
    tr = extract(net, train_set.samples, config)
    te = extract(net, test_set.samples, config)
    model = train(tr, train_set.labels, config)
    model.meta = feature_metadata(net, config)
    report = evaluate(model, tr, te, test_set.labels, config)
    return RunResult(config, report, model, tr, te)


def comparison_rows(L):
    """Feature settings mirroring a per-layer forward/concat/gradient table.

    The forward activations x_0..x_{L-1}, y_L and x_L (probabilities), then
    for each layer k the concatenation x_{k-1}; x_k (x_{L-1}; y_L on top)
    followed by the layer-k gradient.
    """
    rows = [(f"x{k}", "forward", max(k, 1), [f"x{k}"]) for k in range(L)]
    rows.append((f"y{L}", "forward", L, [f"y{L}"]))
    rows.append((f"x{L} (prob)", "forward", L, [f"x{L}"]))
    for k in range(1, L + 1):
        blocks = default_blocks("concat", k, L)
        rows.append((";".join(blocks), "concat", k, blocks))
        rows.append((f"dE/dW{k}", "gradient", k, None))
    return rows


def compare(net, train_set, test_set, tau=2.0, C=1.0, threads=1, interpolated_ap=False):
    """mAP of every setting from :func:`comparison_rows`, as ``(label, report)`` pairs."""
    out = []
    for label, mode, k, blocks in comparison_rows(net.depth):
        cfg = PipelineConfig(layer=k, mode=mode, tau=tau, C=C, blocks=blocks, threads=threads,
                             interpolated_ap=interpolated_ap)
        out.append((label, run(net, train_set, test_set, cfg).report))
    return out


def format_comparison(rows):
    width = max(len(label) for label, _ in rows)
    lines = [f"{'features':<{width}}  {'kernel':<6}  mAP"]
    for label, rep in rows:
        lines.append(f"{label:<{width}}  {rep['kernel']:<6}  {100 * rep['map']:.2f}")
    return "\n".join(lines) + "\n"


def write_text(path, text):
    atomic_write(path, text, mode="w")


def write_json(path, obj):
    write_text(path, json.dumps(obj, indent=1, sort_keys=True) + "\n")


def sidecar_path(path):
    return os.fspath(path) + ".json"


def config_dict(config):
    return asdict(config)

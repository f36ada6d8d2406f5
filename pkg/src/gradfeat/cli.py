"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 oracle failure.
"""

import argparse
import json
import os
import struct
import sys

from . import checks, kernels, pipeline, svm
from . import features as feat
from ._binio import Reader
from .data import dataset_from_bytes, load_dataset, make_synthetic_task, save_dataset
from .errors import BadMagicError, GradFeatError
from .network import load_network, network_from_bytes, save_network

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ORACLE = 0, 1, 2, 3

# eigendecomposition in `info` is skipped above this size
_PSD_MAX_N = 2000


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dims(text):
    try:
        dims = [int(t) for t in text.replace("x", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dims {text!r}; use e.g. 32,48,32,10") from None
    if len(dims) < 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError("dims need at least three positive entries")
    return dims


def _blocks(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _config(args, net):
    cfg = pipeline.PipelineConfig(
        layer=args.layer if args.layer is not None else net.depth - 1,
        mode=args.mode, tau=args.tau, C=getattr(args, "C", 1.0),
        kernel=getattr(args, "kernel", None), blocks=args.blocks, threads=args.threads,
        interpolated_ap=getattr(args, "interpolated_ap", False))
    cfg.validate_for(net)
    return cfg


def _read_sidecar(path):
    side = pipeline.sidecar_path(path)
    if os.path.exists(side):
        with open(side) as fh:
            return json.load(fh)
    return {}


def cmd_make_synthetic(args):
    net, train, test = make_synthetic_task(args.seed, args.n, args.dims, args.classes,
                                           noise=args.noise)
    os.makedirs(args.out, exist_ok=True)
    save_network(net, os.path.join(args.out, "net.dfn"))
    save_dataset(train, os.path.join(args.out, "train.dfs"))
    save_dataset(test, os.path.join(args.out, "test.dfs"))
    print(f"wrote net.dfn (dims {','.join(map(str, net.dims))}), train.dfs and test.dfs "
          f"(n={args.n}, P={args.classes}) to {args.out}")


def cmd_extract(args):
    net = load_network(args.net)
    ds = load_dataset(args.data)
    if ds.dim != net.input_dim:
        raise ValueError(f"{args.data}: samples have dim {ds.dim}, network expects "
                         f"{net.input_dim}")
    cfg = _config(args, net)
    feats = pipeline.extract(net, ds.samples, cfg)
    feat.save_features(feats, args.out)
    pipeline.write_json(pipeline.sidecar_path(args.out), pipeline.feature_metadata(net, cfg))
    print(f"wrote {len(feats)} {cfg.mode} features to {args.out}")


def _kernel_for(args, path):
    if args.kernel:
        return kernels.KernelKind.parse(args.kernel)
    meta = _read_sidecar(path)
    if "kernel" in meta:
        return kernels.KernelKind.parse(meta["kernel"])
    with open(path, "rb") as fh:
        h = feat.read_feature_header(Reader(fh.read(22), what="feature file"))
    return kernels.KernelKind.TRACE if h.kind == feat.KIND_GRADIENT else kernels.KernelKind.DOT


def cmd_gram(args):
    kind = _kernel_for(args, args.features)
    train = feat.load_features(args.features)
    if args.test_features:
        g = kernels.cross_gram(train, feat.load_features(args.test_features), kind,
                               threads=args.threads)
    else:
        g = kernels.gram(train, kind, threads=args.threads)
    kernels.save_gram(g, args.out)
    print(f"wrote {g.shape[0]}x{g.shape[1]} {kind.name.lower()} gram to {args.out}")


def cmd_train(args):
    kind = _kernel_for(args, args.features)
    train = feat.load_features(args.features)
    ds = load_dataset(args.data)
    if ds.n != len(train):
        raise ValueError(f"{len(train)} features but {ds.n} labelled samples")
    g = kernels.load_gram(args.gram) if args.gram else None
    if g is not None and g.shape != (ds.n, ds.n):
        raise ValueError(f"gram {g.shape} does not match {ds.n} training samples")
    meta = _read_sidecar(args.features)
    cfg = pipeline.PipelineConfig(layer=meta.get("layer", 1), mode=meta.get("mode", "gradient"),
                                  C=args.C, kernel=kind.name.lower(), threads=args.threads,
                                  tol=args.tol)
    model = pipeline.train(train, ds.labels, cfg, gram=g)
    model.meta = meta
    svm.save_model(model, args.out)
    print(f"wrote {model.class_count}-class model to {args.out}")


def cmd_eval(args):
    model = svm.load_model(args.model)
    train = feat.load_features(args.train_features)
    test = feat.load_features(args.features)
    ds = load_dataset(args.data)
    if ds.n != len(test):
        raise ValueError(f"{len(test)} test features but {ds.n} labelled samples")
    if ds.class_count != model.class_count:
        raise ValueError(f"model has {model.class_count} classes, labels have {ds.class_count}")
    cfg = pipeline.PipelineConfig(layer=1, threads=args.threads,
                                  interpolated_ap=args.interpolated_ap)
    report = pipeline.evaluate(model, train, test, ds.labels, cfg)
    text = pipeline.report_to_text(report)
    if args.out:
        pipeline.write_text(args.out, text)
    sys.stdout.write(text)


def cmd_run(args):
    net = load_network(args.net)
    train = load_dataset(args.train)
    test = load_dataset(args.test)
    cfg = _config(args, net)
    result = pipeline.run(net, train, test, cfg)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        feat.save_features(result.train_features, os.path.join(args.out, "train.dff"))
        feat.save_features(result.test_features, os.path.join(args.out, "test.dff"))
        svm.save_model(result.model, os.path.join(args.out, "model.json"))
        pipeline.write_text(os.path.join(args.out, "report.json"),
                            pipeline.report_to_text(result.report))
    sys.stdout.write(pipeline.report_to_text(result.report))


def cmd_compare(args):
    net = load_network(args.net)
    rows = pipeline.compare(net, load_dataset(args.train), load_dataset(args.test), tau=args.tau,
                            C=args.C, threads=args.threads,
                            interpolated_ap=args.interpolated_ap)
    text = pipeline.format_comparison(rows)
    if args.out:
        pipeline.write_text(args.out, text)
    sys.stdout.write(text)


def cmd_check(args):
    results = checks.run_all()
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed")
    return EXIT_ORACLE if failed else EXIT_OK


def _info_lines(path):
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:4]
    if magic == b"DFN1":
        net = network_from_bytes(data)
        yield f"network  layers={net.depth}  classes={net.class_count}"
        yield f"{'k':>3} {'in':>7} {'out':>7} {'bias':>5} {'activation':<10} {'grad size':>12}"
        sizes = feat.gradient_sizes(net.dims)
        for (k, implied, _), layer in zip(sizes, net.layers):
            yield (f"{k:>3} {layer.in_dim:>7} {layer.out_dim:>7} "
                   f"{'yes' if layer.bias is not None else 'no':>5} "
                   f"{layer.activation.name:<10} {implied:>12}")
    elif magic == b"DFF1":
        h = feat.read_feature_header(Reader(data, what="feature file"))
        feat.features_from_bytes(data)
        kind = "gradient" if h.kind == feat.KIND_GRADIENT else "forward"
        yield f"features  kind={h.kind} ({kind})  count={h.count}  dim_a={h.dim_a}  dim_u={h.dim_u}"
    elif magic == b"DFS1":
        ds = dataset_from_bytes(data)
        yield f"dataset  n={ds.n}  dim={ds.dim}  classes={ds.class_count}"
        yield "positives per class " + " ".join(str(int(c)) for c in ds.labels.sum(axis=0))
    elif magic == b"DFG1":
        g = kernels.gram_from_bytes(data)
        yield (f"gram  {g.shape[0]}x{g.shape[1]}  kernel={g.kind.name.lower()}  "
               f"{'square' if g.is_square else 'rectangular'}")
        if g.is_square and g.shape[0] <= _PSD_MAX_N:
            lam, floor, ok = kernels.psd_report(g)
            yield f"min eigenvalue {lam:.3e} (floor {floor:.1e}) {'ok' if ok else 'NOT PSD'}"
    else:
        raise BadMagicError(f"{path}: unrecognized magic {magic!r}", offset=0)


def cmd_info(args):
    for line in _info_lines(args.path):
        print(line)


def _add_feature_args(p):
    p.add_argument("--layer", "-k", type=int, default=None,
                   help="1-based layer index over the FC stack (default: L-1)")
    p.add_argument("--mode", choices=pipeline.MODES, default="gradient")
    p.add_argument("--blocks", type=_blocks, default=None,
                   help="explicit activations for forward/concat modes, e.g. x1,y3")
    p.add_argument("--tau", type=float, default=2.0, help="SoftMax temperature (default 2)")


def build_parser():
    parser = _Parser(prog="gradfeat", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("make-synthetic", help="write a planted multi-label task and a random net")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--dims", type=_dims, default=[32, 48, 32, 10])
    p.add_argument("--classes", "-P", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_make_synthetic)

    p = sub.add_parser("extract", help="extract features for every sample of a dataset")
    p.add_argument("--net", required=True)
    p.add_argument("--data", required=True)
    _add_feature_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("gram", help="kernel matrix of a feature file (or test x train)")
    p.add_argument("--features", required=True)
    p.add_argument("--test-features")
    p.add_argument("--kernel", choices=("trace", "dot"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("train", help="train one-vs-rest SVMs")
    p.add_argument("--features", required=True)
    p.add_argument("--data", required=True, help="dataset holding the training labels")
    p.add_argument("--gram", help="precomputed training gram (optional)")
    p.add_argument("--kernel", choices=("trace", "dot"))
    p.add_argument("-C", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score test features and report per-class AP and mAP")
    p.add_argument("--model", required=True)
    p.add_argument("--train-features", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--data", required=True, help="dataset holding the test labels")
    p.add_argument("--interpolated-ap", action="store_true", help="11-point interpolated AP")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="extract, train and evaluate in one go")
    p.add_argument("--net", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    _add_feature_args(p)
    p.add_argument("--kernel", choices=("trace", "dot"))
    p.add_argument("-C", type=float, default=1.0)
    p.add_argument("--interpolated-ap", action="store_true")
    p.add_argument("--out", help="directory for features, model and report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="mAP table over forward, concat and gradient features")
    p.add_argument("--net", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--tau", type=float, default=2.0)
    p.add_argument("-C", type=float, default=1.0)
    p.add_argument("--interpolated-ap", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check", help="run the oracle self-check battery")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("info", help="print the header of any gradfeat file")
    p.add_argument("path")
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except (GradFeatError, ValueError, IndexError, TypeError, OSError, struct.error) as exc:
        print(f"gradfeat {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())

"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line; the lines are printed in the
pytest terminal summary (section "acceptance criteria"). Run this file
directly to see only these tests.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from gradfeat import checks, data, kernels, pipeline
from gradfeat.cli import main
from gradfeat.features import gradient_feature, gradient_sizes
from gradfeat.metrics import average_precision
from gradfeat.network import forward, make_synthetic_network


def record(number, title, passed, detail):
    ACCEPTANCE[number] = f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}"
    print(ACCEPTANCE[number])


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def test_1_factorized_trace_matches_dense():
    result, seconds = timed(checks.check_factorization, seed=2, count=60)
    ok = result.passed and result.max_error < 1e-10 and seconds < 5.0
    record(1, "factorized trace kernel", ok,
           f"60 pairs, max rel err {result.max_error:.2e} (< 1e-10), {seconds:.2f}s (< 5s)")
    assert result.max_error < 1e-10
    assert seconds < 5.0


def test_2_gradient_matches_finite_differences():
    result, seconds = timed(checks.check_finite_differences, seed=0, dims=(16, 12, 10, 8),
                            per_layer=50)
    ok = result.passed and seconds < 10.0
    record(2, "gradient vs finite differences", ok,
           f"max rel err {result.max_error:.2e} (< 1e-5), {result.detail}, {seconds:.2f}s (< 10s)")
    assert result.max_error < 1e-5
    assert "entries per layer" in result.detail and result.passed
    assert seconds < 10.0


def test_3_dimension_arithmetic():
    result = checks.check_dimensions()
    sizes = gradient_sizes(checks.LARGE_FC_DIMS)
    implied = [s[1] for s in sizes]
    stored = [s[2] for s in sizes]
    ok = implied == [37_748_736, 16_777_216, 4_096_000] and stored == [13_312, 8_192, 5_096]
    record(3, "dimension arithmetic", ok and result.passed,
           f"implied {implied}, stored {stored}")
    assert implied == [37_748_736, 16_777_216, 4_096_000]
    assert stored == [13_312, 8_192, 5_096]


def test_4_gram_properties():
    result = checks.check_gram_psd(seed=4, n=40)
    # the same Gram, rebuilt here to test the bare -1e-8 * trace floor
    rng = np.random.default_rng(4)
    net = make_synthetic_network(4, (24, 16, 12, 6))
    feats = [gradient_feature(forward(net, rng.standard_normal(24).astype(np.float32), 2.0),
                              net, 2) for _ in range(40)]
    K = kernels.gram(feats).entries
    lam = float(np.linalg.eigvalsh(K)[0])
    ok = result.passed and lam >= -1e-8 * np.trace(K)
    record(4, "gram symmetry / psd / self-similarity / cauchy-schwarz", ok,
           f"n=40, {result.detail}")
    assert result.passed, result.line()
    assert lam >= -1e-8 * np.trace(K)


def test_5_normalization_identity():
    result = checks.check_normalization(seed=3, count=100)
    record(5, "frobenius normalization", result.passed,
           f"100 pairs, max rel err {result.max_error:.2e} (< 1e-5)")
    assert result.max_error < 1e-5


def test_6_smo_matches_qp():
    result = checks.check_smo(seed=5, count=20)
    record(6, "smo vs qp oracle", result.passed,
           f"max rel err {result.max_error:.2e} (< 1e-4), {result.detail}")
    assert result.max_error < 1e-4
    assert result.passed


def test_7_average_precision_hand_cases():
    got = [average_precision([0.9, 0.8, 0.7], [1, 0, 1]),
           average_precision([0.3, 0.1, 0.2, 0.4], [1, 1, 1, 1]),
           average_precision([0.9, 0.8, 0.7, 0.6, 0.5], [0, 0, 0, 0, 1])]
    want = [5 / 6, 1.0, 1 / 5]
    err = max(abs(g - w) for g, w in zip(got, want))
    record(7, "average precision hand cases", err <= 1e-12,
           f"{', '.join(f'{g:.6f}' for g in got)}, max err {err:.1e} (<= 1e-12)")
    assert err <= 1e-12


def test_8_end_to_end(capsys):
    start = time.perf_counter()
    net, train, test = data.make_synthetic_task(0, 200, (32, 48, 32, 10), 5, noise=0.0)
    cfg = pipeline.PipelineConfig(layer=net.depth - 1, mode="gradient", C=1.0)
    clean = pipeline.run(net, train, test, cfg).report["map"]
    noisy_net, noisy_train, noisy_test = data.make_synthetic_task(0, 200, (32, 48, 32, 10), 5,
                                                                  noise=0.5)
    rows = pipeline.compare(noisy_net, noisy_train, noisy_test)
    table = pipeline.format_comparison(rows)
    seconds = time.perf_counter() - start
    modes = {rep["mode"] for _, rep in rows}
    ok = clean == 1.0 and seconds < 60.0 and modes == {"forward", "concat", "gradient"}
    with capsys.disabled():
        print("\nnoisy comparison (noise 0.5, n=200, P=5)\n" + table)
    record(8, "end-to-end planted task", ok,
           f"noise-free mAP {clean:.4f} at k=L-1, {len(rows)}-row comparison table, "
           f"{seconds:.1f}s (< 60s)")
    assert clean == 1.0
    assert modes == {"forward", "concat", "gradient"}
    assert seconds < 60.0


def _cli_files(root, threads):
    root.mkdir()
    flags = ["--threads", str(threads)]
    assert main(flags + ["make-synthetic", "--seed", "9", "--n", "60", "--out", str(root)]) == 0
    assert main(flags + ["run", "--net", str(root / "net.dfn"), "--train",
                         str(root / "train.dfs"), "--test", str(root / "test.dfs"),
                         "--out", str(root / "run")]) == 0
    assert main(flags + ["gram", "--features", str(root / "run" / "train.dff"),
                         "--out", str(root / "train.dfg")]) == 0
    assert main(flags + ["gram", "--features", str(root / "run" / "train.dff"),
                         "--test-features", str(root / "run" / "test.dff"),
                         "--out", str(root / "cross.dfg")]) == 0
    names = ["net.dfn", "train.dfs", "run/train.dff", "run/test.dff", "run/model.json",
             "run/report.json", "train.dfg", "cross.dfg"]
    return {name: (root / name).read_bytes() for name in names}


def test_9_determinism_across_threads(tmp_path, capsys):
    runs = [_cli_files(tmp_path / f"r{i}_t{t}", t) for i, t in enumerate((1, 4, 1, 8))]
    capsys.readouterr()
    differing = sorted({name for r in runs[1:] for name in r if r[name] != runs[0][name]})
    record(9, "byte-identical outputs across runs and thread counts", not differing,
           f"{len(runs)} runs (threads 1/4/1/8), {len(runs[0])} files each"
           + (f", differing: {differing}" if differing else ""))
    assert not differing


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))

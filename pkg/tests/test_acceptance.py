"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest -v -s tests/test_acceptance.py`` to see one line per
criterion (the -v test status lines double as the pass/fail report).
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from licodec import codec
from licodec.gaussian import folded_pmf
from licodec.metrics import RDCurve, RDPoint, bd_psnr, bd_rate, psnr_rgb
from licodec.model import flops_report, make_toy_config
from licodec.quantizer import QuantizerConfig, derive_constants, warp_array
from licodec.rangecoder import decode, encode
from tests.test_rangecoder import cross_entropy_bits, random_table


def announce(name):
    print(f"\nACCEPTANCE {name}: PASS")


def test_quantizer_identities():
    t0 = time.perf_counter()
    for k in range(1, 13):
        constants = derive_constants(QuantizerConfig(0.5, 0.04, k))
        for n in range(0, 8):
            mid = warp_array(np.array([n + 0.5]), constants)[0]
            assert abs(mid - (n + 0.5 - 0.04 * k)) < 1e-9
            assert warp_array(np.array([float(n)]), constants)[0] == float(n)
        for n in (0, 1, 4):
            grid = n + np.linspace(0.0, 1.0, 10_000)
            w = warp_array(grid, constants)
            assert np.all(np.diff(w) > 0), f"monotonicity fails at k={k}, n={n}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"quantizer suite took {elapsed:.2f}s"
    announce("quantizer-identities")


def test_quantizer_degenerate_identity():
    constants = derive_constants(QuantizerConfig(0.5, 0.04, 0))
    v = np.concatenate(
        [np.linspace(-5, 5, 20_001), np.array([0.25, -0.25, 3.999, -3.999])]
    )
    w = warp_array(v, constants)
    assert np.max(np.abs(w - v)) < 1e-12
    announce("quantizer-degenerate-k0")


def test_entropy_coder_losslessness_and_length_bound():
    rng = np.random.default_rng(20240)
    t0 = time.perf_counter()
    trials = 10_000
    for trial in range(trials):
        precision = int(rng.integers(8, 17))
        pool = [
            random_table(rng, precision, max_symbols=48, smin=int(rng.integers(-32, 32)))
            for _ in range(int(rng.integers(1, 4)))
        ]
        n = int(rng.integers(0, 120)) if trial % 50 else int(rng.integers(200, 800))
        tables = [pool[int(rng.integers(0, len(pool)))] for _ in range(n)]
        symbols = [int(rng.integers(t.smin, t.smax + 1)) for t in tables]
        stream = encode(symbols, tables)
        assert decode(stream, tables) == symbols, f"mismatch in trial {trial}"
        h = cross_entropy_bits(symbols, tables)
        assert 8 * len(stream.data) <= h + 32, (
            f"trial {trial}: {8 * len(stream.data)} bits vs entropy {h:.2f}"
        )
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0, f"coder suite took {elapsed:.2f}s"
    announce(f"entropy-coder-losslessness ({trials} trials, {elapsed:.1f}s)")


def test_pmf_normalization():
    rng = np.random.default_rng(777)
    # half the draws in the coding-offset domain, half with arbitrary means
    mus = np.concatenate(
        [rng.uniform(-0.5, 0.5, size=500), rng.uniform(-8.0, 8.0, size=500)]
    )
    sigmas = np.exp(rng.uniform(math.log(0.04), math.log(256.0), size=1000))
    pmf = folded_pmf(mus, sigmas, -32, 32)
    worst = float(np.max(np.abs(pmf.sum(axis=1) - 1.0)))
    assert worst < 1e-9, f"worst |sum - 1| = {worst:.3e}"
    announce(f"pmf-normalization (worst {worst:.2e})")


@pytest.fixture(scope="module")
def codec_run(toy_model):
    """Shared 100-image run feeding the determinism and rate criteria."""
    rng = np.random.default_rng(99)
    t0 = time.perf_counter()
    stats = []
    for i in range(100):
        img = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
        enc = codec.encode_image(img, toy_model)
        dec = codec.decode_image(enc.container, toy_model)
        assert np.array_equal(enc.y_symbols, dec.y_symbols), f"image {i}: y differs"
        assert np.array_equal(enc.z_symbols, dec.z_symbols), f"image {i}: z differs"
        assert enc.reconstruction.tobytes() == dec.image.tobytes(), (
            f"image {i}: reconstruction differs"
        )
        if i % 10 == 0:
            again = codec.encode_image(img, toy_model)
            assert again.container == enc.container, f"image {i}: nondeterministic"
        stats.append((len(enc.container), enc.estimated_bits))
    return stats, time.perf_counter() - t0


def test_end_to_end_determinism_and_losslessness(codec_run):
    stats, elapsed = codec_run
    assert len(stats) == 100
    assert elapsed < 60.0, f"codec run took {elapsed:.1f}s"
    announce(f"end-to-end-lossless (100 images, {elapsed:.1f}s)")


def test_rate_accounting_consistency(codec_run):
    stats, _ = codec_run
    slack = math.inf
    for nbytes, est_bits in stats:
        actual_bits = 8 * nbytes
        allowance = 0.01 * est_bits + 64 * 8
        gap = abs(actual_bits - est_bits)
        slack = min(slack, allowance - gap)
        assert gap <= allowance, (
            f"container {actual_bits} bits vs estimate {est_bits:.1f} "
            f"(allowance {allowance:.1f})"
        )
    announce(f"rate-accounting (worst-case spare allowance {slack:.1f} bits)")


def test_bd_metric_oracle():
    bpps = [0.1, 0.25, 0.5, 1.0, 2.0]
    psnrs = [28.0, 31.0, 34.0, 37.0, 40.0]
    anchor = RDCurve("anchor", [RDPoint(b, p) for b, p in zip(bpps, psnrs)])
    same = RDCurve("same", [RDPoint(b, p) for b, p in zip(bpps, psnrs)])
    assert bd_rate(same, anchor) == pytest.approx(0.0, abs=1e-9)
    assert bd_psnr(same, anchor) == pytest.approx(0.0, abs=1e-9)
    for c in (0.8, 1.1, 1.25):
        scaled = RDCurve("s", [RDPoint(b * c, p) for b, p in zip(bpps, psnrs)])
        assert bd_rate(scaled, anchor) == pytest.approx(100 * (c - 1), abs=1e-6)
    other = RDCurve(
        "o",
        [
            RDPoint(b, p)
            for b, p in zip(
                [0.12, 0.3, 0.6, 1.1, 2.3], [27.5, 30.2, 33.9, 36.5, 41.0]
            )
        ],
    )
    r_ab, r_ba = bd_rate(anchor, other), bd_rate(other, anchor)
    assert (1 + r_ab / 100) * (1 + r_ba / 100) == pytest.approx(1.0, abs=1e-6)
    assert bd_psnr(anchor, other) == pytest.approx(-bd_psnr(other, anchor), abs=1e-9)
    announce("bd-metric-oracle")


def test_psnr_spot_value():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 255, size=(48, 80, 3), dtype=np.uint8)
    res = psnr_rgb(img, (img + 1).astype(np.uint8))
    assert res.db == pytest.approx(48.1308, abs=1e-3)
    announce(f"psnr-spot-value ({res.db:.4f} dB)")


def test_flops_hyper_context_ratio_trend():
    ratios = []
    for width in (12, 24, 48, 96, 192):
        cfg = make_toy_config(ctx_width=width)
        ratios.append(flops_report(cfg, 1920, 1088)["hyper_context_ratio"])
    assert all(b > a for a, b in zip(ratios, ratios[1:])), ratios
    announce(
        "flops-ratio-trend (" + " -> ".join(f"{r:.2f}%" for r in ratios) + ")"
    )


def test_full_scale_results_declared_out_of_scope():
    """Full-scale BD deltas against VTM/VVC anchors and their RD curves need
    trained full-size weights plus anchor encoder runs; this repo's property
    suite replaces them.  The README must say so explicitly."""
    readme = Path(__file__).resolve().parents[1] / "README.md"
    text = readme.read_text(encoding="utf-8")
    assert "not reproduced" in text.lower()
    assert "full-scale" in text.lower()
    announce("non-reproducibility-statement")

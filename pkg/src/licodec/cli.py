"""Command-line surface: encode, decode, eval, quantizer-table, flops,
make-toy.

Every command is deterministic (identical inputs give byte-identical
outputs).  Exit codes: 0 success, 2 configuration error, 3 codec error,
4 I/O error; failures print one machine-parseable line
``error <code>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import glob
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import codec, metrics, model as model_mod, pngio
from .errors import ConfigError, LicodecError
from .quantizer import QuantizerConfig, constants_for_plan, derive_constants

ENV_MODEL_DIR = "LIC_MODEL_DIR"
IO_EXIT = 4

# run-config keys (flat key = value file); command-line flags always win
_RUN_KEYS = {
    "model_dir": str,
    "lambda": int,
    "step": float,
    "groups": str,
    "jobs": int,
    "anchor": str,
    "label": str,
    "dataset": str,
    "out": str,
}


def _read_run_config(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"run config not found: {p}")
    values = {}
    for lineno, raw in enumerate(p.read_text(encoding="ascii").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _RUN_KEYS:
            raise ConfigError(f"{p}:{lineno}: unknown run-config key {key!r}")
        try:
            values[key] = _RUN_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"{p}:{lineno}: bad value for {key!r}") from None
    return values


def _resolve(args, flag: str, config_key: str = None, default=None):
    """Flag value if given, else run-config value, else default."""
    value = getattr(args, flag, None)
    if value is not None:
        return value
    run_cfg = getattr(args, "_run_config", None) or {}
    value = run_cfg.get(config_key or flag)
    return default if value is None else value


def _model_dir(args) -> str:
    d = _resolve(args, "model_dir") or os.environ.get(ENV_MODEL_DIR)
    if not d:
        raise ConfigError(
            f"no model directory: pass --model-dir or set {ENV_MODEL_DIR}"
        )
    return d


def _apply_overrides(m: model_mod.Model, args) -> model_mod.Model:
    step = _resolve(args, "step")
    if step is not None:
        constants_for_plan(m.config.group_sizes, m.config.quant_upper_bound, step)
        m.config.quant_step = step
    groups = _resolve(args, "groups")
    if groups is not None:
        try:
            sizes = tuple(int(t) for t in str(groups).split())
        except ValueError:
            raise ConfigError(f"bad group plan override {groups!r}") from None
        if sum(sizes) != m.config.latent_channels:
            raise ConfigError(
                f"group override sums to {sum(sizes)}, latent has "
                f"{m.config.latent_channels} channels"
            )
        m.config.group_sizes = sizes
        m.validate()  # context-net weights must exist for the new plan
    return m


def _load_model(args) -> model_mod.Model:
    lam = _resolve(args, "lambda_index", config_key="lambda", default=0)
    m = model_mod.model_from_dir(_model_dir(args), int(lam))
    return _apply_overrides(m, args)


def _out_path(args):
    out = _resolve(args, "out")
    if out is None:
        raise ConfigError("no output path: pass --out or set it in the run config")
    return out


def cmd_encode(args) -> int:
    m = _load_model(args)
    image = pngio.load_image(args.input)
    result = codec.encode_image(image, m)
    out = _out_path(args)
    Path(out).write_bytes(result.container)
    print(
        f"bpp={result.bpp:.6f} payload_bpp={result.payload_bpp:.6f} "
        f"bytes={len(result.container)} estimate_bits={result.estimated_bits:.1f}"
    )
    return 0


def cmd_decode(args) -> int:
    m = _load_model(args)
    container = Path(args.input).read_bytes()
    result = codec.decode_image(container, m)
    out = _out_path(args)
    pngio.save_image(out, result.image)
    print(f"decoded {result.image.shape[1]}x{result.image.shape[0]} -> {out}")
    return 0


def _eval_one(path: str, m: model_mod.Model) -> tuple[float, float]:
    image = pngio.load_image(path)
    enc = codec.encode_image(image, m)
    dec = codec.decode_image(enc.container, m)
    return enc.bpp, metrics.psnr_rgb(image, dec.image).db


def cmd_eval(args) -> int:
    model_dir = _model_dir(args)
    dataset = _resolve(args, "dataset")
    if dataset is None:
        raise ConfigError("no dataset: pass --dataset or set it in the run config")
    paths = sorted(glob.glob(dataset))
    if not paths:
        raise ConfigError(f"dataset glob {dataset!r} matched no files")
    lambdas = (
        [int(t) for t in args.lambdas.split(",")]
        if args.lambdas
        else model_mod.available_lambdas(model_dir)
    )
    if not lambdas:
        raise ConfigError(f"no weight files in {model_dir}")
    jobs = int(_resolve(args, "jobs", default=1))
    points = []
    for lam in lambdas:
        m = _apply_overrides(model_mod.model_from_dir(model_dir, lam), args)
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            results = list(pool.map(lambda p: _eval_one(p, m), paths))
        bpp = sum(r[0] for r in results) / len(results)
        psnr = sum(r[1] for r in results) / len(results)
        points.append(metrics.RDPoint(bpp=bpp, psnr=psnr))
        print(f"lambda {lam}: bpp={bpp:.6f} psnr={psnr:.4f} ({len(paths)} images)")
    points.sort(key=lambda pt: pt.bpp)
    out = _out_path(args)
    curve = metrics.RDCurve(label=_resolve(args, "label", default="test"), points=points)
    metrics.emit_rd([curve], out)
    print(f"wrote {out}")
    anchor = _resolve(args, "anchor")
    if anchor:
        anchors = metrics.parse_rd(anchor)
        print(f"{'metric':<12} " + " ".join(f"{a.label:>14}" for a in anchors))
        rate_row = [metrics.bd_rate(curve, a) for a in anchors]
        psnr_row = [metrics.bd_psnr(curve, a) for a in anchors]
        print(f"{'BD-RATE(%)':<12} " + " ".join(f"{v:>14.4f}" for v in rate_row))
        print(f"{'BD-PSNR(dB)':<12} " + " ".join(f"{v:>14.4f}" for v in psnr_row))
    return 0


def cmd_quantizer_table(args) -> int:
    rows = []
    failure = None
    for k in range(args.max_group + 1):
        try:
            c = derive_constants(QuantizerConfig(args.upper_bound, args.step, k))
        except ConfigError as exc:
            failure = exc
            break
        rows.append((k, c.bias, c.a, c.b, c.c))
    with open(args.out, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "bias", "a", "b", "c"])
        for k, bias, a, b, cc in rows:
            writer.writerow([k, repr(bias), repr(a), repr(b), repr(cc)])
    print(f"wrote {len(rows)} rows to {args.out}")
    if failure is not None:
        raise failure
    return 0


def cmd_flops(args) -> int:
    cfg_path = Path(args.model_config)
    if not cfg_path.exists():
        raise ConfigError(f"model config not found: {cfg_path}")
    cfg = model_mod.parse_model_config(cfg_path.read_text(encoding="ascii"), str(cfg_path))
    report = model_mod.flops_report(cfg, args.width, args.height)
    print(f"{'module':<14}{'MACs':>16}")
    for name in ("g_a", "g_s", "h_a", "h_s", "ctx"):
        print(f"{name:<14}{report[name]:>16,}")
    print(f"{'total':<14}{report['total']:>16,}")
    print(f"hyper context ratio(%): {report['hyper_context_ratio']:.2f}")
    return 0


def cmd_make_toy(args) -> int:
    out = model_mod.write_toy_model_dir(
        args.out_dir, seed=args.seed, n_lambdas=args.lambdas
    )
    print(f"wrote toy model (lambdas 0..{args.lambdas - 1}) to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="licodec",
        description="Toy-scale learned-image-compression codec and evaluator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_flags(p):
        p.add_argument("--config", default=None,
                       help="run-config file (flat key = value); flags override it")
        p.add_argument("--model-dir", default=None, help=f"defaults to ${ENV_MODEL_DIR}")
        p.add_argument("--step", type=float, default=None, help="quantizer step override")
        p.add_argument("--groups", default=None,
                       help="group plan override, e.g. '1 1 2 4 12'")

    def add_model_flags(p):
        add_common_flags(p)
        p.add_argument("--lambda", dest="lambda_index", type=int, default=None)

    p = sub.add_parser("encode", help="compress a PNG into a container")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--out", default=None)
    add_model_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decompress a container into a PNG")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--out", default=None)
    add_model_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="sweep rate points over a dataset")
    p.add_argument("--dataset", default=None, help="glob of PNG files")
    add_common_flags(p)
    p.add_argument("--lambdas", default=None, help="comma list; default: all found")
    p.add_argument("--label", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--anchor", default=None, help="anchor RD CSV for BD deltas")
    p.add_argument("--out", default=None, help="output RD CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("quantizer-table", help="dump per-group warp constants")
    p.add_argument("--step", type=float, default=0.04)
    p.add_argument("--upper-bound", type=float, default=0.5)
    p.add_argument("--max-group", type=int, required=True, help="emit k = 0..K")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_quantizer_table)

    p = sub.add_parser("flops", help="per-module MAC table for a model config")
    p.add_argument("--config", dest="model_config", required=True,
                   help="model definition file (model.cfg)")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("make-toy", help="generate a toy model directory")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambdas", type=int, default=5)
    p.set_defaults(func=cmd_make_toy)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "config", None):
            args._run_config = _read_run_config(args.config)
        return args.func(args)
    except LicodecError as exc:
        print(f"error {exc.code}: {exc.message}", file=sys.stderr)
        return exc.exit_status
    except (OSError, FileNotFoundError) as exc:
        print(f"error io: {exc}", file=sys.stderr)
        return IO_EXIT


if __name__ == "__main__":
    sys.exit(main())

"""Batch command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core import ParseError, atomic_write, load_dataset, load_gmm, save_dataset, save_gmm, save_mask
from .dispersion import Metric, TrimPolicy, export_dispersion
from .em import EmConfig
from .pipeline import (
    DEFAULT_TAU,
    BenchmarkSpec,
    SpecError,
    TrainConfig,
    classify,
    results_csv,
    run_benchmark,
    split_chunks,
    summarize,
    train,
)
from .synth import MODES, ContaminationSpec, contaminate, sample_gmm
from .verify import SUITES

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


def _existing_file(flag: str, path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{flag}: no such file {path!r}")
    return p


def _parse_contamination(text: str) -> ContaminationSpec:
    fields = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, val = part.partition("=")
        if not sep:
            raise UsageError(f"--contaminate: expected key=value, got {part!r}")
        fields[key.strip()] = val.strip()
    unknown = set(fields) - {"rate", "mode", "scale"}
    if unknown:
        raise UsageError(f"--contaminate: unknown key {sorted(unknown)[0]!r}")
    try:
        rate = float(fields.get("rate", 0.0))
        scale = float(fields.get("scale", 10.0))
    except ValueError as exc:
        raise UsageError(f"--contaminate: {exc}") from None
    if not 0 <= rate < 1:
        raise UsageError(f"--contaminate: rate must lie in [0, 1), got {rate}")
    mode = fields.get("mode", "point_mass")
    if mode not in MODES:
        raise UsageError(f"--contaminate: mode must be one of {', '.join(MODES)}")
    if not scale > 0:
        raise UsageError(f"--contaminate: scale must be positive, got {scale}")
    return ContaminationSpec(rate=rate, mode=mode, scale=scale)


def _tau(args) -> float:
    tau = DEFAULT_TAU[Metric(args.metric)] if args.tau is None else args.tau
    if not 0 < tau <= 1:
        raise UsageError(f"--tau: must lie in (0, 1], got {tau}")
    return tau


def cmd_synth(args) -> int:
    model = load_gmm(_existing_file("--model", args.model))
    if args.n < 1:
        raise UsageError("--n: must be a positive integer")
    spec = _parse_contamination(args.contaminate) if args.contaminate else ContaminationSpec()
    child = np.random.SeedSequence(args.seed).generate_state(1, dtype=np.uint64)[0]
    data, _ = sample_gmm(model, args.n, args.seed)
    data, mask = contaminate(data, spec, int(child))
    save_dataset(data, args.out)
    save_mask(mask, f"{args.out}.mask")
    print(f"T={data.T} d={data.d} outliers={int(mask.sum())} -> {args.out}")
    return 0


def cmd_train(args) -> int:
    path = _existing_file("--data", args.data)
    if args.k < 1:
        raise UsageError("--k: must be a positive integer")
    tau = _tau(args)
    policy = TrimPolicy(Metric(args.metric), tau) if args.method == "are-trim" else None
    em = EmConfig(max_iters=args.em_iters, variance_floor_factor=args.var_floor, min_weight=args.min_weight)
    cfg = TrainConfig(k=args.k, seed=args.seed, em=em, policy=policy, em_retrim=not args.no_retrim)
    data = load_dataset(path)
    result = train(data, cfg)
    save_gmm(result.model, args.out)
    report = result.report()
    report["tau"] = tau if policy is not None else None
    if args.report:
        atomic_write(args.report, json.dumps(report, indent=2) + "\n")
    print(f"{result.method}: K={result.model.K} d={result.model.d} "
          f"retained={result.retained_fraction:.4f} final_ll={result.ll_trace[-1].log_likelihood:.6g}")
    return 0


def cmd_classify(args) -> int:
    mdir = Path(args.models)
    files = sorted(mdir.glob("*.json")) if mdir.is_dir() else []
    if not files:
        raise UsageError(f"--models: no *.json model files in {args.models!r}")
    test_path = _existing_file("--test", args.test)
    if args.chunk_len < 1:
        raise UsageError("--chunk-len: must be a positive integer")
    models = [(f.stem, load_gmm(f)) for f in files]
    chunks = split_chunks(load_dataset(test_path), args.chunk_len)
    result = classify(chunks, models)
    truth = None
    label_path = Path(f"{args.test}.labels")
    if label_path.is_file():
        truth = [line.strip() for line in label_path.read_text(encoding="utf-8").splitlines() if line.strip()]
        if len(truth) != len(chunks):
            raise ValueError(f"{label_path} lists {len(truth)} labels for {len(chunks)} chunks")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["chunk_index", "predicted", "true_label", "log_likelihood"])
    for i, lab in enumerate(result.labels):
        writer.writerow([i, lab, "" if truth is None else truth[i], repr(float(result.scores[i].max()))])
    atomic_write(args.out, buf.getvalue())
    if truth is not None:
        acc = float(np.mean([p == t for p, t in zip(result.labels, truth)]))
        print(f"accuracy={acc:.4f} over {len(chunks)} chunks")
    else:
        print(f"classified {len(chunks)} chunks")
    return 0


def cmd_dispersion(args) -> int:
    data = load_dataset(_existing_file("--data", args.data))
    model = load_gmm(_existing_file("--model", args.model))
    if data.d != model.d:
        raise ValueError(f"dimension mismatch: data d={data.d}, model d={model.d}")
    export_dispersion(args.out, data, model, Metric(args.metric), _tau(args))
    print(f"wrote {data.T} rows to {args.out}")
    return 0


def cmd_bench(args) -> int:
    _existing_file("--spec", args.spec)
    try:
        spec = BenchmarkSpec.load(args.spec)
    except SpecError as exc:
        raise UsageError(f"--spec: invalid field {exc}") from None
    rows = run_benchmark(spec)
    atomic_write(args.out, results_csv(rows))
    for cell in summarize(rows):
        print(f"{cell['method']:<13}{cell['metric']:<12}tau={cell['tau']:.2f}  "
              f"accuracy={cell['accuracy']:.4f}  retained={cell['mean_retained_fraction']:.4f}")
    return 0


def cmd_verify(args) -> int:
    kwargs = {"seed": args.seed}
    if args.trials is not None:
        if args.trials < 1:
            raise UsageError("--trials: must be a positive integer")
        kwargs["trials"] = args.trials
    checks = SUITES[args.suite](**kwargs)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    # show defaults, but not for required or unset flags
    def _get_help_string(self, action):
        if action.default is None or action.default is False or action.required:
            return action.help
        return super()._get_help_string(action)


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    p = argparse.ArgumentParser(prog="aretrim", description=__doc__.splitlines()[0], formatter_class=fmt)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    metrics = [m.value for m in Metric]
    tau_help = "trimming threshold in (0, 1]; unset means 0.96 for euclidean, 0.92 for mahalanobis"

    s = sub.add_parser("synth", help="sample a dataset from a GMM, optionally contaminated", formatter_class=fmt)
    s.add_argument("--model", required=True, help="GMM model file (JSON)")
    s.add_argument("--n", type=int, required=True, help="number of samples")
    s.add_argument("--contaminate", metavar="SPEC",
                   help="rate=R,mode=uniform_box|shifted_gaussian|point_mass,scale=S; unset means clean data")
    s.add_argument("--seed", type=int, default=0, help="64-bit unsigned seed")
    s.add_argument("--out", required=True,
                   help="dataset path; .bin/.atds writes binary, anything else CSV; mask goes to OUT.mask")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train a GMM, conventionally or with ARE-TRIM", formatter_class=fmt)
    t.add_argument("--data", required=True, help="training dataset (CSV, or binary for .bin/.atds)")
    t.add_argument("--k", type=int, default=32, help="number of Gaussians")
    t.add_argument("--method", choices=["conventional", "are-trim"], default="are-trim", help="training scheme")
    t.add_argument("--metric", choices=metrics, default="euclidean", help="dispersion metric for trimming")
    t.add_argument("--tau", type=float, default=None, help=tau_help)
    t.add_argument("--var-floor", type=float, default=0.01,
                   help="variance floor as a fraction of the global per-dimension variance")
    t.add_argument("--min-weight", type=float, default=0.05, help="minimum component weight")
    t.add_argument("--em-iters", type=int, default=50, help="maximum EM iterations")
    t.add_argument("--no-retrim", action="store_true",
                   help="run EM on all samples instead of re-trimming against the initial GMM")
    t.add_argument("--seed", type=int, default=0, help="64-bit unsigned seed for centroid selection")
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--report", help="JSON report path (retained fraction, nu, mu_hat, sigma_hat, LL trace)")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("classify", help="maximum-likelihood classification of test chunks", formatter_class=fmt)
    c.add_argument("--models", required=True, help="directory of *.json models; label = file stem")
    c.add_argument("--test", required=True, help="test dataset; optional TEST.labels holds one label per chunk")
    c.add_argument("--chunk-len", type=int, required=True, help="samples per classified chunk")
    c.add_argument("--out", required=True, help="per-chunk predictions (CSV)")
    c.set_defaults(func=cmd_classify)

    d = sub.add_parser("dispersion", help="export per-sample dispersion degrees", formatter_class=fmt)
    d.add_argument("--data", required=True, help="dataset")
    d.add_argument("--model", required=True, help="GMM model file (JSON)")
    d.add_argument("--metric", choices=metrics, default="euclidean", help="dispersion metric")
    d.add_argument("--tau", type=float, default=None, help=tau_help + " (sets the is_outlier column)")
    d.add_argument("--out", required=True, help="output CSV")
    d.set_defaults(func=cmd_dispersion)

    b = sub.add_parser("bench", help="run the synthetic contaminated-classification benchmark",
                       formatter_class=fmt)
    b.add_argument("--spec", required=True, help="benchmark spec (JSON)")
    b.add_argument("--out", required=True, help="results CSV")
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", help="Monte Carlo checks of the dispersion distribution results",
                       formatter_class=fmt)
    v.add_argument("--suite", required=True, choices=sorted(SUITES), help="check suite to run")
    v.add_argument("--trials", type=int, default=None,
                   help="Monte Carlo draws (runs, for the breakdown suite); unset means the suite default")
    v.add_argument("--seed", type=int, default=0, help="64-bit unsigned seed")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, ValueError, FloatingPointError, RuntimeError, OSError) as exc:
        print(f"{parser.prog} {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Exit codes: 0 success, 1 configuration or usage problem, 2 unreadable or
malformed files, 3 data that parses but violates a domain constraint.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from .config import GeneratorConfig, load_config
from .errors import (
    ConfigError,
    CoverageError,
    DataDomainError,
    FormatError,
    UnsupportedError,
    UsageError,
)
from .gmm import estimate_priors
from .metrics import aggregate, pearson, read_predictions, summarize
from .phantom import AGE_DISTRIBUTIONS, make_cohort
from .pipeline import (
    MANIFEST_HEADER,
    bench,
    generate,
    iter_stream,
    preprocess_for_training,
    run_batch,
    subject_id_from_path,
)
from .seeding import SampleSeed
from .volume import load_volume, save_volume


class _Parser(argparse.ArgumentParser):
    """Argument errors are config errors (exit 1), not argparse's exit 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _load_cfg(args) -> GeneratorConfig:
    cfg = load_config(args.config) if args.config else GeneratorConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    return cfg


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_generate(args) -> int:
    cfg = _load_cfg(args)
    s = load_volume(args.seg, "label")
    subject = args.subject or subject_id_from_path(args.seg)
    seed = SampleSeed(cfg.master_seed, subject, args.index)
    x = preprocess_for_training(generate(s, cfg, seed), cfg)
    save_volume(x, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_run_batch(args) -> int:
    cfg = _load_cfg(args)
    if args.stream:
        writer = csv.DictWriter(sys.stdout, fieldnames=MANIFEST_HEADER)
        writer.writeheader()
        paths = [Path(line.strip()) for line in sys.stdin if line.strip()]
        for row in iter_stream(paths, cfg, args.out, args.samples):
            writer.writerow(row)
            sys.stdout.flush()
        return 0
    if args.segs is None:
        raise ConfigError("run-batch needs --segs unless --stream is given")
    rows = run_batch(args.segs, cfg, args.out, samples_per_subject=args.samples,
                     workers=args.workers)
    failures = sum(r["path"].startswith("ERROR:") for r in rows)
    print(f"wrote {len(rows) - failures} samples to {args.out} "
          f"({failures} failures; see manifest.csv)")
    return 0


def _cmd_estimate_priors(args) -> int:
    n = len(args.sequence)
    if not (len(args.images) == len(args.segs) == n):
        raise ConfigError("--images, --segs and --sequence must be given once per sequence")
    pairs_by_sequence = {}
    for name, image_dir, seg_dir in zip(args.sequence, args.images, args.segs):
        images = {subject_id_from_path(p): p for p in Path(image_dir).iterdir()
                  if p.name.endswith((".nii", ".nii.gz"))}
        segs = {subject_id_from_path(p): p for p in Path(seg_dir).iterdir()
                if p.name.endswith((".nii", ".nii.gz"))}
        shared = sorted(set(images) & set(segs))
        if not shared:
            raise ConfigError(
                f"sequence {name!r}: no subjects shared between {image_dir} and {seg_dir}")
        pairs_by_sequence[name] = [
            (load_volume(images[sid], "intensity"), load_volume(segs[sid], "label"))
            for sid in shared]
    priors = estimate_priors(pairs_by_sequence)
    priors.save(args.out)
    print(f"wrote {args.out} ({priors.k} sequences, {len(priors.labels)} labels)")
    return 0


def _cmd_eval(args) -> int:
    groups = read_predictions(args.predictions, score_col=args.score_col,
                              set_col=args.per_set_col)
    sets = [summarize(name, records) for name, records in sorted(groups.items())]
    agg = aggregate(sets)
    scored = [r for records in groups.values() for r in records
              if r.score is not None]
    correlation = None
    if len(scored) >= 3:
        r, p = pearson(scored)
        correlation = {"r": r, "p": p, "n": len(scored)}
    report = {
        "sets": [dataclasses.asdict(s) for s in sets],
        "aggregate": dataclasses.asdict(agg),
        "correlation": correlation,
    }
    Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    print(f"avg MAE {agg.avg_mae:.2f} ± {agg.across_set_std:.2f} years "
          f"over {agg.n_sets} set(s); wrote {args.out}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _load_cfg(args)
    report = bench(args.seg, cfg, iterations=args.iterations, workers=args.workers)
    print(json.dumps(dataclasses.asdict(report), indent=2))
    return 0


def _cmd_phantom(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cohort = make_cohort(args.n, args.dist, args.seed,
                         dims=(args.dims,) * 3)
    with open(out_dir / "ages.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["subject_id", "age"])
        for i, (vol, age) in enumerate(cohort):
            subject = f"phantom-{i:04d}"
            save_volume(vol, out_dir / f"{subject}.nii.gz")
            writer.writerow([subject, f"{age:.3f}"])
    print(f"wrote {len(cohort)} phantoms to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="mrisynth",
                     description="Synthetic MRI generation from label maps.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="generate one training-ready sample")
    p.add_argument("seg", help="label-map NIfTI")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--subject", help="subject id (default: from filename)")
    p.add_argument("--index", type=int, default=0, help="sample index (default 0)")
    p.add_argument("--out", required=True, help="output .nii/.nii.gz path")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("run-batch", help="generate a dataset from a directory of label maps")
    p.add_argument("--segs", help="directory of label-map NIfTIs")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--samples", type=int, default=1, help="samples per subject")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--stream", action="store_true",
                   help="read label-map paths from stdin, write manifest rows to stdout")
    p.set_defaults(func=_cmd_run_batch)

    p = sub.add_parser("estimate-priors",
                       help="estimate per-sequence intensity priors from image/seg pairs")
    p.add_argument("--images", action="append", required=True,
                   help="image directory (repeat per sequence)")
    p.add_argument("--segs", action="append", required=True,
                   help="segmentation directory (repeat per sequence)")
    p.add_argument("--sequence", action="append", required=True,
                   help="sequence name (repeat per sequence)")
    p.add_argument("--out", required=True, help="output priors JSON")
    p.set_defaults(func=_cmd_estimate_priors)

    p = sub.add_parser("eval", help="summarize a predictions CSV")
    p.add_argument("--predictions", required=True, help="CSV: subject_id,y_true,y_pred[,score]")
    p.add_argument("--score-col", default="score")
    p.add_argument("--per-set-col", help="column naming the test set of each row")
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="time generate+preprocess end to end")
    p.add_argument("--seg", required=True, help="label-map NIfTI")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("phantom", help="write procedural aging phantoms")
    p.add_argument("--n", type=int, required=True, help="number of phantoms")
    p.add_argument("--dims", type=int, default=64, help="cube side in voxels")
    p.add_argument("--dist", choices=AGE_DISTRIBUTIONS, default="bimodal")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_phantom)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, UnsupportedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataDomainError, CoverageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: train a regressor, export predictions."""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, DataError, FormatError, UsageError
from .train import (
    TrainConfig,
    load_train_config,
    predict_to_csv,
    save_checkpoint,
    train_from_dir,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _cmd_train(args) -> int:
    cfg = load_train_config(args.config) if args.config else TrainConfig()
    result = train_from_dir(args.data, args.ages, cfg)
    save_checkpoint(args.out, result)
    print(f"best val MAE {result.best_val_mae:.3f} years at epoch "
          f"{result.best_epoch}; wrote {args.out}")
    return 0


def _cmd_predict(args) -> int:
    n = predict_to_csv(args.ckpt, args.data, args.out)
    print(f"wrote {n} predictions to {args.out}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="agetrain",
                     description="Train and apply a brain-age regressor.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train on a directory of volumes")
    p.add_argument("--data", required=True, help="directory of NIfTI volumes")
    p.add_argument("--ages", required=True, help="CSV with subject_id,age")
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict ages for a directory of volumes")
    p.add_argument("--ckpt", required=True, help="checkpoint from train")
    p.add_argument("--data", required=True,
                   help="directory of NIfTI volumes with an ages.csv")
    p.add_argument("--out", required=True, help="output predictions CSV")
    p.set_defaults(func=_cmd_predict)

    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

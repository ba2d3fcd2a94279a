"""``advmetrics`` command line: metrics, corr, train, loo, importance, synth.

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""
from __future__ import annotations

import argparse
import sys

from . import pipeline
from .errors import AdvMetricsError
from .forest import ForestHyperparams
from .quality import QualityConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _add_forest_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker processes for tree building")
    p.add_argument("--n-trees", type=_positive_int, default=100)
    p.add_argument("--max-depth", type=_positive_int, default=None)
    p.add_argument("--min-samples-split", type=_positive_int, default=2)
    p.add_argument("--features-per-split", type=_positive_int, default=None)
    p.add_argument("--features", default="all", help='"norms", "quality", "all" or a comma list')


def _hp(args) -> ForestHyperparams:
    return ForestHyperparams(
        n_trees=args.n_trees,
        max_depth=args.max_depth,
        min_samples_split=args.min_samples_split,
        features_per_split=args.features_per_split,
        seed=args.seed,
    )


def _quality_config(args) -> QualityConfig:
    return QualityConfig(
        uqi_window=args.uqi_window,
        ergas_ratio=args.ergas_ratio,
        vifp_scales=args.vifp_scales,
        vifp_sigma_nsq=args.vifp_sigma_nsq,
        psnrb_block=args.psnrb_block,
        psnrb_peak=args.psnrb_peak,
        psnrb_cap_db=args.psnrb_cap_db,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="advmetrics", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = QualityConfig()
    p = sub.add_parser("metrics", help="compute the 12-metric matrix for a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    p.add_argument("--l0-tolerance", type=float, default=0.0)
    p.add_argument("--uqi-window", type=_positive_int, default=d.uqi_window)
    p.add_argument("--ergas-ratio", type=float, default=d.ergas_ratio)
    p.add_argument("--vifp-scales", type=_positive_int, default=d.vifp_scales)
    p.add_argument("--vifp-sigma-nsq", type=float, default=d.vifp_sigma_nsq)
    p.add_argument("--psnrb-block", type=_positive_int, default=d.psnrb_block)
    p.add_argument("--psnrb-peak", type=float, default=d.psnrb_peak)
    p.add_argument("--psnrb-cap-db", type=float, default=d.psnrb_cap_db)

    p = sub.add_parser("corr", help="Pearson r of each metric against a detector label")
    p.add_argument("matrix")
    p.add_argument("--label", required=True)

    p = sub.add_parser("train", help="66/34 split, fit a forest, report held-out accuracy")
    p.add_argument("matrix")
    p.add_argument("--label", required=True)
    p.add_argument("--split", type=float, default=0.66, help="training fraction")
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--out", dest="model_out", help="where to save the model document")
    _add_forest_flags(p)

    p = sub.add_parser("loo", help="leave-one-attack-out accuracy table")
    p.add_argument("matrix")
    p.add_argument("--label", required=True, action="append", help="repeat for several detectors")
    _add_forest_flags(p)

    p = sub.add_parser("importance", help="rank the features of a saved model")
    p.add_argument("model")

    p = sub.add_parser("synth", help="write synthetic PNG pairs and a labelled manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--family", action="append", type=pipeline.parse_family,
                   help="[name=]kind:lo-hi[:count_lo-count_hi]; repeatable")
    p.add_argument("--n", type=_positive_int, default=250, help="pairs per family")
    p.add_argument("--oracle", action="append", type=pipeline.parse_oracle,
                   help="[name=]metric:threshold|auto[:flip_noise]; repeatable")
    p.add_argument("--base", default="texture", help='"texture", "gray" or a directory of PNGs')
    p.add_argument("--size", type=_positive_int, nargs=3, default=(32, 32, 3), metavar=("H", "W", "C"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1, help="accepted for uniformity; unused")
    return parser


def run(args) -> int:
    if args.command == "metrics":
        records = pipeline.cmd_metrics(
            args.manifest, args.out, jobs=args.jobs, l0_tolerance=args.l0_tolerance,
            cfg=_quality_config(args),
        )
        print(f"wrote {len(records)} rows to {args.out}")
    elif args.command == "corr":
        print(pipeline.format_corr(pipeline.cmd_corr(args.matrix, args.label)))
    elif args.command == "train":
        report, _ = pipeline.cmd_train(
            args.matrix, args.label, args.features, train_fraction=args.split, seed=args.seed,
            hp=_hp(args), model_out=args.model_out, stratify=not args.no_stratify, jobs=args.jobs,
        )
        print(pipeline.format_eval(report))
    elif args.command == "loo":
        reports = pipeline.cmd_loo(args.matrix, args.label, args.features, _hp(args), jobs=args.jobs)
        print(pipeline.format_loo(reports))
    elif args.command == "importance":
        print(pipeline.format_importance(pipeline.cmd_importance(args.model)))
    elif args.command == "synth":
        kwargs = {}
        if args.family:
            kwargs["families"] = args.family
        if args.oracle:
            kwargs["oracles"] = args.oracle
        manifest = pipeline.cmd_synth(
            args.out, n_per_family=args.n, seed=args.seed, base=args.base,
            shape=tuple(args.size), **kwargs,
        )
        print(f"wrote {manifest}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (AdvMetricsError, OSError) as exc:
        print(f"advmetrics {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"advmetrics {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

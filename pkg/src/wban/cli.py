"""``wban`` command line: run, baseline, sweep-epsilon, inject, report.

Every subcommand takes an optional ``--config`` TOML file; flags given on the
command line win over the file. Exit codes: 0 success, 2 bad configuration,
3 bad or missing input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from wban.datasets import EmptyInput, ParseError, write_wide_csv
from wban.evaluation import InjectionSpec, inject_anomalies
from wban.sim import (
    ConfigError,
    ExperimentConfig,
    baseline_run,
    load_config,
    load_dataset,
    run_experiment,
    run_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_INPUT = 0, 2, 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="experiment TOML file")
    p.add_argument("--input", type=Path, help="vitals CSV (default: synthetic vitals)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="seed for every randomized stage")
    p.add_argument("--epsilon", type=float, help="filter threshold on the change in Z")
    p.add_argument("--steps", type=int, help="length of the synthetic stream")
    p.add_argument("--inject-rate", type=float, help="fraction of steps to corrupt")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wban", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "filter, reconstruct, detect and price one experiment"),
        ("baseline", "same pipeline with every reading transmitted"),
    ):
        _common(sub.add_parser(name, help=help_text))
    sweep = sub.add_parser("sweep-epsilon", help="discard rate and NMSE over an epsilon grid")
    _common(sweep)
    sweep.add_argument("--grid", help="comma-separated epsilon values")
    inject = sub.add_parser("inject", help="write a copy of the input with planted anomalies")
    _common(inject)
    inject.add_argument("--magnitude", type=float, help="offset in standard deviations")
    inject.add_argument("--dims", type=int, help="dimensions corrupted per event")
    report = sub.add_parser("report", help="summarize a finished run directory")
    report.add_argument("out", type=Path, help="run output directory")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None and not args.config.exists():
        raise ConfigError(f"config file {args.config} not found")
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.input is not None:
        config = replace(config, input_path=args.input)
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    if args.steps is not None:
        config = replace(config, synthetic=replace(config.synthetic, n_steps=args.steps))
    try:
        if args.epsilon is not None:
            config = replace(config, filter=replace(config.filter, epsilon=args.epsilon))
        if args.inject_rate is not None:
            base = config.injection or InjectionSpec(rng_seed=config.seed)
            config = replace(config, injection=replace(base, rate=args.inject_rate))
        if getattr(args, "grid", None):
            grid = tuple(float(x) for x in args.grid.split(","))
            config = replace(config, epsilon_grid=grid)
        if getattr(args, "magnitude", None) is not None or getattr(args, "dims", None) is not None:
            base = config.injection or InjectionSpec(rng_seed=config.seed)
            config = replace(
                config,
                injection=replace(
                    base,
                    magnitude_sigma=args.magnitude if args.magnitude is not None else base.magnitude_sigma,
                    dims_per_event=args.dims if args.dims is not None else base.dims_per_event,
                ),
            )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def _print_run(report, out_dir: Path) -> None:
    print(f"{report.mode} run -> {out_dir}  ({report.duration_s:.2f}s)")
    print(f"{'attribute':<10} {'total':>8} {'sent':>8} {'uninter.':>8} {'faulty':>8} {'discard%':>9}")
    for a in report.attributes:
        print(f"{a.name:<10} {a.total:>8} {a.transmitted:>8} {a.discarded_uninteresting:>8} "
              f"{a.discarded_faulty:>8} {a.discard_pct:>9.2f}")
    e = report.energy
    print(f"energy: baseline {e['baseline_J']:.4f} J, run {e['total_J']:.4f} J, "
          f"saving {100 * e['saving_fraction']:.2f}%")
    t2 = report.tier2
    print(f"detector: {t2['status']}, scored {t2['scored']}, flagged {t2['flagged']}, "
          f"{len(report.alarms)} alarm intervals")
    if report.detection and "auc" in report.detection:
        cls = report.detection["classes"]["1"]
        print(f"detection: AUC {report.detection['auc']:.4f}, precision {cls['precision']:.3f}, "
              f"recall {cls['recall']:.3f}, f1 {cls['f1']:.3f}")


def _summarize(out_dir: Path) -> int:
    path = out_dir / "report.json"
    if not path.exists():
        print(f"error: {path} not found", file=sys.stderr)
        return EXIT_INPUT
    data = json.loads(path.read_text(encoding="utf-8"))
    print(f"{data['mode']} run in {out_dir}")
    for a in data["attributes"]:
        print(f"  {a['name']:<10} discard {a['discard_pct']:6.2f}%  "
              f"(uninteresting {a['uninteresting_pct']:6.2f}%)")
    totals = data["totals"]
    print(f"  average uninteresting discard {totals['average_uninteresting_pct']:.3f}%")
    e = data["energy"]
    print(f"  energy {e['total_J']:.4f} J vs {e['baseline_J']:.4f} J baseline "
          f"(saving {100 * e['saving_fraction']:.2f}%)")
    if data.get("detection"):
        for cls, row in data["detection"]["classes"].items():
            print(f"  class {cls:<12} precision {row['precision']:.2f} recall {row['recall']:.2f} "
                  f"f1 {row['f1']:.2f} support {row['support']}")
        if "auc" in data["detection"]:
            print(f"  AUC {data['detection']['auc']:.4f}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report":
        return _summarize(args.out)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        if args.command == "run":
            _print_run(run_experiment(config), config.out_dir)
        elif args.command == "baseline":
            _print_run(baseline_run(config), config.out_dir)
        elif args.command == "sweep-epsilon":
            rows = run_sweep(config)
            print(f"{'epsilon':>8} {'discard%':>9} {'nmse':>8}")
            for r in rows:
                print(f"{r['epsilon']:>8.2f} {r['discard_pct']:>9.2f} {r['nmse']:>8.4f}")
            print(f"wrote {config.out_dir / 'sweep.csv'}")
        elif args.command == "inject":
            data = load_dataset(config)
            spec = config.injection or InjectionSpec(rng_seed=config.seed)
            corrupted, labels = inject_anomalies(data.series, spec)
            out = Path(config.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            write_wide_csv(data.with_series(corrupted), out / "injected.csv")
            with open(out / "labels.csv", "w", encoding="utf-8") as fh:
                fh.write("t,label\n")
                fh.writelines(f"{data.t0 + i},{int(v)}\n" for i, v in enumerate(labels.tolist()))
            print(f"injected {int(labels.sum())} anomalous steps -> {out / 'injected.csv'}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, EmptyInput, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

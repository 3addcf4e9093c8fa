"""Command-line interface: sweep, converge, hybrid, ofdm, codec, gen-channels.

Each report command writes a CSV (or JSON for codec), a JSON run-metadata
file, and by default a rendered PNG figure into the output directory.
"""

from __future__ import annotations

import argparse
import json
import os

from .config import load_config
from .experiments import (
    SWEEP_COLUMNS,
    TRACE_COLUMNS,
    generate_channels,
    run_codec,
    run_convergence,
    run_hybrid,
    run_ofdm,
    run_sweep,
    write_rows_csv,
    write_run_metadata,
)


def _add_common(sub):
    sub.add_argument("--config", default=None, help="YAML config file")
    sub.add_argument("--out", default=".", help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="master seed override")
    sub.add_argument("--threads", type=int, default=None,
                     help="worker threads over realizations")
    sub.add_argument("--no-plot", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbmm",
        description="Beamspace index modulation experiments: SE sweeps, optimizer "
                    "convergence, hybrid designs, multicarrier runs, and codebooks.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("sweep", "SE against SNR for the configured transmission schemes"),
        ("converge", "barrier-ascent iteration trace with reference levels"),
        ("hybrid", "digital against hybrid factorizations across SNR"),
        ("ofdm", "multicarrier shared-analog study"),
        ("codec", "codebook partition for a target activation distribution"),
        ("gen-channels", "write replayable channel realizations"),
    ):
        sub = commands.add_parser(name, help=text)
        _add_common(sub)
        if name == "converge":
            sub.add_argument("--snr-db", type=float, default=15.0,
                             help="operating SNR for the trace")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = load_config(args.config, seed=args.seed, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    name = args.command.replace("-", "_")

    if args.command == "sweep":
        rows = run_sweep(config)
        csv_path = os.path.join(args.out, "sweep.csv")
        write_rows_csv(rows, csv_path, SWEEP_COLUMNS)
        if not args.no_plot:
            from .plots import render_sweep
            render_sweep(rows, os.path.join(args.out, "sweep.png"), title="SE sweep")
        print(csv_path)
    elif args.command == "converge":
        rows = run_convergence(config, args.snr_db)
        csv_path = os.path.join(args.out, "converge.csv")
        write_rows_csv(rows, csv_path, TRACE_COLUMNS)
        if not args.no_plot:
            from .plots import render_convergence
            render_convergence(rows, os.path.join(args.out, "converge.png"))
        print(csv_path)
    elif args.command == "hybrid":
        rows = run_hybrid(config)
        csv_path = os.path.join(args.out, "hybrid.csv")
        write_rows_csv(rows, csv_path, SWEEP_COLUMNS)
        if not args.no_plot:
            from .plots import render_sweep
            render_sweep(rows, os.path.join(args.out, "hybrid.png"),
                         title="Hybrid factorizations")
        print(csv_path)
    elif args.command == "ofdm":
        rows = run_ofdm(config)
        csv_path = os.path.join(args.out, "ofdm.csv")
        write_rows_csv(rows, csv_path, SWEEP_COLUMNS)
        if not args.no_plot:
            from .plots import render_sweep
            render_sweep(rows, os.path.join(args.out, "ofdm.png"),
                         title="Multicarrier shared analog")
        print(csv_path)
    elif args.command == "codec":
        report = run_codec(config)
        json_path = os.path.join(args.out, "codec.json")
        with open(json_path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
        if not args.no_plot:
            from .plots import render_codec
            render_codec(report, os.path.join(args.out, "codec.png"))
        print(json_path)
    elif args.command == "gen-channels":
        paths = generate_channels(config, args.out)
        for p in paths:
            print(p)

    write_run_metadata(os.path.join(args.out, f"{name}_meta.json"), args.command, config)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

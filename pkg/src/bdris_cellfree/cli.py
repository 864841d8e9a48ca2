"""Command-line front end: run scenarios, sweep parameters, validate configs.

Outputs per run directory:
    trace_r<i>.csv   one row per iteration (t, sum_rate, consensus_error,
                     alpha, rho) for realization i
    avg_trace.csv    realization-averaged convergence curve (traces padded by
                     holding their final value to the longest horizon)
    summary.json     mean/std of the final sum rate plus scenario echo
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import (ARCHITECTURES, COOPERATION_MODES, TOPOLOGIES, Scenario,
                     desk_scenario)
from .coordinator import TRACE_SCHEMA_VERSION, run_realization
from .errors import ConfigError

SWEEPABLE = ("p_max_dbm", "n_elements", "n_groups", "n_subcarriers",
             "noise_dbm", "csi_delta")


def _load_scenario(args):
    if args.preset == "desk":
        sc = desk_scenario()
    elif args.config:
        sc = Scenario.load(args.config)
    else:
        sc = Scenario()
    overrides = {}
    for name in ("seed", "realizations", "architecture", "cooperation", "topology"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        sc = sc.replace(**overrides)
    return sc.validate()


def _padded_curves(traces, key):
    horizon = max(tr.n_rows() for tr in traces)
    out = np.empty((len(traces), horizon))
    for i, tr in enumerate(traces):
        vals = getattr(tr, key)
        out[i, :len(vals)] = vals
        out[i, len(vals):] = vals[-1]
    return out


def _write_avg_trace(path, traces):
    rates = _padded_curves(traces, "sum_rate")
    errors = _padded_curves(traces, "consensus_error")
    with open(path, "w") as fh:
        fh.write("t,sum_rate_mean,sum_rate_std,consensus_error_mean\n")
        for t in range(rates.shape[1]):
            fh.write("%d,%.17g,%.17g,%.17g\n" % (
                t, rates[:, t].mean(), rates[:, t].std(), errors[:, t].mean()))


def _run_cell(scenario, out_dir=None, tag=""):
    traces = []
    finals = []
    for i in range(scenario.realizations):
        result = run_realization(scenario, realization=i)
        traces.append(result.trace)
        finals.append(result.final_sum_rate)
        if out_dir is not None:
            result.trace.write_csv(os.path.join(out_dir, f"trace{tag}_r{i}.csv"))
    finals = np.asarray(finals)
    row = {
        "architecture": scenario.architecture,
        "cooperation": scenario.cooperation,
        "topology": scenario.topology,
        "realizations": scenario.realizations,
        "sum_rate_mean": float(finals.mean()),
        "sum_rate_std": float(finals.std()),
        "converged": int(sum(tr.converged_at is not None for tr in traces)),
    }
    return row, traces


def cmd_run(args):
    sc = _load_scenario(args)
    os.makedirs(args.out_dir, exist_ok=True)
    row, traces = _run_cell(sc, out_dir=args.out_dir)
    _write_avg_trace(os.path.join(args.out_dir, "avg_trace.csv"), traces)
    summary = {
        "trace_schema": TRACE_SCHEMA_VERSION,
        "scenario": sc.to_dict(),
        "results": [row],
    }
    with open(os.path.join(args.out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"sum rate {row['sum_rate_mean']:.4f} ± {row['sum_rate_std']:.4f} "
          f"bits/s/Hz over {sc.realizations} realization(s) -> {args.out_dir}")
    return 0


def cmd_sweep(args):
    sc = _load_scenario(args)
    tokens = [v.strip() for v in args.values.split(",") if v.strip()]
    if not tokens:
        raise ConfigError("sweep needs a non-empty value list")
    try:
        values = [float(v) if "." in v or "e" in v.lower() else int(v)
                  for v in tokens]
    except ValueError as exc:
        raise ConfigError(f"unparseable sweep value: {exc}") from exc
    if args.param not in SWEEPABLE:
        raise ConfigError(f"sweepable parameters: {SWEEPABLE}")
    archs = args.arch_list.split(",") if args.arch_list else [sc.architecture]
    modes = args.mode_list.split(",") if args.mode_list else [sc.cooperation]
    os.makedirs(args.out_dir, exist_ok=True)
    rows = []
    for value in values:
        for arch in archs:
            for mode in modes:
                cell = sc.replace(**{args.param: value}, architecture=arch,
                                  cooperation=mode).validate()
                row, _ = _run_cell(cell)
                row[args.param] = value
                rows.append(row)
                print(f"{args.param}={value} arch={arch} mode={mode}: "
                      f"{row['sum_rate_mean']:.4f} ± {row['sum_rate_std']:.4f}")
    table_path = os.path.join(args.out_dir, "sweep.csv")
    with open(table_path, "w") as fh:
        fh.write(f"{args.param},architecture,cooperation,sum_rate_mean,sum_rate_std\n")
        for row in rows:
            fh.write("%s,%s,%s,%.17g,%.17g\n" % (
                row[args.param], row["architecture"], row["cooperation"],
                row["sum_rate_mean"], row["sum_rate_std"]))
    summary = {
        "trace_schema": TRACE_SCHEMA_VERSION,
        "scenario": sc.to_dict(),
        "swept": args.param,
        "results": rows,
    }
    with open(os.path.join(args.out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return 0


def cmd_validate(args):
    sc = _load_scenario(args)
    print(f"config OK: B={sc.n_bs} U={sc.n_ue} R={sc.n_ris} M={sc.n_elements} "
          f"G={sc.group_structure().n_groups} K={sc.n_subcarriers} "
          f"arch={sc.architecture} mode={sc.cooperation}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bdris-cellfree",
        description="cell-free MIMO OFDM simulator with shared beyond-diagonal "
                    "surfaces and a decentralized sum-rate optimizer")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--preset", choices=["desk"],
                       help="built-in scenario preset (overrides --config)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--realizations", type=int, default=None)
        p.add_argument("--arch", dest="architecture", choices=ARCHITECTURES,
                       default=None)
        p.add_argument("--mode", dest="cooperation", choices=COOPERATION_MODES,
                       default=None)
        p.add_argument("--topology", choices=TOPOLOGIES, default=None)

    p_run = sub.add_parser("run", help="run one scenario cell")
    common(p_run)
    p_run.add_argument("--out-dir", default="out")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep one parameter over a grid")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated value list")
    p_sweep.add_argument("--arch-list", default=None,
                         help="comma-separated architectures (default: scenario's)")
    p_sweep.add_argument("--mode-list", default=None,
                         help="comma-separated cooperation modes")
    p_sweep.add_argument("--out-dir", default="out")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="parse and validate a scenario file")
    common(p_val)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: experiment orchestration and data export.

Subcommands
-----------
evt-check    : max-of-K gain distribution against its Gumbel limit (KS)
zf-sweep     : Monte Carlo capacity vs k with ZF bounds overlaid
mmse-sweep   : same with the MMSE receiver and bounds
sic-dist     : capacity histograms of the four scheduling baselines
bounds-table : all six closed-form bounds at one operating point
diagnostics  : Poisson/conditional-moment/angle validation report

Every command writes one CSV or JSON data file plus a ``.meta.json``
sidecar holding the full configuration, library version and seed.
Numeric CSV fields carry 12 significant digits; outputs are
byte-identical across reruns and thread counts.  MACDIV_THREADS caps
engine parallelism.  Exit codes: 0 ok, 1 runtime failure, 2 usage.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, bounds, evt, simkit
from .mathcore import ContractError, DomainError


class UsageError(Exception):
    pass


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def _write_rows(path, fmt, header, rows):
    if fmt == "csv":
        lines = [",".join(header)]
        lines += [",".join(_fmt(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n")
    else:
        data = [dict(zip(header, [(_jsonable(v)) for v in row])) for row in rows]
        path.write_text(json.dumps({"columns": header, "rows": data}, indent=2, sort_keys=True) + "\n")


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def _write_meta(out_path, command, config):
    meta = {"command": command, "config": config, "version": __version__}
    side = out_path.with_suffix(out_path.suffix + ".meta.json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n")


_PLOT_TEMPLATE = """\
#!/usr/bin/env python3
# Auto-generated plot script for {data!r} ({command}).
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open({data!r})))
{body}
plt.savefig({png!r}, dpi=150, bbox_inches="tight")
print("wrote", {png!r})
"""

_SWEEP_PLOT_BODY = """\
k = [float(r["k"]) for r in rows]
for col, style in (("mc_mean", "o-"), ("upper", "-"), ("lower", "--")):
    plt.plot(k, [float(r[col]) for r in rows], style, label=col)
plt.errorbar(k, [float(r["mc_mean"]) for r in rows],
             yerr=[3 * float(r["mc_stderr"]) for r in rows], fmt="none")
plt.xlabel("target exceedances k")
plt.ylabel("expected sum capacity")
plt.legend()
"""

_DIST_PLOT_BODY = """\
names = sorted({r["comparator"] for r in rows})
for name in names:
    sub = [r for r in rows if r["comparator"] == name]
    lo = [float(r["bin_lo"]) for r in sub]
    cnt = [int(r["count_served"]) for r in sub]
    total = max(sum(cnt), 1)
    width = float(sub[0]["bin_hi"]) - float(sub[0]["bin_lo"])
    plt.bar(lo, [c / total / width for c in cnt], width=width, alpha=0.5, label=name)
plt.xlabel("sum capacity")
plt.ylabel("density (served slots)")
plt.legend()
"""


def _emit_plot_script(out_path, command, body):
    script = out_path.with_suffix(out_path.suffix + ".plot.py")
    png = str(out_path.with_suffix(out_path.suffix + ".png"))
    script.write_text(_PLOT_TEMPLATE.format(data=str(out_path), command=command, body=body, png=png))


def _common_flags(p, slots=True):
    p.add_argument("--users", type=int, required=True, help="number of users K")
    p.add_argument("--antennas", type=int, required=True, help="receive antennas r")
    p.add_argument("--power", type=float, default=1.0, help="transmit power P (linear)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-base", choices=("nats", "bits"), default="nats")
    p.add_argument("--paper-literal", action="store_true",
                   help="verbatim stage thresholds / P-free SIC lower bound")
    if slots:
        p.add_argument("--slots", type=int, default=10000, help="Monte Carlo slots")
    p.add_argument("--out", type=Path, required=True, help="output data file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--emit-plot-script", action="store_true")


def _k_values(args, K):
    if args.k is not None:
        if args.k_min is not None or args.k_max is not None:
            raise UsageError("give either --k or a --k-min/--k-max range, not both")
        return [args.k]
    if args.k_min is None or args.k_max is None:
        raise UsageError("either --k or both --k-min and --k-max are required")
    if not (0 < args.k_min <= args.k_max <= K):
        raise UsageError("need 0 < k-min <= k-max <= K")
    if args.k_step <= 0:
        raise UsageError("k-step must be positive")
    n = int(round((args.k_max - args.k_min) / args.k_step)) + 1
    return [args.k_min + i * args.k_step for i in range(n)]


def build_parser():
    ap = argparse.ArgumentParser(prog="macdiv", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evt-check", help="max-gain distribution vs Gumbel limit")
    _common_flags(p, slots=False)
    p.add_argument("--trials", type=int, default=100000)

    for name, receiver in (("zf-sweep", "zf"), ("mmse-sweep", "mmse")):
        p = sub.add_parser(name, help=f"capacity sweep with the {receiver} receiver")
        _common_flags(p)
        p.add_argument("--k", type=float, default=None, help="single target exceedance rate")
        p.add_argument("--k-min", type=float, default=None)
        p.add_argument("--k-max", type=float, default=None)
        p.add_argument("--k-step", type=float, default=0.25)
        p.add_argument("--sampler", choices=("auto", "full", "tail"), default="auto")
        p.add_argument("--receiver", choices=("zf", "mmse", "zfsic"), default=receiver,
                       help="override the receiver implied by the command name")

    p = sub.add_parser("sic-dist", help="capacity histograms of scheduling baselines")
    _common_flags(p)
    p.add_argument("--k", type=float, default=None,
                   help="threshold rate for the zf-threshold-group comparator")
    p.add_argument("--bins", type=int, default=100)

    p = sub.add_parser("bounds-table", help="all closed-form bounds at one point")
    _common_flags(p, slots=False)
    p.add_argument("--k", type=float, required=True)

    p = sub.add_parser("diagnostics", help="Poisson / conditional-moment report")
    _common_flags(p, slots=False)
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--samples", type=int, default=1000000,
                   help="conditional samples for the moment checks")

    return ap


def _validated_receiver_config(args, receiver, k):
    cfg = simkit.SystemConfig(
        K=args.users, r=args.antennas, P=args.power, k_target=k,
        n_slots=getattr(args, "slots", 1), seed=args.seed, receiver=receiver,
        log_base=args.log_base, sampler=getattr(args, "sampler", "auto"),
        paper_literal=args.paper_literal,
    )
    return simkit.validate_config(cfg)


def cmd_evt_check(args):
    if args.users < 1 or args.antennas < 1:
        raise UsageError("users and antennas must be positive")
    if args.trials < 1:
        raise UsageError("trials must be positive")
    K, r = args.users, args.antennas
    c = evt.fast_constants(K, r)
    mean, cdf = evt.gumbel_stats(c)
    samples = simkit.max_norm_samples(K, r, args.trials, seed=args.seed)
    ks = simkit.ks_statistic(samples, cdf)
    header = ["K", "r", "trials", "ks", "a", "b", "gumbel_mean", "empirical_mean"]
    row = [K, r, args.trials, ks, c.a, c.b, mean, float(np.mean(samples))]
    _write_rows(args.out, args.format, header, [row])
    return {"ks": ks}


def cmd_sweep(args):
    ks = _k_values(args, args.users)
    cfg = _validated_receiver_config(args, args.receiver, ks[-1])
    result = simkit.run_sweep(cfg, ks)
    header = ["k", "mc_mean", "mc_stderr", "upper", "lower", "idle", "collision", "served"]
    rows = [[row[h] for h in header] for row in result.rows]
    _write_rows(args.out, args.format, header, rows)
    if args.emit_plot_script:
        _emit_plot_script(args.out, args.command, _SWEEP_PLOT_BODY)
    return result.meta


def cmd_sic_dist(args):
    k = args.k if args.k is not None else float(min(args.antennas, args.users))
    cfg = _validated_receiver_config(args, "zf", k)
    report = simkit.distribution_report(cfg, n_bins=args.bins)
    edges = report["edges"]
    header = ["comparator", "mean_all", "stderr_all", "mean_served", "stderr_served",
              "n_served", "bin_lo", "bin_hi", "count_all", "count_served"]
    rows = []
    for name, stats in report["comparators"].items():
        for b in range(len(edges) - 1):
            rows.append([name, stats["mean_all"], stats["stderr_all"],
                         stats["mean_served"], stats["stderr_served"], stats["n_served"],
                         edges[b], edges[b + 1],
                         int(stats["hist_all"][b]), int(stats["hist_served"][b])])
    _write_rows(args.out, args.format, header, rows)
    if args.emit_plot_script:
        _emit_plot_script(args.out, args.command, _DIST_PLOT_BODY)
    return {"comparators": list(report["comparators"])}


def cmd_bounds_table(args):
    K, r, P, k = args.users, args.antennas, args.power, args.k
    if not (K >= r >= 1):
        raise UsageError(f"need users >= antennas >= 1, got {K}, {r}")
    if not 0 < k <= K:
        raise UsageError(f"k must lie in (0, K], got {k}")
    if P <= 0:
        raise UsageError(f"power must be positive, got {P}")
    scale = 1.0 / math.log(2.0) if args.log_base == "bits" else 1.0
    u = evt.threshold_for_rate(K, k, r)
    vals = {
        "zf_lower": bounds.zf_lower(k, K, r, P),
        "zf_upper": bounds.zf_upper(k, K, r, P),
        "mmse_lower": bounds.mmse_lower(k, K, r) if (P == 1.0 and r >= 2) else math.nan,
        "mmse_upper": bounds.mmse_upper(k, K, r, P),
        "sic_lower": bounds.sic_lower(K, r, P, args.paper_literal),
        "sic_upper": bounds.sic_upper(K, r, P),
    }
    header = ["K", "r", "P", "k", "u_k"] + list(vals)
    row = [K, r, P, k, u] + [v * scale for v in vals.values()]
    _write_rows(args.out, args.format, header, [row])
    return vals


def cmd_diagnostics(args):
    cfg = _validated_receiver_config(args, "zf", args.k)
    rep = simkit.diagnostics(cfg, n_cond=args.samples)
    header = ["metric", "value"]
    rows = []
    for key in ("u", "a", "p_exceed", "tv_poisson", "cond_norm_mean",
                "cond_norm_expected", "cond_norm_stderr", "entry_mean_max_z",
                "entry_var_expected", "pair_corr_max_z", "angle_ks", "excess_ks"):
        rows.append([key, rep[key]])
    for i, v in enumerate(rep["entry_var"]):
        rows.append([f"entry_var_{i}", float(v)])
    _write_rows(args.out, args.format, header, rows)
    return {"tv_poisson": rep["tv_poisson"]}


_COMMANDS = {
    "evt-check": cmd_evt_check,
    "zf-sweep": cmd_sweep,
    "mmse-sweep": cmd_sweep,
    "sic-dist": cmd_sic_dist,
    "bounds-table": cmd_bounds_table,
    "diagnostics": cmd_diagnostics,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out = args.out.resolve()
        out.parent.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](args)
        config = {k: _jsonable(v) for k, v in vars(args).items() if k != "out"}
        config["out"] = str(args.out)
        _write_meta(args.out, args.command, config)
    except (UsageError, DomainError) as exc:
        print(f"macdiv: {exc}", file=sys.stderr)
        return 2
    except (OSError, ContractError, ArithmeticError) as exc:
        print(f"macdiv: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

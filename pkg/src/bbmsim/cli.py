"""Command-line front end: seeded simulations, ensembles, and check batteries.

Every subcommand reads one INI config (see the config module for the
grammar), honors the same overrides (--seed, --replications, --workers,
--output-dir), writes tab-separated outputs atomically, and embeds the
config digest and master seed in every file it produces. Outputs carry no
timestamps or machine identifiers: rerunning a command with the same config
and seed reproduces the files byte for byte.

Exit codes: 0 all checks passed (warnings count as passes), 1 at least one
check failed, 2 usage/config/runtime error, 3 the battery ran but every
verdict was inconclusive or vacuous.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import config as cfgmod
from . import experiments as ex


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bbmsim",
        description="Exact branching-Brownian-motion simulation and verification batteries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="path to an INI experiment config")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument(
            "--replications", type=int, default=None, help="override replication count"
        )
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument("--output-dir", default=None, help="override output directory")
        p.add_argument(
            "-v", "--verbose", action="store_true", help="print one line per verdict"
        )

    p = sub.add_parser("simulate", help="run one realization and dump it as delimited text")
    add_common(p)
    p.add_argument(
        "--replication",
        type=int,
        default=0,
        help="which replication stream to realize (default 0)",
    )

    for name, blurb in (
        ("ensemble", "run seeded replications and write aggregate statistics"),
        ("check", "run the closed-form verification battery over an ensemble"),
        ("fluctuations", "test the rescaled martingale fluctuation law at one (beta, t)"),
        ("overlap", "measure the overlap-mass decay rate across horizons"),
        ("limits-selftest", "cross-validate the limit-law samplers and estimators"),
    ):
        p = sub.add_parser(name, help=blurb)
        add_common(p)
    return parser


def _overrides(args) -> dict:
    return {
        "master_seed": args.seed,
        "replications": args.replications,
        "workers": args.workers,
        "output_dir": args.output_dir,
    }


def _outpath(cfg, suffix) -> str:
    outdir = cfg.output_dir or "."
    os.makedirs(outdir, exist_ok=True)
    return os.path.join(outdir, f"{cfg.name}_{suffix}")


def _exit_code(verdicts) -> int:
    statuses = {v.status for v in verdicts}
    if ex.FAIL in statuses:
        return 1
    if ex.PASS in statuses or ex.WARN in statuses:
        return 0
    if statuses:
        return 3
    return 0


def _emit_verdicts(cfg, verdicts, args, written):
    path = _outpath(cfg, "verdicts.tsv")
    ex.write_verdict_table(cfg, verdicts, path)
    written.append(path)
    if args.verbose:
        for v in verdicts:
            print(
                f"{v.status.upper():<13} {v.name}: expected={v.expected} "
                f"measured={v.measured} se={v.se} threshold={v.threshold}"
            )
    counts = {s: 0 for s in (ex.PASS, ex.WARN, ex.FAIL, ex.INCONCLUSIVE, ex.VACUOUS)}
    for v in verdicts:
        counts[v.status] = counts.get(v.status, 0) + 1
    code = _exit_code(verdicts)
    print(
        "verdicts: "
        + " ".join(f"{k}={counts[k]}" for k in (ex.PASS, ex.WARN, ex.FAIL, ex.INCONCLUSIVE, ex.VACUOUS))
        + f" -> exit {code}"
    )
    for path in written:
        print(f"wrote {path}")
    return code


def _cmd_simulate(args) -> int:
    cfg, _extras = cfgmod.load(args.config, "simulate", _overrides(args))
    from .core import simulate
    from .sampling import RngStream

    rep = int(args.replication)
    real = simulate(cfg.sim_config(), RngStream(cfg.master_seed, rep))
    path = _outpath(cfg, "realization.tsv")
    tmp = path + ".dump"
    real.dump(tmp)
    with open(tmp) as fh:
        body = fh.read()
    os.unlink(tmp)
    header = (
        f"# experiment = {cfg.name}\n"
        f"# config_sha256 = {ex.config_digest(cfg)}\n"
        f"# master_seed = {cfg.master_seed}\n"
        f"# replication = {rep}\n"
    )
    ex._atomic_write(path, header + body)
    meta = _outpath(cfg, "meta.txt")
    ex.write_metadata(
        cfg,
        meta,
        extra={
            "replication": rep,
            "n_particles": real.n_particles,
            "extinct_at": repr(real.extinct_at),
            "truncated": real.truncated,
        },
    )
    sizes = ", ".join(f"n({t:g})={real.snapshots[t].n}" for t in sorted(real.snapshots))
    print(f"replication {rep}: {real.n_particles} particles; {sizes}")
    print(f"wrote {path}")
    print(f"wrote {meta}")
    return 0


def _cmd_ensemble(args) -> int:
    cfg, extras = cfgmod.load(args.config, "ensemble", _overrides(args))
    summary = ex.run_ensemble(cfg)
    written = []
    path = _outpath(cfg, "summary.tsv")
    ex.write_summary_table(summary, path)
    written.append(path)
    if extras.get("per_replication"):
        path = _outpath(cfg, "replications.tsv")
        ex.write_replication_table(summary, path)
        written.append(path)
    meta = _outpath(cfg, "meta.txt")
    ex.write_metadata(
        cfg,
        meta,
        extra={
            "kept_replications": summary.kept,
            "survival_count": summary.survival_count,
            "truncated_count": summary.truncated_count,
        },
    )
    written.append(meta)
    print(
        f"{summary.kept} replications kept "
        f"({summary.survival_count} survived, {summary.truncated_count} truncated)"
    )
    for p in written:
        print(f"wrote {p}")
    return 0


def _cmd_check(args) -> int:
    cfg, extras = cfgmod.load(args.config, "check", _overrides(args))
    summary = ex.run_ensemble(cfg)
    verdicts = []
    if extras.get("population"):
        verdicts.extend(
            ex.check_population_moments(summary, geometric_times=extras.get("geometric_times", ()))
        )
    if extras.get("martingale_means"):
        verdicts.extend(ex.check_martingale_means(summary))
    for fid, t in extras.get("many_to_one", ()):
        verdicts.append(ex.check_many_to_one(summary, fid, t))
    for fid, t in extras.get("death_functionals", ()):
        verdicts.append(ex.check_death_functional(summary, fid, t))
    for beta, t in extras.get("second_moments", ()):
        verdicts.append(ex.check_second_moment(summary, beta, t))
    if cfg.options.get("functional") or cfg.options.get("growth"):
        verdicts.extend(ex.check_functional_limits(summary))
    for beta, a, t in extras.get("overlap_mean", ()):
        verdicts.append(ex.check_overlap_rescaled_mass(summary, beta, a, t))
    if extras.get("barrier_line") is not None:
        verdicts.append(ex.check_barrier_bound(summary, extras["barrier_line"]))
    if extras.get("extinction"):
        verdicts.append(ex.check_extinction_probability(summary))
    if extras.get("critical"):
        verdicts.extend(
            ex.check_critical_scaling(summary, iqr_times=extras.get("critical_times", (4.0, 6.0, 8.0)))
        )
    if extras.get("oracle_equivalence"):
        verdicts.append(
            ex.check_oracle_equivalence(cfg.master_seed, offspring=cfg.offspring)
        )

    written = []
    path = _outpath(cfg, "summary.tsv")
    ex.write_summary_table(summary, path)
    written.append(path)
    meta = _outpath(cfg, "meta.txt")
    ex.write_metadata(
        cfg,
        meta,
        extra={
            "kept_replications": summary.kept,
            "survival_count": summary.survival_count,
            "truncated_count": summary.truncated_count,
        },
    )
    written.append(meta)
    return _emit_verdicts(cfg, verdicts, args, written)


def _cmd_fluctuations(args) -> int:
    cfg, _extras = cfgmod.load(args.config, "fluctuations", _overrides(args))
    report = ex.fluctuation_experiment(cfg)
    verdicts = report["verdicts"]
    written = []
    path = _outpath(cfg, "fluctuation.tsv")
    lines = [ex._header(cfg) + "key\tvalue"]
    for key in sorted(report):
        if key in ("verdicts", "summary", "hill_sensitivity"):
            continue
        lines.append(f"{key}\t{report[key]!r}")
    for frac, (k, est) in sorted(report.get("hill_sensitivity", {}).items()):
        lines.append(f"hill[{frac!r}]\t({k}, {est!r})")
    ex._atomic_write(path, "\n".join(lines) + "\n")
    written.append(path)
    meta = _outpath(cfg, "meta.txt")
    ex.write_metadata(cfg, meta, extra={"kept_replications": report["replications"]})
    written.append(meta)
    return _emit_verdicts(cfg, verdicts, args, written)


def _cmd_overlap(args) -> int:
    cfg, _extras = cfgmod.load(args.config, "overlap", _overrides(args))
    report = ex.overlap_decay_experiment(cfg)
    verdicts = report["verdicts"]
    written = []
    path = _outpath(cfg, "overlap.tsv")
    lines = [ex._header(cfg) + "t\tmedian_nu\tmean_nu\tsurvivors"]
    for t in report["t_grid"]:
        lines.append(
            f"{t!r}\t{report['median_nu'][t]!r}\t{report['mean_nu'][t]!r}\t{report['survivors'][t]}"
        )
    if "slope" in report:
        lines.append(f"# slope = {report['slope']!r}")
        lines.append(f"# expected_slope = {report['expected_slope']!r}")
    ex._atomic_write(path, "\n".join(lines) + "\n")
    written.append(path)
    meta = _outpath(cfg, "meta.txt")
    ex.write_metadata(cfg, meta, extra={"kept_replications": report["replications"]})
    written.append(meta)
    return _emit_verdicts(cfg, verdicts, args, written)


def _cmd_limits(args) -> int:
    cfg, extras = cfgmod.load(args.config, "limits", _overrides(args))
    verdicts = ex.limit_selftests(
        cfg.master_seed,
        alpha=extras["alpha"],
        n_stable=extras["stable_draws"],
        n_gumbel=extras["gumbel_draws"],
        n_pareto=extras["pareto_draws"],
        p_threshold=cfg.p_threshold,
        se_multiplier=cfg.se_multiplier,
    )
    return _emit_verdicts(cfg, verdicts, args, [])


_COMMANDS = {
    "simulate": _cmd_simulate,
    "ensemble": _cmd_ensemble,
    "check": _cmd_check,
    "fluctuations": _cmd_fluctuations,
    "overlap": _cmd_overlap,
    "limits-selftest": _cmd_limits,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; pass both through
        # as return values so callers embedding main() never see SystemExit.
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (cfgmod.ConfigError, OSError, ValueError, LookupError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def run():  # console-script entry point
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())

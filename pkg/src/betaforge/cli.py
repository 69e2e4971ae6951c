"""Command-line entry point: ``betaforge <subcommand> [flags]``.

Exit codes: 0 success, 1 validation error, 2 I/O error. Every JSON document
echoes the resolved flags (minus ``--threads`` and output destinations,
which never affect results) so a run can be repeated exactly.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import divergence, experiments, features, reports, selection
from .forest import POLICIES, ForestConfig
from .scaled_beta import (
    ScaledStats,
    SummaryStats,
    beta_median_approx,
    estimate_from_stats,
    numeric_median,
    scale_stats,
)

log = logging.getLogger("betaforge")

THREADS_ENV = "BETAFORGE_THREADS"
# flags that choose where results go or how fast they are computed
_NOT_ECHOED = {"threads", "verbose", "output", "curve", "truth", "export_digits", "func", "format"}


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}", 1)


def _resolve_threads(flag: int | None) -> int:
    if flag is not None:
        value, source = flag, "--threads"
    else:
        raw = os.environ.get(THREADS_ENV)
        if raw is None:
            return 1
        try:
            value, source = int(raw), THREADS_ENV
        except ValueError:
            raise CliError(f"{THREADS_ENV}: expected an integer, got {raw!r}") from None
    if value < 1:
        raise CliError(f"{source}: must be >= 1, got {value}")
    return value


def _echo(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in _NOT_ECHOED:
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def _int_list(text: str) -> list[int]:
    vals = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            vals.extend(range(int(lo), int(hi) + 1))
        elif part:
            vals.append(int(part))
    if not vals:
        raise argparse.ArgumentTypeError(f"empty integer list {text!r}")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _write_text(text: str, dest: Path | None) -> None:
    if dest is None:
        sys.stdout.write(text)
    else:
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_text(text, encoding="utf-8")


def _simple_doc(args, result: dict, seeds: dict | None = None) -> dict:
    return {
        "schema_version": reports.SCHEMA_VERSION,
        "command": args.subcommand,
        "config": _echo(args),
        "seeds": seeds or {},
        "result": result,
    }


def _emit_doc(doc: dict, args) -> None:
    _write_text(reports.dumps(doc), getattr(args, "output", None))


# -- shared flag groups -------------------------------------------------------


def _add_forest_flags(p, with_m: bool = True) -> None:
    g = p.add_argument_group("forest")
    g.add_argument("--n-estimators", type=int, default=100, help="trees per forest (default 100)")
    if with_m:
        g.add_argument("--max-features", type=int, default=2,
                       help="candidate features per node, m (default 2)")
    g.add_argument("--max-depth", type=int, default=100, help="maximum tree depth (default 100)")
    g.add_argument("--class-weight", choices=["balanced", "none"], default="balanced",
                   help="class weighting (default balanced)")
    g.add_argument("--seed", type=int, default=42, help="forest seed (default 42)")
    g.add_argument("--no-valid-split-policy", choices=POLICIES, default="extend_until_valid",
                   help="what a node does when no candidate splits (default extend_until_valid)")


def _forest_config(args, m: int | None = None) -> ForestConfig:
    cfg = ForestConfig(
        n_estimators=args.n_estimators,
        max_features=m if m is not None else args.max_features,
        max_depth=args.max_depth,
        class_weight=args.class_weight,
        seed=args.seed,
        no_valid_split_policy=args.no_valid_split_policy,
    )
    cfg.validate()
    return cfg


def _add_source_flags(p) -> None:
    g = p.add_argument_group("data source (choose events or digits)")
    g.add_argument("--events", type=Path, help="snapshot CSV of ticket events")
    g.add_argument("--pair", nargs=2, metavar=("ARTIST0", "ARTIST1"),
                   help="two artist labels from --events; label 0 is the first")
    g.add_argument("--window", type=int, default=None,
                   help="average only the last K days of each event (default: full lifecycle)")
    g.add_argument("--impute", choices=["sentinel", "drop"], default="sentinel",
                   help="rows whose shapes cannot be estimated (default sentinel)")
    g.add_argument("--digits", type=Path, help="optical-digits CSV (64 pixels + class per row)")
    g.add_argument("--digit-pair", nargs=2, type=int, metavar=("A", "B"),
                   help="two digit classes; label 1 is B")
    g.add_argument("--subset-size", type=int, default=6, help="pixel columns kept (default 6)")
    g.add_argument("--subset-seed", type=int, default=42, help="seed for the pixel subset (default 42)")
    g.add_argument("--n-zv", type=int, default=20, help="zero-variance columns in *_reg variants (default 20)")
    g.add_argument("--fill", type=float, default=1.0, help="value of the zero-variance columns (default 1)")


def _check_source(args) -> str:
    if (args.events is None) == (args.digits is None):
        raise CliError("give exactly one of --events or --digits")
    if args.events is not None:
        if not args.pair:
            raise CliError("--events needs --pair ARTIST0 ARTIST1")
        return "events"
    if not args.digit_pair:
        raise CliError("--digits needs --digit-pair A B")
    return "digits"


def _load_events(path: Path) -> features.LoadResult:
    res = features.load_event_csv(path)
    for line, msg in res.rejected:
        log.warning("%s:%s: rejected: %s", path, line if line > 0 else "-", msg)
    return res


def _variant(args, source: str, variant: str) -> features.LabeledDataset:
    if source == "events":
        if variant not in ("basic", "alpha_beta", "alpha_beta_reg"):
            raise CliError(f"--variant {variant!r} does not apply to --events")
        events = _load_events(args.events).by_artist()
        ds = features.build_basic(events, tuple(args.pair), args.window)
        if variant == "basic":
            return ds
        ds = features.build_alpha_beta(ds, args.impute)
        return features.augment_zero_variance(ds, args.n_zv, args.fill) if variant == "alpha_beta_reg" else ds
    if variant not in ("delta", "delta_reg"):
        raise CliError(f"--variant {variant!r} does not apply to --digits")
    src = features.load_digits(args.digits, args.subset_size, args.subset_seed)
    ds = src.pair_dataset(*args.digit_pair)
    return features.augment_zero_variance(ds, args.n_zv, args.fill) if variant == "delta_reg" else ds


# -- subcommands --------------------------------------------------------------


def cmd_ingest(args) -> int:
    if args.export_digits is not None:
        features.write_bundled_digits(args.export_digits)
        log.info("wrote digits to %s", args.export_digits)
        if args.events is None:
            return 0
    if args.events is None:
        raise CliError("ingest needs --events (or --export-digits)")
    res = _load_events(args.events)
    artists = {k: len(v) for k, v in sorted(res.by_artist().items())}
    result = {
        "n_events": len(res.series),
        "n_snapshots": sum(len(s.snapshots) for s in res.series),
        "n_rejected": len(res.rejected),
        "rejected": [[line, msg] for line, msg in res.rejected],
        "artists": artists,
    }
    _emit_doc(_simple_doc(args, result), args)
    return 0


def cmd_estimate(args) -> int:
    stats = SummaryStats(args.min, args.max, args.mean, args.median)
    params = estimate_from_stats(stats, eps=args.eps, cap=args.cap)
    sc: ScaledStats = scale_stats(stats)
    unit = type(params)(params.alpha, params.beta)
    result = {
        "alpha": params.alpha,
        "beta": params.beta,
        "s": sc.s,
        "q": sc.q,
        "support": [params.support_min, params.support_max],
        "approx_median_scaled": beta_median_approx(unit),
        "numeric_median_scaled": numeric_median(unit),
    }
    _emit_doc(_simple_doc(args, result), args)
    return 0


def cmd_features(args) -> int:
    source = _check_source(args)
    variant = args.variant or ("alpha_beta" if source == "events" else "delta")
    ds = _variant(args, source, variant)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row_id", *ds.feature_names, "label"])
    for i in range(ds.n_rows):
        rid = ds.row_ids[i] if ds.row_ids else str(i)
        w.writerow([rid, *(repr(float(v)) for v in ds.X[i]), int(ds.y[i])])
    _write_text(buf.getvalue(), args.output)
    if args.output is not None:
        summary = {
            "variant": ds.variant,
            "rows": ds.n_rows,
            "columns": list(ds.feature_names),
            "class_counts": [int((ds.y == 0).sum()), int((ds.y == 1).sum())],
            "notes": ds.notes,
        }
        sys.stdout.write(reports.dumps(_simple_doc(args, summary)))
    return 0


def _emit_report(report: dict, args) -> None:
    if args.format == "csv":
        if args.output is None:
            raise CliError("--format csv needs --output DIR")
        reports.emit_report(report, "csv", args.output)
    elif args.output is None:
        sys.stdout.write(reports.dumps(report))
    else:
        reports.emit_report(report, "json", args.output)


def cmd_train_pair(args) -> int:
    source = _check_source(args)
    default = ("basic", "alpha_beta") if source == "events" else ("delta", "delta_reg")
    arm_a = _variant(args, source, args.arm_a or default[0])
    arm_b = _variant(args, source, args.arm_b or default[1])
    cfg = _forest_config(args)
    out = experiments.run_pairwise(
        arm_a, arm_b, cfg, args.split_seed, ratio=args.ratio, tree_jobs=args.threads
    )
    seeds = {"forest": cfg.seed, "split": args.split_seed, "subset": args.subset_seed}
    _emit_report(reports.build_report(_echo(args), seeds, [out]), args)
    return 0


def _sweep_pairs(args) -> list[experiments.PairSpec]:
    chosen = [x is not None for x in (args.digits, args.synthetic, args.events)]
    if sum(chosen) != 1:
        raise CliError("give exactly one of --digits, --synthetic or --events")
    if args.digits is not None:
        src = features.load_digits(args.digits, args.subset_size, args.subset_seed)
        return experiments.digits_pairs(src, args.n_zv, args.ordered, args.fill)
    if args.synthetic is not None:
        if args.synthetic < 1:
            raise CliError("--synthetic must be >= 1")
        return experiments.synthetic_ticket_pairs(
            args.synthetic, args.synth_seed, args.events_per_artist, args.noise, args.n_zv
        )
    events = _load_events(args.events).by_artist()
    pairs = []
    for a, b in itertools.combinations(sorted(events), 2):
        basic = features.build_basic(events, (a, b), args.window)
        ab = features.build_alpha_beta(basic, args.impute)
        if args.n_zv:
            pairs.append(experiments.PairSpec(f"{a}|{b}", ab, features.augment_zero_variance(ab, args.n_zv, args.fill)))
        else:
            pairs.append(experiments.PairSpec(f"{a}|{b}", basic, ab))
    if not pairs:
        raise CliError(f"{args.events}: need at least two artists")
    return pairs


def cmd_sweep(args) -> int:
    pairs = _sweep_pairs(args)
    cfg = _forest_config(args, m=1)
    res = experiments.sweep_m(pairs, args.m_values, cfg, args.experiment_seed, args.ratio, args.threads)
    if not res.m_values:
        raise CliError(f"--m-values {args.m_values}: none fit the narrowest arm")
    seeds = {
        "forest": cfg.seed,
        "experiment": args.experiment_seed,
        "subset": args.subset_seed,
        "synthetic": args.synth_seed,
        "split_seeds": [experiments.derive_seed(args.experiment_seed, i) for i in range(len(pairs))],
    }
    extra = {"skipped_m": res.skipped} if res.skipped else None
    _emit_report(reports.build_report(_echo(args), seeds, sweep=res, extra=extra), args)
    return 0


def cmd_signtest(args) -> int:
    rep = experiments.sign_test(args.better, args.worse, args.ties)
    _emit_doc(_simple_doc(args, rep.to_dict()), args)
    return 0


def cmd_kde(args) -> int:
    events = _load_events(args.events).by_artist()
    basic = features.build_basic(events, tuple(args.pair), args.window)
    ds = features.build_alpha_beta(basic, "drop")
    cols0, cols1 = divergence.dataset_columns(ds)
    table = divergence.feature_divergence_table(cols0, cols1, list(cols0), args.grid)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "hellinger", "js", "kl_fwd", "kl_rev", "tv"])
        for fd in table:
            r = fd.report
            w.writerow([fd.feature, r.hellinger, r.js_nats, r.kl_forward, r.kl_reverse, r.tv])
        _write_text(buf.getvalue(), args.output)
        return 0
    result = {
        "features": {fd.feature: fd.report.to_dict() for fd in table},
        "ranking": divergence.rank_features(table, args.rank_by),
        "rows_used": ds.n_rows,
        "dropped_unestimable": ds.notes.get("dropped_imputed", 0),
    }
    _emit_doc(_simple_doc(args, result), args)
    return 0


def cmd_selection(args) -> int:
    profile = selection.ScoreProfile(tuple(args.scores), args.m, args.n_zv)
    result = {"approx": selection.approx_selection_probs(profile)}
    if profile.n_total <= selection.MAX_ENUMERATION:
        result["exact"] = selection.exact_selection_probs(profile)
    if args.trials > 0:
        mc = selection.monte_carlo_selection(profile, args.trials, args.mc_seed)
        result["monte_carlo"] = mc.probs
        result["monte_carlo_stderr"] = mc.stderr
    if args.curve is not None:
        r = sorted(args.scores, reverse=True)
        if len(r) < 2 or not r[0] > r[1] > 0:
            raise CliError("--curve needs two distinct positive top scores")
        r_bar = float(np.mean(args.scores))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_zv", "gamma_prime", "odds_before", "odds_after"])
        for k, g in selection.gamma_lattice(args.m, len(args.scores), args.max_zv):
            d = selection.dilution_odds(r[0], r[1], args.m, r_bar, len(args.scores), k)
            w.writerow([k, g, d.odds_before, d.odds_after])
        _write_text(buf.getvalue(), args.curve)
    _emit_doc(_simple_doc(args, result, {"monte_carlo": args.mc_seed}), args)
    return 0


def cmd_plan_zv(args) -> int:
    plan = selection.plan_n_zv(args.target, args.m, args.n)
    result = {"n_zv": plan.n_zv, "achieved": plan.achieved, "error": plan.error}
    _emit_doc(_simple_doc(args, result), args)
    return 0


def cmd_synth(args) -> int:
    if (args.profiles is None) == (args.pairs is None):
        raise CliError("give exactly one of --profiles or --pairs")
    if args.profiles is not None:
        profiles = features.load_profiles(args.profiles)
    else:
        if args.pairs < 1:
            raise CliError("--pairs must be >= 1")
        profiles = [p for i in range(args.pairs)
                    for p in features.matched_profile_pair(i, args.seed, args.events_per_artist)]
    corpus = features.synth_generate(profiles, args.seed, args.noise)
    features.write_event_csv(corpus.series, args.output)
    if args.truth is not None:
        with args.truth.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["event_id", "alpha", "beta", "support_min", "support_max"])
            for eid in sorted(corpus.truth):
                p = corpus.truth[eid]
                w.writerow([eid, repr(p.alpha), repr(p.beta), repr(p.support_min), repr(p.support_max)])
    result = {
        "artists": [p.name for p in profiles],
        "events": len(corpus.series),
        "snapshots": sum(len(s.snapshots) for s in corpus.series),
    }
    sys.stdout.write(reports.dumps(_simple_doc(args, result, {"synthetic": args.seed})))
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="betaforge", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker cap; results do not depend on it (env {THREADS_ENV}, default 1)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate a snapshot CSV and summarize it")
    p.add_argument("--events", type=Path, help="snapshot CSV")
    p.add_argument("--export-digits", type=Path, default=None,
                   help="write the UCI digits copy bundled with scikit-learn to this CSV")
    p.add_argument("--output", type=Path, help="JSON summary path (default stdout)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("estimate", help="alpha and beta from min/max/mean/median")
    p.add_argument("--min", type=float, required=True, help="minimum price")
    p.add_argument("--max", type=float, required=True, help="maximum price")
    p.add_argument("--mean", type=float, required=True, help="mean price")
    p.add_argument("--median", type=float, required=True, help="median price")
    p.add_argument("--eps", type=float, default=1e-9, help="symmetry tolerance on |q - s| (default 1e-9)")
    p.add_argument("--cap", type=float, default=1e6, help="largest accepted shape value (default 1e6)")
    p.add_argument("--output", type=Path, help="JSON path (default stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("features", help="write one dataset variant as CSV")
    _add_source_flags(p)
    p.add_argument("--variant", choices=features.VARIANTS, default=None,
                   help="dataset variant (default alpha_beta for events, delta for digits)")
    p.add_argument("--output", type=Path, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train-pair", help="train two arms on one pair and compare")
    _add_source_flags(p)
    _add_forest_flags(p)
    p.add_argument("--arm-a", choices=features.VARIANTS, default=None,
                   help="baseline variant (default basic or delta)")
    p.add_argument("--arm-b", choices=features.VARIANTS, default=None,
                   help="compared variant (default alpha_beta or delta_reg)")
    p.add_argument("--split-seed", type=int, default=42, help="train/test split seed (default 42)")
    p.add_argument("--ratio", type=float, default=0.8, help="training share per class (default 0.8)")
    p.add_argument("--format", choices=["json", "csv"], default="json", help="report format")
    p.add_argument("--output", type=Path, help="report file (json) or directory (csv)")
    p.set_defaults(func=cmd_train_pair)

    p = sub.add_parser("sweep", help="all pairs of a family over a range of max_features")
    g = p.add_argument_group("pair family (choose one)")
    g.add_argument("--digits", type=Path, help="digits CSV: every pair of classes, delta vs delta_reg")
    g.add_argument("--synthetic", type=int, default=None, metavar="N",
                   help="N synthetic artist pairs with matched priors")
    g.add_argument("--events", type=Path, help="snapshot CSV: every pair of artists")
    g.add_argument("--ordered", action="store_true", help="digits: use ordered class pairs (90)")
    g.add_argument("--subset-size", type=int, default=6, help="digits: pixel columns kept (default 6)")
    g.add_argument("--subset-seed", type=int, default=42, help="digits: pixel subset seed (default 42)")
    g.add_argument("--synth-seed", type=int, default=42, help="synthetic: generator seed (default 42)")
    g.add_argument("--events-per-artist", type=int, default=40, help="synthetic: events per artist (default 40)")
    g.add_argument("--noise", type=float, default=0.002,
                   help="synthetic: jitter sd on scaled mean/median (default 0.002)")
    g.add_argument("--window", type=int, default=None, help="events: last K days only")
    g.add_argument("--impute", choices=["sentinel", "drop"], default="sentinel", help="events: shape imputation")
    g.add_argument("--n-zv", type=int, default=20,
                   help="zero-variance columns; for tickets 0 compares basic vs alpha_beta (default 20)")
    g.add_argument("--fill", type=float, default=1.0, help="zero-variance column value (default 1)")
    _add_forest_flags(p, with_m=False)
    p.add_argument("--m-values", type=_int_list, default=[1, 2, 3, 4, 5, 6],
                   help="max_features values, e.g. 1-6 or 2,4 (default 1-6)")
    p.add_argument("--experiment-seed", type=int, default=42, help="seed for per-pair splits (default 42)")
    p.add_argument("--ratio", type=float, default=0.8, help="training share per class (default 0.8)")
    p.add_argument("--format", choices=["json", "csv"], default="json", help="report format")
    p.add_argument("--output", type=Path, help="report file (json) or directory (csv)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("signtest", help="one-sided paired sign test")
    p.add_argument("--better", type=int, required=True, help="pairs where arm b won")
    p.add_argument("--worse", type=int, required=True, help="pairs where arm b lost")
    p.add_argument("--ties", type=int, default=0, help="tied pairs, reported only (default 0)")
    p.add_argument("--output", type=Path, help="JSON path (default stdout)")
    p.set_defaults(func=cmd_signtest)

    p = sub.add_parser("kde", help="per-feature density distances between two artists")
    p.add_argument("--events", type=Path, required=True, help="snapshot CSV")
    p.add_argument("--pair", nargs=2, required=True, metavar=("ARTIST0", "ARTIST1"), help="artists to compare")
    p.add_argument("--window", type=int, default=None, help="average only the last K days")
    p.add_argument("--grid", type=int, default=divergence.DEFAULT_GRID, help="KDE grid points (default 512)")
    p.add_argument("--rank-by", choices=["hellinger", "js_nats", "kl_forward", "kl_reverse", "tv"],
                   default="hellinger", help="ranking metric (default hellinger)")
    p.add_argument("--format", choices=["json", "csv"], default="json", help="output format")
    p.add_argument("--output", type=Path, help="output path (default stdout)")
    p.set_defaults(func=cmd_kde)

    p = sub.add_parser("selection", help="split-feature selection probabilities and dilution curve")
    p.add_argument("--scores", type=_float_list, required=True, help="informative scores, e.g. 3,2,1")
    p.add_argument("--m", type=int, required=True, help="candidates per node")
    p.add_argument("--n-zv", type=int, default=0, help="zero-score features added (default 0)")
    p.add_argument("--trials", type=int, default=0, help="Monte Carlo trials, 0 to skip (default 0)")
    p.add_argument("--mc-seed", type=int, default=42, help="Monte Carlo seed (default 42)")
    p.add_argument("--max-zv", type=int, default=40, help="last n_zv on the curve (default 40)")
    p.add_argument("--curve", type=Path, default=None,
                   help="write odds and gamma' for n_zv = 0..max-zv to this CSV")
    p.add_argument("--output", type=Path, help="JSON path (default stdout)")
    p.set_defaults(func=cmd_selection)

    p = sub.add_parser("plan-zv", help="zero-variance count for a target selection probability")
    p.add_argument("--target", type=float, required=True, help="desired m / (n + n_zv)")
    p.add_argument("--m", type=int, required=True, help="candidates per node")
    p.add_argument("--n", type=int, required=True, help="informative features")
    p.add_argument("--output", type=Path, help="JSON path (default stdout)")
    p.set_defaults(func=cmd_plan_zv)

    p = sub.add_parser("synth", help="generate a synthetic snapshot CSV")
    p.add_argument("--profiles", type=Path, default=None, help="INI file of artist profiles")
    p.add_argument("--pairs", type=int, default=None, help="number of matched artist pairs instead of --profiles")
    p.add_argument("--events-per-artist", type=int, default=40, help="with --pairs (default 40)")
    p.add_argument("--seed", type=int, default=42, help="generator seed (default 42)")
    p.add_argument("--noise", type=float, default=0.0, help="jitter sd on scaled mean/median (default 0)")
    p.add_argument("--output", type=Path, required=True, help="snapshot CSV to write")
    p.add_argument("--truth", type=Path, default=None, help="also write true shapes per event to this CSV")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        args.threads = _resolve_threads(args.threads)
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

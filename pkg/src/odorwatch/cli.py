"""Operator command line: ingest, build, train, evaluate, interpret,
analytics, and the live service."""

from __future__ import annotations

import json
import logging
import os
import signal
import time

import click
import numpy as np

from . import __version__
from .analytics import load_stopwords, ngram_frequency, segment_users, temporal_heatmap
from .config import RunConfig, load_config
from .core import DATA_VIEW_KINDS, HOUR
from .dataset import align, assemble_X, build_frames, build_y
from .ensemble import ForestParams
from .evaluation import ForestCvModel, results_csv, results_table, rolling_cv
from .feeds import FileSpoolSink, HttpAgencySink, pull_sensor_feed
from .interpret import InterpretParams, assemble_interpretation, run_pipeline
from .notifier import LogFileSink, RetrainSpec, Scheduler
from .server import Api, ApiServer
from .store import Store
from .synth import demo_reports, generate_benchmark, to_readings

log = logging.getLogger("odorwatch")

VARIANTS = ("cls-et", "cls-rf", "reg-et", "reg-rf")


def _provenance(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.config_hash, "code_version": __version__}


def _write(path: str, data: str | bytes) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(data)


def _load_cfg(ctx: click.Context) -> RunConfig:
    cfg = load_config(ctx.obj["config"]) if ctx.obj.get("config") else RunConfig()
    for key in ("data_dir", "timezone", "listen", "sensor_source", "seed"):
        override = ctx.obj.get(key)
        if override is not None:
            setattr(cfg, key, override)
    return cfg


def _store_dataset(cfg: RunConfig, store: Store):
    """Aligned dataset straight from the store, with the configured label
    parameters; the region set defaults to every zip present in the reports."""
    snap = store.snapshot()
    if not snap.readings:
        raise click.ClickException("store holds no sensor readings; run ingest first")
    first = min(r.observed_at for r in snap.readings)
    last = max(r.observed_at for r in snap.readings)
    t0 = first - first % HOUR + HOUR
    t1 = last - last % HOUR + HOUR
    frames = build_frames(list(snap.readings), t0, t1)
    raw = assemble_X(frames, lags=cfg.lags, calendar=cfg.calendar, tz=cfg.timezone)
    if cfg.region_set is not None:
        region_set = set(cfg.region_set)
    else:
        region_set = {r.zip_code for r in snap.reports}
        counts = {}
        for r in snap.reports:
            counts[r.zip_code] = counts.get(r.zip_code, 0) + 1
        log.info("region set defaulted to %d zips with report counts %s",
                 len(region_set), dict(sorted(counts.items())))
    labels = build_y(
        list(snap.reports),
        region_set=region_set or None,
        hours=raw.hours,
        horizon_hours=cfg.horizon_hours,
        rating_floor=cfg.rating_floor,
        threshold=cfg.score_threshold,
        tz=cfg.timezone,
    )
    return frames, align(raw, labels, tz=cfg.timezone)


@click.group(context_settings={"auto_envvar_prefix": "ODORWATCH"})
@click.option("--config", type=click.Path(exists=True), default=None, help="JSON run config.")
@click.option("--data-dir", default=None, help="Data directory override.")
@click.option("--timezone", default=None, help="IANA timezone override.")
@click.option("--listen", default=None, help="host:port for serve.")
@click.option("--sensor-source", default=None, help="Sensor feed URL or CSV path.")
@click.option("--seed", type=int, default=None, help="Seed for all RNG streams.")
@click.option("-v", "--verbose", is_flag=True, default=False)
@click.pass_context
def main(ctx, config, data_dir, timezone, listen, sensor_source, seed, verbose):
    """Community odor reporting and smell-event prediction toolkit."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    ctx.ensure_object(dict)
    ctx.obj.update(
        config=config, data_dir=data_dir, timezone=timezone, listen=listen,
        sensor_source=sensor_source, seed=seed,
    )


@main.command()
@click.option("--reports", type=click.Path(exists=True), default=None,
              help="Canonical reports CSV to import.")
@click.option("--sensors", type=click.Path(exists=True), default=None,
              help="Canonical sensors CSV to import.")
@click.option("--interactions", type=click.Path(exists=True), default=None,
              help="Canonical interactions CSV to import.")
@click.pass_context
def ingest(ctx, reports, sensors, interactions):
    """Import CSVs or pull the configured sensor feed into the store."""
    cfg = _load_cfg(ctx)
    store = Store(cfg.data_dir)
    if reports:
        import csv as _csv

        from .core import SmellReport

        n = 0
        with open(reports, newline="") as fh:
            for row in _csv.reader(fh):
                if not row or row[0] == "epoch":
                    continue
                store.append_report(
                    SmellReport(
                        report_id="pending",
                        observed_at=int(row[0]),
                        zip_code=row[1],
                        rating=int(row[2]),
                        smell_description=row[3],
                        symptoms=row[4],
                        notes=row[5],
                    )
                )
                n += 1
        click.echo(f"imported {n} reports")
    source = sensors or cfg.sensor_source
    if source:
        readings, stats = pull_sensor_feed(source)
        store.append_readings(readings)
        click.echo(
            f"imported {stats.accepted} readings "
            f"({stats.malformed} malformed, {sum(stats.dropped_channels.values())} dropped)"
        )
    if interactions:
        import csv as _csv

        from .core import InteractionEvent

        n = 0
        with open(interactions, newline="") as fh:
            for row in _csv.reader(fh):
                if not row or row[0] == "epoch_hit":
                    continue
                store.append_interaction(
                    InteractionEvent(anon_user_id=row[2], hit_at=int(row[0]),
                                     data_at=int(row[1]), kind=row[3])
                )
                n += 1
        click.echo(f"imported {n} interactions")
    if not reports and not source and not interactions:
        raise click.ClickException(
            "nothing to ingest: give --reports/--sensors/--interactions or a sensor source"
        )


@main.command()
@click.pass_context
def build(ctx):
    """Build the standardized dataset artifact from the store."""
    cfg = _load_cfg(ctx)
    store = Store(cfg.data_dir)
    _, ds = _store_dataset(cfg, store)
    fm = ds.standardized()
    out = os.path.join(cfg.data_dir, "artifacts", "dataset")
    lines = [",".join(fm.column_names())]
    for row in fm.values:
        lines.append(",".join(repr(v) for v in row))
    _write(os.path.join(out, "X.csv"), "\n".join(lines) + "\n")
    ylines = ["hour,score,positive"]
    for h, s, p in zip(ds.hours, ds.scores, ds.positives):
        ylines.append(f"{h},{s},{int(p)}")
    _write(os.path.join(out, "y.csv"), "\n".join(ylines) + "\n")
    meta = {
        "rows": len(ds),
        "columns": len(fm.column_names()),
        "positive_rate": ds.positive_rate,
        "provenance": _provenance(cfg),
    }
    _write(os.path.join(out, "dataset.json"), json.dumps(meta, indent=2, sort_keys=True))
    click.echo(f"built {meta['rows']}x{meta['columns']} dataset "
               f"(positive rate {ds.positive_rate:.3f}) -> {out}")


def _cv_model(variant: str, cfg: RunConfig) -> ForestCvModel:
    n_trees = cfg.model.n_trees_classify if variant.startswith("cls") else cfg.model.n_trees_regress
    params = ForestParams(
        n_trees=n_trees,
        max_features=cfg.model.max_features,
        min_samples_split=cfg.model.min_samples_split,
    )
    return ForestCvModel(variant, params, threshold=cfg.score_threshold)


@main.command()
@click.option("--variant", type=click.Choice(VARIANTS), default="cls-et")
@click.pass_context
def train(ctx, variant):
    """Train one model on the whole store and version it under models/."""
    cfg = _load_cfg(ctx)
    store = Store(cfg.data_dir)
    _, ds = _store_dataset(cfg, store)
    from datetime import datetime
    from zoneinfo import ZoneInfo

    from .dataset import Standardizer, preprocess_blob

    scaler = Standardizer().fit(ds.raw.values)
    X = scaler.transform(ds.raw.values)
    model = _cv_model(variant, cfg)
    model.fit(X, ds.scores, ds.positives, cfg.seed)
    version = datetime.now(ZoneInfo(cfg.timezone)).date().isoformat()
    store.save_model_files(
        version,
        {
            "model.json": model.model.to_blob(),
            "preprocess.json": preprocess_blob(scaler, ds.raw.columns),
        },
    )
    click.echo(f"trained {variant} on {len(ds)} rows -> models/{version}")


@main.command("eval")
@click.option("--variant", "variants", type=click.Choice(VARIANTS), multiple=True,
              default=VARIANTS, help="Variants to evaluate (repeatable).")
@click.option("--synthetic", is_flag=True, default=False,
              help="Evaluate on the built-in synthetic benchmark instead of the store.")
@click.option("--repeats", type=int, default=None)
@click.option("--n-trees", type=int, default=None, help="Override tree count (desk scale).")
@click.pass_context
def eval_cmd(ctx, variants, synthetic, repeats, n_trees):
    """Rolling cross-validation; writes the metrics CSV, table, and figure."""
    cfg = _load_cfg(ctx)
    if synthetic:
        ds = generate_benchmark(seed=cfg.seed, tz=cfg.timezone).dataset(
            lags=cfg.lags, calendar=cfg.calendar
        )
    else:
        store = Store(cfg.data_dir)
        _, ds = _store_dataset(cfg, store)
    reps = repeats if repeats is not None else cfg.cv.repeats
    results = []
    for variant in variants:
        default_trees = (
            cfg.model.n_trees_classify if variant.startswith("cls") else cfg.model.n_trees_regress
        )
        params = ForestParams(
            n_trees=n_trees if n_trees is not None else default_trees,
            max_features=cfg.model.max_features,
            min_samples_split=cfg.model.min_samples_split,
        )
        res = rolling_cv(
            ds,
            lambda v=variant, p=params: ForestCvModel(v, p, cfg.score_threshold),
            variant=variant,
            fold_hours=cfg.cv.fold_hours,
            train_folds=cfg.cv.train_folds,
            repeats=reps,
            seed=cfg.seed,
            daytime=cfg.daytime,
            issue=cfg.issue,
            n_jobs=cfg.cv.n_jobs,
        )
        results.append(res)
        click.echo(results_table([res]).rstrip())
    out = os.path.join(cfg.data_dir, "artifacts", "eval")
    _write(os.path.join(out, "metrics.csv"), results_csv(results))
    _write(os.path.join(out, "table.txt"), results_table(results))
    _write(os.path.join(out, "provenance.json"),
           json.dumps(_provenance(cfg), indent=2, sort_keys=True))
    from .plots import save_metric_bars

    save_metric_bars([r.summary for r in results], os.path.join(out, "metrics.png"))
    click.echo(f"wrote {out}/metrics.csv, table.txt, metrics.png")


@main.command()
@click.option("--synthetic", is_flag=True, default=False)
@click.option("--hours", type=int, default=17520, help="Synthetic data size.")
@click.pass_context
def interpret(ctx, synthetic, hours):
    """Run the interpretation pipeline; writes report JSON, tree text, and figures."""
    cfg = _load_cfg(ctx)
    if synthetic:
        synth = generate_benchmark(seed=cfg.seed, n_hours=hours, tz=cfg.timezone)
        frames = synth.frames
        ds = synth.dataset(lags=cfg.lags, calendar=cfg.calendar)
    else:
        store = Store(cfg.data_dir)
        frames, ds = _store_dataset(cfg, store)
    inter = assemble_interpretation(frames, lags=cfg.interpret.lags)
    keep = np.isin(inter.hours, ds.hours)
    from .dataset import RawMatrix

    inter = RawMatrix(hours=inter.hours[keep], values=inter.values[keep], columns=inter.columns)
    params = InterpretParams(
        lags=cfg.interpret.lags,
        proximity_trees=cfg.interpret.proximity_trees,
        max_proximity_samples=cfg.interpret.max_proximity_samples,
        dbscan_eps=cfg.interpret.dbscan_eps,
        dbscan_min_pts=cfg.interpret.dbscan_min_pts,
        rfe_step=cfg.interpret.rfe_step,
        rfe_target=cfg.interpret.rfe_target,
        rfe_trees=cfg.interpret.rfe_trees,
        tree_max_depth=cfg.interpret.tree_max_depth,
        test_fraction=cfg.interpret.test_fraction,
        max_negatives=cfg.interpret.max_negatives,
    )
    report = run_pipeline(ds, inter, params=params, seed=cfg.seed)
    out = os.path.join(cfg.data_dir, "artifacts", "interpret")
    _write(os.path.join(out, "report.json"), report.to_json())
    _write(os.path.join(out, "tree.txt"), report.tree_text)
    corr = ["feature,r,p"]
    corr += [f"{name},{r:.6f},{p:.3e}" for name, (r, p) in report.correlations.items()]
    _write(os.path.join(out, "correlations.csv"), "\n".join(corr) + "\n")
    _write(os.path.join(out, "provenance.json"),
           json.dumps(_provenance(cfg), indent=2, sort_keys=True))
    from .plots import save_importance_bars

    save_importance_bars(report.importances, os.path.join(out, "importance.png"))
    click.echo(f"top feature: {report.top_feature} "
               f"(train F {report.train_confusion['fscore']:.2f}, "
               f"test F {report.test_confusion['fscore']:.2f}) -> {out}")


@main.command()
@click.pass_context
def analytics(ctx):
    """Usage analytics: user groups, n-grams, and the temporal grid."""
    cfg = _load_cfg(ctx)
    store = Store(cfg.data_dir)
    snap = store.snapshot()
    out = os.path.join(cfg.data_dir, "artifacts", "analytics")

    report_counts: dict[str, int] = {}
    event_counts: dict[str, int] = {}
    for ev in snap.interactions:
        if ev.kind == "REPORT_SUBMIT":
            report_counts[ev.anon_user_id] = report_counts.get(ev.anon_user_id, 0) + 1
        else:
            event_counts[ev.anon_user_id] = event_counts.get(ev.anon_user_id, 0) + 1
    lines = ["group,users,user_pct,reports_pct,events_pct"]
    stats_lines = ["group,reports_median,reports_siqr,events_median,events_siqr,hours_diff_median,hours_diff_siqr"]
    if report_counts or event_counts:
        seg = segment_users(report_counts, event_counts)
        diffs: dict[str, list[float]] = {}
        for ev in snap.interactions:
            if ev.kind in DATA_VIEW_KINDS:
                group = seg.assignments.get(ev.anon_user_id)
                if group:
                    diffs.setdefault(group, []).append((ev.hit_at - ev.data_at) / 3600.0)
        from .analytics import siqr

        for group, s in seg.summary.items():
            lines.append(
                f"{group},{s['users']},{s['user_pct']:.1f},{s['reports_pct']:.1f},{s['events_pct']:.1f}"
            )
            d = diffs.get(group, [])
            med = float(np.median(d)) if d else float("nan")
            sq = siqr(d) if d else float("nan")
            stats_lines.append(
                f"{group},{s['reports_median']:.0f},{s['reports_siqr']:.0f},"
                f"{s['events_median']:.0f},{s['events_siqr']:.0f},{med:.0f},{sq:.0f}"
            )
        _write(os.path.join(out, "summary.json"), json.dumps(
            {"cuts": {"reports": seg.report_cut, "events": seg.event_cut},
             "summary": seg.summary, "provenance": _provenance(cfg)},
            indent=2, sort_keys=True, default=float))
    _write(os.path.join(out, "user_groups.csv"), "\n".join(lines) + "\n")
    _write(os.path.join(out, "group_stats.csv"), "\n".join(stats_lines) + "\n")

    stop = load_stopwords()
    texts = [
        " ".join(t for t in (r.smell_description, r.symptoms, r.notes) if t)
        for r in snap.reports
    ]
    from .plots import save_heatmap, save_ngram_bars

    for n, name in ((1, "unigram"), (2, "bigram")):
        grams = ngram_frequency(texts, n=n, stopwords=stop)
        glines = ["gram,count"] + [f"{g},{c}" for g, c in grams[:100]]
        _write(os.path.join(out, f"ngrams_{name}.csv"), "\n".join(glines) + "\n")
        save_ngram_bars(grams, os.path.join(out, f"ngrams_{name}.png"),
                        f"Top {name}s in report texts")

    grid = temporal_heatmap(list(snap.reports), tz=cfg.timezone)
    hlines = ["day_of_week," + ",".join(str(h) for h in range(24))]
    for d in range(7):
        cells = ["" if np.isnan(grid[d, h]) else f"{grid[d, h]:.4f}" for h in range(24)]
        hlines.append(f"{d}," + ",".join(cells))
    _write(os.path.join(out, "heatmap.csv"), "\n".join(hlines) + "\n")
    save_heatmap(grid, os.path.join(out, "heatmap.png"))
    click.echo(f"wrote analytics artifacts -> {out}")


@main.command()
@click.option("--hours", type=int, default=17520, help="Hours of synthetic data.")
@click.option("--with-reports/--no-reports", default=True)
@click.pass_context
def synth(ctx, hours, with_reports):
    """Generate synthetic benchmark data into the store (demo/testing)."""
    cfg = _load_cfg(ctx)
    store = Store(cfg.data_dir)
    data = generate_benchmark(seed=cfg.seed, n_hours=hours, tz=cfg.timezone)
    store.append_readings(to_readings(data.frames))
    if with_reports:
        zips = cfg.region_table().zip_codes()
        for rep in demo_reports(data.labels, zips, seed=cfg.seed, tz=cfg.timezone):
            store.append_report(rep)
    click.echo(
        f"synthesized {hours} hours (clean positive rate "
        f"{float(np.mean(data.clean_positives)):.3f}, label noise {data.noise_fraction:.3f})"
    )


@main.command()
@click.pass_context
def serve(ctx):
    """Run the API, hourly notifier ticks, and the weekly retrain schedule."""
    cfg = _load_cfg(ctx)
    store = Store(cfg.data_dir)
    sink_cfg = cfg.agency_sink or {}
    if sink_cfg.get("kind") == "http":
        agency = HttpAgencySink(sink_cfg["url"])
    else:
        agency = FileSpoolSink(sink_cfg.get("path") or os.path.join(cfg.data_dir, "agency"))
    api = Api(
        store,
        cfg.region_table(),
        agency_sink=agency,
        skew_seed=cfg.seed,
        skew_radius_m=cfg.skew_radius_m,
        text_cap=cfg.text_cap,
    )
    server = ApiServer(api, listen=cfg.listen, static_dir=cfg.static_dir)
    day_names = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
    day, hm = cfg.notify.retrain.split()
    dispatch_log = LogFileSink(os.path.join(cfg.data_dir, "notifications", "dispatch.csv"))
    scheduler = Scheduler(
        store,
        RetrainSpec(
            n_trees=cfg.model.n_trees_classify,
            max_features=cfg.model.max_features,
            min_samples_split=cfg.model.min_samples_split,
            lags=cfg.lags,
            horizon_hours=cfg.horizon_hours,
            rating_floor=cfg.rating_floor,
            score_threshold=cfg.score_threshold,
            region_set=frozenset(cfg.region_set) if cfg.region_set else None,
            tz=cfg.timezone,
            seed=cfg.seed,
        ),
        sinks=[dispatch_log],
        posthoc_threshold=cfg.notify.posthoc_threshold,
        posthoc_rating_floor=cfg.notify.posthoc_rating_floor,
        predictive_window_hours=cfg.notify.predictive_window_hours,
        retrain_day=day_names.index(day),
        retrain_hour=int(hm.split(":")[0]),
        seen_keys=dispatch_log.keys(),
    )
    scheduler.load_model_if_any()
    server.start()
    click.echo(f"serving on port {server.port} (data dir {cfg.data_dir})")

    stop = {"flag": False}

    def _sigint(signum, frame):
        stop["flag"] = True

    signal.signal(signal.SIGINT, _sigint)
    signal.signal(signal.SIGTERM, _sigint)
    try:
        while not stop["flag"]:
            now = int(time.time())
            scheduler.tick(now)
            next_hour = now - now % HOUR + HOUR
            while not stop["flag"] and time.time() < next_hour:
                time.sleep(min(5.0, max(0.1, next_hour - time.time())))
    finally:
        server.stop()
        click.echo("stopped")


if __name__ == "__main__":
    main()

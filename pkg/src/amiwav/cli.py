"""``amiwav`` command line: batch pipeline from raw readings to reports."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import classification, evaluator, ingest, load_model, store
from .errors import AmiwavError, InvalidArgumentError

log = logging.getLogger("amiwav")

PIPELINE_POLICY = ingest.IngestPolicy(negative="allow")


def thread_count() -> int:
    raw = os.environ.get("AMIWAV_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"AMIWAV_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise InvalidArgumentError(f"AMIWAV_THREADS must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def worker_map(fn, items):
    """Order-preserving map over customers, capped by AMIWAV_THREADS."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return list(map(fn, items))
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _bands(text: str) -> list[tuple[float, float]]:
    """``"-inf:80,80:90,90:inf"`` -> [(-inf, 80), (80, 90), (90, inf)]."""
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise argparse.ArgumentTypeError(f"band {part!r} is not lo:hi")
        try:
            out.append((float(lo), float(hi)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"band {part!r} is not numeric") from None
    return out


def _named(text: str) -> tuple[str, str]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {text!r}")
    return name, path


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _event(text: str) -> ingest.StepEvent:
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError(f"event must be CUSTOMER:HOUR:DEPTH[:DURATION], got {text!r}")
    try:
        c, h, d = int(parts[0]), int(parts[1]), float(parts[2])
        dur = int(parts[3]) if len(parts) == 4 else 1
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad event {text!r}") from None
    return ingest.StepEvent(c, h, d, dur)


def _stamp(args) -> str | None:
    return None if args.deterministic else datetime.now(timezone.utc).isoformat(timespec="seconds")


def _load_profiles(path) -> list[load_model.LoadProfile]:
    profiles, _ = ingest.read_profiles(path, PIPELINE_POLICY)
    if not profiles:
        raise InvalidArgumentError(f"{path}: no profiles")
    return profiles


def _write_json(path, obj) -> None:
    store.atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8"))


# --- subcommands -------------------------------------------------------------


def cmd_ingest(args) -> None:
    policy = ingest.IngestPolicy(
        gap_fill=args.gap_fill,
        negative=args.negative,
        alignment=ingest.parse_alignment(args.align),
        trim_to_weeks=args.trim_to_weeks,
    )
    profiles, report = ingest.read_profiles(args.input, policy)
    ingest.write_profiles(profiles, args.output)
    if args.report:
        store.atomic_write(args.report, report.to_json().encode("utf-8"))
    log.info("ingested %d meters, %d rows", len(profiles), report.rows)


def cmd_compress(args) -> None:
    profiles = _load_profiles(args.profiles)
    models = worker_map(lambda p: load_model.build_model(p, args.level), profiles)
    fleet = store.WaveletFleetModel.from_models(models)
    store.save_model(fleet, args.output, args.format)
    log.info("stored %d coefficients for %d customers", fleet.stored_values, len(models))


def cmd_synthesize(args) -> None:
    model = store.load_model(args.model)
    if not isinstance(model, store.WaveletFleetModel):
        raise InvalidArgumentError(f"{args.model} holds a classified model; use 'reconstruct'")
    ingest.write_profiles(worker_map(load_model.synthesize, model.models), args.output)


def cmd_reconstruct(args) -> None:
    model = store.load_model(args.model)
    if not isinstance(model, classification.ClassifiedLoadModel):
        raise InvalidArgumentError(f"{args.model} holds a wavelet model; use 'synthesize'")
    ids = args.customer or list(model.customer_ids)
    ingest.write_profiles([classification.reconstruct_profile(model, c) for c in ids], args.output)


def fleet_metrics(original, synthesized, pe_bins) -> list[load_model.FidelityMetrics]:
    by_id = {p.customer_id: p for p in synthesized}
    missing = [p.customer_id for p in original if p.customer_id not in by_id]
    if missing or len(by_id) != len(original):
        raise InvalidArgumentError(f"customer sets differ (e.g. {missing[:3]})")
    return worker_map(lambda p: load_model.compute_metrics(p, by_id[p.customer_id], pe_bins), original)


def cmd_metrics(args) -> None:
    original = _load_profiles(args.original)
    synthesized = _load_profiles(args.synthesized)
    metrics = fleet_metrics(original, synthesized, args.pe_bins)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "fidelity.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["customer_id", "se_pct", "e_mean", "e_std", "e_max", "pe_undefined"])
        for m in metrics:
            w.writerow([m.customer_id, repr(m.se), repr(m.e_mean), repr(m.e_std), repr(float(m.hourly_errors.max())), m.pe_undefined_count])
    pe_counts = np.sum([m.pe_histogram.counts for m in metrics], axis=0)
    edges = metrics[0].pe_histogram.edges
    with open(out / "fidelity_hist_pe.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], pe_counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
    all_e = np.concatenate([m.hourly_errors for m in metrics])
    e_counts, e_edges = np.histogram(all_e, bins=load_model.DEFAULT_E_BIN_COUNT)
    with open(out / "fidelity_hist_e.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(e_edges[:-1], e_edges[1:], e_counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
    rollup = evaluator.rollup_fidelity(metrics, args.se_bands, args.pe_bands)
    report = evaluator.EvaluationReport(candidates={}, fidelity={"synthesized": rollup}, generated_at=_stamp(args))
    body = report.to_dict()
    body["e_moments"] = {"mean": float(all_e.mean()), "std": float(all_e.std())}
    _write_json(out / "fidelity.json", body)


def cmd_classify(args) -> None:
    profiles = _load_profiles(args.profiles)
    features = classification.extract_features(profiles, args.feature_level, map_fn=worker_map)
    result = classification.kmeans(features, args.k, args.seed, args.max_iter, args.tol, args.restarts)
    model = classification.build_classified_model(profiles, result)
    store.save_model(model, args.output, args.format)
    clusters = args.clusters or f"{args.output}.clusters.json"
    _write_json(
        clusters,
        {
            "generated_at": _stamp(args),
            "k": result.k,
            "seed": result.seed,
            "restarts": args.restarts,
            "feature_level": args.feature_level,
            "iterations": result.iterations,
            "inertia": result.inertia,
            "class_sizes": result.class_sizes(),
            "assignments": result.assignments,
            "centroids": result.centroids.tolist(),
        },
    )
    log.info("class sizes %s", result.class_sizes())


def _read_grouping(path) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["meter_id", "group"]:
        raise ingest.SchemaError(f"{path}: header must be meter_id,group")
    return {r[0]: r[1] for r in rows[1:] if r}


def cmd_evaluate(args) -> None:
    reference = _load_profiles(args.reference)
    grouping = _read_grouping(args.groups) if args.groups else None
    candidates, fidelity = {}, {}
    for name, path in args.candidate:
        fleet = _load_profiles(path)
        candidates[name] = fleet
        fidelity[name] = evaluator.rollup_fidelity(fleet_metrics(reference, fleet, args.bins), args.se_bands, args.pe_bands)
    original_values = sum(len(p) for p in reference)
    compression = {name: store.compression_stats(store.load_model(path), original_values) for name, path in args.model}
    report = evaluator.evaluate(reference, candidates, grouping, args.bins, fidelity, compression, args.deterministic)
    evaluator.write_report(report, args.output)


def cmd_synth_data(args) -> None:
    spec = ingest.SyntheticFleetSpec(
        archetypes=tuple(args.archetypes.split(",")),
        customers=args.customers,
        weeks=args.weeks,
        noise=args.noise,
        events=tuple(args.event or ()),
    )
    profiles = ingest.generate_synthetic(spec, args.seed)
    ingest.write_profiles(profiles, args.output)
    if args.groups_out:
        labels = [x for x in args.phases.split(",") if x]
        with open(args.groups_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["meter_id", "group"])
            for i, p in enumerate(profiles):
                w.writerow([p.customer_id, labels[i % len(labels)]])
    if args.truth_out:
        with open(args.truth_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["meter_id", "archetype"])
            for i, p in enumerate(profiles):
                w.writerow([p.customer_id, ingest.archetype_of(i, spec)])


def cmd_info(args) -> None:
    print(json.dumps(store.model_info(args.model), indent=2, sort_keys=True))


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # flags accepted before or after the subcommand; the subcommand copy must
    # not reset a value given before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--deterministic", action="store_true", help="omit wall-clock timestamps from outputs")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub_common = argparse.ArgumentParser(add_help=False)
    sub_common.add_argument("--deterministic", action="store_true", default=argparse.SUPPRESS, help="omit wall-clock timestamps from outputs")
    sub_common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr")

    p = argparse.ArgumentParser(
        prog="amiwav",
        description="Wavelet load models from hourly smart-meter data.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        parents=[common],
    )
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_, parents=[sub_common], formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sp.set_defaults(func=fn)
        return sp

    def fidelity_flags(sp):
        sp.add_argument("--se-bands", type=_bands, default=list(evaluator.DEFAULT_SE_BANDS), help="SE bands lo:hi,... in %%; [lo,hi), last band closed")
        sp.add_argument("--pe-bands", type=_bands, default=list(evaluator.DEFAULT_PE_BANDS), help="PE bands lo:hi,... in %%")

    sp = add("ingest", cmd_ingest, "validate raw meter CSV and write a profiles file")
    sp.add_argument("input")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--gap-fill", choices=ingest.GAP_POLICIES, default="fail")
    sp.add_argument("--negative", choices=ingest.NEGATIVE_POLICIES, default="fail")
    sp.add_argument("--align", default="any", help="'any' or WEEKDAY:HH, e.g. mon:00; leading hours before it are trimmed")
    sp.add_argument("--trim-to-weeks", action="store_true", help="truncate to whole weeks from the aligned start")
    sp.add_argument("--report", help="write the per-meter ingest report (JSON) here")

    sp = add("compress", cmd_compress, "build level-J wavelet load models (approximation coefficients only)")
    sp.add_argument("profiles")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--level", type=_positive, default=load_model.DEFAULT_LEVEL, help="decomposition level J")
    sp.add_argument("--format", choices=("binary", "json"), default="binary")

    sp = add("synthesize", cmd_synthesize, "synthesize profiles from a wavelet model")
    sp.add_argument("model")
    sp.add_argument("-o", "--output", required=True)

    sp = add("metrics", cmd_metrics, "SE, E(n), PE(n) of synthesized vs original profiles")
    sp.add_argument("original")
    sp.add_argument("synthesized")
    sp.add_argument("-o", "--output", required=True, help="output directory")
    sp.add_argument("--pe-bins", type=_floats, default=list(load_model.DEFAULT_PE_BINS), help="PE histogram edges in %%; hours with a zero reading are counted separately")
    fidelity_flags(sp)

    sp = add(
        "classify",
        cmd_classify,
        "k-means over 2D-DWT vertical coefficients and build the classified model "
        "(k-means++ seeding, assignment ties go to the lowest class index)",
    )
    sp.add_argument("profiles")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--k", type=_positive, default=classification.DEFAULT_K)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--restarts", type=_positive, default=1, help="keep the best of R runs by inertia")
    sp.add_argument("--feature-level", type=int, choices=(3, 4), default=classification.DEFAULT_FEATURE_LEVEL)
    sp.add_argument("--max-iter", type=_positive, default=300)
    sp.add_argument("--tol", type=float, default=0.0, help="stop when every centroid moves less than this")
    sp.add_argument("--clusters", help="clustering JSON path; None writes OUTPUT.clusters.json")
    sp.add_argument("--format", choices=("binary", "json"), default="binary")

    sp = add("reconstruct", cmd_reconstruct, "rebuild profiles from a classified model")
    sp.add_argument("model")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--customer", action="append", help="only this customer (repeatable)")

    sp = add("evaluate", cmd_evaluate, "compare candidate fleets with the reference at aggregate level")
    sp.add_argument("--reference", required=True)
    sp.add_argument("--candidate", type=_named, action="append", required=True, metavar="NAME=PATH")
    sp.add_argument("--model", type=_named, action="append", default=[], metavar="NAME=PATH", help="model files for compression stats")
    sp.add_argument("--groups", help="CSV meter_id,group (e.g. phase labels)")
    sp.add_argument("--bins", type=_floats, default=list(load_model.DEFAULT_PE_BINS), help="|hourly %% error| histogram edges")
    sp.add_argument("-o", "--output", required=True, help="output directory")
    fidelity_flags(sp)

    sp = add("synth-data", cmd_synth_data, "generate a synthetic fleet with planted archetypes")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--customers", type=_positive, default=100)
    sp.add_argument("--weeks", type=_positive, default=31)
    sp.add_argument("--noise", type=float, default=0.02)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--archetypes", default=",".join(ingest.ARCHETYPES))
    sp.add_argument("--event", type=_event, action="append", metavar="C:H:D[:DUR]", help="inject a step drop")
    sp.add_argument("--groups-out", help="also write a meter_id,group CSV")
    sp.add_argument("--phases", default="A,B,C", help="labels assigned round-robin in --groups-out")
    sp.add_argument("--truth-out", help="also write the planted archetype of each meter")

    sp = add("info", cmd_info, "print a model file's header and stored value count")
    sp.add_argument("model")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except (AmiwavError, OSError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Full-size fleet run: both load models on a synthetic 323 x 5208 fleet.

Prints compression, SE and PE banding for each model, the class sizes, and
per-phase peak and energy comparisons. Everything runs in-process through the
library API; use the CLI for the same pipeline on files.

    python3 scripts/fleet_experiment.py --customers 323 --seed 0 --json out.json
"""

from __future__ import annotations

import argparse
import json
import time

from amiwav import evaluator as ev
from amiwav.classification import build_classified_model, extract_features, kmeans, reconstruct_all
from amiwav.ingest import SyntheticFleetSpec, archetype_of, generate_synthetic
from amiwav.load_model import build_model, compute_metrics, synthesize
from amiwav.store import WaveletFleetModel, compression_stats


def band_label(lo, hi):
    lo = "-inf" if lo == float("-inf") else f"{lo:g}"
    hi = "inf" if hi == float("inf") else f"{hi:g}"
    return f"[{lo}, {hi})"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--customers", type=int, default=323)
    ap.add_argument("--weeks", type=int, default=31)
    ap.add_argument("--noise", type=float, default=0.02)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--level", type=int, default=3, help="wavelet model level J")
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--feature-level", type=int, default=4, choices=(3, 4))
    ap.add_argument("--se-bands", choices=("default", "narrow-top"), default="default",
                    help="narrow-top closes the top band at 99.998%%")
    ap.add_argument("--json", help="also dump the results here")
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    spec = SyntheticFleetSpec(customers=args.customers, weeks=args.weeks, noise=args.noise)
    fleet = generate_synthetic(spec, seed=args.seed)
    phases = {p.customer_id: "ABC"[i % 3] for i, p in enumerate(fleet)}
    raw = sum(len(p) for p in fleet)

    wavelet = WaveletFleetModel.from_models([build_model(p, args.level) for p in fleet])
    synth = [synthesize(m) for m in wavelet.models]
    clustering = kmeans(extract_features(fleet, args.feature_level), args.k, seed=args.seed)
    classified = build_classified_model(fleet, clustering)
    rebuilt = reconstruct_all(classified)

    se_bands = ev.DEFAULT_SE_BANDS if args.se_bands == "default" else ev.NARROW_TOP_SE_BANDS
    rollups = {
        name: ev.rollup_fidelity([compute_metrics(p, q) for p, q in zip(fleet, cands)], se_bands)
        for name, cands in (("wavelet", synth), ("classified", rebuilt))
    }
    comps = {"wavelet": compression_stats(wavelet, raw), "classified": compression_stats(classified, raw)}
    report = ev.evaluate(fleet, {"wavelet": synth, "classified": rebuilt}, phases,
                         fidelity=rollups, compression=comps, deterministic=True)
    elapsed = time.perf_counter() - t0

    print(f"fleet: {len(fleet)} customers x {len(fleet[0])} hours = {raw} readings, seed {args.seed}, noise {args.noise}")
    print("\ncompression")
    print(f"  {'model':<11}{'values':>10}{'change':>10}")
    print(f"  {'raw':<11}{raw:>10}{'':>10}")
    for name, c in comps.items():
        print(f"  {name:<11}{c.model_value_count:>10}{c.formatted():>10}")

    print("\nSE bands (share of profiles)")
    for name, r in rollups.items():
        cells = "  ".join(f"{band_label(lo, hi)} {p:5.1f}%" for (lo, hi), p in zip(r.se_bands, r.se_percentages))
        print(f"  {name:<11}{cells}")

    print("\nhourly PE bands (share of defined hours)")
    for name, r in rollups.items():
        cells = "  ".join(f"{band_label(lo, hi)} {100 * f:5.1f}%" for (lo, hi), f in zip(r.pe_bands, r.pe_fractions))
        print(f"  {name:<11}{cells}  undefined {r.pe_undefined}")

    print("\nclasses")
    for j in range(args.k):
        members = [i for i, lab in enumerate(clustering.labels) if lab == j]
        kinds = sorted({archetype_of(i, spec) for i in members})
        print(f"  class {j}: {len(members):4d} customers  {', '.join(kinds)}")

    print("\nper-phase peak (kW @ hour) and energy error")
    print(f"  {'model':<11}{'phase':<7}{'reference':>18}{'model':>18}{'peak err':>10}{'energy err':>12}")
    for name, groups in report.candidates.items():
        for g in groups:
            ref = f"{g.reference_peak:.2f} @ {g.reference_peak_hour}"
            cand = f"{g.candidate_peak:.2f} @ {g.candidate_peak_hour}"
            print(f"  {name:<11}{g.label:<7}{ref:>18}{cand:>18}{g.peak_pct_error:>9.2f}%{g.energy_pct_error:>11.2e}%")
    print(f"\n{elapsed:.1f} s")

    if args.json:
        body = report.to_dict()
        body["class_sizes"] = clustering.class_sizes()
        with open(args.json, "w") as fh:
            json.dump(body, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()

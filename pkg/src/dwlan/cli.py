"""Command-line experiment orchestration and result persistence.

Verbs:
  validate  dry-run a config file and print resolved values
  run       one experiment at the configured densities
  sweep     density sweep producing one result row per (scheme, density)
  dynamic   growing-network run producing one row per (scheme, epoch)

All randomness flows from the config's base seed (or --seed); rerunning
with the same inputs writes byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import subprocess
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ResolvedConfig, load_config, validate_config
from .simcore import MobilityParams, percentile_nearest_rank, run_dynamic, run_monte_carlo

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "scheme",
    "density",
    "n_sta",
    "n_ap",
    "agg_mbps",
    "util_sum",
    "p10",
    "p50",
    "p90",
    "ci_lo",
    "ci_hi",
    "seed",
)

CDF_COLUMNS = ("scheme", "density", "seed", "user_throughput_mbps")


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def build_tag() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return "unknown"


def write_rows(path: Path, columns, rows, append: bool = False) -> None:
    mode = "a" if append and path.exists() else "w"
    with open(path, mode, newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if mode == "w":
            writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_manifest(out_dir: Path, cfg: ResolvedConfig, base_seed: int, verb: str) -> None:
    manifest = {
        "config": cfg.to_manifest_dict(),
        "base_seed": base_seed,
        "verb": verb,
        "build_tag": build_tag(),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _existing_cells(path: Path) -> set[tuple[str, str]]:
    if not path.exists():
        return set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return {(row["scheme"], row["density"]) for row in reader}


def _result_rows(cfg, density, density_idx, schemes, n_realizations, n_slots, base_seed):
    """One sweep cell: all schemes at one density, common random numbers."""
    template = cfg.template(eta_n=density)
    seed0 = base_seed + density_idx * 100_000
    results = run_monte_carlo(
        template,
        schemes,
        n_realizations,
        n_slots,
        seed0,
        workers=int(cfg["simulation"]["workers"]),
        arrival_rate_per_slot=float(cfg["simulation"]["arrival_rate_per_slot"]),
        backoff_mode=str(cfg["simulation"]["backoff_mode"]),
    )
    rows = []
    cdf_rows = []
    for scheme in schemes:
        res = results[scheme]
        lo, hi = res.agg_ci
        rows.append(
            (
                scheme,
                float(density),
                float(np.mean(res.n_sta)) if res.n_sta.size else 0.0,
                float(np.mean(res.n_ap)) if res.n_ap.size else 0.0,
                res.agg_mean_mbps,
                float(np.mean(res.util_sums)),
                float(np.mean(res.p10)) if res.p10.size else 0.0,
                float(np.mean(res.p50)) if res.p50.size else 0.0,
                float(np.mean(res.p90)) if res.p90.size else 0.0,
                lo,
                hi,
                seed0,
            )
        )
        for val in res.user_pool_mbps:
            cdf_rows.append((scheme, float(density), seed0, float(val)))
    return rows, cdf_rows


def cmd_validate(args) -> int:
    print(validate_config(args.config))
    return 0


def _common_run_params(cfg, args):
    sim = cfg["simulation"]
    schemes = tuple(args.schemes.split(",")) if args.schemes else tuple(sim["schemes"])
    for s in schemes:
        if s not in ("gaa", "ssf", "greedy", "smartassoc", "bpf"):
            raise ConfigError(f"unknown scheme {s!r} on command line")
    n_realizations = args.realizations or int(sim["n_realizations"])
    n_slots = args.slots or int(sim["n_slots"])
    base_seed = args.seed if args.seed is not None else int(sim["base_seed"])
    out_dir = Path(args.out or str(cfg["output"]["dir"]))
    out_dir.mkdir(parents=True, exist_ok=True)
    return schemes, n_realizations, n_slots, base_seed, out_dir


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    schemes, n_real, n_slots, base_seed, out_dir = _common_run_params(cfg, args)
    density = float(cfg["topology"]["eta_n"])
    rows, cdf_rows = _result_rows(cfg, density, 0, schemes, n_real, n_slots, base_seed)
    write_rows(out_dir / "results.csv", CSV_COLUMNS, rows)
    write_rows(out_dir / "cdf.csv", CDF_COLUMNS, cdf_rows)
    write_manifest(out_dir, cfg, base_seed, "run")
    logger.info("wrote %s", out_dir / "results.csv")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    schemes, n_real, n_slots, base_seed, out_dir = _common_run_params(cfg, args)
    densities = [float(d) for d in cfg["sweep"]["densities"]]
    results_path = out_dir / "results.csv"
    done = _existing_cells(results_path) if args.resume else set()
    if not args.resume and results_path.exists():
        results_path.unlink()
    all_cdf = []
    for di, density in enumerate(densities):
        pending = [s for s in schemes if (s, _fmt(float(density))) not in done]
        if not pending:
            logger.info("density %.3f already complete, skipping", density)
            continue
        rows, cdf_rows = _result_rows(cfg, density, di, pending, n_real, n_slots, base_seed)
        write_rows(results_path, CSV_COLUMNS, rows, append=True)
        all_cdf.extend(cdf_rows)
        logger.info("density %.3f done (%d schemes)", density, len(pending))
    if all_cdf:
        write_rows(out_dir / "cdf.csv", CDF_COLUMNS, all_cdf)
    write_manifest(out_dir, cfg, base_seed, "sweep")
    return 0


def cmd_dynamic(args) -> int:
    cfg = load_config(args.config)
    schemes, n_real_cfg, _, base_seed, out_dir = _common_run_params(cfg, args)
    dyn = cfg["dynamic"]
    n_real = args.realizations or int(dyn["n_realizations"])
    epochs = int(dyn["epochs"])
    epoch_slots = args.slots or int(dyn["epoch_slots"])
    n0, n_final = int(dyn["initial_stas"]), int(dyn["final_stas"])
    mobility = MobilityParams(
        speed_min_mps=float(dyn["speed_min_mps"]),
        speed_max_mps=float(dyn["speed_max_mps"]),
        mobile_fraction=float(dyn["mobile_fraction"]),
    )
    schedule = arrival_schedule(n0, n_final, epochs)
    n_ref = float(cfg["topology"]["n_ref"])

    dyn_schemes = ["gda" if s == "gaa" else s for s in schemes]
    # epoch index -> scheme -> per-replicate samples
    agg: dict[int, dict[str, list[float]]] = {
        e: {s: [] for s in dyn_schemes} for e in range(epochs)
    }
    users: dict[int, dict[str, list[np.ndarray]]] = {
        e: {s: [] for s in dyn_schemes} for e in range(epochs)
    }
    sizes: dict[int, list[int]] = {e: [] for e in range(epochs)}
    n_aps = int(dyn["n_aps"])
    for rep in range(n_real):
        seed = base_seed + rep
        scenario0 = cfg.template().build_fixed(n0, n_aps, seed)
        for scheme in dyn_schemes:
            series = run_dynamic(
                scenario0,
                scheme,
                schedule,
                mobility,
                seed,
                epoch_slots=epoch_slots,
                arrival_rate_per_slot=float(cfg["simulation"]["arrival_rate_per_slot"]),
                backoff_mode=str(cfg["simulation"]["backoff_mode"]),
                check_gaa_equality=False,
            )
            for em in series:
                agg[em.epoch][scheme].append(em.aggregate_throughput_bps / 1e6)
                users[em.epoch][scheme].append(em.per_sta_throughput_bps / 1e6)
                if scheme == dyn_schemes[0]:
                    sizes[em.epoch].append(em.n_stas)

    rows = []
    for scheme in dyn_schemes:
        for e in range(epochs):
            samples = np.array(agg[e][scheme])
            pooled = np.concatenate(users[e][scheme])
            mean = float(samples.mean())
            half = (
                1.96 * float(samples.std(ddof=1)) / np.sqrt(samples.size)
                if samples.size > 1
                else 0.0
            )
            n_sta = float(np.mean(sizes[e]))
            rows.append(
                (
                    scheme,
                    n_sta / n_ref,
                    n_sta,
                    float(n_aps),
                    mean,
                    0.0,
                    percentile_nearest_rank(pooled, 10),
                    percentile_nearest_rank(pooled, 50),
                    percentile_nearest_rank(pooled, 90),
                    mean - half,
                    mean + half,
                    base_seed,
                )
            )
    write_rows(out_dir / "dynamic.csv", CSV_COLUMNS, rows)
    write_manifest(out_dir, cfg, base_seed, "dynamic")
    logger.info("wrote %s", out_dir / "dynamic.csv")
    return 0


def arrival_schedule(initial: int, final: int, epochs: int, seed: int | None = None) -> list[int]:
    """Admissions per epoch taking the network from ``initial`` to ``final``.

    Epoch 0 admits nothing (the starting population is already placed);
    the remaining growth is spread as evenly as integer counts allow, or
    randomized when a seed is given.
    """
    growth = final - initial
    if epochs < 2 or growth <= 0:
        return [0] * max(1, epochs)
    if seed is None:
        base = growth // (epochs - 1)
        extra = growth - base * (epochs - 1)
        out = [0] + [base + (1 if i < extra else 0) for i in range(epochs - 1)]
        return out
    rng = np.random.default_rng(seed)
    cuts = rng.multinomial(growth, [1.0 / (epochs - 1)] * (epochs - 1))
    return [0] + [int(c) for c in cuts]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dwlan",
        description="Dense-WLAN association and CSMA/CA throughput workbench",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="INI config or JSON manifest")
        p.add_argument("--seed", type=int, default=None, help="override base seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--realizations", type=int, default=None)
        p.add_argument("--slots", type=int, default=None)
        p.add_argument("--schemes", default=None, help="comma list, e.g. gaa,ssf")

    p_val = sub.add_parser("validate", help="check a config and print resolved values")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(fn=cmd_validate)

    p_run = sub.add_parser("run", help="single-density experiment")
    add_common(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="density sweep")
    add_common(p_sweep)
    p_sweep.add_argument("--resume", action="store_true", help="skip finished sweep cells")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_dyn = sub.add_parser("dynamic", help="growing-network run")
    add_common(p_dyn)
    p_dyn.set_defaults(fn=cmd_dynamic)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

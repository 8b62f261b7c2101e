"""Command-line entry point: ingestion, simulation, sweeps, report files.

Subcommands: simulate-arb, fees, compare, sweep-blocktime, sweep-fee,
synth-gbm. Options may come from flags or a JSON config file (--config);
flags override file values. Every run writes CSV result tables plus a
manifest.json recording parameters, input hashes, and fill counters.

Exit codes: 0 success, 1 runtime failure, 2 configuration/validation
failure. Result tables are deterministic for a given config and seed; only
the manifest's created_utc field differs between reruns.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FitError, InputError
from .feeds import (
    align_to_blocks,
    load_block_timestamps,
    load_klines,
    load_quote_updates,
    quotes_from_prices,
)
from .fees import PositionLedger, accumulate, attribute_fees, load_swap_records
from .pool import PoolState, concentration_scale
from .simulation import (
    DAY_MS,
    DEFAULT_INTERVALS_MS,
    EXTENDED_INTERVALS_MS,
    BlockSchedule,
    blocktime_sweep,
    fee_sweep,
    fees_vs_losses,
    gbm_generate,
    loglog_slope,
    run_arb_sim,
)

SCHEMA_VERSION = 1


# --- output helpers ---------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return "" if math.isnan(value) else repr(value)
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return str(value)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_table(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _sha256(path: str) -> dict:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return {"sha256": digest.hexdigest(), "bytes": os.path.getsize(path)}


def _write_manifest(out_dir: Path, command: str, params: dict, inputs: list[str],
                    counters: dict | None = None, results: dict | None = None) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "command": command,
        "parameters": params,
        "inputs": {name: _sha256(name) for name in inputs},
        "fill_counters": counters or {},
        "results": results or {},
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    _atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))


# --- config ------------------------------------------------------------------

def _merge_config(args: argparse.Namespace) -> dict:
    """Flags override JSON config-file values; None means 'not given'."""
    cfg: dict = {}
    if getattr(args, "config", None):
        _require_file(args.config)
        with open(args.config, "r", encoding="utf-8") as handle:
            try:
                loaded = json.load(handle)
            except json.JSONDecodeError as exc:
                raise InputError(f"bad config file {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise InputError(f"config file {args.config} must hold a JSON object")
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in ("config", "func", "command") or value is None:
            continue
        cfg[key] = value
    return cfg


def _require_file(path: str) -> str:
    if not path or not os.path.isfile(path):
        raise InputError(f"input file does not exist: {path}")
    return path


def _require(cfg: dict, key: str):
    value = cfg.get(key)
    if value is None:
        raise InputError(f"missing required option --{key.replace('_', '-')}")
    return value


def _parse_window(text: str) -> tuple[int, int]:
    try:
        start, end = text.split(":")
        window = (int(start), int(end))
    except ValueError:
        raise InputError(f"bad window {text!r}, expected START_MS:END_MS") from None
    if window[1] <= window[0]:
        raise InputError(f"window is empty: {text}")
    return window


def _parse_list(text, kind=float) -> list:
    if isinstance(text, (list, tuple)):
        return [kind(v) for v in text]
    try:
        return [kind(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise InputError(f"bad list value {text!r}") from None


def _fee_from_bps(cfg: dict) -> float:
    bps = float(_require(cfg, "fee_bps"))
    fee = bps / 1e4
    if not (0.0 <= fee < 1.0):
        raise InputError(f"fee-bps {bps} is outside [0, 10000)")
    return fee


# --- feed / schedule assembly -------------------------------------------------

def _load_feed(cfg: dict):
    """Quote series + metadata from --quotes (bid/ask) or --klines (mid)."""
    pair = cfg.get("pair", "")
    if cfg.get("quotes"):
        quotes = load_quote_updates(_require_file(cfg["quotes"]), pair=pair, source="quotes")
        return quotes, "bid_ask", [cfg["quotes"]], {}
    if cfg.get("klines"):
        prices = load_klines(_require_file(cfg["klines"]), pair=pair, source="klines")
        if cfg.get("blocks"):
            blocks = load_block_timestamps(_require_file(cfg["blocks"]))
            aligned, fills = align_to_blocks(prices, blocks)
            quotes = quotes_from_prices(aligned)
            return quotes, "mid", [cfg["klines"], cfg["blocks"]], {
                "block_price_fills": fills, "blocks": int(len(blocks)),
            }
        return quotes_from_prices(prices), "mid", [cfg["klines"]], {}
    raise InputError("a price feed is required: give --quotes or --klines")


def _make_schedule(cfg: dict, quotes) -> BlockSchedule:
    if cfg.get("blocks"):
        return BlockSchedule.from_blocks(load_block_timestamps(_require_file(cfg["blocks"])))
    if cfg.get("interval_ms"):
        interval = int(cfg["interval_ms"])
        if cfg.get("window"):
            window = _parse_window(cfg["window"])
        else:
            window = (int(quotes.timestamps[0]), int(quotes.timestamps[-1]))
        return BlockSchedule.fixed(interval, *window)
    raise InputError("a schedule is required: give --blocks or --interval-ms")


def _initial_state(cfg: dict, quotes, schedule, fee: float) -> PoolState:
    price = cfg.get("initial_price")
    if price is None:
        idx = int(np.searchsorted(quotes.timestamps, schedule.timestamps[0], side="right")) - 1
        if idx < 0:
            raise InputError("no quote at or before the first schedule instant")
        price = 0.5 * (float(quotes.bids[idx]) + float(quotes.asks[idx]))
    price = float(price)
    if price <= 0:
        raise InputError(f"initial price must be positive, got {price}")
    reserve_x = float(cfg.get("initial_reserve_x", 1.0))
    return PoolState(reserve_x, reserve_x * price, fee)


def _concentration(cfg: dict) -> float:
    k = float(cfg.get("concentration_k", 1.0))
    if k < 1.0:
        raise InputError(f"concentration-k must be >= 1, got {k}")
    return k


def _out_dir(cfg: dict) -> Path:
    out = Path(_require(cfg, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- subcommands ---------------------------------------------------------------

def cmd_simulate_arb(cfg: dict) -> int:
    out = _out_dir(cfg)
    fee = _fee_from_bps(cfg)
    factor = _concentration(cfg)
    quotes, feed_kind, inputs, counters = _load_feed(cfg)
    schedule = _make_schedule(cfg, quotes)
    initial = _initial_state(cfg, quotes, schedule, fee)
    run = run_arb_sim(initial, quotes, schedule)
    if factor != 1.0:
        run = run.scaled(factor)

    loss_by_instant = np.zeros(len(schedule.timestamps))
    profit_by_instant = np.zeros(len(schedule.timestamps))
    event_idx = np.searchsorted(schedule.timestamps, run.timestamps)
    loss_by_instant[event_idx] = run.losses
    profit_by_instant[event_idx] = run.profits
    cumulative = 1.0 - np.cumprod(1.0 - loss_by_instant)
    _write_table(
        out / "losses.csv",
        ["schema_version", "timestamp_ms", "lp_relative_loss", "arb_profit",
         "cumulative_relative_loss"],
        (
            (SCHEMA_VERSION, ts, loss, profit, cum)
            for ts, loss, profit, cum in zip(
                schedule.timestamps, loss_by_instant, profit_by_instant, cumulative
            )
        ),
    )
    _write_manifest(
        out, "simulate-arb",
        {"pair": cfg.get("pair", ""), "fee": fee, "feed_kind": feed_kind,
         "concentration_k": factor, "interval_ms": schedule.interval_ms,
         "n_instants": int(run.n_instants), "seed": cfg.get("seed")},
        inputs, counters,
        {"total_relative_loss": run.total_relative_loss,
         "n_events": int(len(run.losses)), "window_ms": run.window_ms},
    )
    return 0


def cmd_fees(cfg: dict) -> int:
    out = _out_dir(cfg)
    factor = _concentration(cfg)
    swaps_path = _require_file(_require(cfg, "swaps"))
    records = load_swap_records(swaps_path)
    liquidity = float(cfg.get("position_liquidity", 1.0))
    per_block = bool(cfg.get("per_block", False))
    ledger = attribute_fees(records, liquidity, per_block=per_block)
    returns = concentration_scale(ledger.returns, factor)
    growth = np.cumprod(1.0 + returns) if len(returns) else np.array([])
    _write_table(
        out / "fee_returns.csv",
        ["schema_version", "timestamp_ms", "relative_fee_return", "cumulative_growth"],
        (
            (SCHEMA_VERSION, ts, r, g)
            for ts, r, g in zip(ledger.timestamps, returns, growth)
        ),
    )
    total_growth = float(growth[-1]) if len(growth) else 1.0
    _write_manifest(
        out, "fees",
        {"pair": cfg.get("pair", ""), "position_liquidity": liquidity,
         "per_block": per_block, "concentration_k": factor},
        [swaps_path], {"n_records": len(records)},
        {"cumulative_fee_return": total_growth - 1.0, "n_periods": int(len(returns))},
    )
    return 0


def cmd_compare(cfg: dict) -> int:
    out = _out_dir(cfg)
    fee = _fee_from_bps(cfg)
    factor = _concentration(cfg)
    swaps_path = _require_file(_require(cfg, "swaps"))
    records = load_swap_records(swaps_path)
    liquidity = float(cfg.get("position_liquidity", 1.0))
    ledger = attribute_fees(records, liquidity, per_block=bool(cfg.get("per_block", False)))

    quotes, feed_kind, inputs, counters = _load_feed(cfg)
    schedule = _make_schedule(cfg, quotes)
    initial = _initial_state(cfg, quotes, schedule, fee)
    run = run_arb_sim(initial, quotes, schedule)
    if factor != 1.0:
        run = run.scaled(factor)
        ledger = accumulate(
            PositionLedger(liquidity),
            concentration_scale(ledger.returns, factor),
            ledger.timestamps,
        )
    window_ms = int(float(cfg.get("ratio_window_days", 30)) * DAY_MS)
    report = fees_vs_losses(ledger, run, window_ms)
    _write_table(
        out / "comparison.csv",
        ["schema_version", "timestamp_ms", "fee_return", "loss_return",
         "cumulative_difference", "trailing_ratio"],
        (
            (SCHEMA_VERSION, ts, f, l, d, r)
            for ts, f, l, d, r in zip(
                report.timestamps, report.fee_returns, report.loss_returns,
                report.cumulative_difference, report.trailing_ratio,
            )
        ),
    )
    _write_manifest(
        out, "compare",
        {"pair": cfg.get("pair", ""), "fee": fee, "feed_kind": feed_kind,
         "concentration_k": factor, "position_liquidity": liquidity,
         "ratio_window_ms": window_ms},
        inputs + [swaps_path], counters, report.totals,
    )
    return 0


def _write_sweep(out: Path, sweep, fit_range) -> dict:
    try:
        slope, residual = loglog_slope(sweep, fit_range)
        fit = {"slope": slope, "residual": residual,
               "fit_range": list(fit_range) if fit_range else
               [float(sweep.values[0]), float(sweep.values[-1])]}
    except FitError as exc:
        fit = {"slope": None, "residual": None, "error": str(exc)}
    _write_table(
        out / "sweep.csv",
        ["schema_version", sweep.parameter, "total_relative_loss",
         "annualized_loss", "n_events"],
        (
            (SCHEMA_VERSION, v, t, a, n)
            for v, t, a, n in zip(
                sweep.values, sweep.total_losses, sweep.annualized_losses, sweep.n_events
            )
        ),
    )
    return fit


def cmd_sweep_blocktime(cfg: dict) -> int:
    out = _out_dir(cfg)
    fee = _fee_from_bps(cfg)
    quotes, feed_kind, inputs, counters = _load_feed(cfg)
    if cfg.get("intervals_ms"):
        intervals = _parse_list(cfg["intervals_ms"], int)
    elif cfg.get("extended"):
        intervals = list(EXTENDED_INTERVALS_MS)
    else:
        intervals = list(DEFAULT_INTERVALS_MS)
    window = _parse_window(cfg["window"]) if cfg.get("window") else None
    schedule_probe = BlockSchedule.fixed(
        intervals[0],
        *(window or (int(quotes.timestamps[0]), int(quotes.timestamps[-1]))),
    )
    initial = _initial_state(cfg, quotes, schedule_probe, fee)
    sweep = blocktime_sweep(initial, quotes, intervals, window)
    fit_range = None
    if cfg.get("fit_range"):
        lo, hi = _parse_window(cfg["fit_range"])
        fit_range = (float(lo), float(hi))
    fit = _write_sweep(out, sweep, fit_range)
    _write_manifest(
        out, "sweep-blocktime",
        {"pair": cfg.get("pair", ""), "fee": fee, "feed_kind": feed_kind,
         "intervals_ms": intervals, "window": list(window) if window else None,
         "seed": cfg.get("seed"), "fit": fit},
        inputs, counters,
        {"total_losses": [float(v) for v in sweep.total_losses]},
    )
    return 0


def cmd_sweep_fee(cfg: dict) -> int:
    out = _out_dir(cfg)
    quotes, feed_kind, inputs, counters = _load_feed(cfg)
    interval = int(_require(cfg, "interval_ms"))
    fees_bps = _parse_list(cfg.get("fees_bps", "10,20,30,50,100"), float)
    fees = [bps / 1e4 for bps in fees_bps]
    window = _parse_window(cfg["window"]) if cfg.get("window") else None
    price = cfg.get("initial_price")
    if price is None:
        price = 0.5 * (float(quotes.bids[0]) + float(quotes.asks[0]))
    reserve_x = float(cfg.get("initial_reserve_x", 1.0))
    sweep = fee_sweep(reserve_x, reserve_x * float(price), quotes, interval, fees, window)
    fit_range = None
    if cfg.get("fit_range"):
        lo, hi = cfg["fit_range"].split(":")
        fit_range = (float(lo) / 1e4, float(hi) / 1e4)
    fit = _write_sweep(out, sweep, fit_range)
    _write_manifest(
        out, "sweep-fee",
        {"pair": cfg.get("pair", ""), "interval_ms": interval,
         "fees_bps": fees_bps, "feed_kind": feed_kind,
         "window": list(window) if window else None, "seed": cfg.get("seed"),
         "fit": fit},
        inputs, counters,
        {"total_losses": [float(v) for v in sweep.total_losses]},
    )
    return 0


def cmd_synth_gbm(cfg: dict) -> int:
    out = _out_dir(cfg)
    sigma = float(_require(cfg, "sigma"))
    series = gbm_generate(
        sigma=sigma,
        mu=float(cfg.get("mu", 0.0)),
        step_ms=int(_require(cfg, "step_ms")),
        horizon_ms=int(_require(cfg, "horizon_ms")),
        seed=int(cfg.get("seed", 0)),
        price0=float(cfg.get("price0", 1.0)),
        start_ms=int(cfg.get("start_ms", 0)),
        pair=cfg.get("pair", "synthetic"),
    )
    fmt = cfg.get("format", "klines")
    # synthetic feeds are written in the exact ingestion schemas so they can
    # be fed straight back into the other subcommands
    if fmt == "klines":
        _write_table(
            out / "gbm_klines.csv",
            ["timestamp_ms", "open", "high", "low", "close", "volume"],
            ((ts, p, p, p, p, 0.0) for ts, p in zip(series.timestamps, series.prices)),
        )
        written = "gbm_klines.csv"
    elif fmt == "quotes":
        _write_table(
            out / "gbm_quotes.csv",
            ["timestamp_ms", "bid", "ask"],
            ((ts, p, p) for ts, p in zip(series.timestamps, series.prices)),
        )
        written = "gbm_quotes.csv"
    else:
        raise InputError(f"unknown synth format {fmt!r}, expected klines or quotes")
    _write_manifest(
        out, "synth-gbm",
        {"pair": cfg.get("pair", "synthetic"), "sigma": sigma,
         "mu": float(cfg.get("mu", 0.0)), "step_ms": int(cfg["step_ms"]),
         "horizon_ms": int(cfg["horizon_ms"]), "seed": int(cfg.get("seed", 0)),
         "price0": float(cfg.get("price0", 1.0)), "format": fmt, "file": written},
        [],
        {"n_points": len(series)},
    )
    return 0


# --- parser --------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--pair", help="trading pair label for outputs")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--seed", type=int, help="random seed (recorded in the manifest)")


def _add_feed(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--quotes", help="bid/ask update CSV (timestamp_ms,bid,ask)")
    sub.add_argument("--klines", help="kline CSV (timestamp_ms,open,...)")
    sub.add_argument("--blocks", help="block timestamp CSV (block_number,timestamp_s)")
    sub.add_argument("--window", help="schedule window START_MS:END_MS")
    sub.add_argument("--initial-price", dest="initial_price", type=float,
                     help="initial pool price (default: first prevailing quote mid)")
    sub.add_argument("--initial-reserve-x", dest="initial_reserve_x", type=float,
                     help="initial X reserve (losses are scale-invariant; default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lvrsim",
        description="Arbitrage-loss and fee-income backtesting for constant-product AMM positions",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate-arb", help="replay arbitrage losses over a schedule")
    _add_common(sim)
    _add_feed(sim)
    sim.add_argument("--fee-bps", dest="fee_bps", type=float, help="pool fee in basis points")
    sim.add_argument("--interval-ms", dest="interval_ms", type=int, help="fixed block interval")
    sim.add_argument("--concentration-k", dest="concentration_k", type=float,
                     help="concentration factor applied to relative losses")
    sim.set_defaults(func=cmd_simulate_arb)

    fees_cmd = commands.add_parser("fees", help="attribute historical swap fees to a position")
    _add_common(fees_cmd)
    fees_cmd.add_argument("--swaps", help="swap record CSV")
    fees_cmd.add_argument("--position-liquidity", dest="position_liquidity", type=float,
                          help="position size in L units (default 1)")
    fees_cmd.add_argument("--per-block", dest="per_block", action="store_const", const=True,
                          help="aggregate swaps per block with end-of-block liquidity")
    fees_cmd.add_argument("--concentration-k", dest="concentration_k", type=float)
    fees_cmd.set_defaults(func=cmd_fees)

    cmp_cmd = commands.add_parser("compare", help="fees versus arbitrage losses over time")
    _add_common(cmp_cmd)
    _add_feed(cmp_cmd)
    cmp_cmd.add_argument("--swaps", help="swap record CSV")
    cmp_cmd.add_argument("--fee-bps", dest="fee_bps", type=float)
    cmp_cmd.add_argument("--interval-ms", dest="interval_ms", type=int)
    cmp_cmd.add_argument("--position-liquidity", dest="position_liquidity", type=float)
    cmp_cmd.add_argument("--per-block", dest="per_block", action="store_const", const=True)
    cmp_cmd.add_argument("--ratio-window-days", dest="ratio_window_days", type=float,
                         help="trailing ratio window in days (default 30)")
    cmp_cmd.add_argument("--concentration-k", dest="concentration_k", type=float)
    cmp_cmd.set_defaults(func=cmd_compare)

    swb = commands.add_parser("sweep-blocktime", help="total loss per block interval")
    _add_common(swb)
    _add_feed(swb)
    swb.add_argument("--fee-bps", dest="fee_bps", type=float)
    swb.add_argument("--intervals-ms", dest="intervals_ms",
                     help="comma-separated interval grid (default 100ms..16s)")
    swb.add_argument("--extended", action="store_const", const=True,
                     help="use the extended grid up to 300s")
    swb.add_argument("--fit-range", dest="fit_range", help="log-log fit range LO:HI in ms")
    swb.set_defaults(func=cmd_sweep_blocktime)

    swf = commands.add_parser("sweep-fee", help="total loss per pool fee")
    _add_common(swf)
    _add_feed(swf)
    swf.add_argument("--interval-ms", dest="interval_ms", type=int)
    swf.add_argument("--fees-bps", dest="fees_bps",
                     help="comma-separated fee grid in bps (default 10,20,30,50,100)")
    swf.add_argument("--fit-range", dest="fit_range", help="log-log fit range LO:HI in bps")
    swf.set_defaults(func=cmd_sweep_fee)

    synth = commands.add_parser("synth-gbm", help="generate a synthetic GBM feed")
    _add_common(synth)
    synth.add_argument("--sigma", type=float, help="volatility per sqrt(year)")
    synth.add_argument("--mu", type=float, help="drift per year (default 0)")
    synth.add_argument("--step-ms", dest="step_ms", type=int)
    synth.add_argument("--horizon-ms", dest="horizon_ms", type=int)
    synth.add_argument("--price0", type=float, help="initial price (default 1)")
    synth.add_argument("--start-ms", dest="start_ms", type=int)
    synth.add_argument("--format", choices=("klines", "quotes"),
                       help="output schema (default klines)")
    synth.set_defaults(func=cmd_synth_gbm)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        return args.func(cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: input file does not exist: {exc.filename}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Arbitrage-loss simulation over block schedules, sweeps, and reports.

The simulator replays a quote series against a constant-product pool: at
each block instant the prevailing quote (last observation carried forward)
is checked against the pool's no-arbitrage band, and the optimal arbitrage
trade is applied whenever one exists. Losses compound multiplicatively.

Blocks are fixed-interval grids or explicit historical timestamps; there is
no stochastic arrival model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .arbitrage import Quote, apply_arbitrage, no_arb_band, optimal_arb_trade
from .errors import FitError, InputError, InsufficientDataError
from .feeds import PriceSeries, QuoteSeries
from .fees import PositionLedger
from .pool import PoolState, concentration_scale

YEAR_MS = 365 * 86400 * 1000
DAY_MS = 86400 * 1000

# default sweep grid; the extended grid reaches 5-minute blocks
DEFAULT_INTERVALS_MS = (100, 250, 500, 1000, 2000, 4000, 8000, 12000, 16000)
EXTENDED_INTERVALS_MS = DEFAULT_INTERVALS_MS + (32000, 60000, 120000, 300000)


@dataclass(frozen=True)
class BlockSchedule:
    """Instants at which arbitrageurs may trade against the pool."""

    timestamps: np.ndarray  # int64 ms, strictly increasing
    interval_ms: Optional[int] = None  # set for fixed-interval schedules

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        object.__setattr__(self, "timestamps", ts)
        if len(ts) == 0:
            raise InputError("schedule must contain at least one instant")
        if np.any(np.diff(ts) <= 0):
            raise InputError("schedule instants must be strictly increasing")

    @classmethod
    def fixed(cls, interval_ms: int, start_ms: int, end_ms: int) -> "BlockSchedule":
        if interval_ms <= 0:
            raise InputError(f"interval must be positive, got {interval_ms}")
        if end_ms < start_ms:
            raise InputError(f"window end {end_ms} before start {start_ms}")
        grid = np.arange(int(start_ms), int(end_ms) + 1, int(interval_ms), dtype=np.int64)
        return cls(grid, int(interval_ms))

    @classmethod
    def from_blocks(cls, block_timestamps_ms) -> "BlockSchedule":
        return cls(np.asarray(block_timestamps_ms, dtype=np.int64))

    @property
    def span_ms(self) -> int:
        return int(self.timestamps[-1] - self.timestamps[0])


@dataclass(frozen=True)
class LossSeries:
    """Per-event arbitrage losses of one run plus the compounded total."""

    timestamps: np.ndarray  # int64 ms of each arbitrage event
    losses: np.ndarray  # per-event relative LP loss
    profits: np.ndarray  # per-event arbitrageur profit, Y units
    multiplier: float  # prod(1 - loss_t)
    n_instants: int
    initial_state: PoolState
    final_state: PoolState
    window_ms: int

    @property
    def total_relative_loss(self) -> float:
        return 1.0 - self.multiplier

    def scaled(self, factor_k: float) -> "LossSeries":
        """Loss series of a position with concentration factor k."""
        scaled = concentration_scale(self.losses, factor_k)
        mult = 1.0
        for loss in scaled:
            mult *= 1.0 - loss
        return replace(self, losses=scaled, multiplier=mult)


@dataclass(frozen=True)
class SweepResult:
    """Total relative loss per swept parameter value."""

    parameter: str  # "interval_ms" or "fee"
    values: np.ndarray
    total_losses: np.ndarray
    annualized_losses: np.ndarray
    n_events: np.ndarray
    window_ms: int
    slope: Optional[float] = None
    slope_residual: Optional[float] = None
    fit_range: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if np.any(np.diff(self.values) <= 0):
            raise InputError("sweep parameter values must be strictly increasing")
        if np.any(self.total_losses < 0):
            raise InputError("sweep losses must be non-negative")


@dataclass(frozen=True)
class ComparisonReport:
    """Merged fee-vs-loss timeline with trailing-window ratios."""

    timestamps: np.ndarray  # int64 ms, union of fee and loss event times
    fee_returns: np.ndarray
    loss_returns: np.ndarray
    cumulative_difference: np.ndarray  # running sum of (fee - loss)
    trailing_ratio: np.ndarray  # NaN where the trailing loss sum is zero
    window_ms: int
    totals: dict


def run_arb_sim(
    initial: PoolState, quotes: QuoteSeries, schedule: BlockSchedule
) -> LossSeries:
    """Replay quotes over a block schedule, applying optimal arb trades.

    The prevailing quote at each instant is the last update at or before
    it. The quote series must cover the whole schedule window.
    """
    grid = schedule.timestamps
    if len(quotes) == 0:
        raise InsufficientDataError("empty quote series")
    if quotes.timestamps[0] > grid[0] or quotes.timestamps[-1] < grid[-1]:
        raise InsufficientDataError(
            f"quotes cover [{quotes.timestamps[0]}, {quotes.timestamps[-1]}] but the "
            f"schedule needs [{grid[0]}, {grid[-1]}]"
        )
    pos = np.searchsorted(quotes.timestamps, grid, side="right") - 1
    bids = quotes.bids[pos]
    asks = quotes.asks[pos]

    state = initial
    multiplier = 1.0
    ev_ts: list[int] = []
    ev_loss: list[float] = []
    ev_profit: list[float] = []

    n = len(grid)
    i = 0
    while i < n:
        lower, upper = no_arb_band(state)
        # single-step check first: after a trade the very next instant often
        # exits the band again (zero-fee feeds trade at every price change)
        if bids[i] > upper or asks[i] < lower:
            j = i
        else:
            j = -1
            s = i + 1
            chunk = 64
            while s < n:
                e = min(s + chunk, n)
                mask = (bids[s:e] > upper) | (asks[s:e] < lower)
                hit = int(np.argmax(mask))
                if mask[hit]:
                    j = s + hit
                    break
                s = e
                chunk = min(chunk * 2, 1 << 16)
            if j < 0:
                break
        trade = optimal_arb_trade(
            state, Quote(int(grid[j]), float(bids[j]), float(asks[j]))
        )
        if trade is not None:
            state = apply_arbitrage(state, trade)
            multiplier *= 1.0 - trade.lp_relative_loss
            ev_ts.append(int(grid[j]))
            ev_loss.append(trade.lp_relative_loss)
            ev_profit.append(trade.arb_profit)
        i = j + 1

    return LossSeries(
        timestamps=np.array(ev_ts, dtype=np.int64),
        losses=np.array(ev_loss, dtype=float),
        profits=np.array(ev_profit, dtype=float),
        multiplier=multiplier,
        n_instants=n,
        initial_state=initial,
        final_state=state,
        window_ms=schedule.span_ms,
    )


def _annualized(total_loss: float, window_ms: int) -> float:
    """Scale a window's compounded loss to a 365-day year via the log multiplier."""
    if window_ms <= 0:
        return float("nan")
    multiplier = 1.0 - total_loss
    if multiplier <= 0:
        return 1.0
    return 1.0 - math.exp(math.log(multiplier) * (YEAR_MS / window_ms))


def _quote_resolution_ms(quotes: QuoteSeries) -> int:
    if len(quotes) < 2:
        return 0
    return int(np.diff(quotes.timestamps).min())


def blocktime_sweep(
    initial: PoolState,
    quotes: QuoteSeries,
    intervals_ms: Sequence[int] = DEFAULT_INTERVALS_MS,
    window: Optional[tuple[int, int]] = None,
) -> SweepResult:
    """Run the arb simulation at several block intervals on identical quotes."""
    if len(intervals_ms) == 0:
        raise InputError("at least one interval is required")
    if list(intervals_ms) != sorted(set(int(v) for v in intervals_ms)):
        raise InputError("intervals must be strictly increasing")
    resolution = _quote_resolution_ms(quotes)
    if resolution and min(intervals_ms) < resolution:
        raise InputError(
            f"interval {min(intervals_ms)}ms is below the quote-update "
            f"resolution of {resolution}ms"
        )
    if window is None:
        window = (int(quotes.timestamps[0]), int(quotes.timestamps[-1]))
    totals, annuals, counts = [], [], []
    span = 0
    for interval in intervals_ms:
        run = run_arb_sim(initial, quotes, BlockSchedule.fixed(interval, *window))
        totals.append(run.total_relative_loss)
        annuals.append(_annualized(run.total_relative_loss, run.window_ms))
        counts.append(len(run.losses))
        span = max(span, run.window_ms)
    return SweepResult(
        parameter="interval_ms",
        values=np.array(intervals_ms, dtype=float),
        total_losses=np.array(totals),
        annualized_losses=np.array(annuals),
        n_events=np.array(counts, dtype=np.int64),
        window_ms=span,
    )


def fee_sweep(
    reserve_x: float,
    reserve_y: float,
    quotes: QuoteSeries,
    interval_ms: int,
    fees: Sequence[float],
    window: Optional[tuple[int, int]] = None,
) -> SweepResult:
    """Run the arb simulation at several pool fees and one block interval."""
    if len(fees) == 0:
        raise InputError("at least one fee is required")
    for fee in fees:
        if not (0.0 <= fee < 1.0):
            raise InputError(f"fee must be in [0, 1), got {fee}")
    if list(fees) != sorted(set(fees)):
        raise InputError("fees must be strictly increasing")
    resolution = _quote_resolution_ms(quotes)
    if resolution and interval_ms < resolution:
        raise InputError(
            f"interval {interval_ms}ms is below the quote-update resolution "
            f"of {resolution}ms"
        )
    if window is None:
        window = (int(quotes.timestamps[0]), int(quotes.timestamps[-1]))
    schedule = BlockSchedule.fixed(interval_ms, *window)
    totals, annuals, counts = [], [], []
    span = 0
    for fee in fees:
        run = run_arb_sim(PoolState(reserve_x, reserve_y, fee), quotes, schedule)
        totals.append(run.total_relative_loss)
        annuals.append(_annualized(run.total_relative_loss, run.window_ms))
        counts.append(len(run.losses))
        span = max(span, run.window_ms)
    return SweepResult(
        parameter="fee",
        values=np.array(fees, dtype=float),
        total_losses=np.array(totals),
        annualized_losses=np.array(annuals),
        n_events=np.array(counts, dtype=np.int64),
        window_ms=span,
    )


def gbm_generate(
    sigma: float,
    mu: float,
    step_ms: int,
    horizon_ms: int,
    seed: int,
    price0: float = 1.0,
    start_ms: int = 0,
    pair: str = "synthetic",
) -> PriceSeries:
    """Geometric Brownian motion price path on a fixed millisecond grid.

    P_{t+1} = P_t * exp((mu - sigma^2/2) dt + sigma sqrt(dt) z) with dt in
    365-day years and z standard normal; deterministic under a fixed seed.
    sigma == 0 yields a deterministic (drift-only) path.
    """
    if sigma < 0 or not math.isfinite(sigma):
        raise InputError(f"sigma must be >= 0, got {sigma}")
    if step_ms <= 0:
        raise InputError(f"step must be positive, got {step_ms}")
    if horizon_ms <= 0 or horizon_ms % step_ms != 0:
        raise InputError(
            f"horizon ({horizon_ms}ms) must be a positive multiple of the step ({step_ms}ms)"
        )
    if price0 <= 0:
        raise InputError(f"price0 must be positive, got {price0}")
    n = horizon_ms // step_ms
    dt = step_ms / YEAR_MS
    rng = np.random.default_rng(seed)
    increments = (mu - 0.5 * sigma * sigma) * dt + sigma * math.sqrt(dt) * rng.standard_normal(n)
    prices = np.empty(n + 1)
    prices[0] = price0
    prices[1:] = price0 * np.exp(np.cumsum(increments))
    timestamps = int(start_ms) + np.arange(n + 1, dtype=np.int64) * int(step_ms)
    return PriceSeries(timestamps, prices, pair=pair, source=f"gbm(seed={seed})")


def loglog_slope(
    sweep: SweepResult, fit_range: Optional[tuple[float, float]] = None
) -> tuple[float, float]:
    """OLS slope of log(loss) on log(parameter) within the fit range.

    Returns (slope, rms_residual). Requires at least three in-range points,
    all with positive losses.
    """
    values = sweep.values
    losses = sweep.total_losses
    if fit_range is not None:
        lo, hi = fit_range
        mask = (values >= lo) & (values <= hi)
        values, losses = values[mask], losses[mask]
    if len(values) < 3:
        raise FitError(f"need at least 3 points in the fit range, got {len(values)}")
    if np.any(losses <= 0):
        raise FitError("all losses in the fit range must be positive")
    if np.any(values <= 0):
        raise FitError("all parameter values in the fit range must be positive")
    lx, ly = np.log(values), np.log(losses)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return float(slope), residual


def fees_vs_losses(
    ledger: PositionLedger, losses: LossSeries, window_ms: int = 30 * DAY_MS
) -> ComparisonReport:
    """Merge fee returns and arb losses into a comparison timeline.

    The difference series is the running sum of per-period fee return minus
    loss. The trailing ratio is the sum of fees over the trailing window
    divided by the sum of losses over it; where the loss sum is zero the
    ratio is reported as NaN (absent), never infinity.
    """
    if window_ms <= 0:
        raise InputError(f"window must be positive, got {window_ms}")
    ts_all = np.concatenate([ledger.timestamps, losses.timestamps])
    if len(ts_all) == 0:
        return ComparisonReport(
            timestamps=np.array([], dtype=np.int64),
            fee_returns=np.array([]),
            loss_returns=np.array([]),
            cumulative_difference=np.array([]),
            trailing_ratio=np.array([]),
            window_ms=window_ms,
            totals={"total_fee_return": float(ledger.cumulative_growth - 1.0),
                    "total_relative_loss": losses.total_relative_loss},
        )
    timeline = np.unique(ts_all)
    fee_at = np.zeros(len(timeline))
    loss_at = np.zeros(len(timeline))
    np.add.at(fee_at, np.searchsorted(timeline, ledger.timestamps), ledger.returns)
    np.add.at(loss_at, np.searchsorted(timeline, losses.timestamps), losses.losses)

    cumulative = np.cumsum(fee_at - loss_at)
    fee_prefix = np.concatenate([[0.0], np.cumsum(fee_at)])
    loss_prefix = np.concatenate([[0.0], np.cumsum(loss_at)])
    left = np.searchsorted(timeline, timeline - window_ms, side="right")
    right = np.arange(1, len(timeline) + 1)
    fee_sum = fee_prefix[right] - fee_prefix[left]
    loss_sum = loss_prefix[right] - loss_prefix[left]
    ratio = np.full(len(timeline), np.nan)
    nonzero = loss_sum != 0
    ratio[nonzero] = fee_sum[nonzero] / loss_sum[nonzero]

    totals = {
        "total_fee_return": float(ledger.cumulative_growth - 1.0),
        "total_relative_loss": losses.total_relative_loss,
        "sum_fee_returns": float(np.sum(fee_at)),
        "sum_losses": float(np.sum(loss_at)),
        "final_difference": float(cumulative[-1]),
    }
    return ComparisonReport(
        timestamps=timeline,
        fee_returns=fee_at,
        loss_returns=loss_at,
        cumulative_difference=cumulative,
        trailing_ratio=ratio,
        window_ms=window_ms,
        totals=totals,
    )

"""Cellular link presets and fluid-queue capacity simulation.

Traffic is modelled as continuous flow drained at link capacity; the queue
tracks backlog bits and the implied queueing delay. This is deliberately
not a packet simulator: the mission planning questions are aggregate ones
(does the offered uplink rate fit, how fast does backlog grow, how much
latency slack remains for offloaded close-range detection).

The single latency figure of each preset is interpreted as a round-trip
time as measured by user-space tools; one-way latency is taken as half.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinkPreset:
    """Measured performance envelope of one cellular network option."""

    name: str
    downlink_mbps: float
    uplink_mbps: float
    latency_ms: float   # round-trip; one-way = latency_ms / 2

    def __post_init__(self):
        if self.downlink_mbps <= 0 or self.uplink_mbps <= 0 or self.latency_ms <= 0:
            raise ValueError("capacities and latency must be positive")

    @property
    def rtt_s(self) -> float:
        return self.latency_ms / 1000.0

    @property
    def one_way_latency_s(self) -> float:
        return self.latency_ms / 2000.0

    def capacity_bps(self, direction: str) -> float:
        if direction == "up":
            return self.uplink_mbps * 1e6
        if direction == "down":
            return self.downlink_mbps * 1e6
        raise ValueError("direction must be 'up' or 'down'")


def presets() -> list[LinkPreset]:
    """The three measured network options plus the projected 1:1-split upgrade."""
    return [
        LinkPreset("private-5g-sa", downlink_mbps=700.0, uplink_mbps=300.0, latency_ms=10.0),
        LinkPreset("public-4g", downlink_mbps=90.0, uplink_mbps=18.0, latency_ms=25.0),
        LinkPreset("public-5g-nsa", downlink_mbps=240.0, uplink_mbps=110.0, latency_ms=20.0),
        LinkPreset("future-5g-sa", downlink_mbps=500.0, uplink_mbps=500.0, latency_ms=10.0),
    ]


def preset_by_name(name: str) -> LinkPreset:
    for p in presets():
        if p.name == name:
            return p
    known = ", ".join(p.name for p in presets())
    raise KeyError(f"unknown link preset {name!r} (known: {known})")


@dataclass(frozen=True)
class TrafficSource:
    """Constant-rate stream or periodic burst on one link direction."""

    name: str
    direction: str = "up"
    rate_bps: float = 0.0
    burst_bits: float | None = None
    burst_period_s: float | None = None

    def __post_init__(self):
        if self.direction not in ("up", "down"):
            raise ValueError("direction must be 'up' or 'down'")
        if self.rate_bps < 0:
            raise ValueError("rate must be >= 0")
        if (self.burst_bits is None) != (self.burst_period_s is None):
            raise ValueError("burst_bits and burst_period_s go together")
        if self.burst_period_s is not None and self.burst_period_s <= 0:
            raise ValueError("burst period must be positive")

    def bits_in_ticks(self, n_ticks: int, tick_s: float) -> np.ndarray:
        """Offered bits per tick over [0, n_ticks * tick_s)."""
        bits = np.full(n_ticks, self.rate_bps * tick_s)
        if self.burst_bits is not None:
            edges = np.arange(n_ticks + 1) * tick_s
            counts = np.floor(edges[1:] / self.burst_period_s + 1e-12) - \
                np.floor(edges[:-1] / self.burst_period_s + 1e-12)
            counts[0] += 1  # burst at t = 0
            bits += counts * self.burst_bits
        return bits


@dataclass(frozen=True)
class LinkTrace:
    """Per-tick uplink or downlink utilization series with summary stats."""

    t_s: np.ndarray
    offered_bps: np.ndarray
    served_bps: np.ndarray
    backlog_bits: np.ndarray
    queue_delay_s: np.ndarray
    capacity_bps: float
    tick_s: float
    mean_utilization: float
    peak_backlog_bits: float
    saturated: bool

    @property
    def final_backlog_bits(self) -> float:
        return float(self.backlog_bits[-1]) if len(self.backlog_bits) else 0.0

    def backlog_growth_bps(self) -> float:
        if len(self.t_s) < 2:
            return 0.0
        duration = self.t_s[-1] + self.tick_s - self.t_s[0]
        return self.final_backlog_bits / float(duration)


SATURATION_HOLD_S = 1.0


def simulate_link(preset: LinkPreset, sources: list[TrafficSource],
                  duration_s: float, tick_s: float = 0.01,
                  direction: str = "up") -> LinkTrace:
    """Run the fluid queue for one link direction.

    Per tick: served = min(offered + backlog, capacity * tick); the rest
    carries over as backlog. The link counts as saturated when backlog
    stays positive for at least one second.
    """
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    if not (0 < tick_s <= 0.1):
        raise ValueError("tick must be in (0, 0.1] s")
    capacity = preset.capacity_bps(direction)
    n = max(1, int(round(duration_s / tick_s)))
    offered = np.zeros(n)
    for src in sources:
        if src.direction == direction:
            offered += src.bits_in_ticks(n, tick_s)

    cap_bits = capacity * tick_s
    # Lindley recursion b_k = max(0, b_{k-1} + offered_k - cap), vectorized
    # through running minima of the cumulative net input.
    net = np.cumsum(offered - cap_bits)
    backlog = net - np.minimum.accumulate(np.minimum(net, 0.0))
    prev = np.concatenate([[0.0], backlog[:-1]])
    served = offered + prev - backlog

    t = np.arange(n) * tick_s
    mean_util = float(served.sum() / (capacity * n * tick_s))
    saturated = _sustained_positive(backlog, tick_s, SATURATION_HOLD_S)
    return LinkTrace(
        t_s=t,
        offered_bps=offered / tick_s,
        served_bps=served / tick_s,
        backlog_bits=backlog,
        queue_delay_s=backlog / capacity,
        capacity_bps=capacity,
        tick_s=tick_s,
        mean_utilization=mean_util,
        peak_backlog_bits=float(backlog.max()) if n else 0.0,
        saturated=saturated,
    )


def _sustained_positive(backlog: np.ndarray, tick_s: float, hold_s: float) -> bool:
    need = max(1, int(math.ceil(hold_s / tick_s)))
    positive = backlog > 0
    run = 0
    for flag in positive:
        run = run + 1 if flag else 0
        if run >= need:
            return True
    return False


def offload_slack(camera_lookahead_m: float, speed_mps: float, rtt_s: float,
                  inference_s: float, lead_m: float) -> float:
    """Timing slack for edge-offloaded close-range detection, seconds.

    The camera sees the ground ``camera_lookahead_m`` ahead; the verdict
    must be back before the nozzle has to open ``lead_m`` ahead of the
    plant. slack = (lookahead - lead)/speed - rtt - inference; offloading
    is feasible iff slack >= 0.
    """
    if speed_mps <= 0:
        raise ValueError("speed must be positive")
    return (camera_lookahead_m - lead_m) / speed_mps - rtt_s - inference_s

"""Turn raw delivery records into throughput and delay figures."""

from __future__ import annotations

from typing import NamedTuple, Sequence

from ..model import SimResult

NS = 1_000_000_000


class Delivery(NamedTuple):
    flow: int
    created: int      # ns
    delivered: int    # ns


def measure(deliveries: Sequence[Delivery], duration: float, warmup: float = 10.0,
            seed: int = 0) -> SimResult:
    """Throughput counts every unique delivery over the whole run; delay skips packets
    created during the warm-up. Delay fields stay ``None`` when nothing qualifies."""
    res = SimResult(seed=seed, duration=duration)
    res.delivered_f1 = sum(1 for d in deliveries if d.flow == 1)
    res.delivered_f2 = len(deliveries) - res.delivered_f1
    res.measured_theta = len(deliveries) / duration

    cutoff = int(round(warmup * NS))
    sums = {1: 0, 2: 0}
    counts = {1: 0, 2: 0}
    for d in deliveries:
        if d.created >= cutoff:
            sums[d.flow] += d.delivered - d.created
            counts[d.flow] += 1
    total = counts[1] + counts[2]
    res.delay_samples = total
    if total:
        res.measured_delay_mean = (sums[1] + sums[2]) / total / NS
    if counts[1]:
        res.delay_f1_mean = sums[1] / counts[1] / NS
    if counts[2]:
        res.delay_f2_mean = sums[2] / counts[2] / NS
    return res

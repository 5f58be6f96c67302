"""Maximum stable throughput: raise the symmetric source rate until some node saturates.

A linear sweep finds the first unstable rate, then bisection narrows the
boundary to three significant digits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .analytic import UnstableError, analyze
from .fixedpoint import DivergenceError
from .model import ChainScenario

# probe(gamma) -> (stable, theta)
Probe = Callable[[float], "tuple[bool, float]"]

# iteration cap per analytic probe; failing to settle within it counts as unstable
PROBE_MAX_ITER = 10_000


class Engine(str, enum.Enum):
    ANALYTIC = "analytic"
    SIMULATED = "simulated"


class AlreadyUnstableError(ValueError):
    pass


@dataclass
class MSTResult:
    gamma_star: float
    theta_star: float
    probes: list[tuple[float, bool, float]] = field(default_factory=list)
    monotone: bool = True


def analytic_probe(template: ChainScenario, **solver) -> Probe:
    """Stable means the solver converged and every node has utilisation below one."""
    solver.setdefault("max_iter", PROBE_MAX_ITER)

    def probe(gamma: float) -> tuple[bool, float]:
        try:
            rep = analyze(template.with_gamma(gamma), **solver)
        except (UnstableError, DivergenceError, ZeroDivisionError):
            return False, math.nan
        return rep.stable, rep.theta
    return probe


def simulated_probe(template: ChainScenario, duration: float = 170.0,
                    seeds: Sequence[int] = (1,)) -> Probe:
    """Stable unless most seeds show queues still growing over the second half of the run."""
    from .sim import run

    def probe(gamma: float) -> tuple[bool, float]:
        results = [run(template.with_gamma(gamma), duration, s) for s in seeds]
        growing = sum(r.queue_growing for r in results)
        theta = sum(r.measured_theta for r in results) / len(results)
        return 2 * growing <= len(results), theta
    return probe


def _resolution(gamma: float, digits: int) -> float:
    if gamma <= 0:
        return 10.0 ** -digits
    return 10.0 ** (math.floor(math.log10(gamma)) - digits + 1)


def max_stable_throughput(template: ChainScenario, gamma_ini: float, step: float,
                          engine: Engine | str | Probe = Engine.ANALYTIC, *,
                          gamma_max: float = 1e4, digits: int = 3, lookahead: int = 2,
                          duration: float = 170.0, seeds: Sequence[int] = (1,)) -> MSTResult:
    """Largest symmetric rate gamma with every node stable, and the throughput there.

    ``engine`` may also be a probe callable, which is how toy models are plugged in.
    After the first unstable point ``lookahead`` further steps are probed; a stable
    one among them clears ``monotone`` on the result.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    if callable(engine):
        probe = engine
    elif Engine(engine) is Engine.ANALYTIC:
        probe = analytic_probe(template)
    else:
        probe = simulated_probe(template, duration, seeds)

    probes: list[tuple[float, bool, float]] = []

    def check(gamma: float) -> tuple[bool, float]:
        stable, theta = probe(gamma)
        probes.append((gamma, stable, theta))
        return stable, theta

    stable, theta = check(gamma_ini)
    if not stable:
        raise AlreadyUnstableError(f"gamma_ini={gamma_ini} is already unstable")
    lo, theta_lo = gamma_ini, theta
    n = 1
    while True:
        gamma = gamma_ini + n * step
        if gamma > gamma_max:
            raise ValueError(f"no instability found up to gamma_max={gamma_max}")
        stable, theta = check(gamma)
        if not stable:
            hi = gamma
            break
        lo, theta_lo = gamma, theta
        n += 1

    monotone = True
    for extra in range(1, lookahead + 1):
        if check(hi + extra * step)[0]:
            monotone = False

    while hi - lo > _resolution(hi, digits):
        mid = 0.5 * (lo + hi)
        stable, theta = check(mid)
        if stable:
            lo, theta_lo = mid, theta
        else:
            hi = mid
    return MSTResult(lo, theta_lo, probes, monotone)

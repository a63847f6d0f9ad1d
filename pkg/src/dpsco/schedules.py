"""Stage schedules for the multi-stage drivers.

Log-base convention: schedules written with log2 use base 2, including the
loglog terms of the iterated driver; ln(1/delta) and the ln n / ln ln n of
the strongly-convex phased schedule use natural logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import PrivacyBudget


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    algo: str
    stage_sizes: tuple
    stepsizes: tuple = ()
    radii: tuple = ()
    gammas: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def stages(self) -> int:
        return len(self.stage_sizes)

    @property
    def total_samples(self) -> int:
        return sum(self.stage_sizes)


def lemma_step_size(D: float, L: float, n: int, d: int,
                    budget: PrivacyBudget) -> float:
    """Default Phased-SGD step: (D/L) min{4/sqrt(n), eps/(2 sqrt(d ln(1/delta)))}
    in approximate mode, (D/L) min{4/sqrt(n), eps/d} in pure mode."""
    if budget.mode == "approximate":
        priv = budget.epsilon / (2.0 * math.sqrt(
            d * math.log(1.0 / budget.delta)))
    else:
        priv = budget.epsilon / d
    return (D / L) * min(4.0 / math.sqrt(n), priv)


def phased_sgd_schedule(n: int, eta: float) -> Schedule:
    """k = ceil(log2 n) stages of sizes floor(2^-i n) and steps 4^-i eta.

    Stages whose size would reach 0 are skipped (non-powers of two can hit
    floor(2^-i n) = 0 before i = k)."""
    if n < 1:
        raise ScheduleError("need at least one sample")
    k = math.ceil(math.log2(n)) if n > 1 else 1
    sizes, steps = [], []
    truncated = False
    for i in range(1, k + 1):
        ni = n >> i  # floor(2^-i n)
        if ni < 1:
            truncated = True
            break
        sizes.append(ni)
        steps.append(eta * 4.0 ** (-i))
    if not sizes:
        raise ScheduleError("no stage has at least one sample")
    return Schedule("phased_sgd", tuple(sizes), stepsizes=tuple(steps),
                    extra={"k": k, "truncated": truncated})


def phased_sgd_sc_schedule(n: int) -> Schedule:
    """k = ceil(ln ln n) stages of sizes floor(2^(i-2) n / ln n)."""
    if n < 3:
        raise ScheduleError("n too small for the ln ln n stage count")
    k = math.ceil(math.log(math.log(n)))
    if k < 1:
        raise ScheduleError("degenerate schedule: ceil(ln ln n) < 1")
    sizes = []
    for i in range(1, k + 1):
        ni = math.floor(2.0 ** (i - 2) * n / math.log(n))
        if ni < 2:
            raise ScheduleError(f"stage {i} has size {ni} < 2")
        sizes.append(ni)
    if sum(sizes) > n:
        raise ScheduleError("stage sizes exceed the sample budget")
    return Schedule("phased_sgd_sc", tuple(sizes), extra={"k": k})


def psa_schedule(n: int) -> Schedule:
    """m = floor(0.5 log2(2n / log2 n)) - 1 equal stages of size floor(n/m)."""
    if n < 2:
        raise ScheduleError("need n >= 2")
    m = math.floor(0.5 * math.log2(2.0 * n / math.log2(n))) - 1
    if m <= 0:
        raise ScheduleError(f"degenerate schedule: m = {m} <= 0")
    n0 = n // m
    return Schedule("psa", tuple([n0] * m), extra={"m": m, "n0": n0})


def iterated_schedule(n: int, theta_bar: float) -> Schedule:
    """k = floor(log_thetabar(2) * log2 log2 n) stages of sizes
    floor(2^(i-1) n / (log2 n)^(log_thetabar 2))."""
    if theta_bar <= 1:
        raise ScheduleError("theta_bar must exceed 1")
    if n < 5:
        raise ScheduleError("n too small for the loglog stage count")
    r = math.log(2.0) / math.log(theta_bar)  # log base theta_bar of 2
    k = math.floor(r * math.log2(math.log2(n)))
    if k <= 0:
        raise ScheduleError(f"degenerate schedule: k = {k} <= 0")
    denom = math.log2(n) ** r
    sizes = []
    for i in range(1, k + 1):
        ni = math.floor(2.0 ** (i - 1) * n / denom)
        if ni < 2:
            raise ScheduleError(f"stage {i} has size {ni} < 2")
        sizes.append(ni)
    if sum(sizes) > n:
        raise ScheduleError("stage sizes exceed the sample budget")
    # large-n validity condition (equivalent to every stage holding at least
    # two samples, so it cannot fail once the sizes above are accepted)
    cond_ok = theta_bar >= 2.0 ** (math.log2(math.log2(n))
                                   / (math.log2(n) - 1.0))
    return Schedule("iterated_phased_sgd", tuple(sizes),
                    extra={"k": k, "theta_bar": theta_bar,
                           "condition_ok": cond_ok})


def psa2_schedule(n: int, d: int, theta: float, lam: float, L: float,
                  budget: PrivacyBudget) -> Schedule:
    """Stage count from the TNC contraction formula; equal segments."""
    if theta <= 1 or lam <= 0:
        raise ScheduleError("need theta > 1 and lambda > 0")
    if budget.mode == "approximate":
        priv = d * math.log(1.0 / budget.delta) / (n ** 2 * budget.epsilon ** 2)
    else:
        priv = d ** 2 / (n ** 2 * budget.epsilon ** 2)
    arg = L ** 2 / lam ** (2.0 / theta) * (1.0 / n + priv)
    m = math.floor(-(theta / (2.0 * (theta - 1.0))) * math.log2(arg))
    if m <= 0:
        raise ScheduleError(f"degenerate schedule: m = {m} <= 0")
    n0 = n // m
    if n0 < 1:
        raise ScheduleError("stages would be empty")
    return Schedule("psa2", tuple([n0] * m), extra={"m": m, "n0": n0})


def psa2_gamma0(chi0: float, L: float, n0: int, d: int,
                budget: PrivacyBudget) -> float:
    if budget.mode == "approximate":
        priv = d * math.log(1.0 / budget.delta) / (n0 ** 2
                                                   * budget.epsilon ** 2)
    else:
        priv = d ** 2 / (n0 ** 2 * budget.epsilon ** 2)
    return chi0 / (6400.0 * L ** 2 * (1.0 / n0 + priv))


def epoch_schedule(n: int, n1: int) -> Schedule:
    """Doubling epochs n1, 2 n1, ...; the floor form of the epoch count keeps
    the sample budget, and leftovers are appended to the last epoch."""
    if n1 < 1:
        raise ScheduleError("first epoch size must be >= 1")
    k = math.floor(math.log2(n / (2.0 * n1) + 1.0))
    if k <= 0:
        raise ScheduleError(f"degenerate schedule: k = {k} <= 0")
    sizes = [n1 * 2 ** i for i in range(k)]
    sizes[-1] += n - sum(sizes)
    return Schedule("epoch_dp_sgd", tuple(sizes), extra={"k": k, "n1": n1})


def build(algo: str, n: int, *, eta: float = 1.0, theta_bar: float = 2.0,
          n1: int = 1, d: int = 1, theta: float = 2.0, lam: float = 1.0,
          L: float = 1.0, budget: PrivacyBudget | None = None,
          chi0: float | None = None) -> Schedule:
    """Schedule lookup for the CLI stage-table printer."""
    if algo == "phased_sgd" or algo == "phased_erm":
        return phased_sgd_schedule(n, eta)
    if algo == "phased_sgd_sc":
        return phased_sgd_sc_schedule(n)
    if algo == "psa":
        return psa_schedule(n)
    if algo == "iterated_phased_sgd":
        return iterated_schedule(n, theta_bar)
    if algo == "psa2":
        if budget is None:
            raise ScheduleError("psa2 schedule needs a privacy budget")
        return psa2_schedule(n, d, theta, lam, L, budget)
    if algo == "epoch_dp_sgd":
        return epoch_schedule(n, n1)
    raise ScheduleError(f"unknown algorithm {algo!r}")

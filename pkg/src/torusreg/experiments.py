"""Divergence-fit pipelines for the sharpness examples.

Each report function returns a list of `Verdict` rows.  Tails are last
increments of partial-sum sequences (one block, or one l1 shell for the
majorant series); fits use `fit_rate` and `fit_log_slope`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constructions import (
    PAIRING_FACTOR,
    critical_sphere_example,
    no_weak_derivative_example,
    unbounded_derivative_example,
)
from .norms import (
    BlockSpec,
    WeightFn,
    block_sums,
    cauchy_tail,
    derivative_sup_partial_sums,
    fit_log_slope,
    fit_rate,
    weight_partial_sums,
    weighted_block_norm,
)


@dataclass(frozen=True)
class Verdict:
    example: str
    check: str
    value: float
    threshold: float
    passed: bool

    def row(self):
        return (self.example, self.check, self.value, self.threshold, "pass" if self.passed else "fail")


VERDICT_HEADER = ("example", "check", "value", "threshold", "verdict")


def critical_sphere_report(log_alpha: float, n: int = 2, tau: float = 1.0, b: int = 2,
                           nu_max: int = 60, fit_from: int = 10) -> list:
    """Log-weighted norm versus block norm on the sphere-supported example.

    Block nu holds the sphere of profile index nu + 1, so the 1/(nu ln nu)
    rate is fitted against that index.
    """
    f = critical_sphere_example(n, tau, b, log_alpha, nu_max)
    _, series = weighted_block_norm(f, BlockSpec(b, tau))
    logp = weight_partial_sums(f, tau, WeightFn.log_power(log_alpha), b)
    name = f"sphere(log_alpha={log_alpha:g})"
    out = [Verdict(name, "log_norm_tail", cauchy_tail(logp), 1e-3, cauchy_tail(logp) < 1e-3)]
    if log_alpha <= 1:
        idx = np.arange(series.theta.size) + 1
        sel = (idx >= fit_from) & (idx <= nu_max)
        fit = fit_rate(idx[sel], series.sqrt_theta[sel], lambda v: 1.0 / (v * np.log(v)))
        out.append(Verdict(name, "block_term_rate_dev", fit.max_rel_dev, 0.2, fit.max_rel_dev <= 0.2))
    else:
        tail = cauchy_tail(series.partials)
        out.append(Verdict(name, "block_tail", tail, 1e-3, tail < 1e-3))
    return out


def unbounded_report(n: int = 2, tau: float = 1.0, log_alpha: float = 2.0, K: int = 500,
                     radii=(50, 100, 200, 500)) -> list:
    """Majorant series of the cosine example at orders 1 and 2."""
    f = unbounded_derivative_example(n, tau, log_alpha, K)
    name = f"cosine_series(K={K})"
    every = list(range(2, K + 1))
    p1 = derivative_sup_partial_sums(f, 1, every)
    rel = float(cauchy_tail(p1) / p1[-1])
    p2 = derivative_sup_partial_sums(f, 2, list(radii))
    slope = fit_log_slope(radii, p2).slope
    increasing = bool((np.diff(p2) > 0).all())
    return [
        Verdict(name, "order1_rel_tail", rel, 1e-2, rel < 1e-2),
        Verdict(name, "order2_log_slope", slope, 0.0, slope > 0 and increasing),
    ]


def no_weak_report(n: int = 2, tau: float = 1.0, b: int = 2, nu_max: int = 20, last: int = 10) -> list:
    """Block norm bound and blow-up of the next Sobolev order on axis modes."""
    f = no_weak_derivative_example(n, tau, b, nu_max)
    total, _ = weighted_block_norm(f, BlockSpec(b, tau))
    bound = PAIRING_FACTOR * math.pi ** 2 / 6
    m = math.floor(tau) + 2
    S = np.cumsum(block_sums(f, b, 2.0 * m))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = S[1:] / S[:-1]
    worst = float(ratios[-last:].min())
    name = f"axis_modes(nu_max={nu_max})"
    return [
        Verdict(name, "block_norm", total, bound + 1e-6, total <= bound + 1e-6),
        Verdict(name, "min_growth_ratio", worst, b * b / 2, worst >= b * b / 2),
    ]


def sharpness_table(nu_max: int = 60, K: int = 500, nu_max_weak: int = 20) -> list:
    rows = []
    rows += critical_sphere_report(1.0, nu_max=nu_max)
    rows += critical_sphere_report(2.0, nu_max=nu_max)
    rows += unbounded_report(K=K)
    rows += no_weak_report(nu_max=nu_max_weak)
    return rows

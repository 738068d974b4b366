"""Weighted norms on the torus and the checkers built on them.

The central object is the base-b block norm

    ||f|| = sum_nu ( sum_{b^(nu-1) < |k| <= b^nu} |f_k|^2 |k|^(2 tau + 2) )^(1/2),

an l1 sum over dyadic-type blocks of l2 sums inside each block.  Every sum
here is reported on the finite support only; divergence of an infinite series
is diagnosed from the growth of its partial sums (see `fit_rate`,
`fit_log_slope`).

Inputs are either a `FourierMap` or a `ShellSpectrum`; the latter is handled
in log space from exact sphere counts.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .lattice import FourierMap, ShellSpectrum, block_index, block_indices, derivative, synthesize

SpectralMap = Union[FourierMap, ShellSpectrum]


@dataclass(frozen=True)
class BlockSpec:
    """Base b and exponent tau of the block norm (weight |k|^(2 tau + 2))."""

    b: int = 2
    tau: float = 1.0

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 2:
            raise ValueError("block base b must be an integer >= 2")

    @property
    def exponent(self) -> float:
        return 2.0 * self.tau + 2.0

    def check_dimension(self, n: int) -> None:
        if self.tau < n - 1:
            warnings.warn(f"tau={self.tau} < n-1={n - 1}: outside the Diophantine range",
                          stacklevel=3)


@dataclass(frozen=True)
class WeightFn:
    """Nondecreasing, nonnegative weight phi(|k|).

    kind is one of "constant", "log_power" (phi(x) = ln(1+x)^log_alpha) or
    "table" (piecewise-linear through (xs, ws), constant beyond the ends).
    """

    kind: str = "constant"
    value: float = 1.0
    log_alpha: float = 0.0
    xs: tuple = ()
    ws: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "log_power", "table"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "constant" and self.value < 0:
            raise ValueError("constant weight must be nonnegative")
        if self.kind == "table":
            xs, ws = np.asarray(self.xs, float), np.asarray(self.ws, float)
            if xs.size == 0 or xs.shape != ws.shape:
                raise ValueError("table weight needs matching, nonempty xs and ws")
            if (np.diff(xs) <= 0).any() or (np.diff(ws) < 0).any() or (ws < 0).any():
                raise ValueError("table weight must be nonnegative and nondecreasing on increasing xs")

    @classmethod
    def constant(cls, c: float = 1.0) -> "WeightFn":
        return cls("constant", value=float(c))

    @classmethod
    def log_power(cls, log_alpha: float) -> "WeightFn":
        return cls("log_power", log_alpha=float(log_alpha))

    @classmethod
    def table(cls, xs: Sequence[float], ws: Sequence[float]) -> "WeightFn":
        return cls("table", xs=tuple(float(x) for x in xs), ws=tuple(float(w) for w in ws))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "constant":
            return np.full_like(x, self.value)
        if self.kind == "log_power":
            return np.log1p(x) ** self.log_alpha
        return np.interp(x, self.xs, self.ws)

    def log(self, x) -> np.ndarray:
        """log phi(x), usable for arguments too large for direct evaluation."""
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore"):
            if self.kind == "log_power":
                return self.log_alpha * np.log(np.log1p(x))
            return np.log(self(x))


@dataclass(frozen=True)
class BlockSeries:
    """Per-block sums Theta_nu (nu = 0..len-1) and running sums of sqrt(Theta_nu)."""

    theta: np.ndarray
    partials: np.ndarray = field(init=False)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        if (theta < 0).any():
            raise ValueError("block sums must be nonnegative")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "partials", np.array(list(itertools.accumulate(np.sqrt(theta))),
                                                      dtype=np.float64))

    @property
    def nu(self) -> np.ndarray:
        return np.arange(self.theta.size)

    @property
    def sqrt_theta(self) -> np.ndarray:
        return np.sqrt(self.theta)

    @property
    def total(self) -> float:
        return math.fsum(self.sqrt_theta)

    def rows(self):
        """(nu, theta, sqrt_theta, partial_sum) per block, for CSV output."""
        return [(int(v), float(t), float(s), float(p))
                for v, t, s, p in zip(self.nu, self.theta, self.sqrt_theta, self.partials)]


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool


# ---------------------------------------------------------------------------
# per-mode / per-shell data
# ---------------------------------------------------------------------------


def _nonzero_modes(f: FourierMap):
    keep = f.norms > 0
    return f.norms[keep], f.energy()[keep]


def _shell_log_terms(f: ShellSpectrum, exponent: float, weight: WeightFn | None, power: int):
    """log of sum_{|k|=r} |f_k|^power |k|^exponent phi(|k|) per shell."""
    out = []
    for r, c, lm in zip(f.radii, f.counts, f.log_mag):
        t = math.log(c) + power * lm + exponent * math.log(r)
        if weight is not None:
            t += float(weight.log(float(r)))
        out.append(t)
    return out


def block_sums(f: SpectralMap, b: int, exponent: float, weight: WeightFn | None = None) -> np.ndarray:
    """Per-block sums of |f_k|^2 |k|^exponent phi(|k|), indexed by nu = 0..max.

    Each block is summed with math.fsum, so the result does not depend on the
    order or parallel decomposition of the summation.
    """
    if isinstance(f, ShellSpectrum):
        if not f.radii:
            return np.zeros(0)
        logs = _shell_log_terms(f, exponent, weight, power=2)
        nus = [block_index(r, b) for r in f.radii]
        theta = np.zeros(max(nus) + 1)
        for nu in set(nus):
            theta[nu] = math.fsum(math.exp(t) for t, v in zip(logs, nus) if v == nu)
        return theta
    norms, energy = _nonzero_modes(f)
    if norms.size == 0:
        return np.zeros(0)
    terms = energy * norms.astype(np.float64) ** exponent
    if weight is not None:
        terms = terms * weight(norms)
    nus = block_indices(norms, b)
    order = np.argsort(nus, kind="stable")
    nus_sorted, terms_sorted = nus[order], terms[order]
    edges = np.flatnonzero(np.diff(nus_sorted)) + 1
    theta = np.zeros(int(nus_sorted[-1]) + 1)
    for chunk_nu, chunk in zip(np.split(nus_sorted, edges), np.split(terms_sorted, edges)):
        theta[int(chunk_nu[0])] = math.fsum(chunk)
    return theta


def weighted_block_norm(f: SpectralMap, spec: BlockSpec) -> tuple[float, BlockSeries]:
    """Block norm of f and its per-block series.

    Examples
    --------
    >>> f = FourierMap.cosine((1, 2))
    >>> round(weighted_block_norm(f, BlockSpec(2, 1.0))[0], 5)
    6.36396
    """
    spec.check_dimension(f.n)
    series = BlockSeries(block_sums(f, spec.b, spec.exponent))
    return series.total, series


def sobolev_weight_norm(f: SpectralMap, tau: float, w: WeightFn | None = None) -> float:
    """(sum_k |f_k|^2 |k|^(2 tau + 2) w(|k|))^(1/2); w defaults to 1."""
    exponent = 2.0 * tau + 2.0
    if isinstance(f, ShellSpectrum):
        logs = _shell_log_terms(f, exponent, w, power=2)
        return math.sqrt(math.fsum(math.exp(t) for t in logs))
    norms, energy = _nonzero_modes(f)
    terms = energy * norms.astype(np.float64) ** exponent
    if w is not None:
        terms = terms * w(norms)
    return math.sqrt(math.fsum(terms))


def weight_partial_sums(f: SpectralMap, tau: float, w: WeightFn, b: int) -> np.ndarray:
    """Running square roots of the weighted Sobolev sum, accumulated block by block."""
    theta = block_sums(f, b, 2.0 * tau + 2.0, w)
    return np.sqrt(np.array(list(itertools.accumulate(theta)), dtype=np.float64))


def weight_bound_check(f: SpectralMap, spec: BlockSpec, w: WeightFn, nu_max: int) -> BoundCheck:
    """Truncated form of the inclusion H_phi  subset  block space.

    lhs is the block norm; rhs = sum_{nu=0}^{nu_max} 1/phi(b^(nu-1)) + ||f||^2_{H_phi}.
    """
    nodes = np.array([float(spec.b) ** (nu - 1) for nu in range(nu_max + 1)])
    phis = w(nodes)
    if (phis <= 0).any():
        bad = int(np.flatnonzero(phis <= 0)[0])
        raise ValueError(f"weight vanishes at b^(nu-1) for nu={bad}")
    lhs, _ = weighted_block_norm(f, spec)
    rhs = math.fsum(1.0 / phis) + sobolev_weight_norm(f, spec.tau, w) ** 2
    return BoundCheck(lhs, rhs, lhs <= rhs)


# ---------------------------------------------------------------------------
# majorant series and the elementary power inequality
# ---------------------------------------------------------------------------


def _radial_l1_terms(f: SpectralMap, order: float):
    """(radius, sum_{|k|=r} |f_k| |k|^order) per nonzero shell, ascending radius."""
    if isinstance(f, ShellSpectrum):
        return [(r, math.exp(math.log(c) + lm + order * math.log(r)))
                for r, c, lm in zip(f.radii, f.counts, f.log_mag)]
    norms, energy = _nonzero_modes(f)
    terms = np.sqrt(energy) * norms.astype(np.float64) ** order
    out = []
    order_idx = np.argsort(norms, kind="stable")
    norms, terms = norms[order_idx], terms[order_idx]
    edges = np.flatnonzero(np.diff(norms)) + 1
    for rs, ts in zip(np.split(norms, edges), np.split(terms, edges)):
        if rs.size:
            out.append((int(rs[0]), math.fsum(ts)))
    return out


def derivative_sup_partial_sums(f: SpectralMap, order: float, radii: Sequence[int]) -> np.ndarray:
    """Partial sums of sum_{0<|k|<=R} |f_k| |k|^order at each R in `radii`.

    The series majorizes sup |d^a f| for every |a| = order.
    """
    radii = [int(R) for R in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    shells = _radial_l1_terms(f, order)
    out, acc, i = [], 0.0, 0
    for R in radii:
        chunk = []
        while i < len(shells) and shells[i][0] <= R:
            chunk.append(shells[i][1])
            i += 1
        acc = math.fsum([acc] + chunk)
        out.append(acc)
    return np.array(out)


def embedding_check(f: FourierMap, order: int, N: int) -> BoundCheck:
    """Compare the grid sup of every order-`order` derivative with the majorant.

    lhs = max_{|a| = order} max_grid |d^a f|, rhs = sum_k |f_k| |k|^order.
    """
    lhs = 0.0
    for a in _multi_indices(f.n, order):
        g = synthesize(derivative(f, a), N)
        lhs = max(lhs, float(np.sqrt((g.values ** 2).sum(axis=-1)).max()))
    rhs = float(derivative_sup_partial_sums(f, order, [max(f.support_radius, 1)])[-1])
    return BoundCheck(lhs, rhs, lhs <= rhs * (1 + 1e-12))


def _multi_indices(n: int, m: int):
    """All a in N^n with |a| = m, lex order."""
    if n == 1:
        yield (m,)
        return
    for first in range(m, -1, -1):
        for rest in _multi_indices(n - 1, m - first):
            yield (first,) + rest


def multi_indices(n: int, m: int) -> list:
    return list(_multi_indices(n, m))


def l1_power_lower_bound(k: Sequence[int], sigma: float) -> tuple[float, float, bool]:
    """sum_j k_j^sigma versus n^(-sigma-1) |k|^sigma for k in N^n, sigma >= 1."""
    k = np.asarray(k, dtype=np.float64)
    if (k < 0).any():
        raise ValueError("entries of k must be nonnegative")
    if not k.any():
        raise ValueError("k must be nonzero")
    if sigma < 1:
        raise ValueError("sigma must be >= 1")
    n = k.size
    total = math.fsum(k ** sigma)
    bound = n ** (-sigma - 1.0) * float(k.sum()) ** sigma
    # n = 1 is an equality; allow a few ulps between the two pow evaluations
    return total, bound, total >= bound * (1.0 - 8 * np.finfo(np.float64).eps)


# ---------------------------------------------------------------------------
# divergence-fit protocol
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    """Fit of terms t_nu ~ c * model(nu)."""

    c: float
    max_rel_dev: float
    r2: float


def fit_rate(nu: Sequence[float], terms: Sequence[float],
             model: Callable[[np.ndarray], np.ndarray]) -> RateFit:
    """Least-squares fit of log t_nu = log c + log model(nu).

    Returns the constant, the largest relative deviation |t / (c model) - 1|,
    and R^2 of log t against log model with the slope fixed at one.
    """
    nu = np.asarray(nu, dtype=np.float64)
    t = np.asarray(terms, dtype=np.float64)
    g = np.asarray(model(nu), dtype=np.float64)
    if (t <= 0).any() or (g <= 0).any():
        raise ValueError("rate fit needs positive terms and model values")
    logc = float(np.mean(np.log(t) - np.log(g)))
    c = math.exp(logc)
    dev = float(np.abs(t / (c * g) - 1.0).max())
    y = np.log(t)
    resid = y - (logc + np.log(g))
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(c, dev, r2)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float


def fit_log_slope(x: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(x, dtype=np.float64))
    ly = np.log(np.asarray(y, dtype=np.float64))
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = slope * lx + intercept
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float(((ly - pred) ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), r2)


def cauchy_tail(partials: Sequence[float]) -> float:
    """Last increment |S_N - S_{N-1}| of a partial-sum sequence."""
    p = np.asarray(partials, dtype=np.float64)
    if p.size < 2:
        return float(abs(p[-1])) if p.size else 0.0
    return float(abs(p[-1] - p[-2]))

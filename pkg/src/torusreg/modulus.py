"""Modified L2 modulus of continuity and Dini-type summability.

For a shift s the symmetric second difference f(y+s) + f(y-s) - 2 f(y) has
Fourier coefficients 2 (cos<k,s> - 1) f_k, so its L2 norm is read off the
spectrum.  The modulus is a sup over shifts in the Euclidean ball |s| <= x;
it is estimated from a deterministic shift cloud plus local refinement and is
therefore a lower bound on the true value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .lattice import FourierMap, block_indices, derivative, evaluate_points, grid_points
from .norms import BlockSpec, multi_indices, weighted_block_norm

DEFAULT_SAMPLES = 256
DEFAULT_SHIFT_SCALE = 0.5


# ---------------------------------------------------------------------------
# second differences
# ---------------------------------------------------------------------------


def _phases(ks: np.ndarray, S: np.ndarray) -> np.ndarray:
    """<k, s> for every mode and shift, shape (m, p), fixed summation order."""
    out = np.zeros((ks.shape[0], S.shape[0]))
    for j in range(ks.shape[1]):
        out += ks[:, j, None].astype(np.float64) * S[None, :, j]
    return out


def _second_diff_sq(ks: np.ndarray, w: np.ndarray, S: np.ndarray) -> np.ndarray:
    """sum_k 4 (cos<k,s> - 1)^2 w_k for each row s of S."""
    if ks.shape[0] == 0:
        return np.zeros(S.shape[0])
    t = (np.cos(_phases(ks, S)) - 1.0) ** 2
    return 4.0 * (t * w[:, None]).sum(axis=0)


def second_difference_l2(f: FourierMap, s) -> float:
    """L2 norm of f(.+s) + f(.-s) - 2 f(.) from the Fourier side.

    Examples
    --------
    >>> f = FourierMap.cosine((1, 0))
    >>> round(second_difference_l2(f, (math.pi, 0.0)), 5)
    2.82843
    """
    S = np.asarray(s, dtype=np.float64).reshape(1, f.n)
    w = (np.abs(f.cs) ** 2).sum(axis=1)
    return math.sqrt(float(_second_diff_sq(f.ks, w, S)[0]))


def second_difference_grid(f: FourierMap, s, N: int) -> float:
    """Same quantity by the N^n grid mean of pointwise samples.

    Exact (up to rounding) when N exceeds twice the largest |k_j|.
    """
    s = np.asarray(s, dtype=np.float64)
    X = grid_points(f.n, N)
    delta = evaluate_points(f, X + s) + evaluate_points(f, X - s) - 2.0 * evaluate_points(f, X)
    return math.sqrt(float((delta ** 2).sum(axis=1).mean()))


# ---------------------------------------------------------------------------
# modulus
# ---------------------------------------------------------------------------


def unit_ball_cloud(n: int, samples: int) -> np.ndarray:
    """Deterministic low-discrepancy points in the closed Euclidean unit ball.

    Halton points of [-1, 1]^n are kept when inside the ball; every point is
    also pushed radially to the sphere, since for band-limited maps the
    maximizer often sits on the boundary.
    """
    if samples < 1:
        return np.zeros((0, n))
    gen = qmc.Halton(d=n, scramble=False)
    pts = []
    have = 0
    while have < samples:
        batch = 2.0 * gen.random(max(64, 2 * samples)) - 1.0
        batch = batch[(batch ** 2).sum(axis=1) <= 1.0]
        pts.append(batch)
        have += batch.shape[0]
    P = np.vstack(pts)[:samples]
    r = np.sqrt((P ** 2).sum(axis=1))
    live = r > 0
    return np.vstack([P, P[live] / r[live, None]])


def _candidate_shifts(n: int, x: float, b: int, samples: int) -> np.ndarray:
    axes = np.vstack([np.eye(n), -np.eye(n)])
    return np.vstack([x * unit_ball_cloud(n, samples), x * axes, (x / b) * axes])


def _refine(ks: np.ndarray, w: np.ndarray, s0: np.ndarray, x: float) -> tuple[float, np.ndarray]:
    """Local maximization of the squared second difference over |s| <= x."""
    def neg(s):
        return -float(_second_diff_sq(ks, w, s[None, :])[0])

    def neg_grad(s):
        ph = _phases(ks, s[None, :])[:, 0]
        coef = 8.0 * (np.cos(ph) - 1.0) * np.sin(ph) * w
        return (coef[:, None] * ks).sum(axis=0)

    cons = {"type": "ineq", "fun": lambda s: x * x - s @ s, "jac": lambda s: -2.0 * s}
    res = optimize.minimize(neg, s0, jac=neg_grad, method="SLSQP", constraints=[cons],
                            options={"maxiter": 100, "ftol": 1e-15})
    s = res.x
    r = math.sqrt(float(s @ s))
    if r > x:
        s = s * (x / r)
    return -neg(s), s


@dataclass(frozen=True)
class ModulusEstimate:
    """Sampled sup of the order-m modulus at radius x.

    `value` is a lower bound on the true sup.  `shifts` holds the best shift
    found for each multi-index (rows follow `alphas`).
    """

    x: float
    order: int
    value: float
    alphas: tuple
    shifts: np.ndarray
    per_alpha: np.ndarray
    samples: int

    def __float__(self) -> float:
        return self.value


def modulus_estimate(f: FourierMap, x: float, m: int = 0, samples: int = DEFAULT_SAMPLES,
                     b: int = 2, refine: bool = True) -> ModulusEstimate:
    """Order-m modified L2 modulus of f at radius x.

    For m >= 1 the sup is taken separately for each d^a f, |a| = m, and the
    results are combined as a root sum of squares.  Candidate shifts are the
    scaled unit-ball cloud plus the axis shifts of length x and x / b; the
    best candidate is then refined with SLSQP inside the ball.
    """
    if m < 0:
        raise ValueError("order must be nonnegative")
    if x < 0:
        raise ValueError("radius must be nonnegative")
    alphas = tuple(multi_indices(f.n, m)) if m > 0 else ((0,) * f.n,)
    shifts = np.zeros((len(alphas), f.n))
    per = np.zeros(len(alphas))
    if x == 0 or f.size == 0:
        return ModulusEstimate(float(x), m, 0.0, alphas, shifts, per, samples)
    S = _candidate_shifts(f.n, float(x), b, samples)
    for i, a in enumerate(alphas):
        g = derivative(f, a) if m > 0 else f
        w = (np.abs(g.cs) ** 2).sum(axis=1)
        vals = _second_diff_sq(g.ks, w, S)
        best = int(np.argmax(vals))
        v, s = float(vals[best]), S[best]
        if refine:
            rv, rs = _refine(g.ks, w, S[best].copy(), float(x))
            if rv > v:
                v, s = rv, rs
        per[i] = math.sqrt(max(v, 0.0))
        shifts[i] = s
    value = math.sqrt(math.fsum(per ** 2))
    return ModulusEstimate(float(x), m, value, alphas, shifts, per, samples)


def modified_modulus(f: FourierMap, x: float, m: int = 0, samples: int = DEFAULT_SAMPLES,
                     b: int = 2, refine: bool = True) -> float:
    """Value of `modulus_estimate`; a lower estimate of the true sup.

    Examples
    --------
    >>> f = FourierMap.cosine((1, 0))
    >>> round(modified_modulus(f, math.pi / 2), 5)
    1.41421
    """
    return modulus_estimate(f, x, m, samples, b, refine).value


def derivative_l2_bound(f: FourierMap, m: int) -> float:
    """4 (sum_{|a| = m} ||d^a f||^2)^(1/2), an upper bound for the order-m modulus."""
    alphas = multi_indices(f.n, m) if m > 0 else [(0,) * f.n]
    return 4.0 * math.sqrt(math.fsum(derivative(f, a).l2_norm() ** 2 for a in alphas))


# ---------------------------------------------------------------------------
# profiles and Dini sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModulusProfile:
    """Modulus values on a set of radii, stored in increasing x."""

    x: np.ndarray
    values: np.ndarray
    order: int = 0
    l: float = DEFAULT_SHIFT_SCALE
    samples: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if x.shape != v.shape or x.ndim != 1:
            raise ValueError("x and values must be 1-D of equal length")
        if (x <= 0).any():
            raise ValueError("abscissae must be positive")
        if (v < 0).any():
            raise ValueError("modulus values must be nonnegative")
        order = np.argsort(x, kind="stable")
        object.__setattr__(self, "x", x[order])
        object.__setattr__(self, "values", v[order])
        if not 0 < self.l < math.pi / 2:
            raise ValueError("shift scale l must lie in (0, pi/2)")

    @property
    def is_monotone(self) -> bool:
        return bool((np.diff(self.values) >= 0).all())

    @classmethod
    def from_function(cls, fn, b: int, nu_max: int, order: int = 0, nu_min: int = 0) -> "ModulusProfile":
        """Tabulate a closed-form modulus on the nodes b^-nu, nu = nu_min..nu_max."""
        x = float(b) ** -np.arange(nu_min, nu_max + 1)
        return cls(x, np.array([float(fn(t)) for t in x]), order)


def modulus_profile(f: FourierMap, m: int, b: int, nu_max: int, samples: int = DEFAULT_SAMPLES,
                    refine: bool = True) -> ModulusProfile:
    """Modulus of f on the nodes b^-nu, nu = 0..nu_max.

    Sampled estimates can dip below a neighbour at a smaller radius; the
    profile takes a running max in x, which keeps every entry a lower bound.
    """
    x = float(b) ** -np.arange(nu_max + 1)
    vals = np.array([modified_modulus(f, float(t), m, samples, b, refine) for t in x])
    asc = np.maximum.accumulate(vals[::-1])[::-1]
    return ModulusProfile(x, asc, m, DEFAULT_SHIFT_SCALE, samples)


@dataclass(frozen=True)
class DiniBracket:
    """Bracket of int_{b^-V-1}^{b^-nu_0} w(x)/x dx from a monotone profile on b^-nu nodes.

    `partial_lower` are the running sums of ln b * w(b^-nu), nu >= 1.
    """

    lower: float
    upper: float
    partial_lower: np.ndarray


def dini_sum(profile: ModulusProfile, b: int) -> DiniBracket:
    """lower = ln b sum_{nu>=1} w(b^-nu), upper = ln b sum_{nu>=0} w(b^-nu).

    Nodes may start at any nu_0 instead of 0; the sums then run from nu_0 + 1
    and nu_0.  On [b^-nu-1, b^-nu] a nondecreasing w satisfies
    w(b^-nu-1) ln b <= int w/x <= w(b^-nu) ln b, which gives the bracket.

    Examples
    --------
    >>> p = ModulusProfile.from_function(lambda t: t, 2, 60)
    >>> br = dini_sum(p, 2)
    >>> round(br.lower, 4), round(br.upper, 4)
    (0.6931, 1.3863)
    """
    if not profile.is_monotone:
        raise ValueError("profile is not nondecreasing in x")
    x_desc = profile.x[::-1]
    v_desc = profile.values[::-1]
    nus = -np.log(x_desc) / math.log(b)
    if not np.allclose(nus, nus[0] + np.arange(nus.size), atol=1e-9):
        raise ValueError("profile must sit on consecutive nodes b^-nu")
    lb = math.log(b)
    partial = lb * np.cumsum(v_desc[1:])
    lower = lb * math.fsum(v_desc[1:])
    upper = lb * math.fsum(v_desc)
    return DiniBracket(lower, upper, partial)


# ---------------------------------------------------------------------------
# block membership bound
# ---------------------------------------------------------------------------


def axis_shift_constant(n: int, b: int, l: float = DEFAULT_SHIFT_SCALE) -> float:
    """A-priori constant C with LHS_nu <= C * w^2(D^(tau+1) f, l b^-nu-1).

    On block nu the largest entry of k exceeds b^(nu-1)/n, so the axis shift
    of length l b^-nu-1 moves the phase by at least l / (n b^2) and at most
    l / b < pi/2.
    """
    return n / (4.0 * (1.0 - math.cos(l / (n * b * b))) ** 2)


@dataclass(frozen=True)
class MembershipReport:
    """Per-block comparison of block energy against the modulus at l b^-nu-1."""

    block_norm: float
    dini: DiniBracket
    lhs: np.ndarray
    rhs: np.ndarray
    ratios: np.ndarray
    max_ratio: float
    constant_bound: float
    modulus_sum: float

    @property
    def holds(self) -> bool:
        return bool(self.max_ratio <= self.constant_bound * (1 + 1e-9))


def dini_membership_bound(f: FourierMap, spec: BlockSpec, l: float = DEFAULT_SHIFT_SCALE,
                          samples: int = DEFAULT_SAMPLES) -> MembershipReport:
    """Check block energy against the (tau+1)-th order modulus, block by block.

    LHS_nu = sum_{|a| = tau+1} sum_{block nu} |f_k|^2 |k^a|^2 and
    RHS_nu = w^2(D^(tau+1) f, l b^-nu-1).  `ratios` are LHS_nu / RHS_nu, with
    0/0 read as 0; `constant_bound` is `axis_shift_constant`.  The dini
    bracket is taken over the nodes b^-nu up to one past the last block.
    """
    m = spec.tau + 1
    if abs(m - round(m)) > 0:
        raise ValueError("tau + 1 must be an integer")
    m = int(round(m))
    if not 0 < l < math.pi / 2:
        raise ValueError("shift scale l must lie in (0, pi/2)")
    b = spec.b
    total, series = weighted_block_norm(f, spec)
    nz = f.norms > 0
    ks, cs = f.ks[nz], f.cs[nz]
    nu_top = int(series.theta.size - 1) if f.size else 0
    blocks = block_indices(f.norms[nz], b) if ks.shape[0] else np.zeros(0, dtype=np.int64)
    kf = ks.astype(np.float64)
    w = (np.abs(cs) ** 2).sum(axis=1)
    moment = np.zeros(ks.shape[0])
    for a in multi_indices(f.n, m):
        moment += np.prod(kf ** np.asarray(a), axis=1) ** 2
    lhs = np.zeros(nu_top + 1)
    rhs = np.zeros(nu_top + 1)
    for nu in range(nu_top + 1):
        sel = blocks == nu
        lhs[nu] = math.fsum(w[sel] * moment[sel])
        rhs[nu] = modified_modulus(f, l * float(b) ** (-nu - 1), m, samples, b) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(lhs == 0, 0.0, lhs / rhs)
    prof = modulus_profile(f, m, b, nu_top + 1, samples)
    return MembershipReport(
        block_norm=total,
        dini=dini_sum(prof, b),
        lhs=lhs,
        rhs=rhs,
        ratios=ratios,
        max_ratio=float(ratios.max()) if ratios.size else 0.0,
        constant_bound=axis_shift_constant(f.n, b, l),
        modulus_sum=math.fsum(np.sqrt(rhs)),
    )

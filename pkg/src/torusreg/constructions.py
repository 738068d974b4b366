"""Explicit example maps: sharpness counterexamples and seeded test fixtures."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .lattice import (
    FourierMap,
    GridField,
    ShellSpectrum,
    analyze,
    enumerate_l1_ball,
    enumerate_nonnegative,
    half_lattice_mask,
)

# Theta_nu of the no-weak-derivative example is 2 / nu^4 because each block
# carries the conjugate pair +-k_nu; its block norm is sqrt(2) sum 1/nu^2.
PAIRING_FACTOR = math.sqrt(2.0)


@dataclass(frozen=True)
class SphereProfile:
    """Common magnitude h(nu) on the sphere |k| = b^(nu-1), nu = first..last."""

    n: int
    tau: float
    b: int
    log_alpha: float
    nu: tuple
    log_h: tuple

    def h(self, nu: int) -> float:
        return math.exp(self.log_h[self.nu.index(nu)])

    def spectrum(self) -> ShellSpectrum:
        return ShellSpectrum(self.n, tuple(self.b ** (v - 1) for v in self.nu), self.log_h)


def sphere_profile(n: int, tau: float, b: int, log_alpha: float, nu_max: int) -> SphereProfile:
    """Magnitudes for the critical sphere-supported example.

    For log_alpha <= 1, b^((2 tau + n + 1) nu / 2) h(nu) = 1 / (nu ln nu): the
    block norm diverges like sum 1/(nu ln nu) while the log^alpha weighted norm
    converges.  For log_alpha > 1 the decay is steepened to
    1 / (nu^((1 + log_alpha) / 2) ln nu), the borderline rate for the
    log^alpha weighted norm; then both norms converge.
    """
    if nu_max < 3:
        raise ValueError("nu_max must be >= 3")
    if log_alpha <= 0:
        raise ValueError("log_alpha must be positive")
    power = 1.0 if log_alpha <= 1 else (1.0 + log_alpha) / 2.0
    nus = tuple(range(2, nu_max + 1))
    lb = math.log(b)
    log_h = tuple(-(2 * tau + n + 1) * v / 2 * lb - power * math.log(v) - math.log(math.log(v))
                  for v in nus)
    return SphereProfile(n, tau, b, log_alpha, nus, log_h)


def critical_sphere_example(n: int, tau: float, b: int, log_alpha: float, nu_max: int) -> ShellSpectrum:
    """Sphere-supported map separating the log-weighted space from the block space.

    Support is exactly the spheres |k| = b^(nu-1), 2 <= nu <= nu_max, with
    equal real coefficients on each sphere.  Returned as a `ShellSpectrum`;
    call `.to_fourier_map()` when the support is small enough to enumerate.
    """
    return sphere_profile(n, tau, b, log_alpha, nu_max).spectrum()


def unbounded_derivative_example(n: int, tau: float, log_alpha: float, K: int) -> FourierMap:
    """Cosine series over k in N^n, 2 <= |k| <= K, all n components equal.

    The cosine amplitude is |k|^-(tau + 1 + n/2) (ln |k|)^-log_alpha, so the
    exponential coefficients at +-k are half of that.
    """
    if log_alpha <= 1:
        raise ValueError("log_alpha must exceed 1")
    if K < 3:
        raise ValueError("K must be >= 3")
    ks = np.vstack([enumerate_nonnegative(n, r) for r in range(2, K + 1)])
    r = ks.sum(axis=1).astype(np.float64)
    amp = r ** -(tau + 1 + n / 2) * np.log(r) ** -log_alpha
    half = np.repeat((amp / 2)[:, None], n, axis=1)
    return FourierMap(n, n, np.vstack([ks, -ks]), np.vstack([half, half]).astype(np.complex128))


def no_weak_derivative_example(n: int, tau: float, b: int, nu_max: int, d: int = 1) -> FourierMap:
    """One axis mode k_nu = (b^nu, 0, ..., 0) per block nu = 1..nu_max.

    The coefficient at +-k_nu is nu^-2 b^(-nu (tau + 1)), hence
    Theta_nu = 2 nu^-4 exactly (see PAIRING_FACTOR).
    """
    if nu_max < 2:
        raise ValueError("nu_max must be >= 2")
    ks, cs = [], []
    for nu in range(1, nu_max + 1):
        k = np.zeros(n, dtype=np.int64)
        k[0] = b ** nu
        c = nu ** -2.0 * float(b) ** (-nu * (tau + 1))
        ks += [k, -k]
        cs += [np.full(d, c), np.full(d, c)]
    return FourierMap(n, d, np.array(ks), np.array(cs, dtype=np.complex128))


def random_band_limited(n: int, d: int, K: int, decay: float, seed: int) -> FourierMap:
    """Seeded real map with zero mean, support |k| <= K and |f_k| <= |k|^-decay."""
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = np.random.default_rng(seed)
    ks = enumerate_l1_ball(n, K, include_zero=False)
    ks = ks[half_lattice_mask(ks)]
    r = np.abs(ks).sum(axis=1).astype(np.float64)
    mag = rng.uniform(0.0, 1.0, size=(ks.shape[0], d)) * (r ** -decay / math.sqrt(d))[:, None]
    phase = rng.uniform(0.0, 2.0 * math.pi, size=(ks.shape[0], d))
    c = mag * np.exp(1j * phase)
    return FourierMap(n, d, np.vstack([ks, -ks]), np.vstack([c, np.conj(c)]))


# ---------------------------------------------------------------------------
# singular profile
# ---------------------------------------------------------------------------


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    out = np.zeros_like(t)
    inner = (t > 0) & (t < 1)
    a = np.exp(-1.0 / t[inner])
    c = np.exp(-1.0 / (1.0 - t[inner]))
    out[inner] = a / (a + c)
    out[t >= 1] = 1.0
    return out


@dataclass(frozen=True)
class SingularProfile:
    """Radial profile that blows up like r^-mu (-ln r)^-eta at the origin.

    Radii are measured in the rescaled cell [-1/2, 1/2)^n of the torus
    (y = x / 2 pi).  The cutoff equals 1 on r <= inner and 0 on r >= outer.
    """

    n: int
    sigma: float
    inner: float = 0.125
    outer: float = 0.25

    def __post_init__(self):
        if self.sigma <= 0.5:
            raise ValueError("sigma must exceed 1/2 for a square-integrable target")
        if not 0 < self.inner < self.outer <= 0.5:
            raise ValueError("need 0 < inner < outer <= 1/2")

    @property
    def mu(self) -> float:
        return self.n / 2.0

    @property
    def eta(self) -> float:
        return self.sigma

    def cutoff(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        return 1.0 - _smooth_step((r - self.inner) / (self.outer - self.inner))

    def _bare(self, r):
        return r ** -self.mu * (-np.log(r)) ** -self.eta

    def target(self, r) -> np.ndarray:
        """cutoff(r) r^-mu (-ln r)^-eta for r > 0."""
        r = np.asarray(r, dtype=np.float64)
        out = np.zeros_like(r)
        live = (r > 0) & (r < self.outer)
        out[live] = self.cutoff(r[live]) * self._bare(r[live])
        out[r == 0] = np.inf
        return out

    def potential(self, r: float, order: int | None = None) -> float:
        """`order`-fold iterated integral of the target from r out to 1/2.

        Uses the repeated-integration formula
        int_r^R (v - r)^(j-1) / (j-1)! target(v) dv, so each value is one
        adaptive quadrature.
        """
        j = self.n if order is None else order
        if r >= self.outer:
            return 0.0
        fact = math.factorial(j - 1)

        def integrand(v):
            return (v - r) ** (j - 1) / fact * float(self.target(v))

        pieces = []
        lo = r
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for hi in (self.inner, self.outer):
                if hi > lo:
                    val, _ = integrate.quad(integrand, lo, hi, limit=400, epsabs=1e-15, epsrel=1e-10)
                    pieces.append(val)
                    lo = hi
        return math.fsum(pieces)

    def potential_table(self, radii: np.ndarray, order: int | None = None) -> np.ndarray:
        """`potential` at many radii from cumulative moment integrals.

        With M_i(r) = int_r^outer v^i target(v) dv, the iterated integral is
        sum_i C(j-1, i) (-r)^(j-1-i) M_i(r) / (j-1)!.  Moments are integrated
        piecewise between consecutive radii and summed outward-in.
        """
        j = self.n if order is None else order
        radii = np.asarray(radii, dtype=np.float64)
        live = np.unique(np.concatenate([radii[(radii > 0) & (radii < self.outer)],
                                         [self.inner, self.outer]]))
        live = live[live <= self.outer]
        moments = np.zeros((j, live.size))
        with warnings.catch_warnings():
            # adjacent radii can be ~1e-6 apart; roundoff notices there are noise
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for i in range(j):
                pieces = [integrate.quad(lambda v: v ** i * float(self.target(v)), a, b,
                                         epsabs=1e-16, epsrel=1e-11, limit=100)[0]
                          for a, b in zip(live[:-1], live[1:])]
                moments[i, :-1] = np.cumsum(pieces[::-1])[::-1]
        fact = math.factorial(j - 1)
        table = np.zeros(live.size)
        for i in range(j):
            table += math.comb(j - 1, i) * (-live) ** (j - 1 - i) * moments[i]
        table /= fact
        out = np.zeros(radii.shape)
        pos = (radii > 0) & (radii < self.outer)
        out[pos] = table[np.searchsorted(live, radii[pos])]
        if (radii == 0).any():
            out[radii == 0] = self.potential(0.0, j)
        return out

    def l2_reduced(self) -> float:
        """Integral of target^2 over |y| <= 1/2 via the 1-D radial reduction.

        |S^(n-1)| [ (ln(1/inner))^(1-2 sigma) / (2 sigma - 1)
                    + int_inner^outer cutoff^2 r^-1 (-ln r)^-2 sigma dr ].
        """
        area = 2 * math.pi ** (self.n / 2) / math.gamma(self.n / 2)
        s2 = 2 * self.sigma
        core = math.log(1.0 / self.inner) ** (1.0 - s2) / (s2 - 1.0)
        shell, _ = integrate.quad(lambda r: float(self.cutoff(r)) ** 2 / r * (-math.log(r)) ** -s2,
                                  self.inner, self.outer, epsabs=0.0, epsrel=1e-12)
        return area * (core + shell)

    def l2_cartesian(self) -> float:
        """Integral of target^2 over the plane by 2-D Cartesian quadrature (n = 2).

        The quadrant [0, 1/2]^2 is split along the diagonal; on the lower
        triangle y = x t and x = exp(-s), which turns the corner singularity
        into a slowly decaying tail in s that QUADPACK integrates on
        [ln 2, inf).  The integrand is called at Cartesian points.
        """
        if self.n != 2:
            raise NotImplementedError("Cartesian check implemented for n = 2")

        log_inner = math.log(self.inner)

        def g2_jac(s, t):
            # target(x, x t)^2 * x^2 with x = exp(-s), in log form
            log_r = -s + 0.5 * math.log1p(t * t)
            if log_r >= math.log(self.outer):
                return 0.0
            cut = 1.0 if log_r <= log_inner else float(self.cutoff(math.exp(log_r)))
            return cut * cut * math.exp(-2 * self.mu * log_r - 2 * self.eta * math.log(-log_r) - 2 * s)

        def inner(s):
            # split where x sqrt(1 + t^2) crosses the cutoff edges
            x = math.exp(-s)
            cuts = [math.sqrt((e / x) ** 2 - 1.0) for e in (self.inner, self.outer) if x < e < x * math.sqrt(2.0)]
            edges = [0.0, *sorted(cuts), 1.0]
            return math.fsum(integrate.quad(lambda t: g2_jac(s, t), a, b, epsabs=1e-15, epsrel=1e-11)[0]
                             for a, b in zip(edges[:-1], edges[1:]))

        lower, _ = integrate.quad(inner, math.log(2.0), math.log(1.0 / self.outer) + 1.0,
                                  epsabs=0.0, epsrel=1e-11, limit=200)
        tail, _ = integrate.quad(inner, math.log(1.0 / self.outer) + 1.0, np.inf,
                                 epsabs=0.0, epsrel=1e-11, limit=400)
        # 4 quadrants, 2 triangles each
        return 8.0 * (lower + tail)


def _cell_radii_sq(n: int, N: int) -> np.ndarray:
    """Integer squared radii N^2 |y|^2 of grid nodes in the centered cell."""
    idx = np.arange(N)
    idx = np.where(idx < N // 2, idx, idx - N)
    mesh = np.meshgrid(*([idx] * n), indexing="ij")
    return sum(m.astype(np.int64) ** 2 for m in mesh)


def singular_example(n: int, sigma: float, N: int, K: int,
                     profile: SingularProfile | None = None) -> tuple[GridField, FourierMap, GridField]:
    """Radial map whose n-th radial derivative follows the singular target.

    Returns (f on the grid, its Fourier map truncated at |k| <= K, target on
    the grid).  The target node at the singularity is replaced by its value
    on the nearest shell of nodes.
    """
    if N < 64 or N & (N - 1):
        raise ValueError("N must be a power of two >= 64")
    prof = profile or SingularProfile(n, sigma)
    rsq = _cell_radii_sq(n, N)
    uniq, inv = np.unique(rsq, return_inverse=True)
    radii = np.sqrt(uniq.astype(np.float64)) / N
    pot = prof.potential_table(radii)
    fvals = pot[inv.reshape(rsq.shape)][..., None]
    tgt = prof.target(radii)
    tgt[0] = tgt[1]  # uniq[0] == 0; uniq[1] is the nearest shell, a single radius
    gvals = tgt[inv.reshape(rsq.shape)][..., None]
    fgrid = GridField(n, 1, N, fvals)
    return fgrid, analyze(fgrid, K), GridField(n, 1, N, gvals)

"""Sparse Fourier maps on the n-torus and lattice utilities.

A map f: T^n -> R^d is stored by its exponential Fourier coefficients

    f(x) = sum_k f_k exp(i <k, x>),   k in Z^n,

with respect to normalized Haar measure, so that Parseval reads
||f||^2_{L^2} = sum_k |f_k|^2.  Coefficients are kept as a pair of arrays
(lattice points, complex values) sorted lexicographically by k.  Real maps
store both k and -k.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

MAX_DIM = 8
_CHUNK = 1 << 22


class AliasingWarning(UserWarning):
    """Grid too coarse to represent a band-limited map exactly."""


# ---------------------------------------------------------------------------
# lattice helpers
# ---------------------------------------------------------------------------


def l1_norm(k: Sequence[int]) -> int:
    """Return |k| = sum_j |k_j|."""
    return int(sum(abs(int(kj)) for kj in k))


def block_index(k, b: int) -> int:
    """Block number nu >= 0 with b**(nu-1) < |k| <= b**nu.

    `k` may be a lattice point or its l1 norm.  Uses integer powers only, so
    the boundary |k| = b**nu always lands in block nu.
    """
    if b < 2:
        raise ValueError("base b must be >= 2")
    r = int(k) if np.isscalar(k) else l1_norm(k)
    if r < 1:
        raise ValueError("k = 0 belongs to no block")
    nu, p = 0, 1
    while p < r:
        p *= b
        nu += 1
    return nu


def block_indices(norms: np.ndarray, b: int) -> np.ndarray:
    """Vectorized `block_index` over an integer array of l1 norms (all >= 1)."""
    norms = np.asarray(norms, dtype=np.int64)
    if norms.size == 0:
        return np.zeros(0, dtype=np.int64)
    if norms.min() < 1:
        raise ValueError("k = 0 belongs to no block")
    top = int(norms.max())
    powers = [1]
    while powers[-1] < top:
        powers.append(powers[-1] * b)
    return np.searchsorted(np.array(powers, dtype=np.int64), norms, side="left").astype(np.int64)


def sphere_count(n: int, r: int) -> int:
    """Number of lattice points in Z^n with |k| = r (exact integer)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if r < 0:
        return 0
    if r == 0:
        return 1
    # choose j nonzero coordinates, their signs, and a composition of r into j parts
    return sum(2**j * math.comb(n, j) * math.comb(r - 1, j - 1) for j in range(1, min(n, r) + 1))


def _lex_order(ks: np.ndarray) -> np.ndarray:
    if ks.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.lexsort(ks.T[::-1])


def enumerate_l1_sphere(n: int, r: int) -> np.ndarray:
    """All k in Z^n with |k| = r, as an (S_n(r), n) integer array in lex order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if r < 0:
        return np.zeros((0, n), dtype=np.int64)
    if n == 1:
        pts = np.array([[0]] if r == 0 else [[-r], [r]], dtype=np.int64)
        return pts
    if n == 2:
        k1 = np.arange(-r, r + 1, dtype=np.int64)
        rem = r - np.abs(k1)
        pts = np.stack([np.repeat(k1, 2), np.stack([-rem, rem], axis=1).reshape(-1)], axis=1)
        keep = np.ones(pts.shape[0], dtype=bool)
        keep[1::2] = rem > 0
        return pts[keep]
    parts = []
    for k1 in range(-r, r + 1):
        sub = enumerate_l1_sphere(n - 1, r - abs(k1))
        head = np.full((sub.shape[0], 1), k1, dtype=np.int64)
        parts.append(np.hstack([head, sub]))
    return np.vstack(parts)


def enumerate_l1_ball(n: int, K: int, include_zero: bool = True) -> np.ndarray:
    """All k with |k| <= K (lex order)."""
    start = 0 if include_zero else 1
    if K < start:
        return np.zeros((0, n), dtype=np.int64)
    ks = np.vstack([enumerate_l1_sphere(n, r) for r in range(start, K + 1)])
    return ks[_lex_order(ks)]


def enumerate_nonnegative(n: int, r: int) -> np.ndarray:
    """All k in N^n (entries >= 0) with |k| = r, lex order."""
    ks = enumerate_l1_sphere(n, r)
    return ks[(ks >= 0).all(axis=1)]


def half_lattice_mask(ks: np.ndarray) -> np.ndarray:
    """True where the first nonzero entry of k is positive (one of each +-k pair)."""
    ks = np.asarray(ks)
    nz = ks != 0
    first = np.argmax(nz, axis=1)
    lead = ks[np.arange(ks.shape[0]), first]
    return nz.any(axis=1) & (lead > 0)


# ---------------------------------------------------------------------------
# Fourier maps
# ---------------------------------------------------------------------------


def _canonical(ks: np.ndarray, cs: np.ndarray):
    """Sort lexicographically and merge duplicate lattice points by addition."""
    if ks.shape[0] == 0:
        return ks, cs
    uniq, inv = np.unique(ks, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    if uniq.shape[0] == ks.shape[0]:
        order = _lex_order(ks)
        return ks[order], cs[order]
    merged = np.zeros((uniq.shape[0], cs.shape[1]), dtype=np.complex128)
    np.add.at(merged, inv, cs)
    order = _lex_order(uniq)
    return uniq[order], merged[order]


@dataclass(frozen=True, eq=False)
class FourierMap:
    """Finitely supported Fourier series of a map T^n -> C^d.

    Attributes
    ----------
    n : int
        Torus dimension.
    d : int
        Number of components (1 for scalars, n for vector fields).
    ks : (m, n) int64 array
        Lattice points, sorted lexicographically, unique.
    cs : (m, d) complex128 array
        Coefficients, row i belongs to ks[i].
    real : bool
        Whether the map is real valued (c_{-k} = conj(c_k)).
    """

    n: int
    d: int
    ks: np.ndarray
    cs: np.ndarray
    real: bool = True

    def __post_init__(self):
        if not 1 <= self.n <= MAX_DIM:
            raise ValueError(f"dimension n={self.n} outside 1..{MAX_DIM}")
        ks = np.asarray(self.ks, dtype=np.int64).reshape(-1, self.n)
        cs = np.asarray(self.cs, dtype=np.complex128).reshape(ks.shape[0], self.d)
        ks, cs = _canonical(ks, cs)
        ks.setflags(write=False)
        cs.setflags(write=False)
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "cs", cs)

    # -- constructors -------------------------------------------------------

    @classmethod
    def zeros(cls, n: int, d: int = 1) -> "FourierMap":
        return cls(n, d, np.zeros((0, n), dtype=np.int64), np.zeros((0, d)))

    @classmethod
    def constant(cls, n: int, values) -> "FourierMap":
        values = np.atleast_1d(np.asarray(values, dtype=np.complex128))
        return cls(n, values.size, np.zeros((1, n), dtype=np.int64), values[None, :],
                   real=bool(np.all(values.imag == 0)))

    @classmethod
    def from_modes(cls, modes: Mapping[Sequence[int], object], n: int | None = None,
                   d: int | None = None, real: bool = True) -> "FourierMap":
        """Build from a mapping k -> coefficient (scalar or length-d sequence)."""
        items = list(modes.items())
        if n is None:
            if not items:
                raise ValueError("cannot infer n from an empty mapping")
            n = len(items[0][0])
        vals = [np.atleast_1d(np.asarray(v, dtype=np.complex128)) for _, v in items]
        if d is None:
            d = vals[0].size if vals else 1
        ks = np.array([list(k) for k, _ in items], dtype=np.int64).reshape(-1, n)
        cs = np.array(vals, dtype=np.complex128).reshape(-1, d)
        return cls(n, d, ks, cs, real=real)

    @classmethod
    def cosine(cls, k: Sequence[int], amplitude=1.0, d: int = 1) -> "FourierMap":
        """amplitude * cos<k, x>; `amplitude` may be a length-d vector."""
        k = np.asarray(k, dtype=np.int64)
        amp = np.broadcast_to(np.asarray(amplitude, dtype=np.complex128), (d,))
        return cls(k.size, d, np.vstack([k, -k]), np.vstack([amp / 2, amp / 2]))

    @classmethod
    def sine(cls, k: Sequence[int], amplitude=1.0, d: int = 1) -> "FourierMap":
        """amplitude * sin<k, x>."""
        k = np.asarray(k, dtype=np.int64)
        amp = np.broadcast_to(np.asarray(amplitude, dtype=np.complex128), (d,))
        return cls(k.size, d, np.vstack([k, -k]), np.vstack([amp / 2j, -amp / 2j]))

    # -- basic queries ------------------------------------------------------

    @property
    def size(self) -> int:
        return self.ks.shape[0]

    @cached_property
    def norms(self) -> np.ndarray:
        """l1 norms |k| of the stored lattice points."""
        return np.abs(self.ks).sum(axis=1)

    @cached_property
    def _index(self) -> dict:
        return {tuple(int(v) for v in k): i for i, k in enumerate(self.ks)}

    def coeff(self, k: Sequence[int]) -> np.ndarray:
        i = self._index.get(tuple(int(v) for v in k))
        if i is None:
            return np.zeros(self.d, dtype=np.complex128)
        return self.cs[i].copy()

    def mean(self) -> np.ndarray:
        return self.coeff((0,) * self.n)

    @property
    def support_radius(self) -> int:
        return int(self.norms.max()) if self.size else 0

    @property
    def max_frequency(self) -> int:
        """Largest per-axis |k_j| in the support."""
        return int(np.abs(self.ks).max()) if self.size else 0

    def energy(self) -> np.ndarray:
        """Per-mode |f_k|^2 summed over components."""
        return (np.abs(self.cs) ** 2).sum(axis=1)

    def l2_norm(self) -> float:
        return math.sqrt(math.fsum(self.energy()))

    # -- derived maps -------------------------------------------------------

    def _replace(self, ks=None, cs=None, real=None, d=None) -> "FourierMap":
        return FourierMap(self.n, self.d if d is None else d,
                          self.ks if ks is None else ks,
                          self.cs if cs is None else cs,
                          self.real if real is None else real)

    def truncate(self, K: int) -> "FourierMap":
        keep = self.norms <= K
        return self._replace(self.ks[keep], self.cs[keep])

    def without_mean(self) -> "FourierMap":
        keep = self.norms > 0
        return self._replace(self.ks[keep], self.cs[keep])

    def prune(self, tol: float) -> "FourierMap":
        """Drop modes whose largest component magnitude is <= tol."""
        if tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.size == 0:
            return self
        keep = np.abs(self.cs).max(axis=1) > tol
        return self._replace(self.ks[keep], self.cs[keep])

    def component(self, j: int) -> "FourierMap":
        return self._replace(cs=self.cs[:, j:j + 1], d=1)

    def conj_mismatch(self) -> float:
        """max |c_{-k} - conj(c_k)| over the support (0 for a valid real map)."""
        if self.size == 0:
            return 0.0
        neg = FourierMap(self.n, self.d, -self.ks, np.conj(self.cs), real=False)
        return max_coeff_diff(self._replace(real=False), neg)

    def symmetrized(self) -> "FourierMap":
        """Project onto real maps: c_k <- (c_k + conj(c_{-k})) / 2."""
        neg = FourierMap(self.n, self.d, -self.ks, np.conj(self.cs), real=False)
        both = FourierMap(self.n, self.d, np.vstack([self.ks, neg.ks]),
                          np.vstack([self.cs, neg.cs]) / 2, real=True)
        return both

    def validate_real(self, tol: float = 1e-14) -> None:
        scale = max(1.0, float(np.abs(self.cs).max())) if self.size else 1.0
        bad = self.conj_mismatch()
        if bad > tol * scale:
            raise ValueError(f"realness violated: conjugate mismatch {bad:.3e}")

    def __add__(self, other: "FourierMap") -> "FourierMap":
        if not isinstance(other, FourierMap):
            return NotImplemented
        if (self.n, self.d) != (other.n, other.d):
            raise ValueError("shape mismatch")
        return FourierMap(self.n, self.d, np.vstack([self.ks, other.ks]),
                          np.vstack([self.cs, other.cs]), real=self.real and other.real)

    def __neg__(self) -> "FourierMap":
        return self._replace(cs=-self.cs)

    def __sub__(self, other: "FourierMap") -> "FourierMap":
        return self + (-other)

    def __mul__(self, a) -> "FourierMap":
        a = complex(a)
        return self._replace(cs=self.cs * a, real=self.real and a.imag == 0)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return (f"FourierMap(n={self.n}, d={self.d}, modes={self.size}, "
                f"radius={self.support_radius}, real={self.real})")


def max_coeff_diff(f: FourierMap, g: FourierMap) -> float:
    """Largest coefficient difference over the union of the two supports."""
    diff = f - g
    return float(np.abs(diff.cs).max()) if diff.size else 0.0


def stack_components(maps: Sequence[FourierMap]) -> FourierMap:
    """Concatenate scalar (or vector) maps on the same torus into one map."""
    n = maps[0].n
    ks = np.vstack([m.ks for m in maps])
    offset = 0
    total = sum(m.d for m in maps)
    cs = np.zeros((ks.shape[0], total), dtype=np.complex128)
    row = 0
    for m in maps:
        cs[row:row + m.size, offset:offset + m.d] = m.cs
        row += m.size
        offset += m.d
    return FourierMap(n, total, ks, cs, real=all(m.real for m in maps))


def derivative(f: FourierMap, a: Sequence[int]) -> FourierMap:
    """Partial derivative d^a f: multiply c_k by prod_j (i k_j)^{a_j}."""
    a = np.asarray(a, dtype=np.int64)
    if a.shape != (f.n,) or (a < 0).any():
        raise ValueError("multi-index must have n nonnegative entries")
    order = int(a.sum())
    mult = (1j ** order) * np.prod(f.ks.astype(np.float64) ** a, axis=1)
    return f._replace(cs=f.cs * mult[:, None])


def gradient(f: FourierMap) -> FourierMap:
    """Jacobian as a map with d*n components, component c*n + j = d_j f_c."""
    parts = []
    for c in range(f.d):
        fc = f.component(c)
        for j in range(f.n):
            a = np.zeros(f.n, dtype=np.int64)
            a[j] = 1
            parts.append(derivative(fc, a))
    return stack_components(parts)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate_points(f: FourierMap, X: np.ndarray, complex_values: bool = False) -> np.ndarray:
    """Evaluate f at points X of shape (p, n); returns (p, d).

    Summation order is fixed (no BLAS reductions), so results do not depend
    on thread counts.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not f.real and not complex_values:
        raise ValueError("map is not real; pass complex_values=True")
    p = X.shape[0]
    out = np.zeros((p, f.d), dtype=np.complex128)
    if f.size == 0:
        return out if complex_values else out.real
    kf = f.ks.astype(np.float64)
    step = max(1, _CHUNK // max(f.size, 1))
    for lo in range(0, p, step):
        xs = X[lo:lo + step]
        phase = np.zeros((xs.shape[0], f.size))
        for j in range(f.n):
            phase += xs[:, j, None] * kf[None, :, j]
        out[lo:lo + step] = np.einsum("pm,md->pd", np.exp(1j * phase), f.cs)
    if complex_values:
        return out
    scale = float(np.abs(f.cs).sum())
    resid = float(np.abs(out.imag).max()) if p else 0.0
    if resid > 1e-10 * max(scale, 1e-300):
        raise ValueError(f"imaginary residue {resid:.3e} too large for a real map")
    return out.real


def evaluate(f: FourierMap, x: Sequence[float], complex_values: bool = False) -> np.ndarray:
    """Value of f at a single point (length-d array)."""
    return evaluate_points(f, np.asarray(x, dtype=np.float64)[None, :], complex_values)[0]


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of a map on the uniform grid (2 pi / N) {0..N-1}^n.

    `values` has shape (N,) * n + (d,), row-major over nodes.
    """

    n: int
    d: int
    N: int
    values: np.ndarray

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.N,) * self.n + (self.d,):
            raise ValueError(f"values shape {vals.shape} does not match n={self.n}, "
                             f"d={self.d}, N={self.N}")
        object.__setattr__(self, "values", vals)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1, self.d)

    def mean_square(self) -> float:
        """Grid quadrature of the normalized L^2 norm squared."""
        return float(np.mean((self.values ** 2).sum(axis=-1)))


def grid_axis(N: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(N) / N


def grid_points(n: int, N: int) -> np.ndarray:
    """Grid nodes as an (N**n, n) array in the row-major order of GridField."""
    axes = np.meshgrid(*([grid_axis(N)] * n), indexing="ij")
    return np.stack([a.reshape(-1) for a in axes], axis=1)


def synthesize(f: FourierMap, N: int) -> GridField:
    """Sample a real map on the N^n grid via inverse FFT."""
    if not f.real:
        raise ValueError("synthesize requires a real map")
    if f.size and 2 * f.max_frequency >= N:
        warnings.warn(f"N={N} too small for max frequency {f.max_frequency}; "
                      "samples are aliased", AliasingWarning, stacklevel=2)
    dense = np.zeros((N,) * f.n + (f.d,), dtype=np.complex128)
    idx = tuple((f.ks % N).T)
    np.add.at(dense, idx, f.cs)
    axes = tuple(range(f.n))
    vals = np.fft.ifftn(dense, axes=axes) * float(N) ** f.n
    return GridField(f.n, f.d, N, vals.real)


def _reflect(X: np.ndarray, axes) -> np.ndarray:
    """X[-k] along the given axes (index i -> -i mod N)."""
    return np.roll(np.flip(X, axis=axes), 1, axis=axes)


def analyze(g: GridField, K: int, prune: float = 0.0) -> FourierMap:
    """Fourier coefficients of grid samples, truncated to |k| <= K.

    Nyquist modes (|k_j| = N/2) are discarded.  The result is projected onto
    exactly conjugate-symmetric coefficients.
    """
    axes = tuple(range(g.n))
    X = np.fft.fftn(g.values, axes=axes) / float(g.N) ** g.n
    X = 0.5 * (X + np.conj(_reflect(X, axes)))
    freqs = np.rint(np.fft.fftfreq(g.N) * g.N).astype(np.int64)
    mesh = np.meshgrid(*([freqs] * g.n), indexing="ij")
    ks = np.stack([m.reshape(-1) for m in mesh], axis=1)
    cs = X.reshape(-1, g.d)
    keep = (np.abs(ks).sum(axis=1) <= K) & (np.abs(ks) < g.N / 2).all(axis=1)
    if prune > 0:
        keep &= np.abs(cs).max(axis=1) > prune
    return FourierMap(g.n, g.d, ks[keep], cs[keep], real=True)



@dataclass(frozen=True)
class ShellSpectrum:
    """Scalar real map with one common coefficient magnitude per l1 sphere.

    Every lattice point with |k| = radii[i] carries the real positive
    coefficient exp(log_mag[i]); the map is sum_k c_k cos<k, x>-type and
    real because spheres are symmetric under k -> -k.  Norms are evaluated
    from exact sphere counts in log space, so radii far beyond anything
    enumerable (e.g. 2**59) are fine.
    """

    n: int
    radii: tuple
    log_mag: tuple

    def __post_init__(self):
        radii = tuple(int(r) for r in self.radii)
        if len(radii) != len(self.log_mag):
            raise ValueError("radii and log_mag differ in length")
        if any(r < 1 for r in radii) or list(radii) != sorted(set(radii)):
            raise ValueError("radii must be distinct, ascending and >= 1")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "log_mag", tuple(float(v) for v in self.log_mag))

    d = 1
    real = True

    @property
    def counts(self) -> list:
        return [sphere_count(self.n, r) for r in self.radii]

    @property
    def total_points(self) -> int:
        return sum(self.counts)

    def to_fourier_map(self, max_points: int = 2_000_000) -> FourierMap:
        """Materialize the lattice support (refused when it is too large)."""
        if self.total_points > max_points:
            raise ValueError(f"{self.total_points} lattice points exceed max_points={max_points}")
        n = self.n
        if not self.radii:
            return FourierMap.zeros(n)
        ks = np.vstack([enumerate_l1_sphere(n, r) for r in self.radii])
        mags = np.concatenate([np.full(c, math.exp(lm)) for c, lm in zip(self.counts, self.log_mag)])
        return FourierMap(n, 1, ks, mags[:, None].astype(np.complex128), real=True)

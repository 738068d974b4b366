"""Frequency vectors, small divisors and brute-force Diophantine constants.

Divisors are the raw inner products <k, omega> of the flow case; nothing is
reduced mod 1.  Scans run over the half lattice (first nonzero entry of k
positive), which loses nothing because |<-k, omega>| = |<k, omega>|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .lattice import enumerate_l1_sphere, half_lattice_mask

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class Certificate:
    """|<k, omega>| >= dioph_alpha / |k|^tau verified for all 0 < |k| <= K_tested."""

    tau: float
    dioph_alpha: float
    K_tested: int


@dataclass(frozen=True)
class Frequency:
    omega: tuple
    certificate: Optional[Certificate] = None

    def __post_init__(self):
        om = tuple(float(w) for w in self.omega)
        if len(om) < 1:
            raise ValueError("omega must be nonempty")
        if not all(math.isfinite(w) for w in om):
            raise ValueError("omega must be finite")
        object.__setattr__(self, "omega", om)

    @property
    def n(self) -> int:
        return len(self.omega)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.omega, dtype=np.float64)

    def certified(self, tau: float, K: int) -> "Frequency":
        """Copy carrying a certificate from a fresh `dioph_constant` scan."""
        est = dioph_constant(self, tau, K)
        return Frequency(self.omega, Certificate(float(tau), est.alpha, int(K)))

    def verify(self) -> bool:
        """Re-run the scan and compare with the stored certificate exactly."""
        if self.certificate is None:
            raise ValueError("no certificate to verify")
        c = self.certificate
        return dioph_constant(self, c.tau, c.K_tested).alpha == c.dioph_alpha


FrequencyLike = Union[Frequency, Sequence[float], np.ndarray]


def as_frequency(omega: FrequencyLike) -> Frequency:
    return omega if isinstance(omega, Frequency) else Frequency(tuple(np.ravel(omega)))


def small_divisor(omega: FrequencyLike, k: Sequence[int]) -> float:
    """|<k, omega>| with compensated summation.

    Examples
    --------
    >>> round(small_divisor((1.0, GOLDEN), (-1, 1)), 10)
    0.6180339887
    """
    om = as_frequency(omega).omega
    k = [int(x) for x in k]
    if len(k) != len(om):
        raise ValueError("k and omega have different lengths")
    if not any(k):
        raise ValueError("k must be nonzero")
    return abs(math.fsum(a * w for a, w in zip(k, om)))


def half_shell(n: int, r: int) -> np.ndarray:
    """Half-lattice points of the sphere |k| = r, lex order."""
    if r < 1:
        return np.zeros((0, n), dtype=np.int64)
    if n == 2:
        k1 = np.arange(1, r, dtype=np.int64)
        rem = r - k1
        mid = np.stack([np.repeat(k1, 2), np.stack([-rem, rem], axis=1).reshape(-1)], axis=1)
        return np.vstack([[[0, r]], mid, [[r, 0]]]).astype(np.int64)
    ks = enumerate_l1_sphere(n, r)
    return ks[half_lattice_mask(ks)]


def _divisors(ks: np.ndarray, om: np.ndarray) -> np.ndarray:
    out = np.zeros(ks.shape[0])
    for j in range(ks.shape[1]):
        out += ks[:, j].astype(np.float64) * om[j]
    return np.abs(out)


def _lex_less(a: Sequence[int], b: Sequence[int]) -> bool:
    return tuple(a) < tuple(b)


@dataclass(frozen=True)
class ShellRecord:
    r: int
    shell_min: float
    running_alpha: float
    argmin: tuple


@dataclass(frozen=True)
class DiophEstimate:
    """alpha = min over 0 < |k| <= K of |<k, omega>| |k|^tau and its argmin."""

    alpha: float
    argmin: tuple
    tau: float
    K: int
    shells: tuple

    def rows(self):
        """(r, shell_min, running_alpha, argmin...) per shell, for CSV output."""
        return [(s.r, s.shell_min, s.running_alpha, *s.argmin) for s in self.shells]


def dioph_constant(omega: FrequencyLike, tau: float, K: int) -> DiophEstimate:
    """Exhaustive scan of |<k, omega>| |k|^tau over 0 < |k| <= K.

    Ties are broken by the lexicographically smallest half-lattice k.  The
    winning value is recomputed with `small_divisor`.

    Examples
    --------
    >>> est = dioph_constant((1.0, math.sqrt(2.0)), 1.0, 10)
    >>> round(est.alpha, 5), est.argmin
    (0.82843, (1, -1))
    """
    freq = as_frequency(omega)
    if K < 1:
        raise ValueError("K must be >= 1")
    om = freq.array
    best_v, best_k = math.inf, None
    shells = []
    for r in range(1, K + 1):
        ks = half_shell(freq.n, r)
        vals = _divisors(ks, om) * float(r) ** tau
        i = int(np.argmin(vals))
        # exact values for everything within rounding of the shell minimum
        near = np.flatnonzero(vals <= vals[i] * (1 + 1e-9) + 1e-300)
        exact = [(small_divisor(freq, ks[j]) * float(r) ** tau, tuple(int(x) for x in ks[j])) for j in near]
        v, k = min(exact)
        if v < best_v or (v == best_v and _lex_less(k, best_k)):
            best_v, best_k = v, k
        shells.append(ShellRecord(r, v, best_v, k))
    return DiophEstimate(best_v, best_k, float(tau), int(K), tuple(shells))


def is_resonant(omega: FrequencyLike, K: int, tol: float) -> Optional[tuple]:
    """First k (by |k|, then lex) with 0 < |k| <= K and |<k, omega>| < tol."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    freq = as_frequency(omega)
    om = freq.array
    for r in range(1, K + 1):
        ks = half_shell(freq.n, r)
        vals = _divisors(ks, om)
        for j in np.flatnonzero(vals < tol * (1 + 1e-9)):
            if small_divisor(freq, ks[j]) < tol:
                return tuple(int(x) for x in ks[j])
    return None


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------


def algebraic_frequency(n: int, K: int = 50) -> Frequency:
    """(1, 2^(1/n), ..., 2^((n-1)/n)) certified with tau = n - 1 up to K."""
    if n < 2:
        raise ValueError("n must be >= 2")
    om = tuple(2.0 ** (j / n) for j in range(n))
    return Frequency(om).certified(n - 1, K)


def golden_frequency() -> Frequency:
    return Frequency((1.0, GOLDEN))


def liouville_number(terms: int = 3, base: int = 10) -> float:
    """Partial sum sum_{j=1..terms} base^(-j!).

    In double precision only the first three terms of base 10 survive, so the
    fixture is the rational 0.110001 up to rounding; its hallmark is the
    very good approximation 100 x - 11 = 1e-4 at small |k|.
    """
    return math.fsum(float(base) ** -math.factorial(j) for j in range(1, terms + 1))


def liouville_frequency(terms: int = 3) -> Frequency:
    return Frequency((1.0, liouville_number(terms)))

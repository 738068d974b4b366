"""Newton scheme for conjugating omega - omega_tilde + P to the linear flow omega.

We look for a constant omega_tilde and a near-identity torus map Psi with

    D Psi(xi) . omega = omega - omega_tilde + P(Psi(xi)).

Psi is built as a composition (Id + u_0) o (Id + u_1) o ... .  After step nu
the pulled-back field is omega + Q_nu - M_nu omega_tilde with M_nu = (D Psi_nu)^-1
evaluated along the torus, so Q_nu and M_nu are tracked as Fourier maps.  One
step picks a constant correction delta and u with

    <omega, d> u = Q - M delta,      delta = [M]^-1 [Q],

and updates

    Q+ = (I + Du)^-1 (omega + Q o (Id + u) - (M o (Id + u)) delta) - omega,
    M+ = (I + Du)^-1 M o (Id + u)

exactly on a grid, re-analyzed at the next cutoff K_nu+1 = K_0 b^(nu+1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diophantine import Frequency, FrequencyLike, as_frequency, is_resonant
from .lattice import (FourierMap, GridField, analyze, evaluate_points, gradient, grid_points, stack_components,
                      synthesize)
from .norms import BlockSpec, weighted_block_norm


class SmallDivisorError(ValueError):
    """A lattice point inside the cutoff has |<k, omega>| below the floor."""

    def __init__(self, k: Sequence[int], value: float, floor: float):
        self.k = tuple(int(v) for v in k)
        self.value = value
        self.floor = floor
        super().__init__(f"small divisor |<k, omega>| = {value:.3e} < {floor:.1e} at k={self.k}")


class NonzeroMeanError(ValueError):
    pass


class MarginError(ValueError):
    """I + Du is too far from the identity to invert safely."""


@dataclass(frozen=True)
class KamParams:
    K0: int = 4
    b: int = 2
    max_steps: int = 20
    tol: float = 1e-10
    divergence_factor: float = 1.0
    divisor_floor: float = 1e-8
    margin: float = 0.5
    prune: float = 1e-16
    residual_target: float = 1e-8
    residual_grid: int = 64
    tau: Optional[float] = None

    def __post_init__(self):
        if self.K0 < 1:
            raise ValueError("K0 must be >= 1")
        if self.b < 2:
            raise ValueError("b must be >= 2")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        for name in ("tol", "divergence_factor", "divisor_floor", "margin", "residual_target"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.margin >= 1:
            raise ValueError("margin must be < 1")
        if self.prune < 0:
            raise ValueError("prune must be nonnegative")

    def cutoff(self, nu: int) -> int:
        return self.K0 * self.b ** nu

    def grid_size(self, nu: int) -> int:
        """Power of two >= max(4 K_nu, 2 K_nu+1 + 2)."""
        need = max(4 * self.cutoff(nu), 2 * self.cutoff(nu + 1) + 2)
        return 1 << (need - 1).bit_length()

    def block_spec(self, n: int) -> BlockSpec:
        return BlockSpec(self.b, float(n - 1) if self.tau is None else self.tau)


@dataclass(frozen=True)
class HistoryRecord:
    step: int
    block_norm: float
    sup_norm: float
    omega_tilde_norm: float
    cutoff: int


@dataclass(frozen=True)
class KamState:
    """Snapshot after `len(chain)` steps; history row 0 describes the initial Q."""

    omega: Frequency
    omega_tilde: np.ndarray
    Q: FourierMap
    M: FourierMap
    chain: tuple = ()
    history: tuple = ()

    @property
    def n(self) -> int:
        return self.omega.n


def identity_matrix_map(n: int) -> FourierMap:
    """Constant map with value I_n, component i n + j holding entry (i, j)."""
    return FourierMap.constant(n, np.eye(n).reshape(-1))


def _grid_sup(Q: FourierMap) -> float:
    """Largest Euclidean norm of Q on a grid fine enough to resolve it."""
    if Q.size == 0:
        return 0.0
    N = 1 << max(4, (2 * Q.max_frequency + 1).bit_length())
    vals = synthesize(Q, N).flat()
    return float(np.sqrt((vals ** 2).sum(axis=1)).max())


def _record(Q: FourierMap, omega_tilde: np.ndarray, params: KamParams, step: int) -> HistoryRecord:
    bn, _ = weighted_block_norm(Q, params.block_spec(Q.n))
    return HistoryRecord(step, bn, _grid_sup(Q), float(np.linalg.norm(omega_tilde)), params.cutoff(step))


def initial_state(P: FourierMap, omega: FrequencyLike, params: KamParams) -> KamState:
    freq = as_frequency(omega)
    if P.d != P.n or P.n != freq.n:
        raise ValueError("P must be a vector field with d = n = len(omega)")
    if not P.real:
        raise ValueError("P must be real")
    P.validate_real(1e-12)
    ot = np.zeros(freq.n)
    return KamState(freq, ot, P, identity_matrix_map(freq.n), (), (_record(P, ot, params, 0),))


# ---------------------------------------------------------------------------
# homological equation
# ---------------------------------------------------------------------------


def divisors(ks: np.ndarray, omega: FrequencyLike) -> np.ndarray:
    """<k, omega> for each row of ks, with a fixed summation order."""
    om = as_frequency(omega).array
    out = np.zeros(ks.shape[0])
    for j in range(ks.shape[1]):
        out += ks[:, j].astype(np.float64) * om[j]
    return out


def transport_derivative(u: FourierMap, omega: FrequencyLike) -> FourierMap:
    """<omega, d> u, coefficientwise i <k, omega> u_k."""
    return u._replace(cs=u.cs * (1j * divisors(u.ks, omega))[:, None])


def solve_homological(g: FourierMap, omega: FrequencyLike, K: int, floor: float = 1e-8,
                      mean_tol: float = 1e-13) -> FourierMap:
    """Solve <omega, d> u = g truncated to 0 < |k| <= K.

    Every lattice point with 0 < |k| <= K is screened against `floor`, not
    only the support of g.  A mean larger than `mean_tol` times the largest
    coefficient of g (or absolutely, for tiny g) raises `NonzeroMeanError`.

    Examples
    --------
    >>> u = solve_homological(FourierMap.cosine((1, 0)), (1.0, 2 ** 0.5), 4)
    >>> np.allclose(u.coeff((1, 0)), -0.5j)
    True
    """
    freq = as_frequency(omega)
    if g.n != freq.n:
        raise ValueError("dimension mismatch between g and omega")
    scale = float(np.abs(g.cs).max()) if g.size else 0.0
    if float(np.abs(g.mean()).max()) > mean_tol * max(scale, 1e-300):
        raise NonzeroMeanError(f"nonzero mean {g.mean()} in homological right-hand side")
    k_bad = is_resonant(freq, K, floor)
    if k_bad is not None:
        raise SmallDivisorError(k_bad, abs(float(divisors(np.array([k_bad]), freq)[0])), floor)
    h = g.truncate(K).without_mean()
    dv = divisors(h.ks, freq)
    return h._replace(cs=h.cs / (1j * dv)[:, None])


def homological_residual(u: FourierMap, g: FourierMap, omega: FrequencyLike, K: int) -> float:
    """max_k |(<omega, d> u)_k - g_k| over 0 < |k| <= K (mean of g removed)."""
    lhs = transport_derivative(u, omega)
    rhs = g.truncate(K).without_mean()
    diff = lhs - rhs
    return float(np.abs(diff.cs).max()) if diff.size else 0.0


# ---------------------------------------------------------------------------
# one Newton step
# ---------------------------------------------------------------------------


def _jacobian_sup(field_and_grad: np.ndarray, n: int) -> float:
    J = field_and_grad[:, n:].reshape(-1, n, n)
    return float(np.linalg.norm(J, ord=2, axis=(1, 2)).max()) if J.shape[0] else 0.0


def kam_step(state: KamState, params: KamParams, step: Optional[int] = None) -> KamState:
    """One exact Newton step at cutoff K_step (step defaults to len(chain))."""
    nu = len(state.chain) if step is None else step
    n = state.n
    om = state.omega.array
    K, K_next = params.cutoff(nu), params.cutoff(nu + 1)
    N = params.grid_size(nu)

    Mbar = state.M.mean().real.reshape(n, n)
    Qbar = state.Q.mean().real
    delta = np.linalg.solve(Mbar, Qbar)
    # delta cancels the mean of Q - M delta up to rounding; drop that residue
    g = (state.Q - _matvec_map(state.M, delta, n)).without_mean()
    u = solve_homological(g, state.omega, K, params.divisor_floor)

    X = grid_points(n, N)
    ug = evaluate_points(stack_components([u, gradient(u)]), X) if u.size else np.zeros((X.shape[0], n + n * n))
    jsup = _jacobian_sup(ug, n)
    if jsup >= params.margin:
        raise MarginError(f"sup |Du| = {jsup:.3e} >= margin {params.margin} at step {nu}")
    Y = X + ug[:, :n]
    A = np.eye(n)[None, :, :] + ug[:, n:].reshape(-1, n, n)
    QM = evaluate_points(stack_components([state.Q, state.M]), Y)
    Qv = QM[:, :n]
    Mv = QM[:, n:].reshape(-1, n, n)
    rhs = om[None, :] + Qv - np.einsum("pij,j->pi", Mv, delta)
    Qnew = np.linalg.solve(A, rhs[:, :, None])[:, :, 0] - om[None, :]
    Mnew = np.linalg.solve(A, Mv).reshape(-1, n * n)

    shape = (N,) * n
    Qmap = analyze(GridField(n, n, N, Qnew.reshape(shape + (n,))), K_next, params.prune)
    Mmap = analyze(GridField(n, n * n, N, Mnew.reshape(shape + (n * n,))), K_next, params.prune)
    ot = state.omega_tilde + delta
    rec = _record(Qmap, ot, params, nu + 1)
    return KamState(state.omega, ot, Qmap, Mmap, state.chain + (u,), state.history + (rec,))


def _matvec_map(M: FourierMap, v: np.ndarray, n: int) -> FourierMap:
    """The vector field x -> M(x) v for a matrix-valued map M (d = n^2)."""
    cs = np.einsum("mij,j->mi", M.cs.reshape(-1, n, n), np.asarray(v, dtype=np.complex128))
    return FourierMap(n, n, M.ks, cs, real=M.real)


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KamResult:
    converged: bool
    omega_tilde: np.ndarray
    chain: tuple
    history: tuple
    residual: float
    reason: str
    state: KamState = field(repr=False)

    @property
    def steps(self) -> int:
        return len(self.chain)


def kam_run(P: FourierMap, omega: FrequencyLike, params: KamParams = KamParams()) -> KamResult:
    """Iterate `kam_step` until ||Q|| < tol, max_steps, or the divergence guard.

    The guard trips when the block norm of Q grows by more than
    `divergence_factor` on two consecutive steps.  Convergence additionally
    needs the independent `conjugacy_residual` below `residual_target`.
    Small-divisor and margin violations propagate as exceptions.
    """
    state = initial_state(P, omega, params)
    growth = 0
    reason = "max_steps"
    for nu in range(params.max_steps + 1):
        current = state.history[-1].block_norm
        if current < params.tol:
            reason = "tol"
            break
        if nu == params.max_steps:
            break
        prev = current
        state = kam_step(state, params, nu)
        now = state.history[-1].block_norm
        growth = growth + 1 if now > params.divergence_factor * prev else 0
        if growth >= 2:
            reason = "diverged"
            break
    res = conjugacy_residual(P, state.omega, state.omega_tilde, state.chain, params.residual_grid)
    converged = reason == "tol" and res <= params.residual_target
    if reason == "tol" and not converged:
        reason = "residual"
    return KamResult(converged, state.omega_tilde.copy(), state.chain, state.history, res, reason, state)


# ---------------------------------------------------------------------------
# transform and residual oracle
# ---------------------------------------------------------------------------


def _push(chain: Sequence[FourierMap], X: np.ndarray, with_jacobian: bool):
    """Psi(X) and optionally D Psi(X) for Psi = (Id + u_0) o (Id + u_1) o ...

    The innermost map is applied first, so the chain is traversed from the
    last entry back to u_0.
    """
    X = np.array(X, dtype=np.float64)
    p, n = X.shape
    J = np.broadcast_to(np.eye(n), (p, n, n)).copy() if with_jacobian else None
    for u in reversed(chain):
        if u.size == 0:
            continue
        if with_jacobian:
            vals = evaluate_points(stack_components([u, gradient(u)]), X)
            J = np.einsum("pij,pjk->pik", np.eye(n)[None] + vals[:, n:].reshape(p, n, n), J)
        else:
            vals = evaluate_points(u, X)
        X = X + vals[:, :n]
    return X, J


def apply_transform(chain: Sequence[FourierMap], xi) -> np.ndarray:
    """Psi(xi) reduced mod 2 pi; xi is a point or an array of points."""
    xi = np.asarray(xi, dtype=np.float64)
    single = xi.ndim == 1
    X, _ = _push(chain, np.atleast_2d(xi), False)
    X = np.mod(X, 2.0 * math.pi)
    return X[0] if single else X


def conjugacy_residual(P: FourierMap, omega: FrequencyLike, omega_tilde, chain: Sequence[FourierMap],
                       N: int = 64) -> float:
    """sup over the N^n grid of |D Psi . omega - (omega - omega_tilde + P o Psi)|.

    D Psi is the exact chain-rule product of the factors I + Du_nu.  Nothing
    from the iteration other than omega_tilde and the chain is used.
    """
    om = as_frequency(omega).array
    n = om.size
    X = grid_points(n, N)
    Y, J = _push(chain, X, True)
    lhs = np.einsum("pij,j->pi", J, om)
    Pv = evaluate_points(P, Y) if P.size else np.zeros_like(Y)
    rhs = om[None, :] - np.asarray(omega_tilde, dtype=np.float64)[None, :] + Pv
    return float(np.sqrt(((lhs - rhs) ** 2).sum(axis=1)).max())


def recompute_perturbation(P: FourierMap, omega: FrequencyLike, omega_tilde, chain: Sequence[FourierMap],
                           N: int) -> GridField:
    """Q from scratch on the grid: (D Psi)^-1 (omega - omega_tilde + P o Psi) - omega.

    This is what a state with the same chain and omega_tilde stores as Q, up
    to the truncation applied after each step.
    """
    om = as_frequency(omega).array
    n = om.size
    X = grid_points(n, N)
    Y, J = _push(chain, X, True)
    Pv = evaluate_points(P, Y) if P.size else np.zeros_like(Y)
    field_vals = om[None, :] - np.asarray(omega_tilde, dtype=np.float64)[None, :] + Pv
    pulled = np.linalg.solve(J, field_vals[:, :, None])[:, :, 0]
    return GridField(n, n, N, (pulled - om[None, :]).reshape((N,) * n + (n,)))

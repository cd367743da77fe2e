"""Discrete-time bulk-service energy buffer chain.

Each node harvests one energy unit per slot with probability ``xi``, spends
``N`` units per transmission attempt (attempted with probability ``eta``
whenever at least ``N`` units are stored), and stores at most ``B`` units.
This module builds the slot-to-slot transition matrix, solves the stationary
distribution numerically (the oracle every closed form is checked against),
and evaluates the closed-form stationary distributions for the tractable
buffer regimes together with the characteristic root of the underlying
difference equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DegenerateRatio,
    NonConvergence,
    NotRecurrent,
    OutOfRegime,
)

__all__ = [
    "EnergyChainConfig",
    "Regime",
    "SteadyState",
    "build_transition_matrix",
    "solve_steady_numeric",
    "steady_closed_n1",
    "steady_closed_small_buffer",
    "steady_eta_one",
    "steady_closed_large_buffer",
    "steady_infinite_buffer",
    "steady_state",
    "solve_char_root",
    "approx_char_root",
    "char_root",
    "char_root_approx",
    "char_poly",
    "prob_energy_sufficient",
]

# Pre-normalization closed-form mass must land this close to 1.
_MASS_TOL = 1e-9


class Regime(Enum):
    """Which construction produced a stationary distribution."""

    NUMERIC_ORACLE = "numeric_oracle"
    CLOSED_N1 = "closed_n1"
    CLOSED_SMALL_BUFFER = "closed_small_buffer"
    CLOSED_LARGE_BUFFER = "closed_large_buffer"
    GREEDY_ETA1 = "greedy_eta1"
    INFINITE_BUFFER = "infinite_buffer"


@dataclass(frozen=True)
class EnergyChainConfig:
    """Parameters of one energy buffer chain.

    N    -- energy units consumed per transmission (>= 1)
    B    -- buffer capacity in units (>= N)
    xi   -- per-slot Bernoulli arrival probability, in (0, 1]
    eta  -- per-slot update probability given enough energy, in (0, 1]
    """

    N: int
    B: int
    xi: float
    eta: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.B < self.N:
            raise ValueError(f"B must be >= N, got B={self.B}, N={self.N}")
        if not 0.0 < self.xi <= 1.0:
            raise ValueError(f"xi must be in (0, 1], got {self.xi}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")

    @property
    def phi(self) -> float:
        """Accumulation/consumption balance helper eta / (xi (1 - eta))."""
        if self.eta >= 1.0:
            raise OutOfRegime("phi is undefined at eta = 1")
        return self.eta / (self.xi * (1.0 - self.eta))


@dataclass(frozen=True)
class SteadyState:
    """Stationary distribution over buffer levels 0..B.

    ``probs[i]`` is the long-run probability of holding i units.  For the
    infinite-buffer regime ``probs`` is a truncation and ``tail_mass`` holds
    the analytically summed geometric remainder, so that
    ``probs.sum() + tail_mass == 1``.  ``char_root`` carries the
    characteristic root z for the regimes that use one.
    """

    probs: np.ndarray
    regime: Regime
    char_root: float | None = None
    tail_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))
        if np.any(self.probs < -1e-12):
            raise ValueError("stationary probabilities must be non-negative")
        total = float(self.probs.sum()) + self.tail_mass
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"stationary mass is {total!r}, expected 1")

    @property
    def levels(self) -> int:
        return len(self.probs) - 1


def build_transition_matrix(cfg: EnergyChainConfig) -> np.ndarray:
    """Row-stochastic (B+1)x(B+1) one-slot transition matrix.

    Levels below N can only gain energy; levels in [N, B-1] mix the four
    update/arrival outcomes; the full buffer discards arrivals unless the
    node transmits in the same slot.
    """
    n, b, xi, eta = cfg.N, cfg.B, cfg.xi, cfg.eta
    P = np.zeros((b + 1, b + 1))
    for i in range(n):
        P[i, i] += 1.0 - xi
        P[i, i + 1] += xi
    for i in range(n, b):
        P[i, i] += (1.0 - eta) * (1.0 - xi)
        P[i, i + 1] += (1.0 - eta) * xi
        P[i, i - n] += eta * (1.0 - xi)
        P[i, i - n + 1] += eta * xi
    P[b, b] += 1.0 - eta
    P[b, b - n] += eta * (1.0 - xi)
    P[b, b - n + 1] += eta * xi
    return P


def solve_steady_numeric(matrix: np.ndarray, tol: float = 1e-12) -> SteadyState:
    """Stationary vector of a row-stochastic matrix, by direct linear solve.

    Solves the transposed balance equations with the normalization row and
    verifies the residual ||S P - S||_inf <= tol; falls back to power
    iteration before giving up with NonConvergence.
    """
    P = np.asarray(matrix, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    m = P.shape[0]
    A = P.T - np.eye(m)
    A[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    try:
        s = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        s = np.full(m, 1.0 / m)
    if _residual(s, P) > tol or np.any(s < -tol):
        s = _power_iterate(s, P, tol)
    if _residual(s, P) > tol:
        raise NonConvergence(
            f"stationary residual {_residual(s, P):.3e} above tol {tol:.3e}"
        )
    s = np.clip(s, 0.0, None)
    s /= s.sum()
    return SteadyState(probs=s, regime=Regime.NUMERIC_ORACLE)


def _residual(s: np.ndarray, P: np.ndarray) -> float:
    return float(np.max(np.abs(s @ P - s)))


def _power_iterate(s: np.ndarray, P: np.ndarray, tol: float, budget: int = 200_000) -> np.ndarray:
    s = np.clip(s, 0.0, None)
    if s.sum() == 0.0:
        s = np.full(P.shape[0], 1.0)
    s /= s.sum()
    for _ in range(budget):
        nxt = s @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - s)) < 0.25 * tol:
            return nxt
        s = nxt
    return s


# ---------------------------------------------------------------------------
# Characteristic root of the interior difference equation
# ---------------------------------------------------------------------------

def char_poly(z: float, n: int, xi: float, eta: float) -> float:
    """(1-xi) eta z^{N+1} + xi eta z^N - (1-(1-xi)(1-eta)) z + xi (1-eta)."""
    return (
        (1.0 - xi) * eta * z ** (n + 1)
        + xi * eta * z**n
        - (1.0 - (1.0 - xi) * (1.0 - eta)) * z
        + xi * (1.0 - eta)
    )


def _deflated(z, n: int, xi: float, eta: float):
    """Quotient after exact synthetic division of char_poly by (z - 1).

    g(z) = (1-xi) eta z^N + eta (z^{N-1} + ... + z) - xi (1-eta); strictly
    increasing for z > 0, g(0) < 0, g(1) = N eta - xi, so bisection brackets
    are trivial on either side of 1.  Accepts scalars or arrays.
    """
    z = np.asarray(z, dtype=float)
    mid = np.zeros_like(z)
    for j in range(1, n):
        mid = mid + z**j
    return (1.0 - xi) * eta * z**n + eta * mid - xi * (1.0 - eta)


def char_root(n: int, xi: float, eta: float) -> float:
    """Unique non-fixed positive root of the characteristic equation.

    Deflates the fixed point z = 1 exactly, then bisects the monotone
    quotient.  Returns exactly 1.0 on the balance line N eta == xi and
    exactly 0.0 at eta == 1 (greedy updating drains the interior modes).
    The root satisfies z < 1 iff N eta > xi.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < xi <= 1.0 or not 0.0 < eta <= 1.0:
        raise ValueError("xi and eta must be in (0, 1]")
    if n * eta == xi:
        return 1.0
    if eta == 1.0:
        return 0.0
    if n * eta > xi:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = 1.0, max(2.0, 2.0 * xi * (1.0 - eta) / (eta * (1.0 - xi)))
        while _deflated(hi, n, xi, eta) < 0.0:
            hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _deflated(mid, n, xi, eta) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, lo):
            break
    return 0.5 * (lo + hi)


def char_root_approx(n: int, xi: float, eta: float) -> float:
    """Closed-form root: exact for N in {1, 2}, rational surrogate for N >= 3."""
    if eta == 1.0:
        return 0.0
    if n == 1:
        return xi * (1.0 - eta) / (eta * (1.0 - xi))
    if n == 2:
        disc = eta * eta * (1.0 - 2.0 * xi) ** 2 + 4.0 * eta * xi * (1.0 - xi)
        return (math.sqrt(disc) - eta) / (2.0 * eta * (1.0 - xi))
    return xi * (1.0 - eta) / (1.0 - (1.0 - xi) * (1.0 - eta))


def solve_char_root(cfg: EnergyChainConfig) -> float:
    return char_root(cfg.N, cfg.xi, cfg.eta)


def approx_char_root(cfg: EnergyChainConfig) -> float:
    return char_root_approx(cfg.N, cfg.xi, cfg.eta)


# ---------------------------------------------------------------------------
# Closed-form stationary distributions
# ---------------------------------------------------------------------------

def _finalize(raw: np.ndarray, regime: Regime, char: float | None = None) -> SteadyState:
    total = float(raw.sum())
    if abs(total - 1.0) > _MASS_TOL:
        raise NonConvergence(
            f"closed-form mass {total!r} deviates from 1 beyond {_MASS_TOL}"
        )
    return SteadyState(probs=raw / total, regime=regime, char_root=char)


def steady_closed_n1(cfg: EnergyChainConfig) -> SteadyState:
    """Single-unit consumption, any finite buffer.

    S_0 = (eta - xi) / (eta - xi rho^B) with rho = (1-eta) xi / ((1-xi) eta)
    and S_i = rho^i S_0 / (1 - eta).  The balance point xi == eta is 0/0 in
    this form; callers must fall back to the numeric oracle there.
    """
    if cfg.N != 1:
        raise OutOfRegime("closed_n1 requires N == 1")
    if not (cfg.xi < 1.0 and cfg.eta < 1.0):
        raise OutOfRegime("closed_n1 requires xi < 1 and eta < 1")
    if cfg.xi == cfg.eta:
        raise DegenerateRatio("xi == eta makes the N=1 closed form 0/0")
    rho = (1.0 - cfg.eta) * cfg.xi / ((1.0 - cfg.xi) * cfg.eta)
    s = np.empty(cfg.B + 1)
    s[0] = (cfg.eta - cfg.xi) / (cfg.eta - cfg.xi * rho**cfg.B)
    for i in range(1, cfg.B + 1):
        s[i] = rho**i / (1.0 - cfg.eta) * s[0]
    return _finalize(s, Regime.CLOSED_N1, char=rho)


def steady_closed_small_buffer(cfg: EnergyChainConfig) -> SteadyState:
    """Multi-unit consumption with a small buffer, N <= B <= 2N.

    Index ranges that are empty for the given (N, B) contribute nothing,
    which also covers the B = N corner where the distribution collapses to
    the three-value form eta(1-xi)/(N eta + xi(1-eta)), eta/(...), xi/(...).
    """
    n, b = cfg.N, cfg.B
    if n < 2:
        raise OutOfRegime("small-buffer closed form requires N >= 2")
    if not n <= b <= 2 * n:
        raise OutOfRegime(f"small-buffer closed form requires N <= B <= 2N, got B={b}")
    if not (cfg.xi < 1.0 and cfg.eta < 1.0):
        raise OutOfRegime("small-buffer closed form requires xi < 1 and eta < 1")
    phi = cfg.phi
    eta, xi = cfg.eta, cfg.xi
    s = np.zeros(b + 1)
    if b < 2 * n:
        sb = 1.0 / ((1.0 - eta) * (1.0 + n * phi * (1.0 + phi) ** (b - n)))
        s[b] = sb
        for i in range(0, b - n):
            s[i] = (1.0 - eta - (1.0 + phi) ** (-i - 1)) * (1.0 + phi) ** (b - n) * phi * sb
        s[b - n] = ((1.0 - eta) * (1.0 + phi) ** (b - n) * phi - eta) * sb
        for i in range(b - n + 1, n):
            s[i] = (1.0 - eta) * (1.0 + phi) ** (b - n) * phi * sb
        for i in range(n, b):
            s[i] = (1.0 + phi) ** (b - i - 1) * phi * sb
    else:
        sb = 1.0 / ((1.0 - eta) * (1.0 + n * phi * (1.0 + phi) ** n) - n * eta * phi)
        s[b] = sb
        s[0] = (1.0 - xi) * eta / xi * ((1.0 + phi) ** (n - 1) * phi - eta / (1.0 - eta)) * sb
        for i in range(1, n):
            s[i] = (eta / xi * (1.0 + phi) ** n - eta * phi - phi * (1.0 + phi) ** (n - 1 - i)) * sb
        s[n] = phi * ((1.0 + phi) ** (n - 1) - xi) * sb
        for i in range(n + 1, b):
            s[i] = (1.0 + phi) ** (b - i - 1) * phi * sb
    return _finalize(s, Regime.CLOSED_SMALL_BUFFER)


def steady_eta_one(cfg: EnergyChainConfig) -> SteadyState:
    """Greedy updating (eta = 1): (1-xi)/N, 1/N, ..., 1/N, xi/N, 0, ..., 0.

    Independent of the buffer size; every level above N is unreachable in
    steady state because the node fires as soon as it can.
    """
    if cfg.eta != 1.0:
        raise OutOfRegime("eta-one form requires eta == 1")
    s = np.zeros(cfg.B + 1)
    s[0] = (1.0 - cfg.xi) / cfg.N
    for i in range(1, cfg.N):
        s[i] = 1.0 / cfg.N
    s[cfg.N] = cfg.xi / cfg.N
    return _finalize(s, Regime.GREEDY_ETA1, char=0.0)


def _geom_ratio_factor(z: float, i: int, xi: float) -> float:
    """(1 + (xi/(1-xi) + z) (1 - z^i) / (1 - z)), with its z -> 1 limit."""
    if abs(1.0 - z) < 1e-9:
        return 1.0 + i / (1.0 - xi)
    return 1.0 + (xi / (1.0 - xi) + z) * (1.0 - z**i) / (1.0 - z)


def steady_closed_large_buffer(cfg: EnergyChainConfig) -> SteadyState:
    """Multi-unit consumption with a large buffer, B >= 3N + 1.

    Single-root solution of the interior difference equation patched to the
    almost-full boundary recursion.  Note this construction keeps one of the
    N+1 interior modes, so for finite B it is a boundary-layer approximation
    of the true stationary vector: the discrepancy against the numeric
    oracle decays as B grows when z < 1 and stays localized near the full
    levels otherwise.  The B -> infinity specialization is exact.
    """
    n, b = cfg.N, cfg.B
    if n < 2:
        raise OutOfRegime("large-buffer closed form requires N >= 2 (N = 1 has its own form)")
    if b < 3 * n + 1:
        raise OutOfRegime(f"large-buffer closed form requires B >= 3N+1, got B={b}")
    if not (cfg.xi < 1.0 and cfg.eta < 1.0):
        raise OutOfRegime("large-buffer closed form requires xi < 1 and eta < 1")
    xi, eta = cfg.xi, cfg.eta
    z = char_root(n, xi, eta)
    if z > 1.0 and (b - 2 * n) * math.log(z) > 600.0:
        raise OutOfRegime("z^(B-2N) overflows; use the numeric oracle for this config")
    phi = cfg.phi
    a = xi / (eta * (1.0 - xi))
    g = phi * ((1.0 + phi) ** n - (1.0 + eta) / (1.0 - eta))
    zb = z ** (b - 2 * n)
    if abs(1.0 - z) < 1e-9:
        # balance line N eta == xi: normalize the limiting ratios directly
        s0 = 1.0
    else:
        s0 = (
            eta * (1.0 - xi) * (1.0 - z)
            / (n * eta - xi * zb + xi * ((1.0 + phi) ** n - xi * phi) * (1.0 - z) * zb / (z * g))
        )
    s = np.zeros(b + 1)
    s[0] = s0
    for i in range(1, n - 1):
        s[i] = _geom_ratio_factor(z, i, xi) * s0
    s[n - 1] = a * (1.0 - eta) / z * s0
    for i in range(n, b - n):
        s[i] = a * z ** (i - n) * s0
    sb = a * zb / (z * g) * s0
    s[b] = sb
    s[b - n] = phi * ((1.0 + phi) ** (n - 1) - xi) * sb
    for i in range(b - n + 1, b):
        s[i] = phi * (1.0 + phi) ** (b - i - 1) * sb
    if abs(1.0 - z) < 1e-9:
        s /= s.sum()
    return _finalize(s, Regime.CLOSED_LARGE_BUFFER, char=z)


def steady_infinite_buffer(
    cfg: EnergyChainConfig, truncation: int | None = None
) -> SteadyState:
    """Excessively large buffer (B -> infinity), recurrent when N eta > xi.

    Returns the parametric distribution truncated at ``truncation`` levels
    (default: deep enough that the dropped tail is below 1e-12) with the
    geometric tail mass folded in analytically, so the total mass is exact.
    """
    n, xi, eta = cfg.N, cfg.xi, cfg.eta
    if n * eta <= xi:
        raise NotRecurrent(
            f"N*eta = {n * eta} <= xi = {xi}: energy never runs scarce, no steady"
            " scarcity distribution exists"
        )
    if eta == 1.0:
        # greedy limit: identical to the buffer-independent eta = 1 form
        base = steady_eta_one(EnergyChainConfig(n, max(cfg.B, 2 * n), xi, eta))
        probs = base.probs
        if truncation is not None:
            if truncation < 2 * n:
                raise ValueError("truncation must be at least 2N")
            probs = np.pad(probs, (0, max(0, truncation + 1 - len(probs))))[: truncation + 1]
        return SteadyState(probs=probs, regime=Regime.GREEDY_ETA1, char_root=0.0)
    z = char_root(n, xi, eta)
    if truncation is None:
        depth = math.ceil(math.log(1e-12) / math.log(z)) if z > 0.0 else 0
        truncation = max(2 * n, min(n + depth, 100_000))
    elif truncation < 2 * n:
        raise ValueError("truncation must be at least 2N")
    s = np.zeros(truncation + 1)
    s0 = (1.0 - xi) * (1.0 - z) / n
    for i in range(0, n - 1):
        s[i] = _geom_ratio_factor(z, i, xi) * s0
    s[n - 1] = xi * (1.0 - eta) * (1.0 - z) / (n * eta * z)
    head = xi * (1.0 - z) / (n * eta)
    for i in range(n, truncation + 1):
        s[i] = head * z ** (i - n)
    tail = xi * z ** (truncation + 1 - n) / (n * eta)
    total = float(s.sum()) + tail
    if abs(total - 1.0) > _MASS_TOL:
        raise NonConvergence(f"infinite-buffer mass {total!r} deviates from 1")
    return SteadyState(
        probs=s / total,
        regime=Regime.INFINITE_BUFFER,
        char_root=z,
        tail_mass=tail / total,
    )


def steady_state(cfg: EnergyChainConfig, tol: float = 1e-12) -> SteadyState:
    """Stationary distribution via the best applicable route.

    Routing: eta = 1 -> greedy form; N = 1 -> single-unit form (numeric at
    the xi == eta degeneracy); N <= B <= 2N -> small-buffer form; everything
    else, including the analytically open band 2N+1 <= B <= 3N and the
    boundary-layer-limited large-buffer regime, -> numeric linear solve.
    """
    if cfg.eta == 1.0:
        return steady_eta_one(cfg)
    if cfg.N == 1:
        if cfg.xi != cfg.eta and cfg.xi < 1.0:
            return steady_closed_n1(cfg)
    elif cfg.N <= cfg.B <= 2 * cfg.N and cfg.xi < 1.0:
        return steady_closed_small_buffer(cfg)
    return solve_steady_numeric(build_transition_matrix(cfg), tol=tol)


def prob_energy_sufficient(ss: SteadyState, n: int) -> float:
    """P(buffer >= N): the chance a node can afford one transmission."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > ss.levels:
        return float(ss.tail_mass)
    return float(ss.probs[n:].sum()) + ss.tail_mass

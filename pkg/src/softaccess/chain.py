"""Primary-queue Markov chain: stationary distribution and delays.

The queue of one primary user is a chain over states (k, F) and (k, R),
where k is the backlog and the phase says whether the head packet is on
its first transmission (F) or being retransmitted (R). Per slot, with
arrival rate lambda_p, a first transmission succeeds with probability
gamma_p and any failure (collision, outage, or not owning the slot) moves
the head to R; a retransmission succeeds with probability 1 - delta and
secondaries stay off it. Closed-form stationary probabilities exist for
psi < 1; an independent truncated numeric solve of the same transition
structure serves as the cross-oracle.

Flat state indexing used by the numeric path: [F_0 .. F_K, R_1 .. R_K].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rates import ChainParams, RateValue, Unstable

__all__ = [
    "ChainDistribution",
    "default_truncation",
    "closed_form_distribution",
    "transition_matrix",
    "numeric_distribution",
    "delay_nofb",
    "delay_fb",
    "littles_law_delay",
]

# geometric tail target for the default truncation rule
TAIL_TARGET = 1e-14
DENSE_LIMIT = 2000
POWER_TOL = 1e-13


@dataclass(frozen=True)
class ChainDistribution:
    """Stationary probabilities of the primary-queue chain up to backlog K.

    pi[k] and eps[k] are the first-transmission and retransmission state
    probabilities (eps[0] is identically 0). tail_mass and tail_mean hold
    the closed-form residues of sum(pi_k + eps_k) and sum(k*(pi_k+eps_k))
    beyond K; the numeric oracle has no tail by construction.
    """

    pi: np.ndarray
    eps: np.ndarray
    K: int
    tail_mass: float
    tail_mean: float
    stable: bool

    def total_mass(self) -> float:
        return float(self.pi.sum() + self.eps.sum() + self.tail_mass)

    def mean_occupancy(self) -> float:
        """Mean number of packets in system, retransmission states included."""
        k = np.arange(self.K + 1, dtype=float)
        return float(k @ (self.pi + self.eps) + self.tail_mean)


def default_truncation(psi: float) -> int:
    """Smallest K with psi^K below the tail target, floored at 50, capped at 1e5."""
    if psi < 0.0:
        raise ValueError("psi must be nonnegative")
    if psi >= 1.0:
        raise ValueError("no finite truncation for psi >= 1")
    if psi == 0.0:
        return 50
    K = math.ceil(math.log(TAIL_TARGET) / math.log(psi))
    return min(max(50, K), 100_000)


def closed_form_distribution(params: ChainParams, lambda_p: float, K: int | None = None) -> RateValue:
    """Stationary distribution from the closed-form solution.

    pi_0 = (chi-lambda)/(1-delta), eps_1 = lambda*(1-gamma)*pi_0/chi,
    pi_1 = lambda*(1-delta*(1-lambda))*pi_0/((1-lambda)*chi), and for
    k >= 2 both sequences are geometric in psi:
    eps_k = psi^k * (1-lambda)(1-gamma) pi_0 / (1-chi)^2 and
    pi_k = lambda/(1-lambda) * eps_k. Unstable when psi >= 1.
    """
    lam = lambda_p
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda_p must lie in [0, 1]")
    if lam == 0.0:
        n = (K if K is not None else default_truncation(0.0)) + 1
        pi = np.zeros(n)
        pi[0] = 1.0
        return ChainDistribution(pi=pi, eps=np.zeros(n), K=n - 1,
                                 tail_mass=0.0, tail_mean=0.0, stable=True)
    if params.psi >= 1.0 or lam >= params.chi:
        return Unstable(params.chi - lam)
    if K is None:
        K = default_truncation(params.psi)
    if K < 2:
        raise ValueError("K must be at least 2")

    lam_bar = 1.0 - lam
    gam_bar = 1.0 - params.gamma_p
    chi = params.chi
    psi = params.psi
    pi0 = (chi - lam) / (1.0 - params.delta)

    pi = np.zeros(K + 1)
    eps = np.zeros(K + 1)
    pi[0] = pi0
    eps[1] = lam * gam_bar * pi0 / chi
    pi[1] = lam * (1.0 - params.delta * lam_bar) * pi0 / (lam_bar * chi)
    # geometric body for k >= 2
    coef = lam_bar * gam_bar * pi0 / (1.0 - chi) ** 2
    k = np.arange(2, K + 1, dtype=float)
    eps[2:] = coef * psi ** k
    pi[2:] = (lam / lam_bar) * eps[2:]

    # exact geometric residues beyond K (the k >= 2 law applies there)
    per_level = coef / lam_bar  # (pi_k + eps_k) / psi^k
    r = psi ** (K + 1)
    tail_mass = per_level * r / (1.0 - psi)
    tail_mean = per_level * r * ((K + 1) * (1.0 - psi) + psi) / (1.0 - psi) ** 2
    return ChainDistribution(pi=pi, eps=eps, K=K,
                             tail_mass=float(tail_mass), tail_mean=float(tail_mean), stable=True)


def transition_matrix(params: ChainParams, lambda_p: float, K: int) -> np.ndarray:
    """Dense row-stochastic transition matrix of the truncated chain.

    States are indexed [F_0 .. F_K, R_1 .. R_K]; mass that would leave the
    truncation from level K is reflected back into level K.
    """
    if K < 2:
        raise ValueError("truncation K must be at least 2")
    lam = lambda_p
    lam_bar = 1.0 - lam
    g = params.gamma_p
    g_bar = 1.0 - g
    d = params.delta
    d_bar = 1.0 - d
    nF = K + 1

    def F(k):
        return k

    def R(k):
        return nF + k - 1

    P = np.zeros((nF + K, nF + K))
    P[F(0), F(min(1, K))] += lam
    P[F(0), F(0)] += lam_bar
    for k in range(1, K + 1):
        P[F(k), F(k - 1)] += lam_bar * g
        P[F(k), F(k)] += lam * g
        P[F(k), R(k)] += lam_bar * g_bar
        P[F(k), R(min(k + 1, K))] += lam * g_bar
        P[R(k), F(k - 1)] += lam_bar * d_bar
        P[R(k), F(k)] += lam * d_bar
        P[R(k), R(k)] += lam_bar * d
        P[R(k), R(min(k + 1, K))] += lam * d
    return P


def _banded_step(x_pi, x_eps, lam, g, d):
    # one application of the transition operator, O(K) via the band structure
    lam_bar = 1.0 - lam
    g_bar = 1.0 - g
    d_bar = 1.0 - d
    K = x_pi.size - 1
    y_pi = np.zeros_like(x_pi)
    y_eps = np.zeros_like(x_eps)
    y_pi[0] = lam_bar * (x_pi[0] + g * x_pi[1] + d_bar * x_eps[1])
    y_pi[1:K] = (lam * g * x_pi[1:K] + lam_bar * g * x_pi[2:K + 1]
                 + lam * d_bar * x_eps[1:K] + lam_bar * d_bar * x_eps[2:K + 1])
    y_pi[1] += lam * x_pi[0]
    y_pi[K] = lam * g * x_pi[K] + lam * d_bar * x_eps[K]
    y_eps[1:] = lam_bar * g_bar * x_pi[1:] + lam_bar * d * x_eps[1:]
    y_eps[2:] += lam * g_bar * x_pi[1:K] + lam * d * x_eps[1:K]
    # reflected boundary mass
    y_eps[K] += lam * g_bar * x_pi[K] + lam * d * x_eps[K]
    return y_pi, y_eps


def numeric_distribution(params: ChainParams, lambda_p: float, K: int | None = None) -> ChainDistribution:
    """Stationary distribution of the truncated chain, solved numerically.

    Independent oracle for the closed form: builds the labeled transition
    structure directly and solves for the stationary vector, densely for
    K <= 2000 and by power iteration on the banded operator above that.
    Requires psi^K < 1e-12 so that truncation error is negligible.
    """
    lam = lambda_p
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda_p must lie in [0, 1]")
    if lam > 0.0 and (params.psi >= 1.0 or lam >= params.chi):
        raise ValueError("chain is unstable, no stationary distribution")
    if K is None:
        K = default_truncation(params.psi if lam > 0.0 else 0.0)
    if K < 2:
        raise ValueError("K must be at least 2")
    if lam > 0.0 and params.psi > 0.0 and params.psi ** K >= 1e-12:
        raise ValueError(f"K={K} too small: psi^K = {params.psi ** K:.3e} >= 1e-12")

    nF = K + 1
    if K <= DENSE_LIMIT:
        P = transition_matrix(params, lam, K)
        n = P.shape[0]
        A = P.T - np.eye(n)
        A[-1, :] = 1.0  # replace one balance equation with normalization
        b = np.zeros(n)
        b[-1] = 1.0
        x = np.linalg.solve(A, b)
        residual = float(np.abs(x @ P - x).max())
        if not np.isfinite(x).all() or residual > 1e-10:
            raise ArithmeticError(f"stationary solve ill-conditioned: residual {residual:.3e}")
    else:
        x_pi = np.full(nF, 1.0 / (2 * K + 1))
        x_eps = np.full(nF, 1.0 / (2 * K + 1))
        x_eps[0] = 0.0
        for it in range(500_000):
            y_pi, y_eps = _banded_step(x_pi, x_eps, lam, params.gamma_p, params.delta)
            diff = float(np.abs(y_pi - x_pi).sum() + np.abs(y_eps - x_eps).sum())
            x_pi, x_eps = y_pi, y_eps
            if diff < POWER_TOL:
                break
        else:
            raise ArithmeticError(f"power iteration did not converge below {POWER_TOL}")
        total = x_pi.sum() + x_eps[1:].sum()
        x = np.concatenate([x_pi, x_eps[1:]]) / total

    pi = x[:nF].copy()
    eps = np.concatenate([[0.0], x[nF:]])
    return ChainDistribution(pi=pi, eps=eps, K=K, tail_mass=0.0, tail_mean=0.0, stable=True)


def delay_nofb(lambda_p: float, mu_p: float) -> RateValue:
    """Mean primary packet delay without feedback, (1-lambda)/(mu-lambda) slots."""
    if not 0.0 <= lambda_p <= 1.0:
        raise ValueError("lambda_p must lie in [0, 1]")
    if lambda_p >= mu_p:
        return Unstable(mu_p - lambda_p)
    return (1.0 - lambda_p) / (mu_p - lambda_p)


def delay_fb(params: ChainParams, lambda_p: float) -> RateValue:
    """Mean primary packet delay under the feedback scheme.

    [(gamma-chi)(chi-lambda)^2 + (1-lambda)^2 (1-gamma) chi]
    / [(1-lambda)(1-chi)(1-delta)(chi-lambda)] slots. The primary
    verification is agreement with Little's law on the stationary
    distribution, since no derivation is carried here.
    """
    lam = lambda_p
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda_p must lie in [0, 1]")
    if lam >= params.chi:
        return Unstable(params.chi - lam)
    chi = params.chi
    if chi >= 1.0:
        return 1.0  # deterministic single-slot service corner
    lam_bar = 1.0 - lam
    num = (params.gamma_p - chi) * (chi - lam) ** 2 + lam_bar ** 2 * (1.0 - params.gamma_p) * chi
    den = lam_bar * (1.0 - chi) * (1.0 - params.delta) * (chi - lam)
    return num / den


def littles_law_delay(dist: ChainDistribution, lambda_p: float) -> float:
    """Mean delay via Little's law: mean occupancy over arrival rate."""
    if lambda_p <= 0.0:
        raise ValueError("Little's-law delay needs a positive arrival rate")
    return dist.mean_occupancy() / lambda_p

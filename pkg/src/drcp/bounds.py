"""Scenario-theory probability calculus: binomial tails and sample-size bounds."""

import math

from .errors import DomainError


def phi(epsilon: float, q: int, n: int) -> float:
    """Binomial cdf: sum_{j=0}^{q} C(n, j) eps^j (1-eps)^(n-j).

    Terms are evaluated in log space and combined with compensated summation
    after a max shift, keeping the absolute error at or below 1e-12 even for
    tails near 1e-16 at n ~ 1e4.
    """
    if not (0.0 <= epsilon <= 1.0):
        raise DomainError("epsilon must lie in [0, 1]")
    if not (0 <= q <= n):
        raise DomainError("q must lie in [0, n]")
    if epsilon == 0.0:
        return 1.0
    if epsilon == 1.0:
        return 1.0 if q >= n else 0.0
    log_eps = math.log(epsilon)
    log_1m = math.log1p(-epsilon)
    logs = []
    for j in range(q + 1):
        lc = math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1)
        logs.append(lc + j * log_eps + (n - j) * log_1m)
    shift = max(logs)
    if shift == -math.inf:
        return 0.0
    total = math.fsum(math.exp(v - shift) for v in logs)
    return min(1.0, math.exp(shift) * total)


def epsilon_bound(beta: float, zeta: int, n: int) -> float:
    """Violation level guaranteed with confidence 1 - beta from n samples.

    Evaluates 2 (ln(1/beta) + zeta - 1) / n with the natural logarithm,
    clamped into (0, 1].
    """
    if not (0.0 < beta < 1.0):
        raise DomainError("beta must lie in (0, 1)")
    if zeta < 1:
        raise DomainError("zeta must be at least 1")
    if n < 1:
        raise DomainError("n must be at least 1")
    value = 2.0 * (math.log(1.0 / beta) + zeta - 1.0) / n
    return min(value, 1.0)


def min_samples(beta: float, zeta: int, epsilon: float) -> int:
    """Smallest n with epsilon_bound(beta, zeta, n) <= epsilon."""
    if not (0.0 < epsilon <= 1.0):
        raise DomainError("epsilon must lie in (0, 1]")
    if not (0.0 < beta < 1.0):
        raise DomainError("beta must lie in (0, 1)")
    if zeta < 1:
        raise DomainError("zeta must be at least 1")
    raw = 2.0 * (math.log(1.0 / beta) + zeta - 1.0) / epsilon
    n = max(1, math.ceil(raw))
    while n > 1 and epsilon_bound(beta, zeta, n - 1) <= epsilon:
        n -= 1
    while epsilon_bound(beta, zeta, n) > epsilon:
        n += 1
    return n

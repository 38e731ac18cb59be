"""Delivery probability and optimal transmission probability for slotted ALOHA
with multi-packet reception and a per-packet deadline.

Model: n_users saturated stations share a slotted channel. In every slot each
station independently transmits its head-of-line packet with probability tau.
The receiver decodes a slot when at most `mpr` stations transmit at once; a
slot with more simultaneous transmissions is lost entirely. Every packet must
be transmitted within `deadline` slots of reaching the head of its queue, and
there are no retransmissions: the packet is delivered exactly when its single
attempt lands in a decodable slot before the deadline passes.

`delivery_prob` evaluates the per-packet success probability for a given tau,
and `solve_optimal_tau` finds the tau that maximizes it via a fixed-point
iteration on the stationarity condition. `grid_search_optimum` is a slow,
derivative-free maximizer used to cross-check the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "N_CAP",
    "ChannelConfig",
    "TxProbability",
    "SolveReport",
    "binomial_pmf",
    "delivery_prob",
    "admit_prob",
    "admit_weight",
    "admitted_load",
    "deadline_load",
    "delivery_prob_derivative",
    "lower_bound_tau",
    "optimal_tau_spr",
    "solve_optimal_tau",
    "grid_search_optimum",
    "success_size_ratio",
    "window_bound",
    "iteration_map",
    "as_probability",
]

# Population sizes beyond this are outside the supported regime; the closed
# forms still hold but the float evaluation here is only validated up to it.
N_CAP = 1000


@dataclass(frozen=True)
class ChannelConfig:
    """Static channel parameters.

    n_users: number of saturated stations, at least 2.
    mpr: receiver capability, decodes up to this many simultaneous packets.
    deadline: slots available to each head-of-line packet, at least 1.
    """

    n_users: int
    mpr: int
    deadline: int

    def __post_init__(self) -> None:
        if not 2 <= self.n_users <= N_CAP:
            raise ValueError(
                f"n_users must be in [2, {N_CAP}], got {self.n_users}"
            )
        if not 1 <= self.mpr < self.n_users:
            raise ValueError(
                f"mpr must satisfy 1 <= mpr < n_users, got mpr={self.mpr} "
                f"with n_users={self.n_users}"
            )
        if self.deadline < 1:
            raise ValueError(f"deadline must be >= 1, got {self.deadline}")


@dataclass(frozen=True)
class TxProbability:
    """A transmission probability, validated to lie in [0, 1]."""

    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", as_probability(self.value))

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class SolveReport:
    """Outcome of `solve_optimal_tau`.

    sdp_max is the delivery probability re-evaluated at tau_opt, not a value
    carried through the iteration. residual is the last iterate displacement.
    """

    tau_opt: TxProbability
    sdp_max: float
    iterations: int
    residual: float
    converged: bool


def as_probability(value) -> float:
    """Coerce to float and require it to be a probability in [0, 1]."""
    if isinstance(value, TxProbability):
        return value.value
    v = float(value)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {value!r}")
    return v


def _open_probability(value) -> float:
    v = as_probability(value)
    if v == 0.0 or v == 1.0:
        raise ValueError(f"value must be strictly inside (0, 1), got {v}")
    return v


def binomial_pmf(n: int, i: int, p: float) -> float:
    """P(X = i) for X ~ Binomial(n, p). Exact at the endpoints p = 0 and 1."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not 0 <= i <= n:
        raise ValueError(f"i must be in [0, n], got i={i}, n={n}")
    p = as_probability(p)
    c = math.comb(n, i)
    if c.bit_length() <= 1023:
        # 0.0 ** 0 == 1.0 in Python, so the endpoints need no special case.
        return c * p**i * (1.0 - p) ** (n - i)
    if p == 0.0:
        return 1.0 if i == 0 else 0.0
    if p == 1.0:
        return 1.0 if i == n else 0.0
    log_pmf = (
        math.lgamma(n + 1)
        - math.lgamma(i + 1)
        - math.lgamma(n - i + 1)
        + i * math.log(p)
        + (n - i) * math.log1p(-p)
    )
    return math.exp(log_pmf)


def _head_sums(n: int, m: int, tau: float) -> tuple[float, float]:
    """Return (sum_{i<m} P(Y=i), sum_{i<m} i*P(Y=i)) for Y ~ Binomial(n, tau).

    Terms are built by the ratio recurrence from (1-tau)^n. When that starting
    value underflows, each term is evaluated in log space instead.
    """
    if tau == 0.0:
        return 1.0, 0.0
    if tau == 1.0:
        return 0.0, 0.0
    head = 0.0
    weighted = 0.0
    term = (1.0 - tau) ** n
    # A subnormal start would leave the recurrence only a few mantissa
    # bits, so anything close to the underflow floor goes to log space.
    if term > 1e-280:
        ratio = tau / (1.0 - tau)
        for i in range(m):
            head += term
            weighted += i * term
            term *= ((n - i) / (i + 1)) * ratio
        return head, weighted
    log_tau = math.log(tau)
    log_comp = math.log1p(-tau)
    lg_n = math.lgamma(n + 1)
    for i in range(m):
        log_term = (
            lg_n
            - math.lgamma(i + 1)
            - math.lgamma(n - i + 1)
            + i * log_tau
            + (n - i) * log_comp
        )
        term = math.exp(log_term)
        head += term
        weighted += i * term
    return head, weighted


def _window_prob(tau: float, deadline: int) -> float:
    """Probability of at least one transmission in `deadline` slots."""
    if tau == 0.0:
        return 0.0
    if tau == 1.0:
        return 1.0
    if deadline == 1:
        return tau
    return -math.expm1(deadline * math.log1p(-tau))


def admit_prob(config: ChannelConfig, tau) -> float:
    """Probability that at most mpr - 1 of the other n_users - 1 stations
    transmit, i.e. that a given transmission would be decoded."""
    t = as_probability(tau)
    head, _ = _head_sums(config.n_users - 1, config.mpr, t)
    return head


def admit_weight(config: ChannelConfig, tau) -> float:
    """Expected number of interfering transmissions, counted only on the
    decodable event: sum of i * P(Y = i) over i < mpr."""
    t = as_probability(tau)
    _, weighted = _head_sums(config.n_users - 1, config.mpr, t)
    return weighted


def admitted_load(config: ChannelConfig, tau) -> float:
    """Mean number of interferers given the slot is decodable.

    Defined on the open interval (0, 1) only; equals admit_weight/admit_prob.
    """
    t = _open_probability(tau)
    head, weighted = _head_sums(config.n_users - 1, config.mpr, t)
    if head == 0.0:
        raise ValueError(
            f"admit probability underflowed to zero at tau={t}; "
            "the conditional mean is not computable here"
        )
    return weighted / head


def deadline_load(config: ChannelConfig, tau) -> float:
    """The deadline-window counterpart of `admitted_load`:

        tau * (n_users + deadline - 1 - deadline / (1 - (1 - tau)^deadline))

    Defined on (0, 1). The optimal tau is where this crosses admitted_load.
    """
    t = _open_probability(tau)
    window = _window_prob(t, config.deadline)
    return t * (config.n_users + config.deadline - 1 - config.deadline / window)


def delivery_prob(config: ChannelConfig, tau) -> float:
    """Per-packet successful delivery probability at transmission level tau.

    Product of the probability that the packet is transmitted at all within
    its deadline window and the probability that the chosen slot is decodable.
    """
    t = as_probability(tau)
    return _window_prob(t, config.deadline) * admit_prob(config, t)


def delivery_prob_derivative(config: ChannelConfig, tau) -> float:
    """d/dtau of delivery_prob, on the open interval (0, 1)."""
    t = _open_probability(tau)
    n = config.n_users
    d = config.deadline
    head, weighted = _head_sums(n - 1, config.mpr, t)
    window = _window_prob(t, d)
    miss = (1.0 - t) ** d
    inner = (n - 1) - (n + d - 1) * miss
    return (window * weighted - inner * t * head) / (t * (1.0 - t))


def lower_bound_tau(n_users: int, deadline: int) -> float:
    """Left endpoint of the interval that contains the optimum:

        1 - ((n_users - 1) / (n_users - 1 + deadline)) ** (1 / deadline)

    The maximizing tau always lies in [this bound, 1).
    """
    if n_users < 2:
        raise ValueError(f"n_users must be >= 2, got {n_users}")
    if deadline < 1:
        raise ValueError(f"deadline must be >= 1, got {deadline}")
    if deadline == 1:
        # Simplifies to 1/n exactly; the log/expm1 route is 1 ulp noisier.
        return 1.0 / n_users
    ratio = (n_users - 1) / (n_users - 1 + deadline)
    return -math.expm1(math.log(ratio) / deadline)


def optimal_tau_spr(n_users: int, deadline: int) -> float:
    """Closed-form optimum for a single-packet receiver (mpr = 1).

    With mpr = 1 the maximum sits exactly at the interval's left endpoint.
    """
    return lower_bound_tau(n_users, deadline)


def success_size_ratio(config: ChannelConfig, tau) -> float:
    """Second-to-first moment ratio of the decoded batch size.

    Over all n_users stations, sum i^2 * P(X = i) / sum i * P(X = i) with the
    sums truncated at mpr. Exceeds the conditional interferer mean by exactly
    one, which is what the identity checks pin down.
    """
    t = _open_probability(tau)
    n = config.n_users
    num = math.fsum(
        i * i * binomial_pmf(n, i, t) for i in range(1, config.mpr + 1)
    )
    den = math.fsum(
        i * binomial_pmf(n, i, t) for i in range(1, config.mpr + 1)
    )
    if den == 0.0:
        raise ValueError(
            f"decoded-batch mass underflowed to zero at tau={t}"
        )
    return num / den


def window_bound(deadline: int, x) -> float:
    """The factor deadline^2 x^2 (1-x)^(deadline-1) / (1-(1-x)^deadline)^2.

    Identically 1 when deadline == 1 and strictly below 1 on (0, 1) otherwise;
    this is what makes the fixed-point iteration contract toward the optimum.
    """
    if deadline < 1:
        raise ValueError(f"deadline must be >= 1, got {deadline}")
    v = _open_probability(x)
    window = _window_prob(v, deadline)
    return (deadline * v) ** 2 * (1.0 - v) ** (deadline - 1) / window**2


def iteration_map(config: ChannelConfig, x) -> float:
    """One step of the fixed-point update:

        g(x) = x * (admitted_load(x) + 1) / (deadline_load(x) + 1)

    Fixed points of g on (0, 1) are exactly the stationary points of the
    delivery probability.
    """
    v = _open_probability(x)
    return (
        v
        * (admitted_load(config, v) + 1.0)
        / (deadline_load(config, v) + 1.0)
    )


def solve_optimal_tau(
    config: ChannelConfig,
    tolerance: float = 1e-12,
    max_iter: int = 10_000,
) -> SolveReport:
    """Find the tau in (0, 1) maximizing `delivery_prob`.

    For mpr = 1 the closed form is returned directly. Otherwise the iteration
    x <- g(x) is started from the midpoint of the localization interval and
    run until successive iterates move by at most `tolerance`.
    """
    if tolerance <= 0.0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if config.mpr == 1:
        tau = optimal_tau_spr(config.n_users, config.deadline)
        return SolveReport(
            tau_opt=TxProbability(tau),
            sdp_max=delivery_prob(config, tau),
            iterations=0,
            residual=0.0,
            converged=True,
        )
    x = 0.5 * (lower_bound_tau(config.n_users, config.deadline) + 1.0)
    residual = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        x_next = iteration_map(config, x)
        residual = abs(x_next - x)
        x = x_next
        if residual <= tolerance:
            break
    return SolveReport(
        tau_opt=TxProbability(x),
        sdp_max=delivery_prob(config, x),
        iterations=iterations,
        residual=residual,
        converged=residual <= tolerance,
    )


def grid_search_optimum(
    config: ChannelConfig, coarse_points: int = 2000
) -> tuple[float, float]:
    """Derivative-free maximizer of `delivery_prob`, for cross-checking.

    Scans a uniform grid over [lower_bound_tau, 1), then refines the best
    cell with golden-section search down to a bracket of width 1e-10.
    Returns (tau, sdp). Slower than the solver by orders of magnitude.
    """
    if coarse_points < 1000:
        raise ValueError(
            f"coarse_points must be >= 1000, got {coarse_points}"
        )
    lo = lower_bound_tau(config.n_users, config.deadline)
    step = (1.0 - lo) / coarse_points
    best_k = 0
    best_val = -math.inf
    for k in range(coarse_points):
        val = delivery_prob(config, lo + k * step)
        if val > best_val:
            best_val = val
            best_k = k
    a = lo + (best_k - 1) * step if best_k > 0 else lo
    b = min(lo + (best_k + 1) * step, 1.0)
    # The objective is unimodal on (0, 1), so the bracket holds the maximum.
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = delivery_prob(config, c)
    fd = delivery_prob(config, d)
    while b - a > 1e-10:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = delivery_prob(config, c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = delivery_prob(config, d)
    tau = 0.5 * (a + b)
    return tau, delivery_prob(config, tau)

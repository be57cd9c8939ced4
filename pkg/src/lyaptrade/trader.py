"""The per-slot queue-driven trading policy.

Selling and buying each minimize a queue-weighted objective every slot:
sell side per stock, buy side jointly under the purchase budget.  The
three buy solvers (exact DP, greedy relaxation, share-budget fill) are
interchangeable.  All objective comparisons are done in scaled integer
arithmetic so trajectories are exactly reproducible and the downstream
bound verifiers can use zero tolerance.

Unit convention: prices and costs are integer cents; the aggressiveness
parameter V is per dollar.  Every V*price product is formed as
V * (cents/100), so targets and objectives match the dollar-denominated
formulas exactly.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .errors import CapacityError, ConfigError, StructuralError
from .market import (MarketSpec, PortfolioState, TradeDecision, slot_profit,
                     validate_decision)
from .money import cents_to_str, cents_to_units
from .prices import (MarkovPriceModel, PriceDistribution, PriceTrace, make_rng,
                     markov_state_sequence, sample_iid_indices)

DEFAULT_CAPACITY_CELLS = 10 ** 8


def capacity_cells() -> int:
    env = os.environ.get("LYAPTRADE_CAPACITY_CELLS")
    return int(env) if env else DEFAULT_CAPACITY_CELLS


def _as_fraction(v) -> Fraction:
    # str() round-trips decimal literals (0.1 -> 1/10), which is what a
    # human writing V=0.1 in a config means.
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(str(v))
    return Fraction(v)


def compute_theta(spec: MarketSpec, V) -> tuple:
    """Default per-stock queue targets: V * price cap + twice the trade cap."""
    V = _as_fraction(V)
    if V <= 0:
        raise ConfigError("V must be positive")
    return tuple(V * cents_to_units(s.p_max) + 2 * s.mu_max for s in spec.stocks)


@dataclass(frozen=True)
class TraderParams:
    """Tuning knobs for the per-slot policy.

    theta and initial_queue default to the conforming choices (target rule
    above; initial queue at the per-stock trade cap).  Overrides are
    allowed but flagged non-conforming, which the band verifier reports.
    """

    V: Fraction
    theta: tuple | None = None
    initial_queue: tuple | None = None
    placeholder: bool = False
    buy_solver: str = "exact"     # "exact" | "greedy" | "share_budget"

    def __post_init__(self):
        object.__setattr__(self, "V", _as_fraction(self.V))
        if self.V <= 0:
            raise ConfigError("V must be positive")
        if self.buy_solver not in ("exact", "greedy", "share_budget"):
            raise ConfigError(f"unknown buy solver {self.buy_solver!r}")
        if self.theta is not None:
            object.__setattr__(self, "theta",
                               tuple(_as_fraction(t) for t in self.theta))
        if self.initial_queue is not None:
            object.__setattr__(self, "initial_queue",
                               tuple(int(q) for q in self.initial_queue))

    def resolved_theta(self, spec: MarketSpec) -> tuple:
        return self.theta if self.theta is not None else compute_theta(spec, self.V)

    def resolved_initial_queue(self, spec: MarketSpec) -> tuple:
        if self.initial_queue is not None:
            return self.initial_queue
        return tuple(s.mu_max for s in spec.stocks)

    def theta_conforms(self, spec: MarketSpec) -> bool:
        return self.resolved_theta(spec) == compute_theta(spec, self.V)

    def initial_conforms(self, spec: MarketSpec) -> bool:
        q0 = self.resolved_initial_queue(spec)
        return all(s.mu_max <= q <= self.V * cents_to_units(s.p_max) + 3 * s.mu_max
                   for s, q in zip(spec.stocks, q0))


def queue_band(spec: MarketSpec, params: TraderParams) -> tuple:
    """Per-stock (low, high) deterministic operating band for the queues."""
    return tuple((s.mu_max, params.V * cents_to_units(s.p_max) + 3 * s.mu_max)
                 for s in spec.stocks)


class SlotSolver:
    """Precomputed scaled-integer solver for one (spec, params) pair.

    The slot objective is scaled by S = lcm(100 * den(V), den(theta_n)) so
    every comparison is between Python ints.  k = S*V/100 multiplies any
    cents quantity to form a scaled V*money term.
    """

    def __init__(self, spec: MarketSpec, params: TraderParams):
        self.spec = spec
        self.params = params
        theta = params.resolved_theta(spec)
        if len(theta) != spec.n_stocks:
            raise StructuralError("theta dimensioned for a different market")
        S = 100 * params.V.denominator
        for t in theta:
            S = math.lcm(S, t.denominator)
        self.scale = S
        self.k = (S // (100 * params.V.denominator)) * params.V.numerator
        self.thetaS = tuple(int(t * S) for t in theta)
        self.theta = theta
        self.mu_max = tuple(s.mu_max for s in spec.stocks)
        self.sell_cost = tuple(tuple(s.sell_cost(m) for m in range(s.mu_max + 1))
                               for s in spec.stocks)
        self.buy_cost = tuple(tuple(s.buy_cost(a) for a in range(s.mu_max + 1))
                              for s in spec.stocks)
        self.budget = spec.budget
        if params.buy_solver == "share_budget" and self.budget.mode != "shares":
            raise ConfigError("share_budget solver needs a share budget")
        if params.buy_solver == "exact" and self.budget.mode == "shares":
            raise ConfigError("exact solver handles money or no budget; "
                              "use the share_budget solver")
        if params.buy_solver == "greedy":
            for s in spec.stocks:
                if not s.buy_cost.is_concave(s.mu_max):
                    raise ConfigError(
                        f"greedy solver needs concave buy costs (stock {s.index})")

    # -- selling -----------------------------------------------------------

    def sell(self, prices, queue, enforce_ownership: bool = True) -> tuple:
        S, k = self.scale, self.k
        out = []
        for n, (p, q) in enumerate(zip(prices, queue)):
            c = self.thetaS[n] - S * q - k * p
            table = self.sell_cost[n]
            hi = self.mu_max[n]
            if enforce_ownership and q < hi:
                hi = q
            best_mu, best = 0, 0
            for m in range(1, hi + 1):
                if m * p < table[m]:
                    continue
                val = c * m + k * table[m]
                if val < best:
                    best, best_mu = val, m
            out.append(best_mu)
        return tuple(out)

    # -- buying ------------------------------------------------------------

    def _buy_coeffs(self, prices, queue) -> list:
        S, k = self.scale, self.k
        return [S * q - self.thetaS[n] + k * p
                for n, (p, q) in enumerate(zip(prices, queue))]

    def _per_stock_min(self, w, n) -> int:
        table = self.buy_cost[n]
        k = self.k
        best_a, best = 0, 0
        for a in range(1, self.mu_max[n] + 1):
            val = w * a + k * table[a]
            if val < best:
                best, best_a = val, a
        return best_a

    def buy_exact(self, prices, queue) -> tuple:
        coeffs = self._buy_coeffs(prices, queue)
        if self.budget.mode == "none":
            return tuple(self._per_stock_min(w, n) for n, w in enumerate(coeffs))
        if self.budget.mode != "money":
            raise StructuralError("exact solver handles money or no budget")
        return self._money_dp(prices, coeffs)

    def _money_dp(self, prices, coeffs) -> tuple:
        # Dict-keyed DP over money spent; cell value is the lexicographic
        # best (objective, total shares, buy vector) reaching that spend.
        x = self.budget.money
        cap = capacity_cells()
        work = 0
        dp = {0: (0, 0, ())}
        k = self.k
        for n, w in enumerate(coeffs):
            p = prices[n]
            table = self.buy_cost[n]
            new: dict = {}
            for spend, key in dp.items():
                obj, shares, vec = key
                for a in range(self.mu_max[n] + 1):
                    ns = spend + a * p
                    if ns > x:
                        break
                    cand = (obj + w * a + k * table[a], shares + a, vec + (a,))
                    old = new.get(ns)
                    if old is None or cand < old:
                        new[ns] = cand
                work += self.mu_max[n] + 1
                if work > cap:
                    raise CapacityError(
                        "money-budget table exceeded the cell cap; "
                        "consider the greedy solver")
            dp = new
        return min(dp.values())[2]

    def buy_greedy(self, prices, queue) -> tuple:
        """Budget-relaxed sequential fill: repeatedly take the share block
        with the most negative average objective per cent of price; may
        overshoot the money budget by at most one share.

        Blocks (not single shares) are needed so a concave fixed fee whose
        first marginal is non-negative cannot hide a profitable bulk buy;
        for zero/linear costs a block is equivalent to single-share steps.

        Guarantee: the objective never exceeds the exact solver's budget-
        constrained minimum when there is no money budget (the fill is then
        the exact per-stock minimizer) or when buy costs are zero/linear.
        Under a money budget with hump-shaped costs (e.g. fixed fees) no
        bounded-overshoot ratio rule can promise that: amortizing a fee may
        require a block that earlier, better-ratio purchases have priced
        out of the remaining budget.  A block cut short by the budget stop
        is rolled back if its partial contribution is non-negative, so a
        truncated fee hump never makes the result worse.
        """
        if self.budget.mode == "shares":
            raise StructuralError("greedy solver relaxes a money budget")
        x = self.budget.money if self.budget.mode == "money" else None
        coeffs = self._buy_coeffs(prices, queue)
        k = self.k
        A = [0] * len(coeffs)
        spent = 0
        while True:
            best_n = -1
            best_j = 0
            best_num = best_den = 0  # ratio num/den, den > 0; p==0 acts as -inf
            for n, w in enumerate(coeffs):
                cap = self.mu_max[n] - A[n]
                if cap <= 0:
                    continue
                table = self.buy_cost[n]
                base = table[A[n]]
                num = None
                size = 0
                for j in range(1, cap + 1):
                    total = w * j + k * (table[A[n] + j] - base)
                    if total < 0 and (num is None or total * size < num * j):
                        num, size = total, j
                if num is None:
                    continue
                p = prices[n]
                if p == 0:
                    best_n, best_j, best_num, best_den = n, size, num, 0
                    break
                den = size * p
                if best_n < 0 or num * best_den < best_num * den:
                    best_n, best_j, best_num, best_den = n, size, num, den
            if best_n < 0:
                return tuple(A)
            table = self.buy_cost[best_n]
            start = A[best_n]
            for _ in range(best_j):
                A[best_n] += 1
                spent += prices[best_n]
                if x is not None and spent >= x:
                    taken = A[best_n] - start
                    partial = coeffs[best_n] * taken \
                        + k * (table[start + taken] - table[start])
                    if taken < best_j and partial >= 0:
                        A[best_n] = start
                        spent -= taken * prices[best_n]
                    return tuple(A)

    def buy_share_budget(self, prices, queue) -> tuple:
        coeffs = self._buy_coeffs(prices, queue)
        a_tot = self.budget.shares
        k = self.k
        if all(s.buy_cost.kind in ("zero", "linear") for s in self.spec.stocks):
            # Constant per-share weights: fill negative weights in
            # ascending order, lower index first on ties.
            weights = []
            for n, w in enumerate(coeffs):
                rate = self.spec.stocks[n].buy_cost.rate \
                    if self.spec.stocks[n].buy_cost.kind == "linear" else 0
                weights.append((w + k * rate, n))
            A = [0] * len(coeffs)
            remaining = a_tot
            for weight, n in sorted(w for w in weights if w[0] < 0):
                take = min(self.mu_max[n], remaining)
                A[n] = take
                remaining -= take
                if remaining == 0:
                    break
            return tuple(A)
        # General costs: grouped DP over total shares bought.
        dp = {0: (0, 0, ())}
        cap = capacity_cells()
        work = 0
        for n, w in enumerate(coeffs):
            table = self.buy_cost[n]
            new: dict = {}
            for used, key in dp.items():
                obj, shares, vec = key
                for a in range(min(self.mu_max[n], a_tot - used) + 1):
                    cand = (obj + w * a + k * table[a], shares + a, vec + (a,))
                    slot = used + a
                    old = new.get(slot)
                    if old is None or cand < old:
                        new[slot] = cand
                work += self.mu_max[n] + 1
                if work > cap:
                    raise CapacityError("share-budget table exceeded the cell cap")
            dp = new
        return min(dp.values())[2]

    def buy(self, prices, queue) -> tuple:
        if self.params.buy_solver == "greedy":
            return self.buy_greedy(prices, queue)
        if self.params.buy_solver == "share_budget":
            return self.buy_share_budget(prices, queue)
        return self.buy_exact(prices, queue)

    # -- objective bookkeeping (used by solvers' tests and verifiers) ------

    def scaled_objective(self, prices, queue, sells, buys) -> int:
        """S * (-V*profit - sum_n (Q_n - theta_n)(mu_n - A_n)), an integer."""
        S, k = self.scale, self.k
        total = 0
        for n, p in enumerate(prices):
            total -= k * (sells[n] * p - self.sell_cost[n][sells[n]])
            total += k * (buys[n] * p + self.buy_cost[n][buys[n]])
            total -= (S * queue[n] - self.thetaS[n]) * (sells[n] - buys[n])
        return total

    def profit(self, prices, sells, buys) -> int:
        total = 0
        for n, p in enumerate(prices):
            total += sells[n] * p - self.sell_cost[n][sells[n]]
            total -= buys[n] * p + self.buy_cost[n][buys[n]]
        return total


def sell_decision(params: TraderParams, spec: MarketSpec, prices, queue) -> tuple:
    prices = spec.check_prices(prices)
    return SlotSolver(spec, params).sell(prices, queue)


def buy_decision_exact(params: TraderParams, spec: MarketSpec, prices, queue) -> tuple:
    prices = spec.check_prices(prices)
    return SlotSolver(spec, params).buy_exact(prices, queue)


def buy_decision_greedy(params: TraderParams, spec: MarketSpec, prices, queue) -> tuple:
    prices = spec.check_prices(prices)
    solver = SlotSolver(spec, replace(params, buy_solver="greedy"))
    return solver.buy_greedy(prices, queue)


def buy_decision_share_budget(params: TraderParams, spec: MarketSpec,
                              prices, queue) -> tuple:
    prices = spec.check_prices(prices)
    solver = SlotSolver(spec, replace(params, buy_solver="share_budget"))
    return solver.buy_share_budget(prices, queue)


def trader_step(params: TraderParams, spec: MarketSpec,
                state: PortfolioState, prices):
    """One slot: sell, buy, post profit, advance the queues."""
    prices = spec.check_prices(prices)
    solver = SlotSolver(spec, params)
    sells = solver.sell(prices, state.queue)
    buys = solver.buy(prices, state.queue)
    d = TradeDecision(buys, sells)
    profit = solver.profit(prices, sells, buys)
    new_queue = tuple(max(q - m + a, 0)
                      for q, m, a in zip(state.queue, sells, buys))
    new_state = PortfolioState(new_queue, state.cumulative_profit + profit,
                               state.slot + 1)
    return d, profit, new_state


def startup_cost(spec: MarketSpec, prices) -> int:
    """Cents to buy the per-stock trade cap of every stock at given prices."""
    prices = spec.check_prices(prices)
    return sum(s.mu_max * p + s.buy_cost(s.mu_max)
               for s, p in zip(spec.stocks, prices))


def placeholder_wrap(params: TraderParams, spec: MarketSpec) -> TraderParams:
    """Augment the initial queue with one trade cap of fake shares per stock.

    params.initial_queue is interpreted as the *actual* holdings (default
    all zero).  The returned params start the policy inside its operating
    band without any startup purchase; the band guarantee ensures fake
    shares are never sold.
    """
    real = params.initial_queue if params.initial_queue is not None \
        else (0,) * spec.n_stocks
    for s, q in zip(spec.stocks, real):
        hi = params.V * cents_to_units(s.p_max) + 2 * s.mu_max
        if not 0 <= q <= hi:
            raise StructuralError(
                f"actual holdings {q} outside [0, {hi}] for stock {s.index}")
    augmented = tuple(q + s.mu_max for q, s in zip(real, spec.stocks))
    return replace(params, initial_queue=augmented, placeholder=True)


@dataclass
class Trajectory:
    """Per-slot record of one run; the input every verifier consumes."""

    spec: MarketSpec
    params: TraderParams
    initial_queue: tuple
    prices: list = field(default_factory=list)
    buys: list = field(default_factory=list)
    sells: list = field(default_factory=list)
    queues: list = field(default_factory=list)   # post-decision
    profits: list = field(default_factory=list)  # cents

    @property
    def n_slots(self) -> int:
        return len(self.prices)

    def queue_at(self, t: int) -> tuple:
        """Queue at the start of slot t (t == n_slots gives the final queue)."""
        if not 0 <= t <= self.n_slots:
            raise StructuralError(f"slot {t} out of range")
        return self.initial_queue if t == 0 else self.queues[t - 1]

    def cumulative_profit(self) -> int:
        return sum(self.profits)

    def real_queue_at(self, t: int) -> tuple:
        """Actual holdings at slot t (subtracts fake shares when present)."""
        q = self.queue_at(t)
        if not self.params.placeholder:
            return q
        return tuple(v - s.mu_max for v, s in zip(q, self.spec.stocks))

    def check_dynamics(self):
        q = self.initial_queue
        for t in range(self.n_slots):
            expected = tuple(max(v - m + a, 0)
                             for v, m, a in zip(q, self.sells[t], self.buys[t]))
            if expected != self.queues[t]:
                raise StructuralError(f"queue dynamics violated at slot {t}")
            q = self.queues[t]

    def to_csv(self, stream):
        n = self.spec.n_stocks
        writer = csv.writer(stream, lineterminator="\n")
        header = (["slot"] + [f"p_{i+1}" for i in range(n)]
                  + [f"A_{i+1}" for i in range(n)]
                  + [f"mu_{i+1}" for i in range(n)]
                  + [f"Q_{i+1}" for i in range(n)] + ["profit"])
        writer.writerow(header)
        for t in range(self.n_slots):
            writer.writerow([t] + [cents_to_str(p) for p in self.prices[t]]
                            + list(self.buys[t]) + list(self.sells[t])
                            + list(self.queues[t])
                            + [cents_to_str(self.profits[t])])

    @staticmethod
    def from_csv(stream, spec: MarketSpec, params: TraderParams,
                 initial_queue=None) -> "Trajectory":
        from .prices import _parse_price_cell
        reader = csv.reader(stream)
        next(reader)  # header
        n = spec.n_stocks
        traj = Trajectory(spec, params,
                          tuple(initial_queue) if initial_queue is not None
                          else params.resolved_initial_queue(spec))
        for rownum, row in enumerate(reader, start=1):
            if len(row) != 4 * n + 2:
                raise StructuralError(f"row {rownum}: wrong column count")
            traj.prices.append(tuple(_parse_price_cell(c, rownum)
                                     for c in row[1:1 + n]))
            traj.buys.append(tuple(int(c) for c in row[1 + n:1 + 2 * n]))
            traj.sells.append(tuple(int(c) for c in row[1 + 2 * n:1 + 3 * n]))
            traj.queues.append(tuple(int(c) for c in row[1 + 3 * n:1 + 4 * n]))
            traj.profits.append(_parse_price_cell(row[-1].lstrip("-"), rownum)
                                * (-1 if row[-1].startswith("-") else 1))
        return traj

    def summary(self) -> dict:
        qmins = [min(q[i] for q in [self.initial_queue] + self.queues)
                 for i in range(self.spec.n_stocks)]
        qmaxs = [max(q[i] for q in [self.initial_queue] + self.queues)
                 for i in range(self.spec.n_stocks)]
        return {
            "slots": self.n_slots,
            "cumulative_profit": cents_to_str(self.cumulative_profit()),
            "queue_min": qmins,
            "queue_max": qmaxs,
        }


def _price_sequence(spec, source, horizon, seed, stream):
    if horizon < 1:
        raise StructuralError("horizon must be at least 1")
    if isinstance(source, PriceTrace):
        if len(source) < horizon:
            raise StructuralError(
                f"trace has {len(source)} slots, horizon is {horizon}")
        source.check_against(spec)
        return list(source.sequence[:horizon])
    rng = make_rng(seed, stream)
    if isinstance(source, PriceDistribution):
        source.check_against(spec)
        idxs = sample_iid_indices(source, horizon, rng)
        support = source.support
        return [support[i] for i in idxs]
    if isinstance(source, MarkovPriceModel):
        source.check_against(spec)
        states = markov_state_sequence(source, 0, horizon, rng)
        emit = source.states
        return [emit[s] for s in states]
    raise StructuralError(f"unknown price source {type(source).__name__}")


def run_backtest(spec: MarketSpec, params: TraderParams, source,
                 horizon: int, seed: int = 0, stream: int = 0) -> Trajectory:
    """Full per-slot trajectory; deterministic given (seed, stream)."""
    seq = _price_sequence(spec, source, horizon, seed, stream)
    solver = SlotSolver(spec, params)
    traj = Trajectory(spec, params, params.resolved_initial_queue(spec))
    q = traj.initial_queue
    memo: dict = {}
    ap, ab, as_, aq, apr = (traj.prices.append, traj.buys.append,
                            traj.sells.append, traj.queues.append,
                            traj.profits.append)
    for p in seq:
        key = (q, p)
        hit = memo.get(key)
        if hit is None:
            sells = solver.sell(p, q)
            buys = solver.buy(p, q)
            profit = solver.profit(p, sells, buys)
            nq = tuple(v - m + a if v - m + a > 0 else 0
                       for v, m, a in zip(q, sells, buys))
            hit = (sells, buys, profit, nq)
            memo[key] = hit
        sells, buys, profit, nq = hit
        ap(p); ab(buys); as_(sells); aq(nq); apr(profit)
        q = nq
    return traj


def run_profit(spec: MarketSpec, params: TraderParams, source,
               horizon: int, seed: int = 0, stream: int = 0):
    """Light-weight run: (total profit cents, final queue), no records."""
    seq = _price_sequence(spec, source, horizon, seed, stream)
    solver = SlotSolver(spec, params)
    q = params.resolved_initial_queue(spec)
    memo: dict = {}
    total = 0
    for p in seq:
        key = (q, p)
        hit = memo.get(key)
        if hit is None:
            sells = solver.sell(p, q)
            buys = solver.buy(p, q)
            profit = solver.profit(p, sells, buys)
            nq = tuple(v - m + a if v - m + a > 0 else 0
                       for v, m, a in zip(q, sells, buys))
            hit = (profit, nq)
            memo[key] = hit
        profit, nq = hit
        total += profit
        q = nq
    return total, q


def scaled_windows_run(spec: MarketSpec, params: TraderParams, beta,
                       frame: int, frames_per_window: int, num_windows: int,
                       source, seed: int = 0):
    """Windowed runs with exponential re-scaling of the trade caps and V.

    Each window runs frame * frames_per_window slots with place-holder
    stock and zero actual initial shares.  After window w earning
    time-average profit q_w (dollars/slot), the next window's trade caps
    and V are scaled by (1 + beta * max(q_w, 0)) cumulatively; trade caps
    round down but never below 1.

    Returns a list of (q_w as Fraction dollars/slot, scale factor applied
    to window w as Fraction).
    """
    beta = _as_fraction(beta)
    if beta < 0:
        raise ConfigError("beta must be non-negative")
    if frame < 1 or frames_per_window < 1 or num_windows < 1:
        raise ConfigError("frame, frames_per_window, num_windows must be >= 1")
    W = frame * frames_per_window
    if isinstance(source, PriceTrace) and len(source) < W * num_windows:
        raise StructuralError("trace shorter than the full windowed horizon")
    results = []
    scale = Fraction(1)
    for w in range(num_windows):
        stocks = tuple(
            type(s)(s.index, max(1, int(s.mu_max * scale)), s.p_max,
                    s.buy_cost, s.sell_cost)
            for s in spec.stocks)
        wspec = MarketSpec(stocks, spec.budget)
        wparams = placeholder_wrap(
            TraderParams(V=params.V * scale, buy_solver=params.buy_solver,
                         initial_queue=(0,) * spec.n_stocks),
            wspec)
        if isinstance(source, PriceTrace):
            wsource = PriceTrace(source.sequence[w * W:(w + 1) * W],
                                 source=source.source)
        else:
            wsource = source
        total, _ = run_profit(wspec, wparams, wsource, W, seed=seed, stream=w)
        q_w = cents_to_units(total) / W
        results.append((q_w, scale))
        scale = scale * (1 + beta * max(q_w, Fraction(0)))
    return results

"""Exact comparison baselines for the dynamic policy.

- the optimal price-only policy LP (profit-rate upper bound and its
  randomized policy),
- the exact finite-horizon lookahead optimizer over one frame,
- a brute-force per-slot objective minimizer used as a test oracle.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from fractions import Fraction

from .errors import CapacityError, StructuralError
from .market import MarketSpec, TradeDecision
from .money import cents_to_units
from .prices import PriceDistribution
from .trader import SlotSolver, TraderParams

DEFAULT_ENUM_CAP = 10 ** 6
DEFAULT_SEARCH_CAP = 10 ** 8


def _cap(default: int) -> int:
    env = os.environ.get("LYAPTRADE_CAPACITY_CELLS")
    return int(env) if env else default


@dataclass(frozen=True)
class ActionSet:
    """All feasible (buys, sells) pairs for one price vector."""

    price: tuple
    actions: tuple  # of TradeDecision


def _sell_options(spec, prices, queue=None):
    opts = []
    for n, s in enumerate(spec.stocks):
        p = prices[n]
        hi = s.mu_max if queue is None else min(s.mu_max, queue[n])
        opts.append([m for m in range(hi + 1)
                     if m == 0 or m * p >= s.sell_cost(m)])
    return opts


def enumerate_actions(spec: MarketSpec, prices, queue=None,
                      cap: int | None = None) -> ActionSet:
    """Complete feasible action enumeration for one price vector.

    queue=None gives the virtual-policy set (no ownership constraint);
    passing a queue additionally caps sells by current holdings.
    """
    prices = spec.check_prices(prices)
    cap = cap if cap is not None else _cap(DEFAULT_ENUM_CAP)
    sell_opts = _sell_options(spec, prices, queue)
    buy_opts = [range(s.mu_max + 1) for s in spec.stocks]
    bound = 1
    for so, bo in zip(sell_opts, buy_opts):
        bound *= len(so) * len(bo)
    if bound > cap:
        raise CapacityError(f"action set bound {bound} exceeds cap {cap}")
    budget = spec.budget
    actions = []
    for buys in itertools.product(*buy_opts):
        if budget.mode == "money":
            if sum(a * p for a, p in zip(buys, prices)) > budget.money:
                continue
        elif budget.mode == "shares":
            if sum(buys) > budget.shares:
                continue
        for sells in itertools.product(*sell_opts):
            actions.append(TradeDecision(buys, sells))
    return ActionSet(prices, tuple(actions))


def action_profit(spec: MarketSpec, prices, d: TradeDecision) -> int:
    """Slot profit of an action at fixed prices, in cents."""
    total = 0
    for s, p, a, m in zip(spec.stocks, prices, d.buys, d.sells):
        total += m * p - s.sell_cost(m) - a * p - s.buy_cost(a)
    return total


@dataclass(frozen=True)
class PonlyPolicy:
    """Conditional distribution over feasible actions per support price."""

    table: tuple  # tuple of (price, tuple of (TradeDecision, Fraction))

    def actions_for(self, price):
        for p, acts in self.table:
            if p == price:
                return acts
        raise StructuralError(f"price {price} not in policy support")

    def check_simplex(self):
        for _, acts in self.table:
            total = sum(q for _, q in acts)
            if total != 1 or any(q < 0 or q > 1 for _, q in acts):
                raise StructuralError("policy probabilities are not a simplex")


@dataclass(frozen=True)
class PonlySolution:
    policy: PonlyPolicy
    phi_opt: Fraction        # dollars per slot
    drifts: tuple            # per-stock Fractions, all >= 0
    spec: MarketSpec
    dist: PriceDistribution


def _evaluate_policy(spec, dist, table):
    """(profit rate in dollars, per-stock drifts) of a policy table."""
    profit = Fraction(0)
    drifts = [Fraction(0)] * spec.n_stocks
    for (price, acts), pi in zip(table, dist.probs):
        for d, q in acts:
            if q == 0:
                continue
            profit += pi * q * cents_to_units(action_profit(spec, price, d))
            for n in range(spec.n_stocks):
                drifts[n] += pi * q * (d.buys[n] - d.sells[n])
    return profit, tuple(drifts)


def solve_phi_opt(spec: MarketSpec, dist: PriceDistribution,
                  exact: bool = True) -> PonlySolution:
    """Optimal price-only policy: maximize expected slot profit over
    per-price action distributions subject to non-negative expected net
    accumulation for every stock.  Exact rational simplex by default."""
    from .simplex import EQ, GEQ, solve_lp

    dist.check_against(spec)
    sets = [enumerate_actions(spec, p) for p in dist.support]
    index = []
    for i, aset in enumerate(sets):
        for j in range(len(aset.actions)):
            index.append((i, j))
    nvars = len(index)
    objective = [dist.probs[i] * cents_to_units(
        action_profit(spec, sets[i].price, sets[i].actions[j]))
        for i, j in index]
    constraints = []
    for i in range(len(sets)):
        row = [1 if ii == i else 0 for ii, _ in index]
        constraints.append((row, EQ, 1))
    for n in range(spec.n_stocks):
        row = [dist.probs[i] * (sets[i].actions[j].buys[n]
                                - sets[i].actions[j].sells[n])
               for i, j in index]
        constraints.append((row, GEQ, 0))
    value, x = solve_lp(objective, constraints, maximize=True, exact=exact)
    table = []
    pos = 0
    for i, aset in enumerate(sets):
        acts = []
        for j in range(len(aset.actions)):
            q = x[pos]
            pos += 1
            if q > 0:
                acts.append((aset.actions[j], Fraction(q)))
        table.append((aset.price, tuple(acts)))
    policy = PonlyPolicy(tuple(table))
    profit, drifts = _evaluate_policy(spec, dist, policy.table)
    if profit < 0:
        raise StructuralError("optimal price-only profit cannot be negative")
    if any(d < -Fraction(1, 10 ** 9) for d in drifts):
        raise StructuralError("LP returned a negative-drift policy")
    return PonlySolution(policy, profit, drifts, spec, dist)


def drift_rebalance(solution: PonlySolution) -> PonlySolution:
    """Thin the buy side of every positive-drift stock so all drifts hit
    zero without reducing the profit rate.

    A stock with expected buys alpha and expected sells beta (< alpha)
    keeps its buy component with probability beta/alpha and zeroes it
    otherwise; in distribution terms the kept action splits its mass with
    its buy entry zeroed.
    """
    spec, dist = solution.spec, solution.dist
    table = [(price, dict(acts)) for price, acts in solution.policy.table]
    for n in range(spec.n_stocks):
        _, drifts = _evaluate_policy(
            spec, dist, [(p, tuple(a.items())) for p, a in table])
        d = drifts[n]
        if d <= 0:
            continue
        alpha = Fraction(0)
        beta = Fraction(0)
        for (price, acts), pi in zip(table, dist.probs):
            for act, q in acts.items():
                alpha += pi * q * act.buys[n]
                beta += pi * q * act.sells[n]
        assert alpha > 0, "positive drift forces positive expected buys"
        keep = beta / alpha
        for price, acts in table:
            for act in list(acts):
                if act.buys[n] == 0:
                    continue
                q = acts.pop(act)
                zeroed = TradeDecision(
                    tuple(0 if m == n else a for m, a in enumerate(act.buys)),
                    act.sells)
                if keep > 0:
                    acts[act] = acts.get(act, Fraction(0)) + q * keep
                acts[zeroed] = acts.get(zeroed, Fraction(0)) + q * (1 - keep)
    new_table = tuple((price, tuple(acts.items())) for price, acts in table)
    policy = PonlyPolicy(new_table)
    profit, drifts = _evaluate_policy(spec, dist, new_table)
    if profit < solution.phi_opt:
        raise StructuralError("rebalance reduced the profit rate")
    return PonlySolution(policy, profit, drifts, spec, dist)


@dataclass(frozen=True)
class LookaheadResult:
    psi_cents: int
    decisions: tuple  # length-T TradeDecision sequence

    @property
    def psi(self) -> Fraction:
        """Optimal frame profit in dollars."""
        return cents_to_units(self.psi_cents)


def lookahead_psi(spec: MarketSpec, window) -> LookaheadResult:
    """Exact maximum frame profit with perfect knowledge of the window's
    prices, allowing intra-frame short selling as long as every stock's
    net purchases over the frame are non-negative.

    Depth-first search over per-slot feasible actions with an admissible
    bound (suffix sums of unconstrained per-slot maxima) and a
    reachability prune on the running net-share balance.
    """
    window = [spec.check_prices(p) for p in window]
    T = len(window)
    if T < 1:
        raise StructuralError("lookahead window must have at least one slot")
    cap = _cap(DEFAULT_SEARCH_CAP)
    slot_actions = []
    for p in window:
        aset = enumerate_actions(spec, p)
        scored = sorted(((action_profit(spec, p, d), d) for d in aset.actions),
                        key=lambda t: -t[0])
        slot_actions.append(scored)
    suffix_best = [0] * (T + 1)
    for t in range(T - 1, -1, -1):
        suffix_best[t] = suffix_best[t + 1] + max(0, slot_actions[t][0][0])
    mu_max = tuple(s.mu_max for s in spec.stocks)
    n = spec.n_stocks
    best_value = 0
    best_seq = tuple(TradeDecision.zero(n) for _ in range(T))
    chosen = [None] * T
    nodes = 0

    def search(t, profit, net):
        nonlocal best_value, best_seq, nodes
        if t == T:
            if all(v >= 0 for v in net) and profit > best_value:
                best_value = profit
                best_seq = tuple(chosen)
            return
        if profit + suffix_best[t] <= best_value:
            return
        remaining = T - t
        for i in range(n):
            if net[i] + remaining * mu_max[i] < 0:
                return
        for gain, d in slot_actions[t]:
            nodes += 1
            if nodes > cap:
                raise CapacityError(
                    "lookahead node cap exceeded; use a smaller frame")
            chosen[t] = d
            search(t + 1, profit + gain,
                   tuple(v + a - m for v, a, m in zip(net, d.buys, d.sells)))
    search(0, 0, (0,) * n)
    return LookaheadResult(best_value, best_seq)


def brute_force_slot_min(params: TraderParams, spec: MarketSpec,
                         prices, queue) -> TradeDecision:
    """Exhaustive minimizer of the per-slot trading objective over the
    full joint feasible set (ownership included); the independent oracle
    the per-slot optimality checks compare against.  Ties prefer the
    smaller trade, then the lower stock index."""
    prices = spec.check_prices(prices)
    solver = SlotSolver(spec, params)
    aset = enumerate_actions(spec, prices, queue=queue)
    best_key = None
    best = None
    for d in aset.actions:
        obj = solver.scaled_objective(prices, queue, d.sells, d.buys)
        key = (obj, sum(d.sells) + sum(d.buys), d.sells + d.buys)
        if best_key is None or key < best_key:
            best_key, best = key, d
    return best

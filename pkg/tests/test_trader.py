"""Per-slot policy: sell/buy solvers, stepping, runs, placeholder shares,
windowed scaling."""

import io
import random
from fractions import Fraction

import pytest

from lyaptrade import (BudgetMode, CostFunction, MarketSpec, PortfolioState,
                       PriceDistribution, PriceTrace, StockSpec, TraderParams,
                       Trajectory, compute_theta, placeholder_wrap, queue_band,
                       run_backtest, run_profit, scaled_windows_run,
                       startup_cost, trader_step, validate_decision)
from lyaptrade.errors import ConfigError, StructuralError
from lyaptrade.trader import (SlotSolver, buy_decision_exact,
                              buy_decision_greedy, buy_decision_share_budget,
                              sell_decision)

from conftest import one_stock_spec, random_small_spec, uniform_two_price


class TestTheta:
    def test_dollar_example(self):
        spec = one_stock_spec(mu_max=2, p_max_cents=1000)
        assert compute_theta(spec, 100) == (1004,)

    def test_cent_example(self):
        spec = one_stock_spec(mu_max=1, p_max_cents=1)
        assert compute_theta(spec, 1) == (Fraction(201, 100),)

    def test_per_stock(self):
        spec = MarketSpec((StockSpec(0, 1, 100), StockSpec(1, 3, 500)))
        assert compute_theta(spec, 10) == (12, 56)

    def test_v_must_be_positive(self):
        with pytest.raises(ConfigError):
            compute_theta(one_stock_spec(), 0)

    def test_band(self):
        spec = one_stock_spec(mu_max=2, p_max_cents=1000)
        assert queue_band(spec, TraderParams(V=100)) == ((2, 1006),)


class TestSell:
    def test_below_threshold_never_sells(self):
        # queue below theta - V*p_max blocks every sale
        spec = one_stock_spec(mu_max=2, p_max_cents=200)
        params = TraderParams(V=10)  # theta = 24, threshold = 4
        assert sell_decision(params, spec, (200,), (3,)) == (0,)

    def test_high_queue_sells_cap(self):
        spec = one_stock_spec(mu_max=3, p_max_cents=100)
        params = TraderParams(V=10, theta=(10,))
        # Q = theta + mu_max, p = p_max: coefficient is negative
        assert sell_decision(params, spec, (100,), (13,)) == (3,)

    def test_zero_price_positive_coeff(self):
        spec = one_stock_spec(mu_max=3, p_max_cents=100)
        params = TraderParams(V=10)
        assert sell_decision(params, spec, (0,), (5,)) == (0,)

    def test_ownership_caps_sale(self):
        spec = one_stock_spec(mu_max=3, p_max_cents=100)
        params = TraderParams(V=10, theta=(1,))
        assert sell_decision(params, spec, (100,), (2,)) == (2,)

    def test_fee_cover_filter(self):
        spec = one_stock_spec(mu_max=1, p_max_cents=100,
                              sell=CostFunction("fixed", fee=50))
        params = TraderParams(V=10, theta=(1,))
        assert sell_decision(params, spec, (40,), (5,)) == (0,)


class TestBuyExact:
    def test_above_theta_never_buys(self):
        spec = one_stock_spec(mu_max=2, p_max_cents=200)
        params = TraderParams(V=10)  # theta = 24
        assert buy_decision_exact(params, spec, (0,), (25,)) == (0,)

    def test_cheap_price_buys_cap(self):
        spec = one_stock_spec(mu_max=2, p_max_cents=200)
        params = TraderParams(V=10)
        assert buy_decision_exact(params, spec, (100,), (2,)) == (2,)

    def test_budget_blocks_purchase(self):
        spec = one_stock_spec(mu_max=2, p_max_cents=200,
                              budget=BudgetMode("money", money=1))
        params = TraderParams(V=10)
        assert buy_decision_exact(params, spec, (100,), (2,)) == (0,)

    def test_matches_enumeration(self, rng):
        from lyaptrade import enumerate_actions
        for _ in range(60):
            spec = random_small_spec(rng, max_stocks=2, max_mu=2)
            params = TraderParams(V=rng.choice((1, 5, 20)))
            solver = SlotSolver(spec, params)
            prices = tuple(rng.randrange(0, s.p_max + 1) for s in spec.stocks)
            queue = tuple(rng.randrange(0, 8) for _ in spec.stocks)
            got = solver.buy(prices, queue)
            coeff = solver._buy_coeffs(prices, queue)
            best = min(
                (sum(w * a for w, a in zip(coeff, d.buys))
                 + solver.k * sum(s.buy_cost(a) for s, a
                                  in zip(spec.stocks, d.buys)),
                 sum(d.buys), d.buys)
                for d in enumerate_actions(spec, prices).actions)
            ours = (sum(w * a for w, a in zip(coeff, got))
                    + solver.k * sum(s.buy_cost(a) for s, a
                                     in zip(spec.stocks, got)),
                    sum(got), got)
            assert ours == best


class TestBuyGreedy:
    def test_nonnegative_coeffs_buy_nothing(self):
        spec = one_stock_spec(mu_max=2, p_max_cents=100)
        params = TraderParams(V=10, theta=(1,), buy_solver="greedy")
        assert buy_decision_greedy(params, spec, (100,), (5,)) == (0,)

    def test_picks_smallest_ratio_first(self):
        spec = MarketSpec((StockSpec(0, 1, 100), StockSpec(1, 1, 100)),
                          BudgetMode("money", money=100))
        # coefficients (Q - theta + V p) = (-10, -2) at p = $1 each
        params = TraderParams(V=1, theta=(12, 4), buy_solver="greedy")
        assert buy_decision_greedy(params, spec, (100, 100), (1, 1)) == (1, 0)

    def test_single_stock_matches_exact_without_overshoot(self, rng):
        for _ in range(50):
            spec = one_stock_spec(mu_max=rng.randint(1, 3),
                                  p_max_cents=rng.choice((100, 200)))
            params = TraderParams(V=rng.choice((1, 10)))
            prices = (rng.randrange(1, spec.stocks[0].p_max + 1),)
            queue = (rng.randrange(0, 6),)
            assert buy_decision_greedy(params, spec, prices, queue) \
                == buy_decision_exact(params, spec, prices, queue)

    def test_zero_price_taken_immediately(self):
        spec = one_stock_spec(mu_max=3, p_max_cents=100,
                              budget=BudgetMode("money", money=1))
        params = TraderParams(V=1, theta=(100,), buy_solver="greedy")
        assert buy_decision_greedy(params, spec, (0,), (0,)) == (3,)

    def test_requires_concave_costs(self):
        spec = one_stock_spec(
            mu_max=2, p_max_cents=100,
            buy=CostFunction("table", values=(0, 1, 10)))
        with pytest.raises(ConfigError):
            SlotSolver(spec, TraderParams(V=1, buy_solver="greedy"))


class TestBuyShareBudget:
    def test_slack_budget_reduces_to_per_stock(self):
        stocks = (StockSpec(0, 2, 200), StockSpec(1, 2, 200))
        loose = MarketSpec(stocks, BudgetMode("shares", shares=4))
        free = MarketSpec(stocks)
        params = TraderParams(V=10, buy_solver="share_budget")
        prices, queue = (100, 50), (2, 2)
        got = buy_decision_share_budget(params, loose, prices, queue)
        assert got == buy_decision_exact(TraderParams(V=10), free,
                                         prices, queue)

    def test_fills_most_negative_first(self):
        stocks = (StockSpec(0, 2, 200,
                            buy_cost=CostFunction("linear", rate=10)),
                  StockSpec(1, 2, 200))
        spec = MarketSpec(stocks, BudgetMode("shares", shares=2))
        params = TraderParams(V=1, theta=(10, 10), buy_solver="share_budget")
        # weights: (2 - 10 + 1 + 0.1, 2 - 10 + 0.5) -> stock 1 first
        got = buy_decision_share_budget(params, spec, (100, 50), (2, 2))
        assert got == (0, 2)

    def test_tight_budget(self):
        spec = MarketSpec((StockSpec(0, 3, 200),),
                          BudgetMode("shares", shares=1))
        params = TraderParams(V=10, buy_solver="share_budget")
        assert buy_decision_share_budget(params, spec, (100,), (0,)) == (1,)

    def test_table_cost_dp_path(self, rng):
        from lyaptrade import enumerate_actions
        spec = MarketSpec(
            (StockSpec(0, 2, 200,
                       buy_cost=CostFunction("table", values=(0, 10, 40))),
             StockSpec(1, 2, 200)),
            BudgetMode("shares", shares=3))
        params = TraderParams(V=5, buy_solver="share_budget")
        solver = SlotSolver(spec, params)
        for _ in range(30):
            prices = tuple(rng.randrange(0, 201) for _ in range(2))
            queue = tuple(rng.randrange(0, 8) for _ in range(2))
            got = solver.buy(prices, queue)
            coeff = solver._buy_coeffs(prices, queue)
            best = min(
                (sum(w * a for w, a in zip(coeff, d.buys))
                 + solver.k * sum(s.buy_cost(a) for s, a
                                  in zip(spec.stocks, d.buys)),
                 sum(d.buys), d.buys)
                for d in enumerate_actions(spec, prices).actions)
            assert best[2] == got


class TestStep:
    def test_degenerate_prices_yield_zero_decision(self):
        spec = one_stock_spec(mu_max=2, p_max_cents=100)
        params = TraderParams(V=10, theta=(5,))
        d, profit, state = trader_step(params, spec, PortfolioState((5,)),
                                       (0,))
        assert d.buys == d.sells == (0,) and profit == 0
        assert state.queue == (5,) and state.slot == 1

    def test_emitted_decision_is_feasible(self, rng):
        for _ in range(40):
            spec = random_small_spec(rng)
            params = TraderParams(V=rng.choice((5, 50)))
            prices = tuple(rng.randrange(0, s.p_max + 1) for s in spec.stocks)
            q0 = tuple(s.mu_max for s in spec.stocks)
            d, profit, _ = trader_step(params, spec, PortfolioState(q0),
                                       prices)
            assert validate_decision(spec, prices, PortfolioState(q0), d).ok

    def test_no_sale_at_band_floor(self):
        spec = one_stock_spec(mu_max=2, p_max_cents=200)
        params = TraderParams(V=50)
        d, _, _ = trader_step(params, spec, PortfolioState((2,)), (200,))
        assert d.sells == (0,)


class TestRuns:
    def test_single_slot(self):
        spec = one_stock_spec()
        traj = run_backtest(spec, TraderParams(V=50), uniform_two_price(),
                            1, seed=4)
        assert traj.n_slots == 1

    def test_determinism(self):
        spec = one_stock_spec()
        a = run_backtest(spec, TraderParams(V=50), uniform_two_price(),
                         500, seed=11)
        b = run_backtest(spec, TraderParams(V=50), uniform_two_price(),
                         500, seed=11)
        assert (a.prices, a.buys, a.sells, a.queues, a.profits) == \
            (b.prices, b.buys, b.sells, b.queues, b.profits)

    def test_run_profit_matches_backtest(self):
        spec = one_stock_spec()
        traj = run_backtest(spec, TraderParams(V=50), uniform_two_price(),
                            2000, seed=12)
        total, final = run_profit(spec, TraderParams(V=50),
                                  uniform_two_price(), 2000, seed=12)
        assert total == traj.cumulative_profit()
        assert final == traj.queue_at(traj.n_slots)

    def test_short_trace_rejected(self):
        trace = PriceTrace(((100,), (100,)))
        with pytest.raises(StructuralError):
            run_backtest(one_stock_spec(), TraderParams(V=50), trace, 3)

    def test_fees_suppress_zero_price_trading(self):
        # fee large enough that V*fee outweighs the worst drift reward
        spec = one_stock_spec(buy=CostFunction("fixed", fee=300),
                              sell=CostFunction("fixed", fee=300))
        trace = PriceTrace(((0,),) * 50)
        traj = run_backtest(spec, TraderParams(V=5), trace, 50)
        assert traj.cumulative_profit() == 0
        assert all(b == (0,) and s == (0,) for b, s
                   in zip(traj.buys, traj.sells))

    def test_csv_round_trip(self):
        spec = one_stock_spec()
        params = TraderParams(V=50)
        traj = run_backtest(spec, params, uniform_two_price(), 40, seed=3)
        buf = io.StringIO()
        traj.to_csv(buf)
        buf.seek(0)
        again = Trajectory.from_csv(buf, spec, params)
        assert again.prices == traj.prices and again.profits == traj.profits
        again.check_dynamics()

    def test_check_dynamics_catches_corruption(self):
        traj = run_backtest(one_stock_spec(), TraderParams(V=50),
                            uniform_two_price(), 30, seed=3)
        traj.queues[10] = (traj.queues[10][0] + 1,)
        with pytest.raises(StructuralError):
            traj.check_dynamics()


class TestPlaceholder:
    def test_zero_holdings_start_at_band_floor(self):
        spec = one_stock_spec(mu_max=2)
        wrapped = placeholder_wrap(TraderParams(V=50), spec)
        assert wrapped.initial_queue == (2,) and wrapped.placeholder

    def test_out_of_band_holdings_rejected(self):
        spec = one_stock_spec(mu_max=1, p_max_cents=100)
        with pytest.raises(StructuralError):
            placeholder_wrap(TraderParams(V=1, initial_queue=(100,)), spec)

    def test_fake_shares_never_sold(self):
        spec = one_stock_spec(mu_max=2)
        params = placeholder_wrap(TraderParams(V=20), spec)
        traj = run_backtest(spec, params, uniform_two_price(), 2000, seed=6)
        for t in range(traj.n_slots):
            real = traj.real_queue_at(t)
            assert all(m <= r for m, r in zip(traj.sells[t], real))
            assert all(r >= 0 for r in real)

    def test_no_startup_purchase_posted(self):
        spec = one_stock_spec(mu_max=2)
        plain = run_backtest(spec, TraderParams(V=20), uniform_two_price(),
                             500, seed=8)
        wrapped = run_backtest(spec, placeholder_wrap(TraderParams(V=20),
                                                      spec),
                               uniform_two_price(), 500, seed=8)
        assert wrapped.cumulative_profit() == plain.cumulative_profit()
        assert startup_cost(spec, plain.prices[0]) > 0


class TestScaledWindows:
    def test_beta_zero_keeps_scale_flat(self):
        spec = one_stock_spec()
        out = scaled_windows_run(spec, TraderParams(V=20), 0, 4, 25, 3,
                                 uniform_two_price(), seed=2)
        assert [scale for _, scale in out] == [1, 1, 1]

    def test_loss_window_does_not_scale(self):
        # constant price with a buy fee: the policy never profits
        spec = one_stock_spec(buy=CostFunction("linear", rate=90))
        trace = PriceTrace(((100,),) * 200)
        out = scaled_windows_run(spec, TraderParams(V=20), Fraction(1, 10),
                                 4, 25, 2, trace, seed=2)
        assert out[0][0] <= 0 and out[1][1] == 1

    def test_profitable_windows_scale_up(self):
        spec = one_stock_spec()
        out = scaled_windows_run(spec, TraderParams(V=20), Fraction(1, 10),
                                 4, 50, 4, uniform_two_price(), seed=2)
        assert all(q > 0 for q, _ in out)
        scales = [s for _, s in out]
        assert all(b > a for a, b in zip(scales, scales[1:]))

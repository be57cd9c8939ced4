"""Price vector sources: finite-support i.i.d. sampling, Markov-modulated
chains, and CSV trace replay.

All randomness flows through counter-based Philox generators keyed by
(seed, stream), so replications split deterministically across workers
and identical seeds reproduce identical sequences bit-for-bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction

import numpy as np

from .errors import ConfigError, NumericalError, ParseError, StructuralError
from .market import MarketSpec
from .money import cents_to_str

PROB_TOL = 1e-12
STATIONARY_TOL = 1e-10


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator; distinct streams are independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class PriceDistribution:
    """Finite-support distribution over price vectors (cents).

    Probabilities are kept as exact Fractions (normalized on load) so the
    policy LP downstream can run in rational arithmetic.
    """

    support: tuple          # tuple of per-stock cents tuples
    probs: tuple            # matching Fractions, summing to 1

    def __post_init__(self):
        support = tuple(tuple(int(p) for p in vec) for vec in self.support)
        if not support:
            raise ConfigError("empty price support")
        if len({len(v) for v in support}) != 1:
            raise ConfigError("support vectors differ in length")
        probs = tuple(Fraction(p) for p in self.probs)
        if len(probs) != len(support):
            raise ConfigError("probability list does not match support")
        if any(p < 0 for p in probs):
            raise ConfigError("negative probability")
        total = sum(probs)
        if total <= 0:
            raise ConfigError("probabilities sum to zero")
        if abs(float(total) - 1.0) > PROB_TOL:
            probs = tuple(p / total for p in probs)
        elif total != 1:
            probs = tuple(p / total for p in probs)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    def check_against(self, spec: MarketSpec):
        for vec in self.support:
            spec.check_prices(vec)

    def float_probs(self) -> np.ndarray:
        return np.array([float(p) for p in self.probs])


@dataclass(frozen=True)
class MarkovPriceModel:
    """Irreducible finite-state chain emitting one price vector per state."""

    states: tuple           # tuple of per-stock cents tuples, indexed by state id
    transition: tuple       # row-stochastic matrix as tuple of tuples of floats

    def __post_init__(self):
        states = tuple(tuple(int(p) for p in vec) for vec in self.states)
        matrix = tuple(tuple(float(x) for x in row) for row in self.transition)
        k = len(states)
        if k == 0:
            raise ConfigError("empty state list")
        if len(matrix) != k or any(len(row) != k for row in matrix):
            raise ConfigError("transition matrix shape does not match states")
        for i, row in enumerate(matrix):
            if any(x < 0 for x in row):
                raise ConfigError(f"negative transition probability in row {i}")
            if abs(sum(row) - 1.0) > PROB_TOL:
                raise ConfigError(f"transition row {i} does not sum to 1")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "transition", matrix)
        if not self._irreducible():
            raise ConfigError("transition matrix is not irreducible")

    def _irreducible(self) -> bool:
        k = len(self.states)
        adj = [[j for j, x in enumerate(row) if x > 0] for row in self.transition]
        radj = [[] for _ in range(k)]
        for i, outs in enumerate(adj):
            for j in outs:
                radj[j].append(i)

        def reach(start, edges):
            seen = {start}
            stack = [start]
            while stack:
                for j in edges[stack.pop()]:
                    if j not in seen:
                        seen.add(j)
                        stack.append(j)
            return seen

        return len(reach(0, adj)) == k and len(reach(0, radj)) == k

    @property
    def n_states(self) -> int:
        return len(self.states)

    def check_against(self, spec: MarketSpec):
        for vec in self.states:
            spec.check_prices(vec)


@dataclass(frozen=True)
class PriceTrace:
    """A replayable finite price sequence with provenance."""

    sequence: tuple
    source: str = ""

    def __post_init__(self):
        seq = tuple(tuple(int(p) for p in vec) for vec in self.sequence)
        if seq and len({len(v) for v in seq}) != 1:
            raise ConfigError("trace rows differ in width")
        object.__setattr__(self, "sequence", seq)

    def __len__(self):
        return len(self.sequence)

    def check_against(self, spec: MarketSpec):
        for vec in self.sequence:
            spec.check_prices(vec)


@dataclass(frozen=True)
class MemoryParams:
    """User-supplied decaying-memory pair for the windowed profit bound.

    epsilon is in the same money scale as slot profits (cents) on the
    profit side and in shares/slot on the drift side; the bound uses the
    max of the two.
    """

    epsilon: float
    window: int

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        if self.window < 1:
            raise ConfigError("window must be a positive integer")


def sample_iid(dist: PriceDistribution, rng: np.random.Generator):
    """Draw one support element."""
    idx = rng.choice(len(dist.support), p=dist.float_probs())
    return dist.support[int(idx)]


def sample_iid_indices(dist: PriceDistribution, horizon: int,
                       rng: np.random.Generator) -> list:
    """Draw a whole horizon of support indices at once (hot path)."""
    return rng.choice(len(dist.support), size=horizon, p=dist.float_probs()).tolist()


def step_markov(model: MarkovPriceModel, state: int, rng: np.random.Generator):
    """Advance the chain one step; returns (new state, emitted price)."""
    if not 0 <= state < model.n_states:
        raise StructuralError(f"unknown state id {state}")
    nxt = int(rng.choice(model.n_states, p=model.transition[state]))
    return nxt, model.states[nxt]


def markov_state_sequence(model: MarkovPriceModel, start: int, horizon: int,
                          rng: np.random.Generator) -> list:
    """States visited over a horizon, starting from (and including) start."""
    if not 0 <= start < model.n_states:
        raise StructuralError(f"unknown state id {start}")
    rows = [np.cumsum(row) for row in model.transition]
    draws = rng.random(horizon)
    out = []
    state = start
    for u in draws:
        out.append(state)
        state = int(np.searchsorted(rows[state], u, side="right"))
        state = min(state, model.n_states - 1)
    return out


def stationary_distribution(model: MarkovPriceModel) -> PriceDistribution:
    """Unique stationary distribution, with states sharing a price merged."""
    k = model.n_states
    P = np.array(model.transition, dtype=float)
    A = np.vstack([P.T - np.eye(k), np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = float(np.max(np.abs(pi @ P - pi)))
    if residual > STATIONARY_TOL or np.any(pi < -STATIONARY_TOL):
        raise NumericalError("stationary solve ill-conditioned", residual=residual)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    merged: dict = {}
    for vec, prob in zip(model.states, pi):
        merged[vec] = merged.get(vec, 0.0) + float(prob)
    support = tuple(merged)
    probs = tuple(Fraction(merged[v]) for v in support)
    return PriceDistribution(support, probs)


def _parse_price_cell(cell: str, row: int) -> int:
    try:
        dec = Decimal(cell)
    except InvalidOperation as exc:
        raise ParseError(f"bad price {cell!r}", row=row) from exc
    if dec < 0:
        raise ParseError(f"negative price {cell!r}", row=row)
    cents = dec * 100
    if cents != cents.to_integral_value():
        raise ParseError(f"sub-cent price {cell!r}", row=row)
    return int(cents)


def load_trace(stream, spec: MarketSpec, cap_policy: str = "reject"):
    """Read a price trace CSV (header slot,p_1,...,p_N).

    Under "reject", any price above a stock's cap aborts with the row
    number.  Under "auto_expand", caps are raised to the observed maxima
    and the effective caps are returned alongside the trace.

    Returns (PriceTrace, per-stock effective caps in cents).
    """
    if cap_policy not in ("reject", "auto_expand"):
        raise ConfigError(f"unknown cap policy {cap_policy!r}")
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty trace file")
    n = spec.n_stocks
    expected = ["slot"] + [f"p_{i + 1}" for i in range(n)]
    if [h.strip() for h in header] != expected:
        raise ParseError(f"bad header {header!r}, expected {expected}")
    rows = []
    caps = [s.p_max for s in spec.stocks]
    for rownum, row in enumerate(reader, start=1):
        if len(row) != n + 1:
            raise ParseError(f"expected {n + 1} columns, got {len(row)}", row=rownum)
        try:
            slot = int(row[0])
        except ValueError as exc:
            raise ParseError(f"bad slot {row[0]!r}", row=rownum) from exc
        if slot != rownum - 1:
            raise ParseError(f"slot {slot} out of order (expected {rownum - 1})",
                             row=rownum)
        prices = tuple(_parse_price_cell(c, rownum) for c in row[1:])
        for i, (p, s) in enumerate(zip(prices, spec.stocks)):
            if p > caps[i]:
                if cap_policy == "reject":
                    raise ParseError(
                        f"price {cents_to_str(p)} exceeds cap "
                        f"{cents_to_str(s.p_max)} for stock {i}", row=rownum)
                caps[i] = p
        rows.append(prices)
    return PriceTrace(tuple(rows), source=getattr(stream, "name", "<stream>")), tuple(caps)


def save_trace(trace: PriceTrace, stream):
    """Write a trace in the bit-exact CSV format load_trace reads."""
    if not trace.sequence:
        raise StructuralError("refusing to write an empty trace")
    n = len(trace.sequence[0])
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["slot"] + [f"p_{i + 1}" for i in range(n)])
    for slot, vec in enumerate(trace.sequence):
        writer.writerow([slot] + [cents_to_str(p) for p in vec])

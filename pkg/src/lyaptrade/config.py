"""Experiment configuration: one JSON document describing the market,
the trader, the price source, and what to run and verify.

Errors carry JSON-pointer-style locations so a bad field in a large
config is findable.  Configs round-trip: to_json(load(x)) == x up to
canonical money formatting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConfigError
from .market import MarketSpec
from .money import to_cents
from .prices import MarkovPriceModel, PriceDistribution, PriceTrace, load_trace
from .trader import TraderParams, _as_fraction

KNOWN_CHECKS = ("dynamics", "queue_band", "slot_optimality",
                "frame_drift", "thm1", "thm2", "thm3")


@dataclass(frozen=True)
class SourceConfig:
    kind: str                     # "iid" | "markov" | "trace"
    dist: PriceDistribution | None = None
    model: MarkovPriceModel | None = None
    path: str | None = None
    cap_policy: str = "reject"

    def resolve(self, spec: MarketSpec):
        """Returns (price source object, possibly cap-expanded spec)."""
        if self.kind == "iid":
            return self.dist, spec
        if self.kind == "markov":
            return self.model, spec
        with open(self.path) as fh:
            trace, caps = load_trace(fh, spec, cap_policy=self.cap_policy)
        return trace, spec.with_p_max(caps)


@dataclass(frozen=True)
class ExperimentConfig:
    market: MarketSpec
    trader: TraderParams
    source: SourceConfig
    horizon: int
    seed: int
    replications: int = 1
    verify: tuple = ()
    oracle: dict = field(default_factory=dict)
    scaled: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    write_trajectories: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1", location="/horizon")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1",
                              location="/replications")
        for name in self.verify:
            if name not in KNOWN_CHECKS:
                raise ConfigError(f"unknown check {name!r} "
                                  f"(known: {', '.join(KNOWN_CHECKS)})",
                                  location="/verify")


def _price_vector(obj, where):
    try:
        return tuple(to_cents(p, what=where) for p in obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), location=where) from exc


def _parse_source(obj) -> SourceConfig:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError("source needs a 'kind' field", location="/source")
    kind = obj["kind"]
    try:
        if kind == "iid":
            support = tuple(_price_vector(v, "/source/support")
                            for v in obj["support"])
            probs = tuple(Fraction(str(p)) for p in obj["probs"])
            return SourceConfig("iid", dist=PriceDistribution(support, probs))
        if kind == "markov":
            states = tuple(_price_vector(v, "/source/states")
                           for v in obj["states"])
            model = MarkovPriceModel(states, tuple(
                tuple(row) for row in obj["transition"]))
            return SourceConfig("markov", model=model)
        if kind == "trace":
            policy = obj.get("cap_policy", "reject")
            if policy not in ("reject", "auto_expand"):
                raise ConfigError(f"unknown cap policy {policy!r}",
                                  location="/source/cap_policy")
            return SourceConfig("trace", path=obj["path"], cap_policy=policy)
    except KeyError as exc:
        raise ConfigError(f"missing field {exc}", location="/source") from exc
    raise ConfigError(f"unknown source kind {kind!r}", location="/source/kind")


def _parse_trader(obj) -> TraderParams:
    if "V" not in obj:
        raise ConfigError("trader needs V", location="/trader/V")
    try:
        kwargs = {"V": _as_fraction(obj["V"])}
        if obj.get("theta") is not None:
            kwargs["theta"] = tuple(_as_fraction(t) for t in obj["theta"])
        if obj.get("initial_queue") is not None:
            kwargs["initial_queue"] = tuple(int(q) for q in obj["initial_queue"])
        kwargs["placeholder"] = bool(obj.get("placeholder", False))
        kwargs["buy_solver"] = obj.get("buy_solver", "exact")
        return TraderParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), location="/trader") from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return config_from_json(doc)


def config_from_json(doc) -> ExperimentConfig:
    for key in ("market", "trader", "source", "horizon"):
        if key not in doc:
            raise ConfigError(f"missing top-level field {key!r}",
                              location=f"/{key}")
    if "seed" not in doc:
        raise ConfigError("seed is required; there is no wall-clock default",
                          location="/seed")
    market = MarketSpec.from_json(doc["market"])
    trader = _parse_trader(doc["trader"])
    source = _parse_source(doc["source"])
    return ExperimentConfig(
        market=market,
        trader=trader,
        source=source,
        horizon=int(doc["horizon"]),
        seed=int(doc["seed"]),
        replications=int(doc.get("replications", 1)),
        verify=tuple(doc.get("verify", ())),
        oracle=dict(doc.get("oracle", {})),
        scaled=dict(doc.get("scaled", {})),
        options=dict(doc.get("options", {})),
        write_trajectories=bool(doc.get("write_trajectories", False)),
    )


def config_to_json(cfg: ExperimentConfig) -> dict:
    from .money import cents_to_str

    trader = {"V": str(cfg.trader.V), "buy_solver": cfg.trader.buy_solver,
              "placeholder": cfg.trader.placeholder}
    if cfg.trader.theta is not None:
        trader["theta"] = [str(t) for t in cfg.trader.theta]
    if cfg.trader.initial_queue is not None:
        trader["initial_queue"] = list(cfg.trader.initial_queue)
    src = cfg.source
    if src.kind == "iid":
        source = {"kind": "iid",
                  "support": [[cents_to_str(p) for p in v]
                              for v in src.dist.support],
                  "probs": [str(p) for p in src.dist.probs]}
    elif src.kind == "markov":
        source = {"kind": "markov",
                  "states": [[cents_to_str(p) for p in v]
                             for v in src.model.states],
                  "transition": [list(row) for row in src.model.transition]}
    else:
        source = {"kind": "trace", "path": src.path,
                  "cap_policy": src.cap_policy}
    out = {
        "market": cfg.market.to_json(),
        "trader": trader,
        "source": source,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "replications": cfg.replications,
        "verify": list(cfg.verify),
        "write_trajectories": cfg.write_trajectories,
    }
    if cfg.oracle:
        out["oracle"] = cfg.oracle
    if cfg.scaled:
        out["scaled"] = cfg.scaled
    if cfg.options:
        out["options"] = cfg.options
    return out

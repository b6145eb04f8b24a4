"""Synthetic market-day generation and end-to-end price simulation.

Builds jittered offer curves and daily-shaped noisy load profiles per
5-minute interval, clears each interval, and collects the retained
congestion price vectors. All randomness comes from per-interval child
streams of one seed, so adding buses or days never reshuffles draws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from importlib import resources

import numpy as np

from .grid import GridMatrices, GridTopology, build_matrices, ieee30, load_grid_file
from .market import (DispatchOutcome, OfferCurve, PriceMatrix,
                     assemble_price_matrix, clear_market, expand_blocks,
                     load_offers_file)


class BadConfigError(Exception):
    pass


@dataclass
class ScenarioConfig:
    """Knobs of the simulation protocol.

    ``load_scale`` divides the (x7) base profile, so the default of 7
    reproduces nominal demand levels; ``cost_scale`` multiplies nominal
    offer prices by cost_scale/10 (the bundled offers are already at the
    x10 wholesale level).
    """

    grid_file: str | None = None
    offers_file: str | None = None
    loads_file: str | None = None
    intervals_per_day: int = 288
    days: int = 1
    cost_jitter: float = 2.5
    load_sigma_ratio: float = 0.1
    load_scale: float = 7.0
    cost_scale: float = 10.0
    peak_ratio: float = 1.3
    peak_fraction: float = 0.75
    seed: int = 0
    mlc_sigma: float = 0.0
    drop_uncongested: bool = True

    def __post_init__(self):
        if self.load_scale <= 0 or self.cost_scale <= 0:
            raise BadConfigError("scales must be strictly positive")
        if not 0.0 <= self.load_sigma_ratio < 1.0:
            raise BadConfigError("load_sigma_ratio must lie in [0, 1)")
        if self.intervals_per_day <= 0 or self.days <= 0:
            raise BadConfigError("horizon must be positive")
        if self.cost_jitter < 0:
            raise BadConfigError("cost_jitter must be nonnegative")
        if self.peak_ratio < 1.0:
            raise BadConfigError("peak_ratio must be >= 1")

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls(**json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Scenario:
    """Resolved inputs: topology, nominal offers, nominal bus loads."""

    topology: GridTopology
    offers: list[OfferCurve]
    nominal_loads: np.ndarray
    matrices: GridMatrices = field(default=None)

    def __post_init__(self):
        if self.matrices is None:
            self.matrices = build_matrices(self.topology)

    def with_topology(self, topology: GridTopology) -> "Scenario":
        return Scenario(topology, self.offers, self.nominal_loads)


def _bundled_loads() -> dict[int, float]:
    text = resources.files("lmptopo.data").joinpath("ieee30_loads.json").read_text()
    return {int(e["bus"]): float(e["mw"]) for e in json.loads(text)["loads"]}


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Resolve files (bundled IEEE 30-bus defaults) into a Scenario."""
    topology = (load_grid_file(config.grid_file) if config.grid_file
                else ieee30())
    offers = (load_offers_file(config.offers_file) if config.offers_file
              else load_offers_file(resources.files("lmptopo.data")
                                    .joinpath("ieee30_offers.json")))
    if config.loads_file:
        with open(config.loads_file) as fh:
            entries = json.load(fh)["loads"]
        load_map = {int(e["bus"]): float(e["mw"]) for e in entries}
    else:
        load_map = _bundled_loads()
    nominal = np.zeros(topology.bus_count)
    for bus, mw in load_map.items():
        nominal[bus] = mw
    return Scenario(topology, offers, nominal)


def _interval_rng(config: ScenarioConfig, t_global: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=config.seed, spawn_key=(t_global,))
    return np.random.default_rng(ss)


def daily_shape(config: ScenarioConfig, t_in_day: int) -> float:
    """Mean-one daily multiplier peaking at peak_ratio."""
    tau = t_in_day / config.intervals_per_day
    return 1.0 + (config.peak_ratio - 1.0) * np.cos(
        2.0 * np.pi * (tau - config.peak_fraction))


def interval_inputs(scenario: Scenario, config: ScenarioConfig, t_global: int):
    """Jittered offers + perturbed loads for one interval.

    Draw order per interval stream: one offer shift per generator (file
    order), then one load perturbation per loaded bus (bus order); the
    same stream then feeds any loss-noise draw in the clearing.
    """
    rng = _interval_rng(config, t_global)
    price_factor = config.cost_scale / 10.0

    offers = []
    for offer in scenario.offers:
        shift = rng.uniform(-config.cost_jitter, config.cost_jitter) \
            if config.cost_jitter > 0 else 0.0
        blocks = tuple((q, p * price_factor + shift) for q, p in offer.blocks)
        offers.append(OfferCurve(offer.bus, blocks))

    t_in_day = t_global % config.intervals_per_day
    shape = daily_shape(config, t_in_day)
    loads = scenario.nominal_loads * (7.0 / config.load_scale) * shape
    if config.load_sigma_ratio > 0:
        noisy = np.zeros_like(loads)
        for b in range(len(loads)):
            if loads[b] != 0.0:
                noisy[b] = loads[b] * (1.0 + config.load_sigma_ratio * rng.standard_normal())
        loads = np.maximum(noisy, 0.0)
    return offers, loads, rng


def clear_interval(scenario: Scenario, config: ScenarioConfig,
                   t_global: int) -> DispatchOutcome:
    offers, loads, rng = interval_inputs(scenario, config, t_global)
    instance = expand_blocks(offers, loads)
    return clear_market(instance, scenario.matrices,
                        mlc_sigma=config.mlc_sigma, rng=rng)


def generate_day(scenario: Scenario, config: ScenarioConfig, day: int = 0):
    """Offer curves and load vectors for every interval of one day."""
    t0 = day * config.intervals_per_day
    out = []
    for t in range(t0, t0 + config.intervals_per_day):
        offers, loads, _ = interval_inputs(scenario, config, t)
        out.append((offers, loads))
    return out


def simulate(config: ScenarioConfig, scenario: Scenario | None = None,
             t_start: int = 0, t_stop: int | None = None):
    """Clear every interval in [t_start, t_stop); returns (PriceMatrix, log).

    The log holds one DispatchOutcome per simulated interval, retained
    or not; the price matrix applies the drop policy from the config.
    """
    if scenario is None:
        scenario = build_scenario(config)
    if t_stop is None:
        t_stop = t_start + config.days * config.intervals_per_day
    outcomes = [clear_interval(scenario, config, t)
                for t in range(t_start, t_stop)]
    pm = assemble_price_matrix(outcomes, drop_uncongested=config.drop_uncongested)
    pm.interval_ids = [t_start + i for i in pm.interval_ids]
    return pm, outcomes

"""Daily control loop: observe, estimate risk, act, step, account.

Interventions are withheld (forced to no-intervention) until ``t_start``
days after the first discovered case, for every policy including the
learned one.  Rewards and the episode cost share the same per-day cost
increments by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import gnn as gnn_mod
from . import policy as policy_mod
from .errors import ConfigurationError
from .metrics import EpisodeMetrics
from .risk import RiskConfig, RiskVector, estimate_risk
from .world import (
    Observation,
    WorldConfig,
    WorldState,
    build_world,
    intervention_allowed,
    observe,
    step_day,
)


@dataclass
class DayRecord:
    day: int
    obs: Observation
    risk: RiskVector
    actions: np.ndarray  # executed actions (after any engagement override)
    extras: dict
    outcome: object
    reward: float
    cost_increment: float
    controllable: bool


class BaselinePolicy:
    """One of the fixed comparison policies."""

    def __init__(self, name: str):
        self.kind, self.theta = policy_mod.parse_baseline_name(name)
        self.name = name

    def act(self, obs: Observation, risk: RiskVector, rng: np.random.Generator):
        return policy_mod.baseline(self.name, obs, risk, rng), {}


class ThresholdPolicy:
    """Learned policy: trunk forward, threshold cascade, interval selection."""

    def __init__(self, cfg: gnn_mod.GnnConfig, params: dict):
        self.cfg = cfg
        self.params = params

    @property
    def required_history_days(self) -> int:
        return self.cfg.k_layers if self.cfg.trunk == gnn_mod.TRUNK_GNN else 0

    def act(self, obs: Observation, risk: RiskVector, rng: np.random.Generator):
        feats = gnn_mod.build_state_features(obs, risk, self.cfg.k_layers)
        cache = gnn_mod.forward(self.cfg, self.params, feats)
        thresholds = policy_mod.thresholds_from_values(cache.actor_out)
        decision = policy_mod.select_actions(risk, thresholds)
        extras = {
            "features": feats,
            "value": cache.value,
            "thresholds": thresholds,
            "decision": decision,
        }
        return decision.actions.copy(), extras


@dataclass
class EpisodeResult:
    metrics: EpisodeMetrics
    rewards: list
    world: WorldState


def day_reward(new_infections: float, cost_increment: float, theta_i: float, theta_q: float) -> float:
    """Dual-objective instantaneous reward; both terms are pure penalties."""
    if new_infections < 0 or cost_increment < 0:
        raise ValueError("reward arguments must be non-negative")
    return -math.exp(new_infections / theta_i) - math.exp(cost_increment / theta_q)


def run_episode(
    config: WorldConfig,
    policy,
    risk_cfg: Optional[RiskConfig] = None,
    *,
    world: Optional[WorldState] = None,
    policy_rng_seed: Optional[int] = None,
    guard_threshold: Optional[float] = None,
    guard_penalty: float = 0.0,
    theta_i: float = 500.0,
    theta_q: float = 10000.0,
    on_day: Optional[Callable[[DayRecord], None]] = None,
) -> EpisodeResult:
    """Simulate to the horizon (or until the guard stops the episode early).

    Passing ``world`` continues a fresh or mid-episode world; otherwise one
    is built from ``config``.
    """
    if risk_cfg is None:
        risk_cfg = RiskConfig(p_s=config.p_s, p_c=config.p_c)
    if risk_cfg.lookback_days > config.history_days:
        raise ConfigurationError(
            f"risk lookback {risk_cfg.lookback_days} exceeds recorded history "
            f"({config.history_days} days)"
        )
    needed = getattr(policy, "required_history_days", 0)
    if needed > config.history_days:
        raise ConfigurationError(
            f"policy needs {needed} days of visit history but the world only "
            f"records {config.history_days}"
        )
    if policy_rng_seed is None:
        policy_rng_seed = config.rng_seed
    if world is None:
        world = build_world(config)
    metrics = EpisodeMetrics(
        theta_i=theta_i, theta_q=theta_q, initial_infections=world.cumulative_infections
    )
    rewards: list = []

    for day in range(world.day, config.horizon_days):
        obs = observe(world)
        risk = estimate_risk(obs, world.visit_history, risk_cfg)
        rng = np.random.default_rng(np.random.SeedSequence([policy_rng_seed, 4, day]))
        actions, extras = policy.act(obs, risk, rng)
        controllable = intervention_allowed(world, day)
        if not controllable:
            actions = np.zeros(config.population, dtype=np.int8)
        outcome = step_day(world, actions)
        dq = metrics.accumulate_day(outcome)
        reward = day_reward(outcome.new_infections, dq, theta_i, theta_q)
        stop = guard_threshold is not None and outcome.new_infections > guard_threshold
        if stop:
            reward += guard_penalty
            metrics.guard_triggered = True
        rewards.append(reward)
        if on_day is not None:
            on_day(
                DayRecord(
                    day=day,
                    obs=obs,
                    risk=risk,
                    actions=actions,
                    extras=extras,
                    outcome=outcome,
                    reward=reward,
                    cost_increment=dq,
                    controllable=controllable,
                )
            )
        if stop:
            break

    assert abs(sum(metrics.daily_cost) - metrics.total_cost) < 1e-9
    return EpisodeResult(metrics=metrics, rewards=rewards, world=world)

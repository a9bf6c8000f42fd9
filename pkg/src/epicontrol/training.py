"""Rollout collection, advantage estimation, and the clipped policy update.

One update consumes one episode of day-steps.  The joint likelihood of a
day's action vector is the sum of per-individual interval-mass log
probabilities; the clipped surrogate, a squared-error value loss, and an
entropy bonus drive an adaptive-moment (Adam) step with global gradient-norm
clipping.  Episodes whose daily new infections exceed the guard threshold
are cut short with a large penalty so training never dwells in blown-up
states.

Rollouts here run sequentially, but each episode owns a private world and a
read-only parameter snapshot, so collection could fan out across workers as
long as every buffer in one update batch uses the same parameter version;
the update step itself is exclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import gnn as gnn_mod
from . import policy as policy_mod
from .episode import ThresholdPolicy, day_reward, run_episode
from .errors import NumericError
from .metrics import EpisodeMetrics
from .risk import RiskConfig
from .world import WorldConfig, WorldState, build_world

_LOG_FLOOR = np.finfo(np.float64).tiny
# Joint day likelihoods sum per-individual terms, so raw log-ratios can be
# huge; beyond this band the clipped surrogate's behavior is already
# saturated and exp() would overflow.
_LOG_RATIO_BAND = 30.0


@dataclass
class TrainConfig:
    theta_i: float = 500.0
    theta_q: float = 10000.0
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    learning_rate: float = 1e-4
    total_steps: int = 200_000
    epochs_per_update: int = 4
    minibatch_days: int = 16
    guard_threshold: float = 250.0
    guard_penalty: float = -100.0
    guard_enabled: bool = True
    grad_clip_norm: float = 0.5
    eval_every_updates: int = 10
    eval_seeds: tuple = (9001, 9002, 9003)

    def validate(self) -> None:
        if self.theta_i <= 0 or self.theta_q <= 0:
            raise ValueError("theta values must be positive")
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must be in (0, 1)")


def compute_reward(delta_infections: float, delta_cost: float, cfg: TrainConfig) -> float:
    """Instantaneous dual-objective penalty for one day's increments."""
    return day_reward(delta_infections, delta_cost, cfg.theta_i, cfg.theta_q)


@dataclass
class RolloutBuffer:
    features: list = field(default_factory=list)  # StateFeatures per day
    actions: list = field(default_factory=list)  # executed int8 vectors per day
    log_probs: list = field(default_factory=list)  # day-summed log likelihoods
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    new_infections: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.rewards)


def day_log_prob(masses: np.ndarray, actions: np.ndarray) -> float:
    chosen = masses[np.arange(len(actions)), actions]
    return float(np.log(np.maximum(chosen, _LOG_FLOOR)).sum())


def collect_rollout(
    world: WorldState,
    params: dict,
    gnn_cfg: gnn_mod.GnnConfig,
    cfg: TrainConfig,
    risk_cfg: Optional[RiskConfig] = None,
) -> tuple[RolloutBuffer, EpisodeMetrics]:
    """Roll the policy forward from ``world`` until horizon or guard stop."""
    buffer = RolloutBuffer()
    policy = ThresholdPolicy(gnn_cfg, params)

    def record(rec):
        thresholds = rec.extras["thresholds"]
        buffer.features.append(rec.extras["features"])
        buffer.actions.append(rec.actions.astype(np.int8))
        buffer.log_probs.append(day_log_prob(thresholds.masses, rec.actions))
        buffer.values.append(rec.extras["value"])
        buffer.rewards.append(rec.reward)
        buffer.new_infections.append(rec.outcome.new_infections)
        buffer.dones.append(False)

    result = run_episode(
        world.config,
        policy,
        risk_cfg,
        world=world,
        guard_threshold=cfg.guard_threshold if cfg.guard_enabled else None,
        guard_penalty=cfg.guard_penalty,
        theta_i=cfg.theta_i,
        theta_q=cfg.theta_q,
        on_day=record,
    )
    if buffer.dones:
        buffer.dones[-1] = True
    return buffer, result.metrics


def compute_gae(
    buffer: RolloutBuffer, gamma: float, lam: float, last_value: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Raw generalized advantages and value targets.

    ``last_value`` bootstraps a truncated final step; a done flag always
    forces a zero bootstrap.
    """
    rewards = np.asarray(buffer.rewards, dtype=np.float64)
    values = np.asarray(buffer.values, dtype=np.float64)
    dones = np.asarray(buffer.dones, dtype=bool)
    t_len = len(rewards)
    next_values = np.append(values[1:], last_value)
    nonterminal = (~dones).astype(np.float64)
    deltas = rewards + gamma * next_values * nonterminal - values
    advantages = np.zeros(t_len, dtype=np.float64)
    gae = 0.0
    for t in range(t_len - 1, -1, -1):
        gae = deltas[t] + gamma * lam * nonterminal[t] * gae
        advantages[t] = gae
    returns = advantages + values
    buffer.advantages = advantages
    buffer.returns = returns
    return advantages, returns


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict, grads: dict, state: AdamState, lr: float, beta1=0.9, beta2=0.999, eps=1e-8
) -> None:
    state.t += 1
    b1t = 1.0 - beta1**state.t
    b2t = 1.0 - beta2**state.t
    for name, g in grads.items():
        state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = state.m[name] / b1t
        v_hat = state.v[name] / b2t
        params[name] -= lr * m_hat / (np.sqrt(v_hat) + eps)


def clip_gradients(grads: dict, max_norm: float) -> float:
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def ppo_update(
    params: dict,
    buffer: RolloutBuffer,
    cfg: TrainConfig,
    gnn_cfg: gnn_mod.GnnConfig,
    adam: AdamState,
    shuffle_rng: np.random.Generator,
) -> dict:
    """Clipped-surrogate update over day minibatches; mutates ``params``.

    Raises NumericError (leaving parameters untouched) if any loss turns
    non-finite.
    """
    cfg.validate()
    t_len = len(buffer)
    if t_len == 0:
        return {"updated": False}
    if buffer.advantages is None:
        raise NumericError("advantages not computed; call compute_gae first")
    if not np.all(np.isfinite(buffer.advantages)) or not np.all(
        np.isfinite(buffer.returns)
    ):
        raise NumericError("non-finite advantages or returns in rollout buffer")

    adv = buffer.advantages
    adv_norm = (adv - adv.mean()) / (adv.std() + 1e-8)
    old_lp = np.asarray(buffer.log_probs, dtype=np.float64)
    m_individuals = buffer.features[0].population

    # Bookkeeping check: with unchanged parameters every ratio must be 1.
    ratio_dev = 0.0
    for day in range(t_len):
        cache = gnn_mod.forward(gnn_cfg, params, buffer.features[day])
        thr = policy_mod.thresholds_from_values(cache.actor_out)
        lp = day_log_prob(thr.masses, buffer.actions[day])
        ratio_dev = max(ratio_dev, abs(math.exp(lp - old_lp[day]) - 1.0))

    snapshot = {k: p.copy() for k, p in params.items()}
    adam_snapshot = AdamState(
        m={k: v.copy() for k, v in adam.m.items()},
        v={k: v.copy() for k, v in adam.v.items()},
        t=adam.t,
    )
    policy_loss_acc = value_loss_acc = entropy_acc = 0.0
    n_minibatches = 0
    grad_norm = 0.0

    try:
        for _ in range(cfg.epochs_per_update):
            order = shuffle_rng.permutation(t_len)
            for lo in range(0, t_len, cfg.minibatch_days):
                batch = order[lo : lo + cfg.minibatch_days]
                d_mb = len(batch)
                grads = gnn_mod.zeros_like_params(params)
                policy_loss = value_loss = entropy_term = 0.0
                for day in batch:
                    feats = buffer.features[day]
                    cache = gnn_mod.forward(gnn_cfg, params, feats)
                    thr = policy_mod.thresholds_from_values(cache.actor_out)
                    actions = buffer.actions[day]
                    lp_new = day_log_prob(thr.masses, actions)
                    log_ratio = min(max(lp_new - old_lp[day], -_LOG_RATIO_BAND), _LOG_RATIO_BAND)
                    ratio = math.exp(log_ratio)
                    a_t = adv_norm[day]
                    clipped = min(max(ratio, 1.0 - cfg.clip_eps), 1.0 + cfg.clip_eps)
                    surr1 = ratio * a_t
                    surr2 = clipped * a_t
                    policy_loss += -min(surr1, surr2) / d_mb
                    d_lp = (-a_t * ratio / d_mb) if surr1 <= surr2 else 0.0

                    v_err = cache.value - buffer.returns[day]
                    value_loss += v_err * v_err / d_mb
                    d_value = cfg.value_coef * 2.0 * v_err / d_mb

                    with np.errstate(divide="ignore", invalid="ignore"):
                        logm = np.where(thr.masses > 0, np.log(thr.masses), 0.0)
                    ent_per_ind = -(thr.masses * logm).sum(axis=1)
                    entropy_term += float(ent_per_ind.mean()) / d_mb

                    d_actor = d_lp * policy_mod.log_prob_gradient(thr.masses, actions)
                    d_actor -= (
                        cfg.entropy_coef / (d_mb * m_individuals)
                    ) * policy_mod.entropy_gradient(thr.masses)
                    gnn_mod.backward(gnn_cfg, params, cache, d_actor, d_value, grads)

                total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy_term
                if not math.isfinite(total):
                    raise NumericError(
                        f"non-finite loss (policy={policy_loss}, value={value_loss}, "
                        f"entropy={entropy_term})"
                    )
                grad_norm = clip_gradients(grads, cfg.grad_clip_norm)
                adam_step(params, grads, adam, cfg.learning_rate)
                policy_loss_acc += policy_loss
                value_loss_acc += value_loss
                entropy_acc += entropy_term
                n_minibatches += 1
    except NumericError:
        for k in params:
            params[k][...] = snapshot[k]
        adam.m, adam.v, adam.t = adam_snapshot.m, adam_snapshot.v, adam_snapshot.t
        raise

    return {
        "updated": True,
        "policy_loss": policy_loss_acc / max(n_minibatches, 1),
        "value_loss": value_loss_acc / max(n_minibatches, 1),
        "entropy": entropy_acc / max(n_minibatches, 1),
        "initial_ratio_max_dev": ratio_dev,
        "grad_norm": grad_norm,
        "minibatches": n_minibatches,
    }


@dataclass
class TrainResult:
    params: dict  # best-scoring parameters seen at evaluation time
    final_params: dict
    curve_rows: list  # (update, env_days, mean_episode_reward, eval_I, eval_Q, eval_score)
    best_eval_score: float
    initial_eval_score: float
    env_days: int
    updates: int
    diagnostics: list


def evaluate_policy(
    world_config: WorldConfig,
    gnn_cfg: gnn_mod.GnnConfig,
    params: dict,
    seeds,
    risk_cfg: Optional[RiskConfig] = None,
    theta_i: float = 500.0,
    theta_q: float = 10000.0,
) -> dict:
    """Mean episode metrics of the deterministic threshold policy over seeds."""
    policy = ThresholdPolicy(gnn_cfg, params)
    i_vals, q_vals, s_vals = [], [], []
    for seed in seeds:
        cfg = world_config.copy(rng_seed=int(seed))
        result = run_episode(cfg, policy, risk_cfg, theta_i=theta_i, theta_q=theta_q)
        i_vals.append(result.metrics.total_infections)
        q_vals.append(result.metrics.total_cost)
        s_vals.append(result.metrics.score())
    return {
        "I": float(np.mean(i_vals)),
        "Q": float(np.mean(q_vals)),
        "score": float(np.mean(s_vals)),
        "per_seed": list(zip(list(seeds), i_vals, q_vals, s_vals)),
    }


def train(
    world_config: WorldConfig,
    cfg: TrainConfig,
    seed: int,
    gnn_cfg: Optional[gnn_mod.GnnConfig] = None,
    risk_cfg: Optional[RiskConfig] = None,
    progress: Optional[callable] = None,
) -> TrainResult:
    """Alternate rollout collection and policy updates until the env-day
    budget is spent; keeps the best-evaluating parameters."""
    cfg.validate()
    if gnn_cfg is None:
        gnn_cfg = gnn_mod.GnnConfig()
    params = gnn_mod.init_params(gnn_cfg, seed)
    adam = AdamState.for_params(params)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([seed, 6]))

    def run_eval(p):
        return evaluate_policy(
            world_config, gnn_cfg, p, cfg.eval_seeds, risk_cfg, cfg.theta_i, cfg.theta_q
        )

    initial_eval = run_eval(params)
    best_score = initial_eval["score"]
    best_params = {k: p.copy() for k, p in params.items()}
    curve_rows = [(0, 0, float("nan"), initial_eval["I"], initial_eval["Q"], initial_eval["score"])]
    diagnostics: list = []

    env_days = 0
    updates = 0
    episode_idx = 0

    while env_days < cfg.total_steps:
        episode_seed = int(
            np.random.SeedSequence([seed, 7, episode_idx]).generate_state(1)[0]
        )
        episode_idx += 1
        world = build_world(world_config.copy(rng_seed=episode_seed))
        buffer, metrics = collect_rollout(world, params, gnn_cfg, cfg, risk_cfg)
        env_days += len(buffer)
        if len(buffer) == 0:
            continue
        compute_gae(buffer, cfg.gamma, cfg.gae_lambda)
        diag = ppo_update(params, buffer, cfg, gnn_cfg, adam, shuffle_rng)
        diag["mean_episode_reward"] = float(np.mean(buffer.rewards))
        diag["episode_score"] = metrics.score()
        diagnostics.append(diag)
        updates += 1

        if updates % cfg.eval_every_updates == 0 or env_days >= cfg.total_steps:
            ev = run_eval(params)
            if ev["score"] < best_score:
                best_score = ev["score"]
                best_params = {k: p.copy() for k, p in params.items()}
            curve_rows.append(
                (updates, env_days, diag["mean_episode_reward"], ev["I"], ev["Q"], ev["score"])
            )
            if progress is not None:
                progress(updates, env_days, ev)
        else:
            curve_rows.append(
                (updates, env_days, diag["mean_episode_reward"], "", "", "")
            )

    return TrainResult(
        params=best_params,
        final_params=params,
        curve_rows=curve_rows,
        best_eval_score=best_score,
        initial_eval_score=initial_eval["score"],
        env_days=env_days,
        updates=updates,
        diagnostics=diagnostics,
    )


def curve_csv_text(result: TrainResult, header_comments: list) -> str:
    lines = [f"# {c}" for c in header_comments]
    lines.append("update_index,env_days_consumed,mean_episode_reward,eval_I,eval_Q,eval_score")
    for row in result.curve_rows:
        update, days, reward, ev_i, ev_q, ev_s = row
        reward_s = "" if isinstance(reward, float) and math.isnan(reward) else f"{reward:.6f}"
        fmt = lambda v: v if isinstance(v, str) else f"{v:.6f}"
        lines.append(f"{update},{days},{reward_s},{fmt(ev_i)},{fmt(ev_q)},{fmt(ev_s)}")
    return "\n".join(lines) + "\n"

"""Threshold-constrained action selection and the baseline policy family.

The actor emits four raw values per individual; a negated softmax turns them
into interval masses over the four actions, whose cumulative sums are three
monotone thresholds partitioning [0, 1].  An individual's estimated
infection probability selects the interval it falls in, so higher risk can
only map to a more stringent action.  Treating the infection probability as
the inverse-CDF variate makes the interval mass the likelihood of the
realized action, which is what the PPO update consumes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError, NumericError
from .risk import RiskVector
from .world import Action, Observation

BASELINE_NAMES = ("no_intervention", "lockdown", "expert", "degree_sample", "degree_order")
DEGREE_ORDER_WINDOW_DAYS = 5
DEGREE_ORDER_FRACTION = 0.3
DEGREE_SAMPLE_MIN = 4


@dataclass(frozen=True)
class ThresholdMatrix:
    """Per-individual action-interval masses and their cumulative thresholds."""

    masses: np.ndarray  # M x 4, rows sum to 1
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray

    def thresholds(self) -> np.ndarray:
        return np.stack([self.p1, self.p2, self.p3], axis=1)


@dataclass(frozen=True)
class ActionDecision:
    actions: np.ndarray  # int8 Action codes
    log_prob: np.ndarray  # per-individual log interval mass
    entropy: np.ndarray  # per-individual categorical entropy


def thresholds_from_values(raw: np.ndarray) -> ThresholdMatrix:
    """Map M x 4 raw actor values to monotone thresholds in [0, 1]."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] != 4:
        raise ContractError(f"raw values must be M x 4, got {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise NumericError("non-finite raw actor values")
    z = -raw
    z = z - z.max(axis=1, keepdims=True)
    expz = np.exp(z)
    masses = expz / expz.sum(axis=1, keepdims=True)
    cums = np.minimum(np.cumsum(masses, axis=1), 1.0)
    return ThresholdMatrix(masses=masses, p1=cums[:, 0], p2=cums[:, 1], p3=cums[:, 2])


def select_actions(risk: RiskVector, thr: ThresholdMatrix) -> ActionDecision:
    """Pick the action interval containing each infection probability.

    Boundary ties go to the less stringent action.
    """
    p = np.asarray(risk.p_infe, dtype=np.float64)
    if p.shape[0] != thr.masses.shape[0]:
        raise ContractError(
            f"risk length {p.shape[0]} != thresholds length {thr.masses.shape[0]}"
        )
    if np.any(p < 0) or np.any(p > 1):
        raise ContractError("infection probabilities outside [0, 1]")
    actions = (
        (p > thr.p1).astype(np.int8)
        + (p > thr.p2).astype(np.int8)
        + (p > thr.p3).astype(np.int8)
    )
    chosen = thr.masses[np.arange(len(p)), actions]
    log_prob = np.log(np.maximum(chosen, np.finfo(np.float64).tiny))
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(thr.masses > 0, thr.masses * np.log(thr.masses), 0.0)
    entropy = -plogp.sum(axis=1)
    return ActionDecision(actions=actions, log_prob=log_prob, entropy=entropy)


def log_prob_gradient(masses: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """d log(mass of selected action) / d raw values, per individual."""
    grad = masses.copy()
    grad[np.arange(len(actions)), actions] -= 1.0
    return grad


def entropy_gradient(masses: np.ndarray) -> np.ndarray:
    """d entropy / d raw values, per individual."""
    with np.errstate(divide="ignore", invalid="ignore"):
        logm = np.where(masses > 0, np.log(masses), 0.0)
    h = -(masses * logm).sum(axis=1, keepdims=True)
    return masses * (logm + h)


# -- baselines ---------------------------------------------------------------


def parse_baseline_name(name: str) -> tuple:
    """Accepts e.g. 'lockdown', 'expert(0.01)' or 'expert:0.01'."""
    text = name.strip().lower()
    match = re.fullmatch(r"expert[:(]\s*([0-9.eE+-]+)\s*\)?", text)
    if match:
        return "expert", float(match.group(1))
    if text in BASELINE_NAMES:
        if text == "expert":
            raise ConfigurationError("expert baseline needs a threshold, e.g. expert(0.01)")
        return text, None
    raise ConfigurationError(
        f"unknown baseline {name!r}; valid: no_intervention, lockdown, "
        "expert(<threshold>), degree_sample, degree_order"
    )


def degree_sample_isolation_prob(n_acquaintances: np.ndarray) -> np.ndarray:
    """Isolation probability (n-4)/n for individuals with more than 4 acquaintances."""
    n = np.asarray(n_acquaintances, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        prob = np.where(n > DEGREE_SAMPLE_MIN, (n - DEGREE_SAMPLE_MIN) / n, 0.0)
    return prob


def contact_counts(obs: Observation, window_days: int = DEGREE_ORDER_WINDOW_DAYS) -> np.ndarray:
    """Co-visitor count per individual over the recent window: for each
    area-day an individual visited, everyone else who visited it that day."""
    totals = np.zeros(obs.population, dtype=np.int64)
    for day_matrix in obs.visit_slices(window_days):
        visited = np.asarray(day_matrix) > 0
        visitors = visited.sum(axis=0)
        totals += (visited * np.maximum(visitors - 1, 0)[None, :]).sum(axis=1)
    return totals


def degree_order_selection(contacts: np.ndarray, fraction: float = DEGREE_ORDER_FRACTION) -> np.ndarray:
    """Indices of the floor(fraction * M) individuals with the most contacts;
    ties broken by lower index."""
    m = len(contacts)
    k = int(np.floor(fraction * m))
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((np.arange(m), -contacts))
    return np.sort(order[:k])


def baseline(name: str, obs: Observation, risk: RiskVector, rng: np.random.Generator) -> np.ndarray:
    """Evaluate one baseline policy for the day; returns Action codes."""
    kind, theta = parse_baseline_name(name)
    m = obs.population
    actions = np.zeros(m, dtype=np.int8)
    if kind == "no_intervention":
        return actions
    if kind == "lockdown":
        actions[:] = Action.ISOLATE
        return actions
    if kind == "expert":
        actions[risk.p_infe > theta] = Action.ISOLATE
        return actions
    if kind == "degree_sample":
        prob = degree_sample_isolation_prob(obs.acquaintance_degree)
        actions[rng.random(m) < prob] = Action.ISOLATE
        return actions
    # degree_order
    chosen = degree_order_selection(contact_counts(obs))
    actions[chosen] = Action.ISOLATE
    return actions

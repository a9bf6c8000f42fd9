"""Per-individual infection-probability estimation from co-visit exposure.

Every day each non-discovered individual starts healthy with probability 1;
for each of the last T days and each area they visited that day, the healthy
probability is multiplied by (1 - p_s * discovered_visitors / visitors), and
once more by (1 - p_c) if any discovered acquaintance shared an area-day
inside the window.  Infection probability is the complement.

Individuals whose status is known carry their probability directly: the
currently hospitalized are infected with probability 1, the visibly
recovered are infected with probability 0.  Both still count as discovered
exposure sources wherever their past visits appear inside the window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .world import Observation, VisibleHealth

@dataclass(frozen=True)
class RiskConfig:
    lookback_days: int = 5
    p_s: float = 0.01
    p_c: float = 0.05

    def validate(self) -> None:
        if self.lookback_days < 1:
            raise ConfigurationError(
                f"lookback_days must be >= 1 (got {self.lookback_days})"
            )
        for name in ("p_s", "p_c"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1] (got {value})")


@dataclass(frozen=True)
class RiskVector:
    p_infe: np.ndarray
    p_hel: np.ndarray


def estimate_risk(obs: Observation, history, cfg: RiskConfig) -> RiskVector:
    """Estimate each individual's probability of being infected.

    ``history`` is an iterable of per-day M x N visit matrices, most recent
    first; missing days at episode start count as empty.  Pure function of
    its inputs, safe to call concurrently.
    """
    cfg.validate()
    m = obs.population
    discovered = obs.discovered_ever

    if hasattr(history, "slices_newest_first"):
        slices = history.slices_newest_first(cfg.lookback_days)
    else:
        slices = list(history)[: cfg.lookback_days]
        while len(slices) < cfg.lookback_days:
            slices.append(np.zeros((m, obs.n_areas), dtype=np.int16))

    p_hel = np.ones(m, dtype=np.float64)
    exposed_to_acquaintance = np.zeros(m, dtype=bool)
    disc_src = obs.acq_indices  # neighbor j for each directed edge i -> j
    disc_edge = discovered[disc_src]
    edge_owner = np.repeat(
        np.arange(m), np.diff(obs.acq_indptr)
    )  # i for each directed edge

    for day_matrix in slices:
        visited = np.asarray(day_matrix) > 0
        if not visited.any():
            continue
        visitors = visited.sum(axis=0)
        infected_visitors = visited[discovered].sum(axis=0) if discovered.any() else None
        if infected_visitors is not None and infected_visitors.any():
            safe = np.where(visitors > 0, visitors, 1)
            factor = 1.0 - cfg.p_s * infected_visitors / safe
            p_hel *= np.where(visited, factor[None, :], 1.0).prod(axis=1)
        if discovered.any():
            hit = disc_edge.copy()
            if hit.any():
                co = (visited[edge_owner[hit]] & visited[disc_src[hit]]).any(axis=1)
                if co.any():
                    exposed_to_acquaintance[edge_owner[hit][co]] = True

    p_hel[exposed_to_acquaintance] *= 1.0 - cfg.p_c
    p_infe = 1.0 - p_hel
    p_infe[obs.visible_health == VisibleHealth.DISCOVERED] = 1.0
    p_infe[obs.visible_health == VisibleHealth.RECOVERED] = 0.0
    p_hel = 1.0 - p_infe
    return RiskVector(p_infe=p_infe, p_hel=p_hel)

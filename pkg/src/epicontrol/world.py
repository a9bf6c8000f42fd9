"""Hourly agent-based epidemic world.

A city of N areas (residential / working / commercial assigned round-robin)
holds M individuals, each with a fixed home and workplace.  Days advance in
24 hourly ticks: individuals move on commute schedules, infectious
(asymptomatic) individuals expose co-located acquaintances and sampled
strangers, symptom onset sends people to hospital, and one-day intervention
actions restrict mobility and contact.

All randomness is keyed by (seed, purpose, day, hour, individual, slot), so
identical (config, seed, action sequence) replays byte-identically and
per-individual couplings survive action changes elsewhere.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, fields, replace
from enum import IntEnum
from typing import Optional

import numpy as np

from . import rngkeys
from .errors import ConfigurationError, ContractError

HOURS_PER_DAY = 24
WEEK_LENGTH = 7
WEEKDAYS = 5
WORK_START = 9
WORK_END = 17  # exclusive; work occupies hours 9..16
COMMERCIAL_HOUR = 17
WEEKEND_VISIT_LENGTH = 2

# Location codes outside the area index range.
HOSPITAL = -1
NOWHERE = -2

# Purpose tags for keyed randomness.
_TAG_ACQ = 11
_TAG_STRANGER_PICK = 12
_TAG_STRANGER_INFECT = 13
_MAX_SAMPLE_ATTEMPTS = 64


class HealthStatus(IntEnum):
    SUSCEPTIBLE = 0
    ASYMPTOMATIC = 1
    SYMPTOMATIC = 2
    RECOVERED = 3


class Action(IntEnum):
    NO_INTERVENTION = 0
    CONFINE = 1
    QUARANTINE = 2
    ISOLATE = 3


class AreaCategory(IntEnum):
    RESIDENTIAL = 0
    WORKING = 1
    COMMERCIAL = 2


class VisibleHealth(IntEnum):
    """What the policy can see: asymptomatic looks identical to susceptible."""

    NOT_DISCOVERED = 0
    DISCOVERED = 1
    RECOVERED = 2


@dataclass(frozen=True)
class HealthState:
    status: HealthStatus
    infected_day: Optional[int] = None
    onset_day: Optional[int] = None


@dataclass(frozen=True)
class Area:
    id: int
    category: AreaCategory


@dataclass(frozen=True)
class Individual:
    """Read-only snapshot of one individual (the engine itself is columnar)."""

    id: int
    residential_area: int
    working_area: int
    acquaintances: tuple
    health: HealthState
    current_action: Action
    location: int


@dataclass(frozen=True)
class ContactRules:
    """Contact permissions and placement implied by an intervention action."""

    stays_home: bool
    location: Optional[int]  # None means "follows the normal schedule"
    strangers_allowed: bool
    acquaintances_allowed: bool
    recorded_in_history: bool


@dataclass
class WorldConfig:
    """Simulation parameters; defaults reproduce the reference scenario.

    ``mean_acquaintance_degree`` and ``strangers_per_hour`` are the
    calibration knobs: the shipped defaults put the measured mean number of
    secondary infections per index case in the 2.0-2.5 band.
    """

    n_areas: int = 11
    population: int = 10000
    p_s: float = 0.01
    p_c: float = 0.05
    incubation_days: int = 3
    treatment_days: int = 10
    t_start: int = 1
    horizon_days: int = 60
    initial_seed_count: int = 5
    mean_acquaintance_degree: float = 0.9
    strangers_per_hour: int = 2
    commercial_visit_prob: float = 0.5
    changeable_mobility: bool = False
    history_days: int = 5
    rng_seed: int = 0

    def validate(self) -> None:
        if self.n_areas < 3:
            raise ConfigurationError(f"n_areas must be >= 3 (got {self.n_areas})")
        if self.population < 1:
            raise ConfigurationError(f"population must be >= 1 (got {self.population})")
        for name in ("p_s", "p_c", "commercial_visit_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1] (got {value})")
        if self.incubation_days < 1:
            raise ConfigurationError(
                f"incubation_days must be >= 1 (got {self.incubation_days})"
            )
        if self.treatment_days < 1:
            raise ConfigurationError(
                f"treatment_days must be >= 1 (got {self.treatment_days})"
            )
        if self.horizon_days < 1:
            raise ConfigurationError(f"horizon_days must be >= 1 (got {self.horizon_days})")
        if self.t_start < 0:
            raise ConfigurationError(f"t_start must be >= 0 (got {self.t_start})")
        if not 0 <= self.initial_seed_count <= self.population:
            raise ConfigurationError(
                f"initial_seed_count must be in [0, population] (got {self.initial_seed_count})"
            )
        if self.mean_acquaintance_degree < 0:
            raise ConfigurationError(
                f"mean_acquaintance_degree must be >= 0 (got {self.mean_acquaintance_degree})"
            )
        if self.strangers_per_hour < 0:
            raise ConfigurationError(
                f"strangers_per_hour must be >= 0 (got {self.strangers_per_hour})"
            )
        if self.history_days < 1:
            raise ConfigurationError(f"history_days must be >= 1 (got {self.history_days})")

    def copy(self, **overrides) -> "WorldConfig":
        return replace(self, **overrides)

    @classmethod
    def field_names(cls) -> tuple:
        return tuple(f.name for f in fields(cls))


class VisitHistory:
    """Ring buffer of per-day M x N hour-count matrices.

    Each completed day is sealed read-only before being exposed.  Rows sum
    to at most 24; hospitalized and isolated hours appear in no area.
    """

    def __init__(self, population: int, n_areas: int, capacity: int):
        self.population = population
        self.n_areas = n_areas
        self.capacity = capacity
        self._days: deque = deque(maxlen=capacity)
        self.days_recorded = 0

    def push(self, counts: np.ndarray) -> None:
        if counts.shape != (self.population, self.n_areas):
            raise ContractError(
                f"visit matrix shape {counts.shape} != {(self.population, self.n_areas)}"
            )
        counts = counts.copy()
        counts.flags.writeable = False
        self._days.append(counts)
        self.days_recorded += 1

    def newest_first(self) -> tuple:
        """Available day matrices, most recent first."""
        return tuple(reversed(self._days))

    def slices_newest_first(self, n_days: int) -> list:
        """Exactly ``n_days`` matrices, most recent first, zero-padded."""
        have = list(reversed(self._days))[:n_days]
        while len(have) < n_days:
            have.append(np.zeros((self.population, self.n_areas), dtype=np.int16))
        return have


@dataclass(frozen=True)
class Observation:
    """Policy-visible snapshot taken at the start of a day.

    ``visit_days`` are sealed per-day matrices (most recent first) and the
    acquaintance graph arrays are static world structure; everything here is
    safe to share across threads.
    """

    day: int
    weekend: bool
    population: int
    n_areas: int
    visible_health: np.ndarray  # int8, VisibleHealth codes
    current_action: np.ndarray  # int8, Action codes applied on the previous day
    visit_days: tuple
    acq_indptr: np.ndarray
    acq_indices: np.ndarray

    @property
    def acquaintance_degree(self) -> np.ndarray:
        return np.diff(self.acq_indptr)

    def visit_slices(self, n_days: int) -> list:
        have = list(self.visit_days)[:n_days]
        while len(have) < n_days:
            have.append(np.zeros((self.population, self.n_areas), dtype=np.int16))
        return have

    @property
    def discovered_ever(self) -> np.ndarray:
        """Individuals whose infection is or was visible (symptomatic at some point)."""
        return (self.visible_health == VisibleHealth.DISCOVERED) | (
            self.visible_health == VisibleHealth.RECOVERED
        )


@dataclass(frozen=True)
class DayOutcome:
    new_infections: int
    new_discoveries: int
    n_hospitalized: int
    n_isolated: int
    n_quarantined: int
    n_confined: int


class WorldState:
    """Mutable simulation state; single-writer, advanced only by step_day."""

    def __init__(self, config: WorldConfig):
        self.config = config
        m, n = config.population, config.n_areas
        self.population = m
        self.n_areas = n
        self.area_category = np.array(
            [i % 3 for i in range(n)], dtype=np.int8
        )  # round-robin R, W, C guarantees one of each for n >= 3
        self.home = np.zeros(m, dtype=np.int32)
        self.work = np.zeros(m, dtype=np.int32)
        self.preferred_commercial = np.zeros(m, dtype=np.int32)
        self.acq_indptr = np.zeros(m + 1, dtype=np.int64)
        self.acq_indices = np.zeros(0, dtype=np.int32)
        self.acq_slot_of_edge = np.zeros(0, dtype=np.int64)
        self._edge_keys = np.zeros(0, dtype=np.uint64)

        self.health = np.zeros(m, dtype=np.int8)
        self.infectious_from = np.full(m, np.iinfo(np.int64).max, dtype=np.int64)
        self.symptomatic_at = np.full(m, np.iinfo(np.int64).max, dtype=np.int64)
        self.recovered_at = np.full(m, np.iinfo(np.int64).max, dtype=np.int64)
        self.infected_by = np.full(m, -1, dtype=np.int32)
        self.infected_day = np.full(m, -1, dtype=np.int32)
        self.onset_day = np.full(m, -1, dtype=np.int32)

        self.current_action = np.zeros(m, dtype=np.int8)
        self.last_location = np.zeros(m, dtype=np.int32)

        self.day = 0
        self.first_discovery_day: Optional[int] = None
        self.cumulative_infections = 0
        self.visit_history = VisitHistory(m, n, config.history_days)
        self.audit = False

        self._key_acq = rngkeys.make_key(config.rng_seed, _TAG_ACQ)
        self._key_pick = rngkeys.make_key(config.rng_seed, _TAG_STRANGER_PICK)
        self._key_infect = rngkeys.make_key(config.rng_seed, _TAG_STRANGER_INFECT)

    # -- inspection -------------------------------------------------------

    def areas(self) -> list:
        return [Area(i, AreaCategory(int(c))) for i, c in enumerate(self.area_category)]

    def individual(self, i: int) -> Individual:
        status = HealthStatus(int(self.health[i]))
        infected = int(self.infected_day[i]) if self.infected_day[i] >= 0 else None
        onset = int(self.onset_day[i]) if self.onset_day[i] >= 0 else None
        lo, hi = self.acq_indptr[i], self.acq_indptr[i + 1]
        return Individual(
            id=i,
            residential_area=int(self.home[i]),
            working_area=int(self.work[i]),
            acquaintances=tuple(int(j) for j in self.acq_indices[lo:hi]),
            health=HealthState(status, infected, onset),
            current_action=Action(int(self.current_action[i])),
            location=int(self.last_location[i]),
        )

    def health_counts(self) -> dict:
        counts = np.bincount(self.health, minlength=4)
        return {status: int(counts[status.value]) for status in HealthStatus}

    def fingerprint(self) -> bytes:
        import hashlib

        h = hashlib.sha256()
        for arr in (
            self.area_category,
            self.home,
            self.work,
            self.preferred_commercial,
            self.acq_indptr,
            self.acq_indices,
            self.health,
            self.infectious_from,
            self.symptomatic_at,
            self.recovered_at,
            self.infected_by,
            self.current_action,
            self.last_location,
        ):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(str((self.day, self.first_discovery_day, self.cumulative_infections)).encode())
        for mat in self.visit_history.newest_first():
            h.update(mat.tobytes())
        return h.digest()

    def is_edge(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Vectorized acquaintance test for index arrays a, b."""
        lo = np.minimum(a, b).astype(np.uint64)
        hi = np.maximum(a, b).astype(np.uint64)
        keys = (lo << np.uint64(32)) | hi
        if len(self._edge_keys) == 0:
            return np.zeros(len(keys), dtype=bool)
        pos = np.minimum(
            np.searchsorted(self._edge_keys, keys), len(self._edge_keys) - 1
        )
        return self._edge_keys[pos] == keys


def intervention_allowed(world: WorldState, day: Optional[int] = None) -> bool:
    """True once ``t_start`` days have passed since the first discovery."""
    if world.first_discovery_day is None:
        return False
    query = world.day if day is None else day
    return query >= world.first_discovery_day + world.config.t_start


def intervention_contact_filter(
    individual: Individual, action: Action, hour: int, weekend: bool = False
) -> ContactRules:
    """Describe where an individual is and whom they may contact at ``hour``.

    Hospitalization dominates any assigned action.  The location reported for
    unrestricted individuals is the deterministic schedule skeleton (home or
    workplace); optional commercial visits are resolved by the engine's
    per-day draws and are not part of this descriptor.
    """
    if individual.health.status == HealthStatus.SYMPTOMATIC:
        return ContactRules(False, HOSPITAL, False, False, False)
    if action == Action.ISOLATE:
        return ContactRules(True, NOWHERE, False, False, False)
    if action == Action.QUARANTINE:
        return ContactRules(True, individual.residential_area, False, True, True)
    if action == Action.CONFINE:
        return ContactRules(True, individual.residential_area, True, True, True)
    if not weekend and WORK_START <= hour < WORK_END:
        location = individual.working_area
    else:
        location = individual.residential_area
    return ContactRules(False, location, True, True, True)


# -- construction ----------------------------------------------------------


def _sample_acquaintance_graph(
    config: WorldConfig, home: np.ndarray, rng: np.random.Generator
) -> tuple:
    """Erdos-Renyi edges within each residential area, so per-individual
    degree is ~Poisson with the configured mean; symmetric and irreflexive."""
    m = config.population
    src_parts, dst_parts = [], []
    for area in np.unique(home):
        members = np.flatnonzero(home == area)
        r = len(members)
        if r < 2:
            continue
        n_pairs = r * (r - 1) // 2
        p_edge = min(1.0, config.mean_acquaintance_degree / (r - 1))
        n_edges = rng.binomial(n_pairs, p_edge)
        if n_edges == 0:
            continue
        chosen = rng.choice(n_pairs, size=n_edges, replace=False)
        chosen.sort()
        # Decode triangular pair index k -> (i, j) with i < j.
        i = (np.floor((np.sqrt(8.0 * chosen + 1) - 1) / 2)).astype(np.int64)
        # Guard float rounding at the segment boundaries.
        base = i * (i + 1) // 2
        i = np.where(chosen < base, i - 1, i)
        i = np.where(chosen >= (i + 1) * (i + 2) // 2, i + 1, i)
        j = chosen - i * (i + 1) // 2
        a = members[j]
        b = members[i + 1]
        src_parts.append(a)
        dst_parts.append(b)
    if src_parts:
        a = np.concatenate(src_parts)
        b = np.concatenate(dst_parts)
    else:
        a = np.zeros(0, dtype=np.int64)
        b = np.zeros(0, dtype=np.int64)

    directed_src = np.concatenate([a, b])
    directed_dst = np.concatenate([b, a])
    order = np.lexsort((directed_dst, directed_src))
    directed_src = directed_src[order]
    directed_dst = directed_dst[order]
    indptr = np.zeros(m + 1, dtype=np.int64)
    np.add.at(indptr, directed_src + 1, 1)
    indptr = np.cumsum(indptr)
    indices = directed_dst.astype(np.int32)

    lo = np.minimum(a, b).astype(np.uint64)
    hi = np.maximum(a, b).astype(np.uint64)
    edge_keys = np.sort((lo << np.uint64(32)) | hi)
    return indptr, indices, edge_keys


def build_world(config: WorldConfig) -> WorldState:
    """Construct a deterministic world: areas, homes, workplaces, social
    graph, and the initially infected seed set."""
    config.validate()
    world = WorldState(config)
    rng = np.random.default_rng(np.random.SeedSequence([config.rng_seed, 1]))

    residential = np.flatnonzero(world.area_category == AreaCategory.RESIDENTIAL)
    working = np.flatnonzero(world.area_category == AreaCategory.WORKING)
    commercial = np.flatnonzero(world.area_category == AreaCategory.COMMERCIAL)
    m = config.population
    world.home = rng.choice(residential, size=m).astype(np.int32)
    world.work = rng.choice(working, size=m).astype(np.int32)
    world.preferred_commercial = rng.choice(commercial, size=m).astype(np.int32)
    world.last_location = world.home.copy()

    world.acq_indptr, world.acq_indices, world._edge_keys = _sample_acquaintance_graph(
        config, world.home, rng
    )
    world.acq_slot_of_edge = np.arange(len(world.acq_indices), dtype=np.int64) - np.repeat(
        world.acq_indptr[:-1], np.diff(world.acq_indptr)
    )

    if config.initial_seed_count:
        seeds = rng.choice(m, size=config.initial_seed_count, replace=False)
        world.health[seeds] = HealthStatus.ASYMPTOMATIC
        world.infectious_from[seeds] = 0
        world.symptomatic_at[seeds] = config.incubation_days * HOURS_PER_DAY
        world.recovered_at[seeds] = (
            config.incubation_days + config.treatment_days
        ) * HOURS_PER_DAY
        world.infected_day[seeds] = 0
        world.cumulative_infections = int(config.initial_seed_count)
    return world


def observe(world: WorldState) -> Observation:
    """Policy-visible slice of the world; asymptomatic reads as susceptible."""
    visible = np.zeros(world.population, dtype=np.int8)
    visible[world.health == HealthStatus.SYMPTOMATIC] = VisibleHealth.DISCOVERED
    visible[world.health == HealthStatus.RECOVERED] = VisibleHealth.RECOVERED
    return Observation(
        day=world.day,
        weekend=(world.day % WEEK_LENGTH) >= WEEKDAYS,
        population=world.population,
        n_areas=world.n_areas,
        visible_health=visible,
        current_action=world.current_action.copy(),
        visit_days=world.visit_history.newest_first(),
        acq_indptr=world.acq_indptr,
        acq_indices=world.acq_indices,
    )


# -- daily step ------------------------------------------------------------


def _daily_mobility_draws(world: WorldState, day: int) -> dict:
    """Per-day schedule randomness, independent of actions and health."""
    cfg = world.config
    m = world.population
    rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, 2, day]))
    commercial = np.flatnonzero(world.area_category == AreaCategory.COMMERCIAL)
    visits = rng.random(m) < cfg.commercial_visit_prob
    daily_area = rng.choice(commercial, size=m).astype(np.int32)
    weekend_start = rng.integers(10, 21, size=m).astype(np.int64)
    weekend_area = rng.choice(commercial, size=m).astype(np.int32)
    weekday_area = daily_area if cfg.changeable_mobility else world.preferred_commercial
    return {
        "visits_commercial": visits,
        "weekday_area": weekday_area,
        "weekend_start": weekend_start,
        "weekend_area": weekend_area,
    }


def _hour_locations(
    world: WorldState, actions: np.ndarray, hour: int, weekend: bool, draws: dict
) -> np.ndarray:
    if weekend:
        start = draws["weekend_start"]
        visiting = (hour >= start) & (hour < start + WEEKEND_VISIT_LENGTH)
        loc = np.where(visiting, draws["weekend_area"], world.home)
    else:
        if WORK_START <= hour < WORK_END:
            loc = world.work.copy()
        elif hour == COMMERCIAL_HOUR:
            loc = np.where(draws["visits_commercial"], draws["weekday_area"], world.home)
        else:
            loc = world.home.copy()
    loc = loc.astype(np.int32)
    restricted = (actions == Action.CONFINE) | (actions == Action.QUARANTINE)
    loc[restricted] = world.home[restricted]
    loc[actions == Action.ISOLATE] = NOWHERE
    loc[world.health == HealthStatus.SYMPTOMATIC] = HOSPITAL
    return loc


def _gather_infectious_edges(world: WorldState, sources: np.ndarray) -> tuple:
    """Flattened (src, dst, slot) triples for all acquaintance links whose
    source is currently infectious."""
    counts = (world.acq_indptr[sources + 1] - world.acq_indptr[sources]).astype(np.int64)
    total = int(counts.sum())
    if total == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    starts = np.repeat(world.acq_indptr[sources], counts)
    offsets = np.arange(total, dtype=np.int64) - np.repeat(
        np.cumsum(counts) - counts, counts
    )
    flat = starts + offsets
    src = np.repeat(sources, counts)
    dst = world.acq_indices[flat].astype(np.int64)
    return src, dst, offsets


def _stranger_contacts(
    world: WorldState,
    sources: np.ndarray,
    loc: np.ndarray,
    eligible: np.ndarray,
    acq_in_pool: np.ndarray,
    hour_abs: int,
) -> tuple:
    """Sample up to ``strangers_per_hour`` co-located eligible non-acquaintances
    per source, uniformly without replacement.  Returns (src, dst) contacts."""
    s_max = world.config.strangers_per_hour
    elig_idx = np.flatnonzero(eligible)
    if len(elig_idx) == 0 or len(sources) == 0 or s_max == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    elig_areas = loc[elig_idx]
    order = np.argsort(elig_areas, kind="stable")
    seg_members = elig_idx[order]
    seg_areas = elig_areas[order]
    area_range = np.arange(world.n_areas)
    seg_start = np.searchsorted(seg_areas, area_range, side="left")
    seg_end = np.searchsorted(seg_areas, area_range, side="right")

    src_area = loc[sources]
    start = seg_start[src_area]
    size = (seg_end[src_area] - start).astype(np.int64)
    # Sources are themselves eligible members of their own segment.
    pool = size - 1 - acq_in_pool[sources]
    active = pool > 0
    if not np.any(active):
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty

    hour_pick = rngkeys.fold(world._key_pick, hour_abs)
    contacts_src, contacts_dst = [], []
    act_src = sources[active]
    act_start = start[active]
    act_size = size[active]
    act_pool = pool[active]
    n_contacts = np.minimum(s_max, act_pool)
    picked = np.full((len(act_src), s_max), -1, dtype=np.int64)

    # Tiny pools: enumerate the whole pool exactly.
    small = act_pool <= s_max
    for row in np.flatnonzero(small):
        i = act_src[row]
        seg = seg_members[act_start[row] : act_start[row] + act_size[row]]
        mates = seg[seg != i]
        if len(mates):
            mates = mates[~world.is_edge(np.full(len(mates), i), mates)]
        for col, j in enumerate(mates):
            picked[row, col] = j

    big = np.flatnonzero(~small)
    if len(big):
        keys = rngkeys.fold(hour_pick, act_src[big])
        for col in range(s_max):
            need = big.copy()
            attempt = 0
            while len(need) and attempt < _MAX_SAMPLE_ATTEMPTS:
                u = rngkeys.uniforms(keys[np.searchsorted(big, need)], col * _MAX_SAMPLE_ATTEMPTS + attempt)
                pos = (u * act_size[need]).astype(np.int64)
                cand = seg_members[act_start[need] + pos]
                bad = cand == act_src[need]
                bad |= world.is_edge(act_src[need], cand)
                for prev in range(col):
                    bad |= picked[need, prev] == cand
                ok = ~bad
                picked[need[ok], col] = cand[ok]
                need = need[bad]
                attempt += 1
            for row in need:  # rejection stalled; fall back to exact enumeration
                i = act_src[row]
                seg = seg_members[act_start[row] : act_start[row] + act_size[row]]
                mates = seg[seg != i]
                mates = mates[~world.is_edge(np.full(len(mates), i), mates)]
                mates = mates[~np.isin(mates, picked[row, :col])]
                picked[row, col] = mates[0]

    for col in range(s_max):
        live = (picked[:, col] >= 0) & (n_contacts > col)
        if np.any(live):
            contacts_src.append(act_src[live])
            contacts_dst.append(picked[live, col])
    if not contacts_src:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    return np.concatenate(contacts_src), np.concatenate(contacts_dst)


def step_day(world: WorldState, actions: np.ndarray) -> DayOutcome:
    """Apply one-day actions and advance 24 hourly ticks.

    Order within each hour: disease progression (onset hospitalizes before
    any contact; treated patients recover and resume the schedule), then
    movement, then transmission, then visit recording.
    """
    cfg = world.config
    m = world.population
    actions = np.asarray(actions)
    if actions.shape != (m,):
        raise ContractError(f"actions length {actions.shape} != population ({m},)")
    if actions.dtype.kind not in "iu" or actions.min() < 0 or actions.max() > 3:
        raise ContractError("actions must be integer codes in 0..3")
    if world.day >= cfg.horizon_days:
        raise ContractError(f"world already at horizon day {world.day}")
    actions = actions.astype(np.int8)

    day = world.day
    weekend = (day % WEEK_LENGTH) >= WEEKDAYS
    draws = _daily_mobility_draws(world, day)
    incubation_hours = cfg.incubation_days * HOURS_PER_DAY
    treatment_hours = cfg.treatment_days * HOURS_PER_DAY

    visit_counts = np.zeros((m, world.n_areas), dtype=np.int16)
    hospitalized_today = np.zeros(m, dtype=bool)
    new_infections = 0
    new_discoveries = 0

    for hour in range(HOURS_PER_DAY):
        hour_abs = day * HOURS_PER_DAY + hour

        onset = (world.health == HealthStatus.ASYMPTOMATIC) & (
            world.symptomatic_at == hour_abs
        )
        if np.any(onset):
            world.health[onset] = HealthStatus.SYMPTOMATIC
            world.onset_day[onset] = day
            new_discoveries += int(onset.sum())
            if world.first_discovery_day is None:
                world.first_discovery_day = day
        done = (world.health == HealthStatus.SYMPTOMATIC) & (
            world.recovered_at == hour_abs
        )
        if np.any(done):
            world.health[done] = HealthStatus.RECOVERED

        loc = _hour_locations(world, actions, hour, weekend, draws)
        hospitalized_today |= world.health == HealthStatus.SYMPTOMATIC

        present = loc >= 0
        visit_counts[present, loc[present]] += 1

        infectious = (
            (world.health == HealthStatus.ASYMPTOMATIC)
            & (world.infectious_from <= hour_abs)
            & (loc >= 0)
        )
        if np.any(infectious):
            sources = np.flatnonzero(infectious)
            pair_src, pair_dst = [], []

            esrc, edst, eslot = _gather_infectious_edges(world, sources)
            if len(esrc):
                co = (loc[edst] == loc[esrc]) & (loc[esrc] >= 0)
                if np.any(co):
                    esrc, edst, eslot = esrc[co], edst[co], eslot[co]
                    keys = rngkeys.fold(
                        rngkeys.fold(world._key_acq, hour_abs), esrc
                    )
                    u = rngkeys.uniforms(keys, eslot)
                    hit = u < cfg.p_c
                    if np.any(hit):
                        pair_src.append(esrc[hit])
                        pair_dst.append(edst[hit])

            stranger_ok = actions <= Action.CONFINE
            str_sources = sources[stranger_ok[sources]]
            if len(str_sources) and cfg.strangers_per_hour > 0:
                eligible = (loc >= 0) & stranger_ok
                e2src, e2dst, _ = _gather_infectious_edges(world, str_sources)
                acq_in_pool = np.zeros(m, dtype=np.int64)
                if len(e2src):
                    mask = eligible[e2dst] & (loc[e2dst] == loc[e2src])
                    if np.any(mask):
                        acq_in_pool = np.bincount(
                            e2src[mask], minlength=m
                        ).astype(np.int64)
                csrc, cdst = _stranger_contacts(
                    world, str_sources, loc, eligible, acq_in_pool, hour_abs
                )
                if len(csrc):
                    keys = rngkeys.fold(
                        rngkeys.fold(world._key_infect, hour_abs), csrc
                    )
                    counters = np.zeros(len(csrc), dtype=np.int64)
                    seen: dict = {}
                    for idx, s in enumerate(csrc):  # slot per (source, occurrence)
                        seen[s] = seen.get(s, -1) + 1
                        counters[idx] = seen[s]
                    u = rngkeys.uniforms(keys, counters)
                    hit = u < cfg.p_s
                    if np.any(hit):
                        pair_src.append(csrc[hit])
                        pair_dst.append(cdst[hit])

            if pair_src:
                all_src = np.concatenate(pair_src)
                all_dst = np.concatenate(pair_dst)
                susceptible = world.health[all_dst] == HealthStatus.SUSCEPTIBLE
                all_src, all_dst = all_src[susceptible], all_dst[susceptible]
                if len(all_dst):
                    uniq, first = np.unique(all_dst, return_index=True)
                    world.health[uniq] = HealthStatus.ASYMPTOMATIC
                    world.infectious_from[uniq] = hour_abs + 1
                    world.symptomatic_at[uniq] = hour_abs + 1 + incubation_hours
                    world.recovered_at[uniq] = (
                        hour_abs + 1 + incubation_hours + treatment_hours
                    )
                    world.infected_by[uniq] = all_src[first].astype(np.int32)
                    world.infected_day[uniq] = day
                    new_infections += len(uniq)

        if world.audit:
            counts = np.bincount(world.health, minlength=4)
            if counts.sum() != m:
                raise AssertionError("population not conserved")

    world.last_location = loc
    world.current_action = actions.copy()
    world.cumulative_infections += new_infections
    if world.audit and visit_counts.sum(axis=1).max(initial=0) > HOURS_PER_DAY:
        raise AssertionError("visit row exceeds 24 hours")
    world.visit_history.push(visit_counts)
    world.day += 1

    cared = ~hospitalized_today
    return DayOutcome(
        new_infections=new_infections,
        new_discoveries=new_discoveries,
        n_hospitalized=int(hospitalized_today.sum()),
        n_isolated=int(np.sum(cared & (actions == Action.ISOLATE))),
        n_quarantined=int(np.sum(cared & (actions == Action.QUARANTINE))),
        n_confined=int(np.sum(cared & (actions == Action.CONFINE))),
    )


def measure_mean_secondary_infections(
    config: WorldConfig, episodes: int, base_seed: int = 20_000
) -> float:
    """Mean number of direct infections caused by a single index case in an
    otherwise susceptible, unintervened population.

    Each episode seeds one asymptomatic individual and simulates just its
    infectious window; attribution uses the recorded infection source.
    """
    totals = 0
    no_action = np.zeros(config.population, dtype=np.int8)
    for k in range(episodes):
        cfg = config.copy(initial_seed_count=1, rng_seed=base_seed + k)
        world = build_world(cfg)
        index_case = int(np.flatnonzero(world.health == HealthStatus.ASYMPTOMATIC)[0])
        for _ in range(cfg.incubation_days):
            step_day(world, no_action)
        totals += int(np.sum(world.infected_by == index_case))
    return totals / episodes

"""Episode cost accounting: infections, weighted intervention cost, score.

Daily counts are per-day headcounts, so an individual isolated three days
contributes three to the isolation total.  The score is
exp(I / theta_I) + exp(Q / theta_Q); table output renders anything above
10000 as ">10000" while the exact value is kept internally.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import ContractError
from .world import DayOutcome

LAMBDA_HOSPITALIZED = 1.0
LAMBDA_ISOLATED = 0.5
LAMBDA_QUARANTINED = 0.3
LAMBDA_CONFINED = 0.2
THETA_I = 500.0
THETA_Q = 10000.0
SCORE_DISPLAY_CAP = 10000.0


def score(total_infections: float, total_cost: float, theta_i: float = THETA_I, theta_q: float = THETA_Q) -> float:
    if total_infections < 0 or total_cost < 0:
        raise ContractError("score arguments must be non-negative")
    return math.exp(total_infections / theta_i) + math.exp(total_cost / theta_q)


def format_score(value: float) -> str:
    return ">10000" if value > SCORE_DISPLAY_CAP else f"{value:.2f}"


@dataclass
class EpisodeMetrics:
    """Accumulates one episode's daily counts and cost terms."""

    theta_i: float = THETA_I
    theta_q: float = THETA_Q
    lambda_h: float = LAMBDA_HOSPITALIZED
    lambda_i: float = LAMBDA_ISOLATED
    lambda_q: float = LAMBDA_QUARANTINED
    lambda_c: float = LAMBDA_CONFINED
    initial_infections: int = 0
    new_infections: list = field(default_factory=list)
    n_hospitalized: list = field(default_factory=list)
    n_isolated: list = field(default_factory=list)
    n_quarantined: list = field(default_factory=list)
    n_confined: list = field(default_factory=list)
    daily_cost: list = field(default_factory=list)
    total_infections: int = 0
    total_cost: float = 0.0
    guard_triggered: bool = False

    def __post_init__(self):
        self.total_infections = int(self.initial_infections)

    def accumulate_day(self, outcome: DayOutcome) -> float:
        """Add one day's counts; returns that day's cost increment."""
        counts = (
            outcome.new_infections,
            outcome.n_hospitalized,
            outcome.n_isolated,
            outcome.n_quarantined,
            outcome.n_confined,
        )
        if any(c < 0 for c in counts):
            raise ContractError(f"negative day counts: {counts}")
        dq = (
            self.lambda_h * outcome.n_hospitalized
            + self.lambda_i * outcome.n_isolated
            + self.lambda_q * outcome.n_quarantined
            + self.lambda_c * outcome.n_confined
        )
        self.new_infections.append(outcome.new_infections)
        self.n_hospitalized.append(outcome.n_hospitalized)
        self.n_isolated.append(outcome.n_isolated)
        self.n_quarantined.append(outcome.n_quarantined)
        self.n_confined.append(outcome.n_confined)
        self.daily_cost.append(dq)
        self.total_infections += outcome.new_infections
        self.total_cost += dq
        return dq

    @property
    def days_simulated(self) -> int:
        return len(self.new_infections)

    def score(self) -> float:
        return score(self.total_infections, self.total_cost, self.theta_i, self.theta_q)

    def daily_rows(self) -> list:
        """Rows of (day, new_infections, cum_I, n_h, n_i, n_q, n_c, daily_Q).

        The initial seeded infections are folded into day 0's new-infection
        count so the cumulative column totals every infection ever recorded.
        """
        rows = []
        cum = 0
        for day in range(self.days_simulated):
            new = self.new_infections[day] + (self.initial_infections if day == 0 else 0)
            cum += new
            rows.append(
                (
                    day,
                    new,
                    cum,
                    self.n_hospitalized[day],
                    self.n_isolated[day],
                    self.n_quarantined[day],
                    self.n_confined[day],
                    self.daily_cost[day],
                )
            )
        return rows

    def summary(self, scenario: str, seed: int) -> dict:
        return {
            "scenario": scenario,
            "seed": seed,
            "I": self.total_infections,
            "Q": self.total_cost,
            "score": self.score(),
            "days_simulated": self.days_simulated,
            "guard_triggered": self.guard_triggered,
        }


def daily_csv_text(metrics: EpisodeMetrics, header_comments: list) -> str:
    lines = [f"# {c}" for c in header_comments]
    lines.append("day,new_infections,cum_I,n_h,n_i,n_q,n_c,daily_Q")
    for row in metrics.daily_rows():
        day, new, cum, nh, ni, nq, nc, dq = row
        lines.append(f"{day},{new},{cum},{nh},{ni},{nq},{nc},{dq:.10g}")
    return "\n".join(lines) + "\n"


def summary_json_text(metrics: EpisodeMetrics, scenario: str, seed: int) -> str:
    return json.dumps(metrics.summary(scenario, seed), sort_keys=True, indent=2) + "\n"


def comparison_csv_text(rows: list, header_comments: list) -> str:
    """Method comparison table mirroring the reporting layout."""
    lines = [f"# {c}" for c in header_comments]
    lines.append("method,I,Q,score")
    for method, i_val, q_val, s_val in rows:
        lines.append(f"{method},{i_val:.2f},{q_val:.2f},{format_score(s_val)}")
    return "\n".join(lines) + "\n"

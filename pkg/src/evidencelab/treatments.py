"""Treatment grid and end-of-block feedback disclosure.

A treatment pairs a reward scheme with a feedback condition. Feedback is
packaged so that a consumer can only read what its condition actually
disclosed; reaching for anything else raises instead of returning stale or
imagined data.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .game import ForecastRecord, RewardScheme


class FeedbackCondition(str, Enum):
    NONE = "none"
    STRATEGIES = "strategies"
    SCORES = "scores"
    BOTH = "both"

    @property
    def discloses_strategies(self) -> bool:
        return self in (FeedbackCondition.STRATEGIES, FeedbackCondition.BOTH)

    @property
    def discloses_scores(self) -> bool:
        return self in (FeedbackCondition.SCORES, FeedbackCondition.BOTH)


@dataclass(frozen=True)
class TreatmentConfig:
    rewards: RewardScheme
    feedback: FeedbackCondition

    @property
    def label(self) -> str:
        return f"{self.rewards.value}/{self.feedback.value}"

    @classmethod
    def parse(cls, rewards: str, feedback: str) -> "TreatmentConfig":
        return cls(RewardScheme(rewards), FeedbackCondition(feedback))


TREATMENT_GRID: tuple[TreatmentConfig, ...] = tuple(
    TreatmentConfig(rewards, feedback)
    for rewards in RewardScheme
    for feedback in FeedbackCondition
)


class FeedbackUnavailableError(LookupError):
    """A consumer asked for data its feedback condition does not disclose."""


@dataclass(frozen=True)
class OwnBlockSummary:
    """What a member knows about their own block without any disclosure.

    `records` is the member's full forecast history for the block; it is
    always present regardless of the feedback condition.
    """

    member_id: int
    score: int
    forecast_count: int
    average_flips: float
    luck: float
    score_sd: float
    records: tuple[ForecastRecord, ...] = ()


@dataclass(frozen=True)
class MemberDisclosure:
    """One row of the end-of-block table, masked per condition."""

    member_id: int
    is_self: bool
    average_flips: float | None  # two decimals, as shown on screen
    score: int | None


@dataclass(frozen=True)
class FeedbackPacket:
    block: int
    condition: FeedbackCondition
    own: OwnBlockSummary
    members: tuple[MemberDisclosure, ...]

    def strategies(self) -> tuple[MemberDisclosure, ...]:
        if not self.condition.discloses_strategies:
            raise FeedbackUnavailableError(
                f"condition {self.condition.value!r} does not disclose strategies"
            )
        return self.members

    def scores(self) -> tuple[MemberDisclosure, ...]:
        if not self.condition.discloses_scores:
            raise FeedbackUnavailableError(
                f"condition {self.condition.value!r} does not disclose scores"
            )
        return self.members

    def to_payload(self) -> dict:
        """Wire form: undisclosed fields are absent, not null."""
        payload: dict = {
            "block": self.block,
            "condition": self.condition.value,
            "own": {
                "score": self.own.score,
                "forecast_count": self.own.forecast_count,
                "average_flips": round(self.own.average_flips, 2),
                "forecasts": [
                    {
                        "flips": r.flips,
                        "reds": r.reds,
                        "greens": r.greens,
                        "guess": r.guess.value,
                        "majority": r.majority.value,
                        "correct": r.correct,
                    }
                    for r in self.own.records
                ],
            },
        }
        if self.members:
            rows = []
            for m in self.members:
                row: dict = {"member": m.member_id, "you": m.is_self}
                if m.average_flips is not None:
                    row["average_flips"] = m.average_flips
                if m.score is not None:
                    row["score"] = m.score
                rows.append(row)
            payload["members"] = rows
        return payload


def build_feedback(
    condition: FeedbackCondition,
    block: int,
    summaries: tuple[OwnBlockSummary, ...],
    member_id: int,
) -> FeedbackPacket:
    """Assemble the packet one member sees after a block.

    Only the just-finished block's data goes in; the packet never
    accumulates history.
    """
    own = next(s for s in summaries if s.member_id == member_id)
    members: tuple[MemberDisclosure, ...] = ()
    if condition.discloses_strategies or condition.discloses_scores:
        members = tuple(
            MemberDisclosure(
                member_id=s.member_id,
                is_self=s.member_id == member_id,
                average_flips=(
                    round(s.average_flips, 2) if condition.discloses_strategies else None
                ),
                score=s.score if condition.discloses_scores else None,
            )
            for s in sorted(summaries, key=lambda s: s.member_id)
        )
    return FeedbackPacket(block=block, condition=condition, own=own, members=members)

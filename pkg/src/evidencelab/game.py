"""Core rules of the card-majority forecasting game.

A period deals a fresh deck of fair red/green cards, the player flips some
of them at once, then forecasts which color holds the majority of the whole
deck. Scoring is +1/-1 per forecast, and a block ends when the flip budget
is exhausted. Everything here is deterministic given an injected RNG.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum


class Color(str, Enum):
    RED = "red"
    GREEN = "green"

    @property
    def other(self) -> "Color":
        return Color.GREEN if self is Color.RED else Color.RED


class RewardScheme(str, Enum):
    NONCOMPETITIVE = "noncompetitive"
    COMPETITIVE = "competitive"


class GameError(Exception):
    """Base for rule violations; subclasses say what was violated."""


class IllegalFlipError(GameError):
    def __init__(self, flips: int, legal: set[int]):
        self.flips = flips
        self.legal = legal
        super().__init__(f"cannot flip {flips} cards now; legal choices: {sorted(legal)}")


class SequenceError(GameError):
    """Flip/forecast called out of order, or the block is already over."""


@dataclass(frozen=True)
class GameParams:
    """Rule constants for one session. Defaults match the lab protocol."""

    cards_per_period: int = 15
    flips_per_block: int = 100
    min_flips: int = 5
    max_flips: int = 15
    piece_rate: float = 1.50
    prize_rates: tuple[float, ...] = (2.50, 1.50, 1.50, 1.50, 0.50)
    group_size: int = 5
    blocks: int = 4

    def __post_init__(self) -> None:
        if self.cards_per_period % 2 == 0 or self.cards_per_period < 1:
            raise ValueError("cards_per_period must be odd so a majority always exists")
        if not (1 <= self.min_flips <= self.max_flips <= self.cards_per_period):
            raise ValueError("need 1 <= min_flips <= max_flips <= cards_per_period")
        if self.flips_per_block < self.min_flips:
            raise ValueError("flip budget smaller than the minimum flip")
        if len(self.prize_rates) != self.group_size:
            raise ValueError("one prize rate per group member, best rank first")
        if any(r2 > r1 for r1, r2 in zip(self.prize_rates, self.prize_rates[1:])):
            raise ValueError("prize rates must be non-increasing in rank")

    @property
    def majority_count(self) -> int:
        """Smallest count that is a strict majority of the deck."""
        return self.cards_per_period // 2 + 1


def legal_flip_choices(remaining: int, params: GameParams) -> set[int]:
    """Flip counts allowed with `remaining` budget left.

    A choice must fit the per-period bounds and must not strand the budget:
    after flipping, either nothing is left or at least another minimum flip.
    """
    if remaining < 0:
        raise ValueError("remaining budget cannot be negative")
    out = set()
    for n in range(params.min_flips, min(params.max_flips, remaining) + 1):
        left = remaining - n
        if left == 0 or left >= params.min_flips:
            out.add(n)
    return out


def closest_legal_flips(target: int, remaining: int, params: GameParams) -> int:
    """The legal flip count nearest to `target`, ties to the smaller one.

    This is the natural stand-in rule when a preferred count is blocked by
    the end-of-block budget.
    """
    legal = legal_flip_choices(remaining, params)
    if not legal:
        raise ValueError(f"no legal flip exists with {remaining} budget left")
    if target in legal:
        return target
    return min(legal, key=lambda n: (abs(n - target), n))


@dataclass
class Deck:
    """One period's cards. Positions are fixed at deal time; flips reveal them."""

    colors: tuple[Color, ...]
    revealed: tuple[int, ...] = ()

    @classmethod
    def deal(cls, params: GameParams, rng: random.Random) -> "Deck":
        colors = tuple(
            Color.RED if rng.random() < 0.5 else Color.GREEN
            for _ in range(params.cards_per_period)
        )
        return cls(colors=colors)

    @property
    def majority(self) -> Color:
        reds = sum(1 for c in self.colors if c is Color.RED)
        return Color.RED if reds > len(self.colors) - reds else Color.GREEN

    def revealed_counts(self) -> tuple[int, int]:
        reds = sum(1 for i in self.revealed if self.colors[i] is Color.RED)
        return reds, len(self.revealed) - reds

    def reveal(self, flips: int, rng: random.Random) -> tuple[int, int]:
        """Turn over `flips` cards at uniformly random unrevealed positions."""
        if self.revealed:
            raise SequenceError("this period's cards were already flipped")
        if not 0 < flips <= len(self.colors):
            raise ValueError(f"cannot flip {flips} of {len(self.colors)} cards")
        positions = rng.sample(range(len(self.colors)), flips)
        self.revealed = tuple(sorted(positions))
        return self.revealed_counts()


@dataclass(frozen=True)
class ForecastRecord:
    """Outcome of one period, kept for feedback and exports."""

    flips: int
    reds: int
    greens: int
    guess: Color
    majority: Color

    @property
    def correct(self) -> bool:
        return self.guess is self.majority

    @property
    def points(self) -> int:
        return 1 if self.correct else -1


@dataclass
class BlockState:
    """Walks one member through a block: flip, forecast, repeat until spent."""

    params: GameParams
    remaining: int = field(default=-1)
    score: int = 0
    records: list[ForecastRecord] = field(default_factory=list)
    _deck: Deck | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.remaining < 0:
            self.remaining = self.params.flips_per_block

    @property
    def complete(self) -> bool:
        return self.remaining == 0

    @property
    def awaiting_forecast(self) -> bool:
        return self._deck is not None

    @property
    def deck(self) -> Deck | None:
        return self._deck

    def legal_choices(self) -> set[int]:
        return legal_flip_choices(self.remaining, self.params) if not self.complete else set()

    def flip(self, flips: int, rng: random.Random) -> tuple[int, int]:
        """Deal a deck and reveal `flips` cards; returns (reds, greens) seen."""
        if self.complete:
            raise SequenceError("block budget is exhausted")
        if self.awaiting_forecast:
            raise SequenceError("forecast is due before flipping again")
        legal = self.legal_choices()
        if flips not in legal:
            raise IllegalFlipError(flips, legal)
        self._deck = Deck.deal(self.params, rng)
        return self._deck.reveal(flips, rng)

    def forecast(self, guess: Color) -> ForecastRecord:
        """Commit the majority guess for the current period and score it."""
        if self._deck is None:
            raise SequenceError("no cards flipped this period yet")
        reds, greens = self._deck.revealed_counts()
        record = ForecastRecord(
            flips=len(self._deck.revealed),
            reds=reds,
            greens=greens,
            guess=guess,
            majority=self._deck.majority,
        )
        self.records.append(record)
        self.score += record.points
        self.remaining -= record.flips
        self._deck = None
        return record

    @property
    def forecast_count(self) -> int:
        return len(self.records)

    @property
    def average_flips(self) -> float:
        if not self.records:
            raise SequenceError("no forecasts made yet")
        return sum(r.flips for r in self.records) / len(self.records)


def block_payoff(
    score: int,
    scheme: RewardScheme,
    params: GameParams,
    rank: int | None = None,
) -> float:
    """Dollar payoff for a block score.

    Noncompetitive pays the piece rate per point. Competitive pays a
    rank-dependent rate per point; `rank` is 1-based, best first.
    """
    if scheme is RewardScheme.NONCOMPETITIVE:
        return params.piece_rate * score
    if rank is None:
        raise ValueError("competitive payoff needs a rank")
    if not 1 <= rank <= params.group_size:
        raise ValueError(f"rank must be in 1..{params.group_size}")
    return params.prize_rates[rank - 1] * score

"""Boundedly rational guessing models and adaptive flip policies.

The guessing side covers logit (precision-limited) responses to the exact
majority posterior, the naive sample-share matcher, and maximum-likelihood
recovery of the precision parameter from choice data. The policy side maps
own results and disclosed feedback to the next block's flip target.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path

from .game import Color, Deck, GameParams, closest_legal_flips
from .theory import OptimalPolicy, majority_prob, optimal_policy
from .treatments import FeedbackPacket

PRECISION_LOWER = 0.0
PRECISION_UPPER = 50.0
PRECISION_TOL = 1e-6


def logit_response_prob(majority_chance: float, precision: float) -> float:
    """Chance of picking a color whose majority probability is
    `majority_chance`, under logit noise with the given precision.

    Zero precision ignores the evidence entirely; large precision approaches
    always picking the favored color.
    """
    if not (math.isfinite(precision)):
        raise ValueError("precision must be finite")
    return 1.0 / (1.0 + math.exp(2.0 * precision * (1.0 - 2.0 * majority_chance)))


def matcher_response_prob(reds: int, greens: int) -> float:
    """Probability matching on the revealed sample share."""
    if reds < 0 or greens < 0 or reds + greens == 0:
        raise ValueError("need a nonempty revealed sample")
    return reds / (reds + greens)


def _red_posterior(flips: int, reds: int, cards: int) -> float:
    # majority_prob only accepts a strict revealed majority, so the red
    # minority and tied cases route through the green complement.
    greens = flips - reds
    if reds > greens:
        return majority_prob(flips, reds, cards)
    if greens > reds:
        return 1.0 - majority_prob(flips, greens, cards)
    return 0.5


@dataclass(frozen=True)
class ChoiceRecord:
    """One guess: what was revealed and whether red was chosen."""

    flips: int
    reds: int
    greens: int
    chose_red: bool

    def __post_init__(self) -> None:
        if self.reds < 0 or self.greens < 0 or self.reds + self.greens != self.flips:
            raise ValueError("revealed counts must be nonnegative and sum to flips")

    def red_majority_chance(self, cards: int = 15) -> float:
        return _red_posterior(self.flips, self.reds, cards)


def _log_sigmoid(x: float) -> float:
    # log(1/(1+e^-x)) without ever forming a probability that rounds to 0
    # or 1; keeps the likelihood finite even for near-certain wrong guesses.
    if x < 0:
        return x - math.log1p(math.exp(x))
    return -math.log1p(math.exp(-x))


def choice_log_likelihood(
    choices: list[ChoiceRecord], precision: float, cards: int = 15
) -> float:
    total = 0.0
    for c in choices:
        edge = 2.0 * precision * (2.0 * c.red_majority_chance(cards) - 1.0)
        total += _log_sigmoid(edge if c.chose_red else -edge)
    return total


class EstimationError(ValueError):
    """The data cannot identify the precision parameter."""


@dataclass(frozen=True)
class PrecisionEstimate:
    precision: float
    std_error: float
    log_likelihood: float
    choices: int
    at_boundary: bool
    lower: float = PRECISION_LOWER
    upper: float = PRECISION_UPPER
    tolerance: float = PRECISION_TOL

    def to_json(self) -> dict:
        return {
            "precision": self.precision,
            "std_error": self.std_error,
            "log_likelihood": self.log_likelihood,
            "choices": self.choices,
            "at_boundary": self.at_boundary,
            "bracket": [self.lower, self.upper],
            "tolerance": self.tolerance,
        }


def estimate_precision(
    choices: list[ChoiceRecord],
    lower: float = PRECISION_LOWER,
    upper: float = PRECISION_UPPER,
    tolerance: float = PRECISION_TOL,
    cards: int = 15,
) -> PrecisionEstimate:
    """Maximum-likelihood precision by golden-section search.

    The log likelihood is concave in the precision, so the search bracket
    shrinks safely. The standard error comes from the observed curvature at
    the optimum; solutions pinned to the bracket edge are flagged and their
    curvature-based error is not trustworthy.
    """
    if not choices:
        raise EstimationError("no choices to fit")
    if all(c.red_majority_chance(cards) == 0.5 for c in choices):
        raise EstimationError("every signal was uninformative; precision is unidentified")

    def ll(x: float) -> float:
        return choice_log_likelihood(choices, x, cards)

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lower, upper
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = ll(c), ll(d)
    while b - a > tolerance:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = ll(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = ll(d)
    best = (a + b) / 2.0
    at_boundary = best - lower < 10 * tolerance or upper - best < 10 * tolerance
    h = 1e-3
    curvature = (ll(best + h) - 2.0 * ll(best) + ll(best - h)) / (h * h)
    std_error = 1.0 / math.sqrt(-curvature) if curvature < 0 else math.inf
    return PrecisionEstimate(
        precision=best,
        std_error=std_error,
        log_likelihood=ll(best),
        choices=len(choices),
        at_boundary=at_boundary,
        lower=lower,
        upper=upper,
        tolerance=tolerance,
    )


def generate_choices(
    precision: float,
    count: int,
    rng: random.Random,
    params: GameParams | None = None,
) -> list[ChoiceRecord]:
    """Synthetic choice data: play isolated periods with flip counts drawn
    uniformly from the allowed range and guess with logit noise."""
    params = params or GameParams()
    out = []
    for _ in range(count):
        flips = rng.randint(params.min_flips, params.max_flips)
        deck = Deck.deal(params, rng)
        reds, greens = deck.reveal(flips, rng)
        p_red = _red_posterior(flips, reds, params.cards_per_period)
        chose_red = rng.random() < logit_response_prob(p_red, precision)
        out.append(ChoiceRecord(flips=flips, reds=reds, greens=greens, chose_red=chose_red))
    return out


CHOICE_COLUMNS = ["n", "r", "g", "chose_red"]


def write_choices_csv(path: str | Path, choices: list[ChoiceRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CHOICE_COLUMNS)
        for c in choices:
            writer.writerow([c.flips, c.reds, c.greens, int(c.chose_red)])


def read_choices_csv(path: str | Path) -> list[ChoiceRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != CHOICE_COLUMNS:
            raise ValueError(f"expected columns {CHOICE_COLUMNS}, got {reader.fieldnames}")
        out = []
        for row in reader:
            out.append(
                ChoiceRecord(
                    flips=int(row["n"]),
                    reds=int(row["r"]),
                    greens=int(row["g"]),
                    chose_red=row["chose_red"].strip().lower() in ("1", "true"),
                )
            )
    return out


class PolicyKind(str, Enum):
    STATIONARY = "stationary"
    OPTIMAL = "optimal"
    QRE_MATCHER = "qre_matcher"
    IMITATE_MEAN = "imitate_mean"
    FOLLOW_LEADER = "follow_leader"
    DISTANCE_RESPONSIVE = "distance_responsive"
    LUCK_RESPONSIVE = "luck_responsive"


def _round_half_even(value: Fraction | float) -> int:
    return round(value)


@dataclass
class AgentPolicy:
    """A member's decision rule: flip target per period, guess rule, and how
    the target moves after feedback.

    Policies only read feedback sections their treatment disclosed; the
    packet raises otherwise, which keeps information hygiene honest.
    """

    kind: PolicyKind
    target: int = 10
    precision: float = 1.4
    sensitivity: float = 1.0
    _table: OptimalPolicy | None = field(default=None, init=False, repr=False)

    @classmethod
    def stationary(cls, target: int) -> "AgentPolicy":
        return cls(kind=PolicyKind.STATIONARY, target=target)

    @classmethod
    def optimal(cls) -> "AgentPolicy":
        return cls(kind=PolicyKind.OPTIMAL)

    @classmethod
    def qre_matcher(cls, precision: float, target: int = 10) -> "AgentPolicy":
        return cls(kind=PolicyKind.QRE_MATCHER, target=target, precision=precision)

    @classmethod
    def imitate_mean(cls, target: int = 10) -> "AgentPolicy":
        return cls(kind=PolicyKind.IMITATE_MEAN, target=target)

    @classmethod
    def follow_leader(cls, target: int = 10) -> "AgentPolicy":
        return cls(kind=PolicyKind.FOLLOW_LEADER, target=target)

    @classmethod
    def distance_responsive(cls, sensitivity: float = 1.0, target: int = 10) -> "AgentPolicy":
        return cls(kind=PolicyKind.DISTANCE_RESPONSIVE, target=target, sensitivity=sensitivity)

    @classmethod
    def luck_responsive(cls, sensitivity: float = 1.0, target: int = 10) -> "AgentPolicy":
        return cls(kind=PolicyKind.LUCK_RESPONSIVE, target=target, sensitivity=sensitivity)

    def choose_flips(self, remaining: int, params: GameParams) -> int:
        if self.kind is PolicyKind.OPTIMAL:
            if self._table is None:
                self._table = optimal_policy(params)
            return self._table.action(remaining)
        return closest_legal_flips(self.target, remaining, params)

    def choose_guess(
        self, reds: int, greens: int, rng: random.Random, params: GameParams
    ) -> Color:
        if self.kind is PolicyKind.QRE_MATCHER:
            p_red = _red_posterior(reds + greens, reds, params.cards_per_period)
            chance = logit_response_prob(p_red, self.precision)
            return Color.RED if rng.random() < chance else Color.GREEN
        if reds > greens:
            return Color.RED
        if greens > reds:
            return Color.GREEN
        return Color.RED if rng.random() < 0.5 else Color.GREEN

    def review_feedback(self, packet: FeedbackPacket, params: GameParams) -> int:
        """Digest an end-of-block packet and return the next block's target."""
        if self.kind is PolicyKind.IMITATE_MEAN:
            peers = [m for m in packet.strategies() if not m.is_self]
            mean = sum(Fraction(f"{m.average_flips:.2f}") for m in peers) / len(peers)
            self._retarget(_round_half_even(mean), params)
        elif self.kind is PolicyKind.FOLLOW_LEADER:
            scores = {m.member_id: m.score for m in packet.scores()}
            averages = {m.member_id: m.average_flips for m in packet.strategies()}
            leader = min(scores, key=lambda mid: (-scores[mid], mid))
            self._retarget(_round_half_even(Fraction(f"{averages[leader]:.2f}")), params)
        elif self.kind is PolicyKind.DISTANCE_RESPONSIVE:
            scores = [m.score for m in packet.scores()]
            top, bottom = max(scores), min(scores)
            if top > bottom:
                gap = (top - packet.own.score) / (top - bottom)
                self._retarget(_round_half_even(self.target - self.sensitivity * gap), params)
        elif self.kind is PolicyKind.LUCK_RESPONSIVE:
            own = packet.own
            standardized = own.luck / own.score_sd if own.score_sd > 0 else 0.0
            self._retarget(
                _round_half_even(self.target - self.sensitivity * standardized), params
            )
        return self.target

    def _retarget(self, proposed: int, params: GameParams) -> None:
        self.target = min(params.max_flips, max(params.min_flips, proposed))

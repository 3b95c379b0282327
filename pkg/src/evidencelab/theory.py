"""Closed-form analysis of the forecasting game.

Exact posterior and success probabilities for majority guessing, expected
block scores, expected utilities of flat flip strategies, and the dynamic
program for the score-maximizing flip policy. All probabilities are computed
in exact rational arithmetic and only converted to float at the API surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .game import GameParams, closest_legal_flips, legal_flip_choices

DEFAULT_CARDS = 15


@lru_cache(maxsize=None)
def _majority_frac(flips: int, seen: int, cards: int) -> Fraction:
    if cards % 2 == 0 or cards < 1:
        raise ValueError("cards must be odd")
    if not 0 <= seen <= flips <= cards:
        raise ValueError("need 0 <= seen <= flips <= cards")
    need = cards // 2 + 1
    if seen >= need:
        return Fraction(1)
    hidden = cards - flips
    # Among hidden cards, each is the color with prob 1/2; the color wins the
    # deck iff its total reaches the majority threshold.
    total = sum(math.comb(hidden, m - seen) for m in range(need, hidden + seen + 1))
    return Fraction(total, 2**hidden)


def majority_prob(flips: int, seen: int, cards: int = DEFAULT_CARDS) -> float:
    """Probability that the color shown on `seen` of `flips` revealed cards
    is the true majority color of the deck.

    Requires a strict revealed majority (`seen` > half of `flips`); the tied
    case belongs to the success-probability aggregation, where it is worth
    exactly one half.
    """
    if 2 * seen <= flips:
        raise ValueError("seen must be a strict majority of the revealed cards")
    return float(_majority_frac(flips, seen, cards))


@lru_cache(maxsize=None)
def _success_frac(flips: int, cards: int) -> Fraction:
    if not 1 <= flips <= cards:
        raise ValueError("need 1 <= flips <= cards")
    half, rest = divmod(flips, 2)
    total = Fraction(0)
    # Both colors can supply the sample majority, hence the factor 2.
    for seen in range(half + 1, flips + 1):
        total += 2 * math.comb(flips, seen) * _majority_frac(flips, seen, cards)
    total /= 2**flips
    if rest == 0:
        # Tied sample: the guess is a fair coin and the deck majority is
        # symmetric, so the success chance is exactly one half.
        total += Fraction(math.comb(flips, half), 2 ** (flips + 1))
    return total


def guess_success_prob(flips: int, cards: int = DEFAULT_CARDS) -> float:
    """Probability that guessing the revealed-sample majority is correct,
    with a fair coin on tied samples."""
    return float(_success_frac(flips, cards))


def expected_block_score(flips: int, params: GameParams) -> float:
    """Expected block score of always flipping `flips`, treating the budget
    ratio as the forecast count (the last period's forced adjustment is
    ignored; see stationary_expected_score for the exact version)."""
    p = _success_frac(flips, params.cards_per_period)
    return float(Fraction(params.flips_per_block, flips) * (2 * p - 1))


def block_score_sd(flips: int, params: GameParams) -> float:
    """Score standard deviation matching expected_block_score's idealization."""
    p = _success_frac(flips, params.cards_per_period)
    var = Fraction(params.flips_per_block, flips) * 4 * p * (1 - p)
    return math.sqrt(var)


def stationary_flip_sequence(target: int, params: GameParams) -> tuple[int, ...]:
    """Flip counts actually played by a member aiming for `target` each
    period: the closest legal count stands in when the budget forces a
    deviation, ties going to the smaller count."""
    if not params.min_flips <= target <= params.max_flips:
        raise ValueError(f"target must be in {params.min_flips}..{params.max_flips}")
    remaining = params.flips_per_block
    out = []
    while remaining:
        choice = closest_legal_flips(target, remaining, params)
        out.append(choice)
        remaining -= choice
    return tuple(out)


def stationary_expected_score(target: int, params: GameParams) -> float:
    """Exact expected block score of the stationary-`target` policy."""
    cards = params.cards_per_period
    return float(
        sum(2 * _success_frac(n, cards) - 1 for n in stationary_flip_sequence(target, params))
    )


def stationary_score_sd(target: int, params: GameParams) -> float:
    cards = params.cards_per_period
    var = sum(
        4 * _success_frac(n, cards) * (1 - _success_frac(n, cards))
        for n in stationary_flip_sequence(target, params)
    )
    return math.sqrt(var)


def stationary_score_pmf(target: int, params: GameParams) -> dict[int, float]:
    """Exact distribution of the stationary policy's block score."""
    cards = params.cards_per_period
    pmf = {0: Fraction(1)}
    for n in stationary_flip_sequence(target, params):
        p = _success_frac(n, cards)
        nxt: dict[int, Fraction] = {}
        for s, q in pmf.items():
            nxt[s + 1] = nxt.get(s + 1, Fraction(0)) + q * p
            nxt[s - 1] = nxt.get(s - 1, Fraction(0)) + q * (1 - p)
        pmf = nxt
    return {s: float(q) for s, q in sorted(pmf.items())}


@dataclass(frozen=True)
class UtilitySpec:
    """Utility over block money. `money_per_point` converts score to dollars
    before the curvature applies."""

    kind: str
    risk_aversion: float = 0.0
    gain_curvature: float = 0.5
    loss_curvature: float = 0.9
    money_per_point: float = 1.50

    KINDS = ("risk_neutral", "cara", "prospect")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"kind must be one of {self.KINDS}")
        if self.kind == "cara" and not (
            math.isfinite(self.risk_aversion) and self.risk_aversion > 0
        ):
            raise ValueError("cara needs risk_aversion > 0")
        if self.kind == "prospect" and not (
            0 < self.gain_curvature < self.loss_curvature
        ):
            raise ValueError("prospect needs 0 < gain_curvature < loss_curvature")
        if not (math.isfinite(self.money_per_point) and self.money_per_point > 0):
            raise ValueError("money_per_point must be positive")

    @classmethod
    def risk_neutral(cls, money_per_point: float = 1.50) -> "UtilitySpec":
        return cls(kind="risk_neutral", money_per_point=money_per_point)

    @classmethod
    def cara(cls, risk_aversion: float, money_per_point: float = 1.50) -> "UtilitySpec":
        return cls(kind="cara", risk_aversion=risk_aversion, money_per_point=money_per_point)

    @classmethod
    def prospect(
        cls,
        gain_curvature: float = 0.5,
        loss_curvature: float = 0.9,
        money_per_point: float = 1.50,
    ) -> "UtilitySpec":
        return cls(
            kind="prospect",
            gain_curvature=gain_curvature,
            loss_curvature=loss_curvature,
            money_per_point=money_per_point,
        )

    @property
    def label(self) -> str:
        if self.kind == "cara":
            return f"cara_{self.risk_aversion:g}"
        if self.kind == "prospect":
            return f"prospect_{self.gain_curvature:g}_{self.loss_curvature:g}"
        return "risk_neutral"

    def utility(self, money: float) -> float:
        if self.kind == "risk_neutral":
            return money
        if self.kind == "cara":
            # expm1 keeps the curve well conditioned as the aversion
            # parameter approaches risk neutrality.
            a = self.risk_aversion
            return -math.expm1(-a * money) / a
        gain = max(money, 0.0) ** self.gain_curvature
        loss = max(-money, 0.0) ** self.loss_curvature
        return gain - loss

    def score_utility(self, score: float) -> float:
        return self.utility(self.money_per_point * score)


def expected_block_utility(
    flips: int,
    utility: UtilitySpec,
    params: GameParams,
    rounding: str = "round",
) -> float:
    """Expected utility of always flipping `flips`, modelling the block as a
    binomial over a whole number of forecasts.

    The forecast count is the rounded budget ratio; `rounding` picks
    "round" or "floor". Neither honors the end-of-block adjustment, which is
    what stationary_utility is for.
    """
    if rounding == "round":
        count = round(params.flips_per_block / flips)
    elif rounding == "floor":
        count = params.flips_per_block // flips
    else:
        raise ValueError("rounding must be 'round' or 'floor'")
    p = guess_success_prob(flips, params.cards_per_period)
    total = 0.0
    for k in range(count + 1):
        weight = math.comb(count, k) * p**k * (1 - p) ** (count - k)
        total += weight * utility.score_utility(2 * k - count)
    return total


def stationary_utility(target: int, utility: UtilitySpec, params: GameParams) -> float:
    """Expected utility of the stationary-`target` policy under the exact
    block rules, via the exact score distribution."""
    pmf = stationary_score_pmf(target, params)
    return sum(q * utility.score_utility(s) for s, q in pmf.items())


@dataclass(frozen=True)
class OptimalPolicy:
    """Score-maximizing flip policy: best action and continuation value for
    every budget level that can occur."""

    actions: dict[int, int]
    values: dict[int, float]

    def action(self, remaining: int) -> int:
        try:
            return self.actions[remaining]
        except KeyError:
            raise ValueError(f"no legal flip exists with {remaining} budget left") from None

    def value(self, remaining: int) -> float:
        try:
            return self.values[remaining]
        except KeyError:
            raise ValueError(f"budget {remaining} cannot occur during play") from None

    def sequence(self, remaining: int | None = None) -> tuple[int, ...]:
        """Flip counts of one optimal block played greedily from `remaining`."""
        if remaining is None:
            remaining = max(self.actions)
        out = []
        while remaining:
            choice = self.action(remaining)
            out.append(choice)
            remaining -= choice
        return tuple(out)


def optimal_policy(params: GameParams) -> OptimalPolicy:
    """Solve the flip-count dynamic program exactly.

    Value of a budget is the best immediate expected point margin plus the
    value of what remains; ties in the argmax go to the smaller flip count.
    """
    cards = params.cards_per_period
    values: dict[int, Fraction] = {0: Fraction(0)}
    actions: dict[int, int] = {}
    for remaining in range(1, params.flips_per_block + 1):
        legal = legal_flip_choices(remaining, params)
        if not legal:
            continue
        best_n, best_v = None, None
        for n in sorted(legal):
            value = 2 * _success_frac(n, cards) - 1 + values[remaining - n]
            if best_v is None or value > best_v:
                best_n, best_v = n, value
        values[remaining] = best_v
        actions[remaining] = best_n
    return OptimalPolicy(
        actions=actions, values={r: float(v) for r, v in values.items()}
    )


def theory_rows(
    params: GameParams,
    utilities: tuple[UtilitySpec, ...] = (),
    rounding: str = "round",
) -> list[dict[str, float]]:
    """One row per allowed flip count: success probability, expected score
    and spread, and expected utility per requested utility."""
    rows = []
    for n in range(params.min_flips, params.max_flips + 1):
        row: dict[str, float] = {
            "flips": n,
            "success_prob": guess_success_prob(n, params.cards_per_period),
            "expected_score": expected_block_score(n, params),
            "score_sd": block_score_sd(n, params),
        }
        for u in utilities:
            row[f"utility_{u.label}"] = expected_block_utility(n, u, params, rounding)
        rows.append(row)
    return rows

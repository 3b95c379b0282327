"""Card-majority forecasting game: exact theory, equilibrium search, agent
simulations, and a lab session service."""

__version__ = "0.1.0"

from .game import (
    BlockState,
    Color,
    Deck,
    ForecastRecord,
    GameError,
    GameParams,
    IllegalFlipError,
    RewardScheme,
    SequenceError,
    block_payoff,
    legal_flip_choices,
)
from .theory import (
    OptimalPolicy,
    UtilitySpec,
    expected_block_score,
    expected_block_utility,
    guess_success_prob,
    majority_prob,
    optimal_policy,
    stationary_expected_score,
    stationary_flip_sequence,
    stationary_utility,
)

__all__ = [
    "BlockState",
    "Color",
    "Deck",
    "ForecastRecord",
    "GameError",
    "GameParams",
    "IllegalFlipError",
    "RewardScheme",
    "SequenceError",
    "block_payoff",
    "legal_flip_choices",
    "OptimalPolicy",
    "UtilitySpec",
    "expected_block_score",
    "expected_block_utility",
    "guess_success_prob",
    "majority_prob",
    "optimal_policy",
    "stationary_expected_score",
    "stationary_flip_sequence",
    "stationary_utility",
    "__version__",
]

"""Tournament analysis of flat flip strategies by Monte Carlo.

One member deviates from an otherwise-uniform field of stationary players;
payoff matrices over (field, deviation) pairs, best responses, and symmetric
equilibria fall out. Field score draws are shared across deviation columns
(common random numbers), and best-vs-runner-up gaps use paired standard
errors, so argmax calls are as sharp as the simulation budget allows.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .game import GameParams
from .tableio import write_csv
from .theory import UtilitySpec, stationary_flip_sequence

DEFAULT_SIMS = 200_000
SEPARATION_THRESHOLD = 2.0


def stationary_block_scores(
    target: int,
    sims: int,
    rng: np.random.Generator,
    params: GameParams,
) -> np.ndarray:
    """Simulate `sims` full blocks of the stationary-`target` policy at the
    card level and return the integer block scores.

    Cards are i.i.d. fair coins, so the revealed and hidden parts of a deck
    are independent binomials; drawing them that way is distribution-exact
    and avoids per-deck sampling.
    """
    cards = params.cards_per_period
    need = params.majority_count
    scores = np.zeros(sims, dtype=np.int64)
    for flips in stationary_flip_sequence(target, params):
        seen_red = rng.binomial(flips, 0.5, sims)
        hidden_red = rng.binomial(cards - flips, 0.5, sims)
        guess_red = seen_red * 2 > flips
        tied = seen_red * 2 == flips
        if flips % 2 == 0:
            guess_red = np.where(tied, rng.random(sims) < 0.5, guess_red)
        red_major = seen_red + hidden_red >= need
        scores += np.where(guess_red == red_major, 1, -1)
    return scores


def tournament_payoffs(
    scores: np.ndarray,
    rng: np.random.Generator,
    params: GameParams,
) -> np.ndarray:
    """Dollar payoffs for a batch of competitive groups.

    `scores` has one row per group, one column per member. Ranks follow
    score; tied scores split the rank order by a uniform random permutation,
    implemented as sub-integer jitter on the sort key.
    """
    if scores.ndim != 2 or scores.shape[1] != params.group_size:
        raise ValueError(f"scores must have {params.group_size} columns")
    key = -scores.astype(np.float64) + rng.random(scores.shape)
    order = np.argsort(key, axis=1)
    ranks = np.argsort(order, axis=1)  # 0 = best
    rates = np.asarray(params.prize_rates)[ranks]
    return rates * scores


@dataclass(frozen=True)
class DeviationRow:
    """Deviant's expected utility against a field of four at `field_flips`,
    one column per candidate deviation."""

    field_flips: int
    candidates: tuple[int, ...]
    means: tuple[float, ...]
    ses: tuple[float, ...]
    best_flips: int
    runner_up_flips: int
    separation: float  # (best - runner-up) in units of its paired SE
    ambiguous: bool

    @property
    def mean_at_best(self) -> float:
        return self.means[self.candidates.index(self.best_flips)]


def apply_utility(utility: UtilitySpec, money: np.ndarray) -> np.ndarray:
    """Vectorized twin of UtilitySpec.utility for simulation batches."""
    if utility.kind == "risk_neutral":
        return np.asarray(money, dtype=np.float64)
    if utility.kind == "cara":
        a = utility.risk_aversion
        return (1.0 - np.exp(-a * money)) / a
    gain = np.power(np.maximum(money, 0.0), utility.gain_curvature)
    loss = np.power(np.maximum(-money, 0.0), utility.loss_curvature)
    return gain - loss


def _member_rng(seed: int, field_flips: int, tag: int) -> np.random.Generator:
    # Tuple-entropy seeding keys every stream by role, independent of the
    # order streams are consumed in.
    return np.random.default_rng(np.random.SeedSequence((seed, field_flips, tag)))


def deviation_row(
    field_flips: int,
    utility: UtilitySpec,
    sims: int,
    seed: int,
    params: GameParams,
) -> DeviationRow:
    candidates = tuple(range(params.min_flips, params.max_flips + 1))
    field = np.column_stack(
        [
            stationary_block_scores(field_flips, sims, _member_rng(seed, field_flips, j), params)
            for j in range(1, params.group_size)
        ]
    )
    utilities = np.empty((len(candidates), sims))
    for i, dev in enumerate(candidates):
        dev_rng = _member_rng(seed, field_flips, 1000 + dev)
        dev_scores = stationary_block_scores(dev, sims, dev_rng, params)
        group = np.column_stack([dev_scores, field])
        payoffs = tournament_payoffs(group, dev_rng, params)[:, 0]
        utilities[i] = apply_utility(utility, payoffs)

    means = utilities.mean(axis=1)
    ses = utilities.std(axis=1, ddof=1) / np.sqrt(sims)
    ranking = np.argsort(-means, kind="stable")
    best_i, runner_i = int(ranking[0]), int(ranking[1])
    paired = utilities[best_i] - utilities[runner_i]
    paired_se = paired.std(ddof=1) / np.sqrt(sims)
    separation = float(paired.mean() / paired_se) if paired_se > 0 else np.inf
    return DeviationRow(
        field_flips=field_flips,
        candidates=candidates,
        means=tuple(float(m) for m in means),
        ses=tuple(float(s) for s in ses),
        best_flips=candidates[best_i],
        runner_up_flips=candidates[runner_i],
        separation=separation,
        ambiguous=separation < SEPARATION_THRESHOLD,
    )


@dataclass(frozen=True)
class EquilibriumScan:
    """Best-response rows for every field strategy plus the fixed points."""

    utility_label: str
    sims: int
    seed: int
    rows: tuple[DeviationRow, ...]
    fixed_points: tuple[int, ...]

    @property
    def ambiguous_rows(self) -> tuple[int, ...]:
        return tuple(row.field_flips for row in self.rows if row.ambiguous)


def _row_task(args) -> DeviationRow:
    field_flips, utility, sims, seed, params = args
    return deviation_row(field_flips, utility, sims, seed, params)


def scan_equilibria(
    utility: UtilitySpec,
    sims: int = DEFAULT_SIMS,
    seed: int = 0,
    params: GameParams = GameParams(),
    threads: int = 1,
) -> EquilibriumScan:
    """Best response to every uniform field; fixed points are the symmetric
    stationary equilibria under `utility`."""
    if sims < 2:
        raise ValueError("need at least 2 simulations per cell")
    fields = range(params.min_flips, params.max_flips + 1)
    tasks = [(f, utility, sims, seed, params) for f in fields]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = tuple(pool.map(_row_task, tasks))
    else:
        rows = tuple(_row_task(t) for t in tasks)
    fixed = tuple(row.field_flips for row in rows if row.best_flips == row.field_flips)
    return EquilibriumScan(
        utility_label=utility.label,
        sims=sims,
        seed=seed,
        rows=rows,
        fixed_points=fixed,
    )


def noncompetitive_mean_payoff(
    target: int,
    sims: int,
    rng: np.random.Generator,
    params: GameParams,
) -> tuple[float, float]:
    """Simulated mean piece-rate payoff of a stationary policy, with SE."""
    scores = stationary_block_scores(target, sims, rng, params)
    pay = params.piece_rate * scores.astype(np.float64)
    return float(pay.mean()), float(pay.std(ddof=1) / np.sqrt(sims))


def payoff_matrix_rows(scan: EquilibriumScan) -> list[dict]:
    rows = []
    for row in scan.rows:
        for dev, mean, se in zip(row.candidates, row.means, row.ses):
            rows.append(
                {
                    "field_flips": row.field_flips,
                    "deviant_flips": dev,
                    "mean_utility": mean,
                    "se": se,
                }
            )
    return rows


def best_response_rows(scan: EquilibriumScan) -> list[dict]:
    return [
        {
            "field_flips": row.field_flips,
            "best_flips": row.best_flips,
            "runner_up_flips": row.runner_up_flips,
            "mean_at_best": row.mean_at_best,
            "separation": row.separation,
            "ambiguous": row.ambiguous,
        }
        for row in scan.rows
    ]


def equilibria_rows(scan: EquilibriumScan) -> list[dict]:
    return [
        {
            "utility": scan.utility_label,
            "flips": flips,
            "mean_utility": next(
                r.mean_at_best for r in scan.rows if r.field_flips == flips
            ),
            "sims": scan.sims,
            "seed": scan.seed,
        }
        for flips in scan.fixed_points
    ]


def write_scan_csvs(scan: EquilibriumScan, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    written = []
    for name, rows, header in (
        (
            "payoff_matrix.csv",
            payoff_matrix_rows(scan),
            ["field_flips", "deviant_flips", "mean_utility", "se"],
        ),
        (
            "best_response.csv",
            best_response_rows(scan),
            [
                "field_flips",
                "best_flips",
                "runner_up_flips",
                "mean_at_best",
                "separation",
                "ambiguous",
            ],
        ),
        (
            "equilibria.csv",
            equilibria_rows(scan),
            ["utility", "flips", "mean_utility", "sims", "seed"],
        ),
    ):
        path = out / name
        write_csv(path, header, rows)
        written.append(path)
    return written

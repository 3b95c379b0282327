"""Agent-based replication of the lab design plus its derived metrics.

A session is a group of policy-driven agents playing four blocks under one
treatment, with block 1 always paid noncompetitively and feedback delivered
after blocks 1 to 3. Sessions are independent and fully determined by their
seed, so scenario runs parallelize across sessions and aggregate by index.
"""

from __future__ import annotations

import json
import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .behavior import AgentPolicy, PolicyKind
from .game import (
    BlockState,
    ForecastRecord,
    GameParams,
    RewardScheme,
    block_payoff,
)
from .tableio import write_csv
from .theory import _success_frac
from .treatments import (
    TREATMENT_GRID,
    OwnBlockSummary,
    TreatmentConfig,
    build_feedback,
)

log = logging.getLogger(__name__)


def luck(records: tuple[ForecastRecord, ...], score: int, params: GameParams) -> float:
    """Score in excess of what the played flip counts earn in expectation."""
    total = sum(r.flips for r in records)
    if total != params.flips_per_block:
        raise ValueError(f"records cover {total} flips, not a whole block")
    cards = params.cards_per_period
    expected = sum(2 * _success_frac(r.flips, cards) - 1 for r in records)
    return float(score - expected)


def score_sd_from_records(records: tuple[ForecastRecord, ...], params: GameParams) -> float:
    """Standard deviation of the block score implied by the played counts."""
    cards = params.cards_per_period
    var = sum(
        4 * _success_frac(r.flips, cards) * (1 - _success_frac(r.flips, cards))
        for r in records
    )
    return math.sqrt(var)


def relative_distance(scores: tuple[int, ...]) -> tuple[float, ...]:
    """Each member's score position within the group range; 0.5 for everyone
    when the group is tied throughout."""
    top, bottom = max(scores), min(scores)
    if top == bottom:
        return tuple(0.5 for _ in scores)
    return tuple((s - bottom) / (top - bottom) for s in scores)


def _average_ranks(values) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = (i + j) / 2 + 1  # average of 1-based positions
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def spearman(xs, ys) -> float | None:
    """Rank correlation with average ranks on ties; None when either side
    has no variation."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length samples")
    rx, ry = _average_ranks(xs), _average_ranks(ys)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    sx = math.sqrt(sum((r - mx) ** 2 for r in rx))
    sy = math.sqrt(sum((r - my) ** 2 for r in ry))
    if sx == 0 or sy == 0:
        return None
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    return cov / (sx * sy)


def forecast_count_sd(counts) -> float:
    """Population standard deviation of per-member forecast counts."""
    mean = sum(counts) / len(counts)
    return math.sqrt(sum((c - mean) ** 2 for c in counts) / len(counts))


@dataclass(frozen=True)
class GroupMetrics:
    rel_dist: tuple[float, ...]
    spearman_flips_scores: float | None
    forecast_count_sd: float


def group_metrics(scores: tuple[int, ...], forecast_counts: tuple[int, ...]) -> GroupMetrics:
    if len(scores) != len(forecast_counts):
        raise ValueError("scores and forecast counts must align")
    return GroupMetrics(
        rel_dist=relative_distance(scores),
        spearman_flips_scores=spearman(forecast_counts, scores),
        forecast_count_sd=forecast_count_sd(forecast_counts),
    )


@dataclass(frozen=True)
class MemberBlock:
    member_id: int
    policy: str
    records: tuple[ForecastRecord, ...]
    score: int
    forecast_count: int
    average_flips: float
    luck: float
    score_sd: float
    rank: int | None
    payoff: float
    rel_dist: float


@dataclass(frozen=True)
class BlockLog:
    index: int
    scheme: RewardScheme
    members: tuple[MemberBlock, ...]
    metrics: GroupMetrics


@dataclass(frozen=True)
class SessionLog:
    treatment: TreatmentConfig
    session: int | str
    seed: int
    blocks: tuple[BlockLog, ...]
    payment_block: int
    payments: tuple[float, ...]


def rank_members(scores: tuple[int, ...], rng: random.Random) -> tuple[int, ...]:
    """1-based ranks, best score first; tied scores ordered by a uniform
    random permutation."""
    jitter = [rng.random() for _ in scores]
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], jitter[i]))
    ranks = [0] * len(scores)
    for position, i in enumerate(order, start=1):
        ranks[i] = position
    return tuple(ranks)


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1, np.uint64)[0])


def run_session(
    treatment: TreatmentConfig,
    policies: tuple[AgentPolicy, ...],
    seed: int,
    params: GameParams = GameParams(),
    session_label: int | str = 0,
) -> SessionLog:
    if len(policies) != params.group_size:
        raise ValueError(f"need exactly {params.group_size} policies")
    rng = random.Random(_derived_seed(seed))
    blocks: list[BlockLog] = []
    for block_index in range(1, params.blocks + 1):
        scheme = RewardScheme.NONCOMPETITIVE if block_index == 1 else treatment.rewards
        played: list[tuple[BlockState, AgentPolicy]] = []
        for policy in policies:
            state = BlockState(params)
            while not state.complete:
                flips = policy.choose_flips(state.remaining, params)
                reds, greens = state.flip(flips, rng)
                state.forecast(policy.choose_guess(reds, greens, rng, params))
            played.append((state, policy))

        scores = tuple(state.score for state, _ in played)
        counts = tuple(state.forecast_count for state, _ in played)
        if scheme is RewardScheme.COMPETITIVE:
            ranks: tuple[int | None, ...] = rank_members(scores, rng)
        else:
            ranks = tuple(None for _ in scores)
        metrics = group_metrics(scores, counts)
        summaries = tuple(
            OwnBlockSummary(
                member_id=mid,
                score=state.score,
                forecast_count=state.forecast_count,
                average_flips=state.average_flips,
                luck=luck(tuple(state.records), state.score, params),
                score_sd=score_sd_from_records(tuple(state.records), params),
                records=tuple(state.records),
            )
            for mid, (state, _) in enumerate(played, start=1)
        )
        members = tuple(
            MemberBlock(
                member_id=summary.member_id,
                policy=policy.kind.value,
                records=summary.records,
                score=summary.score,
                forecast_count=summary.forecast_count,
                average_flips=summary.average_flips,
                luck=summary.luck,
                score_sd=summary.score_sd,
                rank=rank,
                payoff=block_payoff(summary.score, scheme, params, rank),
                rel_dist=metrics.rel_dist[summary.member_id - 1],
            )
            for summary, rank, (_, policy) in zip(summaries, ranks, played)
        )
        blocks.append(BlockLog(index=block_index, scheme=scheme, members=members, metrics=metrics))

        if block_index < params.blocks:
            for summary, (_, policy) in zip(summaries, played):
                packet = build_feedback(
                    treatment.feedback, block_index, summaries, summary.member_id
                )
                policy.review_feedback(packet, params)

    payment_block = rng.randint(1, params.blocks)
    payments = tuple(m.payoff for m in blocks[payment_block - 1].members)
    return SessionLog(
        treatment=treatment,
        session=session_label,
        seed=seed,
        blocks=tuple(blocks),
        payment_block=payment_block,
        payments=payments,
    )


POLICY_FACTORIES = {
    PolicyKind.STATIONARY: lambda d: AgentPolicy.stationary(int(d["target"])),
    PolicyKind.OPTIMAL: lambda d: AgentPolicy.optimal(),
    PolicyKind.QRE_MATCHER: lambda d: AgentPolicy.qre_matcher(
        float(d.get("precision", 1.4)), int(d.get("target", 10))
    ),
    PolicyKind.IMITATE_MEAN: lambda d: AgentPolicy.imitate_mean(int(d.get("target", 10))),
    PolicyKind.FOLLOW_LEADER: lambda d: AgentPolicy.follow_leader(int(d.get("target", 10))),
    PolicyKind.DISTANCE_RESPONSIVE: lambda d: AgentPolicy.distance_responsive(
        float(d.get("sensitivity", 1.0)), int(d.get("target", 10))
    ),
    PolicyKind.LUCK_RESPONSIVE: lambda d: AgentPolicy.luck_responsive(
        float(d.get("sensitivity", 1.0)), int(d.get("target", 10))
    ),
}


def policy_from_spec(spec: dict) -> AgentPolicy:
    try:
        kind = PolicyKind(spec["kind"])
    except (KeyError, ValueError) as err:
        raise ValueError(f"unknown policy spec: {spec!r}") from err
    try:
        return POLICY_FACTORIES[kind](spec)
    except KeyError as err:
        raise ValueError(f"policy {kind.value!r} is missing field {err}") from None


@dataclass(frozen=True)
class ScenarioConfig:
    treatments: tuple[TreatmentConfig, ...]
    policies: tuple[dict, ...]
    sessions: int
    seed: int

    @classmethod
    def from_json(cls, path: str | Path) -> "ScenarioConfig":
        with open(path) as fh:
            raw = json.load(fh)
        if raw.get("treatments") == "all":
            treatments = TREATMENT_GRID
        else:
            treatments = tuple(
                TreatmentConfig.parse(t["rewards"], t["feedback"]) for t in raw["treatments"]
            )
        policies = tuple(raw["policies"])
        for spec in policies:
            policy_from_spec(spec)  # validate eagerly
        sessions = int(raw.get("sessions", 1))
        if sessions < 1:
            raise ValueError("sessions must be positive")
        return cls(
            treatments=treatments,
            policies=policies,
            sessions=sessions,
            seed=int(raw.get("seed", 0)),
        )


def _session_task(args) -> SessionLog:
    treatment, policy_specs, seed, params, label = args
    policies = tuple(policy_from_spec(s) for s in policy_specs)
    return run_session(treatment, policies, seed, params, session_label=label)


def run_scenario(
    config: ScenarioConfig,
    params: GameParams = GameParams(),
    threads: int = 1,
) -> list[SessionLog]:
    tasks = []
    for t_index, treatment in enumerate(config.treatments):
        for s_index in range(config.sessions):
            seed = _derived_seed(config.seed, t_index, s_index)
            tasks.append((treatment, config.policies, seed, params, s_index))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_session_task, tasks))
    return [_session_task(t) for t in tasks]


FORECAST_COLUMNS = [
    "treatment",
    "session",
    "block",
    "member",
    "period",
    "flips",
    "reds",
    "greens",
    "guess",
    "majority",
    "correct",
]

BLOCK_COLUMNS = [
    "treatment",
    "session",
    "block",
    "scheme",
    "member",
    "policy",
    "forecasts",
    "average_flips",
    "score",
    "luck",
    "rank",
    "payoff",
    "rel_dist",
    "spearman",
    "forecast_count_sd_pop",
    "paid",
]


def forecast_rows(logs: list[SessionLog]) -> list[dict]:
    rows = []
    for session in logs:
        for block in session.blocks:
            for member in block.members:
                for period, record in enumerate(member.records, start=1):
                    rows.append(
                        {
                            "treatment": session.treatment.label,
                            "session": session.session,
                            "block": block.index,
                            "member": member.member_id,
                            "period": period,
                            "flips": record.flips,
                            "reds": record.reds,
                            "greens": record.greens,
                            "guess": record.guess.value,
                            "majority": record.majority.value,
                            "correct": record.correct,
                        }
                    )
    return rows


def block_rows(logs: list[SessionLog]) -> list[dict]:
    rows = []
    for session in logs:
        for block in session.blocks:
            for member in block.members:
                rows.append(
                    {
                        "treatment": session.treatment.label,
                        "session": session.session,
                        "block": block.index,
                        "scheme": block.scheme.value,
                        "member": member.member_id,
                        "policy": member.policy,
                        "forecasts": member.forecast_count,
                        "average_flips": member.average_flips,
                        "score": member.score,
                        "luck": member.luck,
                        "rank": member.rank,
                        "payoff": member.payoff,
                        "rel_dist": member.rel_dist,
                        "spearman": block.metrics.spearman_flips_scores,
                        "forecast_count_sd_pop": block.metrics.forecast_count_sd,
                        "paid": block.index == session.payment_block,
                    }
                )
    return rows


def _population_sd(values) -> float:
    mean = sum(values) / len(values)
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


def summary_grid(logs: list[SessionLog], blocks: int = 4) -> tuple[list[str], list[dict]]:
    """Treatment summary: one column per treatment present in the logs, one
    row per block-level statistic (means and population SDs of forecast
    counts and scores; mean luck for block 1)."""
    by_treatment: dict[str, list[SessionLog]] = {}
    for session in logs:
        by_treatment.setdefault(session.treatment.label, []).append(session)
    labels = [t.label for t in TREATMENT_GRID if t.label in by_treatment]
    missing = [t.label for t in TREATMENT_GRID if t.label not in by_treatment]
    if missing:
        log.warning("summary grid omits empty treatments: %s", ", ".join(missing))

    rows = []
    for block_index in range(1, blocks + 1):
        stats = [
            ("forecast_count/mean", lambda ms: sum(m.forecast_count for m in ms) / len(ms)),
            ("forecast_count/sd_pop", lambda ms: _population_sd([m.forecast_count for m in ms])),
            ("score/mean", lambda ms: sum(m.score for m in ms) / len(ms)),
            ("score/sd_pop", lambda ms: _population_sd([m.score for m in ms])),
        ]
        if block_index == 1:
            stats.append(("luck/mean", lambda ms: sum(m.luck for m in ms) / len(ms)))
        for stat_name, fn in stats:
            row: dict = {"statistic": f"block{block_index}/{stat_name}"}
            for label in labels:
                members = [
                    m
                    for session in by_treatment[label]
                    for block in session.blocks
                    if block.index == block_index
                    for m in block.members
                ]
                row[label] = fn(members)
            rows.append(row)
    return ["statistic"] + labels, rows


def write_scenario_csvs(logs: list[SessionLog], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    paths = []
    for name, header, rows in (
        ("forecasts.csv", FORECAST_COLUMNS, forecast_rows(logs)),
        ("blocks.csv", BLOCK_COLUMNS, block_rows(logs)),
    ):
        path = out / name
        write_csv(path, header, rows)
        paths.append(path)
    header, rows = summary_grid(logs)
    path = out / "summary.csv"
    write_csv(path, header, rows)
    paths.append(path)
    return paths

"""Session runner, group metrics, and scenario plumbing."""

import csv
import json
import logging
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from evidencelab.behavior import AgentPolicy
from evidencelab.game import Color, ForecastRecord, GameParams, RewardScheme
from evidencelab.simlab import (
    BLOCK_COLUMNS,
    FORECAST_COLUMNS,
    ScenarioConfig,
    block_rows,
    forecast_count_sd,
    forecast_rows,
    group_metrics,
    luck,
    policy_from_spec,
    rank_members,
    relative_distance,
    run_scenario,
    run_session,
    score_sd_from_records,
    spearman,
    summary_grid,
    write_scenario_csvs,
)
from evidencelab.theory import block_score_sd, expected_block_score, stationary_score_sd
from evidencelab.treatments import (
    TREATMENT_GRID,
    FeedbackUnavailableError,
    TreatmentConfig,
)

PARAMS = GameParams()


def record(flips: int, correct: bool = True) -> ForecastRecord:
    """A forecast with the given flip count; card counts are placeholders."""
    guess = Color.RED if correct else Color.GREEN
    return ForecastRecord(flips=flips, reds=flips, greens=0, guess=guess, majority=Color.RED)


def stationary_five_group() -> tuple[AgentPolicy, ...]:
    return tuple(AgentPolicy.stationary(5) for _ in range(5))


class TestLuck:
    def test_certain_forecasts_have_no_luck(self):
        # Six all-in flips on a 90-flip budget leave nothing to chance.
        params = GameParams(flips_per_block=90)
        records = tuple(record(15) for _ in range(6))
        assert luck(records, 6, params) == 0.0

    def test_frozen_value_for_minimum_flips(self):
        records = tuple(record(5) for _ in range(20))
        assert luck(records, 12, PARAMS) == pytest.approx(3.708984375, abs=0)
        assert luck(records, 0, PARAMS) == pytest.approx(-8.291015625, abs=0)

    def test_expected_luck_is_zero_by_construction(self):
        records = tuple(record(5) for _ in range(20))
        assert luck(records, 12, PARAMS) + luck(records, 4, PARAMS) == pytest.approx(
            16 - 2 * expected_block_score(5, PARAMS), rel=1e-12
        )

    def test_rejects_partial_blocks(self):
        records = tuple(record(5) for _ in range(19))
        with pytest.raises(ValueError):
            luck(records, 10, PARAMS)


class TestScoreSdFromRecords:
    def test_matches_closed_form_on_uniform_counts(self):
        records = tuple(record(5) for _ in range(20))
        assert score_sd_from_records(records, PARAMS) == pytest.approx(
            block_score_sd(5, PARAMS), rel=1e-12
        )

    def test_mixed_counts_match_the_stationary_shape(self):
        records = tuple(record(15) for _ in range(6)) + (record(10),)
        assert score_sd_from_records(records, PARAMS) == pytest.approx(
            stationary_score_sd(15, PARAMS), rel=1e-12
        )

    def test_certain_forecasts_have_zero_spread(self):
        params = GameParams(flips_per_block=90)
        records = tuple(record(15) for _ in range(6))
        assert score_sd_from_records(records, params) == 0.0


class TestRelativeDistance:
    def test_endpoints_and_midpoint(self):
        assert relative_distance((10, 0, 5, 5, 10)) == (1.0, 0.0, 0.5, 0.5, 1.0)

    def test_tied_group_sits_in_the_middle(self):
        assert relative_distance((4, 4, 4)) == (0.5, 0.5, 0.5)

    @given(st.lists(st.integers(min_value=-30, max_value=30), min_size=2, max_size=5))
    def test_values_span_the_unit_interval(self, scores):
        out = relative_distance(tuple(scores))
        assert all(0.0 <= v <= 1.0 for v in out)
        if max(scores) > min(scores):
            assert max(out) == 1.0 and min(out) == 0.0


class TestSpearman:
    def test_monotone_agreement(self):
        assert spearman((5, 7, 9, 11), (1, 2, 3, 4)) == pytest.approx(1.0)
        assert spearman((5, 7, 9, 11), (4, 3, 2, 1)) == pytest.approx(-1.0)

    def test_tied_ranks_use_averages(self):
        # xs ranks (1, 2.5, 2.5, 4) against a strict order: sqrt(0.9).
        got = spearman((1, 2, 2, 3), (10, 20, 30, 40))
        assert got == pytest.approx(0.9486832980505138, rel=1e-12)

    def test_flat_side_has_no_correlation(self):
        assert spearman((3, 3, 3), (1, 2, 3)) is None
        assert spearman((1, 2, 3), (7, 7, 7)) is None

    def test_rejects_mismatched_or_tiny_samples(self):
        with pytest.raises(ValueError):
            spearman((1, 2), (1, 2, 3))
        with pytest.raises(ValueError):
            spearman((1,), (2,))

    @given(st.lists(st.integers(min_value=0, max_value=9), min_size=3, max_size=6))
    def test_self_correlation_is_one(self, xs):
        got = spearman(tuple(xs), tuple(xs))
        if len(set(xs)) > 1:
            assert got == pytest.approx(1.0)
        else:
            assert got is None

    @given(
        st.lists(st.integers(min_value=0, max_value=9), min_size=3, max_size=6),
        st.lists(st.integers(min_value=0, max_value=9), min_size=3, max_size=6),
    )
    def test_reversing_one_side_flips_the_sign(self, xs, ys):
        n = min(len(xs), len(ys))
        xs, ys = tuple(xs[:n]), tuple(ys[:n])
        direct = spearman(xs, ys)
        if direct is None:
            return
        flipped = spearman(xs, tuple(-y for y in ys))
        assert flipped == pytest.approx(-direct, abs=1e-12)


class TestForecastCountSd:
    def test_examples(self):
        assert forecast_count_sd((20, 20, 20, 20, 20)) == 0.0
        assert forecast_count_sd((10, 20)) == 5.0
        assert forecast_count_sd((7, 7, 10, 10)) == 1.5

    def test_population_not_sample_convention(self):
        counts = (6, 8, 13)
        mean = sum(counts) / 3
        expected = math.sqrt(sum((c - mean) ** 2 for c in counts) / 3)
        assert forecast_count_sd(counts) == pytest.approx(expected, rel=1e-15)


class TestGroupMetrics:
    def test_composes_the_three_statistics(self):
        m = group_metrics((8, 2, 5, 5, 8), (20, 10, 14, 14, 20))
        assert m.rel_dist == relative_distance((8, 2, 5, 5, 8))
        assert m.spearman_flips_scores == spearman((20, 10, 14, 14, 20), (8, 2, 5, 5, 8))
        assert m.forecast_count_sd == forecast_count_sd((20, 10, 14, 14, 20))

    def test_rejects_misaligned_inputs(self):
        with pytest.raises(ValueError):
            group_metrics((1, 2, 3), (1, 2))


class TestRankMembers:
    def test_distinct_scores_rank_deterministically(self):
        ranks = rank_members((3, 9, -2, 6, 0), random.Random(0))
        assert ranks == (3, 1, 5, 2, 4)

    def test_ranks_are_a_permutation(self):
        rng = random.Random(1)
        for _ in range(50):
            scores = tuple(rng.randint(-5, 5) for _ in range(5))
            assert sorted(rank_members(scores, rng)) == [1, 2, 3, 4, 5]

    def test_better_scores_always_rank_ahead(self):
        rng = random.Random(2)
        for _ in range(50):
            scores = tuple(rng.randint(-5, 5) for _ in range(5))
            ranks = rank_members(scores, rng)
            for i in range(5):
                for j in range(5):
                    if scores[i] > scores[j]:
                        assert ranks[i] < ranks[j]

    def test_ties_break_uniformly(self):
        rng = random.Random(3)
        trials = 6000
        first_of_top = 0
        bottom_rank_counts = {3: 0, 4: 0, 5: 0}
        for _ in range(trials):
            ranks = rank_members((3, 3, 1, 1, 1), rng)
            if ranks[0] == 1:
                first_of_top += 1
            bottom_rank_counts[ranks[2]] += 1
        assert abs(first_of_top / trials - 0.5) < 0.03
        for count in bottom_rank_counts.values():
            assert abs(count / trials - 1 / 3) < 0.03


NONCOMP_NONE = TreatmentConfig.parse("noncompetitive", "none")
NONCOMP_STRATEGIES = TreatmentConfig.parse("noncompetitive", "strategies")
COMP_BOTH = TreatmentConfig.parse("competitive", "both")


class TestRunSession:
    def test_policy_count_is_validated(self):
        with pytest.raises(ValueError):
            run_session(NONCOMP_NONE, stationary_five_group()[:4], seed=0)

    def test_first_block_is_always_noncompetitive(self):
        log = run_session(COMP_BOTH, stationary_five_group(), seed=11)
        first, rest = log.blocks[0], log.blocks[1:]
        assert first.scheme is RewardScheme.NONCOMPETITIVE
        assert all(m.rank is None for m in first.members)
        assert all(m.payoff == PARAMS.piece_rate * m.score for m in first.members)
        for block in rest:
            assert block.scheme is RewardScheme.COMPETITIVE
            assert sorted(m.rank for m in block.members) == [1, 2, 3, 4, 5]
            for m in block.members:
                assert m.payoff == PARAMS.prize_rates[m.rank - 1] * m.score

    def test_noncompetitive_session_never_ranks(self):
        log = run_session(NONCOMP_NONE, stationary_five_group(), seed=11)
        for block in log.blocks:
            assert block.scheme is RewardScheme.NONCOMPETITIVE
            assert all(m.rank is None for m in block.members)

    def test_same_seed_reproduces_the_session_bit_for_bit(self):
        a = run_session(COMP_BOTH, stationary_five_group(), seed=21)
        b = run_session(COMP_BOTH, stationary_five_group(), seed=21)
        assert a == b

    def test_different_seeds_differ(self):
        a = run_session(NONCOMP_NONE, stationary_five_group(), seed=1)
        b = run_session(NONCOMP_NONE, stationary_five_group(), seed=2)
        assert a.blocks[0].members[0].records != b.blocks[0].members[0].records

    def test_members_play_whole_blocks(self):
        log = run_session(COMP_BOTH, stationary_five_group(), seed=5)
        for block in log.blocks:
            for m in block.members:
                assert sum(r.flips for r in m.records) == PARAMS.flips_per_block
                assert m.score == sum(r.points for r in m.records)
                assert m.forecast_count == len(m.records)

    def test_reported_statistics_recompute_from_records(self):
        log = run_session(COMP_BOTH, stationary_five_group(), seed=8)
        for block in log.blocks:
            scores = tuple(m.score for m in block.members)
            counts = tuple(m.forecast_count for m in block.members)
            assert block.metrics == group_metrics(scores, counts)
            for i, m in enumerate(block.members):
                assert m.luck == luck(m.records, m.score, PARAMS)
                assert m.score_sd == score_sd_from_records(m.records, PARAMS)
                assert m.rel_dist == block.metrics.rel_dist[i]

    def test_payment_draw_selects_one_block_for_everyone(self):
        log = run_session(COMP_BOTH, stationary_five_group(), seed=13)
        assert 1 <= log.payment_block <= PARAMS.blocks
        chosen = log.blocks[log.payment_block - 1]
        assert log.payments == tuple(m.payoff for m in chosen.members)

    def test_imitator_adopts_the_disclosed_mean(self):
        policies = tuple(AgentPolicy.stationary(5) for _ in range(4)) + (
            AgentPolicy.imitate_mean(15),
        )
        log = run_session(NONCOMP_STRATEGIES, policies, seed=3)
        imitator_first = log.blocks[0].members[4]
        imitator_second = log.blocks[1].members[4]
        # Target 15 spends 100 as six 15s and a forced 10; the peers' 5.00
        # average then pulls the next block down to twenty 5s.
        assert imitator_first.forecast_count == 7
        assert imitator_second.forecast_count == 20
        assert policies[4].target == 5

    def test_adaptive_policy_without_disclosure_fails_loudly(self):
        policies = tuple(AgentPolicy.stationary(5) for _ in range(4)) + (
            AgentPolicy.imitate_mean(15),
        )
        with pytest.raises(FeedbackUnavailableError):
            run_session(NONCOMP_NONE, policies, seed=3)

    def test_mean_scores_and_luck_match_theory(self):
        config = ScenarioConfig(
            treatments=(NONCOMP_NONE,),
            policies=tuple({"kind": "stationary", "target": 5} for _ in range(5)),
            sessions=60,
            seed=123,
        )
        logs = run_scenario(config)
        scores = [m.score for s in logs for b in s.blocks for m in b.members]
        lucks = [m.luck for s in logs for b in s.blocks for m in b.members]
        se = block_score_sd(5, PARAMS) / math.sqrt(len(scores))
        assert len(scores) == 60 * 4 * 5
        assert sum(scores) / len(scores) == pytest.approx(
            expected_block_score(5, PARAMS), abs=3.5 * se
        )
        assert sum(lucks) / len(lucks) == pytest.approx(0.0, abs=3.5 * se)


class TestPolicySpecs:
    def test_round_trips_every_kind(self):
        specs = [
            {"kind": "stationary", "target": 7},
            {"kind": "optimal"},
            {"kind": "qre_matcher", "precision": 2.0, "target": 9},
            {"kind": "imitate_mean", "target": 12},
            {"kind": "follow_leader"},
            {"kind": "distance_responsive", "sensitivity": 2.5},
            {"kind": "luck_responsive", "sensitivity": 0.5, "target": 8},
        ]
        for spec in specs:
            policy = policy_from_spec(spec)
            assert policy.kind.value == spec["kind"]
        assert policy_from_spec({"kind": "stationary", "target": 7}).target == 7
        assert policy_from_spec({"kind": "qre_matcher"}).precision == 1.4

    def test_unknown_or_malformed_specs_rejected(self):
        with pytest.raises(ValueError):
            policy_from_spec({"kind": "zigzag"})
        with pytest.raises(ValueError):
            policy_from_spec({})
        with pytest.raises(ValueError):
            policy_from_spec({"kind": "stationary"})


class TestScenarioConfig:
    def write(self, tmp_path, payload) -> str:
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(payload))
        return str(path)

    def test_explicit_treatments(self, tmp_path):
        path = self.write(
            tmp_path,
            {
                "treatments": [
                    {"rewards": "competitive", "feedback": "both"},
                    {"rewards": "noncompetitive", "feedback": "none"},
                ],
                "policies": [{"kind": "stationary", "target": 5}] * 5,
                "sessions": 3,
                "seed": 9,
            },
        )
        config = ScenarioConfig.from_json(path)
        assert config.treatments == (COMP_BOTH, NONCOMP_NONE)
        assert config.sessions == 3 and config.seed == 9

    def test_all_expands_to_the_grid(self, tmp_path):
        path = self.write(
            tmp_path,
            {"treatments": "all", "policies": [{"kind": "optimal"}] * 5},
        )
        config = ScenarioConfig.from_json(path)
        assert config.treatments == TREATMENT_GRID
        assert config.sessions == 1 and config.seed == 0

    def test_policies_validated_eagerly(self, tmp_path):
        path = self.write(
            tmp_path,
            {"treatments": "all", "policies": [{"kind": "zigzag"}] * 5},
        )
        with pytest.raises(ValueError):
            ScenarioConfig.from_json(path)

    def test_session_count_validated(self, tmp_path):
        path = self.write(
            tmp_path,
            {"treatments": "all", "policies": [{"kind": "optimal"}] * 5, "sessions": 0},
        )
        with pytest.raises(ValueError):
            ScenarioConfig.from_json(path)


def small_config(sessions: int = 2) -> ScenarioConfig:
    return ScenarioConfig(
        treatments=(NONCOMP_NONE, COMP_BOTH),
        policies=tuple({"kind": "stationary", "target": 5} for _ in range(5)),
        sessions=sessions,
        seed=17,
    )


class TestRunScenario:
    def test_orders_sessions_by_treatment_then_index(self):
        logs = run_scenario(small_config())
        assert [(s.treatment.label, s.session) for s in logs] == [
            ("noncompetitive/none", 0),
            ("noncompetitive/none", 1),
            ("competitive/both", 0),
            ("competitive/both", 1),
        ]

    def test_deterministic_and_treatments_independent(self):
        first = run_scenario(small_config())
        second = run_scenario(small_config())
        assert first == second
        # Different treatments draw from different streams even at the same
        # session index.
        assert first[0].blocks[0].members[0].records != first[2].blocks[0].members[0].records

    def test_worker_pool_matches_serial_run(self):
        serial = run_scenario(small_config())
        pooled = run_scenario(small_config(), threads=2)
        assert serial == pooled


class TestEmitters:
    def logs(self):
        return run_scenario(small_config(sessions=1))

    def test_forecast_rows_cover_every_period(self):
        logs = self.logs()
        rows = forecast_rows(logs)
        expected = sum(m.forecast_count for s in logs for b in s.blocks for m in b.members)
        assert len(rows) == expected
        assert all(list(r) == FORECAST_COLUMNS for r in rows)
        assert {r["correct"] for r in rows} == {True, False}

    def test_block_rows_flag_exactly_one_paid_block_per_session(self):
        logs = self.logs()
        rows = block_rows(logs)
        assert len(rows) == len(logs) * 4 * 5
        assert all(list(r) == BLOCK_COLUMNS for r in rows)
        for s in logs:
            paid = [
                r
                for r in rows
                if r["treatment"] == s.treatment.label
                and r["session"] == s.session
                and r["paid"]
            ]
            assert len(paid) == 5
            assert {r["block"] for r in paid} == {s.payment_block}

    def test_csv_files_and_blank_cells(self, tmp_path):
        logs = self.logs()
        paths = write_scenario_csvs(logs, tmp_path)
        assert [p.name for p in paths] == ["forecasts.csv", "blocks.csv", "summary.csv"]
        with open(tmp_path / "blocks.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        noncompetitive = [r for r in rows if r["scheme"] == "noncompetitive"]
        assert noncompetitive and all(r["rank"] == "" for r in noncompetitive)
        # A stationary-5 group always files 20 forecasts, so the rank
        # correlation is undefined and its cell stays empty.
        assert all(r["spearman"] == "" for r in rows)
        assert all(r["forecast_count_sd_pop"] == "0" for r in rows)

    def test_summary_grid_layout(self):
        config = ScenarioConfig(
            treatments=TREATMENT_GRID,
            policies=tuple({"kind": "stationary", "target": 10} for _ in range(5)),
            sessions=1,
            seed=23,
        )
        logs = run_scenario(config)
        header, rows = summary_grid(logs)
        assert header == ["statistic"] + [t.label for t in TREATMENT_GRID]
        names = [r["statistic"] for r in rows]
        assert len(names) == 4 * 4 + 1
        assert names[0] == "block1/forecast_count/mean"
        assert "block1/luck/mean" in names
        assert all(name.startswith("block") for name in names)

    def test_summary_values_recompute(self):
        logs = self.logs()
        _, rows = summary_grid(logs)
        by_name = {r["statistic"]: r for r in rows}
        for s in logs:
            members = s.blocks[0].members
            label = s.treatment.label
            assert by_name["block1/score/mean"][label] == pytest.approx(
                sum(m.score for m in members) / 5, rel=1e-15
            )
            assert by_name["block1/forecast_count/mean"][label] == 20.0

    def test_summary_warns_about_missing_treatments(self, caplog):
        logs = run_scenario(small_config(sessions=1))
        with caplog.at_level(logging.WARNING, logger="evidencelab.simlab"):
            header, _ = summary_grid(logs)
        assert header == ["statistic", "noncompetitive/none", "competitive/both"]
        assert "omits empty treatments" in caplog.text
        assert "competitive/none" in caplog.text


class TestFeedbackExactness:
    def test_disclosed_average_round_trips_through_decimals(self):
        # The on-screen average has two decimals; the imitator's arithmetic
        # must treat those decimals exactly, not their float approximations.
        shown = [14.33, 14.33, 14.33, 14.34]
        mean = sum(Fraction(f"{v:.2f}") for v in shown) / 4
        assert mean == Fraction(5733, 400)
        assert round(mean) == 14

import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from evidencelab.behavior import (
    AgentPolicy,
    ChoiceRecord,
    EstimationError,
    PolicyKind,
    choice_log_likelihood,
    estimate_precision,
    generate_choices,
    logit_response_prob,
    matcher_response_prob,
    read_choices_csv,
    write_choices_csv,
)
from evidencelab.game import Color, GameParams
from evidencelab.theory import majority_prob
from evidencelab.treatments import (
    FeedbackCondition,
    FeedbackUnavailableError,
    OwnBlockSummary,
    build_feedback,
)

PARAMS = GameParams()


def packet_for(condition, member_id=1, scores=(8, 6, 6, 3, -1), avgs=(5.0, 6.0, 7.0, 7.0, 11.6)):
    rows = tuple(
        OwnBlockSummary(
            member_id=i + 1,
            score=scores[i],
            forecast_count=10,
            average_flips=avgs[i],
            luck=1.2,
            score_sd=2.5,
        )
        for i in range(5)
    )
    return build_feedback(condition, 2, rows, member_id)


class TestLogitResponse:
    def test_worked_value(self):
        p = majority_prob(5, 5)
        assert round(logit_response_prob(p, 1.4), 4) == 0.9237

    def test_zero_precision_ignores_evidence(self):
        for p in (0.0, 0.3, 0.5, 0.945):
            assert logit_response_prob(p, 0.0) == 0.5

    def test_high_precision_approaches_certainty(self):
        assert logit_response_prob(0.62, 50.0) > 0.999
        assert logit_response_prob(0.38, 50.0) < 0.001

    def test_symmetry(self):
        for p in (0.1, 0.37, 0.62, 0.9453125):
            total = logit_response_prob(p, 1.4) + logit_response_prob(1 - p, 1.4)
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_uninformative_signal_is_even_odds(self):
        assert logit_response_prob(0.5, 37.0) == 0.5

    def test_rejects_non_finite_precision(self):
        with pytest.raises(ValueError):
            logit_response_prob(0.6, math.inf)


class TestMatcherResponse:
    def test_share(self):
        assert matcher_response_prob(3, 2) == pytest.approx(0.6)
        assert matcher_response_prob(0, 5) == 0.0

    def test_rejects_empty_sample(self):
        with pytest.raises(ValueError):
            matcher_response_prob(0, 0)
        with pytest.raises(ValueError):
            matcher_response_prob(-1, 3)


class TestChoiceRecord:
    def test_validation(self):
        with pytest.raises(ValueError):
            ChoiceRecord(flips=5, reds=3, greens=3, chose_red=True)
        with pytest.raises(ValueError):
            ChoiceRecord(flips=5, reds=-1, greens=6, chose_red=True)

    def test_majority_chance(self):
        rec = ChoiceRecord(flips=5, reds=5, greens=0, chose_red=True)
        assert rec.red_majority_chance() == pytest.approx(0.9453125, abs=0)


class TestLikelihood:
    def test_concave_along_the_bracket(self):
        choices = generate_choices(1.4, 400, random.Random(1))
        xs = [0.0, 5.0, 10.0, 20.0, 50.0]
        for lo, hi in zip(xs, xs[1:]):
            mid = (lo + hi) / 2
            chord = (choice_log_likelihood(choices, lo) + choice_log_likelihood(choices, hi)) / 2
            assert choice_log_likelihood(choices, mid) >= chord

    def test_prefers_the_generating_precision_coarsely(self):
        choices = generate_choices(1.4, 4000, random.Random(2))
        assert choice_log_likelihood(choices, 1.4) > choice_log_likelihood(choices, 0.2)
        assert choice_log_likelihood(choices, 1.4) > choice_log_likelihood(choices, 8.0)


class TestEstimatePrecision:
    def test_recovers_generating_value(self):
        truth = 1.4
        choices = generate_choices(truth, 20_000, random.Random(3))
        est = estimate_precision(choices)
        assert est.std_error < 0.12
        assert abs(est.precision - truth) < 3 * est.std_error
        assert not est.at_boundary
        assert est.choices == 20_000

    def test_deterministic(self):
        choices = generate_choices(2.0, 2000, random.Random(4))
        assert estimate_precision(choices) == estimate_precision(choices)

    def test_near_zero_truth_lands_near_lower_edge(self):
        choices = generate_choices(0.0, 5000, random.Random(5))
        est = estimate_precision(choices)
        assert est.precision < 0.2

    def test_perfect_responder_pins_the_upper_bracket(self):
        choices = []
        for c in generate_choices(1.0, 3000, random.Random(6)):
            p = c.red_majority_chance()
            if p == 0.5:
                continue
            choices.append(
                ChoiceRecord(c.flips, c.reds, c.greens, chose_red=p > 0.5)
            )
        est = estimate_precision(choices)
        assert est.at_boundary
        assert est.precision > 49.9

    def test_empty_data_rejected(self):
        with pytest.raises(EstimationError):
            estimate_precision([])

    def test_uninformative_data_rejected(self):
        ties = [ChoiceRecord(6, 3, 3, bool(i % 2)) for i in range(50)]
        with pytest.raises(EstimationError):
            estimate_precision(ties)

    def test_report_fields(self):
        choices = generate_choices(1.0, 1000, random.Random(7))
        report = estimate_precision(choices).to_json()
        assert report["bracket"] == [0.0, 50.0]
        assert report["tolerance"] == 1e-6
        assert set(report) == {
            "precision",
            "std_error",
            "log_likelihood",
            "choices",
            "at_boundary",
            "bracket",
            "tolerance",
        }


class TestChoicesCsv:
    def test_round_trip(self, tmp_path):
        choices = generate_choices(1.4, 300, random.Random(8))
        path = tmp_path / "choices.csv"
        write_choices_csv(path, choices)
        assert read_choices_csv(path) == choices
        header = path.read_text().splitlines()[0]
        assert header == "n,r,g,chose_red"

    def test_header_is_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("flips,reds,greens,red\n5,3,2,1\n")
        with pytest.raises(ValueError):
            read_choices_csv(path)


class TestGeneratedChoices:
    def test_flip_counts_cover_the_legal_range(self):
        choices = generate_choices(1.4, 3000, random.Random(9))
        seen = {c.flips for c in choices}
        assert seen == set(range(5, 16))
        assert all(c.reds + c.greens == c.flips for c in choices)

    def test_choice_frequency_tracks_the_response_curve(self):
        choices = generate_choices(1.4, 40_000, random.Random(10))
        certain = [c for c in choices if c.red_majority_chance() == pytest.approx(0.9453125)]
        share = sum(c.chose_red for c in certain) / len(certain)
        assert share == pytest.approx(0.9237, abs=3 * (0.9237 * 0.0763 / len(certain)) ** 0.5 + 0.01)


class TestPolicyFlips:
    def test_stationary_uses_target_when_legal(self):
        policy = AgentPolicy.stationary(7)
        assert policy.choose_flips(100, PARAMS) == 7

    @pytest.mark.parametrize(
        "target,remaining,expected",
        [(15, 12, 12), (8, 12, 7), (5, 9, 9), (6, 10, 5), (14, 10, 10)],
    )
    def test_stationary_fallback_is_closest_legal(self, target, remaining, expected):
        policy = AgentPolicy.stationary(target)
        assert policy.choose_flips(remaining, PARAMS) == expected

    def test_optimal_plays_the_dp_action(self):
        policy = AgentPolicy.optimal()
        assert policy.choose_flips(100, PARAMS) == 5
        assert policy.choose_flips(9, PARAMS) == 9
        assert policy.choose_flips(10, PARAMS) == 5


class TestPolicyGuess:
    def test_majority_guess(self):
        policy = AgentPolicy.stationary(5)
        rng = random.Random(11)
        assert policy.choose_guess(4, 1, rng, PARAMS) is Color.RED
        assert policy.choose_guess(1, 4, rng, PARAMS) is Color.GREEN

    def test_tie_breaks_are_fair(self):
        policy = AgentPolicy.stationary(6)
        rng = random.Random(12)
        reds = sum(policy.choose_guess(3, 3, rng, PARAMS) is Color.RED for _ in range(4000))
        assert reds / 4000 == pytest.approx(0.5, abs=0.03)

    def test_qre_matcher_tracks_the_logit_curve(self):
        policy = AgentPolicy.qre_matcher(precision=1.4)
        rng = random.Random(13)
        picks = sum(policy.choose_guess(5, 0, rng, PARAMS) is Color.RED for _ in range(5000))
        assert picks / 5000 == pytest.approx(0.9237, abs=0.02)


class TestPolicyFeedback:
    def test_imitate_mean_rounds_half_to_even(self):
        policy = AgentPolicy.imitate_mean(target=10)
        # Peer averages 6.0, 7.0, 7.0, 5.0 -> mean 6.25 -> 6.
        packet = packet_for(FeedbackCondition.STRATEGIES, member_id=5, avgs=(6.0, 7.0, 7.0, 5.0, 9.0))
        assert policy.review_feedback(packet, PARAMS) == 6
        assert policy.target == 6

    def test_follow_leader_takes_top_scorers_average(self):
        policy = AgentPolicy.follow_leader(target=5)
        packet = packet_for(FeedbackCondition.BOTH, member_id=2)
        # Member 1 leads with score 8 and average 5.0.
        assert policy.review_feedback(packet, PARAMS) == 5
        packet = packet_for(
            FeedbackCondition.BOTH, member_id=2, scores=(4, 6, 6, 3, -1), avgs=(5.0, 11.6, 8.0, 7.0, 9.0)
        )
        # Members 2 and 3 tie at 6; the lower id wins, average 11.6 -> 12.
        assert policy.review_feedback(packet, PARAMS) == 12

    def test_distance_responsive_moves_with_the_gap(self):
        policy = AgentPolicy.distance_responsive(sensitivity=4.0, target=10)
        packet = packet_for(FeedbackCondition.SCORES, member_id=5)  # own score -1, range 8..-1
        assert policy.review_feedback(packet, PARAMS) == 6
        leader = AgentPolicy.distance_responsive(sensitivity=4.0, target=10)
        packet = packet_for(FeedbackCondition.SCORES, member_id=1)  # own score is the max
        assert leader.review_feedback(packet, PARAMS) == 10

    def test_distance_responsive_flat_scores_hold_still(self):
        policy = AgentPolicy.distance_responsive(sensitivity=4.0, target=9)
        packet = packet_for(FeedbackCondition.SCORES, member_id=3, scores=(4, 4, 4, 4, 4))
        assert policy.review_feedback(packet, PARAMS) == 9

    def test_luck_responsive_uses_own_data_only(self):
        policy = AgentPolicy.luck_responsive(sensitivity=5.0, target=10)
        packet = packet_for(FeedbackCondition.NONE, member_id=1)  # luck 1.2, sd 2.5
        assert policy.review_feedback(packet, PARAMS) == round(10 - 5.0 * 1.2 / 2.5)

    def test_targets_clamp_to_the_legal_range(self):
        low = AgentPolicy.distance_responsive(sensitivity=50.0, target=6)
        packet = packet_for(FeedbackCondition.SCORES, member_id=5)
        assert low.review_feedback(packet, PARAMS) == 5
        high = AgentPolicy.follow_leader(target=5)
        packet = packet_for(
            FeedbackCondition.BOTH, member_id=1, scores=(1, 9, 2, 2, 2), avgs=(5.0, 15.0, 5.0, 5.0, 5.0)
        )
        assert high.review_feedback(packet, PARAMS) == 15

    def test_static_policies_ignore_feedback(self):
        for policy in (
            AgentPolicy.stationary(7),
            AgentPolicy.optimal(),
            AgentPolicy.qre_matcher(1.4, target=8),
        ):
            before = policy.target
            packet = packet_for(FeedbackCondition.NONE)
            assert policy.review_feedback(packet, PARAMS) == before

    @pytest.mark.parametrize(
        "kind,condition",
        [
            (PolicyKind.IMITATE_MEAN, FeedbackCondition.NONE),
            (PolicyKind.IMITATE_MEAN, FeedbackCondition.SCORES),
            (PolicyKind.FOLLOW_LEADER, FeedbackCondition.STRATEGIES),
            (PolicyKind.FOLLOW_LEADER, FeedbackCondition.SCORES),
            (PolicyKind.DISTANCE_RESPONSIVE, FeedbackCondition.STRATEGIES),
            (PolicyKind.DISTANCE_RESPONSIVE, FeedbackCondition.NONE),
        ],
    )
    def test_undisclosed_sections_raise(self, kind, condition):
        policy = AgentPolicy(kind=kind, target=10)
        with pytest.raises(FeedbackUnavailableError):
            policy.review_feedback(packet_for(condition), PARAMS)

    @given(st.sampled_from(list(FeedbackCondition)), st.integers(5, 15))
    def test_own_data_policies_never_raise(self, condition, target):
        for policy in (
            AgentPolicy.stationary(target),
            AgentPolicy.optimal(),
            AgentPolicy.qre_matcher(1.4, target=target),
            AgentPolicy.luck_responsive(1.0, target=target),
        ):
            result = policy.review_feedback(packet_for(condition), PARAMS)
            assert PARAMS.min_flips <= result <= PARAMS.max_flips

"""Event-sourced core of the live session service.

The engine is transport-free: it consumes client messages, produces addressed
replies, and appends every message in either direction to an in-memory
transcript. All randomness - decks, member permutations, rank tie-breaks,
urn draws, the payment block - comes from purpose-keyed streams derived from
the master seed, never from arrival timing. Folding the logged client
messages through a fresh engine therefore rebuilds the exact state, which the
replay test checks by hash.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

from ..game import (
    BlockState,
    Color,
    GameParams,
    IllegalFlipError,
    RewardScheme,
    SequenceError,
    block_payoff,
    legal_flip_choices,
)
from ..simlab import (
    BlockLog,
    MemberBlock,
    SessionLog,
    group_metrics,
    luck,
    rank_members,
    score_sd_from_records,
)
from ..treatments import OwnBlockSummary, TreatmentConfig, build_feedback

SERVER = "server"
GUEST = "guest"
ELICITATION_LISTS = ("risk", "ambiguity")

# Envelope keys stamped by the engine; anything a client puts there is noise.
_ENVELOPE = {"session", "actor", "seq", "ts", "to"}

PAYOFF_CHANGE_NOTICE = (
    "From the next block on, your payoff rate depends on your score's rank "
    "within your group."
)


class ServiceError(ValueError):
    """A service call violated its preconditions."""


@dataclass(frozen=True)
class SessionConfig:
    """Everything a session needs up front; the master seed pins all draws.

    The switching lists offer a sure amount of `sure_step_cents * row` against
    a fixed `gamble_cents`-if-correct urn bet, one row per step, so the sure
    amounts are strictly increasing by construction.
    """

    session_id: str
    treatment: TreatmentConfig
    params: GameParams = GameParams()
    groups: int = 1
    master_seed: int = 0
    elicitation_enabled: bool = True
    list_rows: int = 20
    sure_step_cents: int = 10
    gamble_cents: int = 200
    show_up_cents: int = 1000

    def __post_init__(self) -> None:
        if not self.session_id:
            raise ValueError("session_id must be nonempty")
        if self.groups < 1:
            raise ValueError("need at least one group")
        if self.list_rows != 20:
            raise ValueError("the switching lists have exactly 20 rows")
        if self.sure_step_cents <= 0 or self.gamble_cents <= 0:
            raise ValueError("elicitation amounts must be positive")
        if self.show_up_cents < 0:
            raise ValueError("show-up amount cannot be negative")

    @property
    def capacity(self) -> int:
        return self.groups * self.params.group_size

    @property
    def never_switch_row(self) -> int:
        """Row index meaning "always the gamble"; one past the last row."""
        return self.list_rows + 1

    def to_payload(self) -> dict:
        return {
            "session_id": self.session_id,
            "treatment": {
                "rewards": self.treatment.rewards.value,
                "feedback": self.treatment.feedback.value,
            },
            "params": asdict(self.params) | {"prize_rates": list(self.params.prize_rates)},
            "groups": self.groups,
            "master_seed": self.master_seed,
            "elicitation_enabled": self.elicitation_enabled,
            "list_rows": self.list_rows,
            "sure_step_cents": self.sure_step_cents,
            "gamble_cents": self.gamble_cents,
            "show_up_cents": self.show_up_cents,
        }

    @classmethod
    def from_payload(cls, raw: dict) -> "SessionConfig":
        params = dict(raw.get("params", {}))
        if "prize_rates" in params:
            params["prize_rates"] = tuple(params["prize_rates"])
        treatment = raw["treatment"]
        return cls(
            session_id=raw["session_id"],
            treatment=TreatmentConfig.parse(treatment["rewards"], treatment["feedback"]),
            params=GameParams(**params),
            groups=int(raw.get("groups", 1)),
            master_seed=int(raw.get("master_seed", 0)),
            elicitation_enabled=bool(raw.get("elicitation_enabled", True)),
            list_rows=int(raw.get("list_rows", 20)),
            sure_step_cents=int(raw.get("sure_step_cents", 10)),
            gamble_cents=int(raw.get("gamble_cents", 200)),
            show_up_cents=int(raw.get("show_up_cents", 1000)),
        )


@dataclass
class Participant:
    label: str
    token: str
    group: int | None = None  # 1-based once the cohort closes
    member: int | None = None  # 1..group_size after the seeded shuffle
    switch_rows: dict[str, int] = field(default_factory=dict)
    guesses: dict[str, str] = field(default_factory=dict)

    @property
    def elicitation_done(self) -> bool:
        return all(name in self.switch_rows for name in ELICITATION_LISTS)


@dataclass
class Group:
    index: int  # 1-based
    members: dict[int, str]  # member id -> participant label
    block: int = 0  # 0 until opened
    states: dict[int, BlockState] = field(default_factory=dict)
    history: list[dict] = field(default_factory=list)
    acks: set[int] = field(default_factory=set)
    feedback_pending: bool = False
    notice_sent: bool = False
    finished: bool = False


def _cents(rate_dollars: float) -> int:
    return round(rate_dollars * 100)


class SessionEngine:
    """One session's full state machine, fed one message at a time.

    `handle` returns `(recipient, message)` pairs; a None recipient means
    "whoever sent this", which only happens for errors to strangers. The
    caller owns delivery and persistence; `events` is the authoritative
    transcript either way.
    """

    def __init__(self, config: SessionConfig, clock: Callable[[], float] = time.time):
        self.config = config
        self.params = config.params
        self.clock = clock
        self.events: list[dict] = []
        self.participants: dict[str, Participant] = {}
        self.join_order: list[str] = []
        self.groups: list[Group] = []
        self.payment: dict | None = None
        self._by_token: dict[str, Participant] = {}
        self._seq = 0
        self._out: list[tuple[str | None, dict]] = []
        rng = self._rng("tokens")
        self.join_tokens = tuple(
            f"{rng.getrandbits(64):016x}" for _ in range(config.capacity)
        )
        self._log(SERVER, None, "config", {"config": config.to_payload()})

    # ------------------------------------------------------------------ RNG

    def _rng(self, purpose: str, *coords: int) -> random.Random:
        key = ":".join([str(self.config.master_seed), purpose, *map(str, coords)])
        return random.Random(key)

    # ------------------------------------------------------- transcript I/O

    def _log(self, actor: str, to: str | None, mtype: str, fields: dict) -> dict:
        self._seq += 1
        message = {
            "type": mtype,
            "session": self.config.session_id,
            "actor": actor,
            "seq": self._seq,
            **fields,
        }
        self.events.append({**message, "ts": self.clock(), "to": to})
        return message

    def _send(self, to: str | None, mtype: str, **fields) -> None:
        self._out.append((to, self._log(SERVER, to, mtype, fields)))

    def _error(self, to: str | None, code: str, detail: str, **extra) -> None:
        self._send(to, "error", code=code, detail=detail, **extra)

    # ------------------------------------------------------------- dispatch

    def handle(self, actor: str | None, message: dict) -> list[tuple[str | None, dict]]:
        """Apply one client message; returns the addressed replies."""
        self._out = []
        if not isinstance(message, dict):
            self._log(GUEST, SERVER, "bad", {})
            self._error(None, "bad_message", "messages must be JSON objects")
            return self._out
        mtype = message.get("type")
        fields = {k: v for k, v in message.items() if k not in _ENVELOPE and k != "type"}
        if mtype == "join":
            self._join(fields)
            return self._out
        participant = self.participants.get(actor) if actor else None
        self._log(participant.label if participant else GUEST, SERVER, str(mtype), fields)
        if participant is None:
            self._error(None, "unknown_participant", "join with a token first")
        elif mtype == "elicit_submit":
            self._elicit(participant, fields)
        elif mtype == "flip_request":
            self._flip(participant, fields)
        elif mtype == "forecast_submit":
            self._forecast(participant, fields)
        elif mtype == "block_ack":
            self._ack(participant, fields)
        else:
            self._error(participant.label, "bad_message", f"unknown message type {mtype!r}")
        return self._out

    # ----------------------------------------------------------------- join

    def _join(self, fields: dict) -> None:
        token = fields.get("token")
        if token is None:
            unused = [t for t in self.join_tokens if t not in self._by_token]
            if not unused:
                self._log(GUEST, SERVER, "join", fields)
                self._error(None, "waitlist_rejected", "session is at capacity")
                return
            token = unused[0]
        if token not in self.join_tokens:
            self._log(GUEST, SERVER, "join", fields)
            self._error(None, "unknown_token", "token does not belong to this session")
            return
        participant = self._by_token.get(token)
        if participant is not None:
            self._log(participant.label, SERVER, "join", {"token": token})
            self._resume(participant)
            return
        label = f"p{len(self.join_order) + 1}"
        participant = Participant(label=label, token=token)
        self.participants[label] = participant
        self._by_token[token] = participant
        self.join_order.append(label)
        self._log(label, SERVER, "join", {"token": token})
        size = self.params.group_size
        if len(self.join_order) % size == 0:
            self._form_group(self.join_order[-size:])
        else:
            self._send_config(participant)

    def _form_group(self, cohort: list[str]) -> None:
        group = Group(index=len(self.groups) + 1, members={})
        shuffled = list(cohort)
        self._rng("grouping", group.index).shuffle(shuffled)
        for member_id, label in enumerate(shuffled, start=1):
            self.participants[label].group = group.index
            self.participants[label].member = member_id
            group.members[member_id] = label
        self.groups.append(group)
        if not self._maybe_open_block(group):
            for label in cohort:
                self._send_config(self.participants[label])

    def _resume(self, participant: Participant) -> None:
        """Replay the participant's current view after a reconnect."""
        self._send_config(participant)
        group = self._group_of(participant)
        if group is None:
            return
        if self.payment is not None:
            self._send(participant.label, "payment_statement",
                       **self.payment["statements"][participant.label])
            return
        if group.feedback_pending and participant.member not in group.acks:
            self._send_feedback(group, participant.member)
            return
        if group.block and not group.finished:
            state = group.states[participant.member]
            if state.awaiting_forecast:
                reds, greens = state.deck.revealed_counts()
                self._send(
                    participant.label,
                    "flip_result",
                    block=group.block,
                    period=state.forecast_count + 1,
                    flips=len(state.deck.revealed),
                    reds=reds,
                    greens=greens,
                    remaining=state.remaining,
                    score=state.score,
                )

    # ---------------------------------------------------------- elicitation

    def _elicit(self, participant: Participant, fields: dict) -> None:
        if not self.config.elicitation_enabled:
            self._error(participant.label, "out_of_order", "elicitation is disabled")
            return
        if self.payment is not None:
            self._error(participant.label, "out_of_order", "session is already resolved")
            return
        name = fields.get("list")
        row = fields.get("switch_row")
        guess = fields.get("guess")
        if name not in ELICITATION_LISTS:
            self._error(participant.label, "bad_message",
                        f"list must be one of {ELICITATION_LISTS}")
            return
        if not isinstance(row, int) or not 1 <= row <= self.config.never_switch_row:
            self._error(participant.label, "bad_message",
                        f"switch_row must be in 1..{self.config.never_switch_row}")
            return
        if guess not in (Color.RED.value, Color.GREEN.value):
            self._error(participant.label, "bad_message", "guess must be red or green")
            return
        if name in participant.switch_rows:
            self._error(participant.label, "resubmission", f"{name} list already submitted")
            return
        participant.switch_rows[name] = row
        participant.guesses[name] = guess
        group = self._group_of(participant)
        if group is None or not self._maybe_open_block(group):
            self._send_config(participant)

    # ------------------------------------------------------------- gameplay

    def _playable(self, participant: Participant) -> BlockState | None:
        group = self._group_of(participant)
        if (
            group is None
            or group.block == 0
            or group.feedback_pending
            or group.finished
            or self.payment is not None
        ):
            self._error(participant.label, "out_of_order", "no block is open for play")
            return None
        state = group.states[participant.member]
        if state.complete:
            self._error(participant.label, "out_of_order",
                        "block budget spent; waiting for the group")
            return None
        return state

    def _flip(self, participant: Participant, fields: dict) -> None:
        state = self._playable(participant)
        if state is None:
            return
        if state.awaiting_forecast:
            self._error(participant.label, "out_of_order",
                        "forecast the current period before flipping again")
            return
        flips = fields.get("flips")
        if not isinstance(flips, int):
            self._error(participant.label, "bad_message", "flips must be an integer")
            return
        group = self._group_of(participant)
        period = state.forecast_count + 1
        rng = self._rng("deck", group.index, participant.member, group.block, period)
        try:
            reds, greens = state.flip(flips, rng)
        except IllegalFlipError as err:
            self._error(participant.label, "illegal_flip", str(err),
                        legal=sorted(err.legal))
            return
        self._send(
            participant.label,
            "flip_result",
            block=group.block,
            period=period,
            flips=flips,
            reds=reds,
            greens=greens,
            remaining=state.remaining,
            score=state.score,
        )

    def _forecast(self, participant: Participant, fields: dict) -> None:
        state = self._playable(participant)
        if state is None:
            return
        if not state.awaiting_forecast:
            self._error(participant.label, "out_of_order", "flip cards before forecasting")
            return
        guess = fields.get("guess")
        if guess not in (Color.RED.value, Color.GREEN.value):
            self._error(participant.label, "bad_message", "guess must be red or green")
            return
        group = self._group_of(participant)
        deck_colors = [c.value for c in state.deck.colors]
        try:
            record = state.forecast(Color(guess))
        except SequenceError as err:  # unreachable behind the gate above
            self._error(participant.label, "out_of_order", str(err))
            return
        self._send(
            participant.label,
            "forecast_result",
            block=group.block,
            period=state.forecast_count,
            flips=record.flips,
            reds=record.reds,
            greens=record.greens,
            guess=record.guess.value,
            majority=record.majority.value,
            correct=record.correct,
            points=record.points,
            score=state.score,
            remaining=state.remaining,
            deck=deck_colors,
            legal_flips=(
                [] if state.complete
                else sorted(legal_flip_choices(state.remaining, self.params))
            ),
        )
        if state.complete and all(s.complete for s in group.states.values()):
            self._end_block(group)

    # ------------------------------------------------------------ block end

    def _end_block(self, group: Group) -> None:
        block = group.block
        summaries = {
            member: OwnBlockSummary(
                member_id=member,
                score=state.score,
                forecast_count=state.forecast_count,
                average_flips=state.average_flips,
                luck=luck(tuple(state.records), state.score, self.params),
                score_sd=score_sd_from_records(tuple(state.records), self.params),
                records=tuple(state.records),
            )
            for member, state in sorted(group.states.items())
        }
        scheme = (
            RewardScheme.NONCOMPETITIVE if block == 1 else self.config.treatment.rewards
        )
        ranks: dict[int, int] | None = None
        if scheme is RewardScheme.COMPETITIVE:
            ordered = sorted(summaries)
            scores = tuple(summaries[m].score for m in ordered)
            assigned = rank_members(scores, self._rng("ranks", group.index, block))
            ranks = dict(zip(ordered, assigned))
        group.history.append(
            {"block": block, "scheme": scheme, "summaries": summaries, "ranks": ranks}
        )
        if block < self.params.blocks:
            group.feedback_pending = True
            group.acks = set()
            for member in sorted(group.members):
                self._send_feedback(group, member)
            if self.config.treatment.rewards is RewardScheme.COMPETITIVE:
                group.notice_sent = True
        else:
            group.finished = True
            if all(g.finished for g in self.groups) and len(self.groups) == self.config.groups:
                self._resolve()
            else:
                for member in sorted(group.members):
                    self._send_config(self.participants[group.members[member]])

    def _send_feedback(self, group: Group, member: int) -> None:
        entry = group.history[-1]
        packet = build_feedback(
            self.config.treatment.feedback,
            entry["block"],
            tuple(entry["summaries"][m] for m in sorted(entry["summaries"])),
            member,
        )
        fields: dict = {"block": entry["block"], "feedback": packet.to_payload()}
        if (
            self.config.treatment.rewards is RewardScheme.COMPETITIVE
            and entry["block"] == 1
        ):
            fields["payoff_change_notice"] = PAYOFF_CHANGE_NOTICE
        self._send(group.members[member], "block_feedback", **fields)

    def _ack(self, participant: Participant, fields: dict) -> None:
        group = self._group_of(participant)
        if group is None or not group.feedback_pending:
            self._error(participant.label, "out_of_order", "no feedback awaits acknowledgment")
            return
        current = group.history[-1]["block"]
        if fields.get("block") != current:
            self._error(participant.label, "out_of_order",
                        f"acknowledgment must name block {current}")
            return
        if participant.member in group.acks:
            self._error(participant.label, "out_of_order", "already acknowledged")
            return
        group.acks.add(participant.member)
        if len(group.acks) == self.params.group_size:
            group.feedback_pending = False
            group.block += 1
            group.states = {
                member: BlockState(self.params) for member in group.members
            }
            for member in sorted(group.members):
                self._send_config(self.participants[group.members[member]])

    # -------------------------------------------------------------- payment

    def resolve_payment(self) -> list[tuple[str | None, dict]]:
        """Draw the paid block, settle the lists, and send every statement.

        Normally triggered by the last forecast of the last group; the
        explicit entry point serves replays and administrative retries.
        """
        if self.payment is not None:
            raise ServiceError("payment is already resolved")
        if not self.groups or not all(g.finished for g in self.groups):
            raise ServiceError("not every group has finished all blocks")
        self._out = []
        self._resolve()
        return self._out

    def _resolve(self) -> None:
        paid_block = self._rng("payment").randint(1, self.params.blocks)
        statements: dict[str, dict] = {}
        for group in self.groups:
            entry = group.history[paid_block - 1]
            for member in sorted(group.members):
                label = group.members[member]
                participant = self.participants[label]
                elicitation = None
                elicitation_cents = 0
                if self.config.elicitation_enabled:
                    elicitation = self._settle_lists(group.index, participant)
                    elicitation_cents = sum(
                        part["cents"] for part in elicitation["lists"].values()
                    )
                score = entry["summaries"][member].score
                if entry["scheme"] is RewardScheme.NONCOMPETITIVE:
                    rank = None
                    rate_cents = _cents(self.params.piece_rate)
                else:
                    rank = entry["ranks"][member]
                    rate_cents = _cents(self.params.prize_rates[rank - 1])
                block_cents = rate_cents * score
                total = self.config.show_up_cents + elicitation_cents + block_cents
                statements[label] = {
                    "group": group.index,
                    "member": member,
                    "show_up_cents": self.config.show_up_cents,
                    "elicitation": elicitation,
                    "paid_block": paid_block,
                    "block": {
                        "scheme": entry["scheme"].value,
                        "score": score,
                        "rank": rank,
                        "rate_cents": rate_cents,
                        "cents": block_cents,
                    },
                    "total_cents": total,
                    "total_display": _display(total),
                }
        self.payment = {"block": paid_block, "statements": statements}
        for group in self.groups:
            for member in sorted(group.members):
                label = group.members[member]
                self._send(label, "payment_statement", **statements[label])

    def _settle_lists(self, group_index: int, participant: Participant) -> dict:
        """Draw one row per list and play the participant's preference there."""
        rng = self._rng("elicitation", group_index, participant.member)
        config = self.config
        lists: dict[str, dict] = {}
        for name in ELICITATION_LISTS:
            row = rng.randint(1, config.list_rows)
            switch = participant.switch_rows[name]
            if row >= switch:
                lists[name] = {
                    "row": row,
                    "choice": "sure",
                    "cents": row * config.sure_step_cents,
                }
            else:
                detail: dict = {"row": row, "choice": "gamble"}
                if name == "risk":
                    red = rng.random() < 0.5
                else:
                    urn_reds = rng.randint(0, 20)
                    detail["urn_reds"] = urn_reds
                    red = rng.random() < urn_reds / 20
                ball = Color.RED.value if red else Color.GREEN.value
                detail["ball"] = ball
                detail["cents"] = (
                    config.gamble_cents if ball == participant.guesses[name] else 0
                )
                lists[name] = detail
        safe_risk = config.never_switch_row - participant.switch_rows["risk"]
        safe_ambiguity = config.never_switch_row - participant.switch_rows["ambiguity"]
        return {
            "lists": lists,
            "ra": safe_risk,
            "aa": safe_ambiguity - safe_risk,
        }

    # ----------------------------------------------------------- self views

    def label_for(self, token: str | None) -> str | None:
        """The participant label a token is bound to, if any."""
        if token is None:
            return None
        participant = self._by_token.get(token)
        return participant.label if participant else None

    def _group_of(self, participant: Participant) -> Group | None:
        if participant.group is None:
            return None
        return self.groups[participant.group - 1]

    def _send_config(self, participant: Participant) -> None:
        self._send(participant.label, "config", **self._view(participant))

    def _view(self, participant: Participant) -> dict:
        config = self.config
        view: dict = {
            "participant": participant.label,
            "token": participant.token,
            "treatment": {
                "rewards": config.treatment.rewards.value,
                "feedback": config.treatment.feedback.value,
            },
            "params": {
                "cards_per_period": self.params.cards_per_period,
                "flips_per_block": self.params.flips_per_block,
                "min_flips": self.params.min_flips,
                "max_flips": self.params.max_flips,
                "blocks": self.params.blocks,
                "group_size": self.params.group_size,
                "piece_rate_cents": _cents(self.params.piece_rate),
                "prize_rates_cents": [_cents(r) for r in self.params.prize_rates],
            },
            "elicitation": {
                "enabled": config.elicitation_enabled,
                "rows": config.list_rows,
                "sure_step_cents": config.sure_step_cents,
                "gamble_cents": config.gamble_cents,
                "submitted": sorted(participant.switch_rows),
            },
            "group": participant.group,
            "member": participant.member,
        }
        group = self._group_of(participant)
        if group is None:
            view["phase"] = "lobby"
        elif self.payment is not None:
            view["phase"] = "paid"
        elif group.finished:
            view["phase"] = "waiting"
        elif group.block == 0:
            view["phase"] = "elicitation"
        elif group.feedback_pending:
            view["phase"] = "feedback"
            view["block"] = group.history[-1]["block"]
        else:
            state = group.states[participant.member]
            view["phase"] = "block"
            view["block"] = group.block
            view["remaining"] = state.remaining
            view["score"] = state.score
            view["forecasts"] = state.forecast_count
            view["awaiting_forecast"] = state.awaiting_forecast
            view["legal_flips"] = (
                sorted(legal_flip_choices(state.remaining, self.params))
                if not state.awaiting_forecast and not state.complete
                else []
            )
        return view

    def _maybe_open_block(self, group: Group) -> bool:
        """Open block 1 once the group exists and Part 1 is out of the way."""
        if group.block != 0:
            return False
        if self.config.elicitation_enabled and not all(
            self.participants[label].elicitation_done for label in group.members.values()
        ):
            return False
        group.block = 1
        group.states = {member: BlockState(self.params) for member in group.members}
        for member in sorted(group.members):
            self._send_config(self.participants[group.members[member]])
        return True

    # ------------------------------------------------------ state & exports

    def status(self) -> dict:
        return {
            "session": self.config.session_id,
            "treatment": self.config.treatment.label,
            "capacity": self.config.capacity,
            "joined": len(self.join_order),
            "groups": [
                {
                    "index": g.index,
                    "block": g.block,
                    "finished": g.finished,
                    "remaining": [g.states[m].remaining for m in sorted(g.states)],
                }
                for g in self.groups
            ],
            "resolved": self.payment is not None,
            "events": self._seq,
        }

    def snapshot(self) -> dict:
        """Canonical state for hashing; wall-clock timestamps stay out."""

        def state_dict(state: BlockState) -> dict:
            out: dict = {
                "remaining": state.remaining,
                "score": state.score,
                "records": [
                    [r.flips, r.reds, r.greens, r.guess.value, r.majority.value]
                    for r in state.records
                ],
            }
            if state.awaiting_forecast:
                out["deck"] = [c.value for c in state.deck.colors]
                out["revealed"] = list(state.deck.revealed)
            return out

        return {
            "config": self.config.to_payload(),
            "seq": self._seq,
            "participants": [
                {
                    "label": p.label,
                    "token": p.token,
                    "group": p.group,
                    "member": p.member,
                    "switch_rows": p.switch_rows,
                    "guesses": p.guesses,
                }
                for p in (self.participants[label] for label in self.join_order)
            ],
            "groups": [
                {
                    "index": g.index,
                    "members": {str(m): g.members[m] for m in sorted(g.members)},
                    "block": g.block,
                    "feedback_pending": g.feedback_pending,
                    "notice_sent": g.notice_sent,
                    "finished": g.finished,
                    "acks": sorted(g.acks),
                    "states": {str(m): state_dict(g.states[m]) for m in sorted(g.states)},
                    "history": [
                        {
                            "block": entry["block"],
                            "scheme": entry["scheme"].value,
                            "ranks": (
                                {str(m): entry["ranks"][m] for m in sorted(entry["ranks"])}
                                if entry["ranks"] is not None
                                else None
                            ),
                            "summaries": {
                                str(m): {
                                    "score": s.score,
                                    "forecast_count": s.forecast_count,
                                    "average_flips": s.average_flips,
                                    "luck": s.luck,
                                    "score_sd": s.score_sd,
                                }
                                for m, s in sorted(entry["summaries"].items())
                            },
                        }
                        for entry in g.history
                    ],
                }
                for g in self.groups
            ],
            "payment": self.payment,
        }

    def state_hash(self) -> str:
        canonical = json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    @classmethod
    def replay(
        cls, events: Iterable[dict], clock: Callable[[], float] = time.time
    ) -> "SessionEngine":
        """Fold a logged transcript's client messages through a fresh engine.

        The first event must be the creation config; server events are
        skipped because the fold regenerates them.
        """
        rows = list(events)
        if not rows or rows[0].get("type") != "config":
            raise ServiceError("transcript must start with the config event")
        engine = cls(SessionConfig.from_payload(rows[0]["config"]), clock=clock)
        for row in rows[1:]:
            if row.get("actor") == SERVER:
                continue
            message = {
                k: v for k, v in row.items() if k not in ("ts", "to", "seq", "session", "actor")
            }
            actor = row.get("actor")
            if message.get("type") == "join" or actor == GUEST:
                engine.handle(None, message)
            else:
                engine.handle(actor, message)
        return engine

    def session_logs(self) -> list[SessionLog]:
        """Completed blocks in the exact shape of the simulation exporters."""
        logs = []
        for group in self.groups:
            blocks = []
            for entry in group.history:
                ordered = sorted(entry["summaries"])
                scores = tuple(entry["summaries"][m].score for m in ordered)
                counts = tuple(entry["summaries"][m].forecast_count for m in ordered)
                metrics = group_metrics(scores, counts)
                members = tuple(
                    MemberBlock(
                        member_id=m,
                        policy="human",
                        records=entry["summaries"][m].records,
                        score=entry["summaries"][m].score,
                        forecast_count=entry["summaries"][m].forecast_count,
                        average_flips=entry["summaries"][m].average_flips,
                        luck=entry["summaries"][m].luck,
                        score_sd=entry["summaries"][m].score_sd,
                        rank=entry["ranks"][m] if entry["ranks"] is not None else None,
                        payoff=block_payoff(
                            entry["summaries"][m].score,
                            entry["scheme"],
                            self.params,
                            entry["ranks"][m] if entry["ranks"] is not None else None,
                        ),
                        rel_dist=metrics.rel_dist[i],
                    )
                    for i, m in enumerate(ordered)
                )
                blocks.append(
                    BlockLog(
                        index=entry["block"],
                        scheme=entry["scheme"],
                        members=members,
                        metrics=metrics,
                    )
                )
            paid = self.payment["block"] if self.payment is not None else 0
            payments = ()
            if self.payment is not None and len(blocks) >= paid:
                payments = tuple(m.payoff for m in blocks[paid - 1].members)
            logs.append(
                SessionLog(
                    treatment=self.config.treatment,
                    session=f"{self.config.session_id}:{group.index}",
                    seed=self.config.master_seed,
                    blocks=tuple(blocks),
                    payment_block=paid,
                    payments=payments,
                )
            )
        return logs


def _display(cents: int) -> str:
    sign = "-" if cents < 0 else ""
    return f"{sign}${abs(cents) / 100:.2f}"

// Pure view state folded from server messages. Every number on screen is
// copied from a payload; the reducer holds no randomness and no rules of its
// own, so replaying a transcript rebuilds the exact same view.

import type {
  CardColor,
  ConfigMessage,
  FeedbackPayload,
  ForecastResultMessage,
  ParamsInfo,
  PaymentStatementMessage,
  Phase,
  ServerMessage,
  TreatmentInfo,
} from "./protocol.js";

export interface CardView {
  faceUp: boolean;
  color?: CardColor;
}

export interface ResultBanner {
  guess: CardColor;
  majority: CardColor;
  correct: boolean;
  points: number;
}

export interface ViewState {
  phase: Phase | "connecting";
  participant?: string;
  token?: string;
  group: number | null;
  member: number | null;
  treatment?: TreatmentInfo;
  params?: ParamsInfo;
  elicitationSubmitted: string[];
  elicitationEnabled: boolean;
  block?: number;
  remaining?: number;
  score?: number;
  forecasts?: number;
  awaitingForecast: boolean;
  legalFlips: number[];
  cards: CardView[];
  banner?: ResultBanner;
  feedback?: FeedbackPayload;
  payoffNotice?: string;
  statement?: PaymentStatementMessage;
  errors: string[];
}

export function initialView(): ViewState {
  return {
    phase: "connecting",
    group: null,
    member: null,
    elicitationSubmitted: [],
    elicitationEnabled: false,
    awaitingForecast: false,
    legalFlips: [],
    cards: [],
    errors: [],
  };
}

function hiddenCards(params: ParamsInfo | undefined): CardView[] {
  const count = params?.cards_per_period ?? 0;
  return Array.from({ length: count }, () => ({ faceUp: false }));
}

// Counts arrive without positions; show the revealed reds then greens, rest
// face down. Positions carry no information in this game.
function revealedCards(params: ParamsInfo, reds: number, greens: number): CardView[] {
  const cards: CardView[] = [];
  for (let i = 0; i < reds; i++) cards.push({ faceUp: true, color: "red" });
  for (let i = 0; i < greens; i++) cards.push({ faceUp: true, color: "green" });
  while (cards.length < params.cards_per_period) cards.push({ faceUp: false });
  return cards;
}

function applyConfig(view: ViewState, message: ConfigMessage): ViewState {
  const next: ViewState = {
    ...view,
    phase: message.phase,
    participant: message.participant,
    token: message.token,
    group: message.group,
    member: message.member,
    treatment: message.treatment,
    params: message.params,
    elicitationEnabled: message.elicitation.enabled,
    elicitationSubmitted: message.elicitation.submitted,
    block: message.block,
    remaining: message.remaining,
    score: message.score,
    forecasts: message.forecasts,
    awaitingForecast: message.awaiting_forecast ?? false,
    legalFlips: message.legal_flips ?? [],
  };
  if (message.phase === "block") {
    next.cards = hiddenCards(message.params);
    next.banner = undefined;
    if (view.phase !== "block") {
      next.feedback = undefined;
    }
  }
  return next;
}

function applyForecast(view: ViewState, message: ForecastResultMessage): ViewState {
  return {
    ...view,
    cards: message.deck.map((color) => ({ faceUp: true, color })),
    banner: {
      guess: message.guess,
      majority: message.majority,
      correct: message.correct,
      points: message.points,
    },
    score: message.score,
    remaining: message.remaining,
    forecasts: message.period,
    awaitingForecast: false,
    legalFlips: message.legal_flips,
  };
}

export function reduce(view: ViewState, message: ServerMessage): ViewState {
  switch (message.type) {
    case "config":
      return applyConfig(view, message);
    case "flip_result":
      return {
        ...view,
        cards: view.params
          ? revealedCards(view.params, message.reds, message.greens)
          : view.cards,
        remaining: message.remaining,
        score: message.score,
        banner: undefined,
        awaitingForecast: true,
        legalFlips: [],
      };
    case "forecast_result":
      return applyForecast(view, message);
    case "block_feedback":
      return {
        ...view,
        phase: "feedback",
        block: message.block,
        feedback: message.feedback,
        payoffNotice: message.payoff_change_notice ?? view.payoffNotice,
        legalFlips: [],
      };
    case "payment_statement":
      return { ...view, phase: "paid", statement: message, legalFlips: [] };
    case "error": {
      let text = `${message.code}: ${message.detail}`;
      if (message.legal) {
        text += ` (legal choices: ${message.legal.join(", ")})`;
      }
      return { ...view, errors: [...view.errors, text] };
    }
  }
}

// The selector renders exactly the server-sent legal set.
export function selectorChoices(view: ViewState): number[] {
  return view.awaitingForecast || view.phase !== "block" ? [] : view.legalFlips;
}

export interface FeedbackCell {
  label: string;
  values: string[];
}

// Feedback table in display order: one column per member, own column
// labelled "You". Undisclosed rows are absent, never blank.
export function feedbackTable(feedback: FeedbackPayload): FeedbackCell[] {
  if (!feedback.members) {
    return [];
  }
  const header = feedback.members.map((m) => (m.you ? "You" : `Member ${m.member}`));
  const rows: FeedbackCell[] = [{ label: "Group member", values: header }];
  if (feedback.members.every((m) => m.average_flips !== undefined)) {
    rows.push({
      label: "Average cards turned per forecast",
      values: feedback.members.map((m) => m.average_flips!.toFixed(2)),
    });
  }
  if (feedback.members.every((m) => m.score !== undefined)) {
    rows.push({
      label: "Score",
      values: feedback.members.map((m) => String(m.score)),
    });
  }
  return rows;
}

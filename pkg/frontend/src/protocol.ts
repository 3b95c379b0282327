// Wire types for the session service. The server is authoritative: every
// field here is produced server-side and the client renders it verbatim.

export type CardColor = "red" | "green";

export interface Envelope {
  session: string;
  actor: string;
  seq: number;
  ts: number;
}

export interface TreatmentInfo {
  rewards: "noncompetitive" | "competitive";
  feedback: "none" | "strategies" | "scores" | "both";
}

export interface ParamsInfo {
  cards_per_period: number;
  flips_per_block: number;
  min_flips: number;
  max_flips: number;
  blocks: number;
  group_size: number;
  piece_rate_cents: number;
  prize_rates_cents: number[];
}

export interface ElicitationInfo {
  enabled: boolean;
  rows: number;
  sure_step_cents: number;
  gamble_cents: number;
  submitted: string[];
}

export type Phase =
  | "lobby"
  | "elicitation"
  | "block"
  | "feedback"
  | "waiting"
  | "paid";

export interface ConfigMessage extends Envelope {
  type: "config";
  participant: string;
  token: string;
  treatment: TreatmentInfo;
  params: ParamsInfo;
  elicitation: ElicitationInfo;
  group: number | null;
  member: number | null;
  phase: Phase;
  block?: number;
  remaining?: number;
  score?: number;
  forecasts?: number;
  awaiting_forecast?: boolean;
  legal_flips?: number[];
}

export interface FlipResultMessage extends Envelope {
  type: "flip_result";
  block: number;
  period: number;
  flips: number;
  reds: number;
  greens: number;
  remaining: number;
  score: number;
}

export interface ForecastResultMessage extends Envelope {
  type: "forecast_result";
  block: number;
  period: number;
  flips: number;
  reds: number;
  greens: number;
  guess: CardColor;
  majority: CardColor;
  correct: boolean;
  points: number;
  score: number;
  remaining: number;
  deck: CardColor[];
  legal_flips: number[];
}

export interface ForecastRow {
  flips: number;
  reds: number;
  greens: number;
  guess: CardColor;
  majority: CardColor;
  correct: boolean;
}

export interface OwnSummary {
  score: number;
  forecast_count: number;
  average_flips: number;
  forecasts: ForecastRow[];
}

export interface MemberRow {
  member: number;
  you: boolean;
  average_flips?: number;
  score?: number;
}

export interface FeedbackPayload {
  block: number;
  condition: TreatmentInfo["feedback"];
  own: OwnSummary;
  members?: MemberRow[];
}

export interface BlockFeedbackMessage extends Envelope {
  type: "block_feedback";
  block: number;
  feedback: FeedbackPayload;
  payoff_change_notice?: string;
}

export interface ListSettlement {
  row: number;
  choice: "sure" | "gamble";
  cents: number;
  ball?: CardColor;
  urn_reds?: number;
}

export interface ElicitationSettlement {
  lists: { risk: ListSettlement; ambiguity: ListSettlement };
  ra: number;
  aa: number;
}

export interface PaymentStatementMessage extends Envelope {
  type: "payment_statement";
  group: number;
  member: number;
  show_up_cents: number;
  elicitation: ElicitationSettlement | null;
  paid_block: number;
  block: {
    scheme: TreatmentInfo["rewards"];
    score: number;
    rank: number | null;
    rate_cents: number;
    cents: number;
  };
  total_cents: number;
  total_display: string;
}

export interface ErrorMessage extends Envelope {
  type: "error";
  code: string;
  detail: string;
  legal?: number[];
}

export type ServerMessage =
  | ConfigMessage
  | FlipResultMessage
  | ForecastResultMessage
  | BlockFeedbackMessage
  | PaymentStatementMessage
  | ErrorMessage;

export type ClientMessage =
  | { type: "join"; token?: string }
  | { type: "elicit_submit"; list: "risk" | "ambiguity"; switch_row: number; guess: CardColor }
  | { type: "flip_request"; flips: number }
  | { type: "forecast_submit"; guess: CardColor }
  | { type: "block_ack"; block: number };

export function parseServerMessage(raw: string): ServerMessage {
  const message = JSON.parse(raw);
  if (typeof message !== "object" || message === null || typeof message.type !== "string") {
    throw new Error(`not a protocol message: ${raw.slice(0, 120)}`);
  }
  return message as ServerMessage;
}

// Switching-list state: 20 rows of "gamble vs sure amount", one switch
// point. Storing only the switch row makes a second switch unrepresentable;
// clicking another row simply moves the single switch.

import type { CardColor } from "./protocol.js";

export type ListName = "risk" | "ambiguity";

export interface ListState {
  name: ListName;
  rows: number;
  sureStepCents: number;
  gambleCents: number;
  guess: CardColor;
  // 1..rows switches at that row; rows+1 never switches; null not chosen yet
  switchRow: number | null;
}

export function freshList(
  name: ListName,
  rows: number,
  sureStepCents: number,
  gambleCents: number,
): ListState {
  return { name, rows, sureStepCents, gambleCents, guess: "red", switchRow: null };
}

export function clickSwitch(list: ListState, row: number): ListState {
  if (!Number.isInteger(row) || row < 1 || row > list.rows + 1) {
    throw new Error(`switch row must be in 1..${list.rows + 1}`);
  }
  return { ...list, switchRow: row };
}

export function setGuess(list: ListState, guess: CardColor): ListState {
  return { ...list, guess };
}

export interface RowView {
  row: number;
  sureCents: number;
  takesSure: boolean;
  isSwitch: boolean;
}

export function rowViews(list: ListState): RowView[] {
  const out: RowView[] = [];
  for (let row = 1; row <= list.rows; row++) {
    out.push({
      row,
      sureCents: row * list.sureStepCents,
      takesSure: list.switchRow !== null && row >= list.switchRow,
      isSwitch: row === list.switchRow,
    });
  }
  return out;
}

export function submission(list: ListState) {
  if (list.switchRow === null) {
    throw new Error("choose a switch point first");
  }
  return {
    type: "elicit_submit" as const,
    list: list.name,
    switch_row: list.switchRow,
    guess: list.guess,
  };
}

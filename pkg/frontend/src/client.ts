// Thin connection wrapper: serializes client messages, folds server
// messages into the view state, and notifies subscribers. The socket
// factory is injected so tests can drive it with a Node websocket.

import type { CardColor, ClientMessage, ServerMessage } from "./protocol.js";
import { parseServerMessage } from "./protocol.js";
import type { ViewState } from "./viewmodel.js";
import { initialView, reduce } from "./viewmodel.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((event?: unknown) => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: ((event?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export class SessionClient {
  view: ViewState = initialView();
  private socket: SocketLike;
  private listeners: Array<(view: ViewState, message: ServerMessage) => void> = [];
  private queue: ClientMessage[] = [];
  private open = false;

  constructor(url: string, factory: SocketFactory = (u) => new WebSocket(u) as SocketLike) {
    this.socket = factory(url);
    this.socket.onopen = () => {
      this.open = true;
      for (const message of this.queue.splice(0)) {
        this.socket.send(JSON.stringify(message));
      }
    };
    this.socket.onmessage = (event) => {
      const message = parseServerMessage(String(event.data));
      this.view = reduce(this.view, message);
      for (const listener of this.listeners) {
        listener(this.view, message);
      }
    };
    this.socket.onclose = () => {
      this.open = false;
    };
  }

  onChange(listener: (view: ViewState, message: ServerMessage) => void): void {
    this.listeners.push(listener);
  }

  send(message: ClientMessage): void {
    if (this.open) {
      this.socket.send(JSON.stringify(message));
    } else {
      this.queue.push(message);
    }
  }

  join(token?: string): void {
    this.send(token ? { type: "join", token } : { type: "join" });
  }

  submitList(list: "risk" | "ambiguity", switchRow: number, guess: CardColor): void {
    this.send({ type: "elicit_submit", list, switch_row: switchRow, guess });
  }

  flip(flips: number): void {
    this.send({ type: "flip_request", flips });
  }

  forecast(guess: CardColor): void {
    this.send({ type: "forecast_submit", guess });
  }

  acknowledge(block: number): void {
    this.send({ type: "block_ack", block });
  }

  close(): void {
    this.socket.close();
  }
}

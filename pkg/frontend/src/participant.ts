// Participant play screens: join, switching lists, the card grid with the
// flip selector, forecast buttons, between-block feedback, and the payment
// statement. Rendering is a plain function of the view state.

import { SessionClient } from "./client.js";
import type { ListState } from "./elicitation.js";
import { clickSwitch, freshList, rowViews, setGuess, submission } from "./elicitation.js";
import type { ViewState } from "./viewmodel.js";
import { feedbackTable, selectorChoices } from "./viewmodel.js";

type Lists = { risk: ListState; ambiguity: ListState };

function cents(amount: number): string {
  return `$${(amount / 100).toFixed(2)}`;
}

function cardGrid(view: ViewState): string {
  const cells = view.cards
    .map((card) =>
      card.faceUp
        ? `<span class="card ${card.color}"></span>`
        : `<span class="card hidden"></span>`,
    )
    .join("");
  return `<div class="grid">${cells}</div>`;
}

function listPanel(list: ListState, submitted: boolean): string {
  if (submitted) {
    return `<p>List recorded.</p>`;
  }
  const guessRow = `
    <p>The ${list.name} urn bet pays ${cents(list.gambleCents)} if the drawn ball is your color:
      <button data-guess-list="${list.name}" data-guess="red" ${list.guess === "red" ? "disabled" : ""}>red</button>
      <button data-guess-list="${list.name}" data-guess="green" ${list.guess === "green" ? "disabled" : ""}>green</button>
    </p>`;
  const rows = rowViews(list)
    .map(
      (row) => `<tr>
        <td>${row.takesSure ? "" : "GAMBLE"}</td>
        <td><button data-switch-list="${list.name}" data-row="${row.row}"
          ${row.isSwitch ? "disabled" : ""}>SWITCH HERE</button></td>
        <td>${row.takesSure ? `SURE ${cents(row.sureCents)}` : cents(row.sureCents)}</td>
      </tr>`,
    )
    .join("");
  const never = `<tr><td>GAMBLE</td>
    <td><button data-switch-list="${list.name}" data-row="${list.rows + 1}"
      ${list.switchRow === list.rows + 1 ? "disabled" : ""}>NEVER SWITCH</button></td>
    <td></td></tr>`;
  const submit =
    list.switchRow === null
      ? ""
      : `<button data-submit-list="${list.name}">Submit ${list.name} list</button>`;
  return `${guessRow}<table>${rows}${never}</table>${submit}`;
}

function playPanel(view: ViewState): string {
  const header = `<p>Block ${view.block ?? "?"} -
    remaining flips <strong id="remaining">${view.remaining ?? ""}</strong>,
    score <strong id="score">${view.score ?? ""}</strong>,
    forecasts ${view.forecasts ?? 0}</p>`;
  const selector = selectorChoices(view)
    .map((n) => `<button data-flips="${n}">${n}</button>`)
    .join(" ");
  const forecast = view.awaitingForecast
    ? `<p>Majority color?
        <button data-forecast="red">RED</button>
        <button data-forecast="green">GREEN</button></p>`
    : selector
      ? `<p>Cards to turn: ${selector}</p>`
      : "";
  const banner = view.banner
    ? `<p class="banner">${view.banner.correct ? "Correct" : "Wrong"}:
        majority was ${view.banner.majority}, you said ${view.banner.guess}
        (${view.banner.points > 0 ? "+1" : "-1"})</p>`
    : "";
  return header + cardGrid(view) + forecast + banner;
}

function feedbackPanel(view: ViewState): string {
  const packet = view.feedback;
  if (!packet) {
    return "<p>Waiting for the rest of your group.</p>";
  }
  const own = `<p>Block ${packet.block}: score ${packet.own.score},
    ${packet.own.forecast_count} forecasts,
    ${packet.own.average_flips.toFixed(2)} cards per forecast.</p>`;
  const table = feedbackTable(packet);
  const rendered = table.length
    ? `<table>${table
        .map(
          (row) =>
            `<tr><th>${row.label}</th>${row.values.map((v) => `<td>${v}</td>`).join("")}</tr>`,
        )
        .join("")}</table>`
    : "";
  const notice = view.payoffNotice ? `<p class="notice">${view.payoffNotice}</p>` : "";
  return `${own}${rendered}${notice}
    <button data-ack="${packet.block}">Continue</button>`;
}

function statementPanel(view: ViewState): string {
  const s = view.statement;
  if (!s) return "";
  const elicitation = s.elicitation
    ? `<li>Lists: ${cents(s.elicitation.lists.risk.cents + s.elicitation.lists.ambiguity.cents)}</li>`
    : "";
  return `<h2>Payment</h2><ul>
    <li>Show-up: ${cents(s.show_up_cents)}</li>${elicitation}
    <li>Block ${s.paid_block} (${s.block.scheme}${s.block.rank ? `, rank ${s.block.rank}` : ""}):
      ${s.block.score} x ${cents(s.block.rate_cents)} = ${cents(s.block.cents)}</li>
    </ul><p><strong>Total ${s.total_display}</strong></p>`;
}

export function render(view: ViewState, lists: Lists, root: HTMLElement): void {
  let body: string;
  switch (view.phase) {
    case "connecting":
      body = "<p>Connecting...</p>";
      break;
    case "lobby":
      body = "<p>Waiting for the rest of the participants.</p>";
      break;
    case "elicitation":
      body = `<h2>Part 1</h2>
        <section>${listPanel(lists.risk, view.elicitationSubmitted.includes("risk"))}</section>
        <section>${listPanel(lists.ambiguity, view.elicitationSubmitted.includes("ambiguity"))}</section>`;
      break;
    case "block":
      body = playPanel(view);
      break;
    case "feedback":
      body = feedbackPanel(view);
      break;
    case "waiting":
      body = "<p>All blocks done; waiting for the other groups.</p>";
      break;
    case "paid":
      body = statementPanel(view);
      break;
  }
  const errors = view.errors.slice(-3);
  if (errors.length) {
    body += `<div class="errors">${errors.map((e) => `<p>${e}</p>`).join("")}</div>`;
  }
  root.innerHTML = body;
}

export function start(root: HTMLElement): void {
  const url = `ws://${location.host}/ws/${new URLSearchParams(location.search).get("session") ?? ""}`;
  const client = new SessionClient(url);
  let lists: Lists = {
    risk: freshList("risk", 20, 10, 200),
    ambiguity: freshList("ambiguity", 20, 10, 200),
  };
  const repaint = () => render(client.view, lists, root);
  client.onChange((view, message) => {
    if (message.type === "config" && view.phase === "elicitation") {
      const info = message.elicitation;
      lists = {
        risk: { ...lists.risk, rows: info.rows, sureStepCents: info.sure_step_cents, gambleCents: info.gamble_cents },
        ambiguity: { ...lists.ambiguity, rows: info.rows, sureStepCents: info.sure_step_cents, gambleCents: info.gamble_cents },
      };
    }
    repaint();
  });
  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const name = (target.dataset.switchList ?? target.dataset.guessList ?? target.dataset.submitList) as
      | keyof Lists
      | undefined;
    if (target.dataset.switchList && name) {
      lists = { ...lists, [name]: clickSwitch(lists[name], Number(target.dataset.row)) };
      repaint();
    } else if (target.dataset.guessList && name) {
      lists = { ...lists, [name]: setGuess(lists[name], target.dataset.guess as "red" | "green") };
      repaint();
    } else if (target.dataset.submitList && name) {
      const message = submission(lists[name]);
      client.submitList(message.list, message.switch_row, message.guess);
    } else if (target.dataset.flips) {
      client.flip(Number(target.dataset.flips));
    } else if (target.dataset.forecast) {
      client.forecast(target.dataset.forecast as "red" | "green");
    } else if (target.dataset.ack) {
      client.acknowledge(Number(target.dataset.ack));
    }
  });
  const token = new URLSearchParams(location.search).get("token") ?? undefined;
  client.join(token);
  repaint();
}

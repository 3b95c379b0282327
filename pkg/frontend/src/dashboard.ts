// Experimenter dashboard: create sessions over REST, watch join progress,
// resolve stragglers, and download the per-session exports. Everything shown
// comes straight from the server's JSON; nothing is computed client side.

type GroupProgress = { index: number; block: number; finished: boolean; remaining: number[] };

type SessionSummary = {
  session: string;
  treatment: string;
  capacity: number;
  joined: number;
  groups: GroupProgress[];
  resolved: boolean;
  events: number;
};

type CreatedSession = { session: string; tokens: string[]; status: SessionSummary };

async function fetchJson<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    const detail = await response.text();
    throw new Error(`${response.status}: ${detail}`);
  }
  return (await response.json()) as T;
}

function sessionRow(session: SessionSummary): string {
  const exports = ["forecasts.csv", "blocks.csv"]
    .map((name) => `<a href="/sessions/${session.session}/export/${name}">${name}</a>`)
    .join(" ");
  const progress = session.groups
    .map((g) =>
      g.finished
        ? "done"
        : g.block === 0
          ? "switching lists"
          : `block ${g.block}, flips left ${g.remaining.join("/")}`,
    )
    .join("; ");
  const resolve = session.resolved
    ? "resolved"
    : `<button data-resolve="${session.session}">resolve</button>`;
  return `<tr>
    <td>${session.session}</td>
    <td>${session.treatment}</td>
    <td>${session.joined}/${session.capacity}</td>
    <td>${progress}</td>
    <td>${exports} <a href="/sessions/${session.session}/log">log</a></td>
    <td>${resolve}</td>
  </tr>`;
}

function creationForm(): string {
  return `<form id="create">
    <input name="session_id" placeholder="session id" required>
    <select name="rewards">
      <option value="noncompetitive">noncompetitive</option>
      <option value="competitive">competitive</option>
    </select>
    <select name="feedback">
      <option value="none">none</option>
      <option value="scores">scores</option>
      <option value="strategies">strategies</option>
      <option value="both">both</option>
    </select>
    <input name="groups" type="number" value="1" min="1">
    <input name="master_seed" type="number" placeholder="seed">
    <label><input name="elicitation_enabled" type="checkbox" checked> switching lists</label>
    <button type="submit">Create</button>
  </form>
  <pre id="tokens"></pre>`;
}

export async function refresh(root: HTMLElement): Promise<void> {
  const body = await fetchJson<{ sessions: SessionSummary[] }>("/sessions");
  const table = root.querySelector("#sessions") as HTMLElement;
  table.innerHTML = body.sessions.length
    ? `<table>
        <tr><th>id</th><th>treatment</th><th>joined</th><th>progress</th><th>data</th><th></th></tr>
        ${body.sessions.map(sessionRow).join("")}
      </table>`
    : "<p>No sessions yet.</p>";
}

export function start(root: HTMLElement): void {
  root.innerHTML = `${creationForm()}<div id="sessions"></div><div id="error"></div>`;
  const errorBox = root.querySelector("#error") as HTMLElement;
  const report = (error: unknown) => {
    errorBox.textContent = String(error);
  };

  const form = root.querySelector("#create") as HTMLFormElement;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const seed = data.get("master_seed");
    const payload = {
      session_id: data.get("session_id"),
      treatment: { rewards: data.get("rewards"), feedback: data.get("feedback") },
      groups: Number(data.get("groups")),
      elicitation_enabled: data.get("elicitation_enabled") === "on",
      ...(seed ? { master_seed: Number(seed) } : {}),
    };
    try {
      const created = await fetchJson<CreatedSession>("/sessions", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      });
      (root.querySelector("#tokens") as HTMLElement).textContent =
        `Join tokens for ${created.session}:\n${created.tokens.join("\n")}`;
      errorBox.textContent = "";
      await refresh(root);
    } catch (error) {
      report(error);
    }
  });

  root.addEventListener("click", async (event) => {
    const id = (event.target as HTMLElement).dataset.resolve;
    if (!id) return;
    try {
      await fetchJson(`/sessions/${id}/resolve`, { method: "POST" });
      errorBox.textContent = "";
      await refresh(root);
    } catch (error) {
      report(error);
    }
  });

  refresh(root).catch(report);
  setInterval(() => refresh(root).catch(report), 2000);
}

/** Operator console: roster editor to start a session, then a live
 * recommend/record loop. All inference happens server-side; the console
 * re-renders from server state after every action and on a poll timer. */

import { ApiError, SessionApi } from "./api.js";
import type { Recommendation, SessionState } from "./api.js";
import { buildInstancePayload, parseInstanceText, rosterIsValid, rosterToText,
         validateRoster } from "./roster.js";
import type { RosterRow } from "./roster.js";
import { renderAgentTable, renderBudget, renderHistory, renderRecommendation,
         renderWelfare } from "./view.js";

const SKELETON = `
<header>
  <h1>poolwise console</h1>
  <span id="conn" class="muted"></span>
</header>
<section id="roster-panel">
  <h2>Roster</h2>
  <table class="roster">
    <thead><tr><th>#</th><th>utility</th><th>P(healthy)</th><th></th></tr></thead>
    <tbody id="roster-body"></tbody>
  </table>
  <div class="row-actions">
    <button id="add-agent" type="button">add agent</button>
    <label class="upload">upload instance
      <input id="roster-file" type="file" accept="application/json">
    </label>
    <a id="roster-download" download="instance.json">download</a>
  </div>
  <div class="limits">
    <label>budget <input id="budget" value="2" size="4"></label>
    <label>pool cap <input id="pool-cap" value="2" size="4"></label>
  </div>
  <div id="roster-error" class="error" role="alert"></div>
  <button id="create-session" type="button">start session</button>
</section>
<section id="session-panel" hidden>
  <h2>Session <code id="session-id"></code></h2>
  <div class="tally">confirmed welfare <strong id="welfare">0</strong></div>
  <div id="remaining" class="muted"></div>
  <div class="recommendation">next: <span id="recommendation"></span></div>
  <table class="agents">
    <thead><tr><th>agent</th><th>utility</th><th>P(healthy)</th><th>status</th><th>pool</th></tr></thead>
    <tbody id="agent-body"></tbody>
  </table>
  <div class="outcome-actions">
    <button id="report-neg" type="button">report negative</button>
    <button id="report-pos" type="button">report positive</button>
  </div>
  <div id="outcome-error" class="error" role="alert"></div>
  <h3>History</h3>
  <ol id="history"></ol>
  <button id="new-session" type="button">new roster</button>
</section>`;

export interface ConsoleOptions {
  baseUrl?: string;
  pollMs?: number;
}

export class PoolwiseConsole {
  readonly api: SessionApi;
  rows: RosterRow[] = [{ u: "", p: "" }];
  budget = "2";
  poolCap = "2";
  state: SessionState | null = null;
  recommendation: Recommendation | null = null;
  busy = false;
  private timer: ReturnType<typeof setInterval> | null = null;
  private readonly pollMs: number;

  constructor(private root: HTMLElement, options: ConsoleOptions = {}) {
    this.api = new SessionApi(options.baseUrl ?? "");
    this.pollMs = options.pollMs ?? 3000;
  }

  mount(): void {
    this.root.innerHTML = SKELETON;
    this.el("add-agent").addEventListener("click", () => {
      this.rows.push({ u: "", p: "" });
      this.renderRoster();
    });
    this.el("create-session").addEventListener("click", () => {
      void this.createSession();
    });
    this.el("report-neg").addEventListener("click", () => {
      void this.recordOutcome("neg");
    });
    this.el("report-pos").addEventListener("click", () => {
      void this.recordOutcome("pos");
    });
    this.el("new-session").addEventListener("click", () => this.reset());
    const file = this.el("roster-file") as HTMLInputElement;
    file.addEventListener("change", () => {
      const chosen = file.files && file.files[0];
      if (chosen) {
        void chosen.text().then((text) => this.importText(text));
      }
    });
    this.renderRoster();
  }

  el(id: string): HTMLElement {
    const found = this.root.querySelector(`#${id}`);
    if (!found) throw new Error(`missing element #${id}`);
    return found as HTMLElement;
  }

  // ---- roster editing ----

  renderRoster(): void {
    const issues = validateRoster(this.rows, this.budget, this.poolCap);
    const body = this.el("roster-body");
    body.innerHTML = "";
    this.rows.forEach((row, i) => {
      const tr = document.createElement("tr");
      const problems = issues.rows[i];
      tr.innerHTML =
        `<td>${i}</td>` +
        `<td><input class="u" data-row="${i}" value="${row.u}">` +
        `<span class="field-error">${problems.u ?? ""}</span></td>` +
        `<td><input class="p" data-row="${i}" value="${row.p}">` +
        `<span class="field-error">${problems.p ?? ""}</span></td>` +
        `<td><button type="button" class="remove" data-row="${i}">remove</button></td>`;
      body.appendChild(tr);
    });
    body.querySelectorAll("input.u, input.p").forEach((input) => {
      input.addEventListener("change", (event) => {
        const target = event.target as HTMLInputElement;
        const i = Number(target.dataset.row);
        this.rows[i][target.classList.contains("u") ? "u" : "p"] = target.value;
        this.renderRoster();
      });
    });
    body.querySelectorAll("button.remove").forEach((button) => {
      button.addEventListener("click", (event) => {
        const i = Number((event.target as HTMLElement).dataset.row);
        this.rows.splice(i, 1);
        this.renderRoster();
      });
    });
    const budgetInput = this.el("budget") as HTMLInputElement;
    const capInput = this.el("pool-cap") as HTMLInputElement;
    budgetInput.value = this.budget;
    capInput.value = this.poolCap;
    budgetInput.onchange = () => { this.budget = budgetInput.value; this.renderRoster(); };
    capInput.onchange = () => { this.poolCap = capInput.value; this.renderRoster(); };
    const problems = [issues.budget, issues.poolCap, issues.roster].filter(Boolean);
    this.el("roster-error").textContent = problems.join("; ");
    (this.el("create-session") as HTMLButtonElement).disabled = !rosterIsValid(issues);
    this.refreshDownloadLink(issues);
  }

  private refreshDownloadLink(issues: ReturnType<typeof validateRoster>): void {
    const link = this.el("roster-download") as HTMLAnchorElement;
    if (rosterIsValid(issues)) {
      link.href = "data:application/json," + encodeURIComponent(this.exportText());
      link.classList.remove("muted");
    } else {
      link.removeAttribute("href");
      link.classList.add("muted");
    }
  }

  importText(text: string): void {
    try {
      const parsed = parseInstanceText(text);
      this.rows = parsed.rows;
      this.budget = parsed.budget;
      this.poolCap = parsed.poolCap;
      this.renderRoster();
    } catch (err) {
      this.renderRoster();  // render first: it rewrites the error slot
      this.el("roster-error").textContent = (err as Error).message;
    }
  }

  exportText(): string {
    return rosterToText(this.rows, this.budget, this.poolCap);
  }

  // ---- session flow ----

  async createSession(): Promise<void> {
    const issues = validateRoster(this.rows, this.budget, this.poolCap);
    if (!rosterIsValid(issues) || this.busy) return;
    this.setBusy(true);
    try {
      const payload = buildInstancePayload(this.rows, this.budget, this.poolCap);
      this.state = await this.api.createSession(payload);
      this.el("roster-panel").hidden = true;
      this.el("session-panel").hidden = false;
      this.el("session-id").textContent = this.state.id.slice(0, 8);
      await this.refreshRecommendation();
      this.renderSession();
    } catch (err) {
      this.el("roster-error").textContent = describe(err);
    } finally {
      this.setBusy(false);
    }
  }

  selectedPool(): number[] {
    const checked = this.root.querySelectorAll("input.pool-member:checked");
    return Array.from(checked)
      .map((input) => Number((input as HTMLElement).dataset.agent))
      .sort((a, b) => a - b);
  }

  async recordOutcome(result: "neg" | "pos"): Promise<void> {
    if (!this.state || this.busy) return;
    const pool = this.selectedPool();
    this.setBusy(true);
    this.el("outcome-error").textContent = "";
    try {
      this.state = await this.api.postOutcome(this.state.id, pool, result);
      await this.refreshRecommendation();
      this.renderSession();
    } catch (err) {
      this.el("outcome-error").textContent = describe(err);
    } finally {
      this.setBusy(false);
    }
  }

  /** Re-pull state (and recommendation) from the server; poll target. */
  async refresh(): Promise<void> {
    if (!this.state || this.busy) return;
    try {
      this.state = await this.api.getSession(this.state.id);
      await this.refreshRecommendation();
      this.renderSession();
      this.el("conn").textContent = "";
    } catch (err) {
      this.el("conn").textContent = `offline: ${describe(err)}`;
    }
  }

  private async refreshRecommendation(): Promise<void> {
    if (!this.state) return;
    if (this.state.remaining_budget <= 0) {
      this.recommendation = null;
      return;
    }
    try {
      this.recommendation = await this.api.getRecommendation(this.state.id);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.recommendation = null;  // exhausted or nothing left to test
      } else {
        throw err;
      }
    }
  }

  renderSession(): void {
    if (!this.state) return;
    renderWelfare(this.el("welfare"), this.state);
    renderBudget(this.el("remaining"), this.state);
    renderRecommendation(this.el("recommendation"), this.recommendation);
    renderAgentTable(this.el("agent-body"), this.state, this.recommendation);
    renderHistory(this.el("history"), this.state);
    const done = this.recommendation === null && this.selectedPool().length === 0;
    (this.el("report-neg") as HTMLButtonElement).disabled = this.busy || done;
    (this.el("report-pos") as HTMLButtonElement).disabled = this.busy || done;
  }

  private setBusy(busy: boolean): void {
    this.busy = busy;
    ["create-session", "report-neg", "report-pos"].forEach((id) => {
      (this.el(id) as HTMLButtonElement).disabled = busy;
    });
    if (!busy && this.state) this.renderSession();
  }

  reset(): void {
    this.stopPolling();
    this.state = null;
    this.recommendation = null;
    this.el("session-panel").hidden = true;
    this.el("roster-panel").hidden = false;
    this.renderRoster();
  }

  startPolling(): void {
    this.stopPolling();
    this.timer = setInterval(() => { void this.refresh(); }, this.pollMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}

/** Pure DOM rendering of a session: roster table with marginals, the
 * highlighted recommendation, welfare tally, and the history timeline.
 * Everything displayed comes straight from server payloads. */

import type { Recommendation, SessionState } from "./api.js";

/** Full-fidelity display: 15 significant digits round-trips the server
 * float while hiding representation noise in trailing digits. */
export function formatNumber(value: number): string {
  return String(Number(value.toPrecision(15)));
}

export function agentLabel(id: number): string {
  return id < 26 ? String.fromCharCode(65 + id) : `#${id}`;
}

export type AgentStatus = "healthy" | "infected" | "unresolved";

export function agentStatus(state: SessionState, id: number): AgentStatus {
  if (state.confirmed_healthy.includes(id)) return "healthy";
  if (state.confirmed_infected.includes(id)) return "infected";
  return "unresolved";
}

export function renderWelfare(el: HTMLElement, state: SessionState): void {
  el.textContent = formatNumber(state.welfare_so_far);
}

export function renderBudget(el: HTMLElement, state: SessionState): void {
  el.textContent = `${state.remaining_budget} of ${state.instance.B} tests left`;
}

export function renderRecommendation(el: HTMLElement, rec: Recommendation | null): void {
  if (rec === null) {
    el.innerHTML = `<span class="muted">no further test recommended</span>`;
    return;
  }
  const members = rec.pool.map(agentLabel).join(", ");
  el.innerHTML = `test <strong class="rec-pool">{${members}}</strong>` +
    ` <span class="rec-value">expected gain ${formatNumber(rec.value)}</span>`;
}

/** Roster body: one row per agent with marginal, status badge, and a
 * pool-membership checkbox. Recommended members are pre-checked and
 * highlighted; resolved agents cannot be selected. */
export function renderAgentTable(tbody: HTMLElement, state: SessionState,
                                 rec: Recommendation | null): void {
  const recommended = new Set(rec ? rec.pool : []);
  tbody.innerHTML = "";
  state.instance.agents.forEach((agent, i) => {
    const status = agentStatus(state, i);
    const tr = document.createElement("tr");
    tr.className = status + (recommended.has(i) ? " recommended" : "");
    tr.dataset.agent = String(i);
    const marginal = Math.min(1, Math.max(0, state.marginals[i]));
    tr.innerHTML =
      `<td>${agentLabel(i)}</td>` +
      `<td>${formatNumber(agent.u)}</td>` +
      `<td class="marginal">${formatNumber(marginal)}</td>` +
      `<td><span class="badge ${status}">${status}</span></td>` +
      `<td><input type="checkbox" class="pool-member" data-agent="${i}"` +
      `${recommended.has(i) ? " checked" : ""}` +
      `${status === "unresolved" ? "" : " disabled"}></td>`;
    tbody.appendChild(tr);
  });
}

export function renderHistory(list: HTMLElement, state: SessionState): void {
  list.innerHTML = "";
  state.history.forEach((entry, i) => {
    const li = document.createElement("li");
    li.className = entry.result === "neg" ? "neg" : "pos";
    const members = entry.pool.map(agentLabel).join(", ");
    li.textContent = `#${i + 1} {${members}} ` +
      (entry.result === "neg" ? "negative" : "positive");
    list.appendChild(li);
  });
}

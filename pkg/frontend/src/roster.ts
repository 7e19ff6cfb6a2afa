/** Roster editing: row validation and instance payload (de)serialization.
 * Validation mirrors the server's instance rules so bad fields are flagged
 * inline before any request is made. */

import type { InstancePayload } from "./api.js";

export interface RosterRow {
  u: string;
  p: string;
}

export interface RowIssues {
  u?: string;
  p?: string;
}

/** Per-field problems for one roster row; empty object means valid. */
export function validateRow(row: RosterRow): RowIssues {
  const issues: RowIssues = {};
  const u = Number(row.u);
  const p = Number(row.p);
  if (row.u.trim() === "" || !Number.isFinite(u)) {
    issues.u = "utility must be a number";
  } else if (u < 0) {
    issues.u = "utility must be >= 0";
  }
  if (row.p.trim() === "" || !Number.isFinite(p)) {
    issues.p = "probability must be a number";
  } else if (p < 0 || p > 1) {
    issues.p = "probability must be in [0, 1]";
  }
  return issues;
}

export interface RosterIssues {
  rows: RowIssues[];
  budget?: string;
  poolCap?: string;
  roster?: string;
}

export function validateRoster(rows: RosterRow[], budget: string, poolCap: string): RosterIssues {
  const issues: RosterIssues = { rows: rows.map(validateRow) };
  const b = Number(budget);
  const g = Number(poolCap);
  if (!Number.isInteger(b) || b < 1) {
    issues.budget = "budget must be a positive integer";
  }
  if (!Number.isInteger(g) || g < 1) {
    issues.poolCap = "pool cap must be a positive integer";
  }
  if (rows.length === 0) {
    issues.roster = "add at least one agent";
  }
  return issues;
}

export function rosterIsValid(issues: RosterIssues): boolean {
  return !issues.budget && !issues.poolCap && !issues.roster
    && issues.rows.every((r) => !r.u && !r.p);
}

/** Build the exact wire payload; call only after validation passes. */
export function buildInstancePayload(rows: RosterRow[], budget: string, poolCap: string): InstancePayload {
  return {
    agents: rows.map((row, i) => ({ id: i, u: Number(row.u), p: Number(row.p) })),
    B: Number(budget),
    G: Number(poolCap),
  };
}

export interface ParsedRoster {
  rows: RosterRow[];
  budget: string;
  poolCap: string;
}

/** Parse an uploaded instance file back into editable form fields.
 * Throws with a human-readable message on malformed input. */
export function parseInstanceText(text: string): ParsedRoster {
  let data: unknown;
  try {
    data = JSON.parse(text);
  } catch {
    throw new Error("file is not valid JSON");
  }
  const obj = data as Partial<InstancePayload>;
  if (!obj || !Array.isArray(obj.agents)
      || typeof obj.B !== "number" || typeof obj.G !== "number") {
    throw new Error("file must carry agents, B, and G");
  }
  const rows = obj.agents.map((agent) => {
    if (typeof agent.u !== "number" || typeof agent.p !== "number") {
      throw new Error("every agent needs numeric u and p");
    }
    return { u: String(agent.u), p: String(agent.p) };
  });
  return { rows, budget: String(obj.B), poolCap: String(obj.G) };
}

export function rosterToText(rows: RosterRow[], budget: string, poolCap: string): string {
  return JSON.stringify(buildInstancePayload(rows, budget, poolCap), null, 2);
}

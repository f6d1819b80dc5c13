/* Pure presentation helpers, kept out of the DOM layer so they can be tested
 * without a browser. */

import type { DatasetSummary, Outcome, Step } from "./api.js";

/** Strategies the picker should offer for a dataset, in display order. The
 * server would reject the missing ones anyway; hiding them just saves the user
 * a round trip. */
export function availableStrategies(d: DatasetSummary): string[] {
  const out = ["gbs"];
  if (d.object_groups > 0) out.push("gisa");
  if (d.query_groups > 0) out.push("gqsa");
  if (d.object_groups > 0 && d.query_groups > 0) out.push("gigqsa");
  if (d.query_groups > 0) out.push("min-min", "min-max");
  out.push("random");
  if (d.has_noise) out.push("noisy-gbs", "noisy-gisa");
  return out;
}

export const STRATEGY_BLURBS: Record<string, string> = {
  "gbs": "most balanced split (object identification)",
  "gisa": "group cost (group identification)",
  "gqsa": "expected split gain over the suggested query group",
  "gigqsa": "expected group-cost gain over the suggested query group",
  "min-min": "optimistic query-group baseline",
  "min-max": "pessimistic query-group baseline",
  "random": "uniformly random unanswered query (baseline)",
  "noisy-gbs": "balanced split on the error-dilated problem",
  "noisy-gisa": "group cost on the error-dilated problem",
};

export function pct(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

export function outcomeLabel(outcome: Outcome | null): string {
  if (!outcome) return "no outcome";
  if (outcome.object !== undefined) return `object ${outcome.object}`;
  if (outcome.group !== undefined) return `group ${outcome.group}`;
  return "no outcome";
}

export function describeStep(step: Step): string {
  const word = step.response === 1 ? "yes" : "no";
  return `${step.query} = ${word} (${step.surviving_before} → ${step.surviving_after} left)`;
}

/** What the surviving count is counting, which depends on the objective. */
export function survivingNoun(objective: string): string {
  return objective === "group-id" ? "groups" : "candidates";
}

/** Self-contained download link; works without object URLs, which some
 * embedders (and the test harness) do not implement. */
export function transcriptHref(text: string): string {
  return `data:application/json;charset=utf-8,${encodeURIComponent(text)}`;
}

export function shortId(id: string, n = 10): string {
  return id.length <= n ? id : `${id.slice(0, n)}…`;
}

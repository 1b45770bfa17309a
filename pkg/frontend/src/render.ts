/**
 * Pure rendering: wire payloads in, HTML strings out.
 *
 * Keeping these as pure functions makes every view snapshot-testable without
 * a DOM; the console mounts the strings and wires interaction with event
 * delegation (buttons carry `data-element-id`).
 */

import type { CycleTrace, GoalView, LayoutElement, LayoutPlan, SessionState } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

function renderElement(element: LayoutElement): string {
  switch (element.kind) {
    case "text_block":
      return `<p class="text-block">${escapeHtml(String((element as { text: string }).text))}</p>`;
    case "button": {
      const button = element as { label: string; element_id: string };
      return (
        `<button class="action-button" data-element-id="${escapeHtml(button.element_id)}"` +
        ` data-label="${escapeHtml(button.label)}">${escapeHtml(button.label)}</button>`
      );
    }
    case "option_list": {
      const list = element as { label: string; element_id: string; options: string[] };
      const items = list.options
        .map(
          (option, index) =>
            `<li><button class="action-button" data-element-id="${escapeHtml(list.element_id)}"` +
            ` data-label="${escapeHtml(option)}" data-option-index="${index}">` +
            `${escapeHtml(option)}</button></li>`,
        )
        .join("");
      return `<div class="option-list"><span>${escapeHtml(list.label)}</span><ul>${items}</ul></div>`;
    }
    default:
      // Forward compatibility: unknown kinds render inert with a warning badge.
      return (
        `<span class="unknown-element" title="unsupported element kind">` +
        `<span class="warning-badge">!</span> ${escapeHtml(JSON.stringify(element))}</span>`
      );
  }
}

export function renderLayout(plan: LayoutPlan): string {
  return `<div class="layout-plan">${plan.elements.map(renderElement).join("")}</div>`;
}

export function renderUserMessage(text: string): string {
  return `<div class="user-message">${escapeHtml(text)}</div>`;
}

/** Extract one section's text from a serialized thought ("" when absent). */
export function thoughtSection(thoughtText: string, section: string): string {
  const lines = thoughtText.split("\n");
  const header = `## ${section}`;
  const start = lines.indexOf(header);
  if (start < 0) return "";
  const body: string[] = [];
  for (let i = start + 1; i < lines.length; i += 1) {
    const line = lines[i] ?? "";
    if (line.startsWith("## ")) break;
    body.push(line);
  }
  while (body.length > 0 && body[body.length - 1] === "") body.pop();
  return body.join("\n");
}

export function describeDirective(trace: CycleTrace): string {
  if (trace.directive === null) return "(bypass)";
  return trace.directive.action;
}

export function describeVerdict(trace: CycleTrace): string {
  const verdict = trace.verdict;
  if (verdict.kind === "halt") return `halt (${verdict.reason})`;
  if (verdict.kind === "bypass") return "bypass";
  if (verdict.kind === "spawn_subgoals") return `spawn ${verdict.goals?.length ?? 0} subgoals`;
  return "continue";
}

export function renderTraceRow(trace: CycleTrace): string {
  const limitHit = trace.verdict.kind === "halt" && trace.verdict.reason === "step_limit";
  const marker = limitHit ? `<span class="limit-indicator">step limit</span>` : "";
  const effects = trace.effects
    .map((effect) => `<li>${escapeHtml(effect)}</li>`)
    .join("");
  return (
    `<div class="trace-row" data-cycle-index="${trace.cycle_index}">` +
    `<div class="trace-head">cycle ${trace.cycle_index}: ` +
    `<code>${escapeHtml(describeDirective(trace))}</code> &rarr; ` +
    `${escapeHtml(describeVerdict(trace))} ${marker}</div>` +
    `<details><summary>thought</summary><pre>${escapeHtml(trace.thought_text)}</pre></details>` +
    `<ul class="effects">${effects}</ul></div>`
  );
}

export function renderGoalStack(goals: GoalView[]): string {
  if (goals.length === 0) return `<div class="goal-stack empty">no open goals</div>`;
  const rows = [...goals]
    .reverse()
    .map(
      (goal, index) =>
        `<li class="${index === 0 ? "current-goal" : ""}">${escapeHtml(goal.text)}</li>`,
    )
    .join("");
  return `<ol class="goal-stack">${rows}</ol>`;
}

export function renderStepCounter(state: SessionState): string {
  return (
    `<span class="step-counter">step ${state.step_count} / ${state.step_limit}` +
    ` &middot; ${escapeHtml(state.status)}</span>`
  );
}

export function renderViolations(violations: { field: string; reason: string }[]): string {
  return violations
    .map(
      (violation) =>
        `<div class="violation" data-field="${escapeHtml(violation.field)}">` +
        `${escapeHtml(violation.field)}: ${escapeHtml(violation.reason)}</div>`,
    )
    .join("");
}

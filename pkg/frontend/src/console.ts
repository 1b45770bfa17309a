/**
 * Console wiring: chat panel, trace inspector, and builder form glue.
 *
 * All HTML comes from the pure renderers; this layer only mounts strings,
 * delegates events, and talks to the API client.
 */

import { ApiClient, ApiError, BuilderForm, builderSubmit } from "./api.js";
import {
  renderGoalStack,
  renderLayout,
  renderStepCounter,
  renderTraceRow,
  renderUserMessage,
  renderViolations,
} from "./render.js";
import { streamEventsOverFetch, TraceFollower } from "./sse.js";
import type { CycleTrace, LayoutPlan } from "./types.js";

export class ChatPanel {
  private sessionId: string | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly messages: HTMLElement,
    private readonly status: HTMLElement,
    private readonly onCycleActivity?: () => void,
  ) {
    this.messages.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      if (target instanceof HTMLButtonElement && target.dataset.elementId) {
        void this.clickAction(target);
      }
    });
  }

  async open(agentId: string, mode: string): Promise<string> {
    this.sessionId = await this.api.createSession(agentId, mode);
    this.messages.innerHTML = "";
    await this.refreshStatus();
    return this.sessionId;
  }

  get session(): string | null {
    return this.sessionId;
  }

  private appendOutputs(outputs: LayoutPlan[]): void {
    for (const plan of outputs) {
      this.messages.insertAdjacentHTML("beforeend", renderLayout(plan));
    }
    this.messages.scrollTop = this.messages.scrollHeight;
  }

  async sendUtterance(text: string): Promise<void> {
    if (!this.sessionId) return;
    this.messages.insertAdjacentHTML("beforeend", renderUserMessage(text));
    try {
      const response = await this.api.sendEvent(this.sessionId, {
        kind: "utterance",
        text,
      });
      this.appendOutputs(response.outputs);
    } catch (error) {
      this.showError(error);
    }
    await this.refreshStatus();
    this.onCycleActivity?.();
  }

  private async clickAction(button: HTMLButtonElement): Promise<void> {
    if (!this.sessionId) return;
    button.disabled = true; // stays disabled until the next output arrives
    try {
      const response = await this.api.sendEvent(this.sessionId, {
        kind: "ui_action",
        element_id: button.dataset.elementId ?? "",
        label: button.dataset.label ?? button.textContent ?? "",
      });
      this.appendOutputs(response.outputs);
      if (response.outputs.length > 0) button.disabled = false;
    } catch (error) {
      this.showError(error);
    }
    await this.refreshStatus();
    this.onCycleActivity?.();
  }

  async sendFeedback(verdict: "accept" | "reject", note: string): Promise<void> {
    if (!this.sessionId) return;
    try {
      await this.api.sendFeedback(this.sessionId, verdict, note);
    } catch (error) {
      this.showError(error);
    }
    await this.refreshStatus();
  }

  private async refreshStatus(): Promise<void> {
    if (!this.sessionId) return;
    const state = await this.api.getState(this.sessionId);
    this.status.innerHTML = renderStepCounter(state);
  }

  private showError(error: unknown): void {
    const text = error instanceof Error ? error.message : String(error);
    this.messages.insertAdjacentHTML(
      "beforeend",
      `<div class="error-banner">${text.replace(/</g, "&lt;")}</div>`,
    );
  }
}

export class TraceInspector {
  private follower: TraceFollower | null = null;
  private readonly seen = new Set<number>();

  constructor(
    private readonly api: ApiClient,
    private readonly rows: HTMLElement,
    private readonly goalStack: HTMLElement,
    private readonly counter: HTMLElement,
  ) {}

  /** Subscribe to a session's trace; safe to call again after reconnects. */
  watch(sessionId: string): void {
    this.follower?.stop();
    this.rows.innerHTML = "";
    this.seen.clear();
    this.follower = new TraceFollower(
      (id) => streamEventsOverFetch(this.api.baseUrl, id),
      {
        onCycle: (trace) => this.addRow(sessionId, trace),
        onEnd: () =>
          this.rows.insertAdjacentHTML(
            "beforeend",
            `<div class="trace-end">session halted</div>`,
          ),
      },
    );
    void this.follower.run(sessionId);
  }

  private addRow(sessionId: string, trace: CycleTrace): void {
    if (this.seen.has(trace.cycle_index)) return; // idempotent by index
    this.seen.add(trace.cycle_index);
    this.rows.insertAdjacentHTML("beforeend", renderTraceRow(trace));
    void this.refreshState(sessionId);
  }

  private async refreshState(sessionId: string): Promise<void> {
    const state = await this.api.getState(sessionId);
    this.goalStack.innerHTML = renderGoalStack(state.goal_stack);
    this.counter.innerHTML = renderStepCounter(state);
  }
}

export class BuilderPanel {
  constructor(
    private readonly api: ApiClient,
    private readonly violationsBox: HTMLElement,
    private readonly toolList: HTMLElement,
    private readonly onCreated: (agentId: string) => void,
  ) {}

  async submit(form: BuilderForm): Promise<void> {
    this.violationsBox.innerHTML = "";
    try {
      const result = await builderSubmit(this.api, form);
      const agent = await this.api.getAgent(result.agentId);
      this.toolList.innerHTML = agent.tool_ids
        .map((toolId) => `<li>${toolId}</li>`)
        .join("");
      this.onCreated(result.agentId);
    } catch (error) {
      if (error instanceof ApiError && error.violations.length > 0) {
        this.violationsBox.innerHTML = renderViolations(error.violations);
      } else {
        this.violationsBox.textContent = error instanceof Error ? error.message : String(error);
      }
    }
  }
}

/**
 * Thin client over the documented REST contract. Every method maps to one
 * route; nothing here is private API.
 */

import type {
  AgentConfigPayload,
  EventResponse,
  InputEvent,
  LayoutPlan,
  SessionState,
  TriggerForm,
  Violation,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly violations: Violation[] = [],
  ) {
    super(message);
  }
}

async function asJson(response: Response): Promise<any> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(
      String(body.error ?? response.statusText),
      response.status,
      (body.violations ?? []) as Violation[],
    );
  }
  return body;
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  async createAgent(config: AgentConfigPayload): Promise<string> {
    const response = await fetch(`${this.baseUrl}/agents`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
    return (await asJson(response)).agent_id as string;
  }

  async getAgent(agentId: string): Promise<AgentConfigPayload & { agent_id: string }> {
    return asJson(await fetch(`${this.baseUrl}/agents/${agentId}`));
  }

  async putTriggers(agentId: string, triggers: TriggerForm[]): Promise<void> {
    await asJson(
      await fetch(`${this.baseUrl}/agents/${agentId}/triggers`, {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(triggers),
      }),
    );
  }

  async importTools(agentId: string, openapiDocument: string): Promise<string[]> {
    const response = await fetch(`${this.baseUrl}/agents/${agentId}/tools:import`, {
      method: "POST",
      headers: { "Content-Type": "application/yaml" },
      body: openapiDocument,
    });
    return (await asJson(response)).tool_ids as string[];
  }

  async uploadKnowledge(
    agentId: string,
    fileName: string,
    content: string,
    store: string,
  ): Promise<number> {
    const form = new FormData();
    form.append("file", new Blob([content], { type: "text/plain" }), fileName);
    form.append("store", store);
    const response = await fetch(`${this.baseUrl}/agents/${agentId}/knowledge`, {
      method: "POST",
      body: form,
    });
    return (await asJson(response)).chunks as number;
  }

  async createSession(agentId: string, mode = "goal_directed"): Promise<string> {
    const response = await fetch(`${this.baseUrl}/agents/${agentId}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ mode }),
    });
    return (await asJson(response)).session_id as string;
  }

  async sendEvent(sessionId: string, event: InputEvent): Promise<EventResponse> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/events`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(event),
    });
    return (await asJson(response)) as EventResponse;
  }

  async sendFeedback(
    sessionId: string,
    verdict: "accept" | "reject",
    note = "",
  ): Promise<string> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/feedback`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ source: "human", verdict, note }),
    });
    return (await asJson(response)).status as string;
  }

  async getOutputs(sessionId: string): Promise<LayoutPlan[]> {
    return asJson(await fetch(`${this.baseUrl}/sessions/${sessionId}/outputs`));
  }

  async getState(sessionId: string): Promise<SessionState> {
    return asJson(await fetch(`${this.baseUrl}/sessions/${sessionId}/state`));
  }
}

export interface BuilderForm {
  config: AgentConfigPayload;
  openapiDocument?: string;
  knowledge: { fileName: string; content: string; store: string }[];
  triggers?: TriggerForm[];
}

export interface BuilderResult {
  agentId: string;
  toolIds: string[];
  chunksIngested: number;
}

/**
 * The builder flow: create agent, import tools, upload knowledge, set
 * triggers, in that order. Validation violations surface as ApiError with
 * the per-field list intact so the form can annotate rows.
 */
export async function builderSubmit(api: ApiClient, form: BuilderForm): Promise<BuilderResult> {
  const agentId = await api.createAgent(form.config);
  let toolIds: string[] = [];
  if (form.openapiDocument) {
    toolIds = await api.importTools(agentId, form.openapiDocument);
  }
  let chunksIngested = 0;
  for (const entry of form.knowledge) {
    chunksIngested += await api.uploadKnowledge(
      agentId,
      entry.fileName,
      entry.content,
      entry.store,
    );
  }
  if (form.triggers && form.triggers.length > 0) {
    await api.putTriggers(agentId, form.triggers);
  }
  return { agentId, toolIds, chunksIngested };
}

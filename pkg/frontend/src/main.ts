/** Entry point: wires the builder form, chat panel, and trace inspector. */

import { ApiClient } from "./api.js";
import { BuilderPanel, ChatPanel, TraceInspector } from "./console.js";
import type { DriveForm, TriggerForm } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function readDrives(): DriveForm[] {
  const drives: DriveForm[] = [];
  const persona = el<HTMLTextAreaElement>("drive-persona").value.trim();
  if (persona) {
    drives.push({
      drive_id: "persona",
      kind: "long_term",
      prompt_text: persona,
      priority: 10,
      status: "active",
      pattern: "",
      response: "",
    });
  }
  const pattern = el<HTMLInputElement>("reactive-pattern").value.trim();
  const response = el<HTMLInputElement>("reactive-response").value.trim();
  if (pattern || response) {
    drives.push({
      drive_id: "reactive-1",
      kind: "reactive",
      prompt_text: "",
      priority: 0,
      status: "active",
      pattern,
      response,
    });
  }
  return drives;
}

function readTriggers(): TriggerForm[] {
  const pattern = el<HTMLInputElement>("trigger-pattern").value.trim();
  const response = el<HTMLInputElement>("trigger-response").value.trim();
  if (!pattern) return [];
  return [
    {
      trigger_id: "t1",
      pattern,
      mode: "substring",
      response,
      enabled: true,
    },
  ];
}

async function readFile(input: HTMLInputElement): Promise<string | undefined> {
  const file = input.files?.[0];
  if (!file) return undefined;
  return file.text();
}

export function boot(baseUrl: string): void {
  const api = new ApiClient(baseUrl);
  const inspector = new TraceInspector(
    api,
    el("trace-rows"),
    el("goal-stack"),
    el("trace-counter"),
  );
  const chat = new ChatPanel(api, el("chat-messages"), el("chat-status"));

  const builder = new BuilderPanel(api, el("violations"), el("tool-list"), (agentId) => {
    el<HTMLInputElement>("agent-id").value = agentId;
    el("builder-result").textContent = `agent created: ${agentId}`;
  });

  el<HTMLFormElement>("builder-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void (async () => {
      const openapiDocument = await readFile(el<HTMLInputElement>("tools-file"));
      const knowledgeContent = await readFile(el<HTMLInputElement>("knowledge-file"));
      const knowledge = knowledgeContent
        ? [
            {
              fileName: el<HTMLInputElement>("knowledge-file").files?.[0]?.name ?? "upload.txt",
              content: knowledgeContent,
              store: el<HTMLSelectElement>("knowledge-store").value,
            },
          ]
        : [];
      await builder.submit({
        config: {
          name: el<HTMLInputElement>("agent-name").value,
          profile: el<HTMLTextAreaElement>("agent-profile").value,
          drives: readDrives(),
          triggers: [],
          tool_ids: [],
          memory_policy: {
            store_user_profile: el<HTMLInputElement>("policy-profile").checked,
            store_conversation: el<HTMLInputElement>("policy-conversation").checked,
          },
          step_limit: Number(el<HTMLInputElement>("step-limit").value) || 20,
          retrieval_k: Number(el<HTMLInputElement>("retrieval-k").value) || 4,
        },
        openapiDocument,
        knowledge,
        triggers: readTriggers(),
      });
    })();
  });

  el<HTMLButtonElement>("open-session").addEventListener("click", () => {
    void (async () => {
      const agentId = el<HTMLInputElement>("agent-id").value.trim();
      if (!agentId) return;
      const mode = el<HTMLSelectElement>("session-mode").value;
      const sessionId = await chat.open(agentId, mode);
      el("session-label").textContent = `session ${sessionId} (${mode})`;
      inspector.watch(sessionId);
      el("feedback-controls").classList.toggle("hidden", mode !== "self_taught");
    })();
  });

  el<HTMLFormElement>("chat-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const input = el<HTMLInputElement>("chat-input");
    const text = input.value.trim();
    if (!text) return;
    input.value = "";
    void chat.sendUtterance(text);
  });

  el<HTMLButtonElement>("feedback-accept").addEventListener("click", () => {
    void chat.sendFeedback("accept", el<HTMLInputElement>("feedback-note").value);
  });
  el<HTMLButtonElement>("feedback-reject").addEventListener("click", () => {
    void chat.sendFeedback("reject", el<HTMLInputElement>("feedback-note").value);
  });
}

declare global {
  interface Window {
    AGENTLOOP_BASE_URL?: string;
  }
}

if (typeof document !== "undefined" && document.getElementById("builder-form")) {
  boot(window.AGENTLOOP_BASE_URL ?? "/api");
}

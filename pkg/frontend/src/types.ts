/**
 * Wire types shared with the agentloop service. These mirror the documented
 * REST/SSE payload shapes exactly; the console never invents fields.
 */

export interface TextBlockElement {
  kind: "text_block";
  text: string;
}

export interface ButtonElement {
  kind: "button";
  label: string;
  element_id: string;
}

export interface OptionListElement {
  kind: "option_list";
  label: string;
  element_id: string;
  options: string[];
}

export interface UnknownElement {
  kind: string;
  [key: string]: unknown;
}

export type LayoutElement =
  | TextBlockElement
  | ButtonElement
  | OptionListElement
  | UnknownElement;

export interface LayoutPlan {
  elements: LayoutElement[];
}

export type InputEvent =
  | { kind: "utterance"; text: string }
  | { kind: "ui_action"; element_id: string; label: string }
  | { kind: "file_upload"; name: string; media_type: string; byte_count: number }
  | { kind: "image_ref"; caption: string | null };

export interface Verdict {
  kind: "continue" | "bypass" | "spawn_subgoals" | "halt";
  response?: string;
  goals?: string[];
  reason?: "finished" | "step_limit";
}

export interface CycleTrace {
  cycle_index: number;
  thought_text: string;
  directive: { action: string; [key: string]: unknown } | null;
  verdict: Verdict;
  effects: string[];
}

export interface GoalView {
  goal_id: string;
  text: string;
  parent: string | null;
  status: string;
}

export interface SessionState {
  session_id: string;
  agent_id: string;
  mode: string;
  status: string;
  step_count: number;
  step_limit: number;
  goal_stack: GoalView[];
}

export interface DriveForm {
  drive_id: string;
  kind: "long_term" | "short_term" | "reactive";
  prompt_text: string;
  priority: number;
  status: string;
  pattern: string;
  response: string;
}

export interface TriggerForm {
  trigger_id: string;
  pattern: string;
  mode: "exact" | "substring";
  response: string;
  enabled: boolean;
}

export interface AgentConfigPayload {
  name: string;
  profile: string;
  drives: DriveForm[];
  triggers: TriggerForm[];
  tool_ids: string[];
  memory_policy: { store_user_profile: boolean; store_conversation: boolean };
  step_limit: number;
  retrieval_k: number;
}

export interface Violation {
  field: string;
  reason: string;
}

export interface EventResponse {
  outputs: LayoutPlan[];
  status: string;
  step_count: number;
}

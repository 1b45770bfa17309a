/**
 * Server-sent-events plumbing for the trace stream.
 *
 * The parser is a pure incremental reducer (chunk boundaries may fall
 * anywhere). TraceFollower layers reconnect-with-backoff on top and
 * deduplicates by cycle_index, so a resumed stream that replays the backlog
 * never produces duplicate rows.
 */

import type { CycleTrace } from "./types.js";

export interface SseEvent {
  id?: string;
  event?: string;
  data: string;
}

export class SseParser {
  private buffer = "";
  private current: { id?: string; event?: string; data: string[] } = { data: [] };

  /** Feed one chunk; returns every event completed by it. */
  push(chunk: string): SseEvent[] {
    this.buffer += chunk;
    const events: SseEvent[] = [];
    let newline = this.buffer.indexOf("\n");
    while (newline >= 0) {
      const line = this.buffer.slice(0, newline).replace(/\r$/, "");
      this.buffer = this.buffer.slice(newline + 1);
      if (line === "") {
        if (this.current.data.length > 0 || this.current.event || this.current.id) {
          events.push({
            id: this.current.id,
            event: this.current.event,
            data: this.current.data.join("\n"),
          });
        }
        this.current = { data: [] };
      } else if (!line.startsWith(":")) {
        const colon = line.indexOf(":");
        const field = colon < 0 ? line : line.slice(0, colon);
        let value = colon < 0 ? "" : line.slice(colon + 1);
        if (value.startsWith(" ")) value = value.slice(1);
        if (field === "data") this.current.data.push(value);
        else if (field === "event") this.current.event = value;
        else if (field === "id") this.current.id = value;
      }
      newline = this.buffer.indexOf("\n");
    }
    return events;
  }
}

export type StreamConnector = (sessionId: string) => AsyncIterable<SseEvent>;

export interface FollowerCallbacks {
  onCycle: (trace: CycleTrace) => void;
  onEnd?: () => void;
  onError?: (error: unknown) => void;
}

export function streamEventsOverFetch(
  baseUrl: string,
  sessionId: string,
): AsyncIterable<SseEvent> {
  return {
    async *[Symbol.asyncIterator]() {
      const response = await fetch(`${baseUrl}/sessions/${sessionId}/trace`);
      if (!response.ok || response.body === null) {
        throw new Error(`trace stream failed: ${response.status}`);
      }
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      const parser = new SseParser();
      for (;;) {
        const { value, done } = await reader.read();
        if (done) return;
        for (const event of parser.push(decoder.decode(value, { stream: true }))) {
          yield event;
        }
      }
    },
  };
}

export class TraceFollower {
  private nextIndex = 0;
  private stopped = false;

  constructor(
    private readonly connect: StreamConnector,
    private readonly callbacks: FollowerCallbacks,
    private readonly backoffMs: number[] = [250, 500, 1000, 2000],
    private readonly sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((resolve) => setTimeout(resolve, ms)),
  ) {}

  stop(): void {
    this.stopped = true;
  }

  /** Follow the stream until the session ends; resumes across drops. */
  async run(sessionId: string): Promise<void> {
    let attempt = 0;
    while (!this.stopped) {
      try {
        for await (const event of this.connect(sessionId)) {
          if (this.stopped) return;
          if (event.event === "end") {
            this.callbacks.onEnd?.();
            return;
          }
          if (event.event !== "cycle") continue;
          const trace = JSON.parse(event.data) as CycleTrace;
          if (trace.cycle_index < this.nextIndex) continue; // replayed backlog
          this.nextIndex = trace.cycle_index + 1;
          this.callbacks.onCycle(trace);
          attempt = 0; // healthy stream resets the backoff ladder
        }
        return; // clean end of stream without an end event
      } catch (error) {
        this.callbacks.onError?.(error);
        const backoff = this.backoffMs[Math.min(attempt, this.backoffMs.length - 1)] ?? 2000;
        attempt += 1;
        await this.sleep(backoff);
      }
    }
  }
}

import { describe, expect, it } from "vitest";

import { SseEvent, SseParser, TraceFollower } from "../src/sse.js";
import type { CycleTrace } from "../src/types.js";

function cycleEvent(index: number): SseEvent {
  const trace: CycleTrace = {
    cycle_index: index,
    thought_text: "",
    directive: { action: "respond", text: `t${index}` },
    verdict: { kind: "continue" },
    effects: [],
  };
  return { id: String(index), event: "cycle", data: JSON.stringify(trace) };
}

describe("SseParser", () => {
  it("parses one event per blank line", () => {
    const parser = new SseParser();
    const events = parser.push('id: 0\nevent: cycle\ndata: {"x":1}\n\n');
    expect(events).toEqual([{ id: "0", event: "cycle", data: '{"x":1}' }]);
  });

  it("handles chunk boundaries anywhere", () => {
    const parser = new SseParser();
    const whole = 'id: 1\nevent: cycle\ndata: {"a":2}\n\nevent: end\ndata: {}\n\n';
    const collected: SseEvent[] = [];
    for (const piece of whole.match(/.{1,7}/gs) ?? []) {
      collected.push(...parser.push(piece));
    }
    expect(collected).toHaveLength(2);
    expect(collected[0]).toEqual({ id: "1", event: "cycle", data: '{"a":2}' });
    expect(collected[1]).toEqual({ id: undefined, event: "end", data: "{}" });
  });

  it("joins multi-line data and skips comments", () => {
    const parser = new SseParser();
    const events = parser.push(": ping\ndata: first\ndata: second\n\n");
    expect(events).toEqual([{ id: undefined, event: undefined, data: "first\nsecond" }]);
  });
});

describe("TraceFollower", () => {
  it("deduplicates the replayed backlog across reconnects", async () => {
    let connection = 0;
    const connect = (_sessionId: string) => ({
      async *[Symbol.asyncIterator]() {
        connection += 1;
        if (connection === 1) {
          yield cycleEvent(0);
          yield cycleEvent(1);
          throw new Error("connection dropped");
        }
        // Reconnect: the server resends the whole backlog, then continues.
        yield cycleEvent(0);
        yield cycleEvent(1);
        yield cycleEvent(2);
        yield { event: "end", data: "{}" } as SseEvent;
      },
    });

    const seen: number[] = [];
    let ended = false;
    const follower = new TraceFollower(
      connect,
      {
        onCycle: (trace) => seen.push(trace.cycle_index),
        onEnd: () => {
          ended = true;
        },
      },
      [1],
      async () => {},
    );
    await follower.run("s1");
    expect(seen).toEqual([0, 1, 2]);
    expect(ended).toBe(true);
    expect(connection).toBe(2);
  });

  it("stops when asked", async () => {
    const connect = (_sessionId: string) => ({
      async *[Symbol.asyncIterator]() {
        yield cycleEvent(0);
        yield cycleEvent(1);
      },
    });
    const seen: number[] = [];
    const follower = new TraceFollower(
      connect,
      {
        onCycle: (trace) => {
          seen.push(trace.cycle_index);
          follower.stop();
        },
      },
      [1],
      async () => {},
    );
    await follower.run("s1");
    expect(seen).toEqual([0]);
  });
});

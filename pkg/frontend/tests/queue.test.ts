import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { ApiError, QueueApi } from "../src/api.js";
import { QueueScreen } from "../src/queue.js";
import type {
  CandidateView,
  DecisionResponse,
  HeatmapPayload,
} from "../src/types.js";

function candidate(
  id: string,
  over: Partial<CandidateView> = {},
): CandidateView {
  return {
    id,
    source_text: "2.0 * in_hazard",
    origin: "llm",
    status: "pending_review",
    failure_reason: "",
    lint_findings: [],
    decision: null,
    fpe_metrics: null,
    fitness: null,
    history: [["generated", "pending_review"]],
    live: true,
    run_id: null,
    ...over,
  };
}

function grid(id: string): HeatmapPayload {
  return {
    candidate_id: id,
    x_min: 0,
    x_max: 3,
    y_min: 0,
    y_max: 3,
    resolution: 3,
    values: [
      [-1, 0, 1],
      [0, 0, 0],
      [1, 0, -1],
    ],
    hazards: [{ x: 1, y: 1, radius: 0.5 }],
    goal: { x: 2, y: 2, radius: 1 },
  };
}

class FakeQueueApi implements QueueApi {
  rows: CandidateView[] = [];
  listError: unknown = null;
  decideError: unknown = null;
  decideDelay = false;
  decideCalls: { id: string; verdict: string; note?: string }[] = [];
  private release: (() => void) | null = null;

  async candidates(status?: string): Promise<CandidateView[]> {
    if (this.listError) throw this.listError;
    return this.rows
      .filter((r) => status === undefined || r.status === status)
      .map((r) => ({ ...r }));
  }

  async heatmap(id: string): Promise<HeatmapPayload> {
    return grid(id);
  }

  decide(
    id: string,
    verdict: "approve" | "reject",
    note?: string,
  ): Promise<DecisionResponse> {
    this.decideCalls.push({ id, verdict, note });
    if (this.decideError) return Promise.reject(this.decideError);
    const settle = (): DecisionResponse => {
      this.rows = this.rows.filter((r) => r.id !== id);
      return {
        candidate_id: id,
        decision: { verdict, note: note ?? "", source: "remote" },
      };
    };
    if (this.decideDelay) {
      return new Promise((resolve) => {
        this.release = () => resolve(settle());
      });
    }
    return Promise.resolve(settle());
  }

  releaseDecide(): void {
    this.release?.();
    this.release = null;
  }
}

async function flush(turns = 30): Promise<void> {
  for (let i = 0; i < turns; i++) {
    await Promise.resolve();
  }
}

function card(root: HTMLElement, id: string): HTMLElement | null {
  return root.querySelector(`[data-candidate-id="${id}"]`);
}

let root: HTMLElement;
let api: FakeQueueApi;
let screen: QueueScreen;

beforeEach(() => {
  vi.useFakeTimers();
  document.body.innerHTML = "";
  root = document.createElement("div");
  document.body.appendChild(root);
  api = new FakeQueueApi();
  screen = new QueueScreen(root, api, 2000);
});

afterEach(() => {
  screen.stop();
  vi.useRealTimers();
});

describe("QueueScreen", () => {
  it("renders pending candidates with findings and a heatmap", async () => {
    api.rows = [
      candidate("i00-c00"),
      candidate("i00-c01", {
        source_text: "clip(dist_goal, 0.0, 4.0)",
        lint_findings: [
          {
            rule: "magnitude",
            severity: "warning",
            message: "peak magnitude 120.0 is large",
          },
        ],
      }),
    ];
    screen.start();
    await flush();
    expect(root.querySelectorAll("article.candidate").length).toBe(2);
    const first = card(root, "i00-c00");
    expect(first?.querySelector("pre.expression")?.textContent).toBe(
      "2.0 * in_hazard",
    );
    expect(first?.querySelector("svg.heatmap")).not.toBeNull();
    const second = card(root, "i00-c01");
    expect(second?.querySelector("li.finding")?.textContent).toBe(
      "warning: peak magnitude 120.0 is large",
    );
  });

  it("shows an empty state when nothing is waiting", async () => {
    screen.start();
    await flush();
    expect(root.querySelector("p.empty")?.textContent).toContain(
      "No candidates",
    );
  });

  it("picks up new candidates on the next poll", async () => {
    api.rows = [candidate("i00-c00")];
    screen.start();
    await flush();
    expect(card(root, "i00-c01")).toBeNull();
    api.rows.push(candidate("i00-c01"));
    await vi.advanceTimersByTimeAsync(2000);
    await flush();
    expect(card(root, "i00-c00")).not.toBeNull();
    expect(card(root, "i00-c01")).not.toBeNull();
  });

  it("decides exactly once even on a double click", async () => {
    api.rows = [candidate("i00-c00")];
    api.decideDelay = true;
    screen.start();
    await flush();
    const approve = card(root, "i00-c00")?.querySelector(
      "button.approve",
    ) as HTMLButtonElement;
    const reject = card(root, "i00-c00")?.querySelector(
      "button.reject",
    ) as HTMLButtonElement;
    approve.click();
    expect(approve.disabled).toBe(true);
    expect(reject.disabled).toBe(true);
    // force a second activation past the disabled attribute
    approve.dispatchEvent(new MouseEvent("click"));
    reject.dispatchEvent(new MouseEvent("click"));
    expect(api.decideCalls.length).toBe(1);
    api.releaseDecide();
    await flush();
    expect(card(root, "i00-c00")).toBeNull();
    expect(api.decideCalls).toEqual([
      { id: "i00-c00", verdict: "approve", note: "" },
    ]);
  });

  it("sends the reviewer note along with the verdict", async () => {
    api.rows = [candidate("i00-c00")];
    screen.start();
    await flush();
    const row = card(root, "i00-c00")!;
    (row.querySelector("input.note") as HTMLInputElement).value =
      "hazard term looks right";
    (row.querySelector("button.reject") as HTMLButtonElement).click();
    await flush();
    expect(api.decideCalls).toEqual([
      { id: "i00-c00", verdict: "reject", note: "hazard term looks right" },
    ]);
  });

  it("removes the row once the decision lands", async () => {
    api.rows = [candidate("i00-c00"), candidate("i00-c01")];
    screen.start();
    await flush();
    (card(root, "i00-c00")?.querySelector(
      "button.approve",
    ) as HTMLButtonElement).click();
    await flush();
    expect(card(root, "i00-c00")).toBeNull();
    expect(card(root, "i00-c01")).not.toBeNull();
  });

  it("treats a conflict as already decided elsewhere", async () => {
    api.rows = [candidate("i00-c00")];
    api.decideError = new ApiError(
      409,
      {
        error: "candidate already decided",
        decision: { verdict: "approve", note: "", source: "remote" },
      },
      "409: candidate already decided",
    );
    screen.start();
    await flush();
    (card(root, "i00-c00")?.querySelector(
      "button.approve",
    ) as HTMLButtonElement).click();
    await flush();
    expect(card(root, "i00-c00")).toBeNull();
    const toast = document.querySelector("#toasts .toast");
    expect(toast?.textContent).toContain("already decided");
    // even if the server still lists it, the row stays hidden
    await vi.advanceTimersByTimeAsync(2000);
    await flush();
    expect(card(root, "i00-c00")).toBeNull();
  });

  it("shows a retry banner when the listing fails", async () => {
    api.rows = [candidate("i00-c00")];
    api.listError = new TypeError("fetch failed");
    screen.start();
    await flush();
    const banner = root.querySelector(".banner");
    expect(banner).not.toBeNull();
    expect(banner?.textContent).toContain("Network error");
    expect(root.querySelectorAll("article.candidate").length).toBe(0);

    api.listError = null;
    (banner?.querySelector("button") as HTMLButtonElement).click();
    await flush();
    expect(root.querySelector(".banner")).toBeNull();
    expect(card(root, "i00-c00")).not.toBeNull();
  });

  it("re-enables the buttons when a decision cannot be sent", async () => {
    api.rows = [candidate("i00-c00")];
    api.decideError = new TypeError("network down");
    screen.start();
    await flush();
    const approve = card(root, "i00-c00")?.querySelector(
      "button.approve",
    ) as HTMLButtonElement;
    approve.click();
    await flush();
    expect(api.decideCalls.length).toBe(1);
    expect(approve.disabled).toBe(false);
    expect(root.querySelector(".banner")).not.toBeNull();
    expect(card(root, "i00-c00")).not.toBeNull();

    api.decideError = null;
    approve.click();
    await flush();
    expect(api.decideCalls.length).toBe(2);
    expect(card(root, "i00-c00")).toBeNull();
    expect(root.querySelector(".banner")).toBeNull();
  });
});

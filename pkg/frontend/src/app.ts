/** Hash routing and screen lifecycle. All state lives on the server;
 * reloading the page at any route rebuilds the same view from the API.
 */

import { DashboardApi, QueueApi } from "./api.js";
import { DEFAULT_POLL_MS } from "./poller.js";
import { QueueScreen } from "./queue.js";
import { RunScreen, RunsScreen } from "./dashboard.js";

export type ConsoleApi = QueueApi & DashboardApi;

export type Route =
  | { kind: "queue" }
  | { kind: "runs" }
  | { kind: "run"; runId: string };

/** Map a location hash to a route; anything unknown lands on the queue. */
export function route(hash: string): Route {
  const parts = hash
    .replace(/^#/, "")
    .split("/")
    .filter((p) => p !== "");
  if (parts[0] === "runs") {
    if (parts.length === 1) {
      return { kind: "runs" };
    }
    return { kind: "run", runId: decodeURIComponent(parts[1]) };
  }
  return { kind: "queue" };
}

interface Screen {
  start(): void;
  stop(): void;
}

export class App {
  private active: Screen | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ConsoleApi,
    private readonly intervalMs: number = DEFAULT_POLL_MS,
  ) {}

  mount(): void {
    window.addEventListener("hashchange", () => this.sync());
    this.sync();
  }

  sync(): void {
    this.active?.stop();
    const target = route(window.location.hash);
    this.root.innerHTML = "";
    const host = document.createElement("div");
    host.className = "screen";
    this.root.appendChild(host);
    this.active = this.build(host, target);
    this.active.start();
    this.markNav(target);
  }

  private build(host: HTMLElement, target: Route): Screen {
    switch (target.kind) {
      case "runs":
        return new RunsScreen(host, this.api, this.intervalMs);
      case "run":
        return new RunScreen(host, this.api, target.runId, this.intervalMs);
      default:
        return new QueueScreen(host, this.api, this.intervalMs);
    }
  }

  private markNav(target: Route): void {
    const section = target.kind === "queue" ? "#/queue" : "#/runs";
    for (const link of document.querySelectorAll("nav a")) {
      const href = link.getAttribute("href") ?? "";
      link.classList.toggle("current", href === section);
    }
  }
}

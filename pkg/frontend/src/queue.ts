/** Review queue screen: poll pending candidates, render, decide. */

import { ApiError, QueueApi } from "./api.js";
import { CandidateView, HeatmapPayload } from "./types.js";
import { createPoller, DEFAULT_POLL_MS, Poller } from "./poller.js";
import { renderHeatmap } from "./heatmap.js";
import { clearBanner, showBanner, showToast } from "./toast.js";

const MINI_RESOLUTION = 24;

export class QueueScreen {
  private readonly root: HTMLElement;
  private readonly api: QueueApi;
  private readonly poller: Poller;
  private readonly list: HTMLElement;
  /** Candidate ids with a decision request in flight. */
  private readonly busy = new Set<string>();
  /** Candidate ids decided locally; hidden even if a poll races the server. */
  private readonly decided = new Set<string>();
  private readonly heatmaps = new Map<string, HeatmapPayload>();
  /** Serialized last-rendered rows; unchanged polls skip the re-render so
   * in-progress notes and clicks are not clobbered every two seconds. */
  private lastSnapshot = "";

  constructor(root: HTMLElement, api: QueueApi, intervalMs: number = DEFAULT_POLL_MS) {
    this.root = root;
    this.api = api;
    this.root.innerHTML = "";
    const heading = document.createElement("h2");
    heading.textContent = "Review queue";
    this.list = document.createElement("div");
    this.list.className = "queue";
    this.root.appendChild(heading);
    this.root.appendChild(this.list);
    this.poller = createPoller(() => this.refresh(), intervalMs);
  }

  start(): void {
    this.poller.start();
  }

  stop(): void {
    this.poller.stop();
  }

  async refresh(): Promise<void> {
    let rows: CandidateView[];
    try {
      rows = await this.api.candidates("pending_review");
    } catch (err) {
      showBanner(this.root, describe(err), () => {
        void this.refresh();
      });
      return;
    }
    clearBanner(this.root);
    const visible = rows.filter((row) => !this.decided.has(row.id));
    const snapshot = JSON.stringify(visible);
    if (snapshot === this.lastSnapshot) {
      return;
    }
    await this.render(visible);
    this.lastSnapshot = snapshot;
  }

  private async render(rows: CandidateView[]): Promise<void> {
    const cards: HTMLElement[] = [];
    for (const row of rows) {
      cards.push(await this.card(row));
    }
    this.list.innerHTML = "";
    if (cards.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty";
      empty.textContent = "No candidates waiting for review.";
      this.list.appendChild(empty);
      return;
    }
    for (const card of cards) {
      this.list.appendChild(card);
    }
  }

  private async card(row: CandidateView): Promise<HTMLElement> {
    const card = document.createElement("article");
    card.className = "candidate";
    card.dataset.candidateId = row.id;

    const title = document.createElement("h3");
    title.textContent = `${row.id} (${row.origin})`;
    card.appendChild(title);

    const expr = document.createElement("pre");
    expr.className = "expression";
    expr.textContent = row.source_text;
    card.appendChild(expr);

    if (row.lint_findings.length > 0) {
      const findings = document.createElement("ul");
      findings.className = "findings";
      for (const finding of row.lint_findings) {
        const item = document.createElement("li");
        item.className = `finding ${finding.severity}`;
        item.textContent = `${finding.severity}: ${finding.message}`;
        findings.appendChild(item);
      }
      card.appendChild(findings);
    }

    const map = await this.miniHeatmap(row.id);
    if (map) {
      card.appendChild(map);
    }

    card.appendChild(this.actions(row.id));
    return card;
  }

  private async miniHeatmap(id: string): Promise<SVGSVGElement | null> {
    let payload = this.heatmaps.get(id);
    if (!payload) {
      try {
        payload = await this.api.heatmap(id, MINI_RESOLUTION);
      } catch {
        return null;
      }
      this.heatmaps.set(id, payload);
    }
    return renderHeatmap(payload, 5);
  }

  private actions(id: string): HTMLElement {
    const bar = document.createElement("div");
    bar.className = "actions";
    const approve = document.createElement("button");
    approve.className = "approve";
    approve.textContent = "approve";
    const reject = document.createElement("button");
    reject.className = "reject";
    reject.textContent = "reject";
    const note = document.createElement("input");
    note.type = "text";
    note.placeholder = "note (optional)";
    note.className = "note";
    const submit = (verdict: "approve" | "reject") => {
      void this.decide(id, verdict, note.value, [approve, reject]);
    };
    approve.addEventListener("click", () => submit("approve"));
    reject.addEventListener("click", () => submit("reject"));
    bar.appendChild(note);
    bar.appendChild(approve);
    bar.appendChild(reject);
    return bar;
  }

  private async decide(
    id: string,
    verdict: "approve" | "reject",
    note: string,
    buttons: HTMLButtonElement[],
  ): Promise<void> {
    if (this.busy.has(id) || this.decided.has(id)) {
      return;
    }
    this.busy.add(id);
    for (const button of buttons) {
      button.disabled = true;
    }
    try {
      await this.api.decide(id, verdict, note);
      this.decided.add(id);
      this.removeRow(id);
      await this.refresh();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.decided.add(id);
        this.removeRow(id);
        showToast(`${id} was already decided`);
      } else {
        for (const button of buttons) {
          button.disabled = false;
        }
        showBanner(this.root, describe(err), () => {
          void this.refresh();
        });
      }
    } finally {
      this.busy.delete(id);
    }
  }

  private removeRow(id: string): void {
    this.list
      .querySelector(`[data-candidate-id="${id}"]`)
      ?.remove();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return `Request failed (${err.status}): ${err.message}`;
  }
  if (err instanceof Error) {
    return `Network error: ${err.message}`;
  }
  return "Network error";
}

/** Run dashboard: run list, per-run charts, and iteration statuses.
 * Both screens poll and skip the re-render when the payload is
 * unchanged, so an idle page does not churn the DOM.
 */

import { ApiError, DashboardApi } from "./api.js";
import { MetricsPayload, RunDetail } from "./types.js";
import { createPoller, DEFAULT_POLL_MS, Poller } from "./poller.js";
import {
  CurveField,
  curveSeries,
  fitnessTrail,
  scaleSeries,
  Viewport,
  XY,
} from "./series.js";
import { clearBanner, showBanner } from "./toast.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const CHART_VIEW: Viewport = { width: 420, height: 160, pad: 12 };

/** Flat list of runs, each linking to its dashboard page. */
export class RunsScreen {
  private readonly poller: Poller;
  private lastSnapshot = "";

  constructor(
    private readonly root: HTMLElement,
    private readonly api: DashboardApi,
    intervalMs: number = DEFAULT_POLL_MS,
  ) {
    this.poller = createPoller(() => this.load(), intervalMs);
  }

  start(): void {
    this.poller.start();
  }

  stop(): void {
    this.poller.stop();
  }

  async load(): Promise<void> {
    let runs;
    try {
      runs = await this.api.runs();
    } catch (err) {
      showBanner(this.root, describe(err), () => {
        void this.load();
      });
      return;
    }
    clearBanner(this.root);
    const snapshot = JSON.stringify(runs);
    if (snapshot === this.lastSnapshot) {
      return;
    }
    this.lastSnapshot = snapshot;

    this.root.innerHTML = "";
    const heading = document.createElement("h2");
    heading.textContent = "Runs";
    this.root.appendChild(heading);
    if (runs.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty";
      empty.textContent = "No runs recorded yet.";
      this.root.appendChild(empty);
      return;
    }
    const list = document.createElement("ul");
    list.className = "runs";
    for (const run of runs) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = `#/runs/${run.run_id}`;
      link.textContent = run.run_id;
      const meta = document.createElement("span");
      meta.className = "meta";
      const best =
        run.best_fitness === null
          ? "no best yet"
          : `best ${run.best_fitness.toFixed(4)} (${run.best_candidate})`;
      meta.textContent = ` ${run.status}, ${run.iterations} iterations, ${best}`;
      item.appendChild(link);
      item.appendChild(meta);
      list.appendChild(item);
    }
    this.root.appendChild(list);
  }
}

/** One run: status, best record, iteration table, learning curves. */
export class RunScreen {
  private readonly poller: Poller;
  private lastSnapshot = "";

  constructor(
    private readonly root: HTMLElement,
    private readonly api: DashboardApi,
    private readonly runId: string,
    intervalMs: number = DEFAULT_POLL_MS,
  ) {
    this.poller = createPoller(() => this.load(), intervalMs);
  }

  start(): void {
    this.poller.start();
  }

  stop(): void {
    this.poller.stop();
  }

  async load(): Promise<void> {
    let detail: RunDetail;
    let metrics: MetricsPayload;
    try {
      detail = await this.api.run(this.runId);
      metrics = await this.api.runMetrics(this.runId);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        if (this.lastSnapshot !== "404") {
          this.lastSnapshot = "404";
          this.renderNotFound();
        }
        return;
      }
      showBanner(this.root, describe(err), () => {
        void this.load();
      });
      return;
    }
    clearBanner(this.root);
    const snapshot = JSON.stringify([detail, metrics]);
    if (snapshot === this.lastSnapshot) {
      return;
    }
    this.lastSnapshot = snapshot;
    this.render(detail, metrics);
  }

  private renderNotFound(): void {
    this.root.innerHTML = "";
    const box = document.createElement("div");
    box.className = "not-found";
    const heading = document.createElement("h2");
    heading.textContent = "Run not found";
    const text = document.createElement("p");
    text.textContent = `There is no run named "${this.runId}".`;
    const back = document.createElement("a");
    back.href = "#/runs";
    back.textContent = "back to runs";
    box.appendChild(heading);
    box.appendChild(text);
    box.appendChild(back);
    this.root.appendChild(box);
  }

  private render(detail: RunDetail, metrics: MetricsPayload): void {
    this.root.innerHTML = "";
    const heading = document.createElement("h2");
    heading.textContent = `Run ${detail.run_id}`;
    this.root.appendChild(heading);

    const status = document.createElement("p");
    status.className = "run-status";
    status.textContent = `status: ${detail.status}`;
    this.root.appendChild(status);

    if (detail.best) {
      const best = document.createElement("div");
      best.className = "best-record";
      const label = document.createElement("h3");
      label.textContent = `Best: ${detail.best.candidate_id} `
        + `(fitness ${detail.best.fitness.toFixed(4)}, `
        + `iteration ${detail.best.iteration})`;
      const expr = document.createElement("pre");
      expr.className = "expression";
      expr.textContent = detail.best.source_text;
      best.appendChild(label);
      best.appendChild(expr);
      this.root.appendChild(best);
    }

    this.renderIterations(detail);

    const hasCurves = Object.keys(metrics.curves).length > 0;
    const hasEvaluations = metrics.evaluations.length > 0;
    if (!hasCurves && !hasEvaluations) {
      const empty = document.createElement("p");
      empty.className = "empty";
      empty.textContent = "No evaluations recorded for this run yet.";
      this.root.appendChild(empty);
      return;
    }

    if (hasCurves) {
      this.root.appendChild(curveChart(metrics, "avg_return"));
      this.root.appendChild(curveChart(metrics, "avg_cost"));
    }
    if (hasEvaluations) {
      const trail = fitnessTrail(metrics.evaluations);
      if (trail.length > 0) {
        this.root.appendChild(
          chartSection("best fitness so far", [
            { label: "best", series: trail },
          ]),
        );
      }
    }
  }

  private renderIterations(detail: RunDetail): void {
    if (detail.iterations.length === 0) {
      return;
    }
    const section = document.createElement("section");
    section.className = "iterations";
    const heading = document.createElement("h3");
    heading.textContent = "Iterations";
    section.appendChild(heading);
    const table = document.createElement("table");
    const head = document.createElement("tr");
    for (const label of ["iteration", "candidates", "best fitness"]) {
      const cell = document.createElement("th");
      cell.textContent = label;
      head.appendChild(cell);
    }
    table.appendChild(head);
    for (const it of detail.iterations) {
      const row = document.createElement("tr");
      row.className = it.skipped ? "iteration skipped" : "iteration";

      const index = document.createElement("td");
      index.textContent = String(it.iteration);
      row.appendChild(index);

      const statuses = document.createElement("td");
      const parts = it.candidates.map((c) => `${c.id}: ${c.status}`);
      if (it.weighted) {
        parts.push(`${it.weighted.id}: ${it.weighted.status}`);
      }
      if (it.skipped) {
        parts.push(`(skipped: ${it.reason ?? "no survivors"})`);
      }
      statuses.textContent = parts.join(", ");
      row.appendChild(statuses);

      const best = document.createElement("td");
      best.textContent =
        it.best_fitness === null || it.best_fitness === undefined
          ? "-"
          : it.best_fitness.toFixed(4);
      row.appendChild(best);

      table.appendChild(row);
    }
    section.appendChild(table);
    this.root.appendChild(section);
  }
}

interface NamedSeries {
  label: string;
  series: XY[];
}

function curveChart(metrics: MetricsPayload, field: CurveField): HTMLElement {
  const named: NamedSeries[] = [];
  for (const cid of Object.keys(metrics.curves).sort()) {
    named.push({ label: cid, series: curveSeries(metrics.curves[cid], field) });
  }
  return chartSection(`${field} per epoch`, named);
}

/** An SVG line chart; every point also gets a circle carrying its raw
 * coordinates in data attributes so the values stay inspectable. */
function chartSection(title: string, named: NamedSeries[]): HTMLElement {
  const section = document.createElement("section");
  section.className = "chart";
  const heading = document.createElement("h3");
  heading.textContent = title;
  section.appendChild(heading);

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${CHART_VIEW.width} ${CHART_VIEW.height}`);
  svg.setAttribute("width", String(CHART_VIEW.width));
  svg.setAttribute("height", String(CHART_VIEW.height));

  const all = named.flatMap((n) => n.series);
  for (const { label, series } of named) {
    if (series.length === 0) {
      continue;
    }
    const scaled = scaleSeries(series, CHART_VIEW, all);
    const line = document.createElementNS(SVG_NS, "polyline");
    line.setAttribute("points", scaled.polyline);
    line.setAttribute("fill", "none");
    line.setAttribute("class", "series");
    line.setAttribute("data-label", label);
    svg.appendChild(line);
    for (const point of scaled.points) {
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", String(point.x));
      dot.setAttribute("cy", String(point.y));
      dot.setAttribute("r", "2.5");
      dot.setAttribute("class", "point");
      dot.setAttribute("data-series", label);
      dot.setAttribute("data-epoch", String(point.source.x));
      dot.setAttribute("data-value", String(point.source.y));
      svg.appendChild(dot);
    }
  }
  section.appendChild(svg);

  const legend = document.createElement("ul");
  legend.className = "legend";
  for (const { label } of named) {
    const item = document.createElement("li");
    item.textContent = label;
    legend.appendChild(item);
  }
  section.appendChild(legend);
  return section;
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

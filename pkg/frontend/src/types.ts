/** Payload shapes, mirroring the service responses field for field.
 * The console never mutates server state except through the decision
 * POST, so these are all read-only views.
 */

export interface RunSummary {
  run_id: string;
  status: string;
  iterations: number;
  best_fitness: number | null;
  best_candidate: string | null;
}

export interface IterationCandidate {
  id: string;
  status: string;
  fitness?: number | null;
}

export interface IterationSummary {
  iteration: number;
  skipped: boolean;
  candidates: IterationCandidate[];
  reason?: string;
  weighted?: IterationCandidate;
  best_fitness?: number | null;
}

export interface BestRecord {
  candidate_id: string;
  source_text: string;
  fitness: number;
  iteration: number;
  metrics: MetricsAggregate | null;
}

export interface RunDetail {
  run_id: string;
  status: string;
  iterations: IterationSummary[];
  best: BestRecord | null;
  [extra: string]: unknown;
}

export interface MetricsAggregate {
  avg_return: number;
  avg_cost: number;
  tcr: number;
  her: number;
  episodes: number;
  wall_clock_s: number;
}

export interface EvaluationRow {
  iteration: number;
  candidate_id: string;
  origin: string;
  phase: string;
  epochs: number;
  avg_return: number | null;
  avg_cost: number | null;
  tcr: number | null;
  her: number | null;
  fitness: number | null;
  wall_clock_s: number | null;
}

export interface CurvePoint {
  epoch: number;
  avg_return: number;
  avg_cost: number;
  avg_shaped_return: number;
  episodes: number;
  tcr: number;
  her: number;
}

export interface MetricsPayload {
  run_id: string;
  evaluations: EvaluationRow[];
  curves: Record<string, CurvePoint[]>;
}

export interface LintFinding {
  rule: string;
  severity: string;
  message: string;
}

export interface Decision {
  verdict: "approve" | "reject";
  note: string;
  source: string;
}

export interface CandidateView {
  id: string;
  source_text: string;
  origin: string;
  status: string;
  failure_reason: string;
  lint_findings: LintFinding[];
  decision: Decision | null;
  fpe_metrics: MetricsAggregate | null;
  fitness: number | null;
  history: [string, string][];
  live: boolean;
  run_id: string | null;
}

export interface Circle {
  x: number;
  y: number;
  radius: number;
}

export interface HeatmapPayload {
  candidate_id: string;
  x_min: number;
  x_max: number;
  y_min: number;
  y_max: number;
  resolution: number;
  values: number[][];
  hazards: Circle[];
  goal: Circle;
}

export interface DecisionResponse {
  candidate_id: string;
  decision: Decision;
}

// Typed client for the dosefind service. Every number the UI shows comes
// through here: the client never computes statistics locally.

export interface TrialSettings {
  num_doses: number;
  target: number;
  phi1: number | null;
  phi2: number | null;
  max_n: number;
  cohort_size: number;
  start_dose: number;
}

export interface PriorSpec {
  skeleton: number[];
  pess: number[];
  robustify: boolean;
  mixture_weight: number | null;
}

export interface DesignRecord {
  id: string;
  created_at: string;
  settings: TrialSettings;
  prior: PriorSpec;
  design: { method: string; sigma2?: number };
  has_decision_table: boolean;
}

export interface BoinTableJson {
  phi: number;
  phi1: number;
  phi2: number;
  n_grid: number[];
  doses: {
    dose: number;
    escalate_max: number[];
    deescalate_min: number[];
    eliminate_min: (number | null)[];
  }[];
  notes: string[];
}

export interface DoseCounts {
  n: number;
  y: number;
}

export interface TrialStateJson {
  doses: DoseCounts[];
  current_dose: number;
  eliminated_from: number | null;
  terminated: boolean;
  history: AuditEvent[];
}

export interface AuditEvent {
  cohort_index: number;
  dose: number;
  n: number;
  n_dlt: number;
  decision: string;
}

export interface TrialView {
  trial_id: string;
  design_id: string;
  status: "active" | "complete" | "terminated";
  state: TrialStateJson;
  recommended_dose: number | null;
  selection?: SelectionResult;
}

export interface CohortResult {
  decision: string;
  next_dose: number | null;
  status: "active" | "complete" | "terminated";
  state: TrialStateJson;
}

export interface SelectionResult {
  selected_dose: number | null;
  isotonic_estimates: number[];
  admissible_doses: number[];
}

export interface OcRow {
  design: string;
  scenario: string;
  mtd: number;
  n_trials: number;
  pcs: number;
  pct_at_mtd: number;
  pct_above_mtd: number;
  risk_overdosing: number;
  risk_poor_allocation: number;
  mean_enrolled: number;
  pct_terminated: number;
}

export interface JobStatus {
  job_id: string;
  state: "queued" | "running" | "done" | "failed" | "canceled";
  fraction_done: number;
  error?: string;
  result?: { rows: OcRow[]; summary: Record<string, unknown>[] };
}

export class ApiRequestError extends Error {
  constructor(public status: number, public body: { error?: string; errors?: string[] }) {
    super(body.error ?? `request failed with ${status}`);
  }
}

async function request<T>(base: string, method: string, path: string, payload?: unknown): Promise<T> {
  const resp = await fetch(base + path, {
    method,
    headers: payload === undefined ? {} : { "Content-Type": "application/json" },
    body: payload === undefined ? undefined : JSON.stringify(payload),
  });
  const text = await resp.text();
  const body = text ? JSON.parse(text) : {};
  if (!resp.ok) {
    throw new ApiRequestError(resp.status, body);
  }
  return body as T;
}

export class DosefindClient {
  constructor(public base: string = "") {}

  createDesign(payload: { settings: Partial<TrialSettings>; prior: Partial<PriorSpec>; design?: { method: string } }) {
    return request<DesignRecord>(this.base, "POST", "/designs", payload);
  }

  getDesign(id: string) {
    return request<DesignRecord>(this.base, "GET", `/designs/${id}`);
  }

  getDecisionTable(id: string) {
    return request<BoinTableJson>(this.base, "GET", `/designs/${id}/decision-table`);
  }

  async getDecisionTableCsv(id: string): Promise<string> {
    const resp = await fetch(`${this.base}/designs/${id}/decision-table?format=csv`);
    if (!resp.ok) {
      throw new ApiRequestError(resp.status, (await resp.json()) as { error?: string });
    }
    return resp.text();
  }

  startSimulation(designId: string, plan: unknown) {
    return request<{ job_id: string; state: string }>(
      this.base, "POST", `/designs/${designId}/simulations`, plan);
  }

  jobStatus(jobId: string) {
    return request<JobStatus>(this.base, "GET", `/simulations/${jobId}`);
  }

  cancelJob(jobId: string) {
    return request<{ state: string }>(this.base, "POST", `/simulations/${jobId}/cancel`);
  }

  csvDownloadUrl(jobId: string): string {
    return `${this.base}/simulations/${jobId}?format=csv`;
  }

  createTrial(designId: string) {
    return request<TrialView>(this.base, "POST", "/trials", { design_id: designId });
  }

  getTrial(trialId: string) {
    return request<TrialView>(this.base, "GET", `/trials/${trialId}`);
  }

  postCohort(trialId: string, cohort: { dose: number; n: number; n_dlt: number }) {
    return request<CohortResult>(this.base, "POST", `/trials/${trialId}/cohorts`, cohort);
  }

  selectMtd(trialId: string) {
    return request<SelectionResult>(this.base, "POST", `/trials/${trialId}/select-mtd`);
  }
}

// Simulation dashboard: submit a plan for the active design, stream progress,
// chart the five operating characteristics, link the CSV artifact.

import { DosefindClient } from "./api.js";
import type { DesignRecord, JobStatus, OcRow } from "./api.js";
import { metricBars } from "./charts.js";

const REFERENCE_FIXED: { name: string; true_p: number[]; skeleton: number[] }[] = [
  { name: "Scenario 1", true_p: [0.30, 0.42, 0.50, 0.60, 0.65], skeleton: [0.30, 0.42, 0.54, 0.64, 0.73] },
  { name: "Scenario 2", true_p: [0.15, 0.27, 0.40, 0.50, 0.65], skeleton: [0.19, 0.30, 0.42, 0.54, 0.64] },
  { name: "Scenario 3", true_p: [0.08, 0.15, 0.31, 0.45, 0.55], skeleton: [0.10, 0.19, 0.30, 0.42, 0.54] },
  { name: "Scenario 4", true_p: [0.09, 0.12, 0.15, 0.30, 0.45], skeleton: [0.04, 0.10, 0.19, 0.30, 0.42] },
  { name: "Scenario 5", true_p: [0.05, 0.08, 0.10, 0.14, 0.30], skeleton: [0.01, 0.04, 0.10, 0.19, 0.30] },
];

export class DashboardScreen {
  private design: DesignRecord | null = null;
  private pollTimer: number | null = null;

  constructor(private client: DosefindClient, private root: HTMLElement) {}

  setDesign(record: DesignRecord | null): void {
    this.design = record;
  }

  render(): void {
    this.root.innerHTML = "";
    if (!this.design) {
      const p = document.createElement("p");
      p.textContent = "Create a design in the wizard first.";
      this.root.appendChild(p);
      return;
    }
    const form = document.createElement("form");
    form.className = "panel";
    const title = document.createElement("h3");
    title.textContent = `Simulate design ${this.design.id}`;
    form.appendChild(title);

    const boxes: HTMLInputElement[] = [];
    const scenarioList = document.createElement("div");
    scenarioList.className = "scenario-list";
    for (const scen of REFERENCE_FIXED) {
      const label = document.createElement("label");
      const box = document.createElement("input");
      box.type = "checkbox";
      box.checked = scen.name === "Scenario 3";
      boxes.push(box);
      label.append(box, ` ${scen.name}: [${scen.true_p.join(", ")}]`);
      scenarioList.appendChild(label);
    }
    form.appendChild(scenarioList);

    const trials = document.createElement("input");
    trials.type = "number";
    trials.value = "2000";
    const seed = document.createElement("input");
    seed.type = "number";
    seed.value = "20260808";
    const trialsRow = document.createElement("label");
    trialsRow.className = "field";
    trialsRow.append("Trials per scenario ", trials);
    const seedRow = document.createElement("label");
    seedRow.className = "field";
    seedRow.append("Master seed ", seed);
    form.append(trialsRow, seedRow);

    const submit = document.createElement("button");
    submit.type = "submit";
    submit.textContent = "Run simulation";
    form.appendChild(submit);

    const syncSubmit = () => {
      submit.disabled = !boxes.some((b) => b.checked);
    };
    boxes.forEach((b) => b.addEventListener("change", syncSubmit));
    syncSubmit();

    const status = document.createElement("div");
    status.className = "job-status";
    const results = document.createElement("div");
    this.root.append(form, status, results);

    form.addEventListener("submit", async (ev) => {
      ev.preventDefault();
      results.innerHTML = "";
      const scenarios = REFERENCE_FIXED.filter((_, i) => boxes[i].checked);
      const job = await this.client.startSimulation(this.design!.id, {
        scenarios,
        n_trials: Number(trials.value),
        master_seed: Number(seed.value),
      });
      this.poll(job.job_id, status, results);
    });
  }

  private poll(jobId: string, status: HTMLElement, results: HTMLElement): void {
    if (this.pollTimer !== null) window.clearInterval(this.pollTimer);
    const renderStatus = (st: JobStatus) => {
      status.innerHTML = "";
      const badge = document.createElement("span");
      badge.className = `badge badge-${st.state}`;
      badge.textContent = st.state;
      const bar = document.createElement("progress");
      bar.max = 1;
      bar.value = st.fraction_done;
      status.append(badge, bar, ` ${(st.fraction_done * 100).toFixed(0)}%`);
      if (st.state === "running" || st.state === "queued") {
        const cancel = document.createElement("button");
        cancel.textContent = "Cancel";
        cancel.addEventListener("click", () => void this.client.cancelJob(jobId));
        status.appendChild(cancel);
      }
      if (st.error) {
        const err = document.createElement("p");
        err.className = "errors";
        err.textContent = st.error;
        status.appendChild(err);
      }
    };

    this.pollTimer = window.setInterval(async () => {
      const st = await this.client.jobStatus(jobId);
      renderStatus(st);
      if (st.state === "done" && st.result) {
        window.clearInterval(this.pollTimer!);
        this.pollTimer = null;
        this.renderResults(results, st.result.rows, jobId);
      } else if (st.state === "failed" || st.state === "canceled") {
        // canceled jobs keep partial results hidden
        window.clearInterval(this.pollTimer!);
        this.pollTimer = null;
        results.innerHTML = "";
      }
    }, 400);
  }

  private renderResults(container: HTMLElement, rows: OcRow[], jobId: string): void {
    container.innerHTML = "";
    const download = document.createElement("a");
    download.href = this.client.csvDownloadUrl(jobId);
    download.textContent = "Download oc_summary.csv";
    download.className = "download";
    container.appendChild(download);
    for (const scenario of [...new Set(rows.map((r) => r.scenario))]) {
      container.appendChild(metricBars(rows, scenario));
    }
  }
}

// Live trial conduct: enter cohort outcomes as they happen, show the next
// recommendation, the dose ladder, the audit trail, and the final MTD card.
// The screen always redraws from the latest server snapshot; a 409 means
// someone else moved the trial and the user is told to reload.

import { ApiRequestError, DosefindClient } from "./api.js";
import type { DesignRecord, TrialView } from "./api.js";
import { cohortBanner, doseLadder, selectionSummary, trialStatusLine } from "./model.js";

export class ConductScreen {
  private design: DesignRecord | null = null;
  private trialId: string | null = null;

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
    const controls = document.createElement("div");
    controls.className = "panel";
    const start = document.createElement("button");
    start.textContent = this.trialId ? "Start a new trial" : "Start trial";
    controls.appendChild(start);
    const view = document.createElement("div");
    this.root.append(controls, view);

    start.addEventListener("click", async () => {
      const trial = await this.client.createTrial(this.design!.id);
      this.trialId = trial.trial_id;
      await this.refresh(view, null);
    });

    if (this.trialId) {
      void this.refresh(view, null);
    }
  }

  private async refresh(container: HTMLElement, banner: string | null): Promise<void> {
    const trial = await this.client.getTrial(this.trialId!);
    container.innerHTML = "";

    if (banner) {
      const el = document.createElement("div");
      el.className = trial.status === "terminated" ? "banner banner-stop" : "banner";
      el.textContent = banner;
      container.appendChild(el);
    }

    const status = document.createElement("p");
    status.className = "status-line";
    status.textContent = trialStatusLine(trial);
    container.appendChild(status);

    container.appendChild(this.ladder(trial));

    if (trial.status === "active") {
      container.appendChild(this.cohortForm(trial, container));
    } else if (!trial.selection) {
      const btn = document.createElement("button");
      btn.textContent = "Select MTD";
      btn.addEventListener("click", async () => {
        await this.client.selectMtd(this.trialId!);
        await this.refresh(container, null);
      });
      container.appendChild(btn);
    }

    if (trial.selection) {
      container.appendChild(this.mtdCard(trial));
    }

    container.appendChild(this.timeline(trial));
  }

  private ladder(trial: TrialView): HTMLElement {
    const table = document.createElement("table");
    table.className = "ladder";
    const head = document.createElement("tr");
    for (const h of ["dose", "treated", "DLTs", ""]) {
      const th = document.createElement("th");
      th.textContent = h;
      head.appendChild(th);
    }
    table.appendChild(head);
    for (const row of doseLadder(trial)) {
      const tr = document.createElement("tr");
      if (row.marker === "eliminated") tr.className = "eliminated";
      if (row.marker === "next") tr.className = "current";
      for (const cell of [row.dose, row.treated, row.dlts, row.marker]) {
        const td = document.createElement("td");
        td.textContent = String(cell);
        tr.appendChild(td);
      }
      table.appendChild(tr);
    }
    return table;
  }

  private cohortForm(trial: TrialView, container: HTMLElement): HTMLElement {
    const form = document.createElement("form");
    form.className = "cohort-form";
    const doseNote = document.createElement("span");
    doseNote.textContent = `Cohort at dose ${trial.recommended_dose}: `;
    const n = document.createElement("input");
    n.type = "number";
    n.value = String(trial.state.doses.length ? 3 : 3);
    n.min = "1";
    const dlt = document.createElement("input");
    dlt.type = "number";
    dlt.value = "0";
    dlt.min = "0";
    const submit = document.createElement("button");
    submit.type = "submit";
    submit.textContent = "Record cohort";
    form.append(doseNote, " patients ", n, " DLTs ", dlt, submit);

    form.addEventListener("submit", async (ev) => {
      ev.preventDefault();
      try {
        const result = await this.client.postCohort(this.trialId!, {
          dose: trial.recommended_dose!,
          n: Number(n.value),
          n_dlt: Number(dlt.value),
        });
        await this.refresh(container, cohortBanner(result));
      } catch (err) {
        if (err instanceof ApiRequestError && err.status === 409) {
          await this.refresh(container, "State changed elsewhere — reloaded; "
            + "check the recommendation and re-enter the cohort.");
        } else if (err instanceof ApiRequestError) {
          await this.refresh(container, `Rejected: ${err.body.error}`);
        } else {
          throw err;
        }
      }
    });
    return form;
  }

  private mtdCard(trial: TrialView): HTMLElement {
    const card = document.createElement("div");
    card.className = "mtd-card";
    const title = document.createElement("h3");
    title.textContent = selectionSummary(trial.selection!);
    card.appendChild(title);
    if (trial.selection!.selected_dose !== null) {
      const list = document.createElement("p");
      const parts = trial.selection!.admissible_doses.map((dose, i) =>
        `dose ${dose}: ${trial.selection!.isotonic_estimates[i].toFixed(3)}`);
      list.textContent = `Isotonic DLT estimates — ${parts.join(", ")}`;
      card.appendChild(list);
    }
    return card;
  }

  private timeline(trial: TrialView): HTMLElement {
    const wrap = document.createElement("div");
    const title = document.createElement("h4");
    title.textContent = "Audit trail";
    wrap.appendChild(title);
    const list = document.createElement("ol");
    list.className = "timeline";
    for (const ev of trial.state.history) {
      const li = document.createElement("li");
      li.textContent = `cohort ${ev.cohort_index}: dose ${ev.dose}, `
        + `${ev.n_dlt}/${ev.n} DLTs -> ${ev.decision.replace(/_/g, " ")}`;
      list.appendChild(li);
    }
    wrap.appendChild(list);
    return wrap;
  }
}

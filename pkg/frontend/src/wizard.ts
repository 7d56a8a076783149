// Design wizard: specify settings + prior, submit for server-side validation,
// then render the decision table and the boundary overlays. A what-if PESS
// slider re-submits a scratch design so every displayed number still comes
// from the service.

import { ApiRequestError, DosefindClient } from "./api.js";
import type { BoinTableJson, DesignRecord } from "./api.js";
import { boundarySeries, decisionTableGrid } from "./model.js";
import { stepLines } from "./charts.js";

const DEFAULTS = {
  skeleton: "0.10, 0.19, 0.30, 0.42, 0.54",
  pess: "3, 3, 3, 3, 3",
};

function field(label: string, input: HTMLElement): HTMLElement {
  const row = document.createElement("label");
  row.className = "field";
  const span = document.createElement("span");
  span.textContent = label;
  row.append(span, input);
  return row;
}

function numberInput(name: string, value: string, step = "any"): HTMLInputElement {
  const el = document.createElement("input");
  el.type = "number";
  el.name = name;
  el.value = value;
  el.step = step;
  return el;
}

function textInput(name: string, value: string): HTMLInputElement {
  const el = document.createElement("input");
  el.type = "text";
  el.name = name;
  el.value = value;
  return el;
}

function parseVector(text: string): number[] {
  return text.split(/[\s,]+/).filter(Boolean).map(Number);
}

export function renderTableGridInto(container: HTMLElement, table: BoinTableJson): void {
  const grid = decisionTableGrid(table);
  const el = document.createElement("table");
  el.className = "decision-table";
  const thead = document.createElement("thead");
  const headRow = document.createElement("tr");
  for (const h of grid.header) {
    const th = document.createElement("th");
    th.textContent = h;
    headRow.appendChild(th);
  }
  thead.appendChild(headRow);
  const tbody = document.createElement("tbody");
  for (const row of grid.rows) {
    const tr = document.createElement("tr");
    row.forEach((cell, i) => {
      const td = document.createElement("td");
      td.textContent = cell;
      if (i === 1) td.className = "action";
      tr.appendChild(td);
    });
    tbody.appendChild(tr);
  }
  el.append(thead, tbody);
  container.appendChild(el);
}

export class WizardScreen {
  constructor(private client: DosefindClient, private root: HTMLElement,
              private onDesignCreated: (record: DesignRecord) => void) {}

  render(): void {
    this.root.innerHTML = "";
    const form = document.createElement("form");
    form.className = "panel";
    form.noValidate = true;

    const method = document.createElement("select");
    method.name = "method";
    for (const m of ["boin", "keyboard", "crm"]) {
      const opt = document.createElement("option");
      opt.value = m;
      opt.textContent = m.toUpperCase();
      method.appendChild(opt);
    }
    const numDoses = numberInput("num_doses", "5", "1");
    const target = numberInput("target", "0.3");
    const maxN = numberInput("max_n", "30", "1");
    const cohort = numberInput("cohort_size", "3", "1");
    const skeleton = textInput("skeleton", DEFAULTS.skeleton);
    const pess = textInput("pess", DEFAULTS.pess);
    const robust = document.createElement("input");
    robust.type = "checkbox";
    robust.name = "robustify";

    const errors = document.createElement("ul");
    errors.className = "errors";
    const submit = document.createElement("button");
    submit.type = "submit";
    submit.textContent = "Create design";

    form.append(
      field("Design", method),
      field("Number of doses", numDoses),
      field("Target DLT probability", target),
      field("Maximum sample size", maxN),
      field("Cohort size", cohort),
      field("Skeleton (prior DLT probabilities)", skeleton),
      field("PESS per dose", pess),
      field("Robust prior (truncate above the prior MTD)", robust),
      errors,
      submit,
    );

    const output = document.createElement("div");
    output.className = "wizard-output";
    this.root.append(form, output);

    form.addEventListener("submit", async (ev) => {
      ev.preventDefault();
      errors.innerHTML = "";
      submit.disabled = true;   // disabled until the server answers
      try {
        const record = await this.client.createDesign({
          settings: {
            num_doses: Number(numDoses.value),
            target: Number(target.value),
            max_n: Number(maxN.value),
            cohort_size: Number(cohort.value),
          },
          prior: {
            skeleton: parseVector(skeleton.value),
            pess: parseVector(pess.value),
            robustify: robust.checked,
          },
          design: { method: method.value },
        });
        this.onDesignCreated(record);
        await this.showDesign(output, record);
      } catch (err) {
        if (err instanceof ApiRequestError && err.body.errors) {
          for (const msg of err.body.errors) {
            const li = document.createElement("li");
            li.textContent = msg;
            errors.appendChild(li);
          }
        } else {
          const li = document.createElement("li");
          li.textContent = String(err);
          errors.appendChild(li);
        }
      } finally {
        submit.disabled = false;
      }
    });
  }

  private async showDesign(output: HTMLElement, record: DesignRecord): Promise<void> {
    output.innerHTML = "";
    const title = document.createElement("h3");
    title.textContent = `Design ${record.id} (${record.design.method})`;
    output.appendChild(title);
    if (!record.has_decision_table) {
      const note = document.createElement("p");
      note.textContent = "CRM designs are conducted from the posterior at each "
        + "cohort; there is no pre-tabulated decision table.";
      output.appendChild(note);
      return;
    }
    const table = await this.client.getDecisionTable(record.id);
    for (const n of table.notes) {
      const note = document.createElement("p");
      note.className = "note";
      note.textContent = n;
      output.appendChild(note);
    }
    renderTableGridInto(output, table);

    const csv = document.createElement("a");
    csv.href = `${this.client.base}/designs/${record.id}/decision-table?format=csv`;
    csv.textContent = "Download CSV";
    csv.className = "download";
    output.appendChild(csv);

    await this.renderOverlays(output, record, table);
  }

  // Boundary curves with a noninformative overlay and a PESS what-if slider.
  // The comparison table comes from a scratch design on the server so the UI
  // never derives boundaries itself.
  private async renderOverlays(output: HTMLElement, record: DesignRecord,
                               informative: BoinTableJson): Promise<void> {
    const holder = document.createElement("div");
    holder.className = "overlays";
    output.appendChild(holder);

    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = "12";
    slider.step = "1";
    slider.value = String(record.prior.pess[0] ?? 3);
    const sliderLabel = document.createElement("span");
    const sliderRow = document.createElement("div");
    sliderRow.className = "slider-row";
    sliderRow.append("What-if PESS: ", slider, sliderLabel);
    output.appendChild(sliderRow);

    const draw = async (pessValue: number) => {
      sliderLabel.textContent = ` ${pessValue} pseudo-patients/dose`;
      holder.innerHTML = "";
      const scratch = await this.client.createDesign({
        settings: record.settings,
        prior: { ...record.prior, pess: record.prior.skeleton.map(() => pessValue) },
        design: record.design,
      });
      const whatIf = await this.client.getDecisionTable(scratch.id);
      const flat = await this.client.createDesign({
        settings: record.settings,
        prior: { ...record.prior, pess: record.prior.skeleton.map(() => 0) },
        design: record.design,
      });
      const flatTable = await this.client.getDecisionTable(flat.id);
      for (let d = 0; d < record.settings.num_doses; d++) {
        const inf = boundarySeries(whatIf, d);
        const non = boundarySeries(flatTable, d);
        holder.appendChild(stepLines([
          { n: inf.n, values: inf.escalateRate, color: "#2563eb", label: "informative" },
          { n: non.n, values: non.escalateRate, color: "#2563eb", dashed: true, label: "noninformative" },
          { n: inf.n, values: inf.deescalateRate, color: "#ef4444", label: "de-escalate" },
          { n: non.n, values: non.deescalateRate, color: "#ef4444", dashed: true, label: "noninformative" },
        ], `dose ${d + 1} boundaries vs n`, informative.phi));
      }
    };

    slider.addEventListener("change", () => void draw(Number(slider.value)));
    await draw(Number(slider.value));
  }
}

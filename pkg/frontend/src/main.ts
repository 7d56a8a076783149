// Hash-routed single-page shell: wizard -> dashboard -> conduct, sharing the
// active design. Talks only to the public HTTP API.

import { DosefindClient, type DesignRecord } from "./api.js";
import { WizardScreen } from "./wizard.js";
import { DashboardScreen } from "./dashboard.js";
import { ConductScreen } from "./conduct.js";

const client = new DosefindClient("");
const outlet = document.getElementById("outlet")!;
const designBadge = document.getElementById("active-design")!;

const dashboard = new DashboardScreen(client, outlet);
const conduct = new ConductScreen(client, outlet);
const wizard = new WizardScreen(client, outlet, (record: DesignRecord) => {
  dashboard.setDesign(record);
  conduct.setDesign(record);
  designBadge.textContent = `design ${record.id} (${record.design.method})`;
});

function route(): void {
  const hash = window.location.hash || "#/wizard";
  for (const link of document.querySelectorAll("nav a")) {
    link.classList.toggle("active", link.getAttribute("href") === hash);
  }
  if (hash.startsWith("#/dashboard")) {
    dashboard.render();
  } else if (hash.startsWith("#/conduct")) {
    conduct.render();
  } else {
    wizard.render();
  }
}

window.addEventListener("hashchange", route);
route();

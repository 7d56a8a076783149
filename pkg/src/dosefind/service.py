"""HTTP facade and persistence.

Single-process service on the stdlib http.server: designs live as write-once
JSON records, each trial is an append-only JSONL event log whose lines carry
full state snapshots (a torn trailing line from an interrupted write is
dropped and the log replays cleanly), and simulation jobs run on an in-process
thread pool with cancel/progress plumbing. Per-trial locks serialize cohort
posts; the loser of a race sees a stale recommended dose and gets a 409.

Configuration comes from environment variables: DOSEFIND_DATA_DIR,
DOSEFIND_BIND, DOSEFIND_PORT, DOSEFIND_WORKERS, DOSEFIND_STATIC_DIR.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
import uuid
from dataclasses import dataclass
from hashlib import sha256
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .core import (Decision, PriorSpec, TrialSettings, TrialState,
                   ValidationError, dumps_canonical, validate_settings)
from .conduct import apply_cohort, elimination_min_dlt, select_mtd
from .crm import (DEFAULT_NONINFORMATIVE_SIGMA2, CrmModel, crm_next_dose,
                  posterior_means)
from .priors import calibrate_sigma
from . import boin, keyboard
from .simulate import (DesignConfig, RandomScenarioSpec, Scenario,
                       SimulationPlan, PlanScenario, _design_from_json,
                       build_policy, design_preset, run_simulation,
                       write_oc_csv, write_summary_csv)

__all__ = ["DesignStore", "TrialStore", "JobManager", "create_server", "main"]


class ApiError(Exception):
    def __init__(self, status: int, message, field_errors=None):
        super().__init__(str(message))
        self.status = status
        self.payload = {"error": str(message)}
        if field_errors:
            self.payload["errors"] = list(field_errors)


# ---------------------------------------------------------------------------
# design records
# ---------------------------------------------------------------------------

@dataclass
class DesignBundle:
    """A loaded design: validated inputs plus live decision machinery."""

    record: dict
    settings: TrialSettings
    prior: PriorSpec
    method: str
    sigma2: Optional[float]
    table: object                      # DecisionTable | KeyboardTable | None
    sel_counts: tuple                  # (a0, b0) arrays for MTD selection

    def decider(self):
        if self.method == "boin":
            table = self.table

            def decide(state):
                return boin.boin_next_dose(table, state)
        elif self.method == "keyboard":
            keys = self.table.keys
            priors, _ = keyboard.dose_beta_priors(self.settings, self.prior)

            def decide(state):
                return keyboard.keyboard_next_dose(keys, priors, state)
        else:
            model = CrmModel(self.prior.skeleton, self.sigma2)
            phi = self.settings.target

            def decide(state):
                return crm_next_dose(model, state, phi)
        return decide

    def audit_context(self):
        """Per-cohort record of what the decision was read from."""
        settings = self.settings
        if self.method == "boin":
            priors, _ = boin.dose_hypothesis_priors(settings, self.prior)

            def context(state):
                j = state.current_dose
                data = state.dose_data(j)
                b = boin.boundaries(settings.target, settings.phi1, settings.phi2,
                                    priors[j - 1], data.n, dose=j)
                return {"n": data.n,
                        "escalate_max": boin.escalate_max(b),
                        "deescalate_min": boin.deescalate_min(b),
                        "eliminate_min": elimination_min_dlt(settings.target, data.n)}
        elif self.method == "keyboard":
            keys = self.table.keys
            priors, _ = keyboard.dose_beta_priors(settings, self.prior)

            def context(state):
                j = state.current_dose
                data = state.dose_data(j)
                k = keyboard.strongest_key(keys, priors[j - 1], data.n, data.y)
                return {"n": data.n, "strongest_key": k,
                        "target_key": keys.target_index,
                        "eliminate_min": elimination_min_dlt(settings.target, data.n)}
        else:
            model = CrmModel(self.prior.skeleton, self.sigma2)

            def context(state):
                n = [d.n for d in state.doses]
                y = [d.y for d in state.doses]
                phat = posterior_means(model, n, y)
                return {"posterior_means": [round(float(v), 6) for v in phat]}
        return context


def _resolve_design_sigma2(design: dict, prior: PriorSpec, settings, j_star: int
                           ) -> Optional[float]:
    if design.get("method", "boin") != "crm":
        return design.get("sigma2")
    if design.get("sigma2") is not None:
        return float(design["sigma2"])
    if prior.pess[j_star - 1] > 1:
        return calibrate_sigma(prior.skeleton, j_star, prior.pess[j_star - 1])
    return DEFAULT_NONINFORMATIVE_SIGMA2


def _build_bundle(record: dict) -> DesignBundle:
    settings = TrialSettings.from_json_dict(record["settings"])
    prior = PriorSpec.from_json_dict(record["prior"])
    settings, prior, j_star = validate_settings(settings, prior)
    design = record.get("design", {})
    method = design.get("method", "boin")
    sigma2 = _resolve_design_sigma2(design, prior, settings, j_star)

    informative = any(v > 0 for v in prior.pess)
    config = DesignConfig(name=record["id"], method=method,
                          informative=informative,
                          robust=prior.robustify if method != "crm" else False,
                          mixture_weight=prior.mixture_weight if method != "crm" else None,
                          sigma2=sigma2 if method == "crm" else None)
    policy = build_policy(config, settings, prior.skeleton, prior.pess,
                          prior.mixture_weight)

    table = None
    if method == "boin":
        table = boin.decision_table(settings, prior)
    elif method == "keyboard":
        half_width = float(design.get("half_width", keyboard.DEFAULT_HALF_WIDTH))
        table = keyboard.keyboard_decision_table(settings, prior,
                                                 half_width=half_width)
    return DesignBundle(record=record, settings=settings, prior=prior,
                        method=method, sigma2=sigma2, table=table,
                        sel_counts=(policy.sel_a, policy.sel_b))


def _table_hash(table) -> Optional[str]:
    if table is None:
        return None
    return sha256(dumps_canonical(table.to_json_dict()).encode()).hexdigest()


class DesignStore:
    def __init__(self, root: Path):
        self.dir = root / "designs"
        self.dir.mkdir(parents=True, exist_ok=True)
        self._bundles: dict[str, DesignBundle] = {}
        self._lock = threading.Lock()

    def create(self, payload: dict) -> DesignBundle:
        try:
            settings = TrialSettings.from_json_dict(payload["settings"])
            prior = PriorSpec.from_json_dict(payload["prior"])
        except (KeyError, TypeError, ValueError) as e:
            raise ApiError(422, f"malformed design payload: {e}")
        design = payload.get("design", {"method": "boin"})
        if design.get("method", "boin") not in ("boin", "keyboard", "crm"):
            raise ApiError(422, f"unknown design method {design.get('method')!r}")
        try:
            settings, prior, _ = validate_settings(settings, prior)
        except ValidationError as e:
            raise ApiError(422, "design validation failed", e.errors)

        record = {
            "id": uuid.uuid4().hex[:12],
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "settings": settings.to_json_dict(),
            "prior": prior.to_json_dict(),
            "design": design,
        }
        bundle = _build_bundle(record)
        record["table_hash"] = _table_hash(bundle.table)
        path = self.dir / f"{record['id']}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(record, indent=1))
        tmp.rename(path)
        with self._lock:
            self._bundles[record["id"]] = bundle
        return bundle

    def get(self, design_id: str) -> DesignBundle:
        with self._lock:
            if design_id in self._bundles:
                return self._bundles[design_id]
        path = self.dir / f"{design_id}.json"
        if not path.exists():
            raise ApiError(404, f"no design {design_id}")
        record = json.loads(path.read_text())
        bundle = _build_bundle(record)
        # regenerated tables must hash to what was persisted
        if record.get("table_hash") != _table_hash(bundle.table):
            raise ApiError(500, f"design {design_id} fails its table hash check")
        with self._lock:
            self._bundles[design_id] = bundle
        return bundle

    def public_record(self, bundle: DesignBundle) -> dict:
        rec = dict(bundle.record)
        if bundle.method == "crm":
            rec["sigma2"] = bundle.sigma2
        rec["has_decision_table"] = bundle.table is not None
        return rec


# ---------------------------------------------------------------------------
# trial records: append-only event logs
# ---------------------------------------------------------------------------

class TrialStore:
    def __init__(self, root: Path, designs: DesignStore):
        self.dir = root / "trials"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.designs = designs
        self._locks: dict[str, threading.Lock] = {}
        self._cache: dict[str, dict] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, trial_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(trial_id, threading.Lock())

    def _path(self, trial_id: str) -> Path:
        return self.dir / f"{trial_id}.jsonl"

    def _append(self, trial_id: str, event: dict) -> None:
        with open(self._path(trial_id), "a") as fh:
            fh.write(dumps_canonical(event) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _read_events(self, trial_id: str) -> list[dict]:
        path = self._path(trial_id)
        if not path.exists():
            raise ApiError(404, f"no trial {trial_id}")
        events = []
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError:
                break   # torn trailing write from a crash: replay stops here
        if not events or events[0].get("type") != "created":
            raise ApiError(500, f"trial log {trial_id} has no creation event")
        return events

    def create(self, design_id: str) -> dict:
        bundle = self.designs.get(design_id)
        trial_id = uuid.uuid4().hex[:12]
        state = TrialState.fresh(bundle.settings)
        event = {"type": "created", "trial_id": trial_id, "design_id": design_id,
                 "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                 "state": state.to_json_dict()}
        self._append(trial_id, event)
        entry = {"trial_id": trial_id, "design_id": design_id, "state": state,
                 "selection": None}
        with self._registry_lock:
            self._cache[trial_id] = entry
        return self.view(trial_id)

    def _load(self, trial_id: str) -> dict:
        with self._registry_lock:
            if trial_id in self._cache:
                return self._cache[trial_id]
        events = self._read_events(trial_id)
        design_id = events[0]["design_id"]
        bundle = self.designs.get(design_id)
        state = TrialState.from_json_dict(events[0]["state"])
        selection = None
        replayed = state
        decide = bundle.decider()
        context = bundle.audit_context()
        for ev in events[1:]:
            if ev["type"] == "cohort":
                replayed, _ = apply_cohort(bundle.settings, replayed,
                                           ev["n_dlt"], decide,
                                           cohort_n=ev["n"],
                                           audit_context=context)
                state = TrialState.from_json_dict(ev["state"])
                if replayed != state:
                    raise ApiError(500, f"trial {trial_id}: snapshot diverges "
                                        "from replayed state")
            elif ev["type"] == "select_mtd":
                selection = ev
        entry = {"trial_id": trial_id, "design_id": design_id, "state": state,
                 "selection": selection}
        with self._registry_lock:
            self._cache[trial_id] = entry
        return entry

    def view(self, trial_id: str) -> dict:
        entry = self._load(trial_id)
        bundle = self.designs.get(entry["design_id"])
        state: TrialState = entry["state"]
        status = state.status(bundle.settings)
        view = {
            "trial_id": trial_id,
            "design_id": entry["design_id"],
            "status": status,
            "state": state.to_json_dict(),
            "recommended_dose": None if status != "active" else state.current_dose,
        }
        if entry["selection"] is not None:
            view["selection"] = {k: entry["selection"][k]
                                 for k in ("selected_dose", "isotonic_estimates",
                                           "admissible_doses")}
        return view

    def post_cohort(self, trial_id: str, payload: dict) -> dict:
        with self._lock_for(trial_id):
            entry = self._load(trial_id)
            bundle = self.designs.get(entry["design_id"])
            state: TrialState = entry["state"]
            status = state.status(bundle.settings)
            if status != "active":
                raise ApiError(409, f"trial is {status}; no further cohorts")
            try:
                dose = int(payload["dose"])
                n = int(payload.get("n", bundle.settings.cohort_size))
                n_dlt = int(payload["n_dlt"])
            except (KeyError, TypeError, ValueError) as e:
                raise ApiError(422, f"malformed cohort payload: {e}")
            if dose != state.current_dose:
                raise ApiError(409, f"cohort dose {dose} does not match the "
                                    f"recommended dose {state.current_dose}")
            try:
                new_state, decision = apply_cohort(
                    bundle.settings, state, n_dlt, bundle.decider(),
                    cohort_n=n, audit_context=bundle.audit_context())
            except ValueError as e:
                raise ApiError(422, str(e))
            self._append(trial_id, {"type": "cohort", "dose": dose, "n": n,
                                    "n_dlt": n_dlt, "decision": decision.value,
                                    "state": new_state.to_json_dict()})
            entry["state"] = new_state
            status = new_state.status(bundle.settings)
            return {"decision": decision.value,
                    "next_dose": None if status != "active" else new_state.current_dose,
                    "status": status,
                    "state": new_state.to_json_dict()}

    def run_selection(self, trial_id: str) -> dict:
        with self._lock_for(trial_id):
            entry = self._load(trial_id)
            bundle = self.designs.get(entry["design_id"])
            state: TrialState = entry["state"]
            if state.status(bundle.settings) == "active":
                raise ApiError(409, "trial still active; finish it before "
                                    "selecting the MTD")
            sel = select_mtd(state, bundle.settings.target,
                             prior_counts=bundle.sel_counts)
            event = {"type": "select_mtd",
                     "selected_dose": sel.selected_dose,
                     "isotonic_estimates": list(sel.isotonic_estimates),
                     "admissible_doses": list(sel.admissible_doses)}
            self._append(trial_id, event)
            entry["selection"] = event
            return {k: event[k] for k in ("selected_dose", "isotonic_estimates",
                                          "admissible_doses")}

    def audit_log(self, trial_id: str) -> list[dict]:
        entry = self._load(trial_id)
        return list(entry["state"].history)


# ---------------------------------------------------------------------------
# simulation jobs
# ---------------------------------------------------------------------------

class JobManager:
    MAX_PENDING = 8

    def __init__(self, root: Path, designs: DesignStore, sim_workers: int = 1):
        self.dir = root / "results"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.designs = designs
        self.sim_workers = sim_workers
        self._jobs: dict[str, dict] = {}
        self._lock = threading.Lock()
        self._pending = 0
        self._runner = threading.Semaphore(1)

    def _plan_from(self, bundle: DesignBundle, overrides: dict) -> SimulationPlan:
        settings, prior = bundle.settings, bundle.prior
        informative = any(v > 0 for v in prior.pess)
        if "designs" in overrides:
            try:
                designs = tuple(_design_from_json(e) for e in overrides["designs"])
            except ValueError as e:
                raise ApiError(400, str(e))
        else:
            base = {"boin": ("BOIN", "iBOIN"), "keyboard": ("Keyboard", "iKeyboard"),
                    "crm": ("CRM", "iCRM")}[bundle.method]
            names = base if informative else base[:1]
            designs = tuple(design_preset(n) for n in names)
        scenarios = []
        for s in overrides.get("scenarios", ()):
            scen = Scenario.from_curve(s["true_p"], settings.target,
                                       name=s.get("name", ""))
            scenarios.append(PlanScenario(
                scenario=scen,
                skeleton=tuple(s.get("skeleton", prior.skeleton))))
        rand = None
        if overrides.get("random_scenarios"):
            r = overrides["random_scenarios"]
            rand = RandomScenarioSpec(count=int(r["count"]),
                                      misspecification=r.get("misspecification",
                                                             "correct"))
        if not scenarios and rand is None:
            raise ApiError(400, "plan needs scenarios or random_scenarios")
        try:
            return SimulationPlan(settings=settings, prior=prior, designs=designs,
                                  n_trials=int(overrides.get("n_trials", 2000)),
                                  master_seed=int(overrides["master_seed"]),
                                  scenarios=tuple(scenarios),
                                  random_scenarios=rand)
        except KeyError:
            raise ApiError(400, "plan requires a master_seed (published runs "
                                "must be reproducible)")
        except (TypeError, ValueError) as e:
            raise ApiError(400, f"invalid plan: {e}")

    def submit(self, design_id: str, overrides: dict) -> dict:
        bundle = self.designs.get(design_id)
        plan = self._plan_from(bundle, overrides)
        with self._lock:
            if self._pending >= self.MAX_PENDING:
                raise ApiError(429, "simulation queue is full")
            self._pending += 1
        job_id = uuid.uuid4().hex[:12]
        job = {"id": job_id, "design_id": design_id, "state": "queued",
               "fraction_done": 0.0, "cancel": threading.Event(), "error": None}
        with self._lock:
            self._jobs[job_id] = job
        thread = threading.Thread(target=self._run, args=(job, plan), daemon=True)
        thread.start()
        return {"job_id": job_id, "state": "queued"}

    def _run(self, job: dict, plan: SimulationPlan) -> None:
        with self._runner:
            with self._lock:
                self._pending -= 1
                if job["cancel"].is_set():
                    job["state"] = "canceled"
                    return
                job["state"] = "running"

            def progress(done, total):
                job["fraction_done"] = done / total

            try:
                result = run_simulation(plan, workers=self.sim_workers,
                                        progress=progress,
                                        cancelled=job["cancel"].is_set)
            except Exception as e:   # job failure surfaces through the API
                job["state"] = "failed"
                job["error"] = str(e)
                return
            if result is None:
                job["state"] = "canceled"
                return
            payload = result.to_json_dict()
            (self.dir / f"{job['id']}.json").write_text(json.dumps(payload))
            (self.dir / f"{job['id']}_oc_summary.csv").write_text(write_oc_csv(result))
            (self.dir / f"{job['id']}_oc_means.csv").write_text(write_summary_csv(result))
            job["fraction_done"] = 1.0
            job["state"] = "done"

    def status(self, job_id: str) -> dict:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            if (self.dir / f"{job_id}.json").exists():
                return {"job_id": job_id, "state": "done", "fraction_done": 1.0}
            raise ApiError(404, f"no simulation job {job_id}")
        out = {"job_id": job_id, "state": job["state"],
               "fraction_done": round(job["fraction_done"], 4)}
        if job["error"]:
            out["error"] = job["error"]
        return out

    def result_json(self, job_id: str) -> dict:
        path = self.dir / f"{job_id}.json"
        if not path.exists():
            raise ApiError(409, f"job {job_id} has no results yet")
        return json.loads(path.read_text())

    def result_csv(self, job_id: str) -> str:
        path = self.dir / f"{job_id}_oc_summary.csv"
        if not path.exists():
            raise ApiError(409, f"job {job_id} has no results yet")
        return path.read_text()

    def cancel(self, job_id: str) -> dict:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is None:
            raise ApiError(404, f"no simulation job {job_id}")
        job["cancel"].set()
        if job["state"] in ("queued", "running"):
            job["state"] = "canceled"
        return {"job_id": job_id, "state": job["state"]}


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

class App:
    def __init__(self, data_dir: Path, sim_workers: int = 1,
                 static_dir: Optional[Path] = None):
        data_dir = Path(data_dir)
        self.designs = DesignStore(data_dir)
        self.trials = TrialStore(data_dir, self.designs)
        self.jobs = JobManager(data_dir, self.designs, sim_workers)
        self.static_dir = static_dir

    # each handler returns (status, payload) or (status, text, content_type, disposition)
    def route(self, method: str, path: str, query: dict, body: Optional[dict]):
        m = method
        if m == "POST" and path == "/designs":
            bundle = self.designs.create(body or {})
            return 201, self.designs.public_record(bundle)
        if match := re.fullmatch(r"/designs/([0-9a-f]+)", path):
            bundle = self.designs.get(match.group(1))
            if m == "GET":
                return 200, self.designs.public_record(bundle)
        if match := re.fullmatch(r"/designs/([0-9a-f]+)/decision-table", path):
            bundle = self.designs.get(match.group(1))
            if bundle.table is None:
                raise ApiError(400, "CRM designs have no pre-tabulated decision "
                                    "table; decisions are recomputed from the "
                                    "posterior at each cohort")
            fmt = query.get("format", ["json"])[0]
            if fmt == "csv":
                return (200, bundle.table.to_csv(), "text/csv",
                        "attachment; filename=decision_table.csv")
            return 200, bundle.table.to_json_dict()
        if match := re.fullmatch(r"/designs/([0-9a-f]+)/simulations", path):
            if m == "POST":
                return 202, self.jobs.submit(match.group(1), body or {})
        if match := re.fullmatch(r"/simulations/([0-9a-f]+)", path):
            if m == "GET":
                status = self.jobs.status(match.group(1))
                if status["state"] == "done":
                    fmt = query.get("format", [None])[0]
                    if fmt == "csv":
                        return (200, self.jobs.result_csv(match.group(1)),
                                "text/csv",
                                "attachment; filename=oc_summary.csv")
                    status["result"] = self.jobs.result_json(match.group(1))
                return 200, status
        if match := re.fullmatch(r"/simulations/([0-9a-f]+)/cancel", path):
            if m == "POST":
                return 200, self.jobs.cancel(match.group(1))
        if m == "POST" and path == "/trials":
            if not body or "design_id" not in body:
                raise ApiError(422, "trial creation needs a design_id")
            return 201, self.trials.create(body["design_id"])
        if match := re.fullmatch(r"/trials/([0-9a-f]+)", path):
            if m == "GET":
                return 200, self.trials.view(match.group(1))
        if match := re.fullmatch(r"/trials/([0-9a-f]+)/cohorts", path):
            if m == "POST":
                return 200, self.trials.post_cohort(match.group(1), body or {})
        if match := re.fullmatch(r"/trials/([0-9a-f]+)/select-mtd", path):
            if m == "POST":
                return 200, self.trials.run_selection(match.group(1))
        if match := re.fullmatch(r"/trials/([0-9a-f]+)/audit", path):
            if m == "GET":
                return 200, {"events": self.trials.audit_log(match.group(1))}
        raise ApiError(404, f"no route {m} {path}")


class _Handler(BaseHTTPRequestHandler):
    app: App = None   # injected by create_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):   # quiet by default
        pass

    def _send(self, status: int, payload, content_type="application/json",
              disposition=None):
        if isinstance(payload, (dict, list)):
            data = json.dumps(payload).encode()
        else:
            data = str(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        if disposition:
            self.send_header("Content-Disposition", disposition)
        self.end_headers()
        self.wfile.write(data)

    def _serve_static(self, path: str) -> bool:
        root = self.app.static_dir
        if root is None:
            return False
        rel = "index.html" if path == "/" else path.lstrip("/")
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            return False
        ctype = {
            ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
            ".svg": "image/svg+xml", ".json": "application/json",
        }.get(target.suffix, "application/octet-stream")
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)
        return True

    def _dispatch(self, method: str):
        parsed = urlparse(self.path)
        query = parse_qs(parsed.query)
        body = None
        if method == "POST":
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if raw:
                try:
                    body = json.loads(raw)
                except json.JSONDecodeError:
                    self._send(400, {"error": "request body is not valid JSON"})
                    return
        try:
            if method == "GET" and self._serve_static(parsed.path):
                return
            result = self.app.route(method, parsed.path, query, body)
        except ApiError as e:
            self._send(e.status, e.payload)
            return
        except Exception as e:
            self._send(500, {"error": f"internal error: {e}"})
            return
        if len(result) == 2:
            self._send(result[0], result[1])
        else:
            self._send(result[0], result[1], result[2], result[3])

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_OPTIONS(self):
        self._send(204, "")


def create_server(data_dir, bind: str = "127.0.0.1", port: int = 0,
                  sim_workers: int = 1, static_dir=None) -> ThreadingHTTPServer:
    app = App(Path(data_dir), sim_workers=sim_workers,
              static_dir=Path(static_dir) if static_dir else None)
    handler = type("BoundHandler", (_Handler,), {"app": app})
    server = ThreadingHTTPServer((bind, port), handler)
    server.app = app
    return server


def main(argv=None) -> int:
    data_dir = os.environ.get("DOSEFIND_DATA_DIR", "./dosefind-data")
    bind = os.environ.get("DOSEFIND_BIND", "127.0.0.1")
    port = int(os.environ.get("DOSEFIND_PORT", "8421"))
    workers = int(os.environ.get("DOSEFIND_WORKERS", "1"))
    static = os.environ.get("DOSEFIND_STATIC_DIR")
    server = create_server(data_dir, bind, port, workers, static)
    host, actual_port = server.server_address[:2]
    print(f"dosefind service on http://{host}:{actual_port} (data: {data_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

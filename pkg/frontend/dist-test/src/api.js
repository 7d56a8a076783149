// Typed client for the dosefind service. Every number the UI shows comes
// through here: the client never computes statistics locally.
export class ApiRequestError extends Error {
    status;
    body;
    constructor(status, body) {
        super(body.error ?? `request failed with ${status}`);
        this.status = status;
        this.body = body;
    }
}
async function request(base, method, path, payload) {
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
    return body;
}
export class DosefindClient {
    base;
    constructor(base = "") {
        this.base = base;
    }
    createDesign(payload) {
        return request(this.base, "POST", "/designs", payload);
    }
    getDesign(id) {
        return request(this.base, "GET", `/designs/${id}`);
    }
    getDecisionTable(id) {
        return request(this.base, "GET", `/designs/${id}/decision-table`);
    }
    async getDecisionTableCsv(id) {
        const resp = await fetch(`${this.base}/designs/${id}/decision-table?format=csv`);
        if (!resp.ok) {
            throw new ApiRequestError(resp.status, (await resp.json()));
        }
        return resp.text();
    }
    startSimulation(designId, plan) {
        return request(this.base, "POST", `/designs/${designId}/simulations`, plan);
    }
    jobStatus(jobId) {
        return request(this.base, "GET", `/simulations/${jobId}`);
    }
    cancelJob(jobId) {
        return request(this.base, "POST", `/simulations/${jobId}/cancel`);
    }
    csvDownloadUrl(jobId) {
        return `${this.base}/simulations/${jobId}?format=csv`;
    }
    createTrial(designId) {
        return request(this.base, "POST", "/trials", { design_id: designId });
    }
    getTrial(trialId) {
        return request(this.base, "GET", `/trials/${trialId}`);
    }
    postCohort(trialId, cohort) {
        return request(this.base, "POST", `/trials/${trialId}/cohorts`, cohort);
    }
    selectMtd(trialId) {
        return request(this.base, "POST", `/trials/${trialId}/select-mtd`);
    }
}

export class ApiError extends Error {
    constructor(code, message, status) {
        super(message);
        this.code = code;
        this.status = status;
        this.name = "ApiError";
    }
}
async function toApiError(resp) {
    let code = "unknown";
    let message = `HTTP ${resp.status}`;
    try {
        const body = (await resp.json());
        if (body.code)
            code = body.code;
        if (body.message)
            message = body.message;
    }
    catch {
        // non-JSON error body: keep the generic message
    }
    return new ApiError(code, message, resp.status);
}
export class ApiClient {
    constructor(baseUrl = "") {
        this.baseUrl = baseUrl;
    }
    async request(path, init) {
        let resp;
        try {
            resp = await fetch(this.baseUrl + path, init);
        }
        catch (err) {
            throw new ApiError("unreachable", `service unreachable: ${err}`, 0);
        }
        if (!resp.ok)
            throw await toApiError(resp);
        return (await resp.json());
    }
    listAnalyses(params) {
        const q = new URLSearchParams();
        if (params?.status)
            q.set("status", params.status);
        if (params?.label)
            q.set("label", params.label);
        const suffix = q.toString() ? `?${q}` : "";
        return this.request(`/api/analyses${suffix}`);
    }
    getAnalysis(id) {
        return this.request(`/api/analyses/${id}`);
    }
    submitFeedback(id, label, notes) {
        return this.request(`/api/analyses/${id}/feedback`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ analyst_label: label, notes }),
        });
    }
    async health() {
        try {
            await this.request("/api/health");
            return true;
        }
        catch {
            return false;
        }
    }
}

import { Session } from "./session.js";
import {
  CatalogEntryDoc,
  CostReportDoc,
  DashboardDoc,
  RequestDoc,
  RequestListDoc,
  WhoamiDoc,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** A refusal from the gateway, carrying its stable error code. */
export class GatewayError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = "GatewayError";
  }
}

export class GatewayClient {
  constructor(
    readonly endpoint: string,
    private readonly session: Session,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.session.key !== null) {
      headers["X-CSB-Key"] = this.session.key;
    }
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    const response = await this.fetchImpl(this.endpoint + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let code = "HttpError";
      let detail = `status ${response.status}`;
      try {
        const doc = await response.json();
        if (typeof doc.error === "string") code = doc.error;
        if (typeof doc.detail === "string") detail = doc.detail;
      } catch {
        // non-JSON error body; the status code is all we know
      }
      throw new GatewayError(response.status, code, detail);
    }
    return (await response.json()) as T;
  }

  whoami(): Promise<WhoamiDoc> {
    return this.call("GET", "/v1/whoami");
  }

  dashboard(): Promise<DashboardDoc> {
    return this.call("GET", "/v1/dashboard");
  }

  pendingRequests(): Promise<RequestListDoc> {
    return this.call("GET", "/v1/requests?state=Pending");
  }

  approve(requestId: string): Promise<RequestDoc> {
    return this.call("POST", `/v1/requests/${encodeURIComponent(requestId)}/approve`);
  }

  reject(requestId: string): Promise<RequestDoc> {
    return this.call("POST", `/v1/requests/${encodeURIComponent(requestId)}/reject`);
  }

  catalog(): Promise<CatalogEntryDoc[]> {
    return this.call("GET", "/v1/catalog");
  }

  setPrice(productCode: string, unitPriceMinor: number, currency: string): Promise<CatalogEntryDoc> {
    return this.call("PUT", `/v1/catalog/${encodeURIComponent(productCode)}`, {
      unit_price_minor: unitPriceMinor,
      currency,
    });
  }

  costReport(groupBy: string): Promise<CostReportDoc> {
    return this.call("GET", `/v1/reports/cost?group_by=${encodeURIComponent(groupBy)}`);
  }
}

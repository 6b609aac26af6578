import { GatewayClient, GatewayError } from "../api.js";
import { RequestDoc } from "../types.js";
import { escapeHtml } from "../format.js";

export interface ApprovalsState {
  requests: RequestDoc[];
  role: "user" | "admin" | "manager" | null;
  notice: string | null;
  error: string | null;
}

export function emptyApprovalsState(role: ApprovalsState["role"]): ApprovalsState {
  return { requests: [], role, notice: null, error: null };
}

function specSummary(spec: Record<string, string>): string {
  return Object.keys(spec)
    .sort()
    .map((key) => `${key}=${spec[key]}`)
    .join(" ");
}

function actionCell(request: RequestDoc, role: ApprovalsState["role"]): string {
  if (role !== "manager") {
    // Only managers hold the decide permission; nobody else gets the
    // buttons, so a click can never be the first place a refusal shows up.
    return `<td class="actions"></td>`;
  }
  const id = escapeHtml(request.request_id);
  return `<td class="actions">
    <button data-action="approve" data-request-id="${id}">Approve</button>
    <button data-action="reject" data-request-id="${id}">Reject</button>
  </td>`;
}

/** Render the pending-approval queue for the signed-in role. */
export function renderApprovals(state: ApprovalsState): string {
  const parts: string[] = [];
  if (state.error !== null) {
    parts.push(
      `<div class="banner banner-error" data-field="error-banner">` +
        `${escapeHtml(state.error)}</div>`,
    );
  }
  if (state.notice !== null) {
    parts.push(
      `<div class="banner banner-notice" data-field="notice">${escapeHtml(state.notice)}</div>`,
    );
  }
  parts.push(`<h2>Pending approvals</h2>`);
  if (state.requests.length === 0) {
    parts.push(`<p class="empty" data-field="queue-empty">Queue is empty.</p>`);
    return parts.join("\n");
  }
  const rows = state.requests
    .map(
      (request) => `<tr data-request-row="${escapeHtml(request.request_id)}">
        <td>${escapeHtml(request.request_id)}</td>
        <td>${escapeHtml(request.requester)}</td>
        <td>${escapeHtml(request.kind)}</td>
        <td>${escapeHtml(specSummary(request.spec))}</td>
        <td>${escapeHtml(request.state)}</td>
        ${actionCell(request, state.role)}
      </tr>`,
    )
    .join("\n");
  parts.push(`<table class="data-table">
    <thead><tr><th>Request</th><th>Requester</th><th>Kind</th><th>Spec</th><th>State</th><th></th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`);
  return parts.join("\n");
}

/**
 * Drives the queue: polls the gateway for pending requests and forwards
 * decisions. All state transitions live in the gateway; this class only
 * records what the gateway said so the next render can show it.
 */
export class ApprovalsController {
  state: ApprovalsState;

  constructor(private readonly client: GatewayClient, role: ApprovalsState["role"]) {
    this.state = emptyApprovalsState(role);
  }

  /** One poll: replace the queue with whatever the gateway lists as Pending. */
  async refresh(): Promise<ApprovalsState> {
    try {
      const doc = await this.client.pendingRequests();
      this.state = { ...this.state, requests: doc.requests, error: null };
    } catch (err) {
      this.state = {
        ...this.state,
        error: err instanceof Error ? err.message : String(err),
      };
    }
    return this.state;
  }

  /**
   * Forward one decision. On success the row is gone from the very next
   * listing; a 409 means someone else decided first, so the queue is
   * refetched; a 403 leaves the queue untouched and only posts a notice.
   */
  async decide(requestId: string, decision: "approve" | "reject"): Promise<ApprovalsState> {
    try {
      const doc =
        decision === "approve"
          ? await this.client.approve(requestId)
          : await this.client.reject(requestId);
      this.state = { ...this.state, notice: `${requestId} is now ${doc.state}.` };
      return this.refresh();
    } catch (err) {
      if (err instanceof GatewayError && err.status === 409) {
        this.state = { ...this.state, notice: `${requestId} was already decided.` };
        return this.refresh();
      }
      if (err instanceof GatewayError && err.status === 403) {
        this.state = {
          ...this.state,
          notice: `Your key does not permit deciding requests (${err.code}).`,
        };
        return this.state;
      }
      this.state = {
        ...this.state,
        error: err instanceof Error ? err.message : String(err),
      };
      return this.state;
    }
  }
}

import { GatewayClient } from "../api.js";
import { CostReportDoc } from "../types.js";
import { escapeHtml, formatMinor } from "../format.js";

export const GROUP_KEYS = ["user", "account", "project", "department"] as const;
export type GroupKey = (typeof GROUP_KEYS)[number];

export interface ReportsState {
  groupBy: GroupKey;
  report: CostReportDoc | null;
  error: string | null;
}

export function emptyReportsState(): ReportsState {
  return { groupBy: "project", report: null, error: null };
}

function groupPicker(active: GroupKey): string {
  const buttons = GROUP_KEYS.map((key) => {
    const pressed = key === active ? ` aria-pressed="true"` : "";
    return `<button data-action="group-by" data-group="${key}"${pressed}>${key}</button>`;
  });
  return `<div class="picker">${buttons.join(" ")}</div>`;
}

/** Render the grouped cost report exactly as the gateway totalled it. */
export function renderReports(state: ReportsState): string {
  const parts: string[] = [];
  if (state.error !== null) {
    parts.push(
      `<div class="banner banner-error" data-field="error-banner">` +
        `${escapeHtml(state.error)}</div>`,
    );
  }
  parts.push(`<h2>Cost report</h2>`);
  parts.push(groupPicker(state.groupBy));
  if (state.report === null) {
    parts.push(`<p class="empty">No report loaded.</p>`);
    return parts.join("\n");
  }
  if (state.report.rows.length === 0) {
    parts.push(`<p class="empty" data-field="report-empty">No closed usage yet.</p>`);
    return parts.join("\n");
  }
  const rows = state.report.rows
    .map((row) => {
      const key = `${escapeHtml(row.group)}-${escapeHtml(row.currency)}`;
      return `<tr>
        <td>${escapeHtml(row.group)}</td>
        <td>${escapeHtml(row.currency)}</td>
        <td data-field="total-${key}">${formatMinor(row.total_minor)}</td>
        <td data-field="total-${key}-minor">${row.total_minor}</td>
      </tr>`;
    })
    .join("\n");
  parts.push(`<table class="data-table">
    <thead><tr><th>${escapeHtml(state.report.group_by)}</th><th>Currency</th><th>Total</th><th>Minor units</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`);
  return parts.join("\n");
}

/** Drives the report pane: fetches one grouping at a time. */
export class ReportsController {
  state: ReportsState = emptyReportsState();

  constructor(private readonly client: GatewayClient) {}

  async load(groupBy: GroupKey): Promise<ReportsState> {
    try {
      const report = await this.client.costReport(groupBy);
      this.state = { groupBy, report, error: null };
    } catch (err) {
      this.state = {
        ...this.state,
        groupBy,
        error: err instanceof Error ? err.message : String(err),
      };
    }
    return this.state;
  }
}

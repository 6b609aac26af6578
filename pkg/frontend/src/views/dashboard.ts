import { DashboardDoc } from "../types.js";
import { escapeHtml, formatFetchedAt, formatMinor } from "../format.js";

/**
 * What the dashboard pane knows: the last document the gateway returned,
 * when it was fetched, and whether the most recent poll failed. A failed
 * poll never discards the last good document - it only flags it stale.
 */
export interface DashboardState {
  doc: DashboardDoc | null;
  fetchedAtMs: number | null;
  error: string | null;
}

function busRows(doc: DashboardDoc): string {
  const ids = Object.keys(doc.buses).sort();
  return ids
    .map((busId) => {
      const bus = doc.buses[busId];
      return `<tr>
        <td>${escapeHtml(busId)}</td>
        <td data-field="bus-${escapeHtml(busId)}-depth">${bus.depth}</td>
        <td data-field="bus-${escapeHtml(busId)}-capacity">${bus.capacity}</td>
        <td data-field="bus-${escapeHtml(busId)}-enqueued">${bus.enqueued_total}</td>
        <td data-field="bus-${escapeHtml(busId)}-drained">${bus.drained_total}</td>
        <td data-field="bus-${escapeHtml(busId)}-rejected">${bus.rejected_total}</td>
      </tr>`;
    })
    .join("\n");
}

function countRows(counts: Record<string, number>, field: string): string {
  return Object.keys(counts)
    .sort()
    .map(
      (key) =>
        `<tr><td>${escapeHtml(key)}</td>` +
        `<td data-field="${field}-${escapeHtml(key)}">${counts[key]}</td></tr>`,
    )
    .join("\n");
}

function costRows(cost: Record<string, number>): string {
  return Object.keys(cost)
    .sort()
    .map(
      (currency) =>
        `<tr><td>${escapeHtml(currency)}</td>` +
        `<td data-field="cost-${escapeHtml(currency)}">${formatMinor(cost[currency])}</td>` +
        `<td data-field="cost-${escapeHtml(currency)}-minor">${cost[currency]}</td></tr>`,
    )
    .join("\n");
}

/** Render the dashboard pane. Every number shown is a gateway field. */
export function renderDashboard(state: DashboardState): string {
  const parts: string[] = [];
  if (state.error !== null) {
    parts.push(
      `<div class="banner banner-error" data-field="error-banner">` +
        `Gateway unreachable: ${escapeHtml(state.error)}</div>`,
    );
  }
  if (state.doc === null) {
    parts.push(`<p class="empty">No dashboard data yet.</p>`);
    return parts.join("\n");
  }
  const doc = state.doc;
  const stale =
    state.error !== null && state.fetchedAtMs !== null
      ? `<span class="badge badge-stale" data-field="stale-marker">` +
        `stale - last good ${escapeHtml(formatFetchedAt(state.fetchedAtMs))}</span>`
      : "";
  parts.push(`<h2>Dashboard ${stale}</h2>`);
  parts.push(`<section class="tile">
    <h3>Buses</h3>
    <table class="data-table">
      <thead><tr><th>Bus</th><th>Depth</th><th>Capacity</th><th>Enqueued</th><th>Drained</th><th>Rejected</th></tr></thead>
      <tbody>${busRows(doc)}</tbody>
    </table>
  </section>`);
  parts.push(`<section class="tile">
    <h3>Requests</h3>
    <table class="data-table">
      <thead><tr><th>State</th><th>Count</th></tr></thead>
      <tbody>${countRows(doc.requests, "requests")}</tbody>
    </table>
  </section>`);
  parts.push(`<section class="tile">
    <h3>Cost to date</h3>
    <table class="data-table">
      <thead><tr><th>Currency</th><th>Total</th><th>Minor units</th></tr></thead>
      <tbody>${costRows(doc.cost)}</tbody>
    </table>
    <p>Unpriced records: <span data-field="unpriced-records">${doc.unpriced_records}</span></p>
  </section>`);
  parts.push(`<section class="tile">
    <h3>Persisted messages per app</h3>
    <table class="data-table">
      <thead><tr><th>App</th><th>Messages</th></tr></thead>
      <tbody>${countRows(doc.apps, "apps")}</tbody>
    </table>
  </section>`);
  parts.push(
    `<p class="meta">Generated at <span data-field="generated-at">${doc.generated_at}</span></p>`,
  );
  return parts.join("\n");
}

/** Poll step: fetch once, fold the outcome into the previous state. */
export async function refreshDashboard(
  fetchDoc: () => Promise<DashboardDoc>,
  previous: DashboardState,
  nowMs: number,
): Promise<DashboardState> {
  try {
    const doc = await fetchDoc();
    return { doc, fetchedAtMs: nowMs, error: null };
  } catch (err) {
    return {
      doc: previous.doc,
      fetchedAtMs: previous.fetchedAtMs,
      error: err instanceof Error ? err.message : String(err),
    };
  }
}

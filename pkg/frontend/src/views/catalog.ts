import { GatewayClient } from "../api.js";
import { CatalogEntryDoc } from "../types.js";
import { escapeHtml, formatMinor } from "../format.js";

export interface CatalogState {
  entries: CatalogEntryDoc[];
  role: "user" | "admin" | "manager" | null;
  notice: string | null;
  error: string | null;
}

export function emptyCatalogState(role: CatalogState["role"]): CatalogState {
  return { entries: [], role, notice: null, error: null };
}

export function canEditCatalog(role: CatalogState["role"]): boolean {
  return role === "admin" || role === "manager";
}

/**
 * Validate an editor submission before anything touches the network.
 * Returns the parsed minor-unit price, or a message explaining the refusal.
 */
export function validatePriceInput(
  productCode: string,
  priceText: string,
): { ok: true; priceMinor: number } | { ok: false; message: string } {
  if (productCode.trim() === "") {
    return { ok: false, message: "Product code must not be empty." };
  }
  if (!/^-?\d+$/.test(priceText.trim())) {
    return { ok: false, message: `Price must be an integer in minor units, got "${priceText}".` };
  }
  const priceMinor = Number(priceText.trim());
  if (priceMinor < 0) {
    return { ok: false, message: "Price must not be negative." };
  }
  return { ok: true, priceMinor };
}

function editorForm(): string {
  return `<form id="price-form" class="editor">
    <input name="product_code" placeholder="product code e.g. compute.small" />
    <input name="price_minor" placeholder="price (minor units)" />
    <select name="currency">
      <option>INR</option><option>USD</option><option>EUR</option>
    </select>
    <button type="submit" data-action="set-price">Set price</button>
  </form>`;
}

/** Render the catalog listing plus, for admins and managers, the editor. */
export function renderCatalog(state: CatalogState): string {
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
  parts.push(`<h2>Catalog</h2>`);
  if (canEditCatalog(state.role)) {
    parts.push(editorForm());
  }
  if (state.entries.length === 0) {
    parts.push(`<p class="empty" data-field="catalog-empty">No prices set yet.</p>`);
    return parts.join("\n");
  }
  const rows = state.entries
    .map((entry) => {
      const code = escapeHtml(entry.product_code);
      return `<tr data-product-row="${code}">
        <td>${code}</td>
        <td data-field="price-${code}">${formatMinor(entry.unit_price_minor)}</td>
        <td data-field="price-${code}-minor">${entry.unit_price_minor}</td>
        <td data-field="currency-${code}">${escapeHtml(entry.currency)}</td>
        <td data-field="version-${code}">v${entry.version}</td>
      </tr>`;
    })
    .join("\n");
  parts.push(`<table class="data-table">
    <thead><tr><th>Product</th><th>Price</th><th>Minor units</th><th>Currency</th><th>Version</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`);
  return parts.join("\n");
}

/** Drives the catalog pane: listing refresh plus price submissions. */
export class CatalogController {
  state: CatalogState;

  constructor(private readonly client: GatewayClient, role: CatalogState["role"]) {
    this.state = emptyCatalogState(role);
  }

  async refresh(): Promise<CatalogState> {
    try {
      const entries = await this.client.catalog();
      this.state = { ...this.state, entries, error: null };
    } catch (err) {
      this.state = {
        ...this.state,
        error: err instanceof Error ? err.message : String(err),
      };
    }
    return this.state;
  }

  /**
   * Submit a price. Bad input is refused locally - the gateway would refuse
   * it too, but a malformed price never even leaves the page.
   */
  async submitPrice(
    productCode: string,
    priceText: string,
    currency: string,
  ): Promise<CatalogState> {
    const checked = validatePriceInput(productCode, priceText);
    if (!checked.ok) {
      this.state = { ...this.state, notice: checked.message };
      return this.state;
    }
    try {
      const entry = await this.client.setPrice(productCode, checked.priceMinor, currency);
      this.state = {
        ...this.state,
        notice: `${entry.product_code} priced at ${formatMinor(entry.unit_price_minor)} ${entry.currency} (v${entry.version}).`,
      };
      return this.refresh();
    } catch (err) {
      this.state = {
        ...this.state,
        error: err instanceof Error ? err.message : String(err),
      };
      return this.state;
    }
  }
}

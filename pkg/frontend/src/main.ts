// Browser entrypoint: sign-in, tab navigation, the 2s poll loop, and event
// delegation. Everything rendered comes from the pure view modules; this
// file only moves their HTML into the DOM and forwards clicks back to the
// controllers. Nothing here is imported by tests.

import { GatewayClient } from "./api.js";
import { Session } from "./session.js";
import { escapeHtml } from "./format.js";
import { DEFAULT_POLL_MS, Poller, startPolling } from "./poll.js";
import { DashboardState, refreshDashboard, renderDashboard } from "./views/dashboard.js";
import { ApprovalsController, renderApprovals } from "./views/approvals.js";
import { CatalogController, renderCatalog } from "./views/catalog.js";
import { GroupKey, GROUP_KEYS, ReportsController, renderReports } from "./views/reports.js";

type Pane = "dashboard" | "approvals" | "catalog" | "reports";
const PANES: Pane[] = ["dashboard", "approvals", "catalog", "reports"];

class App {
  private readonly session = new Session();
  private client: GatewayClient | null = null;
  private approvals: ApprovalsController | null = null;
  private catalog: CatalogController | null = null;
  private reports: ReportsController | null = null;
  private dashboard: DashboardState = { doc: null, fetchedAtMs: null, error: null };
  private pane: Pane = "dashboard";
  private poller: Poller | null = null;

  constructor(private readonly root: HTMLElement) {
    root.addEventListener("click", (event) => void this.onClick(event));
    root.addEventListener("submit", (event) => void this.onSubmit(event));
    this.render();
  }

  private render(): void {
    if (!this.session.active || this.client === null) {
      this.root.innerHTML = `<section class="login">
        <h1>Service Bus Portal</h1>
        <form id="login-form">
          <label>Gateway <input name="endpoint" value="http://127.0.0.1:8080" /></label>
          <label>API key <input name="api_key" type="password" autocomplete="off" /></label>
          <button type="submit">Sign in</button>
        </form>
        <p class="meta">The key is held in page memory only and is gone on reload.</p>
        <div id="login-error"></div>
      </section>`;
      return;
    }
    const role = this.session.role ?? "?";
    const tenant = this.session.tenant ?? "?";
    const tabs = PANES.map((pane) => {
      const pressed = pane === this.pane ? ` aria-pressed="true"` : "";
      return `<button data-action="nav" data-pane="${pane}"${pressed}>${pane}</button>`;
    }).join(" ");
    let body = "";
    if (this.pane === "dashboard") {
      body = renderDashboard(this.dashboard);
    } else if (this.pane === "approvals" && this.approvals !== null) {
      body = renderApprovals(this.approvals.state);
    } else if (this.pane === "catalog" && this.catalog !== null) {
      body = renderCatalog(this.catalog.state);
    } else if (this.reports !== null) {
      body = renderReports(this.reports.state);
    }
    this.root.innerHTML = `<header>
      <nav>${tabs}</nav>
      <span class="meta">${escapeHtml(tenant)} / ${escapeHtml(role)}</span>
      <button data-action="sign-out">Sign out</button>
    </header>
    <main>${body}</main>`;
  }

  private async signIn(endpoint: string, apiKey: string): Promise<void> {
    const session = this.session;
    session.signIn(apiKey);
    const client = new GatewayClient(endpoint.replace(/\/$/, ""), session);
    try {
      const who = await client.whoami();
      session.role = who.role;
      session.tenant = who.tenant;
    } catch (err) {
      session.signOut();
      const box = this.root.querySelector("#login-error");
      if (box) {
        box.innerHTML = `<div class="banner banner-error">${escapeHtml(
          err instanceof Error ? err.message : String(err),
        )}</div>`;
      }
      return;
    }
    this.client = client;
    this.approvals = new ApprovalsController(client, session.role);
    this.catalog = new CatalogController(client, session.role);
    this.reports = new ReportsController(client);
    await this.catalog.refresh();
    await this.reports.load("project");
    this.poller = startPolling(() => this.tick(), DEFAULT_POLL_MS);
  }

  /** One poll: refresh what the gateway shows, then redraw the open pane. */
  private async tick(): Promise<void> {
    if (this.client === null || this.approvals === null) return;
    this.dashboard = await refreshDashboard(
      () => this.client!.dashboard(),
      this.dashboard,
      Date.now(),
    );
    await this.approvals.refresh();
    this.render();
  }

  private signOut(): void {
    this.poller?.stop();
    this.poller = null;
    this.session.signOut();
    this.client = null;
    this.approvals = null;
    this.catalog = null;
    this.reports = null;
    this.dashboard = { doc: null, fetchedAtMs: null, error: null };
    this.pane = "dashboard";
    this.render();
  }

  private async onClick(event: Event): Promise<void> {
    const target = (event.target as HTMLElement).closest("[data-action]");
    if (!(target instanceof HTMLElement)) return;
    const action = target.dataset.action;
    if (action === "sign-out") {
      this.signOut();
    } else if (action === "nav") {
      this.pane = (target.dataset.pane as Pane) ?? "dashboard";
      if (this.pane === "catalog") await this.catalog?.refresh();
      if (this.pane === "reports" && this.reports) await this.reports.load(this.reports.state.groupBy);
      this.render();
    } else if ((action === "approve" || action === "reject") && this.approvals) {
      const requestId = target.dataset.requestId;
      if (requestId) {
        await this.approvals.decide(requestId, action);
        this.render();
      }
    } else if (action === "group-by" && this.reports) {
      const group = target.dataset.group as GroupKey;
      if ((GROUP_KEYS as readonly string[]).includes(group)) {
        await this.reports.load(group);
        this.render();
      }
    }
  }

  private async onSubmit(event: Event): Promise<void> {
    const form = event.target;
    if (!(form instanceof HTMLFormElement)) return;
    event.preventDefault();
    const data = new FormData(form);
    if (form.id === "login-form") {
      await this.signIn(String(data.get("endpoint") ?? ""), String(data.get("api_key") ?? ""));
      this.render();
    } else if (form.id === "price-form" && this.catalog) {
      await this.catalog.submitPrice(
        String(data.get("product_code") ?? ""),
        String(data.get("price_minor") ?? ""),
        String(data.get("currency") ?? "INR"),
      );
      this.render();
    }
  }
}

const root = document.getElementById("app");
if (root) {
  new App(root);
}

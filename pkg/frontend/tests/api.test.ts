import { describe, expect, it } from "vitest";
import { GatewayClient, GatewayError } from "../src/api.js";
import { Session } from "../src/session.js";
import { CatalogEntryDoc, WhoamiDoc } from "../src/types.js";
import { fixture, scriptedFetch } from "./helpers.js";

function signedInClient(script: ReturnType<typeof scriptedFetch>): GatewayClient {
  const session = new Session();
  session.signIn("fixture-manager");
  return new GatewayClient("http://gw:8080", session, script.fetch);
}

describe("GatewayClient", () => {
  it("sends the session key as X-CSB-Key and parses the body", async () => {
    const script = scriptedFetch([fixture("whoami_manager")]);
    const doc: WhoamiDoc = await signedInClient(script).whoami();
    expect(doc).toEqual({ tenant: "acme", role: "manager" });
    expect(script.calls).toHaveLength(1);
    expect(script.calls[0].method).toBe("GET");
    expect(script.calls[0].url).toBe("http://gw:8080/v1/whoami");
    expect(script.calls[0].headers["X-CSB-Key"]).toBe("fixture-manager");
    expect(script.calls[0].body).toBeUndefined();
  });

  it("omits the key header when signed out", async () => {
    const script = scriptedFetch([fixture("whoami_manager")]);
    const client = new GatewayClient("http://gw:8080", new Session(), script.fetch);
    await client.whoami();
    expect("X-CSB-Key" in script.calls[0].headers).toBe(false);
  });

  it("asks for pending requests only", async () => {
    const script = scriptedFetch([fixture("requests_pending")]);
    const doc = await signedInClient(script).pendingRequests();
    expect(script.calls[0].url).toBe("http://gw:8080/v1/requests?state=Pending");
    expect(doc.requests).toHaveLength(3);
    expect(doc.requests.every((r) => r.state === "Pending")).toBe(true);
  });

  it("posts decisions to the request's decision endpoint", async () => {
    const script = scriptedFetch([fixture("approve_response")]);
    const doc = await signedInClient(script).approve("00000000-0000-0000-0000-000000000001");
    expect(script.calls[0].method).toBe("POST");
    expect(script.calls[0].url).toBe(
      "http://gw:8080/v1/requests/00000000-0000-0000-0000-000000000001/approve",
    );
    expect(doc.state).toBe("Approved");
  });

  it("escapes ids when building paths", async () => {
    const script = scriptedFetch([fixture("approve_response")]);
    await signedInClient(script).reject("a/b?c");
    expect(script.calls[0].url).toBe("http://gw:8080/v1/requests/a%2Fb%3Fc/reject");
  });

  it("puts catalog prices as a JSON body", async () => {
    const script = scriptedFetch([fixture("catalog_put_compute_small")]);
    const entry: CatalogEntryDoc = await signedInClient(script).setPrice(
      "compute.small",
      1000,
      "INR",
    );
    expect(script.calls[0].method).toBe("PUT");
    expect(script.calls[0].url).toBe("http://gw:8080/v1/catalog/compute.small");
    expect(script.calls[0].headers["Content-Type"]).toBe("application/json");
    expect(JSON.parse(script.calls[0].body ?? "")).toEqual({
      unit_price_minor: 1000,
      currency: "INR",
    });
    expect(entry.version).toBe(1);
  });

  it("threads the group_by through to the report endpoint", async () => {
    const script = scriptedFetch([fixture("cost_report_project")]);
    const report = await signedInClient(script).costReport("project");
    expect(script.calls[0].url).toBe("http://gw:8080/v1/reports/cost?group_by=project");
    expect(report.rows.map((r) => r.total_minor)).toEqual([4000, 2000]);
  });

  it("turns a gateway refusal into a GatewayError with its code", async () => {
    const script = scriptedFetch([fixture("error_permission")]);
    const err = await signedInClient(script)
      .approve("00000000-0000-0000-0000-000000000002")
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(GatewayError);
    const gatewayErr = err as GatewayError;
    expect(gatewayErr.status).toBe(403);
    expect(gatewayErr.code).toBe("PermissionDenied");
    expect(gatewayErr.detail).toContain("may not ApproveRequest");
  });

  it("surfaces the server's negative-price refusal", async () => {
    const script = scriptedFetch([fixture("catalog_put_negative")]);
    const err = await signedInClient(script)
      .setPrice("snapshot.standard", -40, "EUR")
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(GatewayError);
    expect((err as GatewayError).status).toBe(400);
    expect((err as GatewayError).code).toBe("NegativePrice");
  });

  it("falls back to the status code when the error body is not JSON", async () => {
    const fetchImpl = async (): Promise<Response> =>
      new Response("<html>bad gateway</html>", { status: 502 });
    const session = new Session();
    session.signIn("k");
    const client = new GatewayClient("http://gw:8080", session, fetchImpl);
    const err = await client
      .whoami()
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(GatewayError);
    expect((err as GatewayError).status).toBe(502);
    expect((err as GatewayError).code).toBe("HttpError");
  });
});

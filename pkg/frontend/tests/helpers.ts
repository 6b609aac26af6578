import { readFileSync } from "node:fs";
import { FetchLike } from "../src/api.js";

/** One recorded gateway exchange: the status and JSON body it returned. */
export interface Recorded {
  status: number;
  body: unknown;
}

export function fixture(name: string): Recorded {
  const url = new URL(`./fixtures/${name}.json`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as Recorded;
}

export interface Call {
  method: string;
  url: string;
  headers: Record<string, string>;
  body: string | undefined;
}

export interface FetchScript {
  fetch: FetchLike;
  calls: Call[];
}

/**
 * A fetch that replays recorded exchanges in order and logs every request.
 * Running past the end of the script fails the test loudly.
 */
export function scriptedFetch(script: Recorded[]): FetchScript {
  const queue = [...script];
  const calls: Call[] = [];
  const fetchImpl: FetchLike = async (input, init) => {
    calls.push({
      method: init?.method ?? "GET",
      url: input,
      headers: { ...((init?.headers as Record<string, string>) ?? {}) },
      body: typeof init?.body === "string" ? init.body : undefined,
    });
    const next = queue.shift();
    if (next === undefined) {
      throw new Error(`unexpected request #${calls.length}: ${init?.method ?? "GET"} ${input}`);
    }
    return new Response(JSON.stringify(next.body), {
      status: next.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetch: fetchImpl, calls };
}

/** A fetch whose socket never connects, like a gateway that is down. */
export const downFetch: FetchLike = async () => {
  throw new TypeError("fetch failed");
};

/**
 * Pull every data-field value out of rendered HTML. The views tag each
 * displayed number with data-field precisely so tests can compare them
 * against the recorded gateway documents.
 */
export function fieldMap(html: string): Record<string, string> {
  const fields: Record<string, string> = {};
  for (const match of html.matchAll(/data-field="([^"]+)"[^>]*>([^<]*)</g)) {
    fields[match[1]] = match[2];
  }
  return fields;
}

const HTML_ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function escapeHtml(value: unknown): string {
  return String(value).replace(/[&<>"']/g, (ch) => HTML_ESCAPES[ch]);
}

/** Minor units to a display amount: 12345 -> "123.45". */
export function formatMinor(totalMinor: number): string {
  const sign = totalMinor < 0 ? "-" : "";
  const abs = Math.abs(totalMinor);
  const major = Math.floor(abs / 100);
  const minor = String(abs % 100).padStart(2, "0");
  return `${sign}${major}.${minor}`;
}

export function formatFetchedAt(ms: number): string {
  return new Date(ms).toISOString().replace("T", " ").slice(0, 19);
}

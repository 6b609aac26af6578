// The API key lives in this object for the lifetime of the page and
// nowhere else; nothing about the session survives a reload.

export class Session {
  private apiKey: string | null = null;
  role: "user" | "admin" | "manager" | null = null;
  tenant: string | null = null;

  signIn(apiKey: string): void {
    this.apiKey = apiKey;
  }

  signOut(): void {
    this.apiKey = null;
    this.role = null;
    this.tenant = null;
  }

  get key(): string | null {
    return this.apiKey;
  }

  get active(): boolean {
    return this.apiKey !== null;
  }
}

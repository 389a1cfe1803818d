/** HTTP client: /login, /rpc, and the card tray. The transport is injectable
 * so tests can run against a recorded conversation or a live server. */

import { Envelope, decodeEnvelope, encodeEnvelope } from "./wire.js";

export interface HttpReply {
  status: number;
  body: string;
}

export type Transport = (
  url: string,
  init: { method: string; headers: Record<string, string>; body?: string },
) => Promise<HttpReply>;

const fetchTransport: Transport = async (url, init) => {
  const response = await fetch(url, init);
  return { status: response.status, body: await response.text() };
};

export class ApiError extends Error {
  constructor(public readonly status: number, public readonly body: string) {
    super(`HTTP ${status}: ${body.slice(0, 200)}`);
  }
}

export interface LoginInfo {
  token: string;
  expiresAt: string;
  isAdmin: boolean;
  account: string;
}

export interface TrayStatus {
  cardAuthenticated: boolean;
  serverAuthenticated: boolean;
  cardNumber: string;
  accountId: string;
  synced?: boolean;
  cachedBalanceMinor?: number;
}

export class ApiClient {
  token: string | null = null;
  account: string | null = null;
  isAdmin = false;
  cardAccount: string | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly transport: Transport = fetchTransport,
  ) {}

  private async post(path: string, body: string): Promise<HttpReply> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token !== null) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    return this.transport(this.baseUrl + path, { method: "POST", headers, body });
  }

  async login(username: string, password: string): Promise<LoginInfo> {
    const reply = await this.post("/login", JSON.stringify({ username, password }));
    if (reply.status !== 200) {
      throw new ApiError(reply.status, reply.body);
    }
    const info = JSON.parse(reply.body) as LoginInfo;
    this.token = info.token;
    this.account = info.account;
    this.isAdmin = info.isAdmin;
    return info;
  }

  async rpc(request: Envelope): Promise<Envelope> {
    const reply = await this.post("/rpc", encodeEnvelope(request));
    if (reply.status !== 200) {
      throw new ApiError(reply.status, reply.body);
    }
    return decodeEnvelope(reply.body);
  }

  async insertCard(card: unknown, secretKeyHex: string): Promise<TrayStatus> {
    const reply = await this.post("/card/insert", JSON.stringify({ card, secretKeyHex }));
    if (reply.status !== 200) {
      throw new ApiError(reply.status, reply.body);
    }
    const tray = JSON.parse(reply.body) as TrayStatus;
    this.cardAccount = tray.accountId ?? null;
    return tray;
  }

  async ejectCard(): Promise<void> {
    const reply = await this.post("/card/eject", "");
    if (reply.status !== 200) {
      throw new ApiError(reply.status, reply.body);
    }
    this.cardAccount = null;
  }

  logout(): void {
    this.token = null;
    this.account = null;
    this.isAdmin = false;
    this.cardAccount = null;
  }
}

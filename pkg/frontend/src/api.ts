/** Typed client for the firewall admin API.
 *
 * The key lives in memory only; nothing is persisted by the page. 401/403
 * surface as AuthError so the shell can prompt for re-auth, transport
 * failures as TransportError so views can show a stale-data banner and keep
 * polling.
 */

import type {
  AlertDoc,
  EventRecord,
  FeedbackResult,
  MetricsSnapshot,
  QuarantineItemDoc,
  ResolveResult,
  RulesDoc,
  WireRule,
} from "./types.js";

export class AuthError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class TransportError extends Error {}

export interface ClientConfig {
  baseUrl: string;
  apiKey: string;
  fetchFn?: typeof fetch;
}

export class AdminClient {
  private fetchFn: typeof fetch;

  constructor(private cfg: ClientConfig) {
    this.fetchFn = cfg.fetchFn ?? fetch.bind(globalThis);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.cfg.baseUrl + path, {
        method,
        headers: {
          "X-API-Key": this.cfg.apiKey,
          ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
        },
        body: body !== undefined ? JSON.stringify(body) : undefined,
      });
    } catch (err) {
      throw new TransportError(String(err));
    }
    if (response.status === 401 || response.status === 403) {
      throw new AuthError(response.status, await response.text());
    }
    if (!response.ok) {
      let detail = "";
      try {
        const parsed = (await response.json()) as { detail?: string };
        detail = parsed.detail ?? JSON.stringify(parsed);
      } catch {
        detail = response.statusText;
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  getRules(): Promise<RulesDoc> {
    return this.request("GET", "/admin/rules");
  }

  putRules(rules: WireRule[]): Promise<{ version: number; rules: number }> {
    return this.request("PUT", "/admin/rules", { rules });
  }

  getEvents(sinceSeq: number, limit = 200): Promise<{ events: EventRecord[]; tip_seq: number }> {
    return this.request("GET", `/admin/events?since_seq=${sinceSeq}&limit=${limit}`);
  }

  getQuarantine(status = "pending"): Promise<{ items: QuarantineItemDoc[] }> {
    return this.request("GET", `/admin/quarantine?status=${encodeURIComponent(status)}`);
  }

  resolveQuarantine(
    eventId: string,
    action: "release" | "block",
    label: "tp" | "fp",
  ): Promise<ResolveResult> {
    return this.request("POST", `/admin/quarantine/${encodeURIComponent(eventId)}/resolve`, {
      action,
      label,
    });
  }

  postFeedback(eventId: string, ruleId: string, label: "tp" | "fp"): Promise<FeedbackResult> {
    return this.request("POST", "/admin/feedback", {
      event_id: eventId,
      rule_id: ruleId,
      label,
    });
  }

  getMetrics(): Promise<MetricsSnapshot> {
    return this.request("GET", "/metrics");
  }

  getAlerts(sinceId: number): Promise<{ alerts: AlertDoc[] }> {
    return this.request("GET", `/admin/alerts?since_id=${sinceId}`);
  }
}

/** Dashboard state: everything here is a cache of server responses keyed by
 * monotone cursors. The server stays the single source of truth; reloading
 * the page reproduces identical views from the API alone.
 */

import { AdminClient, AuthError } from "./api.js";
import { AlertCursor, EventCursor } from "./cursors.js";
import { pushBounded } from "./sparkline.js";
import type {
  AlertDoc,
  EventRecord,
  MetricsSnapshot,
  QuarantineItemDoc,
  ResolveResult,
  RulesDoc,
  WireRule,
} from "./types.js";

export const DEFAULT_POLL_INTERVAL_MS = 2000;
export const EVENT_WINDOW = 500;

/** Release is the dashboard's most dangerous act: the operator must type the
 * event id back verbatim. Block needs no confirmation. */
export function releaseConfirmed(eventId: string, typed: string): boolean {
  return typed.trim() === eventId;
}

export interface StagedEdit {
  ruleId: string;
  weight?: number;
  description?: string;
}

export class DashboardStore {
  events: EventRecord[] = [];
  quarantine: QuarantineItemDoc[] = [];
  rules: RulesDoc | null = null;
  stagedRules: WireRule[] | null = null;
  rulesError: string | null = null;
  metrics: MetricsSnapshot | null = null;
  blockRateSeries: number[] = [];
  alerts: AlertDoc[] = [];
  authRequired = false;

  readonly eventCursor = new EventCursor();
  readonly alertCursor = new AlertCursor();

  constructor(
    private client: AdminClient,
    readonly pollIntervalMs: number = DEFAULT_POLL_INTERVAL_MS,
  ) {}

  private guardAuth<T>(err: unknown): never {
    if (err instanceof AuthError) {
      this.authRequired = true;
    }
    throw err;
  }

  async pollEvents(): Promise<void> {
    try {
      const { events } = await this.client.getEvents(this.eventCursor.since);
      const fresh = this.eventCursor.take(events);
      if (fresh.length > 0) {
        this.events = [...this.events, ...fresh].slice(-EVENT_WINDOW);
      }
    } catch (err) {
      this.guardAuth(err);
    }
  }

  async pollQuarantine(): Promise<void> {
    try {
      const { items } = await this.client.getQuarantine("pending");
      this.quarantine = items;
    } catch (err) {
      this.guardAuth(err);
    }
  }

  async pollRules(): Promise<void> {
    try {
      this.rules = await this.client.getRules();
    } catch (err) {
      this.guardAuth(err);
    }
  }

  async pollMetrics(): Promise<void> {
    try {
      const snapshot = await this.client.getMetrics();
      this.metrics = snapshot;
      this.blockRateSeries = pushBounded(this.blockRateSeries, snapshot.ewma_block_rate);
    } catch (err) {
      this.guardAuth(err);
    }
  }

  async pollAlerts(): Promise<void> {
    try {
      const { alerts } = await this.client.getAlerts(this.alertCursor.since);
      const fresh = this.alertCursor.take(alerts);
      if (fresh.length > 0) {
        this.alerts = [...this.alerts, ...fresh];
      }
    } catch (err) {
      this.guardAuth(err);
    }
  }

  /** Critical alerts pin to the top of the Alerts view. */
  get pinnedAlerts(): AlertDoc[] {
    return this.alerts.filter((a) => a.severity === "critical");
  }

  async resolve(
    eventId: string,
    action: "release" | "block",
    label: "tp" | "fp",
    typedConfirmation = "",
  ): Promise<ResolveResult> {
    if (action === "release" && !releaseConfirmed(eventId, typedConfirmation)) {
      throw new Error("release requires typing the event id to confirm");
    }
    try {
      const result = await this.client.resolveQuarantine(eventId, action, label);
      this.quarantine = this.quarantine.filter((i) => i.event_id !== eventId);
      return result;
    } catch (err) {
      this.guardAuth(err);
    }
  }

  // -- rules editor: stage locally, commit as a full PUT ---------------------

  startEditing(): void {
    if (this.rules) {
      this.stagedRules = this.rules.rules.map((r) => ({ ...r }));
      this.rulesError = null;
    }
  }

  stageEdit(edit: StagedEdit): void {
    if (!this.stagedRules) return;
    const rule = this.stagedRules.find((r) => r.id === edit.ruleId);
    if (!rule) return;
    if (edit.weight !== undefined) rule.weight = edit.weight;
    if (edit.description !== undefined) rule.description = edit.description;
  }

  discardEdits(): void {
    this.stagedRules = null;
    this.rulesError = null;
  }

  async commitEdits(): Promise<boolean> {
    if (!this.stagedRules) return false;
    try {
      await this.client.putRules(this.stagedRules);
      this.stagedRules = null;
      this.rulesError = null;
      await this.pollRules();
      return true;
    } catch (err) {
      if (err instanceof AuthError) {
        this.authRequired = true;
        throw err;
      }
      this.rulesError = err instanceof Error ? err.message : String(err);
      return false; // staged edits stay on screen for correction
    }
  }
}

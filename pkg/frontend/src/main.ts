/** Browser shell: settings form, tab switching, one poller per view. */

import { AdminClient } from "./api.js";
import { Poller } from "./poller.js";
import { DashboardStore } from "./store.js";
import { renderAlerts, renderEvents, renderMetrics, renderQuarantine, renderRules } from "./views.js";

type ViewName = "events" | "quarantine" | "rules" | "metrics" | "alerts";

const VIEWS: ViewName[] = ["events", "quarantine", "rules", "metrics", "alerts"];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class Shell {
  private store!: DashboardStore;
  private pollers: Partial<Record<ViewName, Poller>> = {};

  connect(baseUrl: string, apiKey: string, pollIntervalMs: number): void {
    this.disconnect();
    const client = new AdminClient({ baseUrl, apiKey });
    this.store = new DashboardStore(client, pollIntervalMs);
    const renderers: Record<ViewName, () => string> = {
      events: () => renderEvents(this.store),
      quarantine: () => renderQuarantine(this.store),
      rules: () => renderRules(this.store),
      metrics: () => renderMetrics(this.store),
      alerts: () => renderAlerts(this.store),
    };
    const polls: Record<ViewName, () => Promise<void>> = {
      events: () => this.store.pollEvents(),
      quarantine: () => this.store.pollQuarantine(),
      rules: () => this.store.pollRules(),
      metrics: () => this.store.pollMetrics(),
      alerts: () => this.store.pollAlerts(),
    };
    for (const view of VIEWS) {
      const poller = new Poller(
        async () => {
          await polls[view]();
          this.paint(view, renderers[view]());
        },
        pollIntervalMs,
        (stale) => this.banner(view, stale),
      );
      this.pollers[view] = poller;
      poller.start();
    }
    el("conn-state").textContent = `connected to ${baseUrl}`;
  }

  disconnect(): void {
    for (const poller of Object.values(this.pollers)) poller?.stop();
    this.pollers = {};
  }

  private paint(view: ViewName, html: string): void {
    if (this.store.authRequired) {
      el("conn-state").textContent = "authentication failed - check the API key";
      return;
    }
    el(`view-${view}`).innerHTML = html;
    if (view === "quarantine") this.wireQuarantine();
    if (view === "rules") this.wireRules();
  }

  private banner(view: ViewName, stale: boolean): void {
    el(`stale-${view}`).style.display = stale ? "block" : "none";
  }

  private wireQuarantine(): void {
    for (const card of document.querySelectorAll<HTMLElement>("#view-quarantine .card")) {
      const eventId = card.dataset.eventId!;
      const label = () =>
        (card.querySelector<HTMLSelectElement>(".label-pick")!.value as "tp" | "fp");
      card.querySelector<HTMLButtonElement>(".act-block")?.addEventListener("click", () => {
        void this.store.resolve(eventId, "block", label()).then(() => this.pollNow("quarantine"));
      });
      card.querySelector<HTMLButtonElement>(".act-release")?.addEventListener("click", () => {
        const typed = card.querySelector<HTMLInputElement>(".confirm-id")!.value;
        void this.store
          .resolve(eventId, "release", label(), typed)
          .then(() => this.pollNow("quarantine"))
          .catch((err) => window.alert(String(err)));
      });
    }
  }

  private wireRules(): void {
    el<HTMLButtonElement>("rules-edit")?.addEventListener?.("click", () => {
      this.store.startEditing();
      this.paint("rules", renderRules(this.store));
    });
    document.getElementById("rules-commit")?.addEventListener("click", () => {
      for (const row of document.querySelectorAll<HTMLElement>("#view-rules tr[data-rule-id]")) {
        const input = row.querySelector<HTMLInputElement>(".weight-edit");
        if (input) {
          this.store.stageEdit({ ruleId: row.dataset.ruleId!, weight: Number(input.value) });
        }
      }
      void this.store.commitEdits().then(() => this.paint("rules", renderRules(this.store)));
    });
    document.getElementById("rules-discard")?.addEventListener("click", () => {
      this.store.discardEdits();
      this.paint("rules", renderRules(this.store));
    });
  }

  private pollNow(view: ViewName): void {
    void this.pollers[view]?.runOnce();
  }

  show(view: ViewName): void {
    for (const v of VIEWS) {
      el(`panel-${v}`).style.display = v === view ? "block" : "none";
      el(`tab-${v}`).classList.toggle("active", v === view);
    }
  }
}

const shell = new Shell();

document.addEventListener("DOMContentLoaded", () => {
  for (const view of VIEWS) {
    el(`tab-${view}`).addEventListener("click", () => shell.show(view));
  }
  el<HTMLFormElement>("settings").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const baseUrl = el<HTMLInputElement>("base-url").value.replace(/\/$/, "");
    const apiKey = el<HTMLInputElement>("api-key").value;
    const interval = Number(el<HTMLInputElement>("poll-interval").value) || 2000;
    shell.connect(baseUrl, apiKey, interval);
  });
  shell.show("events");
});

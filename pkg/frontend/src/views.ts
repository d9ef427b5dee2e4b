/** Pure HTML renderers: state in, markup out. Keeping these free of DOM
 * access makes every view testable in node. */

import { sparklinePath } from "./sparkline.js";
import type { DashboardStore } from "./store.js";
import type { EventRecord, QuarantineItemDoc } from "./types.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function decisionBadge(decision: string): string {
  return `<span class="badge badge-${esc(decision)}">${esc(decision)}</span>`;
}

export function renderEvents(store: DashboardStore): string {
  if (store.events.length === 0) {
    return `<p class="zero">No events yet.</p>`;
  }
  const rows = [...store.events]
    .reverse()
    .map(
      (e: EventRecord) => `
      <tr>
        <td>${esc(e.seq)}</td>
        <td>${esc(e.occurred_at)}</td>
        <td>${esc(e.client_id)}</td>
        <td>${decisionBadge(e.final_decision)}</td>
        <td>${esc(e.input_verdict.score)}</td>
        <td>${esc(e.input_verdict.matched_rules.join(", "))}</td>
        <td>${esc(e.reason ?? "")}</td>
      </tr>`,
    )
    .join("");
  return `
    <table class="grid">
      <thead><tr><th>seq</th><th>time</th><th>client</th><th>decision</th>
        <th>score</th><th>rules</th><th>reason</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderQuarantine(store: DashboardStore): string {
  if (store.quarantine.length === 0) {
    return `<p class="zero">Quarantine queue is empty.</p>`;
  }
  const cards = store.quarantine
    .map((item: QuarantineItemDoc) => {
      const excerpt =
        item.envelope.messages?.map((m) => `${m.role}: ${m.content}`).join("\n") ?? "";
      return `
      <div class="card" data-event-id="${esc(item.event_id)}">
        <header><code>${esc(item.event_id)}</code> · ${esc(item.kind)} quarantine</header>
        <pre>${esc(excerpt.slice(0, 600))}</pre>
        <p>matched: ${esc(item.matched_rule_ids.join(", ") || "(detectors only)")}</p>
        <div class="resolve-controls">
          <label>label
            <select class="label-pick"><option value="fp">false positive</option>
              <option value="tp">true positive</option></select>
          </label>
          <button class="act-block">block</button>
          <input class="confirm-id" placeholder="type event id to release" />
          <button class="act-release">release</button>
        </div>
      </div>`;
    })
    .join("");
  return `<div class="cards">${cards}</div>`;
}

export function renderRules(store: DashboardStore): string {
  const doc = store.rules;
  if (!doc) {
    return `<p class="zero">Rules not loaded yet.</p>`;
  }
  const editing = store.stagedRules !== null;
  const rules = editing ? store.stagedRules! : doc.rules;
  const rows = rules
    .map(
      (r) => `
      <tr data-rule-id="${esc(r.id)}">
        <td><code>${esc(r.id)}</code></td>
        <td>${esc(r.category)}</td>
        <td class="pattern">${esc(r.pattern)}</td>
        <td>${
          editing
            ? `<input class="weight-edit" type="number" min="0.05" max="0.99" step="0.01" value="${r.weight}">`
            : r.weight.toFixed(4)
        }</td>
        <td>${esc(r.action)}</td>
        <td>${esc(r.applies_to)}</td>
      </tr>`,
    )
    .join("");
  const error = store.rulesError
    ? `<p class="error inline-error">${esc(store.rulesError)}</p>`
    : "";
  const controls = editing
    ? `<button id="rules-commit">save (PUT full set)</button>
       <button id="rules-discard">discard</button>`
    : `<button id="rules-edit">stage edits</button>`;
  return `
    <p>active version <strong>${doc.version}</strong> · ${rules.length} rules</p>
    ${error}
    <div class="rule-controls">${controls}</div>
    <table class="grid">
      <thead><tr><th>id</th><th>category</th><th>pattern</th><th>weight</th>
        <th>action</th><th>applies</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>`;
}

export function renderMetrics(store: DashboardStore): string {
  const m = store.metrics;
  if (!m) {
    return `<p class="zero">No metrics yet.</p>`;
  }
  const t = m.totals;
  const path = sparklinePath(store.blockRateSeries);
  return `
    <dl class="totals">
      <dt>requests</dt><dd>${t.requests}</dd>
      <dt>allows</dt><dd>${t.allows}</dd>
      <dt>blocks</dt><dd>${t.blocks}</dd>
      <dt>quarantines</dt><dd>${t.quarantines}</dd>
      <dt>rate limited</dt><dd>${t.rate_limited}</dd>
    </dl>
    <p>latency p50 ${m.latency_ms.p50} ms · p95 ${m.latency_ms.p95} ms · max ${m.latency_ms.max} ms</p>
    <p>block rate (EWMA): ${m.ewma_block_rate.toFixed(4)}</p>
    <svg class="spark" viewBox="0 0 120 24" width="240" height="48"
      ><path d="${path}" fill="none" stroke="currentColor" stroke-width="1.5"/></svg>`;
}

export function renderAlerts(store: DashboardStore): string {
  if (store.alerts.length === 0) {
    return `<p class="zero">No alerts.</p>`;
  }
  const pinned = store.pinnedAlerts;
  const rest = store.alerts.filter((a) => a.severity !== "critical").reverse();
  const row = (a: (typeof store.alerts)[number], cls = "") => `
    <li class="alert ${cls} sev-${esc(a.severity)}">
      <strong>#${a.alert_id} ${esc(a.kind)}</strong> [${esc(a.severity)}]
      <code>${esc(JSON.stringify(a.payload))}</code>
    </li>`;
  return `
    <ul class="alerts">
      ${pinned.map((a) => row(a, "pinned")).join("")}
      ${rest.map((a) => row(a)).join("")}
    </ul>`;
}

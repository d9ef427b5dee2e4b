/** Strictly monotone polling cursors: nothing is ever rendered twice even if
 * the server replays a window or a poll races a refresh. */

import type { AlertDoc, EventRecord } from "./types.js";

export class EventCursor {
  private nextSeq = 0;

  /** since_seq value for the next poll. */
  get since(): number {
    return this.nextSeq;
  }

  /** Keep only records not yet seen, in seq order; advance past them. */
  take(events: EventRecord[]): EventRecord[] {
    const fresh = events
      .filter((e) => Number(e.seq) >= this.nextSeq)
      .sort((a, b) => Number(a.seq) - Number(b.seq));
    if (fresh.length > 0) {
      this.nextSeq = Number(fresh[fresh.length - 1].seq) + 1;
    }
    return fresh;
  }
}

export class AlertCursor {
  private lastId = 0;

  get since(): number {
    return this.lastId;
  }

  take(alerts: AlertDoc[]): AlertDoc[] {
    const fresh = alerts
      .filter((a) => a.alert_id > this.lastId)
      .sort((a, b) => a.alert_id - b.alert_id);
    if (fresh.length > 0) {
      this.lastId = fresh[fresh.length - 1].alert_id;
    }
    return fresh;
  }
}

import {
  CommandFrame,
  CueCard,
  OperatorAction,
  ServerFrame,
  Snapshot,
  commandFrame,
} from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface Toast {
  kind: "ack" | "nack" | "error";
  text: string;
}

/**
 * What the operator may do in each phase. Mirrors the service's nack
 * rules so buttons grey out instead of collecting rejections; in a
 * protective stop nothing but reset is live.
 */
const ENABLED_BY_PHASE: Record<string, readonly OperatorAction[]> = {
  idle: ["start", "next", "enter_teach"],
  running: ["pause", "next", "enter_teach"],
  transitioning: ["pause", "next"],
  in_teach: ["next", "exit_teach"],
  awaiting_tap: ["pause", "next", "simulate_tap"],
  protective_stop: ["reset_stop"],
};

const TOAST_KEEP = 5;

/** All console state. Performance logic lives on the server; this is a
 * mirror that any single snapshot plus the card list fully determines. */
export class ConsoleViewModel {
  connection: Connection = "connecting";
  snapshot: Snapshot | null = null;
  cards: CueCard[] = [];
  toasts: Toast[] = [];

  private pending = new Map<string, OperatorAction>();
  private counter = 0;
  private readonly issuer: string;
  private readonly now: () => number;

  constructor(issuer = "console", now: () => number = () => Date.now() / 1000) {
    this.issuer = issuer;
    this.now = now;
  }

  /** Index of the card the show is on, or null before the first snapshot. */
  get selectedIndex(): number | null {
    return this.snapshot ? this.snapshot.cue : null;
  }

  enabledActions(): ReadonlySet<OperatorAction> {
    if (this.connection !== "open" || this.snapshot === null) {
      return new Set();
    }
    return new Set(ENABLED_BY_PHASE[this.snapshot.phase] ?? []);
  }

  /**
   * Build the command frame for a click, or null when the action is
   * disabled. A repeat click while the same action is still unanswered
   * reuses the pending id, so the service applies it once however many
   * times the frame lands.
   */
  issueCommand(action: OperatorAction): CommandFrame | null {
    if (!this.enabledActions().has(action)) {
      return null;
    }
    for (const [id, pendingAction] of this.pending) {
      if (pendingAction === action) {
        return commandFrame(action, id, this.issuer, this.now());
      }
    }
    this.counter += 1;
    const id = `${this.issuer}-${this.counter}`;
    this.pending.set(id, action);
    return commandFrame(action, id, this.issuer, this.now());
  }

  pendingCount(): number {
    return this.pending.size;
  }

  onFrame(frame: ServerFrame): void {
    switch (frame.kind) {
      case "snapshot":
        this.snapshot = frame.snapshot;
        break;
      case "ack":
        this.resolve(frame.ack.id);
        this.toast("ack", `${frame.ack.id} -> ${frame.ack.phase}`);
        break;
      case "nack":
        this.resolve(frame.nack.id);
        this.toast("nack", frame.nack.reason);
        break;
      case "error":
        this.toast("error", frame.reason);
        break;
    }
  }

  onOpen(): void {
    this.connection = "open";
  }

  onClose(): void {
    this.connection = "closed";
    this.pending.clear(); // replies will never come; do not wedge the buttons
  }

  private resolve(id: string): void {
    this.pending.delete(id);
  }

  private toast(kind: Toast["kind"], text: string): void {
    this.toasts.push({ kind, text });
    if (this.toasts.length > TOAST_KEEP) {
      this.toasts.splice(0, this.toasts.length - TOAST_KEEP);
    }
  }
}

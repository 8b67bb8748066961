/**
 * Wire protocol between the console and the performance service.
 *
 * The socket carries JSON text frames. Server to client: `snapshot`
 * (30 Hz state), `ack` / `nack` (one per command, matched by id), and
 * `error` (the frame could not be parsed as a command). Client to
 * server: `command` frames. Shapes here mirror the service exactly;
 * anything that does not parse is a ProtocolError, never a guess.
 */

export const OPERATOR_ACTIONS = [
  "start",
  "pause",
  "next",
  "reset_stop",
  "enter_teach",
  "exit_teach",
  "simulate_tap",
] as const;

export type OperatorAction = (typeof OPERATOR_ACTIONS)[number];

export interface ModeDoc {
  kind: string;
  damping: number | null;
}

export interface Snapshot {
  tick: number;
  t: number;
  phase: string;
  cue: number;
  mode: ModeDoc;
  q: number[]; // 6 joint angles, radians
  points: [number, number, number][]; // 7 link points, meters
  force_avg: number;
  triggered: boolean;
  paused: boolean;
  finished: boolean;
  stop_count: number;
}

export interface Ack {
  id: string;
  phase: string;
}

export interface Nack {
  id: string;
  reason: string;
}

export interface CueCard {
  index: number;
  kind: string;
  ref: string | null; // teach cues carry no trajectory reference
  music_track: string;
  transition_s: number;
  notes: string;
  teach_duration_s: number | null;
}

export interface CardsDoc {
  kind: string;
  version: number;
  title: string;
  cards: CueCard[];
}

export interface CommandFrame {
  type: "command";
  id: string;
  action: OperatorAction;
  issuer: string;
  client_ts: number;
}

export type ServerFrame =
  | { kind: "snapshot"; snapshot: Snapshot }
  | { kind: "ack"; ack: Ack }
  | { kind: "nack"; nack: Nack }
  | { kind: "error"; reason: string };

export class ProtocolError extends Error {}

function need<T>(value: T | undefined | null, what: string): T {
  if (value === undefined || value === null) {
    throw new ProtocolError(`frame is missing ${what}`);
  }
  return value;
}

function asNumber(value: unknown, what: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new ProtocolError(`${what} is not a finite number`);
  }
  return value;
}

function asString(value: unknown, what: string): string {
  if (typeof value !== "string") {
    throw new ProtocolError(`${what} is not a string`);
  }
  return value;
}

export function parseSnapshot(doc: Record<string, unknown>): Snapshot {
  const mode = need(doc["mode"], "mode") as Record<string, unknown>;
  const q = need(doc["q"], "q") as unknown[];
  const points = need(doc["points"], "points") as unknown[];
  if (q.length !== 6) {
    throw new ProtocolError(`expected 6 joint angles, got ${q.length}`);
  }
  if (points.length !== 7) {
    throw new ProtocolError(`expected 7 link points, got ${points.length}`);
  }
  return {
    tick: asNumber(doc["tick"], "tick"),
    t: asNumber(doc["t"], "t"),
    phase: asString(doc["phase"], "phase"),
    cue: asNumber(doc["cue"], "cue"),
    mode: {
      kind: asString(mode["kind"], "mode.kind"),
      damping: mode["damping"] === null ? null : asNumber(mode["damping"], "mode.damping"),
    },
    q: q.map((v, i) => asNumber(v, `q[${i}]`)),
    points: points.map((p, i) => {
      const row = p as unknown[];
      if (row.length !== 3) {
        throw new ProtocolError(`point ${i} is not a 3-vector`);
      }
      return [
        asNumber(row[0], `points[${i}][0]`),
        asNumber(row[1], `points[${i}][1]`),
        asNumber(row[2], `points[${i}][2]`),
      ];
    }),
    force_avg: asNumber(doc["force_avg"], "force_avg"),
    triggered: Boolean(doc["triggered"]),
    paused: Boolean(doc["paused"]),
    finished: Boolean(doc["finished"]),
    stop_count: asNumber(doc["stop_count"], "stop_count"),
  };
}

export function parseServerFrame(text: string): ServerFrame {
  let doc: Record<string, unknown>;
  try {
    doc = JSON.parse(text) as Record<string, unknown>;
  } catch {
    throw new ProtocolError("frame is not valid JSON");
  }
  if (typeof doc !== "object" || doc === null) {
    throw new ProtocolError("frame is not an object");
  }
  switch (doc["type"]) {
    case "snapshot":
      return { kind: "snapshot", snapshot: parseSnapshot(doc) };
    case "ack":
      return {
        kind: "ack",
        ack: { id: asString(doc["id"], "id"), phase: asString(doc["phase"], "phase") },
      };
    case "nack":
      return {
        kind: "nack",
        nack: { id: asString(doc["id"], "id"), reason: asString(doc["reason"], "reason") },
      };
    case "error":
      return { kind: "error", reason: asString(doc["reason"], "reason") };
    default:
      throw new ProtocolError(`unknown frame type ${String(doc["type"])}`);
  }
}

export function parseCardsDoc(text: string): CardsDoc {
  let doc: Record<string, unknown>;
  try {
    doc = JSON.parse(text) as Record<string, unknown>;
  } catch {
    throw new ProtocolError("card document is not valid JSON");
  }
  const cards = need(doc["cards"], "cards") as Record<string, unknown>[];
  return {
    kind: asString(doc["kind"], "kind"),
    version: asNumber(doc["version"], "version"),
    title: asString(doc["title"], "title"),
    cards: cards.map((c) => ({
      index: asNumber(c["index"], "card index"),
      kind: asString(c["kind"], "card kind"),
      ref: c["ref"] === null || c["ref"] === undefined ? null : asString(c["ref"], "card ref"),
      music_track: asString(c["music_track"], "card music_track"),
      transition_s: asNumber(c["transition_s"], "card transition_s"),
      notes: asString(c["notes"], "card notes"),
      teach_duration_s:
        c["teach_duration_s"] === null || c["teach_duration_s"] === undefined
          ? null
          : asNumber(c["teach_duration_s"], "card teach_duration_s"),
    })),
  };
}

export function commandFrame(
  action: OperatorAction,
  id: string,
  issuer: string,
  clientTs: number,
): CommandFrame {
  return { type: "command", id, action, issuer, client_ts: clientTs };
}

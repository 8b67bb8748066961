import { Plane, SVG_NS, renderArm, renderForceMeter, renderModeBadge } from "./arm.js";
import { buildControls, renderControls, renderToasts } from "./controls.js";
import { renderCueDeck } from "./cuedeck.js";
import { ProtocolError, parseCardsDoc, parseServerFrame } from "./protocol.js";
import { ConsoleViewModel } from "./viewmodel.js";

/** The slice of WebSocket the console uses. Kept narrow so tests can
 * hand in a plain object and drive the handlers directly. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
}

export interface FetchResponseLike {
  ok: boolean;
  status: number;
  text(): Promise<string>;
}

export interface BootOptions {
  token?: string;
  plane?: Plane;
  issuer?: string;
  fetchImpl?: (url: string) => Promise<FetchResponseLike>;
  socketFactory?: (url: string) => SocketLike;
  /** Queues one render callback; defaults to requestAnimationFrame. */
  schedule?: (cb: () => void) => void;
  reconnectDelayMs?: number;
}

export interface AppHandle {
  vm: ConsoleViewModel;
}

function defaultSocketFactory(url: string): SocketLike {
  // the DOM socket has this shape, its handler params are just wider
  return new WebSocket(url) as unknown as SocketLike;
}

function wsUrl(token: string): string {
  const scheme = window.location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${window.location.host}/ws?token=${encodeURIComponent(token)}`;
}

function statusLine(vm: ConsoleViewModel): string {
  if (vm.connection === "connecting") {
    return "connecting";
  }
  if (vm.connection === "closed") {
    return "link lost; reconnecting";
  }
  const s = vm.snapshot;
  if (s === null) {
    return "linked; waiting for first snapshot";
  }
  let line = `${s.phase} | tick ${s.tick} | t=${s.t.toFixed(2)} s`;
  if (s.paused) {
    line += " | paused";
  }
  if (s.finished) {
    line += " | finished";
  }
  if (s.stop_count > 0) {
    line += ` | stops: ${s.stop_count}`;
  }
  return line;
}

function buildSkeleton(root: HTMLElement) {
  root.textContent = "";
  root.classList.add("console", "stale");

  const topbar = document.createElement("header");
  topbar.className = "topbar";
  const title = document.createElement("h1");
  title.textContent = "choreo console";
  const status = document.createElement("div");
  status.className = "status";
  status.dataset.role = "status";
  status.textContent = "connecting";
  topbar.append(title, status);

  const deck = document.createElement("section");
  deck.className = "deck";
  deck.dataset.role = "deck";

  const stage = document.createElement("section");
  stage.className = "stage";
  const arm = document.createElementNS(SVG_NS, "svg") as SVGSVGElement;
  arm.setAttribute("class", "arm");
  arm.dataset.role = "arm";
  const side = document.createElement("div");
  side.className = "side";
  const mode = document.createElement("div");
  mode.className = "mode-badge";
  mode.dataset.role = "mode";
  const meter = document.createElement("div");
  meter.className = "force-meter";
  meter.dataset.role = "meter";
  side.append(mode, meter);
  stage.append(arm, side);

  const controls = document.createElement("section");
  controls.className = "controls";
  controls.dataset.role = "controls";

  const toasts = document.createElement("ul");
  toasts.className = "toasts";
  toasts.dataset.role = "toasts";

  root.append(topbar, deck, stage, controls, toasts);
  return { status, deck, arm, mode, meter, controls, toasts };
}

/**
 * Wire the console into `root`: fetch the cue sheet once, open the
 * command socket, and re-render whenever a frame changes the view.
 * Everything on screen is a function of the card list plus the latest
 * snapshot, so a reload lands on the same picture the moment the first
 * snapshot arrives.
 */
export async function boot(root: HTMLElement, opts: BootOptions = {}): Promise<AppHandle> {
  const plane = opts.plane ?? "xz";
  const token = opts.token ?? new URLSearchParams(window.location.search).get("token") ?? "";
  const fetchImpl = opts.fetchImpl ?? ((url: string) => window.fetch(url));
  const socketFactory = opts.socketFactory ?? defaultSocketFactory;
  const schedule =
    opts.schedule ??
    ((cb: () => void) => {
      window.requestAnimationFrame(() => cb());
    });
  const reconnectDelayMs = opts.reconnectDelayMs ?? 2000;

  const parts = buildSkeleton(root);
  const vm = new ConsoleViewModel(opts.issuer ?? "console");

  let socket: SocketLike | null = null;
  buildControls(parts.controls, vm, (frame) => {
    socket?.send(JSON.stringify(frame));
  });

  const res = await fetchImpl("/cuesheet");
  if (!res.ok) {
    throw new Error(`cue sheet fetch failed with status ${res.status}`);
  }
  vm.cards = parseCardsDoc(await res.text()).cards;

  let dirty = false;
  let scheduled = false;
  function render(): void {
    renderCueDeck(parts.deck, vm.cards, vm.selectedIndex);
    renderArm(parts.arm, vm.snapshot, plane);
    renderModeBadge(parts.mode, vm.snapshot);
    renderForceMeter(parts.meter, vm.snapshot);
    renderControls(parts.controls, vm);
    renderToasts(parts.toasts, vm.toasts);
    parts.status.textContent = statusLine(vm);
  }
  function markDirty(): void {
    dirty = true;
    if (scheduled) {
      return;
    }
    scheduled = true;
    schedule(() => {
      scheduled = false;
      if (dirty) {
        dirty = false;
        render();
      }
    });
  }

  function connect(): void {
    const ws = socketFactory(wsUrl(token));
    socket = ws;
    ws.onopen = () => {
      vm.onOpen();
      root.classList.remove("stale");
      markDirty();
    };
    ws.onmessage = (ev) => {
      try {
        vm.onFrame(parseServerFrame(String(ev.data)));
      } catch (err) {
        if (!(err instanceof ProtocolError)) {
          throw err;
        }
        vm.onFrame({ kind: "error", reason: err.message });
      }
      markDirty();
    };
    ws.onclose = () => {
      if (socket !== ws) {
        return; // an old socket closing must not clobber its replacement
      }
      socket = null;
      vm.onClose();
      root.classList.add("stale");
      markDirty();
      setTimeout(connect, reconnectDelayMs);
    };
  }

  connect();
  markDirty();
  return { vm };
}

import { Snapshot } from "./protocol.js";

/** Orthographic projection plane for the stick figure. The venue view is
 * frontal, so xz (stage right on screen right, up is up) is the default. */
export type Plane = "xz" | "xy" | "yz";

export const FORCE_METER_MAX_N = 40;
export const FORCE_THRESHOLD_N = 20;

export const SVG_NS = "http://www.w3.org/2000/svg";

export function project(p: [number, number, number], plane: Plane): [number, number] {
  switch (plane) {
    case "xz":
      return [p[0], p[2]];
    case "xy":
      return [p[0], p[1]];
    case "yz":
      return [p[1], p[2]];
  }
}

/** Screen coordinates: svg y grows downward, so the v axis is flipped. */
function toPointsAttr(points: [number, number, number][], plane: Plane): string {
  return points
    .map((p) => {
      const [u, v] = project(p, plane);
      return `${u},${-v}`;
    })
    .join(" ");
}

export function renderArm(
  svg: SVGSVGElement,
  snapshot: Snapshot | null,
  plane: Plane = "xz",
): void {
  svg.setAttribute("viewBox", "-1.15 -1.15 2.3 2.3");
  svg.textContent = "";
  if (snapshot === null) {
    return;
  }
  const chain = document.createElementNS(SVG_NS, "polyline");
  chain.setAttribute("class", "arm-chain");
  chain.setAttribute("points", toPointsAttr(snapshot.points, plane));
  svg.append(chain);
  for (const [i, p] of snapshot.points.entries()) {
    const [u, v] = project(p, plane);
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("class", i === snapshot.points.length - 1 ? "arm-tool" : "arm-joint");
    dot.setAttribute("cx", String(u));
    dot.setAttribute("cy", String(-v));
    dot.setAttribute("r", i === snapshot.points.length - 1 ? "0.035" : "0.025");
    svg.append(dot);
  }
}

export function modeLabel(snapshot: Snapshot): string {
  const mode = snapshot.mode;
  return mode.damping === null ? mode.kind : `${mode.kind}(${mode.damping})`;
}

export function renderModeBadge(el: HTMLElement, snapshot: Snapshot | null): void {
  el.textContent = snapshot ? modeLabel(snapshot) : "";
  el.dataset.mode = snapshot ? snapshot.mode.kind : "";
}

/**
 * Force meter with the fixed tap-threshold line. The `over` class is the
 * contract: present exactly when the running average is strictly above
 * the 20 N threshold, the same comparison the trigger itself latches on.
 */
export function renderForceMeter(el: HTMLElement, snapshot: Snapshot | null): void {
  el.textContent = "";
  el.className = "force-meter";
  if (snapshot === null) {
    return;
  }
  const over = snapshot.force_avg > FORCE_THRESHOLD_N;
  if (over) {
    el.classList.add("over");
  }

  const fill = document.createElement("div");
  fill.className = "meter-fill";
  const pct = Math.min(snapshot.force_avg / FORCE_METER_MAX_N, 1) * 100;
  fill.style.height = `${pct}%`;

  const line = document.createElement("div");
  line.className = "meter-threshold";
  line.style.bottom = `${(FORCE_THRESHOLD_N / FORCE_METER_MAX_N) * 100}%`;

  const value = document.createElement("div");
  value.className = "meter-value";
  value.textContent = `${snapshot.force_avg.toFixed(1)} N`;

  const badge = document.createElement("div");
  badge.className = "trigger-badge" + (snapshot.triggered ? " lit" : "");
  badge.textContent = "TAP";

  el.append(fill, line, value, badge);
}

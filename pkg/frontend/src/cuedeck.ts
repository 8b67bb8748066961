import { CueCard } from "./protocol.js";

function refLabel(card: CueCard): string {
  if (card.kind === "teach") {
    return `${card.teach_duration_s ?? "?"} s hands-on`;
  }
  return card.ref ?? "";
}

/**
 * Rebuild the cue deck. Stateless by design: each call draws the whole
 * deck from the card list and the active index, so the highlight is
 * correct on the very frame a snapshot changes it.
 */
export function renderCueDeck(
  root: HTMLElement,
  cards: CueCard[],
  activeIndex: number | null,
): void {
  root.textContent = "";
  for (const card of cards) {
    const el = document.createElement("article");
    el.className = "cue-card" + (card.index === activeIndex ? " active" : "");
    el.dataset.index = String(card.index);

    const head = document.createElement("header");
    const num = document.createElement("span");
    num.className = "cue-num";
    num.textContent = String(card.index);
    const kind = document.createElement("span");
    kind.className = "cue-kind";
    kind.textContent = card.kind;
    head.append(num, kind);

    const ref = document.createElement("div");
    ref.className = "cue-ref";
    ref.textContent = refLabel(card);

    const track = document.createElement("div");
    track.className = "cue-track";
    track.textContent = card.music_track;

    const notes = document.createElement("div");
    notes.className = "cue-notes";
    notes.textContent = card.notes; // empty notes keep the blank region

    el.append(head, ref, track, notes);
    root.append(el);
  }
}

// Deterministic HTML rendering: the whole screen is a function of UiState.
// Three panels: the sentence being composed, the 5x8 keyboard, and run status.

import type { UiState } from "./state.js";

/** Column codes are 1..8 left-to-right; row codes are 9..13 top-to-bottom. */
export function codeCoversCell(code: number, row: number, col: number): boolean {
  return code <= 8 ? code === col + 1 : code === row + 9;
}

const SLOT_LABELS = new Set([
  "S0", "S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9",
]);

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

function slotIndex(label: string): number | null {
  return SLOT_LABELS.has(label) ? Number(label.slice(1)) : null;
}

/** What a cell shows: suggestion slots show their current word, if any. */
export function cellText(state: UiState, label: string): string {
  const idx = slotIndex(label);
  if (idx === null) return label;
  return state.slots[idx] || label;
}

function cellClasses(state: UiState, label: string, row: number, col: number): string {
  const classes = ["cell"];
  if (slotIndex(label) !== null) classes.push("slot");
  if (
    state.activeFlash !== null &&
    codeCoversCell(state.activeFlash.code, row, col)
  ) {
    classes.push("flash"); // yellow overlay while the code is lit
  }
  if (state.attended === label) classes.push("cue"); // green: attended key
  if (!state.flashing && state.lastKey === label) classes.push("hit");
  return classes.join(" ");
}

export function renderSentencePanel(state: UiState): string {
  const target =
    state.targetDisplay === null
      ? ""
      : `<div class="target">${escapeHtml(state.targetDisplay)}</div>`;
  const done = state.finished ? " done" : "";
  return (
    `<section id="sentence">${target}` +
    `<div class="composed${done}">${escapeHtml(state.composedDisplay)}</div>` +
    `</section>`
  );
}

export function renderKeyboardPanel(state: UiState): string {
  const rows = state.grid
    .map((row, r) => {
      const cells = row
        .map((label, c) => {
          const cls = cellClasses(state, label, r, c);
          const text = escapeHtml(cellText(state, label));
          return `<td class="${cls}" data-key="${escapeHtml(label)}">${text}</td>`;
        })
        .join("");
      return `<tr>${cells}</tr>`;
    })
    .join("");
  return `<section id="keyboard"><table><tbody>${rows}</tbody></table></section>`;
}

export function renderStatusPanel(state: UiState): string {
  const parts: string[] = [];
  if (state.connection === "closed") {
    parts.push(`<div class="banner">disconnected — input disabled</div>`);
  }
  if (state.lastError !== null) {
    parts.push(
      `<div class="error">${escapeHtml(state.lastError.code)}: ` +
        `${escapeHtml(state.lastError.message)}</div>`
    );
  }
  const phase = state.finished
    ? "finished"
    : state.paused
      ? "paused"
      : state.flashing
        ? "flashing"
        : "ready";
  parts.push(`<div class="phase">${phase}</div>`);
  parts.push(`<div class="trials">trials: ${state.trialCount}</div>`);
  if (state.lastKey !== null) {
    const verdict =
      state.lastCorrect === null ? "" : state.lastCorrect ? " (correct)" : " (wrong)";
    parts.push(`<div class="last">last: ${escapeHtml(state.lastKey)}${verdict}</div>`);
  }
  return `<section id="status">${parts.join("")}</section>`;
}

export function render(state: UiState): string {
  return (
    renderSentencePanel(state) + renderKeyboardPanel(state) + renderStatusPanel(state)
  );
}

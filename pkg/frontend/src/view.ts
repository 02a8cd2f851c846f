/** String-based HTML rendering for both player roles.
 *
 * Pure functions from client state to markup, so the view layer is testable
 * without a DOM. main.ts injects the result into the page and wires events.
 */

import type { GameClient } from "./client.js";
import type { KeyboardModel } from "./keyboard.js";
import type { MarkPad } from "./marks.js";
import type { BoardReplica, ClueView, WordPrompt } from "./protocol.js";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderBoard(board: BoardReplica, highlight?: string | null): string {
  const grid: string[][] = Array.from({ length: board.rows }, () =>
    Array.from({ length: board.cols }, () => ""),
  );
  for (const cell of board.cells) {
    grid[cell.row][cell.col] = cell.glyph;
  }
  const rows = grid
    .map((row) => {
      const cells = row
        .map((g) => {
          const cls = g && g === highlight ? "cell target" : "cell";
          return `<td class="${cls}">${escapeHtml(g)}</td>`;
        })
        .join("");
      return `<tr>${cells}</tr>`;
    })
    .join("");
  return `<table class="board">${rows}</table>`;
}

export function renderWordPrompt(prompt: WordPrompt): string {
  const hidden = new Set(prompt.hidden_positions);
  const letters = [...prompt.word]
    .map((g, i) => {
      const cls = hidden.has(i) ? "letter hidden" : "letter";
      const mark = g === prompt.current_target && hidden.has(i) ? " gaze-here" : "";
      return `<span class="${cls}${mark}">${escapeHtml(g)}</span>`;
    })
    .join("");
  const target = prompt.current_target
    ? `<p class="instruction">gaze at: <b>${escapeHtml(prompt.current_target)}</b></p>`
    : "";
  return `<div class="word-prompt">${letters}</div>${target}`;
}

export function renderClueView(clue: ClueView): string {
  const letters = clue.letters
    .map((g) =>
      g === null
        ? `<span class="letter blank">_</span>`
        : `<span class="letter">${escapeHtml(g)}</span>`,
    )
    .join("");
  const hint = clue.clue_glyph
    ? `<p class="clue">first letter: <b>${escapeHtml(clue.clue_glyph)}</b></p>`
    : "";
  return `<div class="clue-view">${letters}</div>${hint}`;
}

export function renderNotice(notice: string | null): string {
  return notice ? `<p class="notice">${escapeHtml(notice)}</p>` : "";
}

export function renderKeyboard(kb: KeyboardModel): string {
  const rows = kb
    .rows()
    .map((row) => {
      const keys = row
        .map((g) => `<button class="key" data-glyph="${escapeHtml(g)}">${escapeHtml(g)}</button>`)
        .join("");
      return `<div class="kb-row">${keys}</div>`;
    })
    .join("");
  return (
    `<div class="keyboard">${rows}` +
    `<div class="kb-row"><button class="key" data-action="backspace">back</button>` +
    `<button class="key" data-action="submit">answer</button></div>` +
    `<p class="kb-buffer">${escapeHtml(kb.value)}</p></div>`
  );
}

export function renderMarkPad(pad: MarkPad): string {
  const dots = pad.marks
    .map(([x, y]) => `<span class="dot" data-x="${x.toFixed(1)}" data-y="${y.toFixed(1)}"></span>`)
    .join("");
  return `<div class="mark-pad">${dots}</div>`;
}

export function renderCapturePreview(client: GameClient): string {
  const img = client.capturedImage;
  if (!img || img.no_face || !img.image_ref) {
    return "";
  }
  const overlay = img.gaze_overlay
    ? `<span class="gaze-arrow" data-x="${img.gaze_overlay[0].toFixed(3)}"` +
      ` data-y="${img.gaze_overlay[1].toFixed(3)}"></span>`
    : "";
  const src = `/sessions/${encodeURIComponent(client.sessionId)}/images/` +
    encodeURIComponent(img.image_ref.replace(/^images\//, ""));
  return (
    `<div class="preview"><img src="${src}" alt="captured face">${overlay}` +
    `<button data-action="approve">approve</button>` +
    `<button data-action="reject">retake</button></div>`
  );
}

const PHASE_HINTS: Record<string, string> = {
  briefing: "read the rules, then press ready",
  answerer_review: "answerer: review the visible letters, then press ready",
  await_capture_trigger: "questioner: press capture when ready to gaze",
  countdown: "hold your gaze on the target letter",
  await_approval: "questioner: approve or retake the capture",
  answerer_marking: "answerer: mark where the questioner looked, then ready",
  answering: "answerer: type the word",
  reveal: "word revealed, press next to continue",
  finished: "game over",
};

export function renderApp(
  client: GameClient,
  keyboard: KeyboardModel,
  pad: MarkPad,
): string {
  const parts: string[] = [];
  parts.push(renderNotice(client.notice));
  const snap = client.snapshot;
  if (!snap) {
    parts.push(`<p class="phase">waiting to join</p>`);
    return parts.join("\n");
  }
  parts.push(
    `<p class="phase">phase: ${escapeHtml(snap.phase)} | role: ${escapeHtml(snap.role)}` +
      ` | score: ${snap.score}</p>`,
  );
  const hint = PHASE_HINTS[snap.phase];
  if (hint) {
    parts.push(`<p class="hint">${escapeHtml(hint)}</p>`);
  }
  if (client.countdown !== null) {
    parts.push(`<p class="countdown">${client.countdown.toFixed(1)}s</p>`);
  }
  if (client.wordPrompt) {
    parts.push(renderWordPrompt(client.wordPrompt));
  }
  if (snap.role === "answerer" && client.clueView) {
    parts.push(renderClueView(client.clueView));
  }
  if (snap.role === "questioner") {
    parts.push(renderCapturePreview(client));
  }
  if (snap.role === "answerer" && snap.phase === "answerer_marking") {
    parts.push(renderMarkPad(pad));
  }
  if (snap.role === "answerer" && snap.phase === "answering") {
    parts.push(renderKeyboard(keyboard));
  }
  if (client.lastResult) {
    const r = client.lastResult;
    parts.push(
      `<p class="result">${r.correct ? "correct!" : "wrong"} the word was ` +
        `<b>${escapeHtml(r.word)}</b> (score ${r.score})</p>`,
    );
  }
  if (client.board) {
    const target =
      snap.role === "questioner" && client.wordPrompt
        ? client.wordPrompt.current_target
        : null;
    parts.push(renderBoard(client.board, target));
  }
  if (client.finished) {
    parts.push(
      `<p class="finished">${client.abandoned ? "session abandoned" : "finished"}` +
        `${client.finalScore !== null ? `, final score ${client.finalScore}` : ""}</p>`,
    );
  }
  return parts.join("\n");
}

/** Browser entry point: connects the GameClient to a live server over a
 * WebSocket and re-renders the page on every state change. */

import { GameClient } from "./client.js";
import { KeyboardModel } from "./keyboard.js";
import { MarkPad } from "./marks.js";
import { renderApp } from "./view.js";

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

const sessionId = param("session", "s1");
const playerId = param("player", `player-${Math.floor(Math.random() * 1e6)}`);
const wsUrl = `${window.location.protocol === "https:" ? "wss" : "ws"}://${
  window.location.host
}/ws`;

const socket = new WebSocket(wsUrl);
const client = new GameClient(sessionId, socket);
const pad = new MarkPad();
let keyboard = new KeyboardModel();

const root = document.getElementById("app")!;

function render(): void {
  root.innerHTML = renderApp(client, keyboard, pad);
}

let boardKeyboard = false;
client.onUpdate = () => {
  if (client.board && !boardKeyboard) {
    keyboard = new KeyboardModel(client.board);
    boardKeyboard = true;
  }
  render();
};

socket.addEventListener("open", () => {
  client.join(playerId);
  client.start();
});
socket.addEventListener("message", (ev) => client.handleRaw(String(ev.data)));
socket.addEventListener("close", () => {
  client.notice = "connection lost";
  render();
});

root.addEventListener("click", (ev) => {
  const el = ev.target as HTMLElement;
  const action = el.dataset.action;
  const glyph = el.dataset.glyph;
  if (glyph) {
    keyboard.press(glyph);
    render();
    return;
  }
  switch (action) {
    case "backspace":
      keyboard.backspace();
      render();
      break;
    case "submit":
      client.answer(keyboard.value);
      keyboard.clear();
      break;
    case "approve":
      client.approveCapture();
      break;
    case "reject":
      client.rejectCapture();
      break;
    default:
      break;
  }
});

// pad clicks: translate pixels to board mm
root.addEventListener("mousedown", (ev) => {
  const el = ev.target as HTMLElement;
  if (!el.classList.contains("mark-pad")) {
    return;
  }
  const rect = el.getBoundingClientRect();
  const [x, y] = MarkPad.toBoardMm(
    ev.clientX - rect.left,
    ev.clientY - rect.top,
    rect.width,
    rect.height,
    600,
    300,
  );
  pad.add(x, y);
  client.mark([x, y]);
  render();
});

// role-appropriate primary action on the space key
document.addEventListener("keydown", (ev) => {
  if (ev.key !== " ") {
    return;
  }
  const phase = client.phase;
  const role = client.role;
  if (phase === "briefing" || (phase === "answerer_review" && role === "answerer")) {
    client.ready();
  } else if (phase === "await_capture_trigger" && role === "questioner") {
    client.triggerCapture();
  } else if (phase === "answerer_marking" && role === "answerer") {
    client.ready();
  } else if (phase === "reveal" && role === "answerer") {
    client.proceed();
  }
});

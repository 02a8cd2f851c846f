/** Transport-agnostic game client.
 *
 * Owns the player's view of the session: role, latest role-filtered
 * snapshot, clue view, notices, and the captured-image preview. The class
 * never stores anything the server did not send to this client, so the
 * answerer's state cannot contain hidden letters before the reveal.
 */

import type {
  BoardReplica,
  CapturedImagePayload,
  ClientKind,
  ClientMessage,
  ClueView,
  JoinedPayload,
  Role,
  ServerMessage,
  Snapshot,
  WordPrompt,
} from "./protocol.js";

export interface Transport {
  send(data: string): void;
}

export interface GameResult {
  correct: boolean;
  word: string;
  score: number;
}

export class GameClient {
  readonly sessionId: string;
  token: string | null = null;
  playerId: string | null = null;
  board: BoardReplica | null = null;
  snapshot: Snapshot | null = null;
  lastSeq = 0;
  /** Countdown seconds, while a capture countdown is running. */
  countdown: number | null = null;
  /** Latest capture preview sent to this client (questioner only). */
  capturedImage: CapturedImagePayload | null = null;
  /** Human-readable one-line notice (no-face, errors, waits). */
  notice: string | null = null;
  lastResult: GameResult | null = null;
  revealedClue: string | null = null;
  finished = false;
  abandoned = false;
  finalScore: number | null = null;
  /** Set after every applied message; hook for renderers. */
  onUpdate: (() => void) | null = null;

  private transport: Transport;

  constructor(sessionId: string, transport: Transport) {
    this.sessionId = sessionId;
    this.transport = transport;
  }

  get role(): Role | null {
    return this.snapshot ? this.snapshot.role : null;
  }

  get phase(): string | null {
    return this.snapshot ? this.snapshot.phase : null;
  }

  /** Word prompt, present only for the questioner or after the reveal. */
  get wordPrompt(): WordPrompt | null {
    return this.snapshot?.word_prompt ?? null;
  }

  /** Clue view: visible letters with nulls for the still-hidden ones. */
  get clueView(): ClueView | null {
    return this.snapshot?.clue_view ?? null;
  }

  // -- incoming ---------------------------------------------------------

  handleRaw(text: string): ServerMessage {
    const msg = JSON.parse(text) as ServerMessage;
    this.apply(msg);
    return msg;
  }

  apply(msg: ServerMessage): void {
    if (msg.seq > 0 && msg.seq <= this.lastSeq) {
      return; // stale duplicate
    }
    if (msg.seq > 0) {
      this.lastSeq = msg.seq;
    }
    switch (msg.kind) {
      case "joined": {
        const p = msg.payload as unknown as JoinedPayload;
        this.token = p.token;
        this.playerId = p.player_id;
        this.board = p.board;
        if (!p.rejoined && p.players_joined !== p.players_needed) {
          this.notice = "waiting for the other player";
        } else {
          this.notice = null;
        }
        break;
      }
      case "state_snapshot": {
        this.snapshot = msg.payload as unknown as Snapshot;
        if (this.snapshot.phase !== "countdown") {
          this.countdown = null;
        }
        if (this.snapshot.phase === "reveal") {
          this.capturedImage = null;
        }
        break;
      }
      case "countdown":
        this.countdown = Number(msg.payload.seconds);
        this.notice = null;
        break;
      case "captured_image": {
        const p = msg.payload as unknown as CapturedImagePayload;
        this.capturedImage = p;
        this.notice = p.no_face
          ? "no face detected, please face the camera and retake"
          : null;
        break;
      }
      case "clue_revealed":
        this.revealedClue = String(msg.payload.glyph);
        this.notice = `clue: the word starts with ${this.revealedClue}`;
        break;
      case "result": {
        const p = msg.payload;
        this.lastResult = {
          correct: Boolean(p.correct),
          word: String(p.word),
          score: Number(p.score),
        };
        break;
      }
      case "roles_switched":
        this.revealedClue = null;
        this.lastResult = null;
        this.notice = `roles switched, new questioner: ${msg.payload.questioner}`;
        break;
      case "session_finished":
        this.finished = true;
        this.abandoned = Boolean(msg.payload.abandoned);
        this.finalScore =
          msg.payload.score === undefined ? null : Number(msg.payload.score);
        break;
      case "error":
        this.notice = `error: ${msg.payload.message}`;
        break;
      default:
        break; // forward compatible: ignore unknown kinds
    }
    if (this.onUpdate) {
      this.onUpdate();
    }
  }

  // -- outgoing ---------------------------------------------------------

  private send(kind: ClientKind, payload?: Record<string, unknown>): void {
    const msg: ClientMessage = {
      kind,
      session_id: this.sessionId,
      token: this.token,
      payload: payload ?? {},
    };
    this.transport.send(JSON.stringify(msg));
  }

  join(playerId: string, wearingEyetracker = false): void {
    this.send("join", {
      player_id: playerId,
      wearing_eyetracker: wearingEyetracker,
      token: this.token, // set on rejoin
    });
  }

  start(): void {
    this.send("start");
  }

  ready(): void {
    this.send("ready");
  }

  triggerCapture(): void {
    this.send("trigger_capture");
  }

  approveCapture(): void {
    this.send("approve_capture");
  }

  rejectCapture(): void {
    this.send("reject_capture");
  }

  mark(positionMm: [number, number]): void {
    this.send("mark", { position_mm: positionMm });
  }

  answer(text: string): void {
    this.send("answer", { text });
  }

  proceed(): void {
    this.send("proceed");
  }
}

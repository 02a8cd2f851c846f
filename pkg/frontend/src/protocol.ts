/** Wire protocol types for the gazeboard WebSocket channel.
 *
 * Clients send ClientMessage JSON; the server replies with per-client,
 * sequence-numbered ServerMessage JSON. Snapshots are role-filtered by the
 * server: the answerer receives a clue view with nulls in place of hidden
 * letters until the reveal phase.
 */

export const PROTOCOL_VERSION = 1;

export type ClientKind =
  | "join"
  | "start"
  | "ready"
  | "trigger_capture"
  | "approve_capture"
  | "reject_capture"
  | "mark"
  | "answer"
  | "proceed";

export interface ClientMessage {
  kind: ClientKind;
  session_id: string;
  token: string | null;
  t?: number | null;
  payload?: Record<string, unknown>;
}

export interface BoardCell {
  id: string;
  glyph: string;
  row: number;
  col: number;
  position_mm: [number, number, number];
}

export interface BoardReplica {
  rows: number;
  cols: number;
  pitch_mm: number;
  glyph_set_id: string;
  cells: BoardCell[];
}

export interface WordPrompt {
  word: string;
  hidden_positions: number[];
  current_target: string | null;
}

export interface ClueView {
  length: number;
  letters: (string | null)[];
  clue_glyph: string | null;
}

export type Role = "questioner" | "answerer" | "participant";

export interface Snapshot {
  phase: string;
  mode: string;
  word_index: number;
  letter_index: number;
  score: number;
  role: Role;
  questioner: string;
  stimuli_done: number;
  word_prompt?: WordPrompt;
  clue_view?: ClueView;
}

export interface JoinedPayload {
  token: string;
  player_id: string;
  rejoined: boolean;
  players_joined?: number;
  players_needed?: number;
  board: BoardReplica;
}

export interface CapturedImagePayload {
  no_face: boolean;
  image_ref: string | null;
  sample_id: string | null;
  gaze_overlay: [number, number] | null;
}

export interface ServerMessage {
  v: number;
  kind: string;
  seq: number;
  payload: Record<string, unknown>;
}

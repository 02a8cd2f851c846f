"""Network-facing game service.

The deterministic core (GameServer) is plain synchronous code: it owns the
lobbies, routes client messages into the engine, runs captures for the
engine's capture effects, persists approved samples, and produces
role-filtered outgoing messages. The WebSocket layer (make_app) is a thin
asyncio wrapper that serializes all core access per session, so replaying a
recorded client-message trace against a fresh core with the same seed
reproduces the event log byte for byte.

Role filtering is load-bearing: the quiz only works if the answerer never
sees a hidden glyph before the Reveal phase, so answerer-bound snapshots
carry a clue view (visible letters + blanks) instead of the word prompt.
"""

from __future__ import annotations

import asyncio
import json
import logging
import secrets
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse

from . import engine as eng
from .capture import CapturePipeline, CaptureOutcome
from .dictionary import DictionaryEntry
from .errors import GazeboardError, ProtocolViolation
from .geometry import BoardLayout
from .store import SessionStore

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
CLIENT_KINDS = {"join", "start", "ready", "trigger_capture", "approve_capture",
                "reject_capture", "mark", "answer", "proceed"}
DEFAULT_GRACE_S = 120.0


@dataclass(frozen=True)
class ClientMessage:
    kind: str
    session_id: str
    token: str | None = None
    t: float | None = None
    payload: dict = field(default_factory=dict)

    @staticmethod
    def from_dict(d: dict) -> "ClientMessage":
        return ClientMessage(kind=str(d.get("kind")),
                             session_id=str(d.get("session_id", "")),
                             token=d.get("token"),
                             t=d.get("t"),
                             payload=d.get("payload", {}) or {})


@dataclass
class ServerMessage:
    kind: str
    payload: dict = field(default_factory=dict)
    seq: int = 0

    def to_dict(self) -> dict:
        return {"v": PROTOCOL_VERSION, "kind": self.kind, "seq": self.seq,
                "payload": self.payload}


@dataclass
class _Client:
    token: str
    session_id: str
    player_id: str
    wearing_eyetracker: bool = False
    connected: bool = True
    disconnected_at: float | None = None
    started: bool = False
    seq: int = 0


@dataclass
class _SessionSlot:
    session_id: str
    mode: str
    rng_seed: int
    max_players: int
    clients: list = field(default_factory=list)  # tokens in join order
    session: eng.GameSession | None = None
    events_persisted: int = 0
    abandoned: bool = False
    capture_cache: dict = field(default_factory=dict)  # sample_id -> CaptureOutcome


def _board_replica(board: BoardLayout) -> dict:
    return {
        "rows": board.rows,
        "cols": board.cols,
        "pitch_mm": board.pitch_mm,
        "glyph_set_id": board.glyph_set_id,
        "cells": [{"id": c.id, "glyph": c.glyph, "row": c.row, "col": c.col,
                   "position_mm": list(c.position_mm)} for c in board.cells],
    }


class GameServer:
    """Deterministic message-routing core; all calls for one session must be
    serialized by the caller (the WebSocket layer uses one lock per session)."""

    def __init__(self, config: eng.GameConfig, board: BoardLayout,
                 dictionary_entries: list[DictionaryEntry],
                 pipeline_factory, store: SessionStore | None = None,
                 grace_period_s: float = DEFAULT_GRACE_S,
                 token_factory=None):
        self.config = config
        self.board = board
        self.dictionary_entries = dictionary_entries
        self.pipeline_factory = pipeline_factory  # (session_id, participant_id) -> CapturePipeline
        self.store = store
        self.grace_period_s = grace_period_s
        self._token_factory = token_factory or (lambda: secrets.token_hex(8))
        self._slots: dict[str, _SessionSlot] = {}
        self._clients: dict[str, _Client] = {}
        self._pipelines: dict[str, CapturePipeline] = {}

    # -- session lifecycle -----------------------------------------------------

    def create_session(self, session_id: str, mode: str = "gamified",
                       rng_seed: int = 0) -> _SessionSlot:
        if session_id in self._slots:
            raise GazeboardError(f"session {session_id!r} already exists")
        slot = _SessionSlot(session_id=session_id, mode=mode, rng_seed=rng_seed,
                            max_players=2 if mode == "gamified" else 1)
        self._slots[session_id] = slot
        return slot

    def slot(self, session_id: str) -> _SessionSlot:
        if session_id not in self._slots:
            raise GazeboardError(f"no such session: {session_id!r}")
        return self._slots[session_id]

    # -- message entry point -----------------------------------------------------

    def handle_message(self, msg: ClientMessage) -> list[tuple[str, ServerMessage]]:
        """Returns (recipient token, message) pairs; errors become error
        replies to the sender instead of exceptions."""
        try:
            if msg.kind not in CLIENT_KINDS:
                raise ProtocolViolation(msg.token or "?", "-", msg.kind)
            if msg.kind == "join":
                return self._handle_join(msg)
            client = self._clients.get(msg.token or "")
            if client is None or client.session_id != msg.session_id:
                raise GazeboardError("unknown or mismatched actor token")
            slot = self.slot(msg.session_id)
            if slot.abandoned:
                raise GazeboardError("session was abandoned")
            if msg.kind == "start":
                return self._handle_start(slot, client, msg)
            if slot.session is None:
                raise GazeboardError("session has not started")
            t = self._msg_time(slot, msg)
            inp = eng.EngineInput(kind=msg.kind, actor=client.player_id, t=t,
                                  payload=msg.payload)
            effects = eng.handle_event(slot.session, inp)
            out = self._process_effects(slot, effects, t)
            out.extend(self._snapshots(slot))
            self._persist_new_events(slot)
            return self._stamp(out)
        except GazeboardError as e:
            if msg.token:
                return self._stamp([(msg.token, ServerMessage(
                    kind="error", payload={"message": str(e)}))])
            return []

    def _msg_time(self, slot: _SessionSlot, msg: ClientMessage) -> float:
        t = msg.t if msg.t is not None else time.monotonic()
        if slot.session is not None:
            t = max(t, slot.session._last_t)
        return t

    # -- join / start ------------------------------------------------------------

    def _handle_join(self, msg: ClientMessage) -> list[tuple[str, ServerMessage]]:
        slot = self.slot(msg.session_id)
        rejoin_token = msg.payload.get("token") or msg.token
        if rejoin_token and rejoin_token in self._clients:
            client = self._clients[rejoin_token]
            client.connected = True
            client.disconnected_at = None
            out = [(client.token, ServerMessage(kind="joined", payload={
                "token": client.token, "player_id": client.player_id,
                "rejoined": True, "board": _board_replica(self.board)}))]
            out.extend(self._snapshots(slot))
            return self._stamp(out)
        if len(slot.clients) >= slot.max_players:
            raise GazeboardError("session is full")
        player_id = str(msg.payload.get("player_id")
                        or f"player{len(slot.clients) + 1}")
        if any(self._clients[tok].player_id == player_id for tok in slot.clients):
            raise GazeboardError(f"player id {player_id!r} already joined")
        token = self._token_factory()
        client = _Client(token=token, session_id=slot.session_id,
                         player_id=player_id,
                         wearing_eyetracker=bool(msg.payload.get("wearing_eyetracker")))
        self._clients[token] = client
        slot.clients.append(token)
        if self.store is not None:
            self.store.register_participant(
                player_id,
                wearing_eyetracker=client.wearing_eyetracker,
                exclude_from_dataset=bool(msg.payload.get("exclude_from_dataset")))
        return self._stamp([(token, ServerMessage(kind="joined", payload={
            "token": token, "player_id": player_id, "rejoined": False,
            "players_joined": len(slot.clients),
            "players_needed": slot.max_players,
            "board": _board_replica(self.board)}))])

    def _handle_start(self, slot: _SessionSlot, client: _Client,
                      msg: ClientMessage) -> list[tuple[str, ServerMessage]]:
        client.started = True
        if len(slot.clients) < slot.max_players:
            return self._stamp([(client.token, ServerMessage(
                kind="state_snapshot",
                payload={"phase": "idle", "waiting_for": "players"}))])
        if not all(self._clients[tok].started for tok in slot.clients):
            return self._stamp([(client.token, ServerMessage(
                kind="state_snapshot",
                payload={"phase": "idle", "waiting_for": "start"}))])
        if slot.session is None:
            players = [self._clients[tok].player_id for tok in slot.clients]
            t = msg.t if msg.t is not None else time.monotonic()
            slot.session = eng.start_session(
                self.config, players, slot.mode, slot.rng_seed,
                dictionary_entries=self.dictionary_entries, board=self.board,
                session_id=slot.session_id, start_t=t)
            if self.store is not None:
                self.store.open_session(slot.session_id)
            self._persist_new_events(slot)
        return self._stamp(self._snapshots(slot))

    # -- clock ---------------------------------------------------------------------

    def advance_time(self, session_id: str, t: float) -> list[tuple[str, ServerMessage]]:
        """Drive countdowns, answer timers, and the disconnect grace period."""
        slot = self.slot(session_id)
        if slot.session is None or slot.abandoned:
            return []
        out = self._check_abandonment(slot, t)
        if slot.abandoned:
            return self._stamp(out)
        before = len(slot.session.event_log)
        try:
            effects = eng.handle_event(slot.session, eng.EngineInput(
                kind="tick", actor="system", t=max(t, slot.session._last_t)))
        except ProtocolViolation:
            return self._stamp(out)
        out.extend(self._process_effects(slot, effects, t))
        if len(slot.session.event_log) != before or effects:
            out.extend(self._snapshots(slot))
        self._persist_new_events(slot)
        return self._stamp(out)

    def handle_disconnect(self, token: str, t: float):
        client = self._clients.get(token)
        if client is None:
            return
        client.connected = False
        client.disconnected_at = t

    def _check_abandonment(self, slot: _SessionSlot, t: float) -> list:
        for tok in slot.clients:
            c = self._clients[tok]
            if not c.connected and c.disconnected_at is not None \
                    and t - c.disconnected_at > self.grace_period_s:
                slot.abandoned = True
                if self.store is not None:
                    self.store.mark_abandoned(slot.session_id)
                return [(other, ServerMessage(kind="session_finished",
                                              payload={"abandoned": True}))
                        for other in slot.clients if other != tok]
        return []

    # -- effects -----------------------------------------------------------------

    def _pipeline(self, slot: _SessionSlot) -> CapturePipeline:
        if slot.session_id not in self._pipelines:
            self._pipelines[slot.session_id] = self.pipeline_factory(
                slot.session_id, slot.session.questioner)
        return self._pipelines[slot.session_id]

    def _process_effects(self, slot: _SessionSlot, effects: list, t: float) -> list:
        out = []
        session = slot.session
        for eff in effects:
            if isinstance(eff, eng.StartCountdown):
                out.extend(self._to_all(slot, "countdown",
                                        {"seconds": eff.seconds}))
            elif isinstance(eff, eng.RequestCapture):
                out.extend(self._run_capture(slot, eff, t))
            elif isinstance(eff, eng.PresentImage):
                out.extend(self._present_image(slot, eff))
            elif isinstance(eff, eng.PersistSample):
                self._persist_sample(slot, eff.capture)
            elif isinstance(eff, eng.RevealClue):
                out.extend(self._to_all(slot, "clue_revealed", {"glyph": eff.glyph}))
            elif isinstance(eff, eng.ShowResult):
                out.extend(self._to_all(slot, "result", {
                    "correct": eff.correct, "word": eff.word, "score": eff.score}))
            elif isinstance(eff, eng.SwitchRoles):
                out.extend(self._to_all(slot, "roles_switched",
                                        {"questioner": eff.questioner}))
            elif isinstance(eff, eng.EndSession):
                out.extend(self._to_all(slot, "session_finished",
                                        {"score": eff.score, "abandoned": False}))
            elif isinstance(eff, eng.RecordMark):
                pass  # already in the event log; answerer-local UI state
        return out

    def _run_capture(self, slot: _SessionSlot, eff: eng.RequestCapture, t: float) -> list:
        session = slot.session
        pipeline = self._pipeline(slot)
        questioner_tok = self._token_for(slot, session.questioner)
        wearing = self._clients[questioner_tok].wearing_eyetracker \
            if questioner_tok else False
        outcome: CaptureOutcome = pipeline.capture(
            session_id=slot.session_id,
            participant_id=session.questioner,
            mode=session.mode,
            letter_id=eff.letter_id,
            stimulus_xy_mm=eff.stimulus_xy_mm,
            wearing_eyetracker=wearing)
        if outcome.no_face:
            payload = {"no_face": True}
        else:
            slot.capture_cache[outcome.sample.sample_id] = outcome
            payload = {"no_face": False,
                       "sample_id": outcome.sample.sample_id,
                       "letter_id": outcome.sample.letter_id,
                       "stimulus_xy_mm": list(outcome.sample.stimulus_xy_mm)
                       if outcome.sample.stimulus_xy_mm else None,
                       "image_ref": outcome.sample.image_ref,
                       "estimator_output": list(outcome.sample.estimator_output)
                       if outcome.sample.estimator_output else None}
        effects = eng.handle_event(session, eng.EngineInput(
            kind="capture_completed", actor="system",
            t=max(t, session._countdown_end_t or t), payload=payload))
        return self._process_effects(slot, effects, t)

    def _present_image(self, slot: _SessionSlot, eff: eng.PresentImage) -> list:
        session = slot.session
        capture = dict(eff.capture)
        overlay = None
        est = capture.get("estimator_output")
        if est:
            # 2D arrow endpoint in normalized image coordinates; clients
            # need no geometry code
            overlay = [0.5 + 0.4 * est[0], 0.5 + 0.4 * est[1]]
        payload = {"no_face": eff.no_face,
                   "image_ref": capture.get("image_ref"),
                   "sample_id": capture.get("sample_id"),
                   "gaze_overlay": overlay}
        if eff.to == "both":
            return self._to_all(slot, "captured_image", payload)
        target = session.questioner if eff.to == "questioner" else session.answerer
        tok = self._token_for(slot, target)
        return [(tok, ServerMessage(kind="captured_image", payload=payload))] if tok else []

    def _persist_sample(self, slot: _SessionSlot, capture: dict):
        if self.store is None:
            return
        outcome = slot.capture_cache.pop(capture.get("sample_id"), None)
        if outcome is None or outcome.sample is None:
            logger.warning("approved capture %s not in cache; sample unsaved",
                           capture.get("sample_id"))
            return
        try:
            self.store.append_sample(outcome.sample, image=outcome.image,
                                     normalized_image=outcome.normalized_image)
        except GazeboardError as e:
            logger.warning("sample %s unsaved: %s", outcome.sample.sample_id, e)

    def _persist_new_events(self, slot: _SessionSlot):
        if self.store is None or slot.session is None:
            return
        log = slot.session.event_log
        for ev in log[slot.events_persisted:]:
            self.store.append_event(slot.session_id, ev)
        slot.events_persisted = len(log)

    # -- outgoing ---------------------------------------------------------------

    def _token_for(self, slot: _SessionSlot, player_id: str) -> str | None:
        for tok in slot.clients:
            if self._clients[tok].player_id == player_id:
                return tok
        return None

    def _to_all(self, slot: _SessionSlot, kind: str, payload: dict) -> list:
        return [(tok, ServerMessage(kind=kind, payload=dict(payload)))
                for tok in slot.clients]

    def _snapshots(self, slot: _SessionSlot) -> list[tuple[str, ServerMessage]]:
        """Role-filtered state snapshots for every client in the session."""
        session = slot.session
        if session is None:
            return []
        out = []
        for tok in slot.clients:
            client = self._clients[tok]
            role = "questioner" if client.player_id == session.questioner else "answerer"
            if session.mode == "standard":
                role = "participant"
            payload = {
                "phase": session.phase.value,
                "mode": session.mode,
                "word_index": session.word_index,
                "letter_index": session.letter_index,
                "score": session.score,
                "role": role,
                "questioner": session.questioner,
                "stimuli_done": session.stimuli_done,
            }
            q = session.question
            revealed = session.phase in (eng.Phase.REVEAL, eng.Phase.FINISHED)
            if q is not None and session.mode == "gamified":
                if role == "questioner" or revealed:
                    payload["word_prompt"] = {
                        "word": q.entry.word,
                        "hidden_positions": list(q.hidden_positions),
                        "current_target": (q.entry.glyphs[q.hidden_positions[session.letter_index]]
                                           if not revealed
                                           and session.letter_index < len(q.hidden_positions)
                                           else None),
                    }
                if role == "answerer" and not revealed:
                    payload["clue_view"] = {
                        "length": q.entry.length,
                        "letters": [None if h else g
                                    for g, h in zip(q.entry.glyphs, q.hidden_mask)],
                        "clue_glyph": (q.entry.glyphs[q.first_letter_clue_index]
                                       if session._clue_revealed else None),
                    }
                if revealed:
                    payload["clue_view"] = {
                        "length": q.entry.length,
                        "letters": list(q.entry.glyphs),
                        "clue_glyph": q.entry.glyphs[q.first_letter_clue_index],
                    }
            out.append((tok, ServerMessage(kind="state_snapshot", payload=payload)))
        return out

    def _stamp(self, out: list[tuple[str, ServerMessage]]) -> list:
        for tok, msg in out:
            client = self._clients.get(tok)
            if client is None:
                continue
            client.seq += 1
            msg.seq = client.seq
        return out

    # -- trace replay --------------------------------------------------------------

    def run_trace(self, trace: list[dict]) -> dict:
        """Process a recorded trace: entries are either client messages or
        {"tick": {"session_id":..., "t":...}}. Returns token aliases and the
        final event logs, for wire-determinism checks."""
        sent: list[dict] = []
        aliases: dict[str, str] = {}  # trace alias -> real token
        for entry in trace:
            if "tick" in entry:
                tick = entry["tick"]
                self.advance_time(tick["session_id"], tick["t"])
                continue
            d = dict(entry)
            alias = d.get("token")
            if alias in aliases:
                d["token"] = aliases[alias]
            replies = self.handle_message(ClientMessage.from_dict(d))
            for tok, msg in replies:
                if msg.kind == "joined" and alias and alias not in aliases:
                    aliases[alias] = msg.payload["token"]
                sent.append({"to": tok, "msg": msg.to_dict()})
        logs = {sid: [ev.to_json() for ev in (slot.session.event_log
                                              if slot.session else [])]
                for sid, slot in self._slots.items()}
        return {"aliases": aliases, "event_logs": logs, "sent": sent}


# -- WebSocket layer ------------------------------------------------------------

def make_app(server: GameServer, tick_interval_s: float = 0.25):
    """FastAPI app exposing the core over a WebSocket message channel."""
    app = FastAPI(title="gazeboard")
    locks: dict[str, asyncio.Lock] = {}
    sockets: dict[str, WebSocket] = {}  # token -> socket

    def lock_for(session_id: str) -> asyncio.Lock:
        return locks.setdefault(session_id, asyncio.Lock())

    async def deliver(replies):
        for tok, msg in replies:
            ws = sockets.get(tok)
            if ws is None:
                continue
            try:
                await ws.send_text(json.dumps(msg.to_dict(), ensure_ascii=False))
            except Exception:
                sockets.pop(tok, None)

    @app.get("/health")
    async def health():
        return {"ok": True}

    @app.post("/sessions")
    async def create_session(body: dict):
        session_id = body.get("session_id") or f"s{len(server._slots) + 1}"
        mode = body.get("mode", "gamified")
        seed = int(body.get("rng_seed", 0))
        server.create_session(session_id, mode=mode, rng_seed=seed)
        return {"session_id": session_id, "mode": mode}

    @app.get("/sessions/{session_id}/images/{name}")
    async def image(session_id: str, name: str):
        if server.store is None:
            return JSONResponse({"error": "no store"}, status_code=404)
        path = server.store.session_dir(session_id) / "images" / name
        if not path.exists():
            return JSONResponse({"error": "not found"}, status_code=404)
        return FileResponse(path)

    async def ticker(session_id: str):
        while True:
            await asyncio.sleep(tick_interval_s)
            async with lock_for(session_id):
                try:
                    replies = server.advance_time(session_id, time.monotonic())
                except GazeboardError:
                    return
                slot = server._slots.get(session_id)
                await deliver(replies)
                if slot is None or slot.abandoned or (
                        slot.session and slot.session.phase == eng.Phase.FINISHED):
                    return

    tickers: dict[str, asyncio.Task] = {}

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        my_token: str | None = None
        my_session: str | None = None
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    d = json.loads(raw)
                except json.JSONDecodeError:
                    await websocket.send_text(json.dumps(ServerMessage(
                        kind="error", payload={"message": "malformed JSON"}).to_dict()))
                    continue
                msg = ClientMessage.from_dict(d)
                if msg.t is None:
                    msg = ClientMessage(kind=msg.kind, session_id=msg.session_id,
                                        token=msg.token, t=time.monotonic(),
                                        payload=msg.payload)
                async with lock_for(msg.session_id):
                    replies = server.handle_message(msg)
                    for tok, reply in replies:
                        if reply.kind == "joined" and tok not in sockets:
                            my_token = tok
                            my_session = msg.session_id
                            sockets[tok] = websocket
                    await deliver(replies)
                    if my_session and my_session not in tickers:
                        slot = server._slots.get(my_session)
                        if slot and slot.session is not None:
                            tickers[my_session] = asyncio.create_task(ticker(my_session))
        except WebSocketDisconnect:
            if my_token:
                server.handle_disconnect(my_token, time.monotonic())
                sockets.pop(my_token, None)
            if my_session:
                slot = server._slots.get(my_session)
                # stop ticking sessions nobody is connected to; a rejoin
                # restarts the ticker
                if slot is None or not any(tok in sockets for tok in slot.clients):
                    task = tickers.pop(my_session, None)
                    if task is not None:
                        task.cancel()

    return app


def serve(server: GameServer, host: str = "127.0.0.1", port: int = 8000):
    import uvicorn

    uvicorn.run(make_app(server), host=host, port=port, log_level="info")

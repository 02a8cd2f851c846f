"""Authoritative session state machine.

Two session modes share one engine:

* gamified - the two-player word-conveyance quiz. Per word the questioner
  conveys each hidden letter (capture trigger -> countdown -> approval ->
  answerer marking), then the answerer types the word under a timer with a
  late first-letter clue, the result is revealed, and roles swap.
* standard - the baseline protocol: one participant triggers a shrinking
  stimulus at a random canvas position, a countdown runs, and a capture is
  taken, repeated a fixed number of times.

The engine never reads a clock: all timing arrives as explicit tick inputs,
so every session is deterministic and replayable from its event log.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field

from . import dictionary as worddict
from .errors import ConfigError, ProtocolViolation, ReplayError
from .geometry import BoardLayout


@dataclass(frozen=True)
class GameConfig:
    words_per_game: int = 2
    min_letters: int = 5
    max_letters: int = 6
    hidden_count: int = 3
    capture_countdown_s: float = 3.0
    answer_time_limit_s: float = 60.0
    clue_reveal_remaining_s: float = 30.0
    standard_stimuli_count: int = 50
    canvas_w_mm: float = 600.0
    canvas_h_mm: float = 300.0

    def __post_init__(self):
        if self.min_letters > self.max_letters:
            raise ConfigError("min_letters > max_letters")
        if self.hidden_count >= self.min_letters:
            raise ConfigError("hidden_count must be < min_letters")
        if self.clue_reveal_remaining_s >= self.answer_time_limit_s:
            raise ConfigError("clue_reveal_remaining_s must be < answer_time_limit_s")
        if min(self.words_per_game, self.hidden_count, self.standard_stimuli_count) < 1:
            raise ConfigError("counts must be >= 1")
        if min(self.capture_countdown_s, self.canvas_w_mm, self.canvas_h_mm) <= 0:
            raise ConfigError("durations and canvas size must be positive")


class Phase(str, enum.Enum):
    IDLE = "idle"
    BRIEFING = "briefing"
    ANSWERER_REVIEW = "answerer_review"
    AWAIT_CAPTURE_TRIGGER = "await_capture_trigger"
    COUNTDOWN = "countdown"
    AWAIT_APPROVAL = "await_approval"
    ANSWERER_MARKING = "answerer_marking"
    ANSWERING = "answering"
    REVEAL = "reveal"
    ROLE_SWITCH = "role_switch"
    FINISHED = "finished"
    # standard mode
    AWAIT_TRIGGER = "await_trigger"
    CAPTURED = "captured"


@dataclass(frozen=True)
class SessionEvent:
    t: float
    actor: str
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "actor": self.actor, "kind": self.kind,
                           "payload": self.payload},
                          ensure_ascii=False, sort_keys=True)

    @staticmethod
    def from_json(line: str) -> "SessionEvent":
        d = json.loads(line)
        return SessionEvent(t=d["t"], actor=d["actor"], kind=d["kind"],
                            payload=d.get("payload", {}))


@dataclass(frozen=True)
class EngineInput:
    kind: str
    actor: str
    t: float
    payload: dict = field(default_factory=dict)


# -- effects: commands for the surrounding modules ---------------------------

@dataclass(frozen=True)
class StartCountdown:
    seconds: float


@dataclass(frozen=True)
class RequestCapture:
    word_index: int
    letter_index: int
    letter_id: str | None  # None in standard mode
    stimulus_xy_mm: tuple[float, float] | None = None


@dataclass(frozen=True)
class PresentImage:
    to: str  # "questioner", "answerer", or "both"
    capture: dict
    no_face: bool = False


@dataclass(frozen=True)
class PersistSample:
    capture: dict


@dataclass(frozen=True)
class RecordMark:
    position_mm: tuple[float, float]


@dataclass(frozen=True)
class RevealClue:
    glyph: str


@dataclass(frozen=True)
class SwitchRoles:
    questioner: str


@dataclass(frozen=True)
class ShowResult:
    correct: bool
    word: str
    score: int


@dataclass(frozen=True)
class EndSession:
    score: int


_INPUT_EVENT_KINDS = {
    "ready": "ready",
    "trigger_capture": "capture_triggered",
    "capture_completed": "capture_completed",
    "approve_capture": "capture_approved",
    "reject_capture": "capture_rejected",
    "mark": "mark_recorded",
    "answer": "answer_submitted",
}


class GameSession:
    """Single-owner state machine; all inputs must arrive sequentially."""

    def __init__(self, session_id: str, config: GameConfig, players: tuple[str, ...],
                 mode: str, rng_seed: int, dictionary_entries=None,
                 board: BoardLayout | None = None):
        self.session_id = session_id
        self.config = config
        self.players = tuple(players)
        self.mode = mode
        self.rng_seed = rng_seed
        self.rng = random.Random(rng_seed)
        self.dictionary_entries = list(dictionary_entries or [])
        self.board = board

        self.phase = Phase.IDLE
        self.word_index = 0
        self.question: worddict.QuestionWord | None = None
        self.letter_index = 0
        self.score = 0
        self.questioner_idx = 0
        self.used_words: set[str] = set()
        self.marks: list[dict] = []
        self.event_log: list[SessionEvent] = []
        self.stimuli_done = 0
        self.current_stimulus: tuple[float, float] | None = None

        self._countdown_end_t: float | None = None
        self._capture_requested = False
        self._answer_deadline_t: float | None = None
        self._clue_deadline_t: float | None = None
        self._clue_revealed = False
        self._pending_capture: dict | None = None
        self._last_t = float("-inf")

    # -- role helpers --------------------------------------------------------

    @property
    def questioner(self) -> str:
        return self.players[self.questioner_idx]

    @property
    def answerer(self) -> str:
        return self.players[1 - self.questioner_idx] if len(self.players) > 1 else self.questioner

    def state_fingerprint(self) -> dict:
        """Comparable snapshot of everything that defines the session state."""
        return {
            "phase": self.phase.value,
            "word_index": self.word_index,
            "letter_index": self.letter_index,
            "score": self.score,
            "questioner": self.questioner,
            "stimuli_done": self.stimuli_done,
            "word": self.question.entry.word if self.question else None,
            "hidden": list(self.question.hidden_mask) if self.question else None,
            "events": [e.to_json() for e in self.event_log],
        }

    # -- event log -----------------------------------------------------------

    def _append(self, kind: str, actor: str, t: float, payload: dict | None = None):
        self.event_log.append(SessionEvent(t=t, actor=actor, kind=kind,
                                           payload=payload or {}))

    def _illegal(self, inp: EngineInput):
        raise ProtocolViolation(inp.actor, self.phase.value, inp.kind)

    # -- word lifecycle ------------------------------------------------------

    def _assign_word(self, t: float):
        q = worddict.select_question(
            self.dictionary_entries,
            min_letters=self.config.min_letters,
            max_letters=self.config.max_letters,
            hidden_count=self.config.hidden_count,
            board_glyphs=self.board.glyphs,
            rng=self.rng,
            exclude=frozenset(self.used_words),
        )
        self.question = q
        self.used_words.add(q.entry.word)
        self.letter_index = 0
        self.marks = []
        self._clue_revealed = False
        self._append("word_assigned", "system", t, {
            "word_index": self.word_index,
            "word": q.entry.word,
            "hidden_mask": list(q.hidden_mask),
            "questioner": self.questioner,
        })

    def _current_target_glyph(self) -> str:
        return self.question.entry.glyphs[self.question.hidden_positions[self.letter_index]]


def start_session(config: GameConfig, players, mode: str, rng_seed: int,
                  dictionary_entries=None, board: BoardLayout | None = None,
                  session_id: str = "s0", start_t: float = 0.0) -> GameSession:
    """Create a session and run its opening transitions."""
    if mode not in ("gamified", "standard"):
        raise ConfigError(f"unknown mode {mode!r}")
    players = tuple(players)
    if mode == "gamified":
        if len(players) != 2 or players[0] == players[1]:
            raise ConfigError("gamified mode needs two distinct players")
        if not dictionary_entries or board is None:
            raise ConfigError("gamified mode needs a dictionary and a board layout")
    else:
        if len(players) != 1:
            raise ConfigError("standard mode takes exactly one participant")
    s = GameSession(session_id, config, players, mode, rng_seed,
                    dictionary_entries, board)
    s._last_t = start_t
    s._append("game_started", "system", start_t, {
        "players": list(players), "mode": mode, "rng_seed": rng_seed,
        "session_id": session_id,
    })
    if mode == "gamified":
        s.phase = Phase.BRIEFING
        s._assign_word(start_t)
    else:
        s.phase = Phase.AWAIT_TRIGGER
    return s


def handle_event(session: GameSession, inp: EngineInput) -> list:
    """Apply one input; returns effects. Illegal inputs raise
    ProtocolViolation and leave the session unchanged."""
    if session.phase == Phase.FINISHED:
        if inp.kind == "tick":
            return []
        session._illegal(inp)
    if inp.t < session._last_t:
        session._illegal(inp)

    if inp.kind == "tick":
        effects = _handle_tick(session, inp.t)
    elif session.mode == "standard":
        effects = _handle_standard(session, inp)
    else:
        effects = _handle_gamified(session, inp)
    session._last_t = max(session._last_t, inp.t)
    return effects


def _handle_tick(session: GameSession, t: float) -> list:
    effects = []
    if session.phase == Phase.COUNTDOWN and not session._capture_requested \
            and t >= session._countdown_end_t:
        session._capture_requested = True
        if session.mode == "standard":
            effects.append(RequestCapture(word_index=0,
                                          letter_index=session.stimuli_done,
                                          letter_id=None,
                                          stimulus_xy_mm=session.current_stimulus))
        else:
            effects.append(RequestCapture(word_index=session.word_index,
                                          letter_index=session.letter_index,
                                          letter_id=session._current_target_glyph()))
    elif session.phase == Phase.ANSWERING:
        effects.extend(_answer_clock(session, t, allow_timeout=True))
    return effects


def _answer_clock(session: GameSession, t: float, allow_timeout: bool) -> list:
    """Clue reveal and timeout handling for the answering timer."""
    effects = []
    if not session._clue_revealed and t >= session._clue_deadline_t:
        session._clue_revealed = True
        glyph = session.question.entry.glyphs[session.question.first_letter_clue_index]
        session._append("clue_revealed", "system", t, {"glyph": glyph})
        effects.append(RevealClue(glyph=glyph))
    if allow_timeout and t >= session._answer_deadline_t:
        session._append("timeout", "system", t, {})
        effects.extend(_resolve_word(session, t, correct=False, answered=False))
    return effects


def _resolve_word(session: GameSession, t: float, correct: bool, answered: bool) -> list:
    if correct:
        session.score += 1
    session._append("result_shown", "system", t, {
        "correct": correct, "answered": answered,
        "word": session.question.entry.word, "score": session.score,
    })
    session.phase = Phase.REVEAL
    return [ShowResult(correct=correct, word=session.question.entry.word,
                       score=session.score)]


def _begin_countdown(session: GameSession, t: float) -> list:
    session.phase = Phase.COUNTDOWN
    session._countdown_end_t = t + session.config.capture_countdown_s
    session._capture_requested = False
    return [StartCountdown(seconds=session.config.capture_countdown_s)]


def _handle_gamified(session: GameSession, inp: EngineInput) -> list:
    phase = session.phase
    kind = inp.kind
    effects: list = []

    if phase == Phase.BRIEFING and kind == "ready":
        if inp.actor not in session.players:
            session._illegal(inp)
        session._append("ready", inp.actor, inp.t, {"phase": phase.value})
        session.phase = Phase.ANSWERER_REVIEW

    elif phase == Phase.ANSWERER_REVIEW and kind == "ready":
        if inp.actor != session.answerer:
            session._illegal(inp)
        session._append("ready", inp.actor, inp.t, {"phase": phase.value})
        session.phase = Phase.AWAIT_CAPTURE_TRIGGER

    elif phase == Phase.AWAIT_CAPTURE_TRIGGER and kind == "trigger_capture":
        if inp.actor != session.questioner:
            session._illegal(inp)
        session._append("capture_triggered", inp.actor, inp.t, {
            "word_index": session.word_index,
            "letter_index": session.letter_index,
            "letter_id": session._current_target_glyph(),
        })
        effects.extend(_begin_countdown(session, inp.t))

    elif phase == Phase.COUNTDOWN and kind == "capture_completed":
        if inp.t < session._countdown_end_t:
            session._illegal(inp)
        session._capture_requested = False
        no_face = bool(inp.payload.get("no_face"))
        session._append("capture_completed", "system", inp.t, inp.payload)
        if no_face:
            session.phase = Phase.AWAIT_CAPTURE_TRIGGER
            effects.append(PresentImage(to="questioner", capture=inp.payload,
                                        no_face=True))
        else:
            session._pending_capture = inp.payload
            session.phase = Phase.AWAIT_APPROVAL
            effects.append(PresentImage(to="questioner", capture=inp.payload))

    elif phase == Phase.AWAIT_APPROVAL and kind == "approve_capture":
        if inp.actor != session.questioner:
            session._illegal(inp)
        session._append("capture_approved", inp.actor, inp.t, {
            "word_index": session.word_index,
            "letter_index": session.letter_index,
        })
        capture = session._pending_capture
        session._pending_capture = None
        session.phase = Phase.ANSWERER_MARKING
        effects.append(PersistSample(capture=capture))
        effects.append(PresentImage(to="answerer", capture=capture))

    elif phase == Phase.AWAIT_APPROVAL and kind == "reject_capture":
        if inp.actor != session.questioner:
            session._illegal(inp)
        session._append("capture_rejected", inp.actor, inp.t, {
            "word_index": session.word_index,
            "letter_index": session.letter_index,
        })
        session._pending_capture = None  # retake, nothing persisted
        session.phase = Phase.AWAIT_CAPTURE_TRIGGER

    elif phase == Phase.ANSWERER_MARKING and kind == "mark":
        if inp.actor != session.answerer:
            session._illegal(inp)
        pos = inp.payload.get("position_mm")
        if not (isinstance(pos, (list, tuple)) and len(pos) == 2):
            session._illegal(inp)
        mark = {"word_index": session.word_index,
                "letter_index": session.letter_index,
                "position_mm": [float(pos[0]), float(pos[1])]}
        session.marks.append(mark)
        session._append("mark_recorded", inp.actor, inp.t, mark)
        effects.append(RecordMark(position_mm=(mark["position_mm"][0],
                                               mark["position_mm"][1])))

    elif phase == Phase.ANSWERER_MARKING and kind == "ready":
        if inp.actor != session.answerer:
            session._illegal(inp)
        session._append("ready", inp.actor, inp.t, {"phase": phase.value})
        session.letter_index += 1
        if session.letter_index < session.config.hidden_count:
            session.phase = Phase.AWAIT_CAPTURE_TRIGGER
        else:
            session.phase = Phase.ANSWERING
            session._answer_deadline_t = inp.t + session.config.answer_time_limit_s
            session._clue_deadline_t = (session._answer_deadline_t
                                        - session.config.clue_reveal_remaining_s)
            session._clue_revealed = False

    elif phase == Phase.ANSWERING and kind == "answer":
        if inp.actor != session.answerer:
            session._illegal(inp)
        if inp.t >= session._answer_deadline_t:
            session._illegal(inp)  # too late; the next tick forces the timeout
        effects.extend(_answer_clock(session, inp.t, allow_timeout=False))
        text = worddict.normalize_answer(str(inp.payload.get("text", "")))
        correct = text == session.question.entry.word
        session._append("answer_submitted", inp.actor, inp.t,
                        {"text": text, "correct": correct})
        effects.extend(_resolve_word(session, inp.t, correct=correct, answered=True))

    elif phase == Phase.REVEAL and kind == "proceed":
        if inp.actor not in session.players:
            session._illegal(inp)
        session.word_index += 1
        if session.word_index >= session.config.words_per_game:
            session._append("finished", "system", inp.t, {"score": session.score})
            session.phase = Phase.FINISHED
            effects.append(EndSession(score=session.score))
        else:
            session.questioner_idx = 1 - session.questioner_idx
            session._append("roles_switched", "system", inp.t,
                            {"questioner": session.questioner})
            effects.append(SwitchRoles(questioner=session.questioner))
            session._assign_word(inp.t)
            session.phase = Phase.ANSWERER_REVIEW

    else:
        session._illegal(inp)
    return effects


def _handle_standard(session: GameSession, inp: EngineInput) -> list:
    phase = session.phase
    effects: list = []

    if phase in (Phase.AWAIT_TRIGGER, Phase.CAPTURED) and inp.kind == "trigger_capture":
        if inp.actor != session.players[0]:
            session._illegal(inp)
        cfg = session.config
        x = session.rng.uniform(-cfg.canvas_w_mm / 2.0, cfg.canvas_w_mm / 2.0)
        y = session.rng.uniform(-cfg.canvas_h_mm / 2.0, cfg.canvas_h_mm / 2.0)
        session.current_stimulus = (x, y)
        session._append("stimulus_shown", "system", inp.t,
                        {"index": session.stimuli_done, "xy_mm": [x, y]})
        session._append("capture_triggered", inp.actor, inp.t,
                        {"index": session.stimuli_done})
        effects.extend(_begin_countdown(session, inp.t))

    elif phase == Phase.COUNTDOWN and inp.kind == "capture_completed":
        if inp.t < session._countdown_end_t:
            session._illegal(inp)
        session._capture_requested = False
        session._append("capture_completed", "system", inp.t, inp.payload)
        if inp.payload.get("no_face"):
            session.phase = Phase.AWAIT_TRIGGER
            effects.append(PresentImage(to="questioner", capture=inp.payload,
                                        no_face=True))
        else:
            # The standard protocol has no approval step; record it as
            # system-approved so persistence always follows an approval event.
            session._append("capture_approved", "system", inp.t,
                            {"index": session.stimuli_done})
            effects.append(PersistSample(capture=inp.payload))
            session.stimuli_done += 1
            if session.stimuli_done >= session.config.standard_stimuli_count:
                session._append("finished", "system", inp.t,
                                {"captures": session.stimuli_done})
                session.phase = Phase.FINISHED
                effects.append(EndSession(score=0))
            else:
                session.phase = Phase.CAPTURED
    else:
        session._illegal(inp)
    return effects


def standard_stimulus(session: GameSession, actor: str, t: float) -> list:
    """Convenience wrapper: one space-key trigger in standard mode."""
    return handle_event(session, EngineInput(kind="trigger_capture", actor=actor, t=t))


# -- replay -------------------------------------------------------------------

def replay(event_log: list[SessionEvent], config: GameConfig,
           dictionary_entries=None, board: BoardLayout | None = None) -> GameSession:
    """Reconstruct a session deterministically from its event log."""
    if not event_log:
        raise ReplayError("empty event log", 0)
    first = event_log[0]
    if first.kind != "game_started":
        raise ReplayError(f"log must start with game_started, got {first.kind}", 0)
    p = first.payload
    try:
        session = start_session(config, p["players"], p["mode"], p["rng_seed"],
                                dictionary_entries=dictionary_entries, board=board,
                                session_id=p.get("session_id", "s0"), start_t=first.t)
    except KeyError as e:
        raise ReplayError(f"game_started payload missing {e.args[0]!r}", 0) from None

    for i, ev in enumerate(event_log):
        if i < len(session.event_log):
            if session.event_log[i] != ev:
                raise ReplayError(
                    f"derived event mismatch: expected {ev.to_json()}, "
                    f"got {session.event_log[i].to_json()}", i)
            continue
        inp = _event_to_input(session, ev, i)
        try:
            handle_event(session, inp)
        except ProtocolViolation as e:
            raise ReplayError(f"logged input is illegal on replay: {e}", i) from e
        if i >= len(session.event_log) or session.event_log[i] != ev:
            raise ReplayError(f"replayed log diverged at {ev.to_json()}", i)
    return session


def _event_to_input(session: GameSession, ev: SessionEvent, index: int) -> EngineInput:
    if ev.kind in ("clue_revealed", "timeout"):
        return EngineInput(kind="tick", actor="system", t=ev.t)
    if ev.kind == "stimulus_shown":
        return EngineInput(kind="trigger_capture", actor=session.players[0], t=ev.t)
    if ev.kind in ("roles_switched", "finished") and session.mode == "gamified":
        # Both are derived from the answerer's proceed press, which has no
        # input event of its own.
        return EngineInput(kind="proceed", actor=session.answerer, t=ev.t)
    for input_kind, event_kind in _INPUT_EVENT_KINDS.items():
        if ev.kind == event_kind:
            return EngineInput(kind=input_kind, actor=ev.actor, t=ev.t,
                               payload=ev.payload)
    raise ReplayError(f"cannot replay event kind {ev.kind!r}", index)

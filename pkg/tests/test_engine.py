import pytest

from gazeboard import engine as eng
from gazeboard.errors import ConfigError, ProtocolViolation, ReplayError


CFG = eng.GameConfig()


def _start(seed=0, board=None, entries=None, config=CFG):
    return eng.start_session(config, ("alice", "bob"), "gamified", seed,
                             dictionary_entries=entries, board=board)


def _inp(kind, actor, t, **payload):
    return eng.EngineInput(kind=kind, actor=actor, t=t, payload=payload)


def _drive_letter(s, t, approve=True):
    """One capture round: trigger, countdown tick, completion, verdict."""
    eng.handle_event(s, _inp("trigger_capture", s.questioner, t))
    t += CFG.capture_countdown_s + 0.1
    eng.handle_event(s, eng.EngineInput(kind="tick", actor="system", t=t))
    eng.handle_event(s, _inp("capture_completed", "system", t,
                             sample_id=f"x-{t}", no_face=False))
    t += 0.5
    verdict = "approve_capture" if approve else "reject_capture"
    eng.handle_event(s, _inp(verdict, s.questioner, t))
    return t + 0.1


class TestConfig:
    def test_defaults_valid(self):
        cfg = eng.GameConfig()
        assert cfg.words_per_game == 2
        assert cfg.hidden_count == 3

    def test_invalid_configs(self):
        with pytest.raises(ConfigError):
            eng.GameConfig(min_letters=7, max_letters=6)
        with pytest.raises(ConfigError):
            eng.GameConfig(hidden_count=5, min_letters=5)
        with pytest.raises(ConfigError):
            eng.GameConfig(clue_reveal_remaining_s=60.0, answer_time_limit_s=60.0)
        with pytest.raises(ConfigError):
            eng.GameConfig(words_per_game=0)


class TestGamifiedFlow:
    def test_opening(self, board, entries):
        s = _start(board=board, entries=entries)
        assert s.phase == eng.Phase.BRIEFING
        assert s.question is not None
        assert s.event_log[0].kind == "game_started"
        assert s.event_log[1].kind == "word_assigned"
        assert sum(s.question.hidden_mask) == CFG.hidden_count

    def test_needs_two_distinct_players(self, board, entries):
        with pytest.raises(ConfigError):
            eng.start_session(CFG, ("a", "a"), "gamified", 0,
                              dictionary_entries=entries, board=board)

    def test_full_word_cycle(self, board, entries):
        s = _start(board=board, entries=entries)
        t = 1.0
        eng.handle_event(s, _inp("ready", "alice", t))
        assert s.phase == eng.Phase.ANSWERER_REVIEW
        eng.handle_event(s, _inp("ready", s.answerer, t + 1))
        assert s.phase == eng.Phase.AWAIT_CAPTURE_TRIGGER
        t += 2
        for i in range(CFG.hidden_count):
            t = _drive_letter(s, t)
            assert s.phase == eng.Phase.ANSWERER_MARKING
            eng.handle_event(s, _inp("mark", s.answerer, t, position_mm=[1.0, 2.0]))
            eng.handle_event(s, _inp("ready", s.answerer, t + 0.1))
            t += 1
        assert s.phase == eng.Phase.ANSWERING
        word = s.question.entry.word
        eng.handle_event(s, _inp("answer", s.answerer, t, text=word))
        assert s.phase == eng.Phase.REVEAL
        assert s.score == 1
        eng.handle_event(s, _inp("proceed", s.answerer, t + 1))
        # roles switched, second word assigned
        assert s.phase == eng.Phase.ANSWERER_REVIEW
        assert s.questioner == "bob"
        assert s.word_index == 1

    def test_wrong_answer_scores_zero(self, board, entries):
        s = _start(board=board, entries=entries)
        t = self._to_answering(s)
        eng.handle_event(s, _inp("answer", s.answerer, t, text="まちがい"))
        assert s.score == 0
        assert s.phase == eng.Phase.REVEAL

    def test_answer_normalization(self, board, entries):
        s = _start(board=board, entries=entries)
        t = self._to_answering(s)
        eng.handle_event(s, _inp("answer", s.answerer, t,
                                 text="  " + s.question.entry.word + " "))
        assert s.score == 1

    @staticmethod
    def _to_answering(s, t=1.0):
        eng.handle_event(s, _inp("ready", "alice", t))
        eng.handle_event(s, _inp("ready", s.answerer, t + 0.1))
        t += 1
        for _ in range(CFG.hidden_count):
            t = _drive_letter(s, t)
            eng.handle_event(s, _inp("ready", s.answerer, t))
            t += 1
        assert s.phase == eng.Phase.ANSWERING
        return t

    def test_reject_forces_retake_without_persist(self, board, entries):
        s = _start(board=board, entries=entries)
        eng.handle_event(s, _inp("ready", "alice", 1.0))
        eng.handle_event(s, _inp("ready", s.answerer, 1.1))
        t = _drive_letter(s, 2.0, approve=False)
        assert s.phase == eng.Phase.AWAIT_CAPTURE_TRIGGER
        assert s.letter_index == 0
        kinds = [e.kind for e in s.event_log]
        assert "capture_rejected" in kinds
        assert "capture_approved" not in kinds

    def test_no_face_returns_to_trigger(self, board, entries):
        s = _start(board=board, entries=entries)
        eng.handle_event(s, _inp("ready", "alice", 1.0))
        eng.handle_event(s, _inp("ready", s.answerer, 1.1))
        eng.handle_event(s, _inp("trigger_capture", s.questioner, 2.0))
        t = 2.0 + CFG.capture_countdown_s + 0.1
        eng.handle_event(s, eng.EngineInput(kind="tick", actor="system", t=t))
        effects = eng.handle_event(s, _inp("capture_completed", "system", t,
                                           no_face=True))
        assert s.phase == eng.Phase.AWAIT_CAPTURE_TRIGGER
        assert any(isinstance(e, eng.PresentImage) and e.no_face for e in effects)

    def test_capture_completion_before_countdown_end_illegal(self, board, entries):
        s = _start(board=board, entries=entries)
        eng.handle_event(s, _inp("ready", "alice", 1.0))
        eng.handle_event(s, _inp("ready", s.answerer, 1.1))
        eng.handle_event(s, _inp("trigger_capture", s.questioner, 2.0))
        with pytest.raises(ProtocolViolation):
            eng.handle_event(s, _inp("capture_completed", "system", 3.0))

    def test_countdown_tick_requests_capture_once(self, board, entries):
        s = _start(board=board, entries=entries)
        eng.handle_event(s, _inp("ready", "alice", 1.0))
        eng.handle_event(s, _inp("ready", s.answerer, 1.1))
        eng.handle_event(s, _inp("trigger_capture", s.questioner, 2.0))
        t = 2.0 + CFG.capture_countdown_s
        e1 = eng.handle_event(s, eng.EngineInput(kind="tick", actor="system", t=t))
        e2 = eng.handle_event(s, eng.EngineInput(kind="tick", actor="system", t=t + 1))
        assert sum(isinstance(e, eng.RequestCapture) for e in e1) == 1
        assert not e2

    def test_timeout_and_single_clue(self, board, entries):
        s = _start(board=board, entries=entries)
        t = self._to_answering(s)
        t_clue = t + CFG.answer_time_limit_s - CFG.clue_reveal_remaining_s
        effects = eng.handle_event(s, eng.EngineInput(kind="tick", actor="system",
                                                      t=t_clue + 0.1))
        assert sum(isinstance(e, eng.RevealClue) for e in effects) == 1
        effects = eng.handle_event(s, eng.EngineInput(kind="tick", actor="system",
                                                      t=t_clue + 0.2))
        assert not any(isinstance(e, eng.RevealClue) for e in effects)
        effects = eng.handle_event(s, eng.EngineInput(
            kind="tick", actor="system", t=t + CFG.answer_time_limit_s))
        assert s.phase == eng.Phase.REVEAL
        assert [e.kind for e in s.event_log].count("clue_revealed") == 1
        assert "timeout" in [e.kind for e in s.event_log]

    def test_single_tick_crossing_both_thresholds(self, board, entries):
        s = _start(board=board, entries=entries)
        t = self._to_answering(s)
        eng.handle_event(s, eng.EngineInput(kind="tick", actor="system",
                                            t=t + CFG.answer_time_limit_s + 5))
        kinds = [e.kind for e in s.event_log]
        assert kinds.count("clue_revealed") == 1
        assert kinds.count("timeout") == 1
        assert s.phase == eng.Phase.REVEAL

    def test_late_answer_is_illegal(self, board, entries):
        s = _start(board=board, entries=entries)
        t = self._to_answering(s)
        with pytest.raises(ProtocolViolation):
            eng.handle_event(s, _inp("answer", s.answerer, t + CFG.answer_time_limit_s,
                                     text=s.question.entry.word))
        assert s.phase == eng.Phase.ANSWERING  # unchanged until the next tick

    def test_wrong_actor_rejected(self, board, entries):
        s = _start(board=board, entries=entries)
        eng.handle_event(s, _inp("ready", "alice", 1.0))
        with pytest.raises(ProtocolViolation):
            eng.handle_event(s, _inp("ready", s.questioner, 1.1))  # answerer only
        with pytest.raises(ProtocolViolation):
            eng.handle_event(s, _inp("trigger_capture", s.answerer, 1.2))

    def test_time_never_goes_backward(self, board, entries):
        s = _start(board=board, entries=entries)
        eng.handle_event(s, _inp("ready", "alice", 5.0))
        with pytest.raises(ProtocolViolation):
            eng.handle_event(s, _inp("ready", s.answerer, 4.0))

    def test_words_never_repeat_within_session(self, board, entries):
        s = _start(board=board, entries=entries, config=eng.GameConfig(words_per_game=5))
        words = {s.question.entry.word}
        t = 1.0
        for _ in range(4):
            t = self._finish_word(s, t)
            eng.handle_event(s, _inp("proceed", s.answerer, t))
            t += 1
            if s.phase != eng.Phase.FINISHED:
                assert s.question.entry.word not in words
                words.add(s.question.entry.word)

    @staticmethod
    def _finish_word(s, t):
        if s.phase == eng.Phase.BRIEFING:
            eng.handle_event(s, _inp("ready", "alice", t))
            t += 0.1
        if s.phase == eng.Phase.ANSWERER_REVIEW:
            eng.handle_event(s, _inp("ready", s.answerer, t))
            t += 0.1
        for _ in range(CFG.hidden_count):
            t = _drive_letter(s, t)
            eng.handle_event(s, _inp("ready", s.answerer, t))
            t += 1
        eng.handle_event(s, _inp("answer", s.answerer, t, text=s.question.entry.word))
        return t + 0.5

    def test_full_game_finishes(self, board, entries):
        s = _start(board=board, entries=entries)
        t = 1.0
        for _ in range(CFG.words_per_game):
            t = self._finish_word(s, t)
            eng.handle_event(s, _inp("proceed", s.answerer, t))
            t += 1
        assert s.phase == eng.Phase.FINISHED
        assert s.score == CFG.words_per_game
        assert s.event_log[-1].kind == "finished"
        # ticks after the end are tolerated, inputs are not
        assert eng.handle_event(s, eng.EngineInput(kind="tick", actor="system",
                                                   t=t + 10)) == []
        with pytest.raises(ProtocolViolation):
            eng.handle_event(s, _inp("ready", "alice", t + 11))


class TestStandardFlow:
    def test_stimuli_within_canvas(self):
        cfg = eng.GameConfig(standard_stimuli_count=30)
        s = eng.start_session(cfg, ("p0",), "standard", 7)
        t = 0.0
        for _ in range(30):
            t += 1
            eng.standard_stimulus(s, "p0", t)
            x, y = s.current_stimulus
            assert abs(x) <= cfg.canvas_w_mm / 2
            assert abs(y) <= cfg.canvas_h_mm / 2
            t += cfg.capture_countdown_s + 0.1
            eng.handle_event(s, _inp("capture_completed", "system", t,
                                     sample_id=f"s-{t}"))
        assert s.phase == eng.Phase.FINISHED
        assert s.stimuli_done == 30

    def test_stimuli_deterministic_per_seed(self):
        cfg = eng.GameConfig(standard_stimuli_count=5)
        seqs = []
        for _ in range(2):
            s = eng.start_session(cfg, ("p0",), "standard", 99)
            t, xs = 0.0, []
            for _ in range(5):
                t += 1
                eng.standard_stimulus(s, "p0", t)
                xs.append(s.current_stimulus)
                t += cfg.capture_countdown_s + 0.1
                eng.handle_event(s, _inp("capture_completed", "system", t))
            seqs.append(xs)
        assert seqs[0] == seqs[1]

    def test_every_sample_follows_approval(self):
        cfg = eng.GameConfig(standard_stimuli_count=3)
        s = eng.start_session(cfg, ("p0",), "standard", 1)
        t = 0.0
        for _ in range(3):
            t += 1
            eng.standard_stimulus(s, "p0", t)
            t += cfg.capture_countdown_s + 0.1
            eng.handle_event(s, _inp("capture_completed", "system", t))
        kinds = [e.kind for e in s.event_log]
        assert kinds.count("capture_approved") == 3


class TestReplay:
    def _play_game(self, board, entries, seed):
        s = _start(seed=seed, board=board, entries=entries)
        t = 1.0
        for _ in range(CFG.words_per_game):
            t = TestGamifiedFlow._finish_word(s, t)
            eng.handle_event(s, _inp("proceed", s.answerer, t))
            t += 1
        return s

    def test_replay_reproduces_event_log(self, board, entries):
        for seed in range(10):
            s = self._play_game(board, entries, seed)
            r = eng.replay(s.event_log, CFG, dictionary_entries=entries, board=board)
            assert [e.to_json() for e in r.event_log] == \
                [e.to_json() for e in s.event_log]
            assert r.state_fingerprint() == s.state_fingerprint()

    def test_replay_with_timeout_path(self, board, entries):
        s = _start(board=board, entries=entries)
        t = TestGamifiedFlow._to_answering(s)
        eng.handle_event(s, eng.EngineInput(kind="tick", actor="system",
                                            t=t + CFG.answer_time_limit_s + 1))
        eng.handle_event(s, _inp("proceed", s.answerer, t + 70))
        t2 = TestGamifiedFlow._finish_word(s, t + 71)
        eng.handle_event(s, _inp("proceed", s.answerer, t2))
        assert s.phase == eng.Phase.FINISHED
        r = eng.replay(s.event_log, CFG, dictionary_entries=entries, board=board)
        assert r.state_fingerprint() == s.state_fingerprint()

    def test_replay_standard_mode(self):
        cfg = eng.GameConfig(standard_stimuli_count=4)
        s = eng.start_session(cfg, ("p0",), "standard", 5)
        t = 0.0
        for _ in range(4):
            t += 1
            eng.standard_stimulus(s, "p0", t)
            t += cfg.capture_countdown_s + 0.1
            eng.handle_event(s, _inp("capture_completed", "system", t))
        r = eng.replay(s.event_log, cfg)
        assert r.state_fingerprint() == s.state_fingerprint()

    def test_replay_rejects_tampered_log(self, board, entries):
        s = self._play_game(board, entries, 3)
        tampered = list(s.event_log)
        bad = eng.SessionEvent(t=tampered[1].t, actor=tampered[1].actor,
                               kind=tampered[1].kind,
                               payload={**tampered[1].payload, "word": "にせもの"})
        tampered[1] = bad
        with pytest.raises(ReplayError):
            eng.replay(tampered, CFG, dictionary_entries=entries, board=board)

    def test_replay_requires_game_started(self, board, entries):
        s = self._play_game(board, entries, 4)
        with pytest.raises(ReplayError):
            eng.replay(s.event_log[1:], CFG, dictionary_entries=entries, board=board)

    def test_event_json_roundtrip(self, board, entries):
        s = self._play_game(board, entries, 6)
        for ev in s.event_log:
            assert eng.SessionEvent.from_json(ev.to_json()) == ev

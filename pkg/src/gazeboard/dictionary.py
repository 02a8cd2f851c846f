"""Quiz vocabulary: loading, board filtering, and question selection.

Words whose glyphs are absent from the letter board (diacritics etc.) can
still appear as questions, but those positions are never hidden - they are
always shown as hints. The first letter is reserved for the late clue and
is only hidden when nothing else is maskable.
"""

from __future__ import annotations

import random
import unicodedata
from dataclasses import dataclass, field

from .errors import DictionaryExhausted, ParseError


@dataclass(frozen=True)
class DictionaryEntry:
    glyphs: tuple[str, ...]
    tags: tuple[str, ...] = ()

    @property
    def length(self) -> int:
        return len(self.glyphs)

    @property
    def word(self) -> str:
        return "".join(self.glyphs)


@dataclass(frozen=True)
class QuestionWord:
    entry: DictionaryEntry
    hidden_mask: tuple[bool, ...]
    first_letter_clue_index: int = 0

    @property
    def hidden_positions(self) -> tuple[int, ...]:
        return tuple(i for i, h in enumerate(self.hidden_mask) if h)

    @property
    def hidden_glyphs(self) -> tuple[str, ...]:
        return tuple(self.entry.glyphs[i] for i in self.hidden_positions)


@dataclass
class LoadResult:
    entries: list[DictionaryEntry] = field(default_factory=list)
    loaded: int = 0
    rejected: int = 0


def load_dictionary(source) -> LoadResult:
    """Read a UTF-8 word list, one word per line, optional tab-separated tags.

    Entries are NFKC-normalized and de-duplicated; blank lines are skipped.
    """
    result = LoadResult()
    seen = set()
    for ln, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise ParseError(f"malformed UTF-8: {e}", ln) from None
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        word = unicodedata.normalize("NFKC", parts[0].strip())
        if not word:
            result.rejected += 1
            continue
        if word in seen:
            result.rejected += 1
            continue
        seen.add(word)
        result.entries.append(DictionaryEntry(glyphs=tuple(word),
                                              tags=tuple(t.strip() for t in parts[1:] if t.strip())))
        result.loaded += 1
    return result


def _maskable_positions(entry: DictionaryEntry, board_glyphs) -> list[int]:
    return [i for i, g in enumerate(entry.glyphs) if g in board_glyphs]


def eligible_entries(entries, min_letters: int, max_letters: int,
                     hidden_count: int, board_glyphs, exclude=frozenset()):
    """Words that fit the length bounds and have enough board-representable
    positions to hide."""
    out = []
    for e in entries:
        if e.word in exclude:
            continue
        if not (min_letters <= e.length <= max_letters):
            continue
        if len(_maskable_positions(e, board_glyphs)) < hidden_count:
            continue
        out.append(e)
    return out


def select_question(entries, *, min_letters: int, max_letters: int,
                    hidden_count: int, board_glyphs, rng: random.Random,
                    exclude=frozenset()) -> QuestionWord:
    """Uniformly pick an eligible word and a hidden-letter mask.

    Hidden positions are chosen uniformly among board-representable,
    non-first-letter positions; the first letter is only eligible for
    masking when the word is otherwise infeasible.
    """
    pool = eligible_entries(entries, min_letters, max_letters, hidden_count,
                            board_glyphs, exclude)
    if not pool:
        raise DictionaryExhausted("no eligible word in the dictionary")
    entry = pool[rng.randrange(len(pool))]
    maskable = _maskable_positions(entry, board_glyphs)
    preferred = [i for i in maskable if i != 0]
    candidates = preferred if len(preferred) >= hidden_count else maskable
    hidden = sorted(rng.sample(candidates, hidden_count))
    mask = tuple(i in hidden for i in range(entry.length))
    return QuestionWord(entry=entry, hidden_mask=mask, first_letter_clue_index=0)


def normalize_answer(text: str) -> str:
    return unicodedata.normalize("NFKC", text.strip())

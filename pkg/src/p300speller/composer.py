"""Keyboard layout and text composition rules.

The 5 x 8 grid keeps its two outer columns for word suggestions (left column
top to bottom holds slots 0..4, right column slots 5..9) and the six middle
columns hold A..Z row-major followed by the four function keys DW (delete
word), DC (delete character), Sp (space) and En (enter/finish):

    s0  A  B  C  D  E  F  s5
    s1  G  H  I  J  K  L  s6
    s2  M  N  O  P  Q  R  s7
    s3  S  T  U  V  W  X  s8
    s4  Y  Z  DW DC Sp En s9

Composed text is uppercase letters and single spaces; the display renders
every space as '-'.  The word being typed is everything after the last
space, and selecting a suggestion replaces exactly that fragment and closes
the word with a trailing space.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .errors import InputError, ParameterError
from .paradigm import N_GRID_COLS, N_GRID_ROWS

FUNCTION_LABELS = ("DW", "DC", "Sp", "En")
N_SLOTS = 10
_SUGGESTION_RE = re.compile(r"^[A-Z]+( [A-Z]+)*$")


@dataclass(frozen=True)
class Key:
    """One keyboard cell: a letter, a function key, or a suggestion slot."""

    kind: str            # "letter" | "function" | "slot"
    value: str | int

    def __post_init__(self):
        if self.kind == "letter":
            if not (isinstance(self.value, str) and len(self.value) == 1 and "A" <= self.value <= "Z"):
                raise InputError(f"letter key needs A..Z, got {self.value!r}")
        elif self.kind == "function":
            if self.value not in FUNCTION_LABELS:
                raise InputError(f"function key must be one of {FUNCTION_LABELS}, got {self.value!r}")
        elif self.kind == "slot":
            if not (isinstance(self.value, int) and 0 <= self.value < N_SLOTS):
                raise InputError(f"slot index must be 0..{N_SLOTS - 1}, got {self.value!r}")
        else:
            raise InputError(f"unknown key kind {self.kind!r}")

    @staticmethod
    def letter(ch: str) -> "Key":
        return Key("letter", ch)

    @staticmethod
    def function(name: str) -> "Key":
        return Key("function", name)

    @staticmethod
    def slot(index: int) -> "Key":
        return Key("slot", index)

    @property
    def label(self) -> str:
        if self.kind == "slot":
            return f"S{self.value}"
        return str(self.value)


def parse_key_label(label: str) -> Key:
    """Inverse of Key.label: 'A'..'Z', 'DW','DC','Sp','En', 'S0'..'S9'."""
    if len(label) == 1 and "A" <= label <= "Z":
        return Key.letter(label)
    if label in FUNCTION_LABELS:
        return Key.function(label)
    if len(label) == 2 and label[0] == "S" and label[1].isdigit():
        return Key.slot(int(label[1]))
    raise InputError(f"unknown key label {label!r}")


class KeyboardLayout:
    """Fixed grid geometry plus the code <-> cell mapping."""

    def __init__(self):
        letters = [Key.letter(chr(ord("A") + i)) for i in range(26)]
        middle = letters + [Key.function(name) for name in FUNCTION_LABELS]
        grid = []
        for row in range(N_GRID_ROWS):
            cells: list[Key] = [Key.slot(row)]                      # left edge: slots 0..4
            cells.extend(middle[row * 6:(row + 1) * 6])             # six middle columns
            cells.append(Key.slot(N_GRID_ROWS + row))               # right edge: slots 5..9
            grid.append(tuple(cells))
        self.grid: tuple[tuple[Key, ...], ...] = tuple(grid)
        self._positions = {
            key: (r + 1, c + 1)
            for r, row_cells in enumerate(self.grid)
            for c, key in enumerate(row_cells)
        }

    def key_at(self, row: int, col: int) -> Key:
        """Cell at 1-indexed (row, col)."""
        if not (1 <= row <= N_GRID_ROWS and 1 <= col <= N_GRID_COLS):
            raise ParameterError(f"cell ({row}, {col}) outside the {N_GRID_ROWS}x{N_GRID_COLS} grid")
        return self.grid[row - 1][col - 1]

    def position_of(self, key: Key) -> tuple[int, int]:
        """1-indexed (row, col) of a key."""
        try:
            return self._positions[key]
        except KeyError:
            raise InputError(f"key {key.label} is not on the keyboard") from None

    def codes_for(self, key: Key) -> tuple[int, int]:
        """(column code, row code) whose flashes cover this key."""
        row, col = self.position_of(key)
        return col, N_GRID_COLS + row

    def key_for_codes(self, col_code: int, row_code: int) -> Key:
        """Cell at the crossing of a column flash and a row flash."""
        if not 1 <= col_code <= N_GRID_COLS:
            raise InputError(f"column code must be 1..{N_GRID_COLS}, got {col_code}")
        if not N_GRID_COLS + 1 <= row_code <= N_GRID_COLS + N_GRID_ROWS:
            raise InputError(
                f"row code must be {N_GRID_COLS + 1}..{N_GRID_COLS + N_GRID_ROWS}, got {row_code}"
            )
        return self.key_at(row_code - N_GRID_COLS, col_code)

    def all_keys(self) -> tuple[Key, ...]:
        return tuple(key for row in self.grid for key in row)


def last_word(text: str) -> str:
    """The fragment after the last space: the word currently being typed."""
    return text.rsplit(" ", 1)[-1]


def display_text(text: str) -> str:
    """GUI rendering: every space shown as a dash."""
    return text.replace(" ", "-")


@dataclass(frozen=True)
class CompositionState:
    """Composed text, the frozen suggestion slots, and the finished flag."""

    composed: str = ""
    slots: tuple[str, ...] = ("",) * N_SLOTS
    finished: bool = False

    def __post_init__(self):
        if not re.fullmatch(r"[A-Z ]*", self.composed):
            raise InputError(f"composed text must be A..Z and spaces, got {self.composed!r}")
        if len(self.slots) != N_SLOTS:
            raise InputError(f"need exactly {N_SLOTS} slots, got {len(self.slots)}")
        for s in self.slots:
            if s and not _SUGGESTION_RE.fullmatch(s):
                raise InputError(f"slot text must be words of A..Z, got {s!r}")

    @property
    def display(self) -> str:
        return display_text(self.composed)

    def with_slots(self, slots: tuple[str, ...]) -> "CompositionState":
        return replace(self, slots=tuple(slots))


def apply_key(state: CompositionState, key: Key) -> CompositionState:
    """Composition semantics of one recognized key.

    Letters append; Sp appends a space; DC removes the last character; DW
    removes the word being typed (or, after a closing space, that space and
    the word before it); a suggestion slot replaces the word being typed with
    the slot's text plus a closing space; En only sets the finished flag.
    Everything is a no-op once finished, and an empty slot is a no-op too.
    """
    if state.finished:
        return state
    text = state.composed
    if key.kind == "letter":
        return replace(state, composed=text + key.value)
    if key.kind == "slot":
        suggestion = state.slots[key.value]
        if not suggestion:
            return state
        start = text.rfind(" ") + 1
        return replace(state, composed=text[:start] + suggestion + " ")
    if key.value == "Sp":
        return replace(state, composed=text + " ")
    if key.value == "DC":
        return replace(state, composed=text[:-1])
    if key.value == "DW":
        trimmed = text.rstrip(" ")
        start = trimmed.rfind(" ") + 1
        return replace(state, composed=trimmed[:start])
    if key.value == "En":
        return replace(state, finished=True)
    raise InputError(f"cannot apply key {key!r}")

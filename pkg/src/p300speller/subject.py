"""Simulated operator: evoked-response epoch generator plus intention policies.

The generator stands in for a human wearing the cap: every flash yields a
noise epoch, and flashes that cover the attended key's row or column add an
evoked positive bump (unless an attention lapse suppresses it).  The policies
stand in for the human's intent: given the current composition state they
decide which key the operator attends to next.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .composer import CompositionState, Key, KeyboardLayout, last_word
from .errors import ParameterError, PolicyExhaustedError
from .signals import CHANNEL_NAMES, EPOCH_SAMPLES, SAMPLE_RATE_HZ, EegEpoch

# Per-channel scaling of the evoked bump: strongest over centro-parietal sites.
TOPOGRAPHY = {"Pz": 1.0, "Cz": 0.8, "CP1": 0.8, "CP2": 0.8}
TOPOGRAPHY_DEFAULT = 0.3

# Conversion between a bump's full width at half maximum and its Gaussian sigma.
_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

MAX_RECOVERY_KEYS = 3


@dataclass(frozen=True)
class SubjectParams:
    """Shape and reliability of the simulated evoked response."""

    p300_amplitude: float = 4.0
    p300_latency_ms: float = 300.0
    p300_width_ms: float = 80.0
    noise_sigma: float = 2.0
    lapse_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.p300_amplitude < 0:
            raise ParameterError(f"amplitude must be >= 0, got {self.p300_amplitude}")
        if not 0.0 <= self.lapse_prob <= 1.0:
            raise ParameterError(f"lapse_prob must be in [0, 1], got {self.lapse_prob}")
        if self.noise_sigma <= 0:
            raise ParameterError(f"noise_sigma must be > 0, got {self.noise_sigma}")
        if self.p300_width_ms <= 0:
            raise ParameterError(f"width must be > 0, got {self.p300_width_ms}")


def topography_weights() -> np.ndarray:
    """Bump weight per channel, aligned with CHANNEL_NAMES."""
    return np.array(
        [TOPOGRAPHY.get(name, TOPOGRAPHY_DEFAULT) for name in CHANNEL_NAMES]
    )


def p300_template(params: SubjectParams) -> np.ndarray:
    """Noise-free evoked response, (n_channels, EPOCH_SAMPLES) in microvolts.

    A Gaussian bump in time (peak at p300_latency_ms, p300_width_ms full width
    at half maximum) scaled per channel by the topography weights.
    """
    t_ms = np.arange(EPOCH_SAMPLES) * 1000.0 / SAMPLE_RATE_HZ
    sigma_ms = params.p300_width_ms / _FWHM_PER_SIGMA
    bump = params.p300_amplitude * np.exp(
        -0.5 * ((t_ms - params.p300_latency_ms) / sigma_ms) ** 2
    )
    return topography_weights()[:, None] * bump[None, :]


def generate_epoch(
    params: SubjectParams,
    attended_key: Key,
    flash_code: int,
    rng: np.random.Generator,
    layout: KeyboardLayout | None = None,
) -> EegEpoch:
    """One flash-locked epoch: white noise, plus the template on target flashes.

    Draw order is fixed (noise first, then the lapse coin on target flashes
    only) so a seeded generator reproduces a session exactly.
    """
    layout = layout or KeyboardLayout()
    noise = rng.normal(0.0, params.noise_sigma, (len(CHANNEL_NAMES), EPOCH_SAMPLES))
    is_target = flash_code in layout.codes_for(attended_key)
    data = noise
    if is_target:
        lapsed = params.lapse_prob > 0.0 and rng.random() < params.lapse_prob
        if not lapsed and params.p300_amplitude > 0.0:
            data = noise + p300_template(params)
    return EegEpoch(
        data=data,
        stimulus_code=flash_code,
        label="target" if is_target else "nontarget",
    )


class SyntheticSubject:
    """Stateful wrapper: one seeded generator, one attended key at a time."""

    def __init__(self, params: SubjectParams, layout: KeyboardLayout | None = None):
        self.params = params
        self.layout = layout or KeyboardLayout()
        self.rng = np.random.default_rng(params.seed)

    def epoch_for_flash(self, attended_key: Key, flash_code: int) -> EegEpoch:
        return generate_epoch(
            self.params, attended_key, flash_code, self.rng, self.layout
        )


# ---------------------------------------------------------------------------
# Intention policies
# ---------------------------------------------------------------------------


def _lcp_len(text: str, target: str) -> int:
    n = min(len(text), len(target))
    for i in range(n):
        if text[i] != target[i]:
            return i
    return n


def _is_complete(composed: str, target: str) -> bool:
    return composed == target or composed == target + " "


def _on_track(composed: str, target: str) -> bool:
    """True when composed is a prefix of the target (one trailing space ok)."""
    return (target + " ").startswith(composed)


class CopySpellPolicy:
    """Reproduce a fixed target sentence, greedily using suggestion slots.

    Each call inspects the current composition: a finished target selects En;
    otherwise the slot gaining the most matched characters wins; with no
    useful slot, an off-track text triggers the shortest DC/DW recovery and an
    on-track text gets its next letter or space.
    """

    def __init__(self, target: str, use_suggestions: bool = True):
        target = target.replace("-", " ")
        probe = CompositionState(composed=target)  # validates the alphabet
        if not target or target != " ".join(target.split()):
            raise ParameterError(f"target must be single-spaced words, got {probe.composed!r}")
        self.target = target
        self.use_suggestions = use_suggestions

    def next_key(self, state: CompositionState) -> Key:
        composed = state.composed
        if _is_complete(composed, self.target):
            return Key.function("En")

        if self.use_suggestions:
            slot = self._best_slot(state)
            if slot is not None:
                return slot

        if not _on_track(composed, self.target):
            return self._recovery_key(composed)

        nxt = self.target[len(composed)]
        return Key.function("Sp") if nxt == " " else Key.letter(nxt)

    def _best_slot(self, state: CompositionState) -> Key | None:
        base = _lcp_len(state.composed, self.target)
        best: tuple[int, int] | None = None  # (-gain, slot index)
        for i, text in enumerate(state.slots):
            if not text:
                continue
            candidate = _apply_slot_text(state.composed, text)
            if not _on_track(candidate, self.target):
                continue
            gain = _lcp_len(candidate, self.target) - base
            if gain > 0 and (best is None or (-gain, i) < best):
                best = (-gain, i)
        return None if best is None else Key.slot(best[1])

    def _recovery_key(self, composed: str) -> Key:
        """First key of the cheapest corrective sequence (breadth-first).

        Cost of a candidate sequence = corrective keys + characters still to
        type from the on-track text it reaches; ties prefer fewer corrective
        keys, then DC-first ordering.
        """
        dc, dw = Key.function("DC"), Key.function("DW")
        best: tuple[int, int, int] | None = None  # (total, n_keys, first=0 for DC)
        best_first: Key | None = None
        queue: deque[tuple[str, tuple[Key, ...]]] = deque([(composed, ())])
        seen = {composed}
        while queue:
            text, path = queue.popleft()
            if len(path) >= MAX_RECOVERY_KEYS:
                continue
            for key in (dc, dw):
                nxt = _apply_correction(text, key)
                if nxt in seen:
                    continue
                seen.add(nxt)
                new_path = path + (key,)
                if _on_track(nxt, self.target):
                    remaining = len(self.target) - len(nxt)
                    rank = (
                        len(new_path) + remaining,
                        len(new_path),
                        0 if new_path[0] == dc else 1,
                    )
                    if best is None or rank < best:
                        best, best_first = rank, new_path[0]
                else:
                    queue.append((nxt, new_path))
        return best_first if best_first is not None else dw


def _apply_slot_text(composed: str, suggestion: str) -> str:
    """Composer rule for a slot selection: replace last word, append a space."""
    cut = composed.rfind(" ") + 1
    return composed[:cut] + suggestion + " "


def _apply_correction(composed: str, key: Key) -> str:
    if key.value == "DC":
        return composed[:-1]
    trimmed = composed.rstrip(" ")
    return trimmed[: trimmed.rfind(" ") + 1]


class ScriptedPolicy:
    """Play back a fixed key list; raise once it runs dry."""

    def __init__(self, keys):
        self._keys = deque(keys)

    def next_key(self, state: CompositionState) -> Key:
        if not self._keys:
            raise PolicyExhaustedError("scripted key list exhausted")
        return self._keys.popleft()


@dataclass
class ImprovisePolicy:
    """Freely compose: one seed letter, then take a slot whenever one is shown.

    Stops via En once the composed text holds n_words complete words.  With no
    usable slot the policy closes the current fragment with a space.
    """

    first_letter: str = "I"
    n_words: int = 5
    _started: bool = field(default=False, repr=False)

    def next_key(self, state: CompositionState) -> Key:
        composed = state.composed
        if len(composed.split()) >= self.n_words and composed.endswith(" "):
            return Key.function("En")
        if not composed:
            return Key.letter(self.first_letter)
        for i, text in enumerate(state.slots):
            if text:
                return Key.slot(i)
        return Key.function("Sp")

"""Word suggestions: prompt construction, response parsing, providers.

A provider receives a two-message chat prompt (fixed system instructions
plus the text typed so far) and returns one comma-separated line of
candidate words.  Parsing normalizes that line into at most ten clean
uppercase candidates which the keyboard shows in its ten suggestion slots.
Whether candidates complete the current word or predict the next one is
decided by the text itself: a partial that ends mid-word asks for
completions, a partial ending in a space (or empty) asks for next words.

Three providers ship here: a remote chat-completions client, a
deterministic offline mock backed by a small bigram table, and an oracle
that knows a target sentence (simulation and testing).  The engine wraps a
provider with the freshness contract: on transport failure or timeout the
previous suggestion set is reused and marked stale, never an exception into
the session loop.
"""

from __future__ import annotations

import os
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, replace

import httpx

from .composer import N_SLOTS, last_word
from .errors import ParameterError, ProviderError

API_KEY_ENV_VAR = "SPELLER_API_KEY"
DEFAULT_TIMEOUT_S = 5.0
MAX_CANDIDATES = N_SLOTS

SYSTEM_INSTRUCTIONS = (
    "You are the word-suggestion engine of a brain-computer-interface speller. "
    "The user message contains the sentence typed so far, in uppercase. "
    "If it ends in the middle of a word, reply with up to 10 likely completions "
    "of that word; if it ends after a space or is empty, reply with up to 10 "
    "likely next words. Answer with a single line of candidates separated by "
    "commas, uppercase A-Z words only, no numbering, no punctuation, no prose."
)


@dataclass(frozen=True)
class PromptMessages:
    """The two chat messages sent for one suggestion query."""

    system_text: str
    user_text: str

    def as_chat(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text},
        ]


def build_prompt(partial: str) -> PromptMessages:
    """Prompt for the given composed text; display dashes become spaces."""
    return PromptMessages(SYSTEM_INSTRUCTIONS, partial.replace("-", " "))


def parse_response(raw: str) -> tuple[str, ...]:
    """Normalize a provider reply into clean candidate words.

    Comma-separated fields are trimmed, uppercased and stripped of anything
    outside A-Z and single internal spaces; empties and duplicates drop out;
    at most MAX_CANDIDATES survive in order.
    """
    seen: list[str] = []
    for field in raw.split(","):
        word = re.sub(r"[^A-Z ]", "", field.upper())
        word = " ".join(word.split())
        if word and word not in seen:
            seen.append(word)
        if len(seen) == MAX_CANDIDATES:
            break
    return tuple(seen)


def format_candidates(words: tuple[str, ...] | list[str]) -> str:
    """The canonical reply line; parse_response inverts this for clean lists."""
    return ", ".join(words)


@dataclass(frozen=True)
class SuggestionSet:
    """Ten slot texts (padded with empties) plus where they came from."""

    slots: tuple[str, ...]
    provenance: str          # provider name, "stale" or "empty"
    queried_with: str        # the composed text the query was built from

    def __post_init__(self):
        if len(self.slots) != N_SLOTS:
            raise ParameterError(f"need exactly {N_SLOTS} slots, got {len(self.slots)}")

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(s for s in self.slots if s)

    @property
    def total_chars(self) -> int:
        """Characters across all displayed candidates (spaces included)."""
        return sum(len(s) for s in self.slots)


def _pad(words: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(words[:N_SLOTS]) + ("",) * (N_SLOTS - min(len(words), N_SLOTS))


EMPTY_SUGGESTIONS = SuggestionSet(("",) * N_SLOTS, "empty", "")


class RemoteChatProvider:
    """Chat-completions client for a hosted language model."""

    name = "remote"

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV_VAR, "")
        self._transport = transport
        if not self.api_key:
            raise ProviderError(
                f"no API key: pass one or set the {API_KEY_ENV_VAR} environment variable"
            )

    def fetch(self, messages: PromptMessages, timeout_s: float) -> str:
        payload = {"model": self.model, "messages": messages.as_chat()}
        headers = {"Authorization": f"Bearer {self.api_key}"}
        try:
            with httpx.Client(transport=self._transport, timeout=timeout_s) as client:
                response = client.post(
                    f"{self.base_url}/chat/completions", json=payload, headers=headers
                )
                response.raise_for_status()
                body = response.json()
            return body["choices"][0]["message"]["content"]
        except httpx.TimeoutException as exc:
            raise ProviderError(f"suggestion query timed out after {timeout_s}s") from exc
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderError(f"suggestion query failed: {exc}") from exc


# A deliberately small corpus for the offline mock: everyday first-person
# sentences, enough to give the bigram table sensible next-word statistics.
MOCK_CORPUS = (
    "I WOULD LIKE TO HAVE WATER",
    "I WOULD LIKE TO GO HOME NOW",
    "I WOULD LOVE TO SEE YOU SOON",
    "I WANT TO BUY A NEW PHONE",
    "I WANT TO BE THERE WITH YOU",
    "I WANT TO BRING MY BOOK ALONG",
    "I WANT SOME BREAD AND BUTTER",
    "I NEED TO CALL MY MOM TODAY",
    "I NEED A GLASS OF WATER PLEASE",
    "I HAVE TO FINISH MY WORK FIRST",
    "I HOPE IS NEVER LOST ON US",
    "HOPE IS NEVER LOST",
    "HE HAS GONE TOO FAR AWAY NOW",
    "HE HAS RETURNED HOME TO US",
    "HAVE YOU SEEN THE NEW HOUSE",
    "HOME IS WHERE THE HEART IS",
    "HOW ARE YOU FEELING TODAY",
    "THANK YOU FOR YOUR HELP TODAY",
    "THE WEATHER IS VERY NICE TODAY",
    "THERE ARE SOME APPLES IN THE MARKET",
    "PLEASE TURN ON THE LIGHT",
    "PLEASE TURN OFF THE TELEVISION",
    "CAN YOU HELP ME WITH THIS",
    "CAN YOU GIVE ME THE REMOTE",
    "MY FRIENDS WERE CARING AND LOYAL",
    "HIS FRIENDS WERE VERY SUPPORTIVE",
    "WE WILL TRAVEL BY TRAIN TOMORROW",
    "WATER IS GOOD FOR YOUR HEALTH",
    "WHAT TIME IS THE MEETING TOMORROW",
    "LIFE IS BETTER WITH GOOD FRIENDS",
)

_START = "<s>"


class MockWordPredictor:
    """Deterministic offline provider: bigram counts over a tiny corpus.

    Completion mode ranks lexicon words that strictly extend the current
    fragment; prediction mode ranks words that followed the previous word in
    the corpus, topped up with overall frequent words.  Ordering is by count
    descending, then alphabetically, so a given partial always yields the
    same reply.
    """

    name = "mock"

    def __init__(self, corpus: tuple[str, ...] = MOCK_CORPUS):
        self.unigrams: Counter = Counter()
        self.bigrams: defaultdict[str, Counter] = defaultdict(Counter)
        for sentence in corpus:
            words = sentence.split()
            self.unigrams.update(words)
            for prev, word in zip([_START] + words, words + [None]):
                if word is not None:
                    self.bigrams[prev][word] += 1

    def _ranked(self, counts: Counter) -> list[str]:
        return [w for w, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]

    def _complete(self, fragment: str, prev: str) -> list[str]:
        pool = [w for w in self.unigrams if w.startswith(fragment) and w != fragment]
        following = self.bigrams.get(prev, Counter())
        pool.sort(key=lambda w: (-following[w], -self.unigrams[w], w))
        return pool

    def _predict(self, prev: str) -> list[str]:
        ranked = self._ranked(self.bigrams.get(prev, Counter()))
        for w in self._ranked(self.unigrams):
            if w not in ranked:
                ranked.append(w)
        return ranked

    def fetch(self, messages: PromptMessages, timeout_s: float) -> str:
        text = messages.user_text
        fragment = last_word(text)
        words = text.split()
        if fragment:
            prev = words[-2] if len(words) >= 2 else _START
            candidates = self._complete(fragment, prev)
        else:
            prev = words[-1] if words else _START
            candidates = self._predict(prev)
        return format_candidates(candidates[:MAX_CANDIDATES])


class OracleWordProvider:
    """Knows the target sentence and always offers its next word.

    With completion_only=True it stays silent until at least one letter of
    the word has been typed, so a policy that uses it types exactly the
    first letter plus one selection per word.
    """

    name = "oracle"

    def __init__(self, target: str, completion_only: bool = False):
        self.target_words = target.replace("-", " ").split()
        self.completion_only = completion_only

    def fetch(self, messages: PromptMessages, timeout_s: float) -> str:
        text = messages.user_text
        fragment = last_word(text)
        n_complete = len(text.split()) - (1 if fragment else 0)
        if n_complete >= len(self.target_words):
            return ""
        next_word = self.target_words[n_complete]
        if not fragment:
            return "" if self.completion_only else next_word
        return next_word if next_word.startswith(fragment) else ""


class SuggestionEngine:
    """Provider wrapper holding the last good set for the stale fallback."""

    def __init__(self, provider, timeout_s: float = DEFAULT_TIMEOUT_S):
        self.provider = provider
        self.timeout_s = timeout_s
        self.last: SuggestionSet | None = None

    def get(self, partial: str) -> SuggestionSet:
        """Fresh suggestions for the composed text, or the stale previous set."""
        try:
            raw = self.provider.fetch(build_prompt(partial), self.timeout_s)
        except ProviderError:
            if self.last is not None:
                return replace(self.last, provenance="stale")
            return EMPTY_SUGGESTIONS
        current = SuggestionSet(_pad(parse_response(raw)), self.provider.name, partial)
        self.last = current
        return current


def make_provider(
    kind: str,
    remote_base_url: str = "",
    remote_model: str = "",
    api_key: str | None = None,
    target: str = "",
):
    """Provider factory used by config loading and the CLI."""
    if kind == "mock":
        return MockWordPredictor()
    if kind == "remote":
        if not remote_base_url or not remote_model:
            raise ParameterError("remote provider needs a base URL and a model name")
        return RemoteChatProvider(remote_base_url, remote_model, api_key)
    if kind == "oracle":
        if not target:
            raise ParameterError("oracle provider needs a target sentence")
        return OracleWordProvider(target)
    raise ParameterError(f"unknown provider kind {kind!r}")

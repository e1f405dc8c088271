"""Pluggable text-completion backends.

Three implementations behind one ``complete()`` contract:

* :class:`MockBackend` — a deterministic template generator. The response is a
  pure function of (prompt, sampling seed, profile), so results are stable
  under any call interleaving. Two profiles are supported: ``chat_like`` emits
  short first/second-person messaging turns, ``web_like`` emits longer
  third-person prose. ``vocab_skew`` in [0, 1] controls how much the two
  profiles' content-word distributions overlap (0 = disjoint beyond function
  words, 1 = identical).
* :class:`RecordedBackend` — replays canned responses keyed by the SHA-256 of
  the prompt; used to run real captured completions as fixtures.
* :class:`RemoteBackend` — minimal JSON-over-HTTP completion client with
  bounded retries and timeouts.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import time
from dataclasses import dataclass

import requests


class BackendError(Exception):
    """Base class for completion-backend failures."""


class BackendUnavailable(BackendError):
    pass


class RateLimited(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


@dataclass(frozen=True)
class SamplingParams:
    top_k: int = 40
    temperature: float = 0.2
    max_tokens: int = 512
    seed: int = 0  # consumed by the mock backend only

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    params: SamplingParams = SamplingParams()


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finished: bool = True

    def __post_init__(self):
        if not self.text and self.finished:
            raise ValueError("empty response text requires finished=False")


# ---------------------------------------------------------------------------
# Mock profile word pools. The three content pools are pairwise disjoint and
# disjoint from the function words; `_check_pools` below enforces this.
# ---------------------------------------------------------------------------

FUNCTION_WORDS = (
    "the", "a", "to", "and", "i", "you", "it", "is", "that", "was", "for",
    "on", "are", "with", "they", "be", "at", "this", "have", "we", "not",
    "but", "my", "your", "so", "what", "me", "do", "can", "will", "about",
    "if", "just", "how", "when", "there", "all", "of", "in", "he", "she",
    "her", "his", "our", "them",
)

CHAT_WORDS = (
    "hey", "dinner", "movie", "tonight", "tomorrow", "weekend", "party",
    "pizza", "coffee", "lunch", "birthday", "beach", "mall", "game",
    "practice", "homework", "school", "ride", "home", "late", "fun",
    "funny", "cute", "sweet", "awesome", "cool", "amazing", "excited",
    "tired", "busy", "happy", "sorry", "miss", "love", "wanna", "gonna",
    "chill", "hang", "meet", "call", "text", "send", "pics", "photos",
    "selfie", "dress", "shoes", "hair", "gym", "run", "dog", "puppy",
    "kitten", "snack", "cake", "cookies", "tacos", "sushi", "burger",
    "fries", "soda", "playlist", "song", "concert", "tickets", "show",
    "episode", "series", "stream", "sleepover", "roadtrip", "sunset",
    "rain", "snow", "storm", "chilly", "warm", "crazy", "weird", "boring",
    "sick", "better", "soon", "later", "maybe", "totally", "literally",
    "honestly", "seriously", "kidding", "promise", "guess", "bet", "deal",
    "plan", "plans", "surprise", "gift", "hug", "goodnight", "class",
    "teacher", "grade", "crush", "bestie", "vibes", "lol", "omg", "yay",
    "nope", "yep", "okay", "please", "thanks",
)

WEB_WORDS = (
    "company", "market", "industry", "business", "services", "products",
    "customers", "technology", "software", "platform", "development",
    "research", "analysis", "report", "article", "website", "content",
    "design", "project", "program", "system", "network", "security",
    "data", "database", "server", "cloud", "digital", "online",
    "marketing", "strategy", "growth", "revenue", "investment", "finance",
    "economy", "economic", "government", "policy", "public", "national",
    "global", "international", "community", "organization", "management",
    "leadership", "employees", "training", "education", "university",
    "students", "science", "study", "results", "percent", "increase",
    "decrease", "quarter", "annual", "officials", "statement",
    "announcement", "conference", "committee", "board", "director",
    "president", "minister", "election", "campaign", "region", "district",
    "population", "infrastructure", "construction", "manufacturing",
    "equipment", "vehicle", "transport", "energy", "solar", "climate",
    "environment", "resources", "agriculture", "tourism", "hotel",
    "restaurant", "property", "estate", "insurance", "legal", "court",
    "justice", "health", "hospital", "medical", "patients", "treatment",
    "vaccine", "league", "season", "championship", "players", "defense",
    "founded", "launched", "published", "according", "experts", "sector",
    "million", "billion",
)

SHARED_WORDS = (
    "time", "day", "week", "month", "year", "morning", "night", "today",
    "people", "person", "friend", "friends", "family", "kids", "parents",
    "brother", "sister", "baby", "house", "room", "kitchen", "garden",
    "door", "window", "car", "bike", "bus", "train", "plane", "trip",
    "travel", "city", "town", "village", "street", "corner", "river",
    "lake", "mountain", "forest", "field", "farm", "animal", "bird",
    "fish", "horse", "tree", "flower", "grass", "sky", "sun", "moon",
    "star", "weather", "summer", "winter", "spring", "autumn", "water",
    "fire", "air", "earth", "food", "bread", "fruit", "apple", "orange",
    "tea", "milk", "cheese", "rice", "soup", "salt", "sugar", "money",
    "price", "work", "job", "office", "shop", "store", "book", "paper",
    "letter", "news", "story", "picture", "color", "red", "blue", "green",
    "white", "black", "light", "dark", "big", "small", "new", "old",
    "good", "bad", "long", "short", "fast", "slow", "hot", "cold", "open",
    "full", "empty", "first", "last", "next", "best", "real", "true",
    "nice", "kind", "quiet", "loud", "clean", "easy", "hard",
)

RECEIVER_POOL = (
    "Mom", "Dad", "Alex", "Sam", "Grandma", "Jordan", "Taylor", "Chris",
    "your family", "your best friend", "your coworker", "Coach",
    "Aunt Lisa", "Uncle Joe", "Riley", "your neighbor", "Max", "Emma",
    "your roommate", "your cousin",
)

_CHAT_OPENERS = ("hey", "i", "you", "we", "can", "do", "so", "what", "ok")
_WEB_OPENERS = ("the", "a", "this", "in", "officials", "researchers", "experts", "according")

_TOPIC_TEMPLATES = (
    "the {} at the {}",
    "plans for the {} this {}",
    "i can't wait to see the {}",
    "asking about the {} and the {}",
    "the new {} we talked about",
    "what happened with the {}",
    "getting a {} for the {}",
)

# Prompt-family cues; these mirror the instruction sentences of the prompt
# templates in fllab.synth.
_CUE_FILTER = "Give a score of 0 or 1"
_CUE_RECEIVERS = "Generate a list of potential message receivers"
_CUE_TOPICS = "Generate a list of potential message topics"
_CUE_CONVERSATION = "Generate the conversation between you and your message receiver"
_CUE_TRANSFORM = "Convert the following article to a conversation"

_RECEIVER_IN_PROMPT_RE = re.compile(r"APP to message (.+?) on your mobile phone")
_TOPIC_IN_PROMPT_RE = re.compile(r"following topic: (.*?)(?:\.\s*Generate the conversation|$)", re.S)
_WORD_RE = re.compile(r"[a-z']+")


def _check_pools():
    pools = {"function": FUNCTION_WORDS, "chat": CHAT_WORDS, "web": WEB_WORDS, "shared": SHARED_WORDS}
    for name, pool in pools.items():
        if len(set(pool)) != len(pool):
            raise AssertionError(f"duplicate words in {name} pool")
    names = list(pools)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            overlap = set(pools[a]) & set(pools[b])
            if overlap:
                raise AssertionError(f"pools {a}/{b} overlap: {sorted(overlap)[:5]}")


_check_pools()

_CHAT_SET = frozenset(CHAT_WORDS)
_WEB_SET = frozenset(WEB_WORDS)
_SHARED_SET = frozenset(SHARED_WORDS)
_FUNCTION_SET = frozenset(FUNCTION_WORDS)


class MockBackend:
    """Deterministic completion generator for tests and desk-scale simulation.

    The random stream for each call is seeded from a hash of the prompt, the
    request seed, and the profile, never from call order, so concurrent use
    cannot change any response.
    """

    def __init__(self, style: str = "chat_like", vocab_skew: float = 1.0, keep_threshold: float = 0.5):
        if style not in ("chat_like", "web_like"):
            raise ValueError("style must be 'chat_like' or 'web_like'")
        if not 0.0 <= vocab_skew <= 1.0:
            raise ValueError("vocab_skew must be in [0, 1]")
        self.style = style
        self.vocab_skew = vocab_skew
        self.keep_threshold = keep_threshold

    # -- sampling helpers ---------------------------------------------------

    def _rng(self, req: CompletionRequest) -> random.Random:
        h = hashlib.blake2b(digest_size=8)
        h.update(req.prompt.encode("utf-8"))
        h.update(f"|{req.params.seed}|{self.style}|{self.vocab_skew:.6f}".encode())
        return random.Random(int.from_bytes(h.digest(), "big"))

    def _content_word(self, rng: random.Random, top_k: int) -> str:
        own = CHAT_WORDS if self.style == "chat_like" else WEB_WORDS
        pool = SHARED_WORDS if rng.random() < self.vocab_skew else own
        pool = pool[: max(top_k, 8)]
        # Zipf-ish weights keep word frequencies realistic and rank-stable.
        weights = [1.0 / (i + 2) for i in range(len(pool))]
        return rng.choices(pool, weights=weights, k=1)[0]

    def _sentence(self, rng: random.Random, top_k: int, inject: list | None = None) -> str:
        chat = self.style == "chat_like"
        length = rng.randint(4, 9) if chat else rng.randint(14, 26)
        openers = _CHAT_OPENERS if chat else _WEB_OPENERS
        content_p = 0.45 if chat else 0.55
        words = [rng.choice(openers)]
        inject = list(inject or [])
        while len(words) < length:
            if inject and rng.random() < 0.5:
                words.append(inject.pop(0))
            elif rng.random() < content_p:
                words.append(self._content_word(rng, top_k))
            else:
                words.append(rng.choice(FUNCTION_WORDS))
        end = rng.choice((".", "!", "?")) if chat else "."
        return words[0].capitalize() + " " + " ".join(words[1:]) + end

    def _list_items(self, rng: random.Random, req: CompletionRequest, items: list) -> str:
        # Inject an occasional duplicate so downstream dedup gets exercised.
        if len(items) >= 2 and rng.random() < 0.2:
            items = items + [rng.choice(items)]
        marker = rng.choice(("num", "dash", "plain"))
        lines = []
        for i, item in enumerate(items):
            if marker == "num":
                lines.append(f"{i + 1}. {item}")
            elif marker == "dash":
                lines.append(f"- {item}")
            else:
                lines.append(item)
        return "\n".join(lines)

    @staticmethod
    def _n_items(rng: random.Random, temperature: float) -> int:
        # Hotter sampling yields longer candidate lists.
        return max(3, 3 + round(10 * temperature) + rng.randint(0, 2))

    # -- prompt families ----------------------------------------------------

    def _filter_response(self, rng: random.Random, prompt: str) -> str:
        body = prompt.split(_CUE_FILTER, 1)[1]
        words = _WORD_RE.findall(body.lower())
        chatty = sum(1 for w in words if w in _CHAT_SET or w in _SHARED_SET)
        webby = sum(1 for w in words if w in _WEB_SET)
        affinity = (chatty + 1) / (chatty + webby + 2)
        score = 1 if affinity >= self.keep_threshold else 0
        style = rng.choice(("bare", "label", "prose"))
        if style == "label":
            return f"Score: {score}"
        if style == "prose":
            return f"I would give this a {score}."
        return str(score)

    def _receivers_response(self, rng: random.Random, req: CompletionRequest) -> str:
        n = min(self._n_items(rng, req.params.temperature), len(RECEIVER_POOL))
        return self._list_items(rng, req, rng.sample(RECEIVER_POOL, n))

    def _topics_response(self, rng: random.Random, req: CompletionRequest) -> str:
        n = self._n_items(rng, req.params.temperature)
        topics = []
        for _ in range(n):
            t = rng.choice(_TOPIC_TEMPLATES)
            fills = [self._content_word(rng, req.params.top_k) for _ in range(t.count("{}"))]
            topics.append(t.format(*fills))
        return self._list_items(rng, req, topics)

    def _conversation_response(self, rng: random.Random, req: CompletionRequest, inject: list) -> str:
        m = _RECEIVER_IN_PROMPT_RE.search(req.prompt)
        label = "Friend"
        if m:
            raw = m.group(1).strip()
            raw = re.sub(r"^(your|my|the)\s+", "", raw, flags=re.I)
            label = raw.split(",")[0].strip().title() or "Friend"
        n_turns = rng.randint(4, 9)
        lines = []
        for i in range(n_turns):
            speaker = "Me" if i % 2 == 0 else label
            n_sent = 1 if rng.random() < 0.7 else 2
            sents = [self._sentence(rng, req.params.top_k, inject=inject if i == 0 else None)]
            for _ in range(n_sent - 1):
                sents.append(self._sentence(rng, req.params.top_k))
            lines.append(f"**{speaker}:** " + " ".join(sents))
        return "\n".join(lines)

    def _prose_response(self, rng: random.Random, req: CompletionRequest) -> str:
        n = rng.randint(2, 4)
        return " ".join(self._sentence(rng, req.params.top_k) for _ in range(n))

    # -- public API ---------------------------------------------------------

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        rng = self._rng(req)
        prompt = req.prompt
        if _CUE_FILTER in prompt:
            text = self._filter_response(rng, prompt)
        elif _CUE_RECEIVERS in prompt:
            text = self._receivers_response(rng, req)
        elif _CUE_TOPICS in prompt:
            text = self._topics_response(rng, req)
        elif _CUE_CONVERSATION in prompt:
            topic_m = _TOPIC_IN_PROMPT_RE.search(prompt)
            inject = _content_words_of(topic_m.group(1)) if topic_m else []
            text = self._conversation_response(rng, req, inject)
        elif _CUE_TRANSFORM in prompt:
            article = prompt.split(_CUE_TRANSFORM, 1)[1]
            article = article.split("Include as many details as possible.", 1)[-1]
            inject = _content_words_of(article)
            text = self._conversation_response(rng, req, inject)
        else:
            text = self._prose_response(rng, req)
        return _truncate(text, req.params.max_tokens)


_CHAT_SET = frozenset(CHAT_WORDS)
_WEB_SET = frozenset(WEB_WORDS)
_SHARED_SET = frozenset(SHARED_WORDS)
_FUNCTION_SET = frozenset(FUNCTION_WORDS)


def _content_words_of(text: str, limit: int = 6) -> list:
    """Distinct non-function words of a text, in first-seen order."""
    out = []
    for w in _WORD_RE.findall(text.lower()):
        if w not in _FUNCTION_SET and len(w) > 2 and w not in out:
            out.append(w)
        if len(out) >= limit:
            break
    return out


def _truncate(text: str, max_tokens: int) -> CompletionResponse:
    toks = text.split(" ")
    if len(toks) <= max_tokens:
        return CompletionResponse(text=text, finished=True)
    return CompletionResponse(text=" ".join(toks[:max_tokens]), finished=False)


def mock_profile(style: str, vocab_skew: float = 1.0) -> MockBackend:
    """Build a deterministic mock backend with the given style profile."""
    return MockBackend(style=style, vocab_skew=vocab_skew)


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class RecordedBackend:
    """Replays recorded completions keyed by SHA-256 of the exact prompt text.

    Fixture format: a JSON object mapping the hex prompt hash to
    ``{"text": <response>}``.
    """

    def __init__(self, responses: dict | None = None):
        self._responses = dict(responses or {})

    @classmethod
    def from_file(cls, path) -> "RecordedBackend":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f))

    def record(self, prompt: str, text: str) -> None:
        self._responses[prompt_key(prompt)] = {"text": text}

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self._responses, f, sort_keys=True, ensure_ascii=False, indent=1)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        key = prompt_key(req.prompt)
        entry = self._responses.get(key)
        if entry is None:
            raise BackendUnavailable(f"no recorded response for prompt hash {key[:12]}…")
        return CompletionResponse(text=entry["text"], finished=True)


class RemoteBackend:
    """JSON-over-HTTP completion client.

    Wire format: POST with body ``{"prompt", "top_k", "temperature",
    "max_tokens"}``; the endpoint answers ``{"text": <completion>}``. Every
    call resolves within ``timeout * (max_retries + 1)`` seconds (plus
    backoff sleeps) or raises.
    """

    RETRYABLE_STATUS = (429, 500, 502, 503, 504)

    def __init__(self, url: str, *, auth_header: tuple | None = None, timeout: float = 30.0,
                 max_retries: int = 3, backoff: float = 0.5, sleep=time.sleep):
        self.url = url
        self.auth_header = auth_header
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._sleep = sleep

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        body = {
            "prompt": req.prompt,
            "top_k": req.params.top_k,
            "temperature": req.params.temperature,
            "max_tokens": req.params.max_tokens,
        }
        headers = {}
        if self.auth_header:
            headers[self.auth_header[0]] = self.auth_header[1]
        last_err: BackendError | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
            except requests.RequestException as e:
                last_err = BackendUnavailable(f"request failed: {e}")
                continue
            if resp.status_code == 429:
                last_err = RateLimited(f"rate limited by {self.url}")
                continue
            if resp.status_code in self.RETRYABLE_STATUS:
                last_err = BackendUnavailable(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendUnavailable(f"unexpected status {resp.status_code}")
            try:
                payload = resp.json()
                text = payload["text"]
            except (ValueError, KeyError, TypeError) as e:
                raise MalformedResponse(f"bad completion payload: {e}") from e
            if not isinstance(text, str):
                raise MalformedResponse("completion 'text' is not a string")
            if not text:
                return CompletionResponse(text="", finished=False)
            return CompletionResponse(text=text, finished=True)
        assert last_err is not None
        raise last_err

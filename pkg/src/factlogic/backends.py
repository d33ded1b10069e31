"""Answer sources for rendered questions.

Three kinds of backend sit behind one interface:

* ``open`` - a served model exposing the pre-normalization scores of the
  affirmative/negative answer tokens; replies ``{"v_yes": x, "v_no": y}``.
* ``closed`` - a served model exposing only decoded samples; replies
  ``{"samples": [<first decoded token>, ...]}`` with exactly ``m`` entries.
  The client counts case-insensitive exact matches of each token against
  the verbalizer pair ("Yes"/"No" by default); anything else is ignored,
  which reduces the usable count.
* ``mock`` - fully offline: answers come from a line-delimited fixture file
  and, for questions the fixture does not list, from a seeded hash rule.
  Bit-deterministic given (fixture, seed).

Requests are JSON over HTTP: ``{"question", "suffix", "mode", "model", ...}``.
Credentials only ever come from the environment (FACTLOGIC_API_KEY).

The claim-extraction prompt used to pull check-worthy statements out of a
message also lives here, next to the transport that sends it.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BackendError, ConfigError, ProtocolError

CLAIM_PROMPT = (
    "To verify the MESSAGE, what are the critical claims related to this "
    "message we need to verify? Please use the following format to answer. "
    "If there are no important claims, answer “not applicable”.\n"
    "\n"
    "MESSAGE:\n"
    "CLAIM:\n"
    "CLAIM:\n"
    "\n"
    "MESSAGE: $MESSAGE$."
)

QUESTION_GENERATION_PROMPT = (
    "Write some questions that can be used to determine whether a news "
    "report is misinformation. The questions should be answerable by large "
    "language models in a close-book situation without requiring additional "
    "information. Please format each question using the <s> and </s> tags, "
    "such as <s>A question</s>."
)

DEFAULT_ANSWER_SUFFIX = "Yes or No? Response:"

ENV_API_KEY = "FACTLOGIC_API_KEY"
ENV_ENDPOINT = "FACTLOGIC_ENDPOINT"


@dataclass(frozen=True)
class OpenLogits:
    """Pre-normalization scores for the affirmative and negative tokens."""

    v_yes: float
    v_no: float


@dataclass(frozen=True)
class ClosedCounts:
    """Counts of affirmative/negative answers over decoded samples."""

    m_yes: int
    m_no: int


YesNoEvidence = OpenLogits | ClosedCounts


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"  # mock | open | closed
    endpoint: str = ""
    model: str = ""
    sample_budget: int = 10  # m, closed backends only
    timeout: float = 30.0
    answer_suffix: str = DEFAULT_ANSWER_SUFFIX
    # Verbalizer hook: the token pair counted as affirmative/negative.
    verbalizer: tuple[str, str] = ("Yes", "No")
    temperature: float | None = None  # forwarded for sampled decodes
    fixture_path: str | None = None  # mock only
    seed: int = 0  # mock hash rule

    def __post_init__(self):
        if self.kind not in ("mock", "open", "closed"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "closed" and self.sample_budget < 1:
            raise ConfigError("sample_budget must be >= 1 for closed backends")


def question_hash(question: str) -> str:
    """Stable identifier for a question, used by fixtures and caches."""
    return hashlib.sha256(question.encode("utf-8")).hexdigest()


class MockBackend:
    """Deterministic offline backend driven by a fixture file.

    Fixture records are JSON lines shaped ``{"question": ..., "answer": ...}``
    or ``{"question_hash": ..., "answer": ...}``. Answers may be
    ``{"v_yes", "v_no"}``, ``{"m_yes", "m_no"}``, ``{"text": ...}`` for
    free-form prompts, or ``{"claims": [...]}`` as a shorthand for a
    CLAIM-formatted reply. Questions not covered by the fixture get counts
    from a seeded hash of (seed, question) and never touch the network.
    """

    kind = "mock"

    def __init__(self, fixture_path: str | Path | None = None, seed: int = 0, sample_budget: int = 10):
        self.seed = seed
        self.sample_budget = sample_budget
        self._fixture: dict[str, dict] = {}
        if fixture_path is not None:
            path = Path(fixture_path)
            if not path.exists():
                raise FileNotFoundError(f"fixture file not found: {path}")
            for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    answer = record["answer"]
                    key = record["question_hash"] if "question_hash" in record else question_hash(record["question"])
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ConfigError(f"{path}:{lineno}: invalid fixture record: {exc}") from exc
                self._fixture[key] = answer

    def _hash_counts(self, question: str) -> ClosedCounts:
        digest = hashlib.sha256(f"{self.seed}:{question}".encode("utf-8")).digest()
        m_yes = int.from_bytes(digest[:8], "big") % (self.sample_budget + 1)
        return ClosedCounts(m_yes=m_yes, m_no=self.sample_budget - m_yes)

    def yes_no(self, question: str) -> YesNoEvidence:
        answer = self._fixture.get(question_hash(question))
        if answer is None:
            return self._hash_counts(question)
        if "v_yes" in answer and "v_no" in answer:
            return OpenLogits(v_yes=float(answer["v_yes"]), v_no=float(answer["v_no"]))
        if "m_yes" in answer and "m_no" in answer:
            return ClosedCounts(m_yes=int(answer["m_yes"]), m_no=int(answer["m_no"]))
        raise ConfigError(f"fixture answer for {question[:60]!r} has no usable fields")

    def complete(self, prompt: str) -> str:
        answer = self._fixture.get(question_hash(prompt))
        if answer is None:
            return "not applicable"
        if "text" in answer:
            return str(answer["text"])
        if "claims" in answer:
            return "\n".join(f"CLAIM: {claim}" for claim in answer["claims"]) or "not applicable"
        raise ConfigError("fixture answer for a prompt needs 'text' or 'claims'")


class HttpBackend:
    """JSON-over-HTTP client for open and closed answer servers."""

    def __init__(self, config: BackendConfig):
        if config.kind not in ("open", "closed"):
            raise ConfigError(f"HttpBackend cannot serve kind {config.kind!r}")
        endpoint = config.endpoint or os.environ.get(ENV_ENDPOINT, "")
        if not endpoint:
            raise ConfigError("backend endpoint missing (flag or FACTLOGIC_ENDPOINT)")
        self.config = config
        self.endpoint = endpoint
        self.kind = config.kind

    def _post(self, payload: dict, question: str) -> dict:
        body = json.dumps(payload).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(ENV_API_KEY)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        request = urllib.request.Request(self.endpoint, data=body, headers=headers)
        last_error: Exception | None = None
        # One retry on transport failure; cached queries upstream make
        # silent retry storms both useless and count-skewing.
        for _ in range(2):
            try:
                with urllib.request.urlopen(request, timeout=self.config.timeout) as reply:
                    raw = reply.read().decode("utf-8")
                break
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                last_error = exc
        else:
            raise BackendError(f"backend unreachable: {last_error}", question=question)
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"backend reply is not valid JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise ProtocolError("backend reply must be a JSON object")
        return parsed

    def yes_no(self, question: str) -> YesNoEvidence:
        mode = "logits" if self.kind == "open" else "samples"
        payload: dict = {
            "question": question,
            "suffix": self.config.answer_suffix,
            "mode": mode,
            "model": self.config.model,
        }
        if self.kind == "closed":
            payload["m"] = self.config.sample_budget
            if self.config.temperature is not None:
                payload["temperature"] = self.config.temperature
        reply = self._post(payload, question)
        if self.kind == "open":
            if "v_yes" not in reply or "v_no" not in reply:
                raise ProtocolError("open backend must supply both token scores")
            return OpenLogits(v_yes=float(reply["v_yes"]), v_no=float(reply["v_no"]))
        samples = reply.get("samples")
        if not isinstance(samples, list):
            raise ProtocolError("closed backend must supply a 'samples' list")
        if len(samples) != self.config.sample_budget:
            raise ProtocolError(
                f"expected {self.config.sample_budget} samples, got {len(samples)}"
            )
        yes_token, no_token = (t.lower() for t in self.config.verbalizer)
        m_yes = m_no = 0
        for token in samples:
            token = str(token).strip().lower()
            if token == yes_token:
                m_yes += 1
            elif token == no_token:
                m_no += 1
        return ClosedCounts(m_yes=m_yes, m_no=m_no)

    def complete(self, prompt: str) -> str:
        reply = self._post({"prompt": prompt, "mode": "complete", "model": self.config.model}, prompt)
        if "text" not in reply:
            raise ProtocolError("completion reply must carry a 'text' field")
        return str(reply["text"])


Backend = MockBackend | HttpBackend


def make_backend(config: BackendConfig) -> Backend:
    if config.kind == "mock":
        return MockBackend(
            fixture_path=config.fixture_path,
            seed=config.seed,
            sample_budget=config.sample_budget,
        )
    return HttpBackend(config)


def mock_backend(fixture_path: str | Path | None, seed: int = 0, sample_budget: int = 10) -> MockBackend:
    return MockBackend(fixture_path=fixture_path, seed=seed, sample_budget=sample_budget)


def query_yes_no(question: str, config: BackendConfig) -> YesNoEvidence:
    """One-shot convenience wrapper; long runs should hold a backend handle."""
    if not question:
        raise ValueError("question must be non-empty")
    return make_backend(config).yes_no(question)


_CLAIM_LINE = re.compile(r"^\s*CLAIM:\s*(.*\S)\s*$", re.IGNORECASE)


def parse_claims(reply: str) -> list[str]:
    """Pull CLAIM-prefixed lines out of a reply; 'not applicable' means none."""
    stripped = reply.strip().strip('"“”').rstrip(".").strip().lower()
    if stripped == "not applicable":
        return []
    claims = []
    for line in reply.splitlines():
        match = _CLAIM_LINE.match(line)
        if match:
            claims.append(match.group(1))
    return claims


def extract_claims(text: str, backend_or_config: Backend | BackendConfig) -> list[str]:
    """Ask the backend for the check-worthy claims inside ``text``."""
    if not text:
        raise ValueError("text must be non-empty")
    backend = (
        make_backend(backend_or_config)
        if isinstance(backend_or_config, BackendConfig)
        else backend_or_config
    )
    prompt = CLAIM_PROMPT.replace("$MESSAGE$", text)
    return parse_claims(backend.complete(prompt))

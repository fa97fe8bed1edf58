"""Escape advisors: anything that turns a prompt into a reply text.

The engine only ever calls ``suggest(prompt) -> str``. Transport problems are
raised as :class:`AdvisorError` and cost the engine one retry.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Iterable, Optional, Protocol, Union

import httpx

from .ui import ActionSpace, InteractionType

if TYPE_CHECKING:
    from .escape import Prompt
    from .simulator.model import ScreenDef

log = logging.getLogger(__name__)

API_KEY_ENV = "TARPIT_ESCAPE_API_KEY"
SYSTEM_MESSAGE = (
    "You help an automated GUI tester escape screens it is stuck on. "
    "Answer with one action id from the list you are given."
)


class AdvisorError(RuntimeError):
    """The advisor could not produce a reply (timeout, HTTP error, bad body)."""


class AdvisorTimeout(AdvisorError):
    pass


class AdvisorConfigError(ValueError):
    """The advisor is misconfigured (missing endpoint or key)."""


class Advisor(Protocol):
    name: str

    def suggest(self, prompt: "Prompt") -> str: ...


def declared_escape_ids(space: ActionSpace, screen: "ScreenDef") -> list[int]:
    """Action ids in ``space`` that correspond to the screen's declared escapes."""
    ids = []
    for event, src in zip(space.events, space.sources):
        for wid, kind in screen.escapes:
            if event.type is not kind:
                continue
            if kind is InteractionType.BACK and (wid is None or (src is not None and src.widget_id == wid)):
                ids.append(event.action_id)
                break
            if src is not None and src.widget_id == wid:
                ids.append(event.action_id)
                break
    return ids


def oracle_suggest(
    prompt: "Prompt",
    screen: "ScreenDef",
    epsilon: float = 0.0,
    rng: Optional[random.Random] = None,
) -> str:
    space = prompt.space
    if epsilon > 0.0:
        rng = rng or random.Random(0)
        if rng.random() < epsilon:
            return f"Action ID: {rng.randrange(len(space))}"
    ids = declared_escape_ids(space, screen)
    if not ids:
        return f"Action ID: {space.back_id}"
    fresh = [i for i in ids if i not in prompt.failed_ids]
    return f"Action ID: {min(fresh or ids)}"


class OracleAdvisor:
    """Answers from the simulator's declared escape actions.

    ``screen_truth`` is wired by the harness (it reads the runtime's current
    screen), so the engine itself never sees ground truth. ``epsilon`` is the
    probability of answering a uniformly random id instead.
    """

    def __init__(
        self,
        screen_truth: Callable[[], "ScreenDef"],
        epsilon: float = 0.0,
        seed: int = 0,
    ) -> None:
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"noise rate must lie in [0, 1], got {epsilon}")
        self.name = "oracle" if epsilon == 0 else f"oracle(eps={epsilon})"
        self.screen_truth = screen_truth
        self.epsilon = epsilon
        self.rng = random.Random(seed)

    def suggest(self, prompt: "Prompt") -> str:
        return oracle_suggest(prompt, self.screen_truth(), self.epsilon, self.rng)


class ScriptedAdvisor:
    """Replays canned replies in order, repeating the last one forever.

    An exception instance in the script is raised instead of returned.
    """

    def __init__(self, responses: Iterable[Union[str, Exception]], name: str = "scripted") -> None:
        self.responses = list(responses)
        if not self.responses:
            raise ValueError("scripted advisor needs at least one response")
        self.name = name
        self.calls = 0

    def suggest(self, prompt: "Prompt") -> str:
        reply = self.responses[min(self.calls, len(self.responses) - 1)]
        self.calls += 1
        if isinstance(reply, Exception):
            raise reply
        return reply


class HttpChatAdvisor:
    """Chat-completions client: one request per suggestion, no streaming."""

    def __init__(
        self,
        endpoint: Optional[str],
        model: str = "gpt-4o",
        api_key: Optional[str] = None,
        timeout: float = 30.0,
        temperature: float = 0.0,
        client: Optional[httpx.Client] = None,
    ) -> None:
        if not endpoint:
            raise AdvisorConfigError("the http advisor needs an endpoint (--llm-endpoint)")
        api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not api_key:
            raise AdvisorConfigError(f"the http advisor needs an API key in ${API_KEY_ENV}")
        self.name = f"http:{model}"
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.temperature = temperature
        self._client = client or httpx.Client(timeout=timeout)

    def request_body(self, prompt: "Prompt") -> dict:
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": SYSTEM_MESSAGE},
                {"role": "user", "content": prompt.text},
            ],
            "temperature": self.temperature,
        }

    def suggest(self, prompt: "Prompt") -> str:
        headers = {"Authorization": f"Bearer {self.api_key}"}
        try:
            resp = self._client.post(
                self.endpoint, json=self.request_body(prompt), headers=headers, timeout=self.timeout
            )
        except httpx.TimeoutException as exc:
            raise AdvisorTimeout(f"advisor request timed out after {self.timeout}s") from exc
        except httpx.HTTPError as exc:
            raise AdvisorError(f"advisor request failed: {exc}") from exc
        if not 200 <= resp.status_code < 300:
            raise AdvisorError(f"advisor returned HTTP {resp.status_code}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise AdvisorError("advisor response has no choices[0].message.content") from exc
        if not isinstance(content, str):
            raise AdvisorError("advisor message content is not a string")
        return content

    def close(self) -> None:
        self._client.close()


def prompt_key(prompt: "Prompt") -> str:
    return hashlib.sha256(prompt.text.encode("utf-8")).hexdigest()


class ReplayAdvisor:
    """Cassette-backed advisor keyed by the SHA-256 of the prompt text.

    With an ``inner`` advisor, unknown prompts are forwarded and the reply is
    recorded; without one, unknown prompts are a transport error.
    """

    def __init__(self, cassette: Union[str, Path], inner: Optional[Advisor] = None) -> None:
        self.path = Path(cassette)
        self.inner = inner
        self.name = f"replay:{self.path.name}"
        self.entries: dict[str, str] = {}
        if self.path.exists():
            self.entries = json.loads(self.path.read_text())

    def suggest(self, prompt: "Prompt") -> str:
        key = prompt_key(prompt)
        if key in self.entries:
            return self.entries[key]
        if self.inner is None:
            raise AdvisorError(f"prompt {key[:12]} is not in cassette {self.path}")
        reply = self.inner.suggest(prompt)
        self.entries[key] = reply
        self.save()
        return reply

    def save(self) -> None:
        self.path.write_text(json.dumps(self.entries, indent=2, sort_keys=True) + "\n")

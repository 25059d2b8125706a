"""Selective prompt adapter: caption-frequency scoring of objects.

Fits per-prompt answer-frequency distributions on normal training
detections, selects the operating prompt as the one whose answers are most
concentrated (minimum entropy), and scores an object by the rarity of its
answer under that distribution: score = 1 - p_hat(answer). Laplace smoothing
reserves one bucket for answers never seen in training, so unseen answers
always score strictly higher than any seen one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from vadkit._util import canonical_json, read_json, write_text
from vadkit.dataset import Detection
from vadkit.errors import SpaError


@dataclass(frozen=True)
class Prompt:
    prompt_id: str
    text: str


@dataclass
class PromptPool:
    prompts: list[Prompt]

    def __post_init__(self) -> None:
        if not self.prompts:
            raise SpaError("prompt pool must be non-empty")
        ids = [p.prompt_id for p in self.prompts]
        if len(set(ids)) != len(ids):
            raise SpaError("duplicate prompt_id in pool")

    @classmethod
    def from_raw(cls, raw: list[dict]) -> "PromptPool":
        return cls([Prompt(p["prompt_id"], p.get("text", "")) for p in raw])

    def ids(self) -> list[str]:
        return [p.prompt_id for p in self.prompts]


def normalize_token(token: str) -> str:
    return token.strip().lower()


@dataclass
class AnswerDistribution:
    """Empirical answer counts for one prompt, with Laplace smoothing.

    Smoothed probability of an answer a:

        p_hat(a) = (count(a) + alpha) / (total + alpha * (V + 1))

    where V is the observed vocabulary size; the +1 reserves an unseen
    bucket, so probabilities over observed answers plus that bucket sum to 1.
    """

    prompt_id: str
    counts: dict[str, int]
    alpha: float = 1.0
    total: int = field(init=False)

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise SpaError(f"alpha must be >= 0, got {self.alpha}")
        self.total = sum(self.counts.values())

    @property
    def vocabulary_size(self) -> int:
        return len(self.counts)

    def probability(self, answer: str) -> float:
        denom = self.total + self.alpha * (self.vocabulary_size + 1)
        return (self.counts.get(answer, 0) + self.alpha) / denom

    def unseen_probability(self) -> float:
        denom = self.total + self.alpha * (self.vocabulary_size + 1)
        return self.alpha / denom


def fit_distribution(
    detections: list[Detection],
    prompt_id: str,
    alpha: float = 1.0,
    normalize: bool = True,
) -> AnswerDistribution:
    """Count answers for one prompt over training detections.

    Every detection must carry an answer for the prompt; an empty training
    set is rejected.
    """
    if not detections:
        raise SpaError(f"cannot fit distribution for '{prompt_id}': no training detections")
    counts: dict[str, int] = {}
    for i, det in enumerate(detections):
        if prompt_id not in det.answers:
            raise SpaError(
                f"detection {i} (frame {det.frame}) has no answer for prompt '{prompt_id}'"
            )
        token = det.answers[prompt_id]
        if normalize:
            token = normalize_token(token)
        counts[token] = counts.get(token, 0) + 1
    return AnswerDistribution(prompt_id=prompt_id, counts=counts, alpha=alpha)


def entropy(dist: AnswerDistribution) -> float:
    """Shannon entropy in bits over the smoothed support (observed + unseen bucket)."""
    if dist.total < 1:
        raise SpaError("entropy of an empty distribution")
    acc = 0.0
    for answer in dist.counts:
        p = dist.probability(answer)
        if p > 0.0:
            acc -= p * math.log2(p)
    p_unseen = dist.unseen_probability()
    if p_unseen > 0.0:
        acc -= p_unseen * math.log2(p_unseen)
    return acc


def select_prompt(
    pool: PromptPool,
    detections: list[Detection],
    alpha: float = 1.0,
    normalize: bool = True,
) -> str:
    """Prompt whose training answers have minimum entropy; ties keep pool order."""
    best_id: str | None = None
    best_entropy = math.inf
    for prompt in pool.prompts:
        dist = fit_distribution(detections, prompt.prompt_id, alpha=alpha, normalize=normalize)
        h = entropy(dist)
        if h < best_entropy:
            best_entropy = h
            best_id = prompt.prompt_id
    assert best_id is not None
    return best_id


def static_object_score(dist: AnswerDistribution, answer: str, normalize: bool = True) -> float:
    """Rarity of an answer under the fitted distribution: 1 - p_hat(answer).

    Unseen answers fall into the reserved bucket and receive the maximal
    score for the distribution.
    """
    if normalize:
        answer = normalize_token(answer)
    return 1.0 - dist.probability(answer)


@dataclass
class SpaModel:
    """Selected prompt plus its fitted distribution, as persisted to spa_model.json."""

    distribution: AnswerDistribution
    normalize: bool = True
    entropy_by_prompt: dict[str, float] = field(default_factory=dict)

    @property
    def prompt_id(self) -> str:
        return self.distribution.prompt_id

    @classmethod
    def fit(
        cls,
        pool: PromptPool,
        detections: list[Detection],
        alpha: float = 1.0,
        normalize: bool = True,
    ) -> "SpaModel":
        entropies: dict[str, float] = {}
        dists: dict[str, AnswerDistribution] = {}
        selected: str | None = None
        for prompt in pool.prompts:
            dist = fit_distribution(detections, prompt.prompt_id, alpha=alpha, normalize=normalize)
            dists[prompt.prompt_id] = dist
            entropies[prompt.prompt_id] = entropy(dist)
            if selected is None or entropies[prompt.prompt_id] < entropies[selected]:
                selected = prompt.prompt_id
        assert selected is not None
        return cls(distribution=dists[selected], normalize=normalize, entropy_by_prompt=entropies)

    def score(self, detection: Detection) -> float:
        if self.prompt_id not in detection.answers:
            raise SpaError(f"detection has no answer for selected prompt '{self.prompt_id}'")
        return static_object_score(
            self.distribution, detection.answers[self.prompt_id], normalize=self.normalize
        )

    def save(self, path: Path | str) -> None:
        payload = {
            "prompt_id": self.prompt_id,
            "alpha": self.distribution.alpha,
            "counts": dict(sorted(self.distribution.counts.items())),
            "normalize": self.normalize,
            "entropy_by_prompt": {k: self.entropy_by_prompt[k] for k in sorted(self.entropy_by_prompt)},
        }
        write_text(Path(path), canonical_json(payload))

    @classmethod
    def load(cls, path: Path | str) -> "SpaModel":
        raw = read_json(Path(path))
        dist = AnswerDistribution(
            prompt_id=raw["prompt_id"],
            counts={str(k): int(v) for k, v in raw["counts"].items()},
            alpha=float(raw["alpha"]),
        )
        return cls(
            distribution=dist,
            normalize=bool(raw.get("normalize", True)),
            entropy_by_prompt={str(k): float(v) for k, v in raw.get("entropy_by_prompt", {}).items()},
        )

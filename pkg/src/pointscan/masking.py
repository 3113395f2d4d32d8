"""Token masking: redundancy-driven selection plus a random stage.

Works on batched token features of shape (B, G, C). The semantic stage
normalizes every token to unit length, builds the pairwise cosine-similarity
matrix clamped to [0, 1], sums each row into a redundancy score, and masks the
tokens whose score strictly exceeds the k-th smallest score of their row,
where k = max(1, floor(t_semantic * G)) is the number of tokens to retain.
Threshold ties are therefore retained: at least k tokens always survive.

The random stage then masks floor(r_random * n_available) of the tokens the
semantic stage left unmasked, drawn without replacement per batch row from a
seeded generator. The two masks never overlap and their union is the final
mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class MaskConfig:
    """Masking knobs: retention proportion, random ratio, and the draw seed."""

    t_semantic: float = 0.8
    r_random: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.t_semantic <= 1.0:
            raise ValidationError(f"t_semantic must be in (0, 1], got {self.t_semantic}")
        if not 0.0 <= self.r_random < 1.0:
            raise ValidationError(f"r_random must be in [0, 1), got {self.r_random}")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")


@dataclass(frozen=True)
class MaskPlan:
    """Semantic, random, and combined (B, G) masks plus the config that built them."""

    semantic: np.ndarray
    random: np.ndarray
    final: np.ndarray
    t_semantic: float
    r_random: float
    seed: int

    def __post_init__(self):
        for name in ("semantic", "random", "final"):
            arr = np.asarray(getattr(self, name), dtype=bool)
            if arr.ndim != 2:
                raise ValidationError(f"{name} mask must be 2D (B, G)")
            object.__setattr__(self, name, arr)
        if not (self.semantic.shape == self.random.shape == self.final.shape):
            raise ValidationError("mask layers must share one shape")
        if np.any(self.semantic & self.random):
            raise ValidationError("random mask overlaps the semantic mask")
        if not np.array_equal(self.final, self.semantic | self.random):
            raise ValidationError("final mask must be the union of the two layers")

    @property
    def batch_size(self) -> int:
        return self.final.shape[0]

    @property
    def num_tokens(self) -> int:
        return self.final.shape[1]

    def to_json_dict(self) -> dict:
        b, g = self.final.shape
        return {
            "b": b,
            "g": g,
            "t_semantic": self.t_semantic,
            "r_random": self.r_random,
            "seed": self.seed,
            "semantic": [int(v) for v in self.semantic.ravel()],
            "random": [int(v) for v in self.random.ravel()],
            "final": [int(v) for v in self.final.ravel()],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "MaskPlan":
        b, g = int(data["b"]), int(data["g"])

        def grid(key: str) -> np.ndarray:
            flat = np.asarray(data[key], dtype=np.int64)
            if flat.size != b * g:
                raise ValidationError(f"{key} mask has {flat.size} bits, expected {b * g}")
            return flat.reshape(b, g).astype(bool)

        return cls(
            semantic=grid("semantic"),
            random=grid("random"),
            final=grid("final"),
            t_semantic=float(data["t_semantic"]),
            r_random=float(data["r_random"]),
            seed=int(data["seed"]),
        )


def _check_features(features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ValidationError(f"token features must have shape (B, G, C), got {features.shape}")
    if features.shape[1] < 1 or features.shape[2] < 1:
        raise ValidationError("token features need G >= 1 and C >= 1")
    if not np.all(np.isfinite(features)):
        raise ValidationError("token features contain non-finite values")
    return features


def normalize_tokens(features: np.ndarray) -> np.ndarray:
    """Scale every token vector to unit L2 norm; zero vectors stay zero."""
    features = _check_features(features)
    norms = np.linalg.norm(features, axis=-1, keepdims=True)
    return np.divide(features, norms, out=np.zeros_like(features), where=norms > 0)


def similarity_matrix(normalized: np.ndarray) -> np.ndarray:
    """Pairwise token dot products per batch row, clamped to [0, 1]."""
    normalized = np.asarray(normalized, dtype=np.float64)
    sim = np.einsum("bgc,bhc->bgh", normalized, normalized)
    return np.clip(sim, 0.0, 1.0)


def redundancy_scores(sim: np.ndarray) -> np.ndarray:
    """Row sums of the clamped similarity matrix; one score per token."""
    return np.asarray(sim, dtype=np.float64).sum(axis=-1)


def sms_mask(features: np.ndarray, t_semantic: float) -> np.ndarray:
    """Mask tokens whose redundancy strictly exceeds the k-th smallest score.

    k = max(1, floor(t_semantic * G)) tokens are kept per batch row; ties at
    the threshold are kept as well, so the masked count is at most G - k.
    """
    if not 0.0 < t_semantic <= 1.0:
        raise ValidationError(f"t_semantic must be in (0, 1], got {t_semantic}")
    features = _check_features(features)
    scores = redundancy_scores(similarity_matrix(normalize_tokens(features)))
    g = scores.shape[1]
    k = max(1, math.floor(t_semantic * g))
    thresholds = np.sort(scores, axis=1)[:, k - 1]
    return scores > thresholds[:, None]


def _sample_prefix(pool: np.ndarray, take: int, rng: np.random.Generator) -> np.ndarray:
    """First ``take`` entries of a Fisher-Yates shuffle of ``pool``."""
    pool = pool.copy()
    n = pool.size
    for i in range(take):
        j = i + int(rng.integers(n - i))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:take]


def random_mask(semantic_mask: np.ndarray, r_random: float, seed: int) -> np.ndarray:
    """Mask floor(r_random * n_available) of the semantically unmasked tokens.

    Each batch row draws independently (the generator is seeded with
    (seed, row)), so results do not depend on row processing order.
    """
    if not 0.0 <= r_random < 1.0:
        raise ValidationError(f"r_random must be in [0, 1), got {r_random}")
    if seed < 0:
        raise ValidationError("seed must be non-negative")
    semantic_mask = np.asarray(semantic_mask, dtype=bool)
    if semantic_mask.ndim != 2:
        raise ValidationError("semantic mask must be 2D (B, G)")
    out = np.zeros_like(semantic_mask)
    for b in range(semantic_mask.shape[0]):
        available = np.flatnonzero(~semantic_mask[b])
        n_mask = math.floor(r_random * available.size)
        if n_mask == 0:
            continue
        rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
        out[b, _sample_prefix(available, n_mask, rng)] = True
    return out


def build_mask_plan(features: np.ndarray, config: MaskConfig) -> MaskPlan:
    """Run the semantic stage then the random stage and combine the layers."""
    semantic = sms_mask(features, config.t_semantic)
    rand = random_mask(semantic, config.r_random, config.seed)
    return MaskPlan(
        semantic=semantic,
        random=rand,
        final=semantic | rand,
        t_semantic=config.t_semantic,
        r_random=config.r_random,
        seed=config.seed,
    )

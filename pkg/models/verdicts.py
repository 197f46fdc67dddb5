from typing import Dict, List, Tuple

import numpy as np

from shared import InvalidArgumentError


class PatchProbs:
    """Per-patch class probabilities r^c(x_k), shape (K, C), index-aligned with placements."""

    def __init__(self, probs):
        array = np.array(probs, dtype=np.float64)
        if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
            raise InvalidArgumentError(f"patch probabilities must be a non-empty (K, C) grid, got {array.shape}")
        if np.any(array < 0.0) or np.any(array > 1.0):
            raise InvalidArgumentError("patch probabilities must lie in [0, 1]")
        if not np.allclose(array.sum(axis=1), 1.0, atol=1e-6):
            raise InvalidArgumentError("each patch probability row must sum to 1")
        array.setflags(write=False)
        self.probs = array

    @property
    def K(self) -> int:
        return self.probs.shape[0]

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]

    def column(self, class_id: int) -> np.ndarray:
        return self.probs[:, class_id]

    def to_list(self) -> List[List[float]]:
        return self.probs.tolist()

    def __str__(self):
        return f"PatchProbs(K={self.K}, C={self.num_classes})"


class Verdict:
    """Image-level decision by majority vote over K patches."""

    def __init__(self, predicted_class: int, vote_histogram, mean_probs):
        votes = np.array(vote_histogram, dtype=np.int64)
        if votes.ndim != 1 or votes.size < 1 or np.any(votes < 0):
            raise InvalidArgumentError("vote histogram must be a non-negative vector")
        if votes[predicted_class] != votes.max():
            raise InvalidArgumentError("predicted class must carry the maximal vote count")
        self.predicted_class = int(predicted_class)
        self.vote_histogram = votes
        self.mean_probs = np.array(mean_probs, dtype=np.float64)

    @property
    def K(self) -> int:
        return int(self.vote_histogram.sum())

    def to_dict(self) -> Dict:
        return {
            'prediction': self.predicted_class,
            'votes': self.vote_histogram.tolist(),
            'mean_probs': self.mean_probs.tolist(),
            'K': self.K,
        }

    def __str__(self):
        return f"Verdict(class={self.predicted_class}, votes={self.vote_histogram.tolist()})"


class LocalClassification:
    """A local-approach run: the verdict plus everything needed to replay its saliency."""

    def __init__(self, verdict: Verdict, probs: PatchProbs, placements: List, seed: int,
                 image_shape: Tuple[int, int]):
        if len(placements) != probs.K:
            raise InvalidArgumentError(f"{len(placements)} placements for {probs.K} probability rows")
        self.verdict = verdict
        self.probs = probs
        self.placements = list(placements)
        self.seed = int(seed)
        self.image_shape = (int(image_shape[0]), int(image_shape[1]))

    def to_dict(self) -> Dict:
        return {
            **self.verdict.to_dict(),
            'seed': self.seed,
            'image_shape': list(self.image_shape),
            'placements': [placement.to_dict() for placement in self.placements],
            'probs': self.probs.to_list(),
        }

    def __str__(self):
        return f"LocalClassification({self.verdict}, seed={self.seed})"

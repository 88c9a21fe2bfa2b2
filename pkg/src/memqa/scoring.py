"""Dot-product answer scoring and thresholded answer-set inference."""

from dataclasses import dataclass

import numpy as np

from .autodiff import matmul, reshape
from .errors import ShapeError


@dataclass
class ScoredCandidates:
    candidate_ids: list
    scores: np.ndarray  # (N,), -inf on masked slots
    mask: np.ndarray    # (N,) bool


def score_all(question_vec, keys, mask, candidate_ids):
    """Dot product of the question vector with every key row.

    question_vec (d,), keys (N, d).  Masked slots get -inf so they can
    never enter an answer set.  Returns (ScoredCandidates, score tensor)
    where the tensor keeps gradients flowing for training.
    """
    n, d = keys.data.shape
    if question_vec.data.shape != (d,):
        raise ShapeError(f"score_all: question {question_vec.data.shape} vs keys {keys.data.shape}")
    score_t = reshape(matmul(keys, reshape(question_vec, (d, 1))), (n,))
    scores = score_t.data.astype(np.float64).copy()
    scores[~np.asarray(mask)] = -np.inf
    return ScoredCandidates(list(candidate_ids), scores, np.asarray(mask).copy()), score_t


def infer_answers(scored, theta=0.7):
    """Candidates whose gap to the best score is strictly below theta.

    Returned ids are ordered by descending score (ties by slot order).
    The argmax always qualifies for theta > 0; exact ties of the
    maximum are included even as theta -> 0.
    """
    if theta < 0:
        raise ShapeError(f"theta must be >= 0, got {theta}")
    mask = scored.mask
    if len(scored.scores) == 0 or not mask.any():
        raise ShapeError("infer_answers: no unmasked candidates")
    scores = scored.scores
    best = scores[mask].max()
    keep = [i for i in range(len(scores)) if mask[i] and (best - scores[i] < theta or scores[i] == best)]
    keep.sort(key=lambda i: -scores[i])
    return [scored.candidate_ids[i] for i in keep]

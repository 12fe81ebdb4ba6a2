"""Image-answerability classifier.

A hashed bag-of-words logistic regression stands in for whatever model
produced the human-label protocol numbers; the module boundary (labeled
pairs in, keep/drop decisions out) lets a heavier model replace it
behind the same stage-file contract. Training is full-batch gradient
descent from zero init, so identical inputs give bitwise-identical
weights.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .qagen import QAPair, Stage
from .textnorm import tokenize

DIMENSION = 1 << 18


@dataclass(frozen=True)
class LabeledPair:
    pair_id: str
    label: int  # 1 = answerable from the image alone

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class FeatureVector:
    indices: np.ndarray  # int64, sorted, unique
    values: np.ndarray  # float64, L2-normalized
    dimension: int = DIMENSION


@dataclass(frozen=True)
class Hyper:
    learning_rate: float = 0.5
    l2_lambda: float = 1e-4
    epochs: int = 200
    seed: int = 0


@dataclass
class ClassifierModel:
    weights: np.ndarray
    bias: float
    hyper: Hyper
    training_report: dict = field(default_factory=dict)

    def to_json(self) -> str:
        w = np.ascontiguousarray(self.weights, dtype="<f8")
        return json.dumps({
            "dimension": len(self.weights),
            "weights_b64": base64.b64encode(w.tobytes()).decode("ascii"),
            "bias": self.bias,
            "hyper": {"learning_rate": self.hyper.learning_rate,
                      "l2_lambda": self.hyper.l2_lambda,
                      "epochs": self.hyper.epochs,
                      "seed": self.hyper.seed},
            "training_report": self.training_report,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ClassifierModel":
        d = json.loads(text)
        w = np.frombuffer(base64.b64decode(d["weights_b64"]), dtype="<f8").copy()
        assert len(w) == d["dimension"]
        return cls(weights=w, bias=d["bias"], hyper=Hyper(**d["hyper"]),
                   training_report=d.get("training_report", {}))


def _hash_feature(feat: str, dimension: int) -> tuple[int, float]:
    digest = hashlib.blake2b(feat.encode("utf-8"), digest_size=9).digest()
    idx = int.from_bytes(digest[:8], "little") % dimension
    sign = 1.0 if digest[8] & 1 else -1.0
    return idx, sign


def featurize(question: str, option_texts: list[str] | None = None,
              dimension: int = DIMENSION, include_options: bool = True) -> FeatureVector:
    """Signed-hash unigrams and bigrams of the question (and, by default,
    the option texts) into `dimension` buckets, L2-normalized."""
    if not question.strip():
        raise ValueError("question must be nonempty")
    texts = [("q", question)]
    if include_options and option_texts:
        texts += [("o", t) for t in option_texts]

    acc: dict[int, float] = {}
    for prefix, text in texts:
        tokens = tokenize(text)
        feats = [f"{prefix}|{t}" for t in tokens]
        feats += [f"{prefix}|{a}_{b}" for a, b in zip(tokens, tokens[1:])]
        for feat in feats:
            idx, sign = _hash_feature(feat, dimension)
            acc[idx] = acc.get(idx, 0.0) + sign

    if not acc:
        return FeatureVector(np.empty(0, dtype=np.int64), np.empty(0), dimension)
    indices = np.array(sorted(acc), dtype=np.int64)
    values = np.array([acc[i] for i in indices], dtype=np.float64)
    norm = float(np.linalg.norm(values))
    if norm > 0:
        values = values / norm
    return FeatureVector(indices, values, dimension)


def featurize_pair(pair: QAPair, dimension: int = DIMENSION,
                   include_options: bool = True) -> FeatureVector:
    return featurize(pair.question, [o.text for o in pair.options],
                     dimension=dimension, include_options=include_options)


def _margins(X: list[FeatureVector], w: np.ndarray, b: float) -> np.ndarray:
    z = np.empty(len(X))
    for i, x in enumerate(X):
        z[i] = float(w[x.indices] @ x.values) + b
    return z


def loss_and_gradient(X: list[FeatureVector], y: np.ndarray, w: np.ndarray,
                      b: float, l2_lambda: float) -> tuple[float, np.ndarray, float]:
    """Mean cross-entropy plus (l2/2)||w||^2; bias unregularized."""
    n = len(X)
    z = _margins(X, w, b)
    # stable log(1 + exp(-y z)) with y in {0,1} -> softplus formulation
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2_lambda * float(w @ w)
    p = 1.0 / (1.0 + np.exp(-z))
    resid = (p - y) / n
    grad_w = l2_lambda * w.copy()
    for i, x in enumerate(X):
        grad_w[x.indices] += resid[i] * x.values
    grad_b = float(np.sum(resid))
    return loss, grad_w, grad_b


def lipschitz_bound(X: list[FeatureVector], l2_lambda: float) -> float:
    """Safe upper bound on the loss curvature: 0.25 * ||X||_F^2 / n + l2."""
    n = max(len(X), 1)
    sq = sum(float(x.values @ x.values) + 1.0 for x in X)  # +1 for the bias column
    return 0.25 * sq / n + l2_lambda


def train(labeled: list[tuple[FeatureVector, int]], hyper: Hyper | None = None,
          dimension: int = DIMENSION) -> ClassifierModel:
    """Full-batch gradient descent on the regularized logistic loss, from
    zero initialization. Deterministic: the seed only shuffles the order
    of the held-out reporting, never the batch math."""
    hyper = hyper or Hyper()
    if not labeled:
        raise ValueError("no training data")
    labels = {lbl for _, lbl in labeled}
    if len(labels) < 2:
        raise ValueError("training data must contain both classes")

    X = [fv for fv, _ in labeled]
    y = np.array([lbl for _, lbl in labeled], dtype=np.float64)
    w = np.zeros(dimension)
    b = 0.0
    losses = []
    for _ in range(hyper.epochs):
        loss, gw, gb = loss_and_gradient(X, y, w, b, hyper.l2_lambda)
        losses.append(loss)
        w -= hyper.learning_rate * gw
        b -= hyper.learning_rate * gb

    final_loss, _, _ = loss_and_gradient(X, y, w, b, hyper.l2_lambda)
    report = {
        "final_loss": final_loss,
        "loss_trace_head": losses[:5],
        "lipschitz_bound": lipschitz_bound(X, hyper.l2_lambda),
        "n_train": len(X),
    }
    return ClassifierModel(weights=w, bias=b, hyper=hyper, training_report=report)


def predict_proba(model: ClassifierModel, fv: FeatureVector) -> float:
    z = float(model.weights[fv.indices] @ fv.values) + model.bias
    return 1.0 / (1.0 + math.exp(-z))


def predict(model: ClassifierModel, pair: QAPair, include_options: bool = True) -> float:
    return predict_proba(model, featurize_pair(pair, dimension=len(model.weights),
                                               include_options=include_options))


def evaluate(model: ClassifierModel, heldout: list[tuple[FeatureVector, int]]) -> float:
    """Accuracy of keep/drop decisions at threshold 0.5 (ties predict 1)."""
    if not heldout:
        raise ValueError("empty held-out set")
    correct = 0
    for fv, label in heldout:
        decision = 1 if predict_proba(model, fv) >= 0.5 else 0
        correct += decision == label
    return correct / len(heldout)


def split_protocol(n_labels: int) -> tuple[int, int]:
    """Train/test sizes: the 1752/440 protocol when enough labels exist,
    else a proportional 80/20."""
    if n_labels >= 2192:
        return 1752, 440
    n_train = max(1, int(round(n_labels * 0.8)))
    return n_train, n_labels - n_train


def apply_classifier(pairs: list[QAPair], model: ClassifierModel,
                     threshold: float = 0.5, include_options: bool = True
                     ) -> tuple[list[QAPair], dict]:
    """Keep pairs predicted answerable (p >= threshold); report kept and
    dropped counts plus the pairs-per-image average of the kept set."""
    kept = []
    for p in pairs:
        if predict(model, p, include_options=include_options) >= threshold:
            kept.append(p.with_stage(Stage.KEPT_BY_CLASSIFIER))
    images = {p.record_id for p in kept}
    telemetry = {
        "kept": len(kept),
        "dropped": len(pairs) - len(kept),
        "pairs_per_image": (len(kept) / len(images)) if images else None,
    }
    return kept, telemetry

"""Student-discussion relevance prediction.

A latent-factor model with side features on both sides.  The user vector
combines a free per-user factor, weighted activity counts (discussions
participated in and initiated), goal quality, centrality, and a
registration-week effect; the discussion vector combines a free factor,
reply count and length effects, and the mean implicit-feedback vector of
its participants.  The predicted relevance is the bias plus the dot
product of the two combined vectors.  When scoring a pair whose user
already participates in the discussion, that user is left out of the
participant set so the prediction does not feed on its own label.

Training is pointwise SGD on squared error over observed positives plus
uniformly sampled negatives, with L2 regularization on every latent
container (the global bias is not regularized).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import RecommenderError

FEATURE_FLAGS = ("base", "g", "c", "gc")


@dataclass(frozen=True)
class UserFeatures:
    n_participated: float  # discussions joined; a nonnegative rescaling is fine
    n_initiated: float     # discussions started
    goal_quality: int      # 0 bystander, 1 participant, 2 setter
    centrality: float      # mean of HITS authority and hub, in [0, 1]
    reg_week: int          # week of first activity

    def __post_init__(self):
        if self.n_participated < 0 or self.n_initiated < 0:
            raise RecommenderError("activity counts must be nonnegative")
        if self.goal_quality not in (0, 1, 2):
            raise RecommenderError(f"goal quality must be 0, 1 or 2, got {self.goal_quality}")
        if not 0.0 <= self.centrality <= 1.0:
            raise RecommenderError(f"centrality must be in [0, 1], got {self.centrality}")
        if self.reg_week < 0:
            raise RecommenderError("registration week must be nonnegative")


@dataclass(frozen=True)
class DiscussionFeatures:
    n_replies: float  # reply count; a nonnegative rescaling is fine
    length: float     # token count
    participants: tuple[str, ...]

    def __post_init__(self):
        if self.n_replies < 0:
            raise RecommenderError("reply count must be nonnegative")
        if self.length < 0:
            raise RecommenderError("length must be nonnegative")


@dataclass
class RelevanceModel:
    """Parameters plus the feature tables they were trained against."""

    k: int
    use_goal: bool
    use_centrality: bool
    users: dict[str, UserFeatures]
    discussions: dict[str, DiscussionFeatures]
    bias: float
    p: dict[str, np.ndarray]        # free user factors
    q: dict[str, np.ndarray]        # free discussion factors
    f_part: np.ndarray              # weight for participation count
    f_init: np.ndarray              # weight for initiation count
    f_goal: np.ndarray              # weight for goal quality
    f_cent: np.ndarray              # weight for centrality
    f_week: np.ndarray              # (n_weeks, k) registration-week effects
    f_repl: np.ndarray              # weight for reply count
    f_len: np.ndarray               # weight for content length
    imp: dict[str, np.ndarray]      # implicit-feedback vector per user
    reg: float = 0.01
    loss_history: list[float] = field(default_factory=list)

    def user_vec(self, user_id: str) -> np.ndarray:
        feats = self.users.get(user_id)
        if feats is None:
            raise RecommenderError(f"unknown user {user_id!r}")
        x = self.p[user_id] + feats.n_participated * self.f_part + feats.n_initiated * self.f_init
        if self.use_goal:
            x = x + feats.goal_quality * self.f_goal
        if self.use_centrality:
            x = x + feats.centrality * self.f_cent
        return x + self.f_week[feats.reg_week]

    def disc_vec(self, disc_id: str, exclude: str | None = None) -> np.ndarray:
        feats = self.discussions.get(disc_id)
        if feats is None:
            raise RecommenderError(f"unknown discussion {disc_id!r}")
        y = self.q[disc_id] + feats.n_replies * self.f_repl + feats.length * self.f_len
        others = [v for v in feats.participants if v != exclude]
        if others:
            y = y + sum(self.imp[v] for v in others) / math.sqrt(len(others))
        return y

    def predict(self, user_id: str, disc_id: str) -> float:
        x = self.user_vec(user_id)
        y = self.disc_vec(disc_id, exclude=user_id)
        return float(self.bias + x @ y)

    def score_pairs(self, pairs) -> dict[tuple[str, str], float]:
        return {(u, d): self.predict(u, d) for u, d in pairs}


def _participants_excluding(feats: DiscussionFeatures, user_id: str) -> list[str]:
    return [v for v in feats.participants if v != user_id]


def loss_and_gradients(model: RelevanceModel, samples) -> tuple[float, dict]:
    """Full-batch squared-error loss with L2 terms, and its exact gradient.

    ``samples`` is a list of (user_id, discussion_id, target) triples.  The
    gradient dict mirrors the parameter layout; disabled feature blocks get
    zero gradients and do not enter the regularizer.
    """
    k = model.k
    grads = {
        "bias": 0.0,
        "p": {u: np.zeros(k) for u in model.p},
        "q": {d: np.zeros(k) for d in model.q},
        "f_part": np.zeros(k),
        "f_init": np.zeros(k),
        "f_goal": np.zeros(k),
        "f_cent": np.zeros(k),
        "f_week": np.zeros_like(model.f_week),
        "f_repl": np.zeros(k),
        "f_len": np.zeros(k),
        "imp": {u: np.zeros(k) for u in model.imp},
    }
    loss = 0.0
    for user_id, disc_id, target in samples:
        ufeat = model.users[user_id]
        dfeat = model.discussions[disc_id]
        x = model.user_vec(user_id)
        y = model.disc_vec(disc_id, exclude=user_id)
        err = model.bias + float(x @ y) - target
        loss += err * err
        e2 = 2.0 * err
        grads["bias"] += e2
        grads["p"][user_id] += e2 * y
        grads["q"][disc_id] += e2 * x
        grads["f_part"] += e2 * ufeat.n_participated * y
        grads["f_init"] += e2 * ufeat.n_initiated * y
        if model.use_goal:
            grads["f_goal"] += e2 * ufeat.goal_quality * y
        if model.use_centrality:
            grads["f_cent"] += e2 * ufeat.centrality * y
        grads["f_week"][ufeat.reg_week] += e2 * y
        grads["f_repl"] += e2 * dfeat.n_replies * x
        grads["f_len"] += e2 * dfeat.length * x
        others = _participants_excluding(dfeat, user_id)
        if others:
            coef = e2 / math.sqrt(len(others))
            for v in others:
                grads["imp"][v] += coef * x
    reg = model.reg
    for name in ("f_part", "f_init", "f_repl", "f_len"):
        vec = getattr(model, name)
        loss += reg * float(vec @ vec)
        grads[name] += 2.0 * reg * vec
    if model.use_goal:
        loss += reg * float(model.f_goal @ model.f_goal)
        grads["f_goal"] += 2.0 * reg * model.f_goal
    if model.use_centrality:
        loss += reg * float(model.f_cent @ model.f_cent)
        grads["f_cent"] += 2.0 * reg * model.f_cent
    loss += reg * float((model.f_week ** 2).sum())
    grads["f_week"] += 2.0 * reg * model.f_week
    for container, grad in ((model.p, grads["p"]), (model.q, grads["q"]), (model.imp, grads["imp"])):
        for key, vec in container.items():
            loss += reg * float(vec @ vec)
            grad[key] += 2.0 * reg * vec
    return loss, grads


def _parse_flags(features: str) -> tuple[bool, bool]:
    if features not in FEATURE_FLAGS:
        raise RecommenderError(
            f"unknown feature flags {features!r}, expected one of {FEATURE_FLAGS}"
        )
    return "g" in features, "c" in features


def train_relevance(
    positives,
    users: dict[str, UserFeatures],
    discussions: dict[str, DiscussionFeatures],
    *,
    features: str = "gc",
    latent_dim: int = 8,
    learning_rate: float = 0.01,
    reg: float = 0.01,
    epochs: int = 200,
    neg_ratio: int = 3,
    seed: int = 0,
    init_scale: float = 0.01,
) -> RelevanceModel:
    """Fit the relevance model by seeded SGD.

    ``positives`` are (user_id, discussion_id) participation pairs.  Each
    epoch visits every positive once plus ``neg_ratio`` uniformly sampled
    unobserved discussions per positive (target 0), in shuffled order.  The
    mean squared error of each epoch (measured before its updates) is
    recorded on ``model.loss_history``.
    """
    pos_list = sorted(set(tuple(p) for p in positives))
    if not pos_list:
        raise RecommenderError("no positive participation pairs to train on")
    for u, d in pos_list:
        if u not in users:
            raise RecommenderError(f"positive pair references unknown user {u!r}")
        if d not in discussions:
            raise RecommenderError(f"positive pair references unknown discussion {d!r}")
    use_goal, use_cent = _parse_flags(features)
    if latent_dim < 1:
        raise RecommenderError("latent_dim must be >= 1")

    rng = np.random.default_rng(seed)
    k = latent_dim
    n_weeks = max(f.reg_week for f in users.values()) + 1
    model = RelevanceModel(
        k=k,
        use_goal=use_goal,
        use_centrality=use_cent,
        users=dict(users),
        discussions=dict(discussions),
        bias=0.0,
        p={u: rng.normal(0.0, init_scale, k) for u in sorted(users)},
        q={d: rng.normal(0.0, init_scale, k) for d in sorted(discussions)},
        f_part=rng.normal(0.0, init_scale, k),
        f_init=rng.normal(0.0, init_scale, k),
        f_goal=rng.normal(0.0, init_scale, k),
        f_cent=rng.normal(0.0, init_scale, k),
        f_week=rng.normal(0.0, init_scale, (n_weeks, k)),
        f_repl=rng.normal(0.0, init_scale, k),
        f_len=rng.normal(0.0, init_scale, k),
        imp={u: rng.normal(0.0, init_scale, k) for u in sorted(users)},
        reg=reg,
    )

    disc_order = sorted(discussions)
    pos_by_user: dict[str, set] = {}
    for u, d in pos_list:
        pos_by_user.setdefault(u, set()).add(d)
    neg_pool = {
        u: [d for d in disc_order if d not in seen]
        for u, seen in pos_by_user.items()
    }

    lr = learning_rate
    for _ in range(epochs):
        samples = [(u, d, 1.0) for u, d in pos_list]
        if neg_ratio > 0:
            for u, _ in pos_list:
                pool = neg_pool[u]
                if not pool:
                    continue
                idx = rng.integers(0, len(pool), size=neg_ratio)
                samples.extend((u, pool[i], 0.0) for i in idx)
        order = rng.permutation(len(samples))
        epoch_loss = 0.0
        for si in order:
            user_id, disc_id, target = samples[si]
            ufeat = model.users[user_id]
            dfeat = model.discussions[disc_id]
            x = model.user_vec(user_id)
            y = model.disc_vec(disc_id, exclude=user_id)
            err = model.bias + float(x @ y) - target
            epoch_loss += err * err
            e2 = 2.0 * err
            dx = e2 * y
            dy = e2 * x
            model.bias -= lr * e2
            model.p[user_id] -= lr * (dx + 2 * reg * model.p[user_id])
            model.q[disc_id] -= lr * (dy + 2 * reg * model.q[disc_id])
            model.f_part -= lr * (ufeat.n_participated * dx + 2 * reg * model.f_part)
            model.f_init -= lr * (ufeat.n_initiated * dx + 2 * reg * model.f_init)
            if use_goal:
                model.f_goal -= lr * (ufeat.goal_quality * dx + 2 * reg * model.f_goal)
            if use_cent:
                model.f_cent -= lr * (ufeat.centrality * dx + 2 * reg * model.f_cent)
            model.f_week[ufeat.reg_week] -= lr * (dx + 2 * reg * model.f_week[ufeat.reg_week])
            model.f_repl -= lr * (dfeat.n_replies * dy + 2 * reg * model.f_repl)
            model.f_len -= lr * (dfeat.length * dy + 2 * reg * model.f_len)
            others = _participants_excluding(dfeat, user_id)
            if others:
                coef = 1.0 / math.sqrt(len(others))
                for v in others:
                    model.imp[v] -= lr * (coef * dy + 2 * reg * model.imp[v])
        mean_loss = epoch_loss / len(samples)
        if not math.isfinite(mean_loss):
            raise RecommenderError(
                "training diverged to a non-finite loss; rescale large count "
                "features or lower the learning rate"
            )
        model.loss_history.append(mean_loss)
    return model


# ----------------------------------------------------------------------
# evaluation

@dataclass
class MapResult:
    map: float
    n_evaluated: int
    n_skipped: int
    per_user: dict[str, float]


def average_precision(ranked, positives) -> float:
    """AP over the positives that appear in the ranked list."""
    pos = set(positives)
    present = [d for d in ranked if d in pos]
    if not present:
        raise RecommenderError("no positives present in the ranked list")
    hits = 0
    precisions = []
    for rank, item in enumerate(ranked, start=1):
        if item in pos:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions)


def evaluate_map(model: RelevanceModel, held_out: dict, candidates: dict) -> MapResult:
    """Mean average precision over users with scoreable held-out positives.

    ``held_out`` maps user id to their held-out positive discussions;
    ``candidates`` maps user id to the discussion pool to rank.  Users whose
    pool is empty or contains none of their positives are skipped and
    counted in the result.  Ties in score rank by discussion id ascending.
    """
    per_user = {}
    skipped = 0
    for user_id in sorted(held_out):
        pool = list(candidates.get(user_id, ()))
        pos = set(held_out[user_id])
        if not pool or not (pos & set(pool)):
            skipped += 1
            continue
        ranked = sorted(pool, key=lambda d: (-model.predict(user_id, d), d))
        per_user[user_id] = average_precision(ranked, pos)
    if not per_user:
        raise RecommenderError("no users could be evaluated")
    return MapResult(
        map=sum(per_user.values()) / len(per_user),
        n_evaluated=len(per_user),
        n_skipped=skipped,
        per_user=per_user,
    )


def split_per_user(positives, test_fraction: float = 1.0 / 3.0, seed: int = 0):
    """Per-user train/test split of positive pairs.

    Users with a single positive keep it in training; otherwise roughly
    ``test_fraction`` of each user's positives (at least one, and at least
    one left for training) is held out.
    """
    if not 0 < test_fraction < 1:
        raise RecommenderError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    by_user: dict[str, list] = {}
    for u, d in sorted(set(tuple(p) for p in positives)):
        by_user.setdefault(u, []).append(d)
    train, test = [], []
    for u in sorted(by_user):
        ds = by_user[u]
        if len(ds) < 2:
            train.extend((u, d) for d in ds)
            continue
        n_test = min(len(ds) - 1, max(1, int(round(len(ds) * test_fraction))))
        order = rng.permutation(len(ds))
        held = {ds[i] for i in order[:n_test]}
        for d in ds:
            (test if d in held else train).append((u, d))
    return train, test


# ----------------------------------------------------------------------
# external files

def load_participation_csv(path: str) -> list[tuple[str, str]]:
    """Read observed positives from a header-led user_id,discussion_id CSV.

    Lines starting with ``#`` (provenance comments) are ignored.
    """
    pairs = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["user_id", "discussion_id"]:
            raise RecommenderError(f"{path}: expected header user_id,discussion_id")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or not row[0] or not row[1]:
                raise RecommenderError(f"{path}:{lineno}: expected user_id,discussion_id")
            pairs.append((row[0], row[1]))
    return pairs


def load_discussions_jsonl(path: str) -> dict[str, DiscussionFeatures]:
    """Read discussion features, one JSON object per line.

    Blank lines and ``#`` comment lines are skipped.
    """
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecommenderError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            try:
                disc_id = obj["discussion_id"]
                feats = DiscussionFeatures(
                    n_replies=int(obj["n_replies"]),
                    length=int(obj["length"]),
                    participants=tuple(obj["participants"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise RecommenderError(f"{path}:{lineno}: bad discussion record: {exc}") from exc
            if disc_id in out:
                raise RecommenderError(f"{path}:{lineno}: duplicate discussion {disc_id!r}")
            out[disc_id] = feats
    return out

"""State-transition topic model over weekly activity sequences.

Each user's course activity is a sequence of weekly time points.  A time
point has a latent behavior state; the state emits the week's document
types, and state-to-state transitions are conditioned on the user's
social-connection category that week.  A virtual start state provides the
initial-state distribution, again per category.  Word tokens draw topics
through a per-time-point mixture; each state's topic profile is then
estimated from the topics drawn at the time points it owns, which is what
keeps distinct topics identifiable even when few states are active.

Inference is collapsed Gibbs sampling over token topics and time-point
states; see ``docs/model.md`` for the factorization and the derivation of
the conditionals.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from ._gibbs import (
    _attach_timepoint,
    _attach_token,
    _detach_timepoint,
    _detach_token,
    _dirmult_log,
    _state_log_scores,
    _sweep_states,
    _sweep_topics,
    _topic_scores,
)
from .corpus import SeqDoc, Sequence, SequenceSet, TimePoint, Vocabulary
from .errors import ModelError

logger = logging.getLogger(__name__)

MODEL_SCHEMA = 1
PROFILES_SCHEMA = 1


@dataclass(frozen=True)
class Hyperparams:
    """Model dimensions and Dirichlet concentrations."""

    n_states: int
    n_topics: int
    n_doc_types: int
    n_categories: int
    alpha: float = 0.1  # time-point -> topic concentration
    beta: float = 0.01  # topic -> word concentration
    nu: float = 0.1     # state -> doc-type concentration
    gamma: float = 0.1  # transition concentration

    def __post_init__(self):
        for name in ("n_states", "n_topics", "n_doc_types", "n_categories"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be >= 1")
        for name in ("alpha", "beta", "nu", "gamma"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be > 0")

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_topics": self.n_topics,
            "n_doc_types": self.n_doc_types,
            "n_categories": self.n_categories,
            "alpha": self.alpha,
            "beta": self.beta,
            "nu": self.nu,
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(**d)


class FlatSequences:
    """Flattened, validated array view of a :class:`SequenceSet`.

    Sequences are laid out back to back; ``seq_offsets[m]`` indexes the first
    time point of sequence ``m``.  Documents and tokens are flattened the same
    way with their own offset arrays.
    """

    def __init__(self, sequences: SequenceSet, h: Hyperparams):
        if not sequences.sequences:
            raise ModelError("no sequences to model")
        if h.n_doc_types != sequences.n_doc_types:
            raise ModelError(
                f"hyperparams declare {h.n_doc_types} doc types, "
                f"sequences carry {sequences.n_doc_types}"
            )
        if h.n_categories != sequences.n_categories:
            raise ModelError(
                f"hyperparams declare {h.n_categories} categories, "
                f"sequences carry {sequences.n_categories}"
            )
        self.user_ids: list[str] = []
        seq_offsets = [0]
        tp_week: list[int] = []
        tp_category: list[int] = []
        tp_doc_offsets = [0]
        doc_ids: list[str] = []
        doc_type_ids: list[int] = []
        doc_token_offsets = [0]
        token_word: list[int] = []
        n_vocab = len(sequences.vocab)

        for seq in sequences.sequences:
            if not seq.points:
                raise ModelError(f"sequence for user {seq.user_id!r} has no time points")
            self.user_ids.append(seq.user_id)
            for point in seq.points:
                if not point.docs:
                    raise ModelError(
                        f"user {seq.user_id!r} week {point.week} has no documents"
                    )
                if not 0 <= point.category < h.n_categories:
                    raise ModelError(
                        f"user {seq.user_id!r} week {point.week}: "
                        f"category {point.category} out of range"
                    )
                tp_week.append(point.week)
                tp_category.append(point.category)
                for doc in point.docs:
                    if not 0 <= doc.type_id < h.n_doc_types:
                        raise ModelError(f"document {doc.doc_id!r}: type {doc.type_id} out of range")
                    if not doc.tokens:
                        raise ModelError(f"document {doc.doc_id!r} has no tokens")
                    doc_ids.append(doc.doc_id)
                    doc_type_ids.append(doc.type_id)
                    for w in doc.tokens:
                        if not 0 <= w < n_vocab:
                            raise ModelError(f"document {doc.doc_id!r}: token id {w} out of range")
                        token_word.append(w)
                    doc_token_offsets.append(len(token_word))
                tp_doc_offsets.append(len(doc_ids))
            seq_offsets.append(len(tp_week))

        self.n_vocab = n_vocab
        self.vocab_words = sequences.vocab.words()
        self.doc_type_names = list(sequences.doc_types)
        self.category_names = list(sequences.categories)
        self.seq_offsets = np.asarray(seq_offsets, dtype=np.int64)
        self.tp_week = np.asarray(tp_week, dtype=np.int64)
        self.tp_category = np.asarray(tp_category, dtype=np.int64)
        self.tp_doc_offsets = np.asarray(tp_doc_offsets, dtype=np.int64)
        self.doc_ids = doc_ids
        self.doc_type_ids = np.asarray(doc_type_ids, dtype=np.int64)
        self.doc_token_offsets = np.asarray(doc_token_offsets, dtype=np.int64)
        self.token_word = np.asarray(token_word, dtype=np.int64)
        self._derive()

    @classmethod
    def _from_arrays(cls, **arrays) -> "FlatSequences":
        obj = cls.__new__(cls)
        for name, value in arrays.items():
            setattr(obj, name, value)
        obj._derive()
        return obj

    def _derive(self):
        """Fill in the redundant per-time-point lookup arrays."""
        n_points = len(self.tp_week)
        n_doc_types = len(self.doc_type_names)
        self.n_seq = len(self.seq_offsets) - 1
        self.n_points = n_points
        self.n_docs = len(self.doc_ids)
        self.n_tokens = len(self.token_word)

        self.doc_tp = np.repeat(
            np.arange(n_points, dtype=np.int64), np.diff(self.tp_doc_offsets)
        )
        self.token_doc = np.repeat(
            np.arange(self.n_docs, dtype=np.int64), np.diff(self.doc_token_offsets)
        )
        self.token_tp = self.doc_tp[self.token_doc]

        self.tp_token_offsets = np.zeros(n_points + 1, dtype=np.int64)
        self.tp_token_offsets[1:] = np.cumsum(np.bincount(self.token_tp, minlength=n_points))
        self.tp_n_docs = np.diff(self.tp_doc_offsets)
        self.tp_n_words = np.diff(self.tp_token_offsets)

        self.tp_type_counts = np.zeros((n_points, n_doc_types), dtype=np.int64)
        np.add.at(self.tp_type_counts, (self.doc_tp, self.doc_type_ids), 1)

        self.tp_is_first = np.zeros(n_points, dtype=np.bool_)
        self.tp_has_next = np.zeros(n_points, dtype=np.bool_)
        self.tp_is_first[self.seq_offsets[:-1]] = True
        self.tp_has_next[:] = True
        self.tp_has_next[self.seq_offsets[1:] - 1] = False

        # Category keying the transition into each time point: the previous
        # week's category, or the week's own category at a sequence start.
        self.tp_in_cat = np.empty(n_points, dtype=np.int64)
        self.tp_in_cat[1:] = self.tp_category[:-1]
        starts = self.seq_offsets[:-1]
        self.tp_in_cat[starts] = self.tp_category[starts]

    def point_index(self, m: int, t: int) -> int:
        if not 0 <= m < self.n_seq:
            raise ModelError(f"sequence index {m} out of range")
        length = self.seq_offsets[m + 1] - self.seq_offsets[m]
        if not 0 <= t < length:
            raise ModelError(f"time index {t} out of range for sequence {m}")
        return int(self.seq_offsets[m] + t)


class SttmModel:
    """Sampler state: flattened data, assignments, and count matrices."""

    def __init__(self, h: Hyperparams, data: FlatSequences, token_topic, tp_state, seed: int):
        self.h = h
        self.data = data
        self.token_topic = np.asarray(token_topic, dtype=np.int64)
        self.tp_state = np.asarray(tp_state, dtype=np.int64)
        if self.token_topic.shape != (data.n_tokens,):
            raise ModelError("token_topic has wrong shape")
        if self.tp_state.shape != (data.n_points,):
            raise ModelError("tp_state has wrong shape")
        if self.token_topic.size and not (
            (self.token_topic >= 0).all() and (self.token_topic < h.n_topics).all()
        ):
            raise ModelError("topic assignment out of range")
        if not ((self.tp_state >= 0).all() and (self.tp_state < h.n_states).all()):
            raise ModelError("state assignment out of range")
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.log_joint_history: list[float] = []
        self._tally()

    # ------------------------------------------------------------------
    # counts

    def _tally(self):
        """Recompute every count matrix from the current assignments."""
        h, d = self.h, self.data
        self.n_zw = np.zeros((h.n_topics, d.n_vocab), dtype=np.int64)
        np.add.at(self.n_zw, (self.token_topic, d.token_word), 1)
        self.n_z = np.bincount(self.token_topic, minlength=h.n_topics).astype(np.int64)

        token_state = self.tp_state[d.token_tp]
        self.n_sz = np.zeros((h.n_states, h.n_topics), dtype=np.int64)
        np.add.at(self.n_sz, (token_state, self.token_topic), 1)
        self.n_sz_sum = self.n_sz.sum(axis=1)

        doc_state = self.tp_state[d.doc_tp]
        self.n_sd = np.zeros((h.n_states, h.n_doc_types), dtype=np.int64)
        np.add.at(self.n_sd, (doc_state, d.doc_type_ids), 1)
        self.n_sd_sum = self.n_sd.sum(axis=1)

        self.n_mtz = np.zeros((d.n_points, h.n_topics), dtype=np.int64)
        np.add.at(self.n_mtz, (d.token_tp, self.token_topic), 1)

        start = h.n_states
        self.n_sas = np.zeros((h.n_states + 1, h.n_categories, h.n_states), dtype=np.int64)
        for p in range(d.n_points):
            src = start if d.tp_is_first[p] else int(self.tp_state[p - 1])
            self.n_sas[src, d.tp_in_cat[p], self.tp_state[p]] += 1
        self.n_sas_sum = self.n_sas.sum(axis=2)

    def audit(self):
        """Recompute all counts from assignments and compare exactly."""
        kept = {
            name: getattr(self, name).copy()
            for name in ("n_zw", "n_z", "n_sz", "n_sz_sum", "n_sd", "n_sd_sum",
                         "n_sas", "n_sas_sum", "n_mtz")
        }
        self._tally()
        bad = [name for name, arr in kept.items() if not np.array_equal(arr, getattr(self, name))]
        if bad:
            raise ModelError(f"count audit failed for: {', '.join(sorted(bad))}")

    # ------------------------------------------------------------------
    # single-site conditionals (same compiled scorers the sweeps use)

    def topic_conditional(self, m: int, t: int, i: int) -> np.ndarray:
        """Conditional over topics for token ``i`` of time point ``(m, t)``."""
        d = self.data
        p = d.point_index(m, t)
        if not 0 <= i < d.tp_n_words[p]:
            raise ModelError(f"token index {i} out of range for time point ({m}, {t})")
        tok = int(d.tp_token_offsets[p] + i)
        z_old = int(self.token_topic[tok])
        w = int(d.token_word[tok])
        _detach_token(tok, d.token_word, d.token_tp, self.token_topic, self.tp_state,
                      self.n_zw, self.n_z, self.n_sz, self.n_mtz)
        scores = np.empty(self.h.n_topics, dtype=np.float64)
        total = _topic_scores(p, w, self.n_mtz, self.n_zw, self.n_z,
                              self.h.alpha, self.h.beta, d.n_vocab, scores)
        _attach_token(tok, z_old, d.token_word, d.token_tp, self.token_topic, self.tp_state,
                      self.n_zw, self.n_z, self.n_sz, self.n_mtz)
        return scores / total

    def _point_context(self, p: int):
        d = self.data
        in_row = self.h.n_states if d.tp_is_first[p] else int(self.tp_state[p - 1])
        in_cat = int(d.tp_in_cat[p])
        out_cat = int(d.tp_category[p])
        has_next = bool(d.tp_has_next[p])
        next_state = int(self.tp_state[p + 1]) if has_next else -1
        return in_row, in_cat, out_cat, next_state, has_next

    def state_conditional(self, m: int, t: int) -> np.ndarray:
        """Conditional over states for time point ``(m, t)``."""
        d = self.data
        p = d.point_index(m, t)
        c_old = int(self.tp_state[p])
        in_row, in_cat, out_cat, next_state, has_next = self._point_context(p)
        args = (d.tp_type_counts, d.tp_n_docs, d.tp_n_words, self.n_mtz,
                self.n_sd, self.n_sd_sum, self.n_sz, self.n_sz_sum,
                self.n_sas, self.n_sas_sum)
        _detach_timepoint(p, c_old, in_row, in_cat, out_cat, next_state, has_next, *args)
        logs = np.empty(self.h.n_states, dtype=np.float64)
        _state_log_scores(p, in_row, in_cat, out_cat, next_state, has_next,
                          d.tp_type_counts, d.tp_n_docs,
                          self.n_sd, self.n_sd_sum, self.n_sas, self.n_sas_sum,
                          self.h.nu, self.h.gamma, logs)
        _attach_timepoint(p, c_old, in_row, in_cat, out_cat, next_state, has_next, *args)
        probs = np.exp(logs - logs.max())
        return probs / probs.sum()

    def resample_topic(self, m: int, t: int, i: int) -> int:
        """Draw a new topic for one token from its conditional."""
        probs = self.topic_conditional(m, t, i)
        z_new = int(np.searchsorted(np.cumsum(probs), self.rng.random(), side="right"))
        z_new = min(z_new, self.h.n_topics - 1)
        d = self.data
        tok = int(d.tp_token_offsets[d.point_index(m, t)] + i)
        _detach_token(tok, d.token_word, d.token_tp, self.token_topic, self.tp_state,
                      self.n_zw, self.n_z, self.n_sz, self.n_mtz)
        _attach_token(tok, z_new, d.token_word, d.token_tp, self.token_topic, self.tp_state,
                      self.n_zw, self.n_z, self.n_sz, self.n_mtz)
        return z_new

    def resample_state(self, m: int, t: int) -> int:
        """Draw a new state for one time point from its conditional."""
        probs = self.state_conditional(m, t)
        c_new = int(np.searchsorted(np.cumsum(probs), self.rng.random(), side="right"))
        c_new = min(c_new, self.h.n_states - 1)
        d = self.data
        p = d.point_index(m, t)
        c_old = int(self.tp_state[p])
        in_row, in_cat, out_cat, next_state, has_next = self._point_context(p)
        args = (d.tp_type_counts, d.tp_n_docs, d.tp_n_words, self.n_mtz,
                self.n_sd, self.n_sd_sum, self.n_sz, self.n_sz_sum,
                self.n_sas, self.n_sas_sum)
        _detach_timepoint(p, c_old, in_row, in_cat, out_cat, next_state, has_next, *args)
        self.tp_state[p] = c_new
        _attach_timepoint(p, c_new, in_row, in_cat, out_cat, next_state, has_next, *args)
        return c_new

    # ------------------------------------------------------------------

    def joint_log_prob(self) -> float:
        """Collapsed log p(words, topics, states, doc types | categories).

        One Dirichlet-multinomial marginal per count row: word draws per
        topic, topic draws per time point, doc-type draws per state, and
        transition draws per (source row, category).
        """
        h = self.h
        total = _dirmult_log(self.n_zw, h.beta)
        total += _dirmult_log(self.n_mtz, h.alpha)
        total += _dirmult_log(self.n_sd, h.nu)
        total += _dirmult_log(self.n_sas.reshape(-1, h.n_states), h.gamma)
        return float(total)

    def state_paths(self) -> list[list[int]]:
        """Current state assignments grouped per sequence."""
        off = self.data.seq_offsets
        return [self.tp_state[off[m]:off[m + 1]].tolist() for m in range(self.data.n_seq)]

    def category_paths(self) -> list[list[int]]:
        off = self.data.seq_offsets
        return [self.data.tp_category[off[m]:off[m + 1]].tolist() for m in range(self.data.n_seq)]


def init_model(sequences: SequenceSet, h: Hyperparams, seed: int = 0) -> SttmModel:
    """Build a model with uniform-random initial assignments."""
    data = FlatSequences(sequences, h)
    rng = np.random.default_rng(seed)
    token_topic = rng.integers(0, h.n_topics, size=data.n_tokens, dtype=np.int64)
    tp_state = rng.integers(0, h.n_states, size=data.n_points, dtype=np.int64)
    model = SttmModel(h, data, token_topic, tp_state, seed)
    model.audit()
    return model


def run_gibbs(
    model: SttmModel,
    sweeps: int,
    burn_in: int,
    thin: int = 10,
    scan: str = "fixed",
) -> tuple[SttmModel, "StateProfiles"]:
    """Run collapsed Gibbs sweeps and estimate profiles.

    A sweep resamples every token topic (sequence-major, then time, then
    token order) and then every time-point state.  After ``burn_in`` sweeps,
    count snapshots are taken every ``thin`` sweeps and averaged; profile
    estimates come from the averaged counts.  ``sweeps == 0`` skips sampling
    and estimates from the initial counts.  With ``scan="random"`` the site
    order is permuted each sweep.
    """
    if sweeps == 0:
        return model, estimate_profiles(model)
    if not 0 <= burn_in < sweeps:
        raise ModelError(f"need 0 <= burn_in < sweeps, got {burn_in}, {sweeps}")
    if thin < 1:
        raise ModelError("thin must be >= 1")
    if scan not in ("fixed", "random"):
        raise ModelError(f"unknown scan order {scan!r}")

    h, d = model.h, model.data
    fixed_z = np.arange(d.n_tokens, dtype=np.int64)
    fixed_s = np.arange(d.n_points, dtype=np.int64)
    acc = {
        "n_zw": np.zeros_like(model.n_zw, dtype=np.float64),
        "n_sz": np.zeros_like(model.n_sz, dtype=np.float64),
        "n_sd": np.zeros_like(model.n_sd, dtype=np.float64),
        "n_sas": np.zeros_like(model.n_sas, dtype=np.float64),
        "n_mtz": np.zeros_like(model.n_mtz, dtype=np.float64),
    }
    n_snapshots = 0
    report_every = max(1, sweeps // 10)

    for sweep in range(1, sweeps + 1):
        if scan == "random":
            order_z = model.rng.permutation(d.n_tokens).astype(np.int64)
            order_s = model.rng.permutation(d.n_points).astype(np.int64)
        else:
            order_z, order_s = fixed_z, fixed_s
        u_z = model.rng.random(d.n_tokens)
        _sweep_topics(order_z, d.token_word, d.token_tp, model.token_topic,
                      model.tp_state, model.n_zw, model.n_z, model.n_sz,
                      model.n_mtz, h.alpha, h.beta, d.n_vocab, u_z)
        u_s = model.rng.random(d.n_points)
        _sweep_states(order_s, d.tp_is_first, d.tp_has_next, d.tp_category,
                      d.tp_in_cat, model.tp_state, d.tp_type_counts,
                      d.tp_n_docs, d.tp_n_words, model.n_mtz,
                      model.n_sd, model.n_sd_sum, model.n_sz, model.n_sz_sum,
                      model.n_sas, model.n_sas_sum,
                      h.nu, h.gamma, u_s)
        lj = model.joint_log_prob()
        model.log_joint_history.append(lj)
        if sweep > burn_in and (sweep - burn_in - 1) % thin == 0:
            acc["n_zw"] += model.n_zw
            acc["n_sz"] += model.n_sz
            acc["n_sd"] += model.n_sd
            acc["n_sas"] += model.n_sas
            acc["n_mtz"] += model.n_mtz
            n_snapshots += 1
        if sweep % report_every == 0 or sweep == sweeps:
            logger.info("sweep %d/%d joint log-prob %.2f", sweep, sweeps, lj)

    for key in acc:
        acc[key] /= n_snapshots
    profiles = _profiles_from_counts(
        h, acc["n_zw"], acc["n_sz"], acc["n_sd"], acc["n_sas"], acc["n_mtz"],
        model.data,
    )
    return model, profiles


@dataclass
class StateProfiles:
    """Point estimates of all model distributions.

    * ``phi``   (Z, V): word distribution per topic
    * ``theta`` (S, Z): topic distribution per state
    * ``psi``   (S, D): doc-type distribution per state
    * ``pi``    (S, A, S): next-state distribution per state and category
    * ``init``  (A, S): initial-state distribution per category
    * ``theta_point`` (P, Z): smoothed per-time-point topic mix, with
      ``seq_offsets``/``user_ids`` locating each row
    """

    phi: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    pi: np.ndarray
    init: np.ndarray
    theta_point: np.ndarray
    seq_offsets: np.ndarray
    user_ids: list[str]
    vocab: list[str]
    doc_types: list[str]
    categories: list[str]

    @property
    def n_states(self) -> int:
        return self.theta.shape[0]

    @property
    def n_topics(self) -> int:
        return self.phi.shape[0]

    def validate(self, tol: float = 1e-9):
        for name in ("phi", "theta", "psi", "theta_point"):
            arr = getattr(self, name)
            if arr.size and not np.allclose(arr.sum(axis=-1), 1.0, atol=tol):
                raise ModelError(f"{name} rows do not sum to 1")
            if arr.size and (arr < 0).any():
                raise ModelError(f"{name} has negative entries")
        for name in ("pi", "init"):
            arr = getattr(self, name)
            if not np.allclose(arr.sum(axis=-1), 1.0, atol=tol):
                raise ModelError(f"{name} rows do not sum to 1")
            if (arr < 0).any():
                raise ModelError(f"{name} has negative entries")

    def token_id(self, word: str) -> int | None:
        if not hasattr(self, "_word_index"):
            self._word_index = {w: i for i, w in enumerate(self.vocab)}
        return self._word_index.get(word)


def _profiles_from_counts(h, n_zw, n_sz, n_sd, n_sas, n_mtz, data) -> StateProfiles:
    """Prior-smoothed normalized estimates from (possibly averaged) counts."""
    phi = n_zw + h.beta
    phi /= phi.sum(axis=1, keepdims=True)
    theta = n_sz + h.alpha
    theta /= theta.sum(axis=1, keepdims=True)
    psi = n_sd + h.nu
    psi /= psi.sum(axis=1, keepdims=True)
    trans = n_sas + h.gamma
    trans = trans / trans.sum(axis=2, keepdims=True)
    theta_point = n_mtz + h.alpha
    theta_point /= theta_point.sum(axis=1, keepdims=True)
    return StateProfiles(
        phi=np.asarray(phi, dtype=np.float64),
        theta=np.asarray(theta, dtype=np.float64),
        psi=np.asarray(psi, dtype=np.float64),
        pi=np.asarray(trans[: h.n_states], dtype=np.float64),
        init=np.asarray(trans[h.n_states], dtype=np.float64),
        theta_point=np.asarray(theta_point, dtype=np.float64),
        seq_offsets=data.seq_offsets.copy(),
        user_ids=list(data.user_ids),
        vocab=list(data.vocab_words),
        doc_types=list(data.doc_type_names),
        categories=list(data.category_names),
    )


def estimate_profiles(model: SttmModel) -> StateProfiles:
    """Profile estimates from the model's current counts."""
    model.audit()
    return _profiles_from_counts(
        model.h,
        model.n_zw.astype(np.float64),
        model.n_sz.astype(np.float64),
        model.n_sd.astype(np.float64),
        model.n_sas.astype(np.float64),
        model.n_mtz.astype(np.float64),
        model.data,
    )


# ----------------------------------------------------------------------
# decoding

@dataclass
class ViterbiResult:
    states: list[int]
    log_prob: float
    topic_mix: np.ndarray  # (T, Z) maximum-likelihood topic mixture per time point


def _ml_topic_mixture(phi, start, token_ids, tol=1e-10, max_iter=500):
    """ML mixture weights over topics for a bag of tokens (EM, fixed phi)."""
    if len(token_ids) == 0:
        return start.copy()
    lik = phi[:, token_ids]  # (Z, n)
    mix = start.copy()
    for _ in range(max_iter):
        resp = mix[:, None] * lik
        resp /= resp.sum(axis=0, keepdims=True)
        new = resp.mean(axis=1)
        if np.max(np.abs(new - mix)) < tol:
            return new
        mix = new
    return mix


def viterbi_decode(profiles: StateProfiles, sequence) -> ViterbiResult:
    """Most likely state path for one weekly sequence.

    ``sequence`` is a :class:`peerlearn.corpus.Sequence` or a list of
    :class:`TimePoint`; document tokens may be vocabulary ids or word
    strings, and out-of-vocabulary words are dropped.  Ties prefer the lower
    state index, resolved from the final time point backwards.  After
    decoding, the per-time-point topic mixtures are estimated by maximum
    likelihood given the decoded state.
    """
    points = sequence.points if isinstance(sequence, Sequence) else list(sequence)
    if not points:
        raise ModelError("cannot decode an empty sequence")
    n_states = profiles.n_states
    n_cats = len(profiles.categories)

    per_point = []
    for point in points:
        if not 0 <= point.category < n_cats:
            raise ModelError(f"category {point.category} out of range")
        type_ids = []
        token_ids = []
        for doc in point.docs:
            if not 0 <= doc.type_id < len(profiles.doc_types):
                raise ModelError(f"doc type {doc.type_id} out of range")
            type_ids.append(doc.type_id)
            for tok in doc.tokens:
                if isinstance(tok, str):
                    tid = profiles.token_id(tok)
                    if tid is None:
                        continue  # out of vocabulary
                    token_ids.append(tid)
                else:
                    if not 0 <= tok < len(profiles.vocab):
                        raise ModelError(f"token id {tok} out of range")
                    token_ids.append(int(tok))
        per_point.append((point.category, type_ids, token_ids))

    # Zero probabilities are allowed in hand-built profiles; log(0) = -inf
    # marks the corresponding paths as impossible.
    with np.errstate(divide="ignore"):
        log_psi = np.log(profiles.psi)
        word_lik = profiles.theta @ profiles.phi  # (S, V)
        log_pi = np.log(profiles.pi)
        log_init = np.log(profiles.init)

        emit = np.zeros((len(per_point), n_states))
        for t, (_, type_ids, token_ids) in enumerate(per_point):
            if type_ids:
                emit[t] += log_psi[:, type_ids].sum(axis=1)
            if token_ids:
                emit[t] += np.log(word_lik[:, token_ids]).sum(axis=1)

    n_points = len(per_point)
    score = np.full((n_points, n_states), -np.inf)
    back = np.zeros((n_points, n_states), dtype=np.int64)
    score[0] = log_init[per_point[0][0]] + emit[0]
    for t in range(1, n_points):
        prev_cat = per_point[t - 1][0]
        cand = score[t - 1][:, None] + log_pi[:, prev_cat, :]  # (prev, cur)
        back[t] = np.argmax(cand, axis=0)  # first max -> lowest prev index
        score[t] = cand[back[t], np.arange(n_states)] + emit[t]

    last = int(np.argmax(score[-1]))
    path = [last]
    for t in range(n_points - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()

    topic_mix = np.vstack([
        _ml_topic_mixture(profiles.phi, profiles.theta[path[t]], token_ids)
        for t, (_, _, token_ids) in enumerate(per_point)
    ])
    return ViterbiResult(states=path, log_prob=float(score[-1, last]), topic_mix=topic_mix)


# ----------------------------------------------------------------------
# synthetic data

@dataclass
class SynthTruth:
    """Ground truth kept alongside a generated corpus."""

    states: list[list[int]]
    categories: list[list[int]]
    seed: int


def generate_synthetic(
    h: Hyperparams,
    truth: StateProfiles | dict,
    n_sequences: int,
    length,
    categories=None,
    docs_per_point: int = 2,
    words_per_doc: int = 8,
    seed: int = 0,
    vocab_words: list[str] | None = None,
    user_prefix: str = "synth",
    point_mixing: float | None = None,
) -> tuple[SequenceSet, SynthTruth]:
    """Forward-sample weekly sequences from known profiles.

    ``truth`` supplies ``phi``, ``theta``, ``psi``, ``pi`` and ``init``
    (either a :class:`StateProfiles` or a plain dict of arrays).
    ``length`` is an int or per-sequence list; ``categories`` is an optional
    per-sequence, per-week category schedule (uniform random when omitted).

    By default every time point draws topics straight from its state's
    mixture ``theta[s]``.  With ``point_mixing`` set to a concentration
    ``kappa > 0``, each time point instead draws its own mixture from
    ``Dirichlet(kappa * theta[s])`` first (mean ``theta[s]``, more spread
    for smaller ``kappa``).  That point-to-point variation is what makes
    the topic-word distributions recoverable by the sampler, which models
    topic mixtures at the time-point level; recovery fixtures should use
    it.  ``theta`` rows must be strictly positive when ``point_mixing``
    is given.
    """
    get = truth.get if isinstance(truth, dict) else lambda k: getattr(truth, k)
    phi = np.asarray(get("phi"), dtype=np.float64)
    theta = np.asarray(get("theta"), dtype=np.float64)
    psi = np.asarray(get("psi"), dtype=np.float64)
    pi = np.asarray(get("pi"), dtype=np.float64)
    init = np.asarray(get("init"), dtype=np.float64)
    n_vocab = phi.shape[1]
    if phi.shape[0] != h.n_topics or theta.shape != (h.n_states, h.n_topics):
        raise ModelError("truth profile shapes do not match hyperparams")
    if psi.shape != (h.n_states, h.n_doc_types):
        raise ModelError("psi shape does not match hyperparams")
    if pi.shape != (h.n_states, h.n_categories, h.n_states):
        raise ModelError("pi shape does not match hyperparams")
    if init.shape != (h.n_categories, h.n_states):
        raise ModelError("init shape does not match hyperparams")
    if point_mixing is not None:
        if not point_mixing > 0:
            raise ModelError("point_mixing must be > 0")
        if not (theta > 0).all():
            raise ModelError("point_mixing needs strictly positive theta rows")

    lengths = [length] * n_sequences if isinstance(length, int) else list(length)
    if len(lengths) != n_sequences:
        raise ModelError("length list does not match n_sequences")
    rng = np.random.default_rng(seed)
    if categories is None:
        categories = [
            rng.integers(0, h.n_categories, size=lengths[m]).tolist()
            for m in range(n_sequences)
        ]

    if vocab_words is None:
        vocab_words = [f"w{i:04d}" for i in range(n_vocab)]
    vocab = Vocabulary(vocab_words)
    doc_type_names = [f"type{k}" for k in range(h.n_doc_types)]
    category_names = [f"c{b}" for b in range(h.n_categories)]

    sequences = []
    all_states = []
    for m in range(n_sequences):
        cats = list(categories[m])
        if len(cats) != lengths[m]:
            raise ModelError(f"category schedule for sequence {m} has wrong length")
        states = []
        points = []
        prev = None
        for t in range(lengths[m]):
            b = int(cats[t])
            if prev is None:
                s = int(rng.choice(h.n_states, p=init[b]))
            else:
                s = int(rng.choice(h.n_states, p=pi[prev, int(cats[t - 1])]))
            states.append(s)
            prev = s
            if point_mixing is None:
                point_theta = theta[s]
            else:
                point_theta = rng.dirichlet(point_mixing * theta[s])
            docs = []
            for k in range(docs_per_point):
                dt = int(rng.choice(h.n_doc_types, p=psi[s]))
                topics = rng.choice(h.n_topics, size=words_per_doc, p=point_theta)
                words = tuple(int(rng.choice(n_vocab, p=phi[j])) for j in topics)
                docs.append(SeqDoc(doc_id=f"{user_prefix}{m:04d}-w{t}-d{k}",
                                   type_id=dt, tokens=words))
            points.append(TimePoint(week=t, category=b, docs=tuple(docs)))
        sequences.append(Sequence(user_id=f"{user_prefix}{m:04d}", points=tuple(points)))
        all_states.append(states)

    seq_set = SequenceSet(
        sequences=sequences,
        vocab=vocab,
        doc_types=doc_type_names,
        categories=category_names,
    )
    return seq_set, SynthTruth(states=all_states, categories=[list(c) for c in categories], seed=seed)


# ----------------------------------------------------------------------
# serialization

def save_model(model: SttmModel, path: str, meta: dict | None = None):
    d = model.data
    payload = {
        "schema": MODEL_SCHEMA,
        "meta": meta or {},
        "seed": model.seed,
        "hyperparams": model.h.to_dict(),
        "user_ids": d.user_ids,
        "vocab": d.vocab_words,
        "doc_types": d.doc_type_names,
        "categories": d.category_names,
        "seq_offsets": d.seq_offsets.tolist(),
        "tp_week": d.tp_week.tolist(),
        "tp_category": d.tp_category.tolist(),
        "tp_doc_offsets": d.tp_doc_offsets.tolist(),
        "doc_ids": d.doc_ids,
        "doc_type_ids": d.doc_type_ids.tolist(),
        "doc_token_offsets": d.doc_token_offsets.tolist(),
        "token_word": d.token_word.tolist(),
        "token_topic": model.token_topic.tolist(),
        "tp_state": model.tp_state.tolist(),
        "log_joint_history": model.log_joint_history,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _load_json_artifact(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: not a valid JSON artifact: {exc}") from exc
    if not isinstance(payload, dict):
        raise ModelError(f"{path}: expected a JSON object at the top level")
    return payload


def load_model(path: str) -> SttmModel:
    payload = _load_json_artifact(path)
    if payload.get("schema") != MODEL_SCHEMA:
        raise ModelError(f"unsupported model schema {payload.get('schema')!r}")
    h = Hyperparams.from_dict(payload["hyperparams"])
    data = FlatSequences._from_arrays(
        user_ids=list(payload["user_ids"]),
        vocab_words=list(payload["vocab"]),
        doc_type_names=list(payload["doc_types"]),
        category_names=list(payload["categories"]),
        n_vocab=len(payload["vocab"]),
        seq_offsets=np.asarray(payload["seq_offsets"], dtype=np.int64),
        tp_week=np.asarray(payload["tp_week"], dtype=np.int64),
        tp_category=np.asarray(payload["tp_category"], dtype=np.int64),
        tp_doc_offsets=np.asarray(payload["tp_doc_offsets"], dtype=np.int64),
        doc_ids=list(payload["doc_ids"]),
        doc_type_ids=np.asarray(payload["doc_type_ids"], dtype=np.int64),
        doc_token_offsets=np.asarray(payload["doc_token_offsets"], dtype=np.int64),
        token_word=np.asarray(payload["token_word"], dtype=np.int64),
    )
    model = SttmModel(
        h, data,
        np.asarray(payload["token_topic"], dtype=np.int64),
        np.asarray(payload["tp_state"], dtype=np.int64),
        int(payload["seed"]),
    )
    model.log_joint_history = list(payload["log_joint_history"])
    model.audit()
    return model


def save_profiles(profiles: StateProfiles, path: str, meta: dict | None = None):
    payload = {
        "schema": PROFILES_SCHEMA,
        "meta": meta or {},
        "phi": profiles.phi.tolist(),
        "theta": profiles.theta.tolist(),
        "psi": profiles.psi.tolist(),
        "pi": profiles.pi.tolist(),
        "init": profiles.init.tolist(),
        "theta_point": profiles.theta_point.tolist(),
        "seq_offsets": profiles.seq_offsets.tolist(),
        "user_ids": profiles.user_ids,
        "vocab": profiles.vocab,
        "doc_types": profiles.doc_types,
        "categories": profiles.categories,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_profiles(path: str) -> StateProfiles:
    payload = _load_json_artifact(path)
    if payload.get("schema") != PROFILES_SCHEMA:
        raise ModelError(f"unsupported profiles schema {payload.get('schema')!r}")
    return StateProfiles(
        phi=np.asarray(payload["phi"], dtype=np.float64),
        theta=np.asarray(payload["theta"], dtype=np.float64),
        psi=np.asarray(payload["psi"], dtype=np.float64),
        pi=np.asarray(payload["pi"], dtype=np.float64),
        init=np.asarray(payload["init"], dtype=np.float64),
        theta_point=np.asarray(payload["theta_point"], dtype=np.float64),
        seq_offsets=np.asarray(payload["seq_offsets"], dtype=np.int64),
        user_ids=list(payload["user_ids"]),
        vocab=list(payload["vocab"]),
        doc_types=list(payload["doc_types"]),
        categories=list(payload["categories"]),
    )

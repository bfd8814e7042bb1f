"""Command-line surface: train, analyze, recommend, synth.

Configuration comes from an optional key=value file plus flag overrides
(flags win).  Every artifact embeds the tool version, a short hash of
the effective configuration, and the seed, so a rerun with the same
triple can be compared byte for byte.

Exit codes: 0 success, 2 bad input or configuration, 3 infeasible
assignment constraints, 4 unexpected internal failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback

import numpy as np

from . import __version__
from .analysis import (
    chi_square_csv,
    export_transition_graphs,
    occupancy_csv,
    occupancy_table,
    pairwise_chi_square,
    render_csv,
    state_summary_csv,
)
from .config import RunConfig, load_config
from .corpus import (
    EFF_TYPES,
    SECONDS_PER_WEEK,
    SOCIAL_CATEGORIES,
    EffType,
    load_corpus,
)
from .errors import ConfigError, CorpusError, InfeasibleError, PeerlearnError, RecommenderError
from .recommender import (
    AssignmentProblem,
    DiscussionFeatures,
    UserFeatures,
    baseline_filter,
    constraint_filter,
    evaluate_map,
    evaluate_ob,
    hits_centrality,
    load_discussions_jsonl,
    load_participation_csv,
    mode_flags,
    split_per_user,
    train_relevance,
)
from .recommender.assign import BASELINE_MODES
from .sttm import (
    Hyperparams,
    generate_synthetic,
    init_model,
    load_model,
    load_profiles,
    run_gibbs,
    save_model,
    save_profiles,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4

#: Relevance-evaluation modes; the mode itself fixes the feature set and
#: the output is a plain per-user top-N ranking.
_EVAL_FEATURES = {
    "camf": "base",
    "camf_g": "g",
    "camf_c": "c",
    "camf_gc": "gc",
}
_FEATURE_ALIASES = {"base": "base", "g": "g", "c": "c", "gc": "gc"}
_FEATURE_ALIASES.update(_EVAL_FEATURES)


def _meta(cfg: RunConfig) -> dict:
    return {"version": __version__, "config_hash": cfg.hash(), "seed": cfg.seed}


def _meta_line(cfg: RunConfig) -> str:
    return f"version={__version__} config={cfg.hash()} seed={cfg.seed}"


def _write_text(path: str, text: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_json(path: str, payload: dict):
    _write_text(path, json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def _write_jsonl(path: str, records, meta_line: str):
    lines = [f"# {meta_line}\n"]
    lines.extend(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n" for rec in records)
    _write_text(path, "".join(lines))


def _check_inputs(*paths: str):
    for p in paths:
        if not os.path.isfile(p):
            raise FileNotFoundError(f"input file not found: {p}")


def _resolve_config(args) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for name in (
        "course_start", "seed", "states", "topics", "sweeps", "burn_in",
        "thin", "chains", "scan", "features", "mode", "epochs", "latent_dim",
        "neg_ratio", "top_n", "user_cap", "top_words",
    ):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "graph_categories", None):
        overrides["graph_categories"] = tuple(
            part.strip() for part in args.graph_categories.split(",") if part.strip()
        )
    cfg = cfg.replace(**overrides)
    # A --sweeps override below the configured burn-in would otherwise be
    # rejected downstream; shrink the burn-in unless it was given explicitly.
    if getattr(args, "sweeps", None) is not None and getattr(args, "burn_in", None) is None:
        if 0 < cfg.sweeps <= cfg.burn_in:
            cfg = cfg.replace(burn_in=cfg.sweeps // 2)
    return cfg


# ----------------------------------------------------------------------
# train

def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    if cfg.chains < 1:
        raise ConfigError("chains must be >= 1")
    _check_inputs(args.documents, args.follows, args.goal_labels)
    corpus = load_corpus(
        args.documents, args.follows, args.goal_labels,
        course_start=cfg.course_start, hashtags=cfg.hashtags,
    )
    sequences = corpus.build_sequences()
    if not sequences.sequences:
        raise CorpusError("corpus has no documents with usable tokens")
    h = Hyperparams(
        n_states=cfg.states,
        n_topics=cfg.topics,
        n_doc_types=sequences.n_doc_types,
        n_categories=sequences.n_categories,
        alpha=cfg.alpha,
        beta=cfg.beta,
        nu=cfg.nu,
        gamma=cfg.gamma,
    )

    best = None
    for i in range(cfg.chains):
        model = init_model(sequences, h, seed=cfg.seed + i)
        model, profiles = run_gibbs(model, cfg.sweeps, cfg.burn_in, thin=cfg.thin, scan=cfg.scan)
        final = model.log_joint_history[-1] if model.log_joint_history else model.joint_log_prob()
        logger.info("chain %d/%d: final joint log-prob %.4f", i + 1, cfg.chains, final)
        if best is None or final > best[0]:
            best = (final, model, profiles)
    _, model, profiles = best

    os.makedirs(args.out, exist_ok=True)
    meta = _meta(cfg)
    model_path = os.path.join(args.out, "model.json")
    save_model(model, model_path, meta=meta)
    save_profiles(profiles, os.path.join(args.out, "profiles.json"), meta=meta)
    print(
        f"trained {h.n_states} states / {h.n_topics} topics on "
        f"{len(sequences.sequences)} sequences ({cfg.sweeps} sweeps) -> {model_path}"
    )
    return EXIT_OK


# ----------------------------------------------------------------------
# analyze

def cmd_analyze(args) -> int:
    cfg = _resolve_config(args)
    model_path = args.model or os.path.join(args.out, "model.json")
    profiles_path = args.profiles or os.path.join(args.out, "profiles.json")
    _check_inputs(model_path, profiles_path)
    model = load_model(model_path)
    profiles = load_profiles(profiles_path)
    line = _meta_line(cfg)

    _write_text(
        os.path.join(args.out, "state_summary.csv"),
        state_summary_csv(profiles, top_k=cfg.top_words, meta=line),
    )

    table = occupancy_table(model.state_paths(), model.category_paths(), n_states=model.h.n_states)
    _write_text(os.path.join(args.out, "occupancy.csv"), occupancy_csv(table, meta=line))
    _write_text(
        os.path.join(args.out, "chi_square.csv"),
        chi_square_csv(pairwise_chi_square(table), meta=line),
    )

    graphs = export_transition_graphs(model, cfg.graph_categories, meta=line)
    for name, dot in sorted(graphs.items()):
        _write_text(os.path.join(args.out, "graphs", f"transitions_{name}.dot"), dot)
    print(f"wrote state_summary.csv, occupancy.csv, chi_square.csv and {len(graphs)} graphs to {args.out}")
    return EXIT_OK


# ----------------------------------------------------------------------
# recommend

def _user_features(corpus, participation, discussions) -> dict[str, UserFeatures]:
    """Feature rows for every user seen in the corpus or the forum data.

    Goal quality is the user's tier at the end of the observed corpus,
    centrality the mean of HITS authority and hub on the follow graph,
    and the registration week the week of the user's first document.
    Users known only from forum data default to zero for all three.
    Activity counts are scaled to [0, 1] by their maxima so that a single
    SGD learning rate suits every weight block.
    """
    names = set(corpus.users)
    names.update(u for u, _ in participation)
    for feats in discussions.values():
        names.update(feats.participants)

    participated: dict[str, set] = {}
    for u, d in participation:
        participated.setdefault(u, set()).add(d)
    initiated: dict[str, int] = {}
    for d in sorted(discussions):
        parts = discussions[d].participants
        if parts:
            initiated[parts[0]] = initiated.get(parts[0], 0) + 1
    max_part = max((len(v) for v in participated.values()), default=0) or 1
    max_init = max(initiated.values(), default=0) or 1

    centrality = hits_centrality(
        [(e.follower, e.followee) for e in corpus.follow_edges], nodes=names
    )
    known = set(corpus.users)
    last = corpus.last_week()
    out = {}
    for u in sorted(names):
        out[u] = UserFeatures(
            n_participated=len(participated.get(u, ())) / max_part,
            n_initiated=initiated.get(u, 0) / max_init,
            goal_quality=corpus.goal_category(u, last).value if u in known else 0,
            centrality=centrality.get(u, (0.0, 0.0, 0.0))[2],
            reg_week=corpus.first_active_week(u) if u in known else 0,
        )
    return out


def _scaled_discussions(discussions: dict[str, DiscussionFeatures]) -> dict[str, DiscussionFeatures]:
    """Rescale reply counts and lengths to [0, 1] by their corpus maxima.

    Uniform-rate SGD diverges when feature magnitudes span orders of
    magnitude; the scaling is absorbed by the learned weights.
    """
    max_repl = max((f.n_replies for f in discussions.values()), default=0) or 1
    max_len = max((f.length for f in discussions.values()), default=0) or 1
    return {
        d: DiscussionFeatures(
            n_replies=f.n_replies / max_repl,
            length=f.length / max_len,
            participants=f.participants,
        )
        for d, f in discussions.items()
    }


def _canonical_mode(raw: str) -> str:
    """Normalize a mode flag to its canonical spelling.

    Baselines keep their CamelCase names, constrained and evaluation
    modes are lowercased ("MCCF_G" -> "mccf_g", "CAMF" -> "camf").
    """
    low = raw.strip().lower()
    for name in BASELINE_MODES:
        if low == name.lower():
            return name
    if low in ("mccf", "mccf_g", "mccf_c", "mccf_gc") or low in _EVAL_FEATURES:
        return low
    raise ConfigError(
        f"unknown mode {raw!r}; expected one of GoalPart, HighCent, "
        "GoalPart_HighCent, MCCF, MCCF_G, MCCF_C, MCCF_GC, CAMF, CAMF_G, "
        "CAMF_C or CAMF_GC"
    )


def cmd_recommend(args) -> int:
    cfg = _resolve_config(args)
    mode = _canonical_mode(cfg.mode)
    if mode in _EVAL_FEATURES:
        features = _EVAL_FEATURES[mode]
    else:
        features = _FEATURE_ALIASES.get(cfg.features.strip().lower())
        if features is None:
            raise ConfigError(f"unknown feature set {cfg.features!r}; expected base, g, c or gc")

    _check_inputs(args.documents, args.follows, args.goal_labels,
                  args.participation, args.discussions)
    corpus = load_corpus(
        args.documents, args.follows, args.goal_labels,
        course_start=cfg.course_start, hashtags=cfg.hashtags,
    )
    participation = load_participation_csv(args.participation)
    discussions = _scaled_discussions(load_discussions_jsonl(args.discussions))
    for _, d in participation:
        if d not in discussions:
            raise RecommenderError(f"participation references unknown discussion {d!r}")
    users = _user_features(corpus, participation, discussions)

    train_pairs, test_pairs = split_per_user(participation, seed=cfg.seed)
    model = train_relevance(
        train_pairs, users, discussions,
        features=features,
        latent_dim=cfg.latent_dim,
        learning_rate=cfg.learning_rate,
        reg=cfg.reg,
        epochs=cfg.epochs,
        neg_ratio=cfg.neg_ratio,
        seed=cfg.seed,
    )
    logger.info("relevance model trained on %d pairs (%d held out)",
                len(train_pairs), len(test_pairs))

    disc_order = sorted(discussions)
    observed = set(train_pairs)
    map_result = None
    if test_pairs:
        held_out: dict[str, list[str]] = {}
        for u, d in test_pairs:
            held_out.setdefault(u, []).append(d)
        candidates = {
            u: [d for d in disc_order if (u, d) not in observed] for u in held_out
        }
        try:
            map_result = evaluate_map(model, held_out, candidates)
        except RecommenderError:
            map_result = None

    # Candidate pool for assignment: everything not already participated in.
    seen = observed | set(test_pairs)
    scores = {
        (u, d): model.predict(u, d)
        for u in sorted(users)
        for d in disc_order
        if (u, d) not in seen
    }
    if not scores:
        raise RecommenderError("no candidate user/discussion pairs left to assign")

    enforce_goal, enforce_cent = (False, False)
    if mode.startswith("mccf"):
        enforce_goal, enforce_cent = mode_flags(mode)
    problem = AssignmentProblem(
        scores=scores,
        users=users,
        discussions=disc_order,
        goal_threshold=cfg.goal_threshold,
        centrality_threshold=cfg.centrality_threshold,
        penalty_weight=cfg.penalty_weight,
        user_cap=cfg.user_cap,
        workload_cost=cfg.workload_cost,
        enforce_goal=enforce_goal,
        enforce_centrality=enforce_cent,
    )

    if mode in BASELINE_MODES:
        assignment = baseline_filter(
            scores, users, mode, cfg.top_n,
            centrality_threshold=cfg.centrality_threshold,
        )
    elif mode in _EVAL_FEATURES:
        assignment = set()
        by_user: dict[str, list[tuple[str, str]]] = {}
        for u, d in scores:
            by_user.setdefault(u, []).append((u, d))
        for u in sorted(by_user):
            ranked = sorted(by_user[u], key=lambda p: (-scores[p], p[1]))
            assignment.update(ranked[: cfg.top_n])
    else:
        assignment = constraint_filter(problem)

    line = _meta_line(cfg)
    rows = [[u, d, f"{scores[(u, d)]:.6f}"] for u, d in sorted(assignment)]
    _write_text(
        os.path.join(args.out, "recommendations.csv"),
        render_csv(rows, ["user_id", "discussion_id", "score"], meta=line),
    )
    report = {
        "meta": _meta(cfg),
        "mode": mode,
        "features": features,
        "n_users": len(users),
        "n_discussions": len(discussions),
        "n_train_pairs": len(train_pairs),
        "n_test_pairs": len(test_pairs),
        "n_assigned": len(assignment),
        "objective": evaluate_ob(assignment, problem),
        "map": None if map_result is None else map_result.map,
        "map_users_evaluated": 0 if map_result is None else map_result.n_evaluated,
        "map_users_skipped": 0 if map_result is None else map_result.n_skipped,
        "config": cfg.to_dict(),
    }
    _write_json(os.path.join(args.out, "report.json"), report)
    map_text = "n/a" if map_result is None else f"{map_result.map:.4f}"
    print(
        f"mode {mode}: assigned {len(assignment)} pairs, "
        f"objective {report['objective']:.4f}, MAP {map_text} -> {args.out}"
    )
    return EXIT_OK


# ----------------------------------------------------------------------
# synth

def _synth_truth(cfg: RunConfig, args) -> tuple[dict, int]:
    """Ground-truth distributions for the generator plus the vocab size."""
    n_types = len(EFF_TYPES)
    n_cats = len(SOCIAL_CATEGORIES)
    if args.truth:
        _check_inputs(args.truth)
        profiles = load_profiles(args.truth)
        profiles.validate()
        if profiles.psi.shape[1] != n_types:
            raise ConfigError(
                f"truth profiles use {profiles.psi.shape[1]} doc types, "
                f"the corpus writer needs {n_types}"
            )
        if profiles.init.shape[0] != n_cats:
            raise ConfigError(
                f"truth profiles use {profiles.init.shape[0]} connection "
                f"categories, the corpus writer needs {n_cats}"
            )
        dists = {
            "phi": profiles.phi,
            "theta": profiles.theta,
            "psi": profiles.psi,
            "pi": profiles.pi,
            "init": profiles.init,
        }
        return dists, profiles.phi.shape[1]

    rng = np.random.default_rng(cfg.seed)
    n_words = args.vocab
    if n_words < 1:
        raise ConfigError("--vocab must be >= 1")
    dists = {
        "phi": rng.dirichlet(np.full(n_words, 0.1), size=cfg.topics),
        "theta": rng.dirichlet(np.full(cfg.topics, 0.3), size=cfg.states),
        "psi": rng.dirichlet(np.full(n_types, 0.5), size=cfg.states),
        "pi": rng.dirichlet(np.full(cfg.states, 0.5), size=(cfg.states, n_cats)),
        "init": rng.dirichlet(np.full(cfg.states, 0.5), size=n_cats),
    }
    return dists, n_words


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    if args.sequences < 1 or args.length < 1:
        raise ConfigError("--sequences and --length must be >= 1")
    if not cfg.hashtags:
        raise ConfigError("at least one course hashtag is needed to mark relevant tweets")

    dists, n_words = _synth_truth(cfg, args)
    n_states = dists["theta"].shape[0]
    n_topics = dists["phi"].shape[0]
    h = Hyperparams(
        n_states=n_states,
        n_topics=n_topics,
        n_doc_types=len(EFF_TYPES),
        n_categories=len(SOCIAL_CATEGORIES),
        alpha=cfg.alpha,
        beta=cfg.beta,
        nu=cfg.nu,
        gamma=cfg.gamma,
    )
    vocab_words = [f"w{i:04d}" for i in range(n_words)]
    seq_set, truth = generate_synthetic(
        h, dists, args.sequences, args.length,
        docs_per_point=args.docs_per_point,
        words_per_doc=args.words_per_doc,
        seed=cfg.seed,
        vocab_words=vocab_words,
    )

    line = _meta_line(cfg)
    hashtag = cfg.hashtags[0]
    documents = []
    goal_labels = []
    for seq in seq_set.sequences:
        for point in seq.points:
            for k, doc in enumerate(point.docs):
                text = " ".join(seq_set.vocab.word(i) for i in doc.tokens)
                eff = EFF_TYPES[doc.type_id]
                if eff is EffType.REL_GOAL_NOTE:
                    raw_type = "GoalNote"
                    goal_labels.append([doc.doc_id, "true"])
                elif eff is EffType.IR_GOAL_NOTE:
                    raw_type = "GoalNote"
                    goal_labels.append([doc.doc_id, "false"])
                elif eff is EffType.POST:
                    raw_type = "ProsoloPost"
                elif eff is EffType.BLOG:
                    raw_type = "BlogPost"
                elif eff is EffType.REL_TWEET:
                    raw_type = "Tweet"
                    # The marker rides inside a URL: relevance detection sees
                    # the hashtag, the tokenizer drops the whole URL, so the
                    # token stream stays exactly the sampled words.
                    text = f"{text} http://t.co/{hashtag}"
                else:
                    raw_type = "Tweet"
                documents.append({
                    "doc_id": doc.doc_id,
                    "user_id": seq.user_id,
                    "timestamp": cfg.course_start + point.week * SECONDS_PER_WEEK + 3600 * (k + 1),
                    "doc_type": raw_type,
                    "text": text,
                })

    user_ids = [seq.user_id for seq in seq_set.sequences]
    rng = np.random.default_rng(cfg.seed + 1)
    follow_rows = set()
    if len(user_ids) > 1:
        for u in user_ids:
            for _ in range(int(rng.integers(0, 3))):
                v = user_ids[int(rng.integers(0, len(user_ids)))]
                if v != u:
                    follow_rows.add((u, v, int(rng.integers(0, args.length))))

    n_disc = args.discussions if args.discussions is not None else max(3, args.sequences // 3)
    if n_disc < 1:
        raise ConfigError("--discussions must be >= 1")
    discussion_rows = []
    participation_rows = []
    for i in range(n_disc):
        disc_id = f"disc{i:03d}"
        if len(user_ids) < 2:
            members = list(user_ids)
        else:
            size = int(rng.integers(2, min(5, len(user_ids)) + 1))
            picks = rng.choice(len(user_ids), size=size, replace=False)
            members = [user_ids[j] for j in sorted(picks.tolist())]
        discussion_rows.append({
            "discussion_id": disc_id,
            "n_replies": int(rng.integers(0, 30)),
            "length": int(rng.integers(20, 400)),
            "participants": members,
        })
        participation_rows.extend([u, disc_id] for u in members)

    os.makedirs(args.out, exist_ok=True)
    _write_jsonl(os.path.join(args.out, "documents.jsonl"), documents, line)
    _write_text(
        os.path.join(args.out, "goal_labels.csv"),
        render_csv(goal_labels, ["doc_id", "contains_goal"], meta=line),
    )
    _write_text(
        os.path.join(args.out, "follows.csv"),
        render_csv(
            [[u, v, str(w)] for u, v, w in sorted(follow_rows)],
            ["follower", "followee", "week_index"],
            meta=line,
        ),
    )
    _write_jsonl(os.path.join(args.out, "discussions.jsonl"), discussion_rows, line)
    _write_text(
        os.path.join(args.out, "participation.csv"),
        render_csv(participation_rows, ["user_id", "discussion_id"], meta=line),
    )
    _write_json(os.path.join(args.out, "truth.json"), {
        "meta": _meta(cfg),
        "seed": cfg.seed,
        "phi": np.asarray(dists["phi"], dtype=np.float64).tolist(),
        "theta": np.asarray(dists["theta"], dtype=np.float64).tolist(),
        "psi": np.asarray(dists["psi"], dtype=np.float64).tolist(),
        "pi": np.asarray(dists["pi"], dtype=np.float64).tolist(),
        "init": np.asarray(dists["init"], dtype=np.float64).tolist(),
        "states": truth.states,
        "categories": truth.categories,
        "user_ids": user_ids,
        "vocab": vocab_words,
        "doc_types": [t.value for t in EFF_TYPES],
        "category_names": list(SOCIAL_CATEGORIES),
    })
    print(
        f"synthesized {len(documents)} documents for {len(user_ids)} users "
        f"and {n_disc} discussions -> {args.out}"
    )
    return EXIT_OK


# ----------------------------------------------------------------------
# parser

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="peerlearn",
        description="Weekly learner-state modeling and discussion recommendation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", parents=[common], help="fit the state model on a corpus")
    p_train.add_argument("--documents", required=True, help="documents.jsonl path")
    p_train.add_argument("--follows", required=True, help="follows.csv path")
    p_train.add_argument("--goal-labels", dest="goal_labels", required=True,
                         help="goal_labels.csv path")
    p_train.add_argument("--states", type=int, help="number of latent states (default 10)")
    p_train.add_argument("--topics", type=int, help="number of topics (default 20)")
    p_train.add_argument("--sweeps", type=int, help="Gibbs sweeps (default 2000)")
    p_train.add_argument("--burn-in", dest="burn_in", type=int,
                         help="sweeps to discard (default 1000)")
    p_train.add_argument("--thin", type=int, help="snapshot interval after burn-in (default 10)")
    p_train.add_argument("--chains", type=int, help="independent chains, best kept (default 1)")
    p_train.add_argument("--scan", choices=("fixed", "random"), help="site visit order per sweep")
    p_train.add_argument("--course-start", dest="course_start", type=int,
                         help="epoch seconds of week 0 (default 0)")
    p_train.set_defaults(func=cmd_train)

    p_analyze = sub.add_parser("analyze", parents=[common],
                               help="tables and transition graphs from a fitted model")
    p_analyze.add_argument("--model", help="model.json path (default: <out>/model.json)")
    p_analyze.add_argument("--profiles", help="profiles.json path (default: <out>/profiles.json)")
    p_analyze.add_argument("--graph-categories", dest="graph_categories",
                           help="comma-separated category names (default S1,S2,S3,S7)")
    p_analyze.add_argument("--top-words", dest="top_words", type=int,
                           help="words listed per topic (default 10)")
    p_analyze.set_defaults(func=cmd_analyze)

    p_rec = sub.add_parser("recommend", parents=[common],
                           help="train the relevance model and assign discussions")
    p_rec.add_argument("--documents", required=True, help="documents.jsonl path")
    p_rec.add_argument("--follows", required=True, help="follows.csv path")
    p_rec.add_argument("--goal-labels", dest="goal_labels", required=True,
                       help="goal_labels.csv path")
    p_rec.add_argument("--participation", required=True, help="participation.csv path")
    p_rec.add_argument("--discussions", required=True, help="discussions.jsonl path")
    p_rec.add_argument("--mode",
                       help="GoalPart, HighCent, GoalPart_HighCent, MCCF[_G|_C|_GC] "
                            "or CAMF[_G|_C|_GC] (default MCCF_GC)")
    p_rec.add_argument("--features", help="relevance features: base, g, c or gc (default gc)")
    p_rec.add_argument("--epochs", type=int, help="training epochs (default 200)")
    p_rec.add_argument("--latent-dim", dest="latent_dim", type=int,
                       help="latent dimensionality (default 8)")
    p_rec.add_argument("--top-n", dest="top_n", type=int,
                       help="list size for baseline and CAMF modes (default 5)")
    p_rec.add_argument("--user-cap", dest="user_cap", type=int,
                       help="assignments allowed per user (default 5)")
    p_rec.set_defaults(func=cmd_recommend)

    p_synth = sub.add_parser("synth", parents=[common],
                             help="forward-sample a synthetic corpus with known truth")
    p_synth.add_argument("--sequences", type=int, default=20, help="number of users (default 20)")
    p_synth.add_argument("--length", type=int, default=8, help="weeks per user (default 8)")
    p_synth.add_argument("--truth", help="profiles.json to sample from (default: random truth)")
    p_synth.add_argument("--states", type=int, help="states for the random truth (default 10)")
    p_synth.add_argument("--topics", type=int, help="topics for the random truth (default 20)")
    p_synth.add_argument("--vocab", type=int, default=120,
                         help="vocabulary size for the random truth (default 120)")
    p_synth.add_argument("--docs-per-point", dest="docs_per_point", type=int, default=2,
                         help="documents per user-week (default 2)")
    p_synth.add_argument("--words-per-doc", dest="words_per_doc", type=int, default=8,
                         help="tokens per document (default 8)")
    p_synth.add_argument("--discussions", type=int,
                         help="forum discussions to fabricate (default: sequences/3, min 3)")
    p_synth.add_argument("--course-start", dest="course_start", type=int,
                         help="epoch seconds of week 0 (default 0)")
    p_synth.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (PeerlearnError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

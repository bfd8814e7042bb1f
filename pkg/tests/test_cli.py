"""End-to-end tests for the command-line interface.

Everything runs in-process through ``main(argv)`` so exit codes and
artifacts can be checked without spawning subprocesses.
"""

import csv
import json
from collections import Counter

import numpy as np
import pytest

from peerlearn.cli import main
from peerlearn.corpus import EFF_TYPES, SECONDS_PER_WEEK, EffType, load_corpus
from peerlearn.sttm import Hyperparams, generate_synthetic, load_model

SYNTH_ARGS = (
    "--sequences", 6, "--length", 4, "--states", 3, "--topics", 4,
    "--vocab", 30, "--seed", 11,
)
SYNTH_FILES = (
    "documents.jsonl", "goal_labels.csv", "follows.csv",
    "discussions.jsonl", "participation.csv", "truth.json",
)


def cli(*args) -> int:
    return main([str(a) for a in args])


def read_rows(path):
    """Data rows of a CSV artifact, skipping the leading meta comment."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[1:]  # drop the header


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert cli("synth", "--out", out, *SYNTH_ARGS) == 0
    return out


@pytest.fixture(scope="module")
def corpus_args(synth_dir):
    return (
        "--documents", synth_dir / "documents.jsonl",
        "--follows", synth_dir / "follows.csv",
        "--goal-labels", synth_dir / "goal_labels.csv",
    )


@pytest.fixture(scope="module")
def forum_args(synth_dir):
    return (
        "--participation", synth_dir / "participation.csv",
        "--discussions", synth_dir / "discussions.jsonl",
    )


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory, corpus_args):
    out = tmp_path_factory.mktemp("trained")
    rc = cli("train", *corpus_args, "--out", out,
             "--states", 3, "--topics", 4, "--sweeps", 40, "--seed", 11)
    assert rc == 0
    return out


# ----------------------------------------------------------------------
# synth

def test_synth_writes_expected_files(synth_dir):
    for name in SYNTH_FILES:
        assert (synth_dir / name).is_file()
    first = (synth_dir / "documents.jsonl").read_text().splitlines()[0]
    assert first.startswith("# version=")
    assert "seed=11" in first
    truth = json.loads((synth_dir / "truth.json").read_text())
    assert len(truth["user_ids"]) == 6
    assert np.asarray(truth["phi"]).shape == (4, 30)
    assert truth["category_names"][-1] == "S7"


def test_synth_rerun_is_byte_identical(synth_dir, tmp_path):
    assert cli("synth", "--out", tmp_path, *SYNTH_ARGS) == 0
    for name in SYNTH_FILES:
        assert (tmp_path / name).read_bytes() == (synth_dir / name).read_bytes()


def test_synth_corpus_round_trips(synth_dir):
    """Reloading the written corpus recovers the sampled types and words."""
    truth = json.loads((synth_dir / "truth.json").read_text())
    corpus = load_corpus(
        str(synth_dir / "documents.jsonl"),
        str(synth_dir / "follows.csv"),
        str(synth_dir / "goal_labels.csv"),
        course_start=0,
    )
    rebuilt = corpus.build_sequences()
    assert [s.user_id for s in rebuilt.sequences] == truth["user_ids"]

    h = Hyperparams(
        n_states=len(truth["theta"]), n_topics=len(truth["phi"]),
        n_doc_types=len(EFF_TYPES), n_categories=len(truth["category_names"]),
    )
    dists = {k: np.asarray(truth[k]) for k in ("phi", "theta", "psi", "pi", "init")}
    reference, _ = generate_synthetic(
        h, dists, 6, 4, docs_per_point=2, words_per_doc=8,
        seed=11, vocab_words=truth["vocab"],
    )
    for seq, ref in zip(rebuilt.sequences, reference.sequences):
        assert [p.week for p in seq.points] == [p.week for p in ref.points]
        for point, ref_point in zip(seq.points, ref.points):
            assert [d.type_id for d in point.docs] == [d.type_id for d in ref_point.docs]
            for doc, ref_doc in zip(point.docs, ref_point.docs):
                if EFF_TYPES[doc.type_id] is EffType.IR_TWEET:
                    continue  # irrelevant tweets drop their text by design
                words = [rebuilt.vocab.word(t) for t in doc.tokens]
                assert words == [reference.vocab.word(t) for t in ref_doc.tokens]


def test_synth_rejects_bad_sizes(tmp_path, capsys):
    assert cli("synth", "--out", tmp_path, "--sequences", 0) == 2
    assert "--sequences" in capsys.readouterr().err


# ----------------------------------------------------------------------
# train

def test_train_writes_model_and_profiles(trained_dir):
    for name in ("model.json", "profiles.json"):
        payload = json.loads((trained_dir / name).read_text())
        assert payload["schema"] == 1
        assert payload["meta"]["seed"] == 11
    model = load_model(str(trained_dir / "model.json"))
    assert model.h.n_states == 3
    assert model.h.n_topics == 4
    assert len(model.data.user_ids) == 6


def test_train_rerun_is_byte_identical(corpus_args, trained_dir, tmp_path):
    rc = cli("train", *corpus_args, "--out", tmp_path,
             "--states", 3, "--topics", 4, "--sweeps", 40, "--seed", 11)
    assert rc == 0
    for name in ("model.json", "profiles.json"):
        assert (tmp_path / name).read_bytes() == (trained_dir / name).read_bytes()


def test_train_uses_documented_defaults(corpus_args, tmp_path):
    rc = cli("train", *corpus_args, "--out", tmp_path, "--sweeps", 6, "--seed", 11)
    assert rc == 0
    model = load_model(str(tmp_path / "model.json"))
    assert model.h.n_states == 10
    assert model.h.n_topics == 20


def test_train_clamps_burn_in_for_short_runs(corpus_args, tmp_path):
    # --sweeps 6 with the configured burn-in of 1000 only works because
    # the burn-in shrinks when it is not given explicitly ...
    assert cli("train", *corpus_args, "--out", tmp_path, "--sweeps", 6) == 0


def test_train_rejects_explicit_bad_burn_in(corpus_args, tmp_path, capsys):
    # ... an explicit burn-in at or above the sweep count stays an error.
    rc = cli("train", *corpus_args, "--out", tmp_path, "--sweeps", 10, "--burn-in", 20)
    assert rc == 2
    assert "burn_in" in capsys.readouterr().err


def test_train_missing_input_names_the_path(corpus_args, tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    rc = cli("train", "--documents", missing,
             *corpus_args[2:], "--out", tmp_path)
    assert rc == 2
    err = capsys.readouterr().err
    assert "input file not found" in err
    assert str(missing) in err


def test_train_rejects_empty_corpus(tmp_path, capsys):
    docs = tmp_path / "empty.jsonl"
    docs.write_text("# nothing here\n")
    follows = tmp_path / "follows.csv"
    follows.write_text("follower,followee,week_index\n")
    labels = tmp_path / "goal_labels.csv"
    labels.write_text("doc_id,contains_goal\n")
    rc = cli("train", "--documents", docs, "--follows", follows,
             "--goal-labels", labels, "--out", tmp_path)
    assert rc == 2
    assert "usable tokens" in capsys.readouterr().err


def test_internal_errors_exit_4(corpus_args, tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise RuntimeError("wires crossed")

    monkeypatch.setattr("peerlearn.cli.load_corpus", boom)
    rc = cli("train", *corpus_args, "--out", tmp_path, "--sweeps", 4)
    assert rc == 4
    assert "RuntimeError" in capsys.readouterr().err


# ----------------------------------------------------------------------
# config file handling

def test_config_file_sets_model_size(corpus_args, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# tiny run\nstates=4\ntopics=5\nsweeps=8\nburn_in=4\nseed=2\n")
    rc = cli("train", *corpus_args, "--out", tmp_path, "--config", cfg)
    assert rc == 0
    model = load_model(str(tmp_path / "model.json"))
    assert (model.h.n_states, model.h.n_topics) == (4, 5)
    assert model.seed == 2


def test_flags_override_config_file(corpus_args, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("states=4\ntopics=5\nsweeps=8\nburn_in=4\n")
    rc = cli("train", *corpus_args, "--out", tmp_path, "--config", cfg, "--states", 2)
    assert rc == 0
    model = load_model(str(tmp_path / "model.json"))
    assert (model.h.n_states, model.h.n_topics) == (2, 5)


def test_unknown_config_key_exits_2(corpus_args, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("staets=4\n")
    rc = cli("train", *corpus_args, "--out", tmp_path, "--config", cfg)
    assert rc == 2
    err = capsys.readouterr().err
    assert "unknown config key" in err
    assert ":1:" in err


def test_bad_config_value_exits_2(corpus_args, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("states=plenty\n")
    rc = cli("train", *corpus_args, "--out", tmp_path, "--config", cfg)
    assert rc == 2
    assert "bad value" in capsys.readouterr().err


# ----------------------------------------------------------------------
# analyze

def test_analyze_writes_tables_and_graphs(trained_dir, tmp_path):
    rc = cli("analyze", "--model", trained_dir / "model.json",
             "--profiles", trained_dir / "profiles.json",
             "--out", tmp_path, "--seed", 11)
    assert rc == 0
    for name in ("state_summary.csv", "occupancy.csv", "chi_square.csv"):
        assert (tmp_path / name).read_text().startswith("# version=")
    dots = sorted(p.name for p in (tmp_path / "graphs").iterdir())
    assert dots == [
        "transitions_S1.dot", "transitions_S2.dot",
        "transitions_S3.dot", "transitions_S7.dot",
    ]
    for name in dots:
        text = (tmp_path / "graphs" / name).read_text()
        assert text.startswith("// version=")
        assert text.rstrip().endswith("}")


def test_analyze_defaults_to_out_dir_artifacts(corpus_args, tmp_path):
    rc = cli("train", *corpus_args, "--out", tmp_path,
             "--states", 3, "--topics", 4, "--sweeps", 8, "--seed", 1)
    assert rc == 0
    assert cli("analyze", "--out", tmp_path) == 0
    assert (tmp_path / "occupancy.csv").is_file()


def test_analyze_graph_category_override(trained_dir, tmp_path):
    rc = cli("analyze", "--model", trained_dir / "model.json",
             "--profiles", trained_dir / "profiles.json",
             "--out", tmp_path, "--graph-categories", "S5,S7")
    assert rc == 0
    names = sorted(p.name for p in (tmp_path / "graphs").iterdir())
    assert names == ["transitions_S5.dot", "transitions_S7.dot"]


def test_analyze_missing_model_exits_2(tmp_path, capsys):
    rc = cli("analyze", "--out", tmp_path)
    assert rc == 2
    assert "model.json" in capsys.readouterr().err


# ----------------------------------------------------------------------
# recommend on the synthetic forum

def test_recommend_unconstrained_pipeline(corpus_args, forum_args, synth_dir, tmp_path):
    rc = cli("recommend", *corpus_args, *forum_args, "--out", tmp_path,
             "--mode", "MCCF", "--epochs", 30, "--seed", 11)
    assert rc == 0

    lines = (tmp_path / "recommendations.csv").read_text().splitlines()
    assert lines[0].startswith("# version=")
    assert lines[1] == "user_id,discussion_id,score"
    rows = read_rows(tmp_path / "recommendations.csv")
    for _, _, score in rows:
        float(score)  # must parse

    report = json.loads((tmp_path / "report.json").read_text())
    assert report["mode"] == "mccf"
    assert report["features"] == "gc"
    assert report["n_users"] == 6
    assert report["n_assigned"] == len(rows)
    assert report["n_train_pairs"] + report["n_test_pairs"] >= report["n_users"] - 1
    participated = {tuple(r) for r in read_rows(synth_dir / "participation.csv")}
    assert participated.isdisjoint({(u, d) for u, d, _ in rows})


def test_recommend_rerun_is_byte_identical(corpus_args, forum_args, tmp_path_factory):
    outs = []
    for _ in range(2):
        out = tmp_path_factory.mktemp("rec")
        rc = cli("recommend", *corpus_args, *forum_args, "--out", out,
                 "--mode", "CAMF_GC", "--epochs", 25, "--seed", 5)
        assert rc == 0
        outs.append(out)
    for name in ("recommendations.csv", "report.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_camf_mode_ranks_top_n_per_user(corpus_args, forum_args, synth_dir, tmp_path):
    rc = cli("recommend", *corpus_args, *forum_args, "--out", tmp_path,
             "--mode", "CAMF_G", "--top-n", 2, "--epochs", 20, "--seed", 3)
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["mode"] == "camf_g"
    assert report["features"] == "g"  # the mode pins the feature set

    truth = json.loads((synth_dir / "truth.json").read_text())
    participated = Counter(u for u, _ in read_rows(synth_dir / "participation.csv"))
    n_disc = report["n_discussions"]
    picks = Counter(u for u, _, _ in read_rows(tmp_path / "recommendations.csv"))
    for u in truth["user_ids"]:
        assert picks.get(u, 0) == min(2, n_disc - participated.get(u, 0))


def test_baseline_mode_name_is_normalized(corpus_args, forum_args, tmp_path):
    rc = cli("recommend", *corpus_args, *forum_args, "--out", tmp_path,
             "--mode", "goalpart_highcent", "--epochs", 15, "--seed", 2)
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["mode"] == "GoalPart_HighCent"


def test_unknown_mode_exits_2(corpus_args, forum_args, tmp_path, capsys):
    rc = cli("recommend", *corpus_args, *forum_args, "--out", tmp_path,
             "--mode", "MCFC")
    assert rc == 2
    assert "unknown mode" in capsys.readouterr().err


def test_recommend_missing_input_names_the_path(corpus_args, synth_dir, tmp_path, capsys):
    missing = tmp_path / "gone.csv"
    rc = cli("recommend", *corpus_args,
             "--participation", missing,
             "--discussions", synth_dir / "discussions.jsonl",
             "--out", tmp_path)
    assert rc == 2
    assert str(missing) in capsys.readouterr().err


# ----------------------------------------------------------------------
# recommend on handmade forums (constraint feasibility)

def write_forum(root, *, goal_note_for=None):
    """Tiny two-user forum; optionally one user writes a real goal note."""
    docs = [
        {"doc_id": "p-ann", "user_id": "ann", "timestamp": 100,
         "doc_type": "ProsoloPost", "text": "network analysis homework"},
        {"doc_id": "p-bob", "user_id": "bob", "timestamp": 200,
         "doc_type": "ProsoloPost", "text": "reading about centrality"},
    ]
    labels = [["doc_id", "contains_goal"]]
    if goal_note_for:
        docs.append({"doc_id": "g-1", "user_id": goal_note_for,
                     "timestamp": 300, "doc_type": "GoalNote",
                     "text": "plan to finish the visualization module"})
        labels.append(["g-1", "true"])
    (root / "documents.jsonl").write_text(
        "".join(json.dumps(d) + "\n" for d in docs))
    (root / "follows.csv").write_text("follower,followee,week_index\nbob,ann,0\n")
    (root / "goal_labels.csv").write_text(
        "".join(",".join(r) + "\n" for r in labels))
    (root / "discussions.jsonl").write_text(
        json.dumps({"discussion_id": "d0", "n_replies": 4, "length": 80,
                    "participants": ["bob"]}) + "\n"
        + json.dumps({"discussion_id": "d1", "n_replies": 1, "length": 40,
                      "participants": ["bob"]}) + "\n")
    (root / "participation.csv").write_text(
        "user_id,discussion_id\nbob,d0\nbob,d1\n")
    return (
        "--documents", root / "documents.jsonl",
        "--follows", root / "follows.csv",
        "--goal-labels", root / "goal_labels.csv",
        "--participation", root / "participation.csv",
        "--discussions", root / "discussions.jsonl",
    )


def test_constrained_mode_assigns_the_qualified_user(tmp_path):
    # ann wrote a goal note and is followed by bob, so she satisfies both
    # coverage constraints for both discussions.
    args = write_forum(tmp_path, goal_note_for="ann")
    rc = cli("recommend", *args, "--out", tmp_path, "--mode", "MCCF_GC",
             "--epochs", 10, "--seed", 0)
    assert rc == 0
    rows = {(u, d) for u, d, _ in read_rows(tmp_path / "recommendations.csv")}
    assert {("ann", "d0"), ("ann", "d1")} <= rows


def test_unsatisfiable_constraints_exit_3(tmp_path, capsys):
    # Nobody ever wrote a goal note, so goal coverage cannot be met.
    args = write_forum(tmp_path)
    rc = cli("recommend", *args, "--out", tmp_path, "--mode", "MCCF_G",
             "--epochs", 10, "--seed", 0)
    assert rc == 3
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "d0" in err or "d1" in err


# ----------------------------------------------------------------------
# parser plumbing

def test_version_flag_exits_cleanly(capsys):
    with pytest.raises(SystemExit) as exc:
        cli("--version")
    assert exc.value.code == 0
    assert "peerlearn" in capsys.readouterr().out


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli()
    assert exc.value.code == 2

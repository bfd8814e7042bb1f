"""Analysis tests: occupancy tables, chi-square, summaries, DOT export.

scipy is used here as an independent reference for the chi-square
computations; the library itself must not depend on it.
"""

import numpy as np
import pytest
import scipy.special
import scipy.stats

from peerlearn.analysis import (
    GROUP_NAMES,
    OccupancyTable,
    TransitionGraph,
    chi_square,
    chi_square_csv,
    chi_square_sf,
    export_transition_graphs,
    occupancy_csv,
    occupancy_table,
    pairwise_chi_square,
    render_csv,
    significance_stars,
    state_summary,
    state_summary_csv,
)
from peerlearn.errors import AnalysisError
from peerlearn.sttm import StateProfiles

import test_sttm


# ----------------------------------------------------------------------
# chi-square

def test_chi_square_reference_table():
    stat, df, p = chi_square([10, 20], [20, 10])
    assert stat == pytest.approx(20 / 3, abs=1e-6)
    assert df == 1
    assert p == pytest.approx(0.009823274507519235, abs=1e-6)


def test_chi_square_identical_groups():
    stat, df, p = chi_square([5, 7, 9], [5, 7, 9])
    assert stat == 0.0
    assert df == 2
    assert p == 1.0


def test_chi_square_symmetric_in_groups():
    a, b = [3, 9, 1], [5, 2, 8]
    assert chi_square(a, b) == chi_square(b, a)


def test_chi_square_scales_linearly_with_counts():
    a, b = np.array([4, 9, 2]), np.array([7, 3, 6])
    stat1, df1, _ = chi_square(a, b)
    stat3, df3, _ = chi_square(3 * a, 3 * b)
    assert stat3 == pytest.approx(3 * stat1, rel=1e-12)
    assert df3 == df1


def test_chi_square_drops_empty_states():
    full = chi_square([5, 3], [2, 4])
    padded = chi_square([5, 0, 3, 0], [2, 0, 4, 0])
    assert padded[1] == 1
    assert padded == pytest.approx(full)


def test_chi_square_single_surviving_state():
    stat, df, p = chi_square([4, 0], [6, 0])
    assert (stat, df, p) == (0.0, 0, 1.0)


def test_chi_square_input_validation():
    with pytest.raises(AnalysisError, match="equal-length"):
        chi_square([1, 2], [1, 2, 3])
    with pytest.raises(AnalysisError, match="nonnegative"):
        chi_square([1, -2], [1, 2])
    with pytest.raises(AnalysisError, match="positive total"):
        chi_square([0, 0], [1, 2])


def test_chi_square_matches_scipy_on_random_tables():
    rng = np.random.default_rng(0)
    for _ in range(25):
        k = int(rng.integers(2, 7))
        a = rng.integers(1, 40, size=k)
        b = rng.integers(1, 40, size=k)
        stat, df, p = chi_square(a, b)
        ref_stat, ref_p, ref_df, _ = scipy.stats.chi2_contingency(
            np.vstack([a, b]), correction=False
        )
        assert stat == pytest.approx(ref_stat, rel=1e-12)
        assert df == ref_df
        assert p == pytest.approx(ref_p, rel=1e-9, abs=1e-300)


def test_chi_square_sf_matches_scipy():
    for df in (1, 2, 3, 5, 10, 40):
        for x in (0.0, 0.3, 1.0, 4.2, 12.5, 80.0):
            want = scipy.special.gammaincc(df / 2.0, x / 2.0)
            assert chi_square_sf(x, df) == pytest.approx(want, rel=1e-10, abs=1e-300)
    assert chi_square_sf(5.0, 0) == 1.0


def test_significance_stars():
    assert significance_stars(0.009) == "**"
    assert significance_stars(0.049) == "*"
    assert significance_stars(0.05) == ""
    assert significance_stars(0.5) == ""


# ----------------------------------------------------------------------
# occupancy

def test_occupancy_table_hand_tally():
    table = occupancy_table(
        state_paths=[[0, 1], [1, 1]],
        category_paths=[[0, 1], [6, 2]],
    )
    assert table.columns == GROUP_NAMES == ("GS", "GP", "GB", "NO")
    np.testing.assert_array_equal(table.counts, [[1, 0, 0, 0], [1, 1, 0, 1]])
    np.testing.assert_allclose(
        table.proportions,
        [[0.5, 0.0, 0.0, 0.0], [0.5, 1.0, 0.0, 1.0]],
    )
    np.testing.assert_array_equal(table.group_counts("GS"), [1, 1])


def test_occupancy_table_explicit_state_count():
    table = occupancy_table([[0]], [[4]], n_states=4)
    assert table.counts.shape == (4, 4)
    assert table.counts[0, 2] == 1  # category 4 is in the GB group


def test_occupancy_table_empty():
    table = occupancy_table([], [])
    assert table.counts.shape == (0, 4)
    assert pairwise_chi_square(table) == []


def test_occupancy_table_validation():
    with pytest.raises(AnalysisError, match="sequence count"):
        occupancy_table([[0]], [])
    with pytest.raises(AnalysisError, match="length"):
        occupancy_table([[0, 1]], [[0]])
    with pytest.raises(AnalysisError, match="no connection group"):
        occupancy_table([[0]], [[9]])
    with pytest.raises(AnalysisError, match="out of range"):
        occupancy_table([[5]], [[0]], n_states=2)
    with pytest.raises(AnalysisError, match="unknown connection group"):
        occupancy_table([[0]], [[0]]).group_counts("XX")


def test_occupancy_csv_golden():
    table = occupancy_table([[0, 1], [1, 1]], [[0, 1], [6, 2]])
    got = occupancy_csv(table, meta="version=x config=y seed=0")
    assert got == (
        "# version=x config=y seed=0\n"
        "state,GS,GP,GB,NO,GS_prop,GP_prop,GB_prop,NO_prop\n"
        "s0,1,0,0,0,0.5000,0.0000,0.0000,0.0000\n"
        "s1,1,1,0,1,0.5000,1.0000,0.0000,1.0000\n"
    )


def test_pairwise_chi_square_skips_empty_groups():
    table = occupancy_table([[0, 1], [1, 1]], [[0, 1], [6, 2]])
    results = pairwise_chi_square(table)
    assert [r["pair"] for r in results] == ["GS vs GP", "GS vs NO"]
    for r in results:
        want = chi_square(table.group_counts("GS"), table.group_counts(r["pair"][6:]))
        assert (r["statistic"], r["df"], r["p_value"]) == want
        assert r["stars"] == significance_stars(r["p_value"])


def test_pairwise_chi_square_empty_base_group():
    table = occupancy_table([[0]], [[6]])  # only the NO group has counts
    assert pairwise_chi_square(table, base="GS") == []


def test_chi_square_csv_shape():
    table = occupancy_table([[0, 1], [1, 0]], [[0, 2], [1, 6]])
    text = chi_square_csv(pairwise_chi_square(table), meta="m")
    lines = text.splitlines()
    assert lines[0] == "# m"
    assert lines[1] == "pair,statistic,df,p_value,stars"
    assert all(line.startswith("GS vs ") for line in lines[2:])


# ----------------------------------------------------------------------
# state summaries

def summary_profiles():
    return StateProfiles(
        phi=np.array([[0.5, 0.3, 0.2], [0.1, 0.2, 0.7]]),
        theta=np.array([[0.75, 0.25]]),
        psi=np.array([[0.8, 0.2]]),
        pi=np.ones((1, 1, 1)),
        init=np.ones((1, 1)),
        theta_point=np.zeros((0, 2)),
        seq_offsets=np.array([0]),
        user_ids=[],
        vocab=["net", "graph", "seed"],
        doc_types=["Post", "Blog"],
        categories=["c0"],
    )


def test_state_summary_structure():
    (row,) = state_summary(summary_profiles(), top_k=2, top_topics=1)
    assert row.state == 0
    assert row.topics == [(0, 0.75, ["net", "graph"])]
    assert row.doc_type_row == [0.8, 0.2]


def test_state_summary_breaks_ties_by_lower_index():
    profiles = summary_profiles()
    profiles.theta = np.array([[0.5, 0.5]])
    profiles.phi = np.array([[0.25, 0.5, 0.25], [0.4, 0.4, 0.2]])
    (row,) = state_summary(profiles, top_k=2, top_topics=2)
    assert [j for j, _, _ in row.topics] == [0, 1]
    assert row.topics[1][2] == ["net", "graph"]  # phi tie: lower word id wins


def test_state_summary_csv_golden():
    got = state_summary_csv(summary_profiles(), top_k=2, top_topics=1, meta="m")
    assert got == (
        "# m\n"
        "state,topics,Post,Blog\n"
        "s0,z0 (0.750): net graph,0.80,0.20\n"
    )


# ----------------------------------------------------------------------
# transition graphs

def test_transition_graph_from_paths_hand_tally():
    graph = TransitionGraph.from_paths(
        state_paths=[[0, 1, 0]],
        category_paths=[[2, 2, 3]],
        n_states=2,
        category=2,
        category_name="S3",
    )
    np.testing.assert_array_equal(graph.node_visits, [1, 1])
    np.testing.assert_array_equal(graph.edge_counts, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(graph.start_counts, [1, 0])

    other = TransitionGraph.from_paths([[0, 1, 0]], [[2, 2, 3]], 2, 3)
    np.testing.assert_array_equal(other.node_visits, [1, 0])
    assert other.edge_counts.sum() == 0  # the category-3 week is the last one
    assert other.start_counts.sum() == 0
    assert other.category_name == "3"


def test_transition_graph_from_model_matches_path_walk():
    model = test_sttm.small_model(seed=13, n_seq=4, max_len=5)
    states = model.state_paths()
    cats = model.category_paths()
    for cat_id, cat_name in enumerate(model.data.category_names):
        from_model = TransitionGraph.from_model(model, cat_id)
        from_paths = TransitionGraph.from_paths(
            states, cats, model.h.n_states, cat_id, cat_name
        )
        np.testing.assert_array_equal(from_model.node_visits, from_paths.node_visits)
        np.testing.assert_array_equal(from_model.edge_counts, from_paths.edge_counts)
        np.testing.assert_array_equal(from_model.start_counts, from_paths.start_counts)


def test_transition_graph_dot_golden():
    graph = TransitionGraph(
        category=0,
        category_name="S1",
        node_visits=np.array([2, 1]),
        edge_counts=np.array([[0, 1], [0, 0]]),
        start_counts=np.array([1, 0]),
    )
    assert graph.to_dot() == (
        "digraph transitions_S1 {\n"
        '  label="S1";\n'
        "  rankdir=LR;\n"
        "  node [shape=circle, fixedsize=true];\n"
        "  start [shape=point, width=0.15];\n"
        '  s0 [label="s0\\n2", width=1.500, height=1.500];\n'
        '  s1 [label="s1\\n1", width=1.149, height=1.149];\n'
        '  start -> s0 [label="1", penwidth=4.500, color=gray0, style=dashed];\n'
        '  s0 -> s1 [label="1", penwidth=4.500, color=gray0];\n'
        "}\n"
    )


def test_transition_graph_dot_byte_stable():
    model = test_sttm.small_model(seed=14)
    first = TransitionGraph.from_model(model, 0).to_dot(meta="version=1")
    second = TransitionGraph.from_model(model, 0).to_dot(meta="version=1")
    assert first == second
    assert first.startswith("// version=1\n")


def test_transition_graph_without_transitions_renders_isolated_nodes():
    graph = TransitionGraph(
        category=0,
        category_name="S7",
        node_visits=np.zeros(2, dtype=np.int64),
        edge_counts=np.zeros((2, 2), dtype=np.int64),
        start_counts=np.zeros(2, dtype=np.int64),
    )
    text = graph.to_dot()
    assert "->" not in text
    assert '  s0 [label="s0\\n0", width=0.300, height=0.300];' in text


def test_export_transition_graphs_from_paths():
    graphs = export_transition_graphs(
        None,
        ["S1", "S7"],
        state_paths=[[0, 0]],
        category_paths=[[0, 6]],
        n_states=1,
        meta="m",
    )
    assert sorted(graphs) == ["S1", "S7"]
    for text in graphs.values():
        assert text.startswith("// m\n")
    with pytest.raises(AnalysisError, match="unknown category"):
        export_transition_graphs(None, ["S99"], state_paths=[], category_paths=[], n_states=1)
    with pytest.raises(AnalysisError, match="paths export"):
        export_transition_graphs(None, ["S1"])


def test_export_transition_graphs_from_model():
    model = test_sttm.small_model(seed=15)
    names = model.data.category_names
    graphs = export_transition_graphs(model, names[:1])
    assert list(graphs) == names[:1]
    assert graphs[names[0]].startswith("digraph ")


# ----------------------------------------------------------------------
# csv rendering

def test_render_csv_quotes_special_fields():
    text = render_csv([["a,b", 'say "hi"']], header=["x", "y"], meta="note")
    assert text == '# note\nx,y\n"a,b","say ""hi"""\n'

"""Analysis artifacts derived from fitted profiles and decoded paths.

Provides the state summary table (top topics and doc-type mix per state),
the occupancy-by-connection-group table with Pearson chi-square tests, and
per-category transition graphs exported as DOT text.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .corpus import SOCIAL_CATEGORIES
from .errors import AnalysisError

# Connection groups: pairs of social categories that differ only in edge
# recency are pooled; the last category (no followees) stands alone.
OCCUPANCY_GROUPS: tuple[tuple[str, tuple[int, ...]], ...] = (
    ("GS", (0, 1)),
    ("GP", (2, 3)),
    ("GB", (4, 5)),
    ("NO", (6,)),
)
GROUP_NAMES = tuple(name for name, _ in OCCUPANCY_GROUPS)

_MAX_GAMMA_ITER = 10_000


# ----------------------------------------------------------------------
# state summaries

@dataclass
class StateSummary:
    state: int
    topics: list[tuple[int, float, list[str]]]  # (topic id, weight, top words)
    doc_type_row: list[float]  # rounded to 2 decimals


def state_summary(profiles, top_k: int = 10, top_topics: int = 3) -> list[StateSummary]:
    """Per-state digest: leading topics with their top words, doc-type mix."""
    rows = []
    n_topics = profiles.n_topics
    n_words = len(profiles.vocab)
    k_topics = min(top_topics, n_topics)
    k_words = min(top_k, n_words)
    for c in range(profiles.n_states):
        weights = profiles.theta[c]
        top = sorted(range(n_topics), key=lambda j: (-weights[j], j))[:k_topics]
        topics = []
        for j in top:
            order = sorted(range(n_words), key=lambda w: (-profiles.phi[j, w], w))[:k_words]
            topics.append((j, float(weights[j]), [profiles.vocab[w] for w in order]))
        doc_row = [round(float(v), 2) for v in profiles.psi[c]]
        rows.append(StateSummary(state=c, topics=topics, doc_type_row=doc_row))
    return rows


def state_summary_csv(profiles, top_k: int = 10, top_topics: int = 3,
                      meta: str | None = None) -> str:
    """One CSV row per state: topics cell plus a column per doc type."""
    header = ["state", "topics"] + list(profiles.doc_types)
    rows = []
    for item in state_summary(profiles, top_k=top_k, top_topics=top_topics):
        cell = "; ".join(
            f"z{j} ({weight:.3f}): {' '.join(words)}"
            for j, weight, words in item.topics
        )
        rows.append([f"s{item.state}", cell] + [f"{v:.2f}" for v in item.doc_type_row])
    return render_csv(rows, header, meta=meta)


# ----------------------------------------------------------------------
# occupancy table

@dataclass
class OccupancyTable:
    """User-week counts per (state, connection group)."""

    counts: np.ndarray  # (n_states, n_groups), int64
    columns: tuple[str, ...] = GROUP_NAMES

    @property
    def n_states(self) -> int:
        return self.counts.shape[0]

    @property
    def proportions(self) -> np.ndarray:
        """Column-normalized counts; all-zero columns stay zero."""
        totals = self.counts.sum(axis=0).astype(np.float64)
        out = np.zeros_like(self.counts, dtype=np.float64)
        nonzero = totals > 0
        out[:, nonzero] = self.counts[:, nonzero] / totals[nonzero]
        return out

    def group_counts(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise AnalysisError(f"unknown connection group {name!r}")
        return self.counts[:, self.columns.index(name)].copy()


def occupancy_table(state_paths, category_paths, n_states: int | None = None) -> OccupancyTable:
    """Tally user-weeks into (state, connection group) cells.

    ``state_paths`` and ``category_paths`` are parallel per-sequence lists.
    """
    if len(state_paths) != len(category_paths):
        raise AnalysisError("state and category paths differ in sequence count")
    states: list[int] = []
    cats: list[int] = []
    for m, (sp, cp) in enumerate(zip(state_paths, category_paths)):
        if len(sp) != len(cp):
            raise AnalysisError(f"sequence {m}: state and category paths differ in length")
        states.extend(int(s) for s in sp)
        cats.extend(int(b) for b in cp)
    if n_states is None:
        n_states = max(states) + 1 if states else 0
    group_of = {}
    for gi, (_, members) in enumerate(OCCUPANCY_GROUPS):
        for b in members:
            group_of[b] = gi
    counts = np.zeros((n_states, len(OCCUPANCY_GROUPS)), dtype=np.int64)
    for s, b in zip(states, cats):
        if not 0 <= s < n_states:
            raise AnalysisError(f"state {s} out of range")
        if b not in group_of:
            raise AnalysisError(f"category id {b} has no connection group")
        counts[s, group_of[b]] += 1
    return OccupancyTable(counts=counts)


def occupancy_csv(table: OccupancyTable, meta: str | None = None) -> str:
    header = ["state"] + list(table.columns) + [f"{c}_prop" for c in table.columns]
    props = table.proportions
    rows = []
    for c in range(table.n_states):
        rows.append(
            [f"s{c}"]
            + [str(int(v)) for v in table.counts[c]]
            + [f"{v:.4f}" for v in props[c]]
        )
    return render_csv(rows, header, meta=meta)


# ----------------------------------------------------------------------
# Pearson chi-square

def _reg_gamma_upper(s: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(s, x) for s > 0, x >= 0.

    Lower-tail power series for x < s + 1, modified Lentz continued
    fraction otherwise; relative error well under 1e-10 on the tested
    range.
    """
    if s <= 0:
        raise AnalysisError("gamma shape must be positive")
    if x < 0:
        raise AnalysisError("gamma argument must be nonnegative")
    if x == 0.0:
        return 1.0
    log_front = s * math.log(x) - x - math.lgamma(s)
    if x < s + 1.0:
        term = 1.0 / s
        total = term
        denom = s
        for _ in range(_MAX_GAMMA_ITER):
            denom += 1.0
            term *= x / denom
            total += term
            if abs(term) < abs(total) * 1e-16:
                break
        else:
            raise AnalysisError("incomplete gamma series did not converge")
        return 1.0 - math.exp(log_front) * total
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_GAMMA_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    else:
        raise AnalysisError("incomplete gamma continued fraction did not converge")
    return math.exp(log_front) * h


def chi_square_sf(statistic: float, df: int) -> float:
    """Upper-tail probability of the chi-square distribution."""
    if df < 0:
        raise AnalysisError("degrees of freedom must be nonnegative")
    if df == 0:
        return 1.0
    return _reg_gamma_upper(df / 2.0, statistic / 2.0)


def chi_square(group_a, group_b) -> tuple[float, int, float]:
    """Pearson test on the 2xS table of two per-state count vectors.

    States with zero count in both groups are dropped before computing
    df = S' - 1.  Returns (statistic, df, p_value).
    """
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise AnalysisError("chi_square needs two equal-length count vectors")
    if (a < 0).any() or (b < 0).any():
        raise AnalysisError("counts must be nonnegative")
    if a.sum() <= 0 or b.sum() <= 0:
        raise AnalysisError("each group needs a positive total")
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    table = np.vstack([a, b])
    row = table.sum(axis=1, keepdims=True)
    col = table.sum(axis=0, keepdims=True)
    expected = row * col / table.sum()
    # Summing each state's two cells first keeps the statistic exactly
    # symmetric in the group order.
    statistic = float(((table - expected) ** 2 / expected).sum(axis=0).sum())
    df = table.shape[1] - 1
    return statistic, df, chi_square_sf(statistic, df)


def significance_stars(p_value: float) -> str:
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return ""


def pairwise_chi_square(table: OccupancyTable, base: str = "GS") -> list[dict]:
    """Test the base connection group against each other group.

    Pairs where either group has no observations are skipped; an empty
    table therefore yields an empty result list rather than an error.
    """
    base_counts = table.group_counts(base)
    results = []
    for name in table.columns:
        if name == base:
            continue
        other = table.group_counts(name)
        if base_counts.sum() == 0 or other.sum() == 0:
            continue
        stat, df, p = chi_square(base_counts, other)
        results.append({
            "pair": f"{base} vs {name}",
            "statistic": stat,
            "df": df,
            "p_value": p,
            "stars": significance_stars(p),
        })
    return results


def chi_square_csv(results: list[dict], meta: str | None = None) -> str:
    header = ["pair", "statistic", "df", "p_value", "stars"]
    rows = [
        [r["pair"], f"{r['statistic']:.6f}", str(r["df"]), f"{r['p_value']:.6g}", r["stars"]]
        for r in results
    ]
    return render_csv(rows, header, meta=meta)


# ----------------------------------------------------------------------
# transition graphs

@dataclass
class TransitionGraph:
    """Transition counts restricted to one social category.

    Edge counts key the transition by the source week's category; node
    weights count weeks spent in each state while in the category; start
    counts tally sequences whose first week carries the category.
    """

    category: int
    category_name: str
    node_visits: np.ndarray   # (S,)
    edge_counts: np.ndarray   # (S, S), source x destination
    start_counts: np.ndarray  # (S,)

    @classmethod
    def from_paths(cls, state_paths, category_paths, n_states: int,
                   category: int, category_name: str | None = None) -> "TransitionGraph":
        if len(state_paths) != len(category_paths):
            raise AnalysisError("state and category paths differ in sequence count")
        visits = np.zeros(n_states, dtype=np.int64)
        edges = np.zeros((n_states, n_states), dtype=np.int64)
        starts = np.zeros(n_states, dtype=np.int64)
        for m, (sp, cp) in enumerate(zip(state_paths, category_paths)):
            if len(sp) != len(cp):
                raise AnalysisError(f"sequence {m}: state and category paths differ in length")
            if not sp:
                continue
            if cp[0] == category:
                starts[sp[0]] += 1
            for t, (s, b) in enumerate(zip(sp, cp)):
                if b == category:
                    visits[s] += 1
                if t + 1 < len(sp) and b == category:
                    edges[s, sp[t + 1]] += 1
        name = category_name if category_name is not None else str(category)
        return cls(category=category, category_name=name, node_visits=visits,
                   edge_counts=edges, start_counts=starts)

    @classmethod
    def from_model(cls, model, category: int) -> "TransitionGraph":
        n_states = model.h.n_states
        if not 0 <= category < model.h.n_categories:
            raise AnalysisError(f"category id {category} out of range")
        visits = np.zeros(n_states, dtype=np.int64)
        in_cat = model.data.tp_category == category
        np.add.at(visits, model.tp_state[in_cat], 1)
        return cls(
            category=category,
            category_name=model.data.category_names[category],
            node_visits=visits,
            edge_counts=model.n_sas[:n_states, category, :].copy(),
            start_counts=model.n_sas[n_states, category, :].copy(),
        )

    def to_dot(self, meta: str | None = None) -> str:
        """Deterministic DOT rendering; byte-identical for identical counts."""
        n_states = len(self.node_visits)
        lines = []
        if meta:
            lines.append(f"// {meta}")
        lines.append(f"digraph transitions_{_dot_safe(self.category_name)} {{")
        lines.append(f'  label="{self.category_name}";')
        lines.append("  rankdir=LR;")
        lines.append("  node [shape=circle, fixedsize=true];")
        has_starts = int(self.start_counts.sum()) > 0
        if has_starts:
            lines.append("  start [shape=point, width=0.15];")
        max_visits = int(self.node_visits.max()) if n_states else 0
        for c in range(n_states):
            width = 0.3
            if max_visits > 0:
                width += 1.2 * math.sqrt(self.node_visits[c] / max_visits)
            lines.append(
                f'  s{c} [label="s{c}\\n{int(self.node_visits[c])}", '
                f"width={width:.3f}, height={width:.3f}];"
            )
        max_start = int(self.start_counts.max()) if n_states else 0
        if has_starts:
            for c in range(n_states):
                count = int(self.start_counts[c])
                if count == 0:
                    continue
                lines.append(
                    f"  start -> s{c} [{_edge_attrs(count, max_start)}, style=dashed];"
                )
        max_edge = int(self.edge_counts.max()) if n_states else 0
        for src in range(n_states):
            for dst in range(n_states):
                count = int(self.edge_counts[src, dst])
                if count == 0:
                    continue
                lines.append(f"  s{src} -> s{dst} [{_edge_attrs(count, max_edge)}];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_safe(name: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in name)


def _edge_attrs(count: int, max_count: int) -> str:
    rel = count / max_count if max_count > 0 else 0.0
    rel = max(rel, 0.05)  # keep rare edges visible
    penwidth = 0.5 + 4.0 * rel
    gray = int(round(70 * (1.0 - rel)))
    return f'label="{count}", penwidth={penwidth:.3f}, color=gray{gray}'


def export_transition_graphs(source, categories, *, state_paths=None,
                             category_paths=None, n_states=None,
                             category_names=None, meta: str | None = None) -> dict[str, str]:
    """DOT text per requested category name.

    ``source`` is a fitted model (counts are read off it) or ``None``, in
    which case ``state_paths``/``category_paths``/``n_states`` must be given.
    Unknown category names raise :class:`AnalysisError`.
    """
    if source is not None:
        names = list(source.data.category_names)
    else:
        names = list(category_names) if category_names is not None else list(SOCIAL_CATEGORIES)
        if state_paths is None or category_paths is None or n_states is None:
            raise AnalysisError("paths export needs state_paths, category_paths and n_states")
    out = {}
    for cat_name in categories:
        if cat_name not in names:
            raise AnalysisError(f"unknown category {cat_name!r}")
        cat_id = names.index(cat_name)
        if source is not None:
            graph = TransitionGraph.from_model(source, cat_id)
        else:
            graph = TransitionGraph.from_paths(
                state_paths, category_paths, n_states, cat_id, cat_name
            )
        out[cat_name] = graph.to_dot(meta=meta)
    return out


# ----------------------------------------------------------------------
# CSV rendering

def render_csv(rows, header=None, meta: str | None = None) -> str:
    """RFC-4180 quoting, newline-terminated lines, optional # meta line."""
    buf = io.StringIO()
    if meta:
        buf.write(f"# {meta}\n")
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()

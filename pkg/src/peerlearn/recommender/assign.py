"""Constrained assignment of students to discussions.

The objective credits each assigned pair with its relevance score and
debits a penalty for assigning users whose goal quality or centrality
clears the respective threshold (discouraging overload of the strongest
students).  Depending on the mode, each discussion must also receive at
least one goal-qualified and/or one centrality-qualified user, and every
user is limited to a fixed number of assignments.

The coverage constraints are existential: one assigned user who clears
both thresholds can witness both requirements of a discussion at once.
That coupling cannot be captured exactly by a plain min-cost-flow
network (one flow unit cannot register in two capacity budgets), and the
LP relaxation of the direct formulation has odd-cycle integrality gaps,
so the solver here is an exact branch-and-bound.  It branches on one
uncovered coverage requirement at a time, forcing a qualified candidate
pair into the solution, completes every branch greedily with beneficial
pairs, and prunes with the completion value minus a certified lower
bound on the cost of covering the requirements the completion leaves
unmet.  All value comparisons use exact rational arithmetic, so results
are deterministic and independent of float rounding.  Without enabled
coverage constraints the greedy completion alone is the optimum.

Worst-case running time is exponential in the number of requirements
that greedy coverage cannot settle; instances of the size this package
targets resolve in well under a second.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import RecommenderError, InfeasibleError
from .relevance import UserFeatures

BASELINE_MODES = ("GoalPart", "HighCent", "GoalPart_HighCent")
ASSIGN_MODES = ("mccf", "mccf_g", "mccf_c", "mccf_gc")


_MODE_FLAGS = {
    "mccf": (False, False),
    "mccf_g": (True, False),
    "mccf_c": (False, True),
    "mccf_gc": (True, True),
}


def mode_flags(mode: str) -> tuple[bool, bool]:
    """Map an assignment mode name to (enforce_goal, enforce_centrality)."""
    if mode not in _MODE_FLAGS:
        raise RecommenderError(f"unknown assignment mode {mode!r}, expected one of {ASSIGN_MODES}")
    return _MODE_FLAGS[mode]


@dataclass
class AssignmentProblem:
    """Inputs of one assignment round.

    ``scores`` maps candidate (user_id, discussion_id) pairs to predicted
    relevance.  Users absent from ``users`` cannot be scored for penalties
    and are rejected.  ``discussions`` defaults to every discussion that
    appears in ``scores``.
    """

    scores: dict[tuple[str, str], float]
    users: dict[str, UserFeatures]
    discussions: list[str] = field(default_factory=list)
    goal_threshold: float = 1.0
    centrality_threshold: float = 0.1
    penalty_weight: float = 0.1
    user_cap: int = 5
    workload_cost: float = 0.0
    enforce_goal: bool = True
    enforce_centrality: bool = True

    def __post_init__(self):
        if self.user_cap < 1:
            raise RecommenderError("user_cap must be >= 1")
        if self.workload_cost < 0:
            raise RecommenderError("workload_cost must be nonnegative")
        for u, d in self.scores:
            if u not in self.users:
                raise RecommenderError(f"scored pair references unknown user {u!r}")
        if not self.discussions:
            self.discussions = sorted({d for _, d in self.scores})

    def goal_qualified(self, user_id: str) -> bool:
        return self.users[user_id].goal_quality >= self.goal_threshold

    def cent_qualified(self, user_id: str) -> bool:
        return self.users[user_id].centrality >= self.centrality_threshold


def evaluate_ob(assignment, problem: AssignmentProblem) -> float:
    """Overall community benefit of an assignment.

    Credits assigned relevance and applies the qualification penalties;
    the coverage constraints are not checked here, only priced.
    """
    pairs = set(assignment)
    unknown = pairs - set(problem.scores)
    if unknown:
        raise RecommenderError(f"assignment contains unscored pair {sorted(unknown)[0]}")
    alpha = problem.penalty_weight
    g_thr = problem.goal_threshold
    c_thr = problem.centrality_threshold
    total = 0.0
    for (u, d) in sorted(problem.scores):
        f = 1.0 if (u, d) in pairs else 0.0
        feats = problem.users[u]
        total += f * problem.scores[(u, d)]
        if feats.goal_quality * f >= g_thr:
            total -= alpha * (feats.goal_quality - g_thr)
        if feats.centrality * f >= c_thr:
            total -= alpha * (feats.centrality - c_thr)
    return total


def _net_values(problem: AssignmentProblem) -> dict[tuple[str, str], Fraction]:
    """Objective gain of assigning each pair versus leaving it unassigned.

    Exact rationals; the constant part of the objective (pairs that incur
    penalties even unassigned, possible with nonpositive thresholds) drops
    out of the comparison.
    """
    alpha = Fraction(problem.penalty_weight)
    g_thr = problem.goal_threshold
    c_thr = problem.centrality_threshold
    out = {}
    for (u, d), score in problem.scores.items():
        feats = problem.users[u]
        value = Fraction(score)
        if feats.goal_quality >= g_thr:
            value -= alpha * (Fraction(feats.goal_quality) - Fraction(g_thr))
        if feats.centrality >= c_thr:
            value -= alpha * (Fraction(feats.centrality) - Fraction(c_thr))
        if 0 >= g_thr:
            value += alpha * (Fraction(feats.goal_quality) - Fraction(g_thr))
        if 0 >= c_thr:
            value += alpha * (Fraction(feats.centrality) - Fraction(c_thr))
        out[(u, d)] = value
    return out


class _Solver:
    """Branch-and-bound over per-requirement witness choices."""

    def __init__(self, problem: AssignmentProblem):
        self.problem = problem
        self.values = _net_values(problem)
        self.pairs = sorted(self.values)
        self.cap = problem.user_cap
        self.wl = Fraction(problem.workload_cost)
        self.by_user: dict[str, list[tuple[str, str]]] = {}
        for pair in self.pairs:
            self.by_user.setdefault(pair[0], []).append(pair)
        # Candidate fills per user: beneficial pairs, best first; ties by id.
        self.fill_order = {
            u: sorted((p for p in ps if self.values[p] > 0),
                      key=lambda p: (-self.values[p], p))
            for u, ps in self.by_user.items()
        }
        self.need_goal = problem.enforce_goal and problem.goal_threshold > 0
        self.need_cent = problem.enforce_centrality and problem.centrality_threshold > 0
        # One task per discussion and enabled requirement; filled by solve().
        self.tasks: list[tuple[str, str, tuple[tuple[str, str], ...]]] = []
        self.dual_pool: dict[str, tuple[tuple[str, str], ...]] = {}
        self.best_value: Fraction | None = None
        self.best_set: frozenset | None = None
        self.failed_discussion: str | None = None

    # -- helpers ------------------------------------------------------

    def _build_tasks(self):
        """(discussion, requirement, candidate pool) coverage tasks."""
        by_disc: dict[str, list[tuple[str, str]]] = {}
        for pair in self.pairs:
            by_disc.setdefault(pair[1], []).append(pair)
        tasks = []
        for disc in self.problem.discussions:
            cands = by_disc.get(disc, [])
            g_pool = tuple(p for p in cands if self.problem.goal_qualified(p[0]))
            c_pool = tuple(p for p in cands if self.problem.cent_qualified(p[0]))
            if self.need_goal:
                if not g_pool:
                    raise InfeasibleError(
                        f"discussion {disc!r} has no goal-qualified candidate",
                        discussion_id=disc,
                    )
                tasks.append((disc, "goal", g_pool))
            if self.need_cent:
                if not c_pool:
                    raise InfeasibleError(
                        f"discussion {disc!r} has no centrality-qualified candidate",
                        discussion_id=disc,
                    )
                tasks.append((disc, "cent", c_pool))
            if self.need_goal and self.need_cent:
                self.dual_pool[disc] = tuple(p for p in g_pool if self.problem.cent_qualified(p[0]))
        return tasks

    def _completion(self, forced: set):
        """Greedy best superset of ``forced``.

        Returns the value, the full pair set, per-user chosen counts, and
        the value of each user's worst greedy pick (absent when the user
        got none), which the forcing-cost bound needs.
        """
        total = Fraction(0)
        chosen = set(forced)
        counts: dict[str, int] = {}
        for pair in forced:
            counts[pair[0]] = counts.get(pair[0], 0) + 1
            total += self.values[pair]
        if self.wl:
            for count in counts.values():
                total -= self.wl * Fraction(count * (count - 1), 2)
        worst_greedy: dict[str, Fraction] = {}
        for u, candidates in self.fill_order.items():
            count = counts.get(u, 0)
            for pair in candidates:
                if count >= self.cap:
                    break
                if pair in chosen:
                    continue
                marginal = self.values[pair] - self.wl * count
                if marginal <= 0:
                    break
                chosen.add(pair)
                total += marginal
                worst_greedy[u] = self.values[pair]
                count += 1
            if count:
                counts[u] = count
        return total, chosen, counts, worst_greedy

    def _force_cost(self, pair, chosen, counts, worst_greedy, forced_counts):
        """Lower bound on the completion value lost by forcing ``pair``.

        ``None`` means the pair cannot be forced anywhere in the current
        subtree (the user's forced assignments already fill the cap, and
        descending the tree only adds forced pairs).  A pair the greedy
        completion already picked costs nothing.  Forcing onto a user
        whose cap is filled evicts their worst greedy pick, which the
        candidate's own value can never beat (greedy would have picked it
        otherwise); below the cap the only guaranteed loss is a negative
        candidate value.  Workload surcharges are ignored, keeping the
        estimate on the low side, which is the safe side for pruning.
        """
        u = pair[0]
        if forced_counts.get(u, 0) >= self.cap:
            return None
        if pair in chosen:
            return Fraction(0)
        if counts.get(u, 0) >= self.cap:
            return worst_greedy[u] - self.values[pair]
        return max(Fraction(0), -self.values[pair])

    def _covered(self, disc: str, chosen) -> bool:
        goal_ok = not self.need_goal or any(
            pair[1] == disc and self.problem.goal_qualified(pair[0]) for pair in chosen
        )
        cent_ok = not self.need_cent or any(
            pair[1] == disc and self.problem.cent_qualified(pair[0]) for pair in chosen
        )
        return goal_ok and cent_ok

    # -- search -------------------------------------------------------

    def solve(self) -> set:
        if not self.pairs:
            if (self.need_goal or self.need_cent) and self.problem.discussions:
                raise InfeasibleError(
                    f"discussion {self.problem.discussions[0]!r} has no candidates",
                    discussion_id=self.problem.discussions[0],
                )
            return set()
        if not (self.need_goal or self.need_cent):
            _, chosen, _, _ = self._completion(set())
            return chosen
        self.tasks = self._build_tasks()
        self._search(set(), {})
        if self.best_set is None:
            disc = self.failed_discussion or self.tasks[0][0]
            raise InfeasibleError(
                f"capacity does not allow covering discussion {disc!r}", discussion_id=disc
            )
        assert self.best_value is not None
        self._verify(self.best_set)
        return set(self.best_set)

    def _search(self, forced, forced_counts):
        """Branch on one requirement the greedy completion leaves unmet.

        Any feasible solution containing ``forced`` must witness an unmet
        requirement through one of its pool pairs, so forcing each usable
        candidate in turn keeps the optimum reachable, and the forced set
        stays inside the optimum along some path.  When nothing is unmet
        the completion itself is feasible and optimal over all supersets
        of ``forced`` (the greedy fill is per-user optimal), so it becomes
        the incumbent and the node closes.
        """
        value, chosen, counts, worst_greedy = self._completion(forced)
        violated = [t for t in self.tasks if not any(p in chosen for p in t[2])]
        if not violated:
            if self.best_value is None or value > self.best_value:
                self.best_value = value
                self.best_set = frozenset(chosen)
            return
        # Price every unmet requirement: deeper nodes only shrink the
        # greedy fill, so coverage never appears for free later and each
        # needs a forced witness.  A discussion missing both requirements
        # can settle them with one doubly-qualified candidate, hence the
        # per-discussion minimum against the dual pool.  Forcing costs on
        # a shared user only grow as evictions stack up, so summing the
        # per-requirement minima stays on the low side, which is the safe
        # side for the value bound.
        ranked: dict[tuple[str, str], list] = {}
        per_disc: dict[str, dict[str, Fraction]] = {}
        for disc, req, pool in violated:
            options = []
            for p in pool:
                cost = self._force_cost(p, chosen, counts, worst_greedy, forced_counts)
                if cost is not None:
                    options.append((cost, p))
            if not options:
                if self.failed_discussion is None:
                    self.failed_discussion = disc
                return
            options.sort()
            ranked[(disc, req)] = options
            per_disc.setdefault(disc, {})[req] = options[0][0]
        cover_cost = Fraction(0)
        for disc, reqs in per_disc.items():
            if len(reqs) == 2:
                lb = reqs["goal"] + reqs["cent"]
                for p in self.dual_pool.get(disc, ()):
                    cost = self._force_cost(p, chosen, counts, worst_greedy, forced_counts)
                    if cost is not None and cost < lb:
                        lb = cost
                cover_cost += lb
            else:
                cover_cost += next(iter(reqs.values()))
        if self.best_value is not None and value - cover_cost <= self.best_value:
            return
        disc, req, _ = min(violated, key=lambda t: (len(ranked[(t[0], t[1])]), t[0], t[1]))
        for _, p in ranked[(disc, req)]:
            forced.add(p)
            forced_counts[p[0]] = forced_counts.get(p[0], 0) + 1
            self._search(forced, forced_counts)
            forced.discard(p)
            forced_counts[p[0]] -= 1

    def _verify(self, chosen: frozenset):
        counts: dict[str, int] = {}
        for u, _ in chosen:
            counts[u] = counts.get(u, 0) + 1
        if any(c > self.cap for c in counts.values()):
            raise RecommenderError("solver produced an assignment exceeding the user cap")
        for disc in self.problem.discussions:
            if not self._covered(disc, chosen):
                raise InfeasibleError(
                    f"capacity does not allow covering discussion {disc!r}",
                    discussion_id=disc,
                )


def constraint_filter(problem: AssignmentProblem) -> set[tuple[str, str]]:
    """Optimal assignment under the problem's enabled constraints.

    Returns the set of assigned (user_id, discussion_id) pairs.  Raises
    :class:`InfeasibleError`, naming a discussion, when no candidate can
    satisfy one of its enabled qualification constraints or when the user
    capacity cannot cover every discussion.
    """
    return _Solver(problem).solve()


def baseline_filter(
    scores: dict[tuple[str, str], float],
    users: dict[str, UserFeatures],
    mode: str,
    top_n: int,
    goal_min: int = 1,
    centrality_threshold: float = 0.1,
) -> set[tuple[str, str]]:
    """Rank-then-filter baseline.

    Takes the ``top_n`` users per discussion by score (ties by user id),
    then keeps only users passing the mode's filter: goal quality at least
    ``goal_min``, centrality strictly above ``centrality_threshold``, or
    both.
    """
    if mode not in BASELINE_MODES:
        raise RecommenderError(f"unknown baseline mode {mode!r}, expected one of {BASELINE_MODES}")
    if top_n < 1:
        raise RecommenderError("top_n must be >= 1")
    by_disc: dict[str, list[tuple[str, str]]] = {}
    for (u, d), score in scores.items():
        by_disc.setdefault(d, []).append((u, d))
    keep = set()
    for d in sorted(by_disc):
        ranked = sorted(by_disc[d], key=lambda p: (-scores[p], p[0]))
        for u, _ in ranked[:top_n]:
            feats = users.get(u)
            if feats is None:
                raise RecommenderError(f"scored pair references unknown user {u!r}")
            if mode in ("GoalPart", "GoalPart_HighCent") and feats.goal_quality < goal_min:
                continue
            if mode in ("HighCent", "GoalPart_HighCent") and not feats.centrality > centrality_threshold:
                continue
            keep.add((u, d))
    return keep

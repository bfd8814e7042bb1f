"""Corpus ingestion and weekly sequence construction.

Raw platform documents (goal notes, platform posts, blog posts, tweets) are
cleaned, bucketed into course weeks, and combined with the follow graph and
goal-note labels to produce per-user weekly sequences annotated with a
social-connection category.  Those sequences are the model input for
:mod:`peerlearn.sttm`.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from enum import Enum

from .errors import CorpusError

SECONDS_PER_WEEK = 7 * 24 * 3600

#: Placeholder token carried by tweets whose content is off topic.  The word
#: distribution of such tweets is noise for the course model, so their text is
#: replaced by this single sentinel and only their document type is kept.
IRRELEVANT_TOKEN = "<irrelevant>"

#: Hashtags that mark a tweet as course-related (case-insensitive).
DEFAULT_HASHTAGS = ("#prosolo", "#dalmooc", "#learninganalytics")

# Fixed built-in stop-word list: English function words, contraction
# fragments left over from punctuation splitting, and a small set of
# high-frequency discourse verbs that carry no topical content.  Kept
# deliberately short and frozen so tokenization is reproducible.
STOP_WORDS = frozenset("""
a about above after again against all am an and any are aren as at be because
been before being below between both but by can cannot could couldn did didn
do does doesn doing don down during each few for from further had hadn has
hasn have haven having he her here hers herself him himself his how i if in
into is isn it its itself just ll me mightn more most mustn my myself needn no
nor not now o of off on once only or other our ours ourselves out over own re
s same shan she should shouldn so some such t than that the their theirs them
themselves then there these they this those through to too under until up ve
very was wasn we were weren what when where which while who whom why will with
won would wouldn you your yours yourself yourselves
also am are get gets got going gone just let lets may might must say says said
see seen shall want wants check checks checked know knows knew think thinks
thought make makes made take takes took go goes went come comes came
""".split())


class DocType(str, Enum):
    """Raw document types as they appear in the input data."""

    GOAL_NOTE = "GoalNote"
    PROSOLO_POST = "ProsoloPost"
    BLOG_POST = "BlogPost"
    TWEET = "Tweet"


class EffType(str, Enum):
    """Effective document types used by the model.

    Goal notes split on whether the human label says they contain a goal;
    tweets split on course relevance.
    """

    REL_GOAL_NOTE = "RelGoalNote"
    IR_GOAL_NOTE = "IrGoalNote"
    POST = "Post"
    BLOG = "Blog"
    REL_TWEET = "RelTweet"
    IR_TWEET = "IrTweet"


#: Canonical effective-type ordering; index = model doc-type id.
EFF_TYPES = (
    EffType.REL_GOAL_NOTE,
    EffType.IR_GOAL_NOTE,
    EffType.POST,
    EffType.BLOG,
    EffType.REL_TWEET,
    EffType.IR_TWEET,
)
EFF_TYPE_INDEX = {t: i for i, t in enumerate(EFF_TYPES)}


class GoalCategory(Enum):
    """Per-user goal engagement tier, ordered worst to best."""

    BYSTANDER = 0
    PARTICIPANT = 1
    SETTER = 2


#: Social-connection categories, index = model category id.
#:
#: S1/S2: follows a goal setter (old/new tie), S3/S4: best followee is a goal
#: participant (old/new), S5/S6: best followee is a bystander (old/new),
#: S7: follows nobody.
SOCIAL_CATEGORIES = ("S1", "S2", "S3", "S4", "S5", "S6", "S7")

_CATEGORY_BY_TIER = {
    # (tier, is_new_tie) -> category index
    (GoalCategory.SETTER, True): 1,   # S2
    (GoalCategory.SETTER, False): 0,  # S1
    (GoalCategory.PARTICIPANT, True): 3,   # S4
    (GoalCategory.PARTICIPANT, False): 2,  # S3
    (GoalCategory.BYSTANDER, True): 5,   # S6
    (GoalCategory.BYSTANDER, False): 4,  # S5
}
NO_FOLLOW_CATEGORY = 6  # S7


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    user_id: str
    timestamp: int  # UTC seconds
    doc_type: DocType
    text: str


@dataclass(frozen=True)
class ProcessedDocument:
    doc_id: str
    user_id: str
    week: int
    eff_type: EffType
    tokens: tuple[int, ...]  # vocabulary ids


@dataclass(frozen=True)
class FollowEdge:
    follower: str
    followee: str
    week: int  # first week the edge exists


@dataclass(frozen=True)
class GoalLabel:
    doc_id: str
    contains_goal: bool


class Vocabulary:
    """Bidirectional word/id map, ids assigned in first-seen order."""

    def __init__(self, words: list[str] | None = None):
        self._words: list[str] = []
        self._index: dict[str, int] = {}
        for w in words or []:
            self.add(w)

    def add(self, word: str) -> int:
        idx = self._index.get(word)
        if idx is None:
            idx = len(self._words)
            self._words.append(word)
            self._index[word] = idx
        return idx

    def id(self, word: str) -> int | None:
        return self._index.get(word)

    def word(self, idx: int) -> str:
        return self._words[idx]

    def words(self) -> list[str]:
        return list(self._words)

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._index


@dataclass(frozen=True)
class SeqDoc:
    """One document inside a weekly time point, in model id space."""

    doc_id: str
    type_id: int
    tokens: tuple[int, ...]


@dataclass(frozen=True)
class TimePoint:
    week: int
    category: int  # social-category id at this week
    docs: tuple[SeqDoc, ...]


@dataclass(frozen=True)
class Sequence:
    user_id: str
    points: tuple[TimePoint, ...]


@dataclass
class SequenceSet:
    """Model input: ordered weekly activity per user.

    ``doc_types`` and ``categories`` give the names behind the integer ids
    used in the sequences; ``vocab`` maps token ids back to words.
    """

    sequences: list[Sequence]
    vocab: Vocabulary
    doc_types: list[str]
    categories: list[str]

    @property
    def n_doc_types(self) -> int:
        return len(self.doc_types)

    @property
    def n_categories(self) -> int:
        return len(self.categories)


_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_MENTION_RE = re.compile(r"@\w+")
_RT_RE = re.compile(r"\brt\b")
_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str, doc_type: DocType) -> list[str]:
    """Clean and split ``text`` into content tokens.

    Lowercases, strips URLs, and for tweets also strips @-mentions and
    standalone retweet markers, then splits on any non-alphanumeric run and
    drops stop words.  May return an empty list; the caller decides what to
    do with token-free documents.
    """
    t = text.lower()
    t = _URL_RE.sub(" ", t)
    if doc_type is DocType.TWEET:
        t = _MENTION_RE.sub(" ", t)
        t = _RT_RE.sub(" ", t)
    return [tok for tok in _TOKEN_RE.findall(t) if tok not in STOP_WORDS]


def classify_tweet_relevance(text: str, hashtags: tuple[str, ...] = DEFAULT_HASHTAGS) -> bool:
    """True when the tweet mentions any configured course hashtag."""
    lowered = text.lower()
    return any(_normalize_hashtag(h) in lowered for h in hashtags)


def _normalize_hashtag(tag: str) -> str:
    tag = tag.strip().lower()
    if not tag.startswith("#"):
        tag = "#" + tag
    return tag


def week_of(timestamp: int, course_start: int) -> int:
    """Course week index of a UTC timestamp (week 0 starts at course_start)."""
    return (timestamp - course_start) // SECONDS_PER_WEEK


class Corpus:
    """Validated view over documents, goal labels, and the follow graph.

    Exposes per-(user, week) goal and social-connection categories and builds
    the weekly :class:`SequenceSet` consumed by the model.  The user universe
    is everyone who wrote a document or appears as an endpoint of a follow
    edge; edge-only users count as goal bystanders.
    """

    def __init__(
        self,
        documents: list[RawDocument],
        follows: list[FollowEdge],
        labels: list[GoalLabel],
        course_start: int,
        hashtags: tuple[str, ...] = DEFAULT_HASHTAGS,
    ):
        self.course_start = int(course_start)
        self.hashtags = tuple(_normalize_hashtag(h) for h in hashtags)
        self.documents = list(documents)
        self.labels = {}
        for lab in labels:
            if lab.doc_id in self.labels:
                raise CorpusError(f"duplicate goal label for document {lab.doc_id!r}")
            self.labels[lab.doc_id] = lab.contains_goal

        seen_ids: set[str] = set()
        for doc in self.documents:
            if doc.doc_id in seen_ids:
                raise CorpusError(f"duplicate document id {doc.doc_id!r}")
            seen_ids.add(doc.doc_id)
            if doc.timestamp < self.course_start:
                raise CorpusError(
                    f"document {doc.doc_id!r} predates course start "
                    f"({doc.timestamp} < {self.course_start})"
                )
            if doc.doc_type is DocType.GOAL_NOTE and doc.doc_id not in self.labels:
                raise CorpusError(f"goal note {doc.doc_id!r} has no goal label")
        for doc_id in self.labels:
            if doc_id not in seen_ids:
                raise CorpusError(f"goal label references unknown document {doc_id!r}")
            # labels only make sense on goal notes
        by_id = {d.doc_id: d for d in self.documents}
        for doc_id in self.labels:
            if by_id[doc_id].doc_type is not DocType.GOAL_NOTE:
                raise CorpusError(f"goal label on non-goal-note document {doc_id!r}")

        # Coalesce duplicate follow edges to their earliest week.
        edge_week: dict[tuple[str, str], int] = {}
        for e in follows:
            if e.follower == e.followee:
                raise CorpusError(f"self-follow edge for user {e.follower!r}")
            key = (e.follower, e.followee)
            if key not in edge_week or e.week < edge_week[key]:
                edge_week[key] = e.week
        self.follow_edges = [FollowEdge(f, g, w) for (f, g), w in sorted(edge_week.items())]
        self._followees: dict[str, list[FollowEdge]] = {}
        for e in self.follow_edges:
            self._followees.setdefault(e.follower, []).append(e)

        self.users = sorted(
            {d.user_id for d in self.documents}
            | {e.follower for e in self.follow_edges}
            | {e.followee for e in self.follow_edges}
        )
        self._user_set = set(self.users)

        # Goal-note timeline per user: weeks of notes and weeks of
        # goal-containing notes, used for category lookups.
        self._note_weeks: dict[str, list[int]] = {}
        self._goal_weeks: dict[str, list[int]] = {}
        for doc in self.documents:
            if doc.doc_type is DocType.GOAL_NOTE:
                wk = week_of(doc.timestamp, self.course_start)
                self._note_weeks.setdefault(doc.user_id, []).append(wk)
                if self.labels[doc.doc_id]:
                    self._goal_weeks.setdefault(doc.user_id, []).append(wk)
        for d in (self._note_weeks, self._goal_weeks):
            for wks in d.values():
                wks.sort()

        self.vocab = Vocabulary()
        self.processed: list[ProcessedDocument] = []
        for doc in self.documents:
            pdoc = self._process(doc)
            if pdoc is not None:
                self.processed.append(pdoc)

    def _process(self, doc: RawDocument) -> ProcessedDocument | None:
        """Tokenize one document; returns None when no tokens survive."""
        if doc.doc_type is DocType.GOAL_NOTE:
            eff = EffType.REL_GOAL_NOTE if self.labels[doc.doc_id] else EffType.IR_GOAL_NOTE
            words = tokenize(doc.text, doc.doc_type)
        elif doc.doc_type is DocType.PROSOLO_POST:
            eff = EffType.POST
            words = tokenize(doc.text, doc.doc_type)
        elif doc.doc_type is DocType.BLOG_POST:
            eff = EffType.BLOG
            words = tokenize(doc.text, doc.doc_type)
        else:  # tweet
            if classify_tweet_relevance(doc.text, self.hashtags):
                eff = EffType.REL_TWEET
                words = tokenize(doc.text, doc.doc_type)
            else:
                eff = EffType.IR_TWEET
                words = [IRRELEVANT_TOKEN]
        if not words:
            return None
        token_ids = tuple(self.vocab.add(w) for w in words)
        return ProcessedDocument(
            doc_id=doc.doc_id,
            user_id=doc.user_id,
            week=week_of(doc.timestamp, self.course_start),
            eff_type=eff,
            tokens=token_ids,
        )

    # ------------------------------------------------------------------
    # category derivation

    def goal_category(self, user_id: str, week: int) -> GoalCategory:
        """Goal tier of ``user_id`` as of the end of ``week``.

        Goal setter once any goal-containing note exists by that week, goal
        participant once any note exists, bystander otherwise.  The tier
        never downgrades as ``week`` grows.
        """
        if user_id not in self._user_set:
            raise CorpusError(f"unknown user {user_id!r}")
        goal_wks = self._goal_weeks.get(user_id)
        if goal_wks and goal_wks[0] <= week:
            return GoalCategory.SETTER
        note_wks = self._note_weeks.get(user_id)
        if note_wks and note_wks[0] <= week:
            return GoalCategory.PARTICIPANT
        return GoalCategory.BYSTANDER

    def social_category(self, user_id: str, week: int) -> int:
        """Social-connection category id of ``user_id`` at ``week``.

        Looks at all follow edges existing by ``week``, evaluates each
        followee's goal tier at that same week, and keeps the best tier.
        The "new" variant applies only in the first week any edge to a
        followee of that best tier exists.
        """
        if user_id not in self._user_set:
            raise CorpusError(f"unknown user {user_id!r}")
        active = [e for e in self._followees.get(user_id, []) if e.week <= week]
        if not active:
            return NO_FOLLOW_CATEGORY
        tiers = {e.followee: self.goal_category(e.followee, week) for e in active}
        best = max(tiers.values(), key=lambda t: t.value)
        first_week = min(e.week for e in active if tiers[e.followee] is best)
        return _CATEGORY_BY_TIER[(best, first_week == week)]

    # ------------------------------------------------------------------
    # sequences

    def build_sequences(self) -> SequenceSet:
        """Weekly per-user sequences over all users with processed documents.

        Weeks without surviving documents are omitted, so consecutive time
        points may be non-adjacent calendar weeks.  Users with no processed
        documents have no sequence (they still exist for feature building).
        """
        by_user: dict[str, dict[int, list[ProcessedDocument]]] = {}
        for pdoc in self.processed:
            by_user.setdefault(pdoc.user_id, {}).setdefault(pdoc.week, []).append(pdoc)

        sequences = []
        for user_id in sorted(by_user):
            points = []
            for week in sorted(by_user[user_id]):
                docs = tuple(
                    SeqDoc(p.doc_id, EFF_TYPE_INDEX[p.eff_type], p.tokens)
                    for p in sorted(by_user[user_id][week], key=lambda p: p.doc_id)
                )
                points.append(TimePoint(week=week, category=self.social_category(user_id, week), docs=docs))
            sequences.append(Sequence(user_id=user_id, points=tuple(points)))
        return SequenceSet(
            sequences=sequences,
            vocab=self.vocab,
            doc_types=[t.value for t in EFF_TYPES],
            categories=list(SOCIAL_CATEGORIES),
        )

    # ------------------------------------------------------------------
    # convenience lookups used by the recommender feature builder

    def first_active_week(self, user_id: str) -> int:
        """Week of the user's earliest document, 0 for edge-only users."""
        if user_id not in self._user_set:
            raise CorpusError(f"unknown user {user_id!r}")
        weeks = [week_of(d.timestamp, self.course_start) for d in self.documents if d.user_id == user_id]
        return min(weeks) if weeks else 0

    def last_week(self) -> int:
        if not self.documents:
            return 0
        return max(week_of(d.timestamp, self.course_start) for d in self.documents)


# ----------------------------------------------------------------------
# file loading

def load_documents_jsonl(path: str) -> list[RawDocument]:
    """Read documents from a JSON-lines file.

    Each line is an object with doc_id, user_id, timestamp, doc_type, text.
    Blank lines and ``#`` comment lines (used for provenance headers) are
    skipped.
    """
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                doc_type = DocType(obj["doc_type"])
                docs.append(
                    RawDocument(
                        doc_id=str(obj["doc_id"]),
                        user_id=str(obj["user_id"]),
                        timestamp=int(obj["timestamp"]),
                        doc_type=doc_type,
                        text=str(obj["text"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad document record: {exc}") from exc
    return docs


def _skip_comments(fh):
    """Pass through lines that are not ``#`` provenance comments."""
    return (line for line in fh if not line.startswith("#"))


def load_follows_csv(path: str) -> list[FollowEdge]:
    """Read follow edges from a CSV with header follower,followee,week_index."""
    edges = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_skip_comments(fh))
        expected = {"follower", "followee", "week_index"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise CorpusError(f"{path}: expected header with columns {sorted(expected)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                edges.append(
                    FollowEdge(
                        follower=row["follower"].strip(),
                        followee=row["followee"].strip(),
                        week=int(row["week_index"]),
                    )
                )
            except (ValueError, AttributeError) as exc:
                raise CorpusError(f"{path}:{lineno}: bad follow edge: {exc}") from exc
    return edges


_TRUE_VALUES = {"true", "1", "yes"}
_FALSE_VALUES = {"false", "0", "no"}


def load_goal_labels_csv(path: str) -> list[GoalLabel]:
    """Read goal labels from a CSV with header doc_id,contains_goal."""
    labels = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_skip_comments(fh))
        expected = {"doc_id", "contains_goal"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise CorpusError(f"{path}: expected header with columns {sorted(expected)}")
        for lineno, row in enumerate(reader, start=2):
            raw = row["contains_goal"].strip().lower()
            if raw in _TRUE_VALUES:
                value = True
            elif raw in _FALSE_VALUES:
                value = False
            else:
                raise CorpusError(f"{path}:{lineno}: bad contains_goal value {row['contains_goal']!r}")
            labels.append(GoalLabel(doc_id=row["doc_id"].strip(), contains_goal=value))
    return labels


def load_corpus(
    documents_path: str,
    follows_path: str,
    labels_path: str,
    course_start: int,
    hashtags: tuple[str, ...] = DEFAULT_HASHTAGS,
) -> Corpus:
    """Load and validate a corpus from its three input files."""
    return Corpus(
        documents=load_documents_jsonl(documents_path),
        follows=load_follows_csv(follows_path),
        labels=load_goal_labels_csv(labels_path),
        course_start=course_start,
        hashtags=hashtags,
    )

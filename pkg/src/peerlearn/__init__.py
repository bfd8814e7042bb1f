"""Behavior-state modeling and discussion recommendation for social learning data.

The package is organized around a weekly view of learner activity:

* :mod:`peerlearn.corpus` ingests raw documents, follow edges and goal labels
  and turns them into per-user weekly sequences with social-connection
  categories.
* :mod:`peerlearn.sttm` fits a state-transition topic model over those
  sequences with collapsed Gibbs sampling.
* :mod:`peerlearn.analysis` summarizes fitted models (state summaries,
  occupancy tables, chi-square tests, transition graphs).
* :mod:`peerlearn.recommender` scores and assigns learners to discussions
  under qualification constraints.
* :mod:`peerlearn.cli` wires everything into a command line tool.
"""

__version__ = "0.1.0"

"""Compiled inner loops for the collapsed Gibbs sampler.

Everything here operates on the flattened corpus arrays owned by
:class:`peerlearn.sttm.SttmModel`.  The single-site scoring helpers are the
same functions the full sweeps call, so conditional probabilities inspected
by tests are computed by exactly the code the sampler runs.

Count arrays (all int64):

* ``n_zw``  (Z, V)   words per topic
* ``n_z``   (Z,)     row sums of ``n_zw``
* ``n_sz``  (S, Z)   topic draws per state, ``n_sz_sum`` its row sums
* ``n_sd``  (S, D)   doc-type draws per state, ``n_sd_sum`` its row sums
* ``n_sas`` (S+1, A, S) transitions source-state x category x target-state;
  row index S is the virtual start state, ``n_sas_sum`` sums over targets
* ``n_mtz`` (P, Z)   topic draws per time point
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _detach_token(i, token_word, token_tp, token_topic, tp_state,
                  n_zw, n_z, n_sz, n_mtz):
    w = token_word[i]
    p = token_tp[i]
    c = tp_state[p]
    z = token_topic[i]
    n_zw[z, w] -= 1
    n_z[z] -= 1
    n_sz[c, z] -= 1
    n_mtz[p, z] -= 1


@njit(cache=True)
def _attach_token(i, z, token_word, token_tp, token_topic, tp_state,
                  n_zw, n_z, n_sz, n_mtz):
    w = token_word[i]
    p = token_tp[i]
    c = tp_state[p]
    token_topic[i] = z
    n_zw[z, w] += 1
    n_z[z] += 1
    n_sz[c, z] += 1
    n_mtz[p, z] += 1


@njit(cache=True)
def _topic_scores(p, w, n_mtz, n_zw, n_z, alpha, beta, n_vocab, out):
    """Unnormalized conditional for one detached token; returns the total.

    The mixture factor uses the token's own time point row ``n_mtz[p]``:
    each time point carries its own topic mixture under the collapsed
    joint, so other points (even ones in the same state) do not enter.
    """
    n_topics = n_zw.shape[0]
    total = 0.0
    for j in range(n_topics):
        s = (n_mtz[p, j] + alpha) * (n_zw[j, w] + beta) / (n_z[j] + beta * n_vocab)
        out[j] = s
        total += s
    return total


@njit(cache=True)
def _detach_timepoint(p, c, in_row, in_cat, out_cat, next_state, has_next,
                      tp_type_counts, tp_n_docs, tp_n_words, n_mtz,
                      n_sd, n_sd_sum, n_sz, n_sz_sum, n_sas, n_sas_sum):
    n_doc_types = n_sd.shape[1]
    n_topics = n_sz.shape[1]
    for k in range(n_doc_types):
        n_sd[c, k] -= tp_type_counts[p, k]
    n_sd_sum[c] -= tp_n_docs[p]
    for j in range(n_topics):
        n_sz[c, j] -= n_mtz[p, j]
    n_sz_sum[c] -= tp_n_words[p]
    n_sas[in_row, in_cat, c] -= 1
    n_sas_sum[in_row, in_cat] -= 1
    if has_next:
        n_sas[c, out_cat, next_state] -= 1
        n_sas_sum[c, out_cat] -= 1


@njit(cache=True)
def _attach_timepoint(p, c, in_row, in_cat, out_cat, next_state, has_next,
                      tp_type_counts, tp_n_docs, tp_n_words, n_mtz,
                      n_sd, n_sd_sum, n_sz, n_sz_sum, n_sas, n_sas_sum):
    n_doc_types = n_sd.shape[1]
    n_topics = n_sz.shape[1]
    for k in range(n_doc_types):
        n_sd[c, k] += tp_type_counts[p, k]
    n_sd_sum[c] += tp_n_docs[p]
    for j in range(n_topics):
        n_sz[c, j] += n_mtz[p, j]
    n_sz_sum[c] += tp_n_words[p]
    n_sas[in_row, in_cat, c] += 1
    n_sas_sum[in_row, in_cat] += 1
    if has_next:
        n_sas[c, out_cat, next_state] += 1
        n_sas_sum[c, out_cat] += 1


@njit(cache=True)
def _state_log_scores(p, in_row, in_cat, out_cat, next_state, has_next,
                      tp_type_counts, tp_n_docs,
                      n_sd, n_sd_sum, n_sas, n_sas_sum,
                      nu, gamma, out):
    """Log conditional scores over states for one detached time point.

    Each candidate state is scored by the change in the collapsed joint from
    re-attaching the time point there: a Dirichlet-multinomial block for its
    document types and the two adjacent transition factors.  The point's
    topic draws do not appear: their mixture factor is keyed to the time
    point, not the state, so it cancels from the conditional.  When the
    incoming transition lands in the same (state, category) transition row
    that the outgoing transition draws from, the outgoing factor sees that
    extra observation, hence the indicator corrections.
    Ascending-factorial products replace gamma ratios because the
    per-time-point counts are small integers.
    """
    n_states = n_sd.shape[0]
    n_doc_types = n_sd.shape[1]
    for c in range(n_states):
        ls = 0.0
        for k in range(n_doc_types):
            nk = tp_type_counts[p, k]
            base = n_sd[c, k] + nu
            for r in range(nk):
                ls += math.log(base + r)
        denom = n_sd_sum[c] + nu * n_doc_types
        for r in range(tp_n_docs[p]):
            ls -= math.log(denom + r)
        ls += math.log(n_sas[in_row, in_cat, c] + gamma)
        if has_next:
            same_row = (in_row == c) and (in_cat == out_cat)
            num_corr = 1.0 if (same_row and next_state == c) else 0.0
            den_corr = 1.0 if same_row else 0.0
            ls += math.log(n_sas[c, out_cat, next_state] + gamma + num_corr)
            ls -= math.log(n_sas_sum[c, out_cat] + gamma * n_states + den_corr)
        out[c] = ls


@njit(cache=True)
def _sweep_topics(order, token_word, token_tp, token_topic, tp_state,
                  n_zw, n_z, n_sz, n_mtz, alpha, beta, n_vocab, uniforms):
    n_topics = n_zw.shape[0]
    scores = np.empty(n_topics, np.float64)
    for idx in range(order.shape[0]):
        i = order[idx]
        w = token_word[i]
        p = token_tp[i]
        _detach_token(i, token_word, token_tp, token_topic, tp_state,
                      n_zw, n_z, n_sz, n_mtz)
        total = _topic_scores(p, w, n_mtz, n_zw, n_z, alpha, beta, n_vocab, scores)
        r = uniforms[idx] * total
        acc = 0.0
        z_new = n_topics - 1
        for j in range(n_topics):
            acc += scores[j]
            if r < acc:
                z_new = j
                break
        _attach_token(i, z_new, token_word, token_tp, token_topic, tp_state,
                      n_zw, n_z, n_sz, n_mtz)


@njit(cache=True)
def _sweep_states(order, tp_is_first, tp_has_next, tp_category, tp_in_cat,
                  tp_state, tp_type_counts, tp_n_docs, tp_n_words,
                  n_mtz, n_sd, n_sd_sum, n_sz, n_sz_sum, n_sas, n_sas_sum,
                  nu, gamma, uniforms):
    n_states = n_sd.shape[0]
    start_row = n_states
    logs = np.empty(n_states, np.float64)
    for idx in range(order.shape[0]):
        p = order[idx]
        c_old = tp_state[p]
        in_row = start_row if tp_is_first[p] else tp_state[p - 1]
        in_cat = tp_in_cat[p]
        out_cat = tp_category[p]
        has_next = tp_has_next[p]
        next_state = tp_state[p + 1] if has_next else -1
        _detach_timepoint(p, c_old, in_row, in_cat, out_cat, next_state, has_next,
                          tp_type_counts, tp_n_docs, tp_n_words, n_mtz,
                          n_sd, n_sd_sum, n_sz, n_sz_sum, n_sas, n_sas_sum)
        _state_log_scores(p, in_row, in_cat, out_cat, next_state, has_next,
                          tp_type_counts, tp_n_docs,
                          n_sd, n_sd_sum, n_sas, n_sas_sum,
                          nu, gamma, logs)
        mx = logs[0]
        for c in range(1, n_states):
            if logs[c] > mx:
                mx = logs[c]
        total = 0.0
        for c in range(n_states):
            logs[c] = math.exp(logs[c] - mx)
            total += logs[c]
        r = uniforms[idx] * total
        acc = 0.0
        c_new = n_states - 1
        for c in range(n_states):
            acc += logs[c]
            if r < acc:
                c_new = c
                break
        tp_state[p] = c_new
        _attach_timepoint(p, c_new, in_row, in_cat, out_cat, next_state, has_next,
                          tp_type_counts, tp_n_docs, tp_n_words, n_mtz,
                          n_sd, n_sd_sum, n_sz, n_sz_sum, n_sas, n_sas_sum)


@njit(cache=True)
def _dirmult_log(counts, conc):
    """Collapsed Dirichlet-multinomial log marginal, summed over rows.

    For each row with total n and cell counts n_k this is
    ``lgamma(K*conc) - lgamma(K*conc + n) + sum_k [lgamma(conc + n_k) -
    lgamma(conc)]``; empty rows contribute zero.
    """
    n_rows, n_cols = counts.shape
    total = 0.0
    for r in range(n_rows):
        n = 0
        for k in range(n_cols):
            n += counts[r, k]
        if n == 0:
            continue
        total += math.lgamma(n_cols * conc) - math.lgamma(n_cols * conc + n)
        for k in range(n_cols):
            ck = counts[r, k]
            if ck > 0:
                total += math.lgamma(conc + ck) - math.lgamma(conc)
    return total

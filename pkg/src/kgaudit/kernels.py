"""Hot training kernels: one numba ``@njit`` path, one vectorized numpy path.

The jit path is the default; set ``KGAUDIT_NO_NUMBA=1`` (or fail to import
numba) to run on the pure-numpy fallback.  Both paths implement the same
candidate layout per fact -- [true triple, entity corruptions, relation
corruptions] -- and apply the accumulated mini-batch gradient after all
reads, so they agree to float round-off and each is bitwise deterministic.

``benchmarks/bench_kernels.py`` times one path against the other.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("KGAUDIT_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    if NUMBA_DISABLED:
        raise ImportError("disabled via KGAUDIT_NO_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - exercised via env flag
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


@njit(cache=True)
def _softmax_batch_loop(ent, rel, h, r, t, neg_e, neg_e_head, neg_r, lr):
    b = h.shape[0]
    ke = neg_e.shape[1]
    kr = neg_r.shape[1]
    c = 1 + ke + kr
    d = ent.shape[1]

    scores = np.empty(c)
    cand_h = np.empty(c, np.int64)
    cand_r = np.empty(c, np.int64)
    cand_t = np.empty(c, np.int64)
    ge_rows = np.empty(b * c * 2, np.int64)
    ge = np.empty((b * c * 2, d))
    gr_rows = np.empty(b * c, np.int64)
    gr = np.empty((b * c, d))

    loss = 0.0
    ne = 0
    nr = 0
    for i in range(b):
        cand_h[0] = h[i]
        cand_r[0] = r[i]
        cand_t[0] = t[i]
        for j in range(ke):
            if neg_e_head[i, j]:
                cand_h[1 + j] = neg_e[i, j]
                cand_t[1 + j] = t[i]
            else:
                cand_h[1 + j] = h[i]
                cand_t[1 + j] = neg_e[i, j]
            cand_r[1 + j] = r[i]
        for j in range(kr):
            cand_h[1 + ke + j] = h[i]
            cand_r[1 + ke + j] = neg_r[i, j]
            cand_t[1 + ke + j] = t[i]

        m = -1.0e300
        for cc in range(c):
            s = 0.0
            hc = cand_h[cc]
            rc = cand_r[cc]
            tc = cand_t[cc]
            for k in range(d):
                s += ent[hc, k] * rel[rc, k] * ent[tc, k]
            scores[cc] = s
            if s > m:
                m = s
        z = 0.0
        for cc in range(c):
            z += np.exp(scores[cc] - m)
        loss += np.log(z) - (scores[0] - m)

        for cc in range(c):
            w = np.exp(scores[cc] - m) / z
            if cc == 0:
                w -= 1.0
            hc = cand_h[cc]
            rc = cand_r[cc]
            tc = cand_t[cc]
            ge_rows[ne] = hc
            ge_rows[ne + 1] = tc
            gr_rows[nr] = rc
            for k in range(d):
                ge[ne, k] = w * rel[rc, k] * ent[tc, k]
                ge[ne + 1, k] = w * ent[hc, k] * rel[rc, k]
                gr[nr, k] = w * ent[hc, k] * ent[tc, k]
            ne += 2
            nr += 1

    for i in range(ne):
        row = ge_rows[i]
        for k in range(d):
            ent[row, k] -= lr * ge[i, k]
    for i in range(nr):
        row = gr_rows[i]
        for k in range(d):
            rel[row, k] -= lr * gr[i, k]
    return loss


@njit(cache=True)
def _margin_batch_loop(ent, rel, h, r, t, neg_e, neg_e_head, neg_r, margin, lr):
    b = h.shape[0]
    ke = neg_e.shape[1]
    kr = neg_r.shape[1]
    c = 1 + ke + kr
    d = ent.shape[1]

    scores = np.empty(c)
    cand_h = np.empty(c, np.int64)
    cand_r = np.empty(c, np.int64)
    cand_t = np.empty(c, np.int64)
    ge_rows = np.empty(b * c * 2, np.int64)
    ge = np.empty((b * c * 2, d))
    gr_rows = np.empty(b * c, np.int64)
    gr = np.empty((b * c, d))

    loss = 0.0
    ne = 0
    nr = 0
    for i in range(b):
        cand_h[0] = h[i]
        cand_r[0] = r[i]
        cand_t[0] = t[i]
        for j in range(ke):
            if neg_e_head[i, j]:
                cand_h[1 + j] = neg_e[i, j]
                cand_t[1 + j] = t[i]
            else:
                cand_h[1 + j] = h[i]
                cand_t[1 + j] = neg_e[i, j]
            cand_r[1 + j] = r[i]
        for j in range(kr):
            cand_h[1 + ke + j] = h[i]
            cand_r[1 + ke + j] = neg_r[i, j]
            cand_t[1 + ke + j] = t[i]

        for cc in range(c):
            s = 0.0
            hc = cand_h[cc]
            rc = cand_r[cc]
            tc = cand_t[cc]
            for k in range(d):
                s += ent[hc, k] * rel[rc, k] * ent[tc, k]
            scores[cc] = s

        n_viol = 0.0
        for cc in range(1, c):
            viol = margin + scores[cc] - scores[0]
            if viol > 0.0:
                loss += viol
                n_viol += 1.0
                hc = cand_h[cc]
                rc = cand_r[cc]
                tc = cand_t[cc]
                ge_rows[ne] = hc
                ge_rows[ne + 1] = tc
                gr_rows[nr] = rc
                for k in range(d):
                    ge[ne, k] = rel[rc, k] * ent[tc, k]
                    ge[ne + 1, k] = ent[hc, k] * rel[rc, k]
                    gr[nr, k] = ent[hc, k] * ent[tc, k]
                ne += 2
                nr += 1
        if n_viol > 0.0:
            hc = cand_h[0]
            rc = cand_r[0]
            tc = cand_t[0]
            ge_rows[ne] = hc
            ge_rows[ne + 1] = tc
            gr_rows[nr] = rc
            for k in range(d):
                ge[ne, k] = -n_viol * rel[rc, k] * ent[tc, k]
                ge[ne + 1, k] = -n_viol * ent[hc, k] * rel[rc, k]
                gr[nr, k] = -n_viol * ent[hc, k] * ent[tc, k]
            ne += 2
            nr += 1

    for i in range(ne):
        row = ge_rows[i]
        for k in range(d):
            ent[row, k] -= lr * ge[i, k]
    for i in range(nr):
        row = gr_rows[i]
        for k in range(d):
            rel[row, k] -= lr * gr[i, k]
    return loss


def _candidate_scores(ent, rel, h, r, t, neg_e, neg_e_head, neg_r):
    """Scores (b, 1+ke+kr) plus the gathered row blocks the grads reuse."""
    hv = ent[h]
    rv = rel[r]
    tv = ent[t]
    s_true = np.einsum("bd,bd,bd->b", hv, rv, tv)

    nev = ent[neg_e] if neg_e.size else np.empty((h.size, 0, ent.shape[1]))
    head_mask = neg_e_head.astype(bool)
    s_head = np.einsum("bkd,bd->bk", nev * rv[:, None, :], tv)
    s_tail = np.einsum("bkd,bd->bk", nev * rv[:, None, :], hv)
    s_ent = np.where(head_mask, s_head, s_tail)

    nrv = rel[neg_r] if neg_r.size else np.empty((h.size, 0, rel.shape[1]))
    s_rel = np.einsum("bkd,bd->bk", nrv, hv * tv)

    scores = np.concatenate([s_true[:, None], s_ent, s_rel], axis=1)
    return scores, hv, rv, tv, nev, nrv, head_mask


def _scatter_updates(ent, rel, ent_rows, ent_grads, rel_rows, rel_grads, lr):
    np.subtract.at(ent, ent_rows.ravel(), lr * ent_grads.reshape(-1, ent.shape[1]))
    np.subtract.at(rel, rel_rows.ravel(), lr * rel_grads.reshape(-1, rel.shape[1]))


def _softmax_batch_numpy(ent, rel, h, r, t, neg_e, neg_e_head, neg_r, lr):
    scores, hv, rv, tv, nev, nrv, head_mask = _candidate_scores(
        ent, rel, h, r, t, neg_e, neg_e_head, neg_r
    )
    m = scores.max(axis=1, keepdims=True)
    ez = np.exp(scores - m)
    z = ez.sum(axis=1)
    loss = float(np.sum(np.log(z) - (scores[:, 0] - m[:, 0])))
    w = ez / z[:, None]
    w[:, 0] -= 1.0

    ke = neg_e.shape[1]
    kr = neg_r.shape[1]
    b, d = hv.shape
    c = 1 + ke + kr
    ent_rows = np.empty((b, 2 * c), dtype=np.int64)
    ent_grads = np.empty((b, 2 * c, d))
    rel_rows = np.empty((b, c), dtype=np.int64)
    rel_grads = np.empty((b, c, d))

    w0 = w[:, 0:1]
    ent_rows[:, 0] = h
    ent_rows[:, 1] = t
    ent_grads[:, 0] = w0 * rv * tv
    ent_grads[:, 1] = w0 * hv * rv
    rel_rows[:, 0] = r
    rel_grads[:, 0] = w0 * hv * tv

    if ke:
        we = w[:, 1 : 1 + ke, None]
        other = np.where(head_mask[:, :, None], tv[:, None, :], hv[:, None, :])
        ent_rows[:, 2 : 2 + ke] = neg_e
        ent_grads[:, 2 : 2 + ke] = we * rv[:, None, :] * other
        ent_rows[:, 2 + ke : 2 + 2 * ke] = np.where(head_mask, t[:, None], h[:, None])
        ent_grads[:, 2 + ke : 2 + 2 * ke] = we * rv[:, None, :] * nev
        rel_rows[:, 1 : 1 + ke] = r[:, None]
        rel_grads[:, 1 : 1 + ke] = we * nev * other
    if kr:
        wr = w[:, 1 + ke :, None]
        lo = 2 + 2 * ke
        ent_rows[:, lo : lo + kr] = h[:, None]
        ent_grads[:, lo : lo + kr] = wr * nrv * tv[:, None, :]
        ent_rows[:, lo + kr :] = t[:, None]
        ent_grads[:, lo + kr :] = wr * nrv * hv[:, None, :]
        rel_rows[:, 1 + ke :] = neg_r
        rel_grads[:, 1 + ke :] = wr * hv[:, None, :] * tv[:, None, :]

    _scatter_updates(ent, rel, ent_rows, ent_grads, rel_rows, rel_grads, lr)
    return loss


def _margin_batch_numpy(ent, rel, h, r, t, neg_e, neg_e_head, neg_r, margin, lr):
    scores, hv, rv, tv, nev, nrv, head_mask = _candidate_scores(
        ent, rel, h, r, t, neg_e, neg_e_head, neg_r
    )
    viol = margin + scores[:, 1:] - scores[:, 0:1]
    active = viol > 0.0
    loss = float(viol[active].sum()) if active.any() else 0.0
    w = active.astype(np.float64)
    n_viol = w.sum(axis=1)

    ke = neg_e.shape[1]
    kr = neg_r.shape[1]
    b, d = hv.shape
    c = 1 + ke + kr
    ent_rows = np.empty((b, 2 * c), dtype=np.int64)
    ent_grads = np.empty((b, 2 * c, d))
    rel_rows = np.empty((b, c), dtype=np.int64)
    rel_grads = np.empty((b, c, d))

    w0 = -n_viol[:, None]
    ent_rows[:, 0] = h
    ent_rows[:, 1] = t
    ent_grads[:, 0] = w0 * rv * tv
    ent_grads[:, 1] = w0 * hv * rv
    rel_rows[:, 0] = r
    rel_grads[:, 0] = w0 * hv * tv

    if ke:
        we = w[:, :ke, None]
        other = np.where(head_mask[:, :, None], tv[:, None, :], hv[:, None, :])
        ent_rows[:, 2 : 2 + ke] = neg_e
        ent_grads[:, 2 : 2 + ke] = we * rv[:, None, :] * other
        ent_rows[:, 2 + ke : 2 + 2 * ke] = np.where(head_mask, t[:, None], h[:, None])
        ent_grads[:, 2 + ke : 2 + 2 * ke] = we * rv[:, None, :] * nev
        rel_rows[:, 1 : 1 + ke] = r[:, None]
        rel_grads[:, 1 : 1 + ke] = we * nev * other
    if kr:
        wr = w[:, ke:, None]
        lo = 2 + 2 * ke
        ent_rows[:, lo : lo + kr] = h[:, None]
        ent_grads[:, lo : lo + kr] = wr * nrv * tv[:, None, :]
        ent_rows[:, lo + kr :] = t[:, None]
        ent_grads[:, lo + kr :] = wr * nrv * hv[:, None, :]
        rel_rows[:, 1 + ke :] = neg_r
        rel_grads[:, 1 + ke :] = wr * hv[:, None, :] * tv[:, None, :]

    _scatter_updates(ent, rel, ent_rows, ent_grads, rel_rows, rel_grads, lr)
    return loss


def _prep(ent, rel, h, r, t, neg_e, neg_e_head, neg_r):
    b = h.shape[0]
    return (
        np.ascontiguousarray(h, dtype=np.int64),
        np.ascontiguousarray(r, dtype=np.int64),
        np.ascontiguousarray(t, dtype=np.int64),
        np.ascontiguousarray(neg_e, dtype=np.int64).reshape(b, -1),
        np.ascontiguousarray(neg_e_head, dtype=np.uint8).reshape(b, -1),
        np.ascontiguousarray(neg_r, dtype=np.int64).reshape(b, -1),
    )


def softmax_batch_step(ent, rel, h, r, t, neg_e, neg_e_head, neg_r, lr) -> float:
    """One mini-batch SGD step of the contrastive softmax loss.

    Mutates ``ent`` and ``rel`` in place; returns the summed batch loss.
    """
    h, r, t, neg_e, neg_e_head, neg_r = _prep(ent, rel, h, r, t, neg_e, neg_e_head, neg_r)
    if NUMBA_ENABLED:
        return float(_softmax_batch_loop(ent, rel, h, r, t, neg_e, neg_e_head, neg_r, lr))
    return _softmax_batch_numpy(ent, rel, h, r, t, neg_e, neg_e_head, neg_r, lr)


def margin_batch_step(ent, rel, h, r, t, neg_e, neg_e_head, neg_r, margin, lr) -> float:
    """One mini-batch SGD step of the margin ranking loss (in-place)."""
    h, r, t, neg_e, neg_e_head, neg_r = _prep(ent, rel, h, r, t, neg_e, neg_e_head, neg_r)
    if NUMBA_ENABLED:
        return float(
            _margin_batch_loop(ent, rel, h, r, t, neg_e, neg_e_head, neg_r, margin, lr)
        )
    return _margin_batch_numpy(ent, rel, h, r, t, neg_e, neg_e_head, neg_r, margin, lr)

"""Pure-NumPy backend: exact forward, manual backpropagation, SGD, decoding.

Architecture (hidden size d, shared embedding of size d):

  encoder GRU   z = sig(Wx_z e + Wh_z h + b_z)
                r = sig(Wx_r e + Wh_r h + b_r)
                n = tanh(Wx_n e + b_n + r * (Wh_n h))
                h' = (1 - z) * n + z * h,   h_0 = 0

  attention     score_j = v . tanh(W_a s + U_a o_j + b_a)   (additive,
                query = previous decoder state, o_j = encoder outputs)
                alpha = softmax(scores), context = sum_j alpha_j o_j

  decoder GRU   input u = [emb(prev) * dropout_mask ; context], state s,
                same gate arithmetic as the encoder, s_0 = final encoder h

  output        logits = W_o [s' ; context] + b_o over the full vocabulary

Loss is the mean token-level cross-entropy over the target positions with
teacher forcing. Gradients are exact; the finite-difference suite in the
tests polices every parameter.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit as _sigmoid

from ..errors import ConfigError, InputDataError
from ..preprocess import TrainingPair, Vocabulary
from .params import ModelState

SOS_ID = Vocabulary.SOS_ID
EOT_ID = Vocabulary.EOT_ID


def _check_ids(ids: np.ndarray, vocab_size: int):
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise InputDataError(
            f"token id out of range [0, {vocab_size}) in {ids.tolist()}"
        )


def make_dropout_masks(rng: np.random.Generator, steps: int, hidden: int,
                       p_drop: float) -> np.ndarray:
    """Inverted-dropout masks for the decoder's embedded inputs."""
    if p_drop <= 0.0:
        return np.ones((steps, hidden))
    keep = rng.random((steps, hidden)) >= p_drop
    return keep.astype(np.float64) / (1.0 - p_drop)


def encode(model: ModelState, x_ids) -> tuple[np.ndarray, np.ndarray]:
    """Run the encoder GRU; returns (outputs (Tx, d), final hidden (d,))."""
    outs, h, _ = _encode_cached(model, np.asarray(x_ids, dtype=np.int64))
    return outs, h


def _encode_cached(model: ModelState, x_ids: np.ndarray):
    p = model.views()
    d = model.hidden
    _check_ids(x_ids, model.vocab_size)
    tx = len(x_ids)
    e = p["emb"][x_ids] if tx else np.zeros((0, d))
    gx_all = e @ p["enc_wx"].T + p["enc_b"]  # (Tx, 3d)
    outs = np.zeros((tx, d))
    z_c = np.zeros((tx, d)); r_c = np.zeros((tx, d))
    n_c = np.zeros((tx, d)); ghn_c = np.zeros((tx, d))
    h = np.zeros(d)
    for t in range(tx):
        gh = p["enc_wh"] @ h
        z = _sigmoid(gx_all[t, :d] + gh[:d])
        r = _sigmoid(gx_all[t, d:2 * d] + gh[d:2 * d])
        n = np.tanh(gx_all[t, 2 * d:] + r * gh[2 * d:])
        h = (1.0 - z) * n + z * h
        outs[t] = h
        z_c[t] = z; r_c[t] = r; n_c[t] = n; ghn_c[t] = gh[2 * d:]
    cache = {"e": e, "z": z_c, "r": r_c, "n": n_c, "ghn": ghn_c}
    return outs, h, cache


def _attend(p, d, s, enc_outs, uo):
    """One additive-attention evaluation; returns (alpha, context, query)."""
    q = p["att_w"] @ s + p["att_b"]
    tt = np.tanh(uo + q)
    scores = tt @ p["att_v"]
    scores = scores - scores.max()
    ex = np.exp(scores)
    alpha = ex / ex.sum()
    context = alpha @ enc_outs
    return alpha, context, q


def _gru_step(wx, wh, b, u, s, d):
    gx = wx @ u + b
    gh = wh @ s
    z = _sigmoid(gx[:d] + gh[:d])
    r = _sigmoid(gx[d:2 * d] + gh[d:2 * d])
    n = np.tanh(gx[2 * d:] + r * gh[2 * d:])
    return (1.0 - z) * n + z * s, z, r, n, gh[2 * d:]


def decode_step(model: ModelState, prev_token: int, hidden, enc_outputs,
                dropout_mask=None):
    """Single decoder step; returns (logits, new hidden, attention weights)."""
    enc_outputs = np.asarray(enc_outputs, dtype=np.float64)
    if enc_outputs.size == 0:
        raise ConfigError("decoder requires non-empty encoder outputs")
    p = model.views()
    d = model.hidden
    _check_ids(np.asarray([prev_token]), model.vocab_size)
    uo = enc_outputs @ p["att_u"].T
    alpha, context, _ = _attend(p, d, np.asarray(hidden, dtype=np.float64),
                                enc_outputs, uo)
    pe = p["emb"][prev_token]
    if dropout_mask is not None:
        pe = pe * dropout_mask
    u = np.concatenate([pe, context])
    s_new, *_ = _gru_step(p["dec_wx"], p["dec_wh"], p["dec_b"], u,
                          np.asarray(hidden, dtype=np.float64), d)
    logits = p["out_w"] @ np.concatenate([s_new, context]) + p["out_b"]
    return logits, s_new, alpha


def _token_loss(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Stable cross-entropy; returns (loss, softmax). Loss reaches exactly 0.0
    once the competing probability mass underflows the float64 spacing at 1."""
    m = logits.max()
    ex = np.exp(logits - m)
    total = ex.sum()
    loss = float(np.log(total) + m - logits[target])
    return loss, ex / total


def forward_loss(model: ModelState, pair, train: bool = True,
                 dropout_masks=None):
    """Teacher-forced forward pass; returns (mean token loss, backward cache)."""
    if isinstance(pair, TrainingPair):
        x_ids, y_ids = pair.x, pair.y
    else:
        x_ids, y_ids = pair
    x_ids = np.asarray(x_ids, dtype=np.int64)
    y_ids = np.asarray(y_ids, dtype=np.int64)
    _check_ids(y_ids, model.vocab_size)
    if len(x_ids) == 0 or len(y_ids) == 0:
        raise ConfigError("training pair must have non-empty input and output")

    p = model.views()
    d = model.hidden
    v = model.vocab_size
    ty = len(y_ids)

    enc_outs, h_final, enc_cache = _encode_cached(model, x_ids)
    uo = enc_outs @ p["att_u"].T

    prev_ids = np.concatenate([[SOS_ID], y_ids[:-1]])
    if dropout_masks is None or not train:
        masks = np.ones((ty, d))
    else:
        masks = np.asarray(dropout_masks, dtype=np.float64)
        if masks.shape != (ty, d):
            raise ConfigError(
                f"dropout masks shape {masks.shape} != ({ty}, {d})"
            )
    pe_all = p["emb"][prev_ids] * masks  # (Ty, d)

    s = h_final.copy()
    s_prev_c = np.zeros((ty, d)); q_c = np.zeros((ty, d))
    al_c = np.zeros((ty, len(x_ids))); c_c = np.zeros((ty, d))
    z_c = np.zeros((ty, d)); r_c = np.zeros((ty, d)); n_c = np.zeros((ty, d))
    ghn_c = np.zeros((ty, d)); s_new_c = np.zeros((ty, d))
    prob_c = np.zeros((ty, v))

    loss = 0.0
    for t in range(ty):
        alpha, context, q = _attend(p, d, s, enc_outs, uo)
        u = np.concatenate([pe_all[t], context])
        s_new, z, r, n, ghn = _gru_step(p["dec_wx"], p["dec_wh"], p["dec_b"],
                                        u, s, d)
        logits = (p["out_w"][:, :d] @ s_new + p["out_w"][:, d:] @ context
                  + p["out_b"])
        step_loss, prob = _token_loss(logits, y_ids[t])
        loss += step_loss
        s_prev_c[t] = s; q_c[t] = q; al_c[t] = alpha; c_c[t] = context
        z_c[t] = z; r_c[t] = r; n_c[t] = n; ghn_c[t] = ghn
        s_new_c[t] = s_new; prob_c[t] = prob
        s = s_new
    loss /= ty

    cache = {
        "x_ids": x_ids, "y_ids": y_ids, "prev_ids": prev_ids,
        "enc_outs": enc_outs, "enc": enc_cache, "uo": uo,
        "masks": masks, "pe": pe_all,
        "s_prev": s_prev_c, "q": q_c, "al": al_c, "c": c_c,
        "z": z_c, "r": r_c, "n": n_c, "ghn": ghn_c,
        "s_new": s_new_c, "prob": prob_c, "loss": loss,
    }
    return loss, cache


def backward(model: ModelState, cache) -> np.ndarray:
    """Exact gradients of the cached loss w.r.t. the flat parameter vector."""
    p = model.views()
    d = model.hidden
    grads = np.zeros_like(model.theta)
    g = model.views(grads)

    x_ids = cache["x_ids"]; y_ids = cache["y_ids"]
    enc_outs = cache["enc_outs"]; uo = cache["uo"]
    tx = len(x_ids); ty = len(y_ids)

    d_enc_outs = np.zeros((tx, d))
    ds_carry = np.zeros(d)

    for t in range(ty - 1, -1, -1):
        dlogits = cache["prob"][t].copy()
        dlogits[y_ids[t]] -= 1.0
        dlogits /= ty

        s_new = cache["s_new"][t]; context = cache["c"][t]
        g["out_w"][:, :d] += np.outer(dlogits, s_new)
        g["out_w"][:, d:] += np.outer(dlogits, context)
        g["out_b"] += dlogits
        ds = p["out_w"][:, :d].T @ dlogits + ds_carry
        dc = p["out_w"][:, d:].T @ dlogits

        z = cache["z"][t]; r = cache["r"][t]; n = cache["n"][t]
        ghn = cache["ghn"][t]; s_prev = cache["s_prev"][t]
        dz = ds * (s_prev - n) * z * (1.0 - z)
        dn = ds * (1.0 - z) * (1.0 - n * n)
        ds_prev = ds * z
        dr = dn * ghn * r * (1.0 - r)
        dgx = np.concatenate([dz, dr, dn])
        dghv = np.concatenate([dz, dr, dn * r])

        u = np.concatenate([cache["pe"][t], context])
        g["dec_wx"] += np.outer(dgx, u)
        g["dec_b"] += dgx
        du = p["dec_wx"].T @ dgx
        g["dec_wh"] += np.outer(dghv, s_prev)
        ds_prev += p["dec_wh"].T @ dghv
        g["emb"][cache["prev_ids"][t]] += du[:d] * cache["masks"][t]
        dc += du[d:]

        # attention backward (tanh arguments are recomputed, not cached)
        alpha = cache["al"][t]
        dal = enc_outs @ dc
        d_enc_outs += np.outer(alpha, dc)
        dsc = alpha * (dal - float(alpha @ dal))
        tt = np.tanh(uo + cache["q"][t])
        g["att_v"] += tt.T @ dsc
        dta = np.outer(dsc, p["att_v"]) * (1.0 - tt * tt)
        dq = dta.sum(axis=0)
        g["att_u"] += dta.T @ enc_outs
        d_enc_outs += dta @ p["att_u"]
        g["att_w"] += np.outer(dq, s_prev)
        g["att_b"] += dq
        ds_prev += p["att_w"].T @ dq

        ds_carry = ds_prev

    # initial decoder state was the final encoder hidden state
    dh_carry = ds_carry
    enc = cache["enc"]
    for t in range(tx - 1, -1, -1):
        dh = d_enc_outs[t] + dh_carry
        h_prev = enc_outs[t - 1] if t > 0 else np.zeros(d)
        z = enc["z"][t]; r = enc["r"][t]; n = enc["n"][t]; ghn = enc["ghn"][t]
        dz = dh * (h_prev - n) * z * (1.0 - z)
        dn = dh * (1.0 - z) * (1.0 - n * n)
        dh_prev = dh * z
        dr = dn * ghn * r * (1.0 - r)
        dgx = np.concatenate([dz, dr, dn])
        dghv = np.concatenate([dz, dr, dn * r])
        g["enc_wx"] += np.outer(dgx, enc["e"][t])
        g["enc_b"] += dgx
        g["emb"][x_ids[t]] += p["enc_wx"].T @ dgx
        g["enc_wh"] += np.outer(dghv, h_prev)
        dh_carry = p["enc_wh"].T @ dghv + dh_prev

    return grads


def loss_and_grads(model: ModelState, x_ids, y_ids, dropout_masks=None):
    loss, cache = forward_loss(model, (x_ids, y_ids), train=True,
                               dropout_masks=dropout_masks)
    return loss, backward(model, cache)


def sgd_step(model: ModelState, grads: np.ndarray, learning_rate: float
             ) -> ModelState:
    """theta <- theta - lr * grad, returned as a new model state."""
    if grads.shape != model.theta.shape:
        raise ConfigError(
            f"gradient shape {grads.shape} != parameter shape {model.theta.shape}"
        )
    out = model.copy()
    out.theta -= learning_rate * grads
    return out


def train_pair(model: ModelState, x_ids, y_ids, learning_rate: float,
               dropout_masks=None) -> float:
    """Fused forward/backward/SGD, updating the model in place."""
    loss, cache = forward_loss(model, (x_ids, y_ids), train=True,
                               dropout_masks=dropout_masks)
    grads = backward(model, cache)
    model.theta -= learning_rate * grads
    return loss


def eval_loss(model: ModelState, x_ids, y_ids) -> float:
    """Mean token cross-entropy without dropout (evaluation mode)."""
    loss, _ = forward_loss(model, (x_ids, y_ids), train=False)
    return loss


def generate_greedy(model: ModelState, x_ids, q_eots: int, max_tokens: int
                    ) -> list[int]:
    """Greedy decoding until q end-of-trace tokens or the token budget.

    The start sentinel is never emitted (its logit is excluded from argmax).
    """
    x_ids = np.asarray(x_ids, dtype=np.int64)
    if len(x_ids) == 0:
        raise ConfigError("generation requires a non-empty input window")
    p = model.views()
    d = model.hidden
    enc_outs, s, _ = _encode_cached(model, x_ids)
    uo = enc_outs @ p["att_u"].T
    prev = SOS_ID
    tokens: list[int] = []
    eots = 0
    while eots < q_eots and len(tokens) < max_tokens:
        alpha, context, _ = _attend(p, d, s, enc_outs, uo)
        u = np.concatenate([p["emb"][prev], context])
        s, *_ = _gru_step(p["dec_wx"], p["dec_wh"], p["dec_b"], u, s, d)
        logits = p["out_w"] @ np.concatenate([s, context]) + p["out_b"]
        logits[SOS_ID] = -np.inf
        tok = int(np.argmax(logits))
        tokens.append(tok)
        if tok == EOT_ID:
            eots += 1
        prev = tok
    return tokens

"""Tiny decoder-only transformer with a hand-written backward pass.

Pre-norm blocks, one attention head, learned positional embeddings and a GELU
MLP. Segment names mirror GPT-2 so layer-targeting configs carry over:

    wte, wpe,
    h.<i>.ln_1, h.<i>.attn.c_attn, h.<i>.attn.c_proj,
    h.<i>.ln_2, h.<i>.mlp.c_fc, h.<i>.mlp.c_proj,
    ln_f, lm_head

Linear layers use the `x @ W + b` convention and store W before b.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import softmax

from nn_core.config import ModelConfig


LN_EPS = 1e-5
GELU_C = math.sqrt(2.0 / math.pi)


def _linear_shapes(config: ModelConfig) -> dict[str, tuple[int, int]]:
    d = config.hidden_dim
    return {
        "attn.c_attn": (d, 3 * d),
        "attn.c_proj": (d, d),
        "mlp.c_fc": (d, 4 * d),
        "mlp.c_proj": (4 * d, d),
    }


BLOCK_ORDER = ("ln_1", "attn.c_attn", "attn.c_proj", "ln_2", "mlp.c_fc", "mlp.c_proj")


def layer_table(config: ModelConfig) -> tuple[tuple[str, int], ...]:
    d, vocab = config.hidden_dim, config.vocab_size
    shapes = _linear_shapes(config)
    table = [("wte", vocab * d), ("wpe", config.seq_len * d)]
    for block in range(config.num_blocks):
        for part in BLOCK_ORDER:
            if part.startswith("ln"):
                length = 2 * d
            else:
                rows, cols = shapes[part]
                length = rows * cols + cols
            table.append((f"h.{block}.{part}", length))
    table.append(("ln_f", 2 * d))
    table.append(("lm_head", d * vocab + vocab))
    return tuple(table)


def _split_linear(flat: np.ndarray, rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    return flat[: rows * cols].reshape(rows, cols), flat[rows * cols :]


def _split_norm(flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    half = flat.shape[0] // 2
    return flat[:half], flat[half:]


def unpack(segments: dict[str, np.ndarray], config: ModelConfig) -> dict[str, tuple[np.ndarray, ...]]:
    """Reshape flat segments into (weight, bias) or (gain, bias) pairs."""

    d, vocab = config.hidden_dim, config.vocab_size
    shapes = _linear_shapes(config)
    weights: dict[str, tuple[np.ndarray, ...]] = {
        "wte": (segments["wte"].reshape(vocab, d),),
        "wpe": (segments["wpe"].reshape(config.seq_len, d),),
        "ln_f": _split_norm(segments["ln_f"]),
        "lm_head": _split_linear(segments["lm_head"], d, vocab),
    }
    for block in range(config.num_blocks):
        for part in BLOCK_ORDER:
            name = f"h.{block}.{part}"
            weights[name] = _split_norm(segments[name]) if part.startswith("ln") else _split_linear(segments[name], *shapes[part])
    return weights


def _layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray) -> tuple[np.ndarray, tuple]:
    mean = x.mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(((x - mean) ** 2).mean(axis=-1, keepdims=True) + LN_EPS)
    normed = (x - mean) * rstd
    return normed * gain + bias, (normed, rstd, gain)


def _layer_norm_backward(grad_out: np.ndarray, cache: tuple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    normed, rstd, gain = cache
    grad_gain = (grad_out * normed).sum(axis=(0, 1))
    grad_bias = grad_out.sum(axis=(0, 1))
    grad_normed = grad_out * gain
    grad_x = rstd * (
        grad_normed
        - grad_normed.mean(axis=-1, keepdims=True)
        - normed * (grad_normed * normed).mean(axis=-1, keepdims=True)
    )
    return grad_x, grad_gain, grad_bias


def _gelu(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    inner = np.tanh(GELU_C * (u + 0.044715 * u**3))
    return 0.5 * u * (1.0 + inner), inner


def _gelu_backward(grad_out: np.ndarray, u: np.ndarray, inner: np.ndarray) -> np.ndarray:
    slope = 0.5 * (1.0 + inner) + 0.5 * u * (1.0 - inner**2) * GELU_C * (1.0 + 3 * 0.044715 * u**2)
    return grad_out * slope


def _linear_backward(grad_out: np.ndarray, x: np.ndarray, weight: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    grad_weight = np.einsum("bti,bto->io", x, grad_out)
    grad_bias = grad_out.sum(axis=(0, 1))
    return grad_out @ weight.T, grad_weight, grad_bias


def forward(weights: dict[str, tuple[np.ndarray, ...]], token_ids: np.ndarray, config: ModelConfig) -> tuple[np.ndarray, dict]:
    """Return logits [B, T, V] and the per-layer activations for backward."""

    _, steps = token_ids.shape
    d = config.hidden_dim
    scale = 1.0 / math.sqrt(d)
    causal = np.triu(np.ones((steps, steps), dtype=bool), k=1)

    x = weights["wte"][0][token_ids] + weights["wpe"][0][:steps]
    cache: dict = {"token_ids": token_ids, "blocks": []}
    for block in range(config.num_blocks):
        prefix = f"h.{block}."
        a, ln_1 = _layer_norm(x, *weights[prefix + "ln_1"])
        w_attn, b_attn = weights[prefix + "attn.c_attn"]
        qkv = a @ w_attn + b_attn
        q, k, v = qkv[..., :d], qkv[..., d : 2 * d], qkv[..., 2 * d :]
        scores = np.where(causal, -np.inf, q @ k.transpose(0, 2, 1) * scale)
        probs = softmax(scores, axis=-1)
        attended = probs @ v
        w_proj, b_proj = weights[prefix + "attn.c_proj"]
        x_mid = x + attended @ w_proj + b_proj

        m, ln_2 = _layer_norm(x_mid, *weights[prefix + "ln_2"])
        w_fc, b_fc = weights[prefix + "mlp.c_fc"]
        u = m @ w_fc + b_fc
        activated, inner = _gelu(u)
        w_out, b_out = weights[prefix + "mlp.c_proj"]
        x_next = x_mid + activated @ w_out + b_out

        cache["blocks"].append(
            {"a": a, "ln_1": ln_1, "q": q, "k": k, "v": v, "probs": probs, "attended": attended,
             "m": m, "ln_2": ln_2, "u": u, "inner": inner, "activated": activated}
        )
        x = x_next

    final, ln_f = _layer_norm(x, *weights["ln_f"])
    w_head, b_head = weights["lm_head"]
    cache["final"] = final
    cache["ln_f"] = ln_f
    return final @ w_head + b_head, cache


def backward(weights: dict[str, tuple[np.ndarray, ...]], cache: dict, grad_logits: np.ndarray, config: ModelConfig) -> dict[str, np.ndarray]:
    """Backpropagate `grad_logits` [B, T, V]; returns flat segment gradients."""

    d = config.hidden_dim
    scale = 1.0 / math.sqrt(d)
    grads: dict[str, np.ndarray] = {}

    w_head, _ = weights["lm_head"]
    grad_final, grad_w_head, grad_b_head = _linear_backward(grad_logits, cache["final"], w_head)
    grads["lm_head"] = np.concatenate([grad_w_head.ravel(), grad_b_head])
    grad_x, grad_gain, grad_bias = _layer_norm_backward(grad_final, cache["ln_f"])
    grads["ln_f"] = np.concatenate([grad_gain, grad_bias])

    for block in reversed(range(config.num_blocks)):
        prefix = f"h.{block}."
        saved = cache["blocks"][block]

        # MLP branch: x_next = x_mid + gelu(ln_2(x_mid) @ W_fc) @ W_out
        w_out, _ = weights[prefix + "mlp.c_proj"]
        grad_activated, grad_w, grad_b = _linear_backward(grad_x, saved["activated"], w_out)
        grads[prefix + "mlp.c_proj"] = np.concatenate([grad_w.ravel(), grad_b])
        grad_u = _gelu_backward(grad_activated, saved["u"], saved["inner"])
        w_fc, _ = weights[prefix + "mlp.c_fc"]
        grad_m, grad_w, grad_b = _linear_backward(grad_u, saved["m"], w_fc)
        grads[prefix + "mlp.c_fc"] = np.concatenate([grad_w.ravel(), grad_b])
        grad_mid, grad_gain, grad_bias = _layer_norm_backward(grad_m, saved["ln_2"])
        grads[prefix + "ln_2"] = np.concatenate([grad_gain, grad_bias])
        grad_mid = grad_mid + grad_x

        # Attention branch: x_mid = x + softmax(q k^T / sqrt(d)) v @ W_proj
        w_proj, _ = weights[prefix + "attn.c_proj"]
        grad_attended, grad_w, grad_b = _linear_backward(grad_mid, saved["attended"], w_proj)
        grads[prefix + "attn.c_proj"] = np.concatenate([grad_w.ravel(), grad_b])
        probs = saved["probs"]
        grad_probs = grad_attended @ saved["v"].transpose(0, 2, 1)
        grad_v = probs.transpose(0, 2, 1) @ grad_attended
        grad_scores = probs * (grad_probs - (grad_probs * probs).sum(axis=-1, keepdims=True))
        grad_q = grad_scores @ saved["k"] * scale
        grad_k = grad_scores.transpose(0, 2, 1) @ saved["q"] * scale
        grad_qkv = np.concatenate([grad_q, grad_k, grad_v], axis=-1)
        w_attn, _ = weights[prefix + "attn.c_attn"]
        grad_a, grad_w, grad_b = _linear_backward(grad_qkv, saved["a"], w_attn)
        grads[prefix + "attn.c_attn"] = np.concatenate([grad_w.ravel(), grad_b])
        grad_in, grad_gain, grad_bias = _layer_norm_backward(grad_a, saved["ln_1"])
        grads[prefix + "ln_1"] = np.concatenate([grad_gain, grad_bias])
        grad_x = grad_in + grad_mid

    token_ids = cache["token_ids"]
    steps = token_ids.shape[1]
    grad_wte = np.zeros((config.vocab_size, d))
    np.add.at(grad_wte, token_ids, grad_x)
    grad_wpe = np.zeros((config.seq_len, d))
    grad_wpe[:steps] = grad_x.sum(axis=0)
    grads["wte"] = grad_wte.ravel()
    grads["wpe"] = grad_wpe.ravel()
    return grads

"""Single-layer LSTM language model with a hand-written backward pass.

The parameter layout exposes exactly four layers:

- `encoder`: token embedding table [vocab, hidden];
- `ih`: input-to-hidden gate weights [4*hidden, hidden] plus bias [4*hidden];
- `hh`: hidden-to-hidden gate weights [4*hidden, hidden] plus bias [4*hidden];
- `decoder`: output projection [vocab, hidden] plus bias [vocab].

Gates are stacked in the order input, forget, cell candidate, output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from nn_core.config import ModelConfig


LAYER_NAMES = ("encoder", "ih", "hh", "decoder")


def layer_table(config: ModelConfig) -> tuple[tuple[str, int], ...]:
    vocab, hidden = config.vocab_size, config.hidden_dim
    gates = 4 * hidden
    return (
        ("encoder", vocab * hidden),
        ("ih", gates * hidden + gates),
        ("hh", gates * hidden + gates),
        ("decoder", vocab * hidden + vocab),
    )


@dataclass(frozen=True)
class LSTMWeights:
    encoder: np.ndarray
    w_ih: np.ndarray
    b_ih: np.ndarray
    w_hh: np.ndarray
    b_hh: np.ndarray
    w_dec: np.ndarray
    b_dec: np.ndarray


def unpack(segments: dict[str, np.ndarray], config: ModelConfig) -> LSTMWeights:
    vocab, hidden = config.vocab_size, config.hidden_dim
    gates = 4 * hidden
    ih, hh, decoder = segments["ih"], segments["hh"], segments["decoder"]
    return LSTMWeights(
        encoder=segments["encoder"].reshape(vocab, hidden),
        w_ih=ih[: gates * hidden].reshape(gates, hidden),
        b_ih=ih[gates * hidden :],
        w_hh=hh[: gates * hidden].reshape(gates, hidden),
        b_hh=hh[gates * hidden :],
        w_dec=decoder[: vocab * hidden].reshape(vocab, hidden),
        b_dec=decoder[vocab * hidden :],
    )


@dataclass
class LSTMCache:
    token_ids: np.ndarray
    embedded: np.ndarray
    hidden: np.ndarray  # [B, T+1, H], hidden[:, 0] is the zero initial state
    cell: np.ndarray  # [B, T+1, H]
    gates: np.ndarray  # [B, T, 4H] post-activation i, f, g, o


def forward(weights: LSTMWeights, token_ids: np.ndarray) -> tuple[np.ndarray, LSTMCache]:
    """Return logits [B, T, V] and the activations needed for backward."""

    batch, steps = token_ids.shape
    size = weights.w_hh.shape[1]
    embedded = weights.encoder[token_ids]
    hidden = np.zeros((batch, steps + 1, size))
    cell = np.zeros((batch, steps + 1, size))
    gates = np.zeros((batch, steps, 4 * size))

    # Input projections do not depend on the recurrence.
    input_part = embedded @ weights.w_ih.T + weights.b_ih
    for t in range(steps):
        z = input_part[:, t] + hidden[:, t] @ weights.w_hh.T + weights.b_hh
        i = expit(z[:, :size])
        f = expit(z[:, size : 2 * size])
        g = np.tanh(z[:, 2 * size : 3 * size])
        o = expit(z[:, 3 * size :])
        cell[:, t + 1] = f * cell[:, t] + i * g
        hidden[:, t + 1] = o * np.tanh(cell[:, t + 1])
        gates[:, t] = np.concatenate([i, f, g, o], axis=1)

    logits = hidden[:, 1:] @ weights.w_dec.T + weights.b_dec
    return logits, LSTMCache(token_ids, embedded, hidden, cell, gates)


def backward(weights: LSTMWeights, cache: LSTMCache, grad_logits: np.ndarray) -> dict[str, np.ndarray]:
    """Backpropagate `grad_logits` [B, T, V] through time; returns flat segment gradients."""

    batch, steps = cache.token_ids.shape
    size = weights.w_hh.shape[1]
    outputs = cache.hidden[:, 1:]

    grad_w_dec = np.einsum("btv,bth->vh", grad_logits, outputs)
    grad_b_dec = grad_logits.sum(axis=(0, 1))
    grad_outputs = grad_logits @ weights.w_dec

    grad_w_ih = np.zeros_like(weights.w_ih)
    grad_w_hh = np.zeros_like(weights.w_hh)
    grad_bias = np.zeros_like(weights.b_ih)
    grad_encoder = np.zeros_like(weights.encoder)
    grad_h_next = np.zeros((batch, size))
    grad_c_next = np.zeros((batch, size))

    for t in reversed(range(steps)):
        i = cache.gates[:, t, :size]
        f = cache.gates[:, t, size : 2 * size]
        g = cache.gates[:, t, 2 * size : 3 * size]
        o = cache.gates[:, t, 3 * size :]
        tanh_c = np.tanh(cache.cell[:, t + 1])

        grad_h = grad_outputs[:, t] + grad_h_next
        grad_c = grad_c_next + grad_h * o * (1.0 - tanh_c**2)
        grad_z = np.concatenate(
            [
                grad_c * g * i * (1.0 - i),
                grad_c * cache.cell[:, t] * f * (1.0 - f),
                grad_c * i * (1.0 - g**2),
                grad_h * tanh_c * o * (1.0 - o),
            ],
            axis=1,
        )

        grad_w_ih += grad_z.T @ cache.embedded[:, t]
        grad_w_hh += grad_z.T @ cache.hidden[:, t]
        grad_bias += grad_z.sum(axis=0)
        np.add.at(grad_encoder, cache.token_ids[:, t], grad_z @ weights.w_ih)
        grad_h_next = grad_z @ weights.w_hh
        grad_c_next = grad_c * f

    return {
        "encoder": grad_encoder.ravel(),
        "ih": np.concatenate([grad_w_ih.ravel(), grad_bias]),
        "hh": np.concatenate([grad_w_hh.ravel(), grad_bias]),
        "decoder": np.concatenate([grad_w_dec.ravel(), grad_b_dec]),
    }

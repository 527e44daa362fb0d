"""DWTRec network: embedding, stacked wavelet-filter layers and a full-catalog head.

Parameters live in a flat ``dict[str, np.ndarray]`` so the optimizer and the
checkpoint writer can treat every tensor uniformly. Forward passes are batched:
a batch of sequences is an int array ``[B, N]`` and activations are
``[B, N, d]``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import kernels as K
from .errors import ConfigError, InvalidItemId, ShapeMismatch
from .wavelets import FilterBank, coeff_lengths, load_filter_bank

INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    N: int = 50
    d: int = 64
    Z: int = 2
    gamma: int = 3
    wavelet: str = "sym6"
    dropout_rate: float = 0.5
    num_items: int = 1

    def validate(self) -> None:
        for key in ("N", "d", "gamma", "num_items"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}")
        if self.Z < 0:
            raise ConfigError(f"Z must be non-negative, got {self.Z}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        coeff_lengths(self.N, load_filter_bank(self.wavelet).FL, self.gamma)

    @property
    def filter_bank(self) -> FilterBank:
        return load_filter_bank(self.wavelet)

    @property
    def level_lengths(self) -> list[int]:
        return coeff_lengths(self.N, self.filter_bank.FL, self.gamma)

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple]:
    """Name -> shape of every trainable tensor, in a fixed order."""
    d = cfg.d
    shapes = {
        "item_emb": (cfg.num_items + 1, d),
        "pos_emb": (cfg.N, d),
        "emb_ln.gain": (d,),
        "emb_ln.bias": (d,),
    }
    lengths = cfg.level_lengths
    for z in range(cfg.Z):
        p = f"layer{z}."
        for i, n in enumerate(lengths, start=1):
            shapes[p + f"w{i}"] = (n, d)
        shapes[p + "r"] = (d,)
        shapes[p + "filter_ln.gain"] = (d,)
        shapes[p + "filter_ln.bias"] = (d,)
        shapes[p + "ffn.W1"] = (d, d)
        shapes[p + "ffn.b1"] = (d,)
        shapes[p + "ffn.W2"] = (d, d)
        shapes[p + "ffn.b2"] = (d,)
        shapes[p + "ffn_ln.gain"] = (d,)
        shapes[p + "ffn_ln.bias"] = (d,)
    return shapes


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Embeddings and FFN weights ~ N(0, 0.02^2); filter weights, re-scaler and
    norm gains start at 1 so every filter block begins as a pass-through."""
    cfg.validate()
    params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if name in ("item_emb", "pos_emb") or leaf in ("W1", "W2"):
            params[name] = rng.normal(0.0, INIT_STD, size=shape)
        elif leaf in ("gain", "r") or leaf.startswith("w"):
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    return params


def check_params(params: dict, cfg: ModelConfig) -> None:
    shapes = param_shapes(cfg)
    if set(params) != set(shapes):
        missing = sorted(set(shapes) - set(params))
        extra = sorted(set(params) - set(shapes))
        raise ShapeMismatch(f"parameter set differs: missing {missing}, unexpected {extra}")
    for name, shape in shapes.items():
        if params[name].shape != shape:
            raise ShapeMismatch(f"{name} has shape {params[name].shape}, expected {shape}")


def param_count(cfg: ModelConfig, num_items: int | None = None) -> dict[str, int]:
    """Trainable parameter counts per component.

    ``filter_per_layer`` is the learnable time-frequency filter alone: the
    per-level weight matrices plus the re-scaler.
    """
    V = cfg.num_items if num_items is None else num_items
    d = cfg.d
    filt = d * sum(cfg.level_lengths) + d
    ffn = 2 * d * d + 2 * d
    norms = 4 * d
    counts = {
        "item_embedding": (V + 1) * d,
        "position_embedding": cfg.N * d,
        "embedding_norm": 2 * d,
        "filter_per_layer": filt,
        "ffn_per_layer": ffn,
        "norms_per_layer": norms,
        "layer_total": filt + ffn + norms,
    }
    counts["total"] = (
        counts["item_embedding"] + counts["position_embedding"]
        + counts["embedding_norm"] + cfg.Z * counts["layer_total"]
    )
    return counts


# -- embedding ----------------------------------------------------------------

def embed_forward(seqs, params, cfg: ModelConfig, rng=None, training=False):
    seqs = np.asarray(seqs)
    if seqs.ndim != 2 or seqs.shape[1] != cfg.N:
        raise ShapeMismatch(f"expected sequences of shape [B, {cfg.N}], got {seqs.shape}")
    if seqs.size and (seqs.min() < 0 or seqs.max() > cfg.num_items):
        bad = seqs[(seqs < 0) | (seqs > cfg.num_items)][0]
        raise InvalidItemId(f"item id {bad} outside [0, {cfg.num_items}]")
    x = params["item_emb"][seqs] + params["pos_emb"]
    y, ln_cache = K.layer_norm_forward(x, params["emb_ln.gain"], params["emb_ln.bias"])
    out, mask = K.dropout_forward(y, cfg.dropout_rate, rng, training)
    return out, (seqs, ln_cache, mask)


def embed_backward(cache, g, grads):
    seqs, ln_cache, mask = cache
    g = K.dropout_backward(mask, g)
    gx, grads["emb_ln.gain"], grads["emb_ln.bias"] = K.layer_norm_backward(ln_cache, g)
    grads["pos_emb"] = gx.sum(axis=0)
    # grads["item_emb"] must already hold the prediction-head contribution
    np.add.at(grads["item_emb"], seqs.reshape(-1), gx.reshape(-1, gx.shape[-1]))


# -- time-frequency filter ----------------------------------------------------

def time_frequency_filter(E, weights, r, fb: FilterBank, gamma: int):
    """Decompose along time, reweight the detail blocks, reconstruct.

    ``weights[i-1]`` multiplies D^i; every detail block is then scaled by
    ``r**2`` per hidden dimension. The final approximation is not touched.
    """
    lengths = [E.shape[-2]]
    down_caches = []
    details = []
    A = E
    for _ in range(gamma):
        D, hi = K.conv_down_forward(A, fb.H)
        A, lo = K.conv_down_forward(A, fb.L)
        down_caches.append((lo, hi))
        details.append(D)
        lengths.append(A.shape[-2])
    approx = A
    scale_caches = []
    for i in range(gamma):
        Dw, mul_cache = K.elem_mul_forward(details[i], weights[i])
        Ds, sc_cache = K.row_broadcast_scale_forward(Dw, r)
        scale_caches.append((mul_cache, sc_cache))
        details[i] = Ds
    up_caches = [None] * gamma
    for i in range(gamma - 1, -1, -1):
        a, lo = K.upconv_forward(A, fb.l, lengths[i])
        b, hi = K.upconv_forward(details[i], fb.h, lengths[i])
        up_caches[i] = (lo, hi)
        A = a + b
    cache = {
        "down": down_caches, "scale": scale_caches, "up": up_caches,
        "approx": approx, "gamma": gamma,
    }
    return A, cache


def time_frequency_filter_backward(cache, g):
    """Returns ``(dE, [dw_1..dw_gamma], dr)``."""
    gamma = cache["gamma"]
    g_details = [None] * gamma
    for i in range(gamma):
        lo, hi = cache["up"][i]
        g_details[i] = K.upconv_backward(hi, g)
        g = K.upconv_backward(lo, g)
    g_approx = g
    dws = [None] * gamma
    dr = 0.0
    for i in range(gamma):
        mul_cache, sc_cache = cache["scale"][i]
        gD, dr_i = K.row_broadcast_scale_backward(sc_cache, g_details[i])
        g_details[i], dws[i] = K.elem_mul_backward(mul_cache, gD)
        dr = dr + dr_i
    gA = g_approx
    for i in range(gamma - 1, -1, -1):
        lo, hi = cache["down"][i]
        gA = K.conv_down_backward(lo, gA) + K.conv_down_backward(hi, g_details[i])
    return gA, dws, dr


def filter_block_forward(E, params, z: int, cfg: ModelConfig, rng=None, training=False):
    p = f"layer{z}."
    weights = [params[p + f"w{i}"] for i in range(1, cfg.gamma + 1)]
    filtered, tf_cache = time_frequency_filter(E, weights, params[p + "r"], cfg.filter_bank, cfg.gamma)
    dropped, mask = K.dropout_forward(filtered, cfg.dropout_rate, rng, training)
    out, ln_cache = K.layer_norm_forward(
        E + dropped, params[p + "filter_ln.gain"], params[p + "filter_ln.bias"]
    )
    return out, (tf_cache, mask, ln_cache)


def filter_block_backward(cache, g, z: int, grads):
    p = f"layer{z}."
    tf_cache, mask, ln_cache = cache
    g_sum, grads[p + "filter_ln.gain"], grads[p + "filter_ln.bias"] = K.layer_norm_backward(ln_cache, g)
    g_filtered = K.dropout_backward(mask, g_sum)
    gE, dws, dr = time_frequency_filter_backward(tf_cache, g_filtered)
    for i, dw in enumerate(dws, start=1):
        grads[p + f"w{i}"] = dw
    grads[p + "r"] = dr
    return gE + g_sum


# -- feed-forward -------------------------------------------------------------

def ffn_forward(E, params, z: int, cfg: ModelConfig, rng=None, training=False):
    p = f"layer{z}."
    h, c1 = K.dense_forward(E, params[p + "ffn.W1"], params[p + "ffn.b1"])
    a, c_act = K.gelu_forward(h)
    h2, c2 = K.dense_forward(a, params[p + "ffn.W2"], params[p + "ffn.b2"])
    dropped, mask = K.dropout_forward(h2, cfg.dropout_rate, rng, training)
    out, ln_cache = K.layer_norm_forward(E + dropped, params[p + "ffn_ln.gain"], params[p + "ffn_ln.bias"])
    return out, (c1, c_act, c2, mask, ln_cache)


def ffn_backward(cache, g, z: int, grads):
    p = f"layer{z}."
    c1, c_act, c2, mask, ln_cache = cache
    g_sum, grads[p + "ffn_ln.gain"], grads[p + "ffn_ln.bias"] = K.layer_norm_backward(ln_cache, g)
    g_h2 = K.dropout_backward(mask, g_sum)
    g_a, grads[p + "ffn.W2"], grads[p + "ffn.b2"] = K.dense_backward(c2, g_h2)
    g_h = K.gelu_backward(c_act, g_a)
    gE, grads[p + "ffn.W1"], grads[p + "ffn.b1"] = K.dense_backward(c1, g_h)
    return gE + g_sum


# -- prediction ---------------------------------------------------------------

def predict_scores(EZ, params, mask_padding: bool = True):
    """Scores of every catalog item from the last position, ``[B, |V|+1]``."""
    scores = EZ[..., -1, :] @ params["item_emb"].T
    if mask_padding:
        scores[..., 0] = -np.inf
    return scores


def model_forward(seqs, params, cfg: ModelConfig, rng=None, training=False, mask_padding=True):
    E, emb_cache = embed_forward(seqs, params, cfg, rng, training)
    layer_caches = []
    for z in range(cfg.Z):
        E, fc = filter_block_forward(E, params, z, cfg, rng, training)
        E, nc = ffn_forward(E, params, z, cfg, rng, training)
        layer_caches.append((fc, nc))
    scores = predict_scores(E, params, mask_padding)
    return scores, {"emb": emb_cache, "layers": layer_caches, "EZ": E, "scores": scores}


def model_backward(cache, labels, params):
    """Mean cross-entropy over the batch and its gradient for every parameter."""
    losses, ce_cache = K.softmax_ce_forward(cache["scores"], labels)
    B = losses.shape[0]
    g_scores = K.softmax_ce_backward(ce_cache) / B
    EZ = cache["EZ"]
    last = EZ[:, -1, :]
    grads = {"item_emb": g_scores.T @ last}
    gE = np.zeros_like(EZ)
    gE[:, -1, :] = g_scores @ params["item_emb"]
    for z in range(len(cache["layers"]) - 1, -1, -1):
        fc, nc = cache["layers"][z]
        gE = ffn_backward(nc, gE, z, grads)
        gE = filter_block_backward(fc, gE, z, grads)
    embed_backward(cache["emb"], gE, grads)
    return float(losses.mean()), grads


def loss_and_grads(seqs, labels, params, cfg: ModelConfig, rng=None, training=False):
    _, cache = model_forward(seqs, params, cfg, rng, training)
    return model_backward(cache, np.asarray(labels), params)


def filter_spectrum(params, cfg: ModelConfig) -> list[tuple]:
    """Rows ``(layer, level, position, band_low, band_high, mean_abs_weight)``.

    Level i covers (f_N / 2**i, f_N / 2**(i-1)] of the Nyquist range, written
    as fractions of f_N; the untouched approximation holds [0, f_N / 2**gamma].
    """
    rows = []
    for z in range(cfg.Z):
        for i in range(1, cfg.gamma + 1):
            w = params[f"layer{z}.w{i}"]
            mags = np.abs(w).mean(axis=1)
            lo, hi = 0.5**i, 0.5 ** (i - 1)
            rows.extend((z, i, pos, lo, hi, float(m)) for pos, m in enumerate(mags))
    return rows

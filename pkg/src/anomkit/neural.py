"""Feed-forward autoencoders and variational autoencoders in plain numpy.

Networks mirror their encoder: ``d -> h1 -> ... -> p -> ... -> h1 -> d`` with
ReLU on hidden layers and linear latent/output layers.  The VAE encoder ends in
two linear heads for the latent mean and log-variance.  Gradients are exact
reverse-mode derivatives of the batch-mean loss; optimisation is Adam.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DivergedLoss
from .jsonio import dumps
from .result import AnomalyResult, as_matrix

CHECKPOINT_FORMAT = "anomkit-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpArch:
    input_dim: int
    hidden: tuple[int, ...] = (64, 32)
    latent: int = 16

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        # overcomplete latents (latent > input_dim) are allowed; several preset models use them
        if self.input_dim < 1 or self.latent < 1 or any(h < 1 for h in self.hidden):
            raise ValueError(f"layer widths must be >= 1, got {self.encoder_widths}")

    @property
    def encoder_widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.latent)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    beta: float = 1.0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class EnsembleConfig:
    members: tuple[tuple[MlpArch, TrainConfig], ...]
    t: float = 0.5

    def __post_init__(self):
        if len(self.members) < 1:
            raise ValueError("ensemble needs at least one member")
        if not self.t > 0:
            raise ValueError("threshold t must be > 0")


# -- layers -----------------------------------------------------------------

Layer = tuple[np.ndarray, np.ndarray, bool]  # (W, b, relu?)


def _layer_specs(widths: Sequence[int], last_relu: bool) -> list[tuple[int, int, bool]]:
    specs = []
    for k in range(len(widths) - 1):
        is_last = k == len(widths) - 2
        specs.append((widths[k], widths[k + 1], last_relu if is_last else True))
    return specs


def _init_layer(rng, fan_in: int, fan_out: int) -> tuple[np.ndarray, np.ndarray]:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, (fan_in, fan_out)), rng.uniform(-bound, bound, fan_out)


@dataclass
class Network:
    """Named parameter arrays plus the layout that interprets them."""

    kind: str  # "ae" or "vae"
    arch: MlpArch
    params: dict[str, np.ndarray]

    def layers(self, prefix: str) -> list[Layer]:
        out, k = [], 0
        while f"{prefix}{k}.W" in self.params:
            relu = bool(self.params[f"{prefix}{k}.relu"][()])
            out.append((self.params[f"{prefix}{k}.W"], self.params[f"{prefix}{k}.b"], relu))
            k += 1
        return out

    def trainable(self) -> list[str]:
        return [k for k in self.params if not k.endswith(".relu")]

    def copy(self) -> "Network":
        return Network(self.kind, self.arch, {k: v.copy() for k, v in self.params.items()})


def _add_stack(params, prefix, specs, rng):
    for k, (i, o, relu) in enumerate(specs):
        W, b = _init_layer(rng, i, o)
        params[f"{prefix}{k}.W"] = W
        params[f"{prefix}{k}.b"] = b
        params[f"{prefix}{k}.relu"] = np.array(relu)


def init_autoencoder(arch: MlpArch, rng: np.random.Generator) -> Network:
    enc = arch.encoder_widths
    params: dict[str, np.ndarray] = {}
    _add_stack(params, "enc", _layer_specs(enc, last_relu=False), rng)
    _add_stack(params, "dec", _layer_specs(enc[::-1], last_relu=False), rng)
    return Network("ae", arch, params)


def init_vae(arch: MlpArch, rng: np.random.Generator) -> Network:
    enc = arch.encoder_widths
    params: dict[str, np.ndarray] = {}
    trunk = enc[:-1]
    if len(trunk) > 1:
        _add_stack(params, "enc", _layer_specs(trunk, last_relu=True), rng)
    for head in ("mu", "logvar"):
        W, b = _init_layer(rng, trunk[-1], arch.latent)
        params[f"{head}.W"] = W
        params[f"{head}.b"] = b
    _add_stack(params, "dec", _layer_specs(enc[::-1], last_relu=False), rng)
    return Network("vae", arch, params)


def _forward_stack(layers: list[Layer], X: np.ndarray):
    """Output and per-layer ``(input, pre-activation)`` cache."""
    cache = []
    h = X
    for W, b, relu in layers:
        z = h @ W + b
        cache.append((h, z))
        h = np.maximum(z, 0.0) if relu else z
    return h, cache


def _backward_stack(layers: list[Layer], cache, g: np.ndarray):
    """Gradients ``[(dW, db), ...]`` and the gradient w.r.t. the stack input."""
    grads = [None] * len(layers)
    for k in range(len(layers) - 1, -1, -1):
        W, _, relu = layers[k]
        h, z = cache[k]
        if relu:
            g = g * (z > 0)
        grads[k] = (h.T @ g, g.sum(axis=0))
        g = g @ W.T
    return grads, g


def mlp_forward(net: Network, X) -> tuple[np.ndarray, list]:
    """Deterministic reconstruction of ``X`` and the layer activations.

    For a VAE the latent code is the encoder mean.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if net.kind == "ae":
        z, enc_cache = _forward_stack(net.layers("enc"), X)
    else:
        h, enc_cache = _forward_stack(net.layers("enc"), X)
        z = h @ net.params["mu.W"] + net.params["mu.b"]
    out, dec_cache = _forward_stack(net.layers("dec"), z)
    return out, enc_cache + dec_cache


def _put(grads: dict, prefix: str, stack_grads):
    for k, (dW, db) in enumerate(stack_grads):
        grads[f"{prefix}{k}.W"] = dW
        grads[f"{prefix}{k}.b"] = db


def ae_loss_and_grads(net: Network, X: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
    """Batch mean of the per-row MSE and its exact gradient."""
    enc, dec = net.layers("enc"), net.layers("dec")
    z, enc_cache = _forward_stack(enc, X)
    out, dec_cache = _forward_stack(dec, z)
    B, d = X.shape
    r = out - X
    loss = float((r * r).sum() / (B * d))
    g = 2.0 * r / (B * d)
    dec_g, g = _backward_stack(dec, dec_cache, g)
    enc_g, _ = _backward_stack(enc, enc_cache, g)
    grads: dict[str, np.ndarray] = {}
    _put(grads, "enc", enc_g)
    _put(grads, "dec", dec_g)
    return loss, grads


def mlp_backward(net: Network, X) -> dict[str, np.ndarray]:
    """Gradient of the batch-mean reconstruction MSE w.r.t. every autoencoder parameter."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return ae_loss_and_grads(net, X)[1]


def kl_standard_normal(mu, logvar) -> float:
    """KL( N(mu, exp(logvar)) || N(0, I) ) for one diagonal Gaussian."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if mu.shape != logvar.shape:
        raise ValueError("mu and logvar must have equal widths")
    # expm1(x) - x avoids the cancellation in exp(x) - 1 - x near 0 and stays >= 0
    return float(0.5 * np.sum(mu * mu + (np.expm1(logvar) - logvar)))


def reparameterize(mu, logvar, eps) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if mu.shape != logvar.shape or mu.shape != eps.shape:
        raise ValueError("mu, logvar and eps must have equal widths")
    return mu + np.exp(0.5 * logvar) * eps


def vae_loss_and_grads(
    net: Network, X: np.ndarray, eps: np.ndarray, beta: float = 1.0
) -> tuple[float, dict[str, np.ndarray], dict[str, float]]:
    """Batch mean of ``MSE + beta * KL / d`` for fixed noise ``eps`` and its gradient."""
    P = net.params
    enc, dec = net.layers("enc"), net.layers("dec")
    h, enc_cache = _forward_stack(enc, X)
    mu = h @ P["mu.W"] + P["mu.b"]
    lv = h @ P["logvar.W"] + P["logvar.b"]
    sd = np.exp(0.5 * lv)
    z = mu + sd * eps
    out, dec_cache = _forward_stack(dec, z)
    B, d = X.shape
    r = out - X
    mse = float((r * r).sum() / (B * d))
    kl_rows = 0.5 * (mu * mu + (np.expm1(lv) - lv)).sum(axis=1)
    kl = float(kl_rows.mean())
    loss = mse + beta * kl / d

    g = 2.0 * r / (B * d)
    dec_g, gz = _backward_stack(dec, dec_cache, g)
    c = beta / (d * B)
    g_mu = gz + c * mu
    g_lv = gz * eps * 0.5 * sd + c * 0.5 * (sd * sd - 1.0)
    grads: dict[str, np.ndarray] = {
        "mu.W": h.T @ g_mu,
        "mu.b": g_mu.sum(axis=0),
        "logvar.W": h.T @ g_lv,
        "logvar.b": g_lv.sum(axis=0),
    }
    gh = g_mu @ P["mu.W"].T + g_lv @ P["logvar.W"].T
    enc_g, _ = _backward_stack(enc, enc_cache, gh)
    _put(grads, "enc", enc_g)
    _put(grads, "dec", dec_g)
    return loss, grads, {"mse": mse, "kl": kl}


# -- training ---------------------------------------------------------------


class Adam:
    def __init__(self, params: dict[str, np.ndarray], names: list[str], lr: float,
                 b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.names = names
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(params[k]) for k in names}
        self.v = {k: np.zeros_like(params[k]) for k in names}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k in self.names:
            g = grads[k]
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainedModel:
    net: Network
    train: TrainConfig
    losses: list[float] = field(default_factory=list)
    recon_losses: list[float] = field(default_factory=list)
    kl_losses: list[float] = field(default_factory=list)

    @property
    def kind(self) -> str:
        return self.net.kind

    @property
    def arch(self) -> MlpArch:
        return self.net.arch

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


def _streams(seed: int):
    return (np.random.default_rng([seed, 0]),  # init
            np.random.default_rng([seed, 1]),  # shuffling
            np.random.default_rng([seed, 2]))  # reparameterisation noise


def _check_width(X: np.ndarray, arch: MlpArch):
    if X.shape[1] != arch.input_dim:
        raise ValueError(f"data has {X.shape[1]} features, architecture expects {arch.input_dim}")


def train_autoencoder(data, arch: MlpArch, cfg: TrainConfig) -> TrainedModel:
    X, _ = as_matrix(data)
    _check_width(X, arch)
    init_rng, shuffle_rng, _ = _streams(cfg.seed)
    net = init_autoencoder(arch, init_rng)
    opt = Adam(net.params, net.trainable(), cfg.lr)
    model = TrainedModel(net, cfg)
    n = X.shape[0]
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            batch = X[order[lo : lo + cfg.batch_size]]
            loss, grads = ae_loss_and_grads(net, batch)
            if not np.isfinite(loss):
                raise DivergedLoss(f"non-finite loss at epoch {len(model.losses)}")
            opt.step(net.params, grads)
            total += loss * len(batch)
        model.losses.append(total / n)
        model.recon_losses.append(total / n)
    return model


def train_vae(data, arch: MlpArch, cfg: TrainConfig) -> TrainedModel:
    X, _ = as_matrix(data)
    _check_width(X, arch)
    init_rng, shuffle_rng, noise_rng = _streams(cfg.seed)
    net = init_vae(arch, init_rng)
    opt = Adam(net.params, net.trainable(), cfg.lr)
    model = TrainedModel(net, cfg)
    n = X.shape[0]
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total = rec = kl = 0.0
        for lo in range(0, n, cfg.batch_size):
            batch = X[order[lo : lo + cfg.batch_size]]
            eps = noise_rng.standard_normal((len(batch), arch.latent))
            loss, grads, parts = vae_loss_and_grads(net, batch, eps, cfg.beta)
            if not np.isfinite(loss):
                raise DivergedLoss(f"non-finite loss at epoch {len(model.losses)}")
            opt.step(net.params, grads)
            total += loss * len(batch)
            rec += parts["mse"] * len(batch)
            kl += parts["kl"] * len(batch)
        model.losses.append(total / n)
        model.recon_losses.append(rec / n)
        model.kl_losses.append(kl / n)
    return model


def reconstruction_errors(model: TrainedModel | Network, data) -> np.ndarray:
    """Per-row mean squared reconstruction error (VAE decodes the latent mean)."""
    net = model.net if isinstance(model, TrainedModel) else model
    X, _ = as_matrix(data)
    _check_width(X, net.arch)
    out, _ = mlp_forward(net, X)
    return ((out - X) ** 2).mean(axis=1)


def member_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def train_ensemble(data, members: Sequence[tuple[MlpArch, TrainConfig]], kind: str = "ae",
                   seed: int = 0) -> list[TrainedModel]:
    """Train every member with its own seed derived from ``(seed, member index)``."""
    trainer = {"ae": train_autoencoder, "vae": train_vae}[kind]
    models = []
    for i, (arch, cfg) in enumerate(members):
        cfg = TrainConfig(cfg.lr, cfg.epochs, cfg.batch_size, member_seed(seed, i), cfg.beta)
        models.append(trainer(data, arch, cfg))
    return models


def ensemble_errors(models: Sequence[TrainedModel], data) -> np.ndarray:
    if not models:
        raise ValueError("ensemble needs at least one model")
    widths = {m.arch.input_dim for m in models}
    if len(widths) != 1:
        raise ValueError(f"ensemble members disagree on input width: {sorted(widths)}")
    return np.mean([reconstruction_errors(m, data) for m in models], axis=0)


def percentile_threshold(errors, q: float) -> float:
    """Threshold at the ``q``-th percentile of ``errors`` (not part of the absolute-t rule)."""
    return float(np.percentile(np.asarray(errors, dtype=np.float64), q))


def ensemble_detect(models: Sequence[TrainedModel], data, t: float, method: str = "ae-ensemble") -> AnomalyResult:
    """Flag rows whose model-averaged reconstruction error exceeds ``t``."""
    _, ids = as_matrix(data)
    t0 = time.perf_counter()
    avg = ensemble_errors(models, data)
    return AnomalyResult(method, ids, avg, avg > t, float(t), time.perf_counter() - t0)


# -- checkpoints ------------------------------------------------------------


def save_checkpoint(model: TrainedModel, path: str | Path) -> None:
    """JSON container: architecture, row-major float64 tensors, training config, final loss."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "arch": {"input_dim": model.arch.input_dim, "hidden": list(model.arch.hidden),
                 "latent": model.arch.latent},
        "train": asdict(model.train),
        "final_loss": model.final_loss,
        "losses": model.losses,
        "params": {
            k: {"shape": list(v.shape), "data": [float(x) for x in np.ravel(v, order="C")]}
            for k, v in model.net.params.items() if not k.endswith(".relu")
        },
    }
    Path(path).write_text(dumps(doc), encoding="utf-8")


def load_checkpoint(path: str | Path) -> TrainedModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not an anomkit checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    a = doc["arch"]
    arch = MlpArch(a["input_dim"], tuple(a["hidden"]), a["latent"])
    init = init_autoencoder if doc["kind"] == "ae" else init_vae
    net = init(arch, np.random.default_rng(0))
    for k, v in doc["params"].items():
        arr = np.array(v["data"], dtype=np.float64).reshape(v["shape"])
        if arr.shape != net.params[k].shape:
            raise ValueError(f"tensor {k} has shape {arr.shape}, expected {net.params[k].shape}")
        net.params[k] = arr
    train = TrainConfig(**doc["train"])
    return TrainedModel(net, train, list(doc.get("losses", [])))

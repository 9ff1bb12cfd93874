"""Finite-difference gradient checks shared by the unit and acceptance suites."""
import numpy as np

import oracles
from anomkit.neural import ae_loss_and_grads, init_autoencoder, init_vae, vae_loss_and_grads


def rel_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


def relu_margin(net, X, eps=None):
    """Smallest |pre-activation| over all ReLU units for this batch."""
    def stack(prefix, h, margins):
        for W, b, relu in net.layers(prefix):
            z = h @ W + b
            if relu:
                margins.append(np.abs(z).min())
                z = np.maximum(z, 0.0)
            h = z
        return h

    margins = [np.inf]
    h = stack("enc", X, margins)
    if net.kind == "vae":
        mu = h @ net.params["mu.W"] + net.params["mu.b"]
        lv = h @ net.params["logvar.W"] + net.params["logvar.b"]
        h = mu + np.exp(0.5 * lv) * eps
    stack("dec", h, margins)
    return min(margins)


def random_point(net, rng, latent=None):
    # central differences are only valid away from ReLU kinks; redraw close calls
    while True:
        X = rng.normal(size=(4, net.arch.input_dim))
        eps = rng.normal(size=(4, latent)) if latent else None
        if relu_margin(net, X, eps) > 1e-4:
            return X, eps


def check_ae_gradients(arch, seed):
    rng = np.random.default_rng(seed)
    net = init_autoencoder(arch, rng)
    X, _ = random_point(net, rng)
    _, grads = ae_loss_and_grads(net, X)
    params = {k: net.params[k] for k in net.trainable()}
    fd = oracles.central_difference(lambda: ae_loss_and_grads(net, X)[0], params)
    return {k: rel_error(grads[k], fd[k]) for k in params}


def check_vae_gradients(arch, seed, beta=1.0):
    rng = np.random.default_rng(seed)
    net = init_vae(arch, rng)
    X, eps = random_point(net, rng, arch.latent)
    _, grads, _ = vae_loss_and_grads(net, X, eps, beta)
    params = {k: net.params[k] for k in net.trainable()}
    fd = oracles.central_difference(lambda: vae_loss_and_grads(net, X, eps, beta)[0], params)
    return {k: rel_error(grads[k], fd[k]) for k in params}

"""Named trainable parameters with AdaDelta state, plus checkpointing and the
finite-difference gradient checker."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable

import numpy as np

from .autodiff import ShapeMismatchError, Tensor, add_n, backward, scale, square_sum


class ParamStore:
    """name -> parameter tensor, with per-parameter AdaDelta accumulators."""

    def __init__(self, rho: float = 0.95, eps: float = 1e-6):
        if not 0 < rho < 1:
            raise ValueError("rho must be in (0, 1)")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.rho = rho
        self.eps = eps
        self.params: dict[str, Tensor] = {}
        self.sq_grad_avg: dict[str, np.ndarray] = {}
        self.sq_delta_avg: dict[str, np.ndarray] = {}
        self._scratch: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def add(self, name: str, values) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name {name!r}")
        data = np.array(values, dtype=np.float64)
        t = Tensor(data)
        self.params[name] = t
        self.sq_grad_avg[name] = np.zeros_like(data)
        self.sq_delta_avg[name] = np.zeros_like(data)
        self._scratch[name] = (np.empty_like(data), np.empty_like(data))
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None
            t._grad_owned = False

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t.data)) for t in self.params.values())


def adadelta_step(store: ParamStore) -> None:
    """One optimizer step from the gradients accumulated on the parameters.

    Per entry: E[g2] <- rho E[g2] + (1-rho) g2;
    delta = -sqrt(E[dx2]+eps)/sqrt(E[g2]+eps) * g;
    E[dx2] <- rho E[dx2] + (1-rho) delta2; x <- x + delta.
    A missing gradient is treated as zero (accumulators still decay).
    """
    rho, eps = store.rho, store.eps
    for name, t in store.params.items():
        sq_grad = store.sq_grad_avg[name]
        sq_delta = store.sq_delta_avg[name]
        g = t.grad
        if g is None:
            sq_grad *= rho
            sq_delta *= rho
            continue
        if g.shape != t.data.shape:
            raise ShapeMismatchError("adadelta_step", t.data.shape, g.shape)
        # Scratch buffers keep the update allocation-free.
        s, r = store._scratch[name]
        np.multiply(g, g, out=s)
        s *= 1.0 - rho
        sq_grad *= rho
        sq_grad += s
        np.add(sq_delta, eps, out=s)
        np.sqrt(s, out=s)
        np.add(sq_grad, eps, out=r)
        np.sqrt(r, out=r)
        s /= r
        s *= g  # s is now -delta
        t.data -= s
        s *= s
        s *= 1.0 - rho
        sq_delta *= rho
        sq_delta += s


def l2_penalty(store: ParamStore, lam: float) -> Tensor:
    """lam/2 times the sum of squares over every trainable parameter."""
    if lam < 0:
        raise ValueError("l2 strength must be non-negative")
    terms = [square_sum(t) for t in store.params.values()]
    return scale(lam / 2.0, add_n(terms))


def gradient_check(
    build: Callable[[ParamStore], Tensor],
    store: ParamStore,
    h: float = 1e-5,
    max_entries_per_param: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    `build` must deterministically produce a scalar loss from the store.  Every
    parameter entry is probed unless max_entries_per_param caps it (entries are
    then chosen by a seeded draw, the same ones every call).
    """
    store.zero_grad()
    backward(build(store))
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in store.params.items()
    }
    store.zero_grad()

    rng = np.random.default_rng(seed)
    max_err = 0.0
    for name, t in store.params.items():
        flat = t.data.reshape(-1)
        grads = analytic[name].reshape(-1)
        indices = np.arange(flat.size)
        if max_entries_per_param is not None and flat.size > max_entries_per_param:
            indices = rng.permutation(flat.size)[:max_entries_per_param]
        for idx in indices:
            orig = flat[idx]
            flat[idx] = orig + h
            loss_plus = float(build(store).data)
            flat[idx] = orig - h
            loss_minus = float(build(store).data)
            flat[idx] = orig
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            err = abs(grads[idx] - numeric) / max(abs(grads[idx]), abs(numeric), 1e-8)
            max_err = max(max_err, err)
    return max_err


CHECKPOINT_FORMAT_VERSION = 1


def save_checkpoint(path: str | Path, store: ParamStore, config: dict) -> None:
    """Portable npz checkpoint: parameters, optimizer state, and the config.

    Layout (documented in the README): float64 arrays under "param:<name>",
    "eg2:<name>", "edx2:<name>"; "rho" and "eps" as scalars; the config dict as
    UTF-8 JSON bytes under "config_json".
    """
    arrays: dict[str, np.ndarray] = {}
    for name, t in store.params.items():
        arrays[f"param:{name}"] = np.ascontiguousarray(t.data, dtype="<f8")
        arrays[f"eg2:{name}"] = np.ascontiguousarray(store.sq_grad_avg[name], dtype="<f8")
        arrays[f"edx2:{name}"] = np.ascontiguousarray(store.sq_delta_avg[name], dtype="<f8")
    arrays["rho"] = np.float64(store.rho).reshape(())
    arrays["eps"] = np.float64(store.eps).reshape(())
    payload = dict(config)
    payload["checkpoint_format_version"] = CHECKPOINT_FORMAT_VERSION
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    arrays["config_json"] = np.frombuffer(blob, dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path) -> tuple[ParamStore, dict]:
    with np.load(path) as archive:
        config = json.loads(bytes(archive["config_json"]).decode("utf-8"))
        store = ParamStore(rho=float(archive["rho"]), eps=float(archive["eps"]))
        for key in archive.files:
            if key.startswith("param:"):
                name = key[len("param:"):]
                store.add(name, archive[key])
                store.sq_grad_avg[name] = np.array(archive[f"eg2:{name}"], dtype=np.float64)
                store.sq_delta_avg[name] = np.array(archive[f"edx2:{name}"], dtype=np.float64)
    return store, config

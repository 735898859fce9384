"""Seeded counter-based random streams and Haar samplers.

A :class:`RngStream` is a value: ``(root_seed, task_path)``.  Generators are
built from a Philox bit generator keyed by ``SeedSequence(root_seed,
spawn_key=task_path)``, so any task can rebuild its randomness without
touching a shared sequence, and the result does not depend on how many
workers share the job.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Subspace

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    root_seed: int
    task_path: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "root_seed", int(self.root_seed) & _MASK64)
        object.__setattr__(self, "task_path", tuple(int(t) & _MASK64 for t in self.task_path))

    def derive(self, task_id: int) -> "RngStream":
        return RngStream(self.root_seed, self.task_path + (task_id,))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.root_seed, spawn_key=self.task_path)
        return np.random.Generator(np.random.Philox(seq))


def derive_stream(rng: RngStream, task_id: int) -> RngStream:
    return rng.derive(task_id)


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None:
        raise ValueError("an explicit rng or seed is required")
    return RngStream(int(rng)).generator()


def sample_sphere(n: int, rng, size=None) -> np.ndarray:
    """Uniform point(s) on S^{n-1}; shape ``(n,)`` or ``(size, n)``."""
    gen = as_generator(rng)
    shape = (n,) if size is None else (size, n)
    while True:
        g = gen.standard_normal(shape)
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
        if np.all(norms > 0):
            return g / norms


def _haar_qr(gen: np.random.Generator, n: int, m: int) -> np.ndarray:
    while True:
        g = gen.standard_normal((n, m))
        q, r = np.linalg.qr(g)
        d = np.diag(r)
        # Rank-deficient draws have probability zero; resample if one slips in.
        if np.min(np.abs(d)) > 1e-10 * max(1.0, np.max(np.abs(d))):
            return q * np.sign(d)


def sample_grassmannian(n: int, m: int, rng) -> Subspace:
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got n={n}, m={m}")
    return Subspace(_haar_qr(as_generator(rng), n, m))


def sample_orthogonal(n: int, rng) -> np.ndarray:
    """Haar-distributed element of O(n) via sign-corrected QR."""
    return _haar_qr(as_generator(rng), n, n)

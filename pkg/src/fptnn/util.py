"""Small shared helpers: seeded RNG streams, simplex reparameterization, chunking."""

import zlib

import numpy as np


def make_rng(seed, *labels):
    """Counter-based (Philox) generator derived from a 64-bit seed and labels.

    Streams for distinct label tuples are independent, and the derivation is
    stable across platforms and runs, so every consumer of randomness in the
    pipeline can be re-created exactly from the single run seed.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for lab in labels:
        if isinstance(lab, str):
            entropy.append(zlib.crc32(lab.encode("utf-8")))
        else:
            entropy.append(int(lab) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def softmax(raw, axis=-1):
    """Numerically stable softmax along ``axis``."""
    z = raw - raw.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_vjp(p, grad, axis=-1):
    """Pull a gradient w.r.t. softmax outputs back to the raw logits."""
    inner = (p * grad).sum(axis=axis, keepdims=True)
    return p * (grad - inner)


def iter_chunks(n, size):
    """Yield slices covering range(n) in fixed-size pieces.

    Chunk boundaries depend only on ``size``, never on worker count, so
    chunked reductions are reproducible for any level of parallelism.
    """
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))

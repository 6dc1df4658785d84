"""Inverse-cdf sampling driven by counter-based uniforms.

Uniforms come from the Philox4x64 counter-based generator keyed by the
pair ``(base_seed, stream_id)``; no generator state is shared between
streams, so replications can run in any order on any number of workers.

Replication streams are derived with the SplitMix64 finaliser

    z = stream_id + (index + 1) * 0x9E3779B97F4A7C15        (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9                (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB                (mod 2**64)
    z =  z ^ (z >> 31)

Both steps are bijections of 64-bit integers, so distinct indices give
distinct derived stream ids.
"""

from __future__ import annotations

import io
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParameterError

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def _u64(name, value):
    if isinstance(value, bool) or int(value) != value or not 0 <= int(value) <= MASK64:
        raise InvalidParameterError(f"{name} must be an unsigned 64-bit integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class SeedSpec:
    base_seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "base_seed", _u64("base_seed", self.base_seed))
        object.__setattr__(self, "stream_id", _u64("stream_id", self.stream_id))


def splitmix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def derive_replication_seed(seed: SeedSpec, replication_index: int) -> SeedSpec:
    idx = int(replication_index)
    if idx < 0:
        raise InvalidParameterError("replication_index must be >= 0")
    z = (seed.stream_id + (idx + 1) * GOLDEN_GAMMA) & MASK64
    return SeedSpec(seed.base_seed, splitmix64(z))


def generator(seed: SeedSpec) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed.base_seed, seed.stream_id]))


def uniforms(seed: SeedSpec, n: int) -> np.ndarray:
    """``n`` uniforms in ``(0, 1]`` from the stream ``seed``."""
    return 1.0 - generator(seed).random(int(n))


def sample(density, n: int, seed: SeedSpec) -> np.ndarray:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameterError(f"sample size must be a positive integer, got {n!r}")
    return density.quantile(uniforms(seed, n))


def samples_to_csv(values, *, density, seed: SeedSpec, label: str = "x") -> str:
    """Single-column CSV; ``#`` comment lines record the density and seed."""
    buf = io.StringIO()
    params = {k: v for k, v in asdict(density).items()}
    buf.write("# density " + " ".join(f"{k}={_fmt(v)}" for k, v in params.items()) + "\n")
    buf.write(f"# seed base_seed={seed.base_seed} stream_id={seed.stream_id}\n")
    buf.write(label + "\n")
    for v in values:
        buf.write(repr(float(v)) + "\n")
    return buf.getvalue()


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def read_column_csv(text: str) -> np.ndarray:
    """Parse a single-column CSV with optional ``#`` comments and header."""
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        field = line.split(",")[0].strip()
        try:
            out.append(float(field))
        except ValueError:
            if out:
                raise
            # header row
    return np.asarray(out, dtype=float)

"""Exact-in-law samplers for the path processes of the one-dimensional polymer model.

Brownian motion is sampled by Gaussian increments, so grid marginals are exact.
Squared Bessel processes (BESQ, dimensions 0 and 2) are sampled by their exact
transition law: given X_y = x, the value one step s later is distributed as
s * chi'^2(dim, x/s) where chi'^2 is a noncentral chi-square.  The noncentral
chi-square is realised as a Poisson(x/(2s)) mixture of Gamma variables,

    dim 0:  X' = Gamma(N, scale=2s),      N ~ Poisson(x/(2s)),
    dim 2:  X' = Gamma(N + 1, scale=2s),

so dimension 0 carries an exact atom at zero, P[X' = 0] = exp(-x/(2s)), and a
path absorbed at a grid point stays at zero afterwards.  No Euler scheme is
used anywhere in this module.

The three-dimensional Bessel bridge from l/2 to 0 over [0, v] is the Euclidean
norm of a three-component Brownian bridge from (l/2, 0, 0) to the origin; each
component is pinned exactly at the grid times.  The two-sided profile processes
Y_l and Y_{l,a} glue a left BESQ0 excursion to a right path (BESQ2, switching
to BESQ0 beyond level a for Y_{l,a}).

Reproducibility contract: every sampler consumes an RngStream, a counter-based
Philox stream keyed by (seed, stream id).  Streams with distinct ids are
independent and order-free, so replica i of a Monte Carlo run can always be
regenerated in isolation as RngStream(seed, i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Hard cap on the number of exact transition steps spent waiting for a BESQ0
# path to be absorbed.  Hitting the cap is an error, never a silent truncation.
MAX_ABSORB_STEPS = 10**6


class AbsorptionCapError(RuntimeError):
    """A BESQ0 path failed to be absorbed within MAX_ABSORB_STEPS steps."""


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream: Philox keyed by (seed, stream).

    Distinct (seed, stream) pairs give statistically independent streams
    regardless of the order in which they are consumed.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([np.uint64(self.seed & (2**64 - 1)),
                        np.uint64(self.stream & (2**64 - 1))], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, k: int) -> "RngStream":
        """Derive a related but independent stream (used for replica k)."""
        mixed = ((self.stream + 1) * 0x9E3779B97F4A7C15 + k) & (2**64 - 1)
        return RngStream(self.seed, mixed)


@dataclass
class Path:
    """Regularly sampled path: values[i] is the value at t0 + i*dt.

    kind is a short tag ('brownian', 'besq0', 'besq2', 'bessel3_bridge',
    'besq0_left', 'besq2_besq0'); left halves of two-sided profiles use the
    convention that index i corresponds to coordinate t0 - i*dt.
    """

    kind: str
    t0: float
    dt: float
    values: np.ndarray

    def times(self) -> np.ndarray:
        sign = -1.0 if self.kind.endswith("_left") else 1.0
        return self.t0 + sign * self.dt * np.arange(len(self.values))


@dataclass
class TwoSidedPath:
    """Two-sided profile glued at 0: left BESQ0 excursion plus right branch.

    left.values[i] sits at y = -i*dy, right.values[i] at y = +i*dy; both start
    at the common value l at y = 0.
    """

    left: Path
    right: Path
    l: float

    def total_mass(self) -> float:
        """Trapezoid value of the integral of the profile over its support."""
        dy = self.right.dt
        return float(np.trapezoid(self.left.values, dx=dy)
                     + np.trapezoid(self.right.values, dx=dy))


# ---------------------------------------------------------------------------
# vectorised primitives (shared by the single-path samplers and the batch
# Monte Carlo drivers in the kernel/experiment modules)

def besq_transition(x: np.ndarray, dim: int, step: float,
                    gen: np.random.Generator) -> np.ndarray:
    """One exact BESQ transition of size `step` applied elementwise to x."""
    if dim not in (0, 2):
        raise ValueError(f"BESQ dimension must be 0 or 2, got {dim}")
    lam = np.asarray(x, dtype=float) / (2.0 * step)
    n = gen.poisson(lam)
    shape = n if dim == 0 else n + 1
    return gen.gamma(shape, 2.0 * step)


def brownian_increments(n_paths: int, n_steps: int, dt: float,
                        gen: np.random.Generator) -> np.ndarray:
    return gen.standard_normal((n_paths, n_steps)) * np.sqrt(dt)


def brownian_bridge_zero(n_paths: int, v: float, n_steps: int,
                         gen: np.random.Generator) -> np.ndarray:
    """Scalar Brownian bridges 0 -> 0 on [0, v], exact at the n_steps+1 grid times."""
    dt = v / n_steps
    w = np.empty((n_paths, n_steps + 1))
    w[:, 0] = 0.0
    np.cumsum(gen.standard_normal((n_paths, n_steps)) * np.sqrt(dt),
              axis=1, out=w[:, 1:])
    frac = np.linspace(0.0, 1.0, n_steps + 1)
    return w - w[:, -1:] * frac


def bessel3_bridge_batch(l_half: float, v: float, n_steps: int, n_paths: int,
                         gen: np.random.Generator) -> np.ndarray:
    """Bessel(3) bridges l/2 -> 0 on [0, v]: norm of a 3D Brownian bridge."""
    b1 = brownian_bridge_zero(n_paths, v, n_steps, gen)
    b2 = brownian_bridge_zero(n_paths, v, n_steps, gen)
    b3 = brownian_bridge_zero(n_paths, v, n_steps, gen)
    line = l_half * np.linspace(1.0, 0.0, n_steps + 1)
    return np.sqrt((line + b1) ** 2 + b2**2 + b3**2)


def bessel2_batch(l_half: float, s: float, n_steps: int, n_paths: int,
                  gen: np.random.Generator) -> np.ndarray:
    """Bessel(2) paths from l/2: norm of planar Brownian motion from (l/2, 0)."""
    dt = s / n_steps
    w1 = np.cumsum(gen.standard_normal((n_paths, n_steps)) * np.sqrt(dt), axis=1)
    w2 = np.cumsum(gen.standard_normal((n_paths, n_steps)) * np.sqrt(dt), axis=1)
    r = np.empty((n_paths, n_steps + 1))
    r[:, 0] = l_half
    r[:, 1:] = np.sqrt((l_half + w1) ** 2 + w2**2)
    return r


def besq2_paths_batch(start: float, y_max: float, dy: float, n_paths: int,
                      gen: np.random.Generator) -> np.ndarray:
    """Exact BESQ2 paths from `start` on the grid 0, dy, ..., y_max."""
    n_steps = int(round(y_max / dy))
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = start
    for j in range(n_steps):
        out[:, j + 1] = besq_transition(out[:, j], 2, dy, gen)
    return out


# ---------------------------------------------------------------------------
# public single-path samplers

def _check_grid(step: float, horizon: float, name: str) -> int:
    if step <= 0.0 or horizon < 0.0:
        raise ValueError(f"{name}: need step > 0 and horizon >= 0")
    n = int(round(horizon / step))
    if abs(n * step - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"{name}: horizon {horizon} is not a multiple of step {step}")
    return n


def sample_brownian(T: float, dt: float, rng: RngStream) -> Path:
    """Standard Brownian motion from 0 on [0, T], exact at grid times."""
    n = _check_grid(dt, T, "sample_brownian")
    gen = rng.generator()
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(gen.standard_normal(n) * np.sqrt(dt), out=values[1:])
    return Path("brownian", 0.0, dt, values)


def sample_besq(dim: int, start: float, y_max: float, dy: float,
                rng: RngStream) -> Path:
    """BESQ(dim) path from start on [0, y_max] via exact transitions."""
    if start < 0.0:
        raise ValueError("sample_besq: start must be nonnegative")
    n = _check_grid(dy, y_max, "sample_besq")
    gen = rng.generator()
    values = np.empty(n + 1)
    values[0] = start
    x = np.array([start])
    for j in range(n):
        # dimension 0 is absorbed: once at zero the exact transition keeps it there,
        # skip the draws to avoid burning stream state on a dead path
        if dim == 0 and x[0] == 0.0:
            values[j + 1:] = 0.0
            break
        x = besq_transition(x, dim, dy, gen)
        values[j + 1] = x[0]
    return Path(f"besq{dim}", 0.0, dy, values)


def sample_bessel3_bridge(l_half: float, v: float, n_steps: int,
                          rng: RngStream) -> Path:
    """Bessel(3) bridge from l_half to 0 over [0, v] on an n_steps grid."""
    if l_half < 0.0 or v <= 0.0 or n_steps < 1:
        raise ValueError("sample_bessel3_bridge: need l_half >= 0, v > 0, n_steps >= 1")
    gen = rng.generator()
    values = bessel3_bridge_batch(l_half, v, n_steps, 1, gen)[0]
    values[0] = l_half  # exact endpoints by construction; pin against roundoff
    values[-1] = 0.0
    return Path("bessel3_bridge", 0.0, v / n_steps, values)


def _besq0_until_absorbed(start: float, dy: float,
                          gen: np.random.Generator) -> np.ndarray:
    values = [start]
    x = np.array([start])
    steps = 0
    while x[0] > 0.0:
        if steps >= MAX_ABSORB_STEPS:
            raise AbsorptionCapError(
                f"BESQ0 path not absorbed after {MAX_ABSORB_STEPS} steps "
                f"(current value {x[0]:.6g}, step {dy:.6g})")
        x = besq_transition(x, 0, dy, gen)
        values.append(float(x[0]))
        steps += 1
    return np.asarray(values)


def sample_Y(l: float, y_max: float, dy: float, rng: RngStream) -> TwoSidedPath:
    """Two-sided profile Y_l: left BESQ0 excursion from l, right BESQ2 from l.

    The left half is run until exact absorption (subject to MAX_ABSORB_STEPS);
    the right half covers [0, y_max].
    """
    if l < 0.0:
        raise ValueError("sample_Y: l must be nonnegative")
    _check_grid(dy, y_max, "sample_Y")
    gen = rng.generator()
    left = _besq0_until_absorbed(l, dy, gen)
    right = besq2_paths_batch(l, y_max, dy, 1, gen)[0]
    return TwoSidedPath(Path("besq0_left", 0.0, dy, left),
                        Path("besq2", 0.0, dy, right), l)


def sample_Y_la(l: float, a: float, dy: float, rng: RngStream) -> TwoSidedPath:
    """Two-sided profile Y_{l,a}: BESQ2 behaviour on [0, a], BESQ0 beyond.

    Left of 0 the path is a BESQ0 excursion from l.  Right of 0 it evolves as
    BESQ2 up to level a (a >= 0, a multiple of dy) and as BESQ0 afterwards,
    run until exact absorption.
    """
    if l < 0.0 or a < 0.0:
        raise ValueError("sample_Y_la: need l >= 0 and a >= 0")
    n_a = _check_grid(dy, a, "sample_Y_la")
    gen = rng.generator()
    left = _besq0_until_absorbed(l, dy, gen)
    head = besq2_paths_batch(l, a, dy, 1, gen)[0] if n_a > 0 else np.array([l])
    tail = _besq0_until_absorbed(float(head[-1]), dy, gen)
    right = np.concatenate([head[:-1], tail])
    return TwoSidedPath(Path("besq0_left", 0.0, dy, left),
                        Path("besq2_besq0", 0.0, dy, right), l)

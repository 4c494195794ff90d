"""Kernel functions of the polymer construction and the constant K.

The building blocks all live on the first-hitting decomposition of a squared
Bessel excursion: alpha_l is the density of the first zero of a Brownian
motion from l/2 (equivalently of the total excursion mass), and

    K_l^(mu)(v) = alpha_l(v) e^{mu v} E[ exp(-2 int_0^v V_u du) ],

with V the Bessel(3) bridge from l/2 to 0 over [0, v], is the mass-resolved
excursion kernel: for this l, E[ e^{int (-Y^2 + mu Y)} g(int Y) ] equals
int K_l^(mu)(v) g(v) dv.  chi_v(l) = K_l(v)/l extends continuously to l = 0
and is square integrable for nu(dl) = l dl.

J_l(u, v) = Phi^u(chi_v)(l) propagates chi_v with the killed Bessel(2)
semigroup; J_l(t) = int_0^t J_l(t-v, v) dv and the constant

    K = int_0^inf e^{rho v} <chi_v | e_0> dv

controls the tilted survival asymptotics, e^{rho t} J_l(t) -> K e_0(l).

Monte Carlo layout: chi is estimated once per mass node v on a 64-point
geometric l-grid, all l sharing one batch of standard triple Brownian bridges
(the bridge from l/2 is that batch plus a deterministic drift line), and the
raw per-bridge exponentials are kept.  Every spectral-route quantity below is
a linear functional of the cached values, so means, standard errors, and
standard errors of differences are computed from the shared samples without
any independence approximation across l or across eigenmodes.  Distinct v
nodes use distinct substreams and are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .airy import airy, airy_zeros
from .estimates import MCEstimate
from .samplers import (MAX_ABSORB_STEPS, AbsorptionCapError, RngStream,
                       bessel2_batch, besq_transition, brownian_bridge_zero)
from .spectral import SpectralBasis

TWO_THIRD_ROOT = 2.0 ** (-1.0 / 3.0)


class ConsistencyError(RuntimeError):
    """Two independent evaluation routes disagreed beyond their combined error."""


def alpha_density(l, v):
    """Density in v of the first zero of Brownian motion started at l/2."""
    l = np.asarray(l, dtype=float)
    v = np.asarray(v, dtype=float)
    out = l / np.sqrt(8.0 * math.pi * v**3) * np.exp(-(l * l) / (8.0 * v))
    return out if out.ndim else float(out)


def kbar_airy_bound(l, rho: float):
    """Airy-ratio upper bound for the total excursion weight Kbar_l^(rho)."""
    f = airy(TWO_THIRD_ROOT * (np.asarray(l, dtype=float) - rho))
    return f / airy(-TWO_THIRD_ROOT * rho)


def bridge_steps(v: float) -> int:
    # trapezoid bias of the bridge time integral scales like dt * sqrt(v);
    # dt <= 0.04 / sqrt(v) keeps the weight bias well under the MC noise.
    # Beyond the cap the kernels have decayed by e^{-(2^{1/3} u_1 - rho) v},
    # several orders below any quadrature that consumes them.
    return max(48, min(1024, int(math.ceil(25.0 * v * math.sqrt(v)))))


def kernel_K(l: float, mu: float, v: float, n: int, rng: RngStream,
             n_steps: int | None = None) -> MCEstimate:
    """Monte Carlo value of K_l^(mu)(v) over exact Bessel(3) bridges."""
    if l < 0.0 or v <= 0.0 or n < 2:
        raise ValueError("kernel_K: need l >= 0, v > 0, n >= 2")
    if n_steps is None:
        n_steps = bridge_steps(v)
    gen = rng.generator()
    from .samplers import bessel3_bridge_batch
    bridges = bessel3_bridge_batch(l / 2.0, v, n_steps, n, gen)
    w = np.exp(-2.0 * np.trapezoid(bridges, dx=v / n_steps, axis=1))
    pref = float(alpha_density(l, v)) * math.exp(mu * v)
    return MCEstimate.from_samples(pref * w, rng.seed)


def chi(v: float, l: float, n: int, rng: RngStream,
        n_steps: int | None = None) -> MCEstimate:
    """chi_v(l) = K_l(v)/l, extended by its finite limit at l = 0."""
    if l < 0.0 or v <= 0.0 or n < 2:
        raise ValueError("chi: need l >= 0, v > 0, n >= 2")
    if n_steps is None:
        n_steps = bridge_steps(v)
    gen = rng.generator()
    from .samplers import bessel3_bridge_batch
    bridges = bessel3_bridge_batch(l / 2.0, v, n_steps, n, gen)
    w = np.exp(-2.0 * np.trapezoid(bridges, dx=v / n_steps, axis=1))
    pref = _chi_prefactor(np.array([l]), v)[0]
    return MCEstimate.from_samples(pref * w, rng.seed)


def _chi_prefactor(l_nodes: np.ndarray, v: float) -> np.ndarray:
    """alpha_l(v)/l with its continuous l -> 0 limit."""
    pref = np.empty_like(l_nodes)
    zero = l_nodes == 0.0
    pref[zero] = 1.0 / math.sqrt(8.0 * math.pi * v**3)
    pref[~zero] = alpha_density(l_nodes[~zero], v) / l_nodes[~zero]
    return pref


@dataclass(frozen=True)
class KbarResult:
    direct: MCEstimate
    quadrature: MCEstimate


def _kbar_direct(l: float, rho: float, n: int, rng: RngStream,
                 dy: float) -> MCEstimate:
    """E[exp(int_0^inf (-Y^2 + rho Y) dy)] over exact BESQ0 paths from l.

    Paths run until absorption.  A live path whose accumulated exponent can
    no longer matter (its weight times the residual-factor bound is below
    the smallest positive double) is finalized early; the overall step cap
    guards against pathological stragglers.
    """
    gen = rng.generator()
    x = np.full(n, float(l))
    expo = np.zeros(n)
    out = np.empty(n)
    alive = np.arange(n)
    g = -x * x + rho * x
    steps = 0
    while alive.size:
        if steps >= MAX_ABSORB_STEPS:
            raise AbsorptionCapError(
                f"kbar_rho: {alive.size} paths alive after {steps} steps")
        x_new = besq_transition(x, 0, dy, gen)
        g_new = -x_new * x_new + rho * x_new
        expo += 0.5 * dy * (g + g_new)
        dead = x_new == 0.0
        # residual excursion factor is bounded by ~1.2, so below -690 the
        # final weight underflows to zero no matter what follows
        hopeless = ~dead & (expo < -690.0)
        done = dead | hopeless
        if np.any(done):
            out[alive[done]] = np.exp(expo[done])
            keep = ~done
            alive, x, expo, g = alive[keep], x_new[keep], expo[keep], g_new[keep]
        else:
            x, g = x_new, g_new
        steps += 1
    return MCEstimate.from_samples(out, rng.seed)


def _kbar_quadrature(l: float, rho: float, rng: RngStream, n_w: int,
                     w_max: float, n_bridge: int) -> MCEstimate:
    """int_0^inf K_l^(rho)(v) dv, trapezoidal on the w = sqrt(v) axis.

    The first-passage density concentrates near w* = l / (2 sqrt(2)), so a
    geometric cluster around w* is merged into the uniform base grid; the
    integrand vanishes at w = 0 faster than any power.
    """
    w_star = l / (2.0 * math.sqrt(2.0))
    cluster = np.geomspace(max(w_star / 8.0, 1e-4),
                           min(8.0 * w_star, w_max), 2 * n_w // 3)
    w = np.unique(np.concatenate([np.linspace(0.0, w_max, n_w + 1),
                                  cluster]))
    vals = np.zeros_like(w)
    ses = np.zeros_like(w)
    for i in range(1, len(w)):
        est = kernel_K(l, rho, float(w[i] ** 2), n_bridge, rng.substream(i))
        vals[i] = 2.0 * w[i] * est.mean
        ses[i] = 2.0 * w[i] * est.stderr
    hw = 0.5 * np.diff(w)
    coef = np.zeros_like(w)
    coef[:-1] += hw
    coef[1:] += hw
    total = float(coef @ vals)
    se = math.sqrt(float(((coef * ses) ** 2).sum()))
    return MCEstimate(total, se, n_bridge, rng.seed)


def kbar_rho(l: float, basis: SpectralBasis, n: int, rng: RngStream,
             dy: float = 1 / 64, n_w: int = 96, w_max: float = 5.0,
             n_bridge: int = 2048) -> KbarResult:
    """Total tilted excursion weight Kbar_l^(rho), by two independent routes.

    rho is the ground eigenvalue of the supplied basis.  The direct route
    weights exact BESQ0 paths; the quadrature route integrates the
    mass-resolved kernel K_l^(rho)(v).  The two estimates are returned
    together and must agree within four combined standard errors, otherwise
    a ConsistencyError is raised.
    """
    if l <= 0.0:
        raise ValueError("kbar_rho: l must be positive")
    rho = basis.rho
    direct = _kbar_direct(l, rho, n, rng.substream(0xD1), dy)
    quad = _kbar_quadrature(l, rho, rng.substream(0xD2), n_w, w_max, n_bridge)
    gap = abs(direct.mean - quad.mean)
    tol = 4.0 * math.hypot(direct.stderr, quad.stderr)
    if gap > tol:
        raise ConsistencyError(
            f"kbar_rho routes disagree at l={l}: direct {direct.mean:.6g} "
            f"vs quadrature {quad.mean:.6g}, gap {gap:.3g} > {tol:.3g}")
    return KbarResult(direct, quad)


# ---------------------------------------------------------------------------
# exact series density of the unit-window mass of a BESQ2 path from 0

_D1_SWITCH = 4.0 / math.pi**2


def _d1_series(x):
    n = np.arange(24.0)
    half = n + 0.5
    x = np.asarray(x, dtype=float)[..., None]
    terms = (-1.0) ** n * half * np.exp(-half * half * math.pi**2 * x / 2.0)
    return math.pi * terms.sum(axis=-1)


def density_D1(x):
    """Density of int_0^1 Y dy for Y a BESQ2 path from 0.

    Alternating theta-type series; below 4/pi^2 the functional equation
    D_1(x) = (2/(pi x))^{3/2} D_1(4/(pi^2 x)) maps the argument back into the
    fast-convergence region.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0.0
    big = pos & (x >= _D1_SWITCH)
    out[big] = _d1_series(x[big])
    small = pos & ~big
    xs = x[small]
    out[small] = (2.0 / (math.pi * xs)) ** 1.5 * _d1_series(4.0 / (math.pi**2 * xs))
    return out if out.ndim else float(out)


def density_DM(M: float, x):
    """Density of int_0^M Y dy, via the exact scaling D_M(x) = D_1(x/M^2)/M^2."""
    if M <= 0.0:
        raise ValueError("density_DM: M must be positive")
    return density_D1(np.asarray(x, dtype=float) / M**2) / M**2


# ---------------------------------------------------------------------------
# cached chi estimates: one set of standard triple bridges per mass node v,
# shared by every l on that node's geometric grid

@dataclass
class _ChiNode:
    v: float
    w: float                 # quadrature coordinate, v = w^2
    l_nodes: np.ndarray      # ascending, l_nodes[0] = 0
    pref: np.ndarray         # chi prefactor alpha_l(v)/l per node
    samples: np.ndarray      # (n_l, n_bridges) float32 bridge exponentials
    proj: np.ndarray         # (n_eig, n_l) projection of the l-hat functions

    def chi_mean(self) -> np.ndarray:
        return self.pref * self.samples.mean(axis=1, dtype=np.float64)

    def chi_se(self) -> np.ndarray:
        nb = self.samples.shape[1]
        sd = self.samples.std(axis=1, ddof=1, dtype=np.float64)
        return self.pref * sd / math.sqrt(nb)

    def functional(self, coef: np.ndarray) -> tuple[float, float]:
        """Mean and stderr of sum_j coef_j chi_v(l_j) over the shared bridges."""
        per_bridge = (coef * self.pref) @ self.samples.astype(np.float64)
        nb = per_bridge.size
        return float(per_bridge.mean()), float(per_bridge.std(ddof=1) / math.sqrt(nb))

    def functional_samples(self, coef: np.ndarray) -> np.ndarray:
        return (coef * self.pref) @ self.samples.astype(np.float64)


def _geometric_l_grid(v: float, n_l: int = 64) -> np.ndarray:
    l_lo = max(math.sqrt(8.0 * v) / 50.0, 1e-3)
    l_hi = min(max(8.0, math.sqrt(160.0 * v)), 24.0)
    return np.concatenate([[0.0], np.geomspace(l_lo, l_hi, n_l - 1)])


def _hat_projection(basis: SpectralBasis, l_nodes: np.ndarray) -> np.ndarray:
    """<hat_j|e_n>_nu for the piecewise-linear hats on l_nodes (zero past the end)."""
    x = basis.x
    idx = np.searchsorted(l_nodes, x, side="right") - 1
    inside = (idx >= 0) & (idx < len(l_nodes) - 1)
    n_eig = basis.n_eig
    proj = np.zeros((n_eig, len(l_nodes)))
    ii = idx[inside]
    frac = (x[inside] - l_nodes[ii]) / (l_nodes[ii + 1] - l_nodes[ii])
    base = basis.funcs[:, inside] * (x[inside] * basis.h)
    for n in range(n_eig):
        np.add.at(proj[n], ii, base[n] * (1.0 - frac))
        np.add.at(proj[n], ii + 1, base[n] * frac)
    return proj


class ChiCache:
    """Per-mass-node chi estimates with shared-noise error propagation.

    Nodes sit at v = w^2 for w in the supplied grid (w = 0 excluded: the
    integrand limits there are deterministic).  Node k uses the substream
    k of the supplied stream, so the cache is reproducible regardless of
    evaluation order.
    """

    def __init__(self, basis: SpectralBasis, w_grid: np.ndarray, n_bridges: int,
                 rng: RngStream, n_l: int = 64):
        w_grid = np.asarray(sorted(set(np.round(np.asarray(w_grid, float), 12))))
        if w_grid.size and w_grid[0] <= 0.0:
            raise ValueError("ChiCache: w grid must be strictly positive")
        self.basis = basis
        self.rng = rng
        self.n_bridges = n_bridges
        self.nodes: list[_ChiNode] = []
        for k, w in enumerate(w_grid):
            self.nodes.append(self._build_node(float(w), k, n_l))
        self.w_grid = w_grid

    def _build_node(self, w: float, k: int, n_l: int) -> _ChiNode:
        v = w * w
        gen = self.rng.substream(k).generator()
        n_steps = bridge_steps(v)
        l_nodes = _geometric_l_grid(v, n_l)
        b1 = brownian_bridge_zero(self.n_bridges, v, n_steps, gen)
        b2 = brownian_bridge_zero(self.n_bridges, v, n_steps, gen)
        b3 = brownian_bridge_zero(self.n_bridges, v, n_steps, gen)
        line = np.linspace(1.0, 0.0, n_steps + 1)
        cross = b2 * b2
        cross += b3 * b3
        samples = np.empty((len(l_nodes), self.n_bridges), dtype=np.float32)
        dx = v / n_steps
        for j, l in enumerate(l_nodes):
            V = np.sqrt((0.5 * l * line + b1) ** 2 + cross)
            samples[j] = np.exp(-2.0 * np.trapezoid(V, dx=dx, axis=1))
        pref = _chi_prefactor(l_nodes, v)
        proj = _hat_projection(self.basis, l_nodes)
        return _ChiNode(v, w, l_nodes, pref, samples, proj)

    # -- node lookup -------------------------------------------------------
    def node_at_v(self, v: float) -> _ChiNode:
        for nd in self.nodes:
            if abs(nd.v - v) <= 1e-9 * max(1.0, v):
                return nd
        raise KeyError(f"ChiCache: no node at v = {v!r}")

    # -- linear functionals --------------------------------------------------
    def chi_inner_e(self, nd: _ChiNode, n: int) -> tuple[float, float]:
        """<chi_v | e_n>_nu with its stderr."""
        return nd.functional(nd.proj[n])

    def spectral_j_coef(self, nd: _ChiNode, u: float, l: float) -> np.ndarray:
        """Coefficients in chi-node space of J_l(u, v) = Phi^u(chi_v)(l)."""
        b = self.basis
        e_at_l = np.array([b.e(n, l) for n in range(b.n_eig)])
        decay = np.exp(-b.eigenvalues * u)
        return (decay * e_at_l) @ nd.proj

    def spectral_j(self, nd: _ChiNode, u: float, l: float) -> tuple[float, float]:
        return nd.functional(self.spectral_j_coef(nd, u, l))

    def spectral_tail_bound(self, nd: _ChiNode, u: float) -> float:
        """Remainder of the truncated eigenexpansion of Phi^u(chi_v)."""
        mean = nd.chi_mean()
        grid_chi = np.interp(self.basis.x, nd.l_nodes, mean, right=0.0)
        norm2 = self.basis.inner(grid_chi, grid_chi)
        coef = nd.proj @ mean
        tail2 = max(norm2 - float(coef @ coef), 0.0)
        return math.exp(-float(self.basis.eigenvalues[-1]) * u) * math.sqrt(tail2)


def default_w_grid(w_max: float = 3.0, n_base: int = 36,
                   t_values: tuple[float, ...] = (),
                   extra_w: tuple[float, ...] = ()) -> np.ndarray:
    """Uniform w grid plus the exact split points needed by the t quadratures.

    The base grid is dense on [0, 3]; beyond v = 9 every consumer's integrand
    has decayed by at least e^{-(2^{1/3} u_1 - rho) * 9} of its scale, so the
    range up to w_max is covered by a coarse extension only.
    """
    dense_end = min(w_max, 3.0)
    base = np.linspace(0.0, dense_end, n_base + 1)[1:]
    if w_max > 3.0:
        n_ext = int(math.ceil((w_max - 3.0) / 0.25))
        base = np.concatenate([base, np.linspace(3.0, w_max, n_ext + 1)[1:]])
    extra = list(extra_w)
    for t in t_values:
        extra.append(math.sqrt(t))
        if t > 2.0:
            extra.append(math.sqrt(t - 2.0))
    return np.asarray(sorted(set(np.round(np.concatenate([base, extra]), 12))))


# ---------------------------------------------------------------------------
# J functions and the constant K

@dataclass(frozen=True)
class JuvResult:
    mc: MCEstimate
    spectral: MCEstimate
    consistent: bool


def J_uv(l: float, u: float, v: float, basis: SpectralBasis, n: int,
         rng: RngStream, cache: ChiCache | None = None,
         n_steps: int | None = None) -> JuvResult:
    """Two routes to J_l(u, v): killed Bessel(2) Monte Carlo against the
    cached chi interpolant, and the spectral expansion of the semigroup."""
    if l < 0.0 or u < 0.0 or v <= 0.0 or n < 2:
        raise ValueError("J_uv: need l >= 0, u >= 0, v > 0, n >= 2")
    if cache is None:
        cache = ChiCache(basis, np.array([math.sqrt(v)]), max(n, 2048),
                         rng.substream(0x9A))
    nd = cache.node_at_v(v)
    chi_mean, chi_se = nd.chi_mean(), nd.chi_se()

    sm, sse = cache.spectral_j(nd, u, l)
    spectral = MCEstimate(sm, sse, nd.samples.shape[1], cache.rng.seed)

    gen = rng.generator()
    if u == 0.0:
        targets = np.full(2, 2.0 * (l / 2.0))
        weights = np.ones(2)
        mc_n = n
    if u > 0.0:
        if n_steps is None:
            n_steps = max(64, int(round(u * 256)))
        r = bessel2_batch(l / 2.0, u, n_steps, n, gen)
        weights = np.exp(-2.0 * np.trapezoid(r, dx=u / n_steps, axis=1))
        targets = 2.0 * r[:, -1]
        mc_n = n
    idx = np.clip(np.searchsorted(nd.l_nodes, targets, side="right") - 1,
                  0, len(nd.l_nodes) - 2)
    frac = np.clip((targets - nd.l_nodes[idx])
                   / (nd.l_nodes[idx + 1] - nd.l_nodes[idx]), 0.0, None)
    outside = targets > nd.l_nodes[-1]
    w_lo = np.where(outside, 0.0, weights * (1.0 - frac))
    w_hi = np.where(outside, 0.0, weights * frac)
    vals = w_lo * chi_mean[idx] + w_hi * chi_mean[idx + 1]
    path_est = MCEstimate.from_samples(vals, rng.seed)
    # propagate the cache uncertainty through the averaged interpolation weights
    coef = np.zeros(len(nd.l_nodes))
    np.add.at(coef, idx, w_lo / mc_n)
    np.add.at(coef, idx + 1, w_hi / mc_n)
    se_cache = math.sqrt(float(((coef * chi_se) ** 2).sum()))
    mc = MCEstimate(path_est.mean, math.hypot(path_est.stderr, se_cache),
                    mc_n, rng.seed)
    gap = abs(mc.mean - spectral.mean)
    tol = 4.0 * math.hypot(mc.stderr, spectral.stderr) \
        + cache.spectral_tail_bound(nd, u)
    return JuvResult(mc, spectral, bool(gap <= tol))


@dataclass(frozen=True)
class JtResult:
    total: MCEstimate
    early: MCEstimate        # mass nodes v <= t - 2 (propagation time u >= 2)
    late: MCEstimate         # mass nodes v in (t - 2, t]
    truncation_bound: float


def _limit_integrand_at_zero(cache: ChiCache, u: float, l: float) -> float:
    """Exact w -> 0 limit of 2 w J_l(u, w^2): the bridge factor tends to 1."""
    b = cache.basis
    e0_at_origin = b.funcs[:, 0]
    decay = np.exp(-b.eigenvalues * u)
    e_at_l = np.array([b.e(n, l) for n in range(b.n_eig)])
    return float(2.0 * math.sqrt(2.0 / math.pi) * (decay * e0_at_origin * e_at_l).sum())


def j_t_parts(l: float, t: float, cache: ChiCache) -> JtResult:
    """J_l(t) = int_0^t J_l(t-v, v) dv on the w = sqrt(v) grid, split exactly
    at v = (t-2)_+ into the early (u >= 2) and late parts."""
    if t <= 0.0:
        raise ValueError("j_t_parts: t must be positive")
    w_split = math.sqrt(max(t - 2.0, 0.0))
    w_end = math.sqrt(t)
    sel = [nd for nd in cache.nodes if nd.w <= w_end + 1e-12]
    ws = np.array([0.0] + [nd.w for nd in sel])
    if abs(ws[-1] - w_end) > 1e-9 or (w_split > 0.0 and
                                      not np.any(np.abs(ws - w_split) < 1e-9)):
        raise ValueError("j_t_parts: cache grid must contain sqrt(t) and sqrt(t-2)")
    # integrand samples: g(w) = 2 w J_l(t - w^2, w^2)
    vals = np.empty(len(ws))
    ses = np.empty(len(ws))
    vals[0] = _limit_integrand_at_zero(cache, t, l)
    ses[0] = 0.0
    bound = 0.0
    for i, nd in enumerate(sel, start=1):
        u = t - nd.v
        coef = 2.0 * nd.w * cache.spectral_j_coef(nd, u, l)
        vals[i], ses[i] = nd.functional(coef)
        bound += 2.0 * nd.w * cache.spectral_tail_bound(nd, u)

    def window_weights(lo_w: float, hi_w: float) -> np.ndarray:
        """Per-node trapezoid weight over [lo_w, hi_w] (nodes shared by two
        panels accumulate both half-widths, keeping the variance exact)."""
        wt = np.zeros(len(ws))
        iw = np.nonzero((ws >= lo_w - 1e-12) & (ws <= hi_w + 1e-12))[0]
        for a, b in zip(iw[:-1], iw[1:]):
            hw = 0.5 * (ws[b] - ws[a])
            wt[a] += hw
            wt[b] += hw
        return wt

    def estimate(wt: np.ndarray) -> MCEstimate:
        return MCEstimate(float(wt @ vals),
                          math.sqrt(float((wt * ses) @ (wt * ses))),
                          cache.n_bridges, cache.rng.seed)

    if w_split > 0.0:
        wt_early = window_weights(0.0, w_split)
        wt_late = window_weights(w_split, w_end)
    else:
        wt_early = np.zeros(len(ws))
        wt_late = window_weights(0.0, w_end)
    early, late = estimate(wt_early), estimate(wt_late)
    return JtResult(estimate(wt_early + wt_late), early, late, bound)


def J_t(l: float, t: float, basis: SpectralBasis, n: int, rng: RngStream,
        cache: ChiCache | None = None, compensated: bool = False) -> MCEstimate:
    """J_l(t), or its e^{rho t}-compensated variant."""
    if cache is None:
        cache = ChiCache(basis, default_w_grid(t_values=(t,)), max(n, 2048),
                         rng.substream(0x17))
    out = j_t_parts(l, t, cache).total
    if compensated:
        return out.scaled(math.exp(cache.basis.rho * t))
    return out


def K_constant(basis: SpectralBasis, n: int, rng: RngStream,
               cache: ChiCache | None = None,
               w_max: float | None = None) -> MCEstimate:
    """K = int_0^inf e^{rho v} <chi_v|e_0> dv on the w grid, with the exact
    deterministic endpoint limit at w = 0 and a reported truncation margin.

    The default grid reaches v = 25, where the integrand has decayed below
    1e-8 of its unit-v scale.
    """
    if cache is None:
        cache = ChiCache(basis, default_w_grid(w_max=5.0), max(n, 2048),
                         rng.substream(0x1C))
    b = cache.basis
    rho = b.rho
    ws = [0.0]
    vals = [2.0 * math.sqrt(2.0 / math.pi) * float(b.funcs[0, 0])]
    ses = [0.0]
    for nd in cache.nodes:
        if w_max is not None and nd.w > w_max + 1e-12:
            break
        coef = 2.0 * nd.w * math.exp(rho * nd.v) * nd.proj[0]
        m, se = nd.functional(coef)
        ws.append(nd.w)
        vals.append(m)
        ses.append(se)
    ws, vals, ses = map(np.asarray, (ws, vals, ses))
    hw = 0.5 * np.diff(ws)
    wt = np.zeros(len(ws))
    wt[:-1] += hw
    wt[1:] += hw
    total = float(wt @ vals)
    var = float((wt * ses) @ (wt * ses))
    # geometric tail estimate from the terminal decay rate of the integrand
    decay = 2.0 ** (1.0 / 3.0) * float(airy_zeros(1).zeros[0]) - rho
    tail = max(vals[-1], 0.0) / (2.0 * ws[-1]) / decay
    return MCEstimate(total, math.sqrt(var + (0.5 * tail) ** 2),
                      cache.n_bridges, cache.rng.seed)

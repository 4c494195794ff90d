"""The limit functionals A_+, A_- and the martingale density D_s.

A_+^{beta,M}(f) integrates, over the starting level l, the expected weight

    exp( int_{-inf}^{M} [ -beta (Y_l^y + f(y))^2 + rho beta^{2/3} Y_l^y ] dy )
        * e_0(beta^{1/3} Y_l^M)

of the two-sided squared Bessel field Y_l (dimension 0 to the left of the
origin, dimension 2 to the right).  A_-(f) = A_+(f~) with f~(y) = f(-y), and
A = A_+ + A_-.  The density of the infinite-volume polymer measure on F_s is
D_s = e^{rho beta^{2/3} s} A(L_s^{.+X_s}) / A(0).

The Monte Carlo engine streams the path integrals without storing paths, and
evaluates several integrands on the same realizations: profile f, its
reflection, the zero profile, and any number of right-boundary checkpoints M.
All the identity checks (M-independence, scaling, ratios) therefore run under
common random numbers, which collapses the variance of the differences.

The expansion (Y+f)^2 = Y^2 + 2Yf + f^2 makes the f-coupling a single
path-against-profile inner product; the f^2 term is a per-profile constant on
the same trapezoid grid, so discretization errors cancel in the additive
identities exactly as they do for the local-time energies.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .airy import airy
from .estimates import MCEstimate
from .kernels import TWO_THIRD_ROOT
from .localtime import CompactProfile, recentered_profile
from .samplers import MAX_ABSORB_STEPS, AbsorptionCapError, RngStream, \
    besq_transition
from .spectral import SpectralBasis

_LOG_FLOOR = -705.0  # below this the weight underflows double precision


@dataclass(frozen=True)
class ModelParams:
    """Run parameters of the polymer functionals.

    alpha is derived as beta^(1/3) when not supplied; rho must come from the
    spectral basis used alongside these parameters.
    """

    beta: float
    rho: float
    M: float
    alpha: float | None = None
    s: float = 0.0
    T: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if self.beta <= 0.0 or self.M <= 0.0:
            raise ValueError("ModelParams: beta and M must be positive")
        if self.s < 0.0 or self.T < 0.0:
            raise ValueError("ModelParams: s and T must be nonnegative")
        a = self.beta ** (1.0 / 3.0) if self.alpha is None else self.alpha
        if abs(a**3 - self.beta) > 1e-12 * max(1.0, self.beta):
            raise ValueError("ModelParams: alpha**3 must equal beta")
        object.__setattr__(self, "alpha", float(a))

    @classmethod
    def from_basis(cls, basis: SpectralBasis, beta: float = 1.0,
                   M: float = 3.0, **kw) -> "ModelParams":
        return cls(beta=beta, rho=basis.rho, M=M, **kw)

    @property
    def rho_scaled(self) -> float:
        """rho beta^{2/3}, the exponential compensation rate."""
        return self.rho * self.alpha**2


def _check_basis(params: ModelParams, basis: SpectralBasis) -> None:
    if abs(params.rho - basis.rho) > 1e-9:
        raise ValueError("ModelParams.rho does not match the supplied basis")


def default_l_grid(params: ModelParams, n_l: int = 40,
                   cut: float = 1e-8) -> np.ndarray:
    """{0} plus a geometric grid, truncated where the Airy-ratio bound on the
    tilted excursion weight at scaled level alpha*l falls below `cut`."""
    rho = params.rho
    z = np.linspace(rho, rho + 40.0, 4001)
    ratio = airy(TWO_THIRD_ROOT * (z - rho)) / airy(-TWO_THIRD_ROOT * rho)
    below = np.nonzero(ratio < cut)[0]
    z_cut = z[below[0]] if below.size else z[-1]
    l_max = z_cut / params.alpha
    return np.concatenate([[0.0], np.geomspace(l_max / 400.0, l_max, n_l - 1)])


def _profile_rows(f: CompactProfile | None, n_M: int, dy: float,
                  reflected: bool = False):
    """Values of f at y = 0, -dy, ..., -M and y = 0, dy, ..., M."""
    if f is None:
        return None
    y = np.arange(n_M + 1) * dy
    if reflected:
        return f(y), f(-y)
    return f(-y), f(y)


def _f_square_integral(rows, dy: float) -> float:
    """Trapezoid of f^2 over [-M, M] on the engine's own grid."""
    if rows is None:
        return 0.0
    fl, fr = rows
    total = fl @ fl + fr @ fr
    total -= 0.5 * (fl[0] ** 2 + fr[0] ** 2 + fl[-1] ** 2 + fr[-1] ** 2)
    return float(dy * total)


def _node_weights(l: float, n: int, gen, *, params: ModelParams, dy: float,
                  checkpoints: list[int], variants, e0_interp) -> dict:
    """Per-path weights at one quadrature level l.

    variants: list of profile rows as returned by _profile_rows (None = zero
    profile).  Returns {checkpoint_step: [weights per variant]}, every weight
    array of shape (n,), all variants and checkpoints sharing the same paths.
    """
    beta, alpha = params.beta, params.alpha
    rho_b = params.rho_scaled
    n_M = max(checkpoints)
    kill = _LOG_FLOOR - 0.25 * rho_b * rho_b / beta * (n_M * dy) - 1.0

    # left half: BESQ0 until absorption, f-coupling only inside [-M, 0]
    x = np.full(n, float(l))
    s_y = 0.5 * dy * x
    s_y2 = 0.5 * dy * x * x
    s_f = [None if rows is None else 0.5 * dy * x * rows[0][0]
           for rows in variants]
    for t in range(1, n_M + 1):
        x = besq_transition(x, 0, dy, gen)
        s_y += dy * x
        s_y2 += dy * x * x
        for k, rows in enumerate(variants):
            if rows is not None and rows[0][t] != 0.0:
                s_f[k] += dy * rows[0][t] * x
    left = -beta * s_y2 + rho_b * s_y
    idx = np.nonzero(x > 0.0)[0]
    xa = x[idx]
    steps = n_M
    while idx.size:
        steps += 1
        if steps > MAX_ABSORB_STEPS:
            raise AbsorptionCapError(
                f"A-functional: {idx.size} left paths alive after {steps} steps")
        xa = besq_transition(xa, 0, dy, gen)
        left[idx] += dy * (-beta * xa * xa + rho_b * xa)
        keep = (xa > 0.0) & (left[idx] > kill)
        idx = idx[keep]
        xa = xa[keep]
    for k, rows in enumerate(variants):
        if rows is not None:
            s_f[k] = -2.0 * beta * s_f[k]

    # right half: BESQ2 on [0, M_max] with snapshots at each checkpoint
    cp_set = set(checkpoints)
    x = np.full(n, float(l))
    r_y = 0.5 * dy * x
    r_y2 = 0.5 * dy * x * x
    r_f = [None if rows is None else 0.5 * dy * x * rows[1][0]
           for rows in variants]
    out: dict[int, list[np.ndarray]] = {}
    f2 = [_f_square_integral(rows, dy) for rows in variants]

    def emit(t: int) -> None:
        e0_term = np.log(np.maximum(e0_interp(alpha * x), 1e-300))
        right = -beta * (r_y2 - 0.5 * dy * x * x) + rho_b * (r_y - 0.5 * dy * x)
        ws = []
        for k, rows in enumerate(variants):
            logw = left + right + e0_term
            if rows is not None:
                corr = r_f[k] - 0.5 * dy * rows[1][t] * x
                logw = logw + s_f[k] - 2.0 * beta * corr - beta * f2[k]
            ws.append(np.exp(logw))
        out[t] = ws

    if 0 in cp_set:
        emit(0)
    for t in range(1, n_M + 1):
        x = besq_transition(x, 2, dy, gen)
        r_y += dy * x
        r_y2 += dy * x * x
        for k, rows in enumerate(variants):
            if rows is not None and rows[1][t] != 0.0:
                r_f[k] += dy * rows[1][t] * x
        if t in cp_set:
            emit(t)
    return out


def _steps_for(M: float, dy: float) -> int:
    n_M = int(round(M / dy))
    if n_M < 1 or abs(n_M * dy - M) > 1e-9 * max(1.0, M):
        n_M = int(math.ceil(M / dy - 1e-9))
    return max(n_M, 1)


class _NodeMoments:
    """Streaming mean/covariance of (numerator, denominator) samples."""

    def __init__(self):
        self.n = 0
        self.s_n = 0.0
        self.s_nn = 0.0
        self.s_d = 0.0
        self.s_dd = 0.0
        self.s_nd = 0.0

    def add(self, num: np.ndarray, den: np.ndarray) -> None:
        self.n += num.size
        self.s_n += float(num.sum())
        self.s_nn += float(num @ num)
        self.s_d += float(den.sum())
        self.s_dd += float(den @ den)
        self.s_nd += float(num @ den)

    def stats(self):
        n = self.n
        m_n = self.s_n / n
        m_d = self.s_d / n
        v_n = max((self.s_nn - n * m_n * m_n) / max(n - 1, 1), 0.0) / n
        v_d = max((self.s_dd - n * m_d * m_d) / max(n - 1, 1), 0.0) / n
        c_nd = (self.s_nd - n * m_n * m_d) / max(n - 1, 1) / n
        return m_n, m_d, v_n, v_d, c_nd


def _trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    w = np.zeros_like(grid)
    half = 0.5 * np.diff(grid)
    w[:-1] += half
    w[1:] += half
    return w


def a_plus(params: ModelParams, f: CompactProfile | None, basis: SpectralBasis,
           n: int, rng: RngStream, dy: float = 1 / 128,
           l_grid: np.ndarray | None = None,
           n_chunk: int = 16384) -> MCEstimate:
    """A_+^{beta,M}(f) with n replicas per level node."""
    ests = a_plus_sweep(params, f, basis, n, rng, (params.M,), dy=dy,
                        l_grid=l_grid, n_chunk=n_chunk)[0]
    return ests[0]


def a_plus_sweep(params: ModelParams, f: CompactProfile | None,
                 basis: SpectralBasis, n: int, rng: RngStream,
                 M_values, dy: float = 1 / 128,
                 l_grid: np.ndarray | None = None, n_chunk: int = 16384):
    """A_+^{beta,M}(f) at several right boundaries M, on shared paths.

    Returns (estimates, diffs): one MCEstimate per M, plus common-random-
    number estimates of the differences A(M_k) - A(M_0), whose standard
    errors come from the per-path differences directly.
    """
    _check_basis(params, basis)
    if f is not None and f.support_bound() > params.M + 1e-9:
        raise ValueError("a_plus: profile support exceeds M")
    if l_grid is None:
        l_grid = default_l_grid(params)
    M_values = list(M_values)
    if any(m < params.M - 1e-12 for m in M_values):
        raise ValueError("a_plus_sweep: M values must cover the profile window")
    cps = [_steps_for(m, dy) for m in M_values]
    n_cp = len(cps)
    e0_interp = lambda pts: basis.e(0, pts)

    sums = np.zeros((n_cp, len(l_grid)))
    sqs = np.zeros((n_cp, len(l_grid)))
    dsums = np.zeros((max(n_cp - 1, 0), len(l_grid)))
    dsqs = np.zeros((max(n_cp - 1, 0), len(l_grid)))
    rows = _profile_rows(f, max(cps), dy)
    for j, l in enumerate(l_grid):
        gen = rng.substream(j).generator()
        done = 0
        while done < n:
            m = min(n_chunk, n - done)
            out = _node_weights(float(l), m, gen, params=params, dy=dy,
                                checkpoints=cps, variants=[rows],
                                e0_interp=e0_interp)
            for c, step in enumerate(cps):
                w = out[step][0]
                sums[c, j] += float(w.sum())
                sqs[c, j] += float(w @ w)
                if c > 0:
                    d = w - out[cps[0]][0]
                    dsums[c - 1, j] += float(d.sum())
                    dsqs[c - 1, j] += float(d @ d)
            done += m
    lw = _trapezoid_weights(l_grid)

    def combine(s_row, q_row) -> MCEstimate:
        means = s_row / n
        var = np.maximum(q_row - n * means**2, 0.0) / max(n - 1, 1) / n
        return MCEstimate(float(lw @ means), math.sqrt(float(lw**2 @ var)),
                          n, rng.seed)

    ests = [combine(sums[c], sqs[c]) for c in range(n_cp)]
    diffs = [combine(dsums[c], dsqs[c]) for c in range(n_cp - 1)]
    return ests, diffs


def a_total(params: ModelParams, f: CompactProfile | None,
            basis: SpectralBasis, n: int, rng: RngStream,
            dy: float = 1 / 128, l_grid: np.ndarray | None = None) -> MCEstimate:
    """A^{beta,M}(f) = A_+(f) + A_+(f~), halves on independent streams."""
    plus = a_plus(params, f, basis, n, rng.substream(0xA1), dy=dy,
                  l_grid=l_grid)
    f_r = None if f is None else f.reflected()
    minus = a_plus(params, f_r, basis, n, rng.substream(0xA2), dy=dy,
                   l_grid=l_grid)
    return plus.plus(minus)


def _ratio_estimate(node_moments, lw: np.ndarray, scale: float,
                    n: int, seed: int) -> MCEstimate:
    num = 0.0
    den = 0.0
    v_n = 0.0
    v_d = 0.0
    c_nd = 0.0
    for w, mo in zip(lw, node_moments):
        m_n, m_d, vn, vd, cnd = mo.stats()
        num += w * m_n
        den += w * m_d
        v_n += w * w * vn
        v_d += w * w * vd
        c_nd += w * w * cnd
    r = num / den
    var = max(v_n - 2.0 * r * c_nd + r * r * v_d, 0.0) / (den * den)
    return MCEstimate(scale * r, scale * math.sqrt(var), n, seed)


def density_Ds(path, s: float, params: ModelParams, basis: SpectralBasis,
               n: int, rng: RngStream, dy: float = 1 / 128,
               n_chunk: int = 16384) -> MCEstimate:
    """Martingale density D_s = e^{rho beta^{2/3} s} A(L_s^{.+X_s}) / A(0).

    Numerator and denominator share every path and the level grid; the ratio
    uses the delta method with the measured numerator/denominator covariance.
    At s = 0 the profile vanishes and the ratio is exactly one.
    """
    _check_basis(params, basis)
    if s == 0.0:
        prof = CompactProfile.zero(dy)
    else:
        prof = recentered_profile(path, s, dy)
    sb = prof.support_bound()
    M = max(dy, math.ceil(sb / dy - 1e-9) * dy)
    pars = dataclasses.replace(params, M=M, alpha=None)
    l_grid = default_l_grid(pars)
    n_M = _steps_for(M, dy)
    e0_interp = lambda pts: basis.e(0, pts)
    rows_f = _profile_rows(prof, n_M, dy)
    rows_r = _profile_rows(prof, n_M, dy, reflected=True)

    moments = [_NodeMoments() for _ in l_grid]
    for j, l in enumerate(l_grid):
        gen = rng.substream(j).generator()
        done = 0
        while done < n:
            m = min(n_chunk, n - done)
            out = _node_weights(float(l), m, gen, params=pars, dy=dy,
                                checkpoints=[n_M],
                                variants=[rows_f, rows_r, None],
                                e0_interp=e0_interp)
            w_f, w_r, w_0 = out[n_M]
            moments[j].add(w_f + w_r, 2.0 * w_0)
            done += m
    lw = _trapezoid_weights(l_grid)
    scale = math.exp(pars.rho_scaled * s)
    return _ratio_estimate(moments, lw, scale, n, rng.seed)


def profile_ratio_batch(profiles, multipliers: np.ndarray, s: float,
                        params: ModelParams, basis: SpectralBasis,
                        n_inner: int, rng: RngStream,
                        dy: float = 1 / 128) -> list[MCEstimate]:
    """E[multiplier * D_s] over an ensemble of recentered profiles.

    profiles: one CompactProfile per outer sample (row i); multipliers: 0/1
    matrix (n_events, n_outer), row e selecting the outer samples in event e.
    Each outer sample gets n_inner fresh field realizations per level node;
    the denominator A(0) pools every realization, so numerators and
    denominator share all paths.  Returns one estimate of
    e^{rho beta^{2/3} s} E[1_e A(prof)] / A(0) per event row.
    """
    _check_basis(params, basis)
    n_out = len(profiles)
    multipliers = np.asarray(multipliers, dtype=float)
    if multipliers.shape[1] != n_out:
        raise ValueError("profile_ratio_batch: multiplier shape mismatch")
    sb = max(p.support_bound() for p in profiles)
    M = max(dy, math.ceil(sb / dy - 1e-9) * dy)
    pars = dataclasses.replace(params, M=M, alpha=None)
    l_grid = default_l_grid(pars, n_l=24, cut=1e-6)
    n_M = _steps_for(M, dy)
    e0_interp = lambda pts: basis.e(0, pts)

    y = np.arange(n_M + 1) * dy
    FL = np.stack([p(-y) for p in profiles])
    FR = np.stack([p(y) for p in profiles])
    f2 = dy * (np.einsum("ij,ij->i", FL, FL) + np.einsum("ij,ij->i", FR, FR)
               - 0.5 * (FL[:, 0] ** 2 + FR[:, 0] ** 2
                        + FL[:, -1] ** 2 + FR[:, -1] ** 2))
    block = np.repeat(np.arange(n_out), n_inner)
    n_tot = n_out * n_inner
    n_events = multipliers.shape[0]

    event_moments = [[_NodeMoments() for _ in l_grid] for _ in range(n_events)]
    beta, alpha = pars.beta, pars.alpha
    rho_b = pars.rho_scaled
    kill = _LOG_FLOOR - 0.25 * rho_b * rho_b / beta * M - 1.0
    for j, l in enumerate(l_grid):
        gen = rng.substream(j).generator()
        # left half with per-block profile coupling (forward and reflected)
        x = np.full(n_tot, float(l))
        s_y = 0.5 * dy * x
        s_y2 = 0.5 * dy * x * x
        s_ff = 0.5 * dy * x * FL[block, 0]
        s_fr = 0.5 * dy * x * FR[block, 0]
        for t in range(1, n_M + 1):
            x = besq_transition(x, 0, dy, gen)
            s_y += dy * x
            s_y2 += dy * x * x
            s_ff += dy * x * FL[block, t]
            s_fr += dy * x * FR[block, t]
        left0 = -beta * s_y2 + rho_b * s_y
        idx = np.nonzero(x > 0.0)[0]
        xa = x[idx]
        steps = n_M
        while idx.size:
            steps += 1
            if steps > MAX_ABSORB_STEPS:
                raise AbsorptionCapError(
                    f"profile batch: {idx.size} paths alive after {steps} steps")
            xa = besq_transition(xa, 0, dy, gen)
            left0[idx] += dy * (-beta * xa * xa + rho_b * xa)
            keep = (xa > 0.0) & (left0[idx] > kill)
            idx = idx[keep]
            xa = xa[keep]
        # right half
        x = np.full(n_tot, float(l))
        r_y = 0.5 * dy * x
        r_y2 = 0.5 * dy * x * x
        r_ff = 0.5 * dy * x * FR[block, 0]
        r_fr = 0.5 * dy * x * FL[block, 0]
        for t in range(1, n_M + 1):
            x = besq_transition(x, 2, dy, gen)
            w = dy if t < n_M else 0.5 * dy
            r_y += w * x
            r_y2 += w * x * x
            r_ff += w * x * FR[block, t]
            r_fr += w * x * FL[block, t]
        base = left0 - beta * r_y2 + rho_b * r_y \
            + np.log(np.maximum(e0_interp(alpha * x), 1e-300))
        w_f = np.exp(base - 2.0 * beta * (s_ff + r_ff) - beta * f2[block])
        w_r = np.exp(base - 2.0 * beta * (s_fr + r_fr) - beta * f2[block])
        w_0 = np.exp(base)
        # inner paths share their block's profile, so the iid samples are the
        # block means, one per outer draw
        num = (w_f + w_r).reshape(n_out, n_inner).mean(axis=1)
        den = 2.0 * w_0.reshape(n_out, n_inner).mean(axis=1)
        for e in range(n_events):
            event_moments[e][j].add(multipliers[e] * num, den)
    lw = _trapezoid_weights(l_grid)
    scale = math.exp(rho_b * s)
    return [_ratio_estimate(event_moments[e], lw, scale, n_out, rng.seed)
            for e in range(n_events)]

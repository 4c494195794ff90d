"""Local time fields of sampled paths and compactly supported test profiles.

The local time field of a path is the occupation density of its piecewise
linear interpolant: each segment of duration dt spreads its time uniformly in
space between its endpoint values, and the bin [e_i, e_{i+1}) receives the
exact overlap fraction.  Summing values * dy over bins therefore reproduces
the elapsed time exactly (up to float accumulation), which is the invariant
the estimator is built around.

Fields and profiles are knot functions: values live at bin centres spaced dy
apart, are interpolated linearly in between, and fall to zero one spacing
outside the outermost knots.  With that convention the trapezoid rule over the
extended knot set equals the plain bin sum, and energies decompose exactly,
(L+f)^2 = L^2 + 2 L f + f^2 knot by knot.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .samplers import Path


@dataclass
class LocalTimeField:
    """Binned occupation density: values[i] at bin centre y0 + (i + 1/2) dy."""

    y0: float            # left edge of the first bin
    dy: float
    values: np.ndarray   # occupation time per bin divided by dy
    T: float             # elapsed path time the field accounts for

    def centers(self) -> np.ndarray:
        return self.y0 + self.dy * (np.arange(len(self.values)) + 0.5)

    def mass(self) -> float:
        return float(np.sum(self.values) * self.dy)


@dataclass
class CompactProfile:
    """Compactly supported knot function f: values[i] at y0 + i*dy, zero outside."""

    y0: float
    dy: float
    values: np.ndarray = field(repr=False)

    def knots(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(len(self.values))

    def support_bound(self) -> float:
        """Smallest M with f == 0 outside [-M, M] (one spacing past the knots)."""
        nz = np.nonzero(self.values)[0]
        if len(nz) == 0:
            return 0.0
        k = self.knots()
        return float(max(abs(k[nz[0]] - self.dy), abs(k[nz[-1]] + self.dy)))

    def __call__(self, y) -> np.ndarray:
        k = self.knots()
        xp = np.concatenate(([k[0] - self.dy], k, [k[-1] + self.dy]))
        fp = np.concatenate(([0.0], self.values, [0.0]))
        return np.interp(y, xp, fp, left=0.0, right=0.0)

    def reflected(self) -> "CompactProfile":
        """Profile y -> f(-y)."""
        k = self.knots()
        return CompactProfile(-float(k[-1]), self.dy, self.values[::-1].copy())

    def scaled(self, alpha: float) -> "CompactProfile":
        """Profile y -> alpha * f(y / alpha), exact on the rescaled knot set."""
        return CompactProfile(alpha * self.y0, alpha * self.dy, alpha * self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("y,value\n")
        for y, v in zip(self.knots(), self.values):
            buf.write(f"{y:.17g},{v:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CompactProfile":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0].strip().lower() != "y,value":
            raise ValueError("profile CSV must start with header 'y,value'")
        rows = np.array([[float(tok) for tok in ln.split(",")] for ln in lines[1:]])
        if rows.ndim != 2 or rows.shape[1] != 2 or len(rows) < 2:
            raise ValueError("profile CSV needs at least two y,value rows")
        y, v = rows[:, 0], rows[:, 1]
        steps = np.diff(y)
        if not np.all(np.isfinite(rows)) or steps.min() <= 0:
            raise ValueError("profile CSV must be finite with increasing y")
        if np.ptp(steps) > 1e-9 * steps[0]:
            raise ValueError("profile CSV must use a uniform y grid")
        return cls(float(y[0]), float(steps.mean()), v)

    @classmethod
    def zero(cls, dy: float = 1.0 / 64) -> "CompactProfile":
        return cls(-dy, dy, np.zeros(3))

    @classmethod
    def bump(cls, height: float = 1.0, half_width: float = 1.0,
             dy: float = 1.0 / 64) -> "CompactProfile":
        """Smooth bump h*exp(1 - 1/(1 - (y/w)^2)) on (-w, w)."""
        n = int(np.ceil(half_width / dy))
        y = dy * np.arange(-n, n + 1)
        u = np.clip(y / half_width, -1.0, 1.0)
        vals = np.zeros_like(y)
        inside = np.abs(u) < 1.0
        vals[inside] = height * np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return cls(float(y[0]), dy, vals)


# ---------------------------------------------------------------------------
# exact occupation binning

def occupation_counts(values: np.ndarray, dt: float, y_lo: float, dy: float,
                      n_bins: int) -> np.ndarray:
    """Exact occupation time per bin of the linear interpolant, batched.

    values has shape (n_paths, n_points); bins are [y_lo + i*dy, y_lo + (i+1)*dy)
    and must cover every segment.  Returns shape (n_paths, n_bins).
    """
    values = np.atleast_2d(values)
    n_paths, n_pts = values.shape
    a, b = values[:, :-1], values[:, 1:]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    i0 = np.floor((lo - y_lo) / dy).astype(np.int64)
    i1 = np.floor((hi - y_lo) / dy).astype(np.int64)
    if i0.min() < 0 or i1.max() >= n_bins:
        raise ValueError("occupation_counts: bin range does not cover the path")
    rows = np.broadcast_to(np.arange(n_paths)[:, None], i0.shape)
    keys = rows * n_bins + i0

    # one (key, weight) pair per segment-bin overlap, accumulated in a single
    # bincount pass; repeated full-size accumulator fills dominate otherwise
    flat = (i1 == i0)
    key_flat = keys[flat]
    w_flat = np.full(key_flat.size, dt)
    span = ~flat
    if span.any():
        ks, i0s, i1s = keys[span], i0[span], i1[span]
        los, his = lo[span], hi[span]
        scale = dt / (his - los)
        m = i1s - i0s + 1
        seg = np.repeat(np.arange(m.size), m)
        start = np.concatenate(([0], np.cumsum(m)[:-1]))
        k = np.arange(int(m.sum())) - start[seg]
        edge_l = y_lo + (i0s[seg] + k) * dy
        ov = np.minimum(his[seg], edge_l + dy) - np.maximum(los[seg], edge_l)
        all_keys = np.concatenate([key_flat, ks[seg] + k])
        all_w = np.concatenate([w_flat, ov * scale[seg]])
    else:
        all_keys, all_w = key_flat, w_flat
    out = np.bincount(all_keys, weights=all_w, minlength=n_paths * n_bins)
    return out.reshape(n_paths, n_bins)


def local_time_field(path: Path, dy: float) -> LocalTimeField:
    """Exact local time field of the path's linear interpolant at resolution dy."""
    if dy <= 0.0:
        raise ValueError("local_time_field: dy must be positive")
    v = path.values
    if len(v) < 2:
        raise ValueError("local_time_field: path needs at least two points")
    lo = np.floor(v.min() / dy) - 1
    hi = np.ceil(v.max() / dy) + 1
    y0 = lo * dy
    n_bins = int(hi - lo)
    counts = occupation_counts(v[None, :], path.dt, y0, dy, n_bins)[0]
    T = path.dt * (len(v) - 1)
    return LocalTimeField(y0, dy, counts / dy, T)


def recentered_profile(path: Path, s: float, dy: float) -> CompactProfile:
    """Local time profile of the path up to time s, viewed from the endpoint.

    Returns the knot function y -> L_s^{y + X_s}, whose total mass is s.
    """
    n = int(round(s / path.dt))
    if n < 1 or abs(n * path.dt - s) > 1e-9 * max(1.0, s):
        raise ValueError("recentered_profile: s must be a positive multiple of dt")
    if n + 1 > len(path.values):
        raise ValueError("recentered_profile: s exceeds the path horizon")
    head = Path(path.kind, path.t0, path.dt, path.values[:n + 1])
    ltf = local_time_field(head, dy)
    x_s = float(path.values[n])
    return CompactProfile(ltf.y0 + 0.5 * dy - x_s, dy, ltf.values.copy())


# ---------------------------------------------------------------------------
# energies

def _union_knots(ltf: LocalTimeField, f: CompactProfile | None):
    """Common knot set: field knots plus ghost zeros, extended over f's support."""
    c = ltf.centers()
    lo, hi = c[0] - ltf.dy, c[-1] + ltf.dy
    if f is not None and len(np.nonzero(f.values)[0]) > 0:
        m = f.support_bound()
        while lo > -m:
            lo -= ltf.dy
        while hi < m:
            hi += ltf.dy
    n_lo = int(round((c[0] - lo) / ltf.dy))
    n_hi = int(round((hi - c[-1]) / ltf.dy))
    knots = np.concatenate([c[0] - ltf.dy * np.arange(n_lo, 0, -1), c,
                            c[-1] + ltf.dy * np.arange(1, n_hi + 1)])
    lvals = np.concatenate([np.zeros(n_lo), ltf.values, np.zeros(n_hi)])
    fvals = f(knots) if f is not None else np.zeros_like(knots)
    return knots, lvals, fvals


def energy(ltf: LocalTimeField, f: CompactProfile | None = None) -> float:
    """Trapezoid value of the squared-profile integral of L + f."""
    _, lvals, fvals = _union_knots(ltf, f)
    return float(np.trapezoid((lvals + fvals) ** 2, dx=ltf.dy))


def energy_decomposition(ltf: LocalTimeField, f: CompactProfile):
    """The three terms (int L^2, int L f, int f^2) on the shared knot set."""
    _, lvals, fvals = _union_knots(ltf, f)
    dy = ltf.dy
    return (float(np.trapezoid(lvals**2, dx=dy)),
            float(np.trapezoid(lvals * fvals, dx=dy)),
            float(np.trapezoid(fvals**2, dx=dy)))

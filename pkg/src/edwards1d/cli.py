"""Command-line front end: configuration, experiment dispatch, serialization.

Every run writes a self-describing artifact: JSON records and suite reports
carry (op, params, seed, version) keys; CSV tables carry the same facts as
leading '#' metadata lines above a single header row.  Outputs are
deterministic for a fixed seed, independent of --threads.

Exit codes: 0 success (and suite pass), 1 suite failure or inconclusive,
2 usage or validation error, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .afunc import ModelParams, a_total, density_Ds
from .kernels import ChiCache, J_uv, K_constant, chi, default_w_grid, \
    density_D1, j_t_parts, kbar_airy_bound, kbar_rho, kernel_K
from .localtime import CompactProfile
from .samplers import AbsorptionCapError, RngStream, sample_besq, \
    sample_bessel3_bridge, sample_brownian, sample_Y, sample_Y_la
from .spectral import DEFAULT_H, DEFAULT_N_EIG, DEFAULT_X_MAX, build_basis
from .experiments import verify_excursion_area, verify_kernel_shape, \
    verify_limit_measure, verify_occupation_identity, verify_tilted_limit, \
    verify_window_decay

SUITES = ("occupation", "window", "tilted-limit", "measure", "excursion",
          "kernel-shape")

EXIT_OK = 0
EXIT_SUITE_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3


# ---------------------------------------------------------------------------
# serialization

def _fmt_float(x: float) -> str:
    """17 significant digits: enough to round-trip any double bit-exactly."""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def _to_json(obj, indent: int = 0) -> str:
    """JSON with stable insertion-order keys and %.17g floats."""
    pad = "  " * indent
    pad_in = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(f'{pad_in}"{k}": {_to_json(v, indent + 1)}'
                           for k, v in obj.items())
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(pad_in + _to_json(v, indent + 1) for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return '"' + str(obj).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _meta_lines(meta: dict) -> list[str]:
    return [f"# {k} = {_fmt_float(v)}" for k, v in meta.items()]


def _emit_csv(columns, rows, meta: dict) -> str:
    lines = _meta_lines(meta)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt_float(v) for v in row))
    return "\n".join(lines) + "\n"


def _record(op: str, params: dict, payload: dict, seed) -> dict:
    out = {"op": op, "params": params}
    out.update(payload)
    if seed is not None:
        out["seed"] = seed
    out["version"] = __version__
    return out


def _write_out(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
        return
    if not os.path.isabs(out_path):
        out_path = os.path.join(os.environ.get("EDWARDS1D_OUTDIR", "."),
                                out_path)
    with open(out_path, "w") as fh:
        fh.write(text)


def emit(payload, fmt: str, out_path: str | None) -> None:
    """Table payloads {columns, rows, meta} go to CSV naturally; records and
    reports to JSON.  The other direction flattens in the documented way."""
    if fmt == "csv":
        if "columns" in payload:
            text = _emit_csv(payload["columns"], payload["rows"],
                             payload.get("meta", {}))
        elif "checks" in payload:
            meta = {k: v for k, v in payload.items() if k != "checks"}
            text = _emit_csv(
                ("name", "observed", "target", "tolerance", "passed"),
                [(c["name"], c["observed"], c["target"], c["tolerance"],
                  c["passed"]) for c in payload["checks"]], meta)
        else:
            scalars = {k: v for k, v in payload.items()
                       if not isinstance(v, dict)}
            meta = {f"params.{k}": v
                    for k, v in payload.get("params", {}).items()}
            text = _emit_csv(tuple(scalars), [tuple(scalars.values())], meta)
    else:
        if "columns" in payload:
            payload = {**payload.get("meta", {}),
                       "columns": list(payload["columns"]),
                       "rows": [list(r) for r in payload["rows"]]}
        text = _to_json(payload) + "\n"
    _write_out(text, out_path)


def parse_table(text: str) -> tuple[list[str], list[list[float]], dict]:
    """Inverse of the CSV emitter, for round-trip checks."""
    meta: dict = {}
    columns: list[str] = []
    rows: list[list] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            meta[key.strip()] = val.strip()
        elif not columns:
            columns = line.split(",")
        else:
            rows.append([_maybe_float(v) for v in line.split(",")])
    return columns, rows, meta


def _maybe_float(s: str):
    try:
        return float(s)
    except ValueError:
        return s


# ---------------------------------------------------------------------------
# configuration

def _load_config(path: str) -> dict:
    """Flat key = value lines; '#' starts a comment; keys use flag spelling."""
    values = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, val = line.partition("=")
            if not eq:
                raise ValueError(f"{path}:{ln}: expected 'key = value'")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _apply_config(ns: argparse.Namespace, argv: list[str],
                  parser: argparse.ArgumentParser) -> None:
    """Merge config-file values under explicit flags (flags win)."""
    if getattr(ns, "config", None) is None:
        return
    values = _load_config(ns.config)
    known = {k: v for k, v in vars(ns).items()
             if k not in ("config", "command", "handler")}
    explicit = {a.split("=", 1)[0].lstrip("-").replace("-", "_")
                for a in argv if a.startswith("--")}
    for key, raw in values.items():
        if key not in known:
            parser.error(f"unknown config key: {key}")
        if key in explicit:
            continue
        current = known[key]
        try:
            if isinstance(current, bool):
                value = raw.lower() in ("1", "true", "yes", "on")
            elif isinstance(current, int) and not isinstance(current, bool):
                value = int(raw)
            elif isinstance(current, float):
                value = float(raw)
            else:
                value = raw
        except ValueError:
            parser.error(f"config key {key}: cannot parse {raw!r}")
        setattr(ns, key, value)


def _profile_from(ns: argparse.Namespace) -> CompactProfile | None:
    if ns.profile == "zero":
        return None
    return CompactProfile.bump(ns.height, ns.half_width, ns.dy)


def _threads(ns: argparse.Namespace) -> int:
    t = getattr(ns, "threads", None)
    if t is None:
        t = os.cpu_count() or 1
    if t < 1:
        raise ValueError("--threads must be at least 1")
    return t


# ---------------------------------------------------------------------------
# subcommand handlers

def _cmd_spectrum(ns) -> int:
    basis = build_basis(x_max=ns.x_max, h=ns.h, n_eig=ns.n_eig)
    res = basis.residual_norms()
    rows = [(k, float(basis.eigenvalues[k]), float(res[k]))
            for k in range(ns.n_eig)]
    emit({"columns": ("n", "rho_n", "residual"), "rows": rows,
          "meta": {"op": "spectrum", "x_max": ns.x_max, "h": ns.h,
                   "n_eig": ns.n_eig, "version": __version__}},
         ns.format or "csv", ns.out)
    return EXIT_OK


def _cmd_kernel(ns) -> int:
    rng = RngStream(ns.seed, 0)
    if ns.op == "K":
        est = kernel_K(ns.l, ns.mu, ns.v, ns.n, rng)
        params = {"l": ns.l, "mu": ns.mu, "v": ns.v, "n": ns.n}
        payload = {"mean": est.mean, "stderr": est.stderr, "n": est.n}
    elif ns.op == "chi":
        est = chi(ns.v, ns.l, ns.n, rng)
        params = {"l": ns.l, "v": ns.v, "n": ns.n}
        payload = {"mean": est.mean, "stderr": est.stderr, "n": est.n}
    elif ns.op == "kbar":
        basis = build_basis(x_max=ns.x_max, h=ns.h, n_eig=ns.n_eig)
        res = kbar_rho(ns.l, basis, ns.n, rng)
        params = {"l": ns.l, "mu": basis.rho, "n": ns.n}
        payload = {"mean": res.direct.mean, "stderr": res.direct.stderr,
                   "n": res.direct.n,
                   "quadrature_mean": res.quadrature.mean,
                   "quadrature_stderr": res.quadrature.stderr,
                   "airy_bound": float(kbar_airy_bound(ns.l, basis.rho))}
    else:  # D1
        params = {"x": ns.x}
        payload = {"value": float(density_D1(ns.x))}
    emit(_record(f"kernel.{ns.op}", params, payload, ns.seed),
         ns.format or "json", ns.out)
    return EXIT_OK


def _cmd_aconst(ns) -> int:
    basis = build_basis(x_max=ns.x_max, h=ns.h, n_eig=ns.n_eig)
    params = ModelParams.from_basis(basis, beta=ns.beta, M=ns.m)
    f = _profile_from(ns)
    est = a_total(params, f, basis, ns.n, RngStream(ns.seed, 0), dy=ns.dy)
    emit(_record("aconst",
                 {"beta": ns.beta, "M": ns.m, "profile": ns.profile,
                  "n": ns.n, "dy": ns.dy},
                 {"mean": est.mean, "stderr": est.stderr, "n": est.n},
                 ns.seed), ns.format or "json", ns.out)
    return EXIT_OK


def _cmd_density(ns) -> int:
    basis = build_basis(x_max=ns.x_max, h=ns.h, n_eig=ns.n_eig)
    rng = RngStream(ns.seed, 0)
    path = sample_brownian(max(ns.s, ns.t), ns.dt, rng.substream(0))
    params = ModelParams.from_basis(basis, beta=ns.beta, M=1.0, s=ns.s)
    est = density_Ds(path, ns.s, params, basis, ns.n, rng.substream(1),
                     dy=ns.dy)
    emit(_record("density",
                 {"beta": ns.beta, "s": ns.s, "dt": ns.dt, "dy": ns.dy,
                  "n": ns.n, "endpoint": float(path.values[
                      int(round(ns.s / ns.dt))])},
                 {"mean": est.mean, "stderr": est.stderr, "n": est.n},
                 ns.seed), ns.format or "json", ns.out)
    return EXIT_OK


def _cmd_jfun(ns) -> int:
    if (ns.t is None) == (ns.v is None):
        raise ValueError("jfun: give either --t (time window) or --u and --v")
    if ns.t is None and ns.u is None:
        raise ValueError("jfun: --v requires --u")
    basis = build_basis(x_max=ns.x_max, h=ns.h, n_eig=ns.n_eig)
    rng = RngStream(ns.seed, 0)
    if ns.t is not None:
        cache = ChiCache(basis, default_w_grid(t_values=(ns.t,)),
                         max(ns.n, 2048), rng.substream(0x17))
        parts = j_t_parts(ns.l, ns.t, cache)
        payload = {"mean": parts.total.mean, "stderr": parts.total.stderr,
                   "n": parts.total.n,
                   "early_mean": parts.early.mean,
                   "early_stderr": parts.early.stderr,
                   "late_mean": parts.late.mean,
                   "late_stderr": parts.late.stderr,
                   "truncation_bound": parts.truncation_bound}
        params = {"l": ns.l, "t": ns.t, "n": ns.n}
    else:
        res = J_uv(ns.l, ns.u, ns.v, basis, ns.n, rng)
        payload = {"mean": res.mc.mean, "stderr": res.mc.stderr,
                   "n": res.mc.n, "spectral": res.spectral.mean,
                   "consistent": res.consistent}
        params = {"l": ns.l, "u": ns.u, "v": ns.v, "n": ns.n}
    emit(_record("jfun", params, payload, ns.seed), ns.format or "json",
         ns.out)
    return EXIT_OK


def _cmd_limit(ns) -> int:
    basis = build_basis(x_max=ns.x_max, h=ns.h, n_eig=ns.n_eig)
    est = K_constant(basis, ns.n, RngStream(ns.seed, 0))
    emit(_record("limit", {"n": ns.n, "rho": basis.rho},
                 {"mean": est.mean, "stderr": est.stderr, "n": est.n},
                 ns.seed), ns.format or "json", ns.out)
    return EXIT_OK


def _cmd_sample(ns) -> int:
    rng = RngStream(ns.seed, 0)
    if ns.kind == "brownian":
        path = sample_brownian(ns.t_max, ns.dt, rng)
        cols, paths = ("t", "x"), path
    elif ns.kind == "besq":
        path = sample_besq(ns.dim, ns.start, ns.y_max, ns.dy, rng)
        cols, paths = ("y", "value"), path
    elif ns.kind == "bessel3-bridge":
        path = sample_bessel3_bridge(ns.start, ns.v, ns.n_steps, rng)
        cols, paths = ("t", "value"), path
    elif ns.kind == "profile":
        paths = sample_Y(ns.l, ns.y_max, ns.dy, rng)
        cols = ("y", "value")
    else:  # profile-pinned
        paths = sample_Y_la(ns.l, ns.a, ns.dy, rng)
        cols = ("y", "value")
    if hasattr(paths, "left"):
        dy = paths.right.dt
        ys = np.concatenate([-dy * np.arange(len(paths.left.values))[::-1],
                             dy * np.arange(1, len(paths.right.values))])
        xs = np.concatenate([paths.left.values[::-1],
                             paths.right.values[1:]])
    else:
        ys = paths.t0 + paths.dt * np.arange(len(paths.values))
        xs = paths.values
    rows = list(zip(ys.tolist(), xs.tolist()))
    kind_keys = {"brownian": ("t_max", "dt"),
                 "besq": ("dim", "start", "y_max", "dy"),
                 "bessel3-bridge": ("start", "v", "n_steps"),
                 "profile": ("l", "y_max", "dy"),
                 "profile-pinned": ("l", "a", "dy")}
    meta = {"op": f"sample.{ns.kind}", "seed": ns.seed,
            "version": __version__}
    for key in kind_keys[ns.kind]:
        meta[key] = getattr(ns, key)
    emit({"columns": cols, "rows": rows, "meta": meta}, ns.format or "csv",
         ns.out)
    return EXIT_OK


def _run_suite(key: str, ns) -> "SuiteReport":
    rng = RngStream(ns.seed, 0)
    if key == "occupation":
        return verify_occupation_identity(ns.m, ns.n, rng,
                                          n_field=ns.n_field)
    if key == "window":
        return verify_window_decay(ns.m, ns.n, rng)
    if key == "tilted-limit":
        return verify_tilted_limit(ns.beta, _profile_from(ns), ns.n, rng)
    if key == "measure":
        return verify_limit_measure(ns.beta, ns.s, ns.t,
                                    list(ns.events.split(",")), ns.n, rng)
    if key == "excursion":
        return verify_excursion_area(ns.n, rng)
    return verify_kernel_shape(ns.l, ns.n, rng)


def _cmd_verify(ns) -> int:
    keys = list(SUITES) if ns.suite == "all" else [ns.suite]
    if len(keys) == 1:
        reports = [_run_suite(keys[0], ns)]
    else:
        with ThreadPoolExecutor(max_workers=_threads(ns)) as pool:
            reports = list(pool.map(lambda k: _run_suite(k, ns), keys))
    payloads = []
    for rep in reports:
        d = rep.to_dict()
        d["version"] = __version__
        payloads.append(d)
    body = payloads[0] if len(payloads) == 1 else {
        "op": "verify.all",
        "passed": all(r.passed and not r.inconclusive for r in reports),
        "version": __version__,
        "suites": payloads,
    }
    emit(body, ns.format or "json", ns.out)
    ok = all(r.passed and not r.inconclusive for r in reports)
    return EXIT_OK if ok else EXIT_SUITE_FAIL


# ---------------------------------------------------------------------------
# parser assembly

def _add_common(sp, seed=True):
    sp.add_argument("--out", default=None,
                    help="output path (relative paths land in "
                         "$EDWARDS1D_OUTDIR when set); default stdout")
    sp.add_argument("--format", choices=("csv", "json"), default=None)
    sp.add_argument("--config", default=None,
                    help="flat key = value file merged under explicit flags")
    sp.add_argument("--threads", type=int, default=None)
    if seed:
        sp.add_argument("--seed", type=int, default=0)


def _add_basis_flags(sp):
    sp.add_argument("--x-max", type=float, default=DEFAULT_X_MAX)
    sp.add_argument("--h", type=float, default=DEFAULT_H)
    sp.add_argument("--n-eig", type=int, default=DEFAULT_N_EIG)


def _add_profile_flags(sp):
    sp.add_argument("--profile", choices=("zero", "bump"), default="zero")
    sp.add_argument("--height", type=float, default=0.5)
    sp.add_argument("--half-width", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edwards1d",
        description="One-dimensional polymer measure toolkit: samplers, "
                    "spectral solver, kernel evaluators, verification suites.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="eigenvalues of the killed generator")
    _add_basis_flags(sp)
    _add_common(sp, seed=False)
    sp.set_defaults(handler=_cmd_spectrum, seed=None)

    sp = sub.add_parser("kernel", help="pointwise kernel evaluators")
    sp.add_argument("--op", choices=("K", "chi", "kbar", "D1"), required=True)
    sp.add_argument("--l", type=float, default=1.0)
    sp.add_argument("--mu", type=float, default=0.0)
    sp.add_argument("--v", type=float, default=1.0)
    sp.add_argument("--x", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=100_000)
    _add_basis_flags(sp)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_kernel)

    sp = sub.add_parser("aconst", help="profile functional of the limit law")
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--m", type=float, default=3.0)
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--dy", type=float, default=1 / 128)
    _add_profile_flags(sp)
    _add_basis_flags(sp)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_aconst)

    sp = sub.add_parser("density", help="martingale density along one path")
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--s", type=float, default=0.5)
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--dt", type=float, default=1 / 512)
    sp.add_argument("--dy", type=float, default=1 / 128)
    _add_basis_flags(sp)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_density)

    sp = sub.add_parser("jfun", help="windowed kernel integrals")
    sp.add_argument("--l", type=float, default=1.0)
    sp.add_argument("--t", type=float, default=None)
    sp.add_argument("--u", type=float, default=None)
    sp.add_argument("--v", type=float, default=None)
    sp.add_argument("--n", type=int, default=20_000)
    _add_basis_flags(sp)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_jfun)

    sp = sub.add_parser("limit", help="limit constant by quadrature")
    sp.add_argument("--n", type=int, default=2048)
    _add_basis_flags(sp)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_limit)

    sp = sub.add_parser("sample", help="emit one exact sample path")
    sp.add_argument("--kind", required=True,
                    choices=("brownian", "besq", "bessel3-bridge", "profile",
                             "profile-pinned"))
    sp.add_argument("--t-max", type=float, default=1.0)
    sp.add_argument("--dt", type=float, default=1 / 512)
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--start", type=float, default=1.0)
    sp.add_argument("--y-max", type=float, default=3.0)
    sp.add_argument("--dy", type=float, default=1 / 128)
    sp.add_argument("--l", type=float, default=1.0)
    sp.add_argument("--v", type=float, default=1.0)
    sp.add_argument("--n-steps", type=int, default=512)
    sp.add_argument("--a", type=float, default=0.5)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_sample)

    sp = sub.add_parser("verify", help="run a verification suite")
    sp.add_argument("suite", choices=SUITES + ("all",))
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--m", type=float, default=1.0)
    sp.add_argument("--s", type=float, default=0.5)
    sp.add_argument("--t", type=float, default=4.0)
    sp.add_argument("--l", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=20_000)
    sp.add_argument("--n-field", type=int, default=2000)
    sp.add_argument("--events", default="whole,endpoint-positive")
    sp.add_argument("--dy", type=float, default=1 / 128)
    _add_profile_flags(sp)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        _apply_config(ns, argv, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ValueError as exc:
        print(f"edwards1d: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"edwards1d: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        _threads(ns)
        return ns.handler(ns)
    except (ValueError, AttributeError, AbsorptionCapError) as exc:
        print(f"edwards1d: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"edwards1d: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

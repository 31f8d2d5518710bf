"""Command line front end.

Every command reads a flat ``key = value`` config (``--config``) and/or
``key=value`` arguments after the command name, validates all keys before
computing, and writes its outputs into ``--out`` only once everything has
succeeded.  Exit codes: 0 success, 1 error, 2 finished with a flag
(iteration cap reached, or violations found by a checker).
"""

from __future__ import annotations

import argparse
import ast
import os
import re
import shutil
import sys
import tempfile

import numpy as np

EXIT_OK, EXIT_ERROR, EXIT_FLAG = 0, 1, 2


class ConfigError(ValueError):
    pass


# --- config parsing ----------------------------------------------------------


def parse_config_text(text: str) -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        cfg[key] = value
    return cfg


def _floats(s, key, n=None):
    try:
        vals = [float(v) for v in s.split(",")]
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {s!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{key}: expected {n} numbers, got {len(vals)}")
    if not all(np.isfinite(vals)):
        raise ConfigError(f"{key}: values must be finite")
    return vals


def _int(s, key, minimum=None):
    try:
        v = int(s)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {s!r}") from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}")
    return v


def _float(s, key, positive=False, nonneg=False):
    try:
        v = float(s)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {s!r}") from None
    if not np.isfinite(v):
        raise ConfigError(f"{key}: must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{key}: must be positive")
    if nonneg and v < 0:
        raise ConfigError(f"{key}: must be nonnegative")
    return v


def _bool(s, key):
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {s!r}")


_EXPR_FUNCS = {
    "abs": np.abs, "sqrt": np.sqrt, "exp": np.exp, "log": np.log, "sin": np.sin,
    "cos": np.cos, "tanh": np.tanh, "minimum": np.minimum, "maximum": np.maximum,
}
_EXPR_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
               ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub,
               ast.UAdd, ast.Mod)


def compile_generator(expr: str, key: str = "generator"):
    """Arithmetic expression in ``x, y, z`` (and ``gauge``) as a field generator."""
    from .group import gauge

    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"{key}: cannot parse {expr!r}: {exc.msg}") from None
    names = set(_EXPR_FUNCS) | {"x", "y", "z", "gauge", "pi"}
    for node in ast.walk(tree):
        if not isinstance(node, _EXPR_NODES):
            raise ConfigError(f"{key}: unsupported syntax {type(node).__name__}")
        if isinstance(node, ast.Name) and node.id not in names:
            raise ConfigError(f"{key}: unknown name {node.id!r}")
        if isinstance(node, ast.Call) and not isinstance(node.func, ast.Name):
            raise ConfigError(f"{key}: only plain function calls are allowed")
    code = compile(tree, f"<{key}>", "eval")

    def gen(p):
        env = dict(_EXPR_FUNCS, x=p[..., 0], y=p[..., 1], z=p[..., 2], pi=np.pi,
                   gauge=lambda *_: gauge(p))
        return np.broadcast_to(eval(code, {"__builtins__": {}}, env), p.shape[:-1])

    return gen


_PRIM_RE = re.compile(r"^\s*(\w+)\s*\(([^)]*)\)\s*$")


def parse_region(text: str, open_: bool = True, neighborhood: float | None = None,
                 key: str = "region"):
    """``ball(cx,cy,cz,R); stack(r,R,t,thickness); cylinder(r,z0,z1); box(...)``."""
    from .regions import Box, Cylinder, DiskStack, GaugeBall, LeftNeighborhood, RegionSpec

    prims = []
    for part in filter(None, (s.strip() for s in text.split(";"))):
        m = _PRIM_RE.match(part)
        if not m:
            raise ConfigError(f"{key}: cannot parse primitive {part!r}")
        name, args = m.group(1).lower(), _floats(m.group(2), key) if m.group(2).strip() else []
        try:
            if name == "ball" and len(args) == 4:
                prims.append(GaugeBall(tuple(args[:3]), args[3]))
            elif name == "stack" and len(args) == 4:
                prims.extend(DiskStack(*args))
            elif name == "cylinder" and len(args) == 3:
                prims.append(Cylinder(*args))
            elif name == "box" and len(args) == 6:
                prims.append(Box(tuple(args[:3]), tuple(args[3:])))
            else:
                raise ConfigError(f"{key}: unknown primitive or wrong arity in {part!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    if not prims:
        raise ConfigError(f"{key}: no primitives given")
    region = RegionSpec(tuple(prims), open_)
    if neighborhood is not None:
        region = RegionSpec((LeftNeighborhood(region, neighborhood),), open_)
    return region


# --- command specs -------------------------------------------------------------

_SOLVER_KEYS = {"method", "n_theta", "n_s", "n_refine", "max_iter", "tol_fix", "n_rho",
                "eps_strict", "stencil", "omega_relax", "tol_inner", "max_inner",
                "tol_outer", "max_outer"}
_GRID_KEYS = {"domain", "dims", "K"}

COMMANDS = {
    "envelope": {"required": _GRID_KEYS,
                 "optional": _SOLVER_KEYS | {"generator", "input", "cap_R", "collar_width",
                                             "clip", "slices", "field_out", "report_out"}},
    "hull": {"required": _GRID_KEYS | {"region"},
             "optional": _SOLVER_KEYS | {"region_open", "neighborhood", "sigma",
                                         "points_out", "field_out", "report_out"}},
    "check-hconvex": {"required": {"region"},
                      "optional": {"region_open", "neighborhood", "n_theta", "n_s",
                                   "sample_count", "seed", "witness_out"}},
    "check-hquasiconvex": {"required": set(),
                           "optional": _GRID_KEYS | {"input", "generator", "n_theta", "n_s",
                                                     "tol_violation", "stride",
                                                     "witness_out"}},
    "supconv": {"required": {"input", "delta"}, "optional": {"field_out"}},
    "distance": {"required": _GRID_KEYS | {"region"},
                 "optional": {"region_open", "neighborhood", "sigma", "kind", "field_out"}},
    "slice": {"required": {"input", "axis", "value"}, "optional": {"slice_out"}},
}


def validate_keys(command: str, cfg: dict):
    spec = COMMANDS[command]
    unknown = sorted(set(cfg) - spec["required"] - spec["optional"])
    if unknown:
        raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    missing = sorted(spec["required"] - set(cfg))
    if missing:
        raise ConfigError(f"missing required key(s) for {command}: {', '.join(missing)}")


def _grid(cfg):
    from .grid import BoxDomain

    d = _floats(cfg["domain"], "domain", 6)
    dims = [_int(v, "dims", 2) for v in cfg["dims"].split(",")]
    if len(dims) != 3:
        raise ConfigError("dims: expected three integers")
    try:
        dom = BoxDomain(d[:3], d[3:])
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from None
    return dom, tuple(dims), _float(cfg["K"], "K")


def _solver(cfg):
    from .direct import ScanParams
    from .hj import HamiltonianParams, SolveParams

    method = cfg.get("method", "direct")
    if method not in ("direct", "pde"):
        raise ConfigError(f"method: expected direct or pde, got {method!r}")
    try:
        n_theta = _int(cfg.get("n_theta", "32"), "n_theta", 4)
        scan = ScanParams(n_theta=n_theta, n_s=_int(cfg.get("n_s", "32"), "n_s", 2),
                          n_refine=_int(cfg.get("n_refine", "0"), "n_refine", 0))
        eps = cfg.get("eps_strict")
        hp = HamiltonianParams(n_theta=max(n_theta, 8),
                               n_rho=_int(cfg.get("n_rho", "24"), "n_rho", 2),
                               eps_strict=None if eps is None else _float(eps, "eps_strict", nonneg=True),
                               stencil=cfg.get("stencil", "upwind"))
        sp = SolveParams(omega_relax=_float(cfg.get("omega_relax", "0.8"), "omega_relax"),
                         tol_inner=_float(cfg.get("tol_inner", "1e-6"), "tol_inner", positive=True),
                         max_inner=_int(cfg.get("max_inner", "200"), "max_inner", 1),
                         tol_outer=_float(cfg.get("tol_outer", "1e-6"), "tol_outer", positive=True),
                         max_outer=_int(cfg.get("max_outer", "50"), "max_outer", 1))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return method, dict(scan=scan, max_iter=_int(cfg.get("max_iter", "50"), "max_iter", 1),
                        tol_fix=_float(cfg.get("tol_fix", "1e-6"), "tol_fix", positive=True),
                        hparams=hp, sp=sp)


def _region(cfg):
    nb = cfg.get("neighborhood")
    return parse_region(cfg["region"], _bool(cfg.get("region_open", "true"), "region_open"),
                        None if nb is None else _float(nb, "neighborhood", positive=True))


def _input_field(cfg, key="input"):
    from .grid import load

    path = cfg[key]
    if not os.path.isfile(path):
        raise ConfigError(f"{key}: no such file {path!r}")
    try:
        return load(path)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _slices(text):
    from .grid import SliceSpec

    out = []
    for part in filter(None, (s.strip() for s in text.split(","))):
        if ":" not in part:
            raise ConfigError(f"slices: expected axis:value, got {part!r}")
        ax, val = part.split(":", 1)
        try:
            out.append(SliceSpec(ax.strip(), _float(val, "slices")))
        except ValueError as exc:
            raise ConfigError(f"slices: {exc}") from None
    return out


# --- commands --------------------------------------------------------------------
# Each command validates into a plan, then computes into a staging directory.


def cmd_envelope(cfg, stage):
    from .grid import build_field, export_slice, save
    from .hj import capped_field
    from .hull import envelope

    dom, dims, K = _grid(cfg)
    method, solver = _solver(cfg)
    if ("generator" in cfg) == ("input" in cfg):
        raise ConfigError("envelope: give exactly one of generator or input")
    slices = _slices(cfg.get("slices", ""))
    for s in slices:
        a = "xyz".index(s.axis)
        if not dom.lo[a] <= s.value <= dom.hi[a]:
            raise ConfigError(f"slices: {s.axis}={s.value} lies outside the domain")
    if "input" in cfg:
        f = _input_field(cfg)
        if f.dims != dims or f.domain != dom:
            raise ConfigError("input: field grid does not match domain/dims")
    else:
        gen = compile_generator(cfg["generator"])
        if "cap_R" in cfg:
            R = _float(cfg["cap_R"], "cap_R", positive=True)
            cw = _float(cfg.get("collar_width", "0.3"), "collar_width", positive=True)
            try:
                f = capped_field(dom, dims, gen, K, R, cw)
            except ValueError as exc:
                raise ConfigError(f"cap_R: {exc}") from None
        else:
            try:
                f = build_field(dom, dims, gen, K, coercive=_bool(cfg.get("clip", "false"), "clip"))
            except ValueError as exc:
                raise ConfigError(f"generator: {exc}") from None
    if method == "pde":
        from .hj import check_coercive

        try:
            check_coercive(f)
        except ValueError as exc:
            raise ConfigError(f"K: {exc} (set cap_R to build a compatible field)") from None
    env, rep = envelope(f, method, **solver)
    save(env, os.path.join(stage, cfg.get("field_out", "envelope.hhf")))
    rep.to_csv(os.path.join(stage, cfg.get("report_out", "report.csv")))
    for s in slices:
        export_slice(env, s, os.path.join(stage, f"slice_{s.axis}_{s.value:g}.csv"))
    for flag in rep.flags:
        print(f"warning: {flag}", file=sys.stderr)
    return EXIT_OK if rep.converged else EXIT_FLAG


def cmd_hull(cfg, stage):
    from .grid import save
    from .hull import hull_compute

    dom, dims, K = _grid(cfg)
    method, solver = _solver(cfg)
    region = _region(cfg)
    sigma = _float(cfg["sigma"], "sigma", positive=True) if "sigma" in cfg else None
    try:
        res = hull_compute(region, dom, K, dims, method, sigma, **solver)
    except ValueError as exc:
        raise ConfigError(f"region: {exc}") from None
    res.to_csv(os.path.join(stage, cfg.get("points_out", "hull_points.csv")))
    save(res.envelope, os.path.join(stage, cfg.get("field_out", "hull_envelope.hhf")))
    res.report.to_csv(os.path.join(stage, cfg.get("report_out", "report.csv")))
    return EXIT_OK if res.report.converged else EXIT_FLAG


def cmd_check_hconvex(cfg, stage):
    from .direct import ScanParams, check_set_hconvex, write_witnesses

    region = _region(cfg)
    scan = ScanParams(n_theta=_int(cfg.get("n_theta", "64"), "n_theta", 4),
                      n_s=_int(cfg.get("n_s", "64"), "n_s", 2))
    wit = check_set_hconvex(region, scan, _int(cfg.get("sample_count", "2000"), "sample_count", 1),
                            seed=_int(cfg.get("seed", "0"), "seed"))
    write_witnesses(wit, os.path.join(stage, cfg.get("witness_out", "witnesses.csv")))
    print(f"{len(wit)} violation witness(es)")
    return EXIT_OK if not wit else EXIT_FLAG


def cmd_check_hquasiconvex(cfg, stage):
    from .direct import ScanParams, check_field_hquasiconvex, write_witnesses
    from .grid import build_field

    if ("generator" in cfg) == ("input" in cfg):
        raise ConfigError("check-hquasiconvex: give exactly one of generator or input")
    if "input" in cfg:
        f = _input_field(cfg)
    else:
        missing = sorted(_GRID_KEYS - set(cfg))
        if missing:
            raise ConfigError(f"missing required key(s) for generator: {', '.join(missing)}")
        dom, dims, K = _grid(cfg)
        f = build_field(dom, dims, compile_generator(cfg["generator"]), K)
    scan = ScanParams(n_theta=_int(cfg.get("n_theta", "32"), "n_theta", 4),
                      n_s=_int(cfg.get("n_s", "32"), "n_s", 2),
                      tol_violation=_float(cfg.get("tol_violation", "1e-6"), "tol_violation",
                                           nonneg=True))
    wit = check_field_hquasiconvex(f, scan, stride=_int(cfg.get("stride", "1"), "stride", 1))
    write_witnesses(wit, os.path.join(stage, cfg.get("witness_out", "witnesses.csv")))
    print(f"{len(wit)} violation witness(es)")
    return EXIT_OK if not wit else EXIT_FLAG


def cmd_supconv(cfg, stage):
    from .grid import save
    from .hull import sup_convolution

    f = _input_field(cfg)
    delta = _float(cfg["delta"], "delta", positive=True)
    save(sup_convolution(f, delta), os.path.join(stage, cfg.get("field_out", "supconv.hhf")))
    return EXIT_OK


def cmd_distance(cfg, stage):
    from .grid import save
    from .hull import defining_function, psi_field

    dom, dims, K = _grid(cfg)
    region = _region(cfg)
    kind = cfg.get("kind", "defining")
    sigma = _float(cfg["sigma"], "sigma", positive=True) if "sigma" in cfg else None
    try:
        if kind == "psi":
            f = psi_field(region, dom, dims, sigma)
        elif kind == "defining":
            f = defining_function(region, dom, K, dims, sigma)
        else:
            raise ConfigError(f"kind: expected psi or defining, got {kind!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"region: {exc}") from None
    save(f, os.path.join(stage, cfg.get("field_out", "distance.hhf")))
    return EXIT_OK


def cmd_slice(cfg, stage):
    from .grid import SliceSpec, export_slice

    f = _input_field(cfg)
    axis = cfg["axis"]
    if axis not in ("x", "y", "z"):
        raise ConfigError(f"axis: expected x, y or z, got {axis!r}")
    value = _float(cfg["value"], "value")
    a = "xyz".index(axis)
    if not f.domain.lo[a] <= value <= f.domain.hi[a]:
        raise ConfigError(f"value: {axis}={value} lies outside the domain")
    n = export_slice(f, SliceSpec(axis, value), os.path.join(stage, cfg.get("slice_out", "slice.csv")))
    print(f"{n} rows")
    return EXIT_OK


_HANDLERS = {
    "envelope": cmd_envelope, "hull": cmd_hull, "check-hconvex": cmd_check_hconvex,
    "check-hquasiconvex": cmd_check_hquasiconvex, "supconv": cmd_supconv,
    "distance": cmd_distance, "slice": cmd_slice,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="heisenhull", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(_HANDLERS))
    ap.add_argument("overrides", nargs="*", metavar="key=value",
                    help="config entries (take precedence over --config)")
    ap.add_argument("--config", help="flat key = value config file")
    ap.add_argument("--threads", type=int, default=0, help="worker threads (0 = all cores)")
    ap.add_argument("--out", default=".", help="output directory")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_intermixed_args(argv)
    try:
        cfg = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    cfg.update(parse_config_text(fh.read()))
            except OSError as exc:
                raise ConfigError(f"--config: {exc}") from None
        cfg.update(parse_config_text("\n".join(args.overrides)))
        validate_keys(args.command, cfg)
        if args.threads < 0:
            raise ConfigError("--threads must be >= 0")
        if args.threads:
            import numba

            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        os.makedirs(args.out, exist_ok=True)
        stage = tempfile.mkdtemp(prefix=".stage-", dir=args.out)
        try:
            code = _HANDLERS[args.command](cfg, stage)
            for name in sorted(os.listdir(stage)):
                os.replace(os.path.join(stage, name), os.path.join(args.out, name))
        finally:
            shutil.rmtree(stage, ignore_errors=True)
        return code
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()

"""Command line: configuration, presets, dispatch and reports.

    sigma2sphere solve --k morse_a --L 12 --out runs/morse
    sigma2sphere degree --k linear_eps
    sigma2sphere verify --w runs/morse/solution.json --k morse_a
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import curvature, diagnostics, gmap, io, kspec, solver
from .errors import ConfigError, ObstructionError, Sigma2Error
from .fields import ScalarField, project, zero
from .grid import build_grid
from .moebius import T_CAP

log = logging.getLogger("sigma2sphere")

COMMANDS = ("solve", "gmap", "degree", "index-sum", "verify", "diagnose", "identities")
L_RANGE = (4, 16)

_ALLOWED = {
    "schema_version": None,
    "grid": {"L", "azimuth_count", "allow_large_L"},
    "K": {"preset", "params", "file", "terms"},
    "solve": {"seed_xi", "t_cap", "schedule", "polish"},
    "degree": {"r", "radii", "seeds", "G_level"},
    "gmap": {"points", "method"},
    "verify": {"w"},
    "diagnose": {"w"},
    "identities": {"w"},
    "output": {"dir"},
}
_SCHEDULE_KEYS = {"start", "grow", "shrink", "floor", "max_steps"}


@dataclass
class RunConfig:
    L: int = 12
    azimuth_count: int | None = None
    K: kspec.KSpec = field(default_factory=lambda: kspec.constant(6.0))
    K_source: str = "constant6"
    solve: dict = field(default_factory=dict)
    degree: dict = field(default_factory=dict)
    gmap: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    diagnose: dict = field(default_factory=dict)
    identities: dict = field(default_factory=dict)
    output_dir: Path = Path("sigma2_out")

    @property
    def grid(self):
        return build_grid(self.L, self.azimuth_count)

    def to_dict(self) -> dict:
        return {
            "schema_version": io.SCHEMA_VERSION,
            "L": self.L,
            "azimuth_count": self.grid.azimuth_count,
            "K": self.K.to_dict(),
            "K_source": self.K_source,
            "solve": self.solve,
            "degree": self.degree,
        }


def _check_keys(doc: dict):
    for key, val in doc.items():
        if key not in _ALLOWED:
            raise ConfigError(f"unknown config key {key!r}")
        sub = _ALLOWED[key]
        if sub is None:
            continue
        if not isinstance(val, dict):
            raise ConfigError(f"config section {key!r} must be a table")
        for k in val:
            if k not in sub:
                raise ConfigError(f"unknown config key {key}.{k}")
    sched = doc.get("solve", {}).get("schedule", {})
    for k in sched:
        if k not in _SCHEDULE_KEYS:
            raise ConfigError(f"unknown config key solve.schedule.{k}")


def _load_K(sec: dict, base: Path | None) -> tuple[kspec.KSpec, str]:
    given = [k for k in ("preset", "file", "terms") if k in sec]
    if len(given) > 1:
        raise ConfigError(f"K must come from exactly one of preset/file/terms, got {given}")
    if "file" in sec:
        path = Path(sec["file"])
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read K file {path}: {exc}") from None
        return kspec.from_terms(doc.get("terms", []), name=doc.get("name", path.stem)), str(path)
    if "terms" in sec:
        return kspec.from_terms(sec["terms"]), "terms"
    name = sec.get("preset", "constant6")
    return kspec.preset(name, **sec.get("params", {})), name


def _positive(name, value, strict=True):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or (value <= 0 if strict else value < 0):
        raise ConfigError(f"{name} must be a positive number, got {value!r}")


def parse_dict(doc: dict, base: Path | None = None) -> RunConfig:
    _check_keys(doc)
    if doc.get("schema_version", io.SCHEMA_VERSION) != io.SCHEMA_VERSION:
        raise ConfigError(f"schema_version {doc['schema_version']!r} is not supported (expected {io.SCHEMA_VERSION})")
    g = doc.get("grid", {})
    L = g.get("L", 12)
    if not isinstance(L, int) or isinstance(L, bool):
        raise ConfigError(f"grid.L must be an integer, got {L!r}")
    if not L_RANGE[0] <= L <= L_RANGE[1] and not g.get("allow_large_L", False):
        raise ConfigError(f"grid.L = {L} outside [{L_RANGE[0]}, {L_RANGE[1]}]; set grid.allow_large_L to override")
    if L < 4:
        raise ConfigError("grid.L must be at least 4")
    az = g.get("azimuth_count")
    if az is not None and (not isinstance(az, int) or az < 2 * L + 2 or az % 2):
        raise ConfigError(f"grid.azimuth_count must be an even integer >= 2L + 2, got {az!r}")
    K, source = _load_K(doc.get("K", {}), base)
    cfg = RunConfig(L=L, azimuth_count=az, K=K, K_source=source)
    K.check_positive(cfg.grid)

    s = dict(doc.get("solve", {}))
    if "seed_xi" in s:
        xi = np.asarray(s["seed_xi"], dtype=float)
        if xi.shape != (5,) or np.linalg.norm(xi) >= 1:
            raise ConfigError("solve.seed_xi must be a 5-vector inside the unit ball")
    _positive("solve.t_cap", s.setdefault("t_cap", T_CAP))
    if s["t_cap"] <= 1:
        raise ConfigError("solve.t_cap must exceed 1")
    sched = dict(s.get("schedule", {}))
    for k, v in sched.items():
        _positive(f"solve.schedule.{k}", v)
    s["schedule"] = sched
    cfg.solve = s

    d = dict(doc.get("degree", {}))
    for k in ("r",):
        if k in d and not 0 < d[k] < 1:
            raise ConfigError("degree.r must lie in (0, 1)")
    if "radii" in d and not all(0 < r < 1 for r in d["radii"]):
        raise ConfigError("degree.radii must lie in (0, 1)")
    if "seeds" in d:
        _positive("degree.seeds", d["seeds"])
    cfg.degree = d
    cfg.gmap = dict(doc.get("gmap", {}))
    if cfg.gmap.get("method", "zonal") not in ("zonal", "quadrature"):
        raise ConfigError("gmap.method must be 'zonal' or 'quadrature'")
    cfg.verify = dict(doc.get("verify", {}))
    cfg.diagnose = dict(doc.get("diagnose", {}))
    cfg.identities = dict(doc.get("identities", {}))
    cfg.output_dir = Path(doc.get("output", {}).get("dir", "sigma2_out"))
    return cfg


def parse_config(text: str, base: Path | None = None) -> RunConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return parse_dict(doc, base)


# ------------------------------------------------------------------ commands
def _load_w(path, cfg: RunConfig) -> ScalarField:
    if path is None:
        return zero(cfg.grid)
    w = io.load_field(path)
    if w.grid.L != cfg.L:
        log.info("field file has L = %d; using its grid", w.grid.L)
    return w


def _degree_kwargs(cfg):
    d = cfg.degree
    kw = {"n_seeds": int(d.get("seeds", 200))}
    if "radii" in d:
        kw["radii"] = tuple(d["radii"])
    if "G_level" in d:
        kw["grid"] = build_grid(int(d["G_level"]))
    return kw


def cmd_degree(cfg: RunConfig):
    rep = gmap.brouwer_degree(cfg.K, r=cfg.degree.get("r"), **_degree_kwargs(cfg))
    idx, cps = gmap.critical_index_sum(cfg.K)
    rep.index_sum = idx
    body = rep.to_dict()
    body["critical_points"] = [c.to_dict() for c in cps]
    body["index_sum_equals_one"] = idx == 1
    return body, rep.consistent


def cmd_index_sum(cfg: RunConfig):
    idx, cps = gmap.critical_index_sum(cfg.K)
    return {"index_sum": idx, "index_sum_equals_one": idx == 1, "critical_points": [c.to_dict() for c in cps]}, True


def cmd_gmap(cfg: RunConfig):
    pts = np.atleast_2d(np.asarray(cfg.gmap.get("points", [[0.0] * 5]), dtype=float))
    method = cfg.gmap.get("method", "zonal")
    G = gmap.gmap_on_ball(cfg.K, pts, method=method)
    rows = [{"xi": p, "G": g, "norm": float(np.linalg.norm(g))} for p, g in zip(pts, G)]
    return {"method": method, "values": rows}, True


def cmd_solve(cfg: RunConfig):
    grid = cfg.grid
    t0 = time.time()
    deg = gmap.brouwer_degree(cfg.K, **_degree_kwargs(cfg))
    kw = curvature.kazdan_warner(zero(grid), cfg.K)
    if not deg.zeros:
        raise ObstructionError(
            f"G has no zero in B_{deg.r} (degree {deg.degree}); no Lambda-zero to continue from. "
            f"Kazdan-Warner at w = 0: {np.linalg.norm(kw):.3e}"
        )
    if deg.degree == 0:
        log.warning("deg(G) = 0; continuing from a G-zero without a degree guarantee")
    if "seed_xi" in cfg.solve:
        seed = np.asarray(cfg.solve["seed_xi"], dtype=float)
    else:
        seed = min(deg.zeros, key=lambda z: np.linalg.norm(z.xi)).xi
    sched = solver.ContinuationSchedule(**cfg.solve.get("schedule", {}))
    sol, trace = solver.continue_to_one(
        cfg.K, seed, grid, sched, polish=cfg.solve.get("polish", True), t_cap=cfg.solve["t_cap"]
    )
    out = cfg.output_dir
    io.write_trace(out / "trace.csv", trace.rows)
    io.save_field(out / "solution.json", sol.w)
    body = {
        "status": trace.status,
        "degree": deg.to_dict(),
        "seed_xi": seed,
        "final_xi": sol.xi,
        "verification": sol.report,
        "runtime_seconds": time.time() - t0,
        "artifacts": {"trace": str(out / "trace.csv"), "solution": str(out / "solution.json")},
    }
    return body, bool(sol.report["passed"])


def cmd_verify(cfg: RunConfig):
    w = _load_w(cfg.verify.get("w"), cfg)
    rep = solver.verify_solution(w, cfg.K)
    return {"verification": rep}, bool(rep["passed"])


def cmd_diagnose(cfg: RunConfig):
    w = _load_w(cfg.diagnose.get("w"), cfg)
    rep = diagnostics.diagnose(w, cfg.K)
    return {"diagnostics": rep.to_dict()}, True


def cmd_identities(cfg: RunConfig):
    path = cfg.identities.get("w")
    if path is None:
        g = cfg.grid
        x = g.nodes
        w = project(g, 0.1 * x[:, 4] ** 2 + 0.05 * x[:, 0] * x[:, 1] - 0.03 * x[:, 2])
    else:
        w = _load_w(path, cfg)
    bundle = curvature.curvature_bundle(w)
    defects = bundle.identity_defects()
    defects["newton_contraction"] = curvature.newton_contraction_defect(w)
    gb = curvature.gauss_bonnet(w)
    body = {
        "identity_defects": defects,
        "concavity_gap": curvature.concavity_gap(w) if bundle.admissible.all() else None,
        "bianchi_defect": curvature.bianchi_defect(w),
        "gauss_bonnet": gb,
        "admissible": bool(bundle.admissible.all()),
    }
    ok = all(v <= 1e-9 for v in defects.values()) and abs(gb["sigma2_integral"] - gb["target"]) <= 1e-6 * gb["target"]
    return body, ok


HANDLERS = {
    "solve": cmd_solve,
    "gmap": cmd_gmap,
    "degree": cmd_degree,
    "index-sum": cmd_index_sum,
    "verify": cmd_verify,
    "diagnose": cmd_diagnose,
    "identities": cmd_identities,
}


def dispatch(command: str, cfg: RunConfig) -> tuple[int, dict]:
    """Run a command; returns (exit status, report). Errors become reports."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        body, ok = HANDLERS[command](cfg)
        status = 0 if ok else 1
        body = {"ok": ok, **body}
    except Sigma2Error as exc:
        status = exc.exit_status
        body = {"ok": False, "error": {"code": exc.code, "message": str(exc)}}
        sv = getattr(exc, "singular_values", None)
        if sv is not None:
            body["error"]["singular_values"] = np.asarray(sv).tolist()
    body["config"] = cfg.to_dict()
    body["exit_status"] = status
    io.write_report(cfg.output_dir / f"{command}_report.json", command, body)
    return status, body


# ------------------------------------------------------------------ argparse
def _floats(n):
    def conv(text):
        vals = [float(v) for v in text.replace(",", " ").split()]
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} numbers")
        return vals

    return conv


def _param(text):
    key, _, val = text.partition("=")
    if not key or not val:
        raise argparse.ArgumentTypeError("expected key=value")
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sigma2sphere", description="sigma_2 curvature on S^4: solver and diagnostics")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="TOML run configuration")
    p.add_argument("--k", help="K preset name or JSON coefficient file")
    p.add_argument("--k-param", type=_param, action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--L", type=int)
    p.add_argument("--azimuth-count", type=int)
    p.add_argument("--allow-large-L", action="store_true")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--w", help="conformal factor coefficient file (verify, diagnose, identities)")
    p.add_argument("--seed-xi", type=_floats(5))
    p.add_argument("--t-cap", type=float)
    p.add_argument("--r", type=float, help="degree radius (default: adaptive)")
    p.add_argument("--seeds", type=int)
    p.add_argument("--xi", type=_floats(5), action="append", help="ball point for gmap (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    doc, base = {}, None
    if args.config is not None:
        try:
            doc = tomli.loads(args.config.read_text())
        except (OSError, tomli.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        base = args.config.parent
    sec = lambda name: doc.setdefault(name, {})  # noqa: E731
    if args.k is not None:
        ksec = sec("K")
        for k in ("preset", "file", "terms", "params"):
            ksec.pop(k, None)
        if args.k.endswith(".json") or Path(args.k).is_file():
            ksec["file"] = args.k
        else:
            ksec["preset"] = args.k
    if args.k_param:
        sec("K").setdefault("params", {}).update(dict(args.k_param))
    if args.L is not None:
        sec("grid")["L"] = args.L
    if args.azimuth_count is not None:
        sec("grid")["azimuth_count"] = args.azimuth_count
    if args.allow_large_L:
        sec("grid")["allow_large_L"] = True
    if args.out is not None:
        sec("output")["dir"] = str(args.out)
    if args.w is not None:
        for name in ("verify", "diagnose", "identities"):
            if name == args.command.replace("-", "_"):
                sec(name)["w"] = args.w
    if args.seed_xi is not None:
        sec("solve")["seed_xi"] = args.seed_xi
    if args.t_cap is not None:
        sec("solve")["t_cap"] = args.t_cap
    if args.r is not None:
        sec("degree")["r"] = args.r
    if args.seeds is not None:
        sec("degree")["seeds"] = args.seeds
    if args.xi:
        sec("gmap")["points"] = args.xi
    return parse_dict(doc, base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except Sigma2Error as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_status
    status, body = dispatch(args.command, cfg)
    summary = {k: body[k] for k in ("ok", "error") if k in body}
    print(io.dumps({"command": args.command, "exit_status": status, **summary}), end="")
    print(f"report: {cfg.output_dir / (args.command + '_report.json')}")
    return status


if __name__ == "__main__":
    sys.exit(main())

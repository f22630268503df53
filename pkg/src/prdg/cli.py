"""
Configuration-driven convergence studies.

A study runs one manufactured case over a sequence of meshes for one or
more polynomial degrees and writes, per degree, a CSV table of errors and
observed rates plus a plain-text summary.

Config files are flat ``key = value`` text; ``#`` starts a comment.  Keys:

    case        ex1-sin2 | ex3-ss | lshape-singular | poly-exact-m   (required)
    generator   tri | perturbed-tri | mixed | lshape     (default: lshape for
                lshape-singular, tri otherwise)
    levels      comma-separated subdivision counts n, e.g. 10,20,40
    meshes      comma-separated mesh files (native or .msh); replaces
                generator/levels
    degrees     comma-separated m values (default 3); ``m`` is an alias
    profile     example1 | example2 | example3 | custom (default example1)
    sizes       patch sizes, one per degree (profile = custom)
    mu, eta     penalty parameters (default m^4, m^2; 5 m^6, 5 m^2 in
                baseline-full-dg mode)
    mode        reconstructed | baseline-full-dg
    bc          clamped | simply-supported (default: the case's own)
    solver      auto | direct-cholesky | cg
    out         output directory (default study-out)
    lambda      yes | no: compute the Lambda stability diagnostic
    seed        seed of the perturbed-tri generator
    amplitude   jitter of the perturbed-tri generator
    dump_matrix yes | no: write each system matrix in Matrix Market format
    dump_recon  yes | no: write every cell's reconstruction matrix

Command-line flags override config entries.  Exit codes: 0 ok, 2 bad
configuration, 3 numerical failure, 4 I/O or mesh-file error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import PenaltyConfig, assemble
from .mesh import (MeshError, generate_lshape_tri, generate_perturbed_tri, generate_structured_mixed,
                   generate_structured_tri, load_mesh)
from .patch import PATCH_SIZES, PatchError, build_patches, dim_poly, patch_size_for_degree
from .problems import CATALOG, CLAMPED, SIMPLY_SUPPORTED, get_case
from .recon import UniquenessViolation, build_full_dg, build_recon, estimate_lambda
from .solve import FactorizationError, compute_errors, convergence_rates, solve

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

MODES = ("reconstructed", "baseline-full-dg")
GENERATORS = {
    "tri": lambda n, cfg: generate_structured_tri(n),
    "perturbed-tri": lambda n, cfg: generate_perturbed_tri(n, cfg.amplitude, cfg.seed),
    "mixed": lambda n, cfg: generate_structured_mixed(n),
    "lshape": lambda n, cfg: generate_lshape_tri(n),
}
CSV_COLUMNS = ("level", "h", "dofs", "err_l2", "err_energy", "err_h2broken", "rate_l2",
               "rate_energy", "lambda_max", "solver_residual")
MIN_DEGREE, MAX_DEGREE = 1, 6


class ConfigError(ValueError):
    pass


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ConfigError(f"expected yes/no, got {text!r}")


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


@dataclass
class StudyConfig:
    case: str
    generator: str | None = None
    levels: list[int] = field(default_factory=list)
    meshes: list[str] = field(default_factory=list)
    degrees: list[int] = field(default_factory=lambda: [3])
    profile: str = "example1"
    sizes: list[int] = field(default_factory=list)
    mu: float | None = None
    eta: float | None = None
    mode: str = "reconstructed"
    bc: str | None = None
    solver: str = "auto"
    out: str = "study-out"
    lambda_diag: bool = True
    seed: int = 0
    amplitude: float = 0.2
    dump_matrix: bool = False
    dump_recon: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        name = self.case
        if not (name in CATALOG or name.startswith("poly-exact-") or name == "zero"):
            raise ConfigError(f"unknown case {name!r}; available: {', '.join(CATALOG)}")
        if self.generator is None:
            self.generator = "lshape" if name == "lshape-singular" else "tri"
        if self.generator not in GENERATORS:
            raise ConfigError(f"unknown generator {self.generator!r}; "
                              f"available: {', '.join(GENERATORS)}")
        if not self.meshes and not self.levels:
            raise ConfigError("need at least one level (levels = ...) or mesh file (meshes = ...)")
        if any(n < 1 for n in self.levels):
            raise ConfigError("levels must be >= 1")
        if not self.degrees:
            raise ConfigError("need at least one polynomial degree")
        for m in self.degrees:
            if not MIN_DEGREE <= m <= MAX_DEGREE:
                raise ConfigError(f"degree {m} outside the supported range "
                                  f"{MIN_DEGREE}..{MAX_DEGREE}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; use one of {', '.join(MODES)}")
        if self.profile != "custom" and self.profile not in PATCH_SIZES:
            raise ConfigError(f"unknown patch-size profile {self.profile!r}")
        if self.profile == "custom":
            if len(self.sizes) != len(self.degrees):
                raise ConfigError("custom profile needs one patch size per degree")
        if self.mode == "reconstructed":
            for m, s in zip(self.degrees, self.sizes or [None] * len(self.degrees)):
                try:
                    patch_size_for_degree(m, self.profile, s)
                except PatchError as exc:
                    raise ConfigError(str(exc)) from None
        for name_, v in (("mu", self.mu), ("eta", self.eta)):
            if v is not None and not v > 0:
                raise ConfigError(f"{name_} must be positive")
        if self.bc not in (None, CLAMPED, SIMPLY_SUPPORTED):
            raise ConfigError(f"unknown boundary condition {self.bc!r}")
        if self.solver not in ("auto", "direct-cholesky", "cg"):
            raise ConfigError(f"unknown solver {self.solver!r}")

    # -- construction ---------------------------------------------------------

    _KEYS = {
        "case": str, "generator": str, "levels": _ints, "meshes": None, "degrees": _ints,
        "m": _ints, "profile": str, "sizes": _ints, "mu": float, "eta": float, "mode": str,
        "bc": str, "solver": str, "out": str, "lambda": _bool, "seed": int, "amplitude": float,
        "dump_matrix": _bool, "dump_recon": _bool,
    }

    @classmethod
    def from_mapping(cls, entries: dict, base_dir: Path | None = None) -> StudyConfig:
        kwargs = {}
        for key, raw in entries.items():
            key = key.replace("-", "_")
            if key not in cls._KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            conv = cls._KEYS[key]
            if key == "meshes":
                files = [s.strip() for s in str(raw).split(",") if s.strip()] \
                    if not isinstance(raw, list) else list(raw)
                if base_dir is not None:
                    files = [str(base_dir / f) if not Path(f).is_absolute() else f for f in files]
                kwargs["meshes"] = files
                continue
            try:
                value = conv(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
            if key == "m":
                key = "degrees"
            elif key == "lambda":
                key = "lambda_diag"
            kwargs[key] = value
        if "case" not in kwargs:
            raise ConfigError("config is missing the required key 'case'")
        return cls(**kwargs)

    def penalties(self, m: int) -> PenaltyConfig:
        d = PenaltyConfig.default(m, self.mode)
        return PenaltyConfig(self.mu if self.mu is not None else d.mu,
                             self.eta if self.eta is not None else d.eta)

    def patch_size(self, m: int) -> int:
        custom = self.sizes[self.degrees.index(m)] if self.profile == "custom" else None
        return patch_size_for_degree(m, self.profile, custom)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    entries = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        entries[key] = value
    return entries


def load_config(path, overrides: dict | None = None) -> StudyConfig:
    path = Path(path)
    entries = parse_config_text(path.read_text(), str(path))
    entries.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return StudyConfig.from_mapping(entries, base_dir=path.parent)


# -- running --------------------------------------------------------------------

@dataclass
class LevelResult:
    level: int
    mesh_label: str
    n_cells: int
    errors: object
    residual: float
    lambda_max: float
    seconds: float


def build_space(mesh, m: int, mode: str = "reconstructed", patch_size: int | None = None,
                profile: str = "example1"):
    """Reconstruction operator (or identity-coefficient full DG space) on ``mesh``."""
    if mode == "baseline-full-dg":
        return build_full_dg(mesh, m)
    target = patch_size if patch_size is not None else patch_size_for_degree(m, profile)
    if target > mesh.n_cells:
        raise PatchError(f"patch size {target} exceeds the number of cells ({mesh.n_cells})")
    return build_recon(mesh, build_patches(mesh, target), m)


def solve_level(mesh, case, m: int, mode: str = "reconstructed", penalties=None,
                patch_size: int | None = None, profile: str = "example1", bc=None,
                solver: str = "auto", with_lambda: bool = False):
    """Assemble, solve and measure one mesh.  Returns (errors, op, system, report, lambda)."""
    op = build_space(mesh, m, mode, patch_size, profile)
    expected = mesh.n_cells if mode == "reconstructed" else mesh.n_cells * dim_poly(m)
    if op.n_dofs != expected:
        raise AssertionError(f"DOF count {op.n_dofs} != {expected}")
    penalties = penalties or PenaltyConfig.default(m, mode)
    system = assemble(mesh, op, case, penalties, bc=bc)
    report = solve(system, method=solver)
    errors = compute_errors(mesh, op, report.x, case)
    lam = math.nan
    if with_lambda and mode == "reconstructed":
        lam = estimate_lambda(op, mesh).max
    return errors, op, system, report, lam


def _meshes(cfg: StudyConfig):
    if cfg.meshes:
        for f in cfg.meshes:
            yield Path(f).name, load_mesh(f)
    else:
        for n in cfg.levels:
            yield f"{cfg.generator}-n{n}", GENERATORS[cfg.generator](n, cfg)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if math.isinf(v):
        return "inf"
    return f"{v:.6e}"


def _rates(results, attr):
    hs = [r.errors.h for r in results]
    es = [getattr(r.errors, attr) for r in results]
    rates = [None]
    for i in range(1, len(results)):
        if hs[i] < hs[i - 1]:
            rates.append(convergence_rates(es[i - 1:i + 1], hs[i - 1:i + 1])[0])
        else:
            rates.append(None)
    return rates


def write_csv(path: Path, results) -> None:
    rl2 = _rates(results, "l2")
    ren = _rates(results, "energy")
    lines = [",".join(CSV_COLUMNS)]
    for r, a, b in zip(results, rl2, ren):
        e = r.errors
        row = (r.level, e.h, e.dofs, e.l2, e.energy, e.h2_broken, a, b, r.lambda_max, r.residual)
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def summary_text(cfg: StudyConfig, m: int, results) -> str:
    pen = cfg.penalties(m)
    rl2 = _rates(results, "l2")
    ren = _rates(results, "energy")
    out = [f"case {cfg.case}, degree m = {m}, mode {cfg.mode}",
           f"penalties mu = {pen.mu:g}, eta = {pen.eta:g}"]
    if cfg.mode == "reconstructed":
        out.append(f"patch size #S(K) = {cfg.patch_size(m)} ({cfg.profile})")
    out.append("energy norm includes boundary-face jump terms")
    out.append("")
    out.append(f"{'level':>5} {'mesh':>18} {'dofs':>8} {'h':>10} {'L2 error':>11} {'rate':>6} "
               f"{'energy err':>11} {'rate':>6} {'Lambda':>8}")
    for r, a, b in zip(results, rl2, ren):
        e = r.errors
        out.append(f"{r.level:>5} {r.mesh_label:>18} {e.dofs:>8} {e.h:>10.4e} {e.l2:>11.3e} "
                   f"{_fmt_rate(a):>6} {e.energy:>11.3e} {_fmt_rate(b):>6} "
                   f"{'-' if math.isnan(r.lambda_max) else f'{r.lambda_max:.3f}':>8}")
    return "\n".join(out) + "\n"


def _fmt_rate(v):
    if v is None:
        return "-"
    return "inf" if math.isinf(v) else f"{v:.2f}"


def run_study(cfg: StudyConfig) -> dict[int, list[LevelResult]]:
    """Run every (degree, level) pair and write the report files.

    Files in ``cfg.out``: ``study_m<m>.csv``, ``summary_m<m>.txt`` and,
    on request, ``A_m<m>_level<i>.mtx`` and ``recon_m<m>_level<i>.txt``.
    The report content does not depend on timing, so reruns are byte-identical.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    case = get_case(cfg.case, m=max(cfg.degrees))
    meshes = list(_meshes(cfg))
    all_results = {}
    for m in cfg.degrees:
        if cfg.case == "poly-exact-m":
            case = get_case(cfg.case, m=m)
        results = []
        for level, (label, mesh) in enumerate(meshes):
            t0 = time.perf_counter()
            errors, op, system, report, lam = solve_level(
                mesh, case, m, cfg.mode, cfg.penalties(m),
                patch_size=cfg.patch_size(m) if cfg.mode == "reconstructed" else None,
                bc=cfg.bc, solver=cfg.solver, with_lambda=cfg.lambda_diag)
            dt = time.perf_counter() - t0
            log.info("m=%d level %d (%s): %d dofs, L2 %.3e, energy %.3e, %.1fs",
                     m, level, label, errors.dofs, errors.l2, errors.energy, dt)
            if cfg.dump_matrix:
                import scipy.io
                scipy.io.mmwrite(str(out / f"A_m{m}_level{level}.mtx"), system.A)
            if cfg.dump_recon:
                (out / f"recon_m{m}_level{level}.txt").write_text(format_recon(op))
            results.append(LevelResult(level, label, mesh.n_cells, errors, report.residual, lam, dt))
        write_csv(out / f"study_m{m}.csv", results)
        (out / f"summary_m{m}.txt").write_text(summary_text(cfg, m, results))
        all_results[m] = results
    return all_results


def format_recon(op, cells=None) -> str:
    """Human-readable dump of the per-cell reconstruction matrices."""
    lines = []
    for k in (range(op.n_cells) if cells is None else cells):
        b = op.bases[k]
        lines.append(f"cell {k}: center ({float(b.center[0])!r}, {float(b.center[1])!r}) scale {b.scale!r}")
        lines.append("  dofs " + " ".join(str(int(d)) for d in op.dofs[k]))
        if op.sigma_min is not None:
            lines.append(f"  sigma_min {op.sigma_min[k]:.6e} sigma_max {op.sigma_max[k]:.6e}")
        exps = b.exponents
        for row, e in zip(op.coeffs[k], exps):
            mono = "x^%d y^%d" % tuple(e) if len(e) == 2 else "x^%d" % e[0]
            lines.append(f"  {mono:>10} " + " ".join(f"{v: .6e}" for v in row))
    return "\n".join(lines) + "\n"


# -- command line -----------------------------------------------------------------

def _parser():
    p = argparse.ArgumentParser(prog="prdg", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a convergence study")
    r.add_argument("--config", required=True)
    for flag, kw in (("--case", {}), ("--generator", {}), ("--levels", {}), ("--meshes", {}),
                     ("--m", dict(dest="degrees")), ("--profile", {}), ("--sizes", {}),
                     ("--mu", {}), ("--eta", {}), ("--mode", {}), ("--bc", {}), ("--solver", {}),
                     ("--out", {}), ("--seed", {}), ("--amplitude", {})):
        r.add_argument(flag, **kw)
    r.add_argument("--lambda", dest="lambda_", choices=("yes", "no"))
    r.add_argument("--dump-matrix", action="store_const", const="yes")
    r.add_argument("--dump-recon", action="store_const", const="yes")

    mi = sub.add_parser("mesh-info", help="print mesh statistics")
    mi.add_argument("file")

    d = sub.add_parser("dump-basis", help="print a cell's patch and reconstruction matrix")
    d.add_argument("--cell", type=int, required=True)
    src = d.add_mutually_exclusive_group()
    src.add_argument("--mesh", help="mesh file")
    src.add_argument("--n", type=int, default=4, help="structured triangle mesh size (default 4)")
    d.add_argument("--m", type=int, default=2)
    d.add_argument("--profile", default="example1")
    d.add_argument("--size", type=int, help="explicit patch size")
    return p


def _cmd_run(args) -> int:
    overrides = {k: getattr(args, k) for k in (
        "case", "generator", "levels", "meshes", "degrees", "profile", "sizes", "mu", "eta",
        "mode", "bc", "solver", "out", "seed", "amplitude", "dump_matrix", "dump_recon")}
    overrides["lambda"] = args.lambda_
    cfg = load_config(args.config, overrides)
    results = run_study(cfg)
    for m, res in results.items():
        print(summary_text(cfg, m, res))
    return EXIT_OK


def _cmd_mesh_info(args) -> int:
    mesh = load_mesh(args.file)
    for k, v in mesh.summary().items():
        print(f"{k}: {v}")
    return EXIT_OK


def _cmd_dump_basis(args) -> int:
    mesh = load_mesh(args.mesh) if args.mesh else generate_structured_tri(args.n)
    if not 0 <= args.cell < mesh.n_cells:
        raise ConfigError(f"cell {args.cell} out of range 0..{mesh.n_cells - 1}")
    try:
        size = patch_size_for_degree(args.m, "custom" if args.size else args.profile, args.size)
    except PatchError as exc:
        raise ConfigError(str(exc)) from None
    op = build_space(mesh, args.m, patch_size=size)
    print(format_recon(op, [args.cell]), end="")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": _cmd_run, "mesh-info": _cmd_mesh_info, "dump-basis": _cmd_dump_basis}
    try:
        return handlers[args.command](args)
    except (ConfigError, PatchError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MeshError, OSError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UniquenessViolation, FactorizationError, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

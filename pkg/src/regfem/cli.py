"""Command-line driver: parse a study configuration, run it, emit CSV/summary."""

import argparse
import sys

from .analysis import (StudyConfig, fitted_slopes, predicted_rates,
                       run_convergence)

CSV_HEADER = "level,h,h0,eps,dofs,err_l2,err_h1,eoc_l2,eoc_h1,assemble_ms,solve_ms"

H1_SLOPE_TOL = 0.05
L2_SLOPE_TOL = 0.10


def _read_config_file(path):
    """Flat 'key = value' lines; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key] = val
    return values


_CONFIG_KEYS = {
    "case": str, "kernel": str, "rhs": str, "eps-q": float, "eps-c": float,
    "levels": int, "base-level": int, "surface-quad-order": int,
    "volume-quad-order": int, "volume-subdiv": int,
    "deterministic": lambda s: s.lower() in ("1", "true", "yes"),
    "allow-support-overflow": lambda s: s.lower() in ("1", "true", "yes"),
    "out": str,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="regfem",
        description="Convergence study for elliptic interface problems with "
                    "regularized singular forcing.")
    p.add_argument("--case", choices=("square", "lshape", "cube"))
    p.add_argument("--kernel",
                   choices=("radial-c1", "tensor-c1", "tensor-cinf", "tensor-linf"))
    p.add_argument("--rhs", choices=("regularized", "direct"))
    p.add_argument("--eps-q", type=float, help="epsilon = c * h^q, q in (0, 1]")
    p.add_argument("--eps-c", type=float, help="prefactor c in epsilon = c * h^q")
    p.add_argument("--levels", type=int)
    p.add_argument("--base-level", type=int)
    p.add_argument("--surface-quad-order", type=int)
    p.add_argument("--volume-quad-order", type=int)
    p.add_argument("--volume-subdiv", type=int,
                   help="composite volume rule subdivisions (for box kernels)")
    p.add_argument("--deterministic", action="store_true", default=None)
    p.add_argument("--allow-support-overflow", action="store_true", default=None)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--check", action="store_true",
                   help="exit nonzero unless fitted slopes match predictions")
    return p


def parse_args(argv):
    """Resolve flags and optional config file into a StudyConfig.

    Precedence: defaults < config file < command-line flags.
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    settings = {"case": "square", "kernel": "tensor-c1", "rhs": "regularized",
                "eps-q": 1.0, "eps-c": 1.0, "levels": 4, "base-level": None,
                "surface-quad-order": 4, "volume-quad-order": 3,
                "volume-subdiv": 1,
                "deterministic": False, "allow-support-overflow": False,
                "out": None}
    if args.config:
        for key, val in _read_config_file(args.config).items():
            if key not in _CONFIG_KEYS:
                parser.error(f"unknown config key {key!r}")
            settings[key] = _CONFIG_KEYS[key](val)
    for key in settings:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            settings[key] = flag

    cfg = StudyConfig(case=settings["case"], kernel=settings["kernel"],
                      rhs_mode=settings["rhs"], q=settings["eps-q"],
                      c=settings["eps-c"], levels=settings["levels"],
                      base_level=settings["base-level"],
                      surface_quad_order=settings["surface-quad-order"],
                      volume_quad_order=settings["volume-quad-order"],
                      volume_subdiv=settings["volume-subdiv"],
                      deterministic=settings["deterministic"],
                      allow_support_overflow=settings["allow-support-overflow"],
                      out_path=settings["out"])
    try:
        cfg.validate()
    except ValueError as exc:
        parser.error(str(exc))
    return cfg, args.check


def format_csv(rows, deterministic=False):
    """CSV text for the rows; deterministic mode zeroes the wall-clock columns."""
    lines = [CSV_HEADER]
    for r in rows:
        asm, slv = (0.0, 0.0) if deterministic else (r.assemble_ms, r.solve_ms)
        lines.append(",".join([
            str(r.level),
            f"{r.h:.9e}", f"{r.h0:.9e}", f"{r.epsilon:.9e}", str(r.n_dofs),
            f"{r.err_l2:.9e}", f"{r.err_h1:.9e}",
            "" if r.eoc_l2 is None else f"{r.eoc_l2:.6f}",
            "" if r.eoc_h1 is None else f"{r.eoc_h1:.6f}",
            f"{asm:.3f}", f"{slv:.3f}"]))
    return "\n".join(lines) + "\n"


def emit_csv(rows, path, deterministic=False):
    if not rows:
        raise ValueError("no rows to emit")
    with open(path, "w") as fh:
        fh.write(format_csv(rows, deterministic))


def emit_summary(rows, prediction):
    """Human-readable comparison of fitted and predicted DoF slopes."""
    if not rows:
        raise ValueError("no rows to summarize")
    lines = [f"case={prediction.kind} q={prediction.q}"]
    if len(rows) >= 2:
        h1_fit, l2_fit = fitted_slopes(rows)
        l2_ok = abs(l2_fit - prediction.l2_dof_slope) <= L2_SLOPE_TOL
        h1_ok = abs(h1_fit - prediction.h1_dof_slope) <= H1_SLOPE_TOL
        lines.append(f"L2 slope fitted {l2_fit:+.4f}, predicted "
                     f"{prediction.l2_dof_slope:+.4f}: "
                     f"{'PASS' if l2_ok else 'FAIL'} (tol {L2_SLOPE_TOL})")
        lines.append(f"H1 slope fitted {h1_fit:+.4f}, predicted "
                     f"{prediction.h1_dof_slope:+.4f}: "
                     f"{'PASS' if h1_ok else 'FAIL'} (tol {H1_SLOPE_TOL})")
        lines.append("CHECK " + ("PASS" if (l2_ok and h1_ok) else "FAIL"))
    else:
        lines.append("single level: no slopes fitted")
        lines.append("CHECK PASS")
    return "\n".join(lines) + "\n"


def main(argv=None):
    cfg, check = parse_args(sys.argv[1:] if argv is None else argv)
    rows = run_convergence(cfg)
    if cfg.out_path:
        emit_csv(rows, cfg.out_path, cfg.deterministic)
    else:
        sys.stdout.write(format_csv(rows, cfg.deterministic))
    summary = emit_summary(rows, predicted_rates(cfg.case, cfg.q))
    sys.stdout.write(summary)
    if check and "CHECK FAIL" in summary:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

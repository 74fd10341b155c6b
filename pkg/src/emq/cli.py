"""Batch front end: verify, reduce, propagate and anomaly runs over .sys files.

Each subcommand loads one system definition, drives the matching pipeline and
prints a report (human text by default, JSON with --json).  Exit codes are a
stable contract: 0 all checks passed, 1 at least one check failed, 2 the
invocation or the file itself was unusable.  All sampling is seeded, so a
report is reproducible given the same file and --seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import __version__
from .expr import (DomainError, ExprError, ZERO, evaluate, numeric_compare)
from .sysfile import Model, SysFileError, bundled_names, load_bundled, load_model
from .symplectic import gauge_pair_check, split_hamiltonian, verify_charges
from .reduction import jacobi_liouville_check, run_reduction, verify_canonicity
from .pathint import (CoverageError, FocalPointError, propagate_quantum,
                      write_kernel_csv)
from .anomaly import (AnomalyError, GeneratingFunction, anomaly_coefficients,
                      consistency_report, constraint_surface_vanishing,
                      correction_scaling, exponentiation_deviation_slope,
                      jacobian_exponentiation_check, measure_increments,
                      sliced_expansion_check)

__all__ = [
    "SystemFile", "RunReport", "CheckLine",
    "cmd_verify", "cmd_reduce", "cmd_propagate", "cmd_anomaly",
    "worker_count", "build_parser", "main",
    "EXIT_OK", "EXIT_CHECK", "EXIT_USAGE",
]

# the CLI's unit of work is one loaded system definition file
SystemFile = Model

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_USAGE = 2


def worker_count(env=None) -> int:
    """Worker cap from EQ_THREADS; unset means one per available CPU."""
    env = os.environ if env is None else env
    raw = str(env.get("EQ_THREADS", "")).strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"EQ_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ValueError(f"EQ_THREADS must be positive, got {n}")
    return n


def _apply_thread_cap(n: int) -> None:
    # BLAS pools read these lazily at the first heavy call; explicit user
    # settings stay in charge
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

@dataclass
class CheckLine:
    name: str
    ok: bool
    detail: str = ""

    def render(self) -> str:
        mark = "ok " if self.ok else "FAIL"
        line = f"  [{mark}] {self.name}"
        if self.detail:
            line += f": {self.detail}"
        return line


@dataclass
class RunReport:
    command: str
    model: str
    seed: int
    checks: List[CheckLine] = field(default_factory=list)
    metrics: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    provenance: List[str] = field(default_factory=list)
    outputs: Dict[str, str] = field(default_factory=dict)
    version: str = __version__
    elapsed_s: float = 0.0

    def check(self, name: str, ok: bool, detail: str = "") -> bool:
        self.checks.append(CheckLine(name, bool(ok), detail))
        return bool(ok)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.ok else EXIT_CHECK

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "model": self.model,
            "seed": self.seed,
            "version": self.version,
            "ok": self.ok,
            "checks": [{"name": c.name, "ok": c.ok, "detail": c.detail}
                       for c in self.checks],
            "metrics": self.metrics,
            "notes": self.notes,
            "provenance": self.provenance,
            "outputs": self.outputs,
            "elapsed_s": self.elapsed_s,
        }

    def render(self) -> str:
        lines = [f"emq {self.command} {self.model} "
                 f"(seed {self.seed}, v{self.version})"]
        lines += [c.render() for c in self.checks]
        if self.metrics:
            lines.append("  metrics:")
            for k in sorted(self.metrics):
                lines.append(f"    {k} = {self.metrics[k]:.6g}")
        for note in self.notes:
            lines.append(f"  note: {note}")
        for step in self.provenance:
            lines.append(f"  step: {step}")
        for label, path in self.outputs.items():
            lines.append(f"  wrote {label}: {path}")
        verdict = "PASS" if self.ok else "FAIL"
        lines.append(f"result: {verdict} ({len(self.checks)} checks, "
                     f"{self.elapsed_s:.2f}s)")
        return "\n".join(lines)


def _load(spec: str) -> Model:
    if os.path.exists(spec):
        return load_model(spec)
    if spec in bundled_names():
        return load_bundled(spec)
    raise SysFileError(
        f"{spec!r} is neither a file nor a bundled model "
        f"(bundled: {', '.join(bundled_names())})")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_verify(path: str, seed: int = 0) -> Tuple[int, RunReport]:
    """Structural checks: charges, splitting, canonicity, gauge pair, volume."""
    model = _load(path)
    rep = RunReport("verify", model.name, seed)
    t0 = time.perf_counter()
    system = model.system
    chart = model.chart

    try:
        model.constraint.validate(system, seed=seed)
        rep.check("constraint solution solves phi = 0", True)
    except DomainError as exc:
        rep.check("constraint solution solves phi = 0", False, str(exc))

    for entry in verify_charges(system, seed=seed).entries:
        rep.check(f"charge {entry.name} conserved", entry.conserved,
                  f"max err {entry.max_err:.2e}")

    try:
        split = split_hamiltonian(system, seed=seed)
        rep.check("rho conserved along the flow", True)
        from .expr import Add, Const, Mul  # local: only this check builds exprs
        diff = Add((split.h_plus, Mul((Const(-1), split.h_minus))))
        cmp = numeric_compare(diff, system.hamiltonian, chart, n=64,
                              tol=1e-9, seed=seed)
        rep.check("H_plus - H_minus reproduces H", cmp.equal,
                  f"max err {cmp.max_abs_err:.2e}")
        worst = 0.0
        for pt in chart.sample(64, seed=seed):
            worst = min(worst, evaluate(split.h_plus, pt),
                        evaluate(split.h_minus, pt))
        rep.check("both halves nonnegative on the chart", worst >= -1e-10,
                  f"min value {worst:.2e}")
    except ExprError as exc:
        rep.check("rho conserved along the flow", False, str(exc))

    checks = verify_canonicity(model.darboux, system.space, chart, seed=seed,
                               raise_on_failure=False)
    bad = [c for c in checks if not c.ok]
    if bad:
        labels = ", ".join(f"{c.label()} = {c.expected}" for c in bad)
        rep.check("canonical bracket table", False,
                  f"{len(bad)} of {len(checks)} brackets fail: {labels}")
    else:
        rep.check("canonical bracket table", True,
                  f"{len(checks)} brackets verified")

    if model.constraint.chi is not None:
        bracket = gauge_pair_check(model.constraint.phi, model.constraint.chi,
                                   system.space)
        low = min(abs(evaluate(bracket, pt))
                  for pt in chart.sample(32, seed=seed))
        rep.check("gauge pair second class", low > 1e-6,
                  f"min |{{phi, chi}}| = {low:.3g}")
    else:
        rep.check("gauge pair second class", True, "no gauge function declared")

    ok = jacobi_liouville_check(model.darboux, model.constraint, system,
                                seed=seed)
    rep.check("constrained chart volume constant", ok)

    rep.elapsed_s = time.perf_counter() - t0
    return rep.exit_code, rep


def cmd_reduce(path: str, seed: int = 0) -> Tuple[int, RunReport]:
    """Run the elimination pipeline and print every intermediate object."""
    model = _load(path)
    rep = RunReport("reduce", model.name, seed)
    t0 = time.perf_counter()
    try:
        L_R, form, transformed, result = run_reduction(
            model.system, model.constraint, model.darboux, seed=seed)
    except ExprError as exc:
        rep.check("reduction pipeline", False, f"{type(exc).__name__}: {exc}")
        rep.elapsed_s = time.perf_counter() - t0
        return rep.exit_code, rep

    rep.check("reduction pipeline", True)
    rep.notes.append(f"reduced lagrangian: {L_R.lagrangian}")
    rep.notes.append(f"transformed lagrangian: {transformed.lagrangian}")
    rep.notes.append(f"gauge condition: {result.chi} = 0")
    if result.z_solution is not None:
        rep.notes.append(f"gauge variable fixed at "
                         f"{model.darboux.z} = {result.z_solution}")
    rep.notes.append(f"reduced hamiltonian: {result.system.h_star}")
    rep.provenance.extend(result.system.provenance)
    rep.elapsed_s = time.perf_counter() - t0
    return rep.exit_code, rep


def _artifact_paths(out: Optional[str], model_name: str,
                    mode: str) -> Tuple[str, str]:
    if out:
        base = out[:-4] if out.endswith(".csv") else out
    else:
        base = f"{model_name}_{mode}"
    return base + ".csv", base + "_metrics.json"


def cmd_propagate(path: str, seed: int = 0,
                  out: Optional[str] = None) -> Tuple[int, RunReport]:
    """Lattice run against the closed-form reference; CSV plus metrics JSON."""
    model = _load(path)
    if model.lattice is None:
        raise SysFileError(f"{model.name}: no [lattice] section, "
                           f"nothing to propagate")
    rep = RunReport("propagate", model.name, seed)
    t0 = time.perf_counter()
    try:
        _, _, _, result = run_reduction(model.system, model.constraint,
                                        model.darboux, seed=seed)
    except ExprError as exc:
        rep.check("reduction pipeline", False, f"{type(exc).__name__}: {exc}")
        rep.elapsed_s = time.perf_counter() - t0
        return rep.exit_code, rep
    rep.check("reduction pipeline", True)

    cfg = model.lattice
    try:
        run = propagate_quantum(result.system, cfg, model.params)
    except (FocalPointError, CoverageError) as exc:
        rep.check("lattice propagation", False,
                  f"{type(exc).__name__}: {exc}")
        rep.elapsed_s = time.perf_counter() - t0
        return rep.exit_code, rep
    rep.check("lattice propagation", True, f"mode {run.mode}")
    rep.metrics.update({k: float(v) for k, v in run.metrics.items()})

    gate = {"real": "max_rel_err_central", "imaginary": "partition_rel_err"}
    key = gate.get(run.mode)
    if key is not None:
        err = run.metrics[key]
        rep.check("error within declared tolerance", err <= cfg.tolerance,
                  f"{key} = {err:.3e}, tolerance {cfg.tolerance:g}")

    csv_path, metrics_path = _artifact_paths(out, model.name, run.mode)
    if run.zeta is not None:
        write_kernel_csv(run, csv_path)
        rep.outputs["kernel_csv"] = csv_path
    payload = {"model": model.name, "mode": run.mode, "seed": seed,
               "slices": cfg.slices, "n": cfg.n, "length": cfg.length,
               "duration": cfg.duration, "tolerance": cfg.tolerance,
               "metrics": rep.metrics}
    with open(metrics_path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    rep.outputs["metrics_json"] = metrics_path
    rep.elapsed_s = time.perf_counter() - t0
    return rep.exit_code, rep


def cmd_anomaly(path: str, seed: int = 0) -> Tuple[int, RunReport]:
    """Slicing-correction report on the file's generating function."""
    model = _load(path)
    if model.anomaly_F is None:
        raise SysFileError(f"{model.name}: no [anomaly] generating function "
                           f"to analyse")
    rep = RunReport("anomaly", model.name, seed)
    t0 = time.perf_counter()
    try:
        gen = GeneratingFunction.for_chart(model.anomaly_F,
                                           model.system.space, model.darboux)
    except AnomalyError as exc:
        raise SysFileError(f"{model.name}: {exc}") from exc

    for name, cmp in consistency_report(gen, model.darboux, model.chart,
                                        seed=seed).items():
        rep.check(f"relation for {name} consistent with the chart", cmp.equal,
                  f"max err {cmp.max_abs_err:.2e}")

    coeffs = anomaly_coefficients(gen, model.darboux, model.reference_A_z)
    rep.notes.append(f"coefficient source: {coeffs.source}")
    for name, e in coeffs.as_pairs():
        rep.notes.append(f"{name} = {e}")
    rep.notes.extend(coeffs.notes)

    if gen.is_quadratic():
        rep.check("all coefficients vanish identically", coeffs.all_zero)
    else:
        high = max(abs(evaluate(coeffs.A_z, pt))
                   for pt in model.chart.sample(32, seed=seed))
        rep.check("gauge-coordinate coefficient nonzero off the surface",
                  high > 1e-9, f"max |A_z| = {high:.3g}")

    surf = constraint_surface_vanishing(coeffs, model.darboux, model.chart,
                                        seed=seed)
    for entry in surf.entries:
        rep.check(f"{entry.name} vanishes on the gauge surface",
                  entry.vanishes, f"max err {entry.max_abs_err:.2e}")

    if model.sliced_refs is not None:
        expansion = sliced_expansion_check(gen, model.darboux,
                                           model.system.hamiltonian,
                                           model.chart,
                                           expected=model.sliced_refs,
                                           seed=seed)
        for term in expansion.terms:
            rep.check(f"sliced expansion {term.name} matches reference",
                      bool(term.matches),
                      f"max err {term.comparison.max_abs_err:.2e}")
        fit = correction_scaling(expansion, model.chart, seed=seed)
        rep.metrics["correction_scaling_slope"] = fit.slope
        rep.check("correction contribution scales as width^1.5",
                  abs(fit.slope - 1.5) <= 0.05, f"slope {fit.slope:.4f}")
    else:
        rep.notes.append("no sliced reference data declared; "
                         "expansion check skipped")

    incs = measure_increments(coeffs, model.darboux, model.chart, seed=seed)
    mc = jacobian_exponentiation_check(incs)
    rep.metrics["measure_product"] = mc.product
    rep.metrics["measure_exponential"] = mc.exponential
    rep.metrics["measure_rel_deviation"] = mc.rel_deviation
    rep.check("sliced measure exponentiates on the gauge surface",
              mc.rel_deviation <= 1e-12,
              f"rel deviation {mc.rel_deviation:.2e}")
    dev_slope = exponentiation_deviation_slope(seed=seed)
    rep.metrics["exponentiation_deviation_slope"] = dev_slope
    rep.check("off-surface deviation is second order",
              abs(dev_slope - 2.0) <= 0.2, f"slope {dev_slope:.4f}")

    rep.elapsed_s = time.perf_counter() - t0
    return rep.exit_code, rep


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emq",
        description="Verification, reduction, lattice propagation and "
                    "slicing-correction reports for momentum-linear systems.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = (
        ("verify", "structural checks: charges, splitting, chart, volume"),
        ("reduce", "run the elimination pipeline and print the results"),
        ("propagate", "lattice comparison against the closed-form reference"),
        ("anomaly", "slicing-correction coefficients and scaling"),
    )
    for name, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file", help="path to a .sys file, or a bundled "
                                    "model name")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for all sampled checks (default 0)")
        p.add_argument("--json", action="store_true",
                       help="print the report as JSON")
        p.add_argument("--out", default=None,
                       help="propagate: basename for the CSV and metrics "
                            "files; other commands: path for a JSON copy "
                            "of the report")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors already; pass through
        return int(exc.code or 0)
    try:
        _apply_thread_cap(worker_count())
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    commands = {
        "verify": lambda: cmd_verify(args.file, seed=args.seed),
        "reduce": lambda: cmd_reduce(args.file, seed=args.seed),
        "propagate": lambda: cmd_propagate(args.file, seed=args.seed,
                                           out=args.out),
        "anomaly": lambda: cmd_anomaly(args.file, seed=args.seed),
    }
    try:
        code, rep = commands[args.command]()
    except SysFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    print(json.dumps(rep.to_dict(), indent=2) if args.json else rep.render())
    if args.out and args.command != "propagate":
        with open(args.out, "w") as fh:
            json.dump(rep.to_dict(), fh, indent=2)
            fh.write("\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())

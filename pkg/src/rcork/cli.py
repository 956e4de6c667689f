"""Command line front end: manifests, Matrix Market I/O, run protocol.

A problem lives on disk as a flat TOML manifest next to Matrix Market
files for each coefficient.  ``gen`` exports the built-in families,
``solve`` runs the compact solver and writes plot-ready logs, ``check``
loads a manifest and runs the invariant suite on it.  All file writes
go through a temp file and an atomic rename.
"""

import argparse
import os
import sys

import numpy as np
import scipy.io
import scipy.sparse.linalg as spla

try:
    import tomllib as tomli
except ModuleNotFoundError:
    import tomli

from .driver import SolveConfig, solve, solve_baseline, start_vector
from .errors import (
    BreakdownError,
    BudgetExhausted,
    DimensionError,
    ParseError,
    RcorkError,
)
from .linearization import LinearizationPencil, dense_cap
from .problems import gen_exp1, gen_exp2
from .rcork_core import init, rcork_step, ritz_and_eigvecs
from .rep_model import RationalEigenproblem, evaluate


# ---------------------------------------------------------------------------
# value formats

def parse_complex(text):
    """Complex literal with an i suffix: "0.2-2.25i", "3", "-1.5i"."""
    cleaned = str(text).strip().replace(" ", "").replace("i", "j")
    try:
        return complex(cleaned)
    except ValueError:
        raise ParseError("cannot parse complex literal %r" % (text,))


def format_complex(z):
    z = complex(z)
    sign = "+" if z.imag >= 0 else "-"
    return "%r%s%ri" % (z.real, sign, abs(z.imag))


def parse_shift_list(text):
    parts = [p for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ParseError("empty shift list %r" % (text,))
    return [parse_complex(p) for p in parts]


# ---------------------------------------------------------------------------
# atomic writes

def atomic_write_text(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_matrix(path, matrix):
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        scipy.io.mmwrite(fh, matrix)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# manifests

def _toml_scalar(value):
    if isinstance(value, (bool,)):
        raise TypeError("no boolean manifest keys")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return '"%s"' % value.replace("\\", "\\\\").replace('"', '\\"')
    if isinstance(value, (list, tuple)):
        return "[%s]" % ", ".join(_toml_scalar(v) for v in value)
    raise TypeError("cannot serialize %r" % (value,))


def write_manifest(path, entries):
    lines = ["%s = %s" % (key, _toml_scalar(value))
             for key, value in entries.items()]
    atomic_write_text(path, "\n".join(lines) + "\n")


def parse_manifest(path):
    """Read and structurally validate a manifest; returns the raw dict."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ParseError("cannot read manifest %s: %s" % (path, exc))
    try:
        data = tomli.loads(raw.decode("utf-8"))
    except tomli.TOMLDecodeError as exc:
        raise ParseError("%s: %s" % (path, exc))

    for key in ("degree", "n", "s"):
        if key not in data:
            raise ParseError('%s: missing key "%s"' % (path, key))
        if not isinstance(data[key], int):
            raise ParseError('%s: key "%s" must be an integer' % (path, key))
    degree = data["degree"]
    if degree < 1:
        raise ParseError("%s: degree must be at least 1" % path)
    for i in range(degree + 1):
        if "p%d" % i not in data:
            raise ParseError('%s: missing key "p%d"' % (path, i))
    if data["s"] > 0:
        for key in ("e", "f", "c", "d"):
            if key not in data:
                raise ParseError('%s: missing key "%s"' % (path, key))
    return data


def _read_matrix(base, relpath, name):
    path = os.path.join(base, relpath)
    try:
        return scipy.io.mmread(path)
    except OSError as exc:
        raise ParseError('matrix "%s": cannot read %s (%s)'
                         % (name, path, exc))
    except ValueError as exc:
        raise ParseError('matrix "%s": %s is not valid Matrix Market (%s)'
                         % (name, path, exc))


def load_problem(manifest_path):
    """Build a problem from a manifest; shapes are cross-checked."""
    data = parse_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    coeffs = [_read_matrix(base, data["p%d" % i], "P_%d" % i)
              for i in range(data["degree"] + 1)]
    if data["s"] > 0:
        rep = RationalEigenproblem(
            coeffs,
            E=_read_matrix(base, data["e"], "E"),
            F=_read_matrix(base, data["f"], "F"),
            C=_read_matrix(base, data["c"], "C"),
            D=_read_matrix(base, data["d"], "D"))
    else:
        rep = RationalEigenproblem(coeffs)
    if rep.n != data["n"]:
        raise DimensionError("manifest says n=%d but P_0 is %d x %d"
                             % (data["n"], rep.n, rep.n))
    if rep.s != data["s"]:
        raise DimensionError("manifest says s=%d but E has %d columns"
                             % (data["s"], rep.s))
    return rep


def export_problem(problem, out_dir):
    """Write a generated problem as manifest + Matrix Market files."""
    os.makedirs(out_dir, exist_ok=True)
    rep, meta = problem.rep, problem.meta
    entries = {"degree": rep.d, "n": rep.n, "s": rep.s}
    for i, P in enumerate(rep.coeffs):
        name = "P%d.mtx" % i
        write_matrix(os.path.join(out_dir, name), P)
        entries["p%d" % i] = name
    if rep.s:
        for key, M in (("e", rep.E), ("f", rep.F),
                       ("c", rep.C), ("d", rep.D)):
            name = "%s.mtx" % key.upper()
            write_matrix(os.path.join(out_dir, name), M)
            entries[key] = name
    entries["experiment"] = meta["experiment"]
    entries["seed"] = meta["seed"]
    entries["k_eigs"] = meta["k_eigs"]
    entries["shifts"] = ",".join(format_complex(z) for z in meta["shifts"])
    entries["selection"] = meta["selection"]
    if meta["target"] is not None:
        entries["target"] = format_complex(meta["target"])
    entries["start"] = meta["start"]
    entries["prescribed"] = [format_complex(z) for z in problem.prescribed]
    manifest_path = os.path.join(out_dir, "manifest.toml")
    write_manifest(manifest_path, entries)
    return manifest_path


# ---------------------------------------------------------------------------
# result files

RESULT_HEADER = "# re_lambda im_lambda residual"
CSV_HEADER = "iter,j,r_j,n_converged,max_residual,rcork_mem,classical_mem"


def write_results(out_dir, result, prefix=""):
    os.makedirs(out_dir, exist_ok=True)
    lines = [RESULT_HEADER]
    for lam, _, res in result.eigenpairs:
        lines.append("%r %r %r" % (lam.real, lam.imag, res))
    atomic_write_text(os.path.join(out_dir, prefix + "eigenvalues.dat"),
                      "\n".join(lines) + "\n")
    rows = [CSV_HEADER]
    for row in result.log:
        rows.append("%d,%d,%d,%d,%r,%d,%d"
                    % (row["iteration"], row["j"], row["r"],
                       row["n_converged"], row["max_residual"],
                       row["rcork_mem"], row["classical_mem"]))
    atomic_write_text(os.path.join(out_dir, prefix + "convergence.csv"),
                      "\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# subcommands

def _resolve_shifts(ns, data):
    if getattr(ns, "fixed_shift", None):
        return [parse_complex(ns.fixed_shift)]
    if getattr(ns, "shifts", None):
        return parse_shift_list(ns.shifts)
    if "shifts" in data:
        return parse_shift_list(data["shifts"])
    raise ParseError("no shifts given (use --shifts/--fixed-shift or put "
                     'a "shifts" key in the manifest)')


def _config_from_args(ns, data):
    shifts = _resolve_shifts(ns, data)
    selection = data.get("selection", "closest-to-target")
    target = parse_complex(data["target"]) if "target" in data else 0j
    start = data.get("start", "complex")
    max_iterations = ns.max_dim + (ns.max_restarts + 1) * (ns.max_dim
                                                           - ns.keep)
    return SolveConfig(nev=ns.nev, shifts=shifts, m=ns.max_dim, p=ns.keep,
                       tol=ns.tol, cheap_tol=ns.cheap_tol,
                       max_restarts=ns.max_restarts,
                       max_iterations=max_iterations,
                       selection=selection, target=target,
                       stride=ns.stride, seed=ns.seed, start=start)


def cmd_solve(ns):
    data = parse_manifest(ns.manifest)
    rep = load_problem(ns.manifest)
    config = _config_from_args(ns, data)
    exit_code = 0
    try:
        result = solve(rep, config)
        note = None
    except BudgetExhausted as err:
        result, note, exit_code = err.result, str(err), 2
    except BreakdownError as err:
        if err.result is None:
            raise
        result, note, exit_code = err.result, str(err), 2
    write_results(ns.out, result)
    print("%d eigenpair(s) in %d iteration(s), %d restart(s) -> %s"
          % (len(result.eigenpairs), result.iterations, result.restarts,
             ns.out))
    if note:
        print("partial result: %s" % note, file=sys.stderr)

    if ns.baseline_rk:
        pencil_size = rep.n * rep.d + rep.s
        if pencil_size > dense_cap():
            print("baseline skipped: pencil size %d exceeds cap %d"
                  % (pencil_size, dense_cap()), file=sys.stderr)
        else:
            try:
                baseline = solve_baseline(rep, config)
            except (BudgetExhausted, BreakdownError) as err:
                if err.result is None:
                    raise
                baseline = err.result
                print("baseline partial: %s" % err, file=sys.stderr)
            write_results(ns.out, baseline, prefix="baseline_")
    return exit_code


def cmd_gen(ns):
    if ns.experiment == "exp1":
        problem = gen_exp1(ns.n, seed=ns.seed, k_eigs=ns.k_eigs)
    else:
        problem = gen_exp2(ns.n, seed=ns.seed, k_eigs=ns.k_eigs)
    manifest = export_problem(problem, ns.out)
    print(manifest)
    return 0


def _singular_gap(rep, lam, rng):
    """Estimated sigma_min(R(lam)) / ||R(lam)||_F by inverse iteration."""
    R = evaluate(rep, lam).tocsc()
    scale = spla.norm(R, "fro")
    try:
        lu = spla.splu(R)
    except RuntimeError:
        return 0.0  # exactly singular
    v = rng.standard_normal(rep.n) + 1j * rng.standard_normal(rep.n)
    v /= np.linalg.norm(v)
    sigma = np.inf
    for _ in range(3):
        w = lu.solve(v)
        norm = np.linalg.norm(w)
        if not np.isfinite(norm) or norm == 0.0:
            return 0.0
        sigma = 1.0 / norm
        v = w / norm
    return sigma / scale


def cmd_check(ns):
    failures = 0

    def report(ok, text):
        nonlocal failures
        print(("ok: " if ok else "FAIL: ") + text)
        if not ok:
            failures += 1

    data = parse_manifest(ns.manifest)
    rep = load_problem(ns.manifest)
    report(True, "manifest and matrices load (n=%d, d=%d, s=%d)"
           % (rep.n, rep.d, rep.s))

    if ns.fixed_shift:
        shift = parse_complex(ns.fixed_shift)
    elif "shifts" in data:
        shift = parse_shift_list(data["shifts"])[0]
    else:
        shift = 0.3 + 0.7j
    pencil = LinearizationPencil(rep)
    config = SolveConfig(nev=0, shifts=shift, seed=ns.seed)
    state = init(pencil, start_vector(pencil, config))
    steps = min(ns.steps, pencil.N - 1)
    hit_breakdown = False
    for _ in range(steps):
        try:
            rcork_step(state, shift)
        except BreakdownError:
            hit_breakdown = True
            break
    j = state.steps
    report(True, "ran %d compact step(s) at shift %s%s"
           % (j, format_complex(shift),
              " (terminated by lucky breakdown)" if hit_breakdown else ""))

    S = state.basis.stacked()
    err = np.linalg.norm(S.conj().T @ S - np.eye(S.shape[1]))
    report(err <= 1e-10, "stacked coefficient basis orthonormal "
           "(defect %.2e)" % err)
    Q = state.basis.Q
    err = np.linalg.norm(Q.conj().T @ Q - np.eye(Q.shape[1]))
    report(err <= 1e-10, "shared column space orthonormal (defect %.2e)"
           % err)
    ncols = state.basis.ncols
    report(state.basis.r < rep.d + ncols,
           "compact rank bound r=%d < d + j = %d"
           % (state.basis.r, rep.d + ncols))
    pairs = ritz_and_eigvecs(state, limit=3)
    report(len(pairs) > 0 and all(np.isfinite(res) for _, _, res in pairs),
           "Ritz extraction and residual evaluation work")

    rng = np.random.default_rng(ns.seed)
    for text in data.get("prescribed", []):
        lam = parse_complex(text)
        gap = _singular_gap(rep, lam, rng)
        report(gap <= 1e-6, "prescribed value %s is an eigenvalue "
               "(relative gap %.2e)" % (text, gap))
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# argument plumbing

class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors, which collides with
    # the partial-result exit code; route them through ParseError instead
    def error(self, message):
        raise ParseError(message)


def build_parser():
    parser = _Parser(prog="rcork",
                     description="Sparse rational eigenvalue solver with a "
                                 "compact rational Krylov basis.")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run the solver on a manifest")
    ps.add_argument("--manifest", required=True)
    ps.add_argument("--out", required=True,
                    help="output directory for eigenvalues.dat and "
                         "convergence.csv")
    ps.add_argument("--nev", type=int, default=10)
    ps.add_argument("--shifts", default=None,
                    help='comma-separated complex literals "a+bi", cycled')
    ps.add_argument("--fixed-shift", default=None,
                    help="single shift; overrides --shifts")
    ps.add_argument("--max-dim", type=int, default=45,
                    help="subspace size that triggers a restart")
    ps.add_argument("--keep", type=int, default=30,
                    help="pairs kept through a restart")
    ps.add_argument("--tol", type=float, default=1e-10)
    ps.add_argument("--cheap-tol", type=float, default=None)
    ps.add_argument("--stride", type=int, default=5)
    ps.add_argument("--max-restarts", type=int, default=20)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--baseline-rk", action="store_true",
                    help="also run classical rational Krylov on the "
                         "linearization (small problems only)")
    ps.set_defaults(handler=cmd_solve)

    pg = sub.add_parser("gen", help="generate a benchmark problem")
    pg.add_argument("--experiment", required=True, choices=("exp1", "exp2"))
    pg.add_argument("--n", type=int, required=True)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--k-eigs", type=int, default=10)
    pg.add_argument("--out", required=True)
    pg.set_defaults(handler=cmd_gen)

    pc = sub.add_parser("check", help="validate a manifest and run the "
                                      "invariant suite on it")
    pc.add_argument("--manifest", required=True)
    pc.add_argument("--fixed-shift", default=None)
    pc.add_argument("--seed", type=int, default=0)
    pc.add_argument("--steps", type=int, default=10)
    pc.set_defaults(handler=cmd_check)
    return parser


def run_cli(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        return ns.handler(ns)
    except RcorkError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1
    except ValueError as err:
        print("error: %s" % err, file=sys.stderr)
        return 1


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()

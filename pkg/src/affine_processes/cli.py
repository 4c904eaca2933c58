"""Command-line interface: ``affine <command> ...``.

Exit codes: 0 success, 2 validation failure (schema, admissibility,
existence), 3 explosion of the Riccati solution (outputs are still written),
4 domain errors (arguments outside the domain of the requested quantity).
"""

import argparse
import io
import json
import sys
import warnings

import numpy as np

from . import __version__
from .errors import (
    AdmissibilityError,
    AffineError,
    ConfigurationError,
    DomainError,
    MomentDomainError,
    SchemaError,
    StiffnessError,
    StructureError,
    UnsupportedParameterization,
)
from .serialization import dumps, format_float, load_model

EXIT_OK, EXIT_INVALID, EXIT_EXPLODES, EXIT_DOMAIN = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# argument helpers


def _numbers(values):
    """Parse ``--u 0.1 0.2`` or ``--u '[[0.1, 0], [0, 0.1]]'`` into a float array."""
    if values is None:
        return None
    if len(values) == 1 and values[0].lstrip().startswith("["):
        try:
            return np.asarray(json.loads(values[0]), dtype=float)
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise DomainError(f"cannot parse {values[0]!r} as a JSON array") from exc
    try:
        return np.asarray([float(v) for v in values])
    except ValueError as exc:
        raise DomainError(str(exc)) from exc


def _shape_for(model, arr, name):
    """Reshape a flat argument to the model's state shape (``d`` or ``d x d``)."""
    if arr is None:
        return None
    if model.space == "psd":
        d = model.d
        if arr.size != d * d:
            raise DomainError(f"{name} needs {d * d} entries for a {d}x{d} matrix, got {arr.size}")
        return arr.reshape(d, d)
    if arr.size != model.d:
        raise DomainError(f"{name} needs {model.d} entries, got {arr.size}")
    return arr.ravel()


def _state(model, values):
    x = _shape_for(model, _numbers(values), "--x")
    if x is None:
        x = model.x0
    if x is None:
        raise DomainError("no initial state: pass --x or set x0 in the model file")
    return x


def _grid(text):
    """``lo:hi:n`` -> ``linspace(lo, hi, n)``."""
    try:
        lo, hi, n = text.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise DomainError(f"grid must look like lo:hi:n, got {text!r}") from exc


class _Output:
    def __init__(self, path):
        self.path = path
        self.buf = io.StringIO()

    def write(self, text):
        self.buf.write(text)

    def close(self):
        text = self.buf.getvalue()
        if self.path in (None, "-"):
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)


def _csv_row(values):
    return ",".join(v if isinstance(v, str) else format_float(v) for v in values) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args, out):
    from .models import validate

    model = load_model(args.model)
    report = validate(model)
    out.write(dumps({"space": model.space, **report.to_dict()}))
    return EXIT_OK if report.ok else EXIT_INVALID


def _require_valid(model):
    from .models import validate

    report = validate(model)
    if not report.ok:
        raise AdmissibilityError("model is not admissible: " + "; ".join(c.name for c in report.failures()), report)


def cmd_riccati(args, out):
    from .riccati import solve

    model = load_model(args.model)
    _require_valid(model)
    u = _shape_for(model, _numbers(args.u), "--u").astype(complex)
    if args.v is not None:
        u = u + 1j * _shape_for(model, _numbers(args.v), "--v")
    sol = solve(model, u, args.T, args.tol)
    dim = u.size
    header = (["t"] + [f"re_psi_{i + 1}" for i in range(dim)] + [f"im_psi_{i + 1}" for i in range(dim)]
              + ["re_phi", "im_phi"])
    out.write(",".join(header) + "\n")
    for row in sol.to_rows(args.points):
        out.write(_csv_row(row))
    if sol.complete:
        out.write("# status=Complete\n")
        return EXIT_OK
    lo, hi = sol.bracket
    out.write(f"# status=BlowUp,t_star={format_float(sol.t_star)},bracket={format_float(lo)}:{format_float(hi)}\n")
    return EXIT_EXPLODES


def cmd_transform(args, out):
    from .transform import mgf

    model = load_model(args.model)
    _require_valid(model)
    x = _state(model, args.x)
    u = _shape_for(model, _numbers(args.u), "--u").astype(complex)
    if args.v is not None:
        u = u + 1j * _shape_for(model, _numbers(args.v), "--v")
    res = mgf(model, args.t, u, x, args.tol)
    out.write(dumps(res.to_dict()))
    return EXIT_EXPLODES if res.explodes else EXIT_OK


def cmd_density(args, out):
    model = load_model(args.model)
    _require_valid(model)
    x = _state(model, args.x)
    axes = [_grid(g) for g in args.grid]
    if len(axes) != model.d:
        raise DomainError(f"pass one --grid per coordinate ({model.d})")
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.method == "fourier":
            from .transform import invert_density

            eta = None if args.eta is None else _numbers(args.eta)
            dens = invert_density(model, args.t, x, pts, eta=eta, tol=args.tol)
        else:
            from .expansion import build_expansion, evaluate_expansion

            exp = build_expansion(model, args.t, x, args.N, args.weight)
            dens = evaluate_expansion(exp, pts)
    for w in caught:
        if not issubclass(w.category, RuntimeWarning):
            print(f"warning: {w.message}", file=sys.stderr)
    out.write(",".join([f"xi_{i + 1}" for i in range(model.d)] + ["density"]) + "\n")
    for p, g in zip(pts, np.ravel(dens)):
        out.write(_csv_row(list(p) + [g]))
    return EXIT_OK


def cmd_decay(args, out):
    from .transform import decay_exponent

    model = load_model(args.model)
    _require_valid(model)
    x = _state(model, args.x)
    direction = _numbers(args.direction) if args.direction else np.eye(model.dim)[0]
    lo, hi, n = args.radii.split(":")
    radii = np.logspace(np.log10(float(lo)), np.log10(float(hi)), int(n))
    rep = decay_exponent(model, args.t, x, direction, radii, k_max=args.k_max, tol=args.tol)
    out.write(dumps(rep.to_dict()))
    return EXIT_OK


def cmd_moments(args, out):
    from .moments import moments

    model = load_model(args.model)
    _require_valid(model)
    x = _state(model, args.x)
    basis, vals = moments(model, args.t, x, args.k)
    out.write(dumps({",".join(str(a) for a in alpha): v for alpha, v in zip(basis, vals)}))
    return EXIT_OK


def cmd_simulate(args, out):
    from .simulate import simulate_canonical, simulate_wishart, summary

    model = load_model(args.model)
    x = _state(model, args.x)
    store = "terminal" if args.summary else "all"
    if model.space == "psd":
        ens = simulate_wishart(model, x, args.T, args.nsteps, args.npaths, args.seed, store=store,
                               scheme=args.scheme or "euler")
    else:
        if args.scheme not in (None, "euler"):
            raise ConfigurationError("canonical models support the euler scheme only")
        ens = simulate_canonical(model, x, args.T, args.nsteps, args.npaths, args.seed, store=store)
    if args.summary:
        u = _shape_for(model, _numbers(args.u), "--u")
        out.write(dumps(summary(ens, u)))
        return EXIT_OK
    flat = ens.states.reshape(ens.npaths, len(ens.times), -1)
    names = ([f"x_{i + 1}" for i in range(flat.shape[2])] if model.space == "canonical"
             else [f"x_{i + 1}{j + 1}" for i in range(model.d) for j in range(model.d)])
    out.write(",".join(["path", "t"] + names) + "\n")
    for p in range(ens.npaths):
        for k, t in enumerate(ens.times):
            out.write(str(p) + "," + _csv_row([t] + list(flat[p, k])))
    return EXIT_OK


def _matrix_arg(values, d, name):
    arr = _numbers(values)
    if arr is None:
        return None
    if arr.size != d * d:
        raise DomainError(f"{name} needs {d * d} entries")
    return arr.reshape(d, d)


def cmd_wishart(args, out):
    from . import wishart as W

    if args.wishart_command == "validate":
        rep = W.validate_params(args.d, args.p, _matrix_arg(args.sigma, args.d, "--sigma"),
                                _matrix_arg(args.omega, args.d, "--omega"), strict=args.strict)
        out.write(dumps(rep.to_dict()))
        return EXIT_OK if rep.valid else EXIT_INVALID
    model = load_model(args.model)
    if model.space != "psd":
        raise UnsupportedParameterization("the wishart command needs a psd model")
    x = _state(model, args.x)
    dist = W.transition_params(model, args.t, x)
    if args.wishart_command == "params":
        out.write(dumps(dist.to_dict()))
        return EXIT_OK
    u = _matrix_arg(args.u, model.d, "--u")
    value = W.laplace(dist, u)
    out.write(dumps({"t": args.t, "u": u, "value": value, "p": dist.p}))
    return EXIT_OK


def cmd_martingale(args, out):
    from .martingale import martingale_check

    model = load_model(args.model)
    theta = _shape_for(model, _numbers(args.theta), "--theta")
    res = martingale_check(model, theta, args.T)
    out.write(dumps(res.to_dict()))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _tolerance(text):
    v = float(text)
    if not 1e-13 <= v <= 1e-3:
        raise argparse.ArgumentTypeError("tolerance must lie in [1e-13, 1e-3]")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def build_parser():
    parser = argparse.ArgumentParser(prog="affine", description="Affine processes: Riccati equations, transforms, "
                                     "densities, moments, Wishart laws and simulation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, fn, helptext, model=True):
        p = sub.add_parser(name, help=helptext, description=helptext)
        if model:
            p.add_argument("model", help="model JSON file")
        p.add_argument("--out", default="-", help="output path, '-' for standard output (default)")
        p.set_defaults(func=fn)
        return p

    add("validate", cmd_validate, "check admissibility and print the report as JSON")

    p = add("riccati", cmd_riccati, "solve the Riccati system; CSV of t, psi, phi")
    p.add_argument("--u", nargs="+", required=True, help="real part of the initial datum")
    p.add_argument("--v", nargs="+", help="imaginary part of the initial datum")
    p.add_argument("--T", type=_positive_float, required=True)
    p.add_argument("--tol", type=_tolerance, default=1e-10)
    p.add_argument("--points", type=int, default=101, help="rows of dense output")

    p = add("transform", cmd_transform, "E[exp(<u, X_t>)] by the affine transform formula (JSON)")
    p.add_argument("--t", type=_nonneg_float, required=True)
    p.add_argument("--u", nargs="+", required=True)
    p.add_argument("--v", nargs="+", help="imaginary part of u")
    p.add_argument("--x", nargs="+")
    p.add_argument("--tol", type=_tolerance, default=1e-10)

    p = add("density", cmd_density, "transition density on a grid (CSV)")
    p.add_argument("--t", type=_positive_float, required=True)
    p.add_argument("--x", nargs="+")
    p.add_argument("--grid", action="append", required=True, help="lo:hi:n, once per coordinate")
    p.add_argument("--method", choices=["fourier", "expansion"], default="fourier")
    p.add_argument("--eta", nargs="+", help="damping for the Fourier method")
    p.add_argument("--N", type=int, default=10, help="expansion order")
    p.add_argument("--weight", choices=["auto", "moments"], default="auto")
    p.add_argument("--tol", type=_tolerance, default=1e-9)

    p = add("decay", cmd_decay, "decay rate of |characteristic function| along a ray (JSON)")
    p.add_argument("--t", type=_positive_float, required=True)
    p.add_argument("--x", nargs="+")
    p.add_argument("--direction", nargs="+")
    p.add_argument("--radii", default="1:1e4:25", help="lo:hi:n, logarithmically spaced")
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--tol", type=_tolerance, default=1e-9)

    p = add("moments", cmd_moments, "conditional moments of order <= k (JSON)")
    p.add_argument("--t", type=_nonneg_float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--x", nargs="+")

    p = add("simulate", cmd_simulate, "Monte Carlo paths (CSV, long format) or a JSON summary")
    p.add_argument("--T", type=_positive_float, required=True)
    p.add_argument("--nsteps", type=int, required=True)
    p.add_argument("--npaths", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--x", nargs="+")
    p.add_argument("--scheme", choices=["euler", "milstein"])
    p.add_argument("--summary", action="store_true", help="print terminal moments and diagnostics instead")
    p.add_argument("--u", nargs="+", help="argument of the empirical MGF in the summary")

    p = sub.add_parser("wishart", help="Wishart transition laws and existence conditions",
                       description="Wishart transition laws and existence conditions")
    wsub = p.add_subparsers(dest="wishart_command", required=True, metavar="action")
    for name, helptext in (("params", "transition parameters (p, sigma_t, omega_t)"),
                           ("laplace", "Laplace transform E[exp(-tr(u X_t))]")):
        q = wsub.add_parser(name, help=helptext, description=helptext)
        q.add_argument("model")
        q.add_argument("--t", type=_nonneg_float, required=True)
        q.add_argument("--x", nargs="+")
        if name == "laplace":
            q.add_argument("--u", nargs="+", required=True)
        q.add_argument("--out", default="-")
        q.set_defaults(func=cmd_wishart)
    q = wsub.add_parser("validate", help="Gindikin and rank conditions", description="Gindikin and rank conditions")
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--p", type=float, required=True)
    q.add_argument("--sigma", nargs="+")
    q.add_argument("--omega", nargs="+")
    q.add_argument("--strict", action="store_true", help="rank(omega) <= 2p when 2p < d - 1")
    q.add_argument("--out", default="-")
    q.set_defaults(func=cmd_wishart)

    p = add("martingale", cmd_martingale, "is exp(<theta, X>) a martingale on [0, T]? (JSON)")
    p.add_argument("--theta", nargs="+", required=True)
    p.add_argument("--T", type=_positive_float, required=True)
    return parser


def _error_code(exc):
    if isinstance(exc, (SchemaError, StructureError, AdmissibilityError)):
        return EXIT_INVALID
    if isinstance(exc, (DomainError, ConfigurationError, MomentDomainError, StiffnessError,
                        UnsupportedParameterization)):
        return EXIT_DOMAIN
    return EXIT_DOMAIN


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    out = _Output(args.out)
    try:
        code = args.func(args, out)
    except AffineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        report = getattr(exc, "report", None)
        if report is not None:
            out.write(dumps(report.to_dict()))
            out.close()
        return _error_code(exc)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    out.close()
    return code


if __name__ == "__main__":
    sys.exit(main())

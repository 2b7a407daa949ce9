"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 input-format or I/O error,
4 numerical failure.
"""

import argparse
import sys

import numpy as np

from . import analysis, io
from .dynamics import DEFAULT_DT, DEFAULT_PSI0, DEFAULT_T_END, IntegratorConfig, exact_propagate, rk4_integrate
from .errors import DomainError, FormatError, NumericalError
from .model import PhysicalCircuit, build_state_space, kirchhoff_residual, nondimensionalize, params_from_targets
from .sigproc import estimate_modes
from .spectra import eigs_general

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_NUMERICAL = 0, 2, 3, 4

DIMENSIONLESS_FLAGS = {"c": "c", "gamma": "gamma", "gamma_l": "gamma_l"}
PHYSICAL_FLAGS = {"L": "L_henry", "C": "C_farad", "C0": "C0_farad", "R": "R_ohm", "RL": "RL_ohm"}
DEFAULT_GAMMA_L_VALUES = (0.02, 0.04, 0.0738, 0.1)


class UsageError(Exception):
    pass


class _Once(argparse.Action):
    """Store a value, rejecting a second occurrence of the same flag."""

    def __init__(self, option_strings, dest, nargs=None, const=None, **kwargs):
        self._flag = nargs == 0
        super().__init__(option_strings, dest, nargs=nargs, const=const, **kwargs)

    def __call__(self, parser, namespace, values, option_string=None):
        seen = namespace.__dict__.setdefault("_seen", set())
        if self.dest in seen:
            parser.error(f"{option_string} given more than once")
        seen.add(self.dest)
        setattr(namespace, self.dest, True if self._flag else values)


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _psi0(text):
    values = _float_list(text)
    if len(values) != 4:
        raise argparse.ArgumentTypeError(f"--psi0 needs 4 values v1,v2,dv1,dv2, got {text!r}")
    return values


def _grid(text):
    parts = text.split(":")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(f"--grid must be start:stop:count, got {text!r}") from None
    if len(parts) != 3 or count < 0:
        raise argparse.ArgumentTypeError(f"--grid must be start:stop:count with count >= 0, got {text!r}")
    return start, stop, count


def _add_circuit_flags(p, with_gamma=True):
    g = p.add_argument_group("circuit (dimensionless form)")
    g.add_argument("--c", type=float, action=_Once, help="coupling ratio C0/C (dimensionless)")
    if with_gamma:
        g.add_argument("--gamma", type=float, action=_Once,
                       help="gain/loss strength sqrt(L/C)/R (dimensionless)")
    g.add_argument("--gamma-l", dest="gamma_l", type=float, action=_Once,
                   help="inductor loss R_L*sqrt(C/L) (dimensionless, default 0)")
    g = p.add_argument_group("circuit (physical form, converted immediately)")
    g.add_argument("--L", type=float, action=_Once, help="inductance (henry)")
    g.add_argument("--C", type=float, action=_Once, help="tank capacitance (farad)")
    g.add_argument("--C0", type=float, action=_Once, help="coupling capacitance (farad)")
    g.add_argument("--R", type=float, action=_Once, help="gain/loss resistance magnitude (ohm)")
    g.add_argument("--RL", type=float, action=_Once, help="inductor series loss resistance (ohm, default 0)")
    p.add_argument("--config", action=_Once, metavar="PATH",
                   help="circuit file of key=value lines; flags override its values")


def _add_out(p, what="output file (default: stdout)"):
    p.add_argument("--out", action=_Once, metavar="PATH", help=what)


def _add_si(p):
    p.add_argument("--si", action=_Once, nargs=0,
                   help="report angular frequencies in rad/s (needs physical component values)")


def _add_integrator(p):
    p.add_argument("--dt", type=float, action=_Once, default=None,
                   help=f"time step (dimensionless tau units, default {DEFAULT_DT})")
    p.add_argument("--t-end", dest="t_end", type=float, action=_Once, default=None,
                   help=f"final time (dimensionless tau units, default {DEFAULT_T_END:g})")
    p.add_argument("--psi0", type=_psi0, action=_Once, default=None, metavar="v1,v2,dv1,dv2",
                   help="initial state: node voltages (volt) and their tau-derivatives (volt per dimensionless tau unit), "
                        "default 1,0,0,0")


def build_parser():
    parser = argparse.ArgumentParser(prog="ptcircuit", allow_abbrev=False,
                                     description="Gain/loss coupled RLC resonators with lossy inductors.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("spectrum", allow_abbrev=False, help="four complex eigenfrequencies for one parameter set")
    _add_circuit_flags(p)
    _add_si(p)
    _add_out(p)

    p = sub.add_parser("ep", allow_abbrev=False, help="exceptional point / avoided crossing and growth threshold")
    _add_circuit_flags(p, with_gamma=False)
    _add_out(p)

    p = sub.add_parser("simulate", allow_abbrev=False, help="integrate the state equation and write a trace file")
    _add_circuit_flags(p)
    _add_integrator(p)
    p.add_argument("--exact", action=_Once, nargs=0, help="use the matrix-exponential propagator instead of RK4")
    _add_out(p, "trace file (default: stdout)")

    p = sub.add_parser("estimate", allow_abbrev=False, help="estimate eigenfrequencies from a trace file")
    p.add_argument("trace", metavar="TRACE", help="trace file (tau,V1,V2,dV1,dV2 or tau,V)")
    p.add_argument("--channel", type=int, choices=(1, 2), action=_Once, default=None,
                   help="node whose voltage is analysed (default 1)")
    _add_circuit_flags(p)
    _add_si(p)
    _add_out(p)

    p = sub.add_parser("sweep", allow_abbrev=False, help="spectrum along a gamma grid")
    _add_circuit_flags(p, with_gamma=False)
    p.add_argument("--grid", type=_grid, action=_Once, default=None, metavar="start:stop:count",
                   help="gamma grid (dimensionless), default 0.05:0.5:400")
    p.add_argument("--time-domain", dest="time_domain", action=_Once, nargs=0,
                   help="estimate from simulated traces instead of diagonalising")
    _add_integrator(p)
    _add_si(p)
    _add_out(p)

    p = sub.add_parser("gapslope", allow_abbrev=False, help="slope of the minimum real gap against gamma_l")
    _add_circuit_flags(p, with_gamma=False)
    p.add_argument("--gamma-l-values", dest="gamma_l_values", type=_float_list, action=_Once, default=None,
                   metavar="g1,g2,...", help="inductor loss values (dimensionless), default 0.02,0.04,0.0738,0.1")
    p.add_argument("--grid", type=_grid, action=_Once, default=None, metavar="start:stop:count",
                   help="gamma grid for each gap scan (dimensionless), default 0.05:0.5:400")
    _add_out(p)

    p = sub.add_parser("check", allow_abbrev=False, help="Kirchhoff node-law residual of a trace")
    p.add_argument("trace", metavar="TRACE", help="trace file with both node voltages")
    _add_circuit_flags(p)
    _add_out(p)

    p = sub.add_parser("plotdata", allow_abbrev=False, help="write curve files behind the eigenfrequency and voltage figures")
    p.add_argument("--mode", choices=("fig2", "fig3"), action=_Once, required=True,
                   help="fig2: branches vs gamma; fig3: V1, V2 vs tau")
    _add_circuit_flags(p)
    p.add_argument("--grid", type=_grid, action=_Once, default=None, metavar="start:stop:count",
                   help="gamma grid for fig2 (dimensionless), default 0.05:0.5:400")
    _add_integrator(p)
    p.add_argument("--exact", action=_Once, nargs=0, help="fig3: use the matrix-exponential propagator")
    p.add_argument("--out", action=_Once, metavar="DIR", required=True, help="output directory")
    return parser


def _resolve(args, need_gamma=True):
    """Merge config file and flags; returns (params-like dict, omega0 or None)."""
    form, values = "dimensionless", {}
    if getattr(args, "config", None):
        form, values = io.parse_circuit_text(io._read_text(args.config), source=args.config)
        if not values:
            form = None
    phys = {key: getattr(args, flag) for flag, key in PHYSICAL_FLAGS.items() if getattr(args, flag, None) is not None}
    dim = {key: getattr(args, flag) for flag, key in DIMENSIONLESS_FLAGS.items()
           if getattr(args, flag, None) is not None}
    if phys and dim:
        raise UsageError(f"cannot mix physical flags {sorted(phys)} with dimensionless flags {sorted(dim)}")
    flag_form = "physical" if phys else ("dimensionless" if dim else None)
    if form is None or not values:
        form = flag_form or "dimensionless"
    elif flag_form and flag_form != form:
        raise UsageError(f"{flag_form} flags cannot override the {form} values in {args.config}")
    values.update(phys or dim)

    if form == "physical":
        needed = ["L_henry", "C_farad", "C0_farad"] + (["R_ohm"] if need_gamma else [])
        missing = [k for k in needed if k not in values]
        if missing:
            raise UsageError(f"missing physical parameters: {', '.join(missing)}")
        if "R_ohm" not in values:
            values = dict(values, R_ohm=1.0)
        pc = PhysicalCircuit(L=values["L_henry"], C=values["C_farad"], C0=values["C0_farad"],
                             R=values["R_ohm"], R_L=values.get("RL_ohm", 0.0))
        p = nondimensionalize(pc)
        return {"c": p.c, "gamma": p.gamma if need_gamma else None, "gamma_l": p.gamma_l}, p.omega0
    needed = ["c"] + (["gamma"] if need_gamma else [])
    missing = [k for k in needed if k not in values]
    if missing:
        raise UsageError("missing parameters: " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return {"c": values["c"], "gamma": values.get("gamma"), "gamma_l": values.get("gamma_l", 0.0)}, None


def _params(args):
    vals, omega0 = _resolve(args)
    return params_from_targets(vals["c"], vals["gamma"], vals["gamma_l"]), omega0


def _si_scale(args, omega0):
    if not getattr(args, "si", None):
        return 1.0
    if omega0 is None:
        raise UsageError("--si needs physical component values (--L, --C, --C0, --R or a physical --config)")
    return omega0


def _integrator(args):
    return IntegratorConfig(
        dt=args.dt if args.dt is not None else DEFAULT_DT,
        t_end=args.t_end if args.t_end is not None else DEFAULT_T_END,
        psi0=args.psi0 if args.psi0 is not None else DEFAULT_PSI0,
    )


def _grid_values(grid):
    if grid is None:
        return analysis.default_grid()
    start, stop, count = grid
    return np.linspace(start, stop, count)


def _emit(args, text):
    if getattr(args, "out", None):
        io.write_text(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_spectrum(args):
    p, omega0 = _params(args)
    scale = _si_scale(args, omega0)
    _emit(args, io.format_spectrum(eigs_general(build_state_space(p)), scale=scale))


def cmd_ep(args):
    vals, _ = _resolve(args, need_gamma=False)
    c, gl = vals["c"], vals["gamma_l"]
    res = analysis.locate_ep(c, gl)
    lines = [f"method={res.method.value}", f"gamma_star={io.fmt(res.gamma_star)}",
             f"min_gap={io.fmt(res.min_gap)}", f"iterations={res.iterations}"]
    if gl > 0:
        lines.append(f"growth_threshold={io.fmt(analysis.growth_threshold(c, gl))}")
    _emit(args, "\n".join(lines) + "\n")


def cmd_simulate(args):
    p, _ = _params(args)
    ss = build_state_space(p)
    cfg = _integrator(args)
    trace = exact_propagate(ss, cfg) if args.exact else rk4_integrate(ss, cfg)
    _emit(args, io.format_trace(trace))


def cmd_estimate(args):
    trace = io.read_trace(args.trace)
    scale = 1.0
    if args.si:
        _, omega0 = _resolve(args, need_gamma=False)
        scale = _si_scale(args, omega0)
    est = estimate_modes(trace, args.channel or 1)
    if scale != 1.0:
        est = type(est)(frequencies=tuple(f * scale for f in est.frequencies),
                        envelope_rate=est.envelope_rate * scale, regime=est.regime,
                        r_squared=est.r_squared, diagnostics=est.diagnostics)
    _emit(args, est.as_record())


def cmd_sweep(args):
    vals, omega0 = _resolve(args, need_gamma=False)
    scale = _si_scale(args, omega0)
    source = analysis.Source.TIME_DOMAIN if args.time_domain else analysis.Source.DIRECT_EIGEN
    config = _integrator(args) if args.time_domain else None
    sweep = analysis.sweep_gamma(vals["c"], vals["gamma_l"], _grid_values(args.grid), source=source, config=config)
    _emit(args, io.format_sweep(sweep, scale=scale))


def cmd_gapslope(args):
    vals, _ = _resolve(args, need_gamma=False)
    gl = args.gamma_l_values or DEFAULT_GAMMA_L_VALUES
    fit = analysis.gap_slope_vs_gamma_l(vals["c"], gl, _grid_values(args.grid))
    lines = ["gamma_l,gamma_at_min,min_gap"]
    lines += [f"{io.fmt(a)},{io.fmt(b)},{io.fmt(g)}" for a, b, g in zip(fit.gamma_l, fit.gamma_at_min, fit.gaps)]
    lines += [f"# slope={io.fmt(fit.slope)}", f"# residual={io.fmt(fit.residual)}"]
    _emit(args, "\n".join(lines) + "\n")


def cmd_check(args):
    p, _ = _params(args)
    trace = io.read_trace(args.trace)
    res = kirchhoff_residual(p, trace)
    peak = np.max(np.abs(res), axis=0)
    _emit(args, f"max_residual_node1={io.fmt(peak[0])}\nmax_residual_node2={io.fmt(peak[1])}\n")


def cmd_plotdata(args):
    if args.mode == "fig2":
        vals, _ = _resolve(args, need_gamma=False)
        data = analysis.sweep_gamma(vals["c"], vals["gamma_l"], _grid_values(args.grid))
    else:
        p, _ = _params(args)
        ss = build_state_space(p)
        cfg = _integrator(args)
        data = exact_propagate(ss, cfg) if args.exact else rk4_integrate(ss, cfg)
    manifest = io.emit_plot_data(data, args.mode, args.out)
    sys.stdout.write(f"wrote {len(manifest['curves'])} curves to {args.out}\n")


COMMANDS = {
    "spectrum": cmd_spectrum,
    "ep": cmd_ep,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "sweep": cmd_sweep,
    "gapslope": cmd_gapslope,
    "check": cmd_check,
    "plotdata": cmd_plotdata,
}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except (UsageError, DomainError) as exc:
        print(f"ptcircuit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"ptcircuit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except NumericalError as exc:
        print(f"ptcircuit {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

"""Command-line entry point: inference, size sweeps, macro selection,
converter analytics. Every command is a pure function of its flags, input
files and --seed; repeated runs produce byte-identical outputs. Exit codes:
0 success, 1 user/input error, 2 internal invariant violation."""

from __future__ import annotations

import argparse
import sys


from . import metrics, modelio, tdc
from .mapper import map_network
from .metrics import CostParams
from .pipeline import make_macro, run_network

DEFAULT_SIZES = (8, 16, 24, 32, 64, 96, 128, 192, 256)


def _add_globals(p, suppress: bool) -> None:
    # global flags are accepted both before and after the subcommand; the
    # subcommand copies use SUPPRESS defaults so they only override when given
    defaults = {"seed": 42, "calibration": None, "format": "csv", "verbose": False}
    dflt = (lambda _k: argparse.SUPPRESS) if suppress else defaults.__getitem__
    p.add_argument("--seed", type=int, default=dflt("seed"),
                   help="seed for all randomness")
    p.add_argument("--calibration", default=dflt("calibration"),
                   help="cost-constant file (key = value lines)")
    p.add_argument("--format", choices=("csv", "json"), default=dflt("format"))
    p.add_argument("--verbose", action="store_true", default=dflt("verbose"))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tdcim", description=__doc__)
    _add_globals(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    def add_parser(name, **kw):
        sp = sub.add_parser(name, **kw)
        _add_globals(sp, suppress=True)
        return sp

    pi = add_parser("infer", help="run one input through the macro pipeline")
    pi.add_argument("--model", required=True)
    pi.add_argument("--blob", required=True)
    pi.add_argument("--input", required=True, help="tensor .json header")
    pi.add_argument("--macro-kb", type=float, default=8.0)
    pi.add_argument("--banks", type=int)
    pi.add_argument("--tdc-bits", type=int, default=4)
    pi.add_argument("--encoding", choices=("pulse_count", "bit_serial"),
                    default="pulse_count")
    pi.add_argument("--ideal-tdc", action="store_true")
    pi.add_argument("--out", required=True, help="output tensor base path")
    pi.add_argument("--emit-plan", help="write the mapping plan as JSON")

    ps = add_parser("sweep", help="evaluate a model across macro sizes")
    ps.add_argument("--model", required=True)
    ps.add_argument("--blob", required=True)
    ps.add_argument("--sizes", default=",".join(str(s) for s in DEFAULT_SIZES))
    ps.add_argument("--out", required=True)

    pc = add_parser("select", help="pick the minimum-energy macro")
    pc.add_argument("--model", required=True)
    pc.add_argument("--blob", required=True)
    pc.add_argument("--sizes", default=",".join(str(s) for s in DEFAULT_SIZES))
    pc.add_argument("--out", required=True, help="metrics table output path")

    pt = add_parser("tdc", help="converter analytics / PVT Monte Carlo")
    g = pt.add_mutually_exclusive_group(required=True)
    g.add_argument("--analyze", action="store_true")
    g.add_argument("--montecarlo", metavar="VDD,TEMP")
    pt.add_argument("--samples", type=int, default=2000)
    pt.add_argument("--thresholds", help="threshold table (one volt per line)")
    pt.add_argument("--out", help="write JSON here instead of stdout")
    return p


def _macro_from_args(args):
    if args.banks is not None:
        return make_macro(size_kb=args.banks * 8, banks=args.banks,
                          tdc_bits=args.tdc_bits, ideal_tdc=args.ideal_tdc,
                          encoding=args.encoding)
    return make_macro(size_kb=args.macro_kb, tdc_bits=args.tdc_bits,
                      ideal_tdc=args.ideal_tdc, encoding=args.encoding)


def _cost(args) -> CostParams:
    if args.calibration:
        return CostParams.from_file(args.calibration)
    return CostParams.default()


def _emit(doc, path=None) -> None:
    text = modelio.dumps_canonical(doc) + "\n"
    if path:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_infer(args) -> int:
    net, weights, biases = modelio.load_model(args.model, args.blob)
    x = modelio.load_tensor(args.input)
    config = _macro_from_args(args)
    if args.verbose:
        print(f"# macro: {config.capacity_kb:g} KB, {config.banks} banks, "
              f"tdc {config.effective_tdc_bits} bits, {config.input_encoding}",
              file=sys.stderr)
    plan = map_network(net, config)
    if args.emit_plan:
        _emit(plan.to_dict(), args.emit_plan)
    result = run_network(net, weights, x, config, plan, biases)
    out_json = f"{args.out}.json"
    out_bin = f"{args.out}.bin"
    modelio.save_tensor(result.output, out_json, out_bin)
    _emit({
        "output_json": out_json,
        "output_bin": out_bin,
        "saturation_rate": result.saturation_rate,
        "op_counts": result.op_counts,
    })
    return 0


def _sweep_table(args):
    net, weights, _ = modelio.load_model(args.model, args.blob)
    sizes = [float(s) for s in args.sizes.split(",") if s]
    cost = _cost(args)
    table = []
    for kb in sizes:
        config = make_macro(size_kb=kb)
        table.append(metrics.evaluate(net, weights, config, cost=cost))
    return net, sizes, cost, table


def cmd_sweep(args) -> int:
    _, _, _, table = _sweep_table(args)
    modelio.save_report(table, args.out, args.format)
    print(args.out)
    return 0


def cmd_select(args) -> int:
    net, weights, _ = modelio.load_model(args.model, args.blob)
    sizes = [float(s) for s in args.sizes.split(",") if s]
    sel = metrics.select_macro(net, weights, sizes, cost=_cost(args))
    modelio.save_report(list(sel.table), args.out, args.format)
    assert sel.best_report.energy_j == min(r.energy_j for r in sel.table)
    _emit({
        "best_kb": sel.best_config.capacity_kb,
        "banks": sel.best_config.banks,
        "energy_j": sel.best_report.energy_j,
        "latency_s": sel.best_report.latency_s,
        "inductor_h": sel.inductor_h,
        "table": args.out,
        "dropped": [{"kb": kb, "reason": why} for kb, why in sel.dropped],
    })
    return 0


def cmd_tdc(args) -> int:
    if args.thresholds:
        model = tdc.TdcModel(resolution_bits=4, v_lo=0.2, v_hi=0.8,
                             thresholds=tdc.load_thresholds(args.thresholds))
    else:
        model = tdc.TdcModel.measured()
    if args.analyze:
        _emit(tdc.analyze(model).to_dict(), args.out)
        return 0
    parts = args.montecarlo.split(",")
    if len(parts) != 2:
        raise ValueError("--montecarlo expects VDD,TEMP (e.g. 1.0,27)")
    vdd, temp = float(parts[0]), float(parts[1])
    mc = tdc.monte_carlo_pvt((vdd, temp), args.samples, args.seed)
    _emit({"corner": mc["corner"], "stats": mc["stats"]}, args.out)
    return 0


_COMMANDS = {"infer": cmd_infer, "sweep": cmd_sweep, "select": cmd_select,
             "tdc": cmd_tdc}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.verbose:
        resolved = {k: v for k, v in sorted(vars(args).items()) if k != "verbose"}
        print(f"# resolved configuration: {resolved}", file=sys.stderr)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AssertionError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

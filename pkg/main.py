#!/usr/bin/env python3
"""
Main entry point for tilekit
"""

import argparse
import json
import logging
import sys

from clock_chain import SECTORS, build_hamiltonian, clock_frames, lowest_eigenpairs, simulate_construction
from config import Config
from errors import TilekitError
from grid_solver import SolveMode, brute_force_grid, solve_grid
from line_solver import solve_line
from tiling_core import (dump_instance, load_instance, render_tiling, tiling_from_dict,
                         tiling_to_dict, validate_tiling)
from tm_compiler import (TMSpec, compile_tm, counter_machine, load_tm, prime_interval, prime_reduce,
                         reduce_to_n, run_tm, tm_accepts_grid)
from variant_lab import (ROW_PAIR_ENDS, RowPairProblem, affine_fit, fixture, fixture_ids,
                         row_pair_minimum, sweep_report)

EXIT_YES, EXIT_NO, EXIT_ERROR = 0, 1, 2


def _tile(rules, token: str) -> int:
    names = [rules.name(i) for i in range(rules.m)]
    if token in names:
        return names.index(token)
    try:
        return rules.index(int(token))
    except ValueError:
        return rules.index(token)


def _symbols(text: str):
    return tuple(text.split()) if text else ()


class TilekitRunner:
    def __init__(self, args):
        self.args = args
        self.config = Config()
        if getattr(args, "seed", None) is not None:
            self.config.SEED = args.seed
        if getattr(args, "log_level", None):
            self.config.LOG_LEVEL = args.log_level.upper()
        self.as_json = bool(getattr(args, "json", False))
        self.setup_logging()

    def setup_logging(self):
        """Console goes to stderr so --json output stays clean"""
        handlers = [logging.StreamHandler(sys.stderr)]
        if self.config.LOG_FILE:
            handlers.insert(0, logging.FileHandler(self.config.LOG_FILE))
        logging.basicConfig(
            level=getattr(logging, self.config.LOG_LEVEL),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            handlers=handlers
        )
        logging.getLogger().setLevel(getattr(logging, self.config.LOG_LEVEL))
        self.logger = logging.getLogger(__name__)

    def emit(self, payload, lines):
        if self.as_json:
            print(json.dumps(payload, sort_keys=True))
        else:
            for line in lines:
                print(line)

    def run(self) -> int:
        try:
            return self.args.handler(self)
        except TilekitError as e:
            self.logger.error(f"Error running {self.args.command}: {e}")
            return EXIT_ERROR
        except (OSError, json.JSONDecodeError) as e:
            self.logger.error(f"Error reading input: {e}")
            return EXIT_ERROR

    # ------------------------------------------------------------ solve / line

    def cmd_solve(self) -> int:
        a = self.args
        instance = load_instance(a.rules)
        rules = instance.rules
        names = [rules.name(i) for i in range(rules.m)]
        if a.validate:
            with open(a.validate) as f:
                t = tiling_from_dict(rules, json.load(f), a.validate)
            report = validate_tiling(instance, t)
            self.emit({"valid": report.valid, "totalCost": report.total_cost,
                       "violations": [list(v) for v in report.violations],
                       "boundaryMismatches": [list(b) for b in report.boundary_mismatches]},
                      [f"valid: {'yes' if report.valid else 'no'}", f"total cost: {report.total_cost}",
                       f"violations: {len(report.violations)}",
                       f"boundary mismatches: {len(report.boundary_mismatches)}"])
            return EXIT_YES if report.valid else EXIT_NO
        if a.n is None:
            raise TilekitError("solve needs --n (or --validate FILE)")
        mode = SolveMode(a.mode)
        if a.oracle:
            result = brute_force_grid(instance, a.n, self.config)
        else:
            result = solve_grid(instance, a.n, mode, self.config, a.strategy)
        if a.witness and result.witness is not None:
            with open(a.witness, "w") as f:
                json.dump(tiling_to_dict(rules, result.witness), f, indent=1)
        lines = [f"exists: {'yes' if result.exists else 'no'}"]
        if result.count is not None:
            lines.append(f"count: {result.count}")
        if result.min_cost is not None:
            lines.append(f"min cost: {result.min_cost}")
        lines.append(f"method: {result.method}")
        if result.witness is not None:
            lines.append(render_tiling(result.witness, names))
        self.emit(result.to_dict(names), lines)
        return EXIT_YES if result.exists else EXIT_NO

    def cmd_line(self) -> int:
        a = self.args
        rules = load_instance(a.rules).rules
        if a.ends:
            parts = a.ends.split(",")
            if len(parts) != 2:
                raise TilekitError("--ends takes two tiles separated by a comma")
            t0, t1 = _tile(rules, parts[0].strip()), _tile(rules, parts[1].strip())
        else:
            t0 = t1 = 0
        result = solve_line(rules, t0, t1, a.n, SolveMode(a.mode), self.config)
        names = [rules.name(i) for i in range(rules.m)]
        lines = [f"exists: {'yes' if result.exists else 'no'}"]
        if result.min_cost is not None:
            lines.append(f"min cost: {result.min_cost}")
        if result.witness is not None:
            lines.append(" ".join(names[i] for i in result.witness.cells))
        self.emit(result.to_dict(names), lines)
        return EXIT_YES if result.exists else EXIT_NO

    # ------------------------------------------------------------ tm

    def cmd_tm_run(self) -> int:
        a = self.args
        tm = load_tm(a.tm)
        run = run_tm(tm, _symbols(a.tape), a.steps, self.config, exact=a.exact, head_at_home=a.home)
        final = run.final
        payload = {
            "steps": run.steps, "halted": run.halted, "accepted": run.accepted,
            "acceptSteps": run.accept_steps, "peakConfigs": run.peak_configs,
            "final": None if final is None else
            {"state": final.state, "head": final.head, "tape": list(final.tape)},
        }
        lines = [f"steps: {run.steps}{' (halted)' if run.halted else ''}"]
        if final is not None:
            lines.append(f"state: {final.state}  head: {final.head}")
            lines.append(f"tape: {' '.join(final.tape)}")
        else:
            lines.append(f"configurations at the last step: {run.peak_configs} peak")
        if tm.accept is not None:
            lines.append(f"accepted: {'yes' if run.accepted else 'no'}")
        self.emit(payload, lines)
        return EXIT_YES if tm.accept is None or run.accepted else EXIT_NO

    def cmd_tm_compile(self) -> int:
        a = self.args
        counter = load_tm(a.counter) if a.counter else counter_machine()
        verifier = load_tm(a.verifier)
        build = a.out is not None or a.n is not None
        compiled = compile_tm(counter, verifier, rename=not a.no_rename, build=build, config=self.config)
        payload = {"tiles": compiled.tile_count, "layer1": len(compiled.layer1), "layer2": len(compiled.layer2)}
        lines = [f"tiles: {compiled.tile_count} ({len(compiled.layer1)} x {len(compiled.layer2)} + boundary)"]
        if a.out:
            dump_instance(compiled.instance, a.out)
            lines.append(f"written to {a.out}")
        code = EXIT_YES
        if a.n is not None:
            result = solve_grid(compiled.instance, a.n, SolveMode.EXISTS, self.config)
            oracle = tm_accepts_grid(counter, verifier, a.n, self.config)
            payload.update({"n": a.n, "exists": result.exists, "oracle": oracle})
            lines.append(f"N={a.n}: tiling {'exists' if result.exists else 'does not exist'}, "
                         f"machines {'accept' if oracle else 'reject'}")
            code = EXIT_YES if result.exists else EXIT_NO
        self.emit(payload, lines)
        return code

    def cmd_tm_reduce(self) -> int:
        n = reduce_to_n(_symbols(self.args.tape), odd=self.args.odd, config=self.config)
        self.emit({"n": str(n)}, [f"N = {n}"])
        return EXIT_YES

    def cmd_tm_prime(self) -> int:
        x = self.args.x
        n = prime_reduce(x, seed=self.config.SEED)
        n0, start, stop = prime_interval(x)
        self.emit({"x": str(x), "n": str(n), "n0": n0},
                  [f"N = {n}", f"N >> {n0} = {n >> n0}", f"interval: [{start}, {stop})"])
        return EXIT_YES

    # ------------------------------------------------------------ variant

    def cmd_variant_fixture(self) -> int:
        fx = fixture(self.args.name)
        rules = fx.rules
        names = [rules.name(i) for i in range(rules.m)]
        payload = {"id": fx.id, "description": fx.description, "tiles": rules.m,
                   "layers": len(fx.layers), "expectedCost": fx.expected_cost}
        lines = [f"{fx.id}: {fx.description}", f"tiles: {rules.m} in {len(fx.layers)} layer(s)"]
        ok = True
        if fx.tiling is not None:
            report = validate_tiling(fx.instance, fx.tiling)
            ok = report.valid and (fx.expected_cost is None or report.total_cost == fx.expected_cost)
            payload.update({"valid": report.valid, "totalCost": report.total_cost,
                            "tiling": tiling_to_dict(rules, fx.tiling)["rows"]})
            lines.append(f"golden tiling {fx.tiling.height}x{fx.tiling.width}: "
                         f"{'valid' if report.valid else 'INVALID'}, cost {report.total_cost}"
                         + (f" (expected {fx.expected_cost})" if fx.expected_cost is not None else ""))
            lines.append(render_tiling(fx.tiling, names))
        self.emit(payload, lines)
        return EXIT_YES if ok else EXIT_NO

    def _row_pair(self) -> RowPairProblem:
        a = self.args
        return RowPairProblem(fixture(a.fixture).rules, a.mode, a.ends)

    def cmd_variant_rowpair(self) -> int:
        value, top, bottom = row_pair_minimum(self._row_pair(), self.args.n)
        self.emit({"n": self.args.n, "value": value, "top": top, "bottom": bottom},
                  [f"minimum: {value}"] + ([" ".join(top), " ".join(bottom)] if top else []))
        return EXIT_YES if value is not None else EXIT_NO

    def cmd_variant_sweep(self) -> int:
        a = self.args
        prob = self._row_pair()
        report = sweep_report(lambda n: row_pair_minimum(prob, n)[0], range(a.start, a.stop + 1))
        fit = affine_fit(report)
        payload = {"rows": [{"N": int(n), "value": None if v is None or v != v else int(v)}
                            for n, v in zip(report["N"], report["value"])],
                   "slope": None if fit is None else str(fit[0]),
                   "intercept": None if fit is None else str(fit[1])}
        lines = [report.to_string(index=False)]
        lines.append("not affine in N" if fit is None else f"value = {fit[0]} N + {fit[1]}")
        self.emit(payload, lines)
        return EXIT_YES

    # ------------------------------------------------------------ clock

    def cmd_clock_sequence(self) -> int:
        frames = clock_frames(self.args.n)
        self.emit({"n": self.args.n, "length": len(frames), "frames": frames}, frames)
        return EXIT_YES

    def cmd_clock_spectrum(self) -> int:
        a = self.args
        op = build_hamiltonian(a.n, a.sector, a.boundary, self.config)
        pairs = lowest_eigenpairs(op, a.k, self.config)
        values = [float(x) for x in pairs.values]
        payload = {"n": a.n, "sector": a.sector, "boundary": a.boundary, "dim": op.dim,
                   "method": pairs.method, "eigenvalues": values}
        lines = [f"sector {a.sector}{' + boundary' if a.boundary else ''}, dimension {op.dim}, {pairs.method}"]
        lines += [f"  {j}: {v:.12f}" for j, v in enumerate(values)]
        if len(values) > 1:
            lines.append(f"gap: {values[1] - values[0]:.12f}")
        self.emit(payload, lines)
        return EXIT_YES

    def cmd_clock_trace(self) -> int:
        a = self.args
        counter = load_tm(a.tm)
        if a.verifier:
            verifier = load_tm(a.verifier)
        else:
            verifier = TMSpec((counter.blank,), counter.blank, ("s",), "s", None, ())
        trace = simulate_construction(a.n, counter, verifier, a.witness or "", self.config)
        payload = {"n": a.n, "ticks": trace.ticks, "counterSteps": trace.counter_steps,
                   "verifierSteps": trace.verifier_steps, "accepted": trace.accepted,
                   "countingTape": None if trace.counting_tape is None else list(trace.counting_tape),
                   "violations": [[t, msg] for t, msg in trace.violations], "frames": trace.frames}
        lines = list(trace.frames)
        lines.append(f"ticks: {trace.ticks}, counter steps: {trace.counter_steps}, "
                     f"verifier steps: {trace.verifier_steps}, accepted: {'yes' if trace.accepted else 'no'}")
        lines += [f"violation at tick {t}: {msg}" for t, msg in trace.violations]
        self.emit(payload, lines)
        return EXIT_YES if not trace.violations else EXIT_NO


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for every random choice")
    common.add_argument("--log-level", default=argparse.SUPPRESS, help="overrides TILEKIT_LOG_LEVEL")

    parser = argparse.ArgumentParser(prog="tilekit", description="Tiling, Turing machine and clock chain toolkit")
    parser.add_argument("--json", action="store_true", default=False, help="machine-readable output")
    parser.add_argument("--seed", type=int, default=None, help="seed for every random choice")
    parser.add_argument("--log-level", default=None, help="overrides TILEKIT_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="2-D tiling existence, count or minimum cost")
    p.add_argument("--rules", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--mode", choices=[m.value for m in SolveMode], default="exists")
    p.add_argument("--strategy", choices=["auto", "dp", "search"], default="auto")
    p.add_argument("--oracle", action="store_true", help="exhaustive enumeration instead of the solver")
    p.add_argument("--witness", help="write the witness tiling here")
    p.add_argument("--validate", help="check a witness file instead of solving")
    p.set_defaults(handler=TilekitRunner.cmd_solve)

    p = sub.add_parser("line", parents=[common], help="1-D tiling of length N, any number of digits")
    p.add_argument("--rules", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=["exists", "mincost"], default="exists")
    p.add_argument("--ends", help="end tiles as t0,t1 (names or indices)")
    p.set_defaults(handler=TilekitRunner.cmd_line)

    tm = sub.add_parser("tm", help="Turing machines").add_subparsers(dest="tm_command", required=True)
    p = tm.add_parser("run", parents=[common])
    p.add_argument("--tm", required=True)
    p.add_argument("--tape", default="", help="space-separated symbols")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--exact", action="store_true", help="accept only at exactly --steps steps")
    p.add_argument("--home", action="store_true", help="accept only with the head on cell 1")
    p.set_defaults(handler=TilekitRunner.cmd_tm_run)
    p = tm.add_parser("compile", parents=[common])
    p.add_argument("--counter", help="counter machine (the built-in binary counter by default)")
    p.add_argument("--verifier", required=True)
    p.add_argument("--no-rename", action="store_true")
    p.add_argument("--out", help="write the compiled rules file here")
    p.add_argument("--n", type=int, help="also decide the compiled instance at this N")
    p.set_defaults(handler=TilekitRunner.cmd_tm_compile)
    p = tm.add_parser("reduce", parents=[common])
    p.add_argument("--tape", required=True, help="counter output, space-separated")
    p.add_argument("--odd", action="store_true")
    p.set_defaults(handler=TilekitRunner.cmd_tm_reduce)
    p = tm.add_parser("prime", parents=[common])
    p.add_argument("--x", type=int, required=True)
    p.set_defaults(handler=TilekitRunner.cmd_tm_prime)

    var = sub.add_parser("variant", help="weighted and symmetric variants").add_subparsers(
        dest="variant_command", required=True)
    p = var.add_parser("fixture", parents=[common])
    p.add_argument("name", choices=fixture_ids())
    p.set_defaults(handler=TilekitRunner.cmd_variant_fixture)
    ends = sorted({e for pair in ROW_PAIR_ENDS.values() for e in pair})
    for name, handler in (("rowpair", TilekitRunner.cmd_variant_rowpair),
                          ("sweep", TilekitRunner.cmd_variant_sweep)):
        p = var.add_parser(name, parents=[common])
        p.add_argument("--fixture", default="reflection-weighted-L1")
        p.add_argument("--mode", choices=list(ROW_PAIR_ENDS), default="wprime")
        p.add_argument("--ends", choices=ends, default="free")
        if name == "rowpair":
            p.add_argument("--n", type=int, required=True)
        else:
            p.add_argument("--from", dest="start", type=int, default=4)
            p.add_argument("--to", dest="stop", type=int, default=12)
        p.set_defaults(handler=handler)

    clock = sub.add_parser("clock", help="the clock chain").add_subparsers(dest="clock_command", required=True)
    p = clock.add_parser("sequence", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(handler=TilekitRunner.cmd_clock_sequence)
    p = clock.add_parser("spectrum", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sector", choices=SECTORS, default="bracketed")
    p.add_argument("--boundary", action="store_true")
    p.add_argument("--k", type=int, default=2)
    p.set_defaults(handler=TilekitRunner.cmd_clock_spectrum)
    p = clock.add_parser("trace", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tm", required=True, help="counter machine")
    p.add_argument("--verifier")
    p.add_argument("--witness", help="witness bits for track 6")
    p.set_defaults(handler=TilekitRunner.cmd_clock_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_YES if e.code == 0 else EXIT_ERROR
    runner = TilekitRunner(args)
    return runner.run()


if __name__ == "__main__":
    sys.exit(main())

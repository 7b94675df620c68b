"""Command-line front end.

    randjulia constants --R 1
    randjulia tail --region disk:1 --M 100000 --k-max 60 --seed 42 --out tail.csv
    randjulia render --seq constant:0 --resolution 512 --n-max 100 --out disk.pgm

Exit status: 0 on success, 1 on usage or configuration errors, 2 on data
errors (e.g. a tail with nothing to fit).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from . import connectivity as conn
from . import io
from .domain import (
    Circle,
    Constant,
    Disk,
    DiskAt,
    Explicit,
    MainCardioid,
    Periodic,
    Random,
    RegionUnion,
    bounding_radius,
    sequence_bound,
)
from .dynamics import Bounded, derive_constants, escape_time, green, green_batch, sequence_params
from .stats import InsufficientData, Mode, disconnect_fraction, fit_gamma, sample_tail

log = logging.getLogger("randjulia")

THREADS_ENV = "RANDJULIA_THREADS"


class UsageError(Exception):
    pass


class ParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# region and sequence mini-languages


def _number(text: str, what: str = "number") -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"expected {what}, got {text!r}") from None
    if not math.isfinite(v):
        raise ParseError(f"{what} must be finite, got {text!r}")
    return v


def parse_complex(text: str) -> complex:
    t = text.strip().replace(" ", "").replace("i", "j")
    try:
        v = complex(t)
    except ValueError:
        raise ParseError(f"expected a complex number like 0.3 or -1+2i, got {text!r}") from None
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        raise ParseError(f"complex number must be finite, got {text!r}")
    return v


class _RegionParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, expected: str):
        got = self.text[self.pos:self.pos + 12] or "end of input"
        raise ParseError(f"region {self.text!r}: at position {self.pos}: expected {expected}, found {got!r}")

    def eat(self, token: str) -> bool:
        if self.text.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False

    def expect(self, token: str):
        if not self.eat(token):
            self.fail(repr(token))

    def number(self) -> float:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] in "0123456789+-.eE":
            self.pos += 1
        chunk = self.text[start:self.pos]
        try:
            return _number(chunk)
        except ParseError:
            self.pos = start
            self.fail("a decimal number")

    def positive(self) -> float:
        start = self.pos
        v = self.number()
        if v <= 0:
            self.pos = start
            self.fail("a positive radius")
        return v

    def region(self):
        if self.eat("disk_at:"):
            re_ = self.number()
            self.expect(",")
            im = self.number()
            self.expect(",")
            return DiskAt(complex(re_, im), self.positive())
        if self.eat("disk:"):
            return Disk(self.positive())
        if self.eat("circle:"):
            return Circle(self.positive())
        if self.eat("cardioid"):
            return MainCardioid()
        if self.eat("union:["):
            members = [self.region()]
            while self.eat(";"):
                members.append(self.region())
            self.expect("]")
            return RegionUnion(tuple(members))
        self.fail("one of disk:, circle:, cardioid, disk_at:, union:[")

    def parse(self):
        r = self.region()
        if self.pos != len(self.text):
            self.fail("end of input")
        return r


def parse_region(spec):
    """Region from ``disk:<R>``-style text or a tagged JSON record."""
    if isinstance(spec, dict):
        return region_from_record(spec)
    if not isinstance(spec, str):
        raise ParseError(f"region must be text or a record, got {type(spec).__name__}")
    text = spec.strip()
    if text.startswith("{"):
        try:
            return region_from_record(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(f"region JSON: {exc}") from None
    return _RegionParser(text).parse()


def region_from_record(rec: dict):
    kind = rec.get("type")
    try:
        if kind == "disk":
            return Disk(float(rec["radius"]))
        if kind == "circle":
            return Circle(float(rec["radius"]))
        if kind == "cardioid":
            return MainCardioid()
        if kind == "disk_at":
            re_, im = rec["center"]
            return DiskAt(complex(float(re_), float(im)), float(rec["radius"]))
        if kind == "union":
            return RegionUnion(tuple(region_from_record(m) for m in rec["members"]))
    except KeyError as exc:
        raise ParseError(f"region record of type {kind!r} is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"region record {rec!r}: {exc}") from None
    raise ParseError(f"region record: unknown type {kind!r} (expected disk, circle, cardioid, disk_at, union)")


def region_record(region) -> dict:
    if isinstance(region, Disk):
        return {"type": "disk", "radius": region.radius}
    if isinstance(region, Circle):
        return {"type": "circle", "radius": region.radius}
    if isinstance(region, MainCardioid):
        return {"type": "cardioid"}
    if isinstance(region, DiskAt):
        return {"type": "disk_at", "center": [region.center.real, region.center.imag], "radius": region.radius}
    return {"type": "union", "members": [region_record(m) for m in region.members]}


def parse_sequence(text: str, master_seed: int = 0):
    """Sequence from ``constant:<c>``, ``explicit:<c0;c1|tail>``,
    ``periodic:<c0;c1>`` or ``random:<region>:<stream>``."""
    kind, sep, body = text.strip().partition(":")
    if not sep:
        raise ParseError(f"sequence {text!r}: expected <kind>:<body>")
    if kind == "constant":
        return Constant(parse_complex(body))
    if kind == "explicit":
        prefix, bar, tail = body.partition("|")
        if not bar:
            raise ParseError(f"sequence {text!r}: explicit needs '|<tail>'")
        items = [parse_complex(v) for v in prefix.split(";") if v.strip()]
        return Explicit(tuple(items), parse_complex(tail))
    if kind == "periodic":
        items = [parse_complex(v) for v in body.split(";") if v.strip()]
        if not items:
            raise ParseError(f"sequence {text!r}: periodic needs at least one item")
        return Periodic(tuple(items))
    if kind == "random":
        region_text, colon, stream = body.rpartition(":")
        if not colon or not stream.strip().isdigit():
            raise ParseError(f"sequence {text!r}: expected random:<region>:<stream>")
        return Random(parse_region(region_text), master_seed, int(stream))
    raise ParseError(f"sequence {text!r}: unknown kind {kind!r} (expected constant, explicit, periodic, random)")


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # int, pos_int, nonneg_int, pos_float, float, str, region, seq, complex, box, mode, image_mode
    default: Any = None
    required: bool = False
    help: str = ""

    @property
    def flag(self) -> str:
        return "--" + (self.name if len(self.name) == 1 else self.name.replace("_", "-"))


def _P(name, kind, default=None, required=False, help=""):
    return Param(name, kind, default, required, help)


SEED = _P("seed", "seed", 0, help="64-bit master seed")
N_MAX = _P("n_max", "pos_int", 1000, help="iteration horizon")
TOL = _P("tol", "pos_float", 1e-10, help="Green's function error tolerance")
SEQ = _P("seq", "seq", required=True, help="parameter sequence, e.g. constant:0.3")
R_OPT = _P("R", "pos_float", help="parameter radius for the constants (default: sequence bound, 1 if zero)")
BOX = _P("box", "box", help="cx,cy,half_width (default 0,0,R0)")

COMMANDS: Dict[str, List[Param]] = {
    "constants": [_P("R", "pos_float", required=True, help="parameter radius")],
    "escape": [SEQ, _P("z", "complex", 0j, help="starting point"), R_OPT, N_MAX, SEED],
    "green": [SEQ, _P("z", "complex", 0j, help="starting point"), R_OPT, N_MAX, TOL, SEED],
    "render": [
        SEQ, R_OPT, _P("resolution", "pos_int", 512), _P("n_max", "pos_int", 100, help="iteration horizon"),
        BOX, _P("mode", "image_mode", "escape", help="escape or green"), TOL, SEED,
    ],
    "tail": [
        _P("region", "region", required=True, help="parameter region, e.g. disk:1"),
        _P("M", "pos_int", 10000, help="number of sampled sequences"),
        _P("k_max", "pos_int", 60), N_MAX,
        _P("mode", "mode", Mode.ESCAPE_TIME.value, help="escape-time or fast-escape-green"),
        TOL, SEED,
    ],
    "gamma-fit": [
        _P("input", "str", required=True, help="tail CSV written by the tail command"),
        _P("k_lo", "nonneg_int", 5), _P("min_survivors", "pos_int", 30),
    ],
    "connectivity": [
        SEQ, R_OPT, _P("resolution", "pos_int", 512), _P("n_max", "pos_int", 100, help="iteration horizon"),
        BOX, SEED,
    ],
    "degree-profile": [
        SEQ, R_OPT, _P("k_max", "pos_int", 30), N_MAX, TOL,
        _P("K", "nonneg_int", help="degree exponent cap for the sufficiency report"), SEED,
    ],
    "disconnect-scan": [SEQ, R_OPT, _P("shift_max", "pos_int", 50), N_MAX, SEED],
    "fraction": [
        _P("region", "region", required=True), _P("M", "pos_int", 1000), _P("shift_max", "pos_int", 30),
        _P("k_max", "pos_int", help="profile levels (default shift_max)"), _P("n_max", "pos_int", 500),
        _P("K", "nonneg_int", 4, help="degree exponent cap"), TOL, SEED,
    ],
}


def _convert(p: Param, raw):
    kind = p.kind
    try:
        if kind in ("int", "pos_int", "nonneg_int", "seed"):
            if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                raise ValueError
            v = int(raw)
            if kind == "pos_int" and v < 1:
                raise ParseError("must be a positive integer")
            if kind == "nonneg_int" and v < 0:
                raise ParseError("must be a nonnegative integer")
            if kind == "seed" and not 0 <= v < 2**64:
                raise ParseError("must be in [0, 2**64)")
            return v
        if kind in ("float", "pos_float"):
            v = _number(str(raw))
            if kind == "pos_float" and v <= 0:
                raise ParseError("must be positive")
            return v
        if kind == "complex":
            return parse_complex(str(raw)) if not isinstance(raw, (list, tuple)) else complex(*map(float, raw))
        if kind == "region":
            return parse_region(raw)
        if kind == "box":
            parts = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            if len(parts) != 3:
                raise ParseError("expected cx,cy,half_width")
            cx, cy, hw = (_number(str(v)) for v in parts)
            if hw <= 0:
                raise ParseError("half_width must be positive")
            return (cx, cy, hw)
        if kind == "mode":
            return Mode(raw).value
        if kind == "image_mode":
            if raw not in ("escape", "green"):
                raise ParseError("expected escape or green")
            return raw
        if kind in ("str", "seq"):
            if not isinstance(raw, str):
                raise ParseError("expected text")
            return raw
    except ParseError as exc:
        raise UsageError(f"{p.name}: {exc}") from None
    except (TypeError, ValueError):
        raise UsageError(f"{p.name}: invalid value {raw!r}") from None
    raise AssertionError(kind)


def _to_json(p: Param, v):
    if v is None:
        return None
    if p.kind == "region":
        return region_record(v)
    if p.kind == "complex":
        return [v.real, v.imag]
    if p.kind == "box":
        return list(v)
    return v


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="randjulia", allow_abbrev=False, description="Random quadratic Julia sets: dynamics, degree profiles and escape statistics.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log each stage to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, params in COMMANDS.items():
        sp = sub.add_parser(name, allow_abbrev=False)
        for p in params:
            dest = "input" if p.name == "input" else p.name
            flags = [p.flag] + (["--in"] if p.name == "input" else [])
            sp.add_argument(*flags, dest=dest, default=None, help=p.help + (f" (default {p.default})" if p.default is not None else ""))
        sp.add_argument("--config", help="JSON file with parameter values (flags override it)")
        sp.add_argument("--threads", help="worker threads or 'auto' (default $%s or 1)" % THREADS_ENV)
        sp.add_argument("--out", help="output file")
    return parser


def resolve(command: str, args: argparse.Namespace) -> Dict[str, Any]:
    """Merge defaults, the config file and flags into typed values."""
    params = COMMANDS[command]
    file_values: Dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"config {args.config}: {exc}") from None
        if not isinstance(file_values, dict):
            raise UsageError(f"config {args.config}: expected a JSON object")
        cfg_cmd = file_values.pop("command", command)
        if cfg_cmd != command:
            raise UsageError(f"command: config is for {cfg_cmd!r}, not {command!r}")
        known = {p.name for p in params}
        for key in file_values:
            if key not in known:
                raise UsageError(f"{key}: unknown field for {command}")
    values = {}
    for p in params:
        raw = getattr(args, p.name)
        if raw is None:
            raw = file_values.get(p.name)
        if raw is None:
            if p.required:
                raise UsageError(f"{p.name}: required ({p.flag})")
            values[p.name] = p.default
            continue
        values[p.name] = _convert(p, raw)
    return values


def resolve_threads(text: Optional[str]) -> int:
    if text is None:
        text = os.environ.get(THREADS_ENV, "1")
    if text == "auto":
        return os.cpu_count() or 1
    try:
        n = int(text)
    except ValueError:
        raise UsageError(f"threads: expected a positive integer or 'auto', got {text!r}") from None
    if n < 1:
        raise UsageError("threads: must be positive")
    return n


# ---------------------------------------------------------------------------
# commands


def _consts_for(values, seq):
    R = values.get("R")
    if R is None:
        R = sequence_bound(seq) or 1.0
        values["R"] = R
    return derive_constants(R)


def _box(values, consts):
    b = values.get("box")
    if b is None:
        return (0j, consts.R0)
    return (complex(b[0], b[1]), b[2])


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def cmd_constants(values, threads, out):
    c = derive_constants(values["R"])
    line = f"R0={_fmt(c.R0)} tildeR0={_fmt(c.tildeR0)} G={_fmt(c.G)}"
    return line, {"R": c.R, "R0": c.R0, "tildeR0": c.tildeR0, "G": c.G}


def cmd_escape(values, threads, out):
    seq = parse_sequence(values["seq"], values["seed"])
    consts = _consts_for(values, seq)
    res = escape_time(seq, values["z"], consts, values["n_max"])
    if isinstance(res, Bounded):
        return f"bounded horizon={res.horizon}", {"outcome": "bounded", "horizon": res.horizon}
    return f"k={res.k}", {"outcome": "escaped", "k": res.k}


def cmd_green(values, threads, out):
    seq = parse_sequence(values["seq"], values["seed"])
    consts = _consts_for(values, seq)
    res = green(seq, values["z"], consts, values["n_max"], values["tol"])
    if isinstance(res, Bounded):
        return f"bounded horizon={res.horizon}", {"outcome": "bounded", "horizon": res.horizon}
    return f"g={res.value!r} abs_error={res.abs_error:.3e}", {"outcome": "escaped", "value": res.value, "abs_error": res.abs_error}


def cmd_render(values, threads, out):
    if not out:
        raise UsageError("out: render needs --out <file.pgm>")
    seq = parse_sequence(values["seq"], values["seed"])
    consts = _consts_for(values, seq)
    box = _box(values, consts)
    grid = conn.grid_escape_field(seq, consts, box, values["resolution"], values["n_max"], threads)
    if values["mode"] == "escape":
        gray = io.escape_gray(grid)
    else:
        pts = grid.cell_centers()
        k, g, _ = green_batch(sequence_params(seq), pts, consts, values["n_max"], values["tol"], sequence_bound(seq))
        gray = io.green_gray(np.where(k < 0, 0.0, g).reshape(pts.shape), consts.R0)
    return f"bounded_cells={int(grid.bounded.sum())}", gray


def cmd_tail(values, threads, out):
    curve = sample_tail(values["region"], values["M"], values["k_max"], values["n_max"], values["seed"],
                        Mode(values["mode"]), values["tol"], threads=threads)
    return f"M={curve.M} censored={curve.censored} median={curve.median()}", curve


def cmd_gamma_fit(values, threads, out):
    curve = io.read_tail_csv(values["input"])
    fit = fit_gamma(curve, values["k_lo"], values["min_survivors"])
    rec = {
        "gamma_hat": fit.gamma_hat, "intercept": fit.intercept, "fit_range": list(fit.fit_range),
        "rms_residual": fit.rms_residual, "min_survivors": fit.min_survivors, "n_points": fit.n_points,
        "M": curve.M, "n_max": curve.n_max, "master_seed": curve.master_seed,
        "note": "empirical decay rate for this region and horizon only",
    }
    return f"gamma_hat={fit.gamma_hat:.6f} rms_residual={fit.rms_residual:.6f} range={fit.fit_range[0]}..{fit.fit_range[1]}", rec


def cmd_connectivity(values, threads, out):
    seq = parse_sequence(values["seq"], values["seed"])
    consts = _consts_for(values, seq)
    grid = conn.grid_escape_field(seq, consts, _box(values, consts), values["resolution"], values["n_max"], threads)
    rep = conn.components(grid)
    rec = {"component_count": rep.component_count, "sizes": list(rep.sizes), "max_diameter": rep.max_diameter,
           "resolution": rep.resolution, "n_max": rep.n_max}
    return f"components={rep.component_count} max_diameter={rep.max_diameter:.6f}", rec


def cmd_degree_profile(values, threads, out):
    seq = parse_sequence(values["seq"], values["seed"])
    consts = _consts_for(values, seq)
    prof = conn.critical_profile(seq, values["k_max"], consts, values["n_max"], values["tol"])
    greens = []
    for i, g in prof.critical_greens:
        greens.append({"i": i, "bounded": True} if isinstance(g, Bounded) else {"i": i, "value": g.value, "abs_error": g.abs_error})
    rec = {"k_max": prof.k_max, "l": list(prof.l), "log2_degree_bound": list(prof.l), "critical_greens": greens,
           "horizon": prof.horizon, "horizon_limited": prof.horizon_limited, "tie_levels": list(prof.tie_levels)}
    line = f"l={','.join(map(str, prof.l))}"
    if values["K"] is not None:
        rep = conn.sufficient_condition_report(prof, values["K"])
        rec["sufficiency"] = {"K": rep.K, "levels_satisfying": list(rep.levels_satisfying),
                              "verdict": rep.verdict.value, "caveat": rep.caveat}
        line += f" verdict={rep.verdict.value}"
    return line, rec


def cmd_disconnect_scan(values, threads, out):
    seq = parse_sequence(values["seq"], values["seed"])
    consts = _consts_for(values, seq)
    shifts = conn.bbr_disconnected_scan(seq, values["shift_max"], consts, values["n_max"])
    status = "disconnected (certified)" if shifts else "no escaping shift up to the horizon"
    return f"shifts={','.join(map(str, shifts))} {status}", {"escaping_shifts": shifts, "certified_disconnected": bool(shifts)}


def cmd_fraction(values, threads, out):
    region = values["region"]
    rep = disconnect_fraction(region, values["M"], values["shift_max"], values["n_max"], values["seed"],
                              K_cap=values["K"], k_max=values["k_max"], tol=values["tol"], threads=threads)
    rec = {"fraction_disconnected": rep.fraction_disconnected, "fraction_evidence_td": rep.fraction_evidence_td,
           "K_used": rep.K_used, "M": rep.M, "shift_max": rep.shift_max, "k_max": rep.k_max, "n_max": rep.n_max,
           "horizon_limited_samples": rep.horizon_limited_samples}
    rec["note"] = "finite-horizon estimate for this region only"
    if bounding_radius(region) <= 0.25:
        rec["note"] += "; radius <= 1/4, so every Julia set here is connected"
    return f"fraction_disconnected={rep.fraction_disconnected:.6f} fraction_evidence_td={rep.fraction_evidence_td:.6f} K={rep.K_used}", rec


HANDLERS: Dict[str, Callable] = {
    "constants": cmd_constants,
    "escape": cmd_escape,
    "green": cmd_green,
    "render": cmd_render,
    "tail": cmd_tail,
    "gamma-fit": cmd_gamma_fit,
    "connectivity": cmd_connectivity,
    "degree-profile": cmd_degree_profile,
    "disconnect-scan": cmd_disconnect_scan,
    "fraction": cmd_fraction,
}


def embedded_config(command: str, values: Dict[str, Any]) -> Dict[str, Any]:
    """Resolved parameters as written into output files (no paths, no thread count)."""
    cfg = {"command": command}
    for p in COMMANDS[command]:
        cfg[p.name] = _to_json(p, values.get(p.name))
    return cfg


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                            format="randjulia: %(message)s")
        threads = resolve_threads(args.threads)
        values = resolve(args.command, args)
        log.info("resolved %s with %d thread(s)", args.command, threads)
        line, result = HANDLERS[args.command](values, threads, args.out)
    except UsageError as exc:
        print(f"randjulia: error: {exc}", file=sys.stderr)
        return 1
    except ParseError as exc:
        print(f"randjulia: error: {exc}", file=sys.stderr)
        return 1
    except InsufficientData as exc:
        print(f"randjulia: data error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"randjulia: data error: {exc}", file=sys.stderr)
        return 2

    cfg = embedded_config(args.command, values)
    if args.out:
        if args.command == "render":
            io.write_pgm(args.out, result, "config: " + io.config_json(cfg))
        elif args.command == "tail":
            io.atomic_write(args.out, io.tail_csv(result, cfg))
        else:
            io.write_report(args.out, result, cfg)
        log.info("wrote %s", args.out)
    print(line)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

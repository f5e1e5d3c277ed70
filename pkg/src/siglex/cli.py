"""Command-line front end.

Reads a JSON pipeline config plus a CSV sensor log and emits symbol streams,
tokens, histograms, pattern matches, and confidence-band data as plain files.
Outputs are deterministic: numerics are printed with 17 significant digits,
JSON keys are sorted, and nothing depends on wall clock, locale, or RNG.

Subcommands
-----------
derive     apply each channel's derivative kernel, write the derived signal
solve      solve each channel's inverse problem, write the confidence band
symbolize  run the per-channel lexical analysis, write run-length tokens
combine    align channels and write combined-symbol tokens
hist       write the histogram of combined symbols
classify   label fixed-size windows against reference histograms
match      run a symbol pattern over channel streams, write match ranges

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import mcla, pattern, scla
from .errors import (
    AlphabetError,
    AlphabetMismatchError,
    ConfigError,
    EmptyInputError,
    InvalidWindowError,
    MalformedCsvError,
    MalformedTokensError,
    NonFiniteSampleError,
    NonMonotoneTimeError,
    NonUniformGridError,
    NoOverlapError,
    NoReferencesError,
    OutOfRangeError,
    PatternSyntaxError,
    PipelineError,
    SiglexError,
    UnknownSymbolError,
)
from .grid import Grid
from .operators import (
    InverseSolution,
    LdoSpec,
    apply_streaming,
    assemble_ldo,
    extract_local_kernel,
    solve_inverse,
    solution_operator,
)
from .uncertainty import (
    ConfidenceBand,
    confidence_band,
    estimate_residual_variance,
    propagate_inverse,
)

_DATA_ERRORS = (
    MalformedCsvError, NonMonotoneTimeError, NonUniformGridError,
    NonFiniteSampleError, OutOfRangeError, AlphabetError, UnknownSymbolError,
    PatternSyntaxError, AlphabetMismatchError, MalformedTokensError,
    NoOverlapError, EmptyInputError, InvalidWindowError, NoReferencesError,
)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ChannelConfig:
    name: str
    csv_column: str
    alphabet: dict
    operator: Optional[dict] = None
    ldo: Optional[dict] = None
    pattern: Optional[str] = None

    def build_alphabet(self) -> scla.Alphabet:
        a = self.alphabet
        nan_policy = a.get("nan", "reject")
        if a.get("kind") == "usd":
            return scla.usd_alphabet(float(a["epsilon"]), nan_policy=nan_policy)
        rng = tuple(a["range"]) if "range" in a else None
        return scla.Alphabet(tuple(a["symbols"]), tuple(a["boundaries"]),
                             nan_policy=nan_policy, valid_range=rng,
                             catch_all=a.get("catch_all"))


@dataclass
class PipelineConfig:
    channels: list
    combine: list = field(default_factory=list)
    time_column: str = "t"
    band_level: float = 0.95

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PipelineConfig":
        if not isinstance(obj, dict) or "channels" not in obj:
            raise ConfigError("config must be an object with a 'channels' list")
        channels = []
        for i, ch in enumerate(obj["channels"]):
            try:
                name = ch["name"]
                col = ch["csv_column"]
                alpha = ch["alphabet"]
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"channel {i}: missing field {exc}") from exc
            if "operator" in ch and "ldo" in ch:
                raise ConfigError(
                    f"channel '{name}': 'operator' and 'ldo' are exclusive")
            cc = ChannelConfig(name, col, alpha, ch.get("operator"),
                               ch.get("ldo"), ch.get("pattern"))
            try:
                cc.build_alphabet()
            except SiglexError as exc:
                raise ConfigError(f"channel '{name}': bad alphabet: {exc}") from exc
            channels.append(cc)
        names = [c.name for c in channels]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate channel names: {names}")
        combine = list(obj.get("combine", []))
        for name in combine:
            if name not in names:
                raise ConfigError(f"combine references unknown channel '{name}'")
        band = obj.get("band", {})
        return cls(channels, combine, obj.get("time_column", "t"),
                   float(band.get("level", 0.95)))

    def to_json_obj(self) -> dict:
        out = {
            "channels": [],
            "combine": list(self.combine),
            "time_column": self.time_column,
            "band": {"level": self.band_level},
        }
        for ch in self.channels:
            entry = {"name": ch.name, "csv_column": ch.csv_column,
                     "alphabet": ch.alphabet}
            if ch.operator is not None:
                entry["operator"] = ch.operator
            if ch.ldo is not None:
                entry["ldo"] = ch.ldo
            if ch.pattern is not None:
                entry["pattern"] = ch.pattern
            out["channels"].append(entry)
        return out


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return PipelineConfig.from_json_obj(obj)


def dump_config(config: PipelineConfig) -> str:
    return json.dumps(config.to_json_obj(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def ingest_csv(path, time_column: str, value_columns) -> dict:
    """Read a uniform-grid sensor log; returns {column: (Grid, values)}.

    The header row must name `time_column` and every requested value column.
    Timestamps must be strictly increasing with successive deltas within
    1e-6 relative of uniform.  Empty cells and the literal `NaN` become NaN
    (handled downstream by the alphabet's NaN policy).
    """
    times: list[float] = []
    line_nos: list[int] = []
    cols: dict[str, list[float]] = {c: [] for c in value_columns}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsvError(1, "empty file") from None
        header = [h.strip() for h in header]
        if time_column not in header:
            raise MalformedCsvError(1, f"missing time column '{time_column}'")
        t_idx = header.index(time_column)
        idx = {}
        for c in value_columns:
            if c not in header:
                raise MalformedCsvError(1, f"missing value column '{c}'")
            idx[c] = header.index(c)
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise MalformedCsvError(
                    line_no, f"expected {len(header)} fields, got {len(row)}")
            try:
                t = float(row[t_idx])
            except ValueError:
                raise MalformedCsvError(
                    line_no, f"bad timestamp {row[t_idx]!r}") from None
            if not np.isfinite(t):
                raise MalformedCsvError(line_no, f"non-finite timestamp {t!r}")
            times.append(t)
            line_nos.append(line_no)
            for c in value_columns:
                cell = row[idx[c]].strip()
                if cell == "" or cell == "NaN":
                    cols[c].append(np.nan)
                else:
                    try:
                        cols[c].append(float(cell))
                    except ValueError:
                        raise MalformedCsvError(
                            line_no, f"bad value {cell!r} in column '{c}'") from None
    n = len(times)
    if n < 2:
        raise MalformedCsvError(n + 1, f"need at least 2 data rows, got {n}")
    t_arr = np.array(times)
    deltas = np.diff(t_arr)
    if np.any(deltas <= 0):
        bad = int(np.argmax(deltas <= 0))
        raise NonMonotoneTimeError(
            f"timestamps not strictly increasing at line {line_nos[bad + 1]}")
    h = float(t_arr[-1] - t_arr[0]) / (n - 1)
    if np.abs(deltas - h).max() > 1e-6 * h:
        raise NonUniformGridError(
            f"time deltas deviate by {np.abs(deltas - h).max():.3e} "
            f"from uniform step {h:.6g} (tolerance 1e-6 relative)")
    grid = Grid(n, h, float(t_arr[0]))
    return {c: (grid, np.array(cols[c])) for c in value_columns}


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

@dataclass
class ChannelResult:
    name: str
    grid: Grid
    raw: np.ndarray
    processed: np.ndarray
    processed_grid: Optional[Grid]
    stream: scla.SymbolStream
    tokens: list
    band: Optional[ConfidenceBand] = None
    solution: Optional[InverseSolution] = None
    matches: Optional[list] = None


@dataclass
class PipelineBundle:
    channels: dict
    multistream: Optional[mcla.MultiStream] = None
    histogram: Optional[mcla.FrequencyDict] = None


def _stage(channel: str, stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SiglexError as exc:
        raise PipelineError(channel, stage, exc) from exc


def _process_channel(cc: ChannelConfig, grid: Grid, values: np.ndarray,
                     level: float) -> ChannelResult:
    alphabet = cc.build_alphabet()
    processed, pgrid = values, grid
    result = None
    if cc.operator is not None:
        kernel = _stage(cc.name, "operator", extract_local_kernel,
                        int(cc.operator["order"]), int(cc.operator["accuracy"]),
                        grid.h)
        processed = _stage(cc.name, "operator", apply_streaming, kernel, values)
        w = kernel.half_width
        pgrid = grid.restricted(w, grid.n - 2 * w) if grid.n - 2 * w >= 2 else None
    elif cc.ldo is not None:
        spec = _stage(cc.name, "ldo", LdoSpec, int(cc.ldo["degree"]),
                      list(cc.ldo["coefficients"]))
        accuracy = int(cc.ldo.get("accuracy", 2))
        op = _stage(cc.name, "ldo", assemble_ldo, spec, grid, accuracy)
        constraints = [(int(i), float(v)) for i, v in cc.ldo.get("constraints", [])]
        sol = _stage(cc.name, "solve", solve_inverse, op, values, constraints)
        processed = sol.y
        a_map = _stage(cc.name, "covariance", solution_operator,
                       op, [i for i, _ in constraints])
        lam_y = _stage(cc.name, "covariance", propagate_inverse,
                       a_map, np.eye(grid.n))
        sigma2, dof = _stage(cc.name, "covariance", estimate_residual_variance,
                             sol.residual, op.rank)
        band = _stage(cc.name, "band", confidence_band,
                      sol.y, lam_y, sigma2, dof, level)
        result = (sol, band)
    stream = _stage(cc.name, "quantize", scla.quantize, processed, alphabet, pgrid)
    tokens = _stage(cc.name, "compress", scla.compress_runs, stream)
    cr = ChannelResult(cc.name, grid, values, processed, pgrid, stream, tokens)
    if result is not None:
        cr.solution, cr.band = result
    return cr


def run_pipeline(config: PipelineConfig, ingested: dict,
                 level: Optional[float] = None,
                 pattern_override: Optional[str] = None,
                 channel_filter: Optional[str] = None) -> PipelineBundle:
    """Run every configured channel and the combine stage.

    `ingested` maps csv columns to (Grid, values) as produced by ingest_csv.
    Identical inputs and config yield identical bundles.
    """
    level = config.band_level if level is None else level
    channels = {}
    for cc in config.channels:
        if channel_filter is not None and cc.name != channel_filter:
            continue
        if cc.csv_column not in ingested:
            raise ConfigError(f"channel '{cc.name}': column '{cc.csv_column}' "
                              "not found in ingested data")
        grid, values = ingested[cc.csv_column]
        cr = _process_channel(cc, grid, values, level)
        pat_text = pattern_override if pattern_override is not None else cc.pattern
        if pat_text is not None:
            compiled = _stage(cc.name, "pattern", pattern.compile_pattern,
                              pat_text, cr.stream.alphabet)
            cr.matches = _stage(cc.name, "match", pattern.find_all,
                                compiled, cr.stream)
        channels[cc.name] = cr

    bundle = PipelineBundle(channels)
    combine = [n for n in config.combine if n in channels]
    if len(combine) >= 2:
        streams = [channels[n].stream for n in combine]
        try:
            bundle.multistream = mcla.align_and_combine(
                streams, channels=combine)
            bundle.histogram = mcla.histogram(bundle.multistream)
        except SiglexError as exc:
            raise PipelineError(",".join(combine), "combine", exc) from exc
    return bundle


# ---------------------------------------------------------------------------
# output writers (17 significant digits, sorted keys)
# ---------------------------------------------------------------------------

def _write_series_csv(path, grid: Grid, values: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("index,time,value\n")
        for j, v in enumerate(values):
            fh.write(f"{j},{grid.time_at(j):.17g},{v:.17g}\n")


def _write_histogram_json(path, fd: mcla.FrequencyDict) -> None:
    obj = dict(sorted(fd.counts.items()))
    obj["total"] = fd.total
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_derive(bundle: PipelineBundle, config, outdir: Path, args) -> None:
    for name, cr in bundle.channels.items():
        _write_series_csv(outdir / f"{name}.derived.csv", cr.processed_grid,
                          cr.processed)


def _cmd_solve(bundle: PipelineBundle, config, outdir: Path, args) -> None:
    for name, cr in bundle.channels.items():
        if cr.band is not None:
            cr.band.to_csv(outdir / f"{name}.band.csv")
            _write_series_csv(outdir / f"{name}.solution.csv",
                              cr.processed_grid, cr.processed)


def _cmd_symbolize(bundle: PipelineBundle, config, outdir: Path, args) -> None:
    for name, cr in bundle.channels.items():
        scla.tokens_to_csv(cr.tokens, outdir / f"{name}.tokens.csv")


def _cmd_combine(bundle: PipelineBundle, config, outdir: Path, args) -> None:
    if bundle.multistream is None:
        raise ConfigError("combine needs a 'combine' list of >= 2 channels")
    scla.tokens_to_csv(mcla.multi_tokens(bundle.multistream),
                       outdir / "combined.tokens.csv")


def _cmd_hist(bundle: PipelineBundle, config, outdir: Path, args) -> None:
    if bundle.histogram is None:
        raise ConfigError("hist needs a 'combine' list of >= 2 channels")
    _write_histogram_json(outdir / "histogram.json", bundle.histogram)


def _cmd_classify(bundle: PipelineBundle, config, outdir: Path, args) -> None:
    if bundle.multistream is None:
        raise ConfigError("classify needs a 'combine' list of >= 2 channels")
    if not args.references:
        raise ConfigError("classify needs --references")
    refs_obj = json.loads(Path(args.references).read_text(encoding="utf-8"))
    references = {label: mcla.FrequencyDict.from_counts(
        {k: v for k, v in counts.items() if k != "total"})
        for label, counts in refs_obj.items()}
    excluded = set(args.exclude.split(",")) if args.exclude else set()
    excluded.discard("")
    total = len(bundle.multistream)
    size = args.window or total
    if size < 1:
        raise ConfigError(f"--window must be >= 1, got {size}")
    with open(outdir / "classify.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("start,end,label,score\n")
        for start in range(0, total, size):
            stop = min(start + size, total)
            fd = mcla.histogram(bundle.multistream, (start, stop))
            label, score = mcla.classify_operation(fd, references,
                                                   args.measure, excluded)
            fh.write(f"{start},{stop},{label},{score:.17g}\n")


def _cmd_match(bundle: PipelineBundle, config, outdir: Path, args) -> None:
    wrote = False
    for name, cr in bundle.channels.items():
        if cr.matches is not None:
            pattern.matches_to_csv(cr.matches, outdir / f"{name}.matches.csv")
            wrote = True
    if not wrote:
        raise ConfigError("match needs --pattern or per-channel 'pattern' entries")


_COMMANDS = {
    "derive": _cmd_derive,
    "solve": _cmd_solve,
    "symbolize": _cmd_symbolize,
    "combine": _cmd_combine,
    "hist": _cmd_hist,
    "classify": _cmd_classify,
    "match": _cmd_match,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="siglex", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", choices=sorted(_COMMANDS))
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--input", required=True, help="input CSV sensor log")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--channel", default=None, help="process only this channel")
    p.add_argument("--level", type=float, default=None,
                   help="confidence level override")
    p.add_argument("--pattern", default=None, help="symbol pattern override")
    p.add_argument("--references", default=None,
                   help="reference histograms JSON (classify)")
    p.add_argument("--window", type=int, default=None,
                   help="classification window length in samples")
    p.add_argument("--measure", default="l1", choices=("l1", "cosine"),
                   help="histogram similarity measure (classify)")
    p.add_argument("--exclude", default=None,
                   help="comma-separated combination keys to exclude (classify)")
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"siglex: usage error: {exc}", file=sys.stderr)
        return 1

    try:
        config = load_config(args.config)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        columns = {cc.csv_column for cc in config.channels
                   if args.channel is None or cc.name == args.channel}
        if args.channel is not None and not columns:
            raise ConfigError(f"unknown channel '{args.channel}'")
        ingested = ingest_csv(args.input, config.time_column, sorted(columns))
        bundle = run_pipeline(config, ingested, level=args.level,
                              pattern_override=args.pattern,
                              channel_filter=args.channel)
        _COMMANDS[args.command](bundle, config, outdir, args)
    except ConfigError as exc:
        print(f"siglex: usage error: {exc}", file=sys.stderr)
        return 1
    except PipelineError as exc:
        code = 2 if isinstance(exc.cause, _DATA_ERRORS) else 3
        print(f"siglex: error: {exc}", file=sys.stderr)
        return code
    except _DATA_ERRORS as exc:
        print(f"siglex: data error: {exc}", file=sys.stderr)
        return 2
    except (SiglexError, np.linalg.LinAlgError) as exc:
        print(f"siglex: numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"siglex: data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

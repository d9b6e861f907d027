"""Command-line entry point: simulate, serve, inspect, analyze.

Exit codes are stable: 0 success, 1 config error, 2 I/O error, 3 format
error, 4 missing required data.  Configuration is layered: built-in
defaults <- JSON config file <- command-line flags; the resolved snapshot
is written next to the outputs.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import signal
import sys
import threading
import time
from pathlib import Path

import click

from .errors import (
    BadMagic,
    BindFailure,
    InvalidConfig,
    MalformedHeaderXml,
    MissingStream,
    TruncatedChunk,
)
from .inlet import serve_inlet
from .pipeline import AnalysisConfig, analyze_session
from .report import write_reports
from .simulate import SimConfig, export_ground_truth, simulate_session
from .xdf import decode_session, encode_session, inspect

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_FORMAT = 3
EXIT_MISSING_DATA = 4


def _setup_logging():
    level = os.environ.get("COREG_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise click.exceptions.Exit(_fail(EXIT_IO, f"cannot read config: {exc}"))
    except json.JSONDecodeError as exc:
        raise click.exceptions.Exit(_fail(EXIT_CONFIG, f"config is not valid JSON: {exc}"))


def _fail(code: int, message: str) -> int:
    click.echo(f"error: {message}", err=True)
    return code


def _resolve_sim_config(file_cfg: dict, seed: int | None) -> SimConfig:
    params = dict(file_cfg.get("simulate", {}))
    if seed is not None:
        params["seed"] = seed
    known = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = set(params) - known
    if unknown:
        raise InvalidConfig(f"unknown simulate option(s): {sorted(unknown)}")
    for key in ("fixation_ms_means", "eeg_noise"):
        if key in params and isinstance(params[key], list):
            params[key] = tuple(params[key])
    if "clock" in params:
        params["clock"] = {k: tuple(v) for k, v in params["clock"].items()}
    cfg = SimConfig(**params)
    cfg.validate()
    return cfg


def _resolve_analysis_config(file_cfg: dict, seed, k_sentences) -> AnalysisConfig:
    params = dict(file_cfg.get("analyze", {}))
    if seed is not None:
        params["seed"] = seed
    if k_sentences is not None:
        params["k_sentences"] = k_sentences
    try:
        return AnalysisConfig.from_dict(params)
    except (KeyError, TypeError) as exc:
        raise InvalidConfig(str(exc)) from exc


@click.group()
def main():
    """Gaze-EEG co-registration toolkit for online news reading sessions."""
    _setup_logging()


@main.command()
@click.option("--config", "config_path", type=str, default=None, help="JSON config file.")
@click.option("--out", "out_dir", type=str, default=".", help="Output directory.")
@click.option("--seed", type=int, default=None, help="Override simulator seed.")
def simulate(config_path, out_dir, seed):
    """Generate a synthetic session: session.xdf plus session.truth.json."""
    file_cfg = _load_config_file(config_path)
    try:
        cfg = _resolve_sim_config(file_cfg, seed)
    except (InvalidConfig, TypeError, ValueError) as exc:
        sys.exit(_fail(EXIT_CONFIG, str(exc)))
    try:
        session, truth = simulate_session(cfg)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "session.xdf").write_bytes(encode_session(session))
        export_ground_truth(truth, out / "session.truth.json")
        with open(out / "config.json", "w", encoding="utf-8") as fh:
            json.dump({"simulate": dataclasses.asdict(cfg)}, fh, indent=1, sort_keys=True)
    except OSError as exc:
        sys.exit(_fail(EXIT_IO, str(exc)))
    click.echo(f"wrote {out / 'session.xdf'} and {out / 'session.truth.json'}")


@main.command()
@click.option("--listen", default="127.0.0.1:8765", help="HOST:PORT to bind.")
@click.option("--out", "out_path", type=str, default="recording.xdf", help="Output XDF path.")
@click.option("--flush-s", type=float, default=10.0, help="Snapshot flush period.")
def serve(listen, out_path, flush_s):
    """Record live inlet streams until interrupted, then finalize the XDF."""
    try:
        host, port_s = listen.rsplit(":", 1)
        port = int(port_s)
    except ValueError:
        sys.exit(_fail(EXIT_CONFIG, f"--listen must be HOST:PORT, got {listen!r}"))
    try:
        server = serve_inlet(host, port)
    except BindFailure as exc:
        sys.exit(_fail(EXIT_CONFIG, f"cannot bind {listen}: {exc}"))

    stop_requested = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop_requested.set())
    signal.signal(signal.SIGTERM, lambda *_: stop_requested.set())
    click.echo(f"inlet listening on ws://{host}:{server.port}/inlet; Ctrl-C to finalize")

    def flush():
        tmp = Path(out_path).with_suffix(".partial")
        tmp.write_bytes(server.encoded_session())
        os.replace(tmp, out_path)

    try:
        while not stop_requested.is_set():
            stop_requested.wait(flush_s)
            flush()
    finally:
        server.stop()
        try:
            flush()
        except OSError as exc:
            sys.exit(_fail(EXIT_IO, str(exc)))
    click.echo(f"wrote {out_path}")


@main.command("inspect")
@click.argument("xdf_path", type=str)
def inspect_cmd(xdf_path):
    """Print a per-stream summary of an XDF file."""
    try:
        data = Path(xdf_path).read_bytes()
    except OSError as exc:
        sys.exit(_fail(EXIT_IO, str(exc)))
    try:
        summary = inspect(data)
    except (BadMagic, TruncatedChunk, MalformedHeaderXml) as exc:
        sys.exit(_fail(EXIT_FORMAT, f"{type(exc).__name__}: {exc}"))
    click.echo(f"{'stream':<14}{'kind':<9}{'ch':>4}{'rate':>9}{'samples':>10}{'dur[s]':>9}{'probes':>8}")
    for s in summary["streams"]:
        click.echo(
            f"{s['stream_id']:<14}{s['kind']:<9}{s['channel_count']:>4}"
            f"{s['nominal_rate_hz']:>9.1f}{s['sample_count']:>10}"
            f"{s['duration_s']:>9.1f}{s['clock_offset_count']:>8}"
        )
    for w in summary["warnings"]:
        click.echo(f"warning: {w}", err=True)


@main.command()
@click.argument("xdf_path", type=str)
@click.option("--config", "config_path", type=str, default=None, help="JSON config file.")
@click.option("--out", "out_dir", type=str, default="analysis", help="Output directory.")
@click.option("--seed", type=int, default=None, help="Override analysis seed.")
@click.option("--k-sentences", type=int, default=None, help="Top-k longest-fixated sentences.")
def analyze(xdf_path, config_path, out_dir, seed, k_sentences):
    """Analyze a session file: features.csv, report.json, report.md, figures."""
    file_cfg = _load_config_file(config_path)
    try:
        cfg = _resolve_analysis_config(file_cfg, seed, k_sentences)
    except InvalidConfig as exc:
        sys.exit(_fail(EXIT_CONFIG, str(exc)))
    try:
        data = Path(xdf_path).read_bytes()
    except OSError as exc:
        sys.exit(_fail(EXIT_IO, str(exc)))
    try:
        session = decode_session(data)
    except (BadMagic, TruncatedChunk, MalformedHeaderXml) as exc:
        sys.exit(_fail(EXIT_FORMAT, f"{type(exc).__name__}: {exc}"))
    try:
        result = analyze_session(session, cfg)
    except MissingStream as exc:
        sys.exit(_fail(EXIT_MISSING_DATA, str(exc)))
    try:
        write_reports(result, out_dir, {"analyze": cfg.to_dict()})
    except OSError as exc:
        sys.exit(_fail(EXIT_IO, str(exc)))
    click.echo(f"analysis written to {out_dir}")


if __name__ == "__main__":
    main()

"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 quadrature
did not converge.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import re
import sys
import time
from decimal import Decimal
from pathlib import Path

from . import analysis, engine, feasibility, io, timing
from .config import UNITS, ConfigError, RunConfig, _parse_value, parse_config

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_CONVERGENCE = 0, 1, 2, 3
FORMATS = ("csv", "pgm", "report")

log = logging.getLogger("eprsim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _length(text: str) -> float:
    m = re.fullmatch(r"\s*\+?-?([0-9.eE+-]+)\s*([a-zµμ]+)\s*", text.replace("±", ""))
    if not m or m.group(2) not in UNITS["length"]:
        raise argparse.ArgumentTypeError(f"expected a length with unit, e.g. 0.75mm; got {text!r}")
    return float(Decimal(m.group(1)) * Decimal(UNITS["length"][m.group(2)]))


def _grid(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)x(\d+)", text.strip())
    if not m or min(int(m.group(1)), int(m.group(2))) < 1:
        raise argparse.ArgumentTypeError(f"expected <nA>x<nB>, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _formats(text: str) -> tuple[str, ...]:
    out = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = [f for f in out if f not in FORMATS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"formats must be from {','.join(FORMATS)}; got {text!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eprsim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="key = value unit file or manifest.json")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--window", type=_length, help="detector half-width, e.g. 0.75mm")

    def pattern_opts(sp):
        sp.add_argument("mode", choices=("dds", "ghost"))
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--grid", type=_grid, help="pixel counts <nA>x<nB>")
        sp.add_argument("--convolve-detector", action="store_true",
                        help="box-filter the pattern with the detector resolution")
        sp.add_argument("--formats", type=_formats, default=FORMATS)

    sim = sub.add_parser("simulate", help="compute, analyze and write one pattern")
    pattern_opts(sim)
    common(sim)

    sw = sub.add_parser("sweep", help="run simulate over a parameter grid")
    pattern_opts(sw)
    common(sw)
    sw.add_argument("--vary", action="append", required=True,
                    help="KEY=v1,v2,... [unit], e.g. 'S_x=25,50,100,200 um'; repeatable")

    fe = sub.add_parser("feasibility", help="evaluate the design-condition chain")
    common(fe)

    ti = sub.add_parser("timing", help="Monte Carlo of pair identification by arrival time")
    common(ti, config_required=False)
    ti.add_argument("--shots", type=int)

    an = sub.add_parser("analyze", help="re-analyze a pattern CSV")
    an.add_argument("csv")
    an.add_argument("--config", help="config or manifest (default: manifest.json next to the CSV)")
    an.add_argument("--out")
    return p


# -- config handling ----------------------------------------------------------

def _read_config(path, require=("mode", "L1", "L2", "d", "S_x")) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    if str(path).endswith(".json"):
        text = json.loads(text)["config_text"]
    return parse_config(text, require)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes = {}
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "window", None) is not None:
        changes["window"] = args.window
    if getattr(args, "grid", None) is not None:
        changes["grid_a"], changes["grid_b"] = args.grid
    if getattr(args, "shots", None) is not None:
        changes["shots"] = args.shots
    cfg = cfg.replace(**changes)
    # re-validate through the text form
    return parse_config(cfg.to_text())


def _sampling_override(cfg: RunConfig):
    steps = cfg.steps_override()
    if all(s is None for s in steps):
        return None
    source = cfg.source()
    if not cfg.integrate_z:
        source = type(source)(source.extent_x, source.extent_y, 0.0, source.weighting, source.sigma)
    auto = engine.auto_sampling(cfg.geometry(), source, cfg.grid(), cfg.beam().de_broglie_wavelength,
                                integrate_z=cfg.integrate_z)
    counts = [a if s is None else max(1, math.ceil(e / s - 1e-9))
              for s, e, a in zip(steps, source.extents, auto.counts)]
    sampling = engine.sample_source(source, counts)
    engine.check_sampling(sampling, cfg.geometry(), cfg.grid(), cfg.beam().de_broglie_wavelength, source)
    return sampling


# -- commands -----------------------------------------------------------------

def run_simulation(cfg: RunConfig, out_dir, formats=FORMATS, workers=1, convolve=False,
                   command="simulate") -> dict:
    """Engine + analysis + emit for one resolved config; returns the summary."""
    t0 = time.perf_counter()
    geom, source, beam, grid = cfg.geometry(), cfg.source(), cfg.beam(), cfg.grid()
    result = engine.integrate_converged(
        geom, source, grid, beam.de_broglie_wavelength, cfg.tolerance, workers,
        cfg.integrate_z, cfg.exact_prefactor, _sampling_override(cfg))
    pattern = result.pattern
    if convolve:
        pattern = analysis.convolve_detector(pattern, geom.detector_resolution)
    summary = analysis.summarize(pattern, geom, beam)
    summary["convergence_deviation"] = result.deviation
    summary["feasibility"] = feasibility.evaluate_chain(geom, source, beam).to_dict()
    manifest = io.RunManifest(
        config=cfg.to_dict(), config_text=cfg.to_text(),
        command=f"{command} {cfg.mode}" + (" --convolve-detector" if convolve else ""),
        quadrature_steps=list(pattern.sampling_steps), quadrature_counts=list(pattern.sampling_counts),
        convergence_deviation=result.deviation,
    )
    if out_dir is not None:
        paths = io.emit_pattern(pattern, out_dir, "pattern", formats, manifest, summary)
        manifest.outputs = [p.name for p in paths]
        manifest.wall_time = time.perf_counter() - t0
        io.write_manifest(out_dir, manifest)
    summary["manifest"] = manifest.hash
    return summary


def _print_summary(summary: dict, out=None):
    out = out or sys.stdout
    um = 1e6
    s = summary
    tp = s["two_particle_visibility"]
    print(f"mode {s['mode']}: rank-1 fraction {s['factorizability']['rank1_fraction']:.4f} "
          f"({s['factorizability']['correlation']})", file=out)
    for key in ("slice_A0_fit", "slice_B0_fit"):
        f = s[key]
        if "error" in f:
            print(f"{key}: {f['error']}", file=out)
        else:
            print(f"{key}: period {f['period'] * um:.1f} um, visibility {f['visibility']:.3f}", file=out)
    mv = s["marginal_visibility"]
    print(f"marginal visibility A {mv['A']}, B {mv['B']}", file=out)
    print(f"two-particle visibility raw {tp['raw']}, genuine {tp['genuine']} "
          f"(above classical bound: {s['above_classical_bound']})", file=out)
    if "convergence_deviation" in s:
        print(f"quadrature halving deviation {s['convergence_deviation']:.2e}", file=out)


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(_read_config(args.config), args)
    summary = run_simulation(cfg, args.out, args.formats, args.workers, args.convolve_detector)
    _print_summary(summary)
    return EXIT_OK


def _parse_vary(spec: str):
    if "=" not in spec:
        raise UsageError(f"--vary expects KEY=v1,v2,... [unit], got {spec!r}")
    key, rest = spec.split("=", 1)
    key = key.strip()
    parts = rest.strip().split()
    if len(parts) > 2 or not parts:
        raise UsageError(f"--vary expects KEY=v1,v2,... [unit], got {spec!r}")
    unit = f" {parts[1]}" if len(parts) == 2 else ""
    out = []
    for raw in parts[0].split(","):
        try:
            attr, value = _parse_value(key, raw + unit)
        except KeyError:
            raise UsageError(f"--vary: unknown key {key!r}") from None
        out.append((key, attr, value, raw + unit.replace(" ", "")))
    return out


def cmd_sweep(args) -> int:
    base = _apply_overrides(_read_config(args.config), args)
    axes = [_parse_vary(v) for v in args.vary]
    out = Path(args.out) if args.out else None
    index = []
    for combo in itertools.product(*axes):
        cfg = parse_config(base.replace(**{attr: value for _, attr, value, _ in combo}).to_text())
        name = "_".join(f"{key}-{label}" for key, _, _, label in combo)
        print(f"== {name}")
        summary = run_simulation(cfg, out / name if out else None, args.formats, args.workers,
                                 args.convolve_detector, command="sweep")
        _print_summary(summary)
        index.append({"run": name, "manifest": summary["manifest"]})
    if out:
        manifest = io.RunManifest(config=base.to_dict(), config_text=base.to_text(),
                                  command="sweep " + " ".join(sorted(args.vary)),
                                  outputs=[r["run"] for r in index])
        io.write_manifest(out, manifest)
        (out / "sweep.json").write_text(io.dumps_json(index) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_feasibility(args) -> int:
    cfg = _apply_overrides(_read_config(args.config), args)
    report = feasibility.evaluate_chain(cfg.geometry(), cfg.source(), cfg.beam())
    print(feasibility.format_report(report))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = io.RunManifest(config=cfg.to_dict(), config_text=cfg.to_text(), command="feasibility",
                                  outputs=["feasibility.report.json"])
        body = report.to_dict()
        body["manifest"] = manifest.hash
        (out / "feasibility.report.json").write_text(io.dumps_json(body) + "\n", encoding="utf-8")
        io.write_manifest(out, manifest)
    return EXIT_OK


def cmd_timing(args) -> int:
    cfg = _apply_overrides(_read_config(args.config, require=()), args)
    shot = cfg.shot_config()
    beam = cfg.beam()
    spread = timing.pair_time_spread(cfg.drop_height, beam.recoil_velocity, cfg.velocity_spread_z,
                                     cfg.gravity)
    shots = timing.simulate_shots(shot, cfg.shots)
    tot = timing.TimingSummary(cfg.shots, 0, 0, 0, 0)
    for events in shots:
        res = timing.identify_pairs(events, cfg.pairing_window)
        tot.events += res.n_events
        tot.true_pairs_detected += res.true_pairs_detected
        tot.identified += res.identified
        tot.correct += res.correct
    report = {
        "pair_time_spread": spread, "shots": tot.shots, "events": tot.events,
        "true_pairs_detected": tot.true_pairs_detected, "identified": tot.identified,
        "correct": tot.correct, "true_positive_rate": tot.true_positive_rate,
        "false_pair_rate": tot.false_pair_rate, "correct_pairs_per_shot": tot.correct_pairs_per_shot,
        "pairing_window": cfg.pairing_window,
    }
    print(f"pair time spread {spread * 1e3:.3f} ms; {tot.shots} shots, {tot.events} detections")
    print(f"true-positive rate {tot.true_positive_rate:.4f}, false-pair rate {tot.false_pair_rate:.4f}, "
          f"correct pairs per shot {tot.correct_pairs_per_shot:.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = io.RunManifest(config=cfg.to_dict(), config_text=cfg.to_text(), command="timing",
                                  outputs=["events.csv", "timing.report.json"])
        report["manifest"] = manifest.hash
        events = [e for s in shots for e in s]
        (out / "events.csv").write_text(timing.events_to_csv(events), encoding="utf-8")
        (out / "timing.report.json").write_text(io.dumps_json(report) + "\n", encoding="utf-8")
        io.write_manifest(out, manifest)
    return EXIT_OK


def cmd_analyze(args) -> int:
    path = Path(args.csv)
    try:
        pattern, _ = io.pattern_from_csv(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    cfg_path = args.config or path.with_name(io.MANIFEST_NAME)
    if not Path(cfg_path).exists():
        raise UsageError(f"no geometry: pass --config or place {io.MANIFEST_NAME} next to the CSV")
    cfg = _read_config(cfg_path)
    summary = analysis.summarize(pattern, cfg.geometry(), cfg.beam())
    _print_summary(summary)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "analysis.report.json").write_text(io.dumps_json(summary) + "\n", encoding="utf-8")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "feasibility": cmd_feasibility,
            "timing": cmd_timing, "analyze": cmd_analyze}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"eprsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"eprsim: invalid configuration:\n{exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except engine.ConvergenceError as exc:
        print(f"eprsim: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (engine.SamplingError, ValueError) as exc:
        print(f"eprsim: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"eprsim: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

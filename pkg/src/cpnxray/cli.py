"""``verify``: run verification suites and render their reports.

    verify <suite> [flags]        run one suite (or ``all``)
    verify report --input R.json  render a saved report (``--format md|json``)
    verify list-suites

Exit codes: 0 all checks passed, 1 some check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone

from . import suites as su

SUITES = {
    "curvature": "constant holomorphic curvature",
    "xray-forward": "zero-energy identity",
    "complex-property": "complex property",
    "coefficients": "real-projective compatibility",
    "lemma10": "splitting lemma",
    "tractor": "tractor identities",
    "cohomology": "heisenberg cohomology",
    "pipeline": "proof pipeline",
}

DEFAULT_TOLERANCES = {
    "curvature": 1e-8,
    "zero-energy": 1e-9,
    "segment": 1e-9,
    "complex-property": 1e-7,
    "coefficients": 1e-10,
    "lemma10": 1e-10,
    "lagrangian": 1e-9,
    "tractor-flat": 1e-9,
    "tractor-curvature": 1e-8,
    "holonomy": 1e-7,
    "obstruction-row1": 1e-8,
    "obstruction-x": 1e-7,
    "witness": 1e-9,
    "pipeline": 1e-10,
}


class ConfigError(ValueError):
    pass


@dataclass
class SuiteConfig:
    n: int = 2
    ell: tuple[int, ...] = (1, 2, 3)
    seed: int = 42
    samples: int = 50
    geodesics: int = 100
    potentials: int = 20
    N: int = 512
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output: str | None = None
    format: str = "json"

    def validate(self) -> "SuiteConfig":
        if self.n not in (2, 3):
            raise ConfigError("n must be 2 or 3")
        if not self.ell or any(e not in (1, 2, 3) for e in self.ell):
            raise ConfigError("ell values must lie in {1, 2, 3}")
        for name in ("samples", "geodesics", "potentials"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.N < 16 or self.N & (self.N - 1):
            raise ConfigError("N must be a power of two >= 16")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")
        if any(not (v > 0) for v in self.tolerances.values()):
            raise ConfigError("tolerances must be positive")
        if self.format not in ("json", "md"):
            raise ConfigError("format must be json or md")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ell"] = list(self.ell)
        return d


def _parse_ell(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad ell list {text!r}") from exc


def load_config(path: str | None) -> SuiteConfig:
    """Defaults, overlaid by an INI-style file with ``[verify]`` and ``[tolerances]`` sections."""
    cfg = SuiteConfig()
    if path is None:
        return cfg
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path!r}")
    updates = {}
    if cp.has_section("verify"):
        # INI keys are case-insensitive, so the node count is spelled "nodes"
        int_keys = {"n": "n", "seed": "seed", "samples": "samples", "geodesics": "geodesics", "potentials": "potentials", "nodes": "N"}
        for key, raw in cp["verify"].items():
            try:
                if key == "ell":
                    updates["ell"] = _parse_ell(raw)
                elif key in ("output", "format"):
                    updates[key] = raw
                elif key in int_keys:
                    updates[int_keys[key]] = int(raw)
                else:
                    raise ConfigError(f"unknown config key {key!r}")
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
    tol = dict(cfg.tolerances)
    if cp.has_section("tolerances"):
        for key, raw in cp["tolerances"].items():
            try:
                tol[key] = float(raw)
            except ValueError as exc:
                raise ConfigError(f"bad tolerance {key!r}: {raw!r}") from exc
    return replace(cfg, tolerances=tol, **updates)


# ---------------------------------------------------------------------------
# suites


@dataclass
class SuiteReport:
    suite: str
    anchor: str
    passed: bool
    max_residual: float
    seed: int
    checks: list
    runtime: float = 0.0

    def payload(self) -> dict:
        return {
            "suite": self.suite,
            "anchor": self.anchor,
            "passed": self.passed,
            "max_residual": self.max_residual,
            "seed": self.seed,
            "checks": [c.payload() for c in self.checks],
        }


def _checks_for(name: str, cfg: SuiteConfig) -> list:
    t = cfg.tolerances
    n, ells, seed = cfg.n, cfg.ell, cfg.seed
    if name == "curvature":
        return [su.check_curvature(ns=(n,), samples=cfg.samples, seed=seed, tol=t["curvature"])]
    if name == "xray-forward":
        return [
            su.check_zero_energy(n, ells, cfg.potentials, cfg.geodesics, cfg.N, seed, t["zero-energy"]),
            su.check_segments(n, cfg.samples, seed=seed, tol=t["segment"]),
            su.check_witness(n, cfg.geodesics, cfg.N, seed=seed, tol=t["witness"]),
        ]
    if name == "complex-property":
        return [su.check_complex_property(n, ells, cfg.samples, seed, t["complex-property"])]
    if name == "coefficients":
        return [su.check_coefficients(seed=seed, tol=t["coefficients"])]
    if name == "lemma10":
        return [
            su.check_lemma10((n,), seed=seed, tol=t["lemma10"]),
            su.check_lagrangian_equivalence((n,), seed=seed, tol=t["lagrangian"]),
        ]
    if name == "tractor":
        return [
            su.check_tractors((n,), seed=seed, tol_flat=t["tractor-flat"], tol_curv=t["tractor-curvature"], tol_hol=t["holonomy"]),
            su.check_obstruction(n, cfg.potentials, seed=seed, tol_row1=t["obstruction-row1"], tol_x=t["obstruction-x"]),
        ]
    if name == "cohomology":
        return [su.check_cohomology(((n, 1), (n, 2)))]
    if name == "pipeline":
        return [su.check_pipeline(n, ells, seed=seed, tol=t["pipeline"])]
    raise ConfigError(f"unknown suite {name!r}")


def run_suite(name: str, cfg: SuiteConfig) -> SuiteReport:
    t0 = time.perf_counter()
    checks = _checks_for(name, cfg)
    return SuiteReport(
        suite=name,
        anchor=SUITES[name],
        passed=all(c.passed for c in checks),
        max_residual=max(c.residual for c in checks),
        seed=cfg.seed,
        checks=checks,
        runtime=time.perf_counter() - t0,
    )


def build_document(reports: list[SuiteReport], cfg: SuiteConfig) -> dict:
    """Deterministic payload plus a separate ``timing`` field."""
    return {
        "config": cfg.to_dict(),
        "passed": all(r.passed for r in reports),
        "reports": [r.payload() for r in reports],
        "timing": {
            "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "runtime_s": {r.suite: {"total": r.runtime, **{c.name: c.runtime for c in r.checks}} for r in reports},
        },
    }


def to_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, default=str)


def to_markdown(doc: dict) -> str:
    lines = ["| suite | anchor | check | residual | tol | result |", "|---|---|---|---|---|---|"]
    for rep in doc["reports"]:
        for c in rep["checks"]:
            verdict = "PASS" if c["passed"] else "FAIL"
            lines.append(f"| {rep['suite']} | {c['anchor']} | {c['name']} | {c['residual']:.3e} | {c['tol']:.1e} | {verdict} |")
    lines.append("")
    lines.append(f"overall: {'PASS' if doc['passed'] else 'FAIL'}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# argument parsing


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="INI file with [verify] and [tolerances] sections")
    p.add_argument("--n", type=int)
    p.add_argument("--ell", help="comma separated, e.g. 1,2,3")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--geodesics", type=int)
    p.add_argument("--potentials", type=int)
    p.add_argument("--N", type=int, dest="N")
    p.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE", help="override one tolerance")
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "md"))
    p.add_argument("--show-config", action="store_true", help="print the effective config and exit")
    return p


def _effective_config(args) -> SuiteConfig:
    cfg = load_config(args.config)
    updates = {}
    for key in ("n", "seed", "samples", "geodesics", "potentials", "N", "output", "format"):
        val = getattr(args, key, None)
        if val is not None:
            updates[key] = val
    if args.ell is not None:
        updates["ell"] = _parse_ell(args.ell)
    tol = dict(cfg.tolerances)
    for item in args.tol:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects KEY=VALUE, got {item!r}")
        try:
            tol[key] = float(raw)
        except ValueError as exc:
            raise ConfigError(f"bad tolerance {item!r}") from exc
    return replace(cfg, tolerances=tol, **updates).validate()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="verify", description="Run numerical verification suites.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    for name in list(SUITES) + ["all"]:
        sub.add_parser(name, parents=[common], help=f"run the {name} suite" if name != "all" else "run every suite")
    rep = sub.add_parser("report", parents=[common], help="render a saved JSON report, or run every suite")
    rep.add_argument("--input", help="JSON report written by a previous run")
    sub.add_parser("list-suites", help="list suite names and anchors")
    return parser


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list-suites":
        for name, anchor in SUITES.items():
            print(f"{name}\t{anchor}")
        return 0
    try:
        cfg = _effective_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.show_config:
        print(to_json(cfg.to_dict()))
        return 0
    if args.command == "report" and args.input:
        try:
            with open(args.input, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: cannot read report: {exc}", file=sys.stderr)
            return 2
    else:
        names = list(SUITES) if args.command in ("all", "report") else [args.command]
        doc = build_document([run_suite(nm, cfg) for nm in names], cfg)
    _emit(to_markdown(doc) if cfg.format == "md" else to_json(doc), cfg.output)
    return 0 if doc["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())

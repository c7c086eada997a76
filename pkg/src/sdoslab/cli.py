"""Batch driver: YAML experiment config in, CSV rows plus a JSON manifest out.

Exit status: 0 on success, 2 for configuration errors (unknown keys are named),
3 when a computation refuses (unsafe box, degree too small, dense limit, ...).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import __version__, kernels
from .fourier import TensorBump, riemann_transform_gap, trace_leakage, transform_decay_sup
from .funcalc import TestFunction, broad_function, probe_function
from .hamiltonian import assemble
from .lattice import BoxSpec, LatticeSpec
from .potential import (cosine_potential, demo_potential, potential_from_records, quasiperiodic_potential,
                        zero_potential)
from .sdos import bohr_bound, bohr_mean, decay_scan, site_traces, surface_dos, sweep

log = logging.getLogger("sdoslab")

HEADER = ["kind", "h", "L", "Lp", "buffer", "method", "degree", "value", "gap", "rate", "asymptote", "flag"]
KINDS = ["sweep-L", "sweep-Lp", "sweep-h", "bohr", "decay-scan", "oracle-compare", "fourier-diagnostics"]


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_num = {"type": "number"}
_int = {"type": "integer"}
_num_or_list = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 1}]}
_amp = {"oneOf": [_num, {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}]}

SCHEMA = _obj({
    "kind": {"enum": KINDS},
    "name": {"type": "string"},
    "lattice": _obj({"d1": {"type": "integer", "minimum": 1}, "d2": {"type": "integer", "minimum": 1},
                     "h": _num_or_list}, ["h"]),
    "box": _obj({"L": _num_or_list, "Lp": _num_or_list,
                 "buffer": {"type": "integer", "minimum": 0}, "buffer_length": {"type": "number", "minimum": 0},
                 "bc": {"enum": ["dirichlet", "periodic-x1", "periodic"]}}),
    "potential": _obj({
        "preset": {"enum": ["demo", "zero", "cosine", "quasiperiodic"]},
        "gamma": _num_or_list, "a0": _num, "a1": _num, "a": _num, "power": _num,
        "bracket": {"enum": ["abs", "japanese"]},
        "modes": {"type": "array", "items": _obj({
            "gamma": _num_or_list,
            "profile": _obj({"kind": {"enum": ["bump", "polynomial", "envelope"]},
                             "params": _obj({"center": _num_or_list, "width": _num, "amplitude": _amp,
                                             "weights": {"type": "array"}, "taper": _num, "power": _num,
                                             "bracket": {"enum": ["abs", "japanese"]}})}, ["kind"]),
        }, ["gamma", "profile"])},
        "C": _num, "delta0": _num,
    }),
    "test_function": _obj({
        "preset": {"enum": ["probe", "broad"]},
        "kind": {"enum": ["plateau-bump", "gaussian-bump", "polynomial-bump"]},
        "a": _num, "b": _num, "taper": _num, "center": _num, "width": _num,
        "coeffs": {"type": "array", "items": _num},
    }),
    "method": _obj({"name": {"enum": ["dense", "kpm"]}, "degree": {"type": "integer", "minimum": 8},
                    "damping": {"enum": ["none", "jackson"]}, "reference": {"enum": ["box", "brillouin"]},
                    "tol": _num, "buffer_check": {"type": "boolean"}}),
    "quadrature": _obj({"Q": {"type": "integer", "minimum": 16}}),
    "sweep": _obj({"reference_Lp": _num, "reference_L": _num}),
    "bohr": _obj({"gammas": {"type": "array", "items": _num_or_list, "minItems": 1},
                  "random": _int, "seed": _int, "min_distance": _num,
                  "L": {"type": "array", "items": _int, "minItems": 1}}),
    "decay": _obj({"y1": _num_or_list, "y2": {"type": "array", "items": _num_or_list, "minItems": 1}}),
    "fourier": _obj({"radius": _num, "riemann_h": {"type": "array", "items": _num, "minItems": 1},
                     "decay_h": {"type": "array", "items": _num, "minItems": 1},
                     "T": {"type": "array", "items": _num, "minItems": 1}, "leak_h": _num, "leak_L": _num,
                     "theta_radius": _num, "decay_radius": _num}),
    "output": _obj({"dir": {"type": "string"}}),
}, ["kind", "lattice"])


class ConfigError(Exception):
    pass


def validate_config(cfg) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    for err in errors:
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            where = ".".join(str(p) for p in err.absolute_path) or "<top level>"
            raise ConfigError(f"unknown config key {extra[0]!r} in {where}")
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "<top level>"
        raise ConfigError(f"invalid config at {where}: {err.message}")
    return cfg


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    return validate_config(cfg)


def _list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _scalar(x, what):
    if isinstance(x, (list, tuple)):
        if len(x) != 1:
            raise ConfigError(f"{what} must be a single value for this experiment kind")
        return x[0]
    return x


def build_potential(cfg: dict, d1: int, d2: int):
    pc = cfg.get("potential", {"preset": "zero"})
    if "modes" in pc:
        return potential_from_records(pc["modes"], d1, d2, pc.get("C", 1.0), pc.get("delta0", 1.0))
    preset = pc.get("preset", "zero")
    if preset == "zero":
        return zero_potential(d1, d2)
    if preset == "demo":
        p = demo_potential()
    elif preset == "quasiperiodic":
        p = quasiperiodic_potential(pc.get("a", 0.5), pc.get("power", 2.0))
    else:
        kw = {k: pc[k] for k in ("a0", "a1", "power", "bracket", "C", "delta0") if k in pc}
        p = cosine_potential(pc.get("gamma", math.pi / 2), d2=d2, **kw)
    if (p.d1, p.d2) != (d1, d2):
        raise ConfigError(f"potential preset {preset!r} has dimensions ({p.d1}, {p.d2}), lattice has ({d1}, {d2})")
    return p


def build_function(cfg: dict) -> TestFunction:
    fc = dict(cfg.get("test_function", {"preset": "probe"}))
    preset = fc.pop("preset", None)
    if preset == "probe":
        return probe_function()
    if preset == "broad":
        return broad_function()
    try:
        return TestFunction(**fc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid test_function: {exc}") from None


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if math.isfinite(x) else ("nan" if math.isnan(x) else repr(float(x)))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


class Runner:
    def __init__(self, cfg: dict, threads: int = 1):
        self.cfg = cfg
        self.threads = max(1, int(threads))
        lat = cfg["lattice"]
        self.d1, self.d2 = lat.get("d1", 1), lat.get("d2", 1)
        self.hs = [float(h) for h in _list(lat["h"])]
        box = cfg.get("box", {})
        self.Ls = [float(v) for v in _list(box.get("L", 1))]
        self.Lps = [float(v) for v in _list(box.get("Lp", 1))]
        self.buffer = box.get("buffer")
        self.buffer_length = box.get("buffer_length")
        self.bc = box.get("bc", "dirichlet")
        self.potential = build_potential(cfg, self.d1, self.d2)
        self.f = build_function(cfg)
        m = cfg.get("method", {})
        self.method = m.get("name", "dense")
        self.degree = m.get("degree")
        self.damping = m.get("damping", "none")
        self.reference = m.get("reference", "box")
        self.tol = m.get("tol", 1e-4)
        self.buffer_check = m.get("buffer_check", False)
        self.rows = []
        self.stages = {}
        self.stability = []

    def spec(self, h):
        return LatticeSpec(self.d1, self.d2, h)

    def buffer_sites(self, h):
        if self.buffer_length is not None:
            return int(round(self.buffer_length / h))
        return int(self.buffer if self.buffer is not None else 0)

    def trace_kw(self):
        return dict(degree=self.degree, damping=self.damping, reference=self.reference, tol=self.tol,
                    threads=self.threads)

    def row(self, h, L, Lp, buffer, value, gap=None, rate=None, asym=None, flag="", method=None, degree=None):
        self.rows.append([self.cfg["kind"], h, L, Lp, buffer, method or self.method,
                          degree if degree is not None else (self.degree if (method or self.method) == "kpm" else None),
                          value, gap, rate, asym, flag])

    # experiment kinds

    def _sweep_rows(self, rep, make_row):
        n = len(rep.samples)
        for i, (p, v) in enumerate(rep.samples):
            if rep.reference is not None:
                gap = abs(v - rep.reference)
            elif rep.parameter == "h":
                gap = rep.cauchy_gaps[i - 1] if i > 0 else None
            else:
                gap = rep.cauchy_gaps[i] if i < n - 1 else None
            make_row(p, v, gap, rep.fitted_rate, rep.asymptote, ";".join(rep.flags))

    def _functional(self, h, L, Lp, buffer):
        spec = self.spec(h)
        ham = assemble(spec, BoxSpec(L, Lp, buffer), self.potential, self.bc)
        res = surface_dos(ham, self.f, L, Lp, method=self.method, buffer_check=self.buffer_check, **self.trace_kw())
        if res.buffer_change is not None:
            self.stability.append({"h": h, "L": L, "Lp": Lp, "buffer": buffer, "change": res.buffer_change})
        return res

    def sweep_L(self):
        h, Lp = _scalar(self.hs, "lattice.h"), _scalar(self.Lps, "box.Lp")
        b = self.buffer_sites(h)
        Lmax = max(self.Ls)
        ham = assemble(self.spec(h), BoxSpec(Lmax, Lp, b), self.potential, self.bc)
        tr = site_traces(ham, self.f, method=self.method, **self.trace_kw())
        degree = tr.degree
        rep = sweep("L", self.Ls, lambda L: surface_dos(ham, self.f, L, Lp, traces=tr, min_margin=b).value)
        self._sweep_rows(rep, lambda p, v, g, r, a, fl: self.row(h, p, Lp, b, v, g, r, a, fl, degree=degree))

    def sweep_Lp(self):
        h, L = _scalar(self.hs, "lattice.h"), _scalar(self.Ls, "box.L")
        b = self.buffer_sites(h)
        ref_Lp = self.cfg.get("sweep", {}).get("reference_Lp")
        Lpmax = max(self.Lps + ([ref_Lp] if ref_Lp else []))
        ham = assemble(self.spec(h), BoxSpec(L, Lpmax, b), self.potential, self.bc)
        tr = site_traces(ham, self.f, method=self.method, **self.trace_kw())
        ev = lambda Lp: surface_dos(ham, self.f, L, Lp, traces=tr, min_margin=b).value  # noqa: E731
        ref = ev(ref_Lp) if ref_Lp else None
        rep = sweep("Lp", self.Lps, ev, reference=ref)
        self._sweep_rows(rep, lambda p, v, g, r, a, fl: self.row(h, L, p, b, v, g, r, a, fl, degree=tr.degree))

    def sweep_h(self):
        L, Lp = _scalar(self.Ls, "box.L"), _scalar(self.Lps, "box.Lp")
        cache = {}

        def ev(h):
            res = self._functional(h, L, Lp, self.buffer_sites(h))
            cache[h] = res
            return res.value

        rep = sweep("h", self.hs, ev)
        self._sweep_rows(rep, lambda p, v, g, r, a, fl: self.row(p, L, Lp, self.buffer_sites(p), v, g, r, a, fl,
                                                                 degree=cache[p].degree))

    def oracle_compare(self):
        h, L, Lp = _scalar(self.hs, "lattice.h"), _scalar(self.Ls, "box.L"), _scalar(self.Lps, "box.Lp")
        b = self.buffer_sites(h)
        ham = assemble(self.spec(h), BoxSpec(L, Lp, b), self.potential, self.bc)
        kw = self.trace_kw()
        dense = surface_dos(ham, self.f, L, Lp, method="dense", **kw)
        kpm = surface_dos(ham, self.f, L, Lp, method="kpm", **kw)
        cube_gap = max(abs(dense.per_cube[y] - kpm.per_cube[y]) for y in dense.per_cube)
        flag = f"kpm={_fmt(kpm.value)};max_cube_gap={_fmt(cube_gap)}"
        self.row(h, L, Lp, b, dense.value, abs(dense.value - kpm.value), flag=flag, method="dense-vs-kpm",
                 degree=kpm.degree)

    def bohr(self):
        bc = self.cfg.get("bohr", {})
        gammas = [_list(g) for g in bc.get("gammas", [])]
        n_rand = bc.get("random", 0)
        if n_rand:
            rng = np.random.default_rng(bc.get("seed", 0))
            dmin = bc.get("min_distance", 0.1)
            while n_rand:
                g = rng.uniform(-np.pi, np.pi, self.d1)
                if np.all(np.abs(np.exp(1j * g) - 1.0) >= dmin):
                    gammas.append(g.tolist())
                    n_rand -= 1
        for g in gammas:
            if len(g) != self.d1:
                raise ConfigError(f"bohr gamma {g} must have length d1 = {self.d1}")
            for L in bc.get("L", [1, 10, 100, 1000]):
                m = bohr_mean(g, L)
                bound = bohr_bound(g, L)
                ok = abs(m) <= bound * (1 + 1e-12)
                gs = ",".join(_fmt(float(x)) for x in g)
                self.row(None, L, None, None, abs(m), flag=f"gamma={gs};bound={_fmt(bound)};{'ok' if ok else 'violated'}",
                         method="exact")

    def decay(self):
        h, L, Lp = _scalar(self.hs, "lattice.h"), _scalar(self.Ls, "box.L"), _scalar(self.Lps, "box.Lp")
        dc = self.cfg.get("decay", {})
        y1 = [float(v) for v in _list(dc.get("y1", [0.0] * self.d1))]
        y2s = [[float(v) for v in _list(y)] for y in dc.get("y2", [[float(k)] for k in range(2, 11)])]
        b = self.buffer_sites(h)
        ham = assemble(self.spec(h), BoxSpec(L, Lp, b), self.potential, self.bc)
        kw = self.trace_kw()
        scan = decay_scan(ham, self.f, y1, y2s, method=self.method, **kw)
        for y, mag in zip(y2s, scan.magnitude):
            ys = ",".join(_fmt(v) for v in y)
            self.row(h, L, Lp, b, float(mag), rate=scan.exponent, flag=f"y2={ys}" + (";" + scan.flag if scan.flag else ""))
        if self.buffer_check:
            ham2 = assemble(self.spec(h), BoxSpec(L, Lp, 2 * b), self.potential, self.bc)
            scan2 = decay_scan(ham2, self.f, y1, y2s, method=self.method, **kw)
            self.stability.append({"h": h, "buffer": b, "exponent": scan.exponent, "exponent_2x": scan2.exponent,
                                   "change": abs(scan2.exponent - scan.exponent)})

    def fourier(self):
        fc = self.cfg.get("fourier", {})
        d = self.d1 + self.d2
        theta = TensorBump(d, fc.get("radius", 1.0))
        hs = fc.get("riemann_h", [0.25, 0.125, 0.0625])
        gaps = [riemann_transform_gap(theta, h, np.zeros(d)) for h in hs]
        for i, (h, g) in enumerate(zip(hs, gaps)):
            ratio = gaps[i - 1] / g if i > 0 and g > 0 else None
            self.row(h, None, None, None, g, flag="riemann" + (f";ratio={_fmt(ratio)}" if ratio else ""), method="exact")
        wide = TensorBump(d, fc.get("decay_radius", 6.0))
        for h in fc.get("decay_h", [1.0, 0.5, 0.25]):
            self.row(h, None, None, None, transform_decay_sup(wide, h), flag="decay-sup", method="exact")
        h = fc.get("leak_h", 0.25)
        Lb = fc.get("leak_L", 2.0)
        ham = assemble(self.spec(h), BoxSpec(Lb, Lb, 0), self.potential, "periodic")
        Ts = fc.get("T", [2.0, 4.0, 8.0])
        leak = trace_leakage(ham, self.f, TensorBump(d, fc.get("theta_radius", 1.5)), Ts)
        for T, val in zip(Ts, leak):
            self.row(h, Lb, Lb, 0, float(val), flag=f"leakage;T={_fmt(float(T))}", method="dense")

    def run(self):
        kind = self.cfg["kind"]
        fn = {"sweep-L": self.sweep_L, "sweep-Lp": self.sweep_Lp, "sweep-h": self.sweep_h, "bohr": self.bohr,
              "decay-scan": self.decay, "oracle-compare": self.oracle_compare,
              "fourier-diagnostics": self.fourier}[kind]
        t0 = time.perf_counter()
        fn()
        self.stages[kind] = time.perf_counter() - t0
        return self.rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def run(config_path, out_dir=None, threads=None, verbose=False) -> int:
    """Run one experiment config; returns the process exit status."""
    if threads is None:
        threads = int(os.environ.get("SDOS_THREADS", "1"))
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, yaml.YAMLError) as exc:
        print(f"config error: cannot read {config_path}: {exc}", file=sys.stderr)
        return 2
    name = cfg.get("name", Path(config_path).stem)
    out = Path(out_dir or cfg.get("output", {}).get("dir", "sdos_out"))
    started = datetime.now(timezone.utc).isoformat()
    try:
        runner = Runner(cfg, threads)
        # BLAS stays single-threaded so dense results do not depend on the machine's core count
        with threadpool_limits(limits=1):
            rows = runner.run()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 3
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    csv_path.write_text(rows_to_csv(rows))
    manifest = {
        "tool": "sdoslab", "version": __version__, "backend": kernels.BACKEND, "threads": runner.threads,
        "started": started, "finished": datetime.now(timezone.utc).isoformat(),
        "config": cfg, "csv": csv_path.name, "rows": len(rows), "stage_seconds": runner.stages,
        "buffer_stability": runner.stability,
    }
    (out / f"{name}.manifest.json").write_text(json.dumps(manifest, indent=2, default=str))
    log.info("wrote %d rows to %s", len(rows), csv_path)
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sdoslab", description="Surface density of states experiments.")
    ap.add_argument("--config", required=True, help="experiment config (YAML)")
    ap.add_argument("--out-dir", help="output directory (overrides output.dir)")
    ap.add_argument("--threads", type=int, help="worker threads (default: SDOS_THREADS or 1)")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return run(args.config, args.out_dir, args.threads, args.verbose)


if __name__ == "__main__":
    sys.exit(main())

"""Experiment runner: dispatch a config, write CSV outputs and a manifest.

Each run writes its CSV files plus ``manifest.json`` into ``config.out``.
CSV payloads depend only on the config (seed included), never on the
thread count or the clock; timing lives in the manifest alone.
"""
from dataclasses import dataclass, field
import csv
import hashlib
import json
import os
import time

import numpy as np

from . import __version__, rng
from .csvio import csv_text
from .errors import ConfigError, MissingOutput
from .field import FieldSample, sample_field, validate_field_spec
from .gibbs import PdParams, RankedWeights, pd_sample, ranked, weight_stats
from .legendre import asymptotic_solve, coupled_solve
from .mgf import limit_mgf, mgf_n
from .process import ThinningSpec, Window, compare_stats, retained_energies, run_replicates, RealizedProcess
from .tails import exact_tail, exact_tail_levels, sharp_tail, tilted_tail
from . import verify

MANIFEST = "manifest.json"
PD_TRUNCATION = 1000
STAT_BINS = 8


@dataclass(frozen=True)
class RunManifest:
    config: str  # text form of the config
    version: str
    seeds: dict  # purpose -> derived key, as decimal strings
    wall_clock: float
    files: dict  # file name -> sha256 hex digest
    out: str
    acceptance: tuple = ()  # (criterion number, passed) for verify runs
    timing: dict = field(default_factory=dict)

    @property
    def failed(self):
        return tuple(k for k, ok in self.acceptance if not ok)

    def to_json(self):
        return json.dumps({
            "config": self.config, "version": self.version, "seeds": self.seeds,
            "wall_clock_seconds": self.wall_clock, "timing_seconds": self.timing,
            "files": self.files, "acceptance": [list(a) for a in self.acceptance],
        }, indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, out):
        path = os.path.join(out, MANIFEST)
        if not os.path.exists(path):
            raise MissingOutput(f"no manifest at {path}")
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(d["config"], d["version"], d["seeds"], d["wall_clock_seconds"], d["files"],
                   out, tuple(tuple(a) for a in d["acceptance"]), d.get("timing_seconds", {}))


def sha256_file(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _field(cfg, index=None):
    if cfg.h_file is not None:
        try:
            with open(cfg.h_file, encoding="utf-8") as fh:
                return FieldSample.from_csv(fh.read(), cfg.m)
        except (OSError, ValueError, IndexError) as exc:
            raise ConfigError(f"cannot read h_file {cfg.h_file!r}: {exc}") from exc
    seed = cfg.seed if index is None else rng.derive_key(cfg.seed, "replicate-field", index)
    return sample_field(cfg.field, cfg.n, seed, cfg.m)


def _lambda_tilde(cfg):
    return asymptotic_solve(cfg.field, cfg.bias, cfg.thinning.c).lambda_hat


# -- commands ----------------------------------------------------------------

def _moments(cfg):
    ms = validate_field_spec(cfg.field, cfg.m)
    rows = [("psi1", ms.psi1), ("psi2", ms.psi2), ("psi3", ms.psi3), ("psi4", ms.psi4),
            ("varsigma", ms.varsigma), ("gamma", ms.gamma)]
    rows += [(k, v) for k, v in sorted(ms.constants.items())]
    if cfg.h_file is not None:
        h = _field(cfg)
        rows += [("n", h.n), ("Sigma_n", h.sigma_n), ("Gamma_n", h.gamma_n)]
    return {"moments.csv": csv_text(["quantity", "value"], rows)}


def _mgf(cfg):
    lo, hi, steps = cfg.lambda_grid
    lams = np.linspace(lo, hi, int(steps))
    if cfg.h_file is not None:
        h = _field(cfg)
        evals = [mgf_n(h, cfg.bias, lam) for lam in lams]
        header = ["lambda", "M", "M1", "M2"]
    else:
        evals = [limit_mgf(cfg.field, cfg.bias, lam) for lam in lams]
        header = ["lambda", "G", "G1", "G2"]
    return {"mgf.csv": csv_text(header, [(l, e.value, e.d1, e.d2) for l, e in zip(lams, evals)])}


def _solve(cfg):
    h = _field(cfg)
    C = h.n * cfg.thinning.c if cfg.C is None else cfg.C
    sol = coupled_solve(h, cfg.bias, C, cfg.x)
    br = sol.bracket
    header = ["n", "C", "x", "a_tilde", "tilt_tilde", "tilt_x", "a_minus", "a_plus", "lowered"]
    header += [f"residual_{i}" for i in range(len(sol.residuals))]
    row = (h.n, C, sol.x, sol.a_tilde, sol.tilt_tilde, sol.tilt_x, br.a_minus, br.a_plus, br.lowered)
    return {"solve.csv": csv_text(header, [row + tuple(sol.residuals)])}


def _tail_one(cfg, h, a):
    if cfg.method == "exact":
        return exact_tail(h, cfg.bias, a, cfg.threads)
    if cfg.method == "tilted":
        return tilted_tail(h, cfg.bias, a, cfg.samples, rng.derive_key(cfg.seed, "tail"), cfg.threads)
    return sharp_tail(h, cfg.bias, a)


def _tail(cfg):
    if not cfg.n_grid:
        est = _tail_one(cfg, _field(cfg), cfg.a)
        return {"tail.csv": csv_text(["method", "a", "value", "stderr", "meta"],
                                     [(est.method, cfg.a, est.value, est.stderr, est.meta)])}
    frac = 0.45 if cfg.a is None else cfg.a
    rows = []
    for n in cfg.n_grid:
        h = sample_field(cfg.field, n, rng.derive_key(cfg.seed, "tail-grid", n), cfg.m)
        a = frac * h.sigma_n
        exact = float(exact_tail_levels(h, cfg.bias, [a], cfg.threads)[0])
        J = sharp_tail(h, cfg.bias, a).value
        rows.append((n, frac, a, exact, J, exact / J, abs(exact / J - 1)))
    return {"convergence.csv": csv_text(
        ["n", "a_over_sigma", "a", "exact", "J", "ratio", "abs_error"], rows)}


def _replicates(cfg, beta=None):
    """Per replicate: centred points in the window and, if ``beta``, ranked weights."""
    lam = _lambda_tilde(cfg)
    window = cfg.window or Window.default(lam)
    fixed = _field(cfg) if cfg.h_file is not None else None
    spec = cfg.thinning if fixed is None else ThinningSpec(cfg.rho, cfg.m, fixed.n)
    C = spec.n * spec.c

    def job(r):
        h = fixed if fixed is not None else _field(cfg, r)
        sol = coupled_solve(h, cfg.bias, C)
        energies = retained_energies(h, cfg.bias, spec, rng.derive_key(cfg.seed, "replicate-thin", r))
        centred = energies - sol.a_tilde
        pts = np.sort(centred[(centred >= window.x_lo) & (centred <= window.x_hi)])
        w = ranked(energies, beta) if beta is not None else None
        return RealizedProcess(pts, sol.a_tilde, len(energies), window), w

    return lam, window, run_replicates(job, cfg.replicates, cfg.threads)


def _process(cfg):
    lam, window, out = _replicates(cfg)
    reals = [o[0] for o in out]
    st = compare_stats(reals, lam, window, STAT_BINS, (0.5, 1.0))
    points = [(r, p) for r, real in enumerate(reals) for p in real.points]
    stats = [(b, st.edges[b], st.edges[b + 1], st.mean_count[b], st.count_stderr[b], st.predicted[b],
              st.dispersion[b], st.ks_stat, st.ks_p) for b in range(len(st.mean_count))]
    laplace = [(t, e, p, s) for t, e, p, s in st.laplace_pairs]
    return {
        "points.csv": csv_text(["replicate_id", "point"], points),
        "stats.csv": csv_text(["bin", "x_lo", "x_hi", "mean_count", "stderr", "predicted",
                               "dispersion", "ks_stat", "ks_p"], stats),
        "laplace.csv": csv_text(["theta", "empirical", "predicted", "stderr"], laplace),
    }


def _stats_row(source, alpha, ws):
    return (source, alpha, ws.count, ws.empty, ws.mean_sq, ws.stderr_sq, ws.mean_cube,
            ws.stderr_cube, ws.mean_w1, ws.stderr_w1)


def _gibbs(cfg):
    lam = _lambda_tilde(cfg)
    beta = 2.5 * lam if cfg.beta is None else cfg.beta
    _, _, out = _replicates(cfg, beta)
    weights = [RankedWeights(o[1], "gibbs") for o in out]
    rows = [(r, k, w) for r, ws in enumerate(weights) for k, w in enumerate(ws.weights)]
    stats = [_stats_row("gibbs", lam / beta, weight_stats(weights))]
    if beta > lam:
        params = PdParams.from_beta(lam, beta)
        key = rng.derive_key(cfg.seed, "gibbs-pd")
        pd = weight_stats(pd_sample(params, PD_TRUNCATION, key, i) for i in range(cfg.replicates))
        stats.append(_stats_row("pd-sample", params.alpha, pd))
    header = ["source", "alpha", "count", "empty", "mean_sum_w2", "stderr_sum_w2", "mean_sum_w3",
              "stderr_sum_w3", "mean_w1", "stderr_w1"]
    return {"weights.csv": csv_text(["replicate_id", "rank", "weight"], rows),
            "pdstats.csv": csv_text(header, stats)}


_COMMANDS = {"moments": _moments, "mgf": _mgf, "solve": _solve, "tail": _tail,
             "process": _process, "gibbs": _gibbs}


def _seed_report(cfg):
    purposes = {"moments": (), "mgf": (), "solve": ("field",), "tail": ("field", "tail", "tail-grid"),
                "process": ("replicate-field", "replicate-thin"),
                "gibbs": ("replicate-field", "replicate-thin", "gibbs-pd"),
                "verify": ("c1", "c2", "c3", "c4", "c5", "c6", "c7-field", "c7-thin", "c8-pd")}
    seeds = {"root": str(cfg.seed)}
    seeds.update({p: str(rng.derive_key(cfg.seed, p)) for p in purposes[cfg.command]})
    return seeds


def run_experiment(config):
    """Validate ``config``, run it and write outputs plus ``manifest.json``."""
    cfg = config.validate()
    t0 = time.perf_counter()
    acceptance, timing = (), {}
    if cfg.command == "verify":
        criteria, files, timing = verify.run_all(cfg.seed, cfg.threads)
        acceptance = tuple((c.number, c.passed) for c in criteria)
    else:
        files = _COMMANDS[cfg.command](cfg)
    wall = time.perf_counter() - t0

    os.makedirs(cfg.out, exist_ok=True)
    digests = {}
    for name in sorted(files):
        payload = files[name].encode("utf-8")
        with open(os.path.join(cfg.out, name), "wb") as fh:
            fh.write(payload)
        digests[name] = hashlib.sha256(payload).hexdigest()
    manifest = RunManifest(cfg.to_text(), __version__, _seed_report(cfg), wall, digests, cfg.out,
                           acceptance, timing)
    with open(os.path.join(cfg.out, MANIFEST), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(manifest.to_json())
    return manifest


# -- report ------------------------------------------------------------------

def _read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def _table(rows):
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]


def emit_report(manifest):
    """Write ``report.txt`` next to the outputs and return its path.

    Verify runs get a predicted / observed / tolerance / PASS-FAIL table,
    process runs a per-bin table; every run lists its files and digests.
    """
    if not manifest.files:
        raise MissingOutput("manifest lists no outputs")
    for name, digest in manifest.files.items():
        path = os.path.join(manifest.out, name)
        if not os.path.exists(path):
            raise MissingOutput(f"missing output {path}")
        if sha256_file(path) != digest:
            raise MissingOutput(f"output {path} does not match its manifest digest")
    command = manifest.config.split("command = ", 1)[1].split("\n", 1)[0].strip()
    lines = [f"remlab {manifest.version}  command: {command}  wall clock: {manifest.wall_clock:.2f} s", ""]
    if "acceptance.csv" in manifest.files:
        rows = _read_csv(os.path.join(manifest.out, "acceptance.csv"))
        lines += _table([[r[0], r[1], r[2], r[3], r[4], r[5]] for r in rows]) + [""]
    if "stats.csv" in manifest.files:
        rows = _read_csv(os.path.join(manifest.out, "stats.csv"))
        short = [rows[0][:7]] + [[r[0]] + [f"{float(v):.4g}" for v in r[1:7]] for r in rows[1:]]
        lines += _table(short)
        lines += [f"KS statistic {float(rows[1][7]):.4g}, p-value {float(rows[1][8]):.4g}", ""]
    lines += ["files:"] + [f"  {name}  sha256 {d}" for name, d in sorted(manifest.files.items())]
    path = os.path.join(manifest.out, "report.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path

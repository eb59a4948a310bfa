"""Command-line surface: JSON config in, seeded deterministic files out.

Commands
--------
simdim          similarity dimension of the configured system
types           enumerate the type set T^N with q, m, lambda per type
delta           minimal-gap table Delta_n for n = 1..n_max
transversality  order-K certificate over the parameter interval
disintegrate    exact or Monte Carlo disintegration check
fourier         transform scan of a sampled random measure, certified tails
ek              digit-counting experiments: brute force vs branching bound
scan-angles     per-angle projection diagnostics for a planar system
density         histogram/density table and L2 indicator across bin counts

Every output file starts with '#'-prefixed provenance lines (version,
config hash, seed); rerunning a command with the same config and seed
produces byte-identical files.  Exit codes: 0 success, 2 config error
(message names the JSON path), 3 cap exceeded.
"""

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CapExceededError, ConfigError
from .fourier import decay_exponent, ft_product
from .ifs_core import IFS, Similitude, delta_n, similarity_dimension
from .measure_numerics import (density_histogram, l2_indicator, level_n_ssm,
                               verify_disintegration)
from .param_family import ParamIFS, ParseError, parse_expr
from .projection_app import ScanConfig, angle_scan, carpet, project
from .random_model import sample_types
from .transversality import check_order_K, p1_estimate
from .type_model import TypedSystem
from .erdos_kahane import (brute_force_E, enumerate_sequence_count, fit_H,
                           split_words)

# ---------------------------------------------------------------------------
# config loading / validation


def _want(cfg: dict, path: str, typ, required: bool = True, default=None):
    node = cfg
    parts = path.split(".")
    for i, part in enumerate(parts):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(path, "missing required field")
            return default
        node = node[part]
    if typ is float and isinstance(node, int) and not isinstance(node, bool):
        node = float(node)
    if not isinstance(node, typ) or isinstance(node, bool) and typ is not bool:
        raise ConfigError(path, f"expected {getattr(typ, '__name__', typ)}, "
                                f"got {type(node).__name__}")
    return node


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_system(cfg: dict):
    """IFS (1D or planar) or ParamIFS from the `system` block."""
    system = _want(cfg, "system", (dict, str))
    if isinstance(system, str) or "preset" in system:
        name = system if isinstance(system, str) else _want(cfg, "system.preset", str)
        if name == "carpet":
            return carpet()
        raise ConfigError("system.preset", f"unknown preset {name!r}")
    dim = _want(cfg, "system.dim", int)
    if dim not in (1, 2):
        raise ConfigError("system.dim", "must be 1 or 2")
    maps = _want(cfg, "system.maps", list)
    if not maps:
        raise ConfigError("system.maps", "needs at least one map")
    p = _want(cfg, "system.p", list)
    if len(p) != len(maps):
        raise ConfigError("system.p", f"{len(p)} weights for {len(maps)} maps")
    lambdas, translations = [], []
    parametrised = False
    for i, entry in enumerate(maps):
        if not isinstance(entry, dict):
            raise ConfigError(f"system.maps[{i}]", "each map is an object")
        lam = entry.get("lambda")
        if not isinstance(lam, (int, float)) or isinstance(lam, bool) \
                or not 0.0 < float(lam) < 1.0:
            raise ConfigError(f"system.maps[{i}].lambda", "must be in (0,1)")
        t = entry.get("t")
        if t is None:
            raise ConfigError(f"system.maps[{i}].t", "missing required field")
        if dim == 2:
            if (not isinstance(t, list) or len(t) != 2
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                               for x in t)):
                raise ConfigError(f"system.maps[{i}].t",
                                  "planar maps need [x, y] numbers")
            translations.append((float(t[0]), float(t[1])))
        elif isinstance(t, str):
            try:
                translations.append(parse_expr(t))
            except ParseError as exc:
                raise ConfigError(f"system.maps[{i}].t", str(exc)) from exc
            parametrised = True
        elif isinstance(t, (int, float)) and not isinstance(t, bool):
            translations.append(float(t))
        else:
            raise ConfigError(f"system.maps[{i}].t",
                              "must be a number or an expression string")
        lambdas.append(float(lam))
    try:
        if parametrised:
            domain = _want(cfg, "domain", list)
            if len(domain) != 2:
                raise ConfigError("domain", "must be [a, b]")
            exprs = [t if not isinstance(t, float) else parse_expr(repr(t))
                     for t in translations]
            return ParamIFS(lambdas, exprs, p, domain=tuple(float(x) for x in domain))
        if dim == 2:
            sims = [Similitude(lam, t) for lam, t in zip(lambdas, translations)]
        else:
            sims = [Similitude(lam, float(t)) for lam, t in zip(lambdas, translations)]
        return IFS(sims, p)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("system", str(exc)) from exc


def line_system(system, cfg: dict, block: str):
    """A frozen 1D IFS for commands that need one: planar systems are
    projected at `<block>.angle`, families frozen at `<block>.u`."""
    if isinstance(system, ParamIFS):
        u = _want(cfg, f"{block}.u", float)
        return system.freeze(u)
    if system.dim == 2:
        angle = _want(cfg, f"{block}.angle", float)
        return project(system, angle)
    return system


# ---------------------------------------------------------------------------
# output helpers


class Emitter:
    def __init__(self, out_dir: str, cfg: dict, seed: int, command: str,
                 fmt: str, plot: bool):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.header = (f"# selfsim {__version__}\n"
                       f"# config-sha256: {config_hash(cfg)}\n"
                       f"# seed: {seed}\n"
                       f"# command: {command}\n")
        self.fmt = fmt
        self.plot = plot
        self.written = []

    @staticmethod
    def _cell(v) -> str:
        if v is None:
            return ""
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(float(v))
        s = str(v)
        if any(ch in s for ch in ',"\n'):
            s = '"' + s.replace('"', '""') + '"'
        return s

    def table(self, name: str, columns: list[str], rows: list, extra_header: str = ""):
        """Tabular result in the selected format; rows are sequences."""
        if self.fmt == "json":
            body = json.dumps([dict(zip(columns, r)) for r in rows], indent=1,
                              default=self._cell)
            path = self.dir / f"{name}.json"
            path.write_text(self.header + extra_header + body + "\n")
        else:
            lines = [",".join(columns)]
            lines += [",".join(self._cell(v) for v in r) for r in rows]
            path = self.dir / f"{name}.csv"
            path.write_text(self.header + extra_header + "\n".join(lines) + "\n")
        self.written.append(path)
        return path

    def document(self, name: str, payload: dict):
        """JSON document (certificates, reports); always JSON."""
        path = self.dir / f"{name}.json"
        path.write_text(self.header
                        + json.dumps(payload, indent=1, default=self._cell) + "\n")
        self.written.append(path)
        return path

    def plot_script(self, name: str, script: str):
        if not self.plot:
            return None
        path = self.dir / f"{name}_plot.py"
        shebang, _, rest = script.partition("\n")
        path.write_text(shebang + "\n" + self.header + rest)
        self.written.append(path)
        return path


_PLOT_TEMPLATE = """\
#!/usr/bin/env python3
\"\"\"Plot {name} output; reads {csv} from this directory.\"\"\"
import csv
from pathlib import Path

import matplotlib.pyplot as plt

rows = []
with open(Path(__file__).parent / {csv!r}) as fh:
    for line in fh:
        if not line.startswith('#'):
            rows.append(line)
reader = csv.DictReader(rows)
data = list(reader)
xs = [float(r[{x!r}]) for r in data if r[{y!r}]]
ys = [float(r[{y!r}]) for r in data if r[{y!r}]]
fig, ax = plt.subplots()
ax.plot(xs, ys, marker='o'{logargs})
ax.set_xlabel({x!r})
ax.set_ylabel({y!r})
fig.savefig(Path(__file__).parent / '{name}.png', dpi=150)
print('wrote {name}.png')
"""


def _plot(emit: Emitter, name: str, csvname: str, x: str, y: str, loglog=False):
    logargs = ")\nax.set_xscale('log')\nax.set_yscale('log'" if loglog else ""
    emit.plot_script(name, _PLOT_TEMPLATE.format(
        name=name, csv=csvname, x=x, y=y, logargs=logargs))


# ---------------------------------------------------------------------------
# commands


def cmd_simdim(system, cfg, emit, seed, jobs):
    val = similarity_dimension(system.lambdas, system.weights)
    print(repr(val))
    emit.table("simdim", ["similarity_dimension"], [[val]])
    return 0


def cmd_types(system, cfg, emit, seed, jobs):
    N = _want(cfg, "types.N", int)
    tsys = TypedSystem(system, N)
    rows = [[str(tau), tsys.q(tau), tsys.mult(tau), tsys.lam(tau)]
            for tau in tsys.types]
    emit.table("types", ["tau", "q", "multiplicity", "lambda"], rows)
    print(f"{len(rows)} types, sum q = {math.fsum(r[1] for r in rows)!r}")
    return 0


def cmd_delta(system, cfg, emit, seed, jobs):
    n_max = _want(cfg, "delta.n_max", int)
    frozen = line_system(system, cfg, "delta")
    report = p1_estimate(frozen, n_max)
    rows = [[n, d, rate] for n, d, rate in report.rows]
    emit.table("delta", ["n", "delta_n", "log_delta_n_over_n"], rows)
    _plot(emit, "delta", "delta.csv", "n", "log_delta_n_over_n")
    if report.flag:
        print(report.flag)
    else:
        print(f"best rate log c = {report.log_c!r}")
    return 0


def cmd_transversality(system, cfg, emit, seed, jobs):
    if not isinstance(system, ParamIFS):
        if isinstance(system, IFS) and system.dim == 2:
            from .projection_app import project_family

            system = project_family(system)
        else:
            raise ConfigError("system", "transversality needs a parametrised "
                                        "family (expression translations) or "
                                        "a planar system to project")
    n = _want(cfg, "transversality.n", int)
    K = _want(cfg, "transversality.K", int)
    c = _want(cfg, "transversality.c", float)
    grid_step = _want(cfg, "transversality.grid_step", float)
    cert = check_order_K(system, n, K, c, grid_step)
    payload = {
        "n": cert.n, "K": cert.K, "c": cert.c, "verdict": cert.verdict,
        "margin": cert.margin, "grid_step": cert.grid_step,
        "lipschitz_slack": cert.lipschitz_slack,
        "domain": list(cert.domain), "worst_u": cert.worst_u,
        "worst_pair": [list(cert.worst_pair[0]), list(cert.worst_pair[1])],
        "n_pairs": cert.n_pairs, "grid_points": cert.grid_points,
    }
    emit.document("transversality", payload)
    print(f"verdict: {cert.verdict} (margin {cert.margin!r})")
    return 0


def cmd_disintegrate(system, cfg, emit, seed, jobs):
    N = _want(cfg, "disintegrate.N", int)
    k = _want(cfg, "disintegrate.k", int)
    mode = _want(cfg, "disintegrate.mode", str, required=False, default="exact")
    S = _want(cfg, "disintegrate.S", int, required=False, default=20_000)
    frozen = line_system(system, cfg, "disintegrate")
    tsys = TypedSystem(frozen, N)
    xis = _want(cfg, "disintegrate.xi", list, required=False,
                default=[float(x) for x in np.linspace(1.0, 100.0, 10)])
    err = verify_disintegration(tsys, k, mode=mode, S=S,
                                xis=[float(x) for x in xis], seed=seed)
    payload = {"mode": mode, "N": N, "k": k, "S": S if mode == "monte_carlo" else None,
               "seed": seed, "max_error": err}
    emit.document("disintegrate", payload)
    print(f"max {mode} disintegration error: {err!r}")
    return 0


def cmd_fourier(system, cfg, emit, seed, jobs):
    N = _want(cfg, "fourier.N", int)
    omega_length = _want(cfg, "fourier.omega_length", int, required=False, default=16)
    xi_min = _want(cfg, "fourier.xi_min", float, required=False, default=1.0)
    xi_max = _want(cfg, "fourier.xi_max", float, required=False, default=2000.0)
    n_xi = _want(cfg, "fourier.n_xi", int, required=False, default=64)
    tail_tol = _want(cfg, "fourier.tail_tol", float, required=False, default=1e-6)
    split_s = _want(cfg, "fourier.split_s", int, required=False, default=0)
    frozen = line_system(system, cfg, "fourier")
    tsys = TypedSystem(frozen, N)
    omega = sample_types(seed, omega_length, tsys.q_table())
    keep = (lambda n: n % split_s == 0) if split_s >= 2 else None
    rows = []
    samples = []
    for xi in np.geomspace(xi_min, xi_max, n_xi):
        fs = ft_product(tsys, omega, None, float(xi), tail_tol=tail_tol,
                        factor_filter=keep)
        samples.append(fs)
        rows.append([fs.xi, fs.value.real, fs.value.imag, abs(fs.value),
                     fs.tail_error])
    emit.table("fourier", ["xi", "re", "im", "abs", "tail_error"], rows)
    _plot(emit, "fourier", "fourier.csv", "xi", "abs", loglog=True)
    try:
        est = decay_exponent(samples)
        emit.document("fourier_decay", {
            "exponent": est.exponent, "C": est.C,
            "xi_range": list(est.xi_range), "n_samples": est.n_samples})
        print(f"decay exponent estimate: {est.exponent!r}")
    except ValueError as exc:
        print(f"decay estimate skipped: {exc}")
    return 0


def cmd_ek(system, cfg, emit, seed, jobs):
    N = _want(cfg, "ek.N", int)
    omega_length = _want(cfg, "ek.omega_length", int, required=False, default=400)
    c = _want(cfg, "ek.c", float, required=False, default=1.0)
    M_values = _want(cfg, "ek.M_values", list, required=False, default=[4, 5, 6])
    delta_values = _want(cfg, "ek.delta_values", list, required=False,
                         default=[0.05, 0.1, 0.2])
    rho_values = _want(cfg, "ek.rho_values", list, required=False,
                       default=[0.05, 0.2])
    nz = _want(cfg, "ek.nz", int, required=False, default=48)
    nnu = _want(cfg, "ek.nnu", int, required=False, default=12)
    frozen = line_system(system, cfg, "ek")
    tsys = TypedSystem(frozen, N)
    tau0 = max(tsys.types, key=tsys.q)  # most frequent type: shortest blocks
    omega = sample_types(seed, omega_length, tsys.q_table())
    blocks = split_words(omega, tau0)
    rows = []
    fit_entries = []
    for M in M_values:
        if blocks.M < M:
            raise ValueError(
                f"omega of length {omega_length} has only {blocks.n_blocks} "
                f"blocks; need M+1 = {M + 1} (raise ek.omega_length)")
        for delta in delta_values:
            bound = enumerate_sequence_count(blocks, M, float(delta), 0.0, c, tsys)
            fit_entries.append((float(delta), M, bound.log_max_product))
            for rho in rho_values:
                bf = brute_force_E(blocks, M, float(delta), float(rho), c, tsys,
                                   nz=nz, nnu=nnu)
                rows.append([M, float(delta), float(rho), len(bf.intervals),
                             bf.n_admissible_pairs, bf.interval_length,
                             bound.log_bound, bound.budget])
    H = fit_H(fit_entries)
    emit.table("ek", ["M", "delta", "rho", "brute_intervals",
                      "brute_admissible_pairs", "interval_length",
                      "log_branching_bound", "branch_budget"], rows)
    emit.document("ek_summary", {"tau0": str(tau0), "c": c, "fitted_H": H,
                                 "n_blocks": blocks.n_blocks})
    print(f"fitted H = {H!r} over {len(fit_entries)} (delta, M) points")
    return 0


def cmd_scan_angles(system, cfg, emit, seed, jobs):
    if not isinstance(system, IFS) or system.dim != 2:
        raise ConfigError("system", "scan-angles needs a planar system (dim 2)")
    angles_cfg = _want(cfg, "scan_angles.angles", (int, list), required=False,
                       default=32)
    if isinstance(angles_cfg, int):
        angles = [2.0 * math.pi * k / angles_cfg for k in range(angles_cfg)]
    else:
        angles = [float(a) for a in angles_cfg]
    sc = ScanConfig(
        seed=seed,
        N=_want(cfg, "scan_angles.N", int, required=False, default=2),
        s=_want(cfg, "scan_angles.s", int, required=False, default=2),
        n_max=_want(cfg, "scan_angles.n_max", int, required=False, default=5),
        ensemble=_want(cfg, "scan_angles.ensemble", int, required=False, default=6),
        points=_want(cfg, "scan_angles.points", int, required=False, default=4000),
        omega_length=_want(cfg, "scan_angles.omega_length", int, required=False,
                           default=12),
        tail_tol=_want(cfg, "scan_angles.tail_tol", float, required=False,
                       default=1e-3),
        xi_max=_want(cfg, "scan_angles.xi_max", float, required=False,
                     default=2000.0),
        n_xi=_want(cfg, "scan_angles.n_xi", int, required=False, default=48),
    )
    rows = angle_scan(system, angles, sc, jobs=jobs)
    echo = "# config: " + json.dumps(cfg, sort_keys=True) + "\n"
    table = [[r.u, r.simdim, r.delta_rate, r.overlap_flag, r.fourier_exponent,
              r.fourier_C, r.bigdim, r.l2_slope, r.verdict, r.error]
             for r in rows]
    emit.table("scan_angles",
               ["u", "simdim", "delta_rate", "overlap", "fourier_exponent",
                "fourier_C", "bigdim", "l2_slope", "verdict", "error"],
               table, extra_header=echo)
    _plot(emit, "scan_angles", "scan_angles.csv", "u", "fourier_exponent")
    counts = {}
    for r in rows:
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
    print(", ".join(f"{v}: {k}" for k, v in sorted(counts.items())))
    return 0


def cmd_density(system, cfg, emit, seed, jobs):
    n = _want(cfg, "density.n", int)
    bins_list = _want(cfg, "density.bins", list, required=False,
                      default=[16, 64, 256])
    frozen = line_system(system, cfg, "density")
    measure = level_n_ssm(frozen, n)
    lo, hi = measure.support_bounds()
    rows = []
    l2_rows = []
    for bins in bins_list:
        h = density_histogram(measure, int(bins), (lo, hi))
        dens = h.densities()
        for e, mass, d in zip(h.edges[:-1], h.masses, dens):
            rows.append([int(bins), float(e), float(mass), float(d)])
        l2_rows.append([int(bins), float(h.widths[0]), l2_indicator(h)])
    emit.table("density", ["bins", "edge", "mass", "density"], rows)
    emit.table("density_l2", ["bins", "width", "l2_indicator"], l2_rows)
    _plot(emit, "density", "density.csv", "edge", "density")
    print(f"level-{n} measure: {measure.n_atoms} atoms on "
          f"[{lo!r}, {hi!r}]")
    return 0


_COMMANDS = {
    "simdim": cmd_simdim,
    "types": cmd_types,
    "delta": cmd_delta,
    "transversality": cmd_transversality,
    "disintegrate": cmd_disintegrate,
    "fourier": cmd_fourier,
    "ek": cmd_ek,
    "scan-angles": cmd_scan_angles,
    "density": cmd_density,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="selfsim",
        description="numerics for parametrised self-similar measures")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed (overrides config 'seed', default 0)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes for parallel commands")
    parser.add_argument("--format", choices=["csv", "json"], default="csv",
                        help="tabular output format")
    parser.add_argument("--plot", action="store_true",
                        help="emit plot scripts next to the data files")
    parser.add_argument("--N", type=int, default=None,
                        help="override the block length N of the command's "
                             "config block")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.N is not None:
            block = args.command.replace("-", "_")
            cfg.setdefault(block, {})["N"] = args.N
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        system = build_system(cfg)
        emit = Emitter(args.out, cfg, seed, args.command, args.format, args.plot)
        code = _COMMANDS[args.command](system, cfg, emit, seed, args.jobs)
        for path in emit.written:
            print(f"wrote {path}")
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapExceededError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

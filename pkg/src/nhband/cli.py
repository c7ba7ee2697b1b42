"""Configuration parsing, sweep orchestration and deterministic file output.

The artifact's only I/O surface: INI-style configs in, CSV data plus a JSON
manifest out.  Identical configs produce byte-identical CSV files; run
metadata that can vary (timings) lives only in the manifest.

    nhband <subcommand> --config run.ini [--out dir]

Subcommands: bands, gaps, ep-scan, wannier, tb, compare, sweep.
Exit codes: 0 success, 1 computation error, 2 config error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NhbandError
from .model import ModelConfig, PotentialSpec
from . import spectra, perturbation, ep_analysis, wannier, tightbinding

FMT = "%.17g"

DEFAULT_TOLERANCES = {
    "defect_tol": spectra.DEFECT_TOL,
    "degeneracy_tol": spectra.DEGENERACY_TOL,
    "overlap_ambiguity_tol": spectra.OVERLAP_AMBIGUITY_TOL,
    "ep_energy_tol": ep_analysis.EP_ENERGY_TOL,
    "ep_defect_tol": ep_analysis.EP_DEFECT_TOL,
    "golden_depth": ep_analysis.GOLDEN_DEPTH,
    "relation_tol": tightbinding.RELATION_TOL,
    "unitarity_tol": wannier.UNITARITY_TOL,
    "singular_tol": wannier.SINGULAR_TOL,
    "threshold_bracket_width": 0.1,
}


def parse_complex(text: str, where: str = "") -> complex:
    """Parse '80i', '20+80i', '-3.5', 'i' into a complex number."""
    s = str(text).strip().replace(" ", "").replace("j", "i")
    if not s:
        raise ConfigError(f"{where}: empty number")
    mapped = s.replace("i", "j")
    for bare, repl in (("j", "1j"), ("+j", "+1j"), ("-j", "-1j")):
        if mapped == bare:
            mapped = repl
    # forms like 20+j / 20-j
    if mapped.endswith("+j"):
        mapped = mapped[:-2] + "+1j"
    elif mapped.endswith("-j"):
        mapped = mapped[:-2] + "-1j"
    try:
        return complex(mapped)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse complex number {text!r}") from exc


def _parse_fourier(text: str, where: str) -> dict[int, complex]:
    comps = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ConfigError(f"{where}: expected 'l:value' pairs, got {chunk!r}")
        l_str, _, v_str = chunk.partition(":")
        try:
            l = int(l_str)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad harmonic index {l_str!r}") from exc
        comps[l] = parse_complex(v_str, where)
    return comps


@dataclass
class RunConfig:
    potential: PotentialSpec
    numerics: ModelConfig
    n_x: int
    m_max: int
    task: dict
    out_dir: str
    out_format: str
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    raw: dict = field(default_factory=dict)


def parse_config(text: str) -> RunConfig:
    """Parse and validate an INI run configuration; defaults are filled
    (l_max=40, n_k=201, n_x=64, n_bands=3, m_max=3)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    if "potential" not in parser:
        raise ConfigError("potential: section missing")
    pot_sec = parser["potential"]
    form = pot_sec.get("form", "").strip()
    a_val = parse_complex(pot_sec.get("A", "0"), "potential.A")
    forms = {"c_sin", "b_cos_c_sin", "b_exp", "fourier", "free"}
    if form not in forms:
        raise ConfigError(f"potential.form: must be one of {sorted(forms)}, got {form!r}")
    if form == "c_sin":
        if "c" not in pot_sec:
            raise ConfigError("potential.c: required for form=c_sin")
        potential = PotentialSpec.c_sin(parse_complex(pot_sec["c"], "potential.c"), a_val)
    elif form == "b_cos_c_sin":
        for key in ("b", "c"):
            if key not in pot_sec:
                raise ConfigError(f"potential.{key}: required for form=b_cos_c_sin")
        b = parse_complex(pot_sec["b"], "potential.b")
        if b.imag != 0:
            raise ConfigError("potential.b: must be real for form=b_cos_c_sin")
        potential = PotentialSpec.b_cos_c_sin(
            b.real, parse_complex(pot_sec["c"], "potential.c"), a_val)
    elif form == "b_exp":
        if "b" not in pot_sec:
            raise ConfigError("potential.b: required for form=b_exp")
        b = parse_complex(pot_sec["b"], "potential.b")
        if b.imag != 0:
            raise ConfigError("potential.b: must be real for form=b_exp")
        potential = PotentialSpec.b_exp(b.real, a_val)
    elif form == "fourier":
        if "fourier" not in pot_sec:
            raise ConfigError("potential.fourier: required for form=fourier")
        potential = PotentialSpec.from_fourier(
            _parse_fourier(pot_sec["fourier"], "potential.fourier"), a_val)
    else:
        potential = PotentialSpec.free(a_val)

    num = parser["numerics"] if "numerics" in parser else {}

    def _int(section, key, default, minimum=None):
        raw = section.get(key, None) if hasattr(section, "get") else None
        if raw is None:
            return default
        try:
            val = int(str(raw).strip())
        except ValueError as exc:
            raise ConfigError(f"numerics.{key}: not an integer: {raw!r}") from exc
        if minimum is not None and val < minimum:
            raise ConfigError(f"numerics.{key}: must be >= {minimum}, got {val}")
        return val

    l_max = _int(num, "l_max", 40, 1)
    n_k = _int(num, "n_k", 201, 3)
    n_x = _int(num, "n_x", 64, 2)
    n_bands = _int(num, "n_bands", 3, 1)
    m_max = _int(num, "m_max", 3, 0)
    if n_bands > 2 * l_max + 1:
        raise ConfigError("numerics.n_bands: exceeds matrix dimension 2*l_max+1")
    numerics = ModelConfig(l_max=l_max, n_k=n_k, n_bands=n_bands)

    tolerances = dict(DEFAULT_TOLERANCES)
    if "tolerances" in parser:
        for key, raw in parser["tolerances"].items():
            try:
                tolerances[key] = float(raw)
            except ValueError as exc:
                raise ConfigError(f"tolerances.{key}: not a number: {raw!r}") from exc
            if tolerances[key] <= 0:
                raise ConfigError(f"tolerances.{key}: must be positive")

    task = dict(parser["task"]) if "task" in parser else {}
    out = parser["output"] if "output" in parser else {}
    out_dir = out.get("dir", "out") if hasattr(out, "get") else "out"
    out_format = out.get("format", "csv") if hasattr(out, "get") else "csv"
    if out_format not in ("csv", "json"):
        raise ConfigError(f"output.format: must be csv or json, got {out_format!r}")

    raw = {s: dict(parser[s]) for s in parser.sections()}
    return RunConfig(potential=potential, numerics=numerics, n_x=n_x, m_max=m_max,
                     task=task, out_dir=out_dir, out_format=out_format,
                     tolerances=tolerances, raw=raw)


def _fmt(x) -> str:
    return FMT % float(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, (int, np.integer)):
                cells.append(str(int(cell)))
            elif isinstance(cell, str):
                cells.append(cell)
            else:
                cells.append(_fmt(cell))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _json_default(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return str(obj)


def _echo_potential(cfg: RunConfig) -> dict:
    meta = dict(cfg.potential.meta)
    meta["A"] = cfg.potential.vector_A
    meta["fourier"] = {str(l): v for l, v in cfg.potential.scalar_fourier.items()}
    return meta


def _manifest(cfg: RunConfig, name: str, status: str, results: dict,
              outputs: list[str], t0: float, error: str | None = None) -> dict:
    return {
        "task": name,
        "status": status,
        "error": error,
        "parameters": {
            "potential": _echo_potential(cfg),
            "numerics": {"l_max": cfg.numerics.l_max, "n_k": cfg.numerics.n_k,
                         "n_bands": cfg.numerics.n_bands, "n_x": cfg.n_x,
                         "m_max": cfg.m_max},
            "task": cfg.task,
        },
        "tolerances": cfg.tolerances,
        "versions": {"nhband": __version__, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
        "timings": {"wall_seconds": time.time() - t0},
        "outputs": outputs,
    } | {"results": results}


def _bands_rows(bands: spectra.BandSet):
    for i, k in enumerate(bands.k_grid):
        for n in range(bands.n_bands):
            e = bands.energies[i, n]
            yield (k, n + 1, e.real, e.imag)


def _get_gauge(cfg: RunConfig, fixed: spectra.BandSet):
    """Resolve the mixing gauge for wannier/tb/compare tasks."""
    choice = cfg.task.get("gauge", "auto").strip()
    if choice == "auto":
        choice = "projection" if cfg.potential.vector_A == 0 else "diagonal"
    if choice == "diagonal":
        return wannier.diagonal_gauge(fixed, check_separation=False), {"gauge": "diagonal"}
    if choice != "projection":
        raise ConfigError(f"task.gauge: unknown gauge {choice!r}")
    source = cfg.task.get("trials", "default").strip()
    info = {"gauge": "projection"}
    n_k = len(fixed.k_grid)
    if source == "default":
        trials = wannier.default_trials()
        if trials.meta.get("n_k") != n_k or trials.meta.get("n_x") != cfg.n_x:
            trials = wannier.trials_for(fixed, n_x=cfg.n_x)
            info["trials_source"] = "regenerated (supercell mismatch with cache)"
        else:
            info["trials_source"] = "packaged cache"
    else:
        trials = wannier.TrialFunctions.load(source)
        info["trials_source"] = source
        if trials.meta.get("n_k") != n_k:
            raise ConfigError(
                f"task.trials: trial supercell n_k={trials.meta.get('n_k')} "
                f"does not match run n_k={n_k}")
    return wannier.projection_unitary(fixed, trials), info


def _task_bands(cfg: RunConfig, out: Path):
    bands = spectra.dispersion(cfg.potential, cfg.numerics)
    path = out / "bands.csv"
    write_csv(path, ["k", "band", "re_eps", "im_eps"], _bands_rows(bands))
    flags, pt_residual = ep_analysis.pt_check(bands)
    results = {
        "biorthonormality_residual": bands.biorthonormality_residual(),
        "pt_conjugation_closed_everywhere": bool(flags.all()),
        "pt_max_residual": pt_residual,
        "ordering_rules": sorted(bands.ordering_log.rule_names()),
        "tracking_ambiguities": len(bands.ordering_log.ambiguities),
    }
    return results, [path.name]


def _task_gaps(cfg: RunConfig, out: Path):
    bands = spectra.dispersion(cfg.potential, cfg.numerics)
    rep = perturbation.measure_gaps(bands)
    path = out / "gaps.csv"
    write_csv(path, ["re_delta1", "im_delta1", "re_delta2", "im_delta2",
                     "re_analytic_delta1", "im_analytic_delta1",
                     "re_analytic_delta2", "im_analytic_delta2"],
              [(rep.delta1.real, rep.delta1.imag, rep.delta2.real, rep.delta2.imag,
                rep.analytic_delta1.real, rep.analytic_delta1.imag,
                rep.analytic_delta2.real, rep.analytic_delta2.imag)])
    results = {"delta1": rep.delta1, "delta2": rep.delta2,
               "analytic_delta1": rep.analytic_delta1,
               "analytic_delta2": rep.analytic_delta2}
    return results, [path.name]


def _task_ep_scan(cfg: RunConfig, out: Path):
    bands = spectra.dispersion(cfg.potential, cfg.numerics)
    pair = (0, 1)
    eps = ep_analysis.detect_eps(
        bands, pair,
        ep_energy_tol=cfg.tolerances["ep_energy_tol"],
        defect_tol=cfg.tolerances["ep_defect_tol"],
        golden_depth=int(cfg.tolerances["golden_depth"]))
    path = out / "eps.csv"
    write_csv(path, ["k", "band_a", "band_b", "self_orthogonality", "energy_gap"],
              [(c.k, c.band_pair[0] + 1, c.band_pair[1] + 1,
                c.self_orthogonality, c.energy_gap) for c in eps])
    results = {"ep_count": len(eps), "ep_positions": [c.k for c in eps]}
    if "scan_min" in cfg.task or "scan_max" in cfg.task:
        for key in ("scan_min", "scan_max"):
            if key not in cfg.task:
                raise ConfigError(f"task.{key}: both scan_min and scan_max are needed")
        lo = float(cfg.task["scan_min"])
        hi = float(cfg.task["scan_max"])
        thr = ep_analysis.threshold_scan(
            [lo, hi], lambda v: PotentialSpec.c_sin(1j * v, cfg.potential.vector_A),
            cfg.numerics, bracket_width=cfg.tolerances["threshold_bracket_width"])
        results["threshold_scan"] = {"bracket": [lo, hi], "threshold_im_c": thr}
    return results, [path.name]


def _task_wannier(cfg: RunConfig, out: Path):
    bands = spectra.dispersion(cfg.potential, cfg.numerics)
    fixed, conv = wannier.fix_phases(bands, band_indices=(0, 1))
    mixing, info = _get_gauge(cfg, fixed)
    cells = range(-cfg.m_max, cfg.m_max + 1)
    wset = wannier.build_wannier(fixed, mixing, cells=cells, n_x=cfg.n_x)
    path = out / "wannier.csv"

    def rows():
        for b in range(wset.w.shape[0]):
            for j, m in enumerate(wset.cells):
                for p in range(len(wset.x)):
                    yield (b + 1, m, wset.x[p], wset.w[b, j, p].real,
                           wset.w[b, j, p].imag, wset.w_tilde[b, j, p].real,
                           wset.w_tilde[b, j, p].imag)

    write_csv(path, ["band", "cell", "x", "re_w", "im_w", "re_wt", "im_wt"], rows())
    outputs = [path.name]
    if cfg.task.get("emit_trials", "false").strip().lower() in ("1", "true", "yes"):
        trial_path = out / "trials.csv"
        wannier.trials_from_wannier(wset).save(trial_path)
        outputs.append(trial_path.name)
    results = dict(info)
    results.update({
        "wannier_biorthogonality_residual": wset.biorthogonality_residual(),
        "unitarity_residual": mixing.unitarity_residual(),
        "max_left_pivot_phase": conv.max_left_residual,
        "centers": {str(n + 1): wset.center(n) for n in range(wset.w.shape[0])},
        "spreads": {str(n + 1): wset.spread(n) for n in range(wset.w.shape[0])},
    })
    return results, outputs


def _relation_context(cfg: RunConfig, table) -> str:
    choice = cfg.task.get("relations", "auto").strip()
    if choice != "auto":
        return choice
    meta = cfg.potential.meta
    if cfg.potential.vector_A != 0:
        return "vector-potential"
    c = meta.get("c", 0)
    if meta.get("form") == "c_sin" and complex(c).real == 0:
        inter = max(np.abs(table.t[0, 1]).max(), np.abs(table.t[1, 0]).max())
        return "pt-imaginary" if inter > 1e-6 else "pt-imaginary-separated"
    return "complex-separated"


def _task_tb(cfg: RunConfig, out: Path):
    bands = spectra.dispersion(cfg.potential, cfg.numerics)
    fixed, _ = wannier.fix_phases(bands, band_indices=(0, 1))
    mixing, info = _get_gauge(cfg, fixed)
    table = tightbinding.hoppings_from_bands(fixed, mixing, m_max=cfg.m_max)
    path = out / "hoppings.csv"
    rows = []
    for n in range(table.t.shape[0]):
        for np_ in range(table.t.shape[1]):
            for j, m in enumerate(table.m_values):
                v = table.t[n, np_, j]
                rows.append((n + 1, np_ + 1, int(m), v.real, v.imag))
    write_csv(path, ["n", "n_prime", "m", "re_t", "im_t"], rows)
    model_path = out / "model.txt"
    tightbinding.save_table(model_path, table)
    context = _relation_context(cfg, table)
    report = tightbinding.verify_relations(table, context,
                                           tol=cfg.tolerances["relation_tol"])
    results = dict(info)
    results.update({
        "relation_context": context,
        "relations_passed": report.passed,
        "relation_checks": {k: {kk: vv for kk, vv in v.items()}
                            for k, v in report.checks.items()},
        "asymmetry_ratios": {f"band{n + 1}_m{m}": r
                             for (n, m), r in report.notes["asymmetry_ratios"].items()},
    })
    return results, [path.name, model_path.name]


def _task_compare(cfg: RunConfig, out: Path):
    bands = spectra.dispersion(cfg.potential, cfg.numerics)
    fixed, _ = wannier.fix_phases(bands, band_indices=(0, 1))
    mixing, info = _get_gauge(cfg, fixed)
    table = tightbinding.hoppings_from_bands(fixed, mixing, m_max=cfg.m_max)
    kind = cfg.task.get("model", "auto").strip()
    if kind == "auto":
        inter = max(np.abs(table.t[0, 1]).max(), np.abs(table.t[1, 0]).max())
        pt_like = cfg.potential.vector_A == 0 and cfg.potential.meta.get("form") == "c_sin" \
            and complex(cfg.potential.meta.get("c", 0)).real == 0
        kind = "pt2" if (pt_like and inter > 1e-6) else "independent"
    m_trunc = int(cfg.task.get("m_trunc", 1))
    model = tightbinding.TbModel(table=table, m_trunc=m_trunc, kind=kind)
    tb = model.dispersion(bands.k_grid)
    path = out / "compare.csv"

    def rows():
        for i, k in enumerate(bands.k_grid):
            for pos in range(2):
                c = bands.energies[i, pos]
                t = tb[i, pos]
                yield (k, pos + 1, c.real, c.imag, t.real, t.imag, abs(c - t))

    write_csv(path, ["k", "band", "re_cont", "im_cont", "re_tb", "im_tb", "abs_diff"],
              rows())
    comp = tightbinding.compare(fixed, model)
    results = dict(info)
    results.update({"model_kind": kind, "m_trunc": m_trunc,
                    "per_band": comp.per_band})
    if kind == "pt2":
        results["tb_ep_positions"] = model.ep_positions()
    return results, [path.name]


TASKS = {
    "bands": _task_bands,
    "gaps": _task_gaps,
    "ep-scan": _task_ep_scan,
    "wannier": _task_wannier,
    "tb": _task_tb,
    "compare": _task_compare,
}


def _override_potential(cfg: RunConfig, parameter: str, value: complex) -> RunConfig:
    meta = cfg.potential.meta
    form = meta.get("form")
    a_val = cfg.potential.vector_A
    if parameter == "A":
        a_val = value
    if form == "c_sin":
        c = value if parameter == "c" else meta["c"]
        pot = PotentialSpec.c_sin(c, a_val)
    elif form == "b_cos_c_sin":
        b = value.real if parameter == "b" else meta["b"]
        c = value if parameter == "c" else meta["c"]
        pot = PotentialSpec.b_cos_c_sin(b, c, a_val)
    elif form == "b_exp":
        b = value.real if parameter == "b" else meta["b"]
        pot = PotentialSpec.b_exp(b, a_val)
    elif form == "free":
        pot = PotentialSpec.free(a_val)
    else:
        if parameter != "A":
            raise ConfigError("task.parameter: only A can be swept for form=fourier")
        pot = PotentialSpec.from_fourier(cfg.potential.scalar_fourier, a_val)
    return RunConfig(potential=pot, numerics=cfg.numerics, n_x=cfg.n_x,
                     m_max=cfg.m_max, task=cfg.task, out_dir=cfg.out_dir,
                     out_format=cfg.out_format, tolerances=cfg.tolerances,
                     raw=cfg.raw)


def _task_sweep(cfg: RunConfig, out: Path):
    sub = cfg.task.get("task", "").strip()
    if sub not in TASKS:
        raise ConfigError(f"task.task: sweep needs a task in {sorted(TASKS)}")
    parameter = cfg.task.get("parameter", "c").strip()
    if parameter not in ("c", "b", "A"):
        raise ConfigError("task.parameter: must be c, b or A")
    if "values" not in cfg.task:
        raise ConfigError("task.values: required for sweep")
    values = [parse_complex(v, "task.values")
              for v in cfg.task["values"].split(",") if v.strip()]
    if not values:
        raise ConfigError("task.values: empty")

    aggregate = []
    outputs = []
    for idx, value in enumerate(values):
        sub_cfg = _override_potential(cfg, parameter, value)
        sub_out = out / f"value_{idx:03d}"
        sub_out.mkdir(parents=True, exist_ok=True)
        results, files = TASKS[sub](sub_cfg, sub_out)
        outputs.extend(f"value_{idx:03d}/{f}" for f in files)
        if sub == "gaps":
            aggregate.append((value.real, value.imag,
                              results["delta1"].real, results["delta1"].imag,
                              results["delta2"].real, results["delta2"].imag,
                              results["analytic_delta1"].real,
                              results["analytic_delta1"].imag,
                              results["analytic_delta2"].real,
                              results["analytic_delta2"].imag))
    results = {"parameter": parameter, "n_values": len(values),
               "values": values, "task": sub}
    if aggregate:
        agg_path = out / "sweep.csv"
        write_csv(agg_path,
                  ["re_value", "im_value", "re_delta1", "im_delta1",
                   "re_delta2", "im_delta2", "re_analytic_delta1",
                   "im_analytic_delta1", "re_analytic_delta2",
                   "im_analytic_delta2"], aggregate)
        outputs.insert(0, agg_path.name)
    return results, outputs


TASKS["sweep"] = _task_sweep


def run_subcommand(cfg: RunConfig, name: str, out_dir: str | None = None) -> dict:
    """Execute a task; CSV outputs plus manifest.json land in the output dir.

    On computation errors the manifest is still written (status=failed) and
    the error re-raised.
    """
    if name not in TASKS:
        raise ConfigError(f"unknown subcommand {name!r}")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    try:
        results, outputs = TASKS[name](cfg, out)
    except NhbandError:
        raise
    except Exception as exc:
        manifest = _manifest(cfg, name, "failed", {}, [], t0, error=str(exc))
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True, default=_json_default))
        raise
    manifest = _manifest(cfg, name, "ok", results, outputs, t0)
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=_json_default))
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nhband",
        description="Band structures of 1D periodic non-Hermitian operators")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in TASKS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out", default=None, help="output directory override")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run_subcommand(cfg, args.command, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return 1
    print(f"{args.command}: ok ({', '.join(manifest['outputs']) or 'no files'})")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line harness: ``relframes <command> [options]``.

Every command prints (or writes) a report with ``results``, ``residuals`` and
``tolerances``; the exit status is 0 when every residual is within its
tolerance, 1 when a checked inequality or identity fails, 2 on bad input.

Randomised commands draw from ``numpy.random.Generator(numpy.random.Philox(seed))``
so a (command, parameters, seed) triple fixes every drawn number.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .opcore import InputError

OUTPUT_DIR_ENV = "RELFRAMES_OUTPUT_DIR"

# (name, type, default, help) per command; defaults are applied after the config file
PARAMS = {
    "model1": [("theta", float, math.pi / 2, "interferometer phase")],
    "model2": [("j", int, 4, "half-width of the localised reference state"),
               ("theta", float, math.pi / 3, "system phase"),
               ("theta_p", float, 0.0, "reference phase")],
    "model3": [("cutoff", int, 16, "reference truncation"), ("theta", float, math.pi / 2, "phase"),
               ("n", int, 3, "input reference level")],
    "qubit": [("n", int, 9, "reference levels 0..n"), ("epsilon", float, 0.5, "tail exponent")],
    "as": [("q1", float, 16.0, "mean photon number, cavity 1"), ("q2", float, 16.0, "mean photon number, cavity 2"),
           ("g", float, 1.0, "coupling"), ("T", float, math.pi / 16, "interaction time"),
           ("theta", float, 0.0, "cavity 1 phase"), ("theta_p", float, 0.0, "cavity 2 phase"),
           ("cutoff1", int, None, "cavity 1 truncation (auto)"), ("cutoff2", int, None, "cavity 2 truncation (auto)"),
           ("n", int, 3, "photon number for the number-state check")],
    "as-nogo": [("trials", int, 50, "random conserving couplings"), ("cutoff", int, 10, "cavity truncation")],
    "dowling": [("m", float, 100.0, "mean atom number"), ("phi", float, 1.0, "molecular phase"),
                ("theta", float, 0.0, "condensate phase"), ("cutoff", int, None, "truncation (auto)")],
    "appendix": [("k", int, 10, "accuracy index"), ("m", float, None, "mean (default just above the threshold)")],
    "bounds": [("which", str, "all", "prop1 | owb | tradeoff | all"), ("trials", int, 1000, "random instances")],
    "coherence": [("trials", int, 100, "random states"), ("epsilon", float, 0.1, "width tolerance"),
                  ("bins", int, 64, "phase bins")],
    "pom-validate": [("dim", int, 4, "Hilbert space dimension"), ("bins", int, 64, "circle bins"),
                     ("damping", float, 1.0, "phase matrix c_nm = r^|n-m|")],
    "way": [("n", int, 8, "reference levels 0..n in the relative-phase scheme")],
    "strong-way": [("trials", int, 50, "random conserving couplings"), ("scheme", str, None, "scheme file (YAML/JSON)"),
                   ("dim", int, 3, "system and apparatus dimension")],
    "smear": [("kernel_n", int, 8, "binomial kernel size"), ("phi_n", int, 12, "binomial |phi|^2 size"),
              ("values", str, "0,1,2", "comma-separated value set X")],
}

RANDOMISED = {"as-nogo", "bounds", "coherence", "strong-way"}


class Report:
    def __init__(self, command: str, params: dict, provenance: dict, seed):
        self.command = command
        self.params = params
        self.provenance = provenance
        self.seed = seed
        self.results: dict = {}
        self.residuals: dict = {}
        self.tolerances: dict = {}
        self.tails: dict = {}
        self.wall_clock: float | None = None

    def check(self, name: str, residual: float, tol: float):
        self.residuals[name] = float(residual)
        self.tolerances[name] = float(tol)

    def absorb(self, run, prefix: str = ""):
        for k, v in run.results.items():
            self.results[prefix + k] = v
        for k, v in run.residuals.items():
            self.check(prefix + k, v, run.tolerances[k])
        for k, v in run.tails.items():
            self.tails[prefix + k] = v

    @property
    def passed(self) -> bool:
        return all(self.residuals[k] <= self.tolerances[k] for k in self.residuals)

    def as_dict(self) -> dict:
        d = {
            "command": self.command,
            "version": __version__,
            "seed": self.seed,
            "params": self.params,
            "provenance": self.provenance,
            "results": self.results,
            "residuals": self.residuals,
            "tolerances": self.tolerances,
            "tails": self.tails,
            "passed": self.passed,
        }
        if self.wall_clock is not None:
            d["wall_clock"] = self.wall_clock
        return d


# -- serialisation -------------------------------------------------------------

def _encode(x, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent + 1)}" for k, v in x.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v, indent + 1) for v in x) + "]"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (complex, np.complexfloating)):
        return _encode([x.real, x.imag], indent)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return '"NaN"'
        if math.isinf(x):
            return '"Infinity"' if x > 0 else '"-Infinity"'
        return "%.17g" % x
    return json.dumps(str(x))


def to_json(report: Report) -> str:
    return _encode(report.as_dict()) + "\n"


def _scalar_rows(report: Report):
    for section in ("results", "residuals", "tolerances", "tails"):
        for k, v in getattr(report, section).items():
            if isinstance(v, (bool, np.bool_)):
                yield section, k, "true" if v else "false"
            elif isinstance(v, (int, np.integer)):
                yield section, k, str(int(v))
            elif isinstance(v, (float, np.floating)):
                yield section, k, "%.17g" % float(v)
            elif isinstance(v, str):
                yield section, k, v


def to_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["section", "name", "value"])
    for row in _scalar_rows(report):
        w.writerow(row)
    return buf.getvalue()


def emit_report(report: Report, fmt: str = "json", path: str | None = None) -> str:
    text = to_json(report) if fmt == "json" else to_csv(report)
    if path is None:
        sys.stdout.write(text)
    else:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise InputError(f"cannot write report to {path}: {exc.strerror}") from None
    return text


# -- parsing ---------------------------------------------------------------------

def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="PRNG seed (required for randomised commands)")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="report format (default json)")
    common.add_argument("--out", default=None,
                        help=f"report path; default stdout, or <${OUTPUT_DIR_ENV}>/<command>.<format> when set")
    common.add_argument("--config", default=None, help="JSON/YAML file of parameters; command-line flags win")
    common.add_argument("--timing", action="store_true", help="include wall-clock time in the report")
    p = argparse.ArgumentParser(prog="relframes", description="Relational reference-frame computations.")
    p.add_argument("--version", action="version", version=f"relframes {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    for cmd, params in PARAMS.items():
        sp = sub.add_parser(cmd, parents=[common], help=f"run the {cmd} experiment",
                            formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        for name, typ, default, hlp in params:
            kw = {"type": typ, "default": None, "dest": name, "help": f"{hlp} (default: {default})"}
            if cmd == "bounds" and name == "which":
                kw["choices"] = ("prop1", "owb", "tradeoff", "all")
            sp.add_argument(_flag(name), **kw)
    return p


def _load_config(path: str) -> dict:
    import yaml

    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise InputError(f"malformed config {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InputError("config file must be a mapping of parameter names to values")
    return data


def resolve(args) -> tuple:
    """(params, provenance, seed): flags > config file > defaults."""
    table = {name: (typ, default) for name, typ, default, _ in PARAMS[args.command]}
    cfg = _load_config(args.config) if args.config else {}
    params, prov = {}, {}
    seed, seed_src = args.seed, "flag"
    for key, val in cfg.items():
        k = str(key).replace("-", "_")
        if k == "seed":
            if seed is None:
                seed, seed_src = val, "config"
            continue
        if k not in table:
            raise InputError(f"unknown config key {key!r} for command {args.command}")
    for name, (typ, default) in table.items():
        flag = getattr(args, name)
        if flag is not None:
            params[name], prov[name] = flag, "flag"
        elif name in cfg or name.replace("_", "-") in cfg:
            raw = cfg.get(name, cfg.get(name.replace("_", "-")))
            try:
                params[name] = typ(raw) if raw is not None else None
            except (TypeError, ValueError):
                raise InputError(f"config value for {name!r} is not a valid {typ.__name__}") from None
            prov[name] = "config"
        else:
            params[name], prov[name] = default, "default"
    if seed is not None:
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise InputError("seed must be an integer in [0, 2^64)")
        prov["seed"] = seed_src
    if args.command in RANDOMISED and seed is None and not (args.command == "strong-way" and params.get("scheme")):
        raise InputError(f"command {args.command!r} is randomised and needs --seed")
    return params, prov, seed


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _need(cond: bool, msg: str):
    if not cond:
        raise InputError(msg)


# -- commands --------------------------------------------------------------------

def _cmd_model1(p, rng, rep):
    from .models import model1_run

    rep.absorb(model1_run(p["theta"]))


def _cmd_model2(p, rng, rep):
    from .models import model2_run

    _need(p["j"] >= 1, "--j must be >= 1")
    rep.absorb(model2_run(p["j"], p["theta"], p["theta_p"], with_relphase=p["j"] <= 32))


def _cmd_model3(p, rng, rep):
    from .models import model3_run

    rep.absorb(model3_run(p["cutoff"], p["theta"], p["n"]))


def _cmd_qubit(p, rng, rep):
    from .models import qubit_demo

    _need(p["n"] >= 1, "--n must be >= 1")
    _need(0 < p["epsilon"] < 1, "--epsilon must lie in (0, 1)")
    rep.absorb(qubit_demo(p["n"], p["epsilon"], dense=p["n"] <= 400))


def _cmd_as(p, rng, rep):
    from .models import ASConfig, as_run

    _need(p["q1"] > 0 and p["q2"] > 0, "mean photon numbers must be positive")
    cfg = ASConfig(p["q1"], p["q2"], p["g"], p["T"], p["theta"], p["theta_p"], p["cutoff1"], p["cutoff2"], p["n"])
    rep.absorb(as_run(cfg))


def _cmd_as_nogo(p, rng, rep):
    from .models import AS_CHARGES, as_nogo_check, random_conserving_unitary
    from .symmetry import NumberRep, ladder, tensor_sum

    _need(p["trials"] >= 1 and p["cutoff"] >= 1, "--trials and --cutoff must be positive")
    total = tensor_sum(NumberRep(AS_CHARGES), ladder(p["cutoff"] + 1))
    worst, worst_cons = math.inf, 0.0
    for _ in range(p["trials"]):
        U = random_conserving_unitary(total, rng)
        i = int(rng.integers(p["cutoff"] + 1))
        r = as_nogo_check(i, U, p["cutoff"])
        worst = min(worst, r.results["min_distance_sq"])
        worst_cons = max(worst_cons, r.results["conservation"])
    bound = 2 - math.sqrt(2)
    rep.results.update(min_distance_sq=worst, bound=bound, max_conservation=worst_cons)
    rep.check("nogo_bound", max(0.0, bound - worst), 1e-10)


def _cmd_dowling(p, rng, rep):
    from .models import dowling_run

    _need(p["m"] > 0, "--m must be positive")
    rep.absorb(dowling_run(p["m"], p["phi"], p["cutoff"], p["theta"]))


def _cmd_appendix(p, rng, rep):
    from .models import appendix_bound_check, delta_k

    _need(p["k"] >= 2, "--k must be >= 2")
    m = p["m"]
    if m is None:
        m = math.ceil(p["k"] ** 2 / delta_k(p["k"]) ** 2) + 1
    rep.results["m"] = float(m)
    rep.absorb(appendix_bound_check(m, p["k"]))


def _cmd_bounds(p, rng, rep):
    from .bounds import summarize, sweep_owb, sweep_prop1, sweep_tradeoff

    _need(p["trials"] >= 1, "--trials must be positive")
    which = ["prop1", "owb", "tradeoff"] if p["which"] == "all" else [p["which"]]
    sweeps = {"prop1": sweep_prop1, "owb": sweep_owb, "tradeoff": sweep_tradeoff}
    for name in which:
        reports = sweeps[name](p["trials"], rng)
        groups = {}
        for r in reports:
            groups.setdefault(r.name, []).append(r)
        for g, rs in groups.items():
            s = summarize(rs)
            rep.results[f"{g}_count"] = s["count"]
            rep.results[f"{g}_min_residual"] = s["min_residual"]
            rep.check(f"{g}_failures", s["failures"], 0)
    if "owb" in which:
        from .bounds import prop2_owb_check
        from .pom import canonical_reference

        omega = np.zeros((8, 8))
        omega[3, 3] = 1.0
        _, owb = prop2_owb_check(omega, canonical_reference(8))
        rep.results["delocalised_D"] = owb.lhs
        rep.check("delocalised_D_is_half", abs(owb.lhs - 0.5), 1e-12)


def _cmd_coherence(p, rng, rep):
    from .coherence import (absolute_coherence, coherence_width_bound_check, mutual_coherence,
                            mutual_coherence_witness, product_state)
    from .opcore import random_state
    from .pom import canonical_reference
    from .symmetry import ladder, local_rep, twirl_op

    _need(p["trials"] >= 1, "--trials must be positive")
    worst_gap = worst_min = worst_inv = 0.0
    worst_width = math.inf
    for t in range(p["trials"]):
        dS, dR = 2, 2 + t % 2
        repS, repR = ladder(dS), ladder(dR)
        theta = random_state(dS * dR, rng).mat
        M = mutual_coherence(theta, repS, repR)
        E = mutual_coherence_witness(theta, repS, repR).mat
        dephased = twirl_op(theta, local_rep(repS, (dS, dR), 0)).mat
        worst_gap = max(worst_gap, abs(float(np.real(np.trace((theta - dephased) @ E))) - M))
        # the min{C_S, C_R} bound is a statement about product states
        rS, rR = random_state(dS, rng).mat, random_state(dR, rng).mat
        Mp = mutual_coherence(product_state(rS, rR), repS, repR)
        worst_min = max(worst_min, Mp - min(absolute_coherence(rS, repS), absolute_coherence(rR, repR)))
        inv = product_state(random_state(dS, rng).mat, twirl_op(random_state(dR, rng).mat, repR).mat)
        worst_inv = max(worst_inv, mutual_coherence(inv, repS, repR))
        rho = random_state(8, rng).mat
        worst_width = min(worst_width, coherence_width_bound_check(rho, canonical_reference(8), p["epsilon"], p["bins"]))
    rep.results.update(witness_gap=worst_gap, width_bound_min_margin=worst_width)
    rep.check("witness_attains_closed_form", worst_gap, 1e-10)
    rep.check("bounded_by_local_coherence", max(0.0, worst_min), 1e-10)
    rep.check("invariant_reference_gives_zero", worst_inv, 1e-10)
    rep.check("coherence_width_bound", max(0.0, -worst_width), 1e-10)


def _cmd_pom_validate(p, rng, rep):
    from .pom import build_phase_pom, damped_phase_matrix, localisation_margin, norm1_defects, pom_validate
    from .symmetry import ladder

    _need(p["dim"] >= 1 and p["bins"] >= 1, "--dim and --bins must be positive")
    _need(abs(p["damping"]) <= 1, "--damping must lie in [-1, 1]")
    f = build_phase_pom(p["dim"], damped_phase_matrix(p["dim"], p["damping"]), p["bins"])
    r = pom_validate(f, ladder(p["dim"]))
    rep.check("positivity", r.positivity, r.tol)
    rep.check("upper", r.upper, r.tol)
    rep.check("normalization", r.normalization, r.tol)
    rep.check("covariance", r.covariance, r.tol)
    d = norm1_defects(f)
    rep.results["norm1_defect_nonzero"] = d["nonzero"]
    rep.results["norm1_defect_all"] = d["all"]
    if p["damping"] == 1.0:
        rho = np.ones((p["dim"], p["dim"])) / p["dim"]
        rep.results["localisation_margin_one_bin"] = localisation_margin(rho, f, [0])


def _cmd_way(p, rng, rep):
    from .measure import (apparatus_spread, copy_scheme, relative_phase_distance, relative_phase_scheme,
                          swap_scheme, way_report)

    _need(p["n"] >= 1, "--n must be >= 1")
    w = way_report(swap_scheme(3))
    for k, v in w.as_dict().items():
        rep.results[f"swap_{k}"] = v
    rep.check("swap_commutes", w.commutation, 1e-12)
    s = copy_scheme(2, np.array([[1, 1], [1, -1]]) / math.sqrt(2))
    sig3 = np.diag([1.0, -1.0]).astype(complex)
    w = way_report(s, sig3, sig3)
    for k, v in w.as_dict().items():
        rep.results[f"sigma1_copy_{k}"] = v
    rep.check("way_consistency", 0.0 if w.passed else 1.0, 0.0)
    dists = []
    for n in sorted({1, 2, 4, p["n"]}):
        dists.append((apparatus_spread(relative_phase_scheme(n)), relative_phase_distance(n)))
    rep.results["spread_sweep"] = [list(x) for x in dists]
    rep.check("distance_decreases_with_spread", float(max(0.0, max(np.diff([d for _, d in dists])))), 0.0)
    om = np.zeros((p["n"] + 1, p["n"] + 1))
    om[p["n"] // 2, p["n"] // 2] = 1.0
    D = relative_phase_distance(p["n"], om)
    rep.results["number_state_distance"] = D
    rep.check("number_state_exceeds_1_32", max(0.0, 1 / 32 - D), 0.0)


def _cmd_strong_way(p, rng, rep):
    from .measure import MeasurementScheme, _ground, conserving_coupling, load_scheme, sharp_pom, strong_way_check

    if p["scheme"]:
        s = load_scheme(p["scheme"])
        _need(s.L_S is not None, "scheme file needs L_S for the strong WAY check")
        r = strong_way_check(s)
        rep.results.update(hypothesis=r.hypothesis, skipped=r.skipped)
        if not r.skipped:
            rep.check("invariance", r.residual, 1e-9)
        return
    d = p["dim"]
    _need(d >= 2, "--dim must be >= 2")
    L = np.diag(np.arange(d)).astype(complex)
    worst = 0.0
    for t in range(p["trials"]):
        U = conserving_coupling(L, d, rng, "blocks" if t % 2 == 0 else "exp")
        r = strong_way_check(MeasurementScheme(d, d, U, sharp_pom(d), _ground(d), L_S=L))
        _need(not r.skipped, "constructed coupling failed the conservation hypothesis")
        worst = max(worst, r.residual)
    rep.results["max_invariance_residual"] = worst
    rep.check("invariance", worst, 1e-9)


def _cmd_smear(p, rng, rep):
    from .measure import binomial_kernel, smeared_restriction_check

    try:
        X = [int(x) for x in str(p["values"]).split(",") if x.strip()]
    except ValueError:
        raise InputError("--values must be comma-separated integers") from None
    _need(bool(X), "--values must not be empty")
    _need(p["kernel_n"] >= 0 and p["phi_n"] >= 0, "kernel sizes must be nonnegative")
    r = smeared_restriction_check(binomial_kernel(p["kernel_n"]), np.sqrt(binomial_kernel(p["phi_n"])), X)
    rep.results.update({f"variance_{k}": v for k, v in r.variances.items()})
    rep.results.update({f"width_margin_eps_{k:g}": v for k, v in r.width_margins.items()})
    rep.check("effect_identity", r.effect_residual, 1e-12)
    rep.check("variance_additivity", r.variance_residual, 1e-10)
    rep.check("width_monotone", max(0, -min(r.width_margins.values())), 0)


COMMANDS = {
    "model1": _cmd_model1, "model2": _cmd_model2, "model3": _cmd_model3, "qubit": _cmd_qubit,
    "as": _cmd_as, "as-nogo": _cmd_as_nogo, "dowling": _cmd_dowling, "appendix": _cmd_appendix,
    "bounds": _cmd_bounds, "coherence": _cmd_coherence, "pom-validate": _cmd_pom_validate,
    "way": _cmd_way, "strong-way": _cmd_strong_way, "smear": _cmd_smear,
}


def run_command(command: str, params: dict, seed=None, provenance=None, timing: bool = False) -> Report:
    rep = Report(command, params, provenance or {}, seed)
    rng = make_rng(seed if seed is not None else 0)
    t0 = time.perf_counter()
    COMMANDS[command](params, rng, rep)
    if timing:
        rep.wall_clock = time.perf_counter() - t0
    return rep


def _default_path(command: str, fmt: str):
    d = os.environ.get(OUTPUT_DIR_ENV)
    return os.path.join(d, f"{command}.{fmt}") if d else None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params, prov, seed = resolve(args)
        rep = run_command(args.command, params, seed, prov, args.timing)
        emit_report(rep, args.format, args.out or _default_path(args.command, args.format))
    except InputError as exc:
        print(f"relframes: error: {exc}", file=sys.stderr)
        return 2
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())

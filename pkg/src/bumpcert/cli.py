"""Experiment harness: batch verification suites, reports and the bump table.

Subcommands:
  verify <suite> --config FILE [--seed N] [--trials N] [--out DIR]
  report --in DIR
  bump --config FILE

Exit codes: 0 all checks passed, 1 an inequality failed, 2 usage error.
Reports are deterministic: identical (config, seed) give identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import bellman, embedding, generate, operators
from .dyadic import (Lattice, a2_constant, all_dist_fns, bump_constant,
                     orlicz_bump_constant)
from .gauge import (BumpGauge, T_scalar, YoungFunction, gauge_from_config,
                    head_tail_constant, orlicz_norm)

SUITE_NAMES = [
    "bellman-two-point", "bellman-multi", "bellman-T", "bellman-drop",
    "embed-25", "embed-26", "shift-norm", "para-norm", "complexity-growth",
    "lemma-1-1", "telescope",
]


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise UsageError(f"malformed config {path}: line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def normalize_config(cfg: dict) -> dict:
    out = dict(cfg)
    gauges = cfg.get("gauges")
    if gauges is None:
        gauges = [cfg.get("gauge", {"family": "log", "alpha": 2.0})]
    if not isinstance(gauges, list) or not gauges:
        raise UsageError("field 'gauges' must be a non-empty list of gauge specs")
    out["gauges"] = gauges
    lat = cfg.get("lattice", {})
    depth = int(lat.get("depth", 8))
    branching = int(lat.get("branching", 2))
    if depth < 1 or branching < 2:
        raise UsageError("field 'lattice': need depth >= 1 and branching >= 2")
    if depth * np.log2(branching) > 20:
        raise UsageError(f"field 'lattice': depth*log2(branching) = "
                         f"{depth * np.log2(branching):.3g} exceeds the leaf guard 20")
    out["lattice"] = {"depth": depth, "branching": branching,
                      "masses": lat.get("masses", "equal"),
                      "seed": lat.get("seed", 0)}
    out["trials"] = int(cfg.get("trials", 100))
    if out["trials"] < 0:
        raise UsageError("field 'trials' must be >= 0")
    out["seed"] = int(cfg.get("seed", 0))
    out["tolerance"] = float(cfg.get("tolerance", 1e-9))
    if out["tolerance"] <= 0:
        raise UsageError("field 'tolerance' must be positive")
    out["weight_v"] = cfg.get("weight_v", {"kind": "lognormal", "sigma": 1.0})
    out["weight_w"] = cfg.get("weight_w", {"kind": "lognormal", "sigma": 1.0})
    out["operator"] = cfg.get("operator", {"type": "shift", "complexity": 1,
                                           "mode": "random"})
    return out


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_lattice(cfg: dict) -> Lattice:
    spec = cfg["lattice"]
    if spec["masses"] == "equal":
        return Lattice.uniform(spec["depth"], spec["branching"])
    if spec["masses"] == "random":
        rng = np.random.default_rng(int(spec["seed"]))
        return generate.random_lattice(spec["depth"], rng,
                                       max_branching=spec["branching"])
    raise UsageError("field 'lattice.masses' must be 'equal' or 'random'")


def build_gauges(cfg: dict) -> list[BumpGauge]:
    try:
        return [gauge_from_config(spec) for spec in cfg["gauges"]]
    except (ValueError, KeyError) as e:
        raise UsageError(f"field 'gauges': {e}")


def _weights_pair(cfg, lattice, rng):
    spec_v, spec_w = cfg["weight_v"], cfg["weight_w"]
    if spec_v.get("kind") == "a2-extremal-pair":
        v, w, _ = generate.generate_weights(spec_v, lattice, rng)
        return v, w
    v = generate.generate_weights(spec_v, lattice, rng)
    w = generate.generate_weights(spec_w, lattice, rng)
    return v, w


def _normalized_pair(cfg, lattice, rng, gw, gv):
    """Weights rescaled so sup over cells of n_gw(N^w) * n_gv(N^v) <= 1."""
    v, w = _weights_pair(cfg, lattice, rng)
    rho, _, _ = bump_constant(v, w, gv, gw)
    if rho > 0:
        v = v.scaled(1.0 / rho)
    return v, w


# ---------------------------------------------------------------------------
# suites: each yields dict rows {trial, slack, lhs, rhs, witness}
# ---------------------------------------------------------------------------

def _row(trial, slack, lhs, rhs, witness):
    return {"trial": trial, "slack": float(slack), "lhs": float(lhs),
            "rhs": float(rhs), "witness": witness}


def suite_bellman_two_point(cfg, gauges, lattice):
    for trial in range(cfg["trials"]):
        rng = generate.trial_rng(cfg["seed"], trial)
        for g in gauges:
            n1, n2 = generate.random_dist_pair(rng)
            f1, f2 = rng.normal(scale=2.0, size=2)
            rep = bellman.check_two_point(float(f1), n1, float(f2), n2, g)
            yield _row(trial, rep.slack, rep.lhs, rep.rhs,
                       f"alpha={g.alpha};f1={f1:.6g};f2={f2:.6g}")


def suite_bellman_multi(cfg, gauges, lattice):
    for trial in range(cfg["trials"]):
        rng = generate.trial_rng(cfg["seed"], trial)
        for g in gauges:
            alphas, fs, dists = generate.random_multi_instance(rng)
            rep = bellman.check_multi_point(alphas, fs, dists, g)
            x = fs - float(np.dot(alphas, fs))
            slack = rep.slack
            note = ""
            if np.any(x != 0):
                beta = bellman.balanced_signs(alphas, x)
                achieved = float(alphas @ (beta * x))
                l1 = float(alphas @ np.abs(x))
                balance = abs(float(alphas @ beta))
                sign_slack = achieved - 0.5 * l1
                slack = min(slack, sign_slack, 1e-12 - balance)
                note = f";signs={achieved / l1:.4f}"
            yield _row(trial, slack, rep.lhs, rep.rhs,
                       f"alpha={g.alpha};n={len(alphas)}{note}")


def suite_bellman_T(cfg, gauges, lattice):
    for trial in range(cfg["trials"]):
        rng = generate.trial_rng(cfg["seed"], trial)
        for g in gauges:
            A = rng.uniform(1.0, 2.0, size=100)
            N = rng.uniform(0.01, 1.0, size=100)
            rep = T_scalar(g, A, N)
            grad = -rep.dA - N * N / (4.0 * g.phi(N))
            det = rep.hessian_det()
            slack = min(float(grad.min()), float(rep.dAA.min()),
                        float(det.min()) + 1e-12)
            yield _row(trial, slack, float(grad.min()), 0.0,
                       f"alpha={g.alpha};points=100")


def suite_bellman_drop(cfg, gauges, lattice):
    for trial in range(cfg["trials"]):
        rng = generate.trial_rng(cfg["seed"], trial)
        for g in gauges:
            alphas, fs, dists = generate.random_multi_instance(rng, n_max=8)
            Ms = rng.uniform(0.0, 1.0, size=len(alphas))
            room = 1.0 - float(alphas @ Ms)
            a = float(rng.uniform(0.0, room))
            rep = bellman.check_drop(alphas, a, fs, dists, Ms, g)
            yield _row(trial, rep.slack, rep.lhs, rep.rhs,
                       f"alpha={g.alpha};a={a:.6g};n={len(alphas)}")


def suite_embed_25(cfg, gauges, lattice):
    for trial in range(cfg["trials"]):
        rng = generate.trial_rng(cfg["seed"], trial)
        _, w = _weights_pair(cfg, lattice, rng)
        f = rng.normal(size=lattice.n_leaves)
        for g in gauges:
            rep = embedding.embed_sum_25(f, w, g)
            yield _row(trial, rep.bound - rep.ratio, rep.ratio, rep.bound,
                       f"alpha={g.alpha};argmax={lattice.path(rep.argmax_cell)!r}")


def suite_embed_26(cfg, gauges, lattice):
    for trial in range(cfg["trials"]):
        rng = generate.trial_rng(cfg["seed"], trial)
        _, w = _weights_pair(cfg, lattice, rng)
        f = rng.normal(size=lattice.n_leaves)
        seq = generate.random_carleson(lattice, rng)
        for g in gauges:
            rep = embedding.embed_sum_26(f, w, g, seq)
            yield _row(trial, rep.bound - rep.ratio, rep.ratio, rep.bound,
                       f"alpha={g.alpha};argmax={lattice.path(rep.argmax_cell)!r}")


def suite_shift_norm(cfg, gauges, lattice):
    g1 = gauges[0]
    g2 = gauges[1] if len(gauges) > 1 else gauges[0]
    bound = float(np.sqrt(g1.diff_embed_bound * g2.diff_embed_bound))
    mode = cfg["operator"].get("mode", "random")
    for trial in range(cfg["trials"]):
        rng = generate.trial_rng(cfg["seed"], trial)
        v, w = _normalized_pair(cfg, lattice, rng, g1, g2)
        if mode == "extremal":
            f = rng.normal(size=lattice.n_leaves)
            h = rng.normal(size=lattice.n_leaves)
            shift = operators.worst_kernel(f, h, v, w, complexity=1)
        else:
            shift = operators.random_shift(lattice, 1, rng)
        norm = operators.two_weight_norm(shift, v, w)
        yield _row(trial, bound - norm, norm, bound, f"mode={mode}")


def suite_para_norm(cfg, gauges, lattice):
    g1 = gauges[0]
    g2 = gauges[1] if len(gauges) > 1 else gauges[0]
    bound = float(np.sqrt(g1.carleson_embed_bound * g2.diff_embed_bound))
    for trial in range(cfg["trials"]):
        rng = generate.trial_rng(cfg["seed"], trial)
        v, w = _normalized_pair(cfg, lattice, rng, g1, g2)
        pp = operators.random_paraproduct(lattice, rng)
        norm = operators.two_weight_norm(pp, v, w)
        yield _row(trial, bound - norm, norm, bound,
                   f"root_load={pp.carleson.loads[0]:.6g}")


def suite_complexity_growth(cfg, gauges, lattice):
    g1 = gauges[0]
    g2 = gauges[1] if len(gauges) > 1 else gauges[0]
    n = int(cfg["operator"].get("complexity", 2))
    base = float(np.sqrt(g1.diff_embed_bound * g2.diff_embed_bound))
    for trial in range(cfg["trials"]):
        rng = generate.trial_rng(cfg["seed"], trial)
        v, w = _normalized_pair(cfg, lattice, rng, g1, g2)
        shift = operators.random_shift(lattice, n, rng)
        norm = operators.two_weight_norm(shift, v, w)
        parts = operators.decompose_complexity(shift)
        err = float(np.max(np.abs(shift.assemble() -
                                  sum(p.assemble() for p in parts))))
        slack = min(n * base - norm, 1e-12 - err)
        yield _row(trial, slack, norm, n * base,
                   f"complexity={n};reassembly_err={err:.3g}")


def suite_lemma_1_1(cfg, gauges, lattice):
    for g in gauges:
        if g.alpha is None:
            raise UsageError("lemma-1-1 needs log-family gauges (matched Young pair)")
    youngs = {g.alpha: YoungFunction.log_power(g.alpha) for g in gauges}
    consts = {g.alpha: head_tail_constant(g, youngs[g.alpha])["C_L"] for g in gauges}
    for trial in range(cfg["trials"]):
        rng = generate.trial_rng(cfg["seed"], trial)
        _, w = _weights_pair(cfg, lattice, rng)
        dists = None
        for g in gauges:
            dists = dists or all_dist_fns(w)
            npsi = dists.n_psi_all(g)
            worst, arg = -np.inf, 0
            for i in range(lattice.n_cells):
                lo, hi = lattice.leaf_lo[i], lattice.leaf_hi[i]
                nrm = orlicz_norm(list(zip(lattice.leaf_mass[lo:hi],
                                           w.values[lo:hi])), youngs[g.alpha])
                if nrm <= 0:
                    continue
                r = npsi[i] / nrm
                if r > worst:
                    worst, arg = r, i
            cl = consts[g.alpha]
            yield _row(trial, cl - worst, worst, cl,
                       f"alpha={g.alpha};argmax={lattice.path(arg)!r}")


def suite_telescope(cfg, gauges, lattice):
    for trial in range(cfg["trials"]):
        rng = generate.trial_rng(cfg["seed"], trial)
        _, w = _weights_pair(cfg, lattice, rng)
        f = rng.normal(size=lattice.n_leaves)
        seq = generate.random_carleson(lattice, rng)
        for g in gauges:
            rows25 = embedding.telescope_audit_25(f, w, g, roots=[0])
            rows26 = embedding.telescope_audit_26(f, w, g, seq, roots=[0])
            slack = min(min((r.slack for r in rows25), default=0.0),
                        min((r.slack for r in rows26), default=0.0))
            cap = min((r.energy_cap - r.rhs for r in rows25 + rows26), default=0.0)
            gen_worst = min(rows25 + rows26, key=lambda r: r.slack, default=None)
            yield _row(trial, min(slack, cap),
                       gen_worst.partial_lhs if gen_worst else 0.0,
                       gen_worst.rhs if gen_worst else 0.0,
                       f"alpha={g.alpha};generation={gen_worst.generation if gen_worst else 0}")


SUITES = {
    "bellman-two-point": suite_bellman_two_point,
    "bellman-multi": suite_bellman_multi,
    "bellman-T": suite_bellman_T,
    "bellman-drop": suite_bellman_drop,
    "embed-25": suite_embed_25,
    "embed-26": suite_embed_26,
    "shift-norm": suite_shift_norm,
    "para-norm": suite_para_norm,
    "complexity-growth": suite_complexity_growth,
    "lemma-1-1": suite_lemma_1_1,
    "telescope": suite_telescope,
}


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def run_suite(suite: str, cfg: dict, out_dir: Path) -> int:
    if suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITE_NAMES)}")
    gauges = build_gauges(cfg)
    lattice = build_lattice(cfg)
    tol = cfg["tolerance"]
    rows = list(SUITES[suite](cfg, gauges, lattice))
    failures = [r for r in rows
                if r["slack"] < -tol * (1.0 + abs(r["rhs"]))]
    out_dir.mkdir(parents=True, exist_ok=True)

    csv_path = out_dir / f"{suite}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "slack", "lhs", "rhs", "witness"])
        for r in rows:
            writer.writerow([r["trial"], repr(r["slack"]), repr(r["lhs"]),
                             repr(r["rhs"]), r["witness"]])

    slacks = np.array([r["slack"] for r in rows]) if rows else np.empty(0)
    hist_path = out_dir / f"{suite}_hist.csv"
    with open(hist_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count"])
        if len(slacks):
            counts, edges = np.histogram(slacks, bins=20)
            for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                writer.writerow([repr(float(lo)), repr(float(hi)), int(c)])

    summary = [
        f"# {suite}",
        "",
        f"- config hash: `{config_hash(cfg)}`",
        f"- seed: {cfg['seed']}",
        f"- trials: {cfg['trials']}",
        f"- rows: {len(rows)}",
        f"- min slack: {repr(float(slacks.min())) if len(slacks) else 'n/a'}",
        f"- tolerance: {repr(cfg['tolerance'])}",
        f"- failures: {len(failures)}",
        f"- verdict: {'PASS' if not failures else 'FAIL'}",
        "",
    ]
    for r in failures[:20]:
        summary.append(f"  - FAIL trial {r['trial']}: slack={r['slack']!r} witness={r['witness']}")
    (out_dir / f"{suite}_summary.md").write_text("\n".join(summary) + "\n")

    print(f"{suite}: {len(rows)} rows, "
          f"min slack {slacks.min() if len(slacks) else float('nan'):.3g}, "
          f"{'PASS' if not failures else f'FAIL ({len(failures)} rows)'}")
    return 0 if not failures else 1


def run_report(in_dir: Path) -> int:
    files = sorted(in_dir.glob("*.csv"))
    files = [f for f in files if not f.stem.endswith("_hist")]
    if not files:
        raise UsageError(f"no suite CSVs found in {in_dir}")
    print(f"{'suite':24s} {'rows':>6s} {'min slack':>14s} {'max lhs':>14s}")
    for path in files:
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            print(f"{path.stem:24s} {0:6d} {'n/a':>14s} {'n/a':>14s}")
            continue
        slacks = [float(r["slack"]) for r in rows]
        lhss = [float(r["lhs"]) for r in rows]
        print(f"{path.stem:24s} {len(rows):6d} {min(slacks):14.4g} {max(lhss):14.4g}")
    return 0


def run_bump(cfg: dict) -> int:
    gauges = build_gauges(cfg)
    lattice = build_lattice(cfg)
    rng = np.random.default_rng(cfg["seed"])
    v, w = _weights_pair(cfg, lattice, rng)
    g1 = gauges[0]
    g2 = gauges[1] if len(gauges) > 1 else gauges[0]
    a2, a2_cell = a2_constant(v, w)
    nb, nb_cell, _ = bump_constant(v, w, g1, g2)
    print(f"{'constant':28s} {'value':>14s}  witness")
    print(f"{'A2 (p=2, symmetric)':28s} {a2:14.6g}  cell {lattice.path(a2_cell)!r}")
    print(f"{'n-functional bump':28s} {nb:14.6g}  cell {lattice.path(nb_cell)!r}")
    if all(g.alpha is not None for g in (g1, g2)):
        y1 = YoungFunction.log_power(g1.alpha)
        y2 = YoungFunction.log_power(g2.alpha)
        ob, ob_cell = orlicz_bump_constant(v, w, y1, y2)
        print(f"{'Orlicz bump (log-power)':28s} {ob:14.6g}  cell {lattice.path(ob_cell)!r}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bumpcert",
        description="numerical certification of two-weight bump inequalities")
    sub = parser.add_subparsers(dest="command")

    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("suite", choices=SUITE_NAMES + ["all"])
    p_verify.add_argument("--config", required=True)
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--trials", type=int, default=None)
    p_verify.add_argument("--out", default="bumpcert-report")

    p_report = sub.add_parser("report", help="summarize a report directory")
    p_report.add_argument("--in", dest="in_dir", required=True)

    p_bump = sub.add_parser("bump", help="print the bump-constants table")
    p_bump.add_argument("--config", required=True)

    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 2
        if args.command == "verify":
            cfg = normalize_config(load_config(args.config))
            if args.seed is not None:
                cfg["seed"] = args.seed
            if args.trials is not None:
                if args.trials < 0:
                    raise UsageError("--trials must be >= 0")
                cfg["trials"] = args.trials
            suites = SUITE_NAMES if args.suite == "all" else [args.suite]
            code = 0
            for s in suites:
                code = max(code, run_suite(s, cfg, Path(args.out)))
            return code
        if args.command == "report":
            return run_report(Path(args.in_dir))
        if args.command == "bump":
            return run_bump(normalize_config(load_config(args.config)))
        return 2
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

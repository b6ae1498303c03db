"""Command-line harness: ``modelkit <subcommand> [options]``.

Every subcommand prints a JSON report (schema ``modelkit/1``) to standard
output, or to ``--out`` where that flag names the report. The exit code is 0
iff every diagnostic in the report passes; otherwise the first failing
diagnostic is named on standard error.

Randomness comes from ``--seed`` split per subcommand label, see
:func:`modelkit.report.derive_rng`.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from modelkit import causal, confidence, data_model, envelope, pls_population, pls_sample
from modelkit import quantum_conceptual as qc
from modelkit.errors import ModelkitError
from modelkit.report import Report, derive_rng, derive_seed, dumps, matrix_rows, vector_rows


def _sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".json")


# -- gen ---------------------------------------------------------------------

def cmd_gen(args) -> Report:
    rng = derive_rng(args.seed, f"gen/{args.model}")
    if args.model == "population":
        ev = pls_population.separated_eigenvalues(rng, args.p, args.m)
        model = pls_population.random_model(rng, args.p, args.m, eigenvalues=ev,
                                            noise_var=args.noise, leading=True)
        sigma_x, beta = model.sigma_x, model.beta
        phi = pls_population.krylov_space(model).basis
        L = np.linalg.cholesky(sigma_x)
        x = rng.standard_normal((args.n, args.p)) @ L.T
        y = x @ beta + math.sqrt(args.noise) * rng.standard_normal(args.n)
        d = data_model.Dataset(x, y)
    else:
        spec = envelope.random_envelope(rng, args.p, args.m)
        sigma_x, beta, phi = spec.sigma_x, spec.b[:, 0], spec.phi
        d = envelope.sample_from_envelope(spec, args.n, args.noise,
                                          derive_seed(args.seed, "gen/envelope/sample"))
    out = Path(args.out)
    data_model.save_csv(d, out)
    sidecar = {
        "schema": "modelkit/1",
        "model": args.model,
        "p": args.p, "m": args.m, "n": args.n, "noise": args.noise, "seed": args.seed,
        "sigma_x": sigma_x, "beta": beta, "phi": phi,
    }
    _sidecar_path(out).write_text(dumps(sidecar), encoding="utf-8")

    rep = Report("gen", {"model": args.model, "p": args.p, "m": args.m, "n": args.n,
                         "noise": args.noise, "out": str(out)}, args.seed)
    back = data_model.load_csv(out)
    rep.check("csv round trip", np.array_equal(back.x, d.x) and np.array_equal(back.y, d.y))
    rep.tables["beta"] = vector_rows(beta)
    return rep


# -- fit ---------------------------------------------------------------------

def cmd_fit(args) -> Report:
    path = Path(args.data)
    d = data_model.load_csv(path)
    params = {"data": str(path), "method": args.method, "m": args.m,
              "cv_folds": args.cv_folds, "m_max": args.m_max}
    rep = Report("fit", params, args.seed)
    scale = max(float(np.max(np.abs(d.x))), float(np.max(np.abs(d.y))), 1.0)

    if args.method == "ols":
        beta, intercept = data_model.ols_fit(d)
        dc = data_model.center(d)[0]
        r = dc.y - dc.x @ beta
        orth = float(np.max(np.abs(dc.x.T @ r)))
        tol = 1e-8 * float(np.linalg.norm(d.y))
        rep.check("residuals orthogonal to predictors", orth <= tol, orth, tol)
        rep.tables["fit"] = [{"intercept": intercept}]
    else:
        if args.m is None:
            folds = args.cv_folds or pls_sample.default_folds(d.n)
            limit = pls_sample.max_cv_components(d.n, d.p, folds)
            m_max = min(limit, args.m_max) if args.m_max else min(limit, 10)
            cv = pls_sample.cross_validate(d, m_max, folds,
                                           derive_seed(args.seed, "fit/cv"))
            m = cv.m_star
            rep.tables["press"] = [{"m": k + 1, "press": float(v)} for k, v in enumerate(cv.press)]
        else:
            m = args.m
        fit = pls_sample.pls_fit(d, m)
        beta = fit.implied_beta
        intercept = fit.mean_y - float(fit.mean_x @ beta)
        err = pls_sample.bilinear_check(fit, d)
        rep.check("bilinear reconstruction", err <= 1e-10 * scale, err, 1e-10 * scale)
        T = fit.scores
        if fit.m > 1:
            norms = np.linalg.norm(T, axis=0)
            G = np.abs(T.T @ T) / np.outer(norms, norms)
            off = float(np.max(G - np.diag(np.diag(G))))
            rep.check("score orthogonality", off <= 1e-8, off, 1e-8)
        rep.tables["fit"] = [{"m": fit.m, "requested_m": m, "intercept": intercept,
                              "degenerate": fit.degenerate}]
    rep.tables["beta_hat"] = vector_rows(beta)

    side = _sidecar_path(path)
    if side.is_file():
        truth = json.loads(side.read_text(encoding="utf-8"))
        if "beta" in truth:
            b = np.asarray(truth["beta"], dtype=float)
            if b.shape == beta.shape:
                rel = float(np.linalg.norm(beta - b) / np.linalg.norm(b)) if np.any(b) else None
                rep.tables["truth"] = [{"relative_error": rel, "true_m": truth.get("m")}]
    return rep


# -- equivalence ---------------------------------------------------------------

def cmd_equivalence(args) -> Report:
    rng = derive_rng(args.seed, "equivalence")
    rows, agree = [], 0
    for rep_i in range(args.reps):
        model = pls_population.random_model(rng, args.p, args.relevant)
        eq = pls_population.check_equivalence(model)
        prec = pls_population.krylov_space(model, "precision").dim
        ok = eq.agree and prec == eq.krylov_dim
        agree += ok
        rows.append({"rep": rep_i, "krylov_dim": eq.krylov_dim,
                     "krylov_dim_precision": prec,
                     "relevant_group_count": eq.relevant_group_count,
                     "pls_stop": eq.pls_stop, "agree": ok})
    rate = agree / args.reps
    rep = Report("equivalence", {"p": args.p, "relevant": args.relevant, "reps": args.reps},
                 args.seed)
    rep.tables["instances"] = rows
    rep.tables["summary"] = [{"agree_rate": rate}]
    rep.check("agree rate", rate == 1.0, rate, 1.0)
    rep.check("common dimension equals relevant",
              all(r["krylov_dim"] == args.relevant for r in rows))
    return rep


# -- confidence ----------------------------------------------------------------

KS_THRESHOLD = 0.04


def cmd_confidence(args) -> Report:
    rep = Report("confidence", {"reps": args.reps, "sigma_factor": args.sigma_factor}, args.seed)
    sigma = 2.0
    truth = confidence.normal_mean_truth(1.0, sigma, 10)

    def normal_builder(data):
        return confidence.normal_mean_confidence(data, sigma * args.sigma_factor)

    u_norm = confidence.coverage_values(normal_builder, truth,
                                        args.reps, derive_seed(args.seed, "confidence/normal"))
    t_truth = confidence.regression_truth([1.5, -0.5], 0.3, 1.0, 20,
                                          x_seed=derive_seed(args.seed, "confidence/design"))
    u_t = confidence.coverage_values(lambda d: confidence.regression_coef_confidence(d, 0),
                                     t_truth, args.reps, derive_seed(args.seed, "confidence/t"))
    rows = []
    for name, u in (("normal_mean", u_norm), ("t_pivot", u_t)):
        ks = confidence.ks_uniform(u)
        row = {"curve": name, "ks": ks}
        for alpha in (0.1, 0.5, 0.9):
            # C(eta_true) <= alpha  <=>  eta_true <= C^-1(alpha)
            row[f"freq_le_{alpha}"] = float(np.mean(u <= alpha))
        rows.append(row)
        rep.check(f"ks {name} < {KS_THRESHOLD}", ks < KS_THRESHOLD, ks, KS_THRESHOLD)
    rep.tables["uniformity"] = rows
    return rep


# -- causal --------------------------------------------------------------------

def cmd_causal(args) -> Report:
    model = causal.load_model(args.model)
    rep = Report("causal", {"model": str(args.model)}, None)
    cond = causal.conditional_r_given_c(model)
    intv = causal.intervention_r_given_c(model)
    rep.tables["conditional_r_given_c"] = matrix_rows(cond.table, "c")
    rep.tables["intervention_r_given_c"] = matrix_rows(intv, "c")
    rep.check("conditional defined for every c", bool(np.all(cond.defined)))
    dev_c = float(np.max(np.abs(cond.table[:, cond.defined].sum(axis=0) - 1.0), initial=0.0))
    dev_i = float(np.max(np.abs(intv.sum(axis=0) - 1.0)))
    rep.check("conditional column-stochastic", dev_c <= 1e-12, dev_c, 1e-12)
    rep.check("intervention column-stochastic", dev_i <= 1e-12, dev_i, 1e-12)
    if np.all(cond.defined):
        div = causal.divergence(model)
        rep.tables["total_variation"] = [{"c": c, "tv": float(v)} for c, v in enumerate(div.per_c)]
        rep.tables["summary"] = [{"max_tv": div.max_tv}]
    return rep


# -- quantum -------------------------------------------------------------------

def _spin_demo(args, rep: Report) -> None:
    d = args.d
    rng = derive_rng(args.seed, "quantum/spin")
    values = np.array([d - 1 - 2 * i for i in range(d)], dtype=float)
    a_z = qc.operator_from_values(values)
    a_x = qc.operator_from_values(values, qc.dft_basis(d))
    rep.tables["values"] = vector_rows(values)
    rep.tables["a_x_real"] = matrix_rows(a_x.matrix.real)
    rep.tables["a_x_imag"] = matrix_rows(a_x.matrix.imag)
    p_z = qc.question_answer_state(a_z, values[0])
    p_x = qc.question_answer_state(a_x, values[0])
    rep.tables["qa_projector_x_real"] = matrix_rows(p_x.real)
    pure = qc.MixedState(p_z)
    rep.tables["pure_z_measure_z"] = vector_rows(qc.measurement_distribution(pure, a_z))
    rep.tables["pure_z_measure_x"] = vector_rows(qc.measurement_distribution(pure, a_x))
    probs = rng.dirichlet(np.ones(d))
    probs = probs / probs.sum()
    rho = qc.mixed_state(probs, a_z.family)
    dist_x = qc.measurement_distribution(rho, a_x)
    rep.tables["mixed_probs"] = vector_rows(probs)
    rep.tables["mixed_measure_x"] = vector_rows(dist_x)
    rep.check("a_z maximal", qc.is_maximal(a_z))
    rep.check("a_x maximal", qc.is_maximal(a_x))
    rep.check("certainty in own question-answer state",
              abs(qc.born_probability(pure, p_z) - 1.0) <= 1e-10)
    dev = abs(float(dist_x.sum()) - 1.0)
    rep.check("distribution sums to 1", dev <= 1e-10, dev, 1e-10)
    ev = np.sort(np.linalg.eigvalsh(a_x.matrix))
    err = float(np.max(np.abs(ev - np.sort(values))))
    rep.check("eigenvalues equal values", err <= 1e-9, err, 1e-9)


def _decision_demo(args, rep: Report) -> None:
    r = args.d
    rng = derive_rng(args.seed, "quantum/decision")
    xi = qc.decision_variable(r)
    f = rng.dirichlet(np.ones(r))
    f = f / f.sum()
    g = rng.dirichlet(np.ones(r))
    g = g / g.sum()
    q = args.attraction * (g - f)
    q = q - q.mean()
    prospects = [qc.Prospect(f"pi{k}", float(fk), float(qk))
                 for k, fk, qk in zip(xi.values, f, q)]
    p = qc.qdt_probabilities(prospects)
    rep.tables["prospects"] = [{"k": int(k), "utility": float(fk), "attraction": float(qk),
                                "probability": float(pk)}
                               for k, fk, qk, pk in zip(xi.values, f, q, p)]
    op = qc.operator_from_values(xi.values)
    rho = qc.mixed_state(p, op.family)
    born = qc.measurement_distribution(rho, op)
    dev = abs(float(p.sum()) - 1.0)
    rep.check("probabilities sum to 1", dev <= 1e-12, dev, 1e-12)
    rep.check("decision variable maximal", qc.is_maximal(op))
    err = float(np.max(np.abs(born - p)))
    rep.check("Born probabilities reproduce p", err <= 1e-10, err, 1e-10)
    if args.attraction == 0:
        rep.check("no attraction gives p = f", bool(np.array_equal(p, f)))


def cmd_quantum(args) -> Report:
    rep = Report("quantum", {"demo": args.demo, "d": args.d, "attraction": args.attraction},
                 args.seed)
    if args.demo == "spin":
        _spin_demo(args, rep)
    else:
        _decision_demo(args, rep)
    return rep


# -- argument parsing ------------------------------------------------------------

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {s}")
    return v


def _positive_float(s):
    v = float(s)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modelkit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a dataset and a sidecar of true parameters")
    g.add_argument("--model", choices=["envelope", "population"], default="population")
    g.add_argument("--p", type=_positive_int, required=True)
    g.add_argument("--m", type=_positive_int, required=True)
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--noise", type=_positive_float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="CSV path; sidecar goes next to it as .json")

    f = sub.add_parser("fit", help="fit PLS or OLS to a CSV dataset")
    f.add_argument("--data", required=True)
    f.add_argument("--method", choices=["pls", "ols"], default="pls")
    f.add_argument("--m", type=_positive_int, default=None,
                   help="number of PLS steps; omitted means choose by cross-validation")
    f.add_argument("--cv-folds", type=_positive_int, default=None)
    f.add_argument("--m-max", type=_positive_int, default=None)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", default=None)

    e = sub.add_parser("equivalence", help="batch check of the population PLS characterizations")
    e.add_argument("--p", type=_positive_int, required=True)
    e.add_argument("--relevant", type=_nonneg_int, required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--reps", type=_positive_int, default=100)
    e.add_argument("--out", default=None)

    c = sub.add_parser("confidence", help="uniformity check of confidence curves")
    c.add_argument("--reps", type=_positive_int, default=2000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--sigma-factor", type=_positive_float, default=1.0,
                   help="multiplies the sigma assumed by the normal-mean curve")
    c.add_argument("--out", default=None)

    k = sub.add_parser("causal", help="conditioning versus intervention tables")
    k.add_argument("--model", required=True, help="JSON model file")
    k.add_argument("--out", default=None)

    q = sub.add_parser("quantum", help="finite-dimensional operator demos")
    q.add_argument("--demo", choices=["spin", "decision"], required=True)
    q.add_argument("--d", type=_positive_int, default=2)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--attraction", type=float, default=0.0,
                   help="decision demo: mixing weight in [0, 1] for attraction factors")
    q.add_argument("--out", default=None)
    return ap


COMMANDS = {
    "gen": cmd_gen,
    "fit": cmd_fit,
    "equivalence": cmd_equivalence,
    "confidence": cmd_confidence,
    "causal": cmd_causal,
    "quantum": cmd_quantum,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "gen" and args.m > args.p:
        ap.error(f"--m ({args.m}) must not exceed --p ({args.p})")
    if args.command == "equivalence" and args.relevant > args.p:
        ap.error(f"--relevant ({args.relevant}) must not exceed --p ({args.p})")
    if args.command == "quantum" and not 0.0 <= args.attraction <= 1.0:
        ap.error("--attraction must lie in [0, 1]")
    if args.command == "confidence" and args.reps < 100:
        ap.error("--reps must be at least 100")
    try:
        report = COMMANDS[args.command](args)
    except ModelkitError as exc:
        print(f"modelkit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    text = report.to_json()
    out = getattr(args, "out", None)
    if out and args.command != "gen":
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    failed = report.first_failure()
    if failed is not None:
        print(f"modelkit {args.command}: diagnostic failed: {failed.name}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

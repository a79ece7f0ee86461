"""Evaluation reports and the end-to-end studies behind the figure reproductions.

CSV tables are the authoritative output and contain no timing data, so a
rerun with the same seed reproduces them byte for byte.  SVG files are
renderings of the same tables.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ann
from . import experiment as ex
from . import measurement as ms
from . import svg
from .io import fmt, save_model, write_json

NEAR_BOUNDARY = 0.1
NONLINEAR_NNES = (0, 5, 10, 100)
CLASS_NAMES = ("I", "II", "III")
FIGURES = ("fig3", "figS1", "fig4", "fig5")


class PlanMismatchError(ValueError):
    pass


def plans_match(a, b) -> bool:
    pa, pb = ms.get_plan(a), ms.get_plan(b)
    return all(np.allclose(x, y, atol=1e-12, rtol=0) for x, y in
               zip((pa.a0, pa.a1, pa.b0, pa.b1), (pb.a0, pb.a1, pb.b0, pb.b1)))


def is_xz_plan(plan) -> bool:
    return plans_match(plan, "xz")


def source_of(dataset) -> ex.SourceModel | None:
    src = dataset.provenance.get("source")
    return None if src is None else ex.SourceModel.from_dict(src)


def state_keys(dataset) -> list[tuple[float, float]]:
    """Distinct (theta, phi) pairs in order of first appearance."""
    seen = {}
    for t, f in zip(dataset.theta, dataset.phi):
        seen.setdefault((float(t), float(f)), None)
    return list(seen)


@dataclass
class EvalReport:
    per_state: list
    overall: float
    mean_per_state: float
    confusion: dict
    mismatches: list
    baselines: dict = field(default_factory=dict)

    def near_boundary_fraction(self, width: float = NEAR_BOUNDARY) -> float:
        """Share of mismatches within ``width`` of their state's PPT boundary (1 if none)."""
        if not self.mismatches:
            return 1.0
        near = [m for m in self.mismatches
                if m["p_star"] is not None and abs(m["p"] - m["p_star"]) < width]
        return len(near) / len(self.mismatches)

    def to_dict(self) -> dict:
        return {
            "overall_match_rate": self.overall,
            "mean_per_state_match_rate": self.mean_per_state,
            "per_state": self.per_state,
            "confusion": self.confusion,
            "n_mismatches": len(self.mismatches),
            "near_boundary_fraction": self.near_boundary_fraction(),
            "baselines": self.baselines,
        }


def evaluate_labels(predicted, dataset, source="provenance", with_baselines=True) -> EvalReport:
    """Compare predicted labels with the dataset labels.

    p* per state comes from the source model recorded in the dataset
    provenance (the ideal family for theory data) unless ``source`` is given.
    """
    pred = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(dataset.labels, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"{len(pred)} predictions for {len(truth)} samples")
    if len(truth) == 0:
        raise ValueError("empty evaluation set")
    m = source_of(dataset) if source == "provenance" else source
    hit = pred == truth
    per_state, mismatches = [], []
    for theta, phi in state_keys(dataset):
        mask = (dataset.theta == theta) & (dataset.phi == phi)
        p_star = ex.boundary_for(theta, phi, m)
        per_state.append({
            "theta": theta, "phi": phi, "n": int(mask.sum()),
            "matches": int(hit[mask].sum()), "match_rate": float(hit[mask].mean()),
            "p_star": p_star,
        })
        for i in np.flatnonzero(mask & ~hit):
            mismatches.append({
                "theta": theta, "phi": phi, "p": float(dataset.p[i]),
                "true_label": int(truth[i]), "predicted": int(pred[i]), "p_star": p_star,
            })
    confusion = {
        "true_entangled": int(np.sum((truth == 1) & (pred == 1))),
        "true_separable": int(np.sum((truth == 0) & (pred == 0))),
        "false_entangled": int(np.sum((truth == 0) & (pred == 1))),
        "false_separable": int(np.sum((truth == 1) & (pred == 0))),
    }
    report = EvalReport(per_state, float(hit.mean()),
                        float(np.mean([s["match_rate"] for s in per_state])),
                        confusion, mismatches)
    if with_baselines and is_xz_plan(dataset.plan):
        for name, clf in chsh_baselines().items():
            r = evaluate_labels(ann.predict(clf, dataset.features), dataset, m, False)
            report.baselines[name] = {"overall_match_rate": r.overall,
                                      "mean_per_state_match_rate": r.mean_per_state}
    return report


def chsh_baselines() -> dict:
    return {"chsh_any": ann.ChshBaseline(), "chsh_fixed": ann.ChshBaseline(ms.CHSH_SIGNS)}


def evaluate_model(model, dataset, model_plan, threshold: float = 0.5) -> EvalReport:
    if not plans_match(model_plan, dataset.plan):
        raise PlanMismatchError(
            f"model plan {ms.get_plan(model_plan).name!r} differs from dataset plan "
            f"{dataset.plan.name!r}; features are plan-relative"
        )
    return evaluate_labels(ann.predict(model, dataset.features, threshold), dataset)


def write_csv(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def write_mismatches(report: EvalReport, path) -> None:
    write_csv(path, ("theta", "phi", "p", "p_star", "true_label", "predicted"),
              [(m["theta"], m["phi"], m["p"], "" if m["p_star"] is None else m["p_star"],
                m["true_label"], m["predicted"]) for m in report.mismatches])


def write_per_state(report: EvalReport, path) -> None:
    write_csv(path, ("theta", "phi", "n", "matches", "match_rate", "p_star"),
              [(s["theta"], s["phi"], s["n"], s["matches"], s["match_rate"],
                "" if s["p_star"] is None else s["p_star"]) for s in report.per_state])


# ---------------------------------------------------------------- studies


def resolve_source(source=None) -> tuple[ex.SourceModel, dict]:
    if source is None:
        cal = ex.calibrate_source()
        return cal.model, cal.to_dict()
    if isinstance(source, dict):
        source = ex.SourceModel.from_dict(source)
    return source, source.to_dict()


@dataclass
class LinearStudy:
    spec: ex.ProtocolSpec
    source: ex.SourceModel
    source_info: dict
    train: ex.Dataset
    test: ex.Dataset
    model: ann.LinearModel
    train_report: ann.TrainReport
    predicted: np.ndarray
    report: EvalReport
    chsh_predicted: dict
    chsh_reports: dict


def run_linear_study(seed=ex.DEFAULT_SEED, shots=ms.DEFAULT_SHOTS, source=None,
                     cfg: ann.TrainConfig | None = None) -> LinearStudy:
    """Linear protocol: train the linear classifier, compare it with CHSH on the test split."""
    m, info = resolve_source(source)
    spec = ex.ProtocolSpec.linear(seed=seed, shots=shots)
    train = ex.gen_linear_dataset(spec, m, "train")
    test = ex.gen_linear_dataset(spec, m, "test")
    model, rep = ann.train_dataset(train, 0, cfg)
    pred = ann.predict(model, test.features)
    chsh_pred = {k: ann.predict(c, test.features) for k, c in chsh_baselines().items()}
    return LinearStudy(
        spec, m, info, train, test, model, rep, pred, evaluate_labels(pred, test),
        chsh_pred, {k: evaluate_labels(v, test, with_baselines=False) for k, v in chsh_pred.items()},
    )


@dataclass
class NonlinearStudy:
    spec: ex.ProtocolSpec
    source: ex.SourceModel
    source_info: dict
    train: ex.Dataset
    test: ex.Dataset
    theory_train: ex.Dataset | None
    models: dict = field(default_factory=dict)
    theory_models: dict = field(default_factory=dict)
    predicted: dict = field(default_factory=dict)
    theory_predicted: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    theory_reports: dict = field(default_factory=dict)


def run_nonlinear_study(seed=ex.DEFAULT_SEED, shots=ms.DEFAULT_SHOTS, source=None,
                        n_nes=NONLINEAR_NNES, theory=True,
                        cfg: ann.TrainConfig | None = None) -> NonlinearStudy:
    """Nonlinear protocol: classifiers of every width trained on experiment (and theory) data."""
    m, info = resolve_source(source)
    spec = ex.ProtocolSpec.nonlinear(seed=seed, shots=shots)
    train, test = ex.gen_nonlinear_dataset(spec, m)
    theory_train = ex.gen_theory_dataset(spec)[0] if theory else None
    st = NonlinearStudy(spec, m, info, train, test, theory_train)
    for n in n_nes:
        st.models[n] = ann.train_dataset(train, n, cfg)
        st.predicted[n] = ann.predict(st.models[n][0], test.features)
        st.reports[n] = evaluate_labels(st.predicted[n], test)
        if theory:
            st.theory_models[n] = ann.train_dataset(theory_train, n, cfg)
            st.theory_predicted[n] = ann.predict(st.theory_models[n][0], test.features)
            st.theory_reports[n] = evaluate_labels(st.theory_predicted[n], test)
    return st


def arch_name(n: int) -> str:
    return "linear" if n == 0 else f"mlp{n}"


# ---------------------------------------------------------------- figure writers


def _p_stars(dataset, m):
    cache = {k: ex.boundary_for(*k, m) for k in state_keys(dataset)}
    return [cache[(float(t), float(f))] for t, f in zip(dataset.theta, dataset.phi)]


def _match_rows(name, report: EvalReport, with_phi=False):
    rows = []
    for s in report.per_state:
        key = (s["theta"], s["phi"]) if with_phi else (s["theta"],)
        rows.append((name, *key, s["n"], s["match_rate"]))
    blank = ("all", "all") if with_phi else ("all",)
    n = sum(s["n"] for s in report.per_state)
    rows.append((name, *blank, n, report.overall))
    rows.append((name, *(("mean",) * len(blank)), len(report.per_state), report.mean_per_state))
    return rows


def write_fig3(study: LinearStudy, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    test = study.test
    ps = _p_stars(test, study.source)
    write_csv(out / "fig3_labels.csv",
              ("theta", "p", "p_star", "true_label", "linear_label", "chsh_label"),
              [(float(test.theta[i]), float(test.p[i]), ps[i], int(test.labels[i]),
                int(study.predicted[i]), int(study.chsh_predicted["chsh_any"][i]))
               for i in range(len(test))])
    rows = _match_rows("linear", study.report)
    for k, r in study.chsh_reports.items():
        rows += _match_rows(k, r)
    write_csv(out / "fig3_match.csv", ("classifier", "theta", "n", "match_rate"), rows)
    mism = study.predicted != test.labels
    svg.label_wheel(test.theta, test.p, study.predicted, mism,
                    "Linear classifier labels, linear protocol test set").save(out / "fig3_wheel.svg")
    names = ["linear", *study.chsh_reports]
    vals = [study.report.overall, *(r.overall for r in study.chsh_reports.values())]
    svg.bar_chart(names, vals, "Overall test match rate").save(out / "fig3_match.svg")
    save_model(out / "model_linear.json", study.model, plan=test.plan.to_dict(),
               train_config=study.train_report.config, dataset_provenance=study.train.provenance)
    summary = {
        "linear_match_rate": study.report.overall,
        "linear_mean_per_state": study.report.mean_per_state,
        "train_match_rate": study.train_report.train_match_rate,
        "chsh": {k: r.overall for k, r in study.chsh_reports.items()},
        "near_boundary_fraction": study.report.near_boundary_fraction(),
        "n_mismatches": len(study.report.mismatches),
    }
    write_json(out / "fig3_summary.json", summary)
    return summary


def write_figS1(study: LinearStudy, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    test = study.test
    ps = _p_stars(test, study.source)
    any_score = ann.ChshBaseline().score(test.features)
    fixed_score = ann.ChshBaseline(ms.CHSH_SIGNS).score(test.features)
    write_csv(out / "figS1_labels.csv",
              ("theta", "p", "p_star", "true_label", "chsh_label", "chsh_max",
               "chsh_fixed_label", "chsh_fixed"),
              [(float(test.theta[i]), float(test.p[i]), ps[i], int(test.labels[i]),
                int(study.chsh_predicted["chsh_any"][i]), float(any_score[i]),
                int(study.chsh_predicted["chsh_fixed"][i]), float(fixed_score[i]))
               for i in range(len(test))])
    rows = []
    for k, r in study.chsh_reports.items():
        rows += _match_rows(k, r)
    write_csv(out / "figS1_match.csv", ("classifier", "theta", "n", "match_rate"), rows)
    pred = study.chsh_predicted["chsh_any"]
    svg.label_wheel(test.theta, test.p, pred, pred != test.labels,
                    "CHSH labels, linear protocol test set").save(out / "figS1_wheel.svg")
    summary = {k: r.overall for k, r in study.chsh_reports.items()}
    write_json(out / "figS1_summary.json", summary)
    return summary


def _class_index(study: NonlinearStudy, phi: float) -> int:
    return int(np.argmin([abs(phi - f) for f in study.spec.phis]))


def write_fig4(study: NonlinearStudy, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    test = study.test
    ns = sorted(study.predicted)
    ps = _p_stars(test, study.source)
    write_csv(out / "fig4_labels.csv",
              ("theta", "phi", "class", "p", "p_star", "true_label",
               *(f"{arch_name(n)}_label" for n in ns)),
              [(float(test.theta[i]), float(test.phi[i]),
                CLASS_NAMES[_class_index(study, float(test.phi[i]))], float(test.p[i]), ps[i],
                int(test.labels[i]), *(int(study.predicted[n][i]) for n in ns))
               for i in range(len(test))])
    rows = []
    for n in ns:
        rows += _match_rows(arch_name(n), study.reports[n], with_phi=True)
    write_csv(out / "fig4_match.csv", ("classifier", "theta", "phi", "n", "match_rate"), rows)
    thetas = list(study.spec.thetas)
    span = max(thetas) - min(thetas) or 1.0
    panels = []
    for fi in range(len(study.spec.phis)):
        mask = test.phi == study.spec.phis[fi]
        xs = (test.theta[mask] - min(thetas)) / span
        row = [(xs, test.p[mask], test.labels[mask], np.zeros(mask.sum(), bool))]
        for n in ns:
            pred = study.predicted[n][mask]
            row.append((xs, test.p[mask], pred, pred != test.labels[mask]))
        panels.append(row)
    svg.label_grid(panels, [f"class {c}" for c in CLASS_NAMES[:len(panels)]],
                   ["PPT truth", *(arch_name(n) for n in ns)],
                   "Predicted labels on the nonlinear test set").save(out / "fig4_maps.svg")
    summary = {arch_name(n): study.reports[n].overall for n in ns}
    write_json(out / "fig4_summary.json", summary)
    return summary


def _class_rates(study: NonlinearStudy, report: EvalReport) -> list[float]:
    rates = []
    for fi in range(len(study.spec.phis)):
        states = [s for s in report.per_state if s["phi"] == study.spec.phis[fi]]
        rates.append(sum(s["matches"] for s in states) / sum(s["n"] for s in states))
    return rates


def write_fig5(study: NonlinearStudy, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    ns = sorted(study.reports)
    rows = []
    for kind, reports in (("experiment", study.reports), ("theory", study.theory_reports)):
        for n in ns:
            if n in reports:
                r = reports[n]
                rows.append((n, kind, r.overall, r.mean_per_state, *_class_rates(study, r)))
    write_csv(out / "fig5_match.csv",
              ("n_ne", "training", "overall", "mean_per_state",
               *(f"class_{c}" for c in CLASS_NAMES[:len(study.spec.phis)])), rows)
    series = {"experiment": ("#d1495b", [study.reports[n].overall for n in ns])}
    if study.theory_reports:
        series["theory"] = ("#3b6fb6", [study.theory_reports[n].overall for n in ns])
    lo = math.floor(min(min(v) for _, v in series.values()) * 50) / 50
    svg.line_chart([str(n) for n in ns], series,
                   "Match rate on noisy test data vs hidden neurons", lo, 1.0).save(out / "fig5.svg")
    summary = {
        "experiment": {str(n): study.reports[n].overall for n in ns},
        "theory": {str(n): study.theory_reports[n].overall for n in ns if n in study.theory_reports},
    }
    write_json(out / "fig5_summary.json", summary)
    return summary


def reproduce(figures, out, seed=ex.DEFAULT_SEED, shots=ms.DEFAULT_SHOTS, source=None,
              cfg: ann.TrainConfig | None = None, provenance: dict | None = None) -> dict:
    """Run the studies the requested figures need and write their tables into ``out``.

    ``provenance`` is copied into every figure directory.
    """
    out = Path(out)
    figures = list(figures)
    for f in figures:
        if f not in FIGURES:
            raise ValueError(f"unknown figure {f!r}; choose from {FIGURES}")
    results = {}
    if {"fig3", "figS1"} & set(figures):
        lin = run_linear_study(seed, shots, source, cfg)
        if "fig3" in figures:
            results["fig3"] = write_fig3(lin, out / "fig3")
        if "figS1" in figures:
            results["figS1"] = write_figS1(lin, out / "figS1")
    if {"fig4", "fig5"} & set(figures):
        nl = run_nonlinear_study(seed, shots, source, theory="fig5" in figures, cfg=cfg)
        if "fig4" in figures:
            results["fig4"] = write_fig4(nl, out / "fig4")
        if "fig5" in figures:
            results["fig5"] = write_fig5(nl, out / "fig5")
    if provenance is not None:
        for f in figures:
            write_json(out / f / "provenance.json", provenance)
    return results

"""Acceptance criteria 1-10, one PASS/FAIL line each.

Every test records its line (also shown in the terminal summary) before
asserting, so a failing criterion still reports its measured values.
Heavy end-to-end runs are shared through module-scoped fixtures; their wall
clock is measured inside the fixture.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from qsep import ann, harness
from qsep import experiment as ex
from qsep import measurement as ms
from qsep import quantum as q

SEED = ex.DEFAULT_SEED


def record(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def chsh_threshold_bisection(tol=1e-12):
    """Smallest p at which max-over-patterns |CHSH| of Bell-Werner(p) exceeds 2."""
    score = lambda p: ms.chsh_max(ms.features_exact(q.werner_like(q.bell_state(), p), "xz"))
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if score(mid) > 2.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def test_criterion_1_ppt_and_chsh_thresholds():
    t0 = time.perf_counter()
    pstar = q.ppt_boundary(math.pi / 4, 0.0)
    pchsh = chsh_threshold_bisection()
    dt = time.perf_counter() - t0
    ok = abs(pstar - 1 / 3) <= 1e-9 and abs(pchsh - 1 / math.sqrt(2)) <= 1e-6 and dt < 1
    record(1, ok, f"p*={pstar:.12f} (1/3), CHSH threshold={pchsh:.9f} (1/sqrt2), {dt:.3f}s < 1s")


def test_criterion_2_maximal_violation():
    t0 = time.perf_counter()
    bell = ms.chsh_max(ms.features_exact(q.bell_state(), "xz"))
    rotated = ms.chsh_max(ms.features_exact(
        q.density_from_ket(q.ket_from_params(math.pi / 4, math.pi / 2)), "xz"))
    dt = time.perf_counter() - t0
    ok = abs(bell - 2 * math.sqrt(2)) <= 1e-9 and rotated <= 2 and dt < 1
    record(2, ok, f"max|S| Bell={bell:.12f} (2sqrt2), phase pi/2 max|S|={rotated:.6f} <= 2, {dt:.3f}s < 1s")


def test_criterion_3_source_calibration():
    cal, dt = timed(ex.calibrate_source, 0.914, 0.927)
    rho = ex.apply_noise(q.bell_state(), cal.model)
    pu, co = q.purity(rho), q.concurrence(rho)
    ok = abs(pu - 0.914) <= 1e-3 and abs(co - 0.927) <= 1e-3 and dt < 5
    record(3, ok, f"v={cal.model.v:.5f} d={cal.model.d:.5f} b={cal.model.b:.5f}: "
                  f"purity={pu:.6f}, concurrence={co:.6f}, {dt:.2f}s < 5s")


def test_criterion_4_tomography_loop():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    fids, inv_err = [], 0.0
    for k in range(20):
        theta, phi, p = rng.uniform(0, math.pi / 4), rng.uniform(0, 2 * math.pi), rng.uniform(0, 1)
        rho = q.StateParams(theta, phi, p).density()
        rec = ms.reconstruct_density(ms.tomography_measure(rho, 10**6, ex.substream(SEED, 99, k)))
        fids.append(q.fidelity(rec, rho))
        exact = ms.reconstruct_density(ms.tomography_probabilities(rho))
        inv_err = max(inv_err, float(np.max(np.abs(exact - rho))))
    dt = time.perf_counter() - t0
    ok = min(fids) >= 0.995 and inv_err <= 1e-9 and dt < 30
    record(4, ok, f"min fidelity={min(fids):.6f} >= 0.995 over 20 states, "
                  f"exact inversion error={inv_err:.2e} <= 1e-9, {dt:.1f}s < 30s")


def _numeric_gradient(model, x, y, h=1e-5):
    vec = model.to_vector()
    out = np.empty_like(vec)
    for i in range(len(vec)):
        up, dn = vec.copy(), vec.copy()
        up[i] += h
        dn[i] -= h
        loss = lambda v: ann.mean_loss(ann.model_from_vector(model.arch, v, model.n_ne), x, y)
        out[i] = (loss(up) - loss(dn)) / (2 * h)
    return out


KINK_MARGIN = 1e-4  # ten finite-difference steps


def test_criterion_5_gradient_checks():
    t0 = time.perf_counter()
    worst = {}
    skipped = 0
    for arch, n_ne in (("linear", 0), ("mlp", 8)):
        errs = []
        k = 0
        while len(errs) < 50:
            r = np.random.default_rng([SEED, n_ne, k])
            k += 1
            size = 5 if n_ne == 0 else 6 * n_ne + 1
            model = ann.model_from_vector(arch, r.uniform(-1, 1, size), n_ne)
            x = r.uniform(-1, 1, (32, 4))
            y = r.integers(0, 2, 32)
            # a central difference straddling a ReLU kink measures the kink, not the gradient
            if n_ne and np.min(np.abs(x @ model.W1.T + model.w01)) < KINK_MARGIN:
                skipped += 1
                continue
            g = ann.gradients(model, x, y).to_vector()
            fd = _numeric_gradient(model, x, y)
            errs.append(np.max(np.abs(g - fd)) / max(np.max(np.abs(g)), np.max(np.abs(fd))))
        worst[arch] = max(errs)
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-5 and dt < 10
    record(5, ok, f"max relative error linear={worst['linear']:.2e}, mlp={worst['mlp']:.2e} "
                  f"<= 1e-5 ({skipped} draws near a ReLU kink redrawn), {dt:.2f}s < 10s")


@pytest.fixture(scope="module")
def linear_run():
    return timed(harness.run_linear_study, SEED)


@pytest.fixture(scope="module")
def nonlinear_run():
    return timed(harness.run_nonlinear_study, SEED, n_nes=(0, 10), theory=False)


@pytest.fixture(scope="module")
def sweep_run():
    return timed(harness.run_nonlinear_study, SEED)


def test_criterion_6_linear_protocol(linear_run):
    st, dt = linear_run
    lin = st.report.overall
    chsh = st.chsh_reports["chsh_any"].overall
    ok = len(st.test) == 495 and lin >= 0.96 and lin - chsh >= 0.05 and dt < 120
    record(6, ok, f"linear={lin:.4f} >= 0.96, CHSH={chsh:.4f} (fixed-sign "
                  f"{st.chsh_reports['chsh_fixed'].overall:.4f}), gap={100 * (lin - chsh):.1f} pts >= 5, "
                  f"{dt:.1f}s < 120s")


def test_criterion_7_nonlinear_protocol(nonlinear_run):
    st, dt = nonlinear_run
    mlp, lin = st.reports[10].overall, st.reports[0].overall
    ok = len(st.test) == 1485 and mlp >= 0.985 and mlp - lin >= 0.03 and dt < 300
    record(7, ok, f"mlp10={mlp:.4f} >= 0.985, linear={lin:.4f}, gap={100 * (mlp - lin):.1f} pts >= 3, "
                  f"{dt:.1f}s < 300s")


def test_criterion_8_theory_vs_experiment(sweep_run):
    st, dt = sweep_run
    exp = {n: st.reports[n].overall for n in harness.NONLINEAR_NNES}
    th = {n: st.theory_reports[n].overall for n in harness.NONLINEAR_NNES}
    below = all(th[n] < exp[n] for n in (5, 10, 100))
    ns = sorted(exp)
    monotone = all(exp[b] >= exp[a] - 0.005 for a, b in zip(ns, ns[1:]))
    ok = below and monotone and dt < 600
    pairs = ", ".join(f"n={n}: exp {exp[n]:.4f} / theory {th[n]:.4f}" for n in ns)
    record(8, ok, f"theory strictly below experiment at 5,10,100: {below}; "
                  f"experiment non-decreasing within 0.5 pts: {monotone}; {pairs}; {dt:.1f}s < 600s")


def test_criterion_9_mismatches_near_boundary(linear_run):
    st, _ = linear_run
    frac = st.report.near_boundary_fraction(0.1)
    n = len(st.report.mismatches)
    record(9, frac >= 0.8, f"{frac:.3f} of {n} mismatches within 0.1 of p* (>= 0.8)")


def _csv_bytes(lin, sweep, out):
    harness.write_fig3(lin, out / "fig3")
    harness.write_fig4(sweep, out / "fig4")
    harness.write_fig5(sweep, out / "fig5")
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*.csv"))}


def test_criterion_10_determinism(linear_run, sweep_run, nonlinear_run, tmp_path):
    first = _csv_bytes(linear_run[0], sweep_run[0], tmp_path / "a")
    again = _csv_bytes(harness.run_linear_study(SEED), harness.run_nonlinear_study(SEED), tmp_path / "b")
    # the criterion-7 run is a subset of the sweep; its predictions must agree exactly
    nl = nonlinear_run[0]
    same_subset = all(np.array_equal(nl.predicted[n], sweep_run[0].predicted[n]) for n in (0, 10))
    diff = [k for k in first if first[k] != again.get(k)]
    ok = not diff and set(first) == set(again) and same_subset
    record(10, ok, f"{len(first)} CSV files byte-identical on rerun: {not diff} "
                   f"(differing: {diff or 'none'}); criterion-7 predictions reproduced: {same_subset}")

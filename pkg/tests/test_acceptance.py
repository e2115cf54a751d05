"""Acceptance criteria, one test each, at their stated tolerances.

Each test appends a ``criterion N: PASS|FAIL ...`` line that is printed in the
pytest terminal summary.  Run alone with::

    python3 -m pytest tests/test_acceptance.py
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, ROOT
from pullback_ngd import bench, mps, oracles, rayleigh, spin
from pullback_ngd.metric import euclidean_reference, hessian_reference
from pullback_ngd.optim import natural_direction

CONFIGS = ROOT / "configs"


def report(n, ok, detail, t0):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  ({time.perf_counter() - t0:.1f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def run_config(name, tmp_path, methods=None):
    cfg = bench.load_config(CONFIGS / name)
    cfg.output_dir = tmp_path / name
    if methods is not None:
        cfg.methods = [m for m in cfg.methods if m.name in methods]
    built = bench.build_problem(cfg.problem, cfg.problem_params, cfg.seed)
    return cfg, built, {m.name: bench.run_method(cfg, i, built) for i, m in enumerate(cfg.methods)}


def first_below(res, lmin, threshold):
    return bench.iterations_to(res.trace, lmin, threshold)


def test_criterion_1_rayleigh_convergence(tmp_path):
    t0 = time.perf_counter()
    cfg, built, runs = run_config("rayleigh_desk.ini", tmp_path, {"gd", "nonlinear_cg", "ngd_pullback"})
    assert cfg.problem_params["n"] == 200
    H = bench.rayleigh.RayleighInstance.random(200, cfg.seed).H
    lmin = oracles.dense_symmetric_eigensolve(H)[0][0]
    its = {k: first_below(r, lmin, 1e-10) for k, r in runs.items()}
    ngd = its["ngd_pullback"]
    ok = ngd is not None and all(v is None or ngd < v for k, v in its.items() if k != "ngd_pullback")
    report(1, ok, f"steps to rel err 1e-10: {its}", t0)


def test_criterion_2_fisher_equals_gd():
    t0 = time.perf_counter()
    inst = rayleigh.RayleighInstance.random(50, seed=2)
    rng = np.random.default_rng(2)
    worst = 1.0
    for _ in range(100):
        x = rng.standard_normal(50)
        g = rayleigh.rayleigh_gradient(x, inst)
        d = natural_direction(g, rayleigh.rayleigh_fisher_metric(x, inst))
        worst = min(worst, float(d @ -g / (np.linalg.norm(d) * np.linalg.norm(g))))
    report(2, worst >= 1 - 1e-10, f"min cosine(Fisher NGD, GD) over 100 points = 1 - {1 - worst:.2e}", t0)


def test_criterion_3_spin_convergence(tmp_path):
    t0 = time.perf_counter()
    cfg, built, runs = run_config("spin_desk.ini", tmp_path)
    assert (cfg.problem_params["width"], cfg.problem_params["height"]) == (32, 32)
    assert cfg.problem_params["periodic"] and built.min_cost == -2.0
    to3 = {k: first_below(r, -2.0, 1e-3) for k, r in runs.items()}
    to6 = first_below(runs["ngd_pullback"], -2.0, 1e-6)
    ngd = to3["ngd_pullback"]
    ok = to6 is not None and ngd is not None and all(
        v is None or ngd < v for k, v in to3.items() if k != "ngd_pullback"
    )
    report(3, ok, f"steps to 1e-3: {to3}; NGD steps to 1e-6: {to6}", t0)


def test_criterion_4_mps_final_costs(tmp_path):
    t0 = time.perf_counter()
    cfg, built, runs = run_config("mps_desk.ini", tmp_path)
    p = cfg.problem_params
    assert (p["length"], p["bond_dim"], p["noise"]) == (10, 3, 0.1)
    assert all(m.settings["max_iterations"] == 500 for m in cfg.methods)
    final = {k: r.trace.final_cost for k, r in runs.items()}
    baseline = min(final["gd"], final["nonlinear_cg"])
    ngd = {k: v for k, v in final.items() if k.startswith("ngd_")}
    ok = len(ngd) == 4 and all(v < baseline for v in ngd.values())
    detail = ", ".join(f"{k}={v:.6g}" for k, v in final.items())
    report(4, ok, f"final costs after 500 steps: {detail}", t0)


def _fd_worst(cost, grad, points):
    worst = 0.0
    for x in points:
        g = grad(x)
        fd = oracles.finite_difference_gradient(cost, x)
        worst = max(worst, float(np.linalg.norm(g - fd) / np.linalg.norm(fd)))
    return worst


def test_criterion_5_gradients_vs_finite_differences():
    t0 = time.perf_counter()
    inst = rayleigh.RayleighInstance.random(20, seed=5)
    rng = np.random.default_rng(5)
    r = _fd_worst(lambda x: rayleigh.rayleigh_cost(x, inst), lambda x: rayleigh.rayleigh_gradient(x, inst),
                  [rng.standard_normal(20) for _ in range(10)])
    lat = spin.SpinLattice(4, 4)
    s = _fd_worst(lambda x: spin.spin_cost(lat, x), lambda x: spin.spin_gradient(lat, x),
                  [lat.random_spins(k) for k in range(10)])
    layout = mps.MPSLayout(6, 3)
    data = mps.generate_target_data(6, 0.1, seed=5)
    m = _fd_worst(lambda x: mps.lsm_cost_vec(layout, x, data), lambda x: mps.lsm_gradient_vec(layout, x, data),
                  [mps.MPSState.random(6, 3, seed=k).to_vector() for k in range(10)])
    worst = max(r, s, m)
    report(5, worst <= 1e-6, f"max rel err rayleigh={r:.1e} spin={s:.1e} mps={m:.1e}", t0)


def _metric_cases():
    inst = rayleigh.RayleighInstance.random(6, seed=6)
    x = rayleigh.random_start(6, 7)
    reg = rayleigh.rayleigh_regularization(inst)
    yield ("rayleigh n=6", rayleigh.normalized_vector_map(6), rayleigh.rayleigh_hessian_reference(inst, reg), x,
           rayleigh.rayleigh_pullback_metric(x, inst, reg), rayleigh.reference_gradient(x, inst), 1e-8,
           rayleigh.rayleigh_gradient(x, inst))

    lat = spin.SpinLattice(3, 3)
    x = lat.random_spins(8)
    reg = spin.spin_regularization(lat)
    ref = hessian_reference(lambda y, u: spin.reference_hessian_apply(lat, u), reg)
    yield ("spin 3x3", spin.spin_normalization_map(lat), ref, x, spin.spin_pullback_metric(lat, x, reg),
           spin.reference_gradient(lat, x), 1e-6, spin.spin_gradient(lat, x))

    for L, D in ((4, 2), (3, 1)):
        layout = mps.MPSLayout(L, D)
        data = mps.generate_target_data(L, 0.1, seed=9)
        x = mps.MPSState.random(L, D, seed=10).to_vector()
        hmap = mps.hilbert_map(layout)
        q = mps.QuarticReference(data)
        gy = q.gradient(hmap.eval(x))
        hreg = mps.hilbert_regularization(layout, x, data)
        gx = mps.lsm_gradient_vec(layout, x, data)
        tag = f"L={L} D={D}"
        if L == 4:
            yield (f"density {tag}", mps.density_map(layout), euclidean_reference(), x,
                   mps.metric_density_reference(layout, x), mps.density_reference_gradient(layout, x, data), 1e-6, gx)
            yield (f"mps_amplitude {tag}", mps.amplitude_map(layout), euclidean_reference(), x,
                   mps.metric_mps_amplitude(layout, x), None, 1e-6, gx)
        yield (f"hilbert_identity {tag}", hmap, euclidean_reference(), x,
               mps.metric_hilbert_identity(layout, x), gy, 1e-6, gx)
        yield (f"hilbert_hessian {tag}", hmap, hessian_reference(q.hessian_apply, hreg), x,
               mps.metric_hilbert_hessian(layout, x, data, hreg), gy, 1e-6, gx)


def test_criterion_6_pullback_consistency():
    t0 = time.perf_counter()
    diffs = {}
    for name, fmap, ref, x, op, *_ in _metric_cases():
        G = oracles.assemble_dense_metric(fmap, ref, x)
        diffs[name] = float(np.abs(op.to_dense() - G).max())
    worst = max(diffs.values())
    report(6, worst <= 1e-10, f"max |Gv - dense| = {worst:.1e} over {len(diffs)} metrics", t0)


def test_criterion_7_projection_identity():
    t0 = time.perf_counter()
    results = {}
    ok = True
    for name, fmap, ref, x, op, gy, tol, gx in _metric_cases():
        if "L=3" in name:
            continue
        d = oracles.projection_identity_check(fmap, ref, x, gx, gy)
        results[name] = d
        ok &= d <= tol
    detail = ", ".join(f"{k}: {v:.1e}" for k, v in results.items())
    report(7, ok, f"defects (tol 1e-8 rayleigh, 1e-6 others): {detail}", t0)


SMALL = {
    "spin": "[benchmark]\nproblem = spin\nseed = 3\n[problem]\nwidth = 8\nheight = 8\n[defaults]\n"
            "max_iterations = 60\n[method:gd]\nmethod = gd\n[method:cg]\nmethod = nonlinear_cg\n"
            "[method:ngd]\nmethod = ngd\nmetric = spin_pullback\n",
    "mps": "[benchmark]\nproblem = mps_lsm\nseed = 3\n[problem]\nlength = 6\nbond_dim = 2\n[defaults]\n"
           "max_iterations = 15\ncg_max_iters = 20\n[method:gd]\nmethod = gd\n[method:cg]\nmethod = nonlinear_cg\n"
           "[method:density]\nmethod = ngd\nmetric = density\n[method:ih]\nmethod = ngd\nmetric = hilbert_identity\n"
           "[method:ih2]\nmethod = ngd\nmetric = hilbert_hessian\n[method:s]\nmethod = ngd\nmetric = mps_amplitude\n",
}


def _strip_timing(path):
    return b"\n".join(line.rsplit(b",", 1)[0] for line in path.read_bytes().splitlines())


def test_criterion_8_determinism(tmp_path):
    t0 = time.perf_counter()
    configs = [CONFIGS / "rayleigh_desk.ini"]
    for name, text in SMALL.items():
        p = tmp_path / f"{name}.ini"
        p.write_text(text)
        configs.append(p)
    compared, mismatched = 0, []
    for cfg in configs:
        outs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{cfg.stem}_{rep}"
            subprocess.run([sys.executable, "-m", "pullback_ngd", "run", str(cfg), "--output-dir", str(out)],
                           check=True, capture_output=True)
            outs.append(out)
        names = sorted(p.name for p in outs[0].glob("*.csv"))
        assert names == sorted(p.name for p in outs[1].glob("*.csv")) and names
        for n in names:
            compared += 1
            if _strip_timing(outs[0] / n) != _strip_timing(outs[1] / n):
                mismatched.append(n)
    report(8, not mismatched, f"{compared} CSV pairs compared, mismatches: {mismatched or 'none'}", t0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))

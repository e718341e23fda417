"""End-to-end acceptance criteria.

Every criterion prints one PASS/FAIL line (also repeated in the pytest terminal
summary). All stochastic experiments derive their seeds from master seed 0
through ``run_seeds``; nothing is tuned per criterion.
"""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.linalg import expm

from nes import AlgorithmConfig, run
from nes.adaptation import Decision, importance_mixing, weighted_mann_whitney
from nes.benchmarks import (
    RandomBasinInstance,
    f_2rosen,
    f_rb,
    lennard_jones,
    rosenbrock,
    standard_suite,
)
from nes.distributions import (
    CauchyRadial,
    FullGaussianState,
    ScaledGaussianRadial,
    cauchy_log_derivs,
    gaussian_natural_log_derivs,
    radial_log_derivs,
    sample_full,
    separable_log_derivs,
)
from nes.engine.steps import xnes_gradients, xnes_step
from nes.restarts import boosted_success, interleaved_runner, run_seeds, schedule_slices
from nes.shaping import default_utilities

from conftest import report

MASTER = 0
TARGET = 1e-7
H = 1e-5


def seeds(n, offset=0):
    return run_seeds(MASTER + offset, n)


def solved_evals(result):
    return result.evaluations if result.success else math.inf


# criterion 1 -----------------------------------------------------------------


def _sym_dirs(d):
    out = []
    for i in range(d):
        for j in range(i, d):
            e = np.zeros((d, d))
            e[i, j] = e[j, i] = 1.0
            out.append(e)
    return out


def _fd_error(logp, g_delta, g_M, d):
    """Largest gap between analytic derivatives and central differences at the origin."""
    zd, zm = np.zeros(d), np.zeros((d, d))
    err = 0.0
    for i in range(d):
        e = np.zeros(d)
        e[i] = H
        err = max(err, abs((logp(e, zm) - logp(-e, zm)) / (2 * H) - g_delta[i]))
    for E in _sym_dirs(d):
        fd = (logp(zd, H * E) - logp(zd, -H * E)) / (2 * H)
        err = max(err, abs(fd - np.sum(g_M * E)))
    return err


def _radial_logp(family, z):
    def logp(delta, M):
        w = expm(-0.5 * M) @ (z - delta)
        return float(family.log_q(w @ w)) - 0.5 * np.trace(M)
    return logp


def test_criterion_01_log_derivatives_match_finite_differences():
    rng = np.random.default_rng(seeds(1)[0])
    worst = {}
    for d in (1, 2, 5):
        for _ in range(100):
            z = 1.5 * rng.standard_normal(d)

            g = gaussian_natural_log_derivs(z)
            lp = lambda dl, M: stats.multivariate_normal.logpdf(z, mean=dl, cov=expm(M))
            worst["gaussian"] = max(worst.get("gaussian", 0), _fd_error(lp, g.g_delta, g.g_M, d))

            gm, gs = separable_log_derivs(z)
            err = 0.0
            for i in range(d):
                l1 = lambda dl, rho: stats.norm.logpdf(z[i], loc=dl, scale=math.exp(rho))
                err = max(err, abs((l1(H, 0) - l1(-H, 0)) / (2 * H) - gm[i]),
                          abs((l1(0, H) - l1(0, -H)) / (2 * H) - gs[i]))
            worst["separable"] = max(worst.get("separable", 0), err)

            fam = ScaledGaussianRadial(d, tau=1.7)
            g = radial_log_derivs(fam, z)
            err = _fd_error(_radial_logp(fam, z), g.g_delta, g.g_M, d)
            lt = lambda t: float(ScaledGaussianRadial(d, t).log_q(z @ z))
            err = max(err, abs((lt(1.7 + H) - lt(1.7 - H)) / (2 * H) - g.g_tau[0]))
            cfam = CauchyRadial(d)
            g = radial_log_derivs(cfam, z)
            err = max(err, _fd_error(_radial_logp(cfam, z), g.g_delta, g.g_M, d))
            worst["radial"] = max(worst.get("radial", 0), err)

            g = cauchy_log_derivs(z)
            lp = lambda dl, M: stats.multivariate_t.logpdf(z, loc=dl, shape=expm(M), df=1)
            worst["cauchy"] = max(worst.get("cauchy", 0), _fd_error(lp, g.g_delta, g.g_M, d))
    ok = all(v < 1e-6 for v in worst.values())
    detail = ", ".join(f"{k} max err {v:.1e}" for k, v in worst.items())
    assert report(1, "log-derivatives vs finite differences (1e-6)", ok, detail)


# criterion 2 -----------------------------------------------------------------


def test_criterion_02_fisher_identity():
    rng = np.random.default_rng(seeds(1, 2)[0])
    Z = rng.standard_normal((1_000_000, 2))
    F = np.zeros((5, 5))
    for z in Z:
        v = gaussian_natural_log_derivs(z).as_vector()
        F += np.outer(v, v)
    F /= len(Z)
    err = np.abs(F - np.eye(5)).max()
    assert report(2, "Fisher matrix in orthonormal coordinates is I (0.05)", err < 0.05,
                  f"max entrywise deviation {err:.4f} over 1e6 samples, d=2")


# criterion 3 -----------------------------------------------------------------


def test_criterion_03_plain_gradient_fails_where_xnes_succeeds():
    neg_square = lambda x: -float(x[0] ** 2)
    plain_cfg = AlgorithmConfig(eta_sigma=0.01, popsize=10, max_evals=100_000)
    plain_fail = 0
    for s in seeds(100, 3):
        r = run("plain", neg_square, plain_cfg, s, x0=[1.0], sigma0=1.0, minimize=False)
        if min(abs(g.state.mu[0]) for g in r.trace) >= 1e-5:
            plain_fail += 1
    xnes_cfg = AlgorithmConfig(target=-TARGET, max_evals=5000)
    xnes_ok = sum(
        run("xnes", neg_square, xnes_cfg, s, x0=[1.0], sigma0=1.0, minimize=False, keep_trace=False).success
        for s in seeds(100, 3)
    )
    ok = plain_fail >= 50 and xnes_ok == 100
    assert report(3, "plain gradient fails on -x^2, xNES succeeds", ok,
                  f"plain failed to reach |mu|<1e-5 in {plain_fail}/100 (need >=50); "
                  f"xNES reached residual<1e-7 in {xnes_ok}/100 within 5000 evals (need 100)")


# criterion 4 -----------------------------------------------------------------


def test_criterion_04_xnes_unimodal():
    cfg = AlgorithmConfig(target=TARGET, max_evals=100_000)
    sphere_ok = 0
    for i, s in enumerate(seeds(20, 4)):
        obj = standard_suite("sphere", 10, i)
        sphere_ok += run("xnes", obj, cfg, s, x0=np.zeros(10), keep_trace=False).success
    rosen_ok = sum(run("xnes", rosenbrock, cfg, s, x0=np.zeros(10), keep_trace=False).success
                   for s in seeds(20, 4))
    ok = sphere_ok >= 19 and rosen_ok >= 16
    assert report(4, "xNES solves 10-d sphere and Rosenbrock", ok,
                  f"sphere {sphere_ok}/20 (need >=19), Rosenbrock {rosen_ok}/20 (need >=16)")


# criterion 5 -----------------------------------------------------------------


def test_criterion_05_snes_separability_contrast():
    cfg = AlgorithmConfig(target=TARGET, max_evals=100_000)
    res = {}
    for name in ("ellipsoid", "rotated-ellipsoid"):
        for algo in ("snes", "xnes"):
            out = []
            for i, s in enumerate(seeds(20, 5)):
                obj = standard_suite(name, 8, i)
                out.append(solved_evals(run(algo, obj, cfg, s, x0=np.zeros(8), keep_trace=False)))
            res[name, algo] = np.array(out)
    med_s = np.median(res["ellipsoid", "snes"])
    med_x = np.median(res["ellipsoid", "xnes"])
    rot_s = np.mean(np.isfinite(res["rotated-ellipsoid", "snes"]))
    rot_x = np.mean(np.isfinite(res["rotated-ellipsoid", "xnes"]))
    ok = med_s < med_x and rot_s < 0.10 and rot_x >= 0.90
    assert report(5, "SNES wins on separable, fails on rotated ellipsoid", ok,
                  f"separable median evals SNES {med_s:g} vs xNES {med_x:g}; rotated success "
                  f"SNES {rot_s:.2f} (need <0.10), xNES {rot_x:.2f} (need >=0.90)")


# criterion 6 -----------------------------------------------------------------


def _mixed_batch(old, new, rng, lam=10):
    _, X = sample_full(old, rng, lam)
    f = -np.sum(X * X, axis=1)
    return importance_mixing(X, f, old, new, 0.1, rng, lambda Y: -np.sum(Y * Y, axis=1))


def test_criterion_06_importance_mixing():
    rng = np.random.default_rng(seeds(1, 6)[0])
    same = FullGaussianState.isotropic(np.zeros(2))
    fresh = np.mean([_mixed_batch(same, same, rng).fresh_count / 10 for _ in range(10_000)])
    ok_a = abs(fresh - 0.1) <= 0.01

    new = FullGaussianState.from_factor(np.array([0.5, -0.3]), np.array([[1.2, 0.3], [0.0, 0.8]]))
    pooled = np.vstack([_mixed_batch(same, new, rng).X for _ in range(10_000)])
    Z = new.to_natural(pooled)
    pvals = [stats.kstest(Z[:, 0], "norm").pvalue, stats.kstest(Z[:, 1], "norm").pvalue,
             stats.kstest(np.sum(Z * Z, axis=1), stats.chi2(2).cdf).pvalue]
    # Bonferroni: family-wise level 1% over the three projections
    ok_b = min(pvals) > 0.01 / 3

    cfg_on = AlgorithmConfig(target=TARGET, max_evals=100_000, importance_mixing=True)
    cfg_off = AlgorithmConfig(target=TARGET, max_evals=100_000)
    wins = 0
    for i, s in enumerate(seeds(20, 6)):
        obj = standard_suite("sphere", 10, i)
        on = run("xnes", obj, cfg_on, s, x0=np.zeros(10), keep_trace=False)
        off = run("xnes", obj, cfg_off, s, x0=np.zeros(10), keep_trace=False)
        wins += solved_evals(on) < solved_evals(off)
    ok_c = wins >= 16
    assert report(6, "importance mixing", ok_a and ok_b and ok_c,
                  f"(a) fresh fraction {fresh:.4f} (need 0.1+-0.01); (b) KS min p {min(pvals):.3f} "
                  f"(need >{0.01 / 3:.4f}); (c) fewer evaluations in {wins}/20 paired runs (need >=16)")


# criterion 7 -----------------------------------------------------------------


def test_criterion_07_weighted_mann_whitney():
    rng = np.random.default_rng(seeds(1, 7)[0])
    unit_ok = 0
    for _ in range(1000):
        n, m = rng.integers(2, 40, size=2)
        x = rng.standard_normal(n) + rng.uniform(-1, 1)
        y = rng.standard_normal(m)
        rho = rng.uniform(0.05, 0.45)
        ref = stats.mannwhitneyu(x, y, alternative="greater", method="asymptotic", use_continuity=False)
        cdf = 1 - ref.pvalue
        dec = (Decision.FIRST_LARGER if cdf > 1 - rho
               else Decision.SECOND_LARGER if cdf < rho else Decision.INCONCLUSIVE)
        r = weighted_mann_whitney(x, y, rho)
        unit_ok += r.U == ref.statistic and r.decision == dec
    int_ok = 0
    for _ in range(1000):
        n, m = rng.integers(1, 15, size=2)
        x = rng.integers(0, 10, n).astype(float)
        y = rng.integers(0, 10, m).astype(float)
        w, w2 = rng.integers(1, 6, n), rng.integers(1, 6, m)
        rho = rng.uniform(0.05, 0.45)
        a = weighted_mann_whitney(x, y, rho, w, w2)
        b = weighted_mann_whitney(np.repeat(x, w), np.repeat(y, w2), rho)
        int_ok += a.U == b.U and a.decision == b.decision
    assert report(7, "weighted Mann-Whitney agrees exactly", unit_ok == 1000 and int_ok == 1000,
                  f"unit weights vs classical {unit_ok}/1000, integer weights vs expansion {int_ok}/1000")


# criterion 8 -----------------------------------------------------------------


def test_criterion_08_adaptation_sampling():
    cfg_as = AlgorithmConfig(target=TARGET, max_evals=100_000, adaptation_sampling=True)
    cfg = AlgorithmConfig(target=TARGET, max_evals=100_000)
    ev_as, ev, boosted = [], [], 0
    for i, s in enumerate(seeds(20, 8)):
        obj = standard_suite("sphere", 10, i)
        r = run("xnes", obj, cfg_as, s, x0=np.zeros(10))
        ev_as.append(solved_evals(r))
        boosted += max(g.eta for g in r.trace) > 0.3
        ev.append(solved_evals(run("xnes", obj, cfg, s, x0=np.zeros(10), keep_trace=False)))
    m_as, m = np.median(ev_as), np.median(ev)
    ok = m_as < m and boosted >= 16
    assert report(8, "adaptation sampling speeds up xNES", ok,
                  f"median evals {m_as:g} adapted vs {m:g} fixed; eta_sigma>0.3 in {boosted}/20 (need >=16)")


# criterion 9 -----------------------------------------------------------------


def test_criterion_09_restarts():
    q, tau, budget, min_slice = 0.3, 200.0, 4000, 50
    success = lambda t: q * (1 - math.exp(-t / tau))
    sched = schedule_slices(0.5, budget, min_slice)

    def bernoulli(slice_budget, seed):
        hit = np.random.default_rng(seed).random() < success(slice_budget)
        return _Outcome(hit, 0.0 if hit else 1.0, slice_budget)

    hits = np.mean([interleaved_runner(bernoulli, sched, s).success for s in seeds(10_000, 9)])
    predicted = boosted_success(success, 0.5, budget, min_slice)
    ok_model = abs(hits - predicted) <= 0.02

    cfg_budget, slice_floor = 5000, 100

    def f2rosen_run(slice_budget, seed):
        rng = np.random.default_rng(seed)
        x0 = rng.uniform(-20, 20, 2)
        return run("xnes", f_2rosen, AlgorithmConfig(target=TARGET, max_evals=slice_budget), rng,
                   x0=x0, sigma0=1.0, keep_trace=False)

    rates = {}
    for p in (0.2, 1.0):
        sched = schedule_slices(p, cfg_budget, slice_floor)
        rates[p] = np.mean([interleaved_runner(f2rosen_run, sched, s).success for s in seeds(200, 90)])
    ok_toy = rates[0.2] > rates[1.0]
    assert report(9, "restart scheduler", ok_model and ok_toy,
                  f"Bernoulli model {hits:.4f} vs formula {predicted:.4f} (need within 0.02); "
                  f"f_2rosen success p=1/5 {rates[0.2]:.3f} vs p=1 {rates[1.0]:.3f}")


class _Outcome:
    def __init__(self, success, best_fitness, evaluations):
        self.success, self.best_fitness, self.evaluations = success, best_fitness, evaluations


# criterion 10 ----------------------------------------------------------------


def test_criterion_10_heavy_tails_double_funnel():
    cfg = AlgorithmConfig(max_evals=1000)
    x0 = np.full(2, 1.5)  # midway between the optima at -11 and 14
    rates = {}
    for scale in (0.5, 1.0, 2.0, 4.0):
        for algo in ("cauchy-1+1", "xnes-1+1"):
            hits = [run(algo, f_2rosen, cfg, s, x0=x0, sigma0=scale, keep_trace=False).best_fitness < 1e-2
                    for s in seeds(200, 10)]
            rates[scale, algo] = np.mean(hits)
    ok = all(rates[s, "cauchy-1+1"] > rates[s, "xnes-1+1"] for s in (0.5, 1.0, 2.0, 4.0))
    detail = "; ".join(f"scale {s:g}: Cauchy {rates[s, 'cauchy-1+1']:.3f} vs Gaussian {rates[s, 'xnes-1+1']:.3f}"
                       for s in (0.5, 1.0, 2.0, 4.0))
    assert report(10, "Cauchy beats Gaussian on f_2rosen at every scale", ok, detail)


# criterion 11 ----------------------------------------------------------------


def test_criterion_11_random_basin():
    d = 4
    inst = RandomBasinInstance.create(d, 0)
    f = lambda x: f_rb(x, inst)
    cfg = AlgorithmConfig(max_evals=100 * d)
    means = {}
    for algo in ("cauchy-1+1", "xnes-1+1"):
        means[algo] = np.mean([run(algo, f, cfg, s, x0=np.zeros(d), keep_trace=False).best_fitness
                               for s in seeds(250, 11)])
    gap = means["xnes-1+1"] - means["cauchy-1+1"]
    assert report(11, "Cauchy finds better random basins", gap >= 0.05,
                  f"mean best value Cauchy {means['cauchy-1+1']:.4f} vs Gaussian {means['xnes-1+1']:.4f} "
                  f"(gap {gap:.4f}, need >=0.05)")


# criterion 12 ----------------------------------------------------------------


def _rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def test_criterion_12_lennard_jones():
    d = 9
    cfg = AlgorithmConfig(max_evals=500 * d)
    energies = []
    for s in seeds(100, 12):
        rng = np.random.default_rng(s)
        x0 = rng.uniform(-0.1, 0.1, d)
        energies.append(run("snes-1+1", lennard_jones, cfg, rng, x0=x0, sigma0=0.01, keep_trace=False).best_fitness)
    rate = np.mean(np.array(energies) <= -0.74)

    rng = np.random.default_rng(seeds(1, 120)[0])
    worst = 0.0
    for _ in range(100):
        P = rng.uniform(-1.5, 1.5, (5, 3))
        e = lennard_jones(P)
        scale = max(1.0, abs(e))
        worst = max(worst,
                    abs(lennard_jones(P + rng.uniform(-10, 10, 3)) - e) / scale,
                    abs(lennard_jones(P @ _rotation(rng).T) - e) / scale)
    ok = rate >= 0.5 and worst <= 1e-10
    assert report(12, "Lennard-Jones N=3 with (1+1)-SNES", ok,
                  f"E<=-0.74 in {rate:.2f} of 100 runs (need >=0.5); invariance error {worst:.1e} (need <=1e-10)")


# criterion 13 ----------------------------------------------------------------


def test_criterion_13_first_order_covariance_equivalence():
    rng = np.random.default_rng(seeds(1, 13)[0])
    etas = np.array([0.2, 0.1, 0.05, 0.025])
    orders = []
    for _ in range(10):
        d, lam = 5, 8
        state = FullGaussianState.from_factor(rng.standard_normal(d), np.eye(d) + 0.3 * rng.standard_normal((d, d)))
        Z = rng.standard_normal((lam, d))
        u = default_utilities(lam)
        Xc = Z @ state.A
        gaps = []
        for eta in etas:
            new = xnes_step(state, Z, u, 0.0, eta, eta)
            additive = (1 - u.sum() * eta) * state.cov + eta * (Xc.T * u) @ Xc
            gaps.append(np.linalg.norm(new.cov - additive))
        orders.append(np.polyfit(np.log(etas), np.log(gaps), 1)[0])
    assert report(13, "exponential vs additive covariance gap is quadratic", min(orders) >= 1.9,
                  f"observed orders {min(orders):.3f}..{max(orders):.3f} (need >=1.9)")


# criterion 14 ----------------------------------------------------------------


class _Recorder:
    def __init__(self, fn):
        self.fn, self.values = fn, []

    def __call__(self, x):
        v = self.fn(x)
        self.values.append(v)
        return v


def _objectives(d, rng):
    c = rng.uniform(-2, 2, d)
    Q = rng.standard_normal((d, d))
    H_ = Q @ Q.T + 0.1 * np.eye(d)
    inst = RandomBasinInstance.create(d, 3)
    return {
        "random quadratic": lambda x: float((x - c) @ H_ @ (x - c)),
        "rotated ellipsoid": standard_suite("rotated-ellipsoid", d, 1),
        "shifted cigar": standard_suite("cigar", d, 2),
        "shifted rosenbrock": lambda x: rosenbrock(x - c),
        "random basin": lambda x: f_rb(x, inst),
    }


def test_criterion_14_invariances():
    d = 5
    rng = np.random.default_rng(seeds(1, 14)[0])
    cfg = AlgorithmConfig(max_evals=2000)
    failures = []
    for k, (name, f) in enumerate(_objectives(d, rng).items()):
        s = seeds(5, 140)[k]
        x0 = rng.uniform(-1, 1, d)
        base = _Recorder(f)
        run("xnes", base, cfg, s, x0=x0)

        inner = _Recorder(f)
        run("xnes", lambda x: 2 * inner(x) ** 3 + inner(x), cfg, s, x0=x0)
        if inner.values[::2] != base.values:
            failures.append(f"{name}: monotone")

        R = np.eye(d)[rng.permutation(d)] * rng.choice([-1.0, 1.0], size=d)
        rotated = _Recorder(lambda y: f(R @ y))
        run("xnes", rotated, cfg, s, x0=R.T @ x0, shape=R)
        if rotated.values != base.values:
            failures.append(f"{name}: rotation")
    assert report(14, "monotone and rotation invariance (bitwise)", not failures,
                  "all 5 objectives identical" if not failures else "broken: " + ", ".join(failures))

import numpy as np
import pytest

from conftest import fd_jacobian, random_pd_matrix
from manifoldmc.hamiltonian import PhaseState, hamiltonian, sample_momentum
from manifoldmc.integrators import (
    IntegratorConfig,
    SingularUpdate,
    euclidean_leapfrog_step,
    generalized_leapfrog_step,
    integrate,
    lagrangian_leapfrog_step,
)
from manifoldmc import targets


def phase(q, p):
    return PhaseState(q=np.asarray(q, dtype=float), p=np.asarray(p, dtype=float))


def random_states(target, rng, n, scale=1.0):
    out = []
    for _ in range(n):
        q = scale * rng.normal(size=target.dim)
        p = sample_momentum(target, q, rng)
        out.append(phase(q, p))
    return out


def phase_map(target, cfg, stepper):
    """Wrap a step function as a map on the flat (q, p) vector for FD."""
    m = None

    def f(x):
        mm = x.size // 2
        res = stepper(target, phase(x[:mm], x[mm:]), cfg)
        assert res.converged
        return np.concatenate([res.state.q, res.state.p])

    return f


# ---------------------------------------------------------------------------
# Euclidean leapfrog


def test_euclidean_hand_case():
    t = targets.make_gaussian(np.eye(1))
    res = euclidean_leapfrog_step(t, phase([1.0], [0.0]), IntegratorConfig(step_size=0.1))
    np.testing.assert_allclose(res.state.q, [0.995], rtol=1e-14)
    np.testing.assert_allclose(res.state.p, [-0.09975], rtol=1e-14)
    assert res.log_jacobian == 0.0
    assert res.converged


def test_euclidean_zero_step_is_identity():
    t = targets.make_gaussian(np.diag([2.0, 0.5]))
    s = phase([0.3, -1.2], [0.7, 0.1])
    res = euclidean_leapfrog_step(t, s, IntegratorConfig(step_size=0.0))
    assert np.array_equal(res.state.q, s.q)
    assert np.array_equal(res.state.p, s.p)


def test_euclidean_round_trip(rng):
    t = targets.make_gaussian(random_pd_matrix(rng, 3))
    for _ in range(10):
        s = random_states(t, rng, 1)[0]
        fwd = euclidean_leapfrog_step(t, s, IntegratorConfig(step_size=0.2))
        back = euclidean_leapfrog_step(t, fwd.state, IntegratorConfig(step_size=-0.2))
        np.testing.assert_allclose(back.state.q, s.q, atol=1e-12)
        np.testing.assert_allclose(back.state.p, s.p, atol=1e-12)


# ---------------------------------------------------------------------------
# Generalized leapfrog


def test_generalized_constant_metric_matches_euclidean(rng):
    t = targets.make_gaussian(random_pd_matrix(rng, 3))
    cfg = IntegratorConfig(step_size=0.15)
    for s in random_states(t, rng, 20):
        gen = generalized_leapfrog_step(t, s, cfg)
        euc = euclidean_leapfrog_step(t, s, cfg)
        assert gen.converged
        assert gen.log_jacobian == 0.0
        np.testing.assert_allclose(gen.state.q, euc.state.q, atol=1e-12)
        np.testing.assert_allclose(gen.state.p, euc.state.p, atol=1e-12)


def test_generalized_zero_step_identity_one_iteration():
    t = targets.make_banana(N=100, sigma_y=2.0, sigma_theta=1.0, seed=7)
    s = phase([0.4, -0.6], [1.0, 2.0])
    res = generalized_leapfrog_step(t, s, IntegratorConfig(step_size=0.0))
    assert res.converged
    assert res.fp_iters_used == 1
    np.testing.assert_allclose(res.state.q, s.q, atol=1e-14)
    np.testing.assert_allclose(res.state.p, s.p, atol=1e-14)


def test_generalized_fd_jacobian_determinant_is_one(rng):
    t = targets.make_banana(N=100, sigma_y=2.0, sigma_theta=1.0, seed=7)
    cfg = IntegratorConfig(step_size=0.04, fp_tol=1e-13)
    f = phase_map(t, cfg, generalized_leapfrog_step)
    for s in random_states(t, rng, 20):
        x = np.concatenate([s.q, s.p])
        det = np.linalg.det(fd_jacobian(f, x, h=1e-4))
        assert abs(det - 1.0) < 1e-4


def test_generalized_nonconvergence_soft_failure(rng):
    t = targets.make_banana(N=100, sigma_y=2.0, sigma_theta=1.0, seed=7)
    cfg = IntegratorConfig(step_size=2.5, fp_max_iters=2)
    soft = 0
    for s in random_states(t, rng, 20, scale=2.0):
        res = generalized_leapfrog_step(t, s, cfg)
        if not res.converged:
            soft += 1
    assert soft > 0


# ---------------------------------------------------------------------------
# Lagrangian leapfrog


def test_lagrangian_constant_metric_matches_euclidean(rng):
    t = targets.make_gaussian(random_pd_matrix(rng, 3))
    cfg = IntegratorConfig(step_size=0.15)
    for s in random_states(t, rng, 20):
        lag = lagrangian_leapfrog_step(t, s, cfg)
        euc = euclidean_leapfrog_step(t, s, cfg)
        assert lag.log_jacobian == 0.0
        np.testing.assert_allclose(lag.state.q, euc.state.q, atol=1e-12)
        np.testing.assert_allclose(lag.state.p, euc.state.p, atol=1e-12)


def test_lagrangian_zero_step_identity():
    t = targets.make_exp_metric_toy()
    s = phase([0.7], [1.3])
    res = lagrangian_leapfrog_step(t, s, IntegratorConfig(step_size=0.0))
    assert res.log_jacobian == 0.0
    np.testing.assert_allclose(res.state.q, s.q, atol=1e-14)
    np.testing.assert_allclose(res.state.p, s.p, atol=1e-12)


def test_lagrangian_log_jacobian_vs_fd_exp_toy(rng):
    t = targets.make_exp_metric_toy()
    cfg = IntegratorConfig(step_size=0.2)
    f = phase_map(t, cfg, lagrangian_leapfrog_step)
    for s in random_states(t, rng, 20):
        res = lagrangian_leapfrog_step(t, s, cfg)
        x = np.concatenate([s.q, s.p])
        det = np.linalg.det(fd_jacobian(f, x, h=1e-6))
        assert abs(np.exp(res.log_jacobian) - det) < 1e-4 * abs(det)


def test_lagrangian_log_jacobian_vs_fd_student(rng):
    t = targets.make_student_t(3, 5.0, np.array([1.0, 1.0, 100.0]))
    cfg = IntegratorConfig(step_size=0.05)
    f = phase_map(t, cfg, lagrangian_leapfrog_step)
    scales = np.sqrt(np.array([1.0, 1.0, 100.0]))
    for _ in range(25):
        q = 0.8 * scales * rng.normal(size=3)
        p = sample_momentum(t, q, rng)
        res = lagrangian_leapfrog_step(t, phase(q, p), cfg)
        x = np.concatenate([q, p])
        det = np.linalg.det(fd_jacobian(f, x, h=1e-6))
        assert abs(np.exp(res.log_jacobian) - det) < 1e-4 * abs(det)


def test_lagrangian_singular_update_raises():
    t = targets.make_exp_metric_toy()
    # Gamma = 1/2 so Omega(q, v) = v/2; at q=0, p=-8, eps=0.5 the first
    # velocity system is exactly singular.
    with pytest.raises(SingularUpdate):
        lagrangian_leapfrog_step(t, phase([0.0], [-8.0]), IntegratorConfig(step_size=0.5))


# ---------------------------------------------------------------------------
# k-step composition


def integrator_cases():
    g = targets.make_gaussian(np.diag([2.0, 0.5]))
    return [
        (g, "euclidean", 0.1),
        (targets.make_banana(N=100, sigma_y=2.0, sigma_theta=1.0, seed=7), "generalized", 0.05),
        (targets.make_student_t(3, 5.0, np.array([1.0, 2.0, 4.0])), "generalized", 0.05),
        (targets.make_exp_metric_toy(), "generalized", 0.1),
        (targets.make_banana(N=100, sigma_y=2.0, sigma_theta=1.0, seed=7), "lagrangian", 0.05),
        (targets.make_student_t(3, 5.0, np.array([1.0, 2.0, 4.0])), "lagrangian", 0.05),
        (targets.make_exp_metric_toy(), "lagrangian", 0.1),
    ]


def test_momentum_flip_at_end():
    t = targets.make_gaussian(np.eye(2))
    s = phase([0.2, -0.4], [1.0, 0.5])
    cfg = IntegratorConfig(step_size=0.1)
    one = euclidean_leapfrog_step(t, s, cfg)
    comp = integrate(t, s, cfg, 1, "euclidean")
    np.testing.assert_allclose(comp.state.q, one.state.q, atol=1e-15)
    np.testing.assert_allclose(comp.state.p, -one.state.p, atol=1e-15)


def test_integrate_accumulates_log_jacobian(rng):
    t = targets.make_exp_metric_toy()
    cfg = IntegratorConfig(step_size=0.2)
    s = random_states(t, rng, 1)[0]
    total = 0.0
    cur = s
    for _ in range(3):
        res = lagrangian_leapfrog_step(t, cur, cfg)
        total += res.log_jacobian
        cur = res.state
    comp = integrate(t, s, cfg, 3, "lagrangian")
    assert comp.converged
    np.testing.assert_allclose(comp.log_jacobian, total, atol=1e-13)
    np.testing.assert_allclose(comp.state.q, cur.q, atol=1e-13)
    np.testing.assert_allclose(comp.state.p, -cur.p, atol=1e-13)


def test_involution_property(rng):
    for t, scheme, eps in integrator_cases():
        cfg = IntegratorConfig(step_size=eps, fp_tol=1e-12)
        converged = 0
        for s in random_states(t, rng, 100):
            for k in (1, 3):
                fwd = integrate(t, s, cfg, k, scheme)
                if not fwd.converged:
                    continue
                back = integrate(t, fwd.state, cfg, k, scheme)
                if not back.converged:
                    continue
                converged += 1
                err = max(
                    np.max(np.abs(back.state.q - s.q)),
                    np.max(np.abs(back.state.p - s.p)),
                )
                assert err < 1e-8, (t.name, scheme, k, err)
                if scheme == "lagrangian":
                    assert abs(fwd.log_jacobian + back.log_jacobian) < 1e-6
        assert converged >= 160, (t.name, scheme, converged)


def test_constant_metric_reduction_over_100_steps(rng):
    prec = random_pd_matrix(rng, 2)
    t = targets.make_gaussian(prec)
    cfg = IntegratorConfig(step_size=0.05)
    for s in random_states(t, rng, 20):
        base = integrate(t, s, cfg, 100, "euclidean")
        for scheme in ("generalized", "lagrangian"):
            other = integrate(t, s, cfg, 100, scheme)
            assert other.converged
            assert np.max(np.abs(other.state.q - base.state.q)) < 1e-10
            assert np.max(np.abs(other.state.p - base.state.p)) < 1e-10


def test_energy_drift_second_order(rng):
    cases = [
        (targets.make_banana(N=100, sigma_y=2.0, sigma_theta=1.0, seed=7), "generalized"),
        (targets.make_banana(N=100, sigma_y=2.0, sigma_theta=1.0, seed=7), "lagrangian"),
        (targets.make_student_t(3, 5.0, np.array([1.0, 2.0, 4.0])), "generalized"),
        (targets.make_student_t(3, 5.0, np.array([1.0, 2.0, 4.0])), "lagrangian"),
    ]
    eps, k = 0.04, 16
    for t, scheme in cases:
        drifts = {eps: [], eps / 2: []}
        for s in random_states(t, rng, 20, scale=0.8):
            h0 = hamiltonian(t, s.q, s.p)
            coarse = integrate(t, s, IntegratorConfig(step_size=eps, fp_tol=1e-13), k, scheme)
            fine = integrate(t, s, IntegratorConfig(step_size=eps / 2, fp_tol=1e-13), 2 * k, scheme)
            if not (coarse.converged and fine.converged):
                continue
            drifts[eps].append(abs(hamiltonian(t, coarse.state.q, coarse.state.p) - h0))
            drifts[eps / 2].append(abs(hamiltonian(t, fine.state.q, fine.state.p) - h0))
        assert len(drifts[eps]) >= 15
        ratio = np.mean(drifts[eps]) / np.mean(drifts[eps / 2])
        assert 3.0 < ratio < 5.0, (t.name, scheme, ratio)


def test_integrate_aborts_on_failure(rng):
    t = targets.make_banana(N=100, sigma_y=2.0, sigma_theta=1.0, seed=7)
    cfg = IntegratorConfig(step_size=2.5, fp_max_iters=2)
    saw_failure = False
    for s in random_states(t, rng, 20, scale=2.0):
        res = integrate(t, s, cfg, 5, "generalized")
        if not res.converged:
            saw_failure = True
    assert saw_failure


def test_integrate_singular_is_soft():
    t = targets.make_exp_metric_toy()
    res = integrate(t, phase([0.0], [-8.0]), IntegratorConfig(step_size=0.5), 3, "lagrangian")
    assert not res.converged


def test_integrate_rejects_unknown_scheme():
    t = targets.make_gaussian(np.eye(1))
    with pytest.raises(ValueError):
        integrate(t, phase([0.0], [1.0]), IntegratorConfig(step_size=0.1), 1, "verlet")


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(step_size=0.1, fp_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(step_size=0.1, fp_max_iters=0)

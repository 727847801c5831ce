import numpy as np
import pytest

from blindmimo import (
    RankDeficientError,
    SolverOptions,
    SolveTrace,
    StiefelPoint,
    bernoulli_gaussian_channel,
    build_constellation,
    build_frame,
    demodulate,
    detect,
    euclid_grad,
    evm,
    genie_align,
    iterate,
    objective,
    optimality_eta,
    pilot_zf_baseline,
    polar_retract,
    postprocess,
    precondition,
    random_stiefel,
    resolve_ambiguity,
    riemannian_gd_baseline,
    riemannian_grad,
    solve,
    synthesize_received,
)
from blindmimo.detector import soft_threshold


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def noiseless_instance(rng, m=64, k=3, t=50, theta=0.15):
    """Orthonormal-row data through a sparse channel, no noise."""
    x = random_stiefel(t, k, rng).a.conj().T
    chan = bernoulli_gaussian_channel(m, k, theta, rng)
    return chan.h_bar @ x, chan, x


class TestObjective:
    def test_hand_case(self):
        y = np.array([[1.0, 0.0], [0.0, 2.0]], dtype=complex)
        assert objective(y, np.eye(2, dtype=complex), np.ones(2)) == pytest.approx(9.0)

    def test_null_space_columns(self):
        rng = np.random.default_rng(0)
        y = np.outer(crandn(rng, 5), np.array([1.0, 0, 0]))  # rank 1, T=3
        a = np.eye(3, dtype=complex)[:, 1:]  # columns orthogonal to the row space
        assert objective(y, a, np.ones(2)) == 0.0

    def test_planted_orthonormal_rows_give_channel_norm(self):
        rng = np.random.default_rng(1)
        y, chan, x = noiseless_instance(rng)
        val = objective(y, x.conj().T, np.ones(3))
        assert val == pytest.approx(float((np.abs(chan.h_bar) ** 3).sum()), rel=1e-10)

    def test_g_weighting(self):
        y = np.array([[2.0]], dtype=complex)
        assert objective(y, np.eye(1, dtype=complex), np.array([4.0])) == pytest.approx(1.0)

    def test_right_rotation_equivariance(self):
        # Rotating the received block's column space and counter-rotating the
        # iterate leaves the objective unchanged.
        rng = np.random.default_rng(7)
        y = crandn(rng, 12, 8)
        a = random_stiefel(8, 3, rng)
        q, _ = np.linalg.qr(crandn(rng, 8, 8))
        g_diag = np.ones(3)
        assert objective(y @ q, q.conj().T @ a.a, g_diag) == pytest.approx(
            objective(y, a, g_diag), rel=1e-12
        )


class TestEuclidGrad:
    def test_zero_output_for_null_point(self):
        rng = np.random.default_rng(0)
        y = np.outer(crandn(rng, 5), np.array([1.0, 0, 0]))
        a = np.eye(3, dtype=complex)[:, 1:]
        assert np.abs(euclid_grad(y, a, np.ones(2))).max() == 0.0

    @pytest.mark.parametrize("p", [3, 4])
    def test_finite_difference_oracle(self, p):
        for i in range(8):
            rng = np.random.default_rng(100 * p + i)
            y = crandn(rng, 12, 10)
            a = random_stiefel(10, 2, rng)
            g_diag = np.array([1.3, 0.6])
            grad = euclid_grad(y, a, g_diag, p)
            delta = crandn(rng, 10, 2)
            h = 1e-5
            fd = (objective(y, a.a + h * delta, g_diag, p)
                  - objective(y, a.a - h * delta, g_diag, p)) / (2 * h)
            an = float(np.real(np.vdot(grad, delta)))
            assert abs(fd - an) / max(abs(fd), 1e-12) < 1e-4

    def test_column_phase_invariance(self):
        rng = np.random.default_rng(5)
        y = crandn(rng, 15, 8)
        a = random_stiefel(8, 3, rng)
        g_diag = np.ones(3)
        phases = np.exp(2j * np.pi * rng.random(3))
        assert objective(y, a.a * phases, g_diag) == pytest.approx(
            objective(y, a, g_diag), rel=1e-12
        )
        grad = euclid_grad(y, a, g_diag)
        for k in range(3):
            # moving along the phase orbit of one column changes nothing
            d = float(np.real(np.vdot(grad[:, k], 1j * a.a[:, k])))
            assert abs(d) < 1e-8 * np.linalg.norm(grad[:, k])


class TestIterate:
    def test_fixed_point(self):
        # Diagonal-positive block: A = [I; 0] is stationary by construction.
        t, k = 6, 2
        y = np.zeros((k, t), dtype=complex)
        y[0, 0], y[1, 1] = 1.5, 0.7
        a = StiefelPoint(np.eye(t, k))
        nxt = iterate(a, y, np.ones(k))
        assert np.abs(nxt.a - a.a).max() < 1e-9

    def test_ascent_step(self):
        rng = np.random.default_rng(3)
        y, _, _ = noiseless_instance(rng)
        a = random_stiefel(50, 3, rng)
        before = objective(y, a, np.ones(3))
        after = objective(y, iterate(a, y, np.ones(3)), np.ones(3))
        assert after >= before - 1e-12

    def test_unit_step_attains_grid_maximum(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            y = crandn(rng, 20, 16)
            a = random_stiefel(16, 3, rng)
            g_diag = np.ones(3)
            s = polar_retract(euclid_grad(y, a, g_diag))
            grid = np.linspace(0.0, 1.0, 21)
            vals = [objective(y, (1 - u) * a.a + u * s.a, g_diag) for u in grid]
            assert int(np.argmax(vals)) == len(grid) - 1


class TestOptimalityEta:
    def test_zero_at_polar_of_gradient(self):
        rng = np.random.default_rng(0)
        y = crandn(rng, 10, 8)
        a = random_stiefel(8, 2, rng)
        grad = euclid_grad(y, a, np.ones(2))
        at_polar = polar_retract(grad)
        grad2 = euclid_grad(y, at_polar, np.ones(2))
        # not stationary in general, but eta at its own polar point vanishes
        assert optimality_eta(at_polar, grad) < 1e-9 * np.linalg.norm(grad)

    def test_nonnegative_random(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = random_stiefel(9, 3, rng)
            g = crandn(rng, 9, 3)
            assert optimality_eta(a, g) >= 0.0

    def test_sampling_lower_bound(self):
        rng = np.random.default_rng(2)
        a = random_stiefel(8, 2, rng)
        g = crandn(rng, 8, 2)
        eta = optimality_eta(a, g)
        base = float(np.real(np.vdot(a.a, g)))
        best = -np.inf
        for _ in range(1000):
            s = random_stiefel(8, 2, rng)
            best = max(best, float(np.real(np.vdot(s.a, g))) - base)
        assert best <= eta + 1e-9


class TestSolve:
    def test_monotone_feasible_trace(self):
        rng = np.random.default_rng(0)
        y, _, _ = noiseless_instance(rng)
        feas = []

        def hook(pt, j):
            feas.append(np.linalg.norm(pt.a.conj().T @ pt.a - np.eye(pt.k_dim)))

        a, tr = solve(y, np.ones(3), SolverOptions(), np.random.default_rng(1), on_iterate=hook)
        assert np.all(np.diff(tr.objective_per_iter) >= -1e-12)
        assert max(feas) < 1e-9
        assert tr.stop_reason in ("eta_tol", "obj_tol", "max_iters")
        assert len(tr.objective_per_iter) == tr.iters_run + 1

    def test_step_gain_at_least_eta(self):
        # Convexity gives Psi(A_{j+1}) - Psi(A_j) >= eta(A_j).
        rng = np.random.default_rng(4)
        y, _, _ = noiseless_instance(rng, m=96, k=3, t=40, theta=0.2)
        _, tr = solve(y, np.ones(3), SolverOptions(), np.random.default_rng(2))
        gains = np.diff(tr.objective_per_iter)
        for j, gain in enumerate(gains):
            assert gain >= tr.eta_per_iter[j] - 1e-9 * max(1.0, tr.objective_per_iter[j])

    def test_rate_bound_weak_form(self):
        rng = np.random.default_rng(5)
        y, _, _ = noiseless_instance(rng)
        _, tr = solve(y, np.ones(3), SolverOptions(), np.random.default_rng(3))
        j = tr.iters_run
        bound = (tr.objective_per_iter[-1] - tr.objective_per_iter[0]) / (j + 1)
        assert tr.eta_per_iter.min() <= bound + 1e-9 * max(1.0, tr.objective_per_iter[-1])

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(6)
        y, _, _ = noiseless_instance(rng)
        a1, t1 = solve(y, np.ones(3), SolverOptions(), np.random.default_rng(7))
        a2, t2 = solve(y, np.ones(3), SolverOptions(), np.random.default_rng(7))
        assert a1.a.tobytes() == a2.a.tobytes()
        assert np.array_equal(t1.objective_per_iter, t2.objective_per_iter)

    def test_phase_rotated_start_same_trace(self):
        rng = np.random.default_rng(8)
        y, _, _ = noiseless_instance(rng)
        a0 = random_stiefel(50, 3, rng)
        phases = np.exp(2j * np.pi * rng.random(3))
        a0_rot = StiefelPoint(a0.a * phases)
        _, t1 = solve(y, np.ones(3), SolverOptions(), np.random.default_rng(0), a0=a0)
        _, t2 = solve(y, np.ones(3), SolverOptions(), np.random.default_rng(0), a0=a0_rot)
        assert len(t1.objective_per_iter) == len(t2.objective_per_iter)
        assert np.allclose(t1.objective_per_iter, t2.objective_per_iter,
                           rtol=1e-9, atol=1e-9)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            solve(np.zeros((4, 2), complex), np.ones(3), SolverOptions(), np.random.default_rng(0))
        with pytest.raises(ValueError):
            solve(np.zeros((4, 8), complex), np.ones(3), SolverOptions(), np.random.default_rng(0))

    def test_heuristic_stationarity_coupling(self):
        # At converged outputs the Riemannian gradient is small on the scale
        # set by eta and the gradient norm.
        rng = np.random.default_rng(9)
        y, _, _ = noiseless_instance(rng, m=128, k=4, t=60, theta=0.1)
        opts = SolverOptions(max_iters=500, eta_tol=1e-9)
        a, tr = solve(y, np.ones(4), opts, np.random.default_rng(1))
        assert tr.stop_reason != "max_iters"
        g = euclid_grad(y, a, np.ones(4))
        rg = riemannian_grad(a, g)
        eta = optimality_eta(a, g)
        assert rg.norm < 10.0 * np.sqrt(max(eta, 1e-300)) * np.linalg.norm(g) ** 0.5


class TestSolveTraceInvariant:
    def test_rejects_decreasing_objective(self):
        with pytest.raises(ValueError, match="ascent"):
            SolveTrace(np.array([1.0, 0.5]), np.array([0.1, 0.1]), 1, "max_iters")

    def test_allows_roundoff_slack(self):
        SolveTrace(np.array([1.0, 1.0 - 1e-13]), np.array([0.1, 0.1]), 1, "max_iters")


class TestResolveAmbiguity:
    def test_construct_and_invert(self):
        c = build_constellation("qpsk")
        rng = np.random.default_rng(0)
        frame = build_frame(6, 40, c, rng)
        phases = np.exp(2j * np.pi * rng.random(6))
        perm = rng.permutation(6)
        distorted = phases[:, None] * frame.x[perm]  # Sigma @ Pi @ X
        x_hat, res = resolve_ambiguity(distorted.conj().T, frame.meta, c)
        assert np.abs(x_hat - frame.x).max() < 1e-9
        assert sorted(res.permutation.tolist()) == list(range(6))

    def test_identity_distortion(self):
        c = build_constellation("qpsk")
        frame = build_frame(4, 20, c, np.random.default_rng(1))
        x_hat, res = resolve_ambiguity(frame.x.conj().T, frame.meta, c)
        assert np.array_equal(res.permutation, np.arange(4))
        assert np.abs(res.phase_corrections - 1.0).max() < 1e-9
        assert np.abs(x_hat - frame.x).max() < 1e-12

    def test_pure_phase_distortion(self):
        c = build_constellation("qpsk")
        rng = np.random.default_rng(2)
        frame = build_frame(5, 30, c, rng)
        true_phases = np.exp(2j * np.pi * rng.random(5))
        distorted = true_phases[:, None] * frame.x
        x_hat, res = resolve_ambiguity(distorted.conj().T, frame.meta, c)
        assert np.abs(res.phase_corrections * true_phases - 1.0).max() < 1e-9
        assert np.abs(x_hat - frame.x).max() < 1e-9

    def test_zero_reference_flagged(self):
        c = build_constellation("qpsk")
        frame = build_frame(3, 20, c, np.random.default_rng(3))
        broken = frame.x.copy()
        broken[1, 0] = 0.0
        x_hat, res = resolve_ambiguity(broken.conj().T, frame.meta, c)
        assert res.flagged_rows == (1,)
        assert res.phase_corrections[1] == 1.0 + 0.0j


class TestPrecondition:
    def test_orthonormal_rowspace_unchanged(self):
        rng = np.random.default_rng(0)
        u, _, vh = np.linalg.svd(crandn(rng, 10, 6), full_matrices=False)
        y = u @ vh
        assert np.abs(precondition(y) - y).max() < 1e-10

    def test_output_singular_values_one(self):
        rng = np.random.default_rng(1)
        y = crandn(rng, 12, 7)
        s = np.linalg.svd(precondition(y), compute_uv=False)
        assert np.abs(s - 1.0).max() < 1e-10

    def test_top_k_truncation(self):
        rng = np.random.default_rng(2)
        y = crandn(rng, 12, 7)
        pre = precondition(y, k_users=3)
        s = np.linalg.svd(pre, compute_uv=False)
        assert np.abs(s[:3] - 1.0).max() < 1e-10
        assert s[3:].max() < 1e-10

    def test_rank_deficiency_detected(self):
        rng = np.random.default_rng(3)
        y = np.outer(crandn(rng, 8), crandn(rng, 5))  # rank one
        with pytest.raises(RankDeficientError):
            precondition(y, k_users=2)
        with pytest.raises(RankDeficientError):
            precondition(np.zeros((4, 3), complex))


class TestPostprocess:
    def test_exact_input_recovers_frame(self):
        # Channel with exactly orthonormal (scaled) columns makes the
        # least-squares reprojection exact up to the removed row scale.
        c = build_constellation("qpsk")
        rng = np.random.default_rng(0)
        frame = build_frame(4, 30, c, rng)
        h = 2.5 * random_stiefel(64, 4, rng).a
        y = h @ frame.x
        y_pre = precondition(y, k_users=4)
        u, _, vh = np.linalg.svd(frame.x, full_matrices=False)
        x_pre = u @ vh  # orthonormal-row factor of the true frame
        x_hat = postprocess(y_pre, x_pre, y)
        assert evm(x_hat, frame.x) < 1e-6

    def test_orthonormal_d_reduces_to_adjoint(self):
        rng = np.random.default_rng(1)
        u = random_stiefel(10, 3, rng).a
        x_pre = random_stiefel(8, 3, rng).a.conj().T
        y_pre = u @ x_pre  # makes D = y_pre x_pre^H = u exactly
        y = crandn(rng, 10, 8)
        x_hat = postprocess(y_pre, x_pre, y)
        direct = u.conj().T @ y
        direct = direct / np.linalg.norm(direct, axis=1, keepdims=True)
        assert np.abs(x_hat - direct).max() < 1e-10

    def test_scalar_case_by_hand(self):
        y_pre = np.array([[1.0], [1.0]], dtype=complex) / np.sqrt(2)
        x_pre = np.array([[1.0]], dtype=complex)
        y = np.array([[3.0, 0.0], [0.0, 4.0]], dtype=complex)
        # D = y_pre, least squares gives [3, 4]/sqrt(2), normalized to unit norm.
        out = postprocess(y_pre, x_pre, y)
        assert np.allclose(out, np.array([[0.6, 0.8]]))

    def test_singular_reprojection_rejected(self):
        with pytest.raises(RankDeficientError):
            postprocess(np.zeros((4, 3), complex), np.ones((2, 3), complex), np.ones((4, 3), complex))


class TestDemodulate:
    def test_identity_on_exact_points(self):
        c = build_constellation("qam16")
        rng = np.random.default_rng(0)
        idx = rng.integers(0, 16, size=(3, 20))
        x = c.points[idx] / np.sqrt(20)
        out = demodulate(x, c)
        assert np.array_equal(out.indices, idx)

    def test_identity_under_small_perturbation(self):
        c = build_constellation("qpsk")
        rng = np.random.default_rng(1)
        idx = rng.integers(0, 4, size=(2, 30))
        dmin = np.sqrt(2.0)  # QPSK minimum distance
        noise = crandn(rng, 2, 30)
        noise = noise / np.abs(noise) * (0.49 * dmin)
        x = (c.points[idx] + noise) / np.sqrt(30)
        out = demodulate(x, c)
        assert np.array_equal(out.indices, idx)

    def test_exhaustive_nearest_oracle(self):
        c = build_constellation("qam16")
        rng = np.random.default_rng(2)
        v = 2.0 * crandn(rng, 4, 25)
        out = demodulate(v / np.sqrt(25), c)
        for i in range(4):
            for t in range(25):
                dists = [abs(v[i, t] - p) for p in c.points]
                assert out.indices[i, t] == int(np.argmin(dists))


class TestDetectEndToEnd:
    def test_noiseless_recovery(self):
        c = build_constellation("qpsk")
        rng = np.random.default_rng(0)
        frame = build_frame(4, 80, c, rng)
        chan = bernoulli_gaussian_channel(128, 4, 0.15, rng)
        rx = synthesize_received(chan, frame, np.ones(4), np.ones(4), 0.0, rng)
        res = detect(rx.y_bar, rx.g_diag, frame.meta, c, SolverOptions(), rng)
        start = frame.payload_start
        assert np.array_equal(res.symbol_indices[:, start:], frame.symbol_indices[:, start:])
        assert evm(res.x_hat, frame.x) < 0.1

    def test_preconditioned_short_frame(self):
        c = build_constellation("qpsk")
        rng = np.random.default_rng(4)
        frame = build_frame(4, 24, c, rng)
        chan = bernoulli_gaussian_channel(128, 4, 0.1, rng)
        sigma = 4 / (1000 * 24)
        rx = synthesize_received(chan, frame, np.ones(4), np.ones(4), sigma, rng)
        res_pre = detect(rx.y_bar, rx.g_diag, frame.meta, c,
                         SolverOptions(precondition=True), np.random.default_rng(1))
        assert evm(res_pre.x_hat, frame.x) < 0.1

    def test_genie_align_never_worse_than_protocol(self):
        c = build_constellation("qpsk")
        rng = np.random.default_rng(5)
        frame = build_frame(4, 60, c, rng)
        chan = bernoulli_gaussian_channel(96, 4, 0.2, rng)
        rx = synthesize_received(chan, frame, np.ones(4), np.ones(4), 1e-3, rng)
        res = detect(rx.y_bar, rx.g_diag, frame.meta, c, SolverOptions(), rng)
        aligned = genie_align(res.x_hat, frame.x)
        assert evm(aligned, frame.x) <= evm(res.x_hat, frame.x) + 1e-12


class TestRiemannianGdBaseline:
    def test_matches_polar_solver_on_noiseless_instance(self):
        rng = np.random.default_rng(9)
        x = random_stiefel(60, 4, rng).a.conj().T
        chan = bernoulli_gaussian_channel(128, 4, 0.15, rng)
        y = chan.h_bar @ x
        opts = SolverOptions(max_iters=500, eta_tol=1e-7)
        _, tr_fw = solve(y, np.ones(4), opts, np.random.default_rng(3))
        _, tr_gd = riemannian_gd_baseline(y, np.ones(4), opts, np.random.default_rng(3))
        rel = abs(tr_fw.final_objective - tr_gd.final_objective) / tr_fw.final_objective
        assert rel < 0.01
        assert np.all(np.diff(tr_gd.objective_per_iter) > 0)

    def test_needs_more_evaluations(self):
        # Same tolerance, same start: the line-searched gradient method
        # spends strictly more objective/gradient evaluations.
        rng = np.random.default_rng(2)
        frame = build_frame(8, 240, build_constellation("qpsk"), rng)
        chan = bernoulli_gaussian_channel(256, 8, 0.1, rng)
        sigma = 8 / (1000 * 240)
        rx = synthesize_received(chan, frame, np.ones(8), np.ones(8), sigma, rng)
        opts = SolverOptions(max_iters=500, eta_tol=1e-7)
        _, tr_fw = solve(rx.y_bar, rx.g_diag, opts, np.random.default_rng(1))
        _, tr_gd = riemannian_gd_baseline(rx.y_bar, rx.g_diag, opts, np.random.default_rng(1))
        assert tr_gd.n_evals > tr_fw.n_evals


class TestPilotZf:
    def test_soft_threshold_closed_form(self):
        assert soft_threshold(np.array([3.0 + 0j]), 1.0)[0] == pytest.approx(2.0)
        assert soft_threshold(np.array([-3.0 + 0j]), 1.0)[0] == pytest.approx(-2.0)
        z = soft_threshold(np.array([3.0j]), 1.0)[0]
        assert z == pytest.approx(2.0j)
        assert soft_threshold(np.array([0.5 + 0j]), 1.0)[0] == 0.0

    def test_unregularized_exact_with_orthogonal_pilots(self):
        rng = np.random.default_rng(0)
        k, t_pilot, m = 4, 8, 64
        pilots = random_stiefel(t_pilot, k, rng).a.conj().T  # orthonormal rows
        chan = bernoulli_gaussian_channel(m, k, 0.2, rng)
        g = np.ones(k)
        y_train = chan.h_bar @ pilots
        x = random_stiefel(30, k, rng).a.conj().T
        y_data = chan.h_bar @ x
        x_hat = pilot_zf_baseline(y_train, pilots, y_data, g, lam=0.0)
        assert evm(x_hat, x) < 1e-8

    def test_underdetermined_needs_regularization(self):
        # Six pilots for eight users: unregularized least squares cannot
        # produce a full-rank detector, the l1-regularized pass can.
        c = build_constellation("qpsk")
        rng = np.random.default_rng(1)
        k, t_pilot, m, t_len = 8, 6, 256, 240
        frame = build_frame(k, t_len, c, rng)
        chan = bernoulli_gaussian_channel(m, k, 0.1, rng)
        g = np.ones(k)
        sigma = k / (1.0 * t_len)  # 0 dB
        rx = synthesize_received(chan, frame, g, g, sigma, rng)
        pilots = c.points[rng.integers(0, 4, size=(k, t_pilot))]
        noise = crandn(rng, m, t_pilot) * np.sqrt(sigma)
        y_train = chan.h_bar @ pilots + noise
        with pytest.raises(RankDeficientError):
            pilot_zf_baseline(y_train, pilots, rx.y_bar, g, lam=0.0)
        x_hat = pilot_zf_baseline(y_train, pilots, rx.y_bar, g, lam=2.0)
        assert np.isfinite(evm(x_hat, frame.x))

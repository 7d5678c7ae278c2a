import math

import numpy as np
import pytest
import scipy.linalg

from cavityq import fock, gates, trotter
from cavityq.errors import (
    InvalidDimensionError,
    NumericError,
    ShapeError,
    UsageError,
)

N = 8


def random_hamiltonian(seed=42, n=N, h_norm_times_t=5.0, t=1.0):
    """Seeded split-diagonal instance rescaled so t * ||H||_2 is fixed."""
    rng = np.random.default_rng(seed)
    v = rng.uniform(-0.5, 0.5, n)
    k = rng.uniform(-0.5, 0.5, n)
    h = trotter.QuditHamiltonian(v, k)
    scale = h_norm_times_t / (np.linalg.norm(h.dense(), 2) * t)
    return trotter.QuditHamiltonian(v * scale, k * scale)


def expm_reference(h, t):
    """Independent dense propagator, not the package's eigh path."""
    return scipy.linalg.expm(-1j * h.dense() * t)


class TestQuditHamiltonian:
    def test_dense_is_hermitian(self):
        h = random_hamiltonian()
        dense = h.dense()
        np.testing.assert_allclose(dense, dense.conj().T, atol=1e-12)
        assert h.operator().is_hermitian(1e-12)

    def test_diagonal_part_in_rad_per_s(self):
        h = trotter.QuditHamiltonian([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
        np.testing.assert_allclose(
            np.diag(h.dense()), 2 * np.pi * np.array([1.0, 2.0, 3.0]), atol=1e-12
        )

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            trotter.QuditHamiltonian([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_needs_two_levels(self):
        with pytest.raises(InvalidDimensionError):
            trotter.QuditHamiltonian([1.0], [1.0])

    def test_nonfinite_rejected(self):
        with pytest.raises(NumericError):
            trotter.QuditHamiltonian([1.0, np.inf], [0.0, 0.0])


class TestTrotterStep:
    def test_circuit_layout(self):
        h = random_hamiltonian()
        circ = trotter.trotter_step(h, 0.01, N)
        kinds = [g.kind for g in circ.gates]
        assert kinds == ["snap", "fourier", "snap", "fourier"]
        assert circ.gates[1].params["inverse"] is True
        assert circ.gates[3].params.get("inverse", False) is False
        np.testing.assert_allclose(
            circ.gates[0].params["theta"], -2 * np.pi * h.diagonal * 0.01
        )
        np.testing.assert_allclose(
            circ.gates[2].params["theta"], -2 * np.pi * h.kinetic_diagonal * 0.01
        )

    def test_potential_only_is_exact(self):
        rng = np.random.default_rng(0)
        h = trotter.QuditHamiltonian(rng.uniform(-1, 1, N), np.zeros(N))
        u = gates.circuit_unitary(trotter.trotter_step(h, 0.37)).matrix
        np.testing.assert_allclose(u, expm_reference(h, 0.37), atol=1e-12)

    def test_kinetic_only_is_exact(self):
        rng = np.random.default_rng(1)
        h = trotter.QuditHamiltonian(np.zeros(N), rng.uniform(-1, 1, N))
        u = gates.circuit_unitary(trotter.trotter_step(h, 0.91)).matrix
        np.testing.assert_allclose(u, expm_reference(h, 0.91), atol=1e-12)

    def test_per_step_error_is_second_order(self):
        # halving dt shrinks ||U_step - expm|| by about 4
        h = random_hamiltonian()
        errs = []
        for dt in (0.05, 0.025, 0.0125):
            u = gates.circuit_unitary(trotter.trotter_step(h, dt)).matrix
            errs.append(np.linalg.norm(u - expm_reference(h, dt), 2))
        for big, small in zip(errs, errs[1:]):
            assert 3.5 < big / small < 4.5

    def test_step_is_unitary(self):
        h = random_hamiltonian()
        u = gates.circuit_unitary(trotter.trotter_step(h, 0.02))
        assert u.is_unitary(1e-12)

    def test_bad_dt(self):
        h = random_hamiltonian()
        with pytest.raises(UsageError):
            trotter.trotter_step(h, 0.0)
        with pytest.raises(UsageError):
            trotter.trotter_step(h, -1.0)

    def test_level_count_mismatch(self):
        with pytest.raises(ShapeError):
            trotter.trotter_step(random_hamiltonian(), 0.01, N + 1)


class TestEvolveTrotter:
    def test_large_step_count_accuracy(self):
        # t * ||H|| = 5, steps = 200
        h = random_hamiltonian()
        res = trotter.evolve_trotter(h, 1.0, 200)
        assert res.infidelity < 1e-4
        assert res.dt_s == pytest.approx(1.0 / 200)

    def test_zero_time_is_identity(self):
        h = random_hamiltonian()
        psi0 = fock.basis_state(fock.HilbertShape((N,)), [3])
        res = trotter.evolve_trotter(h, 0.0, 50, psi0)
        np.testing.assert_array_equal(res.state.amplitudes, psi0.amplitudes)
        assert res.exact_fidelity == 1.0

    def test_commuting_terms_exact_at_any_step_count(self):
        # constant kinetic diagonal -> kinetic term proportional to identity
        rng = np.random.default_rng(2)
        h = trotter.QuditHamiltonian(rng.uniform(-1, 1, N), np.full(N, 0.7))
        for steps in (1, 7):
            res = trotter.evolve_trotter(h, 0.8, steps)
            assert res.infidelity < 1e-12

    def test_norm_preserved(self):
        h = random_hamiltonian()
        rng = np.random.default_rng(3)
        psi0 = rng.normal(size=N) + 1j * rng.normal(size=N)
        res = trotter.evolve_trotter(h, 1.0, 37, psi0)
        assert abs(res.state.norm() - 1.0) < 1e-9

    def test_matches_expm_reference_directly(self):
        h = random_hamiltonian(seed=9)
        rng = np.random.default_rng(4)
        psi0 = rng.normal(size=N) + 1j * rng.normal(size=N)
        psi0 /= np.linalg.norm(psi0)
        res = trotter.evolve_trotter(h, 1.0, 400, psi0)
        exact = expm_reference(h, 1.0) @ psi0
        fid = abs(np.vdot(exact, res.state.amplitudes.reshape(N))) ** 2
        assert fid == pytest.approx(res.exact_fidelity, abs=1e-12)

    def test_global_error_first_order(self):
        # error norm vs dt fits a line of slope ~1 in log-log
        h = random_hamiltonian()
        rng = np.random.default_rng(5)
        psi0 = rng.normal(size=N) + 1j * rng.normal(size=N)
        psi0 /= np.linalg.norm(psi0)
        exact = expm_reference(h, 1.0) @ psi0
        steps_list = np.array([50, 100, 200, 400])
        errs = []
        for steps in steps_list:
            res = trotter.evolve_trotter(h, 1.0, int(steps), psi0)
            errs.append(np.linalg.norm(res.state.amplitudes.reshape(N) - exact))
        slope = np.polyfit(np.log(1.0 / steps_list), np.log(errs), 1)[0]
        assert 0.9 < slope < 1.1

    def test_bad_steps(self):
        with pytest.raises(UsageError):
            trotter.evolve_trotter(random_hamiltonian(), 1.0, 0)
        with pytest.raises(UsageError):
            trotter.evolve_trotter(random_hamiltonian(), 1.0, 1.5)

    def test_convergence_table(self):
        h = random_hamiltonian()
        rows = trotter.trotter_convergence(h, 1.0, [50, 100, 200])
        assert len(rows) == 3
        assert [r[0] for r in rows] == [50, 100, 200]
        # monotone improvement with more steps
        assert rows[0][2] > rows[1][2] > rows[2][2]
        assert rows[1][1] == pytest.approx(0.01)
        with pytest.raises(UsageError):
            trotter.trotter_convergence(h, 1.0, [])


def diagonal_unitary(seed, n=N):
    rng = np.random.default_rng(seed)
    return np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, n)))


class TestOtoc:
    def test_commuting_at_t_zero(self):
        h = random_hamiltonian()
        w = diagonal_unitary(10)
        v = diagonal_unitary(11)
        val = trotter.otoc(w, v, h, 0.0)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_diagonal_dynamics_constant(self):
        rng = np.random.default_rng(6)
        h = trotter.QuditHamiltonian(rng.uniform(-1, 1, N), np.zeros(N))
        w = diagonal_unitary(12)
        v = diagonal_unitary(13)
        ref = trotter.otoc(w, v, h, 0.0)
        for t in (0.3, 1.7, 4.0):
            assert trotter.otoc(w, v, h, t) == pytest.approx(ref, abs=1e-12)

    def test_unitarity_bound_and_decay(self):
        h = random_hamiltonian(seed=5)
        w = diagonal_unitary(14)
        v = diagonal_unitary(15)
        ts = np.linspace(0.0, 6.0, 25)
        vals = [trotter.otoc(w, v, h, t) for t in ts]
        mags = [abs(x) for x in vals]
        assert all(m <= 1 + 1e-12 for m in mags)
        assert mags[0] == pytest.approx(1.0, abs=1e-12)
        assert min(mags) < 0.9  # scrambling pulls it well below 1

    def test_against_independent_dense_evaluation(self):
        # brute-force chain built on scipy's expm, not the package propagator
        h = random_hamiltonian(seed=21)
        rng = np.random.default_rng(16)
        w_h = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        w = scipy.linalg.expm(1j * (w_h + w_h.conj().T) / 8)
        v = gates.fourier(N).matrix
        t = 1.7
        u = scipy.linalg.expm(-1j * h.dense() * t)
        w_t = u.conj().T @ w @ u
        e0 = np.zeros(N, complex)
        e0[0] = 1.0
        brute = np.vdot(e0, w_t.conj().T @ v.conj().T @ w_t @ v @ e0)
        assert trotter.otoc(w, v, h, t) == pytest.approx(complex(brute), abs=1e-9)

    def test_accepts_operator_inputs_and_custom_state(self):
        h = random_hamiltonian()
        shape = fock.HilbertShape((N,))
        w = fock.Operator(shape, diagonal_unitary(17))
        v = fock.Operator(shape, diagonal_unitary(18))
        psi0 = fock.basis_state(shape, [2])
        val = trotter.otoc(w, v, h, 0.0, psi0)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_shape_mismatch(self):
        h = random_hamiltonian()
        with pytest.raises(ShapeError):
            trotter.otoc(np.eye(N + 1), np.eye(N), h, 1.0)
        with pytest.raises(ShapeError):
            trotter.otoc(np.eye(N), np.eye(N), h, 1.0, np.ones(N + 2))

    def test_series_matches_pointwise(self):
        h = random_hamiltonian(seed=5)
        w = diagonal_unitary(14)
        v = diagonal_unitary(15)
        times = [0.0, 0.5, 1.25]
        rows = trotter.otoc_series(w, v, h, times)
        assert len(rows) == 3
        for (t, re, im, mag) in rows:
            val = trotter.otoc(w, v, h, t)
            assert re == pytest.approx(val.real, abs=1e-12)
            assert im == pytest.approx(val.imag, abs=1e-12)
            assert mag == pytest.approx(abs(val), abs=1e-12)

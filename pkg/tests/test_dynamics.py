import numpy as np
import pytest

from conftest import make_waveform
from helpers import random_density
from spintomo import (
    ControlWaveform,
    build_spin_system,
    heisenberg_history,
    lindblad_superoperator,
    measured_observable,
    propagate_state,
    read_history,
    resolve_jump_ops,
    sample_times,
    state_to_coords,
    step_hamiltonian,
    step_propagator,
    write_history,
)
from spintomo import test_state as make_state
from spintomo.metrics import purity


class TestControlWaveform:
    def test_validation(self):
        with pytest.raises(ValueError):
            ControlWaveform(n_steps=0, dt=1e-5, phi=(), omega_larmor=1.0, chi=0.0)
        with pytest.raises(ValueError):
            ControlWaveform(n_steps=1, dt=-1.0, phi=(0.0,), omega_larmor=1.0, chi=0.0)
        with pytest.raises(ValueError):
            ControlWaveform(n_steps=2, dt=1e-5, phi=(0.0,), omega_larmor=1.0, chi=0.0)
        with pytest.raises(ValueError):
            ControlWaveform(n_steps=1, dt=1e-5, phi=(0.0,), omega_larmor=-1.0, chi=0.0)
        with pytest.raises(ValueError):
            ControlWaveform(
                n_steps=1, dt=1e-5, phi=(0.0,), omega_larmor=1.0, chi=0.0, jump_ops="bogus"
            )

    def test_fingerprint_tracks_content(self, default_waveform):
        same = make_waveform()
        assert same.fingerprint() == default_waveform.fingerprint()
        changed = make_waveform(chi=default_waveform.chi * 1.0001)
        assert changed.fingerprint() != default_waveform.fingerprint()

    def test_with_scales(self, default_waveform):
        scaled = default_waveform.with_scales(omega_scale=1.01, chi_scale=0.99)
        assert scaled.omega_larmor == pytest.approx(default_waveform.omega_larmor * 1.01)
        assert scaled.chi == pytest.approx(default_waveform.chi * 0.99)
        assert scaled.phi == default_waveform.phi


class TestStepHamiltonian:
    def test_field_along_x(self, sys3):
        wf = ControlWaveform(n_steps=1, dt=1e-5, phi=(0.0,), omega_larmor=2.0, chi=0.0)
        assert np.max(np.abs(step_hamiltonian(sys3, wf, 0) - 2.0 * sys3.Fx)) < 1e-12

    def test_pure_twisting(self, sys3):
        wf = ControlWaveform(n_steps=1, dt=1e-5, phi=(0.3,), omega_larmor=0.0, chi=1.5)
        assert np.max(np.abs(step_hamiltonian(sys3, wf, 0) - 1.5 * sys3.Fx @ sys3.Fx)) < 1e-12

    def test_quarter_turn_swaps_axes(self, sys3):
        wf = ControlWaveform(
            n_steps=2, dt=1e-5, phi=(0.0, np.pi / 2), omega_larmor=1.0, chi=0.0
        )
        assert np.max(np.abs(step_hamiltonian(sys3, wf, 1) - sys3.Fy)) < 1e-12

    def test_index_out_of_range(self, sys3, default_waveform):
        with pytest.raises(IndexError):
            step_hamiltonian(sys3, default_waveform, default_waveform.n_steps)


class TestStepPropagator:
    def test_zero_hamiltonian(self):
        assert np.max(np.abs(step_propagator(np.zeros((3, 3)), 0.7) - np.eye(3))) < 1e-14

    def test_group_property(self, sys3):
        H = step_hamiltonian(sys3, make_waveform(), 0)
        u1 = step_propagator(H, 1e-5)
        u2 = step_propagator(H, 2.5e-5)
        u3 = step_propagator(H, 3.5e-5)
        assert np.max(np.abs(u1 @ u2 - u3)) < 1e-10

    def test_unitarity(self, sys3):
        H = step_hamiltonian(sys3, make_waveform(), 3)
        U = step_propagator(H, 5e-5)
        assert np.linalg.norm(U.conj().T @ U - np.eye(7)) < 1e-10

    def test_spin_half_analytic(self):
        s = build_spin_system(0.5)
        omega = 4.0
        U = step_propagator(omega * s.Fz, np.pi / omega)
        want = np.diag([np.exp(-1j * np.pi / 2), np.exp(1j * np.pi / 2)])
        assert np.max(np.abs(U - want)) < 1e-12

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            step_propagator(np.array([[0.0, 1.0], [0.0, 0.0]]), 0.1)


class TestLindblad:
    def test_hamiltonian_part_matches_unitary_conjugation(self, sys3):
        wf = make_waveform()
        rho = make_state(sys3, "cat")
        states = propagate_state(rho, sys3, wf, n_samples=30, substeps=4)
        U = np.eye(7, dtype=complex)
        dt_sample = wf.duration / 30
        direct = [rho]
        for i in range(29):
            H = step_hamiltonian(sys3, wf, i)  # one sample per segment here
            U = step_propagator(H, dt_sample)
            direct.append(U @ direct[-1] @ U.conj().T)
        for a, b in zip(states, direct):
            assert np.max(np.abs(a - b)) < 1e-10

    def test_top_row_is_zero(self, sys3):
        H = step_hamiltonian(sys3, make_waveform(gamma_dec=120.0), 0)
        gen = lindblad_superoperator(
            sys3, H, 120.0, resolve_jump_ops(sys3, "isotropic")
        )
        assert np.max(np.abs(gen[0])) < 1e-12

    def test_isotropic_fixed_point(self, sys3):
        wf = make_waveform(gamma_dec=200.0)
        mixed = make_state(sys3, "mixed")
        states = propagate_state(mixed, sys3, wf, n_samples=30)
        assert np.max(np.abs(states[-1] - mixed)) < 1e-10

    def test_trace_preserved_150_steps(self, sys3):
        rng = np.random.default_rng(8)
        rho = random_density(rng, 7)
        states = propagate_state(rho, sys3, make_waveform(gamma_dec=80.0), n_samples=150)
        for s in states:
            assert abs(np.trace(s) - 1.0) < 1e-9

    def test_dimension_mismatch(self, sys3):
        with pytest.raises(ValueError):
            lindblad_superoperator(sys3, np.eye(3), 1.0, (np.eye(3),))


class TestPropagateState:
    def test_larmor_precession(self, sys3):
        angle = 0.8
        wf = ControlWaveform(
            n_steps=10, dt=1e-5, phi=(angle,) * 10, omega_larmor=2 * np.pi * 3000, chi=0.0
        )
        rho0 = make_state(sys3, "basis_state", m=3)
        states = propagate_state(rho0, sys3, wf, n_samples=50)
        axis = np.array([np.cos(angle), np.sin(angle), 0.0])
        times = sample_times(wf, 50)
        lengths = []
        for t, rho in zip(times, states):
            vec = np.array(
                [
                    np.trace(rho @ sys3.Fx).real,
                    np.trace(rho @ sys3.Fy).real,
                    np.trace(rho @ sys3.Fz).real,
                ]
            )
            lengths.append(np.linalg.norm(vec))
            # component along the field axis is conserved; z-component rotates
            assert vec @ axis == pytest.approx(0.0, abs=1e-9)
            assert vec[2] == pytest.approx(3 * np.cos(wf.omega_larmor * t), abs=1e-8)
        assert np.max(np.abs(np.array(lengths) - 3.0)) < 1e-9

    def test_outputs_physical(self, sys3):
        rng = np.random.default_rng(9)
        rho = random_density(rng, 7, rank=3)
        for s in propagate_state(rho, sys3, make_waveform(gamma_dec=100.0), n_samples=30):
            assert np.max(np.abs(s - s.conj().T)) < 1e-12
            assert abs(np.trace(s) - 1) < 1e-9
            assert np.linalg.eigvalsh(s)[0] > -1e-9

    def test_purity_monotone_under_isotropic_noise(self, sys3):
        rho0 = make_state(sys3, "cat")
        states = propagate_state(rho0, sys3, make_waveform(gamma_dec=150.0), n_samples=150)
        purities = [purity(s) for s in states]
        assert all(b <= a + 1e-10 for a, b in zip(purities, purities[1:]))

    def test_reversible_when_unitary(self, sys3):
        wf = make_waveform()
        rng = np.random.default_rng(10)
        rho0 = random_density(rng, 7)
        forward = np.eye(7, dtype=complex)
        for i in range(wf.n_steps):
            forward = step_propagator(step_hamiltonian(sys3, wf, i), wf.dt) @ forward
        rho_end = forward @ rho0 @ forward.conj().T
        back = rho_end
        for i in reversed(range(wf.n_steps)):
            back = (
                step_propagator(step_hamiltonian(sys3, wf, i), -wf.dt)
                @ back
                @ step_propagator(step_hamiltonian(sys3, wf, i), -wf.dt).conj().T
            )
        assert np.linalg.norm(back - rho0) < 1e-8

    def test_squeezing_under_pure_twisting(self, sys3):
        wf = ControlWaveform(
            n_steps=1, dt=1.5e-3, phi=(0.0,), omega_larmor=0.0, chi=2 * np.pi * 1000
        )
        rho0 = make_state(sys3, "basis_state", m=3)
        best = np.inf
        for rho in propagate_state(rho0, sys3, wf, n_samples=150):
            ex = np.trace(rho @ sys3.Fx).real
            ey = np.trace(rho @ sys3.Fy).real
            vxx = np.trace(rho @ sys3.Fx @ sys3.Fx).real - ex**2
            vyy = np.trace(rho @ sys3.Fy @ sys3.Fy).real - ey**2
            vxy = (
                0.5 * np.trace(rho @ (sys3.Fx @ sys3.Fy + sys3.Fy @ sys3.Fx)).real
                - ex * ey
            )
            best = min(best, np.linalg.eigvalsh([[vxx, vxy], [vxy, vyy]])[0])
        assert best < 1.5  # below the coherent-state transverse variance F/2

    def test_sample_alignment_enforced(self, sys3, default_waveform):
        with pytest.raises(ValueError, match="multiple"):
            propagate_state(
                make_state(sys3, "mixed"), sys3, default_waveform, n_samples=100
            )


class TestHeisenbergHistory:
    def test_identity_waveform_static_observable(self, sys3):
        wf = ControlWaveform(n_steps=1, dt=1e-4, phi=(0.0,), omega_larmor=0.0, chi=0.0)
        O = measured_observable(sys3)
        h = heisenberg_history(sys3, wf, O, n_samples=20)
        for Oi in h.observables:
            assert np.max(np.abs(Oi - O)) < 1e-12

    @pytest.mark.parametrize("gamma", [0.0, 100.0])
    def test_duality_against_schrodinger(self, sys3, gamma):
        wf = make_waveform(gamma_dec=gamma)
        O = measured_observable(sys3)
        h = heisenberg_history(sys3, wf, O, n_samples=150)
        rng = np.random.default_rng(11)
        for _ in range(10):
            rho0 = random_density(rng, 7, rank=int(rng.integers(1, 8)))
            heis = h.design_matrix @ state_to_coords(rho0)
            states = propagate_state(rho0, sys3, wf, n_samples=150)
            schro = np.array([np.trace(O @ s).real for s in states])
            assert np.max(np.abs(heis - schro)) < 1e-8

    def test_observable_norm_contracts_under_noise(self, sys3):
        # rotations keep the observable inside one tensor rank, where the
        # isotropic dissipator is a pure decay: strictly monotone norms
        wf = make_waveform(gamma_dec=150.0, chi=0.0)
        h = heisenberg_history(sys3, wf, measured_observable(sys3), n_samples=150)
        norms = np.linalg.norm(h.design_matrix, axis=1)
        assert all(b <= a + 1e-10 for a, b in zip(norms, norms[1:]))
        assert norms[-1] < 0.7 * norms[0]

    def test_observable_norm_bounded_with_twisting(self, sys3):
        # with the nonlinear term the composed adjoint chain is not
        # monotone sample to sample, but each map is a contraction, so
        # nothing exceeds the initial norm
        wf = make_waveform(gamma_dec=150.0)
        h = heisenberg_history(sys3, wf, measured_observable(sys3), n_samples=150)
        norms = np.linalg.norm(h.design_matrix, axis=1)
        assert np.max(norms) <= norms[0] + 1e-10
        assert norms[-1] < 0.7 * norms[0]

    def test_design_rows_match_observables(self, sys3, default_history):
        for i in range(0, 150, 30):
            row = state_to_coords(default_history.observables[i])
            assert np.max(np.abs(row - default_history.design_matrix[i])) < 1e-12

    def test_times_grid(self, sys3, default_waveform, default_history):
        t = default_history.times
        assert t[0] == 0.0
        assert np.all(np.diff(t) > 0)
        dt_sample = default_waveform.duration / 150
        assert np.max(np.abs(t - np.arange(150) * dt_sample)) < 1e-15

    def test_rejects_non_hermitian_observable(self, sys3, default_waveform):
        bad = np.zeros((7, 7))
        bad[0, 1] = 1.0
        with pytest.raises(ValueError):
            heisenberg_history(sys3, default_waveform, bad, n_samples=150)


class TestHistoryFile:
    def test_round_trip(self, tmp_path):
        s = build_spin_system(1)
        wf = ControlWaveform(
            n_steps=2, dt=2e-5, phi=(0.1, 1.4), omega_larmor=5e3, chi=2e3, gamma_dec=40.0
        )
        h = heisenberg_history(s, wf, measured_observable(s), n_samples=10)
        path = tmp_path / "history.json"
        write_history(h, path)
        again = read_history(path)
        assert again.waveform_fingerprint == h.waveform_fingerprint
        assert np.array_equal(again.times, h.times)
        assert np.array_equal(again.design_matrix, h.design_matrix)
        assert np.array_equal(again.observables, h.observables)
        write_history(again, tmp_path / "history2.json")
        assert (tmp_path / "history.json").read_bytes() == (
            tmp_path / "history2.json"
        ).read_bytes()

    def test_rejects_bad_documents(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version": 99}')
        with pytest.raises(ValueError, match="missing field"):
            read_history(path)
        path.write_text("{not json")
        with pytest.raises(ValueError, match="JSON"):
            read_history(path)

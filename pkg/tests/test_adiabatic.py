import math

import numpy as np
import pytest

from holosim import adiabatic, holonomy, linalg, models

QUBIT_LOOP_THETA = math.pi / 3


def usb_setup():
    path = models.make_usb_loop("circle")
    phi1, phi2 = models.usb_dark_frame(path(np.array([0.0]))[0])
    return models.UsbModel(), path, np.stack([phi1, phi2], axis=1)


class TestEvolveSchrodinger:
    def test_stationary_eigenstate_collects_energy_phase(self):
        n0 = np.array([0.3, -0.2, 0.9])
        g = models.qubit_ground_state(n0)
        run = adiabatic.AdiabaticRun(
            models.QubitModel(), models.constant_path(n0), 7.0, 64, g
        )
        res = adiabatic.evolve_schrodinger(run)
        eps = -np.linalg.norm(n0)
        assert np.max(np.abs(res.final_state() - np.exp(-1j * eps * 7.0) * g)) < 1e-8

    def test_zero_hamiltonian_identity_evolution(self):
        state = np.array([0.6, 0.8j])
        run = adiabatic.AdiabaticRun(
            models.QubitModel(), models.constant_path([0.0, 0.0, 0.0]), 5.0, 32, state
        )
        res = adiabatic.evolve_schrodinger(run)
        assert np.max(np.abs(res.final_state() - state / np.linalg.norm(state))) < 1e-12

    def test_norm_preserved(self):
        model, path, frame = usb_setup()
        run = adiabatic.AdiabaticRun(model, path, 50.0, 2048, frame)
        res = adiabatic.evolve_schrodinger(run)
        assert res.norm_drift < 1e-8

    def test_step_doubling_stability(self):
        # shipped reference run: T = 50 at 50k steps
        model, path, frame = usb_setup()
        finals = []
        for steps in (50_000, 100_000):
            run = adiabatic.AdiabaticRun(model, path, 50.0, steps, frame)
            finals.append(adiabatic.evolve_schrodinger(run).final_states)
        assert np.max(np.abs(finals[0] - finals[1])) < 1e-6

    def test_under_resolved_run_warns(self):
        model, path, frame = usb_setup()
        run = adiabatic.AdiabaticRun(model, path, 50.0, 16, frame)
        with pytest.warns(RuntimeWarning, match="under-resolved"):
            adiabatic.evolve_schrodinger(run)

    def test_run_validation(self):
        model, path, frame = usb_setup()
        with pytest.raises(ValueError, match="positive"):
            adiabatic.AdiabaticRun(model, path, 0.0, 64, frame)
        with pytest.raises(ValueError, match="16"):
            adiabatic.AdiabaticRun(model, path, 1.0, 8, frame)
        with pytest.raises(ValueError, match="dimension"):
            adiabatic.AdiabaticRun(model, path, 1.0, 64, np.array([1.0, 0.0]))

    def test_qubit_loop_total_phase_splits(self):
        # slow drive: stripped overlap phase approaches the loop phase,
        # improving with T
        loop = models.make_azimuthal_loop(QUBIT_LOOP_THETA)
        model = models.QubitModel()
        frame = models.qubit_ground_state(loop(np.array([0.0]))[0])[:, None]
        errs = {}
        for total_time in (200.0, 800.0):
            res = adiabatic.adiabatic_holonomy(
                model,
                loop,
                total_time,
                holonomy.BandBlock(0, 1),
                adiabatic.default_steps(total_time),
                initial_frame=frame,
            )
            phase = float(np.angle(res.overlap_matrix[0, 0]))
            errs[total_time] = abs(linalg.wrap_angle(phase + math.pi / 2))
        assert errs[200.0] < 2e-2
        assert errs[800.0] < errs[200.0]


class TestDynamicalPhase:
    def test_constant_energy(self):
        path = models.constant_path([0.0, 0.0, 1.5])
        delta = adiabatic.dynamical_phase(models.QubitModel(), path, 10.0, band=1)
        assert delta == pytest.approx(-15.0, abs=1e-12)

    def test_dark_band_exactly_zero(self):
        model = models.UsbModel()
        for params in ({}, {"q0": 0.3}):
            path = models.make_usb_loop("circle", params)
            for total_time in (1.0, 123.0, 4000.0):
                assert adiabatic.dynamical_phase(model, path, total_time, band=1) == 0.0
                assert adiabatic.dynamical_phase(model, path, total_time, band=2) == 0.0

    def test_constant_norm_loop(self):
        path = models.make_azimuthal_loop(1.1, radius=2.0)
        delta = adiabatic.dynamical_phase(models.QubitModel(), path, 30.0, band=0)
        assert delta == pytest.approx(2.0 * 30.0, rel=1e-12)

    def test_crossing_rejected(self):
        path = models.ParameterPath(
            lambda s: np.stack(
                [np.cos(2 * np.pi * s), np.zeros_like(s), np.zeros_like(s)], axis=1
            ),
            3,
            closed=True,
            label="through-origin",
        )
        with pytest.raises(ValueError, match="crosses"):
            adiabatic.dynamical_phase(models.QubitModel(), path, 10.0, band=0)


class TestAdiabaticHolonomy:
    def test_constant_loop_identity(self):
        model, _, frame = usb_setup()
        path = models.constant_path([0.0, 1.0, 0.5])
        phi1, phi2 = models.usb_dark_frame(path(np.array([0.0]))[0])
        frame = np.stack([phi1, phi2], axis=1)
        res = adiabatic.adiabatic_holonomy(
            model, path, 20.0, holonomy.USB_DARK_BLOCK, 256, initial_frame=frame
        )
        assert linalg.max_abs(res.overlap_matrix - np.eye(2)) < 1e-10
        assert res.leakage < 1e-12

    def test_dark_space_raw_equals_stripped(self):
        model, path, frame = usb_setup()
        res = adiabatic.adiabatic_holonomy(
            model, path, 100.0, holonomy.USB_DARK_BLOCK, 8192, initial_frame=frame
        )
        assert res.dynamical_phase == 0.0
        assert np.array_equal(res.overlap_matrix, res.overlap_matrix_raw)

    def test_unstripped_overlap_converges_to_wilson_line(self):
        model, path, frame = usb_setup()
        wilson = holonomy.usb_wilson_line(path, 4096)
        dists = []
        for total_time in (100.0, 400.0):
            res = adiabatic.adiabatic_holonomy(
                model,
                path,
                total_time,
                holonomy.USB_DARK_BLOCK,
                adiabatic.default_steps(total_time),
                initial_frame=frame,
            )
            measured = linalg.nearest_unitary(res.overlap_matrix_raw)
            dists.append(holonomy.holonomy_distance(measured, wilson.matrix))
        assert dists[1] < dists[0]
        assert dists[1] < 1e-3

    def test_leakage_in_unit_interval(self):
        model, path, frame = usb_setup()
        res = adiabatic.adiabatic_holonomy(
            model, path, 50.0, holonomy.USB_DARK_BLOCK, 4096, initial_frame=frame
        )
        assert 0.0 <= res.leakage <= 1.0

    def test_open_loop_rejected(self):
        model, _, frame = usb_setup()
        path = models.ParameterPath(
            lambda s: np.stack([0.2 + s, 1.0 + s, 0.3 + s], axis=1),
            3,
            closed=False,
            label="open",
        )
        with pytest.raises(ValueError, match="closed"):
            adiabatic.adiabatic_holonomy(
                model, path, 10.0, holonomy.USB_DARK_BLOCK, 64, initial_frame=frame
            )


class TestConvergenceSweep:
    def test_constant_loop_all_zero(self):
        model, _, _ = usb_setup()
        path = models.constant_path([0.0, 1.0, 0.5])
        phi1, phi2 = models.usb_dark_frame(path(np.array([0.0]))[0])
        frame = np.stack([phi1, phi2], axis=1)
        sweep = adiabatic.convergence_sweep(
            model,
            path,
            holonomy.USB_DARK_BLOCK,
            [10.0, 20.0, 40.0],
            steps_per_t=[256, 256, 256],
            reference_samples=256,
            initial_frame=frame,
        )
        assert all(d < 1e-10 for d in sweep.distances())

    def test_usb_sweep_converges_second_order(self):
        model, path, frame = usb_setup()
        sweep = adiabatic.convergence_sweep(
            model,
            path,
            holonomy.USB_DARK_BLOCK,
            [50.0, 200.0, 800.0],
            initial_frame=frame,
        )
        d = sweep.distances()
        assert d[0] > d[1] > d[2]
        # the symmetric +-R spectrum cancels the first-order in-block term,
        # so this model's sweep is second order in 1/T
        assert sweep.slope == pytest.approx(-2.0, abs=0.3)
        leaks = sweep.leakages()
        assert leaks[0] > leaks[1] > leaks[2]

    def test_qubit_sweep_phase_error_first_order(self):
        loop = models.make_azimuthal_loop(QUBIT_LOOP_THETA)
        frame = models.qubit_ground_state(loop(np.array([0.0]))[0])[:, None]
        sweep = adiabatic.convergence_sweep(
            models.QubitModel(),
            loop,
            holonomy.BandBlock(0, 1),
            [50.0, 200.0, 800.0],
            initial_frame=frame,
        )
        d = sweep.distances()
        assert d[0] > d[1] > d[2]
        assert -1.5 <= sweep.slope <= -0.5
        leaks = sweep.leakages()
        assert leaks[0] > leaks[1] > leaks[2]

    def test_validation(self):
        model, path, frame = usb_setup()
        with pytest.raises(ValueError, match="ascending"):
            adiabatic.convergence_sweep(
                model, path, holonomy.USB_DARK_BLOCK, [10.0, 5.0, 20.0]
            )
        with pytest.raises(ValueError, match="3 T values"):
            adiabatic.convergence_sweep(model, path, holonomy.USB_DARK_BLOCK, [10.0])
        with pytest.raises(ValueError, match="match"):
            adiabatic.convergence_sweep(
                model,
                path,
                holonomy.USB_DARK_BLOCK,
                [10.0, 20.0, 40.0],
                steps_per_t=[64, 64],
            )

import numpy as np
import sympy as sp
from django.test import SimpleTestCase, override_settings

from conelab.boundary import circle_spectrum, sphere_spectrum
from conelab.domains import SelectionKind, friedrichs_domain, make_extension, maximal_extension, minimal_extension
from conelab.errors import DimensionMismatch, SlopeUndefined, UnsupportedExtension
from conelab.mellin_green import bump
from conelab.resolvent import (
    Forcing, Scheme, TimeProfile, detect_spectrum, discrete_domain, ground_state_profile, heat_solve, lp_weight,
    mode_resolvent_solve, norm_decay_fit, regularity_battery, resolvent_apply, resolvent_identity_defect,
    single_mode_ratio, spectrum_convergence, symmetry_defect,
)

NODES = 200


def _friedrichs_disk(modes=3, nodes=NODES):
    return discrete_domain(friedrichs_domain(circle_spectrum(modes)), nodes=nodes)


class WeightTests(SimpleTestCase):
    def test_lp_weight(self):
        self.assertEqual(lp_weight(1, 2), 0)
        self.assertEqual(lp_weight(1, 4), sp.Rational(1, 2))
        self.assertEqual(lp_weight(2, sp.Rational(3, 2)), sp.Rational(-1, 2))
        with self.assertRaises(ValueError):
            lp_weight(1, 1)


class DiscreteDomainTests(SimpleTestCase):
    def test_friedrichs_channels(self):
        dd = _friedrichs_disk()
        self.assertEqual(dd.J, 3)
        self.assertTrue(dd.modes[0].channel.log)
        np.testing.assert_allclose(dd.modes[0].channel.admissible, (1, 0))
        # mode k = 1 keeps t^{1}, the second root of the pair (1, −1)
        np.testing.assert_allclose(dd.modes[1].channel.admissible, (0, 1))

    def test_one_channel_per_mode(self):
        S = circle_spectrum(3)
        with self.assertRaises(UnsupportedExtension):
            discrete_domain(minimal_extension(S, 0), nodes=NODES)
        with self.assertRaises(UnsupportedExtension):
            discrete_domain(maximal_extension(S, 0), nodes=NODES)

    def test_singular_selfadjoint_channel(self):
        ext = make_extension(sphere_spectrum(2, 2), 0, 2, {1: SelectionKind.FULL})
        dd = discrete_domain(ext, nodes=NODES)
        np.testing.assert_allclose(dd.modes[0].channel.admissible, (1, 0))

    @override_settings(CONE_LAB_GRID_NODES=120, CONE_LAB_T_MIN=1e-4)
    def test_grid_defaults_come_from_settings(self):
        dd = discrete_domain(friedrichs_domain(circle_spectrum(2)))
        self.assertEqual(dd.nodes, 120)
        self.assertAlmostEqual(dd.t_min, 1e-4)

    def test_grid_validation(self):
        ext = friedrichs_domain(circle_spectrum(2))
        with self.assertRaises(ValueError):
            discrete_domain(ext, t_min=2.0, nodes=NODES)
        with self.assertRaises(ValueError):
            discrete_domain(ext, nodes=5)

    def test_refinement(self):
        fine = _friedrichs_disk().refined()
        self.assertEqual(fine.nodes, 2 * NODES)
        self.assertAlmostEqual(fine.t_min, 5e-7)


class ResolventTests(SimpleTestCase):
    def test_apply_keeps_the_domain(self):
        dd = _friedrichs_disk()
        result = resolvent_apply(dd, -1.0, [bump(mode=0), bump(mode=1)])
        self.assertLessEqual(result.residual, 1e-10)
        self.assertTrue(all(d.passed for d in result.diagnostics))
        self.assertEqual(result.solution(0)[-1], 0)
        self.assertGreater(result.norm_u, 0)
        self.assertFalse(np.any(result.solution(2)))

    def test_resolvent_identity(self):
        dd = _friedrichs_disk()
        self.assertLessEqual(resolvent_identity_defect(dd, -1.0, -3.0 + 2.0j, bump()), 1e-8)

    def test_symmetry_of_the_friedrichs_resolvent(self):
        dd = _friedrichs_disk()
        f = [bump(mode=0), bump(mode=1)]
        g = [bump(centre=float(np.log(0.4)), width=0.3, mode=0), bump(mode=1)]
        self.assertLessEqual(symmetry_defect(dd, -1.0 + 1.0j, f, g), 1e-6)

    def test_shape_checks(self):
        dd = _friedrichs_disk()
        with self.assertRaises(DimensionMismatch):
            mode_resolvent_solve(dd, -1.0, 5, np.zeros(dd.nodes))
        with self.assertRaises(DimensionMismatch):
            mode_resolvent_solve(dd, -1.0, 0, np.zeros(dd.nodes - 1))
        with self.assertRaises(DimensionMismatch):
            resolvent_apply(dd, -1.0, bump(mode=7))

    def test_decay_along_the_negative_axis(self):
        fit = norm_decay_fit(_friedrichs_disk(), np.pi, [1, 10, 100, 1000, 10000])
        self.assertGreaterEqual(fit.slope, -1.1)
        self.assertLessEqual(fit.slope, -0.9)
        self.assertLessEqual(fit.max_residual, 1e-7)
        self.assertIn(10000.0, fit.used)

    def test_decay_needs_two_magnitudes(self):
        with self.assertRaises(SlopeUndefined):
            norm_decay_fit(_friedrichs_disk(), np.pi, [10])


class SpectrumTests(SimpleTestCase):
    def test_disk_eigenvalues(self):
        dd = _friedrichs_disk(modes=2, nodes=400)
        found = {(p.mode, p.index): p for p in detect_spectrum(dd, (0, 20))}
        self.assertAlmostEqual(found[(0, 1)].value, 5.783185962946784, delta=1e-2)
        self.assertAlmostEqual(found[(1, 1)].value, 14.681970642123893, delta=5e-2)
        self.assertAlmostEqual(found[(0, 1)].bessel_reference(dd), 5.783185962946784, places=8)

    def test_rescaled_disk(self):
        dd = _friedrichs_disk(modes=1, nodes=400).rescaled(2.0)
        point = detect_spectrum(dd, (0, 20))[0]
        self.assertAlmostEqual(point.value, 2 * 5.783185962946784, delta=2e-2)

    def test_empty_interval(self):
        self.assertEqual(detect_spectrum(_friedrichs_disk(), (5, 1)), [])

    def test_refinement_approaches_the_bessel_zero(self):
        dd = _friedrichs_disk(modes=1)
        for point, refined in spectrum_convergence(dd, (0, 8)):
            reference = point.bessel_reference(dd)
            self.assertIsNotNone(refined)
            self.assertLessEqual(abs(refined - reference), abs(point.value - reference) + 1e-9)


class HeatTests(SimpleTestCase):
    def test_zero_forcing_stays_zero(self):
        result = heat_solve(_friedrichs_disk(), Forcing(), 1.0, 10)
        self.assertEqual(max(result.norms), 0)
        self.assertIsNone(result.steady_state_error)

    def test_constant_forcing_reaches_the_steady_state(self):
        forcing = Forcing(profiles=(bump(),), time=TimeProfile.CONSTANT)
        result = heat_solve(_friedrichs_disk(), forcing, 4.0, 40)
        self.assertLessEqual(result.steady_state_error, 1e-4)
        self.assertEqual(len(result.times), 41)

    def test_crank_nicolson_agrees_with_euler(self):
        dd = _friedrichs_disk()
        forcing = Forcing(profiles=(bump(),), time=TimeProfile.RAMP)
        euler = heat_solve(dd, forcing, 1.0, 200)
        crank = heat_solve(dd, forcing, 1.0, 200, scheme=Scheme.CRANK_NICOLSON)
        self.assertAlmostEqual(euler.norms[-1], crank.norms[-1], delta=5e-2 * crank.norms[-1])

    def test_ground_state_decays_exponentially(self):
        dd = _friedrichs_disk(modes=1, nodes=400)
        profile = ground_state_profile(dd)
        forcing = Forcing(profiles=(profile,), time=TimeProfile.STEP)
        result = heat_solve(dd, forcing, 2.0, 200)
        # once the forcing stops each implicit Euler step divides by 1 + j01² Δt
        middle, end = result.norms[100], result.norms[-1]
        self.assertAlmostEqual(np.log(middle / end), 100 * np.log1p(5.783185962946784 * 0.01), delta=0.1)

    def test_maximal_regularity_battery(self):
        report = regularity_battery(_friedrichs_disk(), (bump(),), 1.0, 20)
        self.assertEqual(len(report.ratios), len(TimeProfile))
        self.assertTrue(report.within_bound)
        self.assertIn("lowest_eigenvalue", report.to_dict())

    def test_regularity_bound_follows_the_lowest_eigenvalue(self):
        report = regularity_battery(_friedrichs_disk(modes=1), (bump(),), 1.0, 20)
        self.assertAlmostEqual(report.eigenvalue, 5.783185962946784, delta=5e-2)
        # implicit Euler with constant forcing: u̇ at step k is a^k, a = 1/(1 + λ₁Δt)
        a = 1 / (1 + report.eigenvalue * 0.05)
        constant = np.sqrt(0.05 * sum(a ** (2 * k) for k in range(1, 21)))
        self.assertAlmostEqual(dict(report.single_mode)[TimeProfile.CONSTANT], constant, places=10)
        self.assertGreaterEqual(report.bound, constant)
        self.assertLessEqual(report.bound, 1.0)
        self.assertEqual(report.bound, max(r for _, r in report.single_mode))
        self.assertAlmostEqual(report.to_dict()["bound"], report.bound)

    def test_single_mode_ratio_matches_the_continuous_solution(self):
        lam = 5.783185962946784
        exact = np.sqrt((1 - np.exp(-2 * lam)) / (2 * lam))
        for scheme in Scheme:
            self.assertAlmostEqual(single_mode_ratio(lam, 1.0, 4000, scheme=scheme), exact, places=3)
        self.assertLess(single_mode_ratio(4 * lam, 1.0, 200), single_mode_ratio(lam, 1.0, 200))

    def test_invalid_parameters(self):
        with self.assertRaises(ValueError):
            heat_solve(_friedrichs_disk(), Forcing(), 0.0, 10)
        with self.assertRaises(ValueError):
            heat_solve(_friedrichs_disk(), Forcing(), 1.0, 10, q=0.5)

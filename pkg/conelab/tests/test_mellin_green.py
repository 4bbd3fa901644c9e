import numpy as np
from django.test import SimpleTestCase

from conelab.boundary import circle_spectrum
from conelab.conormal import conormal_symbol, invert_conormal, laplacian, meromorphic, z
from conelab.errors import PoleOnLine, QuadratureFailure
from conelab.mellin_green import (
    bump, cutoff_power, exact_mellin, green_action, green_action_contour_oracle, green_split, indicator,
    mellin_many, mellin_transform, sampled, shift_identity_defect, weight_line,
)

T_SAMPLES = [0.05, 0.1, 0.2, 0.3]


def _circle_inverse(modes=3):
    return invert_conormal(conormal_symbol(laplacian(1), circle_spectrum(modes)))


class MellinTransformTests(SimpleTestCase):
    def test_indicator_closed_form(self):
        u = indicator(1.0, float(np.e))
        for z in (1.0, 0.5 + 2j, -1.5):
            self.assertAlmostEqual(mellin_transform(u, z), exact_mellin(u, z), places=10)
        self.assertAlmostEqual(exact_mellin(u, 1.0), np.e - 1, places=12)
        self.assertAlmostEqual(exact_mellin(u, 0.0), 1.0, places=12)

    def test_derivative_differentiates_the_kernel(self):
        # ∂_z ∫_0^1 e^{zs} ds at z = 0 is ∫_0^1 s ds
        self.assertAlmostEqual(mellin_transform(indicator(1.0, float(np.e)), 0.0, derivative=1), 0.5, places=10)

    def test_power_shifts_the_argument(self):
        u = bump()
        self.assertAlmostEqual(mellin_transform(u.times_power(0.75), 0.2), mellin_transform(u, 0.95), places=10)

    def test_vectorised_rule_matches_adaptive_quadrature(self):
        u = bump()
        zs = np.array([0.0, 0.3 + 1j, -1.0 - 2j])
        many = mellin_many(u, zs)
        for z, value in zip(zs, many):
            self.assertLessEqual(abs(value - mellin_transform(u, z)), 1e-9)

    def test_sampled_function_follows_simpson(self):
        u = bump()
        centre, width = u.centre, u.width
        grid = np.exp(np.linspace(centre - width, centre + width, 2001))
        v = sampled(grid, u(grid))
        self.assertLessEqual(abs(mellin_transform(v, 0.4) - mellin_transform(u, 0.4)), 1e-6)

    def test_cut_off_power_diverges_left_of_its_exponent(self):
        with self.assertRaises(QuadratureFailure):
            mellin_transform(cutoff_power(0.0), -0.5)
        self.assertTrue(np.isfinite(mellin_transform(cutoff_power(0.0, log_power=1), 1.0)))

    def test_invalid_inputs(self):
        with self.assertRaises(ValueError):
            indicator(2.0, 1.0)
        with self.assertRaises(ValueError):
            sampled([0.1, 0.2], [1.0, 1.0])
        with self.assertRaises(ValueError):
            bump(width=0.0)


class GreenActionTests(SimpleTestCase):
    def test_weight_line(self):
        self.assertEqual(weight_line(1, 0.5), 0.5)
        self.assertEqual(weight_line(2, 0), 1.5)

    def test_double_pole_generators(self):
        # only the double pole at 0 sits between Re z = 1/2 and Re z = −1/2
        G = green_action(_circle_inverse(), 1, 0.5, 1.5, indicator(1.0, float(np.e)))
        self.assertEqual(G.rank, 2)
        zeta = {gen.log_power: gen.zeta for gen in G.generators}
        # ζ_0 = ∂(Mu)(0) = 1/2, ζ_1 = −(Mu)(0) = −1
        self.assertAlmostEqual(zeta[0], 0.5, places=10)
        self.assertAlmostEqual(zeta[1], -1.0, places=10)

    def test_evaluation_is_cut_off_log_polynomial(self):
        G = green_action(_circle_inverse(), 1, 0.5, 1.5, indicator(1.0, float(np.e)))
        t = np.array([0.05, 0.2])
        np.testing.assert_allclose(G.evaluate(t), 0.5 - np.log(t), atol=1e-10)

    def test_modes_without_input_have_zero_coefficients(self):
        G = green_action(_circle_inverse(), 1, -0.5, 1.5, bump(mode=0))
        on_mode_one = [gen for gen in G.generators if gen.mode == 1]
        self.assertEqual(len(on_mode_one), 1)
        self.assertEqual(on_mode_one[0].zeta, 0j)

    def test_contour_oracle_agrees(self):
        g = _circle_inverse()
        for gamma1, gamma2 in ((0.5, 1.5), (-0.5, 1.5)):
            G = green_action(g, 1, gamma1, gamma2, bump())
            oracle = green_action_contour_oracle(g, 1, gamma1, gamma2, bump(), T_SAMPLES)
            residue = G.evaluate(T_SAMPLES, mode=0)
            self.assertLessEqual(float(np.max(np.abs(oracle[0] - residue))), 1e-8)

    def test_pole_on_a_weight_line(self):
        with self.assertRaises(PoleOnLine):
            green_action(_circle_inverse(), 1, 1.0, 1.5, bump())

    def test_weights_must_increase(self):
        with self.assertRaises(ValueError):
            green_action(_circle_inverse(), 1, 1.5, 0.5, bump())
        with self.assertRaises(ValueError):
            green_action_contour_oracle(_circle_inverse(), 1, 0.5, 1.5, bump(), T_SAMPLES, nodes=64)

    def test_two_inputs_on_one_mode(self):
        with self.assertRaises(ValueError):
            green_action(_circle_inverse(), 1, 0.5, 1.5, [bump(), indicator(1.0, 2.0)])

    def test_split_adds_up(self):
        g = _circle_inverse()
        u = [bump(mode=0), bump(mode=1)]
        whole = green_action(g, 1, -0.5, 1.5, u)
        first, second = green_split(g, 1, -0.5, 0.5, 1.5, u)
        for mode in (0, 1):
            np.testing.assert_allclose(
                first.evaluate(T_SAMPLES, mode=mode) + second.evaluate(T_SAMPLES, mode=mode),
                whole.evaluate(T_SAMPLES, mode=mode),
                atol=1e-12,
            )

    def test_shift_identity(self):
        g = _circle_inverse()
        self.assertLessEqual(shift_identity_defect(g, 1, 0.5, 1.5, bump(), 0.25, T_SAMPLES), 1e-8)

    def test_pole_free_strip(self):
        g = _circle_inverse()
        self.assertEqual(green_action(g, 1, 1.2, 1.8, bump()).rank, 0)
        oracle = green_action_contour_oracle(g, 1, 1.2, 1.8, bump(), T_SAMPLES)
        self.assertLessEqual(float(np.max(np.abs(oracle[0]))), 1e-10)

    def test_holomorphic_perturbation_changes_nothing(self):
        g = _circle_inverse()
        perturbed = [meromorphic(m.expr + z ** 2 - 3 * z + 1, m.mode) for m in g]
        u = [bump(mode=0), bump(mode=1)]
        original = green_action(g, 1, -0.5, 1.5, u)
        shifted = green_action(perturbed, 1, -0.5, 1.5, u)
        for mode in (0, 1):
            np.testing.assert_allclose(
                shifted.evaluate(T_SAMPLES, mode=mode), original.evaluate(T_SAMPLES, mode=mode), atol=1e-12,
            )

    def test_linearity(self):
        g = _circle_inverse()
        once = green_action(g, 1, 0.5, 1.5, bump()).evaluate(T_SAMPLES)
        twice = green_action(g, 1, 0.5, 1.5, bump().scaled(2.0)).evaluate(T_SAMPLES)
        np.testing.assert_allclose(twice, 2 * once, atol=1e-12)

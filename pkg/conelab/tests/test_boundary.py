import sympy as sp
from django.test import SimpleTestCase

from conelab.bessel import bessel_j, bessel_zero, cone_eigenvalue, disk_eigenvalue
from conelab.boundary import (
    SpectrumSource, circle_spectrum, custom_spectrum, point_spectrum, preset_spectrum, sphere_spectrum, to_exact,
)
from conelab.errors import NonMonotone, PositiveEigenvalue


class CircleSpectrumTests(SimpleTestCase):
    def test_first_three_modes(self):
        S = circle_spectrum(3)
        self.assertEqual(S.pairs(), [(0, 1), (-1, 2), (-4, 2)])
        self.assertEqual(S.dim_boundary, 1)
        self.assertEqual(S.source, SpectrumSource.CIRCLE)

    def test_constant_mode_only(self):
        self.assertEqual(circle_spectrum(1).pairs(), [(0, 1)])

    def test_last_eigenvalue(self):
        self.assertEqual(circle_spectrum(10)[-1].eigenvalue, -81)

    def test_eigenvalues_are_exact(self):
        self.assertTrue(all(m.is_exact for m in circle_spectrum(5)))

    def test_agrees_with_explicit_custom_list(self):
        for m in (1, 2, 7, 64):
            explicit = [(-k * k, 1 if k == 0 else 2) for k in range(m)]
            self.assertEqual(circle_spectrum(m).pairs(), custom_spectrum(explicit, 1).pairs())

    def test_rejects_empty_truncation(self):
        with self.assertRaises(ValueError):
            circle_spectrum(0)


class SphereSpectrumTests(SimpleTestCase):
    def test_two_sphere(self):
        self.assertEqual(sphere_spectrum(2, 2).pairs(), [(0, 1), (-2, 3)])
        self.assertEqual(sphere_spectrum(2, 3)[2].eigenvalue, -6)
        self.assertEqual(sphere_spectrum(2, 3)[2].multiplicity, 5)

    def test_three_sphere_degree_one(self):
        self.assertEqual(sphere_spectrum(3, 2)[1].eigenvalue, -3)
        self.assertEqual(sphere_spectrum(3, 2)[1].multiplicity, 4)

    def test_cumulative_harmonic_count(self):
        S = sphere_spectrum(2, 8)
        for l in range(8):
            self.assertEqual(sum(m.multiplicity for m in S.modes[:l + 1]), (l + 1) ** 2)

    def test_circle_is_not_a_sphere_preset(self):
        with self.assertRaises(ValueError):
            sphere_spectrum(1, 3)


class CustomSpectrumTests(SimpleTestCase):
    def test_valid_list(self):
        S = custom_spectrum([(0, 1), (-1, 2)], 1)
        self.assertEqual(len(S), 2)
        self.assertEqual(S.total_multiplicity, 3)

    def test_increasing_list_is_rejected(self):
        with self.assertRaises(NonMonotone):
            custom_spectrum([(-1, 2), (0, 1)], 1)

    def test_positive_eigenvalue_is_rejected(self):
        with self.assertRaises(PositiveEigenvalue):
            custom_spectrum([(0, 1), (0.5, 1)], 1)

    def test_fraction_strings_stay_exact(self):
        S = custom_spectrum([(0, 1), ("-9/4", 1)], 2)
        self.assertEqual(S[1].eigenvalue, sp.Rational(-9, 4))
        self.assertTrue(S[1].is_exact)

    def test_floats_stay_floats(self):
        S = custom_spectrum([(0, 1), (-0.3, 1)], 1)
        self.assertFalse(S[1].is_exact)

    def test_document_shape(self):
        data = circle_spectrum(2).to_dict()
        self.assertEqual(data["dim_boundary"], 1)
        self.assertEqual(data["modes"][1], {"label": "k=1", "eigenvalue": -1.0, "multiplicity": 2})


class PresetSpectrumTests(SimpleTestCase):
    def test_dispatch_by_dimension(self):
        self.assertEqual(preset_spectrum(0, 5).pairs(), point_spectrum().pairs())
        self.assertEqual(preset_spectrum(1, 4).source, SpectrumSource.CIRCLE)
        self.assertEqual(preset_spectrum(3, 2).dim_boundary, 3)

    def test_to_exact(self):
        self.assertEqual(to_exact(2.0), sp.Integer(2))
        self.assertEqual(to_exact("1/3"), sp.Rational(1, 3))
        with self.assertRaises(TypeError):
            to_exact(True)


class BesselTests(SimpleTestCase):
    def test_series_values(self):
        self.assertAlmostEqual(bessel_j(0, 0.0), 1.0)
        self.assertAlmostEqual(bessel_j(0, 1.0), 0.7651976865579666, places=12)
        self.assertAlmostEqual(bessel_j(1, 2.0), 0.5767248077568734, places=12)

    def test_first_zeros(self):
        self.assertAlmostEqual(bessel_zero(0.0, 1), 2.404825557695773, places=10)
        self.assertAlmostEqual(bessel_zero(1.0, 1), 3.831705970207512, places=10)
        self.assertAlmostEqual(bessel_zero(0.0, 2), 5.520078110286311, places=10)

    def test_disk_eigenvalues(self):
        self.assertAlmostEqual(disk_eigenvalue(0), 5.783185962946784, places=8)
        self.assertAlmostEqual(disk_eigenvalue(1), 14.681970642123893, places=8)
        self.assertAlmostEqual(cone_eigenvalue(1, -1.0), disk_eigenvalue(1), places=10)

    def test_zero_index_is_positive(self):
        with self.assertRaises(ValueError):
            bessel_zero(0.0, 0)

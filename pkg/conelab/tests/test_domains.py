import sympy as sp
from django.test import SimpleTestCase

from conelab.boundary import circle_spectrum, preset_spectrum, sphere_spectrum
from conelab.conormal import example_abcd, laplacian
from conelab.domains import (
    DomainKind, ExtensionFilter, PairingElement, SelectionKind, adjoint_extension, admissible_interval,
    dual_index, enumerate_extensions, equivalent, exact_parameter, extension_contains, extension_from_document,
    friedrichs_domain, is_laplacian, is_selfadjoint, make_extension, maximal_domain, maximal_domain_asymptotics,
    maximal_extension, minimal_domain, minimal_extension, model_dimension_check, pairing_bracket,
    pairing_closed_form, selfadjoint_extensions,
)
from conelab.errors import (
    NotDilationInvariant, QuadratureFailure, UnsupportedExtension, UnsupportedOperator, WrongWeight,
)


class ParameterTests(SimpleTestCase):
    def test_decimal_floats_become_exact(self):
        self.assertEqual(exact_parameter(0.5), sp.Rational(1, 2))
        self.assertEqual(exact_parameter("-3/2"), sp.Rational(-3, 2))

    def test_dual_index(self):
        self.assertEqual(dual_index(2), 2)
        self.assertEqual(dual_index(3), sp.Rational(3, 2))
        with self.assertRaises(ValueError):
            dual_index(1)


class MinimalDomainTests(SimpleTestCase):
    def test_abcd_is_plain(self):
        D = minimal_domain(example_abcd(), circle_spectrum(3), 0)
        self.assertEqual(D.kind, DomainKind.MINIMAL_PLAIN)
        self.assertEqual(D.s, 2)
        self.assertEqual(D.weight, 2)

    def test_pole_on_the_critical_line_loses_epsilon(self):
        # Re z = (n+1)/2 − γ − 2 = −1 carries the simple pole of mode k = 1
        D = minimal_domain(laplacian(1), circle_spectrum(3), 0)
        self.assertEqual(D.kind, DomainKind.MINIMAL_WITH_EPS_LOSS)
        self.assertTrue(D.epsilon_loss)
        self.assertEqual([mode for _, _, mode in D.critical_poles], [1])

    def test_half_integer_weight_avoids_the_poles(self):
        D = minimal_domain(laplacian(1), circle_spectrum(3), 0.5)
        self.assertEqual(D.kind, DomainKind.MINIMAL_PLAIN)
        self.assertEqual(D.critical_line, sp.Rational(-3, 2))


class MaximalDomainTests(SimpleTestCase):
    def test_circle_logarithmic_pair(self):
        space = maximal_domain_asymptotics(laplacian(1), circle_spectrum(3), 0)
        self.assertEqual(space.dimension, 2)
        leading = sorted((complex(g.leading[0]).real, g.leading[1]) for g in space.generators)
        self.assertEqual(leading, [(0.0, 0), (0.0, 1)])
        self.assertEqual(space.entries()[0]["log_powers"], 1)

    def test_abcd_couples_t_with_log(self):
        space = maximal_domain(example_abcd(), circle_spectrum(3), 0).asymptotics
        self.assertEqual(space.dimension, 2)
        coupled = [g for g in space.generators if g.is_coupled]
        self.assertEqual(len(coupled), 1)
        monomials = {(int(complex(q).real), k) for q, k, _ in coupled[0].terms}
        self.assertEqual(monomials, {(0, 1), (-1, 0)})

    def test_directness(self):
        D = maximal_domain(laplacian(2), sphere_spectrum(2, 3), 0)
        self.assertEqual(D.kind, DomainKind.DIRECT)
        self.assertEqual(D.directness.value, "proved")

    def test_dimension_matches_the_frozen_operator(self):
        for A in (laplacian(1), example_abcd()):
            for gamma in (0, sp.Rational(1, 2)):
                full, frozen = model_dimension_check(A, circle_spectrum(3), gamma)
                self.assertEqual(full, frozen)

    def test_sphere_dimension_matches_the_interval(self):
        S = sphere_spectrum(2, 3)
        space = maximal_domain_asymptotics(laplacian(2), S, 0)
        interval = admissible_interval(S, 0)
        self.assertEqual(space.dimension, sum(e.dimension for e in interval))


class AdmissibleIntervalTests(SimpleTestCase):
    def test_circle(self):
        interval = admissible_interval(circle_spectrum(4), 0)
        self.assertEqual(len(interval), 1)
        space = interval.exponents[0]
        self.assertTrue(space.log)
        self.assertEqual(space.q, 0)
        self.assertEqual(space.dimension, 2)

    def test_two_sphere(self):
        interval = admissible_interval(sphere_spectrum(2, 3), 0)
        self.assertEqual([e.q for e in interval], [0, 1])
        self.assertTrue(all(not e.log for e in interval))

    def test_three_sphere_exponents_sit_on_the_endpoints(self):
        interval = admissible_interval(sphere_spectrum(3, 4), 0)
        self.assertEqual(len(interval), 0)
        self.assertEqual(sorted(e.q for e in interval.on_boundary), [0, 2])

    def test_weight_shifts_the_window(self):
        interval = admissible_interval(circle_spectrum(4), 1)
        self.assertEqual((interval.lower, interval.upper), (-2, 0))
        self.assertEqual([e.q for e in interval], [-1])


class EnumerationTests(SimpleTestCase):
    def test_circle_counts(self):
        S = circle_spectrum(3)
        self.assertEqual(len(enumerate_extensions(laplacian(1), S, 0)), 3)
        self.assertEqual(len(enumerate_extensions(laplacian(1), S, 0, filter=ExtensionFilter.ALL)), 4)

    def test_two_sphere_counts(self):
        S = sphere_spectrum(2, 3)
        self.assertEqual(len(enumerate_extensions(laplacian(2), S, 0)), 4)
        extensions = enumerate_extensions(laplacian(2), S, 0, filter="All")
        self.assertEqual(len(extensions), 5)
        self.assertFalse(extensions[-1].dilation_invariant)
        self.assertEqual(extensions[-1].dimension, 1)

    def test_trivial_interval(self):
        extensions = enumerate_extensions(laplacian(3), sphere_spectrum(3, 4), 0)
        self.assertEqual(len(extensions), 1)
        self.assertEqual(extensions[0].dimension, 0)

    def test_only_the_laplacian(self):
        with self.assertRaises(UnsupportedOperator):
            enumerate_extensions(example_abcd(), circle_spectrum(3), 0)
        self.assertTrue(is_laplacian(laplacian(2).negated()))
        self.assertFalse(is_laplacian(example_abcd()))

    def test_minimal_and_maximal_bracket_everything(self):
        S = sphere_spectrum(2, 3)
        low, high = minimal_extension(S, 0), maximal_extension(S, 0)
        for ext in enumerate_extensions(laplacian(2), S, 0):
            self.assertTrue(extension_contains(ext, low))
            self.assertTrue(extension_contains(high, ext))

    def test_omega_sits_between(self):
        S = circle_spectrum(3)
        omega = make_extension(S, 0, 2, {0: SelectionKind.OMEGA})
        self.assertEqual(omega.dimension, 1)
        self.assertTrue(extension_contains(maximal_extension(S, 0), omega))
        self.assertFalse(extension_contains(omega, maximal_extension(S, 0)))

    def test_exponent_outside_the_interval(self):
        with self.assertRaises(UnsupportedExtension):
            make_extension(circle_spectrum(3), 0, 2, {1: SelectionKind.FULL})

    def test_omega_needs_the_log_case(self):
        with self.assertRaises(UnsupportedExtension):
            make_extension(sphere_spectrum(2, 3), 0, 2, {0: SelectionKind.OMEGA})


class AdjointTests(SimpleTestCase):
    def test_circle_zero_and_full_swap(self):
        S = circle_spectrum(3)
        adjoint = adjoint_extension(minimal_extension(S, 0))
        self.assertTrue(equivalent(adjoint, maximal_extension(S, 0)))

    def test_weight_and_index_are_dualized(self):
        adjoint = adjoint_extension(minimal_extension(circle_spectrum(3), sp.Rational(1, 2), 3))
        self.assertEqual(adjoint.gamma, sp.Rational(-1, 2))
        self.assertEqual(adjoint.p, sp.Rational(3, 2))

    def test_biduality(self):
        for n in (1, 2):
            S = preset_spectrum(n, 3)
            for gamma in (sp.Rational(-1, 2), 0, sp.Rational(1, 2)):
                for ext in enumerate_extensions(laplacian(n), S, gamma):
                    self.assertTrue(equivalent(adjoint_extension(adjoint_extension(ext)), ext), ext.describe())

    def test_non_invariant_extension_is_refused(self):
        ext = enumerate_extensions(laplacian(1), circle_spectrum(3), 0, filter=ExtensionFilter.ALL)[-1]
        with self.assertRaises(NotDilationInvariant):
            adjoint_extension(ext)


class SelfadjointTests(SimpleTestCase):
    def test_circle_has_only_friedrichs(self):
        S = circle_spectrum(3)
        found = selfadjoint_extensions(S)
        self.assertEqual(len(found), 1)
        self.assertTrue(equivalent(found[0], friedrichs_domain(S)))
        self.assertEqual(found[0].choices[0].kind, SelectionKind.OMEGA)

    def test_two_sphere_has_two(self):
        S = sphere_spectrum(2, 3)
        found = selfadjoint_extensions(S)
        self.assertEqual(len(found), 2)
        self.assertTrue(any(equivalent(ext, friedrichs_domain(S)) for ext in found))

    def test_friedrichs_is_selfadjoint(self):
        for n in (1, 2, 3):
            self.assertTrue(is_selfadjoint(friedrichs_domain(preset_spectrum(n, 3))))

    def test_friedrichs_two_sphere_keeps_the_bounded_exponent(self):
        ext = friedrichs_domain(sphere_spectrum(2, 3))
        kinds = {int(c.q): c.kind for c in ext.choices}
        self.assertEqual(kinds, {0: SelectionKind.FULL, 1: SelectionKind.ZERO})

    def test_weighted_spaces_are_refused(self):
        with self.assertRaises(WrongWeight):
            selfadjoint_extensions(circle_spectrum(3), gamma=sp.Rational(1, 2))
        with self.assertRaises(WrongWeight):
            friedrichs_domain(circle_spectrum(3), p=3)
        self.assertFalse(is_selfadjoint(minimal_extension(circle_spectrum(3), sp.Rational(1, 2))))


class ExtensionDocumentTests(SimpleTestCase):
    def test_exponents_match_the_nearest_interval_point(self):
        S = circle_spectrum(3)
        ext = extension_from_document({"gamma": 0, "choices": [{"q": 1e-12 + 0j, "kind": "omega"}]}, S)
        self.assertEqual(ext.choices[0].kind, SelectionKind.OMEGA)

    def test_unknown_exponent(self):
        with self.assertRaises(UnsupportedExtension):
            extension_from_document({"gamma": 0, "choices": [{"q": 0.25 + 0j, "kind": "full"}]}, circle_spectrum(3))

class PairingTests(SimpleTestCase):
    def test_omega_against_itself_vanishes(self):
        S = circle_spectrum(3)
        u = PairingElement(mode=0, terms=((0, 0, 1),))
        self.assertLessEqual(abs(pairing_bracket(u, u, S)), 1e-8)

    def test_omega_against_log_does_not_vanish(self):
        S = circle_spectrum(3)
        u = PairingElement(mode=0, terms=((0, 0, 1),))
        v = PairingElement(mode=0, terms=((0, 1, 1),))
        self.assertGreater(abs(pairing_bracket(u, v, S)), 1e-3)

    def test_two_sphere_closed_form(self):
        S = sphere_spectrum(2, 3)
        u = PairingElement(mode=0, terms=((0, 0, 1),))
        v = PairingElement(mode=0, terms=((1, 0, 1),))
        closed = pairing_closed_form(u, v, S)
        self.assertIsNotNone(closed)
        self.assertAlmostEqual(pairing_bracket(u, v, S), closed, places=7)
        self.assertGreater(abs(closed), 1e-3)

    def test_different_modes_are_orthogonal(self):
        S = circle_spectrum(3)
        u = PairingElement(mode=0, terms=((0, 0, 1),))
        v = PairingElement(mode=1, terms=((1, 0, 1),), vector=(1.0, 0.0))
        self.assertEqual(pairing_bracket(u, v, S), 0j)

    def test_non_integrable_pair(self):
        S = sphere_spectrum(2, 3)
        u = PairingElement(mode=0, terms=((sp.Rational(3, 2), 0, 1),))
        with self.assertRaises(QuadratureFailure):
            pairing_bracket(u, u, S)

    def test_log_term_has_no_closed_form(self):
        u = PairingElement(mode=0, terms=((0, 1, 1),))
        self.assertIsNone(pairing_closed_form(u, u, circle_spectrum(3)))

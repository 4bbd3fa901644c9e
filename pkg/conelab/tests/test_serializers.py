import json

import sympy as sp
from django.test import SimpleTestCase

from conelab.boundary import circle_spectrum, sphere_spectrum
from conelab.conormal import example_abcd, laplacian
from conelab.domains import (
    ExtensionFilter, enumerate_extensions, equivalent, friedrichs_domain, minimal_extension,
)
from conelab.errors import InvalidDocument, NonMonotone, PositiveEigenvalue
from conelab.mellin_green import RadialKind
from conelab.serializers import (
    RunConfigSerializer, load_extension, load_operator, load_radial, load_spectrum,
)


def _document(ext):
    return json.loads(json.dumps(ext.to_dict()))


class ExtensionDocumentTests(SimpleTestCase):
    def test_every_extension_survives_a_json_round_trip(self):
        for A, S in ((laplacian(1), circle_spectrum(3)), (laplacian(2), sphere_spectrum(2, 3))):
            for ext in enumerate_extensions(A, S, 0, filter=ExtensionFilter.ALL):
                loaded = load_extension(_document(ext), S)
                self.assertTrue(equivalent(ext, loaded), ext.describe())
                self.assertEqual(loaded.dilation_invariant, ext.dilation_invariant)

    def test_embedded_spectrum_is_used(self):
        ext = minimal_extension(circle_spectrum(3), sp.Rational(1, 2))
        loaded = load_extension(_document(ext))
        self.assertEqual(loaded.gamma, sp.Rational(1, 2))
        self.assertEqual(loaded.spectrum.pairs(), ext.spectrum.pairs())

    def test_report_wrapper(self):
        ext = friedrichs_domain(circle_spectrum(3))
        loaded = load_extension({"extensions": [_document(ext)]})
        self.assertTrue(equivalent(ext, loaded))
        with self.assertRaises(InvalidDocument):
            load_extension({"extensions": [_document(ext), _document(ext)]})

    def test_other_spectrum_is_rejected(self):
        document = _document(friedrichs_domain(circle_spectrum(3)))
        with self.assertRaises(InvalidDocument):
            load_extension(document, circle_spectrum(2))

    def test_missing_spectrum(self):
        document = _document(friedrichs_domain(circle_spectrum(3)))
        del document["spectrum"]
        with self.assertRaises(InvalidDocument):
            load_extension(document)

    def test_invalid_p(self):
        document = _document(friedrichs_domain(circle_spectrum(3)))
        document["p_exact"] = "1"
        with self.assertRaises(InvalidDocument) as ctx:
            load_extension(document)
        self.assertEqual(ctx.exception.name, "InvalidDocument")

    def test_not_an_object(self):
        with self.assertRaises(InvalidDocument):
            load_extension([1, 2, 3])


class OperatorDocumentTests(SimpleTestCase):
    def test_round_trip(self):
        A = example_abcd()
        loaded = load_operator(json.loads(json.dumps(A.to_dict())))
        self.assertEqual(loaded.coeffs, A.coeffs)
        self.assertEqual(loaded.name, A.name)

    def test_fractions_stay_exact(self):
        loaded = load_operator({"mu": 2, "n": 1, "coeffs": [[0, [[0, [0, 1]]]], [2, [[0, ["1/3"]]]]]})
        self.assertEqual(loaded.coeffs[2], sp.Rational(1, 3))

    def test_malformed_coefficients(self):
        bad = [
            {"mu": 2, "n": 1, "coeffs": [[0, "lam"]]},
            {"mu": 2, "n": 1, "coeffs": [[0, [[-1, [1]]]]]},
            {"mu": 0, "n": 1, "coeffs": [[0, [[0, [1]]]]]},
            {"mu": 2, "n": 1, "coeffs": [[5, [[0, [1]]]]]},
            {"mu": 2, "n": 1, "coeffs": [[0, [[0, [0, 1]]]], [2, [[1, [1]]]]]},
            {"n": 1, "coeffs": []},
        ]
        for data in bad:
            with self.assertRaises(InvalidDocument, msg=json.dumps(data)):
                load_operator(data)


class SpectrumDocumentTests(SimpleTestCase):
    def test_pairs_and_objects(self):
        S = load_spectrum({
            "dim_boundary": 1,
            "modes": [[0, 1], [-1, 2], {"eigenvalue": "-9/2", "multiplicity": 2}],
        })
        self.assertEqual(S.pairs(), [(0, 1), (-1, 2), (sp.Rational(-9, 2), 2)])
        self.assertEqual(S[2].label, "j=2")

    def test_labels_are_kept_when_every_mode_has_one(self):
        S = load_spectrum({"dim_boundary": 1, "modes": [
            {"eigenvalue": 0, "multiplicity": 1, "label": "k=0"},
            {"eigenvalue": -1, "multiplicity": 2, "label": "k=1"},
        ]})
        self.assertEqual([m.label for m in S], ["k=0", "k=1"])

    def test_validation(self):
        with self.assertRaises(InvalidDocument):
            load_spectrum({"dim_boundary": 1, "modes": []})
        with self.assertRaises(InvalidDocument):
            load_spectrum({"dim_boundary": 1, "modes": [[0, 0]]})
        with self.assertRaises(InvalidDocument):
            load_spectrum({"dim_boundary": 1, "modes": ["zero"]})
        with self.assertRaises(PositiveEigenvalue):
            load_spectrum({"dim_boundary": 1, "modes": [[1, 1]]})
        with self.assertRaises(NonMonotone):
            load_spectrum({"dim_boundary": 1, "modes": [[-1, 1], [0, 1]]})


class RadialDocumentTests(SimpleTestCase):
    def test_indicator(self):
        u = load_radial({"kind": "indicator", "lower": 1, "upper": 2, "mode": 1})
        self.assertEqual(u.kind, RadialKind.INDICATOR)
        self.assertEqual(u.mode, 1)
        self.assertEqual(u.power, 0j)

    def test_sampled_values_may_be_complex(self):
        u = load_radial({"kind": "sampled", "t_grid": [0.1, 0.2, 0.3], "values": [1, [0, 1], 2]})
        self.assertEqual(u.values, (1 + 0j, 1j, 2 + 0j))

    def test_missing_and_inconsistent_fields(self):
        with self.assertRaises(InvalidDocument):
            load_radial({"kind": "indicator", "lower": 1})
        with self.assertRaises(InvalidDocument):
            load_radial({"kind": "bump", "centre": 0.0})
        with self.assertRaises(InvalidDocument):
            load_radial({"kind": "indicator", "lower": 2, "upper": 1})
        with self.assertRaises(InvalidDocument):
            load_radial({"kind": "sampled", "t_grid": [0.3, 0.2, 0.1], "values": [1, 1, 1]})
        with self.assertRaises(InvalidDocument):
            load_radial({"kind": "wavelet"})


class RunConfigTests(SimpleTestCase):
    def _config(self, **overrides):
        data = {"subcommand": "poles", "modes": 6, "nodes": 400, "t_min": 1e-6, "jobs": 1, "p": "2"}
        data.update(overrides)
        return RunConfigSerializer(data=data)

    def test_defaults(self):
        serializer = self._config()
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data["operator"], "laplacian")
        self.assertEqual(serializer.validated_data["p"], 2)

    def test_rejections(self):
        for overrides, field in (
            ({"p": "1"}, "p"),
            ({"t_min": 1.5}, "t_min"),
            ({"strip": [1.0, 0.0]}, "strip"),
            ({"jobs": 0}, "jobs"),
            ({"modes": 0}, "modes"),
        ):
            serializer = self._config(**overrides)
            self.assertFalse(serializer.is_valid())
            self.assertIn(field, serializer.errors)

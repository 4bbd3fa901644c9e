import json
import tempfile
from io import StringIO
from pathlib import Path

from django.conf import settings
from django.core.management import CommandError, call_command
from django.test import SimpleTestCase

from conelab.cli import EXIT_ERROR, EXIT_FAILED, EXIT_OK, EXIT_USAGE, run
from conelab.conormal import example_abcd


def _schema(name):
    return json.loads((Path(settings.SCHEMA_DIR) / f"{name}.schema.json").read_text())


class CliTestCase(SimpleTestCase):
    def invoke(self, subcommand, *argv):
        stdout, stderr = StringIO(), StringIO()
        code = run(subcommand, list(argv), stdout=stdout, stderr=stderr)
        self.stderr = stderr.getvalue()
        text = stdout.getvalue()
        return code, text

    def invoke_json(self, subcommand, *argv):
        code, text = self.invoke(subcommand, *argv)
        return code, json.loads(text)

    def assertMatchesSchema(self, document, name):
        for key in _schema(name)["required"]:
            self.assertIn(key, document, f"{name}: missing {key}")
        if name == "error":
            return
        for key in _schema("config")["required"]:
            self.assertIn(key, document["config"])


class PolesCommandTests(CliTestCase):
    def test_circle_double_pole(self):
        code, doc = self.invoke_json("poles", "--n", "1", "--strip", "-3", "3")
        self.assertEqual(code, EXIT_OK)
        self.assertMatchesSchema(doc, "poles")
        zero = [p for p in doc["poles"] if p["q"] == [0.0, 0.0]]
        self.assertEqual(len(zero), 1)
        self.assertEqual(zero[0]["order"], 2)

    def test_config_echo(self):
        code, doc = self.invoke_json("poles", "--gamma", "1/2", "--p", "3", "--modes", "4")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(doc["config"]["gamma"], "1/2")
        self.assertEqual(doc["config"]["p"], "3")
        self.assertEqual(doc["config"]["modes"], 4)
        self.assertEqual(doc["config"]["nodes"], settings.CONE_LAB_GRID_NODES)
        self.assertIn("spectrum", doc["config"]["tolerances"])

    def test_csv(self):
        code, text = self.invoke("poles", "--csv", "--modes", "2")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(text.splitlines()[0], "q_re,q_im,order,modes")

    def test_plot_data(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "poles.dat"
            code, _ = self.invoke("poles", "--modes", "3", "--plot-data", str(path))
            self.assertEqual(code, EXIT_OK)
            rows = [line.split() for line in path.read_text().splitlines()]
            self.assertTrue(rows)
            self.assertTrue(all(len(row) == 2 for row in rows))

    def test_operator_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "abcd.json"
            path.write_text(json.dumps(example_abcd().to_dict()))
            code, doc = self.invoke_json("poles", "--operator", f"@{path}")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(doc["operator"]["name"], "example-abcd")


class UsageTests(CliTestCase):
    def test_bad_flag(self):
        code, doc = self.invoke_json("poles", "--bogus")
        self.assertEqual(code, EXIT_USAGE)
        self.assertMatchesSchema(doc, "error")
        self.assertEqual(doc["error"], "UsageError")

    def test_unknown_subcommand(self):
        code, _ = self.invoke("frobnicate")
        self.assertEqual(code, EXIT_USAGE)

    def test_unknown_preset(self):
        self.assertEqual(self.invoke("poles", "--operator", "biharmonic")[0], EXIT_USAGE)
        self.assertEqual(self.invoke("adjoint", "--extension", "krein")[0], EXIT_USAGE)

    def test_unknown_tolerance(self):
        self.assertEqual(self.invoke("spectrum", "--tol", "bogus=1e-3")[0], EXIT_USAGE)

    def test_invalid_options(self):
        code, doc = self.invoke_json("poles", "--p", "1")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("p", doc["message"])
        self.assertEqual(self.invoke("poles", "--strip", "2", "1")[0], EXIT_USAGE)

    def test_criteria_choices(self):
        self.assertEqual(self.invoke("selftest", "--criteria", "A11")[0], EXIT_USAGE)


class ErrorTests(CliTestCase):
    def test_toolkit_error(self):
        code, doc = self.invoke_json("poles", "--operator", "example-abcd", "--n", "2")
        self.assertEqual(code, EXIT_ERROR)
        self.assertMatchesSchema(doc, "error")
        self.assertEqual(doc["error"], "DimensionMismatch")

    def test_value_error(self):
        code, doc = self.invoke_json("green", "--gamma1", "1.5", "--gamma2", "0.5")
        self.assertEqual(code, EXIT_ERROR)
        self.assertEqual(doc["error"], "ValueError")

    def test_missing_file(self):
        code, doc = self.invoke_json("poles", "--operator", "@/nonexistent/operator.json")
        self.assertEqual(code, EXIT_ERROR)
        self.assertEqual(doc["error"], "InvalidDocument")


class CheckCommandTests(CliTestCase):
    def test_friedrichs_passes(self):
        code, doc = self.invoke_json("check", "--modes", "3", "--e3-method", "rule", "--grid", "32")
        self.assertEqual(code, EXIT_OK)
        self.assertMatchesSchema(doc, "check")
        self.assertTrue(doc["report"]["overall"])

    def test_minimal_fails(self):
        code, doc = self.invoke_json(
            "check", "--modes", "3", "--extension", "minimal", "--e3-method", "rule", "--grid", "32",
        )
        self.assertEqual(code, EXIT_FAILED)
        self.assertFalse(doc["report"]["overall"])


class DomainCommandTests(CliTestCase):
    def test_extensions(self):
        code, doc = self.invoke_json("extensions", "--modes", "3")
        self.assertEqual(code, EXIT_OK)
        self.assertMatchesSchema(doc, "extensions")

    def test_adjoint_from_file(self):
        code, doc = self.invoke_json("extensions", "--modes", "3")
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "ext.json"
            path.write_text(json.dumps({"extensions": doc["extensions"][:1]}))
            code, adjoint = self.invoke_json("adjoint", "--modes", "3", "--extension", f"@{path}")
        self.assertEqual(code, EXIT_OK)
        self.assertMatchesSchema(adjoint, "adjoint")


class SelftestCommandTests(CliTestCase):
    def test_cheap_criteria(self):
        code, doc = self.invoke_json("selftest", "--criteria", "A2", "A10")
        self.assertEqual(code, EXIT_OK)
        self.assertMatchesSchema(doc, "selftest")
        self.assertEqual([c["id"] for c in doc["criteria"]], ["A2", "A10"])
        self.assertIn("PASS", self.stderr)


class ManagementCommandTests(SimpleTestCase):
    def test_success(self):
        out = StringIO()
        call_command("conelab", "poles", "--n", "2", "--p", "3", "--modes", "2", stdout=out)
        doc = json.loads(out.getvalue())
        self.assertEqual(doc["operator"]["n"], 2)
        self.assertEqual(doc["config"]["p"], "3")

    def test_nonzero_exit_raises(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("conelab", "poles", "--operator", "biharmonic", stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, EXIT_USAGE)


class HeatCommandTests(CliTestCase):
    def test_ellipticity_is_recorded(self):
        code, doc = self.invoke_json("heat", "--modes", "2", "--nodes", "100", "--steps", "5")
        self.assertEqual(code, EXIT_OK)
        self.assertMatchesSchema(doc, "heat")
        self.assertTrue(doc["ellipticity"]["overall"])
        self.assertAlmostEqual(doc["ellipticity"]["sector"]["theta"], 1.5707963267948966)

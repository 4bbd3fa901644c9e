from rest_framework import serializers

from .boundary import custom_spectrum, to_exact
from .conormal import operator_from_document
from .domains import SelectionKind, exact_parameter, extension_from_document
from .errors import ConeLabError, InvalidDocument
from .mellin_green import RadialFunction, RadialKind


class ExactNumberField(serializers.Field):
    """int, float or "p/q" string; kept exact where the input is."""

    def to_internal_value(self, data):
        if isinstance(data, bool) or not isinstance(data, (int, float, str)):
            raise serializers.ValidationError("expected a number or a 'p/q' string")
        try:
            return to_exact(data)
        except (TypeError, ValueError, SyntaxError):
            raise serializers.ValidationError(f"{data!r} is not a number")

    def to_representation(self, value):
        return str(value)


class ComplexField(serializers.Field):
    """A real number or an [re, im] pair."""

    def to_internal_value(self, data):
        if isinstance(data, bool):
            raise serializers.ValidationError("expected a number or an [re, im] pair")
        if isinstance(data, (int, float)):
            return complex(data)
        if isinstance(data, (list, tuple)) and len(data) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in data
        ):
            return complex(data[0], data[1])
        raise serializers.ValidationError("expected a number or an [re, im] pair")

    def to_representation(self, value):
        return [complex(value).real, complex(value).imag]


# ---------------------------------------------------------------------------
# Operators and spectra
# ---------------------------------------------------------------------------

class OperatorSerializer(serializers.Serializer):
    """{"mu", "n", "name"?, "coeffs": [[j, [[t_power, [c0, c1, ...]], ...]], ...]}."""
    mu = serializers.IntegerField(min_value=1)
    n = serializers.IntegerField(min_value=0)
    name = serializers.CharField(max_length=100, required=False, allow_blank=True)
    coeffs = serializers.ListField(child=serializers.ListField(), allow_empty=False)

    def validate_coeffs(self, value):
        number = ExactNumberField()
        cleaned = []
        for entry in value:
            if len(entry) != 2 or not isinstance(entry[0], int) or not isinstance(entry[1], list):
                raise serializers.ValidationError("each entry is [j, [[t_power, [c0, c1, ...]], ...]]")
            terms = []
            for term in entry[1]:
                if (not isinstance(term, list) or len(term) != 2 or not isinstance(term[0], int)
                        or term[0] < 0 or not isinstance(term[1], list)):
                    raise serializers.ValidationError("each term is [t_power >= 0, [c0, c1, ...]]")
                terms.append((term[0], [number.to_internal_value(c) for c in term[1]]))
            cleaned.append((entry[0], terms))
        return cleaned


class ModeEntrySerializer(serializers.Serializer):
    eigenvalue = ExactNumberField()
    multiplicity = serializers.IntegerField(min_value=1)
    label = serializers.CharField(max_length=50, required=False)


class SpectrumSerializer(serializers.Serializer):
    """Modes as [eigenvalue, multiplicity] pairs or {"eigenvalue", "multiplicity", "label"?} objects."""
    dim_boundary = serializers.IntegerField(min_value=0)
    modes = serializers.ListField(allow_empty=False)

    def validate_modes(self, value):
        cleaned = []
        for entry in value:
            if isinstance(entry, list) and len(entry) == 2:
                entry = {"eigenvalue": entry[0], "multiplicity": entry[1]}
            if not isinstance(entry, dict):
                raise serializers.ValidationError("a mode is [eigenvalue, multiplicity] or an object")
            mode = ModeEntrySerializer(data=entry)
            if not mode.is_valid():
                raise serializers.ValidationError(mode.errors)
            cleaned.append(dict(mode.validated_data))
        return cleaned


# ---------------------------------------------------------------------------
# Radial functions
# ---------------------------------------------------------------------------

class RadialFunctionSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=[k.value for k in RadialKind])
    mode = serializers.IntegerField(min_value=0, default=0)
    power = ComplexField(required=False, default=0.0)
    scale = ComplexField(required=False, default=1.0)
    lower = serializers.FloatField(required=False, min_value=0)
    upper = serializers.FloatField(required=False, min_value=0)
    centre = serializers.FloatField(required=False)
    width = serializers.FloatField(required=False, min_value=0)
    log_power = serializers.IntegerField(required=False, min_value=0, default=0)
    t_grid = serializers.ListField(child=serializers.FloatField(), required=False)
    values = serializers.ListField(child=ComplexField(), required=False)

    def validate(self, attrs):
        kind = attrs["kind"]
        required = {
            RadialKind.INDICATOR.value: ("lower", "upper"),
            RadialKind.BUMP.value: ("centre", "width"),
            RadialKind.SAMPLED.value: ("t_grid", "values"),
        }.get(kind, ())
        missing = [name for name in required if name not in attrs]
        if missing:
            raise serializers.ValidationError(f"{kind} radial functions need {', '.join(missing)}")
        return attrs


# ---------------------------------------------------------------------------
# Extensions
# ---------------------------------------------------------------------------

class SubspaceModeSerializer(serializers.Serializer):
    mode = serializers.IntegerField(min_value=0)
    basis = serializers.ListField(child=serializers.ListField(child=ComplexField()))


class SelectionSerializer(serializers.Serializer):
    q = ComplexField()
    kind = serializers.ChoiceField(choices=[k.value for k in SelectionKind])
    modes = SubspaceModeSerializer(many=True, required=False)


class TermSerializer(serializers.Serializer):
    q = ComplexField()
    log_power = serializers.IntegerField(min_value=0, max_value=1)
    coefficient = ComplexField()


class GeneratorSerializer(serializers.Serializer):
    mode = serializers.IntegerField(min_value=0)
    vector = serializers.ListField(child=ComplexField(), allow_empty=False)
    terms = TermSerializer(many=True)


class ExtensionSerializer(serializers.Serializer):
    """The shape written by Extension.to_dict; ``*_exact`` strings win over the float echoes."""
    label = serializers.CharField(required=False, allow_blank=True)
    gamma = serializers.FloatField()
    p = serializers.FloatField(required=False, default=2.0)
    gamma_exact = serializers.CharField(required=False)
    p_exact = serializers.CharField(required=False)
    choices = SelectionSerializer(many=True, required=False)
    generators = GeneratorSerializer(many=True, required=False)
    spectrum = SpectrumSerializer(required=False)

    def validate(self, attrs):
        try:
            attrs["gamma"] = exact_parameter(attrs.pop("gamma_exact", None) or attrs["gamma"])
            attrs["p"] = exact_parameter(attrs.pop("p_exact", None) or attrs["p"])
        except (TypeError, ValueError, SyntaxError):
            raise serializers.ValidationError("gamma and p must be numbers")
        if attrs["p"] <= 1:
            raise serializers.ValidationError("p must lie in (1, ∞)")
        return attrs


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

class RunConfigSerializer(serializers.Serializer):
    """Knob set of a CLI run; echoed into every output document."""
    subcommand = serializers.CharField()
    operator = serializers.CharField(default="laplacian")
    n = serializers.IntegerField(min_value=0, required=False, allow_null=True)
    modes = serializers.IntegerField(min_value=1)
    spectrum_file = serializers.CharField(required=False, allow_null=True)
    gamma = ExactNumberField(required=False, allow_null=True)
    p = ExactNumberField(default=2)
    theta = serializers.FloatField(min_value=0, max_value=3.141592653589793, default=1.5707963267948966)
    strip = serializers.ListField(child=serializers.FloatField(), min_length=2, max_length=2, required=False)
    extension = serializers.CharField(required=False, allow_null=True)
    filter = serializers.CharField(required=False)
    e3_method = serializers.CharField(required=False)
    nodes = serializers.IntegerField(min_value=10)
    t_min = serializers.FloatField(min_value=0)
    jobs = serializers.IntegerField(min_value=1)
    tolerances = serializers.DictField(child=serializers.FloatField(), required=False)

    def validate(self, attrs):
        if "p" in attrs and attrs["p"] <= 1:
            raise serializers.ValidationError({"p": "p must lie in (1, ∞)"})
        if not 0 < attrs["t_min"] < 1:
            raise serializers.ValidationError({"t_min": "t_min must lie in (0, 1)"})
        strip = attrs.get("strip")
        if strip and not strip[0] < strip[1]:
            raise serializers.ValidationError({"strip": "the strip needs a < b"})
        return attrs


# ---------------------------------------------------------------------------
# Loading helpers
# ---------------------------------------------------------------------------

def validated(serializer_class, data, what: str) -> dict:
    if not isinstance(data, dict):
        raise InvalidDocument(f"the {what} document must be a JSON object")
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        raise InvalidDocument(f"invalid {what} document", details=serializer.errors)
    return serializer.validated_data


def load_operator(data):
    clean = validated(OperatorSerializer, data, "operator")
    try:
        return operator_from_document(clean)
    except ConeLabError:
        raise
    except ValueError as exc:
        raise InvalidDocument(f"invalid operator document: {exc}")


def load_spectrum(data):
    clean = validated(SpectrumSerializer, data, "spectrum")
    return _spectrum(clean)


def _spectrum(clean):
    entries = [(m["eigenvalue"], m["multiplicity"]) for m in clean["modes"]]
    labels = [m["label"] for m in clean["modes"]] if all("label" in m for m in clean["modes"]) else None
    return custom_spectrum(entries, dim_boundary=clean["dim_boundary"], labels=labels)


def load_radial(data) -> RadialFunction:
    clean = dict(validated(RadialFunctionSerializer, data, "radial function"))
    kind = RadialKind(clean.pop("kind"))
    if kind == RadialKind.SAMPLED:
        clean["t_grid"] = tuple(clean["t_grid"])
        clean["values"] = tuple(clean["values"])
    try:
        return RadialFunction(kind=kind, **clean)
    except ValueError as exc:
        raise InvalidDocument(f"invalid radial function document: {exc}")


def load_extension(data, spectrum=None):
    """Extension document -> Extension; the embedded spectrum is used when no spectrum is given."""
    if isinstance(data, dict) and "extensions" in data and isinstance(data["extensions"], list):
        if len(data["extensions"]) != 1:
            raise InvalidDocument(f"the document lists {len(data['extensions'])} extensions; pass exactly one")
        data = data["extensions"][0]
    clean = validated(ExtensionSerializer, data, "extension")
    if spectrum is None:
        if "spectrum" not in clean:
            raise InvalidDocument("the extension document carries no spectrum and none was given")
        spectrum = _spectrum(clean["spectrum"])
    elif "spectrum" in clean and spectrum.pairs() != _spectrum(clean["spectrum"]).pairs():
        raise InvalidDocument("the extension was built on a different boundary spectrum")
    return extension_from_document(clean, spectrum)

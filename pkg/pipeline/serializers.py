from django.conf import settings
from rest_framework import serializers

from binaries.services import parse_cutoff
from classifiers.constants import Method
from classifiers.services import validate_params
from featuresets.schema import is_valid_symbol
from ngrams.constants import API_GRAM_LENGTHS, OPCODE_GRAM_LENGTHS
from selection.services import parse_selection

from .constants import DEFAULT_NGRAM_N, LIST_SEPARATOR, FeatureFamily


def _setting(key):
    return lambda: settings.MALWARELAB[key]


class CommaListField(serializers.ListField):
    """A list given either as a list or as one `a, b, c` string."""

    child = serializers.CharField()

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part.strip() for part in data.split(LIST_SEPARATOR) if part.strip()]
        return super().to_internal_value(data)


class PipelineConfigSerializer(serializers.Serializer):
    """Input serializer for a pipeline config file (already flattened by `config.payload_from_mapping`)."""

    classes = CommaListField(min_length=2)
    corpora = serializers.DictField(child=serializers.CharField())
    tasks = serializers.DictField(child=CommaListField(min_length=2), default=dict)
    family = serializers.ChoiceField(choices=FeatureFamily.choices, default=FeatureFamily.PE_HEADER)
    ngram_n = serializers.IntegerField(
        min_value=min(OPCODE_GRAM_LENGTHS), max_value=max(OPCODE_GRAM_LENGTHS), default=DEFAULT_NGRAM_N
    )
    ngram_per_class = serializers.IntegerField(min_value=1, default=_setting('NGRAM_PER_CLASS'))
    ngram_top_k = serializers.IntegerField(min_value=1, default=_setting('NGRAM_TOP_K'))
    profile_window = serializers.IntegerField(min_value=1, default=_setting('PROFILE_WINDOW'))
    profile_skip = serializers.IntegerField(min_value=1, default=_setting('PROFILE_SKIP'))
    profile_count = serializers.IntegerField(min_value=1, default=_setting('PROFILE_COUNT'))
    selection = CommaListField(min_length=1, default=lambda: ['none'])
    models = CommaListField(min_length=1, default=lambda: list(Method.values))
    model_params = serializers.DictField(child=serializers.DictField(), default=dict)
    folds = serializers.IntegerField(min_value=2, default=_setting('FOLDS'))
    seed = serializers.IntegerField(min_value=0, default=_setting('SEED'))
    jobs = serializers.IntegerField(min_value=1, default=_setting('JOBS'))
    out = serializers.CharField(default=_setting('OUTPUT_DIR'))
    disassembler = serializers.CharField(allow_blank=True, default='')
    listings = serializers.CharField(allow_blank=True, default='')
    signatures = serializers.CharField(default=_setting('SIGNATURES_FILE'))
    failure_ceiling = serializers.FloatField(min_value=0.0, max_value=1.0, default=_setting('FAILURE_CEILING'))
    cutoff = serializers.CharField(default=_setting('DATASET_CUTOFF'))
    reference_class = serializers.CharField(allow_blank=True, default='')

    def validate_classes(self, value):
        duplicates = sorted({name for name in value if value.count(name) > 1})
        if duplicates:
            raise serializers.ValidationError(f"Duplicate classes: {duplicates}")
        invalid = [name for name in value if not is_valid_symbol(name)]
        if invalid:
            raise serializers.ValidationError(f"Invalid class names: {invalid}")
        return value

    def validate_selection(self, value):
        modes = [parse_selection(text) for text in value]
        if len(set(modes)) != len(modes):
            raise serializers.ValidationError("Selection modes must be distinct.")
        return modes

    def validate_models(self, value):
        unknown = [m for m in value if m not in Method.values]
        if unknown:
            raise serializers.ValidationError(f"Unknown methods: {unknown}. Choose from {list(Method.values)}.")
        return list(dict.fromkeys(value))

    def validate_cutoff(self, value):
        parse_cutoff(value)
        return value

    def validate(self, attrs):
        classes = attrs['classes']

        missing = [name for name in classes if name not in attrs['corpora']]
        if missing:
            raise serializers.ValidationError({'corpora': f"No corpus directory for classes {missing}."})
        extra = sorted(set(attrs['corpora']) - set(classes))
        if extra:
            raise serializers.ValidationError({'corpora': f"Corpus given for unconfigured classes {extra}."})

        tasks = attrs['tasks'] or {' vs '.join(classes): list(classes)}
        for task, members in tasks.items():
            unknown = [name for name in members if name not in classes]
            if unknown:
                raise serializers.ValidationError({'tasks': f"task {task}: unknown classes {unknown}."})
            if len(set(members)) != len(members):
                raise serializers.ValidationError({'tasks': f"task {task}: classes must be distinct."})
        attrs['tasks'] = tasks

        if attrs['family'] == FeatureFamily.API_NGRAM and attrs['ngram_n'] not in API_GRAM_LENGTHS:
            raise serializers.ValidationError(
                {'ngram_n': f"API-call n-grams support n in {API_GRAM_LENGTHS}, got {attrs['ngram_n']}."}
            )

        for method, params in attrs['model_params'].items():
            if method not in attrs['models']:
                raise serializers.ValidationError(
                    {'model_params': f"Hyperparameters given for '{method}', which is not in models."}
                )
            validate_params(method, params)

        if not attrs['reference_class']:
            attrs['reference_class'] = classes[0]
        elif attrs['reference_class'] not in classes:
            raise serializers.ValidationError(
                {'reference_class': f"'{attrs['reference_class']}' is not a configured class."}
            )
        return attrs

from rest_framework import serializers

from featuresets.constants import DEFAULT_DISCRETIZATION_BINS

from .constants import (
    AnnPreset,
    BayesNetStructure,
    DEFAULT_C,
    DEFAULT_DECAY,
    DEFAULT_EPOCHS,
    DEFAULT_K,
    DEFAULT_LAPLACE,
    DEFAULT_LEARNING_RATE,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_MIN_LEAF,
    DEFAULT_PRUNE_CF,
    DEFAULT_TOLERANCE,
    KnnWeighting,
    Method,
    SvmKernel,
)


class LayerSizesField(serializers.Field):
    """Hidden layer sizes as a list of ints or a comma-separated string such as `8, 8, 8`."""

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part for part in data.replace(' ', '').split(',') if part]
        if not isinstance(data, (list, tuple)):
            raise serializers.ValidationError("Expected a list of layer sizes.")
        sizes = []
        for item in data:
            try:
                size = int(item)
            except (TypeError, ValueError):
                raise serializers.ValidationError(f"Layer size '{item}' is not an integer.")
            if size < 1:
                raise serializers.ValidationError(f"Layer size {size} must be at least 1.")
            sizes.append(size)
        return sizes

    def to_representation(self, value):
        return list(value)


class NaiveBayesParamsSerializer(serializers.Serializer):
    laplace = serializers.FloatField(min_value=0, default=DEFAULT_LAPLACE)
    bins = serializers.IntegerField(min_value=2, default=DEFAULT_DISCRETIZATION_BINS)


class BayesNetParamsSerializer(NaiveBayesParamsSerializer):
    structure = serializers.ChoiceField(choices=BayesNetStructure.choices, default=BayesNetStructure.TAN)


class C45ParamsSerializer(serializers.Serializer):
    min_leaf = serializers.IntegerField(min_value=1, default=DEFAULT_MIN_LEAF)
    prune_cf = serializers.FloatField(max_value=0.5, allow_null=True, default=DEFAULT_PRUNE_CF)

    def to_internal_value(self, data):
        # config files have no null literal
        if isinstance(data, dict) and str(data.get('prune_cf', '')).lower() in ('none', 'off'):
            data = {**data, 'prune_cf': None}
        return super().to_internal_value(data)

    def validate_prune_cf(self, value):
        if value is not None and value <= 0:
            raise serializers.ValidationError("Confidence must be greater than 0.")
        return value


class KnnParamsSerializer(serializers.Serializer):
    k = serializers.IntegerField(min_value=1, default=DEFAULT_K)
    weighting = serializers.ChoiceField(choices=KnnWeighting.choices, default=KnnWeighting.UNIFORM)


class SvmParamsSerializer(serializers.Serializer):
    C = serializers.FloatField(default=DEFAULT_C)
    kernel = serializers.ChoiceField(choices=SvmKernel.choices, default=SvmKernel.LINEAR)
    gamma = serializers.FloatField(allow_null=True, default=None)
    tol = serializers.FloatField(default=DEFAULT_TOLERANCE)
    max_iterations = serializers.IntegerField(min_value=1, default=DEFAULT_MAX_ITERATIONS)

    def validate_C(self, value):
        if value <= 0:
            raise serializers.ValidationError("C must be positive.")
        return value

    def validate_gamma(self, value):
        if value is not None and value <= 0:
            raise serializers.ValidationError("gamma must be positive.")
        return value

    def validate_tol(self, value):
        if value <= 0:
            raise serializers.ValidationError("tol must be positive.")
        return value


class AnnParamsSerializer(serializers.Serializer):
    hidden = LayerSizesField(required=False)
    preset = serializers.ChoiceField(choices=AnnPreset.choices, default=AnnPreset.DEFAULT)
    epochs = serializers.IntegerField(min_value=0, default=DEFAULT_EPOCHS)
    learning_rate = serializers.FloatField(default=DEFAULT_LEARNING_RATE)
    decay = serializers.FloatField(max_value=1, default=DEFAULT_DECAY)

    def validate_learning_rate(self, value):
        if value <= 0:
            raise serializers.ValidationError("learning_rate must be positive.")
        return value

    def validate_decay(self, value):
        if value <= 0:
            raise serializers.ValidationError("decay must be positive.")
        return value


PARAM_SERIALIZERS = {
    Method.NAIVE_BAYES: NaiveBayesParamsSerializer,
    Method.BAYES_NET: BayesNetParamsSerializer,
    Method.C45: C45ParamsSerializer,
    Method.KNN: KnnParamsSerializer,
    Method.SVM: SvmParamsSerializer,
    Method.ANN: AnnParamsSerializer,
}

"""Training dispatch, classification and the persisted model format.

A saved model is one JSON document:

    {"format": "malwarelab-model", "version": 1, "method": "<tag>",
     "fingerprint": "<schema digest>", "schema": [...], "class_names": [...],
     "params": {...method specific...}}
"""
import json
import logging

from rest_framework.exceptions import ParseError, ValidationError

from featuresets.schema import AttributeSpec, Dataset, FeatureVector, schema_fingerprint

from .ann import AnnModel, train_ann
from .base import ModelSpec, Prediction, TrainedModel
from .bayes_net import BayesNetModel, train_bayes_net
from .c45 import C45Model, train_c45
from .constants import MODEL_FORMAT, MODEL_FORMAT_VERSION, Method
from .knn import KnnModel, train_knn
from .naive_bayes import NaiveBayesModel, train_naive_bayes
from .serializers import PARAM_SERIALIZERS
from .svm import SvmModel, train_svm

logger = logging.getLogger(__name__)

TRAINERS = {
    Method.NAIVE_BAYES: train_naive_bayes,
    Method.BAYES_NET: train_bayes_net,
    Method.C45: train_c45,
    Method.KNN: train_knn,
    Method.SVM: train_svm,
    Method.ANN: train_ann,
}

MODEL_CLASSES = {
    model.method: model
    for model in (NaiveBayesModel, BayesNetModel, C45Model, KnnModel, SvmModel, AnnModel)
}

SEEDED_METHODS = {Method.ANN}


def validate_params(method: str, params) -> dict:
    """Hyperparameters checked and defaulted by the method's serializer."""
    if method not in PARAM_SERIALIZERS:
        raise ValidationError(f"Unknown method '{method}'.")
    serializer = PARAM_SERIALIZERS[method](data=dict(params))
    unknown = set(params) - set(serializer.fields)
    if unknown:
        raise ValidationError({method: f"Unknown hyperparameters: {sorted(unknown)}"})
    serializer.is_valid(raise_exception=True)
    return dict(serializer.validated_data)


def train_model(ds: Dataset, spec: ModelSpec) -> TrainedModel:
    params = validate_params(spec.method, spec.params)
    if spec.method in SEEDED_METHODS:
        params['seed'] = spec.seed
    return TRAINERS[spec.method](ds, **params)


def classify(model: TrainedModel, sample: FeatureVector) -> Prediction:
    return model.classify(sample)


def dump_model(model: TrainedModel) -> str:
    document = {
        'format': MODEL_FORMAT,
        'version': MODEL_FORMAT_VERSION,
        'method': model.method,
        'fingerprint': model.fingerprint,
        'schema': [
            {'name': attr.name, 'kind': attr.kind, 'categories': list(attr.categories)}
            for attr in model.schema
        ],
        'class_names': list(model.class_names),
        'params': model.get_params(),
    }
    return json.dumps(document, indent=1, sort_keys=True, allow_nan=False) + '\n'


def load_model(text: str) -> TrainedModel:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"Model file is not valid JSON: {exc}") from exc
    if not isinstance(document, dict) or document.get('format') != MODEL_FORMAT:
        raise ParseError("Not a saved model.")
    if document.get('version') != MODEL_FORMAT_VERSION:
        raise ParseError(f"Unsupported model format version {document.get('version')!r}.")
    method = document.get('method')
    if method not in MODEL_CLASSES:
        raise ParseError(f"Unknown model method '{method}'.")

    schema = tuple(
        AttributeSpec(name=a['name'], kind=a['kind'], categories=tuple(a['categories']))
        for a in document['schema']
    )
    if schema_fingerprint(schema) != document['fingerprint']:
        raise ParseError("Schema does not match the stored fingerprint.")
    return MODEL_CLASSES[method].from_params(schema, document['class_names'], document['params'])

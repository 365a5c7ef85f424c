from django.db import models


class Method(models.TextChoices):
    """Classifier tags; labels are the result grid column headers."""
    NAIVE_BAYES = 'naive_bayes', 'Naive Bayes'
    BAYES_NET = 'bayes_net', 'BayesNet'
    C45 = 'c45', 'C4.5'
    KNN = 'knn', 'k-NN'
    SVM = 'svm', 'SVM'
    ANN = 'ann', 'ANN'


class BayesNetStructure(models.TextChoices):
    NAIVE = 'naive', 'Naive (class -> feature)'
    TAN = 'tan', 'Tree-augmented naive Bayes'


class KnnWeighting(models.TextChoices):
    UNIFORM = 'uniform', 'Majority vote'
    INVERSE_DISTANCE = 'inverse_distance', 'Inverse distance'


class SvmKernel(models.TextChoices):
    LINEAR = 'linear', 'Linear'
    RBF = 'rbf', 'Gaussian RBF'


class AnnPreset(models.TextChoices):
    DEFAULT = 'default', 'One hidden layer'
    THREE_LAYER = 'three_layer', 'Three hidden layers'


# Persisted model format
MODEL_FORMAT = 'malwarelab-model'
MODEL_FORMAT_VERSION = 1

# Naive Bayes / BayesNet
DEFAULT_LAPLACE = 1.0

# C4.5
DEFAULT_MIN_LEAF = 2
DEFAULT_PRUNE_CF = 0.25

# k-NN
DEFAULT_K = 1
DISTANCE_EPSILON = 1e-12

# SVM
DEFAULT_C = 1.0
DEFAULT_TOLERANCE = 1e-3
DEFAULT_MAX_ITERATIONS = 100_000
SUPPORT_VECTOR_EPSILON = 1e-8
CURVATURE_FLOOR = 1e-12

# ANN
DEFAULT_EPOCHS = 500
DEFAULT_LEARNING_RATE = 0.3
DEFAULT_DECAY = 0.99
WEIGHT_INIT_RANGE = 0.5

from django.db import models


class AttributeKind(models.TextChoices):
    """Value kinds an attribute column can carry."""
    NUMERIC = 'numeric', 'Numeric'
    BINARY = 'binary', 'Binary'
    NOMINAL = 'nominal', 'Nominal'


class DiscretizationMethod(models.TextChoices):
    EQUAL_FREQUENCY = 'equal_frequency', 'Equal frequency'
    SUPERVISED_THRESHOLD = 'supervised_threshold', 'Supervised threshold'


# Reserved CSV column names
CLASS_COLUMN = 'class'
SAMPLE_ID_COLUMN = 'sample_id'

# Significant digits used when writing floats; 17 round-trips any binary64
FLOAT_FORMAT = '.17g'

# Joins categories and class names inside a typed CSV header cell
SYMBOL_SEPARATOR = '|'

# Default discretization for the probabilistic classifiers
DEFAULT_DISCRETIZATION_BINS = 10

from django.db import models


class FeatureFamily(models.TextChoices):
    """Feature families `extract` can build."""
    PE_HEADER = 'pe_header', 'PE32 header'
    BYTE_RANDOMNESS = 'byte_randomness', 'Byte randomness profile'
    OPCODE_NGRAM = 'opcode_ngram', 'Opcode n-grams'
    API_NGRAM = 'api_ngram', 'API-call n-grams'


NGRAM_FAMILIES = (FeatureFamily.OPCODE_NGRAM, FeatureFamily.API_NGRAM)


class ExitCode(models.IntegerChoices):
    SUCCESS = 0, 'Success'
    PARTIAL_FAILURE = 1, 'Some grid cells failed'
    CONFIG_ERROR = 2, 'Configuration or data error'


DEFAULT_CONFIG_FILE = 'pipeline.env'
DEFAULT_NGRAM_N = 2
LIST_SEPARATOR = ','

# Artifact layout below the output directory
MANIFEST_DIR = 'manifests'
LISTING_DIR = 'listings'
FEATURE_DIR = 'features'
SELECTION_DIR = 'selection'
MODEL_DIR = 'models'
REPORT_DIR = 'reports'
AUDIT_DIR = 'audit'

CORPUS_SUMMARY_FILE = 'corpus_summary.csv'
CORPUS_SUMMARY_COLUMNS = ('class', 'files', 'size_bytes', 'excluded')
EXTRACTION_FAILURES_FILE = 'failures.csv'
EXTRACTION_FAILURE_COLUMNS = ('class', 'path', 'reason')
VOCABULARY_FILE = 'vocabulary.txt'
CLASS_FREQUENCY_FILE = 'class_frequencies.csv'
SUBSET_FILE_SUFFIX = '_attributes.txt'
RANKING_FILE_SUFFIX = '_ranking.csv'
GRID_CSV_FILE = 'grid.csv'
GRID_MARKDOWN_FILE = 'grid.md'
FREQUENCY_FILE = 'frequency.csv'
BEST_MODEL_DIR = 'best'
LISTING_SUFFIX = '.asm'
MODEL_SUFFIX = '.json'

# Synthetic demo corpus
DEMO_CLASSES = ('benign', 'malware')
DEMO_PER_CLASS = 200
DEMO_CORPUS_DIR = 'corpus'
DEMO_LISTING_DIR = 'listings'
DEMO_CONFIG_FILE = 'demo.env'

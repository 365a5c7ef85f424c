from django.db import models


class NgramSource(models.TextChoices):
    """Where the items of an n-gram come from."""
    OPCODE = 'opcode', 'Opcode mnemonics'
    API = 'api', 'Imported API calls'


# Sliding-window randomness profile
DEFAULT_PROFILE_WINDOW = 32
DEFAULT_PROFILE_SKIP = 32
DEFAULT_PROFILE_COUNT = 30
PROFILE_COLUMN_PREFIX = 'Window'

# Vocabulary mining
DEFAULT_PER_CLASS = 100
DEFAULT_TOP_K = 100
OPCODE_GRAM_LENGTHS = (1, 2, 3, 4)
API_GRAM_LENGTHS = (1, 2)

# objdump prints this for bytes it cannot decode
BAD_INSTRUCTION = '(bad)'

FREQUENCY_REPORT_ROWS = 20

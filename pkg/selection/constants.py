from django.db import models


class SelectionKind(models.TextChoices):
    """Feature selection applied before training; labels head the grid sections."""
    NONE = 'none', 'All features'
    INFOGAIN = 'infogain', 'Information Gain'
    CFS = 'cfs', 'Cfs'


class CfsSearch(models.TextChoices):
    GREEDY = 'greedy', 'Greedy forward'
    BEST_FIRST = 'best_first', 'Best first'


DEFAULT_INFOGAIN_THRESHOLD = 0.1

# Best-first gives up after this many expansions without a better subset
BEST_FIRST_STALE_LIMIT = 5

# A candidate must beat the current merit by more than this to be accepted
MERIT_EPSILON = 1e-12

RANKING_COLUMNS = ('merit', 'attribute')
MERIT_FORMAT = '.5f'

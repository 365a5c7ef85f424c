DEFAULT_FOLDS = 5

# Accuracies are percentages rendered with two decimals
ACCURACY_FORMAT = '.2f'
MISSING_CELL = '—'
BEST_COLUMN = 'best'
GRID_KEY_COLUMNS = ('selection', 'task')
FOLD_COLUMNS = ('fold', 'accuracy', 'seconds')

FREQUENCY_TOKEN_COLUMN = 'ngram'

import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'MalwareLab.settings')
django.setup()

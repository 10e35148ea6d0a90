# -*- coding: utf-8 -*-

from ._version import get_versions


# Determine the project version
__version__ = get_versions()['version']
del get_versions

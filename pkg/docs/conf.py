#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import sys
import os

sys.path.insert(0, os.path.abspath('../src'))

from dapgkit import __version__  # noqa: E402


extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
]
templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'
project = 'dapgkit'
version = ".".join(__version__.split(".")[:2])
release = __version__
exclude_patterns = ['_build']
pygments_style = 'sphinx'
html_theme = 'alabaster'
htmlhelp_basename = 'dapgkitdoc'
man_pages = [
    (master_doc, 'dapgkit', 'dapgkit Documentation', [], 1)
]

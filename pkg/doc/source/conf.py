# -*- coding: utf-8 -*-
#
# kmfv documentation build configuration file.

import sys, os

sys.path.insert(0, os.path.abspath('../..'))

# -- General configuration -----------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.mathjax', 'numpydoc',
              'sphinx.ext.autosummary']

numpydoc_show_class_members = False

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'kmfv'
copyright = u'2026, the kmfv developers'

import kmfv
version = kmfv.__version__
release = version

today_fmt = '%B %d, %Y'
exclude_patterns = []
pygments_style = 'sphinx'

# -- Options for HTML output ---------------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_static_path = ['_static']
htmlhelp_basename = 'kmfvdoc'

# -- Options for LaTeX output --------------------------------------------------

latex_documents = [
    ('index', 'kmfv.tex', u'kmfv Documentation',
     u'the kmfv developers', 'manual'),
]

man_pages = [
    ('index', 'kmfv', u'kmfv Documentation', [u'the kmfv developers'], 1)
]

autosummary_generate = True

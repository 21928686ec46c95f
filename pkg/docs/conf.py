import os
import sys

import sphinx_rtd_theme

# Sphinx configuration for the regretsynth docs.

sys.path.insert(0, os.path.abspath('../'))

from regretsynth import __version__


project = 'regretsynth'
copyright = '2024-present regretsynth contributors'
author = 'regretsynth contributors'
release = __version__

extensions = [
    'sphinx_rtd_theme',
    'sphinx.ext.autodoc',
]

autodoc_default_options = {
    'members': True,
    'exclude-members': '__init__',
}
autodoc_member_order = 'bysource'
autodoc_class_content = 'class'
autodoc_class_signature = 'separated'
# The solver stack is heavy and only needed at run time.
autodoc_mock_imports = ['cvxpy', 'clarabel']

templates_path = ['_templates']
exclude_patterns = ['_build']

html_theme = 'sphinx_rtd_theme'
html_static_path = ['_static']

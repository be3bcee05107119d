"""Robust filtering of periodically correlated sequences with GM increments.

Submodules: ``increments``, ``spectral``, ``psarima``, ``lift``, ``operators``,
``filtering``, ``classes``, ``minimax``, ``simulate``, ``oracles``, ``config``,
``pipeline``, ``validate`` and ``cli``.  The package root stays import-light so
the command line can set thread limits before numpy loads.
"""

__version__ = "0.1.0"

"""Training-data mixture optimization.

Thin python surface over the C++ core: per-domain scaling-law evaluation,
Huber-loss parameter fitting, and convex mixture-weight solving.
"""

try:
    from ._mixopt import *  # noqa: F401,F403
    from ._mixopt import __doc__ as _core_doc  # noqa: F401
except ImportError:  # running against a build tree; the module is top-level
    from _mixopt import *  # noqa: F401,F403

__version__ = "0.1.0"

# SPDX-License-Identifier: Apache-2.0
"""Sub-array XL-MIMO uplink channel estimation toolkit."""

try:
    from ._xlce import *  # noqa: F401,F403
except ImportError:  # CMake build tree: extension module sits beside the package
    from _xlce import *  # noqa: F401,F403

__version__ = "0.1.0"

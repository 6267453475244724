"""Kalman image denoising, from-scratch CNN builders and desk-scale training."""

try:
    from ._thermalnet import *  # noqa: F401,F403
    from ._thermalnet import __version__  # noqa: F401
except ImportError:
    # plain CMake build: the extension sits on sys.path next to the package
    from _thermalnet import *  # noqa: F401,F403
    from _thermalnet import __version__  # noqa: F401

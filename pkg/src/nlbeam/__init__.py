"""Natural-language control for a simulated synchrotron beamline.

Pipeline: synthetic labeled-corpus generation -> BIO sequence tagger ->
command compilation -> confirm-before-execute service over a deterministic
beamline simulator.
"""

__version__ = "0.1.0"

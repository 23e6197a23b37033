"""Exact SOS certificates for the signs of entropy derivatives under the heat flow.

Pipeline: targets -> constraints -> reduction -> sdp -> certificate, with an
exact Gaussian oracle for independent checks.  See ``epiprover.pipeline.prove``.
"""

__version__ = "0.1.0"

"""Set-valued state and input estimation for switched nonlinear systems
with hidden modes, bounded noise, and unbounded unknown inputs.

The package builds a bank of fixed-gain recursive observers (one per mode
hypothesis), derives guaranteed per-step error radii, and eliminates mode
hypotheses whose measurement residual provably exceeds what the hypothesis
could explain.  See the README for the pipeline and CLI entry points.
"""

__version__ = "0.1.0"

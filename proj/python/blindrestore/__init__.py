"""Blind inverse problem solving with diffusion posterior sampling on analytic priors."""

from blindrestore._blindrestore import *  # noqa: F401,F403
from blindrestore._blindrestore import __doc__  # noqa: F401

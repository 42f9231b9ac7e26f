"""Constructive polynomial partitioning, incidence certificates, tube counts,
and a numerical wave-packet laboratory for the paraboloid extension operator.
"""

__version__ = "0.1.0"

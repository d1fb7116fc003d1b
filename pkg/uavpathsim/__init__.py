"""Top-level module for UAVPathSim.
"""

__version__ = '0.1.0-dev' # This line is changed automatically by build pipelines!

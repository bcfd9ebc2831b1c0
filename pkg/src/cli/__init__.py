"""
Experiment orchestration: config files, the built-in catalog, run artifacts
and the run registry.
"""

# utils/__init__.py
# This file marks the 'utils' directory as a Python package.

"""
The 'utils' package for SpanGate.

Key contents:
    - `helpers.py`: logging setup, JSON / JSON Lines I/O and the RunConfig
      that merges defaults, a JSON config file and command-line flags.
    - `errors.py`: the SpanGateError hierarchy and its exit-code mapping.

The rest of the code base imports these submodules explicitly
(e.g. `from utils.helpers import RunConfig`).
"""

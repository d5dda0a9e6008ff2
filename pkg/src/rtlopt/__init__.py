"""rtlopt: batch optimization toolchain for a synthesizable Verilog subset.

Pipeline: parse -> instance tree -> partition -> per-group analysis,
retrieval, and tree search over rewrite rules -> verification -> cost
report.  See the README for the CLI.
"""

__version__ = "0.1.0"

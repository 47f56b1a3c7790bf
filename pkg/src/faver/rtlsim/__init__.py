"""Cycle-accurate interpreter for a small synthesizable HDL subset.

Supported: one module; input/output/wire/reg with ``[msb:lsb]`` ranges,
``signed``, 1-D reg arrays; continuous assigns; ``always @(posedge clk)``
with an optional async reset edge; ``always @(*)``; if/else, begin/end,
blocking and nonblocking assignments; the arithmetic, bitwise, logical,
comparison, shift, ternary, concatenation and select operators; sized and
plain decimal literals.  Excluded (rejected by name where recognizable):
initial blocks, tasks/functions, generate, parameters, delays, four-state
values, multiple clocks.
"""

from .ast import HdlAst
from .parser import parse_hdl
from .sim import SimInstance, elaborate, run_stimuli, trace_ports

__all__ = ["HdlAst", "parse_hdl", "SimInstance", "elaborate", "run_stimuli",
           "trace_ports"]

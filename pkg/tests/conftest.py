import json
from pathlib import Path

import pytest

from faver.specmodel import parse_design_spec, derive_verification_spec

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = Path(__file__).parent / "corpus"
GOLDEN = Path(__file__).parent / "golden"

COUNTER_SPEC = """\
module: counter8
ports:
  clk in 1 clock
  rst in 1 reset
  en in 1
  count out 8
reset: sync active-high hold=2
constraints:
  count max_width=8
description:
  An 8-bit counter: count resets to 0 and increments by one on each
  enabled clock edge, wrapping modulo 256.
"""

COUNTER_RTL = """\
module counter8(input clk, input rst, input en, output reg [7:0] count);
  always @(posedge clk) begin
    if (rst)
      count <= 8'd0;
    else if (en)
      count <= count + 8'd1;
  end
endmodule
"""


class CounterModel:
    """Reference model for the counter fixture."""

    def __init__(self):
        self.count = 0

    def reset(self):
        self.count = 0

    def step(self, en):
        if en:
            self.count = (self.count + 1) % 256
        return {"count": self.count}


class ConvModel:
    """Reference model for the 3-tap MAC fixture: y is registered, taps
    shift through a two-deep pipeline, kernel arrives flattened."""

    def __init__(self):
        self.x0 = 0
        self.x1 = 0
        self.y = 0

    def reset(self):
        self.x0 = 0
        self.x1 = 0
        self.y = 0

    def step(self, x, k_flat):
        k = self.reshape(k_flat)
        self.y = k[0] * x + k[1] * self.x0 + k[2] * self.x1
        self.x1 = self.x0
        self.x0 = x
        return {"y": self.y}

    def reshape(self, k_flat):
        return [(k_flat >> (8 * i)) & 0xFF for i in range(3)]


@pytest.fixture
def counter_design():
    return parse_design_spec(COUNTER_SPEC)


@pytest.fixture
def counter_vspec(counter_design):
    return derive_verification_spec(counter_design)


@pytest.fixture
def counter_model():
    return CounterModel()


def load_corpus_stimuli(name: str) -> list[dict[str, int]]:
    obj = json.loads((GOLDEN / f"{name}.stimuli.json").read_text())
    return obj["cycles"]

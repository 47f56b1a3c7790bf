import pytest

from faver.bits import mask, sign_extend
from faver.cosim import PairedTrace
from faver.diagnose import (ClassifierParams, classify, compare, render_report)
from faver.trace import TracePort


def make_trace(ref_values, dut_values, width=8, latency_offset=0,
               case="case0", port="y"):
    """Single-output paired trace with a 1-bit dummy input column."""
    n = max(len(ref_values), len(dut_values))
    return PairedTrace(
        case_name=case,
        ports=(TracePort("d", "in", 1), TracePort(port, "out", width)),
        inputs=[{"d": i % 2} for i in range(n)],
        dut_outputs=[{port: v} for v in dut_values],
        ref_outputs=[{port: v} for v in ref_values],
        latency_offset=latency_offset,
    )


def counter_run(n):
    return [(i + 1) % 256 for i in range(n)]


# --- compare -------------------------------------------------------------------

def test_identical_traces_pass():
    vals = counter_run(10)
    assert compare(make_trace(vals, list(vals))).kind == "pass"


def test_pass_requires_exact_equality_no_tolerance():
    vals = counter_run(10)
    dut = list(vals)
    dut[7] += 1
    result = compare(make_trace(vals, dut))
    assert result.kind != "pass"
    assert len([e for e in result.evidence if e.cycle == 7]) == 1


def test_single_differing_cycle_yields_one_evidence_entry():
    vals = counter_run(12)
    dut = list(vals)
    dut[3] ^= 0xFF
    result = compare(make_trace(vals, dut))
    assert len(result.evidence) == 1
    assert result.evidence[0].cycle == 3


# --- boundary classification -------------------------------------------------------

def test_wrap_boundary_detected():
    ref = [100, 200, 300 % 256, 290 % 256, 50]
    # pretend the model thinks the port is wider: ref values exceed 8 bits
    trace = PairedTrace(
        case_name="c",
        ports=(TracePort("d", "in", 1), TracePort("y", "out", 16)),
        inputs=[{"d": 0}] * 5,
        dut_outputs=[{"y": v % 256} for v in [100, 200, 300, 290, 50]],
        ref_outputs=[{"y": v} for v in [100, 200, 300, 290, 50]],
    )
    result = classify(trace)
    assert result.kind == "boundary"
    assert result.port == "y"
    assert result.width_bits == 8
    assert result.variant == "wrap"


def test_spec_wrap_example_300_vs_44():
    ref = [300, 300, 300]
    dut = [44, 44, 44]
    result = classify(make_trace(ref, dut, width=16))
    assert (result.kind, result.width_bits, result.variant) == ("boundary", 8, "wrap")


def test_sign_extension_boundary_detected():
    ref = [0x00AB, 0x00F0, 0x0012]
    dut = [sign_extend(mask(v, 8), 8, 16) for v in ref]
    result = classify(make_trace(ref, dut, width=16))
    assert result.kind == "boundary"
    assert result.variant == "signext"
    assert result.width_bits == 8


def test_boundary_needs_single_port():
    n = 6
    trace = PairedTrace(
        case_name="c",
        ports=(TracePort("d", "in", 1),
               TracePort("y", "out", 16), TracePort("z", "out", 16)),
        inputs=[{"d": 0}] * n,
        dut_outputs=[{"y": (300 + i) % 256, "z": (400 + i) % 256}
                     for i in range(n)],
        ref_outputs=[{"y": 300 + i, "z": 400 + i} for i in range(n)],
    )
    assert classify(trace).kind == "functional"


def test_boundary_never_mislabeled_functional():
    """Any trace explainable as pure width wrap on one port stays boundary."""
    for w in (3, 5, 7):
        ref = [i * 37 % 1024 for i in range(20)]
        dut = [mask(v, w) for v in ref]
        if all(d == r for d, r in zip(dut, ref)):
            continue
        result = classify(make_trace(ref, dut, width=10))
        assert result.kind == "boundary", f"w={w}"
        assert result.width_bits == w


# --- timing classification -----------------------------------------------------------

@pytest.mark.parametrize("k", [-3, -2, -1, 1, 2, 3])
def test_pure_shift_detected_with_exact_offset(k):
    base = counter_run(24)
    if k > 0:
        dut = [0] * k + base[:-k]  # DUT lags the reference by k
    else:
        dut = base[-k:] + [0] * (-k)
    result = classify(make_trace(base, dut))
    assert result.kind == "timing"
    assert result.offset_cycles == k
    assert result.match_fraction == 1.0


def test_tie_breaks_toward_positive_offset():
    # symmetric palindrome-ish signal matching at +1 and -1 equally
    vals = [1, 2, 3, 2, 1, 2, 3, 2, 1, 2, 3, 2, 1]
    dut = [0] + vals[:-1]
    result = classify(make_trace(vals, dut, width=4),
                      ClassifierParams(min_match_fraction=0.8))
    assert result.kind == "timing"
    assert result.offset_cycles > 0


def test_shift_beyond_window_is_functional():
    base = counter_run(30)
    k = 9  # default window is 8
    dut = [0] * k + base[:-k]
    assert classify(make_trace(base, dut)).kind == "functional"


def test_threshold_is_configurable():
    base = counter_run(30)
    dut = [0] + base[:-1]
    dut[20] ^= 0x7F  # one bad sample after shifting
    strict = classify(make_trace(base, dut),
                      ClassifierParams(min_match_fraction=1.0))
    relaxed = classify(make_trace(base, dut),
                       ClassifierParams(min_match_fraction=0.9))
    assert strict.kind == "functional"
    assert relaxed.kind == "timing" and relaxed.offset_cycles == 1


def test_wrong_operator_is_functional():
    # reference adds, candidate subtracts
    a = [5, 9, 13, 40, 200, 7, 8]
    b = [3, 4, 2, 39, 100, 9, 1]
    ref = [mask(x + y, 8) for x, y in zip(a, b)]
    dut = [mask(x - y, 8) for x, y in zip(a, b)]
    assert classify(make_trace(ref, dut)).kind == "functional"


def test_classifier_determinism():
    ref = counter_run(16)
    dut = [v ^ 3 for v in ref]
    r1 = classify(make_trace(ref, dut))
    r2 = classify(make_trace(ref, dut))
    assert r1 == r2


def test_evidence_includes_first_divergence():
    ref = counter_run(16)
    dut = list(ref)
    for i in (4, 9, 12):
        dut[i] ^= 0x55
    result = classify(make_trace(ref, dut))
    assert min(e.cycle for e in result.evidence) == 4


# --- report rendering -----------------------------------------------------------

def test_all_pass_report_has_no_case_sections():
    vals = counter_run(8)
    trace = make_trace(vals, list(vals))
    report = render_report([(trace, classify(trace))])
    assert report.passed
    assert "PASS" in report.text
    assert "case '" not in report.text


def test_boundary_report_names_port_and_width():
    trace = make_trace([300] * 4, [44] * 4, width=16)
    report = render_report([(trace, classify(trace))])
    assert not report.passed
    assert "BOUNDARY" in report.text
    assert "port 'y'" in report.text and "8 bits" in report.text
    assert "mod 2^8" in report.text
    assert "first divergence at cycle 0" in report.text
    assert "hint:" in report.text


def test_timing_report_shows_offset():
    base = counter_run(20)
    trace = make_trace(base, [0] + base[:-1])
    report = render_report([(trace, classify(trace))])
    assert "+1" in report.text and "TIMING" in report.text


def test_report_rendering_is_byte_stable():
    ref = counter_run(20)
    dut = [v ^ 9 for v in ref]
    t = make_trace(ref, dut)
    r1 = render_report([(t, classify(t))])
    r2 = render_report([(t, classify(t))])
    assert r1.text == r2.text
    assert r1.to_json() == r2.to_json()


def test_report_window_marks_mismatching_rows():
    ref = counter_run(20)
    dut = list(ref)
    dut[10] ^= 1
    t = make_trace(ref, dut)
    report = render_report([(t, classify(t))])
    assert "* cycle   10" in report.text


def test_verdict_consistent_with_case_kinds():
    good = make_trace(counter_run(5), counter_run(5))
    bad = make_trace([300] * 4, [44] * 4, width=16, case="case1")
    report = render_report([(good, classify(good)), (bad, classify(bad))])
    assert not report.passed
    assert report.cases[0].passed and not report.cases[1].passed

"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s or -rP to see them).  Tolerances are fixed
here, not configurable."""

import json
import time
from contextlib import contextmanager

import pytest

from faver.analytics import AnalyticParams, monte_carlo_system, sys_success_rate
from faver.bits import mask
from faver.cosim import PairedTrace
from faver.diagnose import classify
from faver.errors import ValidationError
from faver.genclient import ScriptedMockClient
from faver.loop import NativeModelBackend, compute_metrics, run_session
from faver.rtlsim import elaborate, parse_hdl, run_stimuli
from faver.specmodel import (Direction, PortDecl, Signedness,
                             build_verification_spec, parse_design_spec,
                             validate_port_preservation)
from faver.stimgen import RawStimuli, RefinedStimuli, fix_boundaries, insert_reset
from faver.trace import TracePort
from faver.vcd import parse_vcd

from conftest import COUNTER_SPEC, CORPUS, FIXTURES, GOLDEN, CounterModel
from test_specmodel import ScriptedReply, counter_vspec_obj, vspec_reply


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"FAIL: {name}")
        raise
    print(f"PASS: {name}")


# --------------------------------------------------------------------------
# analytic model
# --------------------------------------------------------------------------

def test_analytic_closed_form():
    with criterion("analytic model: symmetry point, direct substitution, "
                   "strict gain on a 100-point grid, < 1 s"):
        start = time.perf_counter()
        assert sys_success_rate(AnalyticParams(x=0.5, a=0.7, b=0.7)) == 0.5
        got = sys_success_rate(AnalyticParams(x=0.6, a=0.9, b=0.2))
        assert abs(got - 0.870968) <= 1e-6
        checked = 0
        for i in range(1, 101):
            x = i / 101.0
            for a, b in ((0.9, 0.2), (0.2, 0.9), (0.55, 0.55), (1.0, 0.0),
                         (0.3, 0.8)):
                rate = sys_success_rate(AnalyticParams(x=x, a=a, b=b))
                if a > b:
                    assert rate > x
                elif a == b:
                    assert abs(rate - x) < 1e-12
                else:
                    assert rate < x + 1e-12
                checked += 1
        assert checked >= 100
        assert time.perf_counter() - start < 1.0


def test_monte_carlo_vs_closed_form():
    with criterion("Monte Carlo agrees with the closed form for the perfect "
                   "and uninformative verifiers at 10^5 trials, < 10 s"):
        start = time.perf_counter()
        perfect = monte_carlo_system(AnalyticParams(x=0.5, a=1.0, b=0.0),
                                     n_attempts=50, trials=100_000, seed=2024)
        assert abs(perfect.rate - 1.0) <= max(perfect.half_width, 1e-12)
        for x in (0.3, 0.5, 0.8):
            flat = monte_carlo_system(AnalyticParams(x=x, a=0.6, b=0.6),
                                      n_attempts=5, trials=100_000, seed=2025)
            assert abs(flat.rate - x) <= flat.half_width
        assert time.perf_counter() - start < 10.0


# --------------------------------------------------------------------------
# interpreter oracle equivalence
# --------------------------------------------------------------------------

def _ports_from_ast(ast, clock_name):
    ports = []
    for name in ast.port_order:
        decl = ast.nets[name]
        if name == clock_name:
            continue
        ports.append(PortDecl(
            name,
            Direction.IN if decl.kind == "input" else Direction.OUT,
            decl.width,
            Signedness.SIGNED if decl.signed else Signedness.UNSIGNED))
    return ports


def test_interpreter_matches_external_simulator_corpus():
    designs = sorted(CORPUS.glob("*.v"))
    with criterion(f"interpreter equivalence: {len(designs)} designs vs "
                   "external-simulator VCDs, zero mismatching cycles, < 30 s"):
        assert len(designs) >= 10
        start = time.perf_counter()
        total_cycles = 0
        for design_path in designs:
            name = design_path.stem
            ast = parse_hdl(design_path.read_text())
            inst = elaborate(ast)
            stim = json.loads(
                (GOLDEN / f"{name}.stimuli.json").read_text())["cycles"]
            mine = run_stimuli(inst, stim)
            golden = parse_vcd((GOLDEN / f"{name}.vcd").read_text(),
                               _ports_from_ast(ast, inst.clock_name),
                               inst.clock_name or "clk")
            assert len(golden.records) == len(mine.records), name
            mismatches = sum(
                1 for g, m in zip(golden.records, mine.records)
                if g.inputs != m.inputs or g.outputs != m.outputs)
            assert mismatches == 0, f"{name}: {mismatches} mismatching cycles"
            total_cycles += len(mine.records)
        elapsed = time.perf_counter() - start
        assert total_cycles > 300
        assert elapsed < 30.0


# --------------------------------------------------------------------------
# classifier
# --------------------------------------------------------------------------

def _paired(ref, dut, width=8):
    n = max(len(ref), len(dut))
    return PairedTrace(
        case_name="constructed",
        ports=(TracePort("d", "in", 1), TracePort("y", "out", width)),
        inputs=[{"d": 0}] * n,
        dut_outputs=[{"y": v} for v in dut],
        ref_outputs=[{"y": v} for v in ref],
    )


def test_classifier_constructed_cases():
    with criterion("classifier: wrap pair -> boundary; k-cycle shifts for "
                   "k in {-3..3}\\{0} -> timing(k, 1.0); wrong operator -> "
                   "functional (100% of constructed cases)"):
        ref = [100, 200, 300, 290, 256, 511, 50]
        dut = [v % 256 for v in ref]
        result = classify(_paired(ref, dut, width=16))
        assert (result.kind, result.width_bits, result.variant) == \
            ("boundary", 8, "wrap")

        base = [(i * 7 + 1) % 256 for i in range(32)]
        for k in (-3, -2, -1, 1, 2, 3):
            if k > 0:
                dut = [0] * k + base[:-k]
            else:
                dut = base[-k:] + [0] * (-k)
            result = classify(_paired(base, dut))
            assert result.kind == "timing", k
            assert result.offset_cycles == k
            assert result.match_fraction == 1.0

        a = [5, 9, 13, 40, 200, 7, 8, 77]
        b = [3, 4, 2, 39, 100, 9, 1, 30]
        ref = [mask(x + y, 8) for x, y in zip(a, b)]
        dut = [mask(x - y, 8) for x, y in zip(a, b)]
        assert classify(_paired(ref, dut)).kind == "functional"


# --------------------------------------------------------------------------
# stimuli rules
# --------------------------------------------------------------------------

def test_stimuli_refinement_rules():
    import random

    from faver.specmodel import derive_verification_spec

    with criterion("stimuli rules: 0 violations over >= 10^4 random values, "
                   "reset prefix for all four style/level combos, "
                   "idempotent refinement"):
        design = parse_design_spec(
            "module: m\nports:\n  clk in 1 clock\n  rst in 1 reset\n"
            "  a in 8\n  b in 6 signed\n  y out 8\n"
            "reset: sync active-high hold=2\n"
            "constraints:\n  a max_width=8 range=0..200\n"
            "  b max_width=6 range=-20..20\n")
        vspec = derive_verification_spec(design)
        rng = random.Random(424242)
        cases = {
            f"c{k}": [{"rst": 0,
                       "a": rng.randrange(-(1 << 16), 1 << 16),
                       "b": rng.randrange(-(1 << 16), 1 << 16)}
                      for _ in range(25)]
            for k in range(250)
        }
        n_values = sum(2 * len(v) for v in cases.values())
        assert n_values >= 10_000
        stim = RefinedStimuli(cases=cases)
        once = fix_boundaries(stim, list(vspec.boundary_conditions), vspec)
        violations = 0
        for cycles in once.cases.values():
            for cy in cycles:
                if not (0 <= cy["a"] < 256 and 0 <= cy["a"] <= 200):
                    violations += 1
                bv = cy["b"]
                bn = bv - 64 if bv & 0x20 else bv
                if not (0 <= bv < 64 and -20 <= bn <= 20):
                    violations += 1
        assert violations == 0
        twice = fix_boundaries(once, list(vspec.boundary_conditions), vspec)
        assert twice.cases == once.cases and twice.fix_log == once.fix_log

        for style in ("sync", "async"):
            for level in ("active-high", "active-low"):
                hold = 2 if level == "active-high" else 1
                d = parse_design_spec(
                    "module: m\nports:\n  clk in 1 clock\n  rst in 1 reset\n"
                    "  en in 1\n  y out 8\n"
                    f"reset: {style} {level} hold={hold}\n")
                v = derive_verification_spec(d)
                refined = insert_reset(
                    RawStimuli(cases={"c": [{"en": 1}] * 5}), v)
                active = 1 if level == "active-high" else 0
                cycles = refined.cases["c"]
                assert all(c["rst"] == active and c["en"] == 0
                           for c in cycles[:hold])
                assert all(c["rst"] == 1 - active for c in cycles[hold:])
                assert refined.async_reset_pre_assert == (style == "async")


# --------------------------------------------------------------------------
# end-to-end loop
# --------------------------------------------------------------------------

def _session(tree, seed=0):
    design = parse_design_spec(COUNTER_SPEC)
    gen = ScriptedMockClient(FIXTURES / tree)
    return run_session(design, gen, NativeModelBackend(CounterModel),
                       max_attempts=5, seed=seed)


def test_end_to_end_loop_with_scripted_mock():
    with criterion("end-to-end loop: faulty,faulty,correct terminates at "
                   "attempt 3 verified; all-faulty exhausts at attempt 5 "
                   "with a reproducible seeded sample"):
        eventual = _session("mock_counter_eventual")
        assert len(eventual.attempts) == 3
        assert eventual.selection_mode == "passed_verification"
        assert eventual.selected_index == 2

        first = _session("mock_counter_allfail", seed=99)
        second = _session("mock_counter_allfail", seed=99)
        assert len(first.attempts) == 5
        assert first.selection_mode == "exhaustion_sample"
        assert all(not a.passed for a in first.attempts)
        assert first.selected_index == second.selected_index
        assert first.to_json() == second.to_json()


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def test_metrics_against_hand_counts():
    from test_loop import ten_session_fixture

    with criterion("metrics: hand-built 10-session set reproduces "
                   "hand-counted rates and confusion counts exactly"):
        outcomes, truth = ten_session_fixture()
        m = compute_metrics(outcomes, truth)
        assert m.sys_sel_pass1 == 0.5
        assert m.sys_inner_pass5 == 0.7
        assert (m.confusion.tp, m.confusion.fp, m.confusion.tn,
                m.confusion.fn) == (5, 2, 13, 3)
        assert m.sys_inner_pass5 >= m.sys_sel_pass1


# --------------------------------------------------------------------------
# port preservation gate
# --------------------------------------------------------------------------

def test_port_preservation_mutations_rejected():
    with criterion("port preservation: rename, resize and retained-clock "
                   "mutations are all rejected"):
        design = parse_design_spec(COUNTER_SPEC)

        renamed = counter_vspec_obj()
        renamed["ports"][1]["name"] = "enable"
        resized = counter_vspec_obj()
        resized["ports"][2]["width"] = 16
        with_clock = counter_vspec_obj()
        with_clock["ports"].insert(
            0, {"name": "clk", "direction": "in", "width": 1})

        for mutated in (renamed, resized, with_clock):
            with pytest.raises(ValidationError):
                build_verification_spec(design, ScriptedReply(vspec_reply(mutated)))

        from faver.specmodel import verification_spec_from_json_obj
        for mutated in (renamed, resized, with_clock):
            verdict = validate_port_preservation(
                design, verification_spec_from_json_obj(mutated))
            assert not verdict.passed and verdict.diffs

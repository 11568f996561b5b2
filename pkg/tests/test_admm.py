import numpy as np
import pytest

from multirecon.admm import (
    CONTINUE,
    CONVERGED,
    DIVERGED,
    MAX_ITER,
    AdmmConfig,
    AdmmError,
    AdmmTrace,
    IterationRecord,
    beta_tilde_schedule,
    encode_for_network,
    termination_check,
)
from multirecon.codec import Codec, ReferenceCodec, quant_step, reference_compress
from multirecon.core import Bitstream, DegradationEnsemble, Signal, expected_distortion
from multirecon.solver import ZUpdateContext


def _trace(residuals, z_norm=1.0):
    t = AdmmTrace()
    for i, r in enumerate(residuals, 1):
        t.records.append(IterationRecord(i, r, z_norm, 100, 1.0))
    return t


def _first_stop(residuals, cfg):
    for t in range(1, len(residuals) + 1):
        state = termination_check(_trace(residuals[:t]), cfg)
        if state != CONTINUE:
            return state, t
    return MAX_ITER, len(residuals)


def test_termination_rule_examples():
    cfg = AdmmConfig(10)
    assert _first_stop([1.0, 0.5, 1e-5], cfg) == (CONVERGED, 3)
    assert _first_stop([1.0, 0.9, 2.5], cfg) == (DIVERGED, 3)
    assert _first_stop(list(np.linspace(1.0, 0.1, 40)), cfg) == (MAX_ITER, 40)


def test_growth_below_first_residual_is_not_divergence():
    # doubling from a small value while still under the first residual keeps going
    assert _first_stop([1.0, 0.1, 0.3], AdmmConfig(10)) == (MAX_ITER, 3)


def test_convergence_is_relative_to_z_norm():
    assert termination_check(_trace([5.0], z_norm=1e4), AdmmConfig(1)) == CONVERGED
    assert termination_check(_trace([5.0], z_norm=1.0), AdmmConfig(1)) == CONTINUE
    with pytest.raises(ValueError):
        termination_check(AdmmTrace(), AdmmConfig(1))


def test_config_validation():
    for kwargs in ({"max_iterations": 0}, {"convergence_epsilon": 0.0},
                   {"divergence_factor": 1.0}, {"beta_tilde": -1.0}):
        with pytest.raises(ValueError):
            AdmmConfig(10, **kwargs)


def test_beta_schedule_scales_with_squared_step():
    assert beta_tilde_schedule(4, 1.0) == 1.0
    assert beta_tilde_schedule(10, 1.0) == pytest.approx(4.0)
    assert beta_tilde_schedule(16, 0.5) / beta_tilde_schedule(10, 0.5) == pytest.approx(4.0)
    assert AdmmConfig(22).effective_beta_tilde == pytest.approx(beta_tilde_schedule(22))
    assert AdmmConfig(22, beta_tilde=3.0).effective_beta_tilde == 3.0
    assert beta_tilde_schedule(16, 2.0) == pytest.approx(2.0 * quant_step(16) ** 2)


@pytest.mark.parametrize("theta", [1, 21, 41])
def test_identity_ensemble_first_iteration_is_plain_codec(corpus, theta):
    x = corpus[5]
    cfg = AdmmConfig(theta, beta_tilde=7.0, max_iterations=1)
    b, trace = encode_for_network(x, DegradationEnsemble.identity(), ReferenceCodec(), cfg)
    assert b == reference_compress(x, theta)
    assert trace.termination in (MAX_ITER, CONVERGED) and trace.returned_iteration == 1


def test_identity_ensemble_z_update_reduction(rng):
    x = Signal(rng.uniform(0, 255, (16, 16)))
    beta = 1.7

    class Recorder(ReferenceCodec):
        def __init__(self):
            self.inputs = []

        def compress(self, s, theta):
            self.inputs.append(s.pixels.copy())
            return super().compress(s, theta)

    codec = Recorder()
    cfg = AdmmConfig(20, beta_tilde=beta, max_iterations=3, early_stop=False)
    encode_for_network(x, DegradationEnsemble.identity(), codec, cfg)
    # replay the loop by hand with the scalar z-update
    z, u = x.pixels, np.zeros(x.shape)
    plain = ReferenceCodec()
    assert len(codec.inputs) == 3
    for seen in codec.inputs:
        np.testing.assert_allclose(seen, z - u, atol=1e-9)
        v = plain.decompress(plain.compress(Signal(z - u), 20)).pixels
        z = (x.pixels + beta * (v + u)) / (1 + beta)
        u = u + v - z


def test_trace_contents(crop64, three_displays):
    cfg = AdmmConfig(11, max_iterations=6, early_stop=False)
    b, trace = encode_for_network(crop64, three_displays, ReferenceCodec(), cfg)
    assert len(trace) == 6 and trace.termination == MAX_ITER
    assert [r.iteration for r in trace.records] == list(range(1, 7))
    last = trace.returned_record()
    assert last.bits == b.bit_length
    v = ReferenceCodec().decompress(b)
    assert last.expected_mse == pytest.approx(expected_distortion(crop64, v, three_displays), rel=1e-9)


def test_improves_expected_distortion_on_crop(crop64, three_displays):
    codec = ReferenceCodec()
    for theta in (1, 6, 11, 16):
        _, trace = encode_for_network(crop64, three_displays, codec, AdmmConfig(theta))
        assert trace.returned_record().expected_mse < trace.records[0].expected_mse


def test_deterministic(crop64, three_displays):
    cfg = AdmmConfig(16, max_iterations=10)
    a, ta = encode_for_network(crop64, three_displays, ReferenceCodec(), cfg)
    b, tb = encode_for_network(crop64, three_displays, ReferenceCodec(), cfg)
    assert a == b and ta.residuals == tb.residuals


def test_shared_context_matches(crop64, three_displays):
    cfg = AdmmConfig(6, max_iterations=5)
    ctx = ZUpdateContext(three_displays, cfg.effective_beta_tilde, crop64)
    assert encode_for_network(crop64, three_displays, ReferenceCodec(), cfg, ctx)[0] == \
        encode_for_network(crop64, three_displays, ReferenceCodec(), cfg)[0]
    with pytest.raises(ValueError):
        encode_for_network(crop64, three_displays, ReferenceCodec(), AdmmConfig(6, beta_tilde=9.0), ctx)


class _ScriptedCodec(Codec):
    """Returns canned reconstructions so residuals can be steered."""

    def __init__(self, outputs, fail_at=None):
        self.outputs = list(outputs)
        self.calls = 0
        self.fail_at = fail_at

    def compress(self, s, theta):
        self.calls += 1
        if self.calls == self.fail_at:
            raise RuntimeError("boom")
        return Bitstream(bytes([self.calls]))

    def decompress(self, b):
        return Signal(self.outputs[b.data[0] - 1])


def test_divergence_returns_previous_stream():
    x = Signal(np.full((8, 8), 100.0))
    outs = [np.full((8, 8), 100.0 + d) for d in (10.0, 9.0, 27.0, 0.0)]
    b, trace = encode_for_network(x, DegradationEnsemble.identity(), _ScriptedCodec(outs),
                                  AdmmConfig(10, beta_tilde=1.0))
    assert trace.termination == DIVERGED
    assert trace.returned_iteration == 2 and b.data == bytes([2])


def test_codec_failure_carries_trace():
    x = Signal(np.full((8, 8), 100.0))
    codec = _ScriptedCodec([np.full((8, 8), 90.0)] * 5, fail_at=3)
    with pytest.raises(AdmmError) as info:
        encode_for_network(x, DegradationEnsemble.identity(), codec, AdmmConfig(10, beta_tilde=1.0))
    assert len(info.value.trace) == 2


def test_trace_csv(tmp_path, crop64, three_displays):
    _, trace = encode_for_network(crop64, three_displays, ReferenceCodec(), AdmmConfig(16, max_iterations=3))
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,split_residual,bits,expected_mse,expected_psnr_db"
    assert len(lines) == len(trace) + 1

import numpy as np
import pytest

from tvspec import shapes
from tvspec.errors import (
    ChannelMismatchError,
    FilterShapeMismatchError,
    MapOutOfRangeError,
    ParseError,
)
from tvspec.filters import CorrespondenceMap, FilterSpec, apply_filter, detail_transfer
from tvspec.solver import default_config, tv_energy, weighted_mean
from tvspec.spectral import ScheduleConfig, decompose_forward, estimate_alpha_max, reconstruct, spectrum

CAP_RADIUS = 0.5
CAP_LAMBDA = np.sin(CAP_RADIUS) / (1 - np.cos(CAP_RADIUS))


def tight_cfg(ops, domain, channels=1):
    cfg = default_config(ops, domain, channels=channels, step_rule="norm")
    cfg.gap_tol = 1e-7
    cfg.max_iter = 8000
    return cfg


@pytest.fixture(scope="module")
def cap_dec(ico3, ico3_ops):
    chi = shapes.geodesic_cap_indicator(ico3.vertices, radius=CAP_RADIUS)
    cfg = tight_cfg(ico3_ops, "vertices")
    amax = estimate_alpha_max(chi, ico3_ops, "vertices", solver_cfg=cfg)
    sched = ScheduleConfig(alpha_max=amax, decay=0.9, alpha_min_ratio=0.05)
    dec = decompose_forward(chi, sched, ico3_ops, "vertices", solver_cfg=cfg)
    return chi, dec


def test_all_pass_no_mask_returns_input(cap_dec):
    chi, dec = cap_dec
    out = apply_filter(dec, FilterSpec())
    assert np.linalg.norm(out.ravel() - chi) <= 1e-6 * np.linalg.norm(chi)


def test_zero_mask_returns_input(cap_dec):
    chi, dec = cap_dec
    spec = FilterSpec([(0.0, dec.times[-1], 0.0)], mask=np.zeros(dec.n_elements))
    out = apply_filter(dec, spec)
    original = reconstruct(dec, None)
    assert np.array_equal(out, original)


def test_low_pass_removes_cap(cap_dec, ico3_ops):
    chi, dec = cap_dec
    # zero everything around the single concentration peak and below
    spec = FilterSpec([(0.0, 2.0 / CAP_LAMBDA, 0.0)])
    out = apply_filter(dec, spec)
    mean = weighted_mean(chi, ico3_ops.A)
    assert np.linalg.norm(out - mean) <= 0.10 * np.linalg.norm(chi[:, None] - mean)


def test_mask_blend_matches_on_support(cap_dec):
    chi, dec = cap_dec
    rho = np.zeros(dec.n_elements)
    rho[: dec.n_elements // 2] = 1.0
    bands = [(0.0, float(dec.times[dec.n_components // 2]), 0.0)]
    masked = apply_filter(dec, FilterSpec(bands, mask=rho))
    unmasked = apply_filter(dec, FilterSpec(bands))
    original = reconstruct(dec, None)
    on = rho == 1.0
    assert np.array_equal(masked[on], unmasked[on])
    assert np.array_equal(masked[~on], original[~on])


def test_filter_linearity_in_gain(cap_dec):
    # bands cover every component so the default unit gain plays no role
    chi, dec = cap_dec
    t_mid = float(dec.times[dec.n_components // 2])
    t_end = float(dec.times[-1]) + 1.0
    s1 = FilterSpec([(0.0, t_mid, 0.3), (t_mid, t_end, 0.6)])
    s2 = FilterSpec([(0.0, t_mid, 0.4), (t_mid, t_end, 0.2)])
    s12 = FilterSpec([(0.0, t_mid, 0.7), (t_mid, t_end, 0.8)])
    lhs = apply_filter(dec, s12)
    rhs = apply_filter(dec, s1) + apply_filter(dec, s2) - dec.mean_part
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1.0, np.abs(lhs).max())


def test_mask_shape_mismatch(cap_dec):
    chi, dec = cap_dec
    with pytest.raises(FilterShapeMismatchError):
        apply_filter(dec, FilterSpec([], mask=np.zeros(dec.n_elements + 1)))


def test_filter_spec_validation():
    with pytest.raises(ParseError):
        FilterSpec([(0.0, 1.0, 1.0), (0.5, 2.0, 0.0)])  # overlap
    with pytest.raises(ParseError):
        FilterSpec([(1.0, 0.5, 1.0)])  # a > b
    with pytest.raises(ParseError):
        FilterSpec([(0.0, 1.0, -2.0)])  # negative gain
    with pytest.raises(ParseError):
        FilterSpec([], mask=[0.5, 1.2])  # mask out of range
    spec = FilterSpec([(2.0, 3.0, 0.0)])
    assert spec.gain_at(np.array([1.0, 2.5, 4.0])) == pytest.approx([1.0, 0.0, 1.0])


def test_filter_json_round_trip():
    spec = FilterSpec([(0.5, 1.0, 0.0), (2.0, 3.0, 1.8)], mask=[0.0, 0.5, 1.0])
    text = spec.to_json()
    again = FilterSpec.from_json(text)
    assert again.bands == spec.bands
    assert np.array_equal(again.mask, spec.mask)
    assert again.to_json() == text
    with pytest.raises(ParseError):
        FilterSpec.from_json("{not json")
    with pytest.raises(ParseError):
        FilterSpec.from_json('{"bands": [{"a": 0}]}')


def test_detail_transfer_empty_band(cap_dec):
    chi, dec = cap_dec
    mapping = CorrespondenceMap.identity(dec.n_elements)
    out = detail_transfer(dec, dec, (5.0, 4.0), mapping)
    assert np.array_equal(out, reconstruct(dec, None))


def test_detail_transfer_full_band_onto_flat_target(cap_dec, ico3_ops, ico3):
    chi, dec = cap_dec
    flat = np.zeros(ico3.n_vertices)
    cfg = tight_cfg(ico3_ops, "vertices")
    target = decompose_forward(flat, ScheduleConfig(alpha_max=1.0, decay=0.9),
                               ico3_ops, "vertices", solver_cfg=cfg)
    mapping = CorrespondenceMap.identity(dec.n_elements)
    out = detail_transfer(dec, target, (0.0, float(dec.times[-1]) + 1.0), mapping)
    # telescoping: target + sum of all weighted source components
    expected = reconstruct(target, None) + (reconstruct(dec, None) - dec.mean_part - dec.residual)
    assert np.abs(out - expected).max() <= 1e-12
    # approximately the source minus its mean
    approx = chi[:, None] - dec.mean_part
    assert np.linalg.norm(out - approx) <= 1e-4 * np.linalg.norm(chi)


def test_detail_transfer_high_band_bookkeeping(ico3, ico3_ops):
    rng = np.random.default_rng(2)
    bump = shapes.geodesic_cap_indicator(ico3.vertices, (0, 0, 1), 0.25) \
        + shapes.geodesic_cap_indicator(ico3.vertices, (1, 0, 0), 0.25)
    smooth = ico3.vertices[:, 2]
    cfg = tight_cfg(ico3_ops, "vertices")
    src = decompose_forward(bump, ScheduleConfig(alpha_max=0.5, decay=0.8),
                            ico3_ops, "vertices", solver_cfg=cfg)
    tgt = decompose_forward(smooth, ScheduleConfig(alpha_max=0.5, decay=0.8),
                            ico3_ops, "vertices", solver_cfg=cfg)
    band = (0.05, 0.3)
    mapping = CorrespondenceMap.identity(src.n_elements)
    out = detail_transfer(src, tgt, band, mapping)
    target_sig = reconstruct(tgt, None)
    select = (src.times >= band[0]) & (src.times <= band[1])
    added = np.tensordot(src.weights()[select], src.components[select], axes=(0, 0))
    # the transfer changes the target exactly by the selected band
    assert np.abs((out - target_sig) - added).max() <= 1e-3
    # and injecting detail raises the TV of the result
    assert tv_energy(ico3_ops, "vertices", out) > tv_energy(ico3_ops, "vertices", target_sig)


def test_detail_transfer_errors(cap_dec, ico2_ops, ico2):
    chi, dec = cap_dec
    other = decompose_forward(
        np.stack([np.zeros(ico2.n_vertices)] * 2, axis=1),
        ScheduleConfig(alpha_max=1.0), ico2_ops, "vertices",
    )
    with pytest.raises(ChannelMismatchError):
        detail_transfer(dec, other, (0.0, 1.0), CorrespondenceMap.identity(other.n_elements))
    with pytest.raises(MapOutOfRangeError):
        detail_transfer(dec, dec, (0.0, 1.0), CorrespondenceMap.identity(dec.n_elements + 5))
    bad = CorrespondenceMap(np.full(dec.n_elements, dec.n_elements + 7))
    with pytest.raises(MapOutOfRangeError):
        detail_transfer(dec, dec, (0.0, 1.0), bad)


def test_correspondence_file_round_trip(tmp_path):
    mapping = CorrespondenceMap([3, 1, 2, 0])
    path = tmp_path / "map.txt"
    mapping.to_file(str(path))
    again = CorrespondenceMap.from_file(str(path))
    assert np.array_equal(again.preimage, mapping.preimage)

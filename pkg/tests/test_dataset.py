import numpy as np
import pytest

from sits.dataset import (
    DatasetError,
    DuplicatePixelError,
    EmptyDatasetError,
    MalformedHeaderError,
    NonMonotoneDaysError,
    PlotLabelError,
    SitsDataset,
    SynthConfig,
    TABLE1_PLOTS,
    TimeGrid,
    UnknownClassError,
    dataset_summary,
    generate_synthetic,
    load_dataset,
    phenology_signal,
    table1_config,
    write_dataset,
)

SMALL = """#classes=oak,pine
#bands=2
#days=0,10,20
1,7,oak,0.1,0.2,0.3,0.4,0.5,0.6,1,0,1
2,7,oak,0.15,0.25,0.35,0.45,0.55,0.65,1,1,1
"""


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def small_config(**kw):
    args = dict(
        plots_per_class=[3, 2],
        base=[[0.1, 0.2], [0.3, 0.1]],
        amp=[[0.2, 0.1], [0.0, 0.3]],
        sos=[100, 120],
        eos=[280, 300],
        k_up=0.1,
        k_down=0.08,
        pixels_per_plot=(2, 4),
        grid=TimeGrid(n_steps=10, n_bands=2, step_days=20),
        span_days=200,
        revisit_days=10,
        seed=3,
    )
    args.update(kw)
    return SynthConfig(**args)


def test_load_small_file(tmp_path):
    ds = load_dataset(write(tmp_path, SMALL))
    assert ds.n_pixels == 2
    assert ds.class_names == ("oak", "pine")
    assert ds.days.tolist() == [0, 10, 20]
    assert ds.values[0].tolist() == [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]]
    assert ds.valid[0].tolist() == [True, False, True]
    assert ds.pixel_ids.tolist() == [1, 2]
    assert [p.plot_id for p in ds.plots()] == [7]


def test_empty_pixel_section(tmp_path):
    text = "\n".join(SMALL.splitlines()[:3]) + "\n"
    with pytest.raises(EmptyDatasetError, match="no pixels"):
        load_dataset(write(tmp_path, text))


@pytest.mark.parametrize(
    "edit, err, line",
    [
        (lambda s: s.replace("#days=0,10,20", "#days=0,20,10"), NonMonotoneDaysError, 3),
        (lambda s: s.replace("2,7,oak", "2,7,elm"), UnknownClassError, 5),
        (lambda s: s.replace("2,7,oak", "1,7,oak"), DuplicatePixelError, 5),
        (lambda s: s.replace("#bands=2", "#bands=two"), MalformedHeaderError, 2),
        (lambda s: s.replace("2,7,oak", "2,7,pine"), PlotLabelError, 5),
    ],
)
def test_parse_errors_name_line(tmp_path, edit, err, line):
    with pytest.raises(err) as info:
        load_dataset(write(tmp_path, edit(SMALL)))
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_round_trip_and_deterministic_bytes(tmp_path):
    ds = generate_synthetic(small_config())
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_dataset(ds, a)
    write_dataset(ds, b)
    assert a.read_bytes() == b.read_bytes()
    assert load_dataset(a) == ds


def test_zero_classes_rejected(tmp_path):
    ds = generate_synthetic(small_config())
    with pytest.raises(DatasetError):
        bad = SitsDataset(ds.grid, (), ds.days, ds.pixel_ids, ds.plot_ids, ds.labels, ds.values, ds.valid)
        write_dataset(bad, tmp_path / "x.csv")


def test_unwritable_path(tmp_path):
    ds = generate_synthetic(small_config())
    with pytest.raises(DatasetError):
        write_dataset(ds, tmp_path / "missing" / "dir" / "x.csv")


def test_generator_is_pure_function_of_config():
    assert generate_synthetic(small_config()) == generate_synthetic(small_config())
    assert not generate_synthetic(small_config()) == generate_synthetic(small_config(seed=4))


def test_generator_noiseless_signal_matches_double_logistic():
    cfg = small_config(noise_std=0.0, gap_prob=0.0)
    ds = generate_synthetic(cfg)
    t = ds.days % cfg.season_length
    sig = lambda z: 1.0 / (1.0 + np.exp(-z))
    for i in range(ds.n_pixels):
        c = ds.labels[i]
        ramp = sig(cfg.k_up[c] * (t - cfg.sos[c])) - sig(cfg.k_down[c] * (t - cfg.eos[c]))
        expect = cfg.base[c][:, None] + cfg.amp[c][:, None] * ramp
        np.testing.assert_allclose(ds.values[i], expect, rtol=0, atol=1e-14)
    assert ds.valid.all()


def test_plot_counts_exact_and_shares():
    cfg = small_config(plots_per_class=[730, 270], pixels_per_plot=(1, 2), span_days=40)
    summary = dataset_summary(generate_synthetic(cfg))
    # brute-force plot counting
    ds = generate_synthetic(cfg)
    seen = {}
    for plot, lab in zip(ds.plot_ids, ds.labels):
        seen[int(plot)] = int(lab)
    counts = [sum(1 for v in seen.values() if v == c) for c in range(2)]
    assert counts == [730, 270]
    assert summary.plot_counts.tolist() == counts
    np.testing.assert_allclose(summary.plot_shares, [0.73, 0.27], atol=1e-12)


def test_noiseless_disjoint_amplitudes_separable_mid_season():
    cfg = small_config(noise_std=0.0, gap_prob=0.0, base=0.1, amp=[[0.1, 0.1], [0.4, 0.4]], sos=100, eos=280)
    ds = generate_synthetic(cfg)
    mid = np.argmin(np.abs(ds.days - 190))
    v0 = ds.values[ds.labels == 0][:, 0, mid]
    v1 = ds.values[ds.labels == 1][:, 0, mid]
    assert v0.max() < v1.min()


def test_summary_counts_match_naive_iteration():
    ds = generate_synthetic(table1_config(scale=0.05, seed=1, grid=TimeGrid(n_steps=5, step_days=100)))
    s = dataset_summary(ds)
    px = [0] * ds.n_classes
    for lab in ds.labels:
        px[int(lab)] += 1
    assert s.pixel_counts.tolist() == px
    assert s.n_pixels == ds.n_pixels
    assert abs(s.plot_shares.sum() - 1.0) < 1e-12
    assert abs(s.pixel_shares.sum() - 1.0) < 1e-12
    sizes = np.unique(ds.plot_ids, return_counts=True)[1]
    assert (s.plot_size_min, s.plot_size_max) == (sizes.min(), sizes.max())


def test_table1_oak_share():
    cfg = table1_config(scale=1.0)
    assert cfg.plots_per_class == TABLE1_PLOTS
    oak = cfg.class_names.index("oak")
    share = cfg.plots_per_class[oak] / sum(cfg.plots_per_class)
    assert abs(share - 3219 / 4388) < 1e-12
    assert round(share, 3) == 0.734


def test_single_class_share_is_one():
    cfg = small_config(plots_per_class=[4], base=[[0.1, 0.2]], amp=[[0.1, 0.1]], sos=100, eos=280)
    s = dataset_summary(generate_synthetic(cfg))
    assert s.plot_shares.tolist() == [1.0]


def test_conifer_profiles_nearly_flat():
    cfg = table1_config()
    pine = cfg.class_names.index("pine")
    oak = cfg.class_names.index("oak")
    days = np.arange(0, 365, 5)
    swing = lambda c: np.ptp(phenology_signal(cfg, c, days), axis=1)
    assert np.all(swing(pine) <= 0.2 * swing(oak))
    assert swing(pine).max() < 0.2 * swing(oak).max()


def test_invalid_config():
    with pytest.raises(ValueError):
        small_config(gap_prob=1.0)
    with pytest.raises(ValueError):
        small_config(plots_per_class=[0, 2])
    with pytest.raises(ValueError):
        small_config(noise_std=-1)

"""Tests for feature extraction, ANOVA selection, balancing, splits and containers."""

import json
import struct
import zlib

import numpy as np
import pytest

from tsagent.dataset import (
    STATISTICS,
    assemble,
    balance_indices,
    extract_features,
    feature_names,
    read_container,
    read_dataset,
    read_trajectories,
    select_features,
    split,
    write_dataset,
    write_trajectories,
)
from tsagent.dataset.container import CONTAINER_VERSION, MAGIC, decode_container, encode_container
from tsagent.dataset.selection import anova_scores
from tsagent.errors import ChecksumError, ContainerError, ContainerVersionError, DatasetError, TruncatedContainerError
from tsagent.models.dataset import Dataset, FeatureVector, LabeledSample
from tsagent.models.scenario import Scenario, Trajectory


def _traj(n_points=11, scenario=None):
    t = np.linspace(0.0, 1.0, n_points)
    delta = np.vstack([np.sin(t), -np.sin(t)])
    return Trajectory(
        t=t, delta=delta, omega=np.zeros((2, n_points)), v_mag=np.vstack([np.ones(n_points), 0.9 + 0.1 * t]),
        f_coi=np.full(n_points, 50.0), converged=True, gen_ids=(1, 2), bus_ids=(10, 20),
        inertia=np.array([1.0, 1.0]), f0=50.0, scenario=scenario, case_name='toy',
    )


def _samples(labels, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    names = tuple(f"f{i}" for i in range(dim))
    out = []
    for k, label in enumerate(labels):
        values = rng.normal(size=dim) + label
        out.append(LabeledSample(FeatureVector(values, 'statistical', names), int(label), f"s{k:03d}"))
    return out


def _dataset(labels, dim=4, seed=0, n_classes=2):
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    x = rng.normal(size=(labels.size, dim)) + labels[:, None]
    return Dataset(x, labels, n_classes, tuple(f"f{i}" for i in range(dim)),
                   {'sample_ids': [f"s{k}" for k in range(labels.size)]})


class TestFeatures:
    def test_statistical_layout(self):
        fv = extract_features(_traj())
        # 2 angles, 2 speeds, 2 voltages, 1 frequency
        assert fv.dim == 7 * len(STATISTICS)
        assert fv.names[0] == 'delta_g1.mean'
        assert fv.names[-1] == 'f_coi.max_step'

    def test_statistics_values(self):
        fv = extract_features(_traj())
        values = dict(zip(fv.names, fv.values))
        assert values['v_bus20.min'] == pytest.approx(0.9)
        assert values['v_bus20.final'] == pytest.approx(1.0)
        assert values['v_bus20.max_step'] == pytest.approx(0.01)
        assert values['f_coi.std'] == pytest.approx(0.0)
        # equal inertia: angles are symmetric about the COI
        assert values['delta_g1.mean'] == pytest.approx(-values['delta_g2.mean'])

    def test_flat_timeseries(self):
        fv = extract_features(_traj(n_points=11), 'flat_timeseries')
        assert fv.dim == 7 * 11
        assert fv.names[11] == 'delta_g2@0'

    def test_names_depend_only_on_ids(self):
        assert feature_names((1, 2), (10, 20), 'statistical') == extract_features(_traj()).names

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            feature_names((1,), (1,), 'fourier')

    def test_feature_vector_rejects_nan(self):
        with pytest.raises(ValueError):
            FeatureVector(np.array([np.nan]), 'statistical', ('a',))


class TestSelection:
    def test_scores_match_direct_formula(self):
        x = np.array([[1.0, 5.0, 0.0, 2.0],
                      [2.0, 5.5, 1.0, 2.1],
                      [3.0, 4.5, 0.0, 1.9],
                      [7.0, 5.2, 1.0, 4.0],
                      [8.0, 4.8, 0.0, 4.2],
                      [9.0, 5.1, 1.0, 3.8]])
        y = np.array([0, 0, 0, 1, 1, 1])
        expected = []
        for col in x.T:
            groups = [col[y == c] for c in (0, 1)]
            grand = col.mean()
            between = sum(g.size * (g.mean() - grand) ** 2 for g in groups) / (2 - 1)
            within = sum(((g - g.mean()) ** 2).sum() for g in groups) / (col.size - 2)
            expected.append(between / within)
        np.testing.assert_allclose(anova_scores(x, y), expected, rtol=1e-10)
        assert select_features(x, y, 2) == [0, 3]

    def test_constant_columns_dropped(self):
        x = np.array([[1.0, 3.0], [1.0, 4.0], [1.0, 8.0], [1.0, 9.0]])
        y = np.array([0, 0, 1, 1])
        assert select_features(x, y, 1) == [1]
        with pytest.raises(DatasetError, match='non-constant'):
            select_features(x, y, 2)

    def test_requires_two_samples_per_class(self):
        with pytest.raises(DatasetError, match='fewer than 2'):
            select_features(np.arange(6.0).reshape(3, 2), np.array([0, 0, 1]), 1)

    def test_ties_go_to_lower_index(self):
        x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [0.1, 0.1], [0.9, 0.9]])
        y = np.array([0, 0, 1, 1, 0, 1])
        assert select_features(x, y, 1) == [0]


class TestBalance:
    def test_already_balanced_keeps_everything(self):
        y = np.array([0] * 50 + [1] * 52)
        assert balance_indices(y, 0.5, seed=1).tolist() == list(range(102))

    def test_undersamples_majority_stable(self):
        y = np.array([0] * 300 + [1] * 100)
        keep = balance_indices(y, 0.5, seed=3)
        kept = y[keep]
        assert abs((kept == 0).mean() - 0.5) <= 0.05
        assert (kept == 1).sum() == 100

    def test_unstable_classes_thinned_proportionally(self):
        y = np.array([0] * 40 + [1] * 60 + [2] * 30 + [3] * 30)
        keep = balance_indices(y, 0.5, seed=0)
        counts = np.bincount(y[keep], minlength=4)
        assert counts[0] == 40
        assert counts[1:].sum() == 40
        assert counts[1] == 20

    def test_deterministic(self):
        y = np.array([0] * 300 + [1] * 100)
        assert np.array_equal(balance_indices(y, 0.5, seed=9), balance_indices(y, 0.5, seed=9))

    def test_missing_class(self):
        with pytest.raises(DatasetError, match='no unstable'):
            balance_indices(np.zeros(10, dtype=int), 0.5, seed=0)

    def test_assemble_keeps_order_and_metadata(self):
        samples = _samples([0] * 30 + [1] * 10)
        ds = assemble(samples, 0.5, seed=2, metadata={'case': 'toy'})
        ids = ds.metadata['sample_ids']
        assert ids == sorted(ids)
        assert ds.metadata['class_counts_before'] == [30, 10]
        assert ds.metadata['class_counts'] == ds.class_counts() == [10, 10]
        assert ds.metadata['case'] == 'toy'

    def test_assemble_rejects_mixed_layouts(self):
        samples = _samples([0, 1])
        other = LabeledSample(FeatureVector(np.zeros(2), 'statistical', ('a', 'b')), 1, 'odd')
        with pytest.raises(DatasetError, match='different feature layout'):
            assemble(samples + [other], 0.5, seed=0)


class TestSplit:
    def test_stratified_and_disjoint(self):
        ds = _dataset([0] * 50 + [1] * 50)
        train, val, test = split(ds, seed=4)
        assert (len(train), len(val), len(test)) == (60, 20, 20)
        for part in (train, val, test):
            counts = part.class_counts()
            assert counts[0] == counts[1]
        ids = [set(part.metadata['sample_ids']) for part in (train, val, test)]
        assert not ids[0] & ids[1] and not ids[0] & ids[2] and not ids[1] & ids[2]
        assert test.metadata['split'] == 'test'
        assert test.metadata['split_seed'] == 4

    def test_same_seed_same_split(self):
        ds = _dataset([0] * 20 + [1] * 20)
        a = split(ds, seed=11)[2].metadata['sample_ids']
        b = split(ds, seed=11)[2].metadata['sample_ids']
        c = split(ds, seed=12)[2].metadata['sample_ids']
        assert a == b
        assert a != c

    def test_too_few_samples_for_every_split(self):
        with pytest.raises(DatasetError, match='too few'):
            split(_dataset([0] * 10 + [1] * 2), seed=0)

    def test_bad_fractions(self):
        with pytest.raises(DatasetError):
            split(_dataset([0] * 10 + [1] * 10), fractions=(0.5, 0.5, 0.5))

    def test_select_columns_records_metadata(self):
        ds = _dataset([0] * 5 + [1] * 5, dim=5).select_columns([1, 3])
        assert ds.names == ('f1', 'f3')
        assert ds.metadata['raw_dim'] == 5


class TestContainer:
    def test_dataset_file(self, tmp_path):
        ds = _dataset([0] * 6 + [1] * 6)
        path = write_dataset(ds, tmp_path / 'data.tsds')
        loaded = read_dataset(path)
        np.testing.assert_array_equal(loaded.x, ds.x)
        np.testing.assert_array_equal(loaded.y, ds.y)
        assert loaded.names == ds.names
        assert loaded.metadata['sample_ids'] == ds.metadata['sample_ids']

    @pytest.mark.parametrize('seed', range(100))
    def test_random_containers_round_trip_and_detect_any_flipped_byte(self, seed):
        rng = np.random.default_rng(seed)
        rows, cols = int(rng.integers(1, 12)), int(rng.integers(1, 6))
        x = rng.normal(scale=10.0, size=(rows, cols)).astype('<f4')
        y = rng.integers(-2**31, 2**31 - 1, size=rows, dtype=np.int64).astype('<i4')
        header = {'names': [f"c{k}" for k in range(cols)], 'seed': seed}
        data = encode_container('dataset', [('x', x), ('y', y)], header)

        manifest, arrays = decode_container(data, 'dataset')
        assert manifest['names'] == header['names']
        for name, original in (('x', x), ('y', y)):
            assert arrays[name].dtype == original.dtype
            assert arrays[name].shape == original.shape
            assert arrays[name].tobytes() == original.tobytes()
        assert encode_container('dataset', [('x', arrays['x']), ('y', arrays['y'])], header) == data

        for k in range(len(data)):
            corrupted = bytearray(data)
            corrupted[k] ^= 0x5A
            with pytest.raises(ContainerError):
                decode_container(bytes(corrupted), 'dataset')

    def test_dataset_file_is_bit_exact(self, tmp_path):
        ds = _dataset([0] * 7 + [1] * 5, dim=3, seed=11)
        loaded = read_dataset(write_dataset(ds, tmp_path / 'exact.tsds'))
        assert loaded.x.astype('<f4').tobytes() == ds.x.astype('<f4').tobytes()
        assert loaded.y.astype('<i4').tobytes() == ds.y.astype('<i4').tobytes()

    def test_payload_corruption_detected(self):
        data = bytearray(encode_container('dataset', [('x', np.arange(4, dtype='<f4'))], {}))
        data[-1] ^= 0xFF
        with pytest.raises(ChecksumError, match="payload 'x'"):
            decode_container(bytes(data))

    def test_manifest_corruption_detected(self):
        data = bytearray(encode_container('dataset', [('x', np.arange(4, dtype='<f4'))], {}))
        data[len(MAGIC) + 8] ^= 0x01
        with pytest.raises(ChecksumError, match='manifest'):
            decode_container(bytes(data))

    def test_truncated(self):
        data = encode_container('dataset', [('x', np.arange(4, dtype='<f4'))], {})
        with pytest.raises(TruncatedContainerError):
            decode_container(data[:-3])
        with pytest.raises(TruncatedContainerError):
            decode_container(data[:5])

    def test_trailing_bytes(self):
        data = encode_container('dataset', [('x', np.arange(4, dtype='<f4'))], {})
        with pytest.raises(ChecksumError, match='trailing'):
            decode_container(data + b'\x00')

    def test_bad_magic_and_kind(self):
        data = encode_container('weights', [], {})
        with pytest.raises(ContainerError, match='bad magic'):
            decode_container(b'XXXX' + data[4:])
        with pytest.raises(ContainerError, match="expected a 'dataset'"):
            decode_container(data, 'dataset')

    def test_future_version_rejected(self):
        manifest = json.dumps({'version': CONTAINER_VERSION + 1, 'kind': 'dataset', 'payloads': []}).encode()
        data = MAGIC + struct.pack('<II', len(manifest), zlib.crc32(manifest)) + manifest
        with pytest.raises(ContainerVersionError):
            decode_container(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ContainerError, match='no such container'):
            read_dataset(tmp_path / 'missing.tsds')

    def test_trajectory_file_with_labels(self, tmp_path):
        scenario = Scenario(fault_kind='three_phase', location=10, t_clear=1.1, id='s01')
        trajs = [_traj(scenario=scenario), _traj(n_points=21)]
        labels = [{'binary': 'stable', 'multiclass': 0, 'violated': {}}]
        path = write_trajectories(trajs, tmp_path / 'runs.tstr', labels)
        loaded = read_trajectories(path)
        assert len(loaded) == 2
        assert loaded[0].scenario == scenario
        assert loaded[1].scenario is None
        assert loaded[1].n_points == 21
        np.testing.assert_array_equal(loaded[0].v_mag, trajs[0].v_mag)
        header, _ = read_container(path, 'trajectories')
        assert header['records'][0]['label'] == labels[0]
        assert 'label' not in header['records'][1]

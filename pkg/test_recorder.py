"""
记录器测试
"""

from collections import deque

import numpy as np
import pytest

from src.core import autodiff as ad
from src.core.autodiff import Parameter, Tape
from src.core.posterior import classification_loss, posterior_mc
from src.core.prob_core import LatentParams
from src.core.recorder import Recorder, RecordEntry, RecordSnapshot


def _entry(value, classes=2):
    return RecordEntry(np.eye(classes)[0], np.array([float(value)]), np.array([1.0]))


class TestRecorder:

    def test_keeps_last_t_in_order(self):
        recorder = Recorder(3)
        for value in range(5):
            recorder.push(_entry(value))
        np.testing.assert_array_equal(recorder.snapshot().mu[:, 0], [2.0, 3.0, 4.0])

    def test_capacity_one(self):
        recorder = Recorder(1)
        recorder.push(_entry(1.0)).push(_entry(2.0))
        np.testing.assert_array_equal(recorder.snapshot().mu[:, 0], [2.0])

    def test_fewer_than_capacity(self):
        recorder = Recorder(10)
        for value in range(4):
            recorder.push(_entry(value))
        assert len(recorder.snapshot()) == 4

    def test_batch_larger_than_capacity(self):
        recorder = Recorder(3)
        mu = np.arange(5.0)[:, None]
        recorder.push_batch(np.ones((5, 1)), mu, np.ones((5, 1)))
        np.testing.assert_array_equal(recorder.snapshot().mu[:, 0], [2.0, 3.0, 4.0])

    def test_fifo_law(self, rng):
        for _ in range(1000):
            capacity = int(rng.integers(1, 8))
            recorder = Recorder(capacity)
            expected = deque(maxlen=capacity)
            for _ in range(int(rng.integers(1, 5))):
                size = int(rng.integers(1, 6))
                mu = rng.normal(size=(size, 1))
                recorder.push_batch(np.ones((size, 1)), mu, np.ones((size, 1)))
                expected.extend(mu[:, 0])
            np.testing.assert_array_equal(recorder.snapshot().mu[:, 0], list(expected))

    def test_snapshot_is_isolated(self):
        recorder = Recorder(3)
        recorder.push(_entry(1.0))
        snapshot = recorder.snapshot()
        recorder.push(_entry(2.0))
        assert len(snapshot) == 1
        with pytest.raises(ValueError):
            snapshot.mu[0, 0] = 5.0

    def test_records_are_detached(self):
        param = Parameter(np.array([[0.3]]))
        sigma = np.ones((1, 1))
        target = np.array([[1.0, 0.0]])
        noise = np.zeros((1, 1))

        def loss_at(theta_mu, records):
            return classification_loss(posterior_mc(LatentParams(theta_mu, sigma), records, 1, 0.0, noise), target)

        tape = Tape()
        mu = tape.param(param)
        recorder = Recorder(4)
        recorder.push_batch(np.array([[0.0, 1.0]]), np.array([[-1.0]]), sigma)
        recorder.push_batch(target, mu, sigma)
        window = recorder.snapshot()
        assert window.mu[1, 0] == 0.3

        loss = loss_at(mu, window)
        gradients = tape.backward(loss)
        assert not any(np.shares_memory(node.value, window.mu) for node in tape.nodes)

        # 存储的 μ 参与损失
        moved = RecordSnapshot(window.targets, window.mu + np.array([[0.0], [0.5]]), window.sigma)
        assert abs(float(loss_at(np.array([[0.3]]), moved)) - float(ad.value_of(loss))) > 1e-6

        # 梯度只经过 θₜ，记录保持在 0.3 不动
        h = 1e-6
        numeric = (float(loss_at(np.array([[0.3 + h]]), window)) -
                   float(loss_at(np.array([[0.3 - h]]), window))) / (2 * h)
        assert numeric != 0.0
        assert gradients[param][0, 0] == pytest.approx(numeric, rel=1e-5)

    def test_empty_snapshot_rejected(self):
        with pytest.raises(ValueError):
            Recorder(3).snapshot()

    def test_invalid_records(self):
        recorder = Recorder(3)
        with pytest.raises(ValueError):
            recorder.push_batch(np.array([[1.5]]), np.zeros((1, 1)), np.ones((1, 1)))
        with pytest.raises(ValueError):
            recorder.push_batch(np.array([[1.0]]), np.zeros((1, 1)), np.zeros((1, 1)))
        recorder.push_batch(np.array([[1.0]]), np.zeros((1, 1)), np.ones((1, 1)))
        with pytest.raises(ValueError):
            recorder.push_batch(np.array([[1.0, 0.0]]), np.zeros((1, 1)), np.ones((1, 1)))

    def test_invalid_capacity(self):
        with pytest.raises(ValueError):
            Recorder(0)


class TestPixels:

    def test_pixel_view(self):
        recorder = Recorder(4, track_pixels=True)
        pixels = np.array([[0.1, 0.9], [0.4, 0.6]])
        recorder.push_batch(np.eye(2), np.zeros((2, 1)), np.ones((2, 1)), pixels=pixels)
        view = recorder.snapshot().pixel_view()
        np.testing.assert_allclose(view.targets, pixels)
        assert view.num_targets == 2

    def test_snapshot_without_pixels(self):
        recorder = Recorder(4, track_pixels=True)
        recorder.push_batch(np.eye(2), np.zeros((2, 1)), np.ones((2, 1)), pixels=np.full((2, 3), 0.5))
        assert recorder.snapshot(with_pixels=False).pixels is None
        assert recorder.snapshot().pixels.shape == (2, 3)

    def test_missing_pixels_rejected(self):
        recorder = Recorder(4, track_pixels=True)
        with pytest.raises(ValueError):
            recorder.push_batch(np.eye(2), np.zeros((2, 1)), np.ones((2, 1)))

    def test_no_pixels_in_snapshot(self, small_snapshot):
        with pytest.raises(ValueError):
            small_snapshot.pixel_view()

    def test_entries_round_trip(self, small_snapshot):
        snap = small_snapshot
        entries = [RecordEntry(t, m, s) for t, m, s in zip(snap.targets, snap.mu, snap.sigma)]
        rebuilt = RecordSnapshot.from_entries(entries)
        np.testing.assert_array_equal(rebuilt.mu, small_snapshot.mu)
        np.testing.assert_array_equal(rebuilt.targets, small_snapshot.targets)

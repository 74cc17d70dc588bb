"""Stiffness sampling and dataset round trips (episode-free paths)."""

import numpy as np
import pytest

from softgrip.datagen import (
    DatasetRecord,
    read_dataset,
    sample_stiffness,
    write_dataset,
)
from softgrip.fem.materials import E_MAX, E_MIN


class TestStiffnessSampling:
    def test_range_over_many_draws(self):
        ks = np.array([sample_stiffness(s) for s in range(10000)])
        assert ks.min() >= E_MIN
        assert ks.max() <= E_MAX

    def test_deterministic(self):
        assert np.array_equal(sample_stiffness(42), sample_stiffness(42))

    def test_log_uniform_median(self):
        ks = np.array([sample_stiffness(s) for s in range(10000)])
        median = np.median(ks, axis=0)
        expected = np.sqrt(E_MIN * E_MAX)
        # per-coordinate medians concentrate near the geometric midpoint
        assert np.abs(np.log(median / expected)).max() < 0.12

    def test_uniform_distribution_supported(self):
        ks = np.array([sample_stiffness(s, "uniform") for s in range(5000)])
        mean = ks.mean()
        assert abs(mean - 0.5 * (E_MIN + E_MAX)) < 0.03 * (E_MAX - E_MIN)

    def test_unknown_distribution_rejected(self):
        with pytest.raises(ValueError):
            sample_stiffness(0, "triangular")


def _record(rng, c_g=0):
    return DatasetRecord(
        object_id="sphere0-d8", density=8.0,
        cloud=rng.normal(size=(16, 3)) * 0.02,
        com=rng.normal(size=3) * 0.01,
        k=np.exp(rng.uniform(np.log(E_MIN), np.log(E_MAX), 22)),
        pose=rng.normal(size=8) * 0.05,
        wrench=rng.normal(size=6),
        dq=rng.normal(size=3) * 0.01,
        c_g=c_g,
    )


class TestDatasetIO:
    def test_round_trip_field_by_field(self, tmp_path, rng):
        recs = [_record(rng, c_g=i % 2) for i in range(100)]
        path = tmp_path / "d.jsonl"
        write_dataset(recs, path)
        back = read_dataset(path)
        assert len(back) == 100
        for a, b in zip(recs, back):
            assert a.object_id == b.object_id
            assert np.array_equal(a.cloud, b.cloud)
            assert np.array_equal(a.k, b.k)
            assert np.array_equal(a.wrench, b.wrench)
            assert a.c_g == b.c_g

    def test_truncated_line_reports_lineno(self, tmp_path, rng):
        path = tmp_path / "d.jsonl"
        write_dataset([_record(rng), _record(rng)], path)
        content = path.read_text().splitlines()
        content[1] = content[1][:40]
        path.write_text("\n".join(content) + "\n")
        with pytest.raises(ValueError, match="line 2"):
            read_dataset(path)

    def test_empty_file_ok(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("")
        assert read_dataset(path) == []

    def test_invariants_enforced_on_read(self, tmp_path, rng):
        rec = _record(rng)
        rec.k = rec.k.copy()
        rec.k[0] = 99e6  # out of range
        path = tmp_path / "d.jsonl"
        with open(path, "w") as fh:
            fh.write(rec.to_json() + "\n")
        with pytest.raises(ValueError):
            read_dataset(path)

    def test_byte_identical_rewrite(self, tmp_path, rng):
        recs = [_record(rng) for _ in range(10)]
        p1 = tmp_path / "a.jsonl"
        p2 = tmp_path / "b.jsonl"
        write_dataset(recs, p1)
        write_dataset(read_dataset(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

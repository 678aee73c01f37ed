import numpy as np
import pytest

from seqssm.datasets import (FhnConfig, SequenceCsvSchema, SequenceSample,
                             adding_problem_generate, fhn_equilibria,
                             fhn_generate, fhn_integrate, fhn_rhs,
                             fhn_rk4_step, load_sequence_csv,
                             load_sequence_csv_file, write_sequence_csv,
                             write_splits_csv)
from seqssm.errors import ArgumentError, IngestionError, ShapeError


class TestSample:
    def test_rejects_one_dimensional_inputs(self):
        with pytest.raises(ShapeError):
            SequenceSample(inputs=np.zeros(5), target=None)

    def test_rejects_non_finite(self):
        bad = np.zeros((3, 1)); bad[1, 0] = np.inf
        with pytest.raises(ShapeError):
            SequenceSample(inputs=bad, target=None)

    def test_rejects_non_monotone_timestamps(self):
        with pytest.raises(ShapeError, match="increasing"):
            SequenceSample(inputs=np.zeros((3, 1)), target=None,
                           timestamps=np.array([1.0, 3.0, 2.0]))

    def test_first_gap_measured_from_zero(self):
        s = SequenceSample(inputs=np.zeros((3, 1)), target=None,
                           timestamps=np.array([0.25, 1.0, 1.5]))
        assert s.dts().tolist() == [0.25, 0.75, 0.5]

    def test_plain_sample_has_no_gaps(self):
        s = SequenceSample(inputs=np.zeros((3, 1)), target=None)
        assert s.dts() is None


class TestFhnDynamics:
    def test_rhs_hand_value(self):
        cfg = FhnConfig()
        dv, dw = fhn_rhs(np.array([1.0, 0.5]), cfg)
        assert dv == pytest.approx(1.0 - 1.0 / 3.0 - 0.5 + 0.5, rel=1e-15)
        assert dw == pytest.approx(0.01 * (1.0 + 0.7 - 0.8 * 0.5), rel=1e-15)

    def test_equilibrium_is_a_fixed_point(self):
        """With no drive the system has a stable rest state; starting there
        the integrator must stay put."""
        cfg = FhnConfig(i_ext=0.0)
        eqs = [e for e in fhn_equilibria(cfg) if e[2]]
        assert eqs, "expected a stable equilibrium at zero drive"
        v, w, _ = eqs[0]
        state = np.array([v, w])
        assert np.max(np.abs(fhn_rhs(state, cfg))) <= 1e-12
        final = fhn_integrate(state, 500, 0.04, cfg)
        assert np.max(np.abs(final - state)) <= 1e-9

    def test_equilibrium_solves_nullclines(self):
        cfg = FhnConfig()
        for v, w, _ in fhn_equilibria(cfg):
            assert v - v ** 3 / 3.0 - w + cfg.i_ext == pytest.approx(0.0, abs=1e-12)
            assert v + cfg.a - cfg.b * w == pytest.approx(0.0, abs=1e-12)

    def test_rk4_is_fourth_order(self):
        """Halving the step should cut the endpoint error about sixteenfold."""
        cfg = FhnConfig()
        start = np.array([0.0, 0.0])
        ref = fhn_integrate(start, 1600, 2.0 / 1600, cfg)
        errs = []
        for n in (20, 40):
            end = fhn_integrate(start, n, 2.0 / n, cfg)
            errs.append(np.max(np.abs(end - ref)))
        ratio = errs[0] / errs[1]
        assert 12.0 <= ratio <= 20.0

    def test_single_step_matches_classical_tableau(self):
        """One RK4 step recomputed by hand from the four stage slopes."""
        cfg = FhnConfig()
        y = np.array([0.3, -0.2])
        dt = 0.1
        k1 = fhn_rhs(y, cfg)
        k2 = fhn_rhs(y + 0.5 * dt * k1, cfg)
        k3 = fhn_rhs(y + 0.5 * dt * k2, cfg)
        k4 = fhn_rhs(y + dt * k3, cfg)
        expect = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        assert np.array_equal(fhn_rk4_step(y, dt, cfg), expect)


class TestFhnDataset:
    CFG = FhnConfig(length=50, train=4, val=2, test=2)

    def test_shapes_and_split_sizes(self):
        splits = fhn_generate(self.CFG, seed=0)
        assert (len(splits.train), len(splits.val), len(splits.test)) == (4, 2, 2)
        s = splits.train[0]
        assert s.inputs.shape == (50, 1)
        assert s.target.shape == (50, 2)
        assert s.timestamps is None

    def test_input_is_fast_variable_target_is_next_state(self):
        """The input at step k+1 equals the fast component of the target at
        step k; both views come from the same trajectory."""
        splits = fhn_generate(self.CFG, seed=1)
        for s in splits.train:
            assert np.array_equal(s.inputs[1:, 0], s.target[:-1, 0])

    def test_trajectories_bounded(self):
        splits = fhn_generate(self.CFG, seed=2)
        for part in (splits.train, splits.val, splits.test):
            for s in part:
                assert np.max(np.abs(s.target)) <= 3.0

    def test_deterministic_per_seed(self):
        a = fhn_generate(self.CFG, seed=3)
        b = fhn_generate(self.CFG, seed=3)
        c = fhn_generate(self.CFG, seed=4)
        assert np.array_equal(a.train[0].inputs, b.train[0].inputs)
        assert np.array_equal(a.test[1].target, b.test[1].target)
        assert not np.array_equal(a.train[0].inputs, c.train[0].inputs)

    def test_splits_draw_independently(self):
        splits = fhn_generate(self.CFG, seed=5)
        assert not np.array_equal(splits.train[0].inputs, splits.val[0].inputs)

    def test_empty_split_count(self):
        cfg = FhnConfig(length=10, train=2, val=0, test=0)
        splits = fhn_generate(cfg, seed=0)
        assert splits.val == [] and splits.test == []

    def test_subsample_thins_a_finer_trajectory(self):
        """length N at subsample s visits the same states as length N*s at
        subsample 1, every s-th point."""
        coarse = FhnConfig(length=10, subsample=5, train=1, val=0, test=0)
        fine = FhnConfig(length=50, subsample=1, train=1, val=0, test=0)
        a = fhn_generate(coarse, seed=6).train[0]
        b = fhn_generate(fine, seed=6).train[0]
        assert np.allclose(a.target[:, 0], b.target[4::5, 0], rtol=0, atol=0)


class TestAddingProblem:
    def test_shapes_and_split_fractions(self):
        splits = adding_problem_generate(30, 100, seed=0)
        assert (len(splits.train), len(splits.val), len(splits.test)) == (80, 10, 10)
        s = splits.train[0]
        assert s.inputs.shape == (30, 2)
        assert s.target.shape == (1,)

    def test_two_distinct_markers_and_target_sum(self):
        splits = adding_problem_generate(25, 60, seed=1)
        for part in (splits.train, splits.val, splits.test):
            for s in part:
                marks = np.flatnonzero(s.inputs[:, 1])
                assert marks.size == 2
                assert np.all(s.inputs[:, 1][marks] == 1.0)
                assert s.target[0] == pytest.approx(s.inputs[marks, 0].sum(),
                                                    rel=1e-15)

    def test_values_in_unit_interval(self):
        splits = adding_problem_generate(25, 40, seed=2)
        for s in splits.train:
            assert np.all((s.inputs[:, 0] >= 0) & (s.inputs[:, 0] < 1))

    def test_mean_predictor_baseline_near_one_sixth(self):
        """Always answering 1 (the mean target) has MSE equal to the
        variance of a sum of two independent uniforms, 1/6."""
        splits = adding_problem_generate(10, 2000, seed=3)
        targets = np.array([s.target[0] for part in
                            (splits.train, splits.val, splits.test)
                            for s in part])
        mse = np.mean((targets - 1.0) ** 2)
        assert mse == pytest.approx(1.0 / 6.0, abs=0.015)

    def test_deterministic_per_seed(self):
        a = adding_problem_generate(15, 20, seed=4)
        b = adding_problem_generate(15, 20, seed=4)
        assert np.array_equal(a.train[3].inputs, b.train[3].inputs)

    def test_length_below_two_rejected(self):
        with pytest.raises(ArgumentError):
            adding_problem_generate(1, 10, seed=0)


def random_samples(schema, n, seed, T=6):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        inputs = rng.normal(size=(T, schema.features))
        ts = np.cumsum(rng.uniform(0.1, 1.0, T)) if schema.timestamps else None
        if schema.target_kind == "per_step":
            tgt = rng.normal(size=(T, schema.targets))
        elif schema.target_kind == "vector":
            tgt = rng.normal(size=schema.targets)
        else:
            tgt = int(rng.integers(0, 5))
        out.append(SequenceSample(inputs, tgt, ts))
    return out


class TestCsvRoundTrip:
    @pytest.mark.parametrize("kind,stamped", [
        ("per_step", False), ("per_step", True),
        ("vector", False), ("class", True),
    ])
    def test_exact_round_trip(self, tmp_path, kind, stamped):
        schema = SequenceCsvSchema(features=3, targets=2 if kind != "class" else 1,
                                   target_kind=kind, timestamps=stamped)
        samples = random_samples(schema, 3, seed=7)
        path = tmp_path / "data.csv"
        write_sequence_csv(path, samples, schema)
        back = load_sequence_csv_file(path, schema)
        assert len(back) == 3
        for a, b in zip(samples, back):
            assert np.array_equal(a.inputs, b.inputs)
            if kind == "class":
                assert b.target == a.target and isinstance(b.target, int)
            else:
                assert np.array_equal(np.asarray(a.target).reshape(
                    np.asarray(b.target).shape), b.target)
            if stamped:
                assert np.array_equal(a.timestamps, b.timestamps)

    def test_awkward_floats_survive(self, tmp_path):
        schema = SequenceCsvSchema(features=1, targets=1)
        vals = np.array([[1.0 / 3.0], [1e-17], [1.7976931348623157e308],
                         [5e-324], [-0.0]])
        s = SequenceSample(vals, vals * 0.5)
        path = tmp_path / "x.csv"
        write_sequence_csv(path, [s], schema)
        back = load_sequence_csv_file(path, schema)[0]
        assert back.inputs.tobytes() == vals.tobytes()

    def test_directory_round_trip(self, tmp_path):
        schema = SequenceCsvSchema(features=2, targets=1, target_kind="vector")
        from seqssm.datasets import DatasetSplits
        splits = DatasetSplits(train=random_samples(schema, 2, 1),
                               val=random_samples(schema, 1, 2),
                               test=random_samples(schema, 1, 3))
        write_splits_csv(tmp_path / "d", splits, schema)
        back = load_sequence_csv(tmp_path / "d", schema)
        assert len(back.train) == 2 and len(back.val) == 1 and len(back.test) == 1
        assert np.array_equal(back.val[0].inputs, splits.val[0].inputs)


class TestCsvErrors:
    SCHEMA = SequenceCsvSchema(features=2, targets=1)

    def write(self, tmp_path, text):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        return p

    def test_empty_file(self, tmp_path):
        p = self.write(tmp_path, "")
        with pytest.raises(IngestionError, match="empty"):
            load_sequence_csv_file(p, self.SCHEMA)

    def test_header_mismatch_names_line_one(self, tmp_path):
        p = self.write(tmp_path, "a,b,c,d\n0,1,2,3\n")
        with pytest.raises(IngestionError, match=r"bad\.csv:1"):
            load_sequence_csv_file(p, self.SCHEMA)

    def test_field_count_names_offending_line(self, tmp_path):
        p = self.write(tmp_path, "t,f1,f2,y1\n0,1,2,3\n1,4,5\n")
        with pytest.raises(IngestionError, match=r"bad\.csv:3"):
            load_sequence_csv_file(p, self.SCHEMA)

    def test_non_numeric_cell(self, tmp_path):
        p = self.write(tmp_path, "t,f1,f2,y1\n0,1,oops,3\n")
        with pytest.raises(IngestionError, match=r"bad\.csv:2"):
            load_sequence_csv_file(p, self.SCHEMA)

    def test_varying_vector_target(self, tmp_path):
        schema = SequenceCsvSchema(features=1, targets=1, target_kind="vector")
        p = self.write(tmp_path, "t,f1,y1\n0,1,5\n1,2,6\n")
        with pytest.raises(IngestionError, match="varies"):
            load_sequence_csv_file(p, schema)

    def test_fractional_class_label(self, tmp_path):
        schema = SequenceCsvSchema(features=1, targets=1, target_kind="class")
        p = self.write(tmp_path, "t,f1,y1\n0,1,0.5\n1,2,0.5\n")
        with pytest.raises(IngestionError, match="integer"):
            load_sequence_csv_file(p, schema)

    def test_non_increasing_timestamps(self, tmp_path):
        schema = SequenceCsvSchema(features=1, targets=1, timestamps=True)
        p = self.write(tmp_path, "t,f1,y1\n2,1,0\n2,2,0\n")
        with pytest.raises(IngestionError, match="increasing"):
            load_sequence_csv_file(p, schema)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(IngestionError, match="directory"):
            load_sequence_csv(tmp_path / "nowhere", self.SCHEMA)

    def test_missing_split_file(self, tmp_path):
        d = tmp_path / "d"
        d.mkdir()
        write_sequence_csv(d / "train.csv", random_samples(self.SCHEMA, 1, 0),
                           self.SCHEMA)
        with pytest.raises(IngestionError, match="val"):
            load_sequence_csv(d, self.SCHEMA)

    def test_consecutive_blank_lines_ignored(self, tmp_path):
        p = self.write(tmp_path,
                       "t,f1,f2,y1\n0,1,2,3\n\n\n0,7,8,9\n1,1,1,1\n\n")
        samples = load_sequence_csv_file(p, self.SCHEMA)
        assert [s.length for s in samples] == [1, 2]
        assert samples[1].inputs[0].tolist() == [7.0, 8.0]

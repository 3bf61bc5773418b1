"""Benchmark harness tests.

The pairwise matrix semantics are pinned with hand-built records where
the expected counts can be tallied by hand; campaign runs are checked
for byte-level reproducibility (wall time aside) rather than for any
statistical property, which belongs to the acceptance suite.
"""

import json
import math

import numpy as np
import pytest

import semforge as sf
from semforge.bench import (
    DIVERGENCE_LIMIT,
    case_seed,
    grid_label,
    records_frame,
    run_case,
)
from semforge.generator import GeneratedCase
from semforge.optim import TERM_DOMAIN

from helpers import set3_config


def record(case, objective, method, failure, set_label="set1", delta=0.1,
           value=1.0, wall=0.01):
    return sf.BenchRecord(
        case=case, set_label=set_label, rep=1, seed=0, objective=objective,
        method=method, delta=delta, value=value, wall_time=wall,
        converged=failure is None, termination="gradient-tol", failure=failure,
    )


class TestDelta:
    def test_hand_case(self):
        d = sf.delta({"a": 1.0, "b": 2.0}, {"a": 1.1, "b": 1.8})
        assert d == pytest.approx(0.1, rel=1e-12)

    def test_exact_match_is_zero(self):
        assert sf.delta({"a": 0.5}, {"a": 0.5}) == 0.0

    def test_name_mismatch_rejected(self):
        with pytest.raises(ValueError, match="missing.*'b'"):
            sf.delta({"a": 1.0, "b": 1.0}, {"a": 1.0, "c": 1.0})

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no parameters"):
            sf.delta({}, {})

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError, match="nonzero"):
            sf.delta({"a": 0.0}, {"a": 0.1})


class TestClassifyFailure:
    def test_nan_param_takes_precedence(self):
        assert sf.classify_failure([np.nan, 1.0], 1.0, 0.0) == "nan-param"
        assert sf.classify_failure([np.inf], np.inf, 9.0) == "nan-param"

    def test_nan_objective(self):
        assert sf.classify_failure([1.0], np.inf, 0.0) == "nan-objective"
        assert sf.classify_failure([1.0], np.nan, 0.0) == "nan-objective"

    def test_domain_termination_counts_as_nan_objective(self):
        out = sf.classify_failure([1.0], 1.0, 0.0, termination=TERM_DOMAIN)
        assert out == "nan-objective"

    def test_divergence_boundary(self):
        assert sf.classify_failure([1.0], 1.0, DIVERGENCE_LIMIT + 0.01) == "diverged"
        assert sf.classify_failure([1.0], 1.0, DIVERGENCE_LIMIT - 0.01) is None
        # strict inequality at the limit itself
        assert sf.classify_failure([1.0], 1.0, DIVERGENCE_LIMIT) is None

    def test_empty_theta_success(self):
        assert sf.classify_failure([], 1.0, 0.0) is None


class TestCampaign:
    def test_defaults(self):
        c = sf.Campaign(sets=(set3_config(),))
        assert c.reps == 1
        assert c.methods == ("SLSQP",)
        assert c.objectives == (("MLW",),)
        assert c.labels == ("set1",)
        assert c.grid == [(("MLW",), "SLSQP")]

    def test_objective_chain_spellings(self):
        c = sf.Campaign(
            sets=(set3_config(),),
            objectives=("ULS+MLW", ["uls", "mlw"], "gls"),
        )
        assert c.objectives == (("ULS", "MLW"), ("ULS", "MLW"), ("GLS",))

    def test_method_canonicalization(self):
        c = sf.Campaign(sets=(set3_config(),), methods=("lbfgsb", "adam"))
        assert c.methods == ("L-BFGS-B", "Adam")

    def test_grid_ordering(self):
        c = sf.Campaign(
            sets=(set3_config(),), methods=("SLSQP", "Adam"),
            objectives=("MLW", "ULS"),
        )
        assert c.grid == [
            (("MLW",), "SLSQP"), (("MLW",), "Adam"),
            (("ULS",), "SLSQP"), (("ULS",), "Adam"),
        ]

    @pytest.mark.parametrize(
        "kwargs, match",
        [
            ({"sets": ()}, "at least one generator config"),
            ({"sets": (None,), "reps": 0}, "at least 1"),
            ({"sets": (None,), "methods": ()}, "at least one method"),
            ({"sets": (None,), "objectives": ("WLS",)}, "unknown objective"),
            ({"sets": (None,), "objectives": ("",)}, "invalid objective"),
            ({"sets": (None, None), "labels": ("a", "a")}, "unique"),
            ({"sets": (None,), "labels": ("a", "b")}, "match the sets"),
        ],
    )
    def test_invalid_campaigns(self, kwargs, match):
        if kwargs.get("sets") and kwargs["sets"][0] is None:
            kwargs["sets"] = tuple(set3_config() for _ in kwargs["sets"])
        with pytest.raises(ValueError, match=match):
            sf.Campaign(**kwargs)

    def test_grid_label(self):
        assert grid_label(("ULS", "MLW"), "SLSQP") == "ULS+MLW/SLSQP"
        assert grid_label(("MLW",), "Adam") == "MLW/Adam"


class TestStandardSets:
    def test_fifteen_sets(self):
        sets = sf.standard_sets()
        assert len(sets) == 15
        assert sets[2] == set3_config()

    def test_scale_sweep(self):
        sets = sf.standard_sets()
        assert [s.scale for s in sets[:5]] == [0.5, 0.75, 1.0, 1.5, 2.0]
        assert all(s.n_obs == 5 and s.n_lat == 2 for s in sets[:5])
        assert all(s.n_cycles == 0 for s in sets[:5])

    def test_latent_sweep_with_and_without_cycles(self):
        sets = sf.standard_sets()
        for block, n_cycles in ((sets[5:10], 0), (sets[10:15], 1)):
            assert [s.n_lat for s in block] == [0, 1, 2, 4, 8]
            assert all(s.n_obs == 10 for s in block)
            assert all(s.n_cycles == n_cycles for s in block)
            assert all(s.scale == 1.0 for s in block)


class TestCampaignFromDict:
    def test_standard_keyword(self):
        c = sf.campaign_from_dict({"sets": "standard", "reps": 2})
        assert len(c.sets) == 15
        assert c.reps == 2

    def test_sets_default_to_standard(self):
        c = sf.campaign_from_dict({})
        assert len(c.sets) == 15

    def test_explicit_sets_and_coercions(self):
        payload = {
            "sets": [{"n_obs": 5, "n_lat": 2}],
            "methods": ["slsqp", "adam"],
            "objectives": ["ULS+MLW"],
            "labels": ["tiny"],
            "seed": 7,
        }
        c = sf.campaign_from_dict(payload)
        assert c.sets == (sf.GenConfig(n_obs=5, n_lat=2),)
        assert c.methods == ("SLSQP", "Adam")
        assert c.objectives == (("ULS", "MLW"),)
        assert c.labels == ("tiny",)
        assert c.seed == 7

    def test_unknown_fields_rejected(self):
        with pytest.raises(ValueError, match="unknown campaign fields"):
            sf.campaign_from_dict({"rep": 3})
        with pytest.raises(GenerationError := sf.GenerationError,
                           match="unknown config fields"):
            sf.campaign_from_dict({"sets": [{"n_obs": 5, "n_latent": 2}]})


class TestCaseSeed:
    def test_deterministic_and_sensitive(self):
        assert case_seed(0, 1, 2) == case_seed(0, 1, 2)
        seeds = {case_seed(0, 1, 2), case_seed(1, 1, 2),
                 case_seed(0, 2, 2), case_seed(0, 1, 3)}
        assert len(seeds) == 4
        assert all(isinstance(s, int) and s >= 0 for s in seeds)


class TestRunCase:
    def test_happy_path(self):
        case = sf.generate(set3_config(), seed=case_seed(0, 2, 0))
        d, value, wall, outcome = run_case(case, ("ULS", "MLW"), "SLSQP")
        assert math.isfinite(d) and d >= 0
        assert math.isfinite(value)
        assert wall > 0
        assert outcome is not None
        assert outcome.objective == "MLW"

    def test_hard_error_becomes_domain_shaped_result(self):
        rows = np.random.default_rng(0).standard_normal((20, 2))
        bad = GeneratedCase(
            model_text="x1 ~ x9\n",
            theta_true={"x1 ~ x9": 0.5},
            data=sf.Dataset(("x1", "x2"), rows),
            config=set3_config(),
            seed=0,
        )
        d, value, wall, outcome = run_case(bad, ("MLW",), "SLSQP")
        assert math.isnan(d)
        assert math.isnan(value)
        assert wall >= 0
        assert outcome is None


@pytest.fixture(scope="module")
def small_campaign():
    return sf.Campaign(
        sets=(set3_config(), set3_config(n_obs=6, n_lat=1)),
        reps=2,
        methods=("SLSQP",),
        objectives=("ULS+MLW", "MLW"),
        seed=5,
    )


@pytest.fixture(scope="module")
def small_records(small_campaign):
    return sf.run_campaign(small_campaign)


class TestRunCampaign:
    def test_record_grid_shape(self, small_campaign, small_records):
        assert len(small_records) == 2 * 2 * 2
        first = small_records[0]
        assert first.case == "set1/r001"
        assert first.rep == 1
        assert first.objective == "ULS+MLW"
        assert first.method == "SLSQP"
        assert first.seed == case_seed(5, 0, 0)

    def test_grid_entries_share_the_case(self, small_records):
        by_case = {}
        for r in small_records:
            by_case.setdefault(r.case, set()).add(r.seed)
        assert all(len(seeds) == 1 for seeds in by_case.values())

    def test_rerun_identical_except_wall_time(self, small_campaign, small_records):
        again = sf.run_campaign(small_campaign)
        for a, b in zip(small_records, again):
            da, db = vars(a).copy(), vars(b).copy()
            da.pop("wall_time"), db.pop("wall_time")
            assert da == db

    def test_records_frame_maps_missing_failure(self, small_records):
        frame = records_frame(small_records)
        assert len(frame) == len(small_records)
        assert set(frame["failure"]) <= {"none", "nan-param", "nan-objective",
                                         "diverged"}
        successes = frame[frame["failure"] == "none"]
        assert len(successes) >= 1
        assert np.all(np.isfinite(successes["delta"].to_numpy()))


class TestSummarize:
    def test_pairwise_matrix_hand_tally(self):
        # case A: entry 0 fails, entry 1 succeeds; case B: both fail
        records = [
            record("set1/r001", "MLW", "SLSQP", "diverged"),
            record("set1/r001", "MLW", "Adam", None),
            record("set1/r002", "MLW", "SLSQP", "nan-param"),
            record("set1/r002", "MLW", "Adam", "nan-objective"),
        ]
        out = sf.summarize(records)
        assert out["grid"] == ["MLW/SLSQP", "MLW/Adam"]
        assert out["pairwise"]["matrix"] == [[2, 1], [0, 1]]
        assert out["failures"]["set1"] == {"MLW/SLSQP": 2, "MLW/Adam": 1}
        assert out["failure_kinds"]["MLW/SLSQP"] == {
            "diverged": 1, "nan-param": 1
        }

    def test_degenerate_one_sided_matrix(self):
        records = []
        for i in range(10):
            records.append(record(f"set1/r{i:03d}", "MLW", "SLSQP", None))
            records.append(record(f"set1/r{i:03d}", "MLW", "Adam", "diverged"))
        out = sf.summarize(records)
        assert out["pairwise"]["matrix"] == [[0, 0], [10, 10]]

    def test_offdiagonal_bounded_by_diagonal(self, small_records):
        out = sf.summarize(small_records)
        matrix = out["pairwise"]["matrix"]
        for i, row in enumerate(matrix):
            off = sum(v for j, v in enumerate(row) if j != i)
            assert off <= row[i] * (len(matrix) - 1)

    def test_summary_shape_on_real_campaign(self, small_campaign, small_records):
        out = sf.summarize(small_records)
        assert out["sets"] == ["set1", "set2"]
        assert out["grid"] == ["ULS+MLW/SLSQP", "MLW/SLSQP"]
        assert out["cases_per_set"] == {"set1": 2, "set2": 2}
        for per in out["wall_time"].values():
            assert all(w >= 0 for w in per.values())
        json.dumps(out)

    def test_delta_mean_none_without_successes(self):
        records = [record("set1/r001", "MLW", "SLSQP", "diverged", delta=9.0)]
        out = sf.summarize(records)
        assert out["delta_mean"]["set1"]["MLW/SLSQP"] is None

    def test_delta_mean_averages_successes_only(self):
        records = [
            record("set1/r001", "MLW", "SLSQP", None, delta=0.1),
            record("set1/r002", "MLW", "SLSQP", None, delta=0.3),
            record("set1/r003", "MLW", "SLSQP", "diverged", delta=8.0),
        ]
        out = sf.summarize(records)
        assert out["delta_mean"]["set1"]["MLW/SLSQP"] == pytest.approx(0.2)


class TestWriteResults:
    def test_files_and_content(self, small_records, tmp_path):
        paths = sf.write_results(small_records, tmp_path / "bench")
        assert set(paths) == {"records", "summary"}
        import pandas as pd

        frame = pd.read_csv(paths["records"])
        assert len(frame) == len(small_records)
        assert "failure" in frame.columns
        summary = json.loads(paths["summary"].read_text())
        assert summary["grid"] == ["ULS+MLW/SLSQP", "MLW/SLSQP"]
        assert summary["pairwise"]["matrix"] == sf.summarize(
            small_records
        )["pairwise"]["matrix"]

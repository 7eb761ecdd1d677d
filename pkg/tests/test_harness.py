import numpy as np
import pytest
from scipy import stats as scipy_stats

from needlet_whittle import (
    ConfigError,
    KappaCorrection,
    MexicanWindow,
    NeedletWhittleError,
    PowerSpectrumModel,
    StandardWindow,
)
from needlet_whittle.harness import (
    ExperimentConfig,
    jarque_bera,
    load_summary,
    rep_seed,
    run_experiment,
    theory_checks,
    write_histogram_csv,
    write_qq_csv,
    write_rows_csv,
    write_summary_csv,
)


def small_config(**kwargs) -> ExperimentConfig:
    base = dict(
        model=PowerSpectrumModel(alpha0=3.0),
        window=MexicanWindow(p=2, B=2.0),
        l_max=256,
        replications=12,
        master_seed=99,
        workers=1,
    )
    base.update(kwargs)
    return ExperimentConfig(**base)


class TestConfig:
    def test_round_trip(self):
        for cfg in (
            small_config(),
            small_config(
                model=PowerSpectrumModel(alpha0=3.0, correction=KappaCorrection(0.5)),
                band="narrow",
                g=0.5,
            ),
            small_config(window=StandardWindow(B=2.0), jrange_policy="explicit", j0=2, jl=6),
        ):
            assert ExperimentConfig.parse(cfg.to_text()) == cfg

    def test_comments_and_blanks(self):
        text = small_config().to_text() + "\n# trailing comment\n\n"
        ExperimentConfig.parse(text)

    @pytest.mark.parametrize(
        "mutation",
        [
            lambda t: t.replace("model.alpha0 = 3.0", "model.alpha0 = banana"),
            lambda t: t.replace("model.alpha0 = 3.0", ""),  # required key missing
            lambda t: t + "unknown.key = 1\n",
            lambda t: t + "model.alpha0 = 4.0\n",  # duplicate
            lambda t: t.replace("run.replications = 12", "run.replications = 0"),
            lambda t: t.replace("band.kind = full", "band.kind = sideways"),
        ],
    )
    def test_malformed_rejected(self, mutation):
        with pytest.raises(ConfigError):
            ExperimentConfig.parse(mutation(small_config().to_text()))

    def test_narrow_degenerate_rejected_eagerly(self):
        cfg_text = small_config(band="narrow", g=0.5).to_text().replace("band.g = 0.5", "")
        # default g-rule at jL = 7 gives g = 1/343, a single-level band
        with pytest.raises(ConfigError):
            ExperimentConfig.parse(cfg_text)


class TestRepSeed:
    def test_deterministic_and_distinct(self):
        seeds = [rep_seed(123, r) for r in range(100)]
        assert seeds == [rep_seed(123, r) for r in range(100)]
        assert len(set(seeds)) == 100


class TestRunExperiment:
    def test_noise_free_single_row(self):
        summary = run_experiment(small_config(replications=1, noise_free=True))
        assert summary.aggregate.n_failed == 0
        assert summary.aggregate.mean_alpha == pytest.approx(3.0, abs=1e-5)

    def test_deterministic_csv(self, tmp_path):
        cfg = small_config()
        paths = []
        for tag in ("a", "b"):
            summary = run_experiment(cfg)
            path = tmp_path / f"{tag}.rows.csv"
            write_rows_csv(summary, path)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_parallel_matches_serial(self, tmp_path):
        serial = run_experiment(small_config(workers=1))
        parallel = run_experiment(small_config(workers=2))
        p1, p2 = tmp_path / "s.csv", tmp_path / "p.csv"
        write_rows_csv(serial, p1)
        write_rows_csv(parallel, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_env_override_workers(self, monkeypatch, tmp_path):
        monkeypatch.setenv("NEEDLET_WHITTLE_THREADS", "2")
        summary = run_experiment(small_config(workers=1))
        assert summary.aggregate.n_rows == 12

    def test_failure_rows_recorded(self, monkeypatch):
        import needlet_whittle.harness as hn

        real = hn._fit_for_config

        def flaky(config, spec):
            if abs(spec.values[1]) % 1.0 < 0.08:  # deterministic pseudo-failures
                raise NeedletWhittleError("injected failure")
            return real(config, spec)

        monkeypatch.setattr(hn, "_fit_for_config", flaky)
        cfg = small_config(replications=40)
        try:
            summary = hn.run_experiment(cfg)
            failed = [row for row in summary.rows if row.failed]
            assert summary.aggregate.n_failed == len(failed)
            for row in failed:
                assert "injected failure" in row.error
        except NeedletWhittleError as exc:
            # alternatively the 5% policy may trip; either way rows were the cause
            assert "replications failed" in str(exc)

    def test_failure_policy_aborts(self, monkeypatch):
        import needlet_whittle.harness as hn

        def always_fail(config, spec):
            raise NeedletWhittleError("boom")

        monkeypatch.setattr(hn, "_fit_for_config", always_fail)
        with pytest.raises(NeedletWhittleError, match="replications failed"):
            hn.run_experiment(small_config())


class TestSummaryIO:
    def test_aggregate_recomputable_on_load(self, tmp_path):
        cfg = small_config()
        summary = run_experiment(cfg)
        rows_path, summary_path = tmp_path / "rows.csv", tmp_path / "summary.csv"
        write_rows_csv(summary, rows_path)
        write_summary_csv(summary, summary_path)
        loaded = load_summary(summary_path, rows_path, cfg)
        assert loaded.aggregate.mean_alpha == pytest.approx(summary.aggregate.mean_alpha)

    def test_tampered_summary_detected(self, tmp_path):
        cfg = small_config()
        summary = run_experiment(cfg)
        rows_path, summary_path = tmp_path / "rows.csv", tmp_path / "summary.csv"
        write_rows_csv(summary, rows_path)
        write_summary_csv(summary, summary_path)
        text = summary_path.read_text().replace(
            f"mean_alpha,{summary.aggregate.mean_alpha:.17g}", "mean_alpha,99"
        )
        summary_path.write_text(text)
        with pytest.raises(NeedletWhittleError, match="does not match rows"):
            load_summary(summary_path, rows_path, cfg)

    def test_plot_data_files(self, tmp_path):
        summary = run_experiment(small_config(replications=24))
        hist, qq = tmp_path / "h.csv", tmp_path / "q.csv"
        write_histogram_csv(summary, hist)
        write_qq_csv(summary, qq)
        for path in (hist, qq):
            lines = path.read_text().splitlines()
            assert lines[0] == "x,y"
            assert len(lines) > 2
        qq_rows = np.loadtxt(qq, delimiter=",", skiprows=1)
        assert np.all(np.diff(qq_rows[:, 0]) > 0)  # theoretical quantiles sorted


class TestJarqueBera:
    def test_matches_scipy(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(500)
        assert jarque_bera(x) == pytest.approx(scipy_stats.jarque_bera(x).statistic, rel=1e-10)


class TestTheoryChecks:
    def test_noise_free_check(self):
        summary = run_experiment(small_config(replications=1, noise_free=True))
        checks = theory_checks(summary)
        assert len(checks) == 1 and checks[0].passed

    def test_clean_model_checks_present(self):
        summary = run_experiment(small_config(replications=24, l_max=256))
        names = {c.name for c in theory_checks(summary)}
        assert {"mean-consistency", "clt-variance", "normality"} <= names

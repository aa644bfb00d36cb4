use nslice::agents::Algorithm;
use nslice::harness::{
    collect_series, plot_runs, read_metrics, read_timing, sweep, PlotKind, PlotOptions, RecordKind, RunConfig,
    METRICS_FILE, SUMMARY_FILE, TIMING_FILE,
};
use nslice::parallel::Exec;

fn tiny(algorithm: Algorithm) -> RunConfig {
    let mut cfg = RunConfig::desk(algorithm);
    cfg.max_timesteps = 400;
    cfg.start_timesteps = 100;
    cfg.eval_interval = 200;
    cfg.log_interval = 100;
    cfg.eval_episodes = 2;
    cfg.eval_best = 1;
    cfg.env.horizon = 50;
    cfg.agent.hidden = vec![16, 16];
    cfg
}

#[test]
fn sweep_is_identical_in_parallel_and_sequentially() {
    let cfg = tiny(Algorithm::Td3);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = sweep(&cfg, &[1, 2], a.path(), Exec::Sequential).unwrap();
    let sb = sweep(&cfg, &[1, 2], b.path(), Exec::Parallel).unwrap();
    assert_eq!(sa.iter().map(|s| s.eval_scores.clone()).collect::<Vec<_>>(), sb.iter().map(|s| s.eval_scores.clone()).collect::<Vec<_>>());
    for seed in [1, 2] {
        let sub = format!("seed_{seed}");
        let ma = std::fs::read(a.path().join(&sub).join(METRICS_FILE)).unwrap();
        let mb = std::fs::read(b.path().join(&sub).join(METRICS_FILE)).unwrap();
        assert_eq!(ma, mb);
        assert!(a.path().join(&sub).join(SUMMARY_FILE).exists());
    }
}

#[test]
fn run_files_carry_every_record_kind() {
    let cfg = tiny(Algorithm::Tdsac);
    let dir = tempfile::tempdir().unwrap();
    let summary = sweep(&cfg, &[3], dir.path(), Exec::Sequential).unwrap().remove(0);
    let run = dir.path().join("seed_3");
    let recs = read_metrics(&run.join(METRICS_FILE)).unwrap();
    for kind in [RecordKind::Episode, RecordKind::Window, RecordKind::Eval, RecordKind::Final] {
        assert!(recs.iter().any(|r| r.kind == kind), "{kind:?}");
    }
    let evals: Vec<u64> = recs.iter().filter(|r| r.kind == RecordKind::Eval).map(|r| r.global_step).collect();
    assert_eq!(evals, vec![0, 200, 400]);
    assert_eq!(summary.eval_steps, evals);
    let episodes = recs.iter().filter(|r| r.kind == RecordKind::Episode).count();
    assert_eq!(episodes, 8);
    // 300 learning steps in windows of 50
    let timing = read_timing(&run.join(TIMING_FILE)).unwrap();
    assert_eq!(timing.len(), 6);
    assert!(timing.iter().all(|t| t.seconds > 0.0));
    assert_eq!(timing.last().unwrap().end_step, 400);
}

#[test]
fn plots_aggregate_seeds_into_one_band() {
    let cfg = tiny(Algorithm::Ddpg);
    let dir = tempfile::tempdir().unwrap();
    sweep(&cfg, &[0, 1, 2], dir.path(), Exec::default()).unwrap();
    let runs: Vec<_> = [0, 1, 2].iter().map(|s| dir.path().join(format!("seed_{s}"))).collect();
    for kind in [PlotKind::Return, PlotKind::Energy, PlotKind::EnergyPerSlice, PlotKind::Cpu, PlotKind::Wallclock] {
        let out = dir.path().join("plot.svg");
        let series = plot_runs(&runs, kind, &out, &PlotOptions { smoothing: 2, ..PlotOptions::default() }).unwrap();
        let svg = std::fs::read_to_string(&out).unwrap();
        assert!(svg.starts_with("<svg"), "{kind:?}");
        assert!(out.with_extension("csv").exists());
        let want = if kind == PlotKind::EnergyPerSlice { 3 } else { 1 };
        assert_eq!(series.len(), want, "{kind:?}");
        for s in &series {
            assert!(s.std.iter().all(|v| *v >= 0.0 && v.is_finite()));
        }
    }
    // a single run has a zero-width band
    let one = collect_series(&runs[..1], PlotKind::Return, 1).unwrap();
    assert!(one[0].std.iter().all(|v| *v == 0.0));
}

#[test]
fn missing_runs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(collect_series(&[dir.path().join("absent")], PlotKind::Return, 1).is_err());
    assert!(collect_series(&[], PlotKind::Return, 1).is_err());
}

use paczero::harness::{run, sweep_k, sweep_t_ladder, ExperimentConfig, SUMMARY_COLUMNS};
use paczero::mechanism::MechanismSpec;
use paczero::transcript::Transcript;
use paczero::zo::{TaskSpec, TrainConfig};

fn config(spec: MechanismSpec, steps: usize) -> ExperimentConfig {
    let train = TrainConfig { steps, ..Default::default() };
    let mut c = ExperimentConfig::new(TaskSpec::SeparableBlobs { seed: 0, records: 64 }, spec, train);
    c.seeds = vec![0, 1, 2];
    c
}

fn read_csv(path: &std::path::Path) -> (Vec<String>, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    (header, r.records().map(Result::unwrap).collect())
}

#[test]
fn run_writes_transcripts_and_pooled_summary() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&config(MechanismSpec::paczero_mi(0.33).with_subsets(16), 150), dir.path()).unwrap();
    assert!(report.first_failure().is_none());
    for s in &report.seeds {
        let t = Transcript::load(&s.transcript_path).unwrap();
        assert_eq!(t.records.len(), 150);
        assert!(t.cumulative_mi() <= 0.33);
    }
    let (header, rows) = read_csv(&dir.path().join("summary.csv"));
    assert_eq!(header, SUMMARY_COLUMNS);
    let seeds: Vec<&str> = rows.iter().map(|r| &r[3]).collect();
    assert_eq!(seeds, ["0", "1", "2", "mean", "std"]);
    assert_eq!(&rows[0][1], "0.33");
    assert!(dir.path().join("validation-paczero_mi-seed0.txt").exists());
}

#[test]
fn zpl_run_spends_nothing_and_gets_free_steps() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&config(MechanismSpec::paczero_zpl(), 200), dir.path()).unwrap();
    assert!(report.first_failure().is_none());
    for row in &report.rows[..3] {
        assert_eq!(row.cum_mi, 0.0);
        assert!(row.f > 0.0 && row.f < 1.0, "f = {}", row.f);
        assert_eq!(row.budget, Some(0.0));
    }
}

#[test]
fn t_ladder_drift_is_measured_from_the_best_rung() {
    let dir = tempfile::tempdir().unwrap();
    let table = sweep_t_ladder(&config(MechanismSpec::paczero_zpl(), 1), &[50, 100, 200], Some(dir.path())).unwrap();
    assert!(table.failure.is_none());
    assert_eq!(table.cells.iter().map(|c| c.steps).collect::<Vec<_>>(), [50, 100, 200]);
    let best = table.best_cell().unwrap();
    let drift = table.drift_from_best();
    assert_eq!(drift[best], 0.0);
    for (c, d) in table.cells.iter().zip(&drift) {
        assert!(c.dev <= table.cells[best].dev);
        assert_eq!(*d, c.test - table.cells[best].test);
    }
    assert!(dir.path().join("summary.csv").exists());
}

#[test]
fn mi_ladder_reruns_each_rung_within_budget() {
    let table = sweep_t_ladder(&config(MechanismSpec::paczero_mi(0.1).with_subsets(8), 1), &[20, 60], None).unwrap();
    assert!(table.failure.is_none());
    assert!(table.cells.iter().all(|c| c.cum_mi_max <= 0.1));
}

#[test]
fn k_sweep_labels_each_cell() {
    let table = sweep_k(&config(MechanismSpec::paczero_mi(0.2).with_subsets(8), 40), &[1, 2], None).unwrap();
    let labels: Vec<&str> = table.cells.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, ["paczero_mi@k1", "paczero_mi@k2"]);
}

use paczero::accounting::{validate_transcript, Invariant};
use paczero::harness::execute;
use paczero::mechanism::MechanismSpec;
use paczero::transcript::{Branch, Transcript};
use paczero::zo::{TaskSpec, TrainConfig};

fn transcript(spec: MechanismSpec) -> Transcript {
    let task = TaskSpec::SeparableBlobs { seed: 1, records: 32 };
    let train = TrainConfig { steps: 60, ..Default::default() };
    execute(&task, &train, &spec.with_subsets(8), 3).unwrap().transcript
}

fn violated(t: &Transcript) -> Option<Invariant> {
    validate_transcript(t).violation.map(|v| v.invariant)
}

fn first(t: &Transcript, branch: Branch) -> usize {
    t.records.iter().position(|r| r.branch == branch).expect("branch occurs")
}

#[test]
fn honest_transcripts_pass() {
    for spec in [MechanismSpec::paczero_mi(0.33), MechanismSpec::paczero_zpl(), MechanismSpec::paczero_mi(0.0)] {
        let t = transcript(spec);
        assert_eq!(violated(&t), None, "{}", validate_transcript(&t));
    }
}

#[test]
fn overspent_step_fails() {
    let mut t = transcript(MechanismSpec::paczero_mi(0.33));
    let i = first(&t, Branch::Disagreement);
    t.records[i].beta_used *= 1.5;
    assert!(violated(&t).is_some());
}

#[test]
fn inflated_budget_fails_rederivation() {
    let mut t = transcript(MechanismSpec::paczero_mi(0.33));
    let i = first(&t, Branch::Disagreement);
    t.records[i].beta *= 2.0;
    assert_eq!(violated(&t), Some(Invariant::BudgetRederivation));
}

#[test]
fn weakened_noise_fails_calibration() {
    let mut t = transcript(MechanismSpec::paczero_mi(0.33));
    let i = first(&t, Branch::Disagreement);
    let sigma = t.records[i].sigma.unwrap();
    t.records[i].sigma = Some(sigma / 4.0);
    assert_eq!(violated(&t), Some(Invariant::NoiseCalibration));
}

#[test]
fn zpl_with_spending_fails() {
    let mut t = transcript(MechanismSpec::paczero_zpl());
    let i = first(&t, Branch::ZplCoin);
    for r in &mut t.records[i..] {
        r.cumulative_mi += 1e-3;
    }
    t.records[i].beta_used = 1e-3;
    assert!(violated(&t).is_some());
}

#[test]
fn relabelled_unanimity_fails() {
    let mut t = transcript(MechanismSpec::paczero_mi(0.33));
    let i = first(&t, Branch::Disagreement);
    t.records[i].branch = Branch::Unanimity;
    assert_eq!(violated(&t), Some(Invariant::BranchRederivation));
}

#[test]
fn dropped_record_fails_ordering() {
    let mut t = transcript(MechanismSpec::paczero_mi(0.33));
    t.records.remove(10);
    assert_eq!(violated(&t), Some(Invariant::RecordOrder));
}

#[test]
fn broken_running_sum_fails() {
    let mut t = transcript(MechanismSpec::paczero_mi(0.33));
    let last = t.records.len() - 1;
    t.records[last].cumulative_mi += 1e-6;
    assert_eq!(violated(&t), Some(Invariant::CumulativeMi));
}

#[test]
fn flipped_bit_fails_consistency() {
    let mut t = transcript(MechanismSpec::paczero_mi(0.33));
    let i = first(&t, Branch::Disagreement);
    t.records[i].released_bit = -t.records[i].released_bit;
    t.records[i].release = -t.records[i].release;
    assert_eq!(violated(&t), Some(Invariant::ReleaseConsistency));
}

#[test]
fn miscounted_unanimity_fails() {
    let mut t = transcript(MechanismSpec::paczero_mi(0.33));
    let last = t.records.len() - 1;
    t.records[last].unanimity_count_so_far += 1;
    assert_eq!(violated(&t), Some(Invariant::UnanimityCount));
}

#[test]
fn report_names_the_invariant() {
    let mut t = transcript(MechanismSpec::paczero_mi(0.33));
    t.records.remove(0);
    let text = validate_transcript(&t).to_string();
    assert!(text.contains("result: FAIL [record-order]"), "{text}");
}

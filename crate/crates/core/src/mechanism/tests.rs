use approx::assert_abs_diff_eq;
use rand::Rng;

use super::*;
use crate::channel::{binary_entropy, channel_mi, ChannelQuery};
use crate::transcript::Branch;

use Sign::{Minus, Plus};

fn pairs_design() -> SubsetDesign {
    SubsetDesign::from_memberships(2, vec![vec![0], vec![0], vec![1], vec![1]]).unwrap()
}

fn test_rng(seed: u64) -> StreamRng {
    rng::keyed(seed, Stream::Experiment, 0xbeef, 0)
}

#[test]
fn subset_signs_clip_then_average() {
    let design = pairs_design();
    let signs = subset_signs(&[1.0, -3.0, 2.0, 2.0], &design, 2.0).unwrap();
    assert_eq!(signs, vec![Minus, Plus]);
    // Without the clip the first subset mean is −1 as well.
    let signs = subset_signs(&[1.0, -0.5, 2.0, 2.0], &design, f64::INFINITY).unwrap();
    assert_eq!(signs, vec![Plus, Plus]);
    assert!(subset_signs(&[1.0], &design, 1.0).is_err());
}

#[test]
fn zero_mean_counts_as_plus() {
    let design = pairs_design();
    assert_eq!(subset_signs(&[1.0, -1.0, 0.0, 0.0], &design, 5.0).unwrap(), vec![Plus, Plus]);
}

#[test]
fn agreement_example() {
    let p = Posterior::from_weights(&[0.5, 0.3, 0.2]).unwrap();
    assert_abs_diff_eq!(agreement_probability(&p, &[Plus, Plus, Minus]), 0.8, epsilon = 1e-12);
    assert_eq!(agreement_probability(&p, &[Minus, Minus, Minus]), 0.0);
}

#[test]
fn surrogate_examples() {
    let design = pairs_design();
    let g = [1.0, -3.0, 2.0, 2.0];
    let mut r = test_rng(0);
    let full = surrogate_release(SurrogateMode::RawFull, &g, &design, 0, 2.0, &mut r).unwrap();
    assert_abs_diff_eq!(full, 0.75, epsilon = 1e-15);
    assert_eq!(surrogate_release(SurrogateMode::QuantFull, &g, &design, 0, 2.0, &mut r).unwrap(), 1.0);
    assert_eq!(surrogate_release(SurrogateMode::RawHalf, &g, &design, 0, 2.0, &mut r).unwrap(), -0.5);
    assert_eq!(surrogate_release(SurrogateMode::QuantHalf, &g, &design, 0, 2.0, &mut r).unwrap(), -1.0);
    assert_eq!(surrogate_release(SurrogateMode::RawHalf, &g, &design, 1, 2.0, &mut r).unwrap(), 2.0);
    let coin = surrogate_release(SurrogateMode::RandomSign, &g, &design, 0, 2.0, &mut r).unwrap();
    assert!(coin == 1.0 || coin == -1.0);
}

#[test]
fn disagreement_release_is_calibrated() {
    let mut p = Posterior::uniform(2);
    let mut r = test_rng(1);
    let out = mi_step(&mut p, &[Plus, Minus], 0, 0.1, 1e-12, &mut r).unwrap();
    assert_eq!(out.branch, Branch::Disagreement);
    assert_eq!(out.beta_used, 0.1);
    let sigma = out.sigma.unwrap();
    let mi = channel_mi(&ChannelQuery::new(0.5, sigma).unwrap());
    assert!(mi <= 0.1 && 0.1 - mi < 1e-10);
    let y = out.pre_quant.unwrap();
    assert_eq!(out.bit, Sign::of(y));
    // Two candidates: the posterior log-odds move by 2ỹ/σ².
    let odds = (p.weights()[0] / p.weights()[1]).ln();
    assert_abs_diff_eq!(odds, 2.0 * y / (sigma * sigma), epsilon = 1e-9);
}

#[test]
fn symmetric_release_keeps_symmetric_posterior() {
    let mut p = Posterior::uniform(4);
    p.observe_gaussian(&[Plus, Minus, Plus, Minus], 0.0, 0.7);
    for w in p.weights() {
        assert_abs_diff_eq!(*w, 0.25, epsilon = 1e-15);
    }
}

#[test]
fn unanimity_is_free_and_secret_blind() {
    let signs = [Minus; 6];
    let mut outs = Vec::new();
    for j in 0..6 {
        let mut p = Posterior::uniform(6);
        let mut r = test_rng(2);
        let out = mi_step(&mut p, &signs, j, 0.3, 1e-12, &mut r).unwrap();
        assert_eq!(out.branch, Branch::Unanimity);
        assert_eq!(out.beta_used, 0.0);
        assert_eq!(out.bit, Minus);
        assert_eq!(p, Posterior::uniform(6));
        // No randomness is consumed.
        assert_eq!(r.random::<u64>(), test_rng(2).random::<u64>());
        outs.push(out);
    }
    assert!(outs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn unanimity_over_the_support_only() {
    let mut p = Posterior::from_weights(&[0.0, 0.5, 0.5]).unwrap();
    let mut r = test_rng(3);
    let out = mi_step(&mut p, &[Minus, Plus, Plus], 1, 0.3, 1e-12, &mut r).unwrap();
    assert_eq!(out.branch, Branch::Unanimity);
    assert_eq!(out.bit, Plus);
}

#[test]
fn tiny_budget_flips_a_coin() {
    let mut p = Posterior::uniform(2);
    let mut r = test_rng(4);
    let out = mi_step(&mut p, &[Plus, Minus], 0, 0.0, 1e-12, &mut r).unwrap();
    assert_eq!(out.branch, Branch::ZplCoin);
    assert_eq!(out.beta_used, 0.0);
    assert_eq!(p, Posterior::uniform(2));
}

#[test]
fn zpl_ignores_the_secret() {
    let signs = [Plus, Minus, Minus, Plus, Plus];
    let p = Posterior::uniform(5);
    for j in 0..5 {
        let mut a = test_rng(5);
        let mut b = test_rng(5);
        let mut post = p.clone();
        let ours = zpl_step(&p, &signs, 1e-12, &mut a);
        let theirs = k_aggregate_step(
            BitVariant::Zpl,
            &mut post,
            &mut BudgetLedger::new(0.0).unwrap(),
            1,
            &[signs.to_vec()],
            j,
            0.0,
            1e-12,
            &mut b,
        )
        .unwrap();
        assert_eq!(ours, theirs[0]);
        assert_eq!(ours.branch, Branch::ZplCoin);
        assert_eq!(post, p);
    }
}

#[test]
fn zpl_coin_statistics() {
    const DRAWS: usize = 100_000;
    let signs = [Plus, Minus, Minus, Plus, Plus, Minus, Plus, Minus];
    let p = Posterior::uniform(8);
    let mut r = test_rng(6);
    let mut secret_rng = test_rng(7);
    let (mut plus, mut cross) = (0usize, 0.0);
    // Counts of Y = +1 split by the secret's sign.
    let (mut n_pos, mut y_pos, mut n_neg, mut y_neg) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..DRAWS {
        let j = secret_rng.random_range(0..8);
        let out = zpl_step(&p, &signs, 1e-12, &mut r);
        let y = out.bit.value();
        let s = signs[j].value();
        if y > 0.0 {
            plus += 1;
        }
        cross += y * s;
        if s > 0.0 {
            n_pos += 1;
            y_pos += usize::from(y > 0.0);
        } else {
            n_neg += 1;
            y_neg += usize::from(y > 0.0);
        }
    }
    let rate = plus as f64 / DRAWS as f64;
    assert!((rate - 0.5).abs() <= 0.005, "{rate}");
    // E[s] = 0 and E[y] ≈ 0, so the mean product is the correlation.
    let corr = cross / DRAWS as f64;
    assert!(corr.abs() <= 0.01, "{corr}");
    let (a, b) = (y_pos as f64 / n_pos as f64, y_neg as f64 / n_neg as f64);
    let pooled = plus as f64 / DRAWS as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n_pos as f64 + 1.0 / n_neg as f64)).sqrt();
    assert!(((a - b) / se).abs() < 4.0, "z = {}", (a - b) / se);
}

fn random_step(r: &mut StreamRng, m: usize) -> (Posterior, Vec<Sign>, usize) {
    let w: Vec<f64> = (0..m).map(|_| r.random_range(0.01..1.0)).collect();
    let p = Posterior::from_weights(&w).unwrap();
    let mut signs: Vec<Sign> = (0..m).map(|_| if r.random::<bool>() { Plus } else { Minus }).collect();
    if r.random_range(0..5) == 0 {
        signs = vec![signs[0]; m];
    }
    (p, signs, r.random_range(0..m))
}

#[test]
fn single_direction_matches_base_release() {
    let mut gen = test_rng(8);
    for trial in 0..50u64 {
        let m = gen.random_range(2..20);
        let (p, signs, j) = random_step(&mut gen, m);
        let total = gen.random_range(0.0..1.0);
        let steps = gen.random_range(1..50);
        let t = gen.random_range(1..=steps);
        let mut ledger = BudgetLedger::new(total).unwrap();

        let mut base_p = p.clone();
        let mut base_rng = test_rng(100 + trial);
        let q = agreement_probability(&p, &signs);
        let beta = adaptive_budget(&ledger, t, steps, q);
        let base = mi_step(&mut base_p, &signs, j, beta, 1e-12, &mut base_rng).unwrap();

        let mut agg_p = p.clone();
        let mut agg_rng = test_rng(100 + trial);
        let alloc = step_allocation(&ledger, t, steps);
        let agg =
            k_aggregate_step(BitVariant::Mi, &mut agg_p, &mut ledger, t, std::slice::from_ref(&signs), j, alloc, 1e-12, &mut agg_rng)
                .unwrap();
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0], base);
        assert_eq!(agg_p, base_p);
        assert_eq!(ledger.mi_used(), base.beta_used);
    }
}

#[test]
fn four_directions_split_the_allocation() {
    let mut p = Posterior::uniform(4);
    let mut ledger = BudgetLedger::new(1.0).unwrap();
    let signs = vec![vec![Plus, Minus, Plus, Minus]; 4];
    let mut r = test_rng(9);
    let out = k_aggregate_step(BitVariant::Mi, &mut p, &mut ledger, 1, &signs, 2, 0.004, 1e-12, &mut r).unwrap();
    assert_eq!(out.len(), 4);
    for b in &out {
        assert_eq!(b.branch, Branch::Disagreement);
        assert_eq!(b.beta_used, 0.001);
    }
    let summed: f64 = ledger.entries().iter().map(|e| e.beta_used).sum();
    assert_eq!(summed, ledger.mi_used());
    assert_abs_diff_eq!(ledger.mi_used(), 0.004, epsilon = 1e-18);
}

#[test]
fn entropy_cap_binds_on_lopsided_agreement() {
    let mut p = Posterior::from_weights(&[0.98, 0.02]).unwrap();
    let mut ledger = BudgetLedger::new(5.0).unwrap();
    let mut r = test_rng(10);
    let out = k_aggregate_step(BitVariant::Mi, &mut p, &mut ledger, 1, &[vec![Plus, Minus]], 0, 5.0, 1e-12, &mut r)
        .unwrap();
    let h = binary_entropy(0.98).unwrap();
    assert_abs_diff_eq!(out[0].beta, 0.999 * h, epsilon = 1e-15);
}

#[test]
fn mechanism_rejects_mismatched_design() {
    let design = build_balanced_design(8, 4, 0).unwrap();
    assert!(Mechanism::new(MechanismSpec::paczero_zpl(), &design, 0, 0).is_err());
    let spec = MechanismSpec::paczero_zpl().with_subsets(4);
    assert!(Mechanism::new(spec, &design, 4, 0).is_err());
    let mut mech = Mechanism::new(spec, &design, 3, 0).unwrap();
    assert!(mech.release(0, 10, &[vec![0.0; 8]]).is_err());
    assert!(mech.release(1, 10, &[vec![0.0; 8], vec![0.0; 8]]).is_err());
    assert!(mech.release(1, 10, &[vec![0.0; 8]]).is_ok());
}

#[test]
fn mechanism_records_cumulative_state() {
    let design = build_balanced_design(16, 8, 1).unwrap();
    let spec = MechanismSpec::paczero_mi(0.2).with_subsets(8);
    let mut mech = Mechanism::new(spec, &design, 5, 1).unwrap();
    let mut gen = test_rng(11);
    let steps = 30;
    for t in 1..=steps {
        let g: Vec<f64> = (0..16).map(|_| gen.random_range(-1.0..1.0) + 0.05).collect();
        mech.release(t, steps, &[g]).unwrap();
    }
    let records = mech.records();
    assert_eq!(records.len(), steps);
    let mut total = 0.0;
    let mut free = 0;
    for r in records {
        total += r.beta_used;
        free += usize::from(r.branch == Branch::Unanimity);
        assert_eq!(r.cumulative_mi, total);
        assert_eq!(r.unanimity_count_so_far, free);
    }
    assert!(total <= 0.2);
    assert_eq!(total, mech.ledger().mi_used());
}

#[test]
fn exhausted_budget_degenerates_to_coins() {
    let design = build_balanced_design(16, 8, 2).unwrap();
    let spec = MechanismSpec::paczero_mi(0.0).with_subsets(8);
    let mut mech = Mechanism::new(spec, &design, 0, 2).unwrap();
    let mut gen = test_rng(12);
    for t in 1..=20 {
        let g: Vec<f64> = (0..16).map(|_| gen.random_range(-1.0..1.0)).collect();
        mech.release(t, 20, &[g]).unwrap();
    }
    assert!(mech.records().iter().all(|r| r.branch != Branch::Disagreement && r.beta_used == 0.0));
    assert_eq!(mech.posterior(), &Posterior::uniform(8));
}

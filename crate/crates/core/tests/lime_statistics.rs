//! Statistical behaviour of sampling, fitting and selection.

mod common;

use common::planted::{ks_uniform_p, planted};
use midlime::lime::{explain_instance, fit_surrogate, proximity_weight, sample_masks, select_features, LimeConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;

#[test]
fn mask_entries_are_fair_coins() {
    let cfg = LimeConfig { n_samples: 50_000, seed: 17, ..LimeConfig::default() };
    let masks = sample_masks(300, &cfg).unwrap();
    let total: u64 = masks.masks.iter().map(|&m| m as u64).sum();
    let mean = total as f64 / (50_000.0 * 300.0);
    // 3 sigma of a binomial mean over 1.5e7 draws is about 4e-4
    assert!((mean - 0.5).abs() < 0.01, "{mean}");
}

#[test]
fn planted_support_recovered() {
    let p = planted(10, 10, 12, 3);
    let cfg = LimeConfig { n_samples: 4_000, seed: 5, ..LimeConfig::default() };
    let exp = explain_instance(&mut p.black_box(), "planted", &p.spec, &p.map, &cfg).unwrap();
    let mut ids = exp.selected_ids();
    ids.sort_unstable();
    assert_eq!(ids, p.support);
    for (w, c) in exp.fit.weights.iter().zip(&p.coefs) {
        assert!((w - c).abs() < 1e-6);
    }
    assert!((exp.fit.intercept - p.intercept).abs() < 1e-6);
    assert!(exp.r_squared >= 1.0 - 1e-9);
}

#[test]
fn permuted_targets_give_uniform_p_values() {
    // signal-bearing targets shuffled against the masks
    let p = planted(15, 20, 40, 8);
    let cfg = LimeConfig { n_samples: 5_000, seed: 21, ..LimeConfig::default() };
    let masks = sample_masks(300, &cfg).unwrap();
    let rows: Vec<Vec<bool>> = (0..cfg.n_samples).map(|r| masks.row(r).iter().map(|&m| m != 0).collect()).collect();
    let mut y: Vec<f64> = rows.iter().map(|m| p.affine(m)).collect();
    y.shuffle(&mut rand::rngs::StdRng::seed_from_u64(99));
    let w: Vec<f64> =
        (0..cfg.n_samples).map(|r| proximity_weight(masks.row(r).as_slice().unwrap(), cfg.kernel_width)).collect();
    let fit = fit_surrogate(&masks, &y, &w, 0.0).unwrap();
    let (d, pval) = ks_uniform_p(&fit.p_values);
    assert!(pval > 0.05, "KS D = {d}, p = {pval}");
    assert!(select_features(&fit, 1e-6).is_empty());
}

#[test]
fn selection_grows_with_threshold_on_real_fit() {
    let p = planted(10, 10, 30, 4);
    let cfg = LimeConfig { n_samples: 600, seed: 2, ..LimeConfig::default() };
    let exp = explain_instance(&mut p.noisy_black_box(0.5), "planted", &p.spec, &p.map, &cfg).unwrap();
    let mut previous: Vec<usize> = Vec::new();
    for t in [1e-12, 1e-9, 1e-6, 1e-3, 1.0, 1e3] {
        let ids: Vec<usize> = select_features(&exp.fit, t).iter().map(|f| f.segment).collect();
        assert!(previous.iter().all(|id| ids.contains(id)));
        previous = ids;
    }
}

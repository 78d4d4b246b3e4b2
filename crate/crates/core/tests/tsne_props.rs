mod common;

use ndarray::{concatenate, Array2, Axis};
use vocal_fatigue::eval::silhouette_score;
use vocal_fatigue::svm::self_squared_distances;
use vocal_fatigue::tsne::{
    conditional_probabilities, entropy_bits, kl_gradient, symmetrize, tsne_project, tsne_run,
    TsneConfig,
};
use vocal_fatigue::Error;

fn two_clusters(per: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = common::rng(seed);
    let a = common::gaussian(&mut rng, per, 64, 1.0);
    let mut b = common::gaussian(&mut rng, per, 64, 1.0);
    b.column_mut(0).mapv_inplace(|v| v + 20.0);
    let x = concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
    let labels = (0..2 * per).map(|i| usize::from(i >= per)).collect();
    (x, labels)
}

#[test]
fn rows_are_calibrated_to_the_perplexity() {
    let mut rng = common::rng(40);
    let x = common::gaussian(&mut rng, 200, 10, 1.0);
    let (p, _) = conditional_probabilities(&self_squared_distances(x.view()), 30.0);
    for row in p.rows() {
        let h = entropy_bits(row.as_slice().unwrap());
        assert!((h - 30f64.log2()).abs() <= 1e-4, "entropy {h}");
        assert!((row.sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn joint_affinities_are_symmetric() {
    let mut rng = common::rng(41);
    let x = common::gaussian(&mut rng, 60, 5, 1.0);
    let (cond, _) = conditional_probabilities(&self_squared_distances(x.view()), 10.0);
    let p = symmetrize(&cond);
    assert!(common::max_abs_diff(&p, &p.t().to_owned()) == 0.0);
    assert!((p.sum() - 1.0).abs() < 1e-12);
}

#[test]
fn affinities_are_rotation_invariant() {
    let mut rng = common::rng(42);
    let x = common::gaussian(&mut rng, 50, 2, 1.0);
    let (s, c) = (0.7f64.sin(), 0.7f64.cos());
    let rot = ndarray::array![[c, -s], [s, c]];
    let xr = x.dot(&rot);
    let p = symmetrize(&conditional_probabilities(&self_squared_distances(x.view()), 8.0).0);
    let pr = symmetrize(&conditional_probabilities(&self_squared_distances(xr.view()), 8.0).0);
    assert!(common::max_abs_diff(&p, &pr) < 1e-9);
}

#[test]
fn gradient_sums_to_zero() {
    let mut rng = common::rng(43);
    let x = common::gaussian(&mut rng, 80, 6, 1.0);
    let p = symmetrize(&conditional_probabilities(&self_squared_distances(x.view()), 20.0).0);
    let y = common::gaussian(&mut rng, 80, 2, 3.0);
    let g = kl_gradient(&p, &y);
    for col in g.columns() {
        assert!(col.sum().abs() <= 1e-8);
    }
}

#[test]
fn separated_clusters_stay_separated() {
    let (x, labels) = two_clusters(50, 44);
    let cfg = TsneConfig {
        seed: 1,
        ..TsneConfig::default()
    };
    let report = tsne_run(x.view(), &cfg).unwrap();
    assert!(report.kl_final <= report.kl_initial);
    let s = silhouette_score(report.embedding.view(), &labels).unwrap();
    assert!(s > 0.5, "silhouette {s}");
}

#[test]
fn duplicates_land_together_and_output_is_centred() {
    let (x, labels) = two_clusters(50, 45);
    // rows 0..10 and 50..60 appear twice
    let dup_rows: Vec<usize> = (0..10).chain(50..60).collect();
    let extra = x.select(Axis(0), &dup_rows);
    let all = concatenate(Axis(0), &[x.view(), extra.view()]).unwrap();
    let cfg = TsneConfig {
        seed: 3,
        ..TsneConfig::default()
    };
    let y = tsne_project(all.view(), &cfg).unwrap();
    let dist = |a: usize, b: usize| {
        ((y[[a, 0]] - y[[b, 0]]).powi(2) + (y[[a, 1]] - y[[b, 1]]).powi(2)).sqrt()
    };
    let mut inter = f64::INFINITY;
    for i in 0..100 {
        for j in 0..100 {
            if labels[i] != labels[j] {
                inter = inter.min(dist(i, j));
            }
        }
    }
    for (k, &orig) in dup_rows.iter().enumerate() {
        let d = dist(orig, 100 + k);
        assert!(d <= inter / 10.0, "duplicate {orig} at {d}, clusters {inter} apart");
    }
    for col in y.columns() {
        assert!(col.mean().unwrap().abs() <= 1e-8);
    }
}

#[test]
fn seeded_runs_are_identical() {
    let (x, _) = two_clusters(20, 46);
    let cfg = TsneConfig {
        perplexity: 10.0,
        iterations: 200,
        seed: 9,
        ..TsneConfig::default()
    };
    assert_eq!(tsne_project(x.view(), &cfg).unwrap(), tsne_project(x.view(), &cfg).unwrap());
}

#[test]
fn perplexity_must_fit_the_point_count() {
    let mut rng = common::rng(47);
    let x = common::gaussian(&mut rng, 50, 3, 1.0);
    assert!(matches!(
        tsne_project(x.view(), &TsneConfig::default()),
        Err(Error::PerplexityTooLarge { .. })
    ));
    let tiny = common::gaussian(&mut rng, 3, 3, 1.0);
    assert!(matches!(
        tsne_project(tiny.view(), &TsneConfig::default()),
        Err(Error::TooFewPoints(3))
    ));
}

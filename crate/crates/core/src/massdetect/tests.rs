use super::*;
use crate::imgcore::Point;
use crate::phantom::{Lesion, LesionKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy_cfg() -> MassConfig {
    MassConfig {
        patch_w1: 5,
        centroids_r: 2,
        pca_c: 2,
        knn_k: 3,
        smooth_side: 4,
        mcs_windows: vec![3, 5],
        kmeans_max_iterations: 100,
        kmeans_sample_cap: None,
        enhance: EnhanceConfig {
            window: 15,
            target_height: 48,
            ..EnhanceConfig::default()
        },
    }
}

/// 48x48 image: dark strip on the left, textured tissue, and a bright
/// 5x5 mass with its square annotation.
fn toy_image(seed: u64) -> (GrayImage, AnnotationSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = GrayImage::from_fn(48, 48, 8, |x, y| {
        if x < 6 {
            rng.gen_range(0..4)
        } else if (26..31).contains(&x) && (20..25).contains(&y) {
            200 + rng.gen_range(0..10)
        } else {
            100 + rng.gen_range(0..30)
        }
    })
    .unwrap();
    let b = vec![
        Point::new(26.0, 20.0),
        Point::new(30.0, 20.0),
        Point::new(30.0, 24.0),
        Point::new(26.0, 24.0),
    ];
    (img, AnnotationSet::new(vec![Lesion::new(1, LesionKind::Mass, b, Some(5)).unwrap()]))
}

#[test]
fn toy_training_separates_brightness() {
    let cfg = toy_cfg();
    let model = train(&[toy_image(1)], &cfg, 3).unwrap();
    assert_eq!(model.mass_centroids.len(), 2);
    assert_eq!(model.normal_centroids.len(), 2);
    assert_eq!(model.components(), 2);
    model.validate().unwrap();
    let pca = Pca {
        mean: model.pc_mean.clone(),
        basis: model.pc_basis.clone(),
    };
    let brightness = |rows: &[Vec<f64>]| {
        rows.iter()
            .map(|r| pca.reconstruct(r).iter().sum::<f64>() / 25.0)
            .sum::<f64>()
            / rows.len() as f64
    };
    assert!(brightness(&model.mass_centroids) > brightness(&model.normal_centroids));
}

#[test]
fn duplicated_image_stacks_copies() {
    let cfg = toy_cfg();
    let one = toy_image(2);
    let model = train(&[one.clone(), one], &cfg, 9).unwrap();
    assert_eq!(model.training_image_count, 2);
    assert_eq!(model.mass_centroids[..2], model.mass_centroids[2..]);
    assert_eq!(model.normal_centroids[..2], model.normal_centroids[2..]);
}

#[test]
fn training_is_deterministic() {
    let cfg = toy_cfg();
    let set = [toy_image(4), toy_image(5)];
    assert_eq!(train(&set, &cfg, 1).unwrap(), train(&set, &cfg, 1).unwrap());
}

#[test]
fn training_requires_mass_label() {
    let (img, _) = toy_image(1);
    let r = train(&[(img, AnnotationSet::default())], &toy_cfg(), 0);
    assert!(matches!(r, Err(Error::NoMassAnnotation)));
}

#[test]
fn self_consistent_scores() {
    let cfg = MassConfig {
        centroids_r: 6,
        knn_k: 5,
        ..toy_cfg()
    };
    let (img, ann) = toy_image(7);
    let model = train(&[(img.clone(), ann.clone())], &cfg, 2).unwrap();
    let s = score_image(&img, &model, &cfg).unwrap();
    let inside = ann.rasterize(48, 48, None);
    let mean = |want: bool| {
        let v: Vec<f64> = (0..48 * 48)
            .filter(|&i| s.mask.as_slice()[i] && inside[i] == want)
            .map(|i| s.scores[i])
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(true) > mean(false));
    assert!(s.scores.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(s.scores.iter().zip(s.mask.as_slice()).all(|(&v, &m)| m || v == 0.0));
}

#[test]
fn normalization_spans_unit_interval() {
    let cfg = MassConfig {
        centroids_r: 6,
        knn_k: 5,
        ..toy_cfg()
    };
    let set = [toy_image(8)];
    let model = train(&set, &cfg, 2).unwrap();
    let enh = enhance_image(&set[0].0, &model.enhance_cfg).unwrap();
    let raw = normalized_scores(&enh, &model, cfg.knn_k);
    let breast: Vec<f64> = raw.iter().zip(enh.mask.as_slice()).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
    assert_eq!(breast.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
    assert_eq!(breast.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
}

#[test]
fn empty_breast_is_an_error() {
    let cfg = toy_cfg();
    let model = train(&[toy_image(1)], &cfg, 3).unwrap();
    let flat = GrayImage::filled(48, 48, 8, 0).unwrap();
    assert!(score_image(&flat, &model, &cfg).is_err());
}

#[test]
fn window_mismatch_is_rejected() {
    let cfg = toy_cfg();
    let model = train(&[toy_image(1)], &cfg, 3).unwrap();
    let other = MassConfig { patch_w1: 7, ..cfg };
    assert!(score_image(&toy_image(1).0, &model, &other).is_err());
}

#[test]
fn smoothing_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (w, h) = (23, 17);
    let mask = BreastMask::from_fn(w, h, |x, y| x * 2 + y > 8);
    let scores: Vec<f64> = (0..w * h).map(|i| if mask.as_slice()[i] { rng.gen() } else { 0.0 }).collect();
    for side in [1, 4, 5, 10] {
        let got = smooth_scores(&scores, &mask, side);
        let lo = (side / 2) as isize;
        for y in 0..h as isize {
            for x in 0..w as isize {
                if !mask.contains(x as usize, y as usize) {
                    assert_eq!(got[y as usize * w + x as usize], 0.0);
                    continue;
                }
                let (mut s, mut c) = (0.0, 0.0);
                for yy in y - lo..y - lo + side as isize {
                    for xx in x - lo..x - lo + side as isize {
                        if mask.contains_signed(xx, yy) {
                            s += scores[yy as usize * w + xx as usize];
                            c += 1.0;
                        }
                    }
                }
                assert!((got[y as usize * w + x as usize] - s / c).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn ensemble_of_identical_models_equals_single() {
    let cfg = toy_cfg();
    let model = train(&[toy_image(3)], &cfg, 3).unwrap();
    let (img, _) = toy_image(3);
    let single = score_image(&img, &model, &cfg).unwrap();
    let mcs = score_image_mcs(&img, &[model.clone(), model], &cfg).unwrap();
    assert_eq!(single, mcs);
}

#[test]
fn complementary_maps_average_to_half() {
    let s: Vec<f64> = (0..50).map(|i| i as f64 / 49.0).collect();
    let c: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
    assert!(mean_maps(&[s, c]).unwrap().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    assert!(mean_maps(&[vec![0.0; 3], vec![0.0; 4]]).is_err());
}

#[test]
fn ensemble_training_covers_windows() {
    let cfg = toy_cfg();
    let models = train_mcs(&[toy_image(1)], &cfg, 0).unwrap();
    let w: Vec<usize> = models.iter().map(|m| m.patch_w1).collect();
    assert_eq!(w, vec![3, 5]);
    for m in &models {
        m.validate().unwrap();
    }
}

#[test]
fn config_invariants() {
    assert!(MassConfig::default().validate().is_ok());
    for bad in [
        MassConfig { patch_w1: 4, ..MassConfig::default() },
        MassConfig { centroids_r: 0, ..MassConfig::default() },
        MassConfig { pca_c: 0, ..MassConfig::default() },
        MassConfig { pca_c: 442, ..MassConfig::default() },
        MassConfig { knn_k: 140, ..MassConfig::default() },
        MassConfig { mcs_windows: vec![9, 10], ..MassConfig::default() },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}

//! Checks against renderer ground truth and straight-line re-implementations.

#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use flashgray::flashgp::{
    cluster_gray_pixels, flash_only, interpolate_illumination, Cluster, ClusterModel, FlashPair,
};
use flashgray::grayness::{grayness, select_top_gray, GraynessConfig, GraynessMethod};
use flashgray::{LinearImage, PixelMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn flash_only_recovers_the_flash_term() {
    for scene in [
        two_light_scene(64, WHITE),
        two_light_scene(48, [0.9, 1.0, 0.8]),
        sphere_scene(
            40,
            vec![light([0.5, 0.2, 0.8], WARM)],
            light([0.0, 0.0, 1.0], COOL),
        ),
    ] {
        let t = scene.triplet().unwrap();
        let pair = FlashPair::new(t.ambient, t.flash, None).unwrap();
        let fo = flash_only(&pair, 1e-3).unwrap();
        let term = scene.flash_term().unwrap();
        let worst = fo
            .image
            .pixels()
            .iter()
            .zip(term.pixels())
            .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).abs()))
            .fold(0.0, f64::max);
        assert!(worst <= 1e-9, "max channel deviation {worst}");
    }
}

/// Uniformly lit achromatic albedo: every channel is a scaled copy of one image.
fn single_chroma_rendering() -> LinearImage {
    let scene = sphere_scene(
        40,
        vec![light([-0.4, 0.3, 0.85], WARM)],
        light([0.0, 0.0, 1.0], WHITE),
    );
    scene.triplet().unwrap().ambient
}

#[test]
fn achromatic_albedo_has_zero_grayness() {
    let lit = sphere_scene(
        40,
        vec![light([0.6, 0.0, 0.8], WARM)],
        light([0.1, 0.1, 1.0], COOL),
    );
    let imgs = [single_chroma_rendering(), lit.flash_term().unwrap()];
    for img in &imgs {
        for method in GraynessMethod::ALL {
            let g = grayness(method, img, &GraynessConfig::default()).unwrap();
            assert!(g.map.valid_count() > 100, "{method}: too few valid pixels");
            for (i, v) in g.map.valid_values() {
                assert!(v.abs() <= 1e-9, "{method}: grayness {v} at pixel {i}");
            }
        }
    }
}

#[test]
fn grayness_is_exposure_invariant() {
    let img = two_light_scene(48, WHITE).triplet().unwrap().ambient;
    assert!(img.pixels().iter().flatten().all(|&v| v * 0.25 > 1e-3));
    for method in GraynessMethod::ALL {
        let base = grayness(method, &img, &GraynessConfig::default()).unwrap();
        for k in [0.25, 4.0] {
            let scaled =
                grayness(method, &img.scaled(k).unwrap(), &GraynessConfig::default()).unwrap();
            assert_eq!(base.map.validity(), scaled.map.validity(), "{method} k={k}");
            for (i, v) in base.map.valid_values() {
                let d = (v - scaled.map.values()[i]).abs();
                assert!(d <= 1e-8, "{method} k={k}: pixel {i} differs by {d}");
            }
        }
    }
}

/// Direct evaluation of the blend: unshifted exponentials, then normalization.
fn blend_directly(model: &ClusterModel, x: usize, y: usize) -> [f64; 3] {
    let mut num = [0.0; 3];
    let mut den = 0.0;
    for c in &model.clusters {
        let dx = x as f64 - c.centroid[0];
        let dy = y as f64 - c.centroid[1];
        let d = (dx * dx + dy * dy).sqrt();
        let w = (-d / (2.0 * model.sigma * model.sigma)).exp();
        den += w;
        for k in 0..3 {
            num[k] += w * c.chroma[k];
        }
    }
    let l: Vec<f64> = num.iter().map(|v| v / den).collect();
    let n = (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt();
    [l[0] / n, l[1] / n, l[2] / n]
}

fn random_model(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ClusterModel {
    let m = rng.random_range(1..=8);
    let clusters = (0..m)
        .map(|_| {
            let c: [f64; 3] = [0, 1, 2].map(|_| rng.random_range(0.05..1.0));
            let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            Cluster {
                centroid: [
                    rng.random_range(0.0..w as f64),
                    rng.random_range(0.0..h as f64),
                ],
                chroma: c.map(|v| v / n),
                members: 1,
            }
        })
        .collect();
    ClusterModel {
        clusters,
        sigma: rng.random_range(0.5..8.0),
    }
}

fn assert_matches_direct(model: &ClusterModel, w: usize, h: usize) {
    let map = interpolate_illumination(model, w, h).unwrap();
    for y in 0..h {
        for x in 0..w {
            let got = map.get(x, y).unwrap();
            let want = blend_directly(model, x, y);
            for k in 0..3 {
                assert!(
                    (got[k] - want[k]).abs() <= 1e-12,
                    "({x},{y}) {got:?} vs {want:?}"
                );
            }
            let sum: f64 = model.weights(x as f64, y as f64).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "weights sum to {sum}");
        }
    }
}

#[test]
fn interpolation_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..200 {
        let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
        assert_matches_direct(&random_model(&mut rng, w, h), w, h);
    }
}

#[test]
fn interpolation_of_clustered_gray_pixels_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20u64 {
        let (w, h) = (16, 12);
        let img = LinearImage::from_fn(w, h, |_, _| [0, 1, 2].map(|_| rng.random_range(0.05..1.0)))
            .unwrap();
        let g = grayness(GraynessMethod::Gp, &img, &GraynessConfig::default()).unwrap();
        // 8 of the ~96 valid pixels.
        let set = select_top_gray(
            &g,
            &img,
            8.0 / g.map.valid_count() as f64,
            &PixelMask::full(w, h),
        )
        .unwrap();
        assert!(set.len() <= 8 && !set.is_empty());
        let clusters = 1 + trial as usize % set.len().min(8);
        let model = cluster_gray_pixels(&set, clusters, trial)
            .unwrap()
            .with_sigma(3.0);
        assert_matches_direct(&model, w, h);
    }
}

#[test]
fn adjacent_pixels_respect_the_lipschitz_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let (w, h) = (48, 40);
        let mut model = random_model(&mut rng, w, h);
        model.sigma = rng.random_range(2.0..20.0);
        let spread = model
            .clusters
            .iter()
            .flat_map(|a| model.clusters.iter().map(move |b| (a, b)))
            .map(|(a, b)| {
                let d: Vec<f64> = (0..3).map(|k| a.chroma[k] - b.chroma[k]).collect();
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
            })
            .fold(0.0, f64::max);
        let bound = spread / model.sigma;
        let map = interpolate_illumination(&model, w, h).unwrap();
        for y in 0..h {
            for x in 0..w {
                let p = map.get(x, y).unwrap();
                for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                    if nx >= w || ny >= h {
                        continue;
                    }
                    let q = map.get(nx, ny).unwrap();
                    let cos = (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]).clamp(-1.0, 1.0);
                    assert!(
                        cos.acos() <= bound + 1e-12,
                        "step {} exceeds {bound}",
                        cos.acos()
                    );
                }
            }
        }
    }
}

/// Unnormalized-then-normalized LoG weights, sign flipped to a positive center.
fn mexican_hat_by_hand(sigma: f64) -> (usize, Vec<Vec<f64>>) {
    let r = (3.0 * sigma).ceil() as i64;
    let n = (2 * r + 1) as usize;
    let mut g = vec![vec![0.0; n]; n];
    let mut total = 0.0;
    for (a, row) in g.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let (dy, dx) = (a as i64 - r, b as i64 - r);
            *v = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    let mut h = vec![vec![0.0; n]; n];
    let mut sum = 0.0;
    for a in 0..n {
        for b in 0..n {
            let (dy, dx) = (a as i64 - r, b as i64 - r);
            let r2 = (dx * dx + dy * dy) as f64;
            h[a][b] = g[a][b] / total * (r2 - 2.0 * sigma * sigma) / sigma.powi(4);
            sum += h[a][b];
        }
    }
    let mean = sum / (n * n) as f64;
    for row in h.iter_mut() {
        for v in row.iter_mut() {
            *v = -(*v - mean);
        }
    }
    (r as usize, h)
}

#[test]
fn nine_by_nine_patch_matches_straight_line_grayness() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let img =
        LinearImage::from_fn(9, 9, |_, _| [0, 1, 2].map(|_| rng.random_range(0.02..1.0))).unwrap();
    let (r, hat) = mexican_hat_by_hand(0.5);
    let px = |x: usize, y: usize| img.pixel(x, y);
    let filter = |f: &dyn Fn(usize, usize) -> f64, x: usize, y: usize| -> f64 {
        let mut acc = 0.0;
        for a in 0..=2 * r {
            for b in 0..=2 * r {
                acc += hat[a][b] * f(x + b - r, y + a - r);
            }
        }
        acc
    };
    let maps = GraynessMethod::ALL.map(|m| grayness(m, &img, &GraynessConfig::default()).unwrap());
    for y in r..9 - r {
        for x in r..9 - r {
            let d = [0, 1, 2].map(|c| filter(&|u, v| px(u, v)[c].ln(), x, y));
            let mean = (d[0] + d[1] + d[2]) / 3.0;
            let gp = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / mean.abs();
            let a = d.map(f64::abs);
            let cos = (a[0] + a[1] + a[2])
                / (3f64.sqrt() * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt());
            let msgp = cos.clamp(-1.0, 1.0).acos();
            let rel = |c: usize| {
                filter(
                    &|u, v| {
                        let p = px(u, v);
                        p[c].ln() - (p[0] + p[1] + p[2]).ln()
                    },
                    x,
                    y,
                )
            };
            let dgp = rel(0).hypot(rel(1));
            for (map, want, tol) in [
                (&maps[0], gp, 1e-9),
                (&maps[1], msgp, 1e-7),
                (&maps[2], dgp, 1e-12),
            ] {
                let got = map.get(x, y).expect("interior pixel is valid");
                assert!(
                    (got - want).abs() <= tol * want.abs().max(1.0),
                    "{} at ({x},{y}): {got} vs {want}",
                    map.method
                );
            }
        }
    }
    // Border pixels lack full filter support.
    assert_eq!(maps[0].get(0, 4), None);
    assert_eq!(maps[0].map.valid_count(), (9 - 2 * r) * (9 - 2 * r));
}

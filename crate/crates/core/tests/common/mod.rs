#![allow(dead_code)]

use flashgray::evalbench::angular_error;
use flashgray::flashgp::IlluminationMap;
use flashgray::scenesynth::{
    render_procedural, AlbedoLayout, Bump, Geometry, Light, Patch, RenderedScene, SceneSpec, Sphere,
};

pub const WHITE: [f64; 3] = [1.0, 1.0, 1.0];
pub const WARM: [f64; 3] = [0.85, 0.45, 0.28];
pub const COOL: [f64; 3] = [0.3, 0.5, 0.81];

pub fn light(direction: [f64; 3], chroma: [f64; 3]) -> Light {
    let n = chroma.iter().map(|c| c * c).sum::<f64>().sqrt();
    Light {
        direction,
        chroma: chroma.map(|c| c / n),
    }
}

pub fn textured_gray(seed: u64, patches: Vec<Patch>) -> AlbedoLayout {
    AlbedoLayout {
        gray_level: 0.5,
        texture_amplitude: 0.35,
        texture_seed: seed,
        patches,
    }
}

/// Rolling terrain covering the whole frame.
pub fn terrain(size: usize) -> Geometry {
    let s = size as f64;
    Geometry::HeightField(vec![
        Bump {
            center: [0.3 * s, 0.35 * s],
            width: 0.15 * s,
            height: 0.12 * s,
        },
        Bump {
            center: [0.7 * s, 0.6 * s],
            width: 0.12 * s,
            height: 0.1 * s,
        },
        Bump {
            center: [0.45 * s, 0.8 * s],
            width: 0.1 * s,
            height: 0.06 * s,
        },
    ])
}

/// Gray-dominant terrain lit by a warm light from the left and a cool one
/// from the right, with a frontal flash of the given chroma.
pub fn two_light_scene(size: usize, flash: [f64; 3]) -> RenderedScene {
    let s = size as f64;
    let spec = SceneSpec {
        geometry: terrain(size),
        albedo: textured_gray(
            11,
            vec![Patch {
                center: [0.6 * s, 0.3 * s],
                radius: 0.08 * s,
                color: [0.6, 0.15, 0.1],
            }],
        ),
        lights: vec![light([-0.8, 0.0, 0.6], WARM), light([0.8, 0.0, 0.6], COOL)],
        flash: light([0.05, -0.04, 1.0], flash),
    };
    render_procedural(&spec, size, size).unwrap()
}

pub fn sphere_scene(size: usize, lights: Vec<Light>, flash: Light) -> RenderedScene {
    let s = size as f64;
    let spec = SceneSpec {
        geometry: Geometry::Spheres(vec![Sphere {
            center: [s / 2.0, s / 2.0],
            radius: 0.45 * s,
        }]),
        albedo: textured_gray(5, vec![]),
        lights,
        flash,
    };
    render_procedural(&spec, size, size).unwrap()
}

/// Mean angular error over pixels valid in both maps.
pub fn mean_angle(a: &IlluminationMap, b: &IlluminationMap) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..a.vectors().len() {
        if let (Some(u), Some(v)) = (a.at(i), b.at(i)) {
            sum += angular_error(u, v).unwrap();
            n += 1;
        }
    }
    assert!(n > 0, "maps share no valid pixel");
    sum / n as f64
}

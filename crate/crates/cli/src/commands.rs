use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use flashgray::evalbench::{run_benchmark, BenchConfig, Variant};
use flashgray::flashgp::{correct_image, estimate_without_flash, EstimateOutput};
use flashgray::grayness::GraynessConfig;
use flashgray::imgcore::{
    load_image, load_mask_png, save_image, save_rgb8_png, save_scalar_pfm, ImageFormat,
};
use flashgray::scenesynth::{
    build_dataset, load_mit_dataset, procedural_stacks, write_dataset, FlashChroma, SynthConfig,
};
use flashgray::{EstimatorConfig, FlashPair, IlluminationMap, LinearImage, MaskedImage};

use crate::{BenchArgs, CorrectArgs, EstimateArgs, EstimatorArgs, SynthesizeArgs};

fn load(path: &Path) -> Result<LinearImage> {
    let format = ImageFormat::from_path(path)?;
    Ok(load_image(path, format)?)
}

fn estimator_config(a: &EstimatorArgs, clusters: usize) -> EstimatorConfig {
    EstimatorConfig {
        method: a.method.into(),
        grayness: GraynessConfig {
            sigma: a.sigma,
            ..GraynessConfig::default()
        },
        fraction: a.fraction,
        clusters,
        spatial_sigma: a.spatial_sigma,
        seed: a.seed,
        ..EstimatorConfig::default()
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Linear image scaled so its brightest valid channel reads 1, as 16-bit PNG.
fn save_display(img: &MaskedImage, path: &Path) -> Result<()> {
    let peak = img
        .image
        .pixels()
        .iter()
        .zip(img.mask.as_slice())
        .filter(|(_, &m)| m)
        .flat_map(|(p, _)| p.iter().copied())
        .fold(0.0f64, f64::max);
    let scaled = if peak > 0.0 {
        img.image.scaled(1.0 / peak)?
    } else {
        img.image.clone()
    };
    Ok(save_image(&scaled, path, ImageFormat::Png16)?)
}

fn save_map(map: &IlluminationMap, dir: &Path) -> Result<()> {
    map.save_pfm(dir.join("illumination.pfm"))?;
    save_rgb8_png(
        dir.join("illumination.png"),
        map.width(),
        map.height(),
        &map.to_rgb8(),
    )?;
    Ok(())
}

fn save_debug(out: &EstimateOutput, dir: &Path) -> Result<()> {
    save_scalar_pfm(&out.grayness.map, dir.join("grayness.pfm"))?;
    out.gray_pixels.save_csv(dir.join("gray_pixels.csv"))?;
    let clusters = serde_json::to_string_pretty(&out.clusters)?;
    fs::write(dir.join("clusters.json"), clusters + "\n").context("writing clusters.json")?;
    if let Some(fo) = &out.flash_only {
        save_image(&fo.image, dir.join("flash_only.pfm"), ImageFormat::Pfm)?;
    }
    if let Some(l) = &out.flash_illumination {
        l.save_pfm(dir.join("flash_illumination.pfm"))?;
    }
    if let Some(a) = &out.albedo {
        save_image(&a.image, dir.join("albedo.pfm"), ImageFormat::Pfm)?;
    }
    Ok(())
}

pub fn estimate(a: &EstimateArgs, out: &Path) -> Result<()> {
    let cfg = estimator_config(&a.estimator, a.clusters);
    cfg.validate()?;
    let ambient = load(&a.ambient)?;
    let flash = load(&a.flash)?;
    let mask = a.mask.as_deref().map(load_mask_png).transpose()?;
    let pair = if a.lenient {
        FlashPair::new_lenient(ambient, flash, mask)?
    } else {
        FlashPair::new(ambient, flash, mask)?
    };
    let result = flashgray::estimate(&pair, &cfg).context("flash gray pixel estimation failed")?;
    create_dir(out)?;
    save_map(&result.illumination, out)?;
    save_display(
        &correct_image(&pair.ambient, &result.illumination)?,
        &out.join("corrected.png"),
    )?;
    if a.debug {
        save_debug(&result, out)?;
        let baseline = estimate_without_flash(
            &MaskedImage::new(pair.ambient.clone(), pair.mask.clone())?,
            &cfg,
        );
        match baseline {
            Ok(b) => b
                .illumination
                .save_pfm(out.join("illumination_noflash.pfm"))?,
            Err(e) => log::warn!("no-flash baseline failed: {e}"),
        }
    }
    println!(
        "{} gray pixels in {} clusters; {} valid pixels; wrote {}",
        result.gray_pixels.len(),
        result.clusters.clusters.len(),
        result.illumination.valid_count(),
        out.join("illumination.pfm").display()
    );
    Ok(())
}

pub fn synthesize(a: &SynthesizeArgs, out: &Path) -> Result<()> {
    let stacks = match &a.stacks {
        Some(dir) => load_mit_dataset(dir)?,
        None => procedural_stacks(a.objects, a.seed, a.size, a.size)?,
    };
    let cfg = SynthConfig {
        flash: a
            .flash_chroma
            .map_or(FlashChroma::Sampled, FlashChroma::Fixed),
        noise_sigma: a.noise,
    };
    let triplets = build_dataset(&stacks, a.n_min..=a.n_max, a.seed, &cfg)?;
    let manifest = write_dataset(&triplets, out)?;
    println!(
        "{} triplets from {} objects; manifest {}",
        triplets.len(),
        stacks.len(),
        manifest.display()
    );
    Ok(())
}

pub fn bench(a: &BenchArgs, out: &Path) -> Result<()> {
    let cfg = BenchConfig {
        variants: if a.variants.is_empty() {
            Variant::all()
        } else {
            a.variants.clone()
        },
        estimator: EstimatorConfig {
            fraction: a.fraction,
            seed: a.seed,
            ..EstimatorConfig::default()
        },
        clusters_from_n: true,
    };
    let report = run_benchmark(&a.manifest, &cfg)?;
    create_dir(out)?;
    let text = report.to_text();
    fs::write(out.join("results.json"), report.to_json() + "\n").context("writing results.json")?;
    fs::write(out.join("results.txt"), &text).context("writing results.txt")?;
    fs::write(out.join("per_image.csv"), report.per_image_csv())
        .context("writing per_image.csv")?;
    print!("{text}");
    Ok(())
}

pub fn correct(a: &CorrectArgs, out: &Path) -> Result<()> {
    let img = load(&a.image)?;
    let map = IlluminationMap::load_pfm(&a.map)?;
    let corrected = correct_image(&img, &map)?;
    create_dir(out)?;
    let path = out.join(&a.name);
    match ImageFormat::from_path(&path)? {
        ImageFormat::Pfm => save_image(&corrected.image, &path, ImageFormat::Pfm)?,
        ImageFormat::Png16 => save_display(&corrected, &path)?,
    }
    println!("wrote {}", path.display());
    Ok(())
}

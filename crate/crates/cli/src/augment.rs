//! `augment`: mirror a dataset tree through one of the two filters.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use freqgen::par;
use freqgen::raster::{read_image, write_image, Image};
use freqgen::seed;
use freqgen::spatial::{high_freq_for_network, GaussianKernel};
use freqgen::spectral::{two_step_highpass, AugmentParams, ParamSampler, SamplerToggles};
use walkdir::WalkDir;

use crate::error::{CliError, CliResult};
use crate::{pool, resolve_seed, AugmentArgs, Mode};

pub const MANIFEST: &str = "manifest.csv";
const EXTENSIONS: [&str; 4] = ["png", "ppm", "pgm", "pnm"];

enum Plan {
    Fixed(AugmentParams),
    Random { seed: u64, toggles: SamplerToggles },
    Gaussian(GaussianKernel),
}

fn absolute(p: &Path) -> CliResult<PathBuf> {
    match p.canonicalize() {
        Ok(c) => Ok(c),
        Err(_) => std::path::absolute(p).map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
    }
}

/// Relative paths of supported images under `root`, sorted, with `/`
/// separators.
fn discover(root: &Path) -> CliResult<Vec<String>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::io(e.to_string()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let supported = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if !supported {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("walk stays under its root");
        let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
        out.push(parts.join("/"));
    }
    Ok(out)
}

fn plan(args: &AugmentArgs) -> CliResult<Plan> {
    match args.mode {
        Mode::Gaussian => {
            if args.d.is_some() || args.alpha.is_some() || args.beta.is_some() || args.random {
                return Err(CliError::usage("--d/--alpha/--beta/--random apply to two-step mode only"));
            }
            Ok(Plan::Gaussian(GaussianKernel::for_size(args.kernel)?))
        }
        Mode::TwoStep if args.random => Ok(Plan::Random {
            seed: resolve_seed(args.seed)?,
            toggles: SamplerToggles {
                amplitude_scaling: !args.no_amplitude_scaling,
                phase_scaling: !args.no_phase_scaling,
            },
        }),
        Mode::TwoStep => {
            let d = args.d.ok_or_else(|| CliError::usage("two-step mode needs --d (or --random)"))?;
            Ok(Plan::Fixed(AugmentParams::new(d, args.alpha.unwrap_or(1.0), args.beta.unwrap_or(1.0))?))
        }
    }
}

/// Processes one image and returns its manifest fields after the path.
fn process(plan: &Plan, src: &Path, dst: &Path, rel: &str) -> freqgen::Result<String> {
    let img = read_image(src)?;
    let (out, fields) = match plan {
        Plan::Fixed(p) => (two_step_highpass(&img, p)?, format!("{},{},{}", p.d, p.alpha, p.beta)),
        Plan::Random { seed: s, toggles } => {
            let p = ParamSampler::with_toggles(seed::derive_from_key(*s, rel), *toggles).sample(img.height(), img.width());
            (two_step_highpass(&img, &p)?, format!("{},{},{}", p.d, p.alpha, p.beta))
        }
        Plan::Gaussian(k) => {
            let hf = high_freq_for_network(&img, k.size())?;
            // Keep gray files gray.
            let out = if img.channels() == 1 { Image::from_planes(img.height(), img.width(), &[hf.plane(0)])? } else { hf };
            (out, k.size().to_string())
        }
    };
    if let Some(parent) = dst.parent() {
        fs::create_dir_all(parent).map_err(|e| freqgen::Error::Io { path: parent.to_path_buf(), source: e })?;
    }
    write_image(&out, dst)?;
    Ok(fields)
}

pub fn run(args: &AugmentArgs) -> CliResult {
    if !args.in_dir.is_dir() {
        return Err(CliError::io(format!("{} is not a directory", args.in_dir.display())));
    }
    let (src_root, dst_root) = (absolute(&args.in_dir)?, absolute(&args.out_dir)?);
    if dst_root.starts_with(&src_root) {
        return Err(CliError::usage("the output directory must lie outside the input directory"));
    }
    let plan = plan(args)?;
    let files = discover(&src_root)?;
    if files.is_empty() {
        log::warn!("no png/ppm/pgm/pnm images under {}", args.in_dir.display());
    }

    if !args.force {
        let taken: Vec<&str> = std::iter::once(MANIFEST)
            .chain(files.iter().map(String::as_str))
            .filter(|rel| dst_root.join(rel).exists())
            .collect();
        if let Some(first) = taken.first() {
            return Err(CliError::usage(format!(
                "{} output file(s) already exist, e.g. {}; pass --force to overwrite",
                taken.len(),
                dst_root.join(first).display()
            )));
        }
    }
    fs::create_dir_all(&dst_root).map_err(|e| CliError::io(format!("{}: {e}", dst_root.display())))?;

    let results = pool::with_workers(args.workers, |exec| {
        par::map(exec, &files, |rel| process(&plan, &src_root.join(rel), &dst_root.join(rel), rel))
    });

    let mut manifest = String::from(match plan {
        Plan::Gaussian(_) => "path,kernel_size\n",
        _ => "path,d,alpha,beta\n",
    });
    let mut skipped = 0;
    for (rel, result) in files.iter().zip(results) {
        match result {
            Ok(fields) => writeln!(manifest, "{rel},{fields}").expect("writing to a String"),
            Err(e) => {
                log::error!("skipped {rel}: {e}");
                skipped += 1;
            }
        }
    }
    let manifest_path = dst_root.join(MANIFEST);
    fs::write(&manifest_path, manifest).map_err(|e| CliError::io(format!("{}: {e}", manifest_path.display())))?;
    log::info!("augmented {} of {} images into {}", files.len() - skipped, files.len(), args.out_dir.display());
    if skipped > 0 {
        return Err(CliError::io(format!("{skipped} image(s) could not be processed")));
    }
    Ok(())
}

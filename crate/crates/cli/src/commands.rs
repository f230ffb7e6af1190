//! `spectrum`, `gradcheck`, `train` and `sweep`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use freqgen::gradcheck::{check_model, check_tail, TOLERANCE};
use freqgen::harness::report::mean_std;
use freqgen::harness::{ablation_csv, ablation_rows, ablation_table, metrics_csv, run_grid, Augmentation, ExperimentConfig};
use freqgen::raster::{read_image, write_image};
use freqgen::spectral::spectrum_display;

use crate::error::{CliError, CliResult};
use crate::{pool, resolve_seed, SweepParam};

fn ensure_parent(path: &Path) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(format!("{}: {e}", parent.display())))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn spectrum(image: &Path, out_prefix: &Path) -> CliResult {
    let img = read_image(image)?;
    let (amp, phase) = spectrum_display(&img)?;
    let (amp_path, phase_path) = (with_suffix(out_prefix, "_amplitude.png"), with_suffix(out_prefix, "_phase.png"));
    ensure_parent(&amp_path)?;
    write_image(&amp, &amp_path)?;
    write_image(&phase, &phase_path)?;
    log::info!("wrote {} and {}", amp_path.display(), phase_path.display());
    Ok(())
}

pub fn gradcheck(seed: u64) -> CliResult {
    let mut report = check_tail(seed)?;
    report.extend(check_model(seed)?);
    let mut failed = 0;
    for r in &report {
        let verdict = if r.passed() { "ok" } else { "FAIL" };
        println!("{:<16} {:.3e}  {verdict}", r.name, r.max_rel_error);
        failed += usize::from(!r.passed());
    }
    if failed > 0 {
        return Err(CliError::check(format!("{failed} gradient check(s) above {TOLERANCE:e}")));
    }
    Ok(())
}

/// Whether the config text sets `seed` itself.
fn sets_seed(text: &str) -> bool {
    text.lines().any(|l| {
        l.split('#')
            .next()
            .and_then(|l| l.split_once('='))
            .is_some_and(|(k, _)| k.trim() == "seed")
    })
}

fn load_config(path: &Path, seed_flag: Option<u64>) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if seed_flag.is_some() || !sets_seed(&text) {
        cfg.seed = resolve_seed(seed_flag)?;
    }
    Ok(cfg)
}

pub fn train(config: &Path, out: &Path, seed: Option<u64>, ablation_seeds: Option<&[u64]>, table: Option<&Path>) -> CliResult {
    let cfg = load_config(config, seed)?;
    let metrics = match ablation_seeds {
        Some(seeds) => {
            if seeds.is_empty() {
                return Err(CliError::usage("--seeds must list at least one seed"));
            }
            run_grid(&cfg.ablation_grid(), seeds, freqgen::par::Exec::Auto)?
        }
        None => vec![freqgen::harness::train(&cfg)?],
    };
    for m in metrics.iter().filter(|m| m.any_diverged()) {
        log::warn!("{} seed {} diverged in at least one fold", m.config, m.seed);
    }
    write_text(out, &metrics_csv(&metrics))?;
    let rows = ablation_rows(&metrics);
    print!("{}", ablation_table(&rows));
    if let Some(path) = table {
        write_text(path, &ablation_csv(&rows))?;
    }
    Ok(())
}

fn apply(cfg: &mut ExperimentConfig, param: SweepParam, value: &str) -> CliResult {
    let (key, augmentation) = match param {
        SweepParam::UnitSize => ("unit_size", None),
        SweepParam::KernelSize => ("kernel_size", Some(Augmentation::Gaussian)),
        SweepParam::Severity => ("severity", Some(Augmentation::TwoStep)),
        SweepParam::Scaling => ("scaling", Some(Augmentation::TwoStep)),
        SweepParam::EmbedDim => ("embed_dim", None),
        SweepParam::Epochs => ("epochs", None),
        SweepParam::LearningRate => ("learning_rate", None),
    };
    cfg.set(key, value).map_err(|m| CliError::usage(format!("--values {value}: {m}")))?;
    if param == SweepParam::UnitSize {
        cfg.use_tail_interaction = true;
    }
    if let Some(a) = augmentation {
        cfg.augmentation = a;
    }
    cfg.validate()?;
    cfg.name = format!("{key}={value}");
    Ok(())
}

pub fn sweep(param: SweepParam, values: &[String], config: &Path, out: &Path, seeds: &[u64], workers: Option<usize>) -> CliResult {
    let base = load_config(config, None)?;
    let seeds = if seeds.is_empty() { vec![base.seed] } else { seeds.to_vec() };
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            apply(&mut cfg, param, v)?;
            Ok(cfg)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let metrics = pool::with_workers(workers, |exec| run_grid(&configs, &seeds, exec))?;

    let mut csv = String::from("param,value,mean,std,seeds\n");
    let param_name = param.to_possible_value().expect("no skipped variants").get_name().to_string();
    for (cfg, value) in configs.iter().zip(values) {
        let accs: Vec<f64> = metrics
            .iter()
            .filter(|m| m.config == cfg.name)
            .map(|m| m.mean_held_out_accuracy())
            .collect();
        let (mean, std) = mean_std(&accs);
        writeln!(csv, "{param_name},{value},{mean:.6},{std:.6},{}", accs.len()).expect("writing to a String");
        println!("{:<24} {:6.2} ± {:5.2}", cfg.name, 100.0 * mean, 100.0 * std);
    }
    write_text(out, &csv)
}

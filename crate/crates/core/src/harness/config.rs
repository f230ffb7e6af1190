//! Experiment configuration and its `key = value` file format.
//!
//! One key per line, `#` starts a comment, unknown keys are errors. Every
//! key is optional and falls back to [`ExperimentConfig::default`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Augmentation {
    None,
    Gaussian,
    TwoStep,
}

impl FromStr for Augmentation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(Augmentation::None),
            "gaussian" => Ok(Augmentation::Gaussian),
            "two_step" => Ok(Augmentation::TwoStep),
            other => Err(format!("unknown augmentation '{other}' (none, gaussian, two_step)")),
        }
    }
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Augmentation::None => "none",
            Augmentation::Gaussian => "gaussian",
            Augmentation::TwoStep => "two_step",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub augmentation: Augmentation,
    pub use_tail_interaction: bool,
    pub use_phase_scaling: bool,
    pub use_amplitude_scaling: bool,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub nesterov: bool,
    pub samples_per_class: usize,
    pub val_fraction: f64,
    pub spurious_strength: f64,
    pub patch_size: usize,
    pub embed_dim: usize,
    pub unit_size: usize,
    pub tail_layers: usize,
    pub kernel_size: usize,
    /// Fixed severity percentage in 1..=5; `None` samples it per image.
    pub severity: Option<usize>,
    /// Fixed scaling factor for α and β; `None` samples them per image.
    pub scaling: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "baseline".into(),
            augmentation: Augmentation::None,
            use_tail_interaction: false,
            use_phase_scaling: true,
            use_amplitude_scaling: true,
            seed: 0,
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            nesterov: true,
            samples_per_class: 40,
            val_fraction: 0.2,
            spurious_strength: super::data::DEFAULT_SPURIOUS_STRENGTH,
            patch_size: 8,
            embed_dim: 48,
            unit_size: 16,
            tail_layers: 1,
            kernel_size: 9,
            severity: None,
            scaling: None,
        }
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got '{v}'")),
    }
}

fn parse_num<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("cannot parse '{v}': {e}"))
}

fn parse_optional<T: FromStr>(v: &str) -> std::result::Result<Option<T>, String>
where
    T::Err: fmt::Display,
{
    if v.eq_ignore_ascii_case("random") {
        Ok(None)
    } else {
        parse_num(v).map(Some)
    }
}

fn show_optional<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "random".to_string(), |x| x.to_string())
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key.replace('-', "_").as_str() {
            "name" => self.name = value.to_string(),
            "augmentation" => self.augmentation = value.parse()?,
            "tail_interaction" | "use_tail_interaction" => self.use_tail_interaction = parse_bool(value)?,
            "phase_scaling" | "use_phase_scaling" => self.use_phase_scaling = parse_bool(value)?,
            "amplitude_scaling" | "use_amplitude_scaling" => self.use_amplitude_scaling = parse_bool(value)?,
            "seed" => self.seed = parse_num(value)?,
            "epochs" => self.epochs = parse_num(value)?,
            "batch_size" => self.batch_size = parse_num(value)?,
            "learning_rate" | "lr" => self.learning_rate = parse_num(value)?,
            "momentum" => self.momentum = parse_num(value)?,
            "weight_decay" => self.weight_decay = parse_num(value)?,
            "nesterov" => self.nesterov = parse_bool(value)?,
            "samples_per_class" => self.samples_per_class = parse_num(value)?,
            "val_fraction" => self.val_fraction = parse_num(value)?,
            "spurious_strength" => self.spurious_strength = parse_num(value)?,
            "patch_size" => self.patch_size = parse_num(value)?,
            "embed_dim" => self.embed_dim = parse_num(value)?,
            "unit_size" => self.unit_size = parse_num(value)?,
            "tail_layers" => self.tail_layers = parse_num(value)?,
            "kernel_size" => self.kernel_size = parse_num(value)?,
            "severity" => self.severity = parse_optional(value)?,
            "scaling" => self.scaling = parse_optional(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                key: line.to_string(),
                message: "expected 'key = value'".into(),
            })?;
            let key = key.trim();
            cfg.set(key, value.trim()).map_err(|message| Error::Config {
                line: i + 1,
                key: key.to_string(),
                message,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.epochs == 0 || self.batch_size == 0 || self.samples_per_class == 0 {
            return bad("epochs, batch_size and samples_per_class must be positive");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || !(0.0..1.0).contains(&self.momentum) || self.weight_decay < 0.0 {
            return bad("learning_rate > 0, 0 <= momentum < 1 and weight_decay >= 0 are required");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.spurious_strength) {
            return bad("spurious_strength must lie in [0, 1]");
        }
        if self.embed_dim == 0 || self.unit_size == 0 || self.patch_size == 0 {
            return bad("patch_size, embed_dim and unit_size must be positive");
        }
        if self.kernel_size.is_multiple_of(2) {
            return bad("kernel_size must be odd");
        }
        if self.severity.is_some_and(|p| !(1..=5).contains(&p)) {
            return bad("severity must be 1..=5 or random");
        }
        if self.scaling.is_some_and(|f| !(f > 0.0 && f <= 1.0)) {
            return bad("scaling must lie in (0, 1] or be random");
        }
        Ok(())
    }

    /// Serializes every key, in the format [`ExperimentConfig::parse`] reads.
    pub fn to_kv_string(&self) -> String {
        format!(
            "name = {}\naugmentation = {}\ntail_interaction = {}\nphase_scaling = {}\n\
             amplitude_scaling = {}\nseed = {}\nepochs = {}\nbatch_size = {}\n\
             learning_rate = {}\nmomentum = {}\nweight_decay = {}\nnesterov = {}\n\
             samples_per_class = {}\nval_fraction = {}\nspurious_strength = {}\n\
             patch_size = {}\nembed_dim = {}\nunit_size = {}\ntail_layers = {}\nkernel_size = {}\n\
             severity = {}\nscaling = {}\n",
            self.name,
            self.augmentation,
            self.use_tail_interaction,
            self.use_phase_scaling,
            self.use_amplitude_scaling,
            self.seed,
            self.epochs,
            self.batch_size,
            self.learning_rate,
            self.momentum,
            self.weight_decay,
            self.nesterov,
            self.samples_per_class,
            self.val_fraction,
            self.spurious_strength,
            self.patch_size,
            self.embed_dim,
            self.unit_size,
            self.tail_layers,
            self.kernel_size,
            show_optional(&self.severity),
            show_optional(&self.scaling),
        )
    }

    /// The ablation grid: baseline, models A–E and the full configuration.
    /// HP is two-step augmentation, PS/AS the phase and amplitude scaling,
    /// TI the Tail Interaction layer.
    pub fn ablation_grid(&self) -> Vec<ExperimentConfig> {
        // (name, HP, PS, AS, TI)
        const ROWS: [(&str, bool, bool, bool, bool); 7] = [
            ("baseline", false, false, false, false),
            ("model_a", true, false, false, false),
            ("model_b", true, false, false, true),
            ("model_c", true, false, true, true),
            ("model_d", true, true, false, true),
            ("model_e", true, true, true, false),
            ("full", true, true, true, true),
        ];
        ROWS.iter()
            .map(|&(name, hp, ps, amp, ti)| ExperimentConfig {
                name: name.into(),
                augmentation: if hp { Augmentation::TwoStep } else { Augmentation::None },
                use_phase_scaling: ps,
                use_amplitude_scaling: amp,
                use_tail_interaction: ti,
                ..self.clone()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let cfg = ExperimentConfig::parse(
            "# experiment\nname = full\naugmentation = two-step  # inline\n\ntail_interaction = yes\nlr = 0.01\nseed=9\n",
        )
        .unwrap();
        assert_eq!(cfg.name, "full");
        assert_eq!(cfg.augmentation, Augmentation::TwoStep);
        assert!(cfg.use_tail_interaction);
        assert_eq!(cfg.learning_rate, 0.01);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn errors_carry_line_and_key() {
        let err = ExperimentConfig::parse("seed = 1\nepochs = many\n").unwrap_err();
        match err {
            Error::Config { line, key, .. } => assert_eq!((line, key.as_str()), (2, "epochs")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ExperimentConfig::parse("bogus = 1").unwrap_err(),
            Error::Config { line: 1, .. }
        ));
        assert!(matches!(
            ExperimentConfig::parse("no equals sign").unwrap_err(),
            Error::Config { line: 1, .. }
        ));
        assert!(ExperimentConfig::parse("kernel_size = 8").is_err());
    }

    #[test]
    fn kv_roundtrip() {
        let mut cfg = ExperimentConfig::default();
        cfg.augmentation = Augmentation::Gaussian;
        cfg.learning_rate = 0.0125;
        cfg.use_tail_interaction = true;
        assert_eq!(ExperimentConfig::parse(&cfg.to_kv_string()).unwrap(), cfg);
    }

    #[test]
    fn ablation_grid_mirrors_toggles() {
        let grid = ExperimentConfig::default().ablation_grid();
        assert_eq!(grid.len(), 7);
        let full = grid.last().unwrap();
        assert!(full.use_tail_interaction && full.use_phase_scaling && full.use_amplitude_scaling);
        assert_eq!(grid[0].augmentation, Augmentation::None);
        assert!(!grid[5].use_tail_interaction);
    }
}

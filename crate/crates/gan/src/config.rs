use tasks::{TaskKind, TaskSpec};

use crate::{GanError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpMode {
    /// Exact gradient penalty differentiated through the input-gradient
    /// graph (second-order reverse mode).
    DoubleBackward,
    /// First-order surrogate: finite slope between two nearby interpolates
    /// along the (detached) critic input gradient.
    PairDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

/// Everything a training run needs. The loss coefficients follow the
/// published setup; network widths and cadences are explicitly tunable and
/// default to desk-scale values that train on a CPU.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda_wgan_gp: f64,
    pub lambda_gp: f64,
    pub lambda_match: f64,
    pub lambda_mimic: f64,
    pub lambda_div: f64,
    pub lambda_curl: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub critic_iters: usize,
    pub iterations: usize,
    pub task: TaskSpec,
    /// Field normalization scale in tesla; 0 means derive from the dataset.
    pub normalization_scale: f64,
    pub seed: u64,
    pub physics_enabled: bool,
    pub gp_mode: GpMode,
    pub precision: Precision,
    /// Base channel width of the generators.
    pub gen_width: usize,
    /// Base channel width of both critics.
    pub critic_width: usize,
    pub dilation_rates: Vec<usize>,
    /// Candidate-patch stride of the contextual attention.
    pub attention_stride: usize,
    pub validate_every: usize,
    pub val_samples: usize,
    /// Fraction of trailing samples reserved as the benchmark test split.
    pub test_reserve_frac: f64,
}

impl TrainConfig {
    /// Published inpainting setup (coefficients of the 256² training runs).
    pub fn inpaint_paper(side_px: usize) -> Self {
        Self {
            lambda_wgan_gp: 0.001,
            lambda_gp: 10.0,
            lambda_match: 7.2,
            lambda_mimic: 3.6,
            lambda_div: 500.0,
            lambda_curl: 30_000.0,
            learning_rate: 1e-4,
            batch_size: 25,
            critic_iters: 5,
            iterations: 300_000,
            task: TaskSpec::inpaint(side_px),
            normalization_scale: 0.0,
            seed: 0,
            physics_enabled: true,
            gp_mode: GpMode::DoubleBackward,
            precision: Precision::Single,
            gen_width: 32,
            critic_width: 32,
            dilation_rates: vec![2, 4, 8, 16],
            attention_stride: 1,
            validate_every: 500,
            val_samples: 16,
            test_reserve_frac: 0.05,
        }
    }

    /// Published outpainting setup.
    pub fn outpaint_paper(n_regions: usize, region_side: usize) -> Self {
        Self {
            lambda_match: 10.0,
            lambda_mimic: 2.4,
            lambda_div: 120.0,
            lambda_curl: 24_000.0,
            batch_size: 48,
            iterations: 500_000,
            task: TaskSpec::outpaint(n_regions, region_side),
            ..Self::inpaint_paper(48)
        }
    }

    /// Desk-scale smoke setup: 64² fields, narrow nets, frequent validation.
    pub fn desk_inpaint(side_px: usize) -> Self {
        Self {
            batch_size: 8,
            iterations: 2_000,
            task: TaskSpec::inpaint(side_px),
            gen_width: 6,
            critic_width: 6,
            dilation_rates: vec![2],
            attention_stride: 2,
            validate_every: 50,
            ..Self::inpaint_paper(side_px)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            self.lambda_wgan_gp,
            self.lambda_gp,
            self.lambda_match,
            self.lambda_mimic,
            self.lambda_div,
            self.lambda_curl,
        ];
        if lambdas.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(GanError::Config("loss coefficients must be non-negative".into()));
        }
        if self.batch_size == 0 || self.critic_iters == 0 {
            return Err(GanError::Config("batch size and critic iterations must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(GanError::Config("learning rate must be positive".into()));
        }
        if self.gen_width == 0 || self.critic_width == 0 {
            return Err(GanError::Config("network widths must be positive".into()));
        }
        if self.attention_stride == 0 {
            return Err(GanError::Config("attention stride must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.test_reserve_frac) {
            return Err(GanError::Config("test reserve fraction must be in [0, 0.5)".into()));
        }
        Ok(())
    }

    /// Coefficients actually applied to the physics terms.
    pub fn effective_lambda_div(&self) -> f64 {
        if self.physics_enabled {
            self.lambda_div
        } else {
            0.0
        }
    }

    pub fn effective_lambda_curl(&self) -> f64 {
        if self.physics_enabled {
            self.lambda_curl
        } else {
            0.0
        }
    }

    /// Canonical key/value text, the checkpoint and digest representation.
    pub fn to_canonical_string(&self) -> String {
        let task_kind = match self.task.kind {
            TaskKind::Inpaint => "inpaint",
            TaskKind::Outpaint => "outpaint",
        };
        let gp = match self.gp_mode {
            GpMode::DoubleBackward => "double_backward",
            GpMode::PairDifference => "pair_difference",
        };
        let precision = match self.precision {
            Precision::Single => "single",
            Precision::Double => "double",
        };
        let rates: Vec<String> = self.dilation_rates.iter().map(|r| r.to_string()).collect();
        format!(
            "lambda_wgan_gp={:e}\nlambda_gp={:e}\nlambda_match={:e}\nlambda_mimic={:e}\n\
             lambda_div={:e}\nlambda_curl={:e}\nlearning_rate={:e}\nbatch_size={}\n\
             critic_iters={}\niterations={}\ntask={}\nside_px={}\njitter={:e}\nn_regions={}\n\
             region_side={}\ns_pad={}\nnormalization_scale={:e}\nseed={}\nphysics={}\n\
             gp_mode={}\nprecision={}\ngen_width={}\ncritic_width={}\ndilation_rates={}\n\
             attention_stride={}\nvalidate_every={}\nval_samples={}\ntest_reserve_frac={:e}\n",
            self.lambda_wgan_gp,
            self.lambda_gp,
            self.lambda_match,
            self.lambda_mimic,
            self.lambda_div,
            self.lambda_curl,
            self.learning_rate,
            self.batch_size,
            self.critic_iters,
            self.iterations,
            task_kind,
            self.task.side_px,
            self.task.jitter_frac,
            self.task.n_regions,
            self.task.region_side_px,
            self.task.s_pad,
            self.normalization_scale,
            self.seed,
            if self.physics_enabled { "on" } else { "off" },
            gp,
            precision,
            self.gen_width,
            self.critic_width,
            rates.join(","),
            self.attention_stride,
            self.validate_every,
            self.val_samples,
            self.test_reserve_frac,
        )
    }

    pub fn from_canonical_string(text: &str) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| GanError::Config(format!("bad config line: {line}")))?;
            map.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| -> Result<&String> {
            map.get(k).ok_or_else(|| GanError::Config(format!("missing config key {k}")))
        };
        let f = |k: &str| -> Result<f64> {
            get(k)?.parse().map_err(|e| GanError::Config(format!("bad {k}: {e}")))
        };
        let u = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|e| GanError::Config(format!("bad {k}: {e}")))
        };

        let kind = match get("task")?.as_str() {
            "inpaint" => TaskKind::Inpaint,
            "outpaint" => TaskKind::Outpaint,
            other => return Err(GanError::Config(format!("unknown task kind {other}"))),
        };
        let task = TaskSpec {
            kind,
            side_px: u("side_px")?,
            jitter_frac: f("jitter")?,
            n_regions: u("n_regions")?,
            region_side_px: u("region_side")?,
            s_pad: u("s_pad")?,
        };
        let gp_mode = match get("gp_mode")?.as_str() {
            "double_backward" => GpMode::DoubleBackward,
            "pair_difference" => GpMode::PairDifference,
            other => return Err(GanError::Config(format!("unknown gp mode {other}"))),
        };
        let precision = match get("precision")?.as_str() {
            "single" => Precision::Single,
            "double" => Precision::Double,
            other => return Err(GanError::Config(format!("unknown precision {other}"))),
        };
        let dilation_rates = get("dilation_rates")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| GanError::Config(format!("bad dilation rate: {e}"))))
            .collect::<Result<Vec<usize>>>()?;

        let config = Self {
            lambda_wgan_gp: f("lambda_wgan_gp")?,
            lambda_gp: f("lambda_gp")?,
            lambda_match: f("lambda_match")?,
            lambda_mimic: f("lambda_mimic")?,
            lambda_div: f("lambda_div")?,
            lambda_curl: f("lambda_curl")?,
            learning_rate: f("learning_rate")?,
            batch_size: u("batch_size")?,
            critic_iters: u("critic_iters")?,
            iterations: u("iterations")?,
            task,
            normalization_scale: f("normalization_scale")?,
            seed: get("seed")?.parse().map_err(|e| GanError::Config(format!("bad seed: {e}")))?,
            physics_enabled: get("physics")? == "on",
            gp_mode,
            precision,
            gen_width: u("gen_width")?,
            critic_width: u("critic_width")?,
            dilation_rates,
            attention_stride: u("attention_stride")?,
            validate_every: u("validate_every")?,
            val_samples: u("val_samples")?,
            test_reserve_frac: f("test_reserve_frac")?,
        };
        config.validate()?;
        Ok(config)
    }
}

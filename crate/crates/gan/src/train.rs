use std::path::Path;

use field_core::{DatasetReader, Mask, Sample};
use nn::{Graph, Scalar, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tasks::{inpaint_mask, local_patches, outpaint_mask, LocalPatchSet, TaskKind};

use crate::adam::AdamState;
use crate::checkpoint::{Checkpoint, NamedBlobs};
use crate::config::TrainConfig;
use crate::loss::{
    batch_mean, critic_loss, gradient_penalty, physics_losses, FlankingDerivatives,
};
use crate::model::{compose_on_graph, critic_scores, generate, mask_quarter_res};
use crate::params::{init_critic, init_generator, GeneratorLayout, ParamSet};
use crate::{GanError, Result};

/// One trace line per iteration; `l_wgan_gp` is the Wasserstein estimate
/// `E[D(real)] − E[D(fake)]` after the iteration's critic updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub l_wgan_gp: f64,
    pub l_gp: f64,
    pub l_match: f64,
    pub l_mimic: f64,
    pub l_div: f64,
    pub l_curl: f64,
    pub val_mae_mt: Option<f64>,
}

impl TraceRow {
    pub const TSV_HEADER: &'static str =
        "iteration\tl_wgan_gp\tl_gp\tl_match\tl_mimic\tl_div\tl_curl\tval_mae_mt";

    pub fn to_tsv(&self) -> String {
        let val = match self.val_mae_mt {
            Some(v) => format!("{v:.17e}"),
            None => "-".to_string(),
        };
        format!(
            "{}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t{}",
            self.iteration,
            self.l_wgan_gp,
            self.l_gp,
            self.l_match,
            self.l_mimic,
            self.l_div,
            self.l_curl,
            val
        )
    }
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub trace: Vec<TraceRow>,
}

/// Deterministic stream keyed on (seed, purpose, iteration, slot); all
/// training randomness flows through this, which is what makes resume
/// bit-exact without persisting RNG state.
fn rng_for(seed: u64, purpose: u64, iteration: u64, slot: u64) -> ChaCha8Rng {
    let mut z = seed;
    for salt in [purpose.wrapping_add(1), iteration.wrapping_add(3), slot.wrapping_add(7)] {
        z ^= salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    ChaCha8Rng::seed_from_u64(z)
}

mod purpose {
    pub const CRITIC_DATA: u64 = 0;
    pub const CRITIC_MASK: u64 = 1;
    pub const GEN_DATA: u64 = 2;
    pub const GEN_MASK: u64 = 3;
    pub const GP: u64 = 4;
    pub const VAL_MASK: u64 = 5;
}

/// A fully prepared batch in normalized units.
struct TrainBatch<S: Scalar> {
    masked: Tensor<S>,
    mask_t: Tensor<S>,
    truth: Tensor<S>,
    flanking: FlankingDerivatives<S>,
    patches: Vec<LocalPatchSet>,
    mask_quarter: Vec<Vec<u8>>,
    given_total: usize,
    missing_total: usize,
    indices: Vec<usize>,
}

fn draw_mask(rng: &mut impl Rng, config: &TrainConfig, h: usize, w: usize) -> Result<Mask> {
    Ok(match config.task.kind {
        TaskKind::Inpaint => inpaint_mask(rng, &config.task, h, w)?,
        TaskKind::Outpaint => outpaint_mask(rng, &config.task, h, w)?,
    })
}

/// One sample normalized and converted once: the truth plane and the
/// central z-derivatives from the flanking layers, both in network units.
struct PreppedSample<S: Scalar> {
    truth: Vec<S>,
    ddz: Vec<S>,
    h: usize,
    w: usize,
}

impl<S: Scalar> PreppedSample<S> {
    fn from_sample(sample: &Sample, scale: f64) -> Self {
        let grid = &sample.field;
        let (h, w) = (grid.h(), grid.w());
        let hw = h * w;
        let inv = 1.0 / scale;
        let mut truth = Vec::with_capacity(3 * hw);
        let mut ddz = Vec::with_capacity(3 * hw);
        for comp in 0..3 {
            let center = grid.component(field_core::CENTER_LAYER, comp);
            truth.extend(center.iter().map(|&v| S::from_f64(v * inv)));
            let above = grid.component(2, comp);
            let below = grid.component(0, comp);
            ddz.extend(
                above
                    .iter()
                    .zip(below)
                    .map(|(&a, &b)| S::from_f64((a - b) / 2.0 * inv)),
            );
        }
        Self { truth, ddz, h, w }
    }
}

/// Sample access with an in-memory preprocessed cache when the dataset is
/// small enough; otherwise samples are prepped on demand.
enum SampleStore<S: Scalar> {
    Cached(Vec<PreppedSample<S>>),
    OnDemand { scale: f64 },
}

impl<S: Scalar> SampleStore<S> {
    fn build(data: &mut DatasetReader, count: usize, scale: f64) -> Result<Self> {
        let header = data.header();
        let bytes = count * 6 * header.h * header.w * std::mem::size_of::<S>();
        if bytes <= 1_500_000_000 {
            let mut cache = Vec::with_capacity(count);
            for i in 0..count {
                let sample = data.read_sample(i).map_err(GanError::Field)?;
                cache.push(PreppedSample::from_sample(&sample, scale));
            }
            Ok(Self::Cached(cache))
        } else {
            Ok(Self::OnDemand { scale })
        }
    }

    fn get(&self, data: &mut DatasetReader, index: usize) -> Result<PreppedSample<S>> {
        match self {
            Self::Cached(cache) => Ok(PreppedSample {
                truth: cache[index].truth.clone(),
                ddz: cache[index].ddz.clone(),
                h: cache[index].h,
                w: cache[index].w,
            }),
            Self::OnDemand { scale } => {
                let sample = data.read_sample(index).map_err(GanError::Field)?;
                Ok(PreppedSample::from_sample(&sample, *scale))
            }
        }
    }
}

fn assemble_batch<S: Scalar>(
    prepped: &[PreppedSample<S>],
    masks: Vec<Mask>,
    config: &TrainConfig,
    indices: Vec<usize>,
) -> Result<TrainBatch<S>> {
    let b = prepped.len();
    let (h, w) = (prepped[0].h, prepped[0].w);
    let hw = h * w;
    let mut masked = Tensor::zeros(&[b, 3, h, w]);
    let mut mask_t = Tensor::zeros(&[b, 1, h, w]);
    let mut truth = Tensor::zeros(&[b, 3, h, w]);
    let mut ddz = [
        Tensor::zeros(&[b, 1, h, w]),
        Tensor::zeros(&[b, 1, h, w]),
        Tensor::zeros(&[b, 1, h, w]),
    ];
    let mut patches = Vec::with_capacity(b);
    let mut mask_quarter = Vec::with_capacity(b);
    let mut given_total = 0;
    let mut missing_total = 0;

    for (bi, (prep, mask)) in prepped.iter().zip(&masks).enumerate() {
        truth.data[bi * 3 * hw..(bi + 1) * 3 * hw].copy_from_slice(&prep.truth);
        let masked_slice = &mut masked.data[bi * 3 * hw..(bi + 1) * 3 * hw];
        for comp in 0..3 {
            for (i, &bit) in mask.bits().iter().enumerate() {
                if bit == 0 {
                    masked_slice[comp * hw + i] = prep.truth[comp * hw + i];
                }
            }
            ddz[comp].data[bi * hw..(bi + 1) * hw]
                .copy_from_slice(&prep.ddz[comp * hw..(comp + 1) * hw]);
        }
        for (i, &bit) in mask.bits().iter().enumerate() {
            if bit == 1 {
                mask_t.data[bi * hw + i] = S::ONE;
            }
        }
        given_total += mask.count_given();
        missing_total += mask.count_missing();
        patches.push(local_patches(mask, &config.task)?);
        mask_quarter.push(mask_quarter_res(mask));
    }
    Ok(TrainBatch {
        masked,
        mask_t,
        truth,
        flanking: FlankingDerivatives { ddz },
        patches,
        mask_quarter,
        given_total,
        missing_total,
        indices,
    })
}

#[allow(clippy::too_many_arguments)]
fn load_batch<S: Scalar>(
    data: &mut DatasetReader,
    store: &SampleStore<S>,
    config: &TrainConfig,
    train_count: usize,
    data_rng: &mut impl Rng,
    mask_purpose: u64,
    iteration: u64,
    step: u64,
) -> Result<TrainBatch<S>> {
    let mut prepped = Vec::with_capacity(config.batch_size);
    let mut masks = Vec::with_capacity(config.batch_size);
    let mut indices = Vec::with_capacity(config.batch_size);
    for slot in 0..config.batch_size {
        let index = data_rng.random_range(0..train_count);
        let prep = store.get(data, index)?;
        let mut mask_rng =
            rng_for(config.seed, mask_purpose, iteration, step * 1000 + slot as u64);
        let mask = draw_mask(&mut mask_rng, config, prep.h, prep.w)?;
        prepped.push(prep);
        masks.push(mask);
        indices.push(index);
    }
    assemble_batch(&prepped, masks, config, indices)
}

/// Runs the generator forward for constant parameters and returns the
/// composed plane values (used for the critic's fake inputs and validation).
fn generate_composed<S: Scalar>(
    config: &TrainConfig,
    gen: &ParamSet<S>,
    layout: &GeneratorLayout,
    batch: &TrainBatch<S>,
) -> Result<Tensor<S>> {
    let mut g: Graph<S> = Graph::new();
    let nodes = gen.leaves(&mut g, false);
    let masked = g.leaf(batch.masked.clone(), false);
    let mask = g.leaf(batch.mask_t.clone(), false);
    let (_, fine) = generate(&mut g, config, &nodes, layout, masked, mask, &batch.mask_quarter)?;
    let composed = compose_on_graph(&mut g, masked, fine, mask)?;
    Ok(g.value(composed).clone())
}

fn check_finite(value: f64, what: &str, iteration: u64, batch: &[usize]) -> Result<()> {
    if !value.is_finite() {
        return Err(GanError::NonFinite(format!(
            "{what} became non-finite at iteration {iteration}; offending batch indices {batch:?}"
        )));
    }
    Ok(())
}

/// Algorithm: per iteration, `critic_iters` critic updates on fresh batches
/// and masks, then one generator update with the adversarial, match, mimic
/// and physics terms; Adam on both with the configured learning rate.
pub fn train<S: Scalar>(
    config: &TrainConfig,
    data: &mut DatasetReader,
    resume: Option<&Checkpoint>,
    checkpoint_path: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let n = data.len();
    let test_reserve = ((n as f64) * config.test_reserve_frac).ceil() as usize;
    let val_count = config.val_samples.min(n.saturating_sub(test_reserve + 1));
    let train_count = n
        .checked_sub(test_reserve + val_count)
        .filter(|&t| t > 0)
        .ok_or_else(|| GanError::Config(format!("dataset of {n} samples is too small")))?;

    // Normalization scale: configured, resumed, or derived from the data.
    let scale = if let Some(ck) = resume {
        ck.normalization_scale
    } else if config.normalization_scale > 0.0 {
        config.normalization_scale
    } else {
        let mut max_abs: f64 = 0.0;
        for i in 0..train_count.min(64) {
            max_abs = max_abs.max(data.read_sample(i).map_err(GanError::Field)?.field.max_abs());
        }
        if max_abs <= 0.0 {
            return Err(GanError::Config("dataset appears to be all zeros".into()));
        }
        max_abs
    };

    // Parameters and optimizer state, fresh or resumed.
    let layout_template = init_generator::<S>(config, config.seed);
    let critic_template = init_critic::<S>(config, config.seed.wrapping_add(1));
    let layout = layout_template.layout.clone();
    let (global_layers, local_layers) = (critic_template.global.clone(), critic_template.local.clone());

    let (mut gen_params, mut critic_params, mut gen_adam, mut critic_adam, start_iter, mut best) =
        match resume {
            Some(ck) => {
                check_resume_compatible(config, &ck.config)?;
                (
                    ck.generator.to_params::<S>(),
                    ck.critic.to_params::<S>(),
                    ck.gen_adam.clone(),
                    ck.critic_adam.clone(),
                    ck.iteration,
                    ck.best_generator.clone().map(|b| (b, ck.best_val_mae_mt.unwrap_or(f64::MAX))),
                )
            }
            None => {
                let gen = layout_template.set;
                let critic = critic_template.set;
                let ga = AdamState::new(&gen, 0.5, 0.9);
                let ca = AdamState::new(&critic, 0.5, 0.9);
                (gen, critic, ga, ca, 0, None)
            }
        };

    // Preprocessed training samples, cached in memory when they fit.
    let store = SampleStore::<S>::build(data, train_count, scale)?;

    // Fixed validation set: the samples after the training range, with
    // masks drawn once from the validation stream.
    let mut val_prepped = Vec::with_capacity(val_count);
    let mut val_masks = Vec::with_capacity(val_count);
    for (slot, index) in (train_count..train_count + val_count).enumerate() {
        let sample = data.read_sample(index).map_err(GanError::Field)?;
        let prep = PreppedSample::from_sample(&sample, scale);
        let mut rng = rng_for(config.seed, purpose::VAL_MASK, 0, slot as u64);
        let mask = draw_mask(&mut rng, config, prep.h, prep.w)?;
        val_prepped.push(prep);
        val_masks.push(mask);
    }
    let val_batch: Option<TrainBatch<S>> = if val_count > 0 {
        Some(assemble_batch(&val_prepped, val_masks.clone(), config, Vec::new())?)
    } else {
        None
    };

    let mut trace = Vec::with_capacity(config.iterations.saturating_sub(start_iter as usize));

    for iteration in start_iter..config.iterations as u64 {
        let mut w_estimate = 0.0;
        let mut gp_value = 0.0;

        // -- critic phase --
        for step in 0..config.critic_iters as u64 {
            let mut data_rng = rng_for(config.seed, purpose::CRITIC_DATA, iteration, step);
            let batch: TrainBatch<S> = load_batch(
                data,
                &store,
                config,
                train_count,
                &mut data_rng,
                purpose::CRITIC_MASK,
                iteration,
                step,
            )?;
            let fake = generate_composed(config, &gen_params, &layout, &batch)?;

            let mut g: Graph<S> = Graph::new();
            let critic_nodes = critic_params.leaves(&mut g, true);
            let real_node = g.leaf(batch.truth.clone(), false);
            let fake_node = g.leaf(fake.clone(), false);
            let scores_real = critic_scores(
                &mut g,
                &critic_nodes,
                &global_layers,
                &local_layers,
                real_node,
                &batch.patches,
            )?;
            let scores_fake = critic_scores(
                &mut g,
                &critic_nodes,
                &global_layers,
                &local_layers,
                fake_node,
                &batch.patches,
            )?;
            let mut gp_rng = rng_for(config.seed, purpose::GP, iteration, step);
            let critic_fn = |g: &mut Graph<S>, plane| {
                critic_scores(g, &critic_nodes, &global_layers, &local_layers, plane, &batch.patches)
            };
            let gp = gradient_penalty(
                &mut g,
                config.gp_mode,
                &critic_fn,
                &batch.truth,
                &fake,
                &mut gp_rng,
            )?;
            let loss = critic_loss(&mut g, scores_real, scores_fake, Some(gp), config.lambda_gp)?;

            let mean_real = batch_mean(&mut g, scores_real)?;
            let mean_fake = batch_mean(&mut g, scores_fake)?;
            w_estimate = g.value(mean_real).item().to_f64() - g.value(mean_fake).item().to_f64();
            gp_value = g.value(gp).item().to_f64();
            check_finite(g.value(loss).item().to_f64(), "critic loss", iteration, &batch.indices)?;

            let grads = g.backward(loss, &critic_nodes)?;
            let grad_tensors: Vec<Tensor<S>> =
                grads.iter().map(|&id| g.value(id).clone()).collect();
            critic_adam.step(&mut critic_params, &grad_tensors, config.learning_rate);
        }

        // -- generator phase --
        let mut data_rng = rng_for(config.seed, purpose::GEN_DATA, iteration, 0);
        let batch: TrainBatch<S> = load_batch(
            data,
            &store,
            config,
            train_count,
            &mut data_rng,
            purpose::GEN_MASK,
            iteration,
            0,
        )?;
        let mut g: Graph<S> = Graph::new();
        let gen_nodes = gen_params.leaves(&mut g, true);
        let critic_nodes = critic_params.leaves(&mut g, false);
        let masked = g.leaf(batch.masked.clone(), false);
        let mask_node = g.leaf(batch.mask_t.clone(), false);
        let (_, fine) =
            generate(&mut g, config, &gen_nodes, &layout, masked, mask_node, &batch.mask_quarter)?;
        let composed = compose_on_graph(&mut g, masked, fine, mask_node)?;

        let scores = critic_scores(
            &mut g,
            &critic_nodes,
            &global_layers,
            &local_layers,
            composed,
            &batch.patches,
        )?;
        let score_mean = batch_mean(&mut g, scores)?;
        let adversarial = g.neg(score_mean);

        // L_match on given pixels of the raw fine output, L_mimic on the
        // missing pixels, both per-element means in normalized units.
        let shape = g.shape(fine).to_vec();
        let mask3 = g.broadcast_to(mask_node, &[shape[0], 3, shape[2], shape[3]])?;
        let ones = g.constant(Tensor::filled(&[shape[0], 3, shape[2], shape[3]], S::ONE));
        let inv_mask3 = g.sub(ones, mask3)?;
        let truth_node = g.leaf(batch.truth.clone(), false);

        let match_diff = g.sub(masked, fine)?;
        let match_masked = g.mul(match_diff, inv_mask3)?;
        let match_abs = g.abs(match_masked);
        let match_sum = g.sum_all(match_abs)?;
        let l_match = g.scale(match_sum, S::from_f64(1.0 / (3 * batch.given_total) as f64));

        let mimic_diff = g.sub(truth_node, fine)?;
        let mimic_masked = g.mul(mimic_diff, mask3)?;
        let mimic_abs = g.abs(mimic_masked);
        let mimic_sum = g.sum_all(mimic_abs)?;
        let l_mimic = g.scale(mimic_sum, S::from_f64(1.0 / (3 * batch.missing_total) as f64));

        let (l_div, l_curl) = physics_losses(&mut g, composed, &batch.flanking)?;

        let mut total = g.scale(adversarial, S::from_f64(config.lambda_wgan_gp));
        let wm = g.scale(l_match, S::from_f64(config.lambda_match));
        total = g.add(total, wm)?;
        let wmi = g.scale(l_mimic, S::from_f64(config.lambda_mimic));
        total = g.add(total, wmi)?;
        if config.physics_enabled {
            let wd = g.scale(l_div, S::from_f64(config.effective_lambda_div()));
            total = g.add(total, wd)?;
            let wc = g.scale(l_curl, S::from_f64(config.effective_lambda_curl()));
            total = g.add(total, wc)?;
        }
        check_finite(g.value(total).item().to_f64(), "generator loss", iteration, &batch.indices)?;

        let row_match = g.value(l_match).item().to_f64();
        let row_mimic = g.value(l_mimic).item().to_f64();
        let row_div = g.value(l_div).item().to_f64();
        let row_curl = g.value(l_curl).item().to_f64();

        let grads = g.backward(total, &gen_nodes)?;
        let grad_tensors: Vec<Tensor<S>> = grads.iter().map(|&id| g.value(id).clone()).collect();
        gen_adam.step(&mut gen_params, &grad_tensors, config.learning_rate);

        // -- validation / checkpoint cadence --
        let iteration_1 = iteration + 1;
        let validate = val_batch.is_some()
            && config.validate_every > 0
            && (iteration_1 % config.validate_every as u64 == 0
                || iteration_1 == config.iterations as u64);
        let val_mae = if validate {
            let vb = val_batch.as_ref().expect("validation batch exists");
            let composed = generate_composed(config, &gen_params, &layout, vb)?;
            let mae = masked_mae_mt(&composed, &vb.truth, &vb.mask_t, scale);
            check_finite(mae, "validation MAE", iteration, &[])?;
            if best.as_ref().is_none_or(|(_, b)| mae < *b) {
                best = Some((NamedBlobs::from_params(&gen_params), mae));
            }
            Some(mae)
        } else {
            None
        };

        trace.push(TraceRow {
            iteration: iteration_1,
            l_wgan_gp: w_estimate,
            l_gp: gp_value,
            l_match: row_match,
            l_mimic: row_mimic,
            l_div: row_div,
            l_curl: row_curl,
            val_mae_mt: val_mae,
        });

        if validate {
            if let Some(path) = checkpoint_path {
                let ck = build_checkpoint(
                    config,
                    iteration_1,
                    scale,
                    &gen_params,
                    &critic_params,
                    &gen_adam,
                    &critic_adam,
                    &best,
                );
                ck.save(path)?;
            }
        }
    }

    let checkpoint = build_checkpoint(
        config,
        config.iterations as u64,
        scale,
        &gen_params,
        &critic_params,
        &gen_adam,
        &critic_adam,
        &best,
    );
    if let Some(path) = checkpoint_path {
        checkpoint.save(path)?;
    }
    Ok(TrainOutcome { checkpoint, trace })
}

#[allow(clippy::too_many_arguments)]
fn build_checkpoint<S: Scalar>(
    config: &TrainConfig,
    iteration: u64,
    scale: f64,
    gen: &ParamSet<S>,
    critic: &ParamSet<S>,
    gen_adam: &AdamState,
    critic_adam: &AdamState,
    best: &Option<(NamedBlobs, f64)>,
) -> Checkpoint {
    Checkpoint {
        config: config.clone(),
        iteration,
        normalization_scale: scale,
        generator: NamedBlobs::from_params(gen),
        critic: NamedBlobs::from_params(critic),
        gen_adam: gen_adam.clone(),
        critic_adam: critic_adam.clone(),
        best_generator: best.as_ref().map(|(b, _)| b.clone()),
        best_val_mae_mt: best.as_ref().map(|(_, m)| *m),
    }
}

/// MAE over missing pixels in millitesla, computed on normalized tensors.
fn masked_mae_mt<S: Scalar>(pred: &Tensor<S>, truth: &Tensor<S>, mask: &Tensor<S>, scale: f64) -> f64 {
    let (b, _, h, w) = pred.dims4();
    let hw = h * w;
    let mut sum = 0.0;
    let mut count = 0usize;
    for bi in 0..b {
        for comp in 0..3 {
            for i in 0..hw {
                if mask.data[bi * hw + i].to_f64() > 0.5 {
                    let p = pred.data[(bi * 3 + comp) * hw + i].to_f64();
                    let t = truth.data[(bi * 3 + comp) * hw + i].to_f64();
                    sum += (p - t).abs();
                    count += 1;
                }
            }
        }
    }
    sum / count.max(1) as f64 * scale * 1e3
}

/// Resume requires an identical config apart from the iteration horizon.
fn check_resume_compatible(new: &TrainConfig, old: &TrainConfig) -> Result<()> {
    let mut a = new.clone();
    let mut b = old.clone();
    a.iterations = 0;
    b.iterations = 0;
    if a != b {
        return Err(GanError::Config(
            "resume config differs from the checkpoint's (beyond iterations)".into(),
        ));
    }
    Ok(())
}

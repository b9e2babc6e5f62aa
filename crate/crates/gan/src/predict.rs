use field_core::{Mask, Plane};
use nn::{Graph, Scalar, Tensor};

use crate::checkpoint::Checkpoint;
use crate::model::{compose_on_graph, generate, mask_quarter_res};
use crate::params::init_generator;
use crate::{GanError, Result};

/// Inference: normalize, generate, compose, denormalize. The composition
/// happens in raw units against the original input, so given pixels are
/// returned bit-exactly.
pub fn predict<S: Scalar>(ckpt: &Checkpoint, input: &Plane, mask: &Mask) -> Result<Plane> {
    let (h, w) = (input.h(), input.w());
    if mask.h() != h || mask.w() != w {
        return Err(GanError::Shape(format!(
            "input {h}x{w} vs mask {}x{}",
            mask.h(),
            mask.w()
        )));
    }
    if h % 4 != 0 || w % 4 != 0 {
        return Err(GanError::Shape(format!(
            "generator needs H, W divisible by 4, got {h}x{w}"
        )));
    }
    if !mask.is_mixed() && mask.count_missing() == 0 {
        return Ok(input.clone());
    }
    let scale = ckpt.normalization_scale;
    if scale <= 0.0 {
        return Err(GanError::Checkpoint("checkpoint has no normalization scale".into()));
    }

    // The layer layout comes from the architecture config; the parameter
    // values come from the best-validation snapshot.
    let layout = init_generator::<S>(&ckpt.config, ckpt.config.seed).layout;
    let params = ckpt.inference_generator().to_params::<S>();

    let hw = h * w;
    let mut masked = Tensor::zeros(&[1, 3, h, w]);
    for comp in 0..3 {
        let src = input.component(comp);
        for i in 0..hw {
            // Keep only given pixels; normalize.
            if mask.bits()[i] == 0 {
                masked.data[comp * hw + i] = S::from_f64(src[i] / scale);
            }
        }
    }
    let mut mask_t = Tensor::zeros(&[1, 1, h, w]);
    for (i, &bit) in mask.bits().iter().enumerate() {
        mask_t.data[i] = S::from_f64(bit as f64);
    }
    let quarter = vec![mask_quarter_res(mask)];

    let mut g: Graph<S> = Graph::new();
    let nodes = params.leaves(&mut g, false);
    let masked_node = g.leaf(masked, false);
    let mask_node = g.leaf(mask_t, false);
    let (_, fine) =
        generate(&mut g, &ckpt.config, &nodes, &layout, masked_node, mask_node, &quarter)?;
    let composed = compose_on_graph(&mut g, masked_node, fine, mask_node)?;
    let values = g.value(composed);

    // Denormalize generated pixels; copy given pixels from the raw input.
    let mut out = input.clone();
    for comp in 0..3 {
        for i in 0..hw {
            if mask.bits()[i] == 1 {
                out.component_mut(comp)[i] = values.data[comp * hw + i].to_f64() * scale;
            }
        }
    }
    Ok(out)
}

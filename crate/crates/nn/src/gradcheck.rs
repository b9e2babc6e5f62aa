use crate::graph::{Graph, NodeId};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::{NnError, Result};

/// Compares reverse-mode gradients of a scalar-valued graph function
/// against central finite differences over every input entry. Returns the
/// worst error relative to the numeric gradient's magnitude.
pub fn grad_check<S, F>(f: F, inputs: &[Tensor<S>], epsilon: f64) -> Result<f64>
where
    S: Scalar,
    F: Fn(&mut Graph<S>, &[NodeId]) -> Result<NodeId>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(NnError::Domain(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }

    // Analytic gradients.
    let mut graph = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| graph.leaf(t.clone(), true)).collect();
    let out = f(&mut graph, &ids)?;
    if graph.value(out).numel() != 1 {
        return Err(NnError::Shape("grad_check needs a scalar output".into()));
    }
    let grads = graph.backward(out, &ids)?;
    let analytic: Vec<Vec<f64>> = grads.iter().map(|&gid| graph.value(gid).to_f64_vec()).collect();
    if analytic.iter().flatten().any(|v| !v.is_finite()) {
        return Err(NnError::NonFinite("analytic gradient".into()));
    }

    // Numeric gradients by perturbing one entry at a time.
    let eval = |tensors: &[Tensor<S>]| -> Result<f64> {
        let mut graph = Graph::new();
        let ids: Vec<NodeId> = tensors.iter().map(|t| graph.leaf(t.clone(), true)).collect();
        let out = f(&mut graph, &ids)?;
        let v = graph.value(out).item().to_f64();
        if !v.is_finite() {
            return Err(NnError::NonFinite("forward value".into()));
        }
        Ok(v)
    };

    let mut numeric: Vec<Vec<f64>> = Vec::with_capacity(inputs.len());
    let mut work: Vec<Tensor<S>> = inputs.to_vec();
    for t in 0..inputs.len() {
        let mut grad = vec![0.0; inputs[t].numel()];
        for i in 0..inputs[t].numel() {
            let orig = work[t].data[i];
            work[t].data[i] = orig + S::from_f64(epsilon);
            let plus = eval(&work)?;
            work[t].data[i] = orig - S::from_f64(epsilon);
            let minus = eval(&work)?;
            work[t].data[i] = orig;
            grad[i] = (plus - minus) / (2.0 * epsilon);
        }
        numeric.push(grad);
    }

    let mut worst = 0.0f64;
    for t in 0..inputs.len() {
        worst = worst.max(max_rel_error(&analytic[t], &numeric[t]));
    }
    Ok(worst)
}

/// Worst entry-wise discrepancy, normalized by the numeric gradient's
/// largest magnitude (floored to avoid division blow-ups on zero grads).
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = numeric.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-6);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / scale)
        .fold(0.0, f64::max)
}

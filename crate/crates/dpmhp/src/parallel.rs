//! Thread-parallel versions of the heavy evaluators. Work is split into
//! contiguous chunks and results are combined in chunk order, so the output
//! is bit-identical to the sequential versions for any thread count.

use std::thread;

use dpmhp_core::evaluation::{self, Bandwidth, Estimator, GaussianFit, KdeFit, NllReport, ShareReport};
use dpmhp_core::{Dataset, Error, HypothesisSet, MhpModel, PointSet, Result};

fn chunk_len(total: usize, threads: usize) -> usize {
    total.div_ceil(threads.max(1)).max(1)
}

pub fn assignment_counts(hyps: &HypothesisSet, samples: &PointSet, threads: usize) -> Result<Vec<u64>> {
    if threads <= 1 || samples.len() < 2 {
        return evaluation::assignment_counts(hyps, samples);
    }
    let dim = samples.dim();
    let flat = samples.as_flat();
    let step = chunk_len(samples.len(), threads) * dim;
    let parts: Vec<Result<Vec<u64>>> = thread::scope(|s| {
        let handles: Vec<_> = flat
            .chunks(step)
            .map(|c| s.spawn(move || evaluation::assignment_counts(hyps, &PointSet::new(dim, c.to_vec())?)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut counts = vec![0u64; hyps.len()];
    for part in parts {
        counts.iter_mut().zip(part?).for_each(|(c, p)| *c += p);
    }
    Ok(counts)
}

pub fn voronoi_shares(hyps: &HypothesisSet, samples: &PointSet, threads: usize) -> Result<ShareReport> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    ShareReport::from_counts(assignment_counts(hyps, samples, threads)?)
}

/// Per-test-point `(norm_nll, kde_nll, kde_bandwidth)`.
fn per_point(model: &MhpModel, test: &Dataset, range: std::ops::Range<usize>, bw: Bandwidth) -> Result<Vec<(f64, f64, Vec<f64>)>> {
    range
        .map(|i| {
            let hyps = model.forward(test.features.point(i))?;
            let y = test.labels.point(i);
            let norm = GaussianFit::fit(&hyps)?.nll(y);
            let kde = KdeFit::fit(&hyps, bw)?;
            Ok((norm, -kde.log_density(y), kde.bandwidth().to_vec()))
        })
        .collect()
}

/// Same result as [`evaluation::conditional_nll`], with the per-point work
/// spread over `threads`.
pub fn conditional_nll(model: &MhpModel, test: &Dataset, bw: Bandwidth, threads: usize) -> Result<(NllReport, NllReport)> {
    if threads <= 1 || test.len() < 2 {
        return evaluation::conditional_nll(model, test, bw);
    }
    if model.spec().input_dim != test.feature_dim() || model.spec().label_dim != test.label_dim() {
        // Let the sequential version produce the precise error.
        return evaluation::conditional_nll(model, test, bw);
    }
    let step = chunk_len(test.len(), threads);
    let parts: Vec<Result<Vec<_>>> = thread::scope(|s| {
        let handles: Vec<_> = (0..test.len())
            .step_by(step)
            .map(|start| {
                let end = (start + step).min(test.len());
                s.spawn(move || per_point(model, test, start..end, bw))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let d = test.label_dim();
    let (mut norm_total, mut kde_total) = (0.0, 0.0);
    let mut bw_sum = vec![0.0; d];
    for part in parts {
        for (norm, kde, b) in part? {
            norm_total += norm;
            kde_total += kde;
            bw_sum.iter_mut().zip(&b).for_each(|(s, v)| *s += v);
        }
    }
    let count = test.len() as f64;
    bw_sum.iter_mut().for_each(|b| *b /= count);
    Ok((
        NllReport {
            estimator: Estimator::Norm,
            nll_per_sample: norm_total / count,
            test_count: test.len() as u64,
        },
        NllReport {
            estimator: Estimator::Kde { rule: bw, bandwidth: bw_sum },
            nll_per_sample: kde_total / count,
            test_count: test.len() as u64,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dpmhp_core::datasets::{sample_conditional_surrogate, sample_mixture, fig1_mixture};
    use dpmhp_core::{init_network, Activation, NetworkSpec, WtaMetric};

    #[test]
    fn counts_do_not_depend_on_thread_count() {
        let s = sample_mixture(&fig1_mixture(), 10_001, 1).unwrap();
        let h = sample_mixture(&fig1_mixture(), 37, 2).unwrap();
        let one = assignment_counts(&h, &s, 1).unwrap();
        for t in [2, 3, 8] {
            assert_eq!(assignment_counts(&h, &s, t).unwrap(), one);
        }
    }

    #[test]
    fn nll_is_bit_identical_across_thread_counts() {
        let spec = NetworkSpec::new(4, vec![8], Activation::Tanh, 12, 2).unwrap();
        let model = MhpModel::from_params(init_network(&spec, 1).unwrap(), WtaMetric::SquaredEuclidean);
        let test = sample_conditional_surrogate(301, 3).unwrap();
        let one = conditional_nll(&model, &test, Bandwidth::Scott, 1).unwrap();
        for t in [2, 5] {
            assert_eq!(conditional_nll(&model, &test, Bandwidth::Scott, t).unwrap(), one);
        }
    }
}

use epig_core::acquisition::{bald_categorical, epig_categorical, epig_categorical_batch, predictive_entropy};
use epig_core::prob::{joint_from_samples, mutual_information};
use epig_core::target::compute_weights;
use epig_core::{PredSampleTensor, ProbVector, TargetBatch, TargetMode};
use proptest::prelude::*;

fn normalize(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

fn prob_vector(classes: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, classes).prop_map(normalize)
}

fn tensor(k: usize, classes: usize) -> impl Strategy<Value = PredSampleTensor> {
    prop::collection::vec(prob_vector(classes), k).prop_map(|rows| PredSampleTensor::from_rows(&rows).unwrap())
}

/// Candidate tensors and a target batch sharing `K`.
fn scoring_problem() -> impl Strategy<Value = (Vec<PredSampleTensor>, TargetBatch)> {
    (1usize..12, 2usize..5, 2usize..5).prop_flat_map(|(k, c, cs)| {
        (
            prop::collection::vec(tensor(k, c), 1..5),
            prop::collection::vec(tensor(k, cs), 1..5)
                .prop_map(|t| TargetBatch::new(t, TargetMode::PoolProxy).unwrap()),
        )
    })
}

proptest! {
    #[test]
    fn normalized_vectors_sum_to_one(raw in prop::collection::vec(0.0f64..10.0, 1..8)) {
        prop_assume!(raw.iter().sum::<f64>() > 0.0);
        let p = ProbVector::normalized(raw).unwrap();
        prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.entropy() >= 0.0);
        prop_assert!(p.entropy() <= (p.num_classes() as f64).ln() + 1e-12);
    }

    #[test]
    fn bald_is_bounded_by_predictive_entropy(t in (1usize..10, 2usize..6).prop_flat_map(|(k, c)| tensor(k, c))) {
        let bald = bald_categorical(&t);
        prop_assert!(bald >= 0.0);
        prop_assert!(bald <= predictive_entropy(&t) + 1e-12);
    }

    #[test]
    fn epig_is_non_negative_and_batch_agrees((cands, targets) in scoring_problem()) {
        let batch = epig_categorical_batch(&cands, &targets).unwrap();
        for (t, b) in cands.iter().zip(&batch) {
            let single = epig_categorical(t, &targets).unwrap();
            prop_assert!(single >= 0.0);
            prop_assert!(*b >= 0.0);
            prop_assert!((single - b).abs() < 1e-10, "{single} vs {b}");
        }
    }

    #[test]
    fn epig_never_exceeds_candidate_bald((cands, targets) in scoring_problem()) {
        // Data processing: y* depends on y only through theta.
        for t in &cands {
            prop_assert!(epig_categorical(t, &targets).unwrap() <= bald_categorical(t) + 1e-10);
        }
    }

    #[test]
    fn mutual_information_is_symmetric(
        (a, b) in (1usize..10, 2usize..5, 2usize..5).prop_flat_map(|(k, c, cs)| (tensor(k, c), tensor(k, cs)))
    ) {
        let ab = mutual_information(&joint_from_samples(&a, &b).unwrap());
        let ba = mutual_information(&joint_from_samples(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn resample_weights_have_mean_one(
        (preds, target) in (2usize..5).prop_flat_map(|c| (prop::collection::vec(prob_vector(c), 1..30), prob_vector(c)))
    ) {
        let preds: Vec<ProbVector> = preds.into_iter().map(|p| ProbVector::new(p).unwrap()).collect();
        let w = compute_weights(&preds, &ProbVector::new(target).unwrap()).unwrap();
        prop_assert!(w.values().iter().all(|v| *v >= 0.0));
        prop_assert!((w.mean() - 1.0).abs() < 1e-9);
    }
}

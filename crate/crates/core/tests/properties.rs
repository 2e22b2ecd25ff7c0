use exchangeable::crp::{crp_sample, crp_table_sizes, crp_validate, enumerate_partitions, ewens_pitman_log_pmf};
use exchangeable::numkern::{falling, gen_binom, rising, SignedLogValue};
use exchangeable::polya::{polya_sample, polya_seq_log_pmf};
use exchangeable::rngdist::{sample_dirichlet_gamma, sample_dirichlet_stick};
use exchangeable::weights::{gem_sample, rank_weights, rho_k};
use exchangeable::{LabelSequence, Partition, RandomSource, SimplexVector, UrnParams, WeightSequence};
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn infinite_params() -> impl Strategy<Value = (f64, f64)> {
    (0.0..0.95f64, 0.05..10.0f64).prop_map(|(a, gap)| (a, gap - a))
}

proptest! {
    #[test]
    fn rising_recurrence(x in -20.0..20.0f64, n in 0u64..40) {
        // x^(n+1) = x^(n) (x + n)
        let lhs = rising(x, n + 1).to_real();
        let rhs = rising(x, n).to_real() * (x + n as f64);
        prop_assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
    }

    #[test]
    fn falling_is_reflected_rising(x in -20.0..20.0f64, n in 0u64..30) {
        let f = falling(x, n);
        let r = rising(-x, n);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(close(f.to_real(), sign * r.to_real(), 1e-12));
    }

    #[test]
    fn pascal_rule(x in -10.0..10.0f64, m in 1u64..25) {
        // C(x, m) = C(x - 1, m - 1) + C(x - 1, m)
        let lhs = gen_binom(x, m).to_real();
        let rhs = gen_binom(x - 1.0, m - 1).to_real() + gen_binom(x - 1.0, m).to_real();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn signed_log_multiplication(a in -1e3..1e3f64, b in -1e3..1e3f64) {
        let p = SignedLogValue::from_real(a) * SignedLogValue::from_real(b);
        prop_assert!(close(p.to_real(), a * b, 1e-12));
    }

    #[test]
    fn rank_weights_is_a_sorted_permutation(raw in prop::collection::vec(1e-6..1.0f64, 1..30)) {
        let total: f64 = raw.iter().sum::<f64>() * 1.25 + 1e-9;
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let residual = 1.0 - w.iter().sum::<f64>();
        let seq = WeightSequence::new(w.clone(), residual).unwrap();
        let ranked = rank_weights(&seq);
        prop_assert!(ranked.weights().windows(2).all(|p| p[0] >= p[1]));
        let mut a = w.clone();
        let mut b = ranked.weights().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
        prop_assert_eq!(ranked.residual(), residual);
        let again = rank_weights(&WeightSequence::new(ranked.weights().to_vec(), ranked.residual()).unwrap());
        prop_assert_eq!(again.weights(), ranked.weights());
    }

    #[test]
    fn partition_json_round_trip(labels in prop::collection::vec(0u8..5, 0..12)) {
        let pi = Partition::from_assignment(&labels);
        let json = serde_json::to_string(&pi).unwrap();
        let back: Partition = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, pi);
    }

    #[test]
    fn relabelling_preserves_block_sizes(labels in prop::collection::vec(0u8..4, 1..9), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let pi = Partition::from_assignment(&labels);
        let mut perm: Vec<usize> = (0..pi.n()).collect();
        perm.shuffle(&mut RandomSource::new(seed));
        let moved = pi.relabel(&perm).unwrap();
        let mut a = pi.block_sizes();
        let mut b = moved.block_sizes();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sequence_and_weights_json_round_trip(labels in prop::collection::vec(0usize..4, 0..10), w in 0.01..1.0f64) {
        let seq = LabelSequence::new(labels);
        let back: LabelSequence = serde_json::from_str(&serde_json::to_string(&seq).unwrap()).unwrap();
        prop_assert_eq!(back, seq);

        let ws = WeightSequence::new(vec![w / 2.0, w / 4.0], 1.0 - 0.75 * w).unwrap();
        let back: WeightSequence = serde_json::from_str(&serde_json::to_string(&ws).unwrap()).unwrap();
        prop_assert_eq!(back, ws);
    }

    #[test]
    fn samplers_produce_valid_objects(seed in any::<u64>(), (alpha, theta) in infinite_params(), n in 1usize..60) {
        let mut rng = RandomSource::new(seed);
        let params = crp_validate(alpha, theta).unwrap();
        let pi = crp_sample(&params, n, &mut rng);
        prop_assert_eq!(pi.n(), n);
        prop_assert!(ewens_pitman_log_pmf(&params, &pi).to_real() > 0.0);
        let state = crp_table_sizes(&params, n, &mut rng);
        prop_assert_eq!(state.table_sizes().iter().sum::<u64>(), n as u64);

        let w = gem_sample(&params, 20, &mut rng).unwrap();
        let mass: f64 = w.weights().iter().sum::<f64>() + w.residual();
        prop_assert!((mass - 1.0).abs() < 1e-10);

        let urn = UrnParams::new(vec![alpha + 0.1, theta + alpha + 0.1]).unwrap();
        let seq = polya_sample(&urn, n, &mut rng);
        prop_assert!(polya_seq_log_pmf(&urn, &seq).unwrap().to_real() > 0.0);

        for x in [sample_dirichlet_gamma(urn.alphas(), &mut rng).unwrap(), sample_dirichlet_stick(urn.alphas(), &mut rng).unwrap()] {
            prop_assert!(SimplexVector::new(x.into_inner()).is_ok());
        }
    }

    #[test]
    fn rho_is_symmetric((alpha, theta) in infinite_params(), a in 0.01..0.45f64, b in 0.01..0.45f64) {
        let params = crp_validate(alpha, theta).unwrap();
        prop_assert!(close(rho_k(&params, &[a, b]).unwrap(), rho_k(&params, &[b, a]).unwrap(), 1e-12));
    }

    #[test]
    fn ewens_pitman_sums_to_one((alpha, theta) in infinite_params(), n in 1usize..7) {
        let params = crp_validate(alpha, theta).unwrap();
        let mass: f64 = enumerate_partitions(n)
            .unwrap()
            .iter()
            .map(|pi| ewens_pitman_log_pmf(&params, pi).to_real())
            .sum();
        prop_assert!((mass - 1.0).abs() < 1e-10);
    }
}

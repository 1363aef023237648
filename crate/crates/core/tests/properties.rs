use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sqlclarify::candidate::{entropy_bits, normalize, CandidateDistribution};
use sqlclarify::clarify::{run_session, SessionConfig};
use sqlclarify::eig::{conditional_entropy, expected_information_gain, variable_marginal};
use sqlclarify::eval::synthetic::{random_tree_distribution, sample_candidate};
use sqlclarify::eval::OracleUser;
use sqlclarify::sql::{exact_set_match, extract_decision_variables, tokenize_sql};

fn tree(seed: u64) -> CandidateDistribution {
    random_tree_distribution(&mut ChaCha8Rng::seed_from_u64(seed), 8)
}

proptest! {
    #[test]
    fn normalized_weights_sum_to_one(weights in prop::collection::vec(0.0f64..100.0, 1..12)) {
        prop_assume!(weights.iter().any(|w| *w > 0.0));
        let p = normalize(&weights).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_bounded(weights in prop::collection::vec(0.001f64..1.0, 1..12)) {
        let p = normalize(&weights).unwrap();
        let h = entropy_bits(p.iter().copied());
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (p.len() as f64).log2() + 1e-12);
    }

    #[test]
    fn eig_lies_between_zero_and_entropy(seed in any::<u64>()) {
        let d = tree(seed);
        let h = d.entropy();
        for v in extract_decision_variables(&d) {
            let marginal: f64 = variable_marginal(&d, &v).iter().map(|m| m.probability).sum();
            prop_assert!((marginal - 1.0).abs() < 1e-9);
            let eig = expected_information_gain(&d, &v);
            prop_assert!(eig >= 0.0 && eig <= h + 1e-12);
            prop_assert!(conditional_entropy(&d, &v) <= h + 1e-12);
        }
    }

    #[test]
    fn truthful_sessions_recover_gold_within_the_variable_count(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_tree_distribution(&mut rng, 8);
        let gold = sample_candidate(&d, &mut rng).sql_text.clone();
        let m = extract_decision_variables(&d).len();
        let config = SessionConfig { tau: 1.0, max_turns: 10, ..SessionConfig::default() };
        let mut user = OracleUser::from_sql(&gold).unwrap();
        let out = run_session(config, d, &mut user).unwrap();
        prop_assert!(out.transcript.turns.len() <= m);
        prop_assert!(exact_set_match(&tokenize_sql(out.final_sql()).unwrap(), &tokenize_sql(&gold).unwrap()));
    }

    #[test]
    fn sessions_are_reproducible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_tree_distribution(&mut rng, 8);
        let gold = sample_candidate(&d, &mut rng).sql_text.clone();
        let run = || {
            let mut user = OracleUser::from_sql(&gold).unwrap();
            run_session(SessionConfig::default(), d.clone(), &mut user).unwrap().transcript.to_json()
        };
        prop_assert_eq!(run(), run());
    }
}

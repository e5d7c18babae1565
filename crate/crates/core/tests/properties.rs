mod common;

use std::sync::OnceLock;

use common::q;
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rankone::product::{apply_r, apply_r_inverse, verify_lemma_identity, verify_w_relation, FormalTensor, Sym};
use rankone::spectral::{autocorrelation, check_positive_definite, convolution_power, fejer_density};
use rankone::{build_construction, Construction, CorrelationResult, Correlator, RankOneSpec, StepFn, Q};

fn staircase() -> &'static Construction {
    static C: OnceLock<Construction> = OnceLock::new();
    C.get_or_init(|| build_construction(&RankOneSpec::staircase(1, &[2, 3, 4, 5, 6]).unwrap(), 5).unwrap())
}

fn chacon() -> &'static Construction {
    static C: OnceLock<Construction> = OnceLock::new();
    C.get_or_init(|| build_construction(&RankOneSpec::chacon(1, 6).unwrap(), 6).unwrap())
}

fn small_q() -> impl Strategy<Value = Q> {
    (-4i64..=4, 1i64..=4).prop_map(|(n, d)| q(n, d))
}

fn stepfn(c: &'static Construction, stage: usize) -> impl Strategy<Value = StepFn> {
    let h = c.height(stage).unwrap() as usize;
    (prop::collection::vec(small_q(), h), small_q(), prop::bool::ANY)
        .prop_map(move |(coeffs, gamma, with_rho)| {
            let rho = if with_rho { q(1, 3) } else { Q::zero() };
            StepFn::new(c, stage, coeffs, gamma, rho).unwrap()
        })
}

/// `U^j f` as a step function of the top stage, when the shifted mass stays
/// inside the tower.
fn shift_up(c: &Construction, f: &StepFn, j: usize) -> Option<StepFn> {
    let fine = f.refine(c, c.depth()).unwrap();
    if !fine.rho().is_zero() {
        return None;
    }
    let h = fine.coeffs().len();
    if fine.coeffs()[h - j..].iter().any(|v| !v.is_zero()) {
        return None;
    }
    let mut coeffs = vec![Q::zero(); j];
    coeffs.extend_from_slice(&fine.coeffs()[..h - j]);
    Some(StepFn::new(c, c.depth(), coeffs, fine.gamma().clone(), Q::zero()).unwrap())
}

/// Correlation at the deepest built stage, whatever its error bound.
fn deepest(c: &Construction, f: &StepFn, g: &StepFn, k: i64) -> CorrelationResult {
    Correlator::new(c).correlation_at(f, g, k, c.depth()).unwrap()
}

fn sym() -> impl Strategy<Value = Sym> {
    prop_oneof![
        1 => Just(Sym::One),
        4 => (0usize..3, -6i64..=6).prop_map(|(id, p)| Sym::base(id, p)),
    ]
}

fn tensor() -> impl Strategy<Value = FormalTensor> {
    prop::collection::vec((sym(), sym(), small_q()), 0..8).prop_map(|terms| {
        let mut t = FormalTensor::zero();
        for (a, b, c) in terms {
            t.add_term(a, b, c);
        }
        t
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shifting_is_an_isometry(
        f in stepfn(staircase(), 2),
        g in stepfn(staircase(), 3),
        j in 1usize..=5,
        k in -30i64..=30,
    ) {
        let c = staircase();
        let f = StepFn::new(c, 2, f.coeffs().to_vec(), f.gamma().clone(), Q::zero()).unwrap();
        // the top five levels of the last stage are spacers, so these shifts stay inside
        let shifted = shift_up(c, &f, j);
        prop_assume!(shifted.is_some());
        let uf = shifted.unwrap();
        prop_assert_eq!(deepest(c, &uf, &uf, 0).value, deepest(c, &f, &f, 0).value);
        let a = deepest(c, &uf, &g, k);
        let b = deepest(c, &f, &g, k + j as i64);
        prop_assert!((&a.value - &b.value).abs() <= &a.error_bound + &b.error_bound);
    }

    #[test]
    fn cauchy_schwarz(f in stepfn(chacon(), 3), g in stepfn(chacon(), 4), k in -200i64..=200) {
        let c = chacon();
        let r = deepest(c, &f, &g, k);
        let slack = (r.value.abs() - &r.error_bound).max(Q::zero());
        prop_assert!(slack.pow(2) <= f.norm_sq(c).unwrap() * g.norm_sq(c).unwrap());
    }

    #[test]
    fn adjoint_swaps_arguments(f in stepfn(staircase(), 2), g in stepfn(staircase(), 4), k in -100i64..=100) {
        let c = staircase();
        let a = deepest(c, &f, &g, k);
        let b = deepest(c, &g, &f, -k);
        prop_assert!((&a.value - &b.value).abs() <= &a.error_bound + &b.error_bound);
    }

    #[test]
    fn r_squares_to_diagonal_shift(t in tensor()) {
        prop_assert_eq!(apply_r(&apply_r(&t)), t.shift(1, 1));
        prop_assert_eq!(apply_r_inverse(&apply_r(&t)), t.clone());
        prop_assert_eq!(apply_r(&apply_r_inverse(&t)), t);
    }

    #[test]
    fn r_moves_v_terms(m in -20i64..=20, n in -20i64..=20) {
        prop_assert_eq!(apply_r(&FormalTensor::v(0, m, n)), FormalTensor::v(0, n, m + 1));
    }

    #[test]
    fn lemma_identity_grid(qv in 1i64..=8, num in 1i64..=9, den in 10i64..=40) {
        let mu = q(num, den);
        let r = verify_lemma_identity(0, qv, &mu).unwrap();
        prop_assert!(r.holds);
        prop_assert_eq!(r.constant, Some((q(1, 1) + &mu).pow(2)));
    }

    #[test]
    fn w_relation_tail(den in 2i64..=5, k in 2u32..=12, n in 1u32..=3) {
        let r = verify_w_relation(0, &q(1, den), k, n).unwrap();
        prop_assert!(r.holds());
        prop_assert_eq!(r.scalar, (q(1, 1) - q(1, den)).pow(2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn spectral_sequences_are_consistent(f in stepfn(staircase(), 2)) {
        let c = staircase();
        let f = StepFn::new(c, 2, f.coeffs().to_vec(), Q::zero(), Q::zero()).unwrap().zero_mean(c).unwrap();
        prop_assume!(!f.norm_sq(c).unwrap().is_zero());
        let tol = f.norm_sq(c).unwrap() / q(5, 1);
        let seq = autocorrelation(c, &f, 32, &tol).unwrap();
        let sq = convolution_power(&seq, 2).unwrap();
        let cube = convolution_power(&seq, 3).unwrap();
        for ((a, b), x) in sq.values().iter().zip(cube.values()).zip(seq.values()) {
            prop_assert_eq!(a, &x.pow(2));
            prop_assert_eq!(b, &(a * x));
        }
        let pd = check_positive_definite(&seq, 16).unwrap();
        prop_assert!(pd.is_plausibly_positive());
        let est = fejer_density(&seq, 32, 128).unwrap();
        prop_assert!(est.min_density() + est.eps_est.clone() >= 0);
    }
}

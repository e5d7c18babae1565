#![allow(dead_code)]

use num_bigint::BigInt;
use rand::Rng;
use rankone::{build_construction, Construction, RankOneSpec, StepFn, Q};

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Spacer demand in units of `w1`, i.e. `sum_n spacers_n / (r_1 ... r_n)`.
fn spacer_demand(spacers: &[Vec<u64>]) -> Q {
    let mut scale = q(1, 1);
    let mut total = q(0, 1);
    for s in spacers {
        scale /= q(s.len() as i64, 1);
        total += &scale * q(s.iter().sum::<u64>() as i64, 1);
    }
    total
}

/// Random staircase, Chacon or custom construction whose final height stays
/// at most `max_height`, with a measure split that never runs dry.
pub fn random_construction(rng: &mut impl Rng, max_height: u64) -> Construction {
    loop {
        let h1 = rng.gen_range(1..=4u64);
        let depth = rng.gen_range(1..=4usize);
        let spacers: Vec<Vec<u64>> = match rng.gen_range(0..3) {
            0 => (0..depth).map(|_| (0..rng.gen_range(2..=4u64)).collect()).collect(),
            1 => vec![vec![0, 1, 0]; depth],
            _ => (0..depth)
                .map(|_| (0..rng.gen_range(2..=4)).map(|_| rng.gen_range(0..=3u64)).collect())
                .collect(),
        };
        let demand = spacer_demand(&spacers);
        let denom = Q::from_integer(BigInt::from(h1)) + demand.ceil() + q(1, 1);
        let w1 = denom.recip();
        let y1 = q(1, 1) - Q::from_integer(BigInt::from(h1)) * &w1;
        let spec = RankOneSpec::custom(h1, spacers).unwrap().with_measure(w1, y1).unwrap();
        let c = build_construction(&spec, depth).unwrap();
        if *c.heights().last().unwrap() <= max_height {
            return c;
        }
    }
}

/// Random step function: sparse small-integer coefficients, and a nonzero
/// constant and residual value about half of the time each.
pub fn random_stepfn(rng: &mut impl Rng, c: &Construction, stage: usize) -> StepFn {
    let h = c.height(stage).unwrap() as usize;
    let coeffs = (0..h)
        .map(|_| if rng.gen_bool(0.4) { q(rng.gen_range(-3..=3), rng.gen_range(1..=3)) } else { q(0, 1) })
        .collect();
    let gamma = if rng.gen_bool(0.5) { q(rng.gen_range(-2..=2), 2) } else { q(0, 1) };
    let rho = if rng.gen_bool(0.5) { q(rng.gen_range(-2..=2), 3) } else { q(0, 1) };
    StepFn::new(c, stage, coeffs, gamma, rho).unwrap()
}

//! Exact identities in the free tensor algebra. None of these depend on a
//! construction: they hold (or fail) symbol by symbol.

use num_traits::{One, Signed, Zero};

use super::poly::{apply_poly, OperatorPoly, Poly};
use super::tensor::{BaseId, BaseRegistry, FormalTensor, Sym};
use crate::error::{Error, Result};
use crate::tower::Q;

#[derive(Debug, Clone)]
pub struct UpExpansion {
    pub holds: bool,
    /// `(m, n, coefficient of V_{m,n})`, ordered by `(m, n)`.
    pub table: Vec<(i64, i64, Q)>,
    pub corner: Q,
    pub total: Q,
}

/// Expands `[(aI + bU)^p (x) (aI + bU)^p] V_{0,0}` and checks that `V_{p,0}`
/// and `V_{0,p}` carry `a^p b^p` while every other term has `|m - n| < p`.
pub fn verify_up_expansion(a: &Q, b: &Q, p: u32) -> UpExpansion {
    let mut reg = BaseRegistry::new();
    let f = reg.register("f", Q::zero());
    let op = OperatorPoly::diagonal(Poly::affine(a, b).pow(p));
    let u = apply_poly(&op, &FormalTensor::v(f, 0, 0), &reg).expect("no Theta term");
    let p = p as i64;
    let corner = (a * b).pow(p as i32);

    let mut holds = true;
    let mut table = Vec::new();
    let mut total = Q::zero();
    for (x, y, c) in u.terms() {
        let (m, n) = match (x, y) {
            (Sym::Base { power: m, .. }, Sym::Base { power: n, .. }) => (*m, *n),
            _ => {
                holds = false;
                continue;
            }
        };
        total += c;
        let is_corner = (m, n) == (p, 0) || (m, n) == (0, p);
        if is_corner {
            holds &= c == &corner;
        } else {
            holds &= (m - n).abs() < p;
        }
        table.push((m, n, c.clone()));
    }
    holds &= u.coefficient(Sym::base(f, p), Sym::base(f, 0)) == corner;
    holds &= u.coefficient(Sym::base(f, 0), Sym::base(f, p)) == corner;
    holds &= total == (a + b).pow(2 * p as i32);
    UpExpansion {
        holds,
        table,
        corner,
        total,
    }
}

/// `m P_m 1_B = sum_{k<=m-2} U^k 1_B + mu 1`, as a list of symbols.
fn scaled_cesaro(b: BaseId, m: i64, mu: &Q) -> Vec<(Sym, Q)> {
    let mut out: Vec<(Sym, Q)> = (0..m - 1).map(|k| (Sym::base(b, k), Q::one())).collect();
    out.push((Sym::One, mu.clone()));
    out
}

fn g_tensor(b: BaseId, m: i64, mu: &Q) -> FormalTensor {
    let s = scaled_cesaro(b, m, mu);
    let scale = (Q::one() + mu).pow(-2);
    let mut out = FormalTensor::zero();
    for (x, cx) in &s {
        for (y, cy) in &s {
            out.add_term(*x, *y, cx * cy * &scale);
        }
    }
    out
}

/// `G_m = m^2 / (1 + mu)^2 P_m 1_B (x) P_m 1_B`.
pub fn lemma_g(b: BaseId, m: i64, mu: &Q) -> Result<FormalTensor> {
    if m < 2 {
        return Err(Error::DegenerateOrder(m));
    }
    Ok(g_tensor(b, m, mu))
}

#[derive(Debug, Clone)]
pub struct LemmaCheck {
    pub q: i64,
    pub holds: bool,
    /// Scalar `c` with `F_{q,0} = c [..]`, when the two sides are proportional.
    pub constant: Option<Q>,
    pub expected_constant: Q,
    pub bracket: FormalTensor,
}

/// Checks `F_{q,0} = c [G_{q+2} - G_{q+1} - (U (x) U) G_{q+1} + (U (x) U) G_q]`
/// and recovers `c`. Holds when `c = (1 + mu)^2`. For `q = 0` the formula is
/// still evaluated (with the Cesaro sum read as empty) and the verdict is
/// informational.
pub fn verify_lemma_identity(b: BaseId, q: i64, mu: &Q) -> Result<LemmaCheck> {
    if q + 2 < 2 {
        return Err(Error::DegenerateOrder(q + 2));
    }
    let f = FormalTensor::f_sym(b, q, 0);
    let bracket = g_tensor(b, q + 2, mu)
        .sub(&g_tensor(b, q + 1, mu))
        .sub(&g_tensor(b, q + 1, mu).shift(1, 1))
        .add(&g_tensor(b, q, mu).shift(1, 1));
    let constant = proportionality(&f, &bracket);
    let expected = (Q::one() + mu).pow(2);
    let holds = constant.as_ref() == Some(&expected);
    Ok(LemmaCheck {
        q,
        holds,
        constant,
        expected_constant: expected,
        bracket,
    })
}

/// `c` with `lhs = c rhs` exactly, if one exists and `rhs` is nonzero.
fn proportionality(lhs: &FormalTensor, rhs: &FormalTensor) -> Option<Q> {
    let (a, b, c) = rhs.terms().next()?;
    let ratio = lhs.coefficient(*a, *b) / c;
    (rhs.scaled(&ratio) == *lhs).then_some(ratio)
}

fn check_a(a: &Q) -> Result<()> {
    if !a.is_positive() || a >= &Q::one() {
        return Err(Error::BadParameter(format!("a = {a} not in (0, 1)")));
    }
    Ok(())
}

/// `W_n = [(I - aU)^n (x) (I - aU)^n] f (x) f`.
pub fn w_vector(f: BaseId, a: &Q, n: u32) -> Result<FormalTensor> {
    check_a(a)?;
    let mut reg = BaseRegistry::new();
    while reg.len() <= f {
        reg.register("", Q::zero());
    }
    let op = OperatorPoly::diagonal(Poly::affine(&Q::one(), &-a).pow(n));
    apply_poly(&op, &FormalTensor::v(f, 0, 0), &reg)
}

/// `P_K = (1 - a) sum_{j<K} a^j U^j`.
pub fn truncated_resolvent(a: &Q, k: u32) -> Result<Poly> {
    check_a(a)?;
    if k == 0 {
        return Err(Error::BadParameter("truncation length must be at least 1".into()));
    }
    let mut p = Poly::zero();
    let mut c = Q::one() - a;
    for j in 0..k {
        p = p.add(&Poly::monomial(j as i64, c.clone()));
        c *= a;
    }
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct WRelation {
    pub n: u32,
    /// `(P_K (x) P_K) W_n - (1 - a)^2 W_{n-1}`.
    pub tail: FormalTensor,
    pub scalar: Q,
    /// The tail equals `(1 - a)^2 T W_{n-1}` for the operator
    /// `T = (I - a^K U^K)^{(x)2} - I`, checked exactly.
    pub tail_factorizes: bool,
    /// Coefficient mass of `T`; at most `2a^K + a^{2K}`.
    pub tail_operator_mass: Q,
    pub tail_mass: Q,
    /// Coefficient mass of `(1 - a)^2 W_{n-1}`.
    pub base_mass: Q,
    /// Every tail term has total power at least `K`.
    pub tail_is_high_order: bool,
    pub bound: Q,
}

impl WRelation {
    pub fn holds(&self) -> bool {
        self.tail_factorizes
            && self.tail_operator_mass <= self.bound
            && self.tail_mass <= &self.bound * &self.base_mass
            && self.tail_is_high_order
    }
}

/// `(P_K (x) P_K) W_n = (1 - a)^2 W_{n-1} + tail` for `n >= 1`.
pub fn verify_w_relation(f: BaseId, a: &Q, k: u32, n: u32) -> Result<WRelation> {
    if n == 0 {
        return Err(Error::BadParameter("W relation needs n >= 1".into()));
    }
    let p = truncated_resolvent(a, k)?;
    let mut reg = BaseRegistry::new();
    while reg.len() <= f {
        reg.register("", Q::zero());
    }
    let lhs = apply_poly(&OperatorPoly::diagonal(p), &w_vector(f, a, n)?, &reg)?;
    let scalar = (Q::one() - a).pow(2);
    let base = w_vector(f, a, n - 1)?.scaled(&scalar);
    let tail = lhs.sub(&base);

    let ak = a.pow(k as i32);
    let cut = Poly::identity().add(&Poly::monomial(k as i64, -ak.clone()));
    let cut = OperatorPoly::diagonal(cut);
    let tail_factorizes = apply_poly(&cut, &base, &reg)?.sub(&base) == tail;
    // distinct shifts of a lone symbol never merge, so this is the operator's mass
    let probe = FormalTensor::v(f, 0, 0);
    let tail_operator_mass = apply_poly(&cut, &probe, &reg)?.sub(&probe).mass();
    let bound = &ak * Q::from_integer(2.into()) + ak.pow(2);

    let tail_is_high_order = tail.terms().all(|(x, y, _)| match (x, y) {
        (Sym::Base { power: m, .. }, Sym::Base { power: n, .. }) => m.max(n) >= &(k as i64),
        _ => false,
    });
    Ok(WRelation {
        n,
        tail_mass: tail.mass(),
        base_mass: base.mass(),
        tail,
        scalar,
        tail_factorizes,
        tail_operator_mass,
        tail_is_high_order,
        bound,
    })
}

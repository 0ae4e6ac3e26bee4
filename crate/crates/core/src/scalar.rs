use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating point scalar the numerical kernels are written against.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Largest exponent passed to `exp` by the guarded helpers.
pub const EXP_GUARD: f64 = 30.0;

pub fn expit<F: Scalar>(u: F) -> F {
    if u >= F::zero() {
        F::one() / (F::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (F::one() + e)
    }
}

pub fn logit<F: Scalar>(p: F) -> F {
    (p / (F::one() - p)).ln()
}

/// `log(1 + e^u)` without overflow.
pub fn softplus<F: Scalar>(u: F) -> F {
    if u > F::zero() {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// `e^u` with `u` capped at the exponent guard; the flag reports a cap event.
pub fn guarded_exp<F: Scalar>(u: F) -> (F, bool) {
    let cap = F::lit(EXP_GUARD);
    if u > cap {
        (cap.exp(), true)
    } else {
        (u.exp(), false)
    }
}

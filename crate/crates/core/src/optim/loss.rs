use serde::{Deserialize, Serialize};

use crate::scalar::{expit, guarded_exp, softplus, Scalar};

/// Inverse link `g` of the exposure model `m(x) = g(x'alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    #[default]
    Identity,
    Expit,
}

impl Link {
    pub fn apply<F: Scalar>(self, u: F) -> F {
        match self {
            Link::Identity => u,
            Link::Expit => expit(u),
        }
    }

    pub fn derivative<F: Scalar>(self, u: F) -> F {
        match self {
            Link::Identity => F::one(),
            Link::Expit => {
                let p = expit(u);
                p * (F::one() - p)
            }
        }
    }

    /// `G(u)`, the antiderivative of `g`.
    pub fn integral<F: Scalar>(self, u: F) -> F {
        match self {
            Link::Identity => u * u / F::lit(2.0),
            Link::Expit => softplus(u),
        }
    }
}

/// Per-sample loss `l(y, eta)` where `eta = offset + x'b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `log(1 + e^eta) - y eta`
    Logistic,
    /// `-y eta + G(eta)`
    LinkIntegral(Link),
    /// `y e^{-eta} + (1 - y) eta`
    CalibrationExponential,
    /// `(y - eta)^2 / 2`
    Squared,
}

/// Loss value with first and second derivative in `eta`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LossPoint<F> {
    pub value: F,
    pub d1: F,
    pub d2: F,
    pub capped: bool,
}

impl LossKind {
    pub fn requires_binary_response(self) -> bool {
        matches!(self, LossKind::Logistic | LossKind::CalibrationExponential)
    }

    pub(crate) fn point<F: Scalar>(self, y: F, eta: F) -> LossPoint<F> {
        let one = F::one();
        match self {
            LossKind::Squared => {
                let r = eta - y;
                LossPoint { value: r * r / F::lit(2.0), d1: r, d2: one, capped: false }
            }
            LossKind::LinkIntegral(Link::Identity) => LossPoint {
                value: eta * eta / F::lit(2.0) - y * eta,
                d1: eta - y,
                d2: one,
                capped: false,
            },
            LossKind::Logistic | LossKind::LinkIntegral(Link::Expit) => {
                let p = expit(eta);
                LossPoint {
                    value: softplus(eta) - y * eta,
                    d1: p - y,
                    d2: p * (one - p),
                    capped: false,
                }
            }
            LossKind::CalibrationExponential => {
                let (e, capped) = guarded_exp(-eta);
                LossPoint {
                    value: y * e + (one - y) * eta,
                    d1: one - y - y * e,
                    d2: y * e,
                    capped,
                }
            }
        }
    }

    pub fn value<F: Scalar>(self, y: F, eta: F) -> F {
        self.point(y, eta).value
    }
}

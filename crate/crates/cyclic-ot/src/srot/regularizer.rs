//! Strongly convex regularizers presented through their Fenchel conjugates.

use std::str::FromStr;

use crate::scalar::Real;

use super::SrotError;

/// A strongly convex regularizer phi with phi(x) = +inf for x < 0, presented
/// through its conjugate phi*(y) = sup_x { y x - phi(x) } and the conjugate's
/// derivative. The derivative is non-decreasing and non-negative; it maps
/// dual slacks back to plan entries.
pub trait Regularizer<T: Real> {
    /// phi(x) for x >= 0.
    fn primal(&self, x: T) -> T;

    /// phi*(y).
    fn conjugate(&self, y: T) -> T;

    /// (phi*)'(y).
    fn conjugate_derivative(&self, y: T) -> T;

    /// (phi*)''(y), used by Newton steps. The default centered difference is
    /// enough for well-behaved conjugates; exact forms are faster.
    fn conjugate_second(&self, y: T) -> T {
        let h = T::of(1e-5);
        (self.conjugate_derivative(y + h) - self.conjugate_derivative(y - h)) / (h + h)
    }

    /// Strong convexity modulus mu > 0 of phi.
    fn modulus(&self) -> T;

    fn tag(&self) -> String;
}

/// Entropy: phi(x) = lambda x (log x - 1), the Sinkhorn regularizer.
/// Conjugate phi*(y) = lambda exp(y / lambda).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entropic<T> {
    pub lambda: T,
}

impl<T: Real> Entropic<T> {
    pub fn new(lambda: T) -> Result<Self, SrotError> {
        if !(lambda > T::zero()) {
            return Err(SrotError::BadParameter("lambda must be positive".into()));
        }
        Ok(Self { lambda })
    }
}

impl<T: Real> Regularizer<T> for Entropic<T> {
    fn primal(&self, x: T) -> T {
        if x > T::zero() {
            self.lambda * x * (x.ln() - T::one())
        } else {
            T::zero()
        }
    }

    fn conjugate(&self, y: T) -> T {
        self.lambda * (y / self.lambda).exp()
    }

    fn conjugate_derivative(&self, y: T) -> T {
        (y / self.lambda).exp()
    }

    fn conjugate_second(&self, y: T) -> T {
        (y / self.lambda).exp() / self.lambda
    }

    /// phi'' = lambda / x, so lambda is a modulus on plans with entries <= 1.
    fn modulus(&self) -> T {
        self.lambda
    }

    fn tag(&self) -> String {
        format!("entropic:{}", self.lambda)
    }
}

/// Quadratic: phi(x) = x^2 / (2 gamma) for x >= 0.
/// Conjugate phi*(y) = gamma max(y, 0)^2 / 2; its derivative gamma max(y, 0)
/// produces sparse plans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Squared<T> {
    pub gamma: T,
}

impl<T: Real> Squared<T> {
    pub fn new(gamma: T) -> Result<Self, SrotError> {
        if !(gamma > T::zero()) {
            return Err(SrotError::BadParameter("gamma must be positive".into()));
        }
        Ok(Self { gamma })
    }
}

impl<T: Real> Regularizer<T> for Squared<T> {
    fn primal(&self, x: T) -> T {
        x * x / (self.gamma + self.gamma)
    }

    fn conjugate(&self, y: T) -> T {
        let p = y.max(T::zero());
        self.gamma * p * p / T::of(2.0)
    }

    fn conjugate_derivative(&self, y: T) -> T {
        self.gamma * y.max(T::zero())
    }

    fn conjugate_second(&self, y: T) -> T {
        if y > T::zero() {
            self.gamma
        } else {
            T::zero()
        }
    }

    fn modulus(&self) -> T {
        T::one() / self.gamma
    }

    fn tag(&self) -> String {
        format!("squared:{}", self.gamma)
    }
}

/// The regularizers selectable from the command line: "entropic:<lambda>" or
/// "squared:<gamma>".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardRegularizer<T> {
    Entropic(Entropic<T>),
    Squared(Squared<T>),
}

impl<T: Real> Regularizer<T> for StandardRegularizer<T> {
    fn primal(&self, x: T) -> T {
        match self {
            StandardRegularizer::Entropic(r) => r.primal(x),
            StandardRegularizer::Squared(r) => r.primal(x),
        }
    }

    fn conjugate(&self, y: T) -> T {
        match self {
            StandardRegularizer::Entropic(r) => r.conjugate(y),
            StandardRegularizer::Squared(r) => r.conjugate(y),
        }
    }

    fn conjugate_derivative(&self, y: T) -> T {
        match self {
            StandardRegularizer::Entropic(r) => r.conjugate_derivative(y),
            StandardRegularizer::Squared(r) => r.conjugate_derivative(y),
        }
    }

    fn conjugate_second(&self, y: T) -> T {
        match self {
            StandardRegularizer::Entropic(r) => r.conjugate_second(y),
            StandardRegularizer::Squared(r) => r.conjugate_second(y),
        }
    }

    fn modulus(&self) -> T {
        match self {
            StandardRegularizer::Entropic(r) => r.modulus(),
            StandardRegularizer::Squared(r) => r.modulus(),
        }
    }

    fn tag(&self) -> String {
        match self {
            StandardRegularizer::Entropic(r) => r.tag(),
            StandardRegularizer::Squared(r) => r.tag(),
        }
    }
}

impl<T: Real> FromStr for StandardRegularizer<T> {
    type Err = SrotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| SrotError::BadParameter(format!("expected '<kind>:<value>', got '{s}'")))?;
        let value: f64 = value
            .parse()
            .map_err(|e| SrotError::BadParameter(format!("bad value in '{s}': {e}")))?;
        match kind.to_ascii_lowercase().as_str() {
            "entropic" => Ok(StandardRegularizer::Entropic(Entropic::new(T::of(value))?)),
            "squared" => Ok(StandardRegularizer::Squared(Squared::new(T::of(value))?)),
            other => Err(SrotError::BadParameter(format!("unknown regularizer '{other}'"))),
        }
    }
}

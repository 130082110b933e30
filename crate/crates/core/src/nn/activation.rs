use serde::{Deserialize, Serialize};

/// `max |tanh''(x)| = 4√3/9`, attained at `x = ±atanh(1/√3)`.
pub const TANH_SECOND_DERIV_MAX: f64 = 0.769_800_358_919_500_9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Tanh,
    Identity,
}

/// An elementwise activation together with the three constants the
/// covering bound needs: Lipschitz constant, `sup|σ'|`, and the Lipschitz
/// constant of `σ'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Activation {
    pub kind: ActivationKind,
    pub lipschitz: f64,
    pub deriv_bound: f64,
    pub deriv_lipschitz: f64,
}

impl Activation {
    pub const fn tanh() -> Self {
        Activation {
            kind: ActivationKind::Tanh,
            lipschitz: 1.0,
            deriv_bound: 1.0,
            deriv_lipschitz: TANH_SECOND_DERIV_MAX,
        }
    }

    pub const fn identity() -> Self {
        Activation {
            kind: ActivationKind::Identity,
            lipschitz: 1.0,
            deriv_bound: 1.0,
            deriv_lipschitz: 0.0,
        }
    }

    pub fn from_kind(kind: ActivationKind) -> Self {
        match kind {
            ActivationKind::Tanh => Self::tanh(),
            ActivationKind::Identity => Self::identity(),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Identity => x,
        }
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActivationKind::Identity => 1.0,
        }
    }

    #[inline]
    pub fn second_deriv(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            ActivationKind::Identity => 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.kind == ActivationKind::Identity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Golden-section search on |tanh''| over [0, 2]; the maximum is interior.
    fn maximize_abs_tanh_second() -> f64 {
        let f = |x: f64| Activation::tanh().second_deriv(x).abs();
        let (mut a, mut b) = (0.0_f64, 2.0_f64);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        f(0.5 * (a + b))
    }

    #[test]
    fn tanh_constant_matches_numerical_maximum() {
        let numeric = maximize_abs_tanh_second();
        assert!((numeric - TANH_SECOND_DERIV_MAX).abs() < 1e-14);
        assert!((TANH_SECOND_DERIV_MAX - 4.0 * 3f64.sqrt() / 9.0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let act = Activation::tanh();
        for &x in &[-2.0, -0.3, 0.0, 0.7, 1.9] {
            let h = 1e-6;
            let d1 = (act.eval(x + h) - act.eval(x - h)) / (2.0 * h);
            let d2 = (act.deriv(x + h) - act.deriv(x - h)) / (2.0 * h);
            assert!((d1 - act.deriv(x)).abs() < 1e-9);
            assert!((d2 - act.second_deriv(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn tanh_constants_registered() {
        let a = Activation::tanh();
        assert_eq!(a.lipschitz, 1.0);
        assert_eq!(a.deriv_bound, 1.0);
        assert_eq!(a.deriv_lipschitz, TANH_SECOND_DERIV_MAX);
    }
}

//! Leading-order tail profiles `t^a · e^{μt} · Π ln_i(t)^{e_i}` used to decide
//! convergence of improper integrals exactly for the closed-form families,
//! including the iterated-logarithm borderline cases where numerical
//! quadrature cannot tell convergence from divergence.

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Asymptotic {
    /// Identically zero for large t.
    pub zero: bool,
    pub rate: f64,
    pub power: f64,
    /// `logs[i]` is the exponent of `ln_{i+1} t`.
    pub logs: Vec<f64>,
}

impl Asymptotic {
    pub fn zero() -> Self {
        Asymptotic { zero: true, rate: 0.0, power: 0.0, logs: Vec::new() }
    }

    pub fn constant() -> Self {
        Asymptotic { zero: false, rate: 0.0, power: 0.0, logs: Vec::new() }
    }

    pub fn power(a: f64) -> Self {
        Asymptotic { power: a, ..Self::constant() }
    }

    pub fn exponential(rate: f64) -> Self {
        Asymptotic { rate, ..Self::constant() }
    }

    pub fn with_logs(mut self, logs: Vec<f64>) -> Self {
        self.logs = logs;
        self.trim();
        self
    }

    fn trim(&mut self) {
        while self.logs.last().is_some_and(|e| e.abs() < EPS) {
            self.logs.pop();
        }
    }

    fn log_exp(&self, i: usize) -> f64 {
        self.logs.get(i).copied().unwrap_or(0.0)
    }

    pub fn mul(&self, other: &Asymptotic) -> Asymptotic {
        if self.zero || other.zero {
            return Asymptotic::zero();
        }
        let n = self.logs.len().max(other.logs.len());
        let logs = (0..n).map(|i| self.log_exp(i) + other.log_exp(i)).collect();
        Asymptotic {
            zero: false,
            rate: self.rate + other.rate,
            power: self.power + other.power,
            logs,
        }
        .with_logs_trimmed()
    }

    fn with_logs_trimmed(mut self) -> Self {
        self.trim();
        self
    }

    /// Profile of `f^s` for `s > 0`, or of `1/f` for `s = -1` and so on.
    pub fn powf(&self, s: f64) -> Asymptotic {
        if self.zero {
            return Asymptotic::zero();
        }
        Asymptotic {
            zero: false,
            rate: self.rate * s,
            power: self.power * s,
            logs: self.logs.iter().map(|e| e * s).collect(),
        }
        .with_logs_trimmed()
    }

    pub fn is_integrable(&self) -> bool {
        if self.zero || self.rate < -EPS {
            return true;
        }
        if self.rate > EPS {
            return false;
        }
        if self.power < -1.0 - EPS {
            return true;
        }
        if self.power > -1.0 + EPS {
            return false;
        }
        for i in 0..=self.logs.len() {
            let e = self.log_exp(i);
            if (e + 1.0).abs() > EPS {
                return e < -1.0;
            }
        }
        false
    }

    /// Profile of `∫_0^t f` as `t → ∞` (a constant when the integral converges).
    pub fn integral(&self) -> Asymptotic {
        if self.zero {
            return Asymptotic::zero();
        }
        if self.is_integrable() {
            return Asymptotic::constant();
        }
        if self.rate > EPS {
            return self.clone();
        }
        if self.power > -1.0 + EPS {
            return Asymptotic { power: self.power + 1.0, ..self.clone() };
        }
        // t^{-1} Π ln_i^{e_i}: the first exponent differing from -1 decides.
        let m = (0..=self.logs.len())
            .find(|&i| (self.log_exp(i) + 1.0).abs() > EPS)
            .expect("range includes a zero exponent");
        let mut logs = vec![0.0; m];
        logs.push(self.log_exp(m) + 1.0);
        logs.extend(self.logs.iter().skip(m + 1).copied());
        Asymptotic { zero: false, rate: 0.0, power: 0.0, logs }.with_logs_trimmed()
    }

    fn leading_sign(&self) -> Option<f64> {
        if self.rate.abs() > EPS {
            return Some(self.rate);
        }
        if self.power.abs() > EPS {
            return Some(self.power);
        }
        self.logs.iter().copied().find(|e| e.abs() > EPS)
    }

    /// Bounded for large t. `None` never occurs: a pure constant is bounded.
    pub fn is_bounded(&self) -> bool {
        if self.zero {
            return true;
        }
        self.leading_sign().is_none_or(|s| s < 0.0)
    }

    /// Eventually nonincreasing, when the leading profile decides it.
    /// A constant leading profile leaves the answer to lower-order terms.
    pub fn is_eventually_nonincreasing(&self) -> Option<bool> {
        if self.zero {
            return Some(true);
        }
        self.leading_sign().map(|s| s < 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_integrability_threshold() {
        assert!(Asymptotic::power(-1.5).is_integrable());
        assert!(!Asymptotic::power(-1.0).is_integrable());
        assert!(!Asymptotic::power(-0.5).is_integrable());
    }

    #[test]
    fn iterated_log_borderline() {
        // 1/(t ln t) diverges, 1/(t ln^2 t) converges
        assert!(!Asymptotic::power(-1.0).with_logs(vec![-1.0]).is_integrable());
        assert!(Asymptotic::power(-1.0).with_logs(vec![-2.0]).is_integrable());
        // 1/(t ln t ln_2 t) diverges, 1/(t ln t ln_2^{1.5} t) converges
        assert!(!Asymptotic::power(-1.0).with_logs(vec![-1.0, -1.0]).is_integrable());
        assert!(Asymptotic::power(-1.0).with_logs(vec![-1.0, -1.5]).is_integrable());
    }

    #[test]
    fn integral_of_harmonic_is_log() {
        let i = Asymptotic::power(-1.0).integral();
        assert_eq!(i, Asymptotic::constant().with_logs(vec![1.0]));
        let i2 = Asymptotic::power(-1.0).with_logs(vec![-1.0]).integral();
        assert_eq!(i2, Asymptotic::constant().with_logs(vec![0.0, 1.0]));
    }

    #[test]
    fn exponential_dominates() {
        let f = Asymptotic::exponential(-0.1).mul(&Asymptotic::power(50.0));
        assert!(f.is_integrable());
        assert!(f.is_bounded());
    }

    #[test]
    fn constant_is_ambiguous_for_monotonicity() {
        assert_eq!(Asymptotic::constant().is_eventually_nonincreasing(), None);
        assert!(Asymptotic::constant().is_bounded());
    }
}

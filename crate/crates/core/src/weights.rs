//! Cumulative reaction integrals `C(t) = ∫_0^t c` and the exponentially
//! weighted integrals `∫_0^t e^{s C(τ)} dτ` that enter the linear-reaction
//! criteria and the transformed boundary flux.

use std::sync::Arc;

use crate::coeffs::CoefficientSpec;
use crate::quad::{log_add, log_integral};

/// Tabulated `ln ∫_0^{t_i} e^{g}` on a grid that is uniform on `[0, 1]` and
/// geometric beyond; queries add the partial cell.
#[derive(Clone)]
struct LogTable {
    grid: Vec<f64>,
    log_cum: Vec<f64>,
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl LogTable {
    fn new(g: Arc<dyn Fn(f64) -> f64 + Send + Sync>, horizon: f64) -> Self {
        let mut grid = vec![0.0];
        let mut t: f64 = 0.0;
        while t < 1.0 {
            t += 0.05;
            grid.push(t.min(1.0));
            t = t.min(1.0);
        }
        while t < horizon {
            t *= 1.05;
            grid.push(t);
        }
        let mut log_cum = vec![f64::NEG_INFINITY];
        for w in grid.windows(2) {
            let prev = *log_cum.last().unwrap();
            log_cum.push(log_add(prev, log_integral(&*g, w[0], w[1])));
        }
        LogTable { grid, log_cum, g }
    }

    fn query(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let i = self.grid.partition_point(|&x| x <= t).saturating_sub(1);
        log_add(self.log_cum[i], log_integral(&*self.g, self.grid[i], t))
    }
}

/// `C(t) = ∫_0^t c(s) ds`, closed form where the family has one and a
/// precomputed table otherwise.
#[derive(Clone)]
pub struct Cumulative {
    spec: CoefficientSpec,
    table: Option<LogTable>,
}

impl Cumulative {
    pub fn new(spec: &CoefficientSpec, horizon: f64) -> Self {
        let table = (!spec.has_closed_form_cumulative()).then(|| {
            let s = spec.clone();
            LogTable::new(Arc::new(move |t| s.value(t).ln()), horizon)
        });
        Cumulative { spec: spec.clone(), table }
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.table {
            Some(table) => table.query(t).exp(),
            None => self.spec.cumulative(t),
        }
    }

    pub fn spec(&self) -> &CoefficientSpec {
        &self.spec
    }
}

/// `ln ∫_0^t e^{s·C(τ)} dτ` for a fixed scale `s`.
#[derive(Clone)]
pub struct ExpWeightIntegral {
    table: LogTable,
}

impl ExpWeightIntegral {
    pub fn new(cumulative: &Cumulative, scale: f64, horizon: f64) -> Self {
        let cum = cumulative.clone();
        let g: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |t| scale * cum.value(t));
        ExpWeightIntegral { table: LogTable::new(g, horizon) }
    }

    pub fn log_value(&self, t: f64) -> f64 {
        self.table.query(t)
    }
}

/// Effective flux of the linear-reaction problem,
/// `κ(t) = k(t) e^{-C(t)} ∫_0^t e^{q C(τ)} dτ`.
#[derive(Clone)]
pub struct EffectiveFlux {
    k: CoefficientSpec,
    cumulative: Cumulative,
    weighted: ExpWeightIntegral,
}

impl EffectiveFlux {
    pub fn new(q: f64, c: &CoefficientSpec, k: &CoefficientSpec, horizon: f64) -> Self {
        let cumulative = Cumulative::new(c, horizon);
        let weighted = ExpWeightIntegral::new(&cumulative, q, horizon);
        EffectiveFlux { k: k.clone(), cumulative, weighted }
    }

    pub fn log_value(&self, t: f64) -> f64 {
        self.k.value(t).ln() - self.cumulative.value(t) + self.weighted.log_value(t)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let v = self.log_value(t).exp();
        if v.is_nan() { 0.0 } else { v }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_cumulative_matches_closed_form() {
        // power_log with gamma != 1 goes through the table
        let spec = CoefficientSpec::power_log(1.0, 1.5, 1, 0.0);
        let cum = Cumulative::new(&spec, 1e4);
        for t in [0.01, 0.5, 3.0, 100.0, 5e3] {
            let direct = spec.integral(0.0, t);
            assert!((cum.value(t) - direct).abs() < 1e-9 * direct, "t = {t}");
        }
    }

    #[test]
    fn effective_flux_with_zero_reaction_is_t_k() {
        let k = CoefficientSpec::power(1.0, 3.0);
        let flux = EffectiveFlux::new(2.0, &CoefficientSpec::zero(), &k, 1e4);
        for t in [0.1, 1.0, 10.0, 1e3] {
            let expected = t * k.value(t);
            assert!((flux.value(t) - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn effective_flux_constant_reaction() {
        // c = 1, q = 2: κ = k e^{-t} (e^{2t} - 1)/2
        let k = CoefficientSpec::exp_decay(1.0, 4.0);
        let flux = EffectiveFlux::new(2.0, &CoefficientSpec::constant(1.0), &k, 1e3);
        for t in [0.2f64, 1.0, 5.0, 50.0] {
            let expected = (-4.0 * t).exp() * (-t).exp() * ((2.0 * t).exp() - 1.0) / 2.0;
            assert!((flux.value(t) - expected).abs() < 1e-10 * expected, "t = {t}");
        }
    }
}

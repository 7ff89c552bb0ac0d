//! Concentration bounds for the single-nucleotide estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mutation rates and sequence lengths of the published minimum-deviation grid.
pub const TABLE1_P: [f64; 6] = [0.01, 0.03, 0.05, 0.10, 0.20, 0.50];
pub const TABLE1_G: [f64; 4] = [1e4, 1e5, 1e6, 1e7];

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITER: usize = 100_000;

fn two_sided_tail(sum_sq: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if sum_sq == 0.0 {
        return 0.0;
    }
    (2.0 * (-2.0 * t * t / sum_sq).exp()).min(1.0)
}

/// Hoeffding: `P(|X - E X| >= t) <= 2 exp(-2 t^2 / sum (b_i - a_i)^2)` for a sum of
/// independent variables with ranges of the given widths. Capped at 1.
pub fn hoeffding_tail(widths: &[f64], t: f64) -> f64 {
    two_sided_tail(widths.iter().map(|w| w * w).sum(), t)
}

/// McDiarmid: `P(|f - E f| >= t) <= 2 exp(-2 t^2 / sum c_i^2)` for a function with
/// bounded differences `c_i`. Capped at 1.
pub fn mcdiarmid_tail(differences: &[f64], t: f64) -> f64 {
    two_sided_tail(differences.iter().map(|c| c * c).sum(), t)
}

/// Minimum `|f_A/G - 1/4|` for which the single-nucleotide estimator satisfies
/// `P(|p_hat - p| >= eps p) <= 2 exp(-5.3) <= 0.01`: `sqrt(1.5 / (p^2 eps^2 G))`.
pub fn min_deviation_table1(p: f64, eps: f64, g: f64) -> f64 {
    (1.5 / (p * p * eps * eps * g)).sqrt()
}

/// Hoeffding bound on `P(|p_hat - p| > eps p)` for the single-nucleotide estimator on a source
/// with nucleotide fraction `fraction`: `2 exp(-(32/9) G (fraction - 1/4)^2 p^2 eps^2)`.
pub fn k1_single_failure_bound(p: f64, eps: f64, g: f64, fraction: f64) -> f64 {
    let dev = fraction - 0.25;
    (2.0 * (-(32.0 / 9.0) * g * dev * dev * p * p * eps * eps).exp()).min(1.0)
}

/// Parameters of the read-based single-nucleotide guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub genome_len: f64,
    pub reads: f64,
    pub read_len: f64,
    pub p: f64,
    pub s: f64,
    pub eps: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl BoundParams {
    /// Splits a total failure probability `delta` evenly: `C_i = ln(6 / delta)`, so that
    /// `2 e^-C1 + 2 e^-C2 + 2 e^-C3 = delta`.
    pub fn with_failure_budget(
        genome_len: f64,
        reads: f64,
        read_len: f64,
        p: f64,
        s: f64,
        eps: f64,
        delta: f64,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "failure budget {delta} outside (0, 1)"
            )));
        }
        let c = (6.0 / delta).ln();
        let params = BoundParams {
            genome_len,
            reads,
            read_len,
            p,
            s,
            eps,
            c1: c,
            c2: c,
            c3: c,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("G", self.genome_len),
            ("N", self.reads),
            ("L", self.read_len),
            ("p", self.p),
            ("eps", self.eps),
            ("C1", self.c1),
            ("C2", self.c2),
            ("C3", self.c3),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.s.is_nan() || self.s < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "s must be nonnegative, got {}",
                self.s
            )));
        }
        if self.p >= 0.75 || self.s >= 0.75 {
            return Err(Error::InvalidParameter("the guarantee needs p, s < 3/4".into()));
        }
        Ok(())
    }

    /// Part of the required deviation that does not depend on `f_A/G`.
    fn base_requirement(&self) -> f64 {
        let n = self.reads;
        let g = self.genome_len;
        3.0 / (4.0 * self.p * self.eps) * ((self.c2 / (2.0 * n)).sqrt() + (self.c1 / (2.0 * g)).sqrt())
            + (self.c3 / (2.0 * n)).sqrt()
    }

    fn error_term(&self, fraction: f64) -> f64 {
        (4.0 * self.s / 3.0 * fraction - self.s / 3.0).abs()
    }

    /// Whether a source with nucleotide fraction `fraction` meets the hypothesis of the guarantee.
    pub fn is_satisfied_by(&self, fraction: f64) -> bool {
        (fraction - 0.25).abs() >= self.base_requirement() + self.error_term(fraction)
    }
}

/// Smallest `d` such that both `f_A/G = 1/4 + d` and `f_A/G = 1/4 - d` satisfy
/// `|f_A/G - 1/4| >= (3/(4 p eps)) (sqrt(C2/2N) + sqrt(C1/2G)) + sqrt(C3/2N) + |4s/3 f_A/G - s/3|`.
///
/// The last term depends on `f_A/G`, so each branch is solved as the fixed point of
/// `d <- base + |4s/3 (1/4 +- d) - s/3|`, iterated from 0. The map has slope `4s/3 < 1`.
pub fn theorem1_required_deviation(params: &BoundParams) -> Result<f64> {
    params.validate()?;
    let contraction = 4.0 * params.s / 3.0;
    if contraction >= 1.0 {
        return Err(Error::NonConvergence);
    }
    let base = params.base_requirement();
    let solve = |sign: f64| -> Result<f64> {
        let mut d = 0.0;
        for _ in 0..FIXED_POINT_MAX_ITER {
            let next = base + params.error_term(0.25 + sign * d);
            if (next - d).abs() <= FIXED_POINT_TOL {
                return Ok(next);
            }
            d = next;
        }
        Err(Error::NonConvergence)
    };
    Ok(solve(1.0)?.max(solve(-1.0)?))
}

/// `max(0, 1 - 2e^-C1 - 2e^-C2 - 2e^-C3)`.
pub fn theorem1_success_bound(params: &BoundParams) -> f64 {
    let fail = 2.0 * ((-params.c1).exp() + (-params.c2).exp() + (-params.c3).exp());
    (1.0 - fail).max(0.0)
}

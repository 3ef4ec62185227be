//! Expected spot-search time at a location as a function of same-class
//! occupancy, and the partial derivatives the corridor ODEs need.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binomial searches can never reach full occupancy; solvers stay below this.
pub const POLE_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseParams {
    /// Slope coefficient below the critical occupancy.
    pub delta: f64,
    /// Slope of the steep branch above the critical occupancy.
    pub steep: f64,
    /// Critical headroom: the steep branch starts at occupancy `1 - headroom`.
    pub headroom: f64,
}

impl PiecewiseParams {
    /// Occupancy at which the steep branch starts.
    pub fn kink(&self) -> f64 {
        1.0 - self.headroom
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchModel {
    /// `S = m / (m - n)`.
    Binomial,
    /// Linear in occupancy up to `1 - ω`, then a steep linear branch.
    Piecewise(PiecewiseParams),
}

/// Which analytic piece of the search function applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Smooth,
    Lower,
    Steep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchPartials {
    pub dn: f64,
    pub dnn: f64,
    pub dm: f64,
    pub dnm: f64,
}

impl SearchModel {
    /// Search time with an empty lot. Identical for both vehicle classes.
    pub fn min_time(&self) -> f64 {
        match self {
            SearchModel::Binomial => 1.0,
            SearchModel::Piecewise(_) => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SearchModel::Binomial => "binomial",
            SearchModel::Piecewise(_) => "piecewise",
        }
    }

    fn check(&self, n: f64, m: f64) -> Result<()> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::SearchDomain {
                n,
                m,
                reason: "capacity must be positive",
            });
        }
        if !(n >= 0.0) {
            return Err(Error::SearchDomain {
                n,
                m,
                reason: "negative density",
            });
        }
        match self {
            SearchModel::Binomial if n >= m => Err(Error::SearchDomain {
                n,
                m,
                reason: "binomial search needs occupancy below 1",
            }),
            SearchModel::Piecewise(_) if n > m * (1.0 + 1e-12) => Err(Error::SearchDomain {
                n,
                m,
                reason: "occupancy above 1",
            }),
            _ => Ok(()),
        }
    }

    /// Branch at `(n, m)`. The kink itself, up to rounding, belongs to the
    /// lower branch.
    pub fn branch(&self, n: f64, m: f64) -> Branch {
        match self {
            SearchModel::Binomial => Branch::Smooth,
            SearchModel::Piecewise(p) => {
                if n / m <= p.kink() || at_kink(n, m, p) {
                    Branch::Lower
                } else {
                    Branch::Steep
                }
            }
        }
    }

    pub fn search_time(&self, n: f64, m: f64) -> Result<f64> {
        self.check(n, m)?;
        Ok(self.time_on(self.branch(n, m), n, m))
    }

    /// Partial derivatives at `(n, m)`; left-sided at the piecewise kink.
    pub fn search_partials(&self, n: f64, m: f64) -> Result<SearchPartials> {
        self.check(n, m)?;
        Ok(self.partials_on(self.branch(n, m), n, m))
    }

    /// Search time evaluated on an explicit branch (no domain checks).
    pub fn time_on(&self, branch: Branch, n: f64, m: f64) -> f64 {
        match (self, branch) {
            (SearchModel::Binomial, _) => m / (m - n),
            (SearchModel::Piecewise(p), Branch::Steep) => {
                p.delta * p.kink() + p.steep * (n / m - p.kink())
            }
            (SearchModel::Piecewise(p), _) => p.delta * n / m,
        }
    }

    /// Partials evaluated on an explicit branch (no domain checks).
    pub fn partials_on(&self, branch: Branch, n: f64, m: f64) -> SearchPartials {
        match (self, branch) {
            (SearchModel::Binomial, _) => {
                let gap = m - n;
                let gap2 = gap * gap;
                SearchPartials {
                    dn: m / gap2,
                    dnn: 2.0 * m / (gap2 * gap),
                    dm: -n / gap2,
                    dnm: -(m + n) / (gap2 * gap),
                }
            }
            (SearchModel::Piecewise(p), b) => {
                let slope = if b == Branch::Steep { p.steep } else { p.delta };
                let dn = slope / m;
                SearchPartials {
                    dn,
                    dnn: 0.0,
                    dm: -dn * n / m,
                    dnm: -slope / (m * m),
                }
            }
        }
    }

    /// `S + n ∂S/∂n`, the per-vehicle marginal search term.
    pub fn marginal_factor(&self, n: f64, m: f64) -> Result<f64> {
        let s = self.search_time(n, m)?;
        let p = self.search_partials(n, m)?;
        Ok(s + n * p.dn)
    }

    /// Subdifferential of `S + n ∂S/∂n` in `n`. Degenerate except exactly at
    /// the piecewise kink, where the steep branch gives the upper end.
    pub fn marginal_factor_bounds(&self, n: f64, m: f64) -> Result<(f64, f64)> {
        let lo = self.marginal_factor(n, m)?;
        match self {
            SearchModel::Piecewise(p) if at_kink(n, m, p) => {
                let s = self.time_on(Branch::Steep, n, m);
                Ok((lo, s + n * p.steep / m))
            }
            _ => Ok((lo, lo)),
        }
    }

    /// Density that produces search time `s` at capacity `m`, or `None` when
    /// `s` is not reachable below full occupancy.
    pub fn invert_time(&self, s: f64, m: f64) -> Option<f64> {
        if s <= self.min_time() {
            return Some(0.0);
        }
        match self {
            SearchModel::Binomial => Some(m * (1.0 - 1.0 / s)),
            SearchModel::Piecewise(p) => {
                let s_kink = p.delta * p.kink();
                let occ = if s <= s_kink {
                    s / p.delta
                } else {
                    p.kink() + (s - s_kink) / p.steep
                };
                (occ <= 1.0).then_some(occ * m)
            }
        }
    }
}

/// True when `n/m` sits on the piecewise kink up to rounding.
pub fn at_kink(n: f64, m: f64, p: &PiecewiseParams) -> bool {
    (n / m - p.kink()).abs() <= 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pw() -> SearchModel {
        SearchModel::Piecewise(PiecewiseParams {
            delta: 10.0,
            steep: 1000.0,
            headroom: 0.2,
        })
    }

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn binomial_empty_lot_is_minimum() {
        assert_eq!(SearchModel::Binomial.search_time(0.0, 100.0).unwrap(), 1.0);
        let p = SearchModel::Binomial.search_partials(0.0, 100.0).unwrap();
        assert_eq!(p.dm, 0.0);
    }

    #[test]
    fn piecewise_branches() {
        let s = pw();
        assert!((s.search_time(50.0, 100.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((s.search_time(90.0, 100.0).unwrap() - 108.0).abs() < 1e-9);
        let p = s.search_partials(10.0, 25000.0).unwrap();
        assert!((p.dn - 4e-4).abs() < 1e-15);
    }

    #[test]
    fn binomial_partials_closed_form() {
        let p = SearchModel::Binomial.search_partials(1.0, 2.0).unwrap();
        assert!((p.dn - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kink_uses_left_branch() {
        let s = pw();
        let p = s.search_partials(80.0, 100.0).unwrap();
        assert!((p.dn - 0.1).abs() < 1e-12);
        let (lo, hi) = s.marginal_factor_bounds(80.0, 100.0).unwrap();
        assert!((lo - 16.0).abs() < 1e-9);
        assert!((hi - 808.0).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        assert!(SearchModel::Binomial.search_time(100.0, 100.0).is_err());
        assert!(SearchModel::Binomial.search_time(-1.0, 100.0).is_err());
        assert!(pw().search_time(1.0, 0.0).is_err());
        assert!(pw().search_time(100.0, 100.0).is_ok());
        assert!(pw().search_time(101.0, 100.0).is_err());
    }

    #[test]
    fn binomial_pole_diverges() {
        let m = 1000.0;
        let s = SearchModel::Binomial.search_time(m * (1.0 - 1e-6), m).unwrap();
        assert!(s > 1e5);
    }

    #[test]
    fn inversion_round_trips() {
        for model in [SearchModel::Binomial, pw()] {
            for occ in [0.0, 0.1, 0.5, 0.79, 0.85, 0.95] {
                let m = 2500.0;
                let s = model.search_time(occ * m, m).unwrap();
                let n = model.invert_time(s, m).unwrap();
                assert!((n - occ * m).abs() < 1e-8 * m, "{model:?} {occ}");
            }
        }
        assert!(pw().invert_time(500.0, 100.0).is_none());
    }

    #[test]
    fn partials_match_finite_differences_at_fixed_points() {
        let model = SearchModel::Binomial;
        let (n, m) = (300.0, 1000.0);
        let p = model.search_partials(n, m).unwrap();
        let h = 1e-3;
        let dn = fd(|v| model.search_time(v, m).unwrap(), n, h);
        let dm = fd(|v| model.search_time(n, v).unwrap(), m, h);
        let dnn = fd(|v| model.search_partials(v, m).unwrap().dn, n, h);
        let dnm = fd(|v| model.search_partials(n, v).unwrap().dn, m, h);
        assert!((p.dn - dn).abs() <= 1e-6 * dn.abs());
        assert!((p.dm - dm).abs() <= 1e-6 * dm.abs());
        assert!((p.dnn - dnn).abs() <= 1e-6 * dnn.abs());
        assert!((p.dnm - dnm).abs() <= 1e-6 * dnm.abs());
    }
}

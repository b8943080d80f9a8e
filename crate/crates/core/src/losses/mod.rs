//! The five loss terms, their weighted composition, and analytic gradients with respect to
//! the probability mask.
//!
//! Set-valued quantities (the coastline band used by the smoothness term and the sea set used
//! by the variance term) are recomputed on every forward pass and treated as constants in the
//! backward pass. The connectivity term reports the hard run count; its gradient comes from a
//! soft rising-edge surrogate.

mod ce;
mod coast;
mod conn;
mod hsv;
pub(crate) mod robust;
mod sea;

pub use ce::loss_ce;
pub use coast::{loss_coast, loss_coast_with_set};
pub use conn::{loss_conn, loss_conn_hard, loss_conn_soft};
pub use hsv::{
    hsv_confidence_weights, hsv_param_gradient, hsv_water_likelihood, loss_hsv,
    loss_hsv_precomputed,
};
pub use robust::{loss_robust, loss_robust_frozen, FrozenSets};
pub use sea::{loss_sea, loss_sea_with_set, sea_set};

use std::fmt;
use std::str::FromStr;

use crate::components::Connectivity;
use crate::error::{Error, Result};
use crate::grid::Grid2D;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A scalar loss and its gradient with respect to the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TermLoss {
    pub value: f64,
    pub grad: Grid2D,
}

/// Coefficients of the HSV water likelihood plus the confidence-weight kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPriorParams {
    pub alpha_h: f64,
    pub alpha_s: f64,
    pub alpha_v: f64,
    pub beta: f64,
    /// Bandwidth of the Gaussian confidence weight, in HSV units.
    pub sigma_bw: f64,
    /// Reference ("ideal water") point in HSV space.
    pub ref_hsv: [f64; 3],
}

impl Default for HsvPriorParams {
    fn default() -> Self {
        Self {
            alpha_h: 0.0,
            alpha_s: 0.0,
            alpha_v: 0.0,
            beta: 0.0,
            sigma_bw: 0.2,
            ref_hsv: [0.58, 0.3, 0.45],
        }
    }
}

impl HsvPriorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_bw > 0.0 && self.sigma_bw.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_bw must be positive, got {}",
                self.sigma_bw
            )));
        }
        let [h, s, v] = self.ref_hsv;
        if !((0.0..1.0).contains(&h) && (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&v)) {
            return Err(Error::Config(format!(
                "ref_hsv {:?} outside HSV ranges",
                self.ref_hsv
            )));
        }
        Ok(())
    }

    /// `(alpha_h, alpha_s, alpha_v, beta)`.
    pub fn coefficients(&self) -> [f64; 4] {
        [self.alpha_h, self.alpha_s, self.alpha_v, self.beta]
    }

    pub fn set_coefficients(&mut self, c: [f64; 4]) {
        [self.alpha_h, self.alpha_s, self.alpha_v, self.beta] = c;
    }
}

/// The five loss terms in composition order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Ce,
    Hsv,
    Coast,
    Conn,
    Sea,
}

impl Term {
    pub const ALL: [Term; 5] = [Term::Ce, Term::Hsv, Term::Coast, Term::Conn, Term::Sea];
    pub const AUXILIARY: [Term; 4] = [Term::Hsv, Term::Coast, Term::Conn, Term::Sea];

    pub fn name(self) -> &'static str {
        match self {
            Term::Ce => "ce",
            Term::Hsv => "hsv",
            Term::Coast => "coast",
            Term::Conn => "conn",
            Term::Sea => "sea",
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Term::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown loss term `{s}`")))
    }
}

/// Non-negative weights of the composite objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub ce: f64,
    pub hsv: f64,
    pub coast: f64,
    pub conn: f64,
    pub sea: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            ce: 1.0,
            hsv: 0.5,
            coast: 0.1,
            conn: 0.1,
            sea: 0.1,
        }
    }
}

impl LossWeights {
    pub fn ce_only() -> Self {
        Self::only(Term::Ce, 1.0)
    }

    pub fn zero() -> Self {
        Self {
            ce: 0.0,
            hsv: 0.0,
            coast: 0.0,
            conn: 0.0,
            sea: 0.0,
        }
    }

    pub fn only(term: Term, lambda: f64) -> Self {
        let mut w = Self::zero();
        *w.get_mut(term) = lambda;
        w
    }

    pub fn get(&self, term: Term) -> f64 {
        match term {
            Term::Ce => self.ce,
            Term::Hsv => self.hsv,
            Term::Coast => self.coast,
            Term::Conn => self.conn,
            Term::Sea => self.sea,
        }
    }

    pub fn get_mut(&mut self, term: Term) -> &mut f64 {
        match term {
            Term::Ce => &mut self.ce,
            Term::Hsv => &mut self.hsv,
            Term::Coast => &mut self.coast,
            Term::Conn => &mut self.conn,
            Term::Sea => &mut self.sea,
        }
    }

    pub fn without(mut self, term: Term) -> Self {
        *self.get_mut(term) = 0.0;
        self
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            ce: self.ce * factor,
            hsv: self.hsv * factor,
            coast: self.coast * factor,
            conn: self.conn * factor,
            sea: self.sea * factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in Term::ALL {
            let l = self.get(t);
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("lambda_{t} must be >= 0, got {l}")));
            }
        }
        if Term::ALL.iter().all(|&t| self.get(t) == 0.0) {
            return Err(Error::Config("at least one lambda must be positive".into()));
        }
        Ok(())
    }
}

/// Settings of the column-connectivity term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnConfig {
    pub max_regions: usize,
    /// Temperature of the sigmoid used by the gradient surrogate.
    pub tau_soft: f64,
    pub threshold: f64,
}

impl Default for ConnConfig {
    fn default() -> Self {
        Self {
            max_regions: 10,
            tau_soft: 0.1,
            threshold: 0.5,
        }
    }
}

impl ConnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_regions == 0 {
            return Err(Error::Config("max_regions must be >= 1".into()));
        }
        if !(self.tau_soft > 0.0 && self.tau_soft.is_finite()) {
            return Err(Error::Config(format!(
                "tau_soft must be positive, got {}",
                self.tau_soft
            )));
        }
        check_unit_open("conn threshold", self.threshold)
    }
}

pub(crate) fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

/// Everything the composite objective needs besides the inputs and the HSV prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub weights: LossWeights,
    /// Binarization threshold for the coastline and sea sets.
    pub threshold: f64,
    pub coast_k: usize,
    pub conn: ConnConfig,
    pub sea_window: usize,
    pub sea_min_area: usize,
    pub sea_connectivity: Connectivity,
    pub ce_eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            threshold: 0.5,
            coast_k: 3,
            conn: ConnConfig::default(),
            sea_window: 5,
            sea_min_area: 16,
            sea_connectivity: Connectivity::Four,
            ce_eps: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn with_weights(mut self, weights: LossWeights) -> Self {
        self.weights = weights;
        self
    }

    /// Validates everything except the weights, which may legitimately be all zero when
    /// probing the objective.
    pub fn validate_settings(&self) -> Result<()> {
        check_unit_open("threshold", self.threshold)?;
        crate::filters::check_window(self.coast_k)?;
        crate::filters::check_window(self.sea_window)?;
        if self.sea_min_area == 0 {
            return Err(Error::Config("sea_min_area must be >= 1".into()));
        }
        if !(self.ce_eps > 0.0 && self.ce_eps < 0.5) {
            return Err(Error::Config(format!(
                "ce_eps must lie in (0, 0.5), got {}",
                self.ce_eps
            )));
        }
        self.conn.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.validate_settings()
    }
}

/// Component values, the composite, and `dL/dM`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBundle {
    pub l_ce: f64,
    pub l_hsv: f64,
    pub l_coast: f64,
    /// Hard run-count value.
    pub l_conn: f64,
    pub l_sea: f64,
    /// `sum(lambda_i * l_i)` with the hard connectivity value.
    pub l_robust: f64,
    /// Soft surrogate of the connectivity term.
    pub l_conn_soft: f64,
    /// Composite with `l_conn` replaced by `l_conn_soft`; `grad` is its exact derivative while
    /// the sets stay frozen.
    pub l_smooth: f64,
    pub grad: Grid2D,
}

impl LossBundle {
    pub fn term(&self, term: Term) -> f64 {
        match term {
            Term::Ce => self.l_ce,
            Term::Hsv => self.l_hsv,
            Term::Coast => self.l_coast,
            Term::Conn => self.l_conn,
            Term::Sea => self.l_sea,
        }
    }
}

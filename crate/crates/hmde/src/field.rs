//! Nonlinearities with declared analytic data.
//!
//! A [`FieldSpec`] wraps a handle `(t, u) -> R^n` together with whatever the
//! solver and the certificates need to know about it: a growth bound (a
//! fixed integrable majorant, or a radius-indexed family that is
//! nondecreasing in the radius) and, for perturbation roles, a contraction
//! modulus (a single D-function, or a radius-indexed family).
//!
//! A handle may carry *isolated-time overrides*: finitely many times where
//! the field value differs from the base handle. Overrides change node
//! values but never one-sided limits in time, which is exactly the structure
//! needed to encode impulse maps as integrand values at jump times.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::path::RegulatedPath;

/// Vector field handle: writes `field(t, u)` into `out`.
pub type VectorField = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// Scalar map `t -> phi(t)`, used for contraction moduli.
pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Two-argument map `(t, r) -> value`, used for radius-indexed families.
pub type FamilyMap = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Declared integrable majorant for the integrand role: either a fixed path
/// `M` with `|integral of f(., u) dg| <= integral of M dg` for every state,
/// or a family `M(., r)` nondecreasing in the radius `r` bounding states
/// with norm at most `r`.
#[derive(Clone)]
pub enum GrowthBound {
    Path(RegulatedPath),
    Family(FamilyMap),
}

/// Declared contraction modulus for the perturbation role: a continuous
/// nondecreasing `phi` with `phi(0) = 0` and `phi(t) < t` for positive `t`,
/// either fixed or indexed by a radius.
#[derive(Clone)]
pub enum ContractionModulus {
    Single(ScalarMap),
    Family(FamilyMap),
}

/// A nonlinearity `(t, u) -> R^n` with optional declared bound data.
#[derive(Clone)]
pub struct FieldSpec {
    dim: usize,
    base: VectorField,
    overrides: Vec<(f64, VectorField)>,
    bound: Option<GrowthBound>,
    modulus: Option<ContractionModulus>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("dim", &self.dim)
            .field("overrides", &self.overrides.len())
            .field("has_bound", &self.bound.is_some())
            .field("has_modulus", &self.modulus.is_some())
            .finish()
    }
}

impl FieldSpec {
    pub fn new(dim: usize, base: VectorField) -> Self {
        Self {
            dim,
            base,
            overrides: Vec::new(),
            bound: None,
            modulus: None,
        }
    }

    /// Scalar field from a plain closure `(t, u) -> value`.
    pub fn scalar(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(
            1,
            Arc::new(move |t, u: &[f64], out: &mut [f64]| out[0] = f(t, u[0])),
        )
    }

    /// The zero field of a given dimension.
    pub fn zero(dim: usize) -> Self {
        Self::new(dim, Arc::new(|_, _, out: &mut [f64]| out.fill(0.0)))
    }

    /// Replaces the field value at one isolated time. The base handle keeps
    /// defining the one-sided limits in time at that point.
    pub fn with_override(mut self, t: f64, handle: VectorField) -> Self {
        match self
            .overrides
            .binary_search_by(|(s, _)| s.partial_cmp(&t).unwrap())
        {
            Ok(i) => self.overrides[i] = (t, handle),
            Err(i) => self.overrides.insert(i, (t, handle)),
        }
        self
    }

    /// Scalar convenience for [`Self::with_override`].
    pub fn with_scalar_override(
        self,
        t: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.with_override(
            t,
            Arc::new(move |_, u: &[f64], out: &mut [f64]| out[0] = f(u[0])),
        )
    }

    pub fn with_bound_path(mut self, m: RegulatedPath) -> Self {
        self.bound = Some(GrowthBound::Path(m));
        self
    }

    pub fn with_bound_family(mut self, m: FamilyMap) -> Self {
        self.bound = Some(GrowthBound::Family(m));
        self
    }

    pub fn with_modulus(mut self, phi: ScalarMap) -> Self {
        self.modulus = Some(ContractionModulus::Single(phi));
        self
    }

    pub fn with_modulus_family(mut self, phi: FamilyMap) -> Self {
        self.modulus = Some(ContractionModulus::Family(phi));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self) -> Option<&GrowthBound> {
        self.bound.as_ref()
    }

    pub fn modulus(&self) -> Option<&ContractionModulus> {
        self.modulus.as_ref()
    }

    pub fn has_overrides(&self) -> bool {
        !self.overrides.is_empty()
    }

    pub fn override_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.overrides.iter().map(|(t, _)| *t)
    }

    fn check_result(&self, t: f64, u: &[f64], out: &[f64]) -> Result<()> {
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteField {
                t,
                state: u.to_vec(),
            });
        }
        Ok(())
    }

    /// Field value with overrides applied; errors on non-finite output.
    pub fn eval_into(&self, t: f64, u: &[f64], out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(u.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        match self
            .overrides
            .binary_search_by(|(s, _)| s.partial_cmp(&t).unwrap())
        {
            Ok(i) => (self.overrides[i].1)(t, u, out),
            Err(_) => (self.base)(t, u, out),
        }
        self.check_result(t, u, out)
    }

    /// Base handle only, ignoring overrides. This is the value that governs
    /// one-sided limits in time.
    pub fn eval_base_into(&self, t: f64, u: &[f64], out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(u.len(), self.dim);
        (self.base)(t, u, out);
        self.check_result(t, u, out)
    }

    pub fn eval(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, u, &mut out)?;
        Ok(out)
    }
}

/// Validation sample set for D-functions: zero plus a logarithmic grid of
/// 64 points per decade over `[1e-9, 1e9]`. A modulus that passes this
/// screen can still misbehave between samples; callers are told as much by
/// the reports that carry the sample count.
pub fn d_function_samples() -> Vec<f64> {
    let mut samples = Vec::with_capacity(18 * 64 + 2);
    samples.push(0.0);
    for j in 0..=(18 * 64) {
        samples.push(10f64.powf(-9.0 + j as f64 / 64.0));
    }
    samples
}

/// Checks the D-function properties of `phi` on the documented sample set:
/// `phi(0) = 0`, nonnegative, nondecreasing, and `phi(t) < t` for sampled
/// `t > 0`.
pub fn validate_d_function(phi: &dyn Fn(f64) -> f64, label: &str) -> Result<usize> {
    let samples = d_function_samples();
    let at_zero = phi(0.0);
    if !(at_zero.abs() <= 1e-15) {
        return Err(Error::InvalidModulus(format!(
            "{label}: phi(0) = {at_zero}, expected 0"
        )));
    }
    let mut prev = at_zero;
    for &t in &samples[1..] {
        let v = phi(t);
        if !v.is_finite() {
            return Err(Error::InvalidModulus(format!(
                "{label}: phi({t}) is not finite"
            )));
        }
        if v < 0.0 {
            return Err(Error::InvalidModulus(format!(
                "{label}: phi({t}) = {v} is negative"
            )));
        }
        if v >= t {
            return Err(Error::InvalidModulus(format!(
                "{label}: phi({t}) = {v} does not satisfy phi(t) < t"
            )));
        }
        if v < prev - 1e-12 * prev.abs().max(1.0) {
            return Err(Error::InvalidModulus(format!(
                "{label}: phi decreases near t = {t}"
            )));
        }
        prev = v;
    }
    Ok(samples.len())
}

/// Spot-checks that a family `M(s, r)` is nondecreasing in `r` at the given
/// time samples and radius pairs.
pub fn validate_family_monotone(
    m: &dyn Fn(f64, f64) -> f64,
    time_samples: &[f64],
    radii: &[f64],
) -> Result<()> {
    for &s in time_samples {
        for w in radii.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (a, b) = (m(s, lo), m(s, hi));
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidBound(format!(
                    "family bound not finite at s = {s}"
                )));
            }
            if b < a - 1e-12 * a.abs().max(1.0) {
                return Err(Error::InvalidBound(format!(
                    "family bound decreases in the radius at s = {s}: M(s, {lo}) = {a} > M(s, {hi}) = {b}"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_eval_and_override() {
        let f = FieldSpec::scalar(|t, u| t + u).with_scalar_override(0.5, |u| 10.0 * u);
        assert_eq!(f.eval(0.25, &[1.0]).unwrap(), vec![1.25]);
        assert_eq!(f.eval(0.5, &[2.0]).unwrap(), vec![20.0]);
        // The base handle still defines the one-sided values at the override time.
        let mut out = [0.0];
        f.eval_base_into(0.5, &[2.0], &mut out).unwrap();
        assert_eq!(out[0], 2.5);
    }

    #[test]
    fn non_finite_is_reported_with_location() {
        let f = FieldSpec::scalar(|_, u| 1.0 / u);
        match f.eval(0.3, &[0.0]) {
            Err(Error::NonFiniteField { t, state }) => {
                assert_eq!(t, 0.3);
                assert_eq!(state, vec![0.0]);
            }
            other => panic!("expected NonFiniteField, got {other:?}"),
        }
    }

    #[test]
    fn log_contraction_is_a_d_function() {
        let n = validate_d_function(&|t: f64| 0.5 * (1.0 + t).ln(), "test").unwrap();
        assert!(n > 1000);
        validate_d_function(&|t: f64| 0.5 * t, "half").unwrap();
    }

    #[test]
    fn identity_is_rejected() {
        assert!(validate_d_function(&|t: f64| t, "identity").is_err());
    }

    #[test]
    fn decreasing_and_offset_rejected() {
        assert!(validate_d_function(&|t: f64| 0.5 * t + 0.1, "offset").is_err());
        assert!(validate_d_function(&|t: f64| 0.5 * (2.0 - t).abs(), "vee").is_err());
    }

    #[test]
    fn family_monotonicity() {
        validate_family_monotone(&|_, r| r, &[0.0, 0.5, 1.0], &[0.5, 1.0, 2.0]).unwrap();
        assert!(
            validate_family_monotone(&|_, r| -r, &[0.0, 1.0], &[0.5, 1.0]).is_err()
        );
    }
}

//! Built-in radial profiles for initial data, potentials and sources.
//!
//! Every profile knows its own first and second radial derivative in closed
//! form, so the solver never differentiates numerically. The registry covers
//! the model power-law shapes A/⟨r⟩^d plus Gaussian and compactly supported
//! bumps for the cut-off experiments.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{powr, Real};
use crate::weights::bracket;

#[derive(Clone)]
pub enum RadialProfile<R> {
    Zero,
    /// A/⟨r⟩^d
    Model { amplitude: R, decay: R },
    /// A·exp(−((r−center)/width)²)
    GaussianBump { amplitude: R, center: R, width: R },
    /// A·exp(1 − 1/(1−s²)) with s = (r−center)/width, zero outside |s| < 1
    CompactBump { amplitude: R, center: R, width: R },
    /// Values only; derivatives unavailable. Used for derived data such as
    /// Δf − Vf.
    Custom {
        name: String,
        value: Arc<dyn Fn(R) -> R + Send + Sync>,
        kinks: Vec<R>,
    },
}

impl<R: Real> std::fmt::Debug for RadialProfile<R> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Model { amplitude, decay } => {
                write!(f, "Model {{ amplitude: {amplitude}, decay: {decay} }}")
            }
            Self::GaussianBump {
                amplitude,
                center,
                width,
            } => write!(f, "GaussianBump {{ A: {amplitude}, c: {center}, w: {width} }}"),
            Self::CompactBump {
                amplitude,
                center,
                width,
            } => write!(f, "CompactBump {{ A: {amplitude}, c: {center}, w: {width} }}"),
            Self::Custom { name, .. } => write!(f, "Custom {{ {name} }}"),
        }
    }
}

impl<R: Real> RadialProfile<R> {
    pub fn value(&self, r: R) -> R {
        match self {
            Self::Zero => R::zero(),
            Self::Model { amplitude, decay } => *amplitude / powr(bracket(r), *decay),
            Self::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let s = (r - *center) / *width;
                *amplitude * (-s * s).exp()
            }
            Self::CompactBump {
                amplitude,
                center,
                width,
            } => {
                let s = (r - *center) / *width;
                if s.abs() < R::one() {
                    *amplitude * (R::one() - (R::one() - s * s).recip()).exp()
                } else {
                    R::zero()
                }
            }
            Self::Custom { value, .. } => value(r),
        }
    }

    /// d/dr of the profile; `Err` for value-only profiles.
    pub fn derivative(&self, r: R) -> Result<R> {
        match self {
            Self::Zero => Ok(R::zero()),
            Self::Model { amplitude, decay } => {
                Ok(-*decay * *amplitude / powr(bracket(r), *decay + R::one()))
            }
            Self::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let s = (r - *center) / *width;
                Ok(*amplitude * (-s * s).exp() * (-R::of(2.0)) * s / *width)
            }
            Self::CompactBump {
                amplitude,
                center,
                width,
            } => {
                let s = (r - *center) / *width;
                if s.abs() < R::one() {
                    let g = R::one() - s * s;
                    let v = *amplitude * (R::one() - g.recip()).exp();
                    Ok(v * (-R::of(2.0)) * s / (g * g) / *width)
                } else {
                    Ok(R::zero())
                }
            }
            Self::Custom { name, .. } => Err(Error::MissingDerivative {
                profile: name.clone(),
            }),
        }
    }

    /// d²/dr² of the profile; `Err` for value-only profiles.
    pub fn second_derivative(&self, r: R) -> Result<R> {
        match self {
            Self::Zero => Ok(R::zero()),
            Self::Model { amplitude, decay } => {
                let d = *decay;
                Ok(d * (d + R::one()) * *amplitude / powr(bracket(r), d + R::of(2.0)))
            }
            Self::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let w = *width;
                let s = (r - *center) / w;
                Ok(*amplitude * (-s * s).exp() * (R::of(4.0) * s * s - R::of(2.0)) / (w * w))
            }
            Self::CompactBump {
                amplitude,
                center,
                width,
            } => {
                let w = *width;
                let s = (r - *center) / w;
                if s.abs() < R::one() {
                    let g = R::one() - s * s;
                    let v = *amplitude * (R::one() - g.recip()).exp();
                    // v' = v·h with h = -2s/g²; then v'' = v (h² + h') and
                    // h' = -(2g + 8s²)/g³
                    let h = -R::of(2.0) * s / (g * g);
                    let hp = -(R::of(2.0) * g + R::of(8.0) * s * s) / (g * g * g);
                    Ok(v * (h * h + hp) / (w * w))
                } else {
                    Ok(R::zero())
                }
            }
            Self::Custom { name, .. } => Err(Error::MissingDerivative {
                profile: name.clone(),
            }),
        }
    }

    /// 3D Laplacian of the radial function: f'' + 2 f'/r, with the r → 0
    /// limit 3 f''(0).
    pub fn laplacian(&self, r: R) -> Result<R> {
        let fpp = self.second_derivative(r)?;
        if r < R::of(1e-12) {
            return Ok(R::of(3.0) * fpp);
        }
        Ok(fpp + R::of(2.0) * self.derivative(r)? / r)
    }

    /// Radii where the profile or its derivatives are non-smooth; quadrature
    /// breakpoints.
    pub fn kinks(&self) -> Vec<R> {
        match self {
            Self::CompactBump { center, width, .. } => {
                let lo = *center - *width;
                let hi = *center + *width;
                if lo > R::zero() {
                    vec![lo, hi]
                } else {
                    vec![hi]
                }
            }
            Self::Custom { kinks, .. } => kinks.clone(),
            _ => Vec::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// Largest radius with non-negligible support, if the profile is
    /// (numerically) compactly supported.
    pub fn support_radius(&self) -> Option<R> {
        match self {
            Self::Zero => Some(R::zero()),
            Self::CompactBump { center, width, .. } => Some(*center + *width),
            // exp(-s^2) < 1e-300 beyond ~27 widths
            Self::GaussianBump { center, width, .. } => Some(*center + R::of(27.0) * *width),
            _ => None,
        }
    }
}

/// Sup of g(r)·|profile(r)| over a dense sampling grid; used to validate or
/// fit decay amplitudes. Samples log-spaced radii in [1e−3, 1e6] plus r = 0
/// and the profile's kinks.
pub fn sampled_sup<R: Real>(profile: &RadialProfile<R>, weight_fn: impl Fn(R) -> R) -> R {
    let mut sup = weight_fn(R::zero()) * profile.value(R::zero()).abs();
    let n = 2000;
    let lo = R::of(1e-3).ln();
    let hi = R::of(1e6).ln();
    for i in 0..=n {
        let r = (lo + (hi - lo) * R::of(i as f64 / n as f64)).exp();
        sup = sup.max(weight_fn(r) * profile.value(r).abs());
    }
    for r in profile.kinks() {
        sup = sup.max(weight_fn(r) * profile.value(r).abs());
    }
    sup
}

/// Named profile spec as it appears in config files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileSpec {
    Zero,
    Model { amplitude: f64, decay: f64 },
    GaussianBump { amplitude: f64, center: f64, width: f64 },
    CompactBump { amplitude: f64, center: f64, width: f64 },
}

impl ProfileSpec {
    pub fn build<R: Real>(&self) -> RadialProfile<R> {
        match *self {
            ProfileSpec::Zero => RadialProfile::Zero,
            ProfileSpec::Model { amplitude, decay } => RadialProfile::Model {
                amplitude: R::of(amplitude),
                decay: R::of(decay),
            },
            ProfileSpec::GaussianBump {
                amplitude,
                center,
                width,
            } => RadialProfile::GaussianBump {
                amplitude: R::of(amplitude),
                center: R::of(center),
                width: R::of(width),
            },
            ProfileSpec::CompactBump {
                amplitude,
                center,
                width,
            } => RadialProfile::CompactBump {
                amplitude: R::of(amplitude),
                center: R::of(center),
                width: R::of(width),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn check_derivatives(p: &RadialProfile<f64>, r: f64) {
        let h = 1e-5;
        let fd1 = (p.value(r + h) - p.value(r - h)) / (2.0 * h);
        let fd2 = (p.value(r + h) - 2.0 * p.value(r) + p.value(r - h)) / (h * h);
        assert_relative_eq!(p.derivative(r).unwrap(), fd1, max_relative = 1e-6, epsilon = 1e-8);
        assert_relative_eq!(
            p.second_derivative(r).unwrap(),
            fd2,
            max_relative = 1e-4,
            epsilon = 1e-5
        );
    }

    #[test]
    fn model_profile_derivatives() {
        let p = RadialProfile::Model {
            amplitude: 1.0,
            decay: 3.0,
        };
        for r in [0.1, 0.5, 1.0, 4.0, 20.0] {
            check_derivatives(&p, r);
        }
        assert_eq!(p.value(0.0), 1.0);
        assert_eq!(p.derivative(0.0).unwrap(), -3.0);
    }

    #[test]
    fn gaussian_profile_derivatives() {
        let p = RadialProfile::GaussianBump {
            amplitude: 2.0,
            center: 2.0,
            width: 1.5,
        };
        for r in [0.3, 1.0, 2.0, 3.7] {
            check_derivatives(&p, r);
        }
    }

    #[test]
    fn compact_bump_support_and_derivatives() {
        let p = RadialProfile::CompactBump {
            amplitude: 1.0,
            center: 2.0,
            width: 1.5,
        };
        assert_eq!(p.value(0.4), 0.0);
        assert_eq!(p.value(3.6), 0.0);
        assert_eq!(p.value(2.0), 1.0);
        for r in [1.0, 1.8, 2.5, 3.2] {
            check_derivatives(&p, r);
        }
        assert_eq!(p.kinks(), vec![0.5, 3.5]);
        assert_eq!(p.support_radius(), Some(3.5));
    }

    #[test]
    fn model_laplacian_matches_formula() {
        // f = (1+r)^-3: laplacian = 12 (1+r)^-5 - 6 (1+r)^-4 / r
        let p = RadialProfile::Model {
            amplitude: 1.0,
            decay: 3.0,
        };
        let r = 2.0_f64;
        let expect = 12.0 / 3.0_f64.powi(5) - 6.0 / 3.0_f64.powi(4) / r;
        assert_relative_eq!(p.laplacian(r).unwrap(), expect, max_relative = 1e-14);
    }

    #[test]
    fn custom_profile_has_no_derivative() {
        let p = RadialProfile::Custom {
            name: "derived".into(),
            value: Arc::new(|r: f64| r),
            kinks: vec![],
        };
        assert!(p.derivative(1.0).is_err());
        assert_eq!(p.value(2.0), 2.0);
    }

    #[test]
    fn sampled_sup_model_is_amplitude() {
        // <r>^3 * |A/<r>^3| = A for all r
        let p = RadialProfile::Model {
            amplitude: 0.7,
            decay: 3.0,
        };
        let sup = sampled_sup(&p, |r: f64| bracket(r).powi(3));
        assert_relative_eq!(sup, 0.7, max_relative = 1e-12);
    }
}

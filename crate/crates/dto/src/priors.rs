//! Per-person Gaussian height priors from demographic labels.
//!
//! Minors get fixed tabulated priors per age group. Adults get a hybrid
//! prior: the initial height estimate averaged with the gender demographic
//! mean, keeping the demographic variance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sanity bounds on a plausible human-height prior mean, in meters.
pub const MIN_PRIOR_MEAN_M: f64 = 0.3;
pub const MAX_PRIOR_MEAN_M: f64 = 2.5;

/// Tabulated minor priors (meters), moment-matched from CDC growth data.
pub const BABY_PRIOR: (f64, f64) = (0.801, 0.126);
pub const KID_PRIOR: (f64, f64) = (1.122, 0.120);
pub const TEEN_PRIOR: (f64, f64) = (1.477, 0.156);

/// Adult demographic height statistics (meters).
pub const ADULT_MALE: (f64, f64) = (1.784, 0.076);
pub const ADULT_FEMALE: (f64, f64) = (1.647, 0.071);

#[derive(Debug, Error, PartialEq)]
pub enum PriorError {
    #[error("minor_prior is only defined for Baby/Kid/Teen; use adult_prior for adults")]
    NotMinor,
    #[error("initial height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("mixture must be nonempty")]
    EmptyMixture,
    #[error("mixture weights must be positive and sum to 1 (sum = {0})")]
    InvalidWeights(f64),
    #[error("component std_dev must be positive and finite, got {0}")]
    InvalidComponent(f64),
    #[error("moment-matched variance is not positive ({0})")]
    NonPositiveVariance(f64),
    #[error(
        "prior mean {0} m outside plausible human range [{MIN_PRIOR_MEAN_M}, {MAX_PRIOR_MEAN_M}]"
    )]
    ImplausibleMean(f64),
}

/// Age group of a detected person.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeGroup {
    /// 0-3 years.
    Baby,
    /// 3-8 years.
    Kid,
    /// 8-15 years.
    Teen,
    /// 15 years and older.
    Adult,
}

impl AgeGroup {
    pub fn is_minor(self) -> bool {
        !matches!(self, AgeGroup::Adult)
    }

    pub const ALL: [AgeGroup; 4] = [
        AgeGroup::Baby,
        AgeGroup::Kid,
        AgeGroup::Teen,
        AgeGroup::Adult,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::Baby => "baby",
            AgeGroup::Kid => "kid",
            AgeGroup::Teen => "teen",
            AgeGroup::Adult => "adult",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    /// Classifier abstained; adults fall back to a 50/50 mixture of the
    /// male and female demographics.
    #[default]
    Unknown,
}

/// Gaussian prior over standing height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightPrior {
    /// Mean in meters.
    pub mean: f64,
    /// Standard deviation in meters.
    pub std_dev: f64,
}

impl HeightPrior {
    pub fn new(mean: f64, std_dev: f64) -> Result<Self, PriorError> {
        if !std_dev.is_finite() || std_dev <= 0.0 {
            return Err(PriorError::InvalidComponent(std_dev));
        }
        if !mean.is_finite() || !(MIN_PRIOR_MEAN_M..=MAX_PRIOR_MEAN_M).contains(&mean) {
            return Err(PriorError::ImplausibleMean(mean));
        }
        Ok(Self { mean, std_dev })
    }
}

/// One component of a Gaussian mixture over heights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    #[serde(rename = "mean_m")]
    pub mean: f64,
    #[serde(rename = "std_m")]
    pub std_dev: f64,
    pub weight: f64,
}

/// Fixed tabulated prior for a minor age group.
pub fn minor_prior(group: AgeGroup) -> Result<HeightPrior, PriorError> {
    let (mean, std_dev) = match group {
        AgeGroup::Baby => BABY_PRIOR,
        AgeGroup::Kid => KID_PRIOR,
        AgeGroup::Teen => TEEN_PRIOR,
        AgeGroup::Adult => return Err(PriorError::NotMinor),
    };
    Ok(HeightPrior { mean, std_dev })
}

/// Demographic Gaussian for an adult of the given gender.
///
/// `Unknown` is the moment-matched 50/50 mixture of the two demographics.
pub fn adult_demographic(gender: Gender) -> HeightPrior {
    match gender {
        Gender::Male => HeightPrior {
            mean: ADULT_MALE.0,
            std_dev: ADULT_MALE.1,
        },
        Gender::Female => HeightPrior {
            mean: ADULT_FEMALE.0,
            std_dev: ADULT_FEMALE.1,
        },
        Gender::Unknown => {
            let components = [
                GaussianComponent {
                    mean: ADULT_MALE.0,
                    std_dev: ADULT_MALE.1,
                    weight: 0.5,
                },
                GaussianComponent {
                    mean: ADULT_FEMALE.0,
                    std_dev: ADULT_FEMALE.1,
                    weight: 0.5,
                },
            ];
            fit_single_gaussian(&components).expect("tabulated 50/50 mixture is valid")
        }
    }
}

/// Hybrid adult prior: mean is the average of the initial height estimate
/// and the demographic mean; variance stays demographic.
pub fn adult_prior(initial_height: f64, gender: Gender) -> Result<HeightPrior, PriorError> {
    if !initial_height.is_finite() || initial_height <= 0.0 {
        return Err(PriorError::NonPositiveHeight(initial_height));
    }
    let demo = adult_demographic(gender);
    Ok(HeightPrior {
        mean: (initial_height + demo.mean) / 2.0,
        std_dev: demo.std_dev,
    })
}

/// Collapse a Gaussian mixture to a single Gaussian by exact moment
/// matching: mean = Σwμ, variance = Σw(σ² + μ²) − mean².
pub fn fit_single_gaussian(components: &[GaussianComponent]) -> Result<HeightPrior, PriorError> {
    if components.is_empty() {
        return Err(PriorError::EmptyMixture);
    }
    let mut weight_sum = 0.0;
    for c in components {
        if !c.std_dev.is_finite() || c.std_dev <= 0.0 {
            return Err(PriorError::InvalidComponent(c.std_dev));
        }
        if !c.weight.is_finite() || c.weight <= 0.0 {
            return Err(PriorError::InvalidWeights(c.weight));
        }
        weight_sum += c.weight;
    }
    if (weight_sum - 1.0).abs() > 1e-9 {
        return Err(PriorError::InvalidWeights(weight_sum));
    }
    let mean: f64 = components.iter().map(|c| c.weight * c.mean).sum();
    let second: f64 = components
        .iter()
        .map(|c| c.weight * (c.std_dev * c.std_dev + c.mean * c.mean))
        .sum();
    let variance = second - mean * mean;
    if variance <= 0.0 {
        return Err(PriorError::NonPositiveVariance(variance));
    }
    HeightPrior::new(mean, variance.sqrt())
}

/// Log-density of `N(mean, std_dev²)` at `x`.
pub fn gaussian_log_pdf(x: f64, prior: &HeightPrior) -> f64 {
    let z = (x - prior.mean) / prior.std_dev;
    -0.5 * z * z - (prior.std_dev * (2.0 * std::f64::consts::PI).sqrt()).ln()
}

/// Resolved per-group priors used when turning demographic labels into
/// `HeightPrior`s. Defaults to the tabulated values; any group can be
/// replaced from a user-supplied component table.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTable {
    pub baby: HeightPrior,
    pub kid: HeightPrior,
    pub teen: HeightPrior,
    pub adult_male: HeightPrior,
    pub adult_female: HeightPrior,
}

impl Default for PriorTable {
    fn default() -> Self {
        Self {
            baby: HeightPrior {
                mean: BABY_PRIOR.0,
                std_dev: BABY_PRIOR.1,
            },
            kid: HeightPrior {
                mean: KID_PRIOR.0,
                std_dev: KID_PRIOR.1,
            },
            teen: HeightPrior {
                mean: TEEN_PRIOR.0,
                std_dev: TEEN_PRIOR.1,
            },
            adult_male: HeightPrior {
                mean: ADULT_MALE.0,
                std_dev: ADULT_MALE.1,
            },
            adult_female: HeightPrior {
                mean: ADULT_FEMALE.0,
                std_dev: ADULT_FEMALE.1,
            },
        }
    }
}

impl PriorTable {
    /// Demographic Gaussian for an adult under this table.
    pub fn adult_demographic(&self, gender: Gender) -> Result<HeightPrior, PriorError> {
        match gender {
            Gender::Male => Ok(self.adult_male),
            Gender::Female => Ok(self.adult_female),
            Gender::Unknown => fit_single_gaussian(&[
                GaussianComponent {
                    mean: self.adult_male.mean,
                    std_dev: self.adult_male.std_dev,
                    weight: 0.5,
                },
                GaussianComponent {
                    mean: self.adult_female.mean,
                    std_dev: self.adult_female.std_dev,
                    weight: 0.5,
                },
            ]),
        }
    }

    /// Prior for a person given demographics and the initial height estimate.
    pub fn person_prior(
        &self,
        group: AgeGroup,
        gender: Gender,
        initial_height: f64,
    ) -> Result<HeightPrior, PriorError> {
        match group {
            AgeGroup::Baby => Ok(self.baby),
            AgeGroup::Kid => Ok(self.kid),
            AgeGroup::Teen => Ok(self.teen),
            AgeGroup::Adult => {
                if !initial_height.is_finite() || initial_height <= 0.0 {
                    return Err(PriorError::NonPositiveHeight(initial_height));
                }
                let demo = self.adult_demographic(gender)?;
                Ok(HeightPrior {
                    mean: (initial_height + demo.mean) / 2.0,
                    std_dev: demo.std_dev,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minor_priors_match_tabulated_values() {
        let baby = minor_prior(AgeGroup::Baby).unwrap();
        assert_eq!((baby.mean, baby.std_dev), (0.801, 0.126));
        let kid = minor_prior(AgeGroup::Kid).unwrap();
        assert_eq!((kid.mean, kid.std_dev), (1.122, 0.120));
        let teen = minor_prior(AgeGroup::Teen).unwrap();
        assert_eq!((teen.mean, teen.std_dev), (1.477, 0.156));
        assert_eq!(minor_prior(AgeGroup::Adult), Err(PriorError::NotMinor));
    }

    #[test]
    fn adult_prior_examples() {
        let p = adult_prior(1.784, Gender::Male).unwrap();
        assert_eq!((p.mean, p.std_dev), (1.784, 0.076));

        let p = adult_prior(1.60, Gender::Female).unwrap();
        assert!((p.mean - 1.6235).abs() < 1e-12);
        assert_eq!(p.std_dev, 0.071);

        let p = adult_prior(1.90, Gender::Male).unwrap();
        assert!((p.mean - 1.842).abs() < 1e-12);

        assert!(adult_prior(0.0, Gender::Male).is_err());
        assert!(adult_prior(-1.7, Gender::Female).is_err());
    }

    #[test]
    fn adult_unknown_gender_uses_mixture_demographics() {
        // Moment match of 0.5 N(1.784, 0.076^2) + 0.5 N(1.647, 0.071^2);
        // frozen from a 50-digit evaluation.
        let demo = adult_demographic(Gender::Unknown);
        assert!((demo.mean - 1.7155).abs() < 1e-12);
        assert!((demo.std_dev - 0.10050248753140392).abs() < 1e-12);

        let p = adult_prior(1.7155, Gender::Unknown).unwrap();
        assert!((p.mean - 1.7155).abs() < 1e-12);
    }

    #[test]
    fn fit_single_gaussian_identity_and_symmetric_pair() {
        let one = [GaussianComponent {
            mean: 1.0,
            std_dev: 0.1,
            weight: 1.0,
        }];
        let g = fit_single_gaussian(&one).unwrap();
        assert!((g.mean - 1.0).abs() < 1e-15);
        assert!((g.std_dev - 0.1).abs() < 1e-12);

        let two = [
            GaussianComponent {
                mean: 1.0,
                std_dev: 0.1,
                weight: 0.5,
            },
            GaussianComponent {
                mean: 1.2,
                std_dev: 0.1,
                weight: 0.5,
            },
        ];
        let g = fit_single_gaussian(&two).unwrap();
        assert!((g.mean - 1.1).abs() < 1e-12);
        assert!((g.std_dev - 0.1414213562373095).abs() < 1e-12);
    }

    /// Quadrature oracle: integrate the mixture pdf's first two moments
    /// with Simpson's rule and compare against the closed-form match.
    #[test]
    fn fit_single_gaussian_matches_quadrature_on_cdc_style_mixture() {
        // Nine infant stature components, equal weights.
        let means = [
            0.499, 0.611, 0.672, 0.719, 0.757, 0.821, 0.871, 0.914, 0.952,
        ];
        let stds = [
            0.023, 0.026, 0.027, 0.028, 0.029, 0.031, 0.033, 0.035, 0.037,
        ];
        let components: Vec<GaussianComponent> = means
            .iter()
            .zip(&stds)
            .map(|(&m, &s)| GaussianComponent {
                mean: m,
                std_dev: s,
                weight: 1.0 / 9.0,
            })
            .collect();

        let pdf = |x: f64| -> f64 {
            components
                .iter()
                .map(|c| {
                    let z = (x - c.mean) / c.std_dev;
                    c.weight * (-0.5 * z * z).exp()
                        / (c.std_dev * (2.0 * std::f64::consts::PI).sqrt())
                })
                .sum()
        };
        // Simpson over [-1, 3] with 80k intervals; mixture mass outside is ~0.
        let (a, b, n) = (-1.0f64, 3.0f64, 80_000usize);
        let h = (b - a) / n as f64;
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for i in 0..=n {
            let x = a + h * i as f64;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let p = w * pdf(x);
            m0 += p;
            m1 += p * x;
            m2 += p * x * x;
        }
        m0 *= h / 3.0;
        m1 *= h / 3.0;
        m2 *= h / 3.0;
        assert!((m0 - 1.0).abs() < 1e-9, "mixture mass {m0}");
        let quad_mean = m1 / m0;
        let quad_var = m2 / m0 - quad_mean * quad_mean;

        let fitted = fit_single_gaussian(&components).unwrap();
        assert!((fitted.mean - quad_mean).abs() / quad_mean.abs() < 1e-6);
        assert!((fitted.std_dev.powi(2) - quad_var).abs() / quad_var < 1e-6);
    }

    #[test]
    fn fit_single_gaussian_rejects_bad_weights() {
        assert_eq!(fit_single_gaussian(&[]), Err(PriorError::EmptyMixture));
        let bad = [GaussianComponent {
            mean: 1.0,
            std_dev: 0.1,
            weight: 0.7,
        }];
        assert!(matches!(
            fit_single_gaussian(&bad),
            Err(PriorError::InvalidWeights(_))
        ));
        let neg = [
            GaussianComponent {
                mean: 1.0,
                std_dev: 0.1,
                weight: 1.5,
            },
            GaussianComponent {
                mean: 1.1,
                std_dev: 0.1,
                weight: -0.5,
            },
        ];
        assert!(matches!(
            fit_single_gaussian(&neg),
            Err(PriorError::InvalidWeights(_))
        ));
        let zero_sigma = [GaussianComponent {
            mean: 1.0,
            std_dev: 0.0,
            weight: 1.0,
        }];
        assert!(matches!(
            fit_single_gaussian(&zero_sigma),
            Err(PriorError::InvalidComponent(_))
        ));
    }

    #[test]
    fn log_pdf_peak_and_one_sigma() {
        let prior = HeightPrior {
            mean: 1.7,
            std_dev: 0.1,
        };
        let peak = gaussian_log_pdf(1.7, &prior);
        // -ln(0.1 sqrt(2 pi)), frozen from a high-precision evaluation
        assert!((peak - 1.383646559789373).abs() < 1e-12);
        assert!((gaussian_log_pdf(1.8, &prior) - (peak - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn tabulated_priors_satisfy_sanity_bounds() {
        for p in [
            minor_prior(AgeGroup::Baby).unwrap(),
            minor_prior(AgeGroup::Kid).unwrap(),
            minor_prior(AgeGroup::Teen).unwrap(),
            adult_demographic(Gender::Male),
            adult_demographic(Gender::Female),
            adult_demographic(Gender::Unknown),
        ] {
            assert!(p.std_dev > 0.0);
            assert!((MIN_PRIOR_MEAN_M..=MAX_PRIOR_MEAN_M).contains(&p.mean));
        }
    }

    proptest! {
        #[test]
        fn log_pdf_is_symmetric(delta in 0.0f64..2.0) {
            let prior = HeightPrior { mean: 1.5, std_dev: 0.2 };
            let lo = gaussian_log_pdf(1.5 - delta, &prior);
            let hi = gaussian_log_pdf(1.5 + delta, &prior);
            prop_assert!((lo - hi).abs() < 1e-9);
        }

        #[test]
        fn adult_prior_fixed_point(h in 0.5f64..2.4) {
            // averaging the demographic mean with itself is the identity
            for gender in [Gender::Male, Gender::Female, Gender::Unknown] {
                let demo = adult_demographic(gender);
                let p = adult_prior(demo.mean, gender).unwrap();
                prop_assert_eq!(p.mean, demo.mean);
                prop_assert_eq!(p.std_dev, demo.std_dev);
            }
            // and the general hybrid mean is the midpoint
            let p = adult_prior(h, Gender::Male).unwrap();
            prop_assert!((p.mean - (h + 1.784) / 2.0).abs() < 1e-15);
        }
    }
}

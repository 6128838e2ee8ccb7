//! Simulation designs for the Monte Carlo experiments.
//!
//! Each individual's series is drawn from its own stream keyed by
//! `(seed, i)`, started at zero and run through a burn-in before the
//! retained periods `0..=T`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::panel::{LagSpec, PanelDataset};
use crate::rng::{domain, stream, StreamRng};

pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `y = c + phi y_{-1} + u`.
    Ar1 { phi: f64 },
    /// `y = c + phi1 y_{-1} + phi2 y_{-2} + u`.
    Ar2 { phi1: f64, phi2: f64 },
    /// AR(2) plus `rho1 x + rho2 x_{-1}` with `x ~ N(0, 1)`.
    Ar2x {
        phi1: f64,
        phi2: f64,
        rho1: f64,
        rho2: f64,
    },
    /// `y = c y_{-1} + u`, the coefficient drawn per individual.
    RandomCoefAr1,
    /// `y = c + rho1 (y_{-1} - c) + rho2 exp(-(y_{-1} - c)^2) + u`.
    ExpAr { rho1: f64, rho2: f64 },
}

/// Distribution of the individual effect (the coefficient for `RandomCoefAr1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectDist {
    Uniform { lo: f64, hi: f64 },
}

impl EffectDist {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EffectDist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnovationDist {
    /// Student t, drawn as `Z / sqrt(chi2_df / df)`.
    StudentT {
        df: f64,
    },
    Normal,
}

impl InnovationDist {
    pub fn variance(&self) -> f64 {
        match *self {
            InnovationDist::StudentT { df } if df > 2.0 => df / (df - 2.0),
            InnovationDist::StudentT { .. } => f64::INFINITY,
            InnovationDist::Normal => 1.0,
        }
    }
}

/// Draws innovations; the chi-square sampler is built once.
#[derive(Debug, Clone)]
enum InnovationSampler {
    StudentT { df: f64, chi: ChiSquared<f64> },
    Normal,
}

impl InnovationSampler {
    fn new(dist: InnovationDist) -> Result<Self> {
        match dist {
            InnovationDist::StudentT { df } => Ok(InnovationSampler::StudentT {
                df,
                chi: ChiSquared::new(df)
                    .map_err(|e| Error::InvalidArgument(format!("t innovations: {e}")))?,
            }),
            InnovationDist::Normal => Ok(InnovationSampler::Normal),
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InnovationSampler::StudentT { df, chi } => {
                let z: f64 = StandardNormal.sample(rng);
                let v = chi.sample(rng);
                z / (v / df).sqrt()
            }
            InnovationSampler::Normal => StandardNormal.sample(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    pub variant: Variant,
    pub c_dist: EffectDist,
    pub err_dist: InnovationDist,
    pub burn_in: usize,
}

const CENTERED_EFFECT: EffectDist = EffectDist::Uniform { lo: -0.5, hi: 0.5 };
const T10: InnovationDist = InnovationDist::StudentT { df: 10.0 };

impl DgpSpec {
    pub fn ar1(phi: f64) -> Self {
        Self::with(Variant::Ar1 { phi }, CENTERED_EFFECT, T10)
    }

    pub fn ar2(phi1: f64, phi2: f64) -> Self {
        Self::with(Variant::Ar2 { phi1, phi2 }, CENTERED_EFFECT, T10)
    }

    pub fn ar2x(phi1: f64, phi2: f64, rho1: f64, rho2: f64) -> Self {
        Self::with(
            Variant::Ar2x {
                phi1,
                phi2,
                rho1,
                rho2,
            },
            CENTERED_EFFECT,
            T10,
        )
    }

    /// Random-coefficient AR(1) with coefficients `U(lo, hi)` and normal innovations.
    pub fn random_coef_ar1(lo: f64, hi: f64) -> Self {
        Self::with(
            Variant::RandomCoefAr1,
            EffectDist::Uniform { lo, hi },
            InnovationDist::Normal,
        )
    }

    pub fn expar(rho1: f64, rho2: f64) -> Self {
        Self::with(
            Variant::ExpAr { rho1, rho2 },
            CENTERED_EFFECT,
            InnovationDist::Normal,
        )
    }

    fn with(variant: Variant, c_dist: EffectDist, err_dist: InnovationDist) -> Self {
        Self {
            variant,
            c_dist,
            err_dist,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_innovations(mut self, err_dist: InnovationDist) -> Self {
        self.err_dist = err_dist;
        self
    }

    /// Number of exogenous series carried alongside `y`.
    pub fn exogenous_count(&self) -> usize {
        match self.variant {
            Variant::Ar2x { .. } => 1,
            _ => 0,
        }
    }

    /// The (possibly misspecified) design fitted to this DGP in the experiments.
    pub fn default_fit(&self) -> LagSpec {
        match self.variant {
            Variant::Ar2x { .. } => LagSpec {
                outcome_lags: vec![1],
                regressor_lags: vec![(0, 1)],
            },
            _ => LagSpec::ar1(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::NonStationarySpec(msg));
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        let ar2_ok = |p1: f64, p2: f64| p1 + p2 < 1.0 && p2 - p1 < 1.0 && p2.abs() < 1.0;
        match self.variant {
            Variant::Ar1 { phi } if !(phi.abs() < 1.0) => {
                return bad(format!("AR(1) requires |phi| < 1, got {phi}"))
            }
            Variant::Ar2 { phi1, phi2 } | Variant::Ar2x { phi1, phi2, .. }
                if !ar2_ok(phi1, phi2) =>
            {
                return bad(format!(
                    "AR(2) coefficients ({phi1}, {phi2}) outside the stationarity triangle"
                ))
            }
            Variant::Ar2x { rho1, rho2, .. } if !finite(&[rho1, rho2]) => {
                return bad("exogenous coefficients must be finite".into())
            }
            Variant::ExpAr { rho1, rho2 } if !(rho1.abs() < 1.0) || !rho2.is_finite() => {
                return bad(format!(
                    "EXPAR requires |rho1| < 1 and finite rho2, got ({rho1}, {rho2})"
                ))
            }
            _ => {}
        }
        let EffectDist::Uniform { lo, hi } = self.c_dist;
        if !finite(&[lo, hi]) || lo > hi {
            return bad(format!("invalid uniform range ({lo}, {hi})"));
        }
        if self.variant == Variant::RandomCoefAr1 && !(lo > -1.0 && hi < 1.0) {
            return bad(format!(
                "random coefficients must lie in (-1, 1), got U({lo}, {hi})"
            ));
        }
        if let InnovationDist::StudentT { df } = self.err_dist {
            if !(df > 0.0 && df.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "t degrees of freedom must be positive, got {df}"
                )));
            }
        }
        Ok(())
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for DgpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let default = match self.variant {
            Variant::Ar1 { phi } => {
                write!(f, "ar1:{}", fmt_num(phi))?;
                DgpSpec::ar1(phi)
            }
            Variant::Ar2 { phi1, phi2 } => {
                write!(f, "ar2:{},{}", fmt_num(phi1), fmt_num(phi2))?;
                DgpSpec::ar2(phi1, phi2)
            }
            Variant::Ar2x {
                phi1,
                phi2,
                rho1,
                rho2,
            } => {
                write!(
                    f,
                    "ar2x:{},{},{},{}",
                    fmt_num(phi1),
                    fmt_num(phi2),
                    fmt_num(rho1),
                    fmt_num(rho2)
                )?;
                DgpSpec::ar2x(phi1, phi2, rho1, rho2)
            }
            Variant::RandomCoefAr1 => {
                let EffectDist::Uniform { lo, hi } = self.c_dist;
                write!(f, "rcar1:u{},{}", fmt_num(lo), fmt_num(hi))?;
                DgpSpec::random_coef_ar1(lo, hi)
            }
            Variant::ExpAr { rho1, rho2 } => {
                write!(f, "expar:{},{}", fmt_num(rho1), fmt_num(rho2))?;
                DgpSpec::expar(rho1, rho2)
            }
        };
        if self.variant != Variant::RandomCoefAr1 && self.c_dist != default.c_dist {
            let EffectDist::Uniform { lo, hi } = self.c_dist;
            write!(f, ";c=u{},{}", fmt_num(lo), fmt_num(hi))?;
        }
        if self.err_dist != default.err_dist {
            match self.err_dist {
                InnovationDist::StudentT { df } => write!(f, ";err=t{}", fmt_num(df))?,
                InnovationDist::Normal => write!(f, ";err=normal")?,
            }
        }
        if self.burn_in != DEFAULT_BURN_IN {
            write!(f, ";burn={}", self.burn_in)?;
        }
        Ok(())
    }
}

fn parse_uniform(input: &str, body: &str) -> Result<(f64, f64)> {
    let rest = body.strip_prefix('u').ok_or_else(|| {
        Error::parse(
            "DGP specification",
            input,
            "uniform range must look like u<lo>,<hi>",
        )
    })?;
    let v = parse_numbers(input, rest, 2)?;
    Ok((v[0], v[1]))
}

fn parse_numbers(input: &str, body: &str, count: usize) -> Result<Vec<f64>> {
    let values = body
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::parse("DGP specification", input, format!("bad number: {e}")))?;
    if values.len() != count {
        return Err(Error::parse(
            "DGP specification",
            input,
            format!("expected {count} parameters, got {}", values.len()),
        ));
    }
    Ok(values)
}

impl FromStr for DgpSpec {
    type Err = Error;

    /// `ar1:0.8`, `ar2:0.4,0.4`, `ar2x:0.4,0.4,0.5,0.5`, `rcar1:u0,0.9`,
    /// `expar:0.8,1`, each optionally followed by `;c=u<lo>,<hi>`,
    /// `;err=t<df>|normal` and `;burn=<periods>`.
    fn from_str(input: &str) -> Result<Self> {
        let mut parts = input.trim().split(';');
        let head = parts.next().unwrap_or_default();
        let (name, body) = head.split_once(':').ok_or_else(|| {
            Error::parse("DGP specification", input, "expected <name>:<parameters>")
        })?;
        let mut spec = match name.trim().to_ascii_lowercase().as_str() {
            "ar1" => DgpSpec::ar1(parse_numbers(input, body, 1)?[0]),
            "ar2" => {
                let v = parse_numbers(input, body, 2)?;
                DgpSpec::ar2(v[0], v[1])
            }
            "ar2x" => {
                let v = parse_numbers(input, body, 4)?;
                DgpSpec::ar2x(v[0], v[1], v[2], v[3])
            }
            "rcar1" => {
                let (lo, hi) = parse_uniform(input, body.trim())?;
                DgpSpec::random_coef_ar1(lo, hi)
            }
            "expar" => {
                let v = parse_numbers(input, body, 2)?;
                DgpSpec::expar(v[0], v[1])
            }
            other => {
                return Err(Error::parse(
                    "DGP specification",
                    input,
                    format!("unknown design {other:?}; expected ar1, ar2, ar2x, rcar1 or expar"),
                ))
            }
        };
        for modifier in parts {
            let (key, value) = modifier.split_once('=').ok_or_else(|| {
                Error::parse("DGP specification", input, "modifiers look like key=value")
            })?;
            match key.trim() {
                "c" => {
                    let (lo, hi) = parse_uniform(input, value.trim())?;
                    spec.c_dist = EffectDist::Uniform { lo, hi };
                }
                "err" => {
                    let value = value.trim();
                    spec.err_dist = if value == "normal" {
                        InnovationDist::Normal
                    } else if let Some(df) = value.strip_prefix('t') {
                        InnovationDist::StudentT {
                            df: df.parse().map_err(|e| {
                                Error::parse("DGP specification", input, format!("bad df: {e}"))
                            })?,
                        }
                    } else {
                        return Err(Error::parse(
                            "DGP specification",
                            input,
                            "err must be t<df> or normal",
                        ));
                    };
                }
                "burn" => {
                    spec.burn_in = value.trim().parse().map_err(|e| {
                        Error::parse("DGP specification", input, format!("bad burn-in: {e}"))
                    })?;
                }
                other => {
                    return Err(Error::parse(
                        "DGP specification",
                        input,
                        format!("unknown modifier {other:?}"),
                    ))
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for DgpSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DgpSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Period-by-period simulator of one individual, positioned after burn-in.
#[derive(Debug, Clone)]
pub struct IndividualSim {
    variant: Variant,
    c: f64,
    innovations: InnovationSampler,
    rng: StreamRng,
    y1: f64,
    y2: f64,
    x1: f64,
}

impl IndividualSim {
    /// Individual `i` of the panel with seed `seed`.
    pub fn new(spec: &DgpSpec, seed: u64, i: u64) -> Result<Self> {
        Self::from_stream(spec, stream(&[domain::INDIVIDUAL, seed, i]))
    }

    pub fn from_stream(spec: &DgpSpec, mut rng: StreamRng) -> Result<Self> {
        spec.validate()?;
        let c = spec.c_dist.sample(&mut rng);
        let mut sim = Self {
            variant: spec.variant,
            c,
            innovations: InnovationSampler::new(spec.err_dist)?,
            rng,
            y1: 0.0,
            y2: 0.0,
            x1: 0.0,
        };
        if let Variant::ExpAr { .. } = spec.variant {
            sim.y1 = c;
        }
        for _ in 0..spec.burn_in {
            sim.step();
        }
        Ok(sim)
    }

    /// Individual effect, or the AR coefficient for the random-coefficient design.
    pub fn effect(&self) -> f64 {
        self.c
    }

    /// Advances one period and returns `(y_t, x_t)`; `x_t` is 0 without an exogenous series.
    #[inline]
    pub fn step(&mut self) -> (f64, f64) {
        let (y, x) = match self.variant {
            Variant::Ar1 { phi } => (
                self.c + phi * self.y1 + self.innovations.sample(&mut self.rng),
                0.0,
            ),
            Variant::Ar2 { phi1, phi2 } => (
                self.c + phi1 * self.y1 + phi2 * self.y2 + self.innovations.sample(&mut self.rng),
                0.0,
            ),
            Variant::Ar2x {
                phi1,
                phi2,
                rho1,
                rho2,
            } => {
                let x: f64 = StandardNormal.sample(&mut self.rng);
                let u = self.innovations.sample(&mut self.rng);
                (
                    self.c + phi1 * self.y1 + phi2 * self.y2 + rho1 * x + rho2 * self.x1 + u,
                    x,
                )
            }
            Variant::RandomCoefAr1 => (
                self.c * self.y1 + self.innovations.sample(&mut self.rng),
                0.0,
            ),
            Variant::ExpAr { rho1, rho2 } => {
                let d = self.y1 - self.c;
                (
                    self.c
                        + rho1 * d
                        + rho2 * (-d * d).exp()
                        + self.innovations.sample(&mut self.rng),
                    0.0,
                )
            }
        };
        self.y2 = self.y1;
        self.y1 = y;
        self.x1 = x;
        (y, x)
    }
}

/// A simulated raw panel with its latent effects.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    /// Periods `0..=T`, with `x1` present for designs that carry an exogenous series.
    pub dataset: PanelDataset,
    pub effects: Vec<f64>,
    pub spec: DgpSpec,
    pub seed: u64,
}

/// Simulates `n` individuals over periods `0..=T` (so `T + 1` stored periods).
pub fn simulate_panel(spec: &DgpSpec, n: usize, t: usize, seed: u64) -> Result<SimulatedPanel> {
    spec.validate()?;
    if n < 2 || t < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 2 and T >= 2, got n={n}, T={t}"
        )));
    }
    let periods = t + 1;
    let p = spec.exogenous_count();
    let mut y = Vec::with_capacity(n * periods);
    let mut x = Vec::with_capacity(n * periods * p);
    let mut effects = Vec::with_capacity(n);
    for i in 0..n {
        let mut sim = IndividualSim::new(spec, seed, i as u64)?;
        effects.push(sim.effect());
        for _ in 0..periods {
            let (yt, xt) = sim.step();
            y.push(yt);
            if p == 1 {
                x.push(xt);
            }
        }
    }
    let ids = (1..=n).map(|i| i.to_string()).collect();
    let labels = (0..periods).map(|s| s.to_string()).collect();
    let names = (1..=p).map(|a| format!("x{a}")).collect();
    let dataset = PanelDataset::new(ids, labels, names, y, x)?;
    Ok(SimulatedPanel {
        dataset,
        effects,
        spec: *spec,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{mean, sample_sd};

    #[test]
    fn grammar_round_trip() {
        for s in [
            "ar1:0.8",
            "ar2:0.4,0.4",
            "ar2:-0.4,-0.4",
            "ar2x:0.4,0.4,0.5,0.5",
            "rcar1:u0,0.9",
            "expar:0.8,1",
            "ar1:0.5;err=normal;burn=1000",
            "ar2x:0.4,0.4,0.5,0.5;c=u-1,1",
        ] {
            let spec: DgpSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
            let json = serde_json::to_string(&spec).unwrap();
            assert_eq!(serde_json::from_str::<DgpSpec>(&json).unwrap(), spec);
        }
        assert_eq!("ar1:0.8".parse::<DgpSpec>().unwrap(), DgpSpec::ar1(0.8));
    }

    #[test]
    fn stationarity_is_enforced() {
        for s in [
            "ar1:1",
            "ar2:0.6,0.5",
            "ar2:0.1,-1",
            "rcar1:u0,1",
            "expar:1.2,1",
        ] {
            assert!(
                matches!(s.parse::<DgpSpec>(), Err(Error::NonStationarySpec(_))),
                "{s} accepted"
            );
        }
        assert!(matches!(
            simulate_panel(&DgpSpec::ar1(1.0), 3, 4, 0),
            Err(Error::NonStationarySpec(_))
        ));
        assert!(matches!(
            "ar3:1".parse::<DgpSpec>(),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            "ar2:0.4".parse::<DgpSpec>(),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn panel_shape_and_determinism() {
        let spec = DgpSpec::ar2x(0.4, 0.4, 0.5, 0.5);
        let a = simulate_panel(&spec, 5, 6, 11).unwrap();
        assert_eq!((a.dataset.n(), a.dataset.t(), a.dataset.p()), (5, 7, 1));
        assert_eq!(a.dataset.periods()[0], "0");
        assert_eq!(a, simulate_panel(&spec, 5, 6, 11).unwrap());
        assert_ne!(a.dataset, simulate_panel(&spec, 5, 6, 12).unwrap().dataset);
        // Individual i depends only on (seed, i).
        let b = simulate_panel(&spec, 8, 6, 11).unwrap();
        assert_eq!(a.dataset.y_row(3), b.dataset.y_row(3));
    }

    #[test]
    fn expar_step_matches_scalar_recursion() {
        let spec = DgpSpec::expar(0.8, 1.0).with_burn_in(0);
        let mut sim = IndividualSim::new(&spec, 5, 0).unwrap();
        let c = sim.effect();
        // Replay the innovations from an identical stream.
        let mut rng = stream(&[domain::INDIVIDUAL, 5, 0]);
        let _c: f64 = rng.random();
        let mut y = c;
        for _ in 0..100 {
            let u: f64 = StandardNormal.sample(&mut rng);
            y = c + 0.8 * (y - c) + (-(y - c) * (y - c)).exp() + u;
            let (got, _) = sim.step();
            assert!((got - y).abs() < 1e-12);
        }
    }

    #[test]
    fn t10_innovations_have_variance_five_quarters() {
        let sampler = InnovationSampler::new(T10).unwrap();
        let mut rng = stream(&[42]);
        let draws: Vec<f64> = (0..400_000).map(|_| sampler.sample(&mut rng)).collect();
        let sd = sample_sd(&draws);
        assert!((sd * sd - 1.25).abs() < 0.03, "variance {}", sd * sd);
        assert!(mean(&draws).abs() < 0.01);
    }

    #[test]
    fn random_coefficient_conditional_variance() {
        let spec = DgpSpec::random_coef_ar1(0.0, 0.9);
        let mut sim = IndividualSim::new(&spec, 3, 1).unwrap();
        let c = sim.effect();
        let ys: Vec<f64> = (0..400_000).map(|_| sim.step().0).collect();
        let sd = sample_sd(&ys);
        let target = 1.0 / (1.0 - c * c);
        assert!(
            (sd * sd / target - 1.0).abs() < 0.05,
            "c={c} var={} target={target}",
            sd * sd
        );
    }
}

//! Instances, distributions and scheme configuration.
//!
//! An [`Instance`] is an ordered list of independent discrete distributions.
//! Every distribution lists its atoms in strictly increasing value order and
//! carries its full probability mass explicitly; residual mass sits on an
//! explicit atom at value zero.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used for every "exact" equality in the crate.
pub const TOLERANCE: f64 = 1e-9;

/// Union-support cap for the exact expected-maximum formula.
pub const EXPECTED_MAX_CAP: usize = 1_000_000;

/// A single support atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub value: f64,
    pub prob: f64,
}

impl PointMass {
    pub fn new(value: f64, prob: f64) -> Self {
        Self { value, prob }
    }
}

/// A finite discrete distribution over non-negative reals.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<PointMass>,
}

impl DiscreteDistribution {
    /// Builds a distribution, sorting the atoms and checking every invariant.
    pub fn new(mut atoms: Vec<PointMass>) -> Result<Self> {
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        let dist = Self { atoms };
        match dist.violations().into_iter().next() {
            None => Ok(dist),
            Some(msg) => Err(Error::InvalidInstance(msg)),
        }
    }

    /// Wraps atoms as given, without sorting or validation.
    pub fn from_atoms_unchecked(atoms: Vec<PointMass>) -> Self {
        Self { atoms }
    }

    /// Builds a distribution from `(value, prob)` pairs, merging equal values
    /// and dropping atoms without mass. Used by the transforms, which move
    /// mass around and may create coincident atoms. Merged mass is capped at
    /// 1 so round-off cannot push a single atom past it.
    pub fn from_masses(masses: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut pairs: Vec<(f64, f64)> = masses.into_iter().filter(|&(_, p)| p > 0.0).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<PointMass> = Vec::with_capacity(pairs.len());
        for (value, prob) in pairs {
            match atoms.last_mut() {
                Some(last) if last.value == value => last.prob += prob,
                _ => atoms.push(PointMass { value, prob }),
            }
        }
        for a in &mut atoms {
            a.prob = a.prob.min(1.0);
        }
        Self { atoms }
    }

    /// The point mass at `value`.
    pub fn point(value: f64) -> Self {
        Self { atoms: vec![PointMass::new(value, 1.0)] }
    }

    /// `value` with probability `prob`, zero otherwise.
    pub fn two_point(value: f64, prob: f64) -> Self {
        Self::from_masses([(0.0, 1.0 - prob), (value, prob)])
    }

    pub fn atoms(&self) -> &[PointMass] {
        &self.atoms
    }

    /// Atoms with a strictly positive value.
    pub fn positive_atoms(&self) -> impl Iterator<Item = &PointMass> + '_ {
        self.atoms.iter().filter(|a| a.value > 0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.prob).sum()
    }

    pub fn max_value(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.value)
    }

    /// `P[X <= x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.value <= x).map(|a| a.prob).sum()
    }

    /// `E[max(X, threshold)]`: the value of facing this variable when
    /// rejecting it is worth `threshold`.
    pub fn expected_max_against(&self, threshold: f64) -> f64 {
        self.atoms.iter().map(|a| a.value.max(threshold) * a.prob).sum()
    }

    /// Exact structural equality of the atom lists (bitwise on floats).
    pub fn same_atoms(&self, other: &Self) -> bool {
        self.atoms.len() == other.atoms.len()
            && self
                .atoms
                .iter()
                .zip(&other.atoms)
                .all(|(a, b)| a.value.to_bits() == b.value.to_bits() && a.prob.to_bits() == b.prob.to_bits())
    }

    pub(crate) fn structural_key(&self) -> Vec<(u64, u64)> {
        self.atoms.iter().map(|a| (a.value.to_bits(), a.prob.to_bits())).collect()
    }

    pub(crate) fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_masses(self.atoms.iter().map(|a| (f(a.value), a.prob)))
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.atoms.is_empty() {
            out.push("no atoms".to_string());
            return out;
        }
        for (j, a) in self.atoms.iter().enumerate() {
            if !a.value.is_finite() || a.value < 0.0 {
                out.push(format!("atoms[{j}]: negative or non-finite value {}", a.value));
            }
            if !(a.prob > 0.0 && a.prob <= 1.0) {
                out.push(format!("atoms[{j}]: probability {} outside (0, 1]", a.prob));
            }
        }
        for (j, w) in self.atoms.windows(2).enumerate() {
            if w[0].value == w[1].value {
                out.push(format!("atoms[{}]: duplicate value {}", j + 1, w[1].value));
            } else if w[0].value > w[1].value {
                out.push(format!("atoms[{}]: values not increasing", j + 1));
            }
        }
        let mass = self.total_mass();
        if mass < 1.0 - TOLERANCE {
            out.push(format!("mass deficit {}", fmt_num(1.0 - mass)));
        } else if mass > 1.0 + TOLERANCE {
            out.push(format!("mass surplus {}", fmt_num(mass - 1.0)));
        }
        out
    }
}

/// One invariant violation found by [`Instance::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub variable: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.variable {
            Some(i) => write!(f, "variables[{i}]: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }
}

/// The `n` independent variables of a prophet secretary instance.
///
/// `scale` records the factor by which values have been divided so far, so
/// that a value computed on a normalized instance maps back to original
/// units by multiplying with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    pub variables: Vec<DiscreteDistribution>,
    pub scale: f64,
}

impl Instance {
    pub fn new(variables: Vec<DiscreteDistribution>) -> Result<Self> {
        Self::with_scale(variables, 1.0)
    }

    pub fn with_scale(variables: Vec<DiscreteDistribution>, scale: f64) -> Result<Self> {
        let inst = Self { variables, scale };
        let report = inst.validate();
        match report.violations.into_iter().next() {
            None => Ok(inst),
            Some(v) => Err(Error::InvalidInstance(v.to_string())),
        }
    }

    pub fn from_parts_unchecked(variables: Vec<DiscreteDistribution>, scale: f64) -> Self {
        Self { variables, scale }
    }

    pub fn n(&self) -> usize {
        self.variables.len()
    }

    /// Lists every invariant violation; an empty report means valid.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.variables.is_empty() {
            violations.push(Violation { variable: None, message: "instance has no variables".into() });
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            violations
                .push(Violation { variable: None, message: format!("scale {} is not a positive real", self.scale) });
        }
        for (i, var) in self.variables.iter().enumerate() {
            violations.extend(var.violations().into_iter().map(|message| Violation { variable: Some(i), message }));
        }
        ValidationReport { violations }
    }

    /// Largest support value over all variables.
    pub fn max_value(&self) -> f64 {
        self.variables.iter().map(DiscreteDistribution::max_value).fold(0.0, f64::max)
    }

    /// Largest number of positive atoms carried by any variable (at least 1).
    pub fn support_bound(&self) -> usize {
        self.variables.iter().map(|v| v.positive_atoms().count()).max().unwrap_or(0).max(1)
    }

    /// Exact `E[max_i X_i]` under the default union-support cap.
    pub fn expected_max(&self) -> Result<f64> {
        self.expected_max_capped(EXPECTED_MAX_CAP)
    }

    /// Exact `E[max_i X_i]` via the product of CDFs over the sorted union of
    /// support values.
    pub fn expected_max_capped(&self, cap: usize) -> Result<f64> {
        let mut support: Vec<f64> = self.variables.iter().flat_map(|v| v.atoms.iter().map(|a| a.value)).collect();
        support.sort_by(f64::total_cmp);
        support.dedup();
        if support.len() > cap {
            return Err(Error::SupportTooLarge { points: support.len(), cap });
        }
        let mut cursor = vec![0usize; self.variables.len()];
        let mut cdf = vec![0.0f64; self.variables.len()];
        let mut prev = 0.0;
        let mut total = 0.0;
        for &v in &support {
            let mut joint = 1.0;
            for (i, var) in self.variables.iter().enumerate() {
                while cursor[i] < var.atoms.len() && var.atoms[cursor[i]].value <= v {
                    cdf[i] += var.atoms[cursor[i]].prob;
                    cursor[i] += 1;
                }
                joint *= cdf[i].min(1.0);
            }
            total += v * (joint - prev);
            prev = joint;
        }
        Ok(total)
    }

    /// Divides every value by `E[max]`, so that the result has expected
    /// maximum one; the factor is folded into `scale`.
    pub fn normalize(&self) -> Result<Self> {
        let emax = self.expected_max()?;
        if emax.is_nan() || emax <= 0.0 {
            return Err(Error::DegenerateInstance);
        }
        Ok(Self {
            variables: self.variables.iter().map(|v| v.map_values(|x| x / emax)).collect(),
            scale: self.scale * emax,
        })
    }

    /// The same instance with the variables reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self { variables: order.iter().map(|&i| self.variables[i].clone()).collect(), scale: self.scale }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("instances always serialize")
    }
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Instance::from_json_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = instance.to_json_string();
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    atoms: Vec<PointMass>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(default = "unit_scale")]
    scale: f64,
    variables: Vec<RawVariable>,
}

fn unit_scale() -> f64 {
    1.0
}

impl TryFrom<RawInstance> for Instance {
    type Error = String;

    fn try_from(raw: RawInstance) -> std::result::Result<Self, String> {
        let variables = raw
            .variables
            .into_iter()
            .map(|v| {
                let mut atoms = v.atoms;
                atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
                DiscreteDistribution { atoms }
            })
            .collect();
        let inst = Instance { variables, scale: raw.scale };
        let report = inst.validate();
        if report.is_valid() {
            Ok(inst)
        } else {
            let msgs: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
            Err(msgs.join("; "))
        }
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance {
            scale: inst.scale,
            variables: inst.variables.into_iter().map(|v| RawVariable { atoms: v.atoms }).collect(),
        }
    }
}

/// Which family of exponent constants a [`SchemeConfig`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// The asymptotic constants (20, 10, 4, 4). Every instance small enough to
    /// run is degenerate under them.
    Theoretical,
    /// Small executable exponents, default (2, 2, 1, 1).
    Desk,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theoretical" => Ok(Profile::Theoretical),
            "desk" => Ok(Profile::Desk),
            other => Err(Error::InvalidArgument(format!("unknown profile {other:?}"))),
        }
    }
}

/// Accuracy parameter plus the exponent family of the approximation schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub epsilon: f64,
    /// Atoms with `q < eps^small_prob_exp` are small-probability atoms.
    pub small_prob_exp: f64,
    /// A value's small atoms are dropped when their total `q` is below `eps^ignore_mass_exp`.
    pub ignore_mass_exp: f64,
    /// Per-block mass is `eps^block_mass_exp` times the capped total.
    pub block_mass_exp: f64,
    /// There are `round(eps^-block_count_exp)` non-initial blocks per value.
    pub block_count_exp: f64,
    pub profile: Profile,
}

impl SchemeConfig {
    pub fn theoretical(epsilon: f64) -> Result<Self> {
        Self {
            epsilon,
            small_prob_exp: 20.0,
            ignore_mass_exp: 10.0,
            block_mass_exp: 4.0,
            block_count_exp: 4.0,
            profile: Profile::Theoretical,
        }
        .checked()
    }

    pub fn desk(epsilon: f64) -> Result<Self> {
        Self {
            epsilon,
            small_prob_exp: 2.0,
            ignore_mass_exp: 2.0,
            block_mass_exp: 1.0,
            block_count_exp: 1.0,
            profile: Profile::Desk,
        }
        .checked()
    }

    pub fn with_profile(epsilon: f64, profile: Profile) -> Result<Self> {
        match profile {
            Profile::Theoretical => Self::theoretical(epsilon),
            Profile::Desk => Self::desk(epsilon),
        }
    }

    /// Overrides the exponents; only allowed on the desk profile.
    pub fn with_exponents(
        mut self,
        small_prob: f64,
        ignore_mass: f64,
        block_mass: f64,
        block_count: f64,
    ) -> Result<Self> {
        self.small_prob_exp = small_prob;
        self.ignore_mass_exp = ignore_mass;
        self.block_mass_exp = block_mass;
        self.block_count_exp = block_count;
        self.checked()
    }

    pub fn checked(self) -> Result<Self> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::InvalidArgument(format!("epsilon {} outside (0, 0.5)", self.epsilon)));
        }
        let exps = [self.small_prob_exp, self.ignore_mass_exp, self.block_mass_exp, self.block_count_exp];
        if exps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidArgument(format!("exponents must be positive, got {exps:?}")));
        }
        if self.profile == Profile::Theoretical && exps != [20.0, 10.0, 4.0, 4.0] {
            return Err(Error::InvalidArgument("the theoretical profile fixes the exponents to (20, 10, 4, 4)".into()));
        }
        Ok(self)
    }

    pub fn small_prob_threshold(&self) -> f64 {
        self.epsilon.powf(self.small_prob_exp)
    }

    pub fn ignore_mass_threshold(&self) -> f64 {
        self.epsilon.powf(self.ignore_mass_exp)
    }

    pub fn block_mass_factor(&self) -> f64 {
        self.epsilon.powf(self.block_mass_exp)
    }

    /// Number of non-initial blocks per value class.
    pub fn block_count(&self) -> usize {
        (self.epsilon.powf(-self.block_count_exp).round() as usize).max(1)
    }
}

/// Formats a quantity with at most nine decimals and no trailing zeros.
pub(crate) fn fmt_num(x: f64) -> String {
    let s = format!("{x:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

//! Encoded example families with expected outcomes, shared by the
//! regression tests and the `corpus` subcommand.

use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{CertVerdict, Certifier, CertifyConfig, Property};
use crate::chain::IndexSubset;
use crate::decouple::{Analyzer, DecoupleConfig, Verdict};
use crate::error::{Error, Result};
use crate::functions::{parse_family, FunctionFamily};
use crate::geometry::Region;
use crate::multiplier::{fuzzy_sum_rule, multiplier_search, MultiplierConfig};

/// Where an expected value comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    /// Stated for the example in the source publication.
    Publication,
    /// Immediate from the definitions.
    Trivial,
    /// Computed by an independent method, named here.
    Derived { oracle: String },
}

fn derived(oracle: &str) -> Origin {
    Origin::Derived {
        oracle: oracle.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operation {
    PlainInf,
    Lambda,
    QuasiLambda,
    Theta,
    UpperSum { x: Vec<f64> },
    Certify { property: String },
    JointLsc { xbar: Vec<f64> },
    InfCompact { t0: usize },
    /// Inner value of `Θ` at the family's witness tuple number `k`.
    InnerValue { k: usize },
    Multiplier { xbar: Vec<f64>, delta: f64, eps: f64 },
    SumRule { xbar: Vec<f64>, xstar: Vec<f64>, delta: f64, eps: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expected {
    Within { value: f64, tol: f64 },
    Between { lo: f64, hi: f64 },
    AtLeast { value: f64 },
    AtMost { value: f64 },
    Verdict { verdict: Verdict },
    Certificate { verdict: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct Expectation {
    pub operation: Operation,
    pub expected: Expected,
    pub origin: Origin,
}

fn expect(operation: Operation, expected: Expected, origin: Origin) -> Expectation {
    Expectation {
        operation,
        expected,
        origin,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusEntry {
    pub id: String,
    #[serde(skip)]
    pub family: FunctionFamily,
    pub region: Region,
    pub expected: Vec<Expectation>,
    pub notes: String,
}

const FIXTURES: &[(&str, &str)] = &[
    ("example-2.1", include_str!("../fixtures/example-2.1.fam")),
    ("nonfirm-r3-pair", include_str!("../fixtures/nonfirm-r3-pair.fam")),
    ("nonfirm-r3-triple", include_str!("../fixtures/nonfirm-r3-triple.fam")),
    ("abs-pair", include_str!("../fixtures/abs-pair.fam")),
    ("abs-twin", include_str!("../fixtures/abs-twin.fam")),
    ("linear-indicator", include_str!("../fixtures/linear-indicator.fam")),
    ("quad-abs", include_str!("../fixtures/quad-abs.fam")),
    ("geometric-abs", include_str!("../fixtures/geometric-abs.fam")),
    ("geometric-quad", include_str!("../fixtures/geometric-quad.fam")),
    ("constant-shift", include_str!("../fixtures/constant-shift.fam")),
    ("coercive-partner", include_str!("../fixtures/coercive-partner.fam")),
    ("joint-dip", include_str!("../fixtures/joint-dip.fam")),
];

/// DSL text of a bundled fixture.
pub fn fixture_source(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parsed bundled fixture.
pub fn fixture(name: &str) -> Result<FunctionFamily> {
    let src = fixture_source(name).ok_or_else(|| Error::InvalidParameter(format!("no fixture {name}")))?;
    parse_family(src)
}

pub fn fixture_names() -> Vec<&'static str> {
    FIXTURES.iter().map(|(n, _)| *n).collect()
}

fn entry(id: &str, file: &str, region: Option<Region>, notes: &str, expected: Vec<Expectation>) -> Result<CorpusEntry> {
    let family = fixture(file)?;
    let region = match region {
        Some(r) => r,
        None => family
            .region()
            .cloned()
            .ok_or_else(|| Error::InvalidParameter(format!("fixture {file} has no region")))?,
    };
    Ok(CorpusEntry {
        id: id.into(),
        family,
        region,
        expected,
        notes: notes.into(),
    })
}

fn cert(p: Property, verdict: &str) -> (Operation, Expected) {
    (
        Operation::Certify {
            property: p.name().into(),
        },
        Expected::Certificate {
            verdict: verdict.into(),
        },
    )
}

fn cert_expect(p: Property, verdict: &str, origin: Origin) -> Expectation {
    let (o, e) = cert(p, verdict);
    expect(o, e, origin)
}

/// Every corpus entry, in a fixed order.
pub fn entries() -> Result<Vec<CorpusEntry>> {
    use Expected::*;
    use Operation::*;
    let pub_ = || Origin::Publication;
    let zero = vec![0.0];
    Ok(vec![
        entry(
            "example-2.1",
            "example-2.1",
            None,
            "1/x and -1/x: the sum is 0 off the origin, decoupled sums run to -inf",
            vec![
                expect(PlainInf, Between { lo: 0.0, hi: 1e-3 }, pub_()),
                expect(
                    Lambda,
                    Verdict {
                        verdict: crate::decouple::Verdict::NegativeInfinityDiverging,
                    },
                    pub_(),
                ),
                cert_expect(Property::UniformLsc, "fails", pub_()),
            ],
        )?,
        entry(
            "nonfirm-r3",
            "nonfirm-r3-pair",
            None,
            "two indicators in R^3: uniformly but not firmly lower semicontinuous",
            vec![
                cert_expect(Property::UniformLsc, "holds", pub_()),
                cert_expect(Property::FirmUniformLsc, "fails", pub_()),
                expect(
                    InnerValue { k: 10 },
                    AtLeast { value: 10.0 },
                    derived("closed-form distance to the hyperbolic set u1 u2 >= 1, u1 u3 >= -1"),
                ),
            ],
        )?,
        entry(
            "nonfirm-r3-triple",
            "nonfirm-r3-triple",
            None,
            "the pair plus a linear third member",
            vec![expect(
                Lambda,
                Verdict {
                    verdict: crate::decouple::Verdict::NegativeInfinityDiverging,
                },
                pub_(),
            )],
        )?,
        entry(
            "abs-pair",
            "abs-pair",
            None,
            "|x| and |x - 1|",
            vec![
                expect(Lambda, Within { value: 1.0, tol: 1e-6 }, derived("grid brute force over decoupled pairs")),
                expect(Theta, Within { value: 0.0, tol: 1e-6 }, derived("grid brute force over decoupled pairs")),
                expect(
                    SumRule {
                        xbar: zero.clone(),
                        xstar: vec![-1.0],
                        delta: 1.0,
                        eps: 0.1,
                    },
                    AtMost { value: 1e-9 },
                    derived("interval sum [-1, 1] + {-1}"),
                ),
            ],
        )?,
        entry(
            "abs-pair-unit",
            "abs-pair",
            Some(Region::interval(0.0, 1.0)),
            "|x| and |x - 1| on [0, 1]",
            vec![expect(
                QuasiLambda,
                Within { value: 1.0, tol: 1e-6 },
                derived("grid brute force over shrunken regions"),
            )],
        )?,
        entry(
            "abs-twin",
            "abs-twin",
            None,
            "two copies of |x|",
            vec![
                expect(
                    Multiplier {
                        xbar: zero.clone(),
                        delta: 1.0,
                        eps: 0.1,
                    },
                    AtMost { value: 0.0 },
                    Origin::Trivial,
                ),
                expect(
                    SumRule {
                        xbar: zero.clone(),
                        xstar: vec![1.5],
                        delta: 1.0,
                        eps: 0.1,
                    },
                    AtMost { value: 1e-9 },
                    Origin::Trivial,
                ),
            ],
        )?,
        entry(
            "linear-indicator",
            "linear-indicator",
            None,
            "x plus the indicator of [0, 1]",
            vec![expect(
                Multiplier {
                    xbar: zero.clone(),
                    delta: 1.0,
                    eps: 0.1,
                },
                AtMost { value: 1e-12 },
                derived("closed-form normal cone at the left endpoint"),
            )],
        )?,
        entry(
            "quad-abs",
            "quad-abs",
            None,
            "x^2 and |x|",
            vec![expect(
                SumRule {
                    xbar: zero.clone(),
                    xstar: vec![0.5],
                    delta: 1.0,
                    eps: 0.1,
                },
                AtMost { value: 1e-9 },
                derived("gradient plus interval"),
            )],
        )?,
        entry(
            "geometric-abs",
            "geometric-abs",
            None,
            "2^-k |x| for k >= 0",
            vec![
                expect(
                    UpperSum { x: vec![2.0] },
                    Within {
                        value: 4.0,
                        tol: 2f64.powi(-19),
                    },
                    derived("geometric series"),
                ),
                expect(
                    Multiplier {
                        xbar: zero.clone(),
                        delta: 1.0,
                        eps: 0.1,
                    },
                    AtMost { value: 1e-6 },
                    derived("interval arithmetic with the tail bound"),
                ),
                expect(
                    JointLsc { xbar: zero.clone() },
                    Certificate {
                        verdict: "holds".into(),
                    },
                    derived("members are Lipschitz with summable constants"),
                ),
            ],
        )?,
        entry(
            "geometric-quad",
            "geometric-quad",
            None,
            "2^-k x^2 for k >= 1",
            vec![
                expect(Lambda, Within { value: 0.0, tol: 1e-6 }, derived("common minimizer at the origin")),
                cert_expect(Property::UniformLsc, "holds", derived("common minimizer at the origin")),
            ],
        )?,
        entry(
            "constant-shift",
            "constant-shift",
            None,
            "the abs pair plus the constant 3",
            vec![expect(Lambda, Within { value: 4.0, tol: 1e-6 }, derived("abs-pair value shifted by 3"))],
        )?,
        entry(
            "coercive-partner",
            "coercive-partner",
            None,
            "x^2 and a distance on the whole line",
            vec![
                expect(Lambda, Within { value: 0.25, tol: 1e-4 }, derived("one-dimensional calculus")),
                expect(
                    InfCompact { t0: 0 },
                    Certificate {
                        verdict: "holds".into(),
                    },
                    derived("quadratic growth of x^2 on scaled boxes"),
                ),
            ],
        )?,
        entry(
            "joint-dip",
            "joint-dip",
            None,
            "max(-2^k x, -1): each member is continuous, the family dips near 0",
            vec![expect(
                JointLsc { xbar: zero },
                Certificate {
                    verdict: "fails".into(),
                },
                derived("dip of size 1 inside every ball once 2^k delta >= 1"),
            )],
        )?,
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Observed {
    pub value: Option<f64>,
    pub verdict: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpectationResult {
    pub operation: Operation,
    pub expected: Expected,
    pub origin: Origin,
    pub observed: Option<Observed>,
    pub pass: bool,
    /// Distance from the observed value to the nearest failing value;
    /// negative when failing.
    pub margin: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntryReport {
    pub id: String,
    pub notes: String,
    pub results: Vec<ExpectationResult>,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusReport {
    pub seed: u64,
    pub entries: Vec<EntryReport>,
    pub passed: usize,
    pub failed: usize,
    pub all_pass: bool,
}

fn verdict_name(v: &CertVerdict) -> &'static str {
    match v {
        CertVerdict::Holds => "holds",
        CertVerdict::Fails { .. } => "fails",
        CertVerdict::Inconclusive => "inconclusive",
    }
}

fn num(v: f64) -> Observed {
    Observed {
        value: Some(v),
        verdict: None,
    }
}

fn word(v: impl Into<String>) -> Observed {
    Observed {
        value: None,
        verdict: Some(v.into()),
    }
}

struct Runner<'a> {
    entry: &'a CorpusEntry,
    cert: Certifier<'a>,
    seed: u64,
}

impl Runner<'_> {
    fn an(&self) -> &Analyzer<'_> {
        self.cert.analyzer()
    }

    fn mcfg(&self) -> MultiplierConfig {
        MultiplierConfig {
            seed: self.seed,
            ..MultiplierConfig::new(self.entry.family.dim())
        }
    }

    fn observe(&self, op: &Operation, expected: &Expected) -> Result<Observed> {
        let fam = &self.entry.family;
        let verdict_or_value = |e: crate::decouple::Estimate| {
            if matches!(expected, Expected::Verdict { .. }) {
                word(format!("{:?}", e.verdict))
            } else {
                num(e.value.value())
            }
        };
        Ok(match op {
            Operation::PlainInf => verdict_or_value(self.an().plain()),
            Operation::Lambda => verdict_or_value(self.an().lambda()?),
            Operation::QuasiLambda => verdict_or_value(self.an().quasi_lambda()?),
            Operation::Theta => verdict_or_value(self.an().theta()),
            Operation::UpperSum { x } => num(fam.upper_sum(x)?.value.value()),
            Operation::Certify { property } => {
                let p = Property::parse(property)
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown property {property}")))?;
                word(verdict_name(&self.cert.certify(p)?.verdict))
            }
            Operation::JointLsc { xbar } => word(verdict_name(&self.cert.joint_lsc(xbar)?.verdict)),
            Operation::InfCompact { t0 } => word(verdict_name(&self.cert.inf_compact_sufficient(*t0)?.verdict)),
            Operation::InnerValue { k } => {
                let w = fam
                    .witnesses()
                    .iter()
                    .find(|w| w.k == *k)
                    .ok_or_else(|| Error::InvalidParameter(format!("no witness tuple {k}")))?;
                num(self.an().inner_value(&w.points)?)
            }
            Operation::Multiplier { xbar, delta, eps } => {
                let r = multiplier_search(fam, xbar, *delta, *eps, &IndexSubset::new(vec![]), &self.mcfg())?;
                if !(r.certified.points_in_ball && r.certified.sum_defect_nonpositive) {
                    return Err(Error::ParameterRegimeTooCoarse(format!("{:?}", r.certified)));
                }
                num(r.dual_residual)
            }
            Operation::SumRule {
                xbar,
                xstar,
                delta,
                eps,
            } => {
                let r = fuzzy_sum_rule(fam, xbar, xstar, *delta, *eps, &IndexSubset::new(vec![]), &self.mcfg())?;
                if !(r.certified.points_in_ball && r.certified.sum_defect_below_eps) {
                    return Err(Error::ParameterRegimeTooCoarse(format!("{:?}", r.certified)));
                }
                num(r.dual_residual)
            }
        })
    }
}

/// `(pass, margin)` of an observation.
pub fn judge(expected: &Expected, observed: &Observed) -> (bool, Option<f64>) {
    let value = observed.value;
    match expected {
        Expected::Within { value: v, tol } => match value {
            Some(x) => {
                let m = tol - (x - v).abs();
                (m >= 0.0, Some(m))
            }
            None => (false, None),
        },
        Expected::Between { lo, hi } => match value {
            Some(x) => {
                let m = (x - lo).min(hi - x);
                (m >= 0.0, Some(m))
            }
            None => (false, None),
        },
        Expected::AtLeast { value: v } => match value {
            Some(x) => (x >= *v, Some(x - v)),
            None => (false, None),
        },
        Expected::AtMost { value: v } => match value {
            Some(x) => (x <= *v, Some(v - x)),
            None => (false, None),
        },
        Expected::Verdict { verdict } => (observed.verdict.as_deref() == Some(&format!("{verdict:?}")), None),
        Expected::Certificate { verdict } => (observed.verdict.as_deref() == Some(verdict.as_str()), None),
    }
}

fn run_entry(entry: &CorpusEntry, seed: u64) -> EntryReport {
    let ccfg = CertifyConfig {
        decouple: DecoupleConfig::new(entry.region.clone()).with_seed(seed),
        ..CertifyConfig::new(entry.region.clone())
    };
    let results: Vec<ExpectationResult> = match Certifier::new(&entry.family, &ccfg) {
        Err(e) => entry
            .expected
            .iter()
            .map(|x| ExpectationResult {
                operation: x.operation.clone(),
                expected: x.expected.clone(),
                origin: x.origin.clone(),
                observed: None,
                pass: false,
                margin: None,
                error: Some(e.to_string()),
            })
            .collect(),
        Ok(cert) => {
            let runner = Runner { entry, cert, seed };
            entry
                .expected
                .iter()
                .map(|x| match runner.observe(&x.operation, &x.expected) {
                    Ok(obs) => {
                        let (pass, margin) = judge(&x.expected, &obs);
                        ExpectationResult {
                            operation: x.operation.clone(),
                            expected: x.expected.clone(),
                            origin: x.origin.clone(),
                            observed: Some(obs),
                            pass,
                            margin,
                            error: None,
                        }
                    }
                    Err(e) => ExpectationResult {
                        operation: x.operation.clone(),
                        expected: x.expected.clone(),
                        origin: x.origin.clone(),
                        observed: None,
                        pass: false,
                        margin: None,
                        error: Some(e.to_string()),
                    },
                })
                .collect()
        }
    };
    let passed = results.iter().filter(|r| r.pass).count();
    EntryReport {
        id: entry.id.clone(),
        notes: entry.notes.clone(),
        failed: results.len() - passed,
        passed,
        results,
    }
}

/// Runs the selected entries (all when `selection` is empty).
pub fn run_corpus(selection: &[String], seed: u64) -> Result<CorpusReport> {
    let all = entries()?;
    for s in selection {
        if !all.iter().any(|e| &e.id == s) {
            return Err(Error::InvalidParameter(format!("no corpus entry {s}")));
        }
    }
    let chosen: Vec<&CorpusEntry> = all
        .iter()
        .filter(|e| selection.is_empty() || selection.contains(&e.id))
        .collect();
    let reports: Vec<EntryReport> = chosen.par_iter().map(|e| run_entry(e, seed)).collect();
    let passed = reports.iter().map(|r| r.passed).sum();
    let failed: usize = reports.iter().map(|r| r.failed).sum();
    Ok(CorpusReport {
        seed,
        entries: reports,
        passed,
        failed,
        all_pass: failed == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_parses() {
        for n in fixture_names() {
            fixture(n).unwrap();
        }
        assert!(entries().unwrap().len() >= 8);
    }

    #[test]
    fn judging() {
        assert_eq!(judge(&Expected::AtMost { value: 1.0 }, &num(0.5)), (true, Some(0.5)));
        assert!(!judge(&Expected::Within { value: 1.0, tol: 0.1 }, &num(1.2)).0);
        assert!(judge(&Expected::Certificate { verdict: "holds".into() }, &word("holds")).0);
    }

    #[test]
    fn unknown_entry() {
        assert!(run_corpus(&["nope".into()], 0).is_err());
    }
}

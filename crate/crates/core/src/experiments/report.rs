use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::numeric::log_log_slope;

use super::{
    AtomScanReport, BilipschitzReport, CantorReport, CounterexampleReport, DerivativeReport,
    NearlyInvariantReport, SeparatedSetReport, SpectrumReport, WassersteinReport,
};

/// Current report schema version.
pub const SCHEMA: u32 = 1;

/// Distances at or below this count as exactly zero.
pub const ZERO_DISTANCE: f64 = 1e-14;

/// Anything whose verdict can be recomputed from its stored data.
pub trait Check {
    fn passes(&self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// `(parameter, distance)` series judged by its log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    /// Sorted by decreasing parameter.
    pub samples: Vec<(f64, f64)>,
    /// Discretization floor of each sample.
    pub floors: Vec<f64>,
    pub fitted_slope: Option<f64>,
    pub threshold: f64,
    /// Optional upper limit on the slope.
    pub upper: Option<f64>,
    /// A series vanishing to within `FLOOR_FACTOR` floors passes as `o(t)` when set.
    pub zero_passes: bool,
    pub verdict: Verdict,
}

/// Distances within this many floors of zero are indistinguishable from it.
pub const FLOOR_FACTOR: f64 = 10.0;

impl SlopeReport {
    pub fn new(samples: Vec<(f64, f64)>, floors: Vec<f64>, threshold: f64, upper: Option<f64>, zero_passes: bool) -> Self {
        assert_eq!(samples.len(), floors.len(), "one floor per sample");
        let mut rows: Vec<((f64, f64), f64)> = samples.into_iter().zip(floors).collect();
        rows.sort_by(|a, b| b.0 .0.total_cmp(&a.0 .0));
        let (samples, floors): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let mut r = Self {
            fitted_slope: log_log_slope(&samples),
            samples,
            floors,
            threshold,
            upper,
            zero_passes,
            verdict: Verdict::Fail,
        };
        r.verdict = Verdict::from_bool(r.passes());
        r
    }

    /// Same floor for every sample.
    pub fn with_floor(samples: Vec<(f64, f64)>, floor: f64, threshold: f64, upper: Option<f64>, zero_passes: bool) -> Self {
        let floors = vec![floor; samples.len()];
        Self::new(samples, floors, threshold, upper, zero_passes)
    }

    /// Every distance is within `FLOOR_FACTOR` floors of zero.
    pub fn is_within_floor(&self) -> bool {
        self.samples
            .iter()
            .zip(&self.floors)
            .all(|(s, f)| s.1 <= ZERO_DISTANCE.max(FLOOR_FACTOR * f))
    }
}

impl Check for SlopeReport {
    fn passes(&self) -> bool {
        if self.samples.len() != self.floors.len() || self.samples.iter().any(|s| !(s.1 >= 0.0)) {
            return false;
        }
        if self.zero_passes && self.is_within_floor() {
            return true;
        }
        match log_log_slope(&self.samples) {
            Some(s) => s >= self.threshold && self.upper.is_none_or(|u| s <= u),
            None => false,
        }
    }
}

/// Serialized experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub name: String,
    pub params: Value,
    pub samples: Value,
    pub verdict: Verdict,
}

impl Report {
    pub fn new<T: Serialize + Check>(name: &str, params: Value, body: &T) -> Result<Self> {
        Ok(Self {
            schema: SCHEMA,
            name: name.to_string(),
            params,
            samples: serde_json::to_value(body)?,
            verdict: Verdict::from_bool(body.passes()),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(s)?;
        if r.schema != SCHEMA {
            return Err(Error::Parse(format!("unsupported report schema {}", r.schema)));
        }
        Ok(r)
    }

    /// Recomputes the verdict from the stored samples.
    pub fn recompute(&self) -> Result<Verdict> {
        fn re<T: DeserializeOwned + Check>(v: &Value) -> Result<Verdict> {
            let body: T = serde_json::from_value(v.clone())?;
            Ok(Verdict::from_bool(body.passes()))
        }
        match self.name.as_str() {
            "wasserstein" => re::<WassersteinReport>(&self.samples),
            "derivative-check" => re::<DerivativeReport>(&self.samples),
            "convex-split" => re::<SlopeReport>(&self.samples),
            "counterexample" => re::<CounterexampleReport>(&self.samples),
            "nearly-invariant" => re::<NearlyInvariantReport>(&self.samples),
            "mdim" => re::<SeparatedSetReport>(&self.samples),
            "atoms" => re::<AtomScanReport>(&self.samples),
            "cantor" => re::<CantorReport>(&self.samples),
            "spectrum" => re::<SpectrumReport>(&self.samples),
            "bilipschitz" => re::<BilipschitzReport>(&self.samples),
            other => Err(Error::Parse(format!("unknown report name {other:?}"))),
        }
    }

    /// Whether the stored verdict agrees with the recomputed one.
    pub fn verify(&self) -> Result<bool> {
        Ok(self.recompute()? == self.verdict)
    }

    /// `t,distance` lines for slope-type reports.
    pub fn to_csv(&self) -> Result<String> {
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        let push = |label: &str, v: &Value, out: &mut Vec<(String, Vec<(f64, f64)>)>| -> Result<()> {
            let s: SlopeReport = serde_json::from_value(v.clone())?;
            out.push((label.to_string(), s.samples));
            Ok(())
        };
        match self.name.as_str() {
            "derivative-check" => {
                push("main", &self.samples["main"], &mut series)?;
                push("control", &self.samples["control"], &mut series)?;
            }
            "convex-split" => push("main", &self.samples, &mut series)?,
            "nearly-invariant" => push("ratio", &self.samples["distances"], &mut series)?,
            other => return Err(Error::Invalid(format!("report {other:?} has no (t, distance) series"))),
        }
        let mut out = String::from("series,t,distance\n");
        for (label, s) in series {
            for (t, d) in s {
                out.push_str(&format!("{label},{t:e},{d:e}\n"));
            }
        }
        Ok(out)
    }
}

//! JSON run reports and CSV trace dumps.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::decouple::Estimate;
use crate::error::{Error, Result};

/// Field holding the wall-clock time; excluded from reproducibility checks.
pub const TIMESTAMP_FIELD: &str = "generated_at";

/// One run: the echoed configuration and whatever the subcommand produced.
#[derive(Clone, Debug, Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub generated_at: u64,
    pub config: C,
    pub result: R,
}

impl<C: Serialize, R: Serialize> Report<C, R> {
    pub fn new(config: C, result: R) -> Self {
        Report {
            tool: "varinf",
            version: env!("CARGO_PKG_VERSION"),
            generated_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config,
            result,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// The report with the timestamp removed, for comparing two runs.
pub fn without_timestamp(json: &str) -> Result<serde_json::Value> {
    let mut v: serde_json::Value = serde_json::from_str(json).map_err(|e| Error::Io(e.to_string()))?;
    if let Some(o) = v.as_object_mut() {
        o.remove(TIMESTAMP_FIELD);
    }
    Ok(v)
}

/// `quantity,s_size,delta,value` rows for every trace point. Quasi traces
/// carry their `ρ` in the quantity name.
pub fn traces_csv(estimates: &[&Estimate]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["quantity", "s_size", "delta", "value"]).map_err(io)?;
    for e in estimates {
        for t in &e.trace {
            let q = match t.rho {
                Some(r) => format!("{}[rho={r}]", e.quantity),
                None => e.quantity.clone(),
            };
            let d = t.delta.map(|d| d.to_string()).unwrap_or_default();
            w.write_record([q, t.s_size.to_string(), d, t.value.to_string()])
                .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decouple::{BoundDirection, TracePoint, Verdict};
    use crate::ext::LimitValue;

    #[test]
    fn csv_rows() {
        let e = Estimate {
            quantity: "lambda".into(),
            value: LimitValue::NEG_INFINITY,
            bound_direction: BoundDirection::UpperBoundOfInf,
            verdict: Verdict::NegativeInfinityDiverging,
            trace: vec![TracePoint {
                s_size: 2,
                delta: Some(0.5),
                rho: None,
                value: LimitValue::NEG_INFINITY,
            }],
            prefix_values: vec![],
            witness: None,
            witness_trace: vec![],
            heuristic: false,
            notes: vec![],
        };
        let s = traces_csv(&[&e]).unwrap();
        assert_eq!(s, "quantity,s_size,delta,value\nlambda,2,0.5,-inf\n");
    }

    #[test]
    fn timestamp_is_dropped() {
        let r = Report::new(1, 2).to_json().unwrap();
        let v = without_timestamp(&r).unwrap();
        assert!(v.get(TIMESTAMP_FIELD).is_none());
        assert_eq!(v["result"], 2);
    }
}

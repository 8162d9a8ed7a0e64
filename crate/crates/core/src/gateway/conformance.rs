use serde::{Deserialize, Serialize};

use super::client::{predict_direct, RemotePredictor};
use crate::types::{Predictor, ProbabilityDistribution};

const FIXTURE: &[&str] = &[
    "The company reported a sharp rise in quarterly profit.",
    "Sales fell and losses widened for the third year.",
    "The results were in line with expectations.",
    "great",
    "terrible",
    "",
];

/// Distributions equal within this tolerance count as the same answer.
pub const ORDER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub endpoint: String,
    pub model: String,
    pub probes: Vec<ProbeResult>,
}

impl ConformanceReport {
    pub fn all_passed(&self) -> bool {
        self.probes.iter().all(|p| p.passed)
    }
}

impl std::fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "conformance of `{}` at {}", self.model, self.endpoint)?;
        for p in &self.probes {
            writeln!(
                f,
                "  {} {}: {}",
                if p.passed { "PASS" } else { "FAIL" },
                p.name,
                p.detail
            )?;
        }
        Ok(())
    }
}

fn close(a: &ProbabilityDistribution, b: &ProbabilityDistribution) -> bool {
    a.len() == b.len()
        && a.probs()
            .iter()
            .zip(b.probs())
            .all(|(x, y)| (x - y).abs() <= ORDER_TOLERANCE)
}

fn probe(name: &str, outcome: Result<String, String>) -> ProbeResult {
    let (passed, detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    ProbeResult {
        name: name.into(),
        passed,
        detail,
    }
}

/// Fixed fixture plus the advertised mask token, label names and `extra`.
fn fixture(predictor: &RemotePredictor, extra: &[String]) -> Vec<String> {
    let h = predictor.handle();
    let mut texts: Vec<String> = FIXTURE.iter().map(|s| s.to_string()).collect();
    texts.push(h.mask_token.clone());
    texts.push(format!(
        "{} {}",
        h.label_set.names().join(" "),
        h.mask_token
    ));
    texts.extend(h.label_set.names());
    texts.extend(extra.iter().cloned());
    texts
}

fn determinism(p: &RemotePredictor, texts: &[String]) -> Result<String, String> {
    let first = predict_direct(p, texts).map_err(|e| e.to_string())?;
    let second = predict_direct(p, texts).map_err(|e| e.to_string())?;
    for (i, (a, b)) in first.iter().zip(&second).enumerate() {
        if a.probs() != b.probs() {
            return Err(format!(
                "text {i} answered {:?} then {:?}",
                a.probs(),
                b.probs()
            ));
        }
    }
    Ok(format!("{} texts answered identically twice", texts.len()))
}

fn validity(p: &RemotePredictor, texts: &[String]) -> Result<String, String> {
    // The client rejects invalid rows as protocol violations.
    predict_direct(p, texts)
        .map(|d| {
            format!(
                "{} distributions over {} labels valid",
                d.len(),
                p.handle().label_set.len()
            )
        })
        .map_err(|e| e.to_string())
}

fn order(p: &RemotePredictor, texts: &[String]) -> Result<String, String> {
    let batched = predict_direct(p, texts).map_err(|e| e.to_string())?;
    let mut singles = Vec::with_capacity(texts.len());
    for t in texts {
        let d = predict_direct(p, std::slice::from_ref(t)).map_err(|e| e.to_string())?;
        singles.push(d.into_iter().next().expect("one row"));
    }
    for (i, (a, b)) in batched.iter().zip(&singles).enumerate() {
        if !close(a, b) {
            return Err(format!(
                "row {i} of a {}-text batch differs from the text sent alone",
                texts.len()
            ));
        }
    }
    let distinct = singles.iter().skip(1).any(|d| !close(d, &singles[0]));
    Ok(if distinct {
        format!("{} batched rows match per-text answers", texts.len())
    } else {
        "every fixture text gets the same distribution; ordering is not observable".into()
    })
}

/// Runs the determinism, validity and order probes against the server,
/// bypassing any client cache.
pub fn conformance_check(predictor: &RemotePredictor, extra_texts: &[String]) -> ConformanceReport {
    let texts = fixture(predictor, extra_texts);
    ConformanceReport {
        endpoint: predictor.endpoint().base_url.clone(),
        model: predictor.name().to_string(),
        probes: vec![
            probe("determinism", determinism(predictor, &texts)),
            probe("validity", validity(predictor, &texts)),
            probe("order", order(predictor, &texts)),
        ],
    }
}

//! Terminal heatmaps, standalone HTML and JSON export of attributions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attribution::{rank_features, top_k, AttributionResult, ComparisonTable, DEFAULT_TOP_K};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderSpec {
    pub k: usize,
    /// Colour positions whose masking raised the reference confidence.
    pub show_deteriorating: bool,
    /// ANSI colour; when off, top-k tokens are bracketed instead.
    pub color: bool,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            k: DEFAULT_TOP_K,
            show_deteriorating: false,
            color: true,
        }
    }
}

impl RenderSpec {
    /// Defaults, with colour disabled when `NO_COLOR` is set and non-empty.
    pub fn from_env() -> Self {
        let no_color = std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty());
        Self {
            color: !no_color,
            ..Self::default()
        }
    }
}

/// `max(importance, 0) / max importance`, or all zeros when no importance
/// is positive.
pub fn normalize_intensity(result: &AttributionResult) -> Vec<f64> {
    scaled(&result.importances, |v| v.max(0.0))
}

/// Same rule applied to the magnitude of negative importances.
pub fn normalize_deterioration(result: &AttributionResult) -> Vec<f64> {
    scaled(&result.importances, |v| (-v).max(0.0))
}

fn scaled(values: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let clipped: Vec<f64> = values.iter().map(|&v| f(v)).collect();
    let max = clipped.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        clipped.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; values.len()]
    }
}

fn top_positions(result: &AttributionResult, k: usize) -> Vec<bool> {
    let mut marked = vec![false; result.tokens.len()];
    for f in top_k(&rank_features(result), k) {
        marked[f.position] = true;
    }
    marked
}

/// Background ramp from dark red to bright yellow.
const WARM_RAMP: [u8; 10] = [52, 88, 124, 160, 196, 202, 208, 214, 220, 226];
/// Background ramp for deteriorating tokens.
const COOL_RAMP: [u8; 5] = [17, 18, 19, 20, 21];

fn ramp_color(ramp: &[u8], intensity: f64) -> u8 {
    let i = (intensity * ramp.len() as f64).ceil() as usize;
    ramp[i.clamp(1, ramp.len()) - 1]
}

pub fn render_ansi(result: &AttributionResult, spec: &RenderSpec) -> String {
    let intensity = normalize_intensity(result);
    let deterioration = normalize_deterioration(result);
    let marked = top_positions(result, spec.k);
    let mut out = String::new();
    for (i, token) in result.tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if !spec.color {
            if marked[i] {
                let _ = write!(out, "[{token}]");
            } else {
                out.push_str(token);
            }
            continue;
        }
        let mut codes = Vec::new();
        if marked[i] {
            codes.push("4".to_string());
        }
        if intensity[i] > 0.0 {
            codes.push(format!("30;48;5;{}", ramp_color(&WARM_RAMP, intensity[i])));
        } else if spec.show_deteriorating && deterioration[i] > 0.0 {
            codes.push(format!(
                "97;48;5;{}",
                ramp_color(&COOL_RAMP, deterioration[i])
            ));
        }
        if codes.is_empty() {
            out.push_str(token);
        } else {
            let _ = write!(out, "\x1b[{}m{token}\x1b[0m", codes.join(";"));
        }
    }
    out.push('\n');
    let shown = spec.k.max(1).min(result.tokens.len());
    let reference = format!(
        "reference: {} ({:.4}) | predictor: {}",
        result.reference.argmax.name,
        result.reference_confidence(),
        result.predictor
    );
    if spec.color {
        let _ = writeln!(
            out,
            "legend: \x1b[30;48;5;{}m low \x1b[0m\x1b[30;48;5;{}m high \x1b[0m importance, \x1b[4munderlined\x1b[0m = top {shown} | {reference}",
            WARM_RAMP[0],
            WARM_RAMP[WARM_RAMP.len() - 1]
        );
    } else {
        let _ = writeln!(out, "legend: [bracketed] = top {shown} | {reference}");
    }
    out
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em;color:#222}\
.heatmap{line-height:2em}\
.tok{padding:0.1em 0.2em;border-radius:3px}\
.top{border-bottom:2px solid #000;font-weight:bold}\
.meta{color:#555;font-size:0.9em}\
table{border-collapse:collapse}\
th,td{border:1px solid #999;padding:0.3em 0.8em;text-align:left}\
.empty{color:#777;font-style:italic}";

fn document(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\" />\n<title>{}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n{body}</body>\n</html>\n",
        escape(title)
    )
}

fn heatmap(result: &AttributionResult, spec: &RenderSpec) -> String {
    let intensity = normalize_intensity(result);
    let deterioration = normalize_deterioration(result);
    let marked = top_positions(result, spec.k);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<section>\n<h2>{}</h2>\n<p class=\"meta\">predictor {} | reference {} ({:.4})</p>",
        escape(&result.doc_id),
        escape(&result.predictor),
        escape(&result.reference.argmax.name),
        result.reference_confidence()
    );
    out.push_str("<p class=\"heatmap\">");
    for (i, token) in result.tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let background = if intensity[i] > 0.0 {
            format!("rgba(255,140,0,{:.3})", intensity[i])
        } else if spec.show_deteriorating && deterioration[i] > 0.0 {
            format!("rgba(60,110,255,{:.3})", deterioration[i])
        } else {
            "transparent".to_string()
        };
        let class = if marked[i] { "tok top" } else { "tok" };
        let _ = write!(
            out,
            "<span class=\"{class}\" style=\"background-color:{background}\" title=\"{:.6}\">{}</span>",
            result.importances[i],
            escape(token)
        );
    }
    out.push_str("</p>\n</section>\n");
    out
}

/// One heatmap section per result, or an empty-state message.
pub fn render_html(results: &[AttributionResult], spec: &RenderSpec) -> String {
    let mut body = String::from("<h1>Feature importance</h1>\n");
    if results.is_empty() {
        body.push_str("<p class=\"empty\">No attribution results to display.</p>\n");
    }
    for r in results {
        body.push_str(&heatmap(r, spec));
    }
    document("Feature importance", &body)
}

/// One column per predictor with its top-k words in rank order.
pub fn render_comparison_html(table: &ComparisonTable) -> String {
    let mut body = String::new();
    let _ = writeln!(
        body,
        "<h1>Comparison of feature importance across {} models</h1>\n<p class=\"meta\">{}</p>\n<p>{}</p>",
        table.columns.len(),
        escape(&table.doc_id),
        escape(&table.text)
    );
    body.push_str("<table>\n<thead>\n<tr><th>Rank</th>");
    for c in &table.columns {
        let _ = write!(body, "<th>{}</th>", escape(&c.predictor));
    }
    body.push_str("</tr>\n<tr><th>Prediction</th>");
    for c in &table.columns {
        let _ = write!(
            body,
            "<td>{} ({:.4})</td>",
            escape(&c.reference.argmax.name),
            c.reference.confidence()
        );
    }
    body.push_str("</tr>\n</thead>\n<tbody>\n");
    for rank in 0..table.k {
        let _ = write!(body, "<tr><th>{}</th>", rank + 1);
        for c in &table.columns {
            match c.top.get(rank) {
                Some(f) => {
                    let _ = write!(
                        body,
                        "<td title=\"{:.6}\">{}</td>",
                        f.importance,
                        escape(&f.token)
                    );
                }
                None => body.push_str("<td></td>"),
            }
        }
        body.push_str("</tr>\n");
    }
    let _ = writeln!(
        body,
        "</tbody>\n<caption>Top {} words</caption>\n</table>",
        table.k
    );
    document("Feature importance comparison", &body)
}

/// Rounds to 12 significant digits.
pub fn round_sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedReference {
    pub label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedToken {
    pub pos: usize,
    pub text: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedResult {
    pub doc_id: String,
    pub predictor: String,
    pub reference: ExportedReference,
    pub tokens: Vec<ExportedToken>,
}

impl From<&AttributionResult> for ExportedResult {
    fn from(r: &AttributionResult) -> Self {
        Self {
            doc_id: r.doc_id.clone(),
            predictor: r.predictor.clone(),
            reference: ExportedReference {
                label: r.reference.argmax.name.clone(),
                confidence: r.reference_confidence(),
            },
            tokens: r
                .tokens
                .iter()
                .zip(&r.importances)
                .enumerate()
                .map(|(pos, (text, &importance))| ExportedToken {
                    pos,
                    text: text.clone(),
                    importance,
                })
                .collect(),
        }
    }
}

/// Canonical JSON array with floats rounded to 12 significant digits.
pub fn export_records(records: &[ExportedResult]) -> String {
    let rounded: Vec<ExportedResult> = records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.reference.confidence = round_sig12(r.reference.confidence);
            for t in &mut r.tokens {
                t.importance = round_sig12(t.importance);
            }
            r
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&rounded).expect("plain data serializes");
    out.push('\n');
    out
}

pub fn export_json(results: &[AttributionResult]) -> String {
    let records: Vec<ExportedResult> = results.iter().map(ExportedResult::from).collect();
    export_records(&records)
}

pub fn parse_json(text: &str) -> Result<Vec<ExportedResult>> {
    serde_json::from_str(text).map_err(Error::from)
}

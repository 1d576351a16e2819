//! Report model and the JSON/CSV writers.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use countrate::rating::OverallContext;
use countrate::{BucketFlag, Grade, GradeValues, GroupRating, MetricKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingReport {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub config: RunConfig,
    pub input: InputSummary,
    pub groups: Vec<GroupReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub source: String,
    pub n_pairs: usize,
    pub n_clipped: usize,
    pub total_prediction: f64,
    pub total_actual: u64,
    pub n_groups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub name: String,
    pub labels: BTreeMap<String, String>,
    pub n_pairs: usize,
    pub n_clipped: usize,
    pub total_prediction: f64,
    pub total_actual: u64,
    pub overall: OverallReport,
    /// Overall metrics next to the values expected under each grade.
    pub metrics: Vec<MetricContext>,
    pub buckets: Vec<BucketReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallReport {
    pub noise_metric: MetricKind,
    pub noise_score: Option<f64>,
    pub noise_grade: Option<Grade>,
    pub bias_score: Option<f64>,
    pub bias_grade: Option<Grade>,
    pub bias_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricContext {
    pub metric: MetricKind,
    pub achieved: Option<f64>,
    pub references: GradeValues,
    /// Best grade whose reference the achieved value does not exceed.
    pub band: Option<Grade>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub log_rate: f64,
    pub index: i64,
    pub n_bins: u32,
    pub center_rate: f64,
    pub n: usize,
    pub total_prediction: f64,
    pub total_actual: u64,
    pub weight: f64,
    pub noise_score: Option<f64>,
    pub bias_factor: Option<f64>,
    pub bias_score: Option<f64>,
    pub flags: Vec<BucketFlag>,
    pub metrics: Vec<BucketMetric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketMetric {
    pub metric: MetricKind,
    pub achieved: Option<f64>,
    pub references: GradeValues,
}

pub fn group_name(labels: &BTreeMap<String, String>) -> String {
    if labels.is_empty() {
        return "all".into();
    }
    labels
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

impl GroupReport {
    pub fn new(labels: BTreeMap<String, String>, rating: &GroupRating) -> Self {
        let o = &rating.overall;
        let metrics = o
            .achieved
            .iter()
            .map(|(&metric, &achieved)| {
                let references = o.references[&metric];
                let band = OverallContext {
                    metric,
                    achieved,
                    references,
                }
                .band();
                MetricContext {
                    metric,
                    achieved,
                    references,
                    band,
                }
            })
            .collect();
        let buckets = rating
            .buckets
            .iter()
            .map(|b| BucketReport {
                log_rate: b.log_rate,
                index: b.key.index(),
                n_bins: b.key.n_bins(),
                center_rate: b.center_rate,
                n: b.n,
                total_prediction: b.total_prediction,
                total_actual: b.total_actual,
                weight: b.weight,
                noise_score: b.noise_score,
                bias_factor: b.bias_factor,
                bias_score: b.bias_score,
                flags: b.flags.iter().copied().collect(),
                metrics: b
                    .achieved
                    .iter()
                    .map(|(&metric, &achieved)| BucketMetric {
                        metric,
                        achieved,
                        references: b.references[&metric],
                    })
                    .collect(),
            })
            .collect();
        Self {
            name: group_name(&labels),
            labels,
            n_pairs: rating.n_pairs,
            n_clipped: rating.n_clipped,
            total_prediction: rating.total_prediction,
            total_actual: rating.total_actual,
            overall: OverallReport {
                noise_metric: o.noise_metric,
                noise_score: o.noise_score,
                noise_grade: o.noise_grade,
                bias_score: o.bias_score,
                bias_grade: o.bias_grade,
                bias_factor: o.bias_factor,
            },
            metrics,
            buckets,
        }
    }
}

/// Rounds to 6 significant digits.
pub fn round6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round6).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

pub fn report_json(report: &RatingReport, raw: bool) -> Result<String, CliError> {
    let mut value = serde_json::to_value(report).map_err(|e| CliError::io(e.to_string()))?;
    if !raw {
        round_floats(&mut value);
    }
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::io(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn fmt_num(x: f64, raw: bool) -> String {
    if raw {
        format!("{x}")
    } else {
        format!("{}", round6(x))
    }
}

pub fn fmt_opt(x: Option<f64>, raw: bool) -> String {
    x.map_or_else(String::new, |v| fmt_num(v, raw))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::io(format!("cannot write in {}: {e}", dir.display())))?;
    tmp.write_all(contents)?;
    tmp.persist(path)
        .map_err(|e| CliError::io(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

fn csv_bytes(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::io(e.to_string());
    w.write_record(&header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::io(e.to_string()))
}

fn flag_list(flags: &[BucketFlag]) -> String {
    flags
        .iter()
        .map(|f| serde_json::to_value(f).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
        .collect::<Vec<_>>()
        .join(";")
}

fn grade_columns(prefix: &str) -> Vec<String> {
    Grade::ALL.iter().map(|g| format!("{prefix}{}", g.name())).collect()
}

/// One row per bucket and group.
pub fn buckets_csv(report: &RatingReport, raw: bool) -> Result<Vec<u8>, CliError> {
    let kinds: Vec<MetricKind> = report
        .groups
        .first()
        .map(|g| g.metrics.iter().map(|m| m.metric).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "group", "log_rate", "index", "n_bins", "center_rate", "n", "total_prediction",
        "total_actual", "weight", "noise_score", "bias_factor", "bias_score", "flags",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in &kinds {
        header.push(format!("{k}_achieved"));
        header.extend(grade_columns(&format!("{k}_")));
    }
    let mut rows = Vec::new();
    for g in &report.groups {
        for b in &g.buckets {
            let mut row = vec![
                g.name.clone(),
                fmt_num(b.log_rate, raw),
                b.index.to_string(),
                b.n_bins.to_string(),
                fmt_num(b.center_rate, raw),
                b.n.to_string(),
                fmt_num(b.total_prediction, raw),
                b.total_actual.to_string(),
                fmt_num(b.weight, raw),
                fmt_opt(b.noise_score, raw),
                fmt_opt(b.bias_factor, raw),
                fmt_opt(b.bias_score, raw),
                flag_list(&b.flags),
            ];
            for m in &b.metrics {
                row.push(fmt_opt(m.achieved, raw));
                row.extend(m.references.to_array().iter().map(|v| fmt_num(*v, raw)));
            }
            rows.push(row);
        }
    }
    csv_bytes(header, rows)
}

/// Long format: bucket rate against achieved metric and its references.
pub fn plot_metrics_csv(report: &RatingReport, raw: bool) -> Result<Vec<u8>, CliError> {
    let mut header: Vec<String> = ["group", "metric", "log_rate", "center_rate", "weight", "achieved"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(grade_columns("ref_"));
    header.push("noise_score".into());
    let mut rows = Vec::new();
    for g in &report.groups {
        for b in &g.buckets {
            for m in &b.metrics {
                let mut row = vec![
                    g.name.clone(),
                    m.metric.to_string(),
                    fmt_num(b.log_rate, raw),
                    fmt_num(b.center_rate, raw),
                    fmt_num(b.weight, raw),
                    fmt_opt(m.achieved, raw),
                ];
                row.extend(m.references.to_array().iter().map(|v| fmt_num(*v, raw)));
                row.push(if m.metric == g.overall.noise_metric {
                    fmt_opt(b.noise_score, raw)
                } else {
                    String::new()
                });
                rows.push(row);
            }
        }
    }
    csv_bytes(header, rows)
}

/// Bias factor per bucket, also clipped to `[1/clip, clip]` for plotting.
pub fn plot_bias_csv(report: &RatingReport, clip: f64, raw: bool) -> Result<Vec<u8>, CliError> {
    let header = [
        "group", "log_rate", "center_rate", "weight", "bias_factor", "bias_factor_clipped",
        "bias_score",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut rows = Vec::new();
    for g in &report.groups {
        for b in &g.buckets {
            rows.push(vec![
                g.name.clone(),
                fmt_num(b.log_rate, raw),
                fmt_num(b.center_rate, raw),
                fmt_num(b.weight, raw),
                fmt_opt(b.bias_factor, raw),
                fmt_opt(b.bias_factor.map(|f| f.clamp(1.0 / clip, clip)), raw),
                fmt_opt(b.bias_score, raw),
            ]);
        }
    }
    csv_bytes(header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(round6(1.00361234), 1.00361);
        assert_eq!(round6(123456789.0), 123457000.0);
        assert_eq!(round6(0.000123456789), 0.000123457);
        assert_eq!(round6(0.0), 0.0);
        assert_eq!(fmt_num(2.0 / 3.0, false), "0.666667");
    }

    #[test]
    fn raw_report_round_trips() {
        use countrate::datagen::{gen_graded_pairs, GenSpec, RateLaw};
        use countrate::{GradeLadder, Rater};

        let cfg = RunConfig::default();
        let spec = GenSpec {
            grade: Some(Grade::Fair),
            ..GenSpec::poisson(1, 3000, RateLaw::LogUniform { low: 0.01, high: 30.0 })
        };
        let pairs = gen_graded_pairs(&spec, &GradeLadder::default()).unwrap();
        let rating = Rater::new(cfg.validate().unwrap()).unwrap().rate(&pairs).unwrap();
        let group = GroupReport::new(BTreeMap::new(), &rating);
        let report = RatingReport {
            schema_version: SCHEMA_VERSION,
            tool: ToolInfo { name: "t".into(), version: "0".into() },
            config: cfg,
            input: InputSummary {
                source: "mem".into(),
                n_pairs: group.n_pairs,
                n_clipped: group.n_clipped,
                total_prediction: group.total_prediction,
                total_actual: group.total_actual,
                n_groups: 1,
            },
            groups: vec![group],
        };
        let text = report_json(&report, true).unwrap();
        let back: RatingReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.ladder.variances_at_10 = [10.0, 11.0, 12.5, 20.0, 40.0, 80.0, 160.0];
        cfg.sub_poissonian = crate::config::SubPoissonSetting::Critical(55.0);
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn group_names() {
        assert_eq!(group_name(&BTreeMap::new()), "all");
        let labels = BTreeMap::from([("b".to_string(), "2".to_string()), ("a".to_string(), "1".to_string())]);
        assert_eq!(group_name(&labels), "a=1,b=2");
    }
}

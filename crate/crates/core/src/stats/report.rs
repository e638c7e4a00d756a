//! Mode-comparison tables: per-mode summaries, Holm-corrected paired tests,
//! per-speaker difference triples and their correlations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::holm::holm_bonferroni;
use super::paired::{linear_fit, mean_std, paired_ttest, pearson_r, syllable_rate, PairedSeries};
use crate::corpus::{Mode, UtteranceRecord};
use crate::error::{Error, Result};
use crate::svg;

pub const METRIC_RATE: &str = "syllable_rate";
pub const METRIC_HULL: &str = "hull_area";
pub const METRIC_WER: &str = "wer";

pub struct ReportInputs<'a> {
    /// Utterances to compare, typically the mode-matched test sets.
    pub records: &'a [UtteranceRecord],
    pub hull_area: &'a BTreeMap<(String, Mode), f64>,
    pub wer: &'a BTreeMap<(String, Mode), f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub mode: Mode,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub metric: String,
    pub mode_a: Mode,
    pub mode_b: Mode,
    pub n: usize,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub p_holm: f64,
    pub reject: bool,
    pub degenerate: bool,
    pub mean_diff: f64,
}

/// Per-speaker differences reference-mode minus `mode`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferenceRow {
    pub speaker: String,
    pub mode: Mode,
    pub d_wer: Option<f64>,
    pub d_syllable_rate: f64,
    pub d_hull_area: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub mode: Mode,
    pub x: String,
    pub y: String,
    pub n: usize,
    pub r: f64,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub alpha: f64,
    pub summary: Vec<SummaryRow>,
    pub tests: Vec<TestRow>,
    pub differences: Vec<DifferenceRow>,
    pub correlations: Vec<CorrelationRow>,
    /// Paired per-utterance syllable rates (reference, other) per compared mode.
    pub rate_pairs: Vec<(Mode, Vec<(f64, f64)>)>,
    /// Paired per-speaker hull areas (reference, other) per compared mode.
    pub hull_pairs: Vec<(Mode, Vec<(f64, f64)>)>,
}

fn summarize(metric: &str, mode: Mode, values: &[f64]) -> Option<SummaryRow> {
    if values.is_empty() {
        return None;
    }
    let (mean, std) = mean_std(values);
    Some(SummaryRow {
        metric: metric.into(),
        mode,
        n: values.len(),
        mean,
        std,
    })
}

/// Utterance key used to pair productions of the same prompt by the same
/// speaker across modes; repeated prompts pair by occurrence order.
fn utterance_rates(records: &[UtteranceRecord], mode: Mode) -> Result<BTreeMap<(String, String, usize), f64>> {
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for r in records.iter().filter(|r| r.mode == mode) {
        let k = (r.speaker.clone(), r.prompt_key());
        let occ = seen.entry(k.clone()).or_default();
        out.insert((k.0, k.1, *occ), syllable_rate(r)?);
        *occ += 1;
    }
    Ok(out)
}

fn speaker_mean_rates(records: &[UtteranceRecord], mode: Mode) -> Result<BTreeMap<String, f64>> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.mode == mode) {
        let e = acc.entry(r.speaker.clone()).or_default();
        e.0 += syllable_rate(r)?;
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
}

fn speaker_values(map: &BTreeMap<(String, Mode), f64>, mode: Mode) -> BTreeMap<String, f64> {
    map.iter()
        .filter(|((_, m), _)| *m == mode)
        .map(|((s, _), v)| (s.clone(), *v))
        .collect()
}

fn pair_maps<K: Ord + Clone + std::fmt::Debug>(
    a: &BTreeMap<K, f64>,
    b: &BTreeMap<K, f64>,
) -> (Vec<K>, Vec<f64>, Vec<f64>) {
    let mut keys = vec![];
    let (mut va, mut vb) = (vec![], vec![]);
    for (k, x) in a {
        if let Some(y) = b.get(k) {
            keys.push(k.clone());
            va.push(*x);
            vb.push(*y);
        }
    }
    (keys, va, vb)
}

/// Builds every table of the mode comparison. Tests of one metric across all
/// mode pairs form one Holm-Bonferroni family.
pub fn mode_comparison_report(inputs: &ReportInputs<'_>, alpha: f64) -> Result<ModeReport> {
    let modes: Vec<Mode> = inputs
        .records
        .iter()
        .map(|r| r.mode)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if modes.len() < 2 {
        return Err(Error::invalid("mode comparison needs records from at least two modes"));
    }
    let reference = modes[0];
    let mut report = ModeReport {
        alpha,
        ..Default::default()
    };

    let mut rates = BTreeMap::new();
    for &m in &modes {
        let r = utterance_rates(inputs.records, m)?;
        report
            .summary
            .extend(summarize(METRIC_RATE, m, &r.values().copied().collect::<Vec<_>>()));
        rates.insert(m, r);
    }
    for (metric, map) in [(METRIC_HULL, inputs.hull_area), (METRIC_WER, inputs.wer)] {
        for &m in &modes {
            let v: Vec<f64> = speaker_values(map, m).into_values().collect();
            report.summary.extend(summarize(metric, m, &v));
        }
    }

    // Paired tests, one Holm family per metric.
    for metric in [METRIC_RATE, METRIC_HULL] {
        let mut rows = vec![];
        for (i, &ma) in modes.iter().enumerate() {
            for &mb in &modes[i + 1..] {
                let (keys, va, vb) = if metric == METRIC_RATE {
                    let (k, a, b) = pair_maps(&rates[&ma], &rates[&mb]);
                    (k.into_iter().map(|(s, p, o)| format!("{s}|{p}|{o}")).collect::<Vec<_>>(), a, b)
                } else {
                    pair_maps(&speaker_values(inputs.hull_area, ma), &speaker_values(inputs.hull_area, mb))
                };
                if va.len() < 2 {
                    if metric == METRIC_RATE || !inputs.hull_area.is_empty() {
                        warn!("{metric}: fewer than 2 {ma}/{mb} pairs, test skipped");
                    }
                    continue;
                }
                let series = PairedSeries::new(keys, va.clone(), vb.clone(), ma.as_str(), mb.as_str())?;
                let t = paired_ttest(&series)?;
                if ma == reference {
                    let pairs: Vec<(f64, f64)> = va.into_iter().zip(vb).collect();
                    if metric == METRIC_RATE {
                        report.rate_pairs.push((mb, pairs));
                    } else {
                        report.hull_pairs.push((mb, pairs));
                    }
                }
                rows.push(TestRow {
                    metric: metric.into(),
                    mode_a: ma,
                    mode_b: mb,
                    n: t.n,
                    t: t.t,
                    df: t.df,
                    p: t.p,
                    p_holm: f64::NAN,
                    reject: false,
                    degenerate: t.degenerate,
                    mean_diff: t.mean_diff,
                });
            }
        }
        if rows.is_empty() {
            continue;
        }
        let ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
        let holm = holm_bonferroni(&ps, alpha)?;
        for (i, row) in rows.iter_mut().enumerate() {
            row.p_holm = holm.adjusted[i];
            row.reject = holm.reject[i];
        }
        report.tests.extend(rows);
    }

    // Per-speaker difference triples against the reference mode.
    let ref_rates = speaker_mean_rates(inputs.records, reference)?;
    let ref_hull = speaker_values(inputs.hull_area, reference);
    let ref_wer = speaker_values(inputs.wer, reference);
    for &m in &modes[1..] {
        let rates_m = speaker_mean_rates(inputs.records, m)?;
        let hull_m = speaker_values(inputs.hull_area, m);
        let wer_m = speaker_values(inputs.wer, m);
        let mut rows = vec![];
        for (spk, r0) in &ref_rates {
            let Some(r1) = rates_m.get(spk) else {
                warn!("speaker {spk} has no {m} utterances; excluded from differences");
                continue;
            };
            let diff = |a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>| {
                a.get(spk).zip(b.get(spk)).map(|(x, y)| x - y)
            };
            rows.push(DifferenceRow {
                speaker: spk.clone(),
                mode: m,
                d_wer: diff(&ref_wer, &wer_m),
                d_syllable_rate: r0 - r1,
                d_hull_area: diff(&ref_hull, &hull_m),
            });
        }
        type Pick = fn(&DifferenceRow) -> Option<f64>;
        let combos: [(&str, Pick, &str, Pick); 3] = [
            (METRIC_RATE, |r| Some(r.d_syllable_rate), METRIC_WER, |r| r.d_wer),
            (METRIC_HULL, |r| r.d_hull_area, METRIC_WER, |r| r.d_wer),
            (METRIC_RATE, |r| Some(r.d_syllable_rate), METRIC_HULL, |r| r.d_hull_area),
        ];
        for (xn, xf, yn, yf) in combos {
            let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| xf(r).zip(yf(r))).unzip();
            if xs.len() < 3 {
                continue;
            }
            match (pearson_r(&xs, &ys), linear_fit(&xs, &ys)) {
                (Ok(r), Ok(fit)) => report.correlations.push(CorrelationRow {
                    mode: m,
                    x: xn.into(),
                    y: yn.into(),
                    n: xs.len(),
                    r,
                    slope: fit.slope,
                    intercept: fit.intercept,
                }),
                _ => warn!("{xn} vs {yn} for {m}: constant series, correlation skipped"),
            }
        }
        report.differences.extend(rows);
    }
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

impl ModeReport {
    /// Writes `summary.csv`, `tests.csv`, `differences.csv` and
    /// `correlations.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        let mut s = String::from("metric,mode,n,mean,std\n");
        for r in &self.summary {
            let _ = writeln!(s, "{},{},{},{},{}", r.metric, r.mode, r.n, r.mean, r.std);
        }
        write_file(&dir.join("summary.csv"), &s)?;

        let mut s = String::from("metric,mode_a,mode_b,n,t,df,p,p_holm,reject,degenerate,mean_diff\n");
        for r in &self.tests {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.metric, r.mode_a, r.mode_b, r.n, r.t, r.df, r.p, r.p_holm, r.reject, r.degenerate, r.mean_diff
            );
        }
        write_file(&dir.join("tests.csv"), &s)?;

        let mut s = String::from("speaker,mode,d_wer,d_syllable_rate,d_hull_area\n");
        for r in &self.differences {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.speaker,
                r.mode,
                opt(r.d_wer),
                r.d_syllable_rate,
                opt(r.d_hull_area)
            );
        }
        write_file(&dir.join("differences.csv"), &s)?;

        let mut s = String::from("mode,x,y,n,r,slope,intercept\n");
        for r in &self.correlations {
            let _ = writeln!(s, "{},{},{},{},{},{},{}", r.mode, r.x, r.y, r.n, r.r, r.slope, r.intercept);
        }
        write_file(&dir.join("correlations.csv"), &s)
    }

    /// Histogram and scatter figures: paired values against the identity
    /// line, difference histograms, and difference scatters with the dashed
    /// best-fit line.
    pub fn write_figures(&self, dir: &Path) -> Result<()> {
        for (name, pairs, unit) in [
            ("syllable_rate", &self.rate_pairs, "syllables/s"),
            ("hull_area", &self.hull_pairs, "area"),
        ] {
            for (mode, pts) in pairs {
                let diffs: Vec<f64> = pts.iter().map(|(a, b)| a - b).collect();
                write_file(
                    &dir.join(format!("{name}_diff_hist_{mode}.svg")),
                    &svg::histogram(&diffs, 20, &format!("{name} difference (modal - {mode})"), unit),
                )?;
                write_file(
                    &dir.join(format!("{name}_paired_{mode}.svg")),
                    &svg::scatter(pts, &format!("paired {name}"), "modal", mode.as_str(), true, None),
                )?;
            }
        }
        for c in &self.correlations {
            let pick = |r: &DifferenceRow, what: &str| match what {
                METRIC_RATE => Some(r.d_syllable_rate),
                METRIC_HULL => r.d_hull_area,
                _ => r.d_wer,
            };
            let pts: Vec<(f64, f64)> = self
                .differences
                .iter()
                .filter(|r| r.mode == c.mode)
                .filter_map(|r| pick(r, &c.x).zip(pick(r, &c.y)))
                .collect();
            write_file(
                &dir.join(format!("diff_{}_vs_{}_{}.svg", c.y, c.x, c.mode)),
                &svg::scatter(
                    &pts,
                    &format!("r = {:.4}", c.r),
                    &format!("{} difference", c.x),
                    &format!("{} difference", c.y),
                    false,
                    Some((c.slope, c.intercept)),
                ),
            )?;
        }
        Ok(())
    }
}

fn rows_of(path: &Path, expected_header: &str) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != expected_header {
        return Err(Error::parse(path.display().to_string(), format!("unexpected header '{header}'")));
    }
    Ok(lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::parse(format!("{}:{}", path.display(), line + 2), format!("bad field '{v}'")))
}

fn opt_field(path: &Path, line: usize, v: &str) -> Result<Option<f64>> {
    if v.is_empty() {
        Ok(None)
    } else {
        field(path, line, v).map(Some)
    }
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    rows_of(path, "metric,mode,n,mean,std")?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(SummaryRow {
                metric: r[0].clone(),
                mode: r[1].parse()?,
                n: field(path, i, &r[2])?,
                mean: field(path, i, &r[3])?,
                std: field(path, i, &r[4])?,
            })
        })
        .collect()
}

pub fn read_tests_csv(path: &Path) -> Result<Vec<TestRow>> {
    rows_of(path, "metric,mode_a,mode_b,n,t,df,p,p_holm,reject,degenerate,mean_diff")?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(TestRow {
                metric: r[0].clone(),
                mode_a: r[1].parse()?,
                mode_b: r[2].parse()?,
                n: field(path, i, &r[3])?,
                t: field(path, i, &r[4])?,
                df: field(path, i, &r[5])?,
                p: field(path, i, &r[6])?,
                p_holm: field(path, i, &r[7])?,
                reject: field(path, i, &r[8])?,
                degenerate: field(path, i, &r[9])?,
                mean_diff: field(path, i, &r[10])?,
            })
        })
        .collect()
}

pub fn read_differences_csv(path: &Path) -> Result<Vec<DifferenceRow>> {
    rows_of(path, "speaker,mode,d_wer,d_syllable_rate,d_hull_area")?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(DifferenceRow {
                speaker: r[0].clone(),
                mode: r[1].parse()?,
                d_wer: opt_field(path, i, &r[2])?,
                d_syllable_rate: field(path, i, &r[3])?,
                d_hull_area: opt_field(path, i, &r[4])?,
            })
        })
        .collect()
}

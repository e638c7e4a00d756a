use serde::{Deserialize, Serialize};

use super::special::student_t_sf;
use crate::corpus::UtteranceRecord;
use crate::error::{Error, Result};

/// Syllables per second of one utterance.
pub fn syllable_rate(record: &UtteranceRecord) -> Result<f64> {
    if !(record.duration_s > 0.0) {
        return Err(Error::invalid(format!("record {} has zero duration", record.id)));
    }
    if record.syllables < 1 {
        return Err(Error::invalid(format!("record {} has no syllables", record.id)));
    }
    Ok(f64::from(record.syllables) / record.duration_s)
}

/// Two aligned measurement series, e.g. modal vs silent per speaker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSeries {
    pub keys: Vec<String>,
    pub values_a: Vec<f64>,
    pub values_b: Vec<f64>,
    pub label_a: String,
    pub label_b: String,
}

impl PairedSeries {
    pub fn new(
        keys: Vec<String>,
        values_a: Vec<f64>,
        values_b: Vec<f64>,
        label_a: impl Into<String>,
        label_b: impl Into<String>,
    ) -> Result<Self> {
        if values_a.len() != values_b.len() || keys.len() != values_a.len() {
            return Err(Error::Shape(format!(
                "paired series lengths differ: {} keys, {} vs {} values",
                keys.len(),
                values_a.len(),
                values_b.len()
            )));
        }
        if values_a.len() < 2 {
            return Err(Error::invalid("paired series need at least 2 pairs"));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = keys.iter().find(|k| !seen.insert(k.as_str())) {
            return Err(Error::invalid(format!("duplicate pairing key '{dup}'")));
        }
        Ok(Self {
            keys,
            values_a,
            values_b,
            label_a: label_a.into(),
            label_b: label_b.into(),
        })
    }

    /// Unkeyed convenience constructor (keys are positions).
    pub fn from_values(values_a: Vec<f64>, values_b: Vec<f64>) -> Result<Self> {
        let keys = (0..values_a.len()).map(|i| i.to_string()).collect();
        Self::new(keys, values_a, values_b, "a", "b")
    }

    pub fn len(&self) -> usize {
        self.values_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_a.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n: usize,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub mean_a: f64,
    pub std_a: f64,
    pub mean_b: f64,
    pub std_b: f64,
    pub mean_diff: f64,
    pub std_diff: f64,
    /// Differences have zero variance but a nonzero mean; `p` is reported as 0.
    pub degenerate: bool,
}

/// Mean and sample standard deviation (n − 1 denominator).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Two-tailed paired t-test on d = a − b.
pub fn paired_ttest(series: &PairedSeries) -> Result<TestResult> {
    let n = series.len();
    if n < 2 {
        return Err(Error::invalid("paired t-test needs n >= 2"));
    }
    let diffs: Vec<f64> = series
        .values_a
        .iter()
        .zip(&series.values_b)
        .map(|(a, b)| a - b)
        .collect();
    let (mean_a, std_a) = mean_std(&series.values_a);
    let (mean_b, std_b) = mean_std(&series.values_b);
    let (mean_diff, std_diff) = mean_std(&diffs);
    let df = (n - 1) as f64;
    let (t, p, degenerate) = if std_diff == 0.0 {
        if mean_diff == 0.0 {
            (0.0, 1.0, false)
        } else {
            (f64::INFINITY.copysign(mean_diff), 0.0, true)
        }
    } else {
        let t = mean_diff / (std_diff / (n as f64).sqrt());
        (t, student_t_sf(t, df)?, false)
    };
    Ok(TestResult {
        n,
        t,
        df,
        p,
        mean_a,
        std_a,
        mean_b,
        std_b,
        mean_diff,
        std_diff,
        degenerate,
    })
}

/// Sample Pearson correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("series lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::invalid("correlation needs at least 2 points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation of a constant series is undefined"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line y = slope·x + intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("line fit needs two equal-length series of at least 2 points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("line fit over a constant x series"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

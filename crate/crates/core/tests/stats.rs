use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use ssi_core::corpus::{Dtype, FrameRef, FrameSequence, Modality, Mode, UtteranceRecord};
use ssi_core::rng::seeded;
use ssi_core::stats::*;

/// Γ(k/2) for integer k by the half-integer recursion.
fn gamma_half(k: usize) -> f64 {
    let mut g = if k.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if k.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < k as f64 / 2.0 - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Composite Simpson rule.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// P(T > t) for Student's t with integer df, by quadrature of the density.
fn t_sf_oracle(t: f64, df: usize) -> f64 {
    let nu = df as f64;
    let c = gamma_half(df + 1) / gamma_half(df) / (nu * std::f64::consts::PI).sqrt();
    let body = simpson(|x| c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0), 0.0, t.abs(), 40_000);
    let upper = 0.5 - body;
    if t >= 0.0 { upper } else { 1.0 - upper }
}

#[test]
fn t_survival_matches_quadrature() {
    for df in [1usize, 2, 3, 5, 9, 29, 199] {
        for t in [-4.0, -1.3, 0.0, 0.2, 1.0, 2.5, 6.0] {
            let got = student_t_sf(t, df as f64).unwrap();
            let want = 2.0 * t_sf_oracle(t.abs(), df);
            assert!((got - want).abs() < 1e-9, "df {df} t {t}: {got} vs {want}");
        }
    }
}

#[test]
fn incomplete_beta_matches_quadrature() {
    for (a, b) in [(1.0, 1.0), (2.0, 3.0), (0.5, 0.5), (4.5, 0.5), (10.0, 2.0)] {
        // Γ(a)Γ(b)/Γ(a+b) from ln_gamma would reuse the code under test; use
        // quadrature for the complete integral as well. Substituting x = sin²θ
        // removes the endpoint singularities for a, b ≥ 1/2.
        let integrand = |th: f64| {
            let (s, c) = (th.sin(), th.cos());
            2.0 * s.powf(2.0 * a - 1.0) * c.powf(2.0 * b - 1.0)
        };
        let full = simpson(integrand, 0.0, std::f64::consts::FRAC_PI_2, 200_000);
        for x in [0.05f64, 0.3, 0.5, 0.77, 0.99] {
            let part = simpson(integrand, 0.0, x.sqrt().asin(), 200_000);
            let got = regularized_incomplete_beta(a, b, x);
            assert!((got - part / full).abs() < 1e-8, "I_{x}({a},{b}) = {got} vs {}", part / full);
        }
    }
}

#[test]
fn ttest_and_pearson_match_textbook_formulas() {
    let mut rng = seeded(11, &[]);
    let normal = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..100 {
        let n = rng.random_range(3..40usize);
        let a: Vec<f64> = (0..n).map(|_| 2.0 + normal.sample(&mut rng)).collect();
        let b: Vec<f64> = a.iter().map(|x| 0.3 * x + normal.sample(&mut rng)).collect();
        let res = paired_ttest(&PairedSeries::from_values(a.clone(), b.clone()).unwrap()).unwrap();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let m = d.iter().sum::<f64>() / n as f64;
        let s = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let t = m / (s / (n as f64).sqrt());
        assert!((res.t - t).abs() < 1e-9);
        assert_eq!(res.df, (n - 1) as f64);
        assert!((res.p - 2.0 * t_sf_oracle(t.abs(), n - 1)).abs() < 1e-9);
        assert!((res.mean_diff - m).abs() < 1e-12);

        let nf = n as f64;
        let (sx, sy) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
        let sxy: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let sxx: f64 = a.iter().map(|x| x * x).sum();
        let syy: f64 = b.iter().map(|y| y * y).sum();
        let r = (nf * sxy - sx * sy) / ((nf * sxx - sx * sx) * (nf * syy - sy * sy)).sqrt();
        assert!((pearson_r(&a, &b).unwrap() - r).abs() < 1e-9);
        let fit = linear_fit(&a, &b).unwrap();
        let slope = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
        assert!((fit.slope - slope).abs() < 1e-9);
        assert!((fit.intercept - (sy - slope * sx) / nf).abs() < 1e-9);
    }
}

/// Holm by definition: the k-th smallest p is compared with α/(m−k+1) and
/// testing stops at the first failure.
fn holm_oracle(p: &[f64], alpha: f64) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut out = vec![false; p.len()];
    for (k, &i) in idx.iter().enumerate() {
        if p[i] <= alpha / (p.len() - k) as f64 {
            out[i] = true;
        } else {
            break;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn holm_matches_the_step_down_definition(p in proptest::collection::vec(0.0f64..0.2, 1..12), alpha in 0.01f64..0.2) {
        let h = holm_bonferroni(&p, alpha).unwrap();
        prop_assert_eq!(&h.reject, &holm_oracle(&p, alpha));
        for (i, &adj) in h.adjusted.iter().enumerate() {
            prop_assert!(adj >= p[i] && adj <= 1.0);
            prop_assert_eq!(h.reject[i], adj <= alpha);
        }
    }

    #[test]
    fn two_tailed_p_is_symmetric_and_monotone(t in 0.0f64..8.0, dt in 0.01f64..2.0, df in 1.0f64..60.0) {
        let p = student_t_sf(t, df).unwrap();
        prop_assert_eq!(p, student_t_sf(-t, df).unwrap());
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(student_t_sf(t + dt, df).unwrap() < p);
    }
}

fn record(id: &str, speaker: &str, mode: Mode, prompt: &str, syllables: u32, duration_s: f64) -> UtteranceRecord {
    let seq = FrameSequence::new(Modality::Ultrasound, 80.0, 1, 1, Dtype::U8, vec![0.0]).unwrap();
    UtteranceRecord {
        id: id.into(),
        speaker: speaker.into(),
        session: "1".into(),
        mode,
        prompt: prompt.into(),
        syllables,
        duration_s,
        ultrasound: FrameRef::from_sequence(format!("{id}.artf"), seq),
        video: None,
        labels_path: None,
        labels: None,
        split: None,
    }
}

#[test]
fn mode_report_on_a_hand_built_corpus() {
    let mut records = vec![];
    let mut hull = BTreeMap::new();
    let mut wer = BTreeMap::new();
    for s in 0..6 {
        let spk = format!("s{s}");
        for k in 0..4 {
            let base = 1.0 + 0.1 * s as f64 + 0.05 * k as f64;
            let prompt = format!("p{k}");
            records.push(record(&format!("{spk}m{k}"), &spk, Mode::Modal, &prompt, 4, base));
            records.push(record(&format!("{spk}s{k}"), &spk, Mode::Silent, &prompt, 4, base * 1.2 + 0.01 * (k * s) as f64));
        }
        hull.insert((spk.clone(), Mode::Modal), 100.0 + s as f64);
        hull.insert((spk.clone(), Mode::Silent), 90.0 + s as f64 * 0.9 + (s % 2) as f64);
        wer.insert((spk.clone(), Mode::Modal), 0.2 + 0.01 * s as f64);
        wer.insert((spk.clone(), Mode::Silent), 0.5 - 0.02 * s as f64);
    }
    let rep = mode_comparison_report(&ReportInputs { records: &records, hull_area: &hull, wer: &wer }, 0.05).unwrap();

    let rate = |r: &UtteranceRecord| syllable_rate(r).unwrap();
    let modal: Vec<f64> = records.iter().filter(|r| r.mode == Mode::Modal).map(rate).collect();
    let silent: Vec<f64> = records.iter().filter(|r| r.mode == Mode::Silent).map(rate).collect();
    let row = rep.summary.iter().find(|r| r.metric == "syllable_rate" && r.mode == Mode::Modal).unwrap();
    assert_eq!(row.n, 24);
    assert!((row.mean - modal.iter().sum::<f64>() / 24.0).abs() < 1e-12);

    let t = rep.tests.iter().find(|r| r.metric == "syllable_rate").unwrap();
    let direct = paired_ttest(&PairedSeries::from_values(modal.clone(), silent.clone()).unwrap()).unwrap();
    assert!((t.t - direct.t).abs() < 1e-9 && t.n == 24 && t.reject);
    let h = rep.tests.iter().find(|r| r.metric == "hull_area").unwrap();
    assert_eq!(h.n, 6);
    assert!(h.mean_diff > 0.0);

    assert_eq!(rep.differences.len(), 6);
    let d0 = &rep.differences[0];
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!((d0.d_syllable_rate - (mean(&modal[..4]) - mean(&silent[..4]))).abs() < 1e-12);
    assert!((d0.d_wer.unwrap() - (0.2 - 0.5)).abs() < 1e-12);
    assert!((d0.d_hull_area.unwrap() - 10.0).abs() < 1e-12);
    assert_eq!(rep.correlations.len(), 3);

    let dir = tempfile::tempdir().unwrap();
    rep.write_csv(dir.path()).unwrap();
    rep.write_figures(dir.path()).unwrap();
    assert_eq!(read_summary_csv(&dir.path().join("summary.csv")).unwrap(), rep.summary);
    let tests = read_tests_csv(&dir.path().join("tests.csv")).unwrap();
    assert_eq!(tests.len(), rep.tests.len());
    assert!(tests.iter().zip(&rep.tests).all(|(a, b)| (a.p - b.p).abs() <= 1e-12 * b.p.max(1e-300) && a.reject == b.reject));
    assert_eq!(read_differences_csv(&dir.path().join("differences.csv")).unwrap(), rep.differences);
    let svgs = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg")).count();
    assert!(svgs >= 4, "{svgs}");
}

#[test]
fn report_needs_two_modes() {
    let records = vec![record("a", "s", Mode::Modal, "p", 2, 1.0), record("b", "s", Mode::Modal, "q", 2, 1.0)];
    let empty = BTreeMap::new();
    assert!(mode_comparison_report(&ReportInputs { records: &records, hull_area: &empty, wer: &empty }, 0.05).is_err());
}

//! Hill tail-index estimation and loss-file ingestion.

use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use crate::error::{check_positive, Error, Result};

/// Two-sided 95% normal quantile.
const Z_95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillEstimate {
    pub k: usize,
    pub alpha_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `X_(n-k)`, the largest sample value not among the top `k`.
    pub threshold: f64,
}

impl HillEstimate {
    pub fn covers(&self, alpha: f64) -> bool {
        self.ci_low <= alpha && alpha <= self.ci_high
    }
}

fn sorted_positive(samples: &[f64]) -> Result<Vec<f64>> {
    if let Some((i, &x)) = samples
        .iter()
        .enumerate()
        .find(|(_, x)| !(x.is_finite() && **x > 0.0))
    {
        return Err(Error::Invalid(format!(
            "Hill estimation needs positive finite samples; sample {i} is {x}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Ascending sample with the running sums of `ln` over its top order
/// statistics: `top_log[k] = Σ_{i<k} ln X_(n-i)`.
struct HillTable {
    sorted: Vec<f64>,
    top_log: Vec<f64>,
}

impl HillTable {
    fn new(samples: &[f64], k_max: usize) -> Result<Self> {
        let sorted = sorted_positive(samples)?;
        let mut top_log = Vec::with_capacity(k_max + 1);
        top_log.push(0.0);
        let mut acc = 0.0;
        for x in sorted.iter().rev().take(k_max) {
            acc += x.ln();
            top_log.push(acc);
        }
        Ok(Self { sorted, top_log })
    }

    fn estimate(&self, k: usize) -> Result<HillEstimate> {
        let n = self.sorted.len();
        let threshold = self.sorted[n - k - 1];
        let mean_spacing = self.top_log[k] / k as f64 - threshold.ln();
        if !(mean_spacing > 0.0) {
            return Err(Error::Invalid(format!(
                "zero log-spacing: the top {k} values all equal the threshold {threshold}"
            )));
        }
        let alpha_hat = 1.0 / mean_spacing;
        let half = Z_95 * alpha_hat / (k as f64).sqrt();
        Ok(HillEstimate {
            k,
            alpha_hat,
            ci_low: alpha_hat - half,
            ci_high: alpha_hat + half,
            threshold,
        })
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 2 || k >= n {
        return Err(Error::Invalid(format!(
            "k must satisfy 2 <= k < n, got k={k} with n={n}"
        )));
    }
    Ok(())
}

/// Hill estimator from the top `k` order statistics.
pub fn hill(samples: &[f64], k: usize) -> Result<HillEstimate> {
    check_k(k, samples.len())?;
    HillTable::new(samples, k)?.estimate(k)
}

/// Hill estimates for every `k` in `k_min..=k_max`.
pub fn hill_plot(samples: &[f64], k_min: usize, k_max: usize) -> Result<Vec<HillEstimate>> {
    let n = samples.len();
    if !(2 <= k_min && k_min < k_max && k_max < n) {
        return Err(Error::Invalid(format!(
            "need 2 <= k_min < k_max < n, got k_min={k_min}, k_max={k_max}, n={n}"
        )));
    }
    let table = HillTable::new(samples, k_max)?;
    (k_min..=k_max).map(|k| table.estimate(k)).collect()
}

/// `k = ⌈0.05 n⌉`, kept inside `[2, n-1]`.
pub fn top_five_percent_k(n: usize) -> usize {
    ((0.05 * n as f64).ceil() as usize).clamp(2, n.saturating_sub(1).max(2))
}

/// Hill estimate with `k` from [`top_five_percent_k`].
pub fn hill_top_five_percent(samples: &[f64]) -> Result<HillEstimate> {
    hill(samples, top_five_percent_k(samples.len()))
}

/// Column selector for [`load_losses`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Name(String),
    /// Zero-based.
    Index(usize),
}

impl Default for Column {
    fn default() -> Self {
        Column::Index(0)
    }
}

/// Digits select by index, anything else by header name.
impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Invalid("empty column selector".into()));
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

fn parse_number(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok()
}

/// Reads one column of positive losses from a CSV file and multiplies
/// them by `scale`. A non-numeric first row is taken as the header.
pub fn load_losses(path: impl AsRef<Path>, column: &Column, scale: f64) -> Result<Vec<f64>> {
    check_positive("scale", scale)?;
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::Io {
        path: display.clone(),
        message: e.to_string(),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);

    let mut index = match column {
        Column::Index(i) => Some(*i),
        Column::Name(_) => None,
    };
    let mut out = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if first {
            first = false;
            let header_like = match column {
                Column::Index(i) => record.get(*i).is_some_and(|f| parse_number(f).is_none()),
                Column::Name(_) => record.iter().any(|f| parse_number(f).is_none()),
            };
            if header_like {
                if let Column::Name(name) = column {
                    index = record.iter().position(|f| f.trim() == name);
                    if index.is_none() {
                        return Err(Error::Parse {
                            line,
                            message: format!("header has no column named `{name}`"),
                        });
                    }
                }
                continue;
            }
            if let Column::Name(name) = column {
                return Err(Error::Parse {
                    line,
                    message: format!("no header row to look up column `{name}`"),
                });
            }
        }
        let i = index.expect("column index resolved on the first row");
        let field = record.get(i).ok_or_else(|| Error::Parse {
            line,
            message: format!("row has no column {i}"),
        })?;
        let x = parse_number(field).ok_or_else(|| Error::Parse {
            line,
            message: format!("`{}` is not a number", field.trim()),
        })?;
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::Parse {
                line,
                message: format!("loss {x} is not positive and finite"),
            });
        }
        out.push(x * scale);
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("`{display}` contains no losses")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Distribution;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn geometric_sequence() {
        let xs: Vec<f64> = (0..101).map(|i| (i as f64).exp()).collect();
        let h = hill(&xs, 100).unwrap();
        // Mean of ln over e^1..e^100 is 50.5, threshold ln is 0.
        assert!((h.alpha_hat - 1.0 / 50.5).abs() < 1e-12);
        assert_eq!(h.threshold, 1.0);
        // The same sequence with k = 50 has spacings 1..50 above e^50.
        let h = hill(&xs, 50).unwrap();
        assert!((h.alpha_hat - 1.0 / 25.5).abs() < 1e-12);
    }

    #[test]
    fn pareto_grid_and_ci() {
        let n = 10_000;
        let xs: Vec<f64> = (1..=n).map(|i| (i as f64 / (n + 1) as f64).powf(-1.0 / 0.8)).collect();
        let h = hill(&xs, 500).unwrap();
        assert!((h.alpha_hat - 0.8).abs() < 0.05, "{h:?}");
        assert!(h.ci_low < h.alpha_hat && h.alpha_hat < h.ci_high);
        let half = 1.96 * h.alpha_hat / 500f64.sqrt();
        assert!((h.ci_high - h.alpha_hat - half).abs() < 1e-15);
    }

    #[test]
    fn seeded_pareto_sample() {
        let xs = Distribution::pareto(0.8, 1.0).unwrap().sample(&RngStream::new(7, 0), 10_000);
        let h = hill(&xs, 500).unwrap();
        assert!((h.alpha_hat - 0.8).abs() < 0.05);
    }

    #[test]
    fn errors() {
        assert!(hill(&[1.0, 2.0, 3.0], 1).is_err());
        assert!(hill(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(hill(&[1.0, -2.0, 3.0, 4.0], 2).is_err());
        assert!(hill(&[1.0, 5.0, 5.0, 5.0], 2).is_err());
        assert!(hill_plot(&[1.0, 2.0, 3.0, 4.0], 2, 2).is_err());
    }

    #[test]
    fn hill_plot_rows() {
        let xs = Distribution::pareto(1.5, 1.0).unwrap().sample(&RngStream::new(3, 0), 5_000);
        let rows = hill_plot(&xs, 100, 101).unwrap();
        assert_eq!(rows.len(), 2);
        let rows = hill_plot(&xs, 100, 500).unwrap();
        assert_eq!(rows.len(), 401);
        for w in rows.windows(2) {
            assert!(w[1].threshold <= w[0].threshold);
        }
        for r in &rows {
            assert!((r.alpha_hat - 1.5).abs() < 0.3);
            assert_eq!(*r, hill(&xs, r.k).unwrap());
        }
    }

    #[test]
    fn top_five_percent() {
        assert_eq!(top_five_percent_k(1000), 50);
        assert_eq!(top_five_percent_k(1001), 51);
        assert_eq!(top_five_percent_k(10), 2);
        assert_eq!(top_five_percent_k(3), 2);
    }

    #[test]
    fn load_with_header_and_scale() {
        let f = write_tmp("loss\n1.5\n2.5\n");
        let col = Column::Name("loss".into());
        assert_eq!(load_losses(f.path(), &col, 1.0).unwrap(), vec![1.5, 2.5]);
        assert_eq!(load_losses(f.path(), &col, 500.0).unwrap(), vec![750.0, 1250.0]);
        assert_eq!(load_losses(f.path(), &Column::Index(0), 1.0).unwrap(), vec![1.5, 2.5]);
        assert!(load_losses(f.path(), &Column::Name("cost".into()), 1.0).is_err());
    }

    #[test]
    fn load_without_header_by_index() {
        let f = write_tmp("3,1.0\n4,2.0\n");
        assert_eq!(load_losses(f.path(), &"1".parse().unwrap(), 2.0).unwrap(), vec![2.0, 4.0]);
        assert!(load_losses(f.path(), &Column::Name("x".into()), 1.0).is_err());
    }

    #[test]
    fn load_rejects_bad_rows() {
        let f = write_tmp("loss\n1.5\n-2\n3\n");
        match load_losses(f.path(), &Column::Index(0), 1.0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let f = write_tmp("loss\n1.5\nabc\n");
        assert!(matches!(load_losses(f.path(), &Column::Index(0), 1.0), Err(Error::Parse { line: 3, .. })));
        let f = write_tmp("loss\n");
        assert!(matches!(load_losses(f.path(), &Column::Index(0), 1.0), Err(Error::Empty(_))));
        assert!(matches!(
            load_losses("/nonexistent/losses.csv", &Column::Index(0), 1.0),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn scale_equivariance(seed in 0u64..1000, c in 1e-3f64..1e3, k in 2usize..200) {
            let xs = Distribution::pareto(0.9, 1.0).unwrap().sample(&RngStream::new(seed, 0), 500);
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            let a = hill(&xs, k).unwrap().alpha_hat;
            let b = hill(&scaled, k).unwrap().alpha_hat;
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }

        #[test]
        fn power_of_two_scaling_is_exact(seed in 0u64..1000, e in -20i32..20, k in 2usize..200) {
            let xs = Distribution::pareto(0.9, 1.0).unwrap().sample(&RngStream::new(seed, 0), 500);
            let c = 2f64.powi(e);
            let scaled: Vec<f64> = xs.iter().map(|x| x * c).collect();
            let (a, b) = (hill(&xs, k).unwrap(), hill(&scaled, k).unwrap());
            prop_assert!((a.alpha_hat - b.alpha_hat).abs() <= 1e-12 * a.alpha_hat);
            prop_assert_eq!(a.threshold * c, b.threshold);
        }

        #[test]
        fn permutation_invariance(seed in 0u64..1000, shift in 0usize..500, k in 2usize..200) {
            let xs = Distribution::pareto(0.9, 1.0).unwrap().sample(&RngStream::new(seed, 0), 500);
            let mut ys = xs.clone();
            ys.rotate_left(shift);
            ys.reverse();
            prop_assert_eq!(hill(&xs, k).unwrap(), hill(&ys, k).unwrap());
        }
    }
}

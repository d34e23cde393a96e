#![allow(dead_code)]

use ssreg::{AnyStats, FitResult, SuffStats};

/// Max-norm relative difference. Equal entries (including matching
/// infinities) contribute nothing; two all-zero vectors give 0.
pub fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        if x == y {
            if x.is_finite() {
                den = den.max(x.abs());
            }
            continue;
        }
        if !x.is_finite() || !y.is_finite() {
            return f64::INFINITY;
        }
        num = num.max((x - y).abs());
        den = den.max(x.abs()).max(y.abs());
    }
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    rel_vec(&[a], &[b])
}

/// Largest relative difference over coefficients, variance, covariance and score.
pub fn fit_diff(a: &FitResult<f64>, b: &FitResult<f64>) -> FitDiff {
    FitDiff {
        beta: rel_vec(&a.beta, &b.beta),
        sigma2: rel(a.sigma2, b.sigma2),
        cov: rel_vec(a.cov.as_slice(), b.cov.as_slice()),
        score: rel(a.score, b.score),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FitDiff {
    pub beta: f64,
    pub sigma2: f64,
    pub cov: f64,
    pub score: f64,
}

impl FitDiff {
    pub fn max(&self) -> f64 {
        self.beta.max(self.sigma2).max(self.cov).max(self.score)
    }

    pub fn worst(self, o: FitDiff) -> FitDiff {
        FitDiff {
            beta: self.beta.max(o.beta),
            sigma2: self.sigma2.max(o.sigma2),
            cov: self.cov.max(o.cov),
            score: self.score.max(o.score),
        }
    }
}

/// Every accumulated field as a named flat vector.
pub fn stats_fields(s: &AnyStats) -> Vec<(&'static str, Vec<f64>)> {
    match s {
        AnyStats::Linear(s) => vec![
            ("n", vec![s.n() as f64]),
            ("s_yy", vec![s.s_yy()]),
            ("s_xy", s.s_xy().to_vec()),
            ("s_xx", s.s_xx().packed_upper()),
        ],
        AnyStats::Weighted(s) => vec![
            ("n", vec![s.n() as f64]),
            ("s_wyy", vec![s.s_wyy()]),
            ("s_wxy", s.s_wxy().to_vec()),
            ("s_wxx", s.s_wxx().packed_upper()),
        ],
        AnyStats::BoxCox(s) => {
            let k = s.grid().len();
            vec![
                ("n", vec![s.n() as f64]),
                ("s_logy", vec![s.s_logy()]),
                ("s_cyy", (0..k).map(|i| s.s_cyy(i)).collect()),
                ("s_cxy", (0..k).flat_map(|i| s.s_cxy(i).to_vec()).collect()),
                ("s_xx", s.s_xx().packed_upper()),
            ]
        }
    }
}

/// Largest per-field relative difference between two accumulators.
pub fn stats_diff(a: &AnyStats, b: &AnyStats) -> f64 {
    let (fa, fb) = (stats_fields(a), stats_fields(b));
    if fa.len() != fb.len() {
        return f64::INFINITY;
    }
    fa.iter().zip(&fb).map(|((_, x), (_, y))| rel_vec(x, y)).fold(0.0, f64::max)
}

/// Writes rows as CSV with a header; values use shortest round-trip formatting.
pub fn write_csv(path: &std::path::Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    writeln!(w, "{}", header.join(",")).unwrap();
    for r in rows {
        let cells: Vec<String> = r.iter().map(f64::to_string).collect();
        writeln!(w, "{}", cells.join(",")).unwrap();
    }
    w.flush().unwrap();
}

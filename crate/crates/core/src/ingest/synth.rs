//! Seeded synthetic regression data.
//!
//! Features are i.i.d. uniform on `[-1, 1]` and `y = Xβ + σ·z` with standard
//! normal `z`. The positive-response variant maps `y ← exp(y / max(1, ‖β‖₁))`
//! so Box-Cox models can be fitted. Draw order per row: the `p` features, then
//! the noise. When no `β` is given it is drawn first, uniform on `[-1, 1]`,
//! intercept included.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::ingest::{write_binary_header, DataFormat};

/// Identifier of the generator recorded in file metadata.
pub const RNG_ID: &str = "chacha8(rand_chacha 0.9)+uniform/standard-normal(rand_distr 0.5)";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: u64,
    /// Number of feature columns, excluding any intercept.
    pub p: usize,
    /// `p + 1` entries (intercept first) or `p` entries (no intercept).
    pub beta: Option<Vec<f64>>,
    pub sigma: f64,
    pub seed: u64,
    pub positive_y: bool,
    pub format: DataFormat,
}

/// Ground truth of a generated file.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub beta: Vec<f64>,
    pub intercept: bool,
    /// Divisor used by the positive-response map.
    pub positive_scale: Option<f64>,
}

struct RowGen {
    rng: ChaCha8Rng,
    unif: Uniform<f64>,
    beta: Vec<f64>,
    intercept: bool,
    sigma: f64,
    positive_scale: Option<f64>,
}

impl RowGen {
    fn new(cfg: &SynthConfig) -> Result<Self> {
        if cfg.n == 0 || cfg.p == 0 {
            return Err(Error::Schema("n and p must be at least 1".into()));
        }
        if !(cfg.sigma >= 0.0) || !cfg.sigma.is_finite() {
            return Err(Error::Schema(format!("sigma must be a non-negative number, got {}", cfg.sigma)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let unif = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
        let beta = match &cfg.beta {
            Some(b) if b.len() == cfg.p + 1 || b.len() == cfg.p => b.clone(),
            Some(b) => {
                return Err(Error::Schema(format!(
                    "beta has {} entries; expected {} (with intercept) or {}",
                    b.len(),
                    cfg.p + 1,
                    cfg.p
                )))
            }
            None => (0..=cfg.p).map(|_| unif.sample(&mut rng)).collect(),
        };
        let intercept = beta.len() == cfg.p + 1;
        let positive_scale = cfg.positive_y.then(|| beta.iter().map(|b| b.abs()).sum::<f64>().max(1.0));
        Ok(Self { rng, unif, beta, intercept, sigma: cfg.sigma, positive_scale })
    }

    /// Fills `x` with one feature row and returns the response.
    fn row(&mut self, x: &mut [f64]) -> f64 {
        for v in x.iter_mut() {
            *v = self.unif.sample(&mut self.rng);
        }
        let z: f64 = self.rng.sample(StandardNormal);
        let (b0, slopes) = if self.intercept { (self.beta[0], &self.beta[1..]) } else { (0.0, &self.beta[..]) };
        let mean = b0 + x.iter().zip(slopes).map(|(a, b)| a * b).sum::<f64>();
        let y = mean + self.sigma * z;
        match self.positive_scale {
            Some(s) => (y / s).exp(),
            None => y,
        }
    }

    fn truth(&self) -> SynthTruth {
        SynthTruth { beta: self.beta.clone(), intercept: self.intercept, positive_scale: self.positive_scale }
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Writes a synthetic dataset to `path`. Identical configs produce identical bytes.
pub fn generate_synthetic(cfg: &SynthConfig, path: impl AsRef<Path>) -> Result<SynthTruth> {
    let mut gen = RowGen::new(cfg)?;
    let mut out = BufWriter::with_capacity(1 << 20, File::create(path)?);
    let mut x = vec![0.0; cfg.p];
    match cfg.format {
        DataFormat::Csv => {
            writeln!(
                out,
                "# ssreg-simulate n={} p={} intercept={} beta=[{}] sigma={} seed={} rng={} features=uniform[-1,1] positive_y={}",
                cfg.n,
                cfg.p,
                gen.intercept,
                fmt_list(&gen.beta),
                cfg.sigma,
                cfg.seed,
                RNG_ID,
                match gen.positive_scale {
                    Some(s) => format!("exp(y/{s})"),
                    None => "false".into(),
                },
            )?;
            let header: Vec<String> = (1..=cfg.p).map(|i| format!("x{i}")).chain(["y".to_string()]).collect();
            writeln!(out, "{}", header.join(","))?;
            for _ in 0..cfg.n {
                let y = gen.row(&mut x);
                for v in &x {
                    write!(out, "{v},")?;
                }
                writeln!(out, "{y}")?;
            }
        }
        DataFormat::Binary => {
            write_binary_header(&mut out, cfg.n, cfg.p)?;
            for _ in 0..cfg.n {
                let y = gen.row(&mut x);
                for v in x.iter().chain(std::iter::once(&y)) {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    out.flush()?;
    Ok(gen.truth())
}

/// Generates rows in memory as `(X with intercept column when present, y)`.
pub fn generate_in_memory(cfg: &SynthConfig) -> Result<(Vec<f64>, Vec<f64>, SynthTruth)> {
    let mut gen = RowGen::new(cfg)?;
    let width = cfg.p + usize::from(gen.intercept);
    let mut xs = Vec::with_capacity(cfg.n as usize * width);
    let mut ys = Vec::with_capacity(cfg.n as usize);
    let mut x = vec![0.0; cfg.p];
    for _ in 0..cfg.n {
        ys.push(gen.row(&mut x));
        if gen.intercept {
            xs.push(1.0);
        }
        xs.extend_from_slice(&x);
    }
    Ok((xs, ys, gen.truth()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Dataset, SchemaSpec};

    fn cfg(format: DataFormat) -> SynthConfig {
        SynthConfig { n: 4, p: 1, beta: Some(vec![1.0, 2.0]), sigma: 0.0, seed: 7, positive_y: false, format }
    }

    #[test]
    fn zero_noise_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let truth = generate_synthetic(&cfg(DataFormat::Csv), &path).unwrap();
        assert!(truth.intercept);
        let spec = SchemaSpec { response: Some("y".into()), intercept: true, ..Default::default() };
        let ds = Dataset::open(&path, &spec).unwrap();
        let mut rows = 0;
        for b in ds.batches(3).unwrap() {
            let b = b.unwrap();
            for (x, y) in b.x.chunks_exact(2).zip(b.response().unwrap()) {
                assert_eq!(*y, 1.0 + 2.0 * x[1]);
                assert!((-1.0..=1.0).contains(&x[1]));
                rows += 1;
            }
        }
        assert_eq!(rows, 4);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# ssreg-simulate n=4 p=1 intercept=true beta=[1,2]"));
    }

    #[test]
    fn same_seed_same_bytes() {
        let dir = tempfile::tempdir().unwrap();
        for format in [DataFormat::Csv, DataFormat::Binary] {
            let mut c = cfg(format);
            c.sigma = 0.5;
            c.beta = None;
            let (a, b) = (dir.path().join("a"), dir.path().join("b"));
            generate_synthetic(&c, &a).unwrap();
            generate_synthetic(&c, &b).unwrap();
            assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
            c.seed = 8;
            generate_synthetic(&c, &b).unwrap();
            assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        }
    }

    #[test]
    fn csv_binary_and_memory_agree() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(DataFormat::Csv);
        c.sigma = 1.0;
        c.n = 20;
        c.positive_y = true;
        let (xs, ys, truth) = generate_in_memory(&c).unwrap();
        assert_eq!(truth.positive_scale, Some(3.0));
        assert!(ys.iter().all(|&y| y > 0.0));
        let spec = SchemaSpec { response: Some("y".into()), intercept: true, ..Default::default() };
        for format in [DataFormat::Csv, DataFormat::Binary] {
            c.format = format;
            let path = dir.path().join("d");
            generate_synthetic(&c, &path).unwrap();
            let ds = Dataset::open(&path, &spec).unwrap();
            let (mut fx, mut fy): (Vec<f64>, Vec<f64>) = (vec![], vec![]);
            for b in ds.batches(7).unwrap() {
                let b = b.unwrap();
                fx.extend(b.x.clone());
                fy.extend_from_slice(b.response().unwrap());
            }
            assert_eq!(fx, xs);
            assert_eq!(fy, ys);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = cfg(DataFormat::Csv);
        c.beta = Some(vec![1.0, 2.0, 3.0]);
        assert!(generate_in_memory(&c).is_err());
        let mut c = cfg(DataFormat::Csv);
        c.sigma = -1.0;
        assert!(generate_in_memory(&c).is_err());
        c.sigma = 0.0;
        c.n = 0;
        assert!(generate_in_memory(&c).is_err());
    }
}

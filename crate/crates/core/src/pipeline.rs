//! Single-pass accumulation over datasets and streaming prediction.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimators::{predict, FitResult};
use crate::ingest::{DataBatch, Dataset};
use crate::suffstats::{BoxCoxStats, LinRegStats, SuffStats, WeightedStats};

/// Which accumulator to build. Ridge fits use [`StatsSpec::Linear`].
#[derive(Debug, Clone, PartialEq)]
pub enum StatsSpec {
    Linear,
    Weighted,
    BoxCox(Vec<f64>),
}

/// Double-precision accumulator of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyStats {
    Linear(LinRegStats<f64>),
    Weighted(WeightedStats<f64>),
    BoxCox(BoxCoxStats<f64>),
}

impl AnyStats {
    pub fn empty(spec: &StatsSpec, p: usize) -> Result<Self> {
        Ok(match spec {
            StatsSpec::Linear => AnyStats::Linear(LinRegStats::new(p)),
            StatsSpec::Weighted => AnyStats::Weighted(WeightedStats::new(p)),
            StatsSpec::BoxCox(grid) => AnyStats::BoxCox(BoxCoxStats::new(p, grid.clone())?),
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyStats::Linear(_) => "linear",
            AnyStats::Weighted(_) => "weighted",
            AnyStats::BoxCox(_) => "boxcox",
        }
    }

    pub fn n(&self) -> u64 {
        match self {
            AnyStats::Linear(s) => s.n(),
            AnyStats::Weighted(s) => s.n(),
            AnyStats::BoxCox(s) => s.n(),
        }
    }

    pub fn p(&self) -> usize {
        match self {
            AnyStats::Linear(s) => s.p(),
            AnyStats::Weighted(s) => s.p(),
            AnyStats::BoxCox(s) => s.p(),
        }
    }

    pub fn update(&mut self, batch: &DataBatch) -> Result<()> {
        match self {
            AnyStats::Linear(s) => s.update_batch(&batch.x, batch.response()?),
            AnyStats::Weighted(s) => s.update_batch(&batch.x, batch.response()?, batch.weights()?),
            AnyStats::BoxCox(s) => s.update_batch(&batch.x, batch.response()?),
        }
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        self.combine(other, false)
    }

    pub fn subtract(&self, other: &Self) -> Result<Self> {
        self.combine(other, true)
    }

    fn combine(&self, other: &Self, subtracting: bool) -> Result<Self> {
        fn go<S: SuffStats>(a: &S, b: &S, sub: bool) -> Result<S> {
            if sub {
                a.subtract(b)
            } else {
                a.merge(b)
            }
        }
        Ok(match (self, other) {
            (AnyStats::Linear(a), AnyStats::Linear(b)) => AnyStats::Linear(go(a, b, subtracting)?),
            (AnyStats::Weighted(a), AnyStats::Weighted(b)) => AnyStats::Weighted(go(a, b, subtracting)?),
            (AnyStats::BoxCox(a), AnyStats::BoxCox(b)) => AnyStats::BoxCox(go(a, b, subtracting)?),
            (a, b) => {
                return Err(Error::Schema(format!("cannot combine {} and {} statistics", a.kind(), b.kind())))
            }
        })
    }
}

/// Counters from one accumulation run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScanMetrics {
    pub rows: u64,
    pub batches: u64,
    pub seconds: f64,
}

impl ScanMetrics {
    fn add(&mut self, other: ScanMetrics) {
        self.rows += other.rows;
        self.batches += other.batches;
        self.seconds += other.seconds;
    }
}

/// Streams `dataset` once, folding every batch into a fresh accumulator.
pub fn accumulate(dataset: &Dataset, spec: &StatsSpec, batch_size: usize) -> Result<(AnyStats, ScanMetrics)> {
    let start = Instant::now();
    let mut acc = AnyStats::empty(spec, dataset.schema().p())?;
    let mut stream = dataset.batches(batch_size)?;
    for batch in stream.by_ref() {
        acc.update(&batch?)?;
    }
    let metrics = ScanMetrics {
        rows: stream.rows_read(),
        batches: stream.batches_read(),
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((acc, metrics))
}

/// Accumulates each shard into its own accumulator and merges them in shard
/// order. With `parallel`, shards are scanned on separate threads.
pub fn accumulate_shards(
    shards: &[Dataset],
    spec: &StatsSpec,
    batch_size: usize,
    parallel: bool,
) -> Result<(AnyStats, ScanMetrics)> {
    let first = shards.first().ok_or(Error::EmptyInput)?;
    let p = first.schema().p();
    for s in &shards[1..] {
        if s.schema().design_names() != first.schema().design_names() {
            return Err(Error::Schema(format!("{}: columns differ from the first shard", s.path().display())));
        }
    }
    let parts: Vec<Result<(AnyStats, ScanMetrics)>> = if parallel && shards.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> =
                shards.iter().map(|ds| scope.spawn(move || accumulate(ds, spec, batch_size))).collect();
            handles.into_iter().map(|h| h.join().expect("shard worker panicked")).collect()
        })
    } else {
        shards.iter().map(|ds| accumulate(ds, spec, batch_size)).collect()
    };
    let mut total = AnyStats::empty(spec, p)?;
    let mut metrics = ScanMetrics::default();
    for part in parts {
        let (acc, m) = part?;
        total = total.merge(&acc)?;
        metrics.add(m);
    }
    Ok((total, metrics))
}

/// Streams `dataset` once and predicts every row with `fit`.
pub fn predict_dataset(
    fit: &FitResult<f64>,
    dataset: &Dataset,
    batch_size: usize,
    inverse_transform: bool,
    mut sink: impl FnMut(f64) -> Result<()>,
) -> Result<u64> {
    if dataset.schema().p() != fit.p {
        return Err(Error::DimensionMismatch { expected: fit.p, found: dataset.schema().p() });
    }
    let mut rows = 0;
    for batch in dataset.batches(batch_size)? {
        let batch = batch?;
        for row in batch.x.chunks_exact(batch.p) {
            sink(predict(fit, row, inverse_transform)?)?;
            rows += 1;
        }
    }
    Ok(rows)
}

//! Brunnian correlation patterns in data.
//!
//! Three variables can be pairwise uncorrelated and still bound together:
//! the signature is vanishing Pearson coefficients next to a large triple
//! statistic. The triple statistic used here is the standardized third
//! cross-moment, the mean of the product of the three standardized series.
//! This is a modeling choice, not a canonical definition; it was picked
//! because it vanishes whenever any one variable is independent of the
//! other two and equals exactly 1 on the parity construction Z = X*Y.
//!
//! The second-order test lifts the same idea one level: each triple is
//! collapsed into its elementwise signal product, and the signals are then
//! tested against each other. Exact enumerations of both constructions are
//! provided as population oracles next to the seeded samplers.

use std::io;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Error;
use crate::Result;

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_TAU: f64 = 0.5;

/// A named sample sequence. At least three finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    name: String,
    samples: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, samples: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if samples.len() < 3 {
            return Err(Error::ShortSeries(samples.len()));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { series: name, index });
        }
        Ok(Series { name, samples })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// (value - mean) / std, with 1/n moments.
    fn standardized(&self) -> Result<Vec<f64>> {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        let var = self.samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var == 0.0 {
            return Err(Error::ZeroVariance(self.name.clone()));
        }
        let std = var.sqrt();
        Ok(self.samples.iter().map(|v| (v - mean) / std).collect())
    }
}

fn check_lengths(series: &[&Series]) -> Result<()> {
    for pair in series.windows(2) {
        if pair[0].len() != pair[1].len() {
            return Err(Error::LengthMismatch(pair[0].len(), pair[1].len()));
        }
    }
    Ok(())
}

/// Sample Pearson coefficient, in [-1, 1].
pub fn pearson(x: &Series, y: &Series) -> Result<f64> {
    check_lengths(&[x, y])?;
    let xs = x.standardized()?;
    let ys = y.standardized()?;
    let n = xs.len() as f64;
    Ok(xs.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() / n)
}

/// Standardized third cross-moment: (1/n) * sum of the elementwise product
/// of the three standardized series. Symmetric in its arguments; flips
/// sign with the sign of any one scale factor.
pub fn triple_corr(x: &Series, y: &Series, z: &Series) -> Result<f64> {
    check_lengths(&[x, y, z])?;
    let xs = x.standardized()?;
    let ys = y.standardized()?;
    let zs = z.standardized()?;
    let n = xs.len() as f64;
    Ok(xs
        .iter()
        .zip(&ys)
        .zip(&zs)
        .map(|((a, b), c)| a * b * c)
        .sum::<f64>()
        / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Brunnian,
    SecondOrderBrunnian,
    GroupCorrelated,
    PairwiseCorrelated,
    Null,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let text = match self {
            Verdict::Brunnian => "brunnian",
            Verdict::SecondOrderBrunnian => "second-order-brunnian",
            Verdict::GroupCorrelated => "group-correlated",
            Verdict::PairwiseCorrelated => "pairwise-correlated",
            Verdict::Null => "null",
        };
        f.write_str(text)
    }
}

/// The three coefficients among a triple, keyed by argument position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairwiseStats {
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl PairwiseStats {
    pub fn max_abs(&self) -> f64 {
        self.xy.abs().max(self.xz.abs()).max(self.yz.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub series: [String; 3],
    pub pairwise: PairwiseStats,
    pub triple: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub verdict: Verdict,
}

/// Pairwise coefficients against the triple statistic.
///
/// The verdict is `brunnian` exactly when every |pairwise| < `epsilon` and
/// |triple| > `tau`; a pairwise coefficient at or over `epsilon` gives
/// `pairwise-correlated`, anything else `null`.
pub fn brunnian_test(
    x: &Series,
    y: &Series,
    z: &Series,
    epsilon: f64,
    tau: f64,
) -> Result<CorrelationReport> {
    let pairwise = PairwiseStats {
        xy: pearson(x, y)?,
        xz: pearson(x, z)?,
        yz: pearson(y, z)?,
    };
    let triple = triple_corr(x, y, z)?;
    let verdict = if pairwise.max_abs() >= epsilon {
        Verdict::PairwiseCorrelated
    } else if triple.abs() > tau {
        Verdict::Brunnian
    } else {
        Verdict::Null
    };
    Ok(CorrelationReport {
        series: [x.name().into(), y.name().into(), z.name().into()],
        pairwise,
        triple,
        epsilon,
        tau,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondOrderReport {
    pub groups: [[String; 3]; 3],
    /// Triple statistic inside each group; must vanish for the pattern.
    pub within_triple: [f64; 3],
    /// Pearson coefficients among the group signals g1, g2, g3.
    pub signal_pairwise: PairwiseStats,
    /// Triple statistic of the three group signals.
    pub signal_triple: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub verdict: Verdict,
}

/// Correlation of correlations over three triples.
///
/// Each group is collapsed into its signal: the elementwise product of its
/// three standardized members. The verdict is `second-order-brunnian` when
/// every group is internally quiet (|within triple| < `epsilon`), the
/// signals are pairwise quiet, and the triple over the signals clears
/// `tau`. A loud group gives `group-correlated`, loud signal pairs give
/// `pairwise-correlated`, anything else `null`.
pub fn second_order_test(
    groups: &[[Series; 3]; 3],
    epsilon: f64,
    tau: f64,
) -> Result<SecondOrderReport> {
    let all: Vec<&Series> = groups.iter().flatten().collect();
    check_lengths(&all)?;
    let mut within_triple = [0.0; 3];
    let mut signals = Vec::with_capacity(3);
    for (j, group) in groups.iter().enumerate() {
        let [a, b, c] = group;
        within_triple[j] = triple_corr(a, b, c)?;
        let sa = a.standardized()?;
        let sb = b.standardized()?;
        let sc = c.standardized()?;
        let product: Vec<f64> = sa
            .iter()
            .zip(&sb)
            .zip(&sc)
            .map(|((x, y), z)| x * y * z)
            .collect();
        signals.push(Series::new(format!("g{}", j + 1), product)?);
    }
    let signal_pairwise = PairwiseStats {
        xy: pearson(&signals[0], &signals[1])?,
        xz: pearson(&signals[0], &signals[2])?,
        yz: pearson(&signals[1], &signals[2])?,
    };
    let signal_triple = triple_corr(&signals[0], &signals[1], &signals[2])?;
    let verdict = if within_triple.iter().any(|t| t.abs() >= epsilon) {
        Verdict::GroupCorrelated
    } else if signal_pairwise.max_abs() >= epsilon {
        Verdict::PairwiseCorrelated
    } else if signal_triple.abs() > tau {
        Verdict::SecondOrderBrunnian
    } else {
        Verdict::Null
    };
    Ok(SecondOrderReport {
        groups: groups
            .clone()
            .map(|group| group.map(|s| s.name().to_string())),
        within_triple,
        signal_pairwise,
        signal_triple,
        epsilon,
        tau,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityKind {
    /// X, Y independent signs; Z = X*Y.
    FirstOrder,
    /// Three such triples tied through latent signs S1, S2, S3 = S1*S2:
    /// Zj = Xj*Yj*Sj. The S series stay hidden.
    SecondOrder,
}

/// Seeded +/-1 samples realizing the parity constructions. Same seed, same
/// bytes. Needs n >= 3 so the output forms legal series.
pub fn make_parity_data(kind: ParityKind, n: usize, seed: u64) -> Result<Vec<Series>> {
    if n < 3 {
        return Err(Error::ShortSeries(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect()
    };
    match kind {
        ParityKind::FirstOrder => {
            let x = draw(&mut rng);
            let y = draw(&mut rng);
            let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
            Ok(vec![
                Series::new("X", x)?,
                Series::new("Y", y)?,
                Series::new("Z", z)?,
            ])
        }
        ParityKind::SecondOrder => {
            let s1 = draw(&mut rng);
            let s2 = draw(&mut rng);
            let s3: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a * b).collect();
            let latents = [s1, s2, s3];
            let mut out = Vec::with_capacity(9);
            for (j, latent) in latents.iter().enumerate() {
                let x = draw(&mut rng);
                let y = draw(&mut rng);
                let z: Vec<f64> = x
                    .iter()
                    .zip(&y)
                    .zip(latent)
                    .map(|((a, b), s)| a * b * s)
                    .collect();
                out.push(Series::new(format!("X{}", j + 1), x)?);
                out.push(Series::new(format!("Y{}", j + 1), y)?);
                out.push(Series::new(format!("Z{}", j + 1), z)?);
            }
            Ok(out)
        }
    }
}

/// All four sign patterns of (X, Y) with Z = X*Y: the exact population
/// where pairwise correlations are 0 and the triple statistic is 1.
pub fn enumerate_first_order() -> [Series; 3] {
    let x = vec![1.0, 1.0, -1.0, -1.0];
    let y = vec![1.0, -1.0, 1.0, -1.0];
    let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    [
        Series::new("X", x).expect("fixed data"),
        Series::new("Y", y).expect("fixed data"),
        Series::new("Z", z).expect("fixed data"),
    ]
}

/// All 256 sign patterns of (X1, Y1, X2, Y2, X3, Y3, S1, S2), with
/// S3 = S1*S2 and Zj = Xj*Yj*Sj: the exact population of the second-order
/// construction. Returned in group order X1, Y1, Z1, X2, ...
pub fn enumerate_second_order() -> [[Series; 3]; 3] {
    let bit = |code: usize, b: usize| if code >> b & 1 == 1 { -1.0 } else { 1.0 };
    let mut columns: Vec<Vec<f64>> =
        std::iter::repeat_with(|| Vec::with_capacity(256)).take(9).collect();
    for code in 0..256 {
        let x = [bit(code, 7), bit(code, 5), bit(code, 3)];
        let y = [bit(code, 6), bit(code, 4), bit(code, 2)];
        let s1 = bit(code, 1);
        let s2 = bit(code, 0);
        let s = [s1, s2, s1 * s2];
        for j in 0..3 {
            columns[3 * j].push(x[j]);
            columns[3 * j + 1].push(y[j]);
            columns[3 * j + 2].push(x[j] * y[j] * s[j]);
        }
    }
    let mut names = ["X1", "Y1", "Z1", "X2", "Y2", "Z2", "X3", "Y3", "Z3"].iter();
    let mut series = columns
        .into_iter()
        .map(|c| Series::new(*names.next().expect("nine names"), c).expect("fixed data"));
    let mut group = || -> [Series; 3] {
        [
            series.next().expect("nine series"),
            series.next().expect("nine series"),
            series.next().expect("nine series"),
        ]
    };
    [group(), group(), group()]
}

/// Read series from CSV: header row names them, each column is a series.
pub fn read_series_csv(reader: impl io::Read) -> Result<Vec<Series>> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let names: Vec<String> =
        csv.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        for (col, field) in record.iter().enumerate() {
            let value = field.trim().parse::<f64>().map_err(|e| Error::CsvData {
                row: row + 2,
                column: names.get(col).cloned().unwrap_or_else(|| format!("{}", col + 1)),
                detail: e.to_string(),
            })?;
            if let Some(column) = columns.get_mut(col) {
                column.push(value);
            }
        }
    }
    names
        .into_iter()
        .zip(columns)
        .map(|(name, samples)| Series::new(name, samples))
        .collect()
}

/// Write series as CSV, one column each. Lengths must agree.
pub fn write_series_csv(writer: impl io::Write, series: &[Series]) -> Result<()> {
    let all: Vec<&Series> = series.iter().collect();
    check_lengths(&all)?;
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(series.iter().map(Series::name))?;
    let rows = series.first().map_or(0, Series::len);
    for i in 0..rows {
        csv.write_record(series.iter().map(|s| s.samples()[i].to_string()))?;
    }
    csv.flush().map_err(Error::Io)?;
    Ok(())
}

//! Price CSV ingestion and standardization.
//!
//! Returns are simple price ratios `r_t = price_t / price_{t-1}`. With `m`
//! price rows and `k = round(train_fraction · m)`, returns with `t < k` are
//! training rows and the rest are test rows, so 1000 prices split 0.5 give
//! 499 training and 500 test returns.

use std::io::Read;
use std::path::Path;

use ggm_core::numkernel::{cholesky, SymMatrix};
use nalgebra::{DMatrix, RowDVector};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub train: DMatrix<f64>,
    pub test: DMatrix<f64>,
}

pub fn read_prices<R: Read>(input: R) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let names: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let width = names.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(BenchError::ColumnCountMismatch { row, expected: width, got: record.len() });
        }
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell
                .trim()
                .parse()
                .map_err(|_| BenchError::Config(format!("row {row}, column {col}: cannot parse {cell:?}")))?;
            if !(value > 0.0) || !value.is_finite() {
                return Err(BenchError::NonPositivePrice { row, col, value });
            }
            values.push(value);
        }
        rows += 1;
    }
    Ok((names, DMatrix::from_row_slice(rows, width, &values)))
}

/// Splits returns and standardizes both sets with training statistics.
pub fn returns_dataset(names: Vec<String>, prices: &DMatrix<f64>, train_fraction: f64) -> Result<Dataset> {
    let (m, p) = prices.shape();
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(BenchError::Config(format!("train_fraction = {train_fraction}")));
    }
    let k = (train_fraction * m as f64).round() as usize;
    if k < 2 || k >= m {
        return Err(BenchError::InsufficientRows(format!("{m} price rows cannot be split at {k}")));
    }
    let returns = DMatrix::from_fn(m - 1, p, |t, j| prices[(t + 1, j)] / prices[(t, j)]);
    // Return row r corresponds to t = r + 1.
    let train = returns.rows(0, k - 1).into_owned();
    let test = returns.rows(k - 1, m - k).into_owned();
    let (train, test) = standardize(&train, &test)?;
    Ok(Dataset { names, train, test })
}

pub fn ingest_returns(path: &Path, train_fraction: f64) -> Result<Dataset> {
    let (names, prices) = read_prices(std::fs::File::open(path)?)?;
    returns_dataset(names, &prices, train_fraction)
}

/// Subtracts the training mean from both sets and scales column `i` by
/// `sqrt((S⁻¹)ᵢᵢ)` of the training covariance `S`, so the standardized
/// training precision has a unit diagonal.
pub fn standardize(train: &DMatrix<f64>, test: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = train.nrows();
    if n < 2 {
        return Err(BenchError::InsufficientRows(format!("{n} training rows")));
    }
    let mean: RowDVector<f64> = train.row_mean();
    let center = |m: &DMatrix<f64>| {
        let mut out = m.clone();
        for mut row in out.row_iter_mut() {
            row -= &mean;
        }
        out
    };
    let (train, test) = (center(train), center(test));
    let s = SymMatrix::symmetrize(&(train.tr_mul(&train) / n as f64));
    if let Some(i) = (0..s.dim()).find(|&i| !(s.get(i, i) > 0.0)) {
        return Err(ggm_core::Error::SingularInput(format!("column {i} has zero variance")).into());
    }
    let precision = cholesky(&s)
        .map_err(|_| ggm_core::Error::SingularInput("training covariance is not invertible".into()))?
        .inverse();
    let scale: Vec<f64> = (0..s.dim()).map(|i| precision.get(i, i).sqrt()).collect();
    let rescale = |mut m: DMatrix<f64>| {
        for (j, c) in scale.iter().enumerate() {
            m.column_mut(j).scale_mut(*c);
        }
        m
    };
    Ok((rescale(train), rescale(test)))
}

/// Row split used for synthetic data: the first `round(train_fraction · n)`
/// rows train, then [`standardize`].
pub fn split_rows(y: &DMatrix<f64>, train_fraction: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = y.nrows();
    let k = (train_fraction * n as f64).round() as usize;
    if k < 2 || k >= n {
        return Err(BenchError::InsufficientRows(format!("{n} rows cannot be split at {k}")));
    }
    standardize(&y.rows(0, k).into_owned(), &y.rows(k, n - k).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prices_csv(rows: usize) -> String {
        let mut out = String::from("A,B\n");
        let (mut a, mut b) = (100.0f64, 50.0f64);
        for t in 0..rows {
            out.push_str(&format!("{a},{b}\n"));
            let x = (t as f64 * 0.7).sin() * 0.01;
            let y = (t as f64 * 1.3).cos() * 0.02;
            a *= 1.0 + x;
            b *= 1.0 + 0.5 * x + y;
        }
        out
    }

    #[test]
    fn split_accounting() {
        let (names, prices) = read_prices(prices_csv(1000).as_bytes()).unwrap();
        assert_eq!(names, vec!["A", "B"]);
        let data = returns_dataset(names, &prices, 0.5).unwrap();
        assert_eq!(data.train.nrows(), 499);
        assert_eq!(data.test.nrows(), 500);
    }

    #[test]
    fn standardized_training_precision_has_unit_diagonal() {
        let (names, prices) = read_prices(prices_csv(300).as_bytes()).unwrap();
        let data = returns_dataset(names, &prices, 0.5).unwrap();
        let n = data.train.nrows() as f64;
        let mean = data.train.row_mean();
        assert!(mean.amax() < 1e-12);
        let s = SymMatrix::symmetrize(&(data.train.tr_mul(&data.train) / n));
        let precision = cholesky(&s).unwrap().inverse();
        for i in 0..2 {
            assert!((precision.get(i, i) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn returns_are_price_ratios() {
        let (names, prices) = read_prices("X\n1\n2\n3\n6\n12\n".as_bytes()).unwrap();
        assert_eq!(prices.column(0).as_slice(), &[1.0, 2.0, 3.0, 6.0, 12.0]);
        // Ratios 2, 1.5, 2, 2 before standardization; check through the split.
        let k = 3;
        let data = returns_dataset(names, &prices, k as f64 / 5.0).unwrap();
        assert_eq!((data.train.nrows(), data.test.nrows()), (2, 2));
    }

    #[test]
    fn errors() {
        assert!(matches!(read_prices("A,B\n1,2\n3\n".as_bytes()), Err(BenchError::ColumnCountMismatch { .. })));
        assert!(matches!(read_prices("A\n1\n0\n".as_bytes()), Err(BenchError::NonPositivePrice { .. })));
        let (names, prices) = read_prices("A\n1\n".as_bytes()).unwrap();
        assert!(matches!(returns_dataset(names, &prices, 0.5), Err(BenchError::InsufficientRows(_))));
        let (names, prices) = read_prices("A,B\n1,5\n1,6\n1,4\n1,5\n1,7\n1,3\n".as_bytes()).unwrap();
        assert!(matches!(
            returns_dataset(names, &prices, 0.5),
            Err(BenchError::Core(ggm_core::Error::SingularInput(_)))
        ));
    }
}

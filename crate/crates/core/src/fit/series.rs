use std::path::Path;

use crate::Scalar;

use super::FitError;

/// Ordered measurement pairs with strictly increasing `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSeries<T> {
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Scalar> MeasurementSeries<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self, FitError> {
        if x.len() != y.len() {
            return Err(FitError::InvalidSeries(format!(
                "{} x values but {} y values",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(FitError::InvalidSeries("non-finite value".into()));
        }
        if let Some(i) = (1..x.len()).find(|&i| !(x[i - 1] < x[i])) {
            return Err(FitError::InvalidSeries(format!(
                "x must be strictly increasing (row {})",
                i + 1
            )));
        }
        Ok(MeasurementSeries { x, y })
    }

    /// Sorts by `x` and replaces repeated `x` values by the mean of their `y`.
    pub fn from_unsorted(mut pairs: Vec<(T, T)>) -> Result<Self, FitError> {
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut x: Vec<T> = Vec::with_capacity(pairs.len());
        let mut y: Vec<T> = Vec::with_capacity(pairs.len());
        let mut count = 0u64;
        for (px, py) in pairs {
            if x.last() == Some(&px) {
                let last = y.last_mut().expect("y tracks x");
                *last = (*last * T::from_count(count) + py) / T::from_count(count + 1);
                count += 1;
            } else {
                x.push(px);
                y.push(py);
                count = 1;
            }
        }
        Self::new(x, y)
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn map_y(&self, f: impl Fn(T) -> T) -> Self {
        MeasurementSeries {
            x: self.x.clone(),
            y: self.y.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Parses CSV with header `x,y`. Rows may come in any order.
    pub fn from_csv(text: &str) -> Result<Self, FitError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| FitError::Csv(e.to_string()))?;
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
            return Err(FitError::Csv(format!(
                "expected header `x,y`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut pairs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| FitError::Csv(e.to_string()))?;
            let parse = |s: &str| -> Result<T, FitError> {
                let v: f64 = s
                    .parse()
                    .map_err(|_| FitError::Csv(format!("row {}: `{s}` is not a number", i + 2)))?;
                Ok(T::lit(v))
            };
            pairs.push((parse(&rec[0])?, parse(&rec[1])?));
        }
        Self::from_unsorted(pairs)
    }

    pub fn load_csv(path: &Path) -> Result<Self, FitError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FitError::Csv(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "y"]).expect("writing to memory");
        for (x, y) in self.x.iter().zip(&self.y) {
            w.write_record([x.to_string(), y.to_string()])
                .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
    }
}

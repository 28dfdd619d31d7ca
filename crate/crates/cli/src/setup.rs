//! Profile calibration from a directory of measurement CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gpukalc::fit::{
    avg_latency_from_timing, default_peakwarp_epsilon, detect_peakwarps, fit_exponential, fit_linear,
    fit_piecewise_linear, FitError, MeasurementSeries,
};
use gpukalc::Profile;
use thiserror::Error;

/// Series every calibration needs, with what each measures.
pub const REQUIRED_SERIES: [(&str, &str); 4] = [
    ("global_latency.csv", "x = stride, y = load latency in cycles"),
    ("launch_overhead.csv", "x = nB * nT_b, y = empty-kernel time in us"),
    ("global_throughput.csv", "x = transactions, y = global throughput"),
    ("shared_throughput.csv", "x = transactions, y = shared throughput"),
];

/// Segments in the global latency model.
pub const LATENCY_SEGMENTS: usize = 4;

#[derive(Debug, Error)]
pub enum SetupError {
    #[error("{dir}: {source}")]
    Dir {
        dir: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing measurement series in {dir}:{}", list(missing))]
    Missing { dir: String, missing: Vec<String> },
    #[error("fitting failed:{}", list(failures))]
    Fit { failures: Vec<String> },
}

fn list(items: &[String]) -> String {
    items.iter().fold(String::new(), |mut s, i| {
        let _ = write!(s, "\n  {i}");
        s
    })
}

/// Goodness of fit for one emitted model.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSummary {
    pub series: String,
    pub r2: f64,
}

/// Fits every series found in `dir` and overwrites the matching models of
/// `base`. Besides the four required series, the directory may hold
/// `latency_<key>.csv` (x = repetitions, y = total cycles) and
/// `peakwarps_<key>_ilp<1|2|3>.csv` (x = warps, y = throughput).
pub fn calibrate(mut base: Profile, dir: &Path) -> Result<(Profile, Vec<FitSummary>), SetupError> {
    let names = csv_names(dir)?;
    let missing: Vec<String> = REQUIRED_SERIES
        .iter()
        .filter(|(f, _)| !names.contains_key(*f))
        .map(|(f, what)| format!("{f} ({what})"))
        .collect();
    if !missing.is_empty() {
        return Err(SetupError::Missing {
            dir: dir.display().to_string(),
            missing,
        });
    }

    let mut failures = Vec::new();
    let mut summary = Vec::new();
    let mut fail = |series: &str, e: &dyn std::fmt::Display| failures.push(format!("{series}: {e}"));
    let load = |f: &str| MeasurementSeries::<f64>::load_csv(&names[f]);

    match load("global_latency.csv").and_then(|s| fit_piecewise_linear(&s, LATENCY_SEGMENTS)) {
        Ok(fit) => {
            base.penalty_models.global_latency = fit.model;
            summary.push(FitSummary { series: "global_latency".into(), r2: fit.r2 });
        }
        Err(e) => fail("global_latency.csv", &e),
    }
    match load("launch_overhead.csv").and_then(|s| fit_linear(&s)) {
        Ok(fit) => match fit.model.check() {
            Ok(()) => {
                base.penalty_models.launch_overhead = fit.model;
                summary.push(FitSummary { series: "launch_overhead".into(), r2: fit.r2 });
            }
            Err(e) => fail("launch_overhead.csv", &e),
        },
        Err(e) => fail("launch_overhead.csv", &e),
    }
    for (file, shared) in [("global_throughput.csv", false), ("shared_throughput.csv", true)] {
        match load(file).and_then(|s| fit_exponential(&s)) {
            Ok(fit) if fit.converged => {
                let slot = if shared {
                    &mut base.throughput_models.shared
                } else {
                    &mut base.throughput_models.global
                };
                *slot = fit.model;
                summary.push(FitSummary { series: file.trim_end_matches(".csv").into(), r2: fit.r2 });
            }
            Ok(fit) => fail(file, &format!("did not converge after {} iterations", fit.iterations)),
            Err(e) => fail(file, &e),
        }
    }

    for (file, path) in &names {
        let stem = file.trim_end_matches(".csv");
        if let Some(key) = stem.strip_prefix("latency_") {
            match MeasurementSeries::<f64>::load_csv(path).and_then(|s| mean_latency(&s)) {
                Ok(l) => {
                    base.latencies.table.insert(key.to_string(), l);
                }
                Err(e) => fail(file, &e),
            }
        } else if let Some(rest) = stem.strip_prefix("peakwarps_") {
            let Some((key, ilp)) = rest.rsplit_once("_ilp").and_then(|(k, i)| Some((k, i.parse::<usize>().ok()?)))
            else {
                fail(file, &"expected peakwarps_<key>_ilp<1|2|3>.csv");
                continue;
            };
            if !(1..=3).contains(&ilp) {
                fail(file, &format!("ILP must be 1, 2 or 3, got {ilp}"));
                continue;
            }
            match MeasurementSeries::<f64>::load_csv(path)
                .and_then(|s| Ok((detect_peakwarps(&s, default_peakwarp_epsilon(&s))?, s)))
            {
                Ok((w, s)) => {
                    let peak = s.y().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    base.peakwarps.entry(key.to_string()).or_default()[ilp - 1] = Some(w as u32);
                    base.throughput_models.instructions.entry(key.to_string()).or_default()[ilp - 1] =
                        Some(peak);
                }
                Err(e) => fail(file, &e),
            }
        }
    }

    if !failures.is_empty() {
        return Err(SetupError::Fit { failures });
    }
    if let Err(e) = base.validate() {
        return Err(SetupError::Fit { failures: vec![format!("fitted profile: {e}")] });
    }
    Ok((base, summary))
}

/// Mean of `T_tot / (2 * 256 * N)` over the rows of a timing series.
fn mean_latency(s: &MeasurementSeries<f64>) -> Result<f64, FitError> {
    let mut sum = 0.0;
    for (&n, &t) in s.x().iter().zip(s.y()) {
        if n.fract() != 0.0 || n < 1.0 {
            return Err(FitError::Precondition(format!("repetition count {n} is not a positive integer")));
        }
        sum += avg_latency_from_timing(t, n as u64)?;
    }
    Ok(sum / s.len() as f64)
}

fn csv_names(dir: &Path) -> Result<BTreeMap<String, PathBuf>, SetupError> {
    let io = |source| SetupError::Dir {
        dir: dir.display().to_string(),
        source,
    };
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
            if name.ends_with(".csv") && path.is_file() {
                out.insert(name.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::LearnerError;

/// A labeled feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: usize,
}

/// Parameters of the Gaussian-mixture generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    /// Per-coordinate standard deviation around each class mean.
    pub noise: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |field, reason: &str| {
            Err(LearnerError::InvalidSpec {
                field,
                reason: reason.to_owned(),
            })
        };
        if self.classes < 2 {
            return bad("classes", "must be at least 2");
        }
        if self.dim < 2 {
            return bad("dim", "must be at least 2");
        }
        if self.dim > u16::MAX as usize {
            return bad("dim", "must fit in 16 bits");
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return bad("noise", "must be finite and non-negative");
        }
        Ok(())
    }
}

/// Labeled training split, unlabeled stream and labeled test split.
///
/// `unlabeled_truth` holds the hidden labels of the stream; it is used only
/// for evaluation and never reaches a learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub classes: usize,
    pub dim: usize,
    pub labeled: Vec<Sample>,
    pub unlabeled: Vec<Vec<f64>>,
    pub unlabeled_truth: Vec<usize>,
    pub test: Vec<Sample>,
}

/// Class means at unit pairwise distance.
///
/// With `dim >= classes` the means are scaled basis vectors `e_k / sqrt(2)`;
/// otherwise they sit on a regular polygon in the first two coordinates
/// with unit distance between neighbours.
pub fn class_means(classes: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|k| {
            let mut mean = vec![0.0; dim];
            if dim >= classes {
                mean[k] = std::f64::consts::FRAC_1_SQRT_2;
            } else {
                let radius = 1.0 / (2.0 * (PI / classes as f64).sin());
                let angle = 2.0 * PI * k as f64 / classes as f64;
                mean[0] = radius * angle.cos();
                mean[1] = radius * angle.sin();
            }
            mean
        })
        .collect()
}

/// Deterministic Gaussian-mixture data with uniformly drawn classes.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset, LearnerError> {
    spec.validate()?;
    let means = class_means(spec.classes, spec.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // noise == 0 is a legal degenerate mixture.
    let normal = Normal::new(0.0, spec.noise).expect("validated noise");

    let draw = |rng: &mut ChaCha8Rng| {
        let label = rng.gen_range(0..spec.classes);
        let x = means[label].iter().map(|m| m + normal.sample(rng)).collect::<Vec<_>>();
        Sample { x, label }
    };

    let labeled = (0..spec.n_labeled).map(|_| draw(&mut rng)).collect();
    let (unlabeled, unlabeled_truth) = (0..spec.n_unlabeled)
        .map(|_| draw(&mut rng))
        .map(|s| (s.x, s.label))
        .unzip();
    let test = (0..spec.n_test).map(|_| draw(&mut rng)).collect();
    Ok(Dataset {
        classes: spec.classes,
        dim: spec.dim,
        labeled,
        unlabeled,
        unlabeled_truth,
        test,
    })
}

/// Writes rows as `f0,..,f{d-1},label`; unlabeled rows leave `label` empty.
pub fn write_csv<'a, W, I>(writer: W, dim: usize, rows: I) -> Result<(), LearnerError>
where
    W: Write,
    I: IntoIterator<Item = (&'a [f64], Option<usize>)>,
{
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = (0..dim)
        .map(|i| format!("f{i}"))
        .chain(std::iter::once("label".into()))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for (x, label) in rows {
        if x.len() != dim {
            return Err(LearnerError::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        rec.push(label.map(|l| l.to_string()).unwrap_or_default());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| LearnerError::Csv(e.to_string()))
}

/// Features and optional label of one CSV row.
pub type CsvRow = (Vec<f64>, Option<usize>);

/// Reads the layout written by [`write_csv`].
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<CsvRow>, LearnerError> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers().map_err(csv_err)?.clone();
    let dim = headers
        .len()
        .checked_sub(1)
        .ok_or_else(|| LearnerError::Csv("missing label column".into()))?;
    for (i, h) in headers.iter().enumerate() {
        let expected = if i == dim { "label".to_owned() } else { format!("f{i}") };
        if h != expected {
            return Err(LearnerError::Csv(format!("column {i} is `{h}`, expected `{expected}`")));
        }
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let x = rec
            .iter()
            .take(dim)
            .map(|s| s.parse::<f64>().map_err(|e| LearnerError::Csv(format!("`{s}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let label = match rec.get(dim) {
            Some("") | None => None,
            Some(s) => Some(
                s.parse::<usize>()
                    .map_err(|e| LearnerError::Csv(format!("label `{s}`: {e}")))?,
            ),
        };
        rows.push((x, label));
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> LearnerError {
    LearnerError::Csv(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(noise: f64) -> SyntheticSpec {
        SyntheticSpec {
            classes: 4,
            dim: 8,
            n_labeled: 50,
            n_unlabeled: 100,
            n_test: 30,
            noise,
        }
    }

    #[test]
    fn same_seed_same_data() {
        let a = gen_synthetic(&spec(0.3), 11).unwrap();
        let b = gen_synthetic(&spec(0.3), 11).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic(&spec(0.3), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_sizes_and_labels() {
        let d = gen_synthetic(&spec(0.3), 1).unwrap();
        assert_eq!((d.labeled.len(), d.unlabeled.len(), d.test.len()), (50, 100, 30));
        assert_eq!(d.unlabeled_truth.len(), 100);
        assert!(d.labeled.iter().chain(&d.test).all(|s| s.label < 4 && s.x.len() == 8));
    }

    #[test]
    fn means_are_unit_separated() {
        for (c, d) in [(4, 8), (3, 2), (5, 2), (2, 2)] {
            let m = class_means(c, d);
            for i in 0..c {
                for j in 0..c {
                    if i == j {
                        continue;
                    }
                    let dist: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    assert!(dist >= 1.0 - 1e-12, "c={c} d={d} {i},{j}: {dist}");
                }
            }
        }
        // Basis layout: every pair at exactly unit distance.
        let m = class_means(4, 8);
        let dist: f64 = m[0].iter().zip(&m[3]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((dist - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_names_fields() {
        let mut s = spec(0.1);
        s.classes = 1;
        assert!(matches!(
            gen_synthetic(&s, 0),
            Err(LearnerError::InvalidSpec { field: "classes", .. })
        ));
        let mut s = spec(0.1);
        s.dim = 1;
        assert!(matches!(
            gen_synthetic(&s, 0),
            Err(LearnerError::InvalidSpec { field: "dim", .. })
        ));
        assert!(matches!(
            gen_synthetic(&spec(-1.0), 0),
            Err(LearnerError::InvalidSpec { field: "noise", .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let d = gen_synthetic(&spec(0.3), 5).unwrap();
        let mut buf = Vec::new();
        let rows = d
            .labeled
            .iter()
            .map(|s| (s.x.as_slice(), Some(s.label)))
            .chain(d.unlabeled.iter().map(|x| (x.as_slice(), None)));
        write_csv(&mut buf, 8, rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f0,f1,f2,f3,f4,f5,f6,f7,label\n"));

        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 150);
        assert_eq!(back[0], (d.labeled[0].x.clone(), Some(d.labeled[0].label)));
        assert_eq!(back[50], (d.unlabeled[0].clone(), None));
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_csv("f0,label\nx,1\n".as_bytes()).is_err());
    }
}

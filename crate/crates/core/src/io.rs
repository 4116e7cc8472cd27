//! Dataset text format.
//!
//! ```text
//! # emest-v1 D=<int> N=<int> alpha=<float> seed=<int>
//! <D comma-separated floats>          (N lines)
//! # truth                              (optional trailer)
//! mean=<D comma-separated floats>
//! inliers=<N comma-separated 0/1 flags>
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading a
//! file back reproduces the samples bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{EmestError, Result};
use crate::model::{Dataset, GroundTruth, ModelParams, SampleSet};

pub const MAGIC: &str = "# emest-v1";
const TRUTH_MARKER: &str = "# truth";

fn join(values: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::new();
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

pub fn format_vector(v: &[f64]) -> String {
    join(v.iter().copied())
}

fn parse_floats(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|tok| {
            tok.trim().parse::<f64>().map_err(|e| EmestError::Parse {
                line: lineno,
                reason: format!("`{tok}`: {e}"),
            })
        })
        .collect()
}

pub fn write_dataset_string(data: &Dataset, with_truth: bool) -> String {
    let p = &data.params;
    let mut out = format!(
        "{MAGIC} D={} N={} alpha={} seed={}\n",
        p.dim, p.n_samples, p.alpha, data.seed
    );
    for i in 0..data.len() {
        out.push_str(&join(data.samples().sample(i).iter().copied()));
        out.push('\n');
    }
    if with_truth {
        if let Some(t) = data.truth() {
            out.push_str(TRUTH_MARKER);
            out.push('\n');
            out.push_str("mean=");
            out.push_str(&join(t.mean.iter().copied()));
            out.push('\n');
            out.push_str("inliers=");
            let flags: Vec<&str> = t.inlier_mask.iter().map(|&b| if b { "1" } else { "0" }).collect();
            out.push_str(&flags.join(","));
            out.push('\n');
        }
    }
    out
}

pub fn write_dataset(path: &Path, data: &Dataset, with_truth: bool) -> Result<()> {
    std::fs::write(path, write_dataset_string(data, with_truth))?;
    Ok(())
}

fn header_field<'a>(fields: &'a [(&'a str, &'a str)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| EmestError::Parse {
            line: 1,
            reason: format!("header is missing `{key}=`"),
        })
}

fn parse_header<T: std::str::FromStr>(fields: &[(&str, &str)], key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    header_field(fields, key)?.parse::<T>().map_err(|e| EmestError::Parse {
        line: 1,
        reason: format!("`{key}`: {e}"),
    })
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines.next().ok_or(EmestError::Parse {
        line: 1,
        reason: "empty file".into(),
    })?;
    let rest = header.strip_prefix(MAGIC).ok_or_else(|| EmestError::Parse {
        line: 1,
        reason: format!("expected `{MAGIC}` header"),
    })?;
    let fields: Vec<(&str, &str)> = rest.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
    let dim: usize = parse_header(&fields, "D")?;
    let n: usize = parse_header(&fields, "N")?;
    let alpha: f64 = parse_header(&fields, "alpha")?;
    let seed: u64 = parse_header(&fields, "seed")?;

    let mut data = DMatrix::zeros(dim, n);
    let mut count = 0;
    let mut mean: Option<Vec<f64>> = None;
    let mut mask: Option<Vec<bool>> = None;
    let mut in_truth = false;
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        if line == TRUTH_MARKER {
            in_truth = true;
            continue;
        }
        if in_truth {
            if let Some(v) = line.strip_prefix("mean=") {
                mean = Some(parse_floats(v, lineno)?);
            } else if let Some(v) = line.strip_prefix("inliers=") {
                let flags = v
                    .split(',')
                    .map(|t| match t.trim() {
                        "1" => Ok(true),
                        "0" => Ok(false),
                        other => Err(EmestError::Parse {
                            line: lineno,
                            reason: format!("bad inlier flag `{other}`"),
                        }),
                    })
                    .collect::<Result<Vec<bool>>>()?;
                mask = Some(flags);
            } else {
                return Err(EmestError::Parse {
                    line: lineno,
                    reason: format!("unexpected truth line `{line}`"),
                });
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let row = parse_floats(line, lineno)?;
        if row.len() != dim {
            return Err(EmestError::Parse {
                line: lineno,
                reason: format!("expected {dim} values, found {}", row.len()),
            });
        }
        if count >= n {
            return Err(EmestError::Parse {
                line: lineno,
                reason: format!("more than N = {n} samples"),
            });
        }
        data.column_mut(count).copy_from_slice(&row);
        count += 1;
    }
    if count != n {
        return Err(EmestError::Parse {
            line: 1,
            reason: format!("header says N = {n} but found {count} samples"),
        });
    }
    let truth = match (mean, mask) {
        (Some(m), Some(k)) => {
            if m.len() != dim || k.len() != n {
                return Err(EmestError::Parse {
                    line: 1,
                    reason: "truth trailer does not match D/N".into(),
                });
            }
            Some(GroundTruth {
                mean: DVector::from_vec(m),
                inlier_mask: k,
                descriptors: None,
            })
        }
        (None, None) => None,
        _ => {
            return Err(EmestError::Parse {
                line: 1,
                reason: "truth trailer needs both `mean=` and `inliers=`".into(),
            })
        }
    };
    let true_mean = truth
        .as_ref()
        .map(|t| t.mean.as_slice().to_vec())
        .unwrap_or_else(|| vec![0.0; dim]);
    let params = ModelParams {
        dim,
        n_samples: n,
        alpha,
        true_mean,
    };
    params.validate()?;
    Dataset::new(SampleSet::from_columns(data), truth, params, seed)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_dataset, AdversarySpec};

    #[test]
    fn round_trip_is_bit_exact() {
        let p = ModelParams::new(3, 25, 0.4, vec![1.0, -2.5, 1e-7]).unwrap();
        let ds = generate_dataset(&p, &"isotropic:1000".parse::<AdversarySpec>().unwrap(), 17).unwrap();
        let text = write_dataset_string(&ds, true);
        assert!(text.starts_with("# emest-v1 D=3 N=25 alpha=0.4 seed=17\n"));
        let back = parse_dataset(&text).unwrap();
        assert_eq!(back.samples(), ds.samples());
        let t = back.truth().unwrap();
        assert_eq!(t.mean, ds.truth().unwrap().mean);
        assert_eq!(t.inlier_mask, ds.truth().unwrap().inlier_mask);
        assert_eq!(back.seed, 17);
    }

    #[test]
    fn truth_trailer_is_optional() {
        let p = ModelParams::new(2, 4, 0.5, vec![0.0; 2]).unwrap();
        let ds = generate_dataset(&p, &AdversarySpec::identity(), 1).unwrap();
        let back = parse_dataset(&write_dataset_string(&ds, false)).unwrap();
        assert!(back.truth().is_none());
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(parse_dataset("").is_err());
        assert!(parse_dataset("D=1 N=1\n1\n").is_err());
        assert!(parse_dataset("# emest-v1 D=2 N=1 alpha=0.5 seed=0\n1\n").is_err());
        assert!(parse_dataset("# emest-v1 D=1 N=2 alpha=0.5 seed=0\n1\n").is_err());
        assert!(parse_dataset("# emest-v1 D=1 N=1 alpha=0.5 seed=0\nx\n").is_err());
        assert!(parse_dataset("# emest-v1 D=1 N=1 alpha=0.5 seed=0\n1\n# truth\nmean=0\n").is_err());
    }
}

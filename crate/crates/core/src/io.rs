//! csmat-v1 file format: UTF-8 JSON, one form or atom list per file.
//!
//! ```json
//! {"format":"csmat-v1","n":2,"repr":"lowrank","weights":[1.0],"vectors":[[1.0,0.0]]}
//! {"format":"csmat-v1","n":2,"repr":"dense","entries":[ ... n^4 floats ... ]}
//! {"format":"csmat-v1","n":2,"repr":"sumkernel","phi":[ ... 4n-3 floats ... ]}
//! {"format":"csmat-v1","n":2,"repr":"atoms","weights":[...],"vectors":[[...]]}
//! ```
//!
//! Floats are written in shortest round-trip decimal form, so write/read is
//! bit-exact.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::atoms::{AtomList, FeasibleSet};
use crate::error::{CsError, Result};
use crate::form::{QuarticForm, Repr};

pub const FORMAT_VERSION: &str = "csmat-v1";

#[derive(Serialize, Deserialize)]
struct CsmatFile {
    format: String,
    n: usize,
    #[serde(flatten)]
    payload: Payload,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "repr", rename_all = "lowercase")]
enum Payload {
    Lowrank {
        weights: Vec<f64>,
        vectors: Vec<Vec<f64>>,
    },
    Dense {
        entries: Vec<f64>,
    },
    Sumkernel {
        phi: Vec<f64>,
    },
    Atoms {
        weights: Vec<f64>,
        vectors: Vec<Vec<f64>>,
    },
}

/// A parsed csmat-v1 document.
#[derive(Debug)]
pub enum Document {
    Form(QuarticForm),
    Atoms(AtomList),
}

impl Document {
    /// View as a form; atom lists convert to their low-rank realization.
    pub fn into_form(self) -> Result<QuarticForm> {
        match self {
            Document::Form(f) => Ok(f),
            Document::Atoms(a) => a.to_form(),
        }
    }
}

/// Read outcome with normalization diagnostics.
#[derive(Debug)]
pub struct ReadOutcome {
    pub doc: Document,
    /// How many stored vectors were not unit and had their scale absorbed
    /// into the weight.
    pub rescaled_vectors: usize,
}

pub fn form_to_json(form: &QuarticForm) -> String {
    let payload = match form.repr() {
        Repr::Dense { entries } => Payload::Dense {
            entries: entries.clone(),
        },
        Repr::LowRank { weights, vectors } => Payload::Lowrank {
            weights: weights.clone(),
            vectors: vectors.iter().map(|v| v.as_slice().to_vec()).collect(),
        },
        Repr::SumKernel { phi } => Payload::Sumkernel { phi: phi.clone() },
    };
    let file = CsmatFile {
        format: FORMAT_VERSION.to_string(),
        n: form.n(),
        payload,
    };
    serde_json::to_string(&file).expect("csmat serialization cannot fail")
}

pub fn atoms_to_json(atoms: &AtomList) -> String {
    let file = CsmatFile {
        format: FORMAT_VERSION.to_string(),
        n: atoms.n(),
        payload: Payload::Atoms {
            weights: atoms.weights().to_vec(),
            vectors: atoms.vectors().iter().map(|v| v.as_slice().to_vec()).collect(),
        },
    };
    serde_json::to_string(&file).expect("csmat serialization cannot fail")
}

pub fn write_form(path: &Path, form: &QuarticForm) -> Result<()> {
    fs::write(path, form_to_json(form) + "\n")?;
    Ok(())
}

pub fn write_atoms(path: &Path, atoms: &AtomList) -> Result<()> {
    fs::write(path, atoms_to_json(atoms) + "\n")?;
    Ok(())
}

pub fn read(path: &Path) -> Result<ReadOutcome> {
    let text = fs::read_to_string(path)?;
    from_json(&text)
}

pub fn from_json(text: &str) -> Result<ReadOutcome> {
    let file: CsmatFile =
        serde_json::from_str(text).map_err(|e| CsError::MalformedFile(e.to_string()))?;
    if file.format != FORMAT_VERSION {
        return Err(CsError::UnsupportedVersion(file.format));
    }
    let n = file.n;
    match file.payload {
        Payload::Dense { entries } => {
            if entries.len() != n * n * n * n {
                return Err(CsError::MalformedFile(format!(
                    "dense payload has {} entries, expected n^4 = {}",
                    entries.len(),
                    n * n * n * n
                )));
            }
            Ok(ReadOutcome {
                doc: Document::Form(QuarticForm::dense(n, entries)?),
                rescaled_vectors: 0,
            })
        }
        Payload::Sumkernel { phi } => {
            if phi.len() != 4 * n - 3 {
                return Err(CsError::MalformedFile(format!(
                    "phi table has {} entries, expected 4n-3 = {}",
                    phi.len(),
                    4 * n - 3
                )));
            }
            Ok(ReadOutcome {
                doc: Document::Form(QuarticForm::sum_kernel(n, phi)?),
                rescaled_vectors: 0,
            })
        }
        Payload::Lowrank { weights, vectors } => {
            let (vecs, rescaled) = check_vectors(n, &weights, vectors)?;
            Ok(ReadOutcome {
                doc: Document::Form(QuarticForm::low_rank(n, weights, vecs)?),
                rescaled_vectors: rescaled,
            })
        }
        Payload::Atoms { weights, vectors } => {
            let (vecs, rescaled) = check_vectors(n, &weights, vectors)?;
            let mut list = AtomList::new(n, FeasibleSet::Cone);
            for (w, v) in weights.iter().zip(vecs) {
                let norm = v.norm();
                if *w < 0.0 {
                    return Err(CsError::MalformedFile(format!(
                        "atoms payload has negative weight {w}"
                    )));
                }
                // absorb scale the same way the low-rank constructor does
                list.insert(w * norm.powi(4), v)?;
            }
            Ok(ReadOutcome {
                doc: Document::Atoms(list),
                rescaled_vectors: rescaled,
            })
        }
    }
}

fn check_vectors(
    n: usize,
    weights: &[f64],
    vectors: Vec<Vec<f64>>,
) -> Result<(Vec<DVector<f64>>, usize)> {
    if weights.len() != vectors.len() {
        return Err(CsError::MalformedFile(format!(
            "{} weights but {} vectors",
            weights.len(),
            vectors.len()
        )));
    }
    let mut out = Vec::with_capacity(vectors.len());
    let mut rescaled = 0;
    for v in vectors {
        if v.len() != n {
            return Err(CsError::MalformedFile(format!(
                "vector has length {}, expected {}",
                v.len(),
                n
            )));
        }
        let v = DVector::from_vec(v);
        if (v.norm() - 1.0).abs() > 1e-12 {
            rescaled += 1;
        }
        out.push(v);
    }
    Ok((out, rescaled))
}

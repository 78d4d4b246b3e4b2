//! Binary SVM container:
//!
//! ```text
//! u32 LE   header length H
//! [u8; H]  JSON header {gamma, bias, classes, c, tol, converged, iterations, n_support}
//! EMB1     support vectors, N = S rows of dimension K
//! [f32; S] dual coefficients alpha_i * y_i, little-endian
//! ```

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::SvmModel;
use crate::emb1;
use crate::error::{Error, Result};
use crate::sequence::EmbeddingSequence;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    gamma: f64,
    bias: f64,
    classes: [usize; 2],
    c: f64,
    tol: f64,
    converged: bool,
    iterations: usize,
    n_support: usize,
}

pub(super) fn encode_model(model: &SvmModel) -> Vec<u8> {
    let header = Header {
        gamma: model.gamma,
        bias: model.bias,
        classes: model.classes,
        c: model.c,
        tol: model.tol,
        converged: model.converged,
        iterations: model.iterations,
        n_support: model.n_support(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let sv = EmbeddingSequence::new(
        "support_vectors",
        "svm",
        0,
        1.0,
        0.0,
        model.support_vectors.clone(),
    )
    .expect("support vectors are finite");
    let mut out = Vec::new();
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&emb1::encode(&sv));
    for &a in model.dual_coefs.iter() {
        out.extend_from_slice(&(a as f32).to_le_bytes());
    }
    out
}

pub(super) fn decode_model(bytes: &[u8]) -> Result<(SvmModel, usize)> {
    if bytes.len() < 4 {
        return Err(Error::Format("SVM container shorter than its header length".into()));
    }
    let h = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    let json = bytes
        .get(4..4 + h)
        .ok_or_else(|| Error::Format("truncated SVM header".into()))?;
    let header: Header = serde_json::from_slice(json)
        .map_err(|e| Error::Format(format!("bad SVM header: {e}")))?;
    let mut pos = 4 + h;
    let (sv, used) = emb1::decode(&bytes[pos..])?;
    pos += used;
    if sv.len() != header.n_support {
        return Err(Error::Format(format!(
            "header declares {} support vectors, block holds {}",
            header.n_support,
            sv.len()
        )));
    }
    let need = 4 * header.n_support;
    let coef_bytes = bytes.get(pos..pos + need).ok_or(Error::TruncatedFile {
        expected: need,
        found: bytes.len() - pos,
    })?;
    let dual_coefs: Array1<f64> = coef_bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if dual_coefs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("non-finite dual coefficient".into()));
    }
    pos += need;
    Ok((
        SvmModel {
            support_vectors: sv.into_frames(),
            dual_coefs,
            bias: header.bias,
            gamma: header.gamma,
            c: header.c,
            tol: header.tol,
            classes: header.classes,
            converged: header.converged,
            iterations: header.iterations,
            support_indices: Vec::new(),
        },
        pos,
    ))
}

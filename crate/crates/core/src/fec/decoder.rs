use super::LdpcCode;
use crate::constellation::{LlrBlock, LlrKind, LLR_CLIP};
use crate::error::{Error, Result};

/// Result of one belief-propagation decoding attempt.
#[derive(Debug, Clone)]
pub struct DecodeOutput {
    pub a_posteriori: LlrBlock,
    pub hard: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

impl DecodeOutput {
    /// A-posteriori minus channel input, i.e. the decoder's extrinsic output.
    pub fn extrinsic(&self, input: &[f64]) -> LlrBlock {
        LlrBlock::new(
            self.a_posteriori
                .values
                .iter()
                .zip(input)
                .map(|(a, b)| a - b)
                .collect(),
            LlrKind::Extrinsic,
        )
    }
}

/// Flooding sum-product decoder.
///
/// Input and output L-values are `ln P(1)/P(0)`; messages are clipped at
/// `±LLR_CLIP`. Decoding stops as soon as the hard decision satisfies every
/// check; `iterations` counts the message-passing rounds actually run.
pub fn decode(code: &LdpcCode, llrs: &[f64], max_iter: usize) -> Result<DecodeOutput> {
    let n = code.n();
    if llrs.len() != n {
        return Err(Error::Length {
            what: "decoder input",
            expected: n,
            got: llrs.len(),
        });
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
    }
    // Work in ln P(0)/P(1) so the tanh rule carries no sign bookkeeping.
    let ch: Vec<f64> = llrs.iter().map(|&l| -clip(l)).collect();
    let rows = code.rows();
    let mut offsets = Vec::with_capacity(rows.len() + 1);
    offsets.push(0);
    for row in rows {
        offsets.push(offsets.last().unwrap() + row.len());
    }
    let n_edges = *offsets.last().unwrap();
    let edge_var: Vec<usize> = rows.iter().flatten().copied().collect();
    let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &v) in edge_var.iter().enumerate() {
        var_edges[v].push(e);
    }

    let mut v2c: Vec<f64> = edge_var.iter().map(|&v| ch[v]).collect();
    let mut c2v = vec![0.0; n_edges];
    let mut post = ch.clone();
    let mut hard = vec![0u8; n];
    let mut tanhs: Vec<f64> = Vec::new();
    let mut suffix: Vec<f64> = Vec::new();
    let limit = (LLR_CLIP / 2.0).tanh().min(1.0 - 1e-15);
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=max_iter {
        iterations = it;
        for c in 0..rows.len() {
            let (lo, hi) = (offsets[c], offsets[c + 1]);
            tanhs.clear();
            tanhs.extend(v2c[lo..hi].iter().map(|&m| (m / 2.0).tanh()));
            let d = tanhs.len();
            suffix.clear();
            suffix.resize(d + 1, 1.0);
            for j in (0..d).rev() {
                suffix[j] = suffix[j + 1] * tanhs[j];
            }
            let mut prefix = 1.0;
            for j in 0..d {
                let p = (prefix * suffix[j + 1]).clamp(-limit, limit);
                c2v[lo + j] = clip(2.0 * p.atanh());
                prefix *= tanhs[j];
            }
        }
        for v in 0..n {
            let total = ch[v] + var_edges[v].iter().map(|&e| c2v[e]).sum::<f64>();
            post[v] = total;
            hard[v] = u8::from(total < 0.0);
            for &e in &var_edges[v] {
                v2c[e] = clip(total - c2v[e]);
            }
        }
        // An exact tie carries no decision; it never counts as satisfied.
        if post.iter().all(|&l| l != 0.0) && code.unsatisfied_checks(&hard) == 0 {
            converged = true;
            break;
        }
    }

    Ok(DecodeOutput {
        a_posteriori: LlrBlock {
            values: post.iter().map(|&l| -clip(l)).collect(),
            kind: LlrKind::APosteriori,
        },
        hard,
        converged,
        iterations,
    })
}

#[inline]
fn clip(l: f64) -> f64 {
    crate::constellation::clip_llr(l)
}

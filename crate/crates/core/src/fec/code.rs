use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Binary LDPC code defined by a sparse parity-check matrix.
///
/// The systematic encoder is derived from `H` by Gaussian elimination over
/// GF(2): pivot columns carry parity, the remaining `k = n − rank(H)` columns
/// carry the information bits in increasing position order.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    n: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    /// One dense row of `k` bits (packed in u64 words) per parity position.
    parity_map: Vec<Vec<u64>>,
}

impl LdpcCode {
    /// Builds a code from check rows (each a list of 0-based column indices).
    pub fn from_rows(n: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 || rows.is_empty() {
            return Err(Error::CodeFormat("empty code".into()));
        }
        let mut cols = vec![Vec::new(); n];
        for (r, row) in rows.iter().enumerate() {
            let mut seen = row.clone();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::CodeFormat(format!("row {r} repeats a column")));
            }
            for &c in row {
                if c >= n {
                    return Err(Error::CodeFormat(format!(
                        "row {r} references column {c} >= n = {n}"
                    )));
                }
                cols[c].push(r);
            }
        }
        let (info_positions, parity_positions, parity_map) = derive_encoder(n, &rows);
        Ok(Self {
            n,
            rows,
            cols,
            info_positions,
            parity_positions,
            parity_map,
        })
    }

    /// Parses the text format: a header line `n m`, then `m` lines of
    /// space-separated 0-based column indices.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::CodeFormat("missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::CodeFormat(format!("header: {e}")))?;
        let [n, m] = dims[..] else {
            return Err(Error::CodeFormat(format!("header must be `n m`, got {header:?}")));
        };
        let mut rows = Vec::with_capacity(m);
        for (i, line) in lines.enumerate() {
            if i >= m {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::CodeFormat(format!("more than m = {m} rows")));
            }
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::CodeFormat(format!("row {i}: {e}")))?;
            rows.push(row);
        }
        if rows.len() != m {
            return Err(Error::CodeFormat(format!(
                "header declares {m} rows, found {}",
                rows.len()
            )));
        }
        Self::from_rows(n, rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::CodeFormat(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Serializes to the text format accepted by [`LdpcCode::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n, self.rows.len());
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Random code with constant column weight and near-uniform row weight.
    ///
    /// Edges are placed column by column on the least-loaded checks, skipping
    /// checks that would close a length-4 cycle while alternatives exist.
    pub fn random_regular(n: usize, m: usize, col_weight: usize, seed: u64) -> Result<Self> {
        if col_weight == 0 || col_weight > m {
            return Err(Error::InvalidParameter(format!(
                "column weight {col_weight} with {m} checks"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words = m.div_ceil(64);
        let mut share = vec![vec![0u64; words]; m];
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for &col in &order {
            let mut chosen: Vec<usize> = Vec::with_capacity(col_weight);
            for _ in 0..col_weight {
                let free = |r: usize, strict: bool| {
                    !chosen.contains(&r)
                        && (!strict || chosen.iter().all(|&c| share[c][r / 64] >> (r % 64) & 1 == 0))
                };
                let mut pick = None;
                for strict in [true, false] {
                    let cands: Vec<usize> = (0..m).filter(|&r| free(r, strict)).collect();
                    if let Some(min) = cands.iter().map(|&r| rows[r].len()).min() {
                        let best: Vec<usize> =
                            cands.into_iter().filter(|&r| rows[r].len() == min).collect();
                        pick = Some(best[rng.random_range(0..best.len())]);
                        break;
                    }
                }
                chosen.push(pick.expect("col_weight <= m leaves a candidate"));
            }
            for &a in &chosen {
                for &b in &chosen {
                    share[a][b / 64] |= 1 << (b % 64);
                }
                rows[a].push(col);
            }
        }
        for row in &mut rows {
            row.sort_unstable();
        }
        Self::from_rows(n, rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    /// `(k, n)`; the rate deduced from the rank of `H`.
    pub fn rate(&self) -> (usize, usize) {
        (self.k(), self.n)
    }

    pub fn rank(&self) -> usize {
        self.parity_positions.len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        let k = self.k();
        if info.len() != k {
            return Err(Error::Length {
                what: "information bits",
                expected: k,
                got: info.len(),
            });
        }
        let mut packed = vec![0u64; k.div_ceil(64)];
        for (i, &b) in info.iter().enumerate() {
            if b & 1 == 1 {
                packed[i / 64] |= 1 << (i % 64);
            }
        }
        let mut cw = vec![0u8; self.n];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            cw[pos] = b & 1;
        }
        for (&pos, map) in self.parity_positions.iter().zip(&self.parity_map) {
            let ones: u32 = map.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw[pos] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    /// Information bits of a codeword (or of a hard decision).
    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| codeword[p]).collect()
    }

    pub fn unsatisfied_checks(&self, bits: &[u8]) -> usize {
        self.rows
            .iter()
            .filter(|row| row.iter().fold(0u8, |acc, &c| acc ^ (bits[c] & 1)) == 1)
            .count()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.n && self.unsatisfied_checks(bits) == 0
    }
}

type EncoderParts = (Vec<usize>, Vec<usize>, Vec<Vec<u64>>);

fn derive_encoder(n: usize, rows: &[Vec<usize>]) -> EncoderParts {
    let words = n.div_ceil(64);
    let mut mat: Vec<Vec<u64>> = rows
        .iter()
        .map(|row| {
            let mut w = vec![0u64; words];
            for &c in row {
                w[c / 64] ^= 1 << (c % 64);
            }
            w
        })
        .collect();
    let get = |row: &[u64], c: usize| row[c / 64] >> (c % 64) & 1 == 1;
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0;
    // Scan columns from the right so parity lands at the tail where possible.
    for col in (0..n).rev() {
        if rank == mat.len() {
            break;
        }
        let Some(p) = (rank..mat.len()).find(|&r| get(&mat[r], col)) else {
            continue;
        };
        mat.swap(rank, p);
        let pivot_row = mat[rank].clone();
        for (r, row) in mat.iter_mut().enumerate() {
            if r != rank && get(row, col) {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a ^= b;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    let mut is_pivot = vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let info: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    let k = info.len();
    let parity_map = pivots
        .iter()
        .enumerate()
        .map(|(r, _)| {
            let mut w = vec![0u64; k.div_ceil(64)];
            for (j, &c) in info.iter().enumerate() {
                if get(&mat[r], c) {
                    w[j / 64] |= 1 << (j % 64);
                }
            }
            w
        })
        .collect();
    (info, pivots, parity_map)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent encoder: for the given info positions, solve
    /// H_p · p = H_i · u over GF(2) with a fresh dense elimination.
    fn solve_oracle(code: &LdpcCode, info: &[u8]) -> Vec<u8> {
        let n = code.n();
        let info_pos = code.info_positions();
        let parity_pos: Vec<usize> = (0..n).filter(|c| !info_pos.contains(c)).collect();
        let np = parity_pos.len();
        // Augmented rows [H_p | rhs]
        let mut aug: Vec<Vec<u8>> = code
            .rows()
            .iter()
            .map(|row| {
                let mut a = vec![0u8; np + 1];
                for &c in row {
                    if let Some(j) = parity_pos.iter().position(|&p| p == c) {
                        a[j] ^= 1;
                    } else {
                        let j = info_pos.iter().position(|&p| p == c).unwrap();
                        a[np] ^= info[j];
                    }
                }
                a
            })
            .collect();
        let mut r = 0;
        let mut where_ = vec![usize::MAX; np];
        for c in 0..np {
            let Some(p) = (r..aug.len()).find(|&i| aug[i][c] == 1) else { continue };
            aug.swap(r, p);
            for i in 0..aug.len() {
                if i != r && aug[i][c] == 1 {
                    let pr = aug[r].clone();
                    for (a, b) in aug[i].iter_mut().zip(pr) {
                        *a ^= b;
                    }
                }
            }
            where_[c] = r;
            r += 1;
        }
        let mut cw = vec![0u8; n];
        for (j, &p) in info_pos.iter().enumerate() {
            cw[p] = info[j];
        }
        for (c, &p) in parity_pos.iter().enumerate() {
            cw[p] = aug[where_[c]][np];
        }
        cw
    }

    #[test]
    fn toy_encoder_matches_gf2_solve() {
        let code = LdpcCode::random_regular(32, 16, 3, 5).unwrap();
        assert_eq!(code.k(), 16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let info: Vec<u8> = (0..16).map(|_| rng.random_range(0..2)).collect();
            let cw = code.encode(&info).unwrap();
            assert!(code.is_codeword(&cw));
            assert_eq!(cw, solve_oracle(&code, &info));
            assert_eq!(code.extract_info(&cw), info);
        }
    }

    #[test]
    fn zero_info_zero_codeword() {
        let code = LdpcCode::random_regular(60, 12, 3, 2).unwrap();
        let cw = code.encode(&vec![0; code.k()]).unwrap();
        assert!(cw.iter().all(|&b| b == 0));
    }

    #[test]
    fn wrong_info_length() {
        let code = LdpcCode::random_regular(32, 16, 3, 5).unwrap();
        assert!(matches!(code.encode(&[0; 3]), Err(Error::Length { .. })));
    }

    #[test]
    fn text_round_trip_bit_exact() {
        let code = LdpcCode::random_regular(40, 10, 3, 9).unwrap();
        let text = code.to_text();
        let again = LdpcCode::parse(&text).unwrap();
        assert_eq!(again.to_text(), text);
        assert_eq!(again.rows(), code.rows());
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(LdpcCode::parse("").is_err());
        assert!(LdpcCode::parse("4 2\n0 1\n").is_err());
        assert!(LdpcCode::parse("4 1\n0 9\n").is_err());
        assert!(LdpcCode::parse("4 1\n0 0\n").is_err());
        assert!(LdpcCode::parse("4 x\n").is_err());
        assert!(LdpcCode::parse("4 1\n0 1\n\n").is_ok());
    }

    #[test]
    fn random_regular_weights() {
        let code = LdpcCode::random_regular(120, 24, 3, 1).unwrap();
        assert!(code.cols().iter().all(|c| c.len() == 3));
        assert!(code.rows().iter().all(|r| r.len() == 15));
    }
}

//! Encoding `c = u · F^{⊗m}` with (dynamic) frozen symbols filled in.

use crate::construction::CodeSpec;

/// In-place polar transform `x ← x · F^{⊗m}` for `F = [[1,0],[1,1]]`.
///
/// The first half of the input maps to the first half of the output, so
/// `u = (a, b)` encodes to `(aG ⊕ bG, bG)`. The transform is its own inverse.
pub fn polar_transform(x: &mut [u8]) {
    let n = x.len();
    assert!(n.is_power_of_two(), "length {n} is not a power of two");
    let mut half = 1;
    while half < n {
        for block in x.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= b;
            }
        }
        half *= 2;
    }
}

/// Input vector and codeword produced for one information word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub input: Vec<u8>,
    pub codeword: Vec<u8>,
}

/// Places `info` on the unfrozen positions in phase order, evaluates every
/// frozen symbol from its constraint row, and applies the polar transform.
pub fn encode(spec: &CodeSpec, info: &[u8]) -> Encoded {
    let mut input = vec![0u8; spec.n()];
    fill_input(spec, info, &mut input);
    let mut codeword = input.clone();
    polar_transform(&mut codeword);
    Encoded { input, codeword }
}

pub fn fill_input(spec: &CodeSpec, info: &[u8], input: &mut [u8]) {
    assert_eq!(info.len(), spec.k(), "info length");
    assert_eq!(input.len(), spec.n());
    let mut next = 0;
    for phase in 0..spec.n() {
        input[phase] = match spec.row_at(phase) {
            Some(row) => row.cols.iter().fold(0, |acc, &s| acc ^ input[s]),
            None => {
                next += 1;
                info[next - 1] & 1
            }
        };
    }
}

/// Whether `u_{i_j} = Σ_s u_s V_{js}` holds for every constraint row.
pub fn constraints_satisfied(spec: &CodeSpec, input: &[u8]) -> bool {
    spec.rows()
        .iter()
        .all(|row| row.cols.iter().fold(0, |acc, &s| acc ^ input[s]) == input[row.pivot])
}

/// Recovers the transform input of a codeword (the transform is an involution).
pub fn input_of_codeword(codeword: &[u8]) -> Vec<u8> {
    let mut u = codeword.to_vec();
    polar_transform(&mut u);
    u
}

pub fn is_codeword(spec: &CodeSpec, codeword: &[u8]) -> bool {
    constraints_satisfied(spec, &input_of_codeword(codeword))
}

/// Extracts the information bits (unfrozen positions, phase order).
pub fn info_of_input(spec: &CodeSpec, input: &[u8]) -> Vec<u8> {
    (0..spec.n())
        .filter(|&p| spec.row_at(p).is_none())
        .map(|p| input[p])
        .collect()
}

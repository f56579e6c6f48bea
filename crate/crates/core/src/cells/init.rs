use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{CellKind, Network};
use crate::base::{ParameterVector, Purpose, RngStream};

/// Initial weights for gradient training.
///
/// Weight matrices are uniform on `[-r, r]` with `r = sqrt(6 / (fan_in +
/// fan_out))`; each square gate block of the recurrent kernel `w_h` is
/// replaced by a random orthogonal matrix; biases start at zero except the
/// LSTM forget-gate bias, which starts at 1. Time-gate offsets and FRU phases
/// start at zero (their defaults).
pub fn glorot_orthogonal_init(net: &Network, seed: u64) -> ParameterVector {
    let mut rng = RngStream::new(seed, 0, 0, Purpose::WeightInit).rng();
    let mut theta = vec![0.0; net.num_params()];
    let h = net.spec().hidden_dim;
    for t in net.layout().tensors() {
        let range = t.range();
        match (t.name.as_str(), t.shape.as_slice()) {
            ("w_h", &[rows, cols]) => {
                for block in 0..rows / cols {
                    let q = random_orthogonal(&mut rng, cols);
                    for r in 0..cols {
                        for c in 0..cols {
                            theta[range.start + (block * cols + r) * cols + c] = q[(r, c)];
                        }
                    }
                }
            }
            (_, &[rows, cols]) => {
                let bound = (6.0 / (rows + cols) as f64).sqrt();
                for v in &mut theta[range] {
                    *v = rng.random_range(-bound..bound);
                }
            }
            ("b", _) if matches!(net.spec().kind, CellKind::Lstm | CellKind::Plstm) => {
                theta[range.start + h..range.start + 2 * h].fill(1.0);
            }
            _ => {}
        }
    }
    ParameterVector::from_vec(theta)
}

fn random_orthogonal<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    // fix column signs so the distribution is uniform over O(n)
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::CellSpec;

    #[test]
    fn recurrent_blocks_are_orthogonal() {
        let net = Network::new(CellSpec::lstm(3, 5, 1)).unwrap();
        let theta = glorot_orthogonal_init(&net, 9);
        let w_h = &theta[net.layout().range("w_h")];
        for block in 0..4 {
            let m = DMatrix::from_row_slice(5, 5, &w_h[block * 25..(block + 1) * 25]);
            let eye = &m * m.transpose();
            assert!((eye - DMatrix::identity(5, 5)).abs().max() < 1e-12);
        }
    }

    #[test]
    fn biases_and_bounds() {
        let net = Network::new(CellSpec::lstm(3, 5, 1)).unwrap();
        let theta = glorot_orthogonal_init(&net, 9);
        let l = net.layout();
        let b = &theta[l.range("b")];
        assert!(b[..5].iter().all(|&v| v == 0.0));
        assert!(b[5..10].iter().all(|&v| v == 1.0));
        assert!(b[10..].iter().all(|&v| v == 0.0));
        let bound = (6.0f64 / 23.0).sqrt();
        assert!(theta[l.range("w_x")].iter().all(|v| v.abs() <= bound));
        assert_eq!(theta, glorot_orthogonal_init(&net, 9));
    }
}

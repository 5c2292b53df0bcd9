//! Built-in example models.

use crate::io::{MatrixData, ModelFile, ModelMode};
use crate::linalg::{ket_bra, real_matrix, CMatrix};

pub const NAMES: [&str; 6] = [
    "faithful-2d",
    "unfaithful-2d",
    "two-enclosures-2d",
    "zero-generator-2d",
    "rotation-channel",
    "two-state-chain",
];

fn lindblad(description: &str, jumps: Vec<CMatrix>) -> ModelFile {
    ModelFile {
        mode: ModelMode::Lindblad,
        dim: 2,
        description: Some(description.into()),
        hamiltonian: Some((&CMatrix::zeros(2, 2)).into()),
        jumps: jumps.iter().map(MatrixData::from).collect(),
        kraus: Vec::new(),
        rates: None,
        qnd: None,
        tolerances: None,
        seed: None,
    }
}

pub fn fixture(name: &str) -> Option<ModelFile> {
    let e = |i, j| ket_bra(2, i, j);
    Some(match name {
        "faithful-2d" => lindblad("H = 0, L1 = |e1><e2|, L2 = |e2><e1|", vec![e(0, 1), e(1, 0)]),
        "unfaithful-2d" => lindblad("H = 0, L = |e1><e2|", vec![e(0, 1)]),
        "two-enclosures-2d" => lindblad("H = 0, L = |e1><e1|", vec![e(0, 0)]),
        "zero-generator-2d" => lindblad("H = 0, no jump operators", vec![]),
        "rotation-channel" => {
            let (s, c) = std::f64::consts::FRAC_PI_4.sin_cos();
            ModelFile {
                mode: ModelMode::Kraus,
                dim: 2,
                description: Some("single Kraus operator: rotation by pi/4".into()),
                hamiltonian: None,
                jumps: Vec::new(),
                kraus: vec![(&real_matrix(2, 2, &[c, -s, s, c])).into()],
                rates: None,
                qnd: None,
                tolerances: None,
                seed: None,
            }
        }
        "two-state-chain" => ModelFile {
            mode: ModelMode::Rates,
            dim: 2,
            description: Some("q = [[-1, 1], [2, -2]]".into()),
            hamiltonian: None,
            jumps: Vec::new(),
            kraus: Vec::new(),
            rates: Some(vec![vec![-1.0, 1.0], vec![2.0, -2.0]]),
            qnd: None,
            tolerances: None,
            seed: None,
        },
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Model;
    use crate::linalg::Tolerances;

    #[test]
    fn every_fixture_builds() {
        for name in NAMES {
            let m = fixture(name).unwrap().to_model(&Tolerances::default()).unwrap();
            let expected = match name {
                "rotation-channel" => matches!(m, Model::Kraus(_)),
                "two-state-chain" => matches!(m, Model::Rates(_)),
                _ => matches!(m, Model::Lindblad(_)),
            };
            assert!(expected, "{name}");
        }
        assert!(fixture("unknown").is_none());
    }
}

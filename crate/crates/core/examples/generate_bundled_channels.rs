//! Regenerate the channel files shipped in `channels/`.
//!
//! Run from anywhere in the workspace:
//! `cargo run -p pfp-core --example generate_bundled_channels`

use std::path::PathBuf;

use pfp_core::channels::{
    induced_cq_channel, serialize_channel, CqWiretapChannel, InputEnsemble, KrausChannel,
    ParsedChannel,
};
use pfp_core::linalg::{ComplexMatrix, ComplexVector};

fn pure(amps: &[f64]) -> ComplexMatrix {
    let v = ComplexVector::from_real(amps).normalized();
    v.outer(&v)
}

fn basis_proj(x: usize) -> ComplexMatrix {
    pure(&[(1 - x) as f64, x as f64])
}

/// `|+><+|` with exact dyadic entries.
fn plus_proj() -> ComplexMatrix {
    ComplexMatrix::from_fn(2, 2, |_, _| pfp_core::Complex64::new(0.5, 0.0))
}

fn cq(symbols: &[&str], probs: Option<Vec<f64>>, outputs: Vec<ComplexMatrix>) -> ParsedChannel {
    ParsedChannel::Cq(
        CqWiretapChannel::from_matrices(
            symbols.iter().map(|s| s.to_string()).collect(),
            probs,
            outputs,
            2,
            2,
        )
        .expect("bundled channel must validate"),
    )
}

fn main() {
    // The receiver sees the symbol; the eavesdropper sees nothing.
    let constant_eve = cq(
        &["0", "1"],
        None,
        (0..2).map(|x| basis_proj(x).tensor(&basis_proj(0))).collect(),
    );

    // Both parties receive a faithful copy of the symbol.
    let copy_to_both = cq(
        &["0", "1"],
        None,
        (0..2).map(|x| basis_proj(x).tensor(&basis_proj(x))).collect(),
    );

    // Bob receives |0> or |+>; Eve holds the dephased copy.
    let bb84 = cq(
        &["0", "1"],
        None,
        vec![
            basis_proj(0).tensor(&basis_proj(0)),
            plus_proj().tensor(&ComplexMatrix::identity(2).scale_real(0.5)),
        ],
    );

    // Phase flip with probability 0.1 on inputs |0> and |+>, dilated so the
    // flip record sits with the eavesdropper; skewed priors.
    let dephasing = {
        let ens = InputEnsemble::new(vec![0.3, 0.7], vec![basis_proj(0), pure(&[1.0, 1.0])])
            .expect("valid ensemble");
        let channel = induced_cq_channel(&KrausChannel::phase_flip(0.1), &ens)
            .expect("induced channel is valid");
        ParsedChannel::Cq(channel)
    };

    // Fully dephasing qubit channel in Kraus form: the environment (Eve)
    // receives a copy of the basis value.
    let copy_to_eve = ParsedChannel::Kraus(KrausChannel::full_dephasing());

    let dir: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "channels"]
        .iter()
        .collect();
    std::fs::create_dir_all(&dir).expect("create channels dir");
    for (name, channel) in [
        ("constant_eve", &constant_eve),
        ("copy_to_both", &copy_to_both),
        ("bb84", &bb84),
        ("dephasing", &dephasing),
        ("copy_to_eve", &copy_to_eve),
    ] {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, serialize_channel(channel)).expect("write channel file");
        println!("wrote {}", path.display());
    }
}

//! Dataset generation.

use std::path::Path;

use sic_core::sigmodel::{self, file as dsfile, SigError};

use crate::config::Resolved;
use crate::CliError;

fn map_sig_error(e: SigError) -> CliError {
    match e {
        SigError::BadCarriers(_)
        | SigError::BadOversample
        | SigError::BadSymbols
        | SigError::TooShort { .. }
        | SigError::MissingLinearTerm
        | SigError::EmptyChannel
        | SigError::EvenPaOrder(_) => CliError::Config(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

pub fn run(
    r: &Resolved,
    out_dir: &Path,
    samples: Option<usize>,
    out_name: &str,
) -> Result<(), CliError> {
    let n = samples.unwrap_or_else(|| r.n_samples());
    let chain = r.tx_chain();
    let ds = sigmodel::make_dataset(&chain, n).map_err(map_sig_error)?;
    let path = out_dir.join(out_name);
    dsfile::save_dataset(&ds, &path)?;

    let hash = r.config_hash("gen");
    println!("dataset: {}", path.display());
    println!("  samples            {}", ds.len());
    println!("  train/test split   {} / {}", ds.split_index, ds.len() - ds.split_index);
    println!("  mean power         {:.4}", ds.x.power());
    println!("  PAPR               {:.2} dB", ds.x.papr_db());
    if let Some(clean) = &ds.y_clean {
        let noise: Vec<_> = ds
            .y
            .samples()
            .iter()
            .zip(clean.samples())
            .map(|(a, b)| a - b)
            .collect();
        let p_noise = sic_core::signal::mean_power(&noise);
        if p_noise > 0.0 {
            println!("  measured SNR       {:.2} dB", 10.0 * (clean.power() / p_noise).log10());
        } else {
            println!("  measured SNR       inf (noiseless)");
        }
    }
    println!("  config_hash        0x{hash:016x}");
    Ok(())
}

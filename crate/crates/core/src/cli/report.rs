use std::fmt;

use serde::Serialize;

use crate::corr::{build_sigma, eigen_spectrum, PortGeometry};
use crate::error::Result;
use crate::moments::EtaCoefficients;
use crate::outage::{block_structure, EstimatorSettings};

/// Number of leading eigenvalues shown beyond the block count.
const EXTRA_EIGENVALUES: usize = 3;

/// Summary of the block structure fitted to a port geometry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockFitReport {
    pub ports: usize,
    pub size: f64,
    pub leading_eigenvalues: Vec<f64>,
    pub num_blocks: usize,
    pub block_sizes: Vec<usize>,
    pub mu: f64,
    pub rho0: f64,
    pub rho1: f64,
    pub distance: f64,
}

pub fn show_blockfit(
    geometry: &PortGeometry,
    settings: &EstimatorSettings,
) -> Result<BlockFitReport> {
    let spectrum = eigen_spectrum(&build_sigma(geometry)?)?;
    let fit = block_structure(geometry, settings)?;
    let rho = EtaCoefficients::from_mu(settings.mu)?;
    let shown = (fit.spec.num_blocks() + EXTRA_EIGENVALUES).min(spectrum.values.len());
    Ok(BlockFitReport {
        ports: geometry.num_ports(),
        size: geometry.normalized_size(),
        leading_eigenvalues: spectrum.values[..shown].to_vec(),
        num_blocks: fit.spec.num_blocks(),
        block_sizes: fit.spec.block_sizes().to_vec(),
        mu: settings.mu,
        rho0: rho.rho0,
        rho1: rho.rho1,
        distance: fit.distance,
    })
}

impl fmt::Display for BlockFitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ports           {}", self.ports)?;
        writeln!(f, "size            {}", self.size)?;
        let eig: Vec<String> = self
            .leading_eigenvalues
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect();
        writeln!(f, "eigenvalues     {}", eig.join(" "))?;
        writeln!(f, "blocks          {}", self.num_blocks)?;
        let sizes: Vec<String> = self.block_sizes.iter().map(|s| s.to_string()).collect();
        writeln!(f, "block sizes     {}", sizes.join(" "))?;
        writeln!(f, "mu              {}", self.mu)?;
        writeln!(f, "rho0            {:.6}", self.rho0)?;
        writeln!(f, "rho1            {:.6}", self.rho1)?;
        write!(f, "distance        {:.6e}", self.distance)
    }
}

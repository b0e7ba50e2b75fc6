//! Two-polaron variational description of the ground state.

pub mod ansatz;
pub mod gaussian;
pub mod optimize;
pub mod simplex;

pub use ansatz::PolaronAnsatz;
pub use gaussian::{overlap, pair_table, OverlapTable, Polaron};
pub use optimize::{
    continuation_sweep, optimize, parameter_derivatives, zeta_semiclassical, ParameterDerivatives, PolaronSweep,
};

/// Closed-form overlap tables for every ordered pair of polarons in an
/// ansatz, indexed `[i][j]` with `0 = α`, `1 = β`.
pub fn derivative_overlaps(
    ansatz: &PolaronAnsatz,
    params: &crate::ModelParams,
) -> crate::Result<[[OverlapTable; 2]; 2]> {
    let ph = ansatz.polarons(params)?;
    Ok([
        [pair_table(&ph[0], &ph[0]), pair_table(&ph[0], &ph[1])],
        [pair_table(&ph[1], &ph[0]), pair_table(&ph[1], &ph[1])],
    ])
}

//! Randomized benchmarking over a 24-element Clifford table, exponential
//! decay fits for total, leakage and incoherent error, three-state readout
//! correction, and the pulse-distortion characterization circuits.

pub mod characterization;
pub mod clifford;
pub mod rb;
pub mod readout;

pub use characterization::{
    AxisShiftScan, CDistortionResult, CharacterizationConfig, ExpDecayFit, IDistortionResult, PulseSlot,
    axis_shift_scan, c_circuit, c_distortion_characterization, fit_axis_shift, i_circuit, i_distortion_characterization,
    sequence_waveform,
};
pub use clifford::{CliffordTable, VzGate, decompose_clifford, sequence_unitary, to_virtual_z};
pub use rb::{
    LeakageFit, PurityFit, RbConfig, RbFit, RbOutcome, RbSample, fit_leakage_rb, fit_purity_rb, fit_rb,
    random_sequences, run_purity_rb, run_rb, run_rb_with_gates,
};
pub use readout::{AssignmentMatrix, correct_readout};

/// Assignment matrix measured on the reference device.
pub const REFERENCE_ASSIGNMENT: [[f64; 3]; 3] = [[0.972, 0.025, 0.003], [0.095, 0.742, 0.162], [0.024, 0.126, 0.850]];

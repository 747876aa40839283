//! Advection-diffusion models solved exactly in Fourier space.

pub mod models;
pub mod spectral;
pub mod spectrum;

pub use models::{
    build_transport_prior, generate_transport_data, transport_jacobian, TransportData, TransportDataSpec,
    TransportKind, TransportModel, TransportPriorSpec,
};
pub use spectral::{
    ade_solution, compute_ic_coeffs, datagen_solution, frade_solution, ic_coeffs_from_samples, propagate, reconstruct,
    ModeRate, SpectralIC, SpectralSetup, Synthesizer,
};
pub use spectrum::{DispersionSpectrum, PowerLaw};

//! Modulators and demodulators: FBMC/OQAM (direct and polyphase/FFT fast
//! forms), CP-OFDM with optional WOLA edge windowing, and frame-tail
//! truncation.

mod fbmc;
mod ofdm;
mod waveform;

pub use fbmc::{
    basis_function, fbmc_demodulate, fbmc_frame_len, fbmc_modulate_direct, fbmc_modulate_fast,
    phase_term, truncate_tails,
};
pub use ofdm::{cp_ofdm_demodulate, cp_ofdm_modulate, wola_window};
pub use waveform::Waveform;

//! Complex baseband sample streams and their file format.

use crate::error::Result;
use num_complex::Complex64;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// A complex baseband sample stream.
///
/// `start_index` is the absolute lattice index of `samples[0]`; tail
/// truncation and receiver timing offsets move it. Demodulators address
/// samples by absolute index so that truncated or shifted streams stay
/// aligned with the transmit lattice.
#[derive(Debug, Clone)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    /// Complex sample rate in Hz.
    pub sample_rate: f64,
    pub start_index: i64,
    /// Absolute start index of each frame for multi-frame streams.
    pub frame_offsets: Vec<usize>,
}

impl Waveform {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        Self {
            samples,
            sample_rate,
            start_index: 0,
            frame_offsets: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample at absolute index, zero outside the stored range.
    #[inline]
    pub fn get(&self, abs_index: i64) -> Complex64 {
        let i = abs_index - self.start_index;
        if i < 0 || i >= self.samples.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.samples[i as usize]
        }
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    pub fn has_nan(&self) -> bool {
        self.samples.iter().any(|s| s.re.is_nan() || s.im.is_nan())
    }

    /// Interleaved little-endian f64 `re,im` pairs plus a text sidecar.
    pub fn write_iq<P: AsRef<Path>>(&self, path: P, n: usize, k: usize) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for s in &self.samples {
            w.write_all(&s.re.to_le_bytes())?;
            w.write_all(&s.im.to_le_bytes())?;
        }
        w.flush()?;
        let side = path.with_extension(format!(
            "{}.txt",
            path.extension().and_then(|e| e.to_str()).unwrap_or("iq")
        ));
        let mut sw = BufWriter::new(std::fs::File::create(side)?);
        writeln!(sw, "sample_rate={}", self.sample_rate)?;
        writeln!(sw, "n={n}")?;
        writeln!(sw, "k={k}")?;
        writeln!(sw, "start_index={}", self.start_index)?;
        let offs: Vec<String> = self.frame_offsets.iter().map(|o| o.to_string()).collect();
        writeln!(sw, "frame_offsets={}", offs.join(","))?;
        Ok(())
    }

    pub fn read_iq<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut samples = Vec::with_capacity(bytes.len() / 16);
        for ch in bytes.chunks_exact(16) {
            let re = f64::from_le_bytes(ch[0..8].try_into().unwrap());
            let im = f64::from_le_bytes(ch[8..16].try_into().unwrap());
            samples.push(Complex64::new(re, im));
        }
        let side = path.with_extension(format!(
            "{}.txt",
            path.extension().and_then(|e| e.to_str()).unwrap_or("iq")
        ));
        let mut sample_rate = 0.0;
        let mut start_index = 0i64;
        let mut frame_offsets = Vec::new();
        if side.exists() {
            for line in BufReader::new(std::fs::File::open(side)?).lines() {
                let line = line?;
                if let Some((key, val)) = line.split_once('=') {
                    match key {
                        "sample_rate" => sample_rate = val.parse().unwrap_or(0.0),
                        "start_index" => start_index = val.parse().unwrap_or(0),
                        "frame_offsets" if !val.is_empty() => {
                            frame_offsets = val.split(',').filter_map(|v| v.parse().ok()).collect();
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(Self {
            samples,
            sample_rate,
            start_index,
            frame_offsets,
        })
    }
}

//! Symbol grids, subcarrier masking and the OQAM staggering maps.

use crate::error::{Error, Result};
use ndarray::Array2;
use num_complex::Complex64;

/// Common per-system physical-layer configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SystemConfig {
    /// Subcarrier count (power of two).
    pub n: usize,
    /// Guard subcarriers on the left band edge.
    pub guard_left: usize,
    /// Guard subcarriers on the right band edge.
    pub guard_right: usize,
    /// Null the DC subcarrier.
    pub dc_null: bool,
    /// Channel bandwidth in Hz (also the complex sample rate).
    pub bandwidth_hz: f64,
    /// Cyclic prefix as a fraction of the symbol period (CP-OFDM only),
    /// as (numerator, denominator).
    pub cp_fraction: (usize, usize),
    /// Raised-cosine edge roll-off for WOLA windowing (fraction of N).
    pub window_rolloff: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n: 512,
            guard_left: 17,
            guard_right: 16,
            dc_null: true,
            bandwidth_hz: 10e6,
            cp_fraction: (1, 32),
            window_rolloff: 0.05,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.guard_left + self.guard_right + 1 > self.n {
            return Err(Error::Config("guards exceed subcarrier count".into()));
        }
        if !self.n.is_power_of_two() {
            return Err(Error::Config("N must be a power of two".into()));
        }
        if self.cp_fraction.1 == 0
            || !(self.n * self.cp_fraction.0).is_multiple_of(self.cp_fraction.1)
        {
            return Err(Error::Config(
                "CP length must be an integer sample count".into(),
            ));
        }
        Ok(())
    }

    pub fn cp_len(&self) -> usize {
        self.n * self.cp_fraction.0 / self.cp_fraction.1
    }

    /// Centered frequency index of subcarrier `n`: `n` for `n < N/2`,
    /// `n - N` otherwise.
    pub fn centered(&self, n: usize) -> i64 {
        if n < self.n / 2 {
            n as i64
        } else {
            n as i64 - self.n as i64
        }
    }

    /// True when subcarrier `n` carries payload (not guard, not DC).
    pub fn is_active(&self, n: usize) -> bool {
        let f = self.centered(n);
        let lo = -(self.n as i64) / 2 + self.guard_left as i64;
        let hi = self.n as i64 / 2 - 1 - self.guard_right as i64;
        if f < lo || f > hi {
            return false;
        }
        !(self.dc_null && f == 0)
    }

    pub fn active_subcarriers(&self) -> Vec<usize> {
        (0..self.n).filter(|&n| self.is_active(n)).collect()
    }

    /// Active subcarriers sorted by centered frequency (lowest first).
    pub fn active_by_frequency(&self) -> Vec<usize> {
        let mut v = self.active_subcarriers();
        v.sort_by_key(|&n| self.centered(n));
        v
    }
}

/// Gray-mapped unit-average-energy QAM constellation for Q in {4, 16, 64}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Modulation {
    pub order: usize,
}

impl Modulation {
    pub fn new(order: usize) -> Result<Self> {
        match order {
            4 | 16 | 64 => Ok(Self { order }),
            _ => Err(Error::Config(format!("unsupported QAM order {order}"))),
        }
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    fn bits_per_axis(&self) -> usize {
        self.bits_per_symbol() / 2
    }

    fn scale(&self) -> f64 {
        // unit average energy: E{|c|^2} = 2 (M^2 - 1) / 3 per axis pair
        let m = 1usize << self.bits_per_axis();
        let var = 2.0 * ((m * m - 1) as f64) / 3.0;
        var.sqrt().recip()
    }

    fn gray_level(bits: &[bool]) -> i64 {
        // Gray-decode to an index, then map to odd levels -(M-1)..(M-1)
        let mut idx: u64 = 0;
        let mut acc = false;
        for &b in bits {
            acc ^= b;
            idx = (idx << 1) | acc as u64;
        }
        let m = 1u64 << bits.len();
        2 * idx as i64 - (m as i64 - 1)
    }

    fn level_bits(level: i64, nbits: usize, out: &mut Vec<bool>) {
        let m = 1i64 << nbits;
        let idx = ((level + m - 1) / 2) as u64;
        let gray = idx ^ (idx >> 1);
        for i in (0..nbits).rev() {
            out.push((gray >> i) & 1 == 1);
        }
    }

    /// Map `bits_per_symbol` bits to one constellation point.
    pub fn map(&self, bits: &[bool]) -> Complex64 {
        let na = self.bits_per_axis();
        let re = Self::gray_level(&bits[..na]) as f64;
        let im = Self::gray_level(&bits[na..]) as f64;
        Complex64::new(re, im) * self.scale()
    }

    /// Hard decision back to bits: nearest odd level per axis.
    pub fn demap(&self, c: Complex64, out: &mut Vec<bool>) {
        let na = self.bits_per_axis();
        let m = 1i64 << na;
        let slicer = |x: f64| -> i64 {
            let idx = ((x / self.scale() + (m - 1) as f64) / 2.0).round() as i64;
            2 * idx.clamp(0, m - 1) - (m - 1)
        };
        Self::level_bits(slicer(c.re), na, out);
        Self::level_bits(slicer(c.im), na, out);
    }
}

/// Complex QAM symbols on the subcarrier x QAM-instant lattice.
#[derive(Debug, Clone)]
pub struct QamGrid {
    /// N x M_qam.
    pub symbols: Array2<Complex64>,
    pub modulation: Modulation,
}

impl QamGrid {
    /// Debug CSV: one `n,t,re,im` row per lattice point.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,t,re,im")?;
        for ((n, t), c) in self.symbols.indexed_iter() {
            writeln!(w, "{n},{t},{:.14e},{:.14e}", c.re, c.im)?;
        }
        Ok(())
    }
}

/// Real OQAM symbols on the subcarrier x half-instant lattice (M = 2 M_qam).
#[derive(Debug, Clone)]
pub struct OqamGrid {
    /// N x M.
    pub a: Array2<f64>,
}

impl OqamGrid {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            a: Array2::zeros((n, m)),
        }
    }

    /// Debug CSV: one `n,m,a` row per lattice point.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,m,a")?;
        for ((n, m), v) in self.a.indexed_iter() {
            writeln!(w, "{n},{m},{v:.14e}")?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.a.ncols()
    }
}

/// Stagger QAM symbols into real OQAM symbols: the real part occupies the
/// even half-instant `2t`, the imaginary part the odd half-instant `2t+1`.
pub fn qam_to_oqam(g: &QamGrid) -> OqamGrid {
    let (n, mq) = g.symbols.dim();
    let mut a = Array2::zeros((n, 2 * mq));
    for ((i, t), c) in g.symbols.indexed_iter() {
        a[(i, 2 * t)] = c.re;
        a[(i, 2 * t + 1)] = c.im;
    }
    OqamGrid { a }
}

/// Exact inverse of [`qam_to_oqam`].
pub fn oqam_to_qam(a: &OqamGrid, modulation: Modulation) -> Result<QamGrid> {
    let (n, m) = a.a.dim();
    if m % 2 != 0 {
        return Err(Error::Shape(format!("OQAM instant count {m} must be even")));
    }
    let mut symbols = Array2::zeros((n, m / 2));
    for ((i, t), c) in symbols.indexed_iter_mut() {
        *c = Complex64::new(a.a[(i, 2 * t)], a.a[(i, 2 * t + 1)]);
    }
    Ok(QamGrid {
        symbols,
        modulation,
    })
}

/// De-stagger a complex demodulated lattice by taking the real part at each
/// half-instant (the receiver-side counterpart of [`qam_to_oqam`]).
pub fn destagger(r: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let (n, m) = r.dim();
    if m % 2 != 0 {
        return Err(Error::Shape(format!("OQAM instant count {m} must be even")));
    }
    let mut out = Array2::zeros((n, m / 2));
    for ((i, t), c) in out.indexed_iter_mut() {
        *c = Complex64::new(r[(i, 2 * t)].re, r[(i, 2 * t + 1)].re);
    }
    Ok(out)
}

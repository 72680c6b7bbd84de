//! Time-frequency localization of prototype pulses and the intrinsic
//! (purely imaginary, for orthogonal pulses) interference it predicts.

use crate::dp::DpStructure;
use crate::error::{Error, Result};
use crate::filters::PrototypeFilter;
use crate::grid::OqamGrid;
use crate::modem::basis_function;
use ndarray::Array2;
use num_complex::Complex64;

/// Inner products `<Q[n'+dn, m'+dm], Q[n', m']>` over a `(dn, dm)` box,
/// computed at an interior reference point with `n' + m'` even. Entries for
/// an odd `m'` reference differ by `(-1)^dn`; [`LocalizationTable::entry_at`]
/// applies that correction.
#[derive(Debug, Clone)]
pub struct LocalizationTable {
    pub dn: usize,
    pub dm: usize,
    /// `(2 dn + 1) x (2 dm + 1)`, row `i` is `dn_offset = i - dn`.
    pub entries: Array2<Complex64>,
    pub filter: String,
}

impl LocalizationTable {
    /// Entry at signed offsets, for the reference parity (`m'` even).
    pub fn entry(&self, dn: i64, dm: i64) -> Complex64 {
        self.entries[(
            (dn + self.dn as i64) as usize,
            (dm + self.dm as i64) as usize,
        )]
    }

    /// Entry corrected for the parity of the reference half-instant.
    pub fn entry_at(&self, dn: i64, dm: i64, m_ref: usize) -> Complex64 {
        let e = self.entry(dn, dm);
        if m_ref % 2 == 1 && dn.rem_euclid(2) == 1 {
            -e
        } else {
            e
        }
    }
}

/// Exact summation of the basis-pulse inner products over the full support.
pub fn localization_table(f: &PrototypeFilter, dn: usize, dm: usize) -> Result<LocalizationTable> {
    if dn > 4 || dm > 8 {
        return Err(Error::Domain(format!(
            "neighborhood ({dn}, {dm}) exceeds the supported box (4, 8)"
        )));
    }
    if dn + 2 > f.n / 2 {
        return Err(Error::Domain(
            "frequency neighborhood exceeds subcarrier count".into(),
        ));
    }
    let n_ref = (f.n / 2) as i64;
    let m_ref = (dm + dm % 2) as i64; // even reference, interior by dm
    let (ref_start, ref_q) = basis_function(f, n_ref, m_ref);
    let mut entries = Array2::zeros((2 * dn + 1, 2 * dm + 1));
    for (i, dni) in (-(dn as i64)..=dn as i64).enumerate() {
        for (j, dmj) in (-(dm as i64)..=dm as i64).enumerate() {
            let (start, q) = basis_function(f, n_ref + dni, m_ref + dmj);
            let mut acc = Complex64::new(0.0, 0.0);
            for (u, &v) in q.iter().enumerate() {
                let rel = start + u as i64 - ref_start;
                if rel >= 0 && (rel as usize) < ref_q.len() {
                    acc += v * ref_q[rel as usize].conj();
                }
            }
            entries[(i, j)] = acc;
        }
    }
    Ok(LocalizationTable {
        dn,
        dm,
        entries,
        filter: f.descriptor(),
    })
}

/// A set of lattice offsets around a reference point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub offsets: Vec<(i64, i64)>,
}

impl Neighborhood {
    /// Every offset in the box except the reference itself.
    pub fn full_box(dn: usize, dm: usize) -> Self {
        let mut offsets = Vec::new();
        for dni in -(dn as i64)..=dn as i64 {
            for dmj in -(dm as i64)..=dm as i64 {
                if (dni, dmj) != (0, 0) {
                    offsets.push((dni, dmj));
                }
            }
        }
        Self { offsets }
    }
}

/// Split the box into same-polarization and cross-polarization offset sets
/// for a given multiplexing structure.
pub fn structure_neighborhoods(
    s: DpStructure,
    dn: usize,
    dm: usize,
) -> (Neighborhood, Neighborhood) {
    let mut co = Vec::new();
    let mut cross = Vec::new();
    for dni in -(dn as i64)..=dn as i64 {
        for dmj in -(dm as i64)..=dm as i64 {
            if (dni, dmj) == (0, 0) {
                continue;
            }
            let same = match s {
                DpStructure::Tpdm => dmj.rem_euclid(2) == 0,
                DpStructure::Fpdm => dni.rem_euclid(2) == 0,
                DpStructure::Tfpdm => (dni + dmj).rem_euclid(2) == 0,
            };
            if same {
                co.push((dni, dmj));
            } else {
                cross.push((dni, dmj));
            }
        }
    }
    (
        Neighborhood { offsets: co },
        Neighborhood { offsets: cross },
    )
}

/// Interference contributed at `(n', m')` by the neighborhood, per the
/// localization weights: `sum a[n'+dn, m'+dm] * Q(dn, dm)`.
pub fn intrinsic_interference(
    a: &OqamGrid,
    t: &LocalizationTable,
    point: (usize, usize),
    hood: &Neighborhood,
) -> Result<Complex64> {
    let (np, mp) = point;
    let mut acc = Complex64::new(0.0, 0.0);
    for &(dni, dmj) in &hood.offsets {
        let ni = np as i64 + dni;
        let mi = mp as i64 + dmj;
        if ni < 0 || ni >= a.n() as i64 || mi < 0 || mi >= a.m() as i64 {
            return Err(Error::Domain(format!(
                "point ({np}, {mp}) too close to the grid edge for offset ({dni}, {dmj})"
            )));
        }
        acc += a.a[(ni as usize, mi as usize)] * t.entry_at(dni, dmj, mp);
    }
    Ok(acc)
}

/// Deterministic CSV rendering, rows over the subcarrier offset.
pub fn render_table(t: &LocalizationTable) -> String {
    let mut out = String::new();
    out.push_str("dn\\dm");
    for dmj in -(t.dm as i64)..=t.dm as i64 {
        out.push_str(&format!(",{dmj:+}"));
    }
    out.push('\n');
    for dni in -(t.dn as i64)..=t.dn as i64 {
        out.push_str(&format!("{dni:+}"));
        for dmj in -(t.dm as i64)..=t.dm as i64 {
            let e = t.entry(dni, dmj);
            out.push_str(&format!(",{:+.4}{:+.4}j", e.re, e.im));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::FilterKind;
    use crate::modem::{fbmc_demodulate, fbmc_modulate_fast};
    use rand::{Rng, SeedableRng};

    #[test]
    fn self_term_is_one() {
        for (kind, k) in [
            (FilterKind::Phydyas, 4),
            (FilterKind::Iota, 4),
            (FilterKind::Srrc, 4),
            (FilterKind::Srrc, 8),
        ] {
            let f = PrototypeFilter::design(kind, k, 64, None).unwrap();
            let t = localization_table(&f, 2, 3).unwrap();
            assert!((t.entry(0, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn center_row_symmetry() {
        // odd lags sit in quadrature and flip sign across the center; even
        // lags are real, even-symmetric and bounded by the pulse's
        // orthogonality residual
        let f = PrototypeFilter::design(FilterKind::Phydyas, 4, 64, None).unwrap();
        let t = localization_table(&f, 2, 3).unwrap();
        for dm in [1i64, 3] {
            assert!((t.entry(0, dm) + t.entry(0, -dm)).norm() < 1e-9, "dm={dm}");
        }
        let e2 = t.entry(0, 2);
        assert!((e2 - t.entry(0, -2)).norm() < 1e-9);
        assert!(e2.im.abs() < 1e-12);
        assert!(e2.re.abs() < 1e-3);
    }

    #[test]
    fn phydyas_adjacent_instant_weight() {
        // published nearest-instant weight for this pulse family: 0.564j
        let f = PrototypeFilter::design(FilterKind::Phydyas, 4, 512, None).unwrap();
        let t = localization_table(&f, 2, 3).unwrap();
        let e = t.entry(0, 1);
        assert!(e.re.abs() < 1e-3);
        assert!((e.im - 0.564).abs() < 2e-3, "got {e}");
    }

    #[test]
    fn srrc_k4_adjacent_subcarrier_weight() {
        // -0.1589j at (dn=-1, dm=0)
        let f = PrototypeFilter::design(FilterKind::Srrc, 4, 512, None).unwrap();
        let t = localization_table(&f, 2, 3).unwrap();
        let e = t.entry(-1, 0);
        assert!(e.re.abs() < 2e-3);
        assert!((e.im + 0.1589).abs() < 2e-3, "got {e}");
    }

    #[test]
    fn srrc_k8_lag3_weight_and_far_corner() {
        let f = PrototypeFilter::design(FilterKind::Srrc, 8, 512, None).unwrap();
        let t = localization_table(&f, 2, 3).unwrap();
        // lag-3 weight on the same subcarrier; magnitude 0.186
        assert!((t.entry(0, 1).im - 0.6278).abs() < 2e-3);
        assert!((t.entry(0, 3).im.abs() - 0.1857).abs() < 2e-3);
        // two subcarriers away the spectra no longer overlap: the far
        // corners are zero (point symmetry |Q(dn,dm)| = |Q(-dn,-dm)| holds
        // for any real pulse)
        assert!(t.entry(2, 3).norm() < 1e-3);
        assert!((t.entry(-2, -3).norm() - t.entry(2, 3).norm()).abs() < 1e-9);
    }

    #[test]
    fn parity_correction_matches_direct_computation() {
        let f = PrototypeFilter::design(FilterKind::Phydyas, 4, 32, None).unwrap();
        let t = localization_table(&f, 2, 3).unwrap();
        // recompute an entry at an odd reference instant directly
        let n_ref = 16i64;
        let m_ref = 7i64;
        let (rs, rq) = basis_function(&f, n_ref, m_ref);
        let (s, q) = basis_function(&f, n_ref + 1, m_ref + 2);
        let mut acc = Complex64::new(0.0, 0.0);
        for (u, &v) in q.iter().enumerate() {
            let rel = s + u as i64 - rs;
            if rel >= 0 && (rel as usize) < rq.len() {
                acc += v * rq[rel as usize].conj();
            }
        }
        assert!((acc - t.entry_at(1, 2, 7)).norm() < 1e-12);
    }

    #[test]
    fn neighborhood_rejects_out_of_range_point() {
        let f = PrototypeFilter::design(FilterKind::Phydyas, 4, 32, None).unwrap();
        let t = localization_table(&f, 2, 3).unwrap();
        let a = OqamGrid::zeros(32, 8);
        let hood = Neighborhood::full_box(2, 3);
        assert!(intrinsic_interference(&a, &t, (1, 4), &hood).is_err());
        assert!(intrinsic_interference(&a, &t, (5, 2), &hood).is_err());
    }

    #[test]
    fn empty_neighborhood_gives_zero() {
        let f = PrototypeFilter::design(FilterKind::Phydyas, 4, 32, None).unwrap();
        let t = localization_table(&f, 2, 3).unwrap();
        let a = OqamGrid::zeros(32, 8);
        let hood = Neighborhood::full_box(2, 3);
        let v = intrinsic_interference(&a, &t, (16, 4), &hood).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn single_neighbor_reproduces_table_entry() {
        let f = PrototypeFilter::design(FilterKind::Phydyas, 4, 64, None).unwrap();
        let t = localization_table(&f, 2, 3).unwrap();
        let mut a = OqamGrid::zeros(64, 10);
        a.a[(32, 5)] = 1.0; // (n', m'+1) relative to (32, 4)
        let hood = Neighborhood::full_box(2, 3);
        let v = intrinsic_interference(&a, &t, (32, 4), &hood).unwrap();
        assert!((v - t.entry(0, 1)).norm() < 1e-12);
        assert!((v.im - 0.564).abs() < 2e-3);
    }

    #[test]
    fn prediction_exact_when_neighborhood_is_isolated() {
        // with every nonzero symbol inside the box, the localization sum
        // reproduces the demodulated value to numerical precision
        let f = PrototypeFilter::design(FilterKind::Phydyas, 4, 32, None).unwrap();
        let t = localization_table(&f, 2, 3).unwrap();
        let hood = Neighborhood::full_box(2, 3);
        let mut a = OqamGrid::zeros(32, 12);
        let point = (16usize, 6usize);
        a.a[(16, 7)] = 1.0;
        a.a[(15, 6)] = -1.0;
        a.a[(17, 5)] = 1.0;
        let x = fbmc_modulate_fast(&a, &f).unwrap();
        let r = fbmc_demodulate(&x, &f, 12).unwrap();
        let pred = intrinsic_interference(&a, &t, point, &hood).unwrap();
        let meas = r[point]; // the point itself carries no symbol
        assert!((meas - pred).norm() < 1e-9, "{meas} vs {pred}");
    }

    #[test]
    fn prediction_matches_loopback_demodulation() {
        // a (2, 5) box keeps the out-of-box tail of this pulse below 2e-3
        let f = PrototypeFilter::design(FilterKind::Phydyas, 4, 32, None).unwrap();
        let t = localization_table(&f, 2, 5).unwrap();
        let hood = Neighborhood::full_box(2, 5);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let mut a = OqamGrid::zeros(32, 16);
        for v in a.a.iter_mut() {
            *v = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        let x = fbmc_modulate_fast(&a, &f).unwrap();
        let r = fbmc_demodulate(&x, &f, 16).unwrap();
        let mut worst = 0.0f64;
        for np in 2..30 {
            for mp in 5..11 {
                let pred = intrinsic_interference(&a, &t, (np, mp), &hood).unwrap();
                let meas = r[(np, mp)] - Complex64::new(a.a[(np, mp)], 0.0);
                worst = worst.max((meas - pred).norm());
            }
        }
        assert!(worst < 2e-3, "worst {worst}");
    }

    #[test]
    fn interference_is_nearly_imaginary_for_orthogonal_pulses() {
        // the real part is bounded by the pulse's real-orthogonality
        // residual, far below the imaginary part
        let f = PrototypeFilter::design(FilterKind::Iota, 4, 64, None).unwrap();
        let t = localization_table(&f, 2, 3).unwrap();
        let hood = Neighborhood::full_box(2, 3);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let mut a = OqamGrid::zeros(64, 10);
        for v in a.a.iter_mut() {
            *v = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        let v = intrinsic_interference(&a, &t, (32, 5), &hood).unwrap();
        assert!(v.re.abs() < 1e-3, "re {}", v.re);
        assert!(v.im.abs() > 0.05);
    }

    #[test]
    fn tpdm_neighborhoods_match_expected_sets() {
        let (co, cross) = structure_neighborhoods(DpStructure::Tpdm, 1, 1);
        assert_eq!(co.offsets, vec![(-1, 0), (1, 0)]);
        let mut want_cross = vec![(-1, -1), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 1)];
        want_cross.sort();
        let mut got = cross.offsets.clone();
        got.sort();
        assert_eq!(got, want_cross);
    }

    #[test]
    fn tfpdm_co_set_is_diagonal() {
        let (co, _) = structure_neighborhoods(DpStructure::Tfpdm, 1, 1);
        let mut got = co.offsets.clone();
        got.sort();
        assert_eq!(got, vec![(-1, -1), (-1, 1), (1, -1), (1, 1)]);
    }

    #[test]
    fn co_and_cross_partition_the_box() {
        for s in [DpStructure::Tpdm, DpStructure::Fpdm, DpStructure::Tfpdm] {
            let (co, cross) = structure_neighborhoods(s, 2, 3);
            let full = Neighborhood::full_box(2, 3);
            assert_eq!(co.offsets.len() + cross.offsets.len(), full.offsets.len());
            for o in &co.offsets {
                assert!(!cross.offsets.contains(o));
            }
        }
    }

    #[test]
    fn render_is_deterministic_and_shaped() {
        let f = PrototypeFilter::design(FilterKind::Srrc, 8, 64, None).unwrap();
        let t = localization_table(&f, 2, 3).unwrap();
        let a = render_table(&t);
        let b = render_table(&t);
        assert_eq!(a, b);
        assert_eq!(a.lines().count(), 6); // header + 5 rows
        assert_eq!(a.lines().nth(1).unwrap().split(',').count(), 8);
        // degenerate 1x1 table holds only the unit self-term
        let t0 = localization_table(&f, 0, 0).unwrap();
        let r0 = render_table(&t0);
        assert!(r0.contains("+1.0000"));
    }

    #[test]
    fn rejects_oversized_box() {
        let f = PrototypeFilter::design(FilterKind::Srrc, 8, 64, None).unwrap();
        assert!(localization_table(&f, 5, 3).is_err());
        assert!(localization_table(&f, 2, 9).is_err());
    }
}

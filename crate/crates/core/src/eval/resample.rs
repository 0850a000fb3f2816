use alloc::vec::Vec;

use rand::Rng;

use super::OofGrade;
use crate::error::{Error, Result};
use crate::rng::{self, Stage};

/// Pairs drawn per grade by default.
pub const PER_GRADE: usize = 3000;

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled {
    /// `(grade, predicted class)` pairs, grouped by ascending grade.
    pub pairs: Vec<(f64, f64)>,
    pub represented: Vec<OofGrade>,
    pub missing: Vec<OofGrade>,
}

/// Draws exactly `per_grade` pairs with replacement from every grade that
/// has at least one patch.
pub fn balanced_resample(labeled: &[(OofGrade, f64)], per_grade: usize, seed: u64) -> Result<Resampled> {
    if labeled.is_empty() {
        return Err(Error::param("no labeled patches to resample"));
    }
    let mut by_grade: [Vec<f64>; 13] = Default::default();
    for &(g, pred) in labeled {
        by_grade[g.index()].push(pred);
    }
    let mut out = Resampled { pairs: Vec::with_capacity(per_grade * 13), represented: Vec::new(), missing: Vec::new() };
    for (g, preds) in OofGrade::all().zip(&by_grade) {
        if preds.is_empty() {
            out.missing.push(g);
            continue;
        }
        out.represented.push(g);
        let mut r = rng::stream(&[seed, Stage::Resample as u64, g.index() as u64]);
        for _ in 0..per_grade {
            out.pairs.push((g.value(), preds[r.random_range(0..preds.len())]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(v: f64) -> OofGrade {
        OofGrade::new(v).unwrap()
    }

    #[test]
    fn all_grades_give_39000_pairs() {
        let labeled: Vec<(OofGrade, f64)> = OofGrade::all().flat_map(|gr| [(gr, 1.0), (gr, 2.0)]).collect();
        let res = balanced_resample(&labeled, PER_GRADE, 1).unwrap();
        assert_eq!(res.pairs.len(), 39_000);
        assert_eq!(res.represented.len(), 13);
        for gr in OofGrade::all() {
            assert_eq!(res.pairs.iter().filter(|p| p.0 == gr.value()).count(), 3000);
        }
    }

    #[test]
    fn single_patch_is_repeated() {
        let res = balanced_resample(&[(g(2.5), 17.0)], PER_GRADE, 3).unwrap();
        assert_eq!(res.pairs.len(), 3000);
        assert!(res.pairs.iter().all(|&p| p == (2.5, 17.0)));
        assert_eq!(res.missing.len(), 12);
    }

    #[test]
    fn deterministic_and_rejects_empty() {
        let labeled = [(g(0.0), 1.0), (g(0.0), 5.0), (g(6.0), 20.0), (g(6.0), 29.0)];
        assert_eq!(balanced_resample(&labeled, 50, 9).unwrap(), balanced_resample(&labeled, 50, 9).unwrap());
        assert_ne!(balanced_resample(&labeled, 50, 9).unwrap(), balanced_resample(&labeled, 50, 10).unwrap());
        assert!(balanced_resample(&[], 10, 0).is_err());
    }
}

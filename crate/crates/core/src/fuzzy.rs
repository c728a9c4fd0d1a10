//! Two-input Mamdani inference on normalised `[−1, 1]` universes.
//!
//! Seven triangular sets with 50% overlap cover each universe, implication is
//! `min`, aggregation is `max`, and the crisp output is the center of gravity
//! of the aggregate sampled on a uniform grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of defuzzification grid points.
pub const DEFAULT_GRID_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    NL,
    NM,
    NS,
    ZR,
    PS,
    PM,
    PL,
}

impl Label {
    pub const ALL: [Label; 7] = [
        Label::NL,
        Label::NM,
        Label::NS,
        Label::ZR,
        Label::PS,
        Label::PM,
        Label::PL,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Label {
        Self::ALL[i]
    }

    pub fn negate(self) -> Label {
        Self::ALL[6 - self.index()]
    }

    /// Peak location of the label's membership function.
    pub fn center(self) -> f64 {
        (self.index() as f64 - 3.0) / 3.0
    }
}

/// The seven triangular sets, with `NL`/`PL` held at 1 beyond `∓1`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MembershipFamily;

impl MembershipFamily {
    pub const HALF_WIDTH: f64 = 1.0 / 3.0;

    pub fn degree(&self, label: Label, x: f64) -> f64 {
        if (label == Label::NL && x <= -1.0) || (label == Label::PL && x >= 1.0) {
            return 1.0;
        }
        (1.0 - (x - label.center()).abs() / Self::HALF_WIDTH).max(0.0)
    }
}

/// Labels with positive degree at `x` (clamped to `[−1, 1]`), ascending.
///
/// The two neighbouring degrees are `1 − f` and `f` for the fractional
/// position `f` between adjacent centers, so they sum to one exactly.
pub fn fuzzify(x: f64) -> Vec<(Label, f64)> {
    let x = if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) };
    let pos = (x + 1.0) * 3.0;
    let lo = (pos.floor() as usize).min(5);
    let frac = pos - lo as f64;
    let mut out = Vec::with_capacity(2);
    if frac < 1.0 {
        out.push((Label::from_index(lo), 1.0 - frac));
    }
    if frac > 0.0 {
        out.push((Label::from_index(lo + 1), frac));
    }
    out
}

/// 7×7 consequent table indexed `[error label][derivative label]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleBase {
    pub table: [[Label; 7]; 7],
}

impl Default for RuleBase {
    fn default() -> Self {
        Self::standard()
    }
}

impl RuleBase {
    /// Standard diagonal rule table. Rows below are listed by derivative
    /// label from `PL` down to `NL`; columns run over the error label from
    /// `NL` to `PL`.
    pub fn standard() -> Self {
        use Label::*;
        let by_derivative: [[Label; 7]; 7] = [
            [ZR, PS, PM, PL, PL, PL, PL],
            [NS, ZR, PS, PM, PL, PL, PL],
            [NM, NS, ZR, PS, PM, PL, PL],
            [NL, NM, NS, ZR, PS, PM, PL],
            [NL, NL, NM, NS, ZR, PS, PM],
            [NL, NL, NL, NM, NS, ZR, PS],
            [NL, NL, NL, NL, NM, NS, ZR],
        ];
        let mut table = [[ZR; 7]; 7];
        for (row, labels) in by_derivative.iter().enumerate() {
            let de = 6 - row;
            for (e, &l) in labels.iter().enumerate() {
                table[e][de] = l;
            }
        }
        Self { table }
    }

    pub fn consequent(&self, e: Label, de: Label) -> Label {
        self.table[e.index()][de.index()]
    }

    /// Whether `table[i][j]` is the negation of `table[6−i][6−j]` everywhere.
    pub fn is_antisymmetric(&self) -> bool {
        (0..7).all(|i| (0..7).all(|j| self.table[i][j] == self.table[6 - i][6 - j].negate()))
    }

    /// Parses a 7×7 label matrix, warning when it breaks antisymmetry.
    pub fn from_json(text: &str) -> Result<Self> {
        let rb: RuleBase = serde_json::from_str(text)?;
        rb.check();
        Ok(rb)
    }

    pub(crate) fn check(&self) {
        if !self.is_antisymmetric() {
            log::warn!("rule base is not antisymmetric; controller output will not be odd in the error");
        }
    }
}

/// Mamdani min–max engine with center-of-gravity defuzzification.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyEngine {
    rules: RuleBase,
    grid: Vec<f64>,
    /// Membership of every output label at every grid point.
    grid_degrees: [Vec<f64>; 7],
}

impl Default for FuzzyEngine {
    fn default() -> Self {
        Self::new(RuleBase::standard(), DEFAULT_GRID_POINTS).expect("default grid is valid")
    }
}

impl FuzzyEngine {
    pub fn new(rules: RuleBase, grid_points: usize) -> Result<Self> {
        if grid_points < 3 {
            return Err(Error::Config("defuzzification grid needs at least 3 points".into()));
        }
        rules.check();
        let m = grid_points - 1;
        // (2k − m)/m keeps mirrored grid points exact negations.
        let grid: Vec<f64> = (0..=m).map(|k| (2.0 * k as f64 - m as f64) / m as f64).collect();
        let mf = MembershipFamily;
        let grid_degrees = Label::ALL.map(|l| grid.iter().map(|&y| mf.degree(l, y)).collect());
        Ok(Self {
            rules,
            grid,
            grid_degrees,
        })
    }

    pub fn rules(&self) -> &RuleBase {
        &self.rules
    }

    pub fn grid_points(&self) -> usize {
        self.grid.len()
    }

    /// Crisp output for normalised inputs (clamped to `[−1, 1]`).
    pub fn infer(&self, e: f64, de: f64) -> f64 {
        // Firing strength per output label (max over rules sharing it).
        let mut strength = [0.0_f64; 7];
        for (le, we) in fuzzify(e) {
            for &(ld, wd) in &fuzzify(de) {
                let out = self.rules.consequent(le, ld).index();
                strength[out] = strength[out].max(we.min(wd));
            }
        }
        let mut active = [(0usize, 0.0_f64); 7];
        let mut n_active = 0;
        for (l, &w) in strength.iter().enumerate() {
            if w > 0.0 {
                active[n_active] = (l, w);
                n_active += 1;
            }
        }
        let active = &active[..n_active];
        let agg = |k: usize| {
            active
                .iter()
                .fold(0.0_f64, |a, &(l, w)| a.max(w.min(self.grid_degrees[l][k])))
        };
        // Only grid points inside the support of a fired consequent matter.
        let m = self.grid.len() - 1;
        let to_index = |y: f64| ((y + 1.0) * 0.5 * m as f64).clamp(0.0, m as f64);
        let lowest = active.iter().map(|&(l, _)| Label::from_index(l).center()).fold(1.0, f64::min);
        let highest = active.iter().map(|&(l, _)| Label::from_index(l).center()).fold(-1.0, f64::max);
        let first = to_index(lowest - MembershipFamily::HALF_WIDTH).floor() as usize;
        let last = to_index(highest + MembershipFamily::HALF_WIDTH).ceil() as usize;
        // Mirrored points are summed in pairs so that mirrored aggregates
        // give exactly opposite moments.
        let (mut num, mut den) = (0.0, 0.0);
        for k in first.min(m - last)..=m / 2 {
            let j = m - k;
            if j == k {
                den += agg(k);
            } else {
                let (lo, hi) = (agg(k), agg(j));
                num += self.grid[j] * (hi - lo);
                den += hi + lo;
            }
        }
        if den <= 0.0 {
            return 0.0;
        }
        (num / den).clamp(-1.0, 1.0)
    }

    /// Central-difference slope of `infer(x, 0)` at the origin.
    pub fn small_signal_slope(&self, h: f64) -> f64 {
        (self.infer(h, 0.0) - self.infer(-h, 0.0)) / (2.0 * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Center of gravity of the PL set clipped at `w`, sampled on `n` points,
    /// computed without the engine.
    fn clipped_pl_cog(w: f64, n: usize) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            let y = -1.0 + 2.0 * k as f64 / (n - 1) as f64;
            let m = if y <= 2.0 / 3.0 { 0.0 } else { (3.0 * (y - 2.0 / 3.0)).min(1.0) };
            let m = m.min(w);
            num += y * m;
            den += m;
        }
        num / den
    }

    #[test]
    fn fuzzify_examples() {
        assert_eq!(fuzzify(0.0), vec![(Label::ZR, 1.0)]);
        let f = fuzzify(1.0 / 6.0);
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].0, Label::ZR);
        assert_eq!(f[1].0, Label::PS);
        assert!((f[0].1 - 0.5).abs() < 1e-12 && (f[1].1 - 0.5).abs() < 1e-12);
        assert_eq!(fuzzify(2.5), vec![(Label::PL, 1.0)]);
        assert_eq!(fuzzify(-7.0), vec![(Label::NL, 1.0)]);
    }

    #[test]
    fn fuzzify_agrees_with_membership_functions() {
        let mf = MembershipFamily;
        for k in 0..=1000 {
            let x = -1.0 + 2.0 * k as f64 / 1000.0;
            let sum: f64 = Label::ALL.iter().map(|&l| mf.degree(l, x)).sum();
            assert!((sum - 1.0).abs() <= 1e-12, "x = {x}: {sum}");
            let active = Label::ALL.iter().filter(|&&l| mf.degree(l, x) > 0.0).count();
            assert!(active <= 2);
            for (l, w) in fuzzify(x) {
                assert!((mf.degree(l, x) - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn standard_table_layout() {
        let rb = RuleBase::standard();
        assert!(rb.is_antisymmetric());
        for i in 0..7 {
            for j in 0..7 {
                let expect = (i as i32 + j as i32 - 3).clamp(0, 6) as usize;
                assert_eq!(rb.table[i][j].index(), expect);
            }
            assert_eq!(rb.table[i][6 - i], Label::ZR);
        }
        assert_eq!(rb.consequent(Label::NL, Label::PL), Label::ZR);
        assert_eq!(rb.consequent(Label::PM, Label::NL), Label::NS);
    }

    #[test]
    fn rule_base_json_roundtrip() {
        let rb = RuleBase::standard();
        let text = serde_json::to_string(&rb).unwrap();
        assert!(text.starts_with("[[\"NL\""));
        assert_eq!(RuleBase::from_json(&text).unwrap(), rb);
        let mut broken = rb.clone();
        broken.table[0][0] = Label::PL;
        let parsed = RuleBase::from_json(&serde_json::to_string(&broken).unwrap()).unwrap();
        assert!(!parsed.is_antisymmetric());
        assert!(RuleBase::from_json("[[\"NL\"]]").is_err());
    }

    #[test]
    fn origin_maps_to_zero() {
        assert_eq!(FuzzyEngine::default().infer(0.0, 0.0), 0.0);
    }

    #[test]
    fn saturated_corner_is_clipped_shoulder_centroid() {
        let eng = FuzzyEngine::default();
        let oracle = clipped_pl_cog(1.0, 201);
        assert!((eng.infer(1.0, 1.0) - oracle).abs() < 1e-12);
        assert!((oracle - 0.8922).abs() < 1e-3, "{oracle}");
        assert!((eng.infer(5.0, 3.0) - oracle).abs() < 1e-12);
    }

    #[test]
    fn odd_symmetry_on_grid() {
        let eng = FuzzyEngine::default();
        for i in 0..41 {
            for j in 0..41 {
                let e = -1.0 + i as f64 / 20.0;
                let d = -1.0 + j as f64 / 20.0;
                assert!((eng.infer(e, d) + eng.infer(-e, -d)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn monotone_along_zero_derivative() {
        let eng = FuzzyEngine::default();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..201 {
            let y = eng.infer(-1.0 + k as f64 / 100.0, 0.0);
            assert!(y >= prev - 1e-15, "k = {k}");
            prev = y;
        }
    }

    #[test]
    fn balanced_anti_diagonal_is_zero() {
        let eng = FuzzyEngine::default();
        for l in Label::ALL {
            assert!(eng.infer(l.center(), -l.center()).abs() < 1e-12);
        }
    }

    #[test]
    fn finer_grid_changes_little() {
        let coarse = FuzzyEngine::default();
        let fine = FuzzyEngine::new(RuleBase::standard(), 401).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=40 {
            for j in 0..=40 {
                let e = -1.0 + i as f64 / 20.0;
                let d = -1.0 + j as f64 / 20.0;
                worst = worst.max((coarse.infer(e, d) - fine.infer(e, d)).abs());
            }
        }
        assert!(worst < 5e-3, "{worst}");
    }

    #[test]
    fn small_signal_slope_is_positive() {
        let s = FuzzyEngine::default().small_signal_slope(1e-3);
        assert!(s > 0.0 && s.is_finite());
    }

    proptest! {
        #[test]
        fn output_bounded_and_odd(e in -3.0f64..3.0, d in -3.0f64..3.0) {
            let eng = FuzzyEngine::default();
            let y = eng.infer(e, d);
            prop_assert!(y.abs() <= 1.0);
            prop_assert!((y + eng.infer(-e, -d)).abs() <= 1e-9);
        }

        #[test]
        fn membership_partition(x in -1.0f64..=1.0) {
            let s: f64 = fuzzify(x).iter().map(|p| p.1).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
    }
}

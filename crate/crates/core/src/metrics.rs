//! Presentation attack detection metrics (ISO/IEC 30107-3 style).
//!
//! A sample is accepted as bona fide iff `score >= threshold`.
//! APCER is the fraction of attacks accepted, BPCER the fraction of bona fide
//! presentations rejected, ACER their mean.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{AttackType, Label};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    /// `P(bona fide)`.
    pub score: f64,
    pub truth: Label,
    pub attack_type: AttackType,
}

impl ScoredSample {
    pub fn new(score: f64, attack_type: AttackType) -> Result<Self> {
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(Error::Metrics(format!("score {score} outside [0, 1]")));
        }
        Ok(Self {
            score,
            truth: attack_type.label(),
            attack_type,
        })
    }

    fn accepted(&self, threshold: f64) -> bool {
        Label::from_score(self.score, threshold) == Label::BonaFide
    }
}

/// Confusion counts with bona fide as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    /// Bona fide accepted.
    pub ta: u64,
    /// Attack accepted.
    pub fa: u64,
    /// Attack rejected.
    pub tr: u64,
    /// Bona fide rejected.
    pub fr: u64,
}

impl Confusion {
    pub fn attacks(&self) -> u64 {
        self.fa + self.tr
    }

    pub fn bona_fide(&self) -> u64 {
        self.ta + self.fr
    }

    pub fn total(&self) -> u64 {
        self.attacks() + self.bona_fide()
    }

    /// `2 · ACER · attacks · bona_fide`, an integer that orders thresholds
    /// by ACER without rounding.
    fn acer_numerator(&self) -> u64 {
        self.fa * self.bona_fide() + self.fr * self.attacks()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackBreakdown {
    pub count: u64,
    pub accepted: u64,
    pub apcer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    /// Pooled over every attack type.
    pub apcer: f64,
    /// Worst attack type.
    pub apcer_max: f64,
    pub bpcer: f64,
    pub acer: f64,
    /// Equal to `acer`: with one bona fide class and one pooled attack
    /// class, false acceptance and false rejection rates are APCER and BPCER.
    pub hter: f64,
    pub counts: Confusion,
    pub per_attack: BTreeMap<AttackType, AttackBreakdown>,
}

fn ratio(num: u64, den: u64) -> f64 {
    num as f64 / den as f64
}

pub fn confusion(samples: &[ScoredSample], threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for s in samples {
        match (s.truth, s.accepted(threshold)) {
            (Label::BonaFide, true) => c.ta += 1,
            (Label::BonaFide, false) => c.fr += 1,
            (Label::Attack, true) => c.fa += 1,
            (Label::Attack, false) => c.tr += 1,
        }
    }
    c
}

/// APCER within each attack type present in `samples`.
pub fn per_attack_breakdown(samples: &[ScoredSample], threshold: f64) -> BTreeMap<AttackType, AttackBreakdown> {
    let mut map: BTreeMap<AttackType, (u64, u64)> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.truth == Label::Attack) {
        let e = map.entry(s.attack_type).or_default();
        e.0 += 1;
        e.1 += u64::from(s.accepted(threshold));
    }
    map.into_iter()
        .map(|(k, (count, accepted))| {
            (
                k,
                AttackBreakdown {
                    count,
                    accepted,
                    apcer: ratio(accepted, count),
                },
            )
        })
        .collect()
}

fn check_classes(c: &Confusion) -> Result<()> {
    if c.bona_fide() == 0 {
        return Err(Error::Metrics("no bona fide samples".into()));
    }
    if c.attacks() == 0 {
        return Err(Error::Metrics("no attack samples".into()));
    }
    Ok(())
}

pub fn compute_report(samples: &[ScoredSample], threshold: f64) -> Result<EvalReport> {
    let counts = confusion(samples, threshold);
    check_classes(&counts)?;
    let (na, nb) = (counts.attacks(), counts.bona_fide());
    let per_attack = per_attack_breakdown(samples, threshold);
    let acer = ratio(counts.acer_numerator(), 2 * na * nb);
    Ok(EvalReport {
        threshold,
        apcer: ratio(counts.fa, na),
        apcer_max: per_attack.values().map(|b| b.apcer).fold(0.0, f64::max),
        bpcer: ratio(counts.fr, nb),
        acer,
        hter: acer,
        counts,
        per_attack,
    })
}

/// Candidate thresholds: every distinct score and the midpoints between
/// neighbouring distinct scores, ascending.
pub fn threshold_candidates(samples: &[ScoredSample]) -> Vec<f64> {
    let mut scores: Vec<f64> = samples.iter().map(|s| s.score).collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    let mut out = Vec::with_capacity(scores.len() * 2);
    for (i, &s) in scores.iter().enumerate() {
        if i > 0 {
            out.push(scores[i - 1] + (s - scores[i - 1]) / 2.0);
        }
        out.push(s);
    }
    out
}

/// Threshold minimizing ACER on `samples`.
///
/// Ties go to the candidate closest to 0.5, then to the smaller one.
pub fn select_threshold(samples: &[ScoredSample]) -> Result<f64> {
    let probe = confusion(samples, 0.5);
    check_classes(&probe)?;
    let (mut bona, mut attack): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    for s in samples {
        match s.truth {
            Label::BonaFide => bona.push(s.score),
            Label::Attack => attack.push(s.score),
        }
    }
    bona.sort_by(f64::total_cmp);
    attack.sort_by(f64::total_cmp);
    let (na, nb) = (attack.len() as u64, bona.len() as u64);

    let mut best: Option<(u64, f64)> = None;
    for t in threshold_candidates(samples) {
        let fr = bona.partition_point(|&s| s < t) as u64;
        let fa = na - attack.partition_point(|&s| s < t) as u64;
        let key = fa * nb + fr * na;
        let better = match best {
            None => true,
            Some((k, bt)) => key < k || (key == k && (t - 0.5).abs() < (bt - 0.5).abs()),
        };
        if better {
            best = Some((key, t));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

impl EvalReport {
    /// Flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let c = &self.counts;
        let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").unwrap();
        kv("threshold", self.threshold.to_string());
        kv("apcer", format!("{:.6}", self.apcer));
        kv("apcer_max", format!("{:.6}", self.apcer_max));
        kv("bpcer", format!("{:.6}", self.bpcer));
        kv("acer", format!("{:.6}", self.acer));
        kv("hter", format!("{:.6}", self.hter));
        kv("ta", c.ta.to_string());
        kv("fa", c.fa.to_string());
        kv("tr", c.tr.to_string());
        kv("fr", c.fr.to_string());
        for (a, b) in &self.per_attack {
            kv(&format!("apcer.{a}"), format!("{:.6}", b.apcer));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(score: f64, a: AttackType) -> ScoredSample {
        ScoredSample::new(score, a).unwrap()
    }

    fn separated() -> Vec<ScoredSample> {
        vec![
            s(0.9, AttackType::None),
            s(0.9, AttackType::None),
            s(0.1, AttackType::VideoReplay),
            s(0.1, AttackType::NormalPrint),
        ]
    }

    #[test]
    fn perfect_separation() {
        let r = compute_report(&separated(), 0.5).unwrap();
        assert_eq!((r.apcer, r.bpcer, r.acer), (0.0, 0.0, 0.0));
        assert_eq!(
            r.counts,
            Confusion {
                ta: 2,
                fa: 0,
                tr: 2,
                fr: 0
            }
        );
    }

    #[test]
    fn acer_scale_example() {
        // 1 of 50 attacks accepted, 17 of 500 bona fide rejected.
        let mut v = vec![s(0.9, AttackType::GlossyPrint)];
        v.extend((0..49).map(|_| s(0.1, AttackType::GlossyPrint)));
        v.extend((0..17).map(|_| s(0.2, AttackType::None)));
        v.extend((0..483).map(|_| s(0.8, AttackType::None)));
        let r = compute_report(&v, 0.5).unwrap();
        assert_eq!(r.apcer, 0.02);
        assert_eq!(r.bpcer, 0.034);
        assert!((r.acer - 0.027).abs() < 1e-15);
    }

    #[test]
    fn empty_class_named() {
        let only_bona = vec![s(0.3, AttackType::None)];
        let e = compute_report(&only_bona, 0.5).unwrap_err().to_string();
        assert!(e.contains("attack"), "{e}");
        let only_attack = vec![s(0.3, AttackType::VideoReplay)];
        let e = compute_report(&only_attack, 0.5).unwrap_err().to_string();
        assert!(e.contains("bona fide"), "{e}");
    }

    #[test]
    fn score_range_enforced() {
        assert!(ScoredSample::new(1.5, AttackType::None).is_err());
        assert!(ScoredSample::new(f64::NAN, AttackType::None).is_err());
    }

    #[test]
    fn threshold_extremes() {
        let v = separated();
        assert_eq!(compute_report(&v, 0.0).unwrap().bpcer, 0.0);
        assert_eq!(compute_report(&v, 1.0 + 1e-9).unwrap().apcer, 0.0);
    }

    #[test]
    fn separated_set_picks_candidate_nearest_half() {
        let v = vec![
            s(0.875, AttackType::None),
            s(0.75, AttackType::None),
            s(0.125, AttackType::NormalPrint),
            s(0.0625, AttackType::NormalPrint),
        ];
        // Zero-error candidates: 0.4375 (midpoint) and 0.75.
        assert_eq!(select_threshold(&v).unwrap(), 0.4375);
    }

    #[test]
    fn identical_scores_degenerate() {
        let v = vec![s(0.6, AttackType::None), s(0.6, AttackType::VideoReplay)];
        let t = select_threshold(&v).unwrap();
        assert_eq!(t, 0.6);
        assert_eq!(compute_report(&v, t).unwrap().acer, 0.5);
    }

    #[test]
    fn candidates_include_midpoints() {
        let v = vec![
            s(0.6, AttackType::None),
            s(0.4, AttackType::None),
            s(0.2, AttackType::VideoReplay),
        ];
        let cands = threshold_candidates(&v);
        assert_eq!(cands, [0.2, 0.2 + (0.4 - 0.2) / 2.0, 0.4, 0.5, 0.6]);
        // Zero error on (0.2, 0.4]; 0.4 is the candidate nearest 0.5.
        assert_eq!(select_threshold(&v).unwrap(), 0.4);
    }

    #[test]
    fn single_subtype_breakdown_equals_pooled() {
        let v = vec![
            s(0.7, AttackType::None),
            s(0.6, AttackType::VideoReplay),
            s(0.2, AttackType::VideoReplay),
        ];
        let r = compute_report(&v, 0.5).unwrap();
        assert_eq!(r.per_attack.len(), 1);
        assert_eq!(r.per_attack[&AttackType::VideoReplay].apcer, r.apcer);
        assert_eq!(r.apcer_max, r.apcer);
    }

    #[test]
    fn kv_and_json_forms() {
        let r = compute_report(&separated(), 0.5).unwrap();
        let kv = r.to_kv();
        assert!(kv.contains("acer=0.000000\n"));
        assert!(kv.contains("apcer.video_replay=0.000000\n"));
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    fn attack_type() -> impl Strategy<Value = AttackType> {
        prop_oneof![
            Just(AttackType::None),
            Just(AttackType::None),
            proptest::sample::select(AttackType::ATTACKS.to_vec()),
        ]
    }

    fn scored_set() -> impl Strategy<Value = Vec<ScoredSample>> {
        let score = prop_oneof![0.0f64..=1.0, (0u32..=10).prop_map(|k| k as f64 / 10.0)];
        proptest::collection::vec((score, attack_type()), 2..120)
            .prop_map(|v| v.into_iter().map(|(sc, a)| ScoredSample::new(sc, a).unwrap()).collect())
    }

    fn has_both(v: &[ScoredSample]) -> bool {
        v.iter().any(|s| s.truth == Label::BonaFide) && v.iter().any(|s| s.truth == Label::Attack)
    }

    proptest! {
        #[test]
        fn monotone_in_threshold(v in scored_set(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            prop_assume!(has_both(&v));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (rl, rh) = (compute_report(&v, lo).unwrap(), compute_report(&v, hi).unwrap());
            prop_assert!(rh.apcer <= rl.apcer);
            prop_assert!(rh.bpcer >= rl.bpcer);
        }

        #[test]
        fn acer_is_mean_and_counts_sum(v in scored_set(), t in 0.0f64..=1.0) {
            prop_assume!(has_both(&v));
            let r = compute_report(&v, t).unwrap();
            prop_assert!((r.acer - (r.apcer + r.bpcer) / 2.0).abs() <= f64::EPSILON);
            prop_assert_eq!(r.counts.total(), v.len() as u64);
        }

        #[test]
        fn pooled_apcer_is_weighted_mean(v in scored_set(), t in 0.0f64..=1.0) {
            prop_assume!(has_both(&v));
            let r = compute_report(&v, t).unwrap();
            let accepted: u64 = r.per_attack.values().map(|b| b.accepted).sum();
            let weighted: f64 = r.per_attack.values().map(|b| b.apcer * b.count as f64).sum::<f64>()
                / r.counts.attacks() as f64;
            prop_assert_eq!(accepted, r.counts.fa);
            prop_assert!((weighted - r.apcer).abs() < 1e-12);
        }

        #[test]
        fn selected_threshold_beats_every_candidate(v in scored_set()) {
            prop_assume!(has_both(&v));
            let t = select_threshold(&v).unwrap();
            let chosen = compute_report(&v, t).unwrap().acer;
            prop_assert!(chosen <= compute_report(&v, 0.5).unwrap().acer + 1e-15);
            for c in threshold_candidates(&v) {
                prop_assert!(chosen <= compute_report(&v, c).unwrap().acer + 1e-15);
            }
        }
    }
}

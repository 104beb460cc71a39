//! Threat scores for synthesized edges: tactic-transition and
//! technique-transition terms looked up in the pattern trees, plus a
//! degree-based neighboring-interaction term, mixed by configurable weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{AttSpt, PatternTree};
use crate::subgraph::AnomalySubgraph;
use crate::ttp::{Tactic, TechniqueId, TtpAnnotation};

/// Weights and scales for edge scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoringParams {
    /// Technique-transition scale.
    pub a: f64,
    /// Tactic-transition scale.
    pub b: f64,
    /// Floor for transitions never observed in the pattern tree.
    pub epsilon: f64,
    /// Weight of the tactic term.
    pub alpha: f64,
    /// Weight of the technique term; the interaction term gets 1 − α − β.
    pub beta: f64,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams {
            a: 1.0,
            b: 1.0,
            epsilon: 0.01,
            alpha: 0.4,
            beta: 0.4,
        }
    }
}

impl ScoringParams {
    pub fn validate(&self) -> Result<()> {
        if self.a.is_nan() || self.a <= 0.0 || self.b.is_nan() || self.b <= 0.0 {
            return Err(Error::InvalidParameter(
                "scales a and b must be positive".into(),
            ));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 || self.epsilon >= 1.0 {
            return Err(Error::InvalidParameter(
                "epsilon must lie strictly between 0 and 1".into(),
            ));
        }
        if self.alpha < 0.0 || self.beta < 0.0 || self.alpha + self.beta > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(
                "alpha and beta must be non-negative with alpha + beta <= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-edge score decomposition, kept alongside the total for
/// explainability output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeScoreBreakdown {
    pub src: String,
    pub dst: String,
    pub tactic: f64,
    pub technique: f64,
    pub ni_raw: f64,
    pub ni_norm: f64,
    pub total: f64,
    /// True when an endpoint lacked a usable label (placeholder technique
    /// or unmapped tactic), so a floor value was substituted.
    pub flagged: bool,
}

/// Tactic-transition score. Same tactic on both ends scores the maximum
/// `b`; otherwise every downward tree segment from an occurrence of `src`
/// to a descendant labeled `dst` contributes 1/len, normalized by the
/// number of complete branches below `src` occurrences. Unmapped endpoints
/// or absent transitions score 0.
pub fn tactic_score(
    src: Option<Tactic>,
    dst: Option<Tactic>,
    tactic_pt: &PatternTree<Tactic>,
    b: f64,
) -> (f64, bool) {
    let (Some(s), Some(t)) = (src, dst) else {
        return (0.0, true);
    };
    if s == t {
        return (b, false);
    }
    let occurrences = tactic_pt.occurrences(&s);
    if occurrences.is_empty() {
        return (0.0, false);
    }
    let mut inverse_len_sum = 0.0;
    let mut branches = 0usize;
    for &occ in &occurrences {
        branches += tactic_pt.leaf_count_under(occ);
        for len in tactic_pt.descendant_distances(occ, &t) {
            inverse_len_sum += 1.0 / len as f64;
        }
    }
    if inverse_len_sum == 0.0 || branches == 0 {
        return (0.0, false);
    }
    let score = b * inverse_len_sum / branches as f64;
    (score.min(b), false)
}

/// Technique-transition score: `a` times the best of a direct parent-child
/// edge (1), the best indirect downward segment (1/len), or the floor ε.
pub fn technique_score(
    src: &TechniqueId,
    dst: &TechniqueId,
    technique_pt: &PatternTree<TechniqueId>,
    a: f64,
    epsilon: f64,
) -> (f64, bool) {
    if src.is_sentinel() || dst.is_sentinel() {
        return (a * epsilon, true);
    }
    let mut best = epsilon;
    for occ in technique_pt.occurrences(src) {
        for len in technique_pt.descendant_distances(occ, dst) {
            best = best.max(1.0 / len as f64);
        }
    }
    (a * best, false)
}

/// Raw neighboring-interaction value of one edge: how much the source
/// depends on upstream activity plus how much the destination fans out.
/// A zero numerator or denominator in either ratio switches that ratio to
/// add-one smoothing.
pub fn ni_raw(edge_src: &str, edge_dst: &str, sg: &AnomalySubgraph) -> f64 {
    let (src_in, src_out) = sg.degrees(edge_src);
    let (dst_in, dst_out) = sg.degrees(edge_dst);
    smoothed_ratio(src_in as f64, src_out as f64) + smoothed_ratio(dst_out as f64, dst_in as f64)
}

fn smoothed_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 || den == 0.0 {
        (num + 1.0) / (den + 1.0)
    } else {
        num / den
    }
}

/// Min-max normalizes raw values into [0,1]; a constant slice maps to 0.5.
pub fn min_max_normalize(raw: &[f64]) -> Vec<f64> {
    let Some(min) = raw.iter().copied().reduce(f64::min) else {
        return Vec::new();
    };
    let max = raw.iter().copied().reduce(f64::max).unwrap();
    if (max - min).abs() < f64::EPSILON {
        return vec![0.5; raw.len()];
    }
    raw.iter().map(|&v| (v - min) / (max - min)).collect()
}

/// Scores every edge of the subgraph, in the subgraph's edge order.
pub fn score_edges(
    sg: &AnomalySubgraph,
    annotations: &TtpAnnotation,
    attspt: &AttSpt,
    params: &ScoringParams,
) -> Result<Vec<EdgeScoreBreakdown>> {
    params.validate()?;
    let edges: Vec<_> = (0..sg.edge_count()).map(|i| sg.edge(i)).collect();
    let raw: Vec<f64> = edges.iter().map(|e| ni_raw(&e.src, &e.dst, sg)).collect();
    let norm = min_max_normalize(&raw);
    let mut out = Vec::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        let s = annotations.labels_of(&e.src);
        let t = annotations.labels_of(&e.dst);
        let (tac, tac_flag) = tactic_score(s.tactic, t.tactic, &attspt.tactic_pt, params.b);
        let (tech, tech_flag) = technique_score(
            &s.technique,
            &t.technique,
            &attspt.technique_pt,
            params.a,
            params.epsilon,
        );
        let total = params.alpha * tac + params.beta * tech
            + (1.0 - params.alpha - params.beta) * norm[i];
        out.push(EdgeScoreBreakdown {
            src: e.src.clone(),
            dst: e.dst.clone(),
            tactic: tac,
            technique: tech,
            ni_raw: raw[i],
            ni_norm: norm[i],
            total,
            flagged: tac_flag || tech_flag,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::build_technique_pt;
    use crate::subgraph::{AnomalySubgraph, SynthEdge};
    use crate::ttp::NodeTtp;

    fn tid(s: &str) -> TechniqueId {
        TechniqueId::parse(s).unwrap()
    }

    /// Tactic tree used by the worked transition-score examples: Initial
    /// Access heads four branches, two of which pass through Credential
    /// Access at depths 3 and 2; Defense Evasion heads two branches, one
    /// reaching Credential Access directly.
    fn worked_example_tree() -> PatternTree<Tactic> {
        use Tactic::*;
        let mut tree: PatternTree<Tactic> = PatternTree::new();
        tree.insert(&[InitialAccess, Persistence, PrivilegeEscalation, CredentialAccess]);
        tree.insert(&[InitialAccess, Discovery, CredentialAccess]);
        tree.insert(&[InitialAccess, LateralMovement]);
        tree.insert(&[InitialAccess, Exfiltration]);
        tree.insert(&[DefenseEvasion, CredentialAccess]);
        tree.insert(&[DefenseEvasion, Impact]);
        tree
    }

    #[test]
    fn tactic_transition_sums_inverse_lengths_over_branch_count() {
        let tree = worked_example_tree();
        for b in [1.0, 2.5] {
            let (score, flagged) = tactic_score(
                Some(Tactic::InitialAccess),
                Some(Tactic::CredentialAccess),
                &tree,
                b,
            );
            assert!(!flagged);
            // Two segments of lengths 3 and 2 over four branches.
            assert!((score - b * (1.0 / 3.0 + 1.0 / 2.0) / 4.0).abs() < 1e-9);
            assert!((score - b * 0.208_333_333).abs() < 1e-6);
        }
    }

    #[test]
    fn same_tactic_scores_the_maximum_even_when_absent_from_tree() {
        let tree = worked_example_tree();
        let (s, _) = tactic_score(Some(Tactic::Execution), Some(Tactic::Execution), &tree, 2.0);
        assert_eq!(s, 2.0);
        let (s, _) = tactic_score(Some(Tactic::Impact), Some(Tactic::Impact), &tree, 2.0);
        assert_eq!(s, 2.0);
    }

    #[test]
    fn absent_transition_scores_zero() {
        let tree = worked_example_tree();
        let (s, flagged) = tactic_score(
            Some(Tactic::DefenseEvasion),
            Some(Tactic::Execution),
            &tree,
            1.0,
        );
        assert_eq!(s, 0.0);
        assert!(!flagged);
    }

    #[test]
    fn direct_tactic_child_over_two_branches_scores_half() {
        let tree = worked_example_tree();
        let (s, _) = tactic_score(
            Some(Tactic::DefenseEvasion),
            Some(Tactic::CredentialAccess),
            &tree,
            1.0,
        );
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unmapped_tactic_endpoint_scores_zero_and_flags() {
        let tree = worked_example_tree();
        let (s, flagged) = tactic_score(None, Some(Tactic::CredentialAccess), &tree, 1.0);
        assert_eq!(s, 0.0);
        assert!(flagged);
    }

    #[test]
    fn tactic_score_is_clamped_to_b() {
        // A single branch revisiting Credential Access three times at
        // depths 1..3 would exceed b without the clamp:
        // (1 + 1/2 + 1/3) / 1 > 1.
        use Tactic::*;
        let mut tree: PatternTree<Tactic> = PatternTree::new();
        tree.insert(&[
            InitialAccess,
            CredentialAccess,
            Execution,
            CredentialAccess,
            Discovery,
            CredentialAccess,
        ]);
        let (s, _) = tactic_score(Some(InitialAccess), Some(CredentialAccess), &tree, 1.0);
        assert_eq!(s, 1.0);
    }

    fn campaign_tree() -> PatternTree<TechniqueId> {
        build_technique_pt(&[
            vec![tid("T1589"), tid("T1566"), tid("T1059"), tid("T1140"), tid("T1105")],
            vec![tid("T1584"), tid("T1190"), tid("T1505"), tid("T1056"), tid("T1071")],
            vec![tid("T1583"), tid("T1190"), tid("T1090")],
            vec![
                tid("T1583"),
                tid("T1190"),
                tid("T1059"),
                tid("T1070"),
                tid("T1056"),
                tid("T1087"),
            ],
        ])
    }

    #[test]
    fn direct_technique_edge_scores_full_scale() {
        let tree = campaign_tree();
        let (s, flagged) = technique_score(&tid("T1589"), &tid("T1566"), &tree, 2.0, 0.01);
        assert_eq!(s, 2.0);
        assert!(!flagged);
    }

    #[test]
    fn indirect_technique_segment_scores_inverse_length() {
        let tree = campaign_tree();
        // T1583 -> T1190 -> T1059 -> T1070 is three edges.
        let (s, _) = technique_score(&tid("T1583"), &tid("T1070"), &tree, 1.0, 0.01);
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
        // T1190 -> T1059 -> T1070 is two edges.
        let (s, _) = technique_score(&tid("T1190"), &tid("T1070"), &tree, 1.0, 0.01);
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unobserved_technique_transition_floors_at_epsilon() {
        let tree = campaign_tree();
        let (s, flagged) = technique_score(&tid("T1105"), &tid("T1589"), &tree, 2.0, 0.01);
        assert!((s - 0.02).abs() < 1e-12);
        assert!(!flagged);
    }

    #[test]
    fn placeholder_technique_floors_and_flags() {
        let tree = campaign_tree();
        let (s, flagged) =
            technique_score(&TechniqueId::sentinel(), &tid("T1589"), &tree, 1.0, 0.01);
        assert!((s - 0.01).abs() < 1e-12);
        assert!(flagged);
    }

    fn star_subgraph() -> AnomalySubgraph {
        // u has four in-edges and one out-edge (to v); v fans out to three.
        let mut edges = vec![SynthEdge {
            src: "u".into(),
            dst: "v".into(),
            ts: 10,
            pruned: 0,
            witness: vec![],
        }];
        for (i, s) in ["i1", "i2", "i3", "i4"].iter().enumerate() {
            edges.push(SynthEdge {
                src: (*s).into(),
                dst: "u".into(),
                ts: i as i64,
                pruned: 0,
                witness: vec![],
            });
        }
        for (i, t) in ["o1", "o2", "o3"].iter().enumerate() {
            edges.push(SynthEdge {
                src: "v".into(),
                dst: (*t).into(),
                ts: 20 + i as i64,
                pruned: 0,
                witness: vec![],
            });
        }
        let nodes = ["u", "v", "i1", "i2", "i3", "i4", "o1", "o2", "o3"]
            .iter()
            .map(|s| (s.to_string(), s.to_string()))
            .collect();
        AnomalySubgraph::from_parts(nodes, edges)
    }

    #[test]
    fn interaction_ratio_matches_hand_computation() {
        let sg = star_subgraph();
        // u: in 4 / out 1; v: out 3 / in 1.
        assert!((ni_raw("u", "v", &sg) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn zero_ratios_switch_to_add_one_smoothing() {
        // u: in 0, out 2 -> (0+1)/(2+1); v: out 0, in 1 -> (0+1)/(1+1).
        let nodes = ["u", "v", "w"]
            .iter()
            .map(|s| (s.to_string(), s.to_string()))
            .collect();
        let edges = vec![
            SynthEdge {
                src: "u".into(),
                dst: "v".into(),
                ts: 1,
                pruned: 0,
                witness: vec![],
            },
            SynthEdge {
                src: "u".into(),
                dst: "w".into(),
                ts: 2,
                pruned: 0,
                witness: vec![],
            },
        ];
        let sg = AnomalySubgraph::from_parts(nodes, edges);
        let raw = ni_raw("u", "v", &sg);
        assert!((raw - (1.0 / 3.0 + 0.5)).abs() < 1e-9);
        assert!((raw - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn single_edge_subgraph_normalizes_to_half() {
        let nodes = [("u", "u"), ("v", "v")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let edges = vec![SynthEdge {
            src: "u".into(),
            dst: "v".into(),
            ts: 1,
            pruned: 0,
            witness: vec![],
        }];
        let sg = AnomalySubgraph::from_parts(nodes, edges);
        let scores = score_edges(
            &sg,
            &TtpAnnotation::default(),
            &AttSpt::default(),
            &ScoringParams::default(),
        )
        .unwrap();
        assert_eq!(scores.len(), 1);
        assert_eq!(scores[0].ni_norm, 0.5);
    }

    #[test]
    fn mixture_collapses_to_single_terms_at_extreme_weights() {
        let sg = star_subgraph();
        let mut annotations = TtpAnnotation::default();
        for id in ["u", "v", "i1", "i2", "i3", "i4", "o1", "o2", "o3"] {
            annotations.insert(
                id.to_string(),
                NodeTtp {
                    technique: tid("T1583"),
                    tactic: Some(Tactic::ResourceDevelopment),
                },
            );
        }
        let attspt = AttSpt {
            technique_pt: campaign_tree(),
            tactic_pt: worked_example_tree(),
        };
        let tactic_only = ScoringParams {
            alpha: 1.0,
            beta: 0.0,
            ..ScoringParams::default()
        };
        for s in score_edges(&sg, &annotations, &attspt, &tactic_only).unwrap() {
            assert!((s.total - s.tactic).abs() < 1e-12);
        }
        let technique_only = ScoringParams {
            alpha: 0.0,
            beta: 1.0,
            ..ScoringParams::default()
        };
        for s in score_edges(&sg, &annotations, &attspt, &technique_only).unwrap() {
            assert!((s.total - s.technique).abs() < 1e-12);
        }
    }

    #[test]
    fn totals_stay_within_the_mixture_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let sg = star_subgraph();
        let attspt = AttSpt {
            technique_pt: campaign_tree(),
            tactic_pt: worked_example_tree(),
        };
        let pool = ["T1583", "T1190", "T1059", "T1070", "T0000"];
        let tactics = [
            None,
            Some(Tactic::InitialAccess),
            Some(Tactic::CredentialAccess),
            Some(Tactic::DefenseEvasion),
        ];
        for _ in 0..100 {
            let mut annotations = TtpAnnotation::default();
            for id in ["u", "v", "i1", "i2", "i3", "i4", "o1", "o2", "o3"] {
                annotations.insert(
                    id.to_string(),
                    NodeTtp {
                        technique: tid(pool[rng.gen_range(0..pool.len())]),
                        tactic: tactics[rng.gen_range(0..tactics.len())],
                    },
                );
            }
            let alpha = rng.gen_range(0.0..=1.0);
            let params = ScoringParams {
                alpha,
                beta: rng.gen_range(0.0..=(1.0 - alpha)),
                a: rng.gen_range(0.1..3.0),
                b: rng.gen_range(0.1..3.0),
                ..ScoringParams::default()
            };
            for s in score_edges(&sg, &annotations, &attspt, &params).unwrap() {
                assert!(s.tactic >= 0.0 && s.tactic <= params.b + 1e-12);
                assert!(
                    s.technique >= params.a * params.epsilon - 1e-12
                        && s.technique <= params.a + 1e-12
                );
                assert!((0.0..=1.0).contains(&s.ni_norm));
                let bound = params.b.max(params.a).max(1.0);
                assert!(s.total >= 0.0 && s.total <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn growing_the_tree_never_shrinks_tactic_numerators() {
        // Nested sequence sets: each step inserts one more sequence; the
        // unnormalized inverse-length sum for a fixed transition must be
        // monotone non-decreasing.
        use Tactic::*;
        let steps: Vec<Vec<Tactic>> = vec![
            vec![InitialAccess, Discovery, CredentialAccess],
            vec![InitialAccess, Persistence, PrivilegeEscalation, CredentialAccess],
            vec![InitialAccess, CredentialAccess],
            vec![DefenseEvasion, CredentialAccess],
        ];
        let mut tree: PatternTree<Tactic> = PatternTree::new();
        let mut last_sum = 0.0;
        for step in steps {
            tree.insert(&step);
            let mut sum = 0.0;
            for occ in tree.occurrences(&InitialAccess) {
                for len in tree.descendant_distances(occ, &CredentialAccess) {
                    sum += 1.0 / len as f64;
                }
            }
            assert!(sum >= last_sum - 1e-12);
            last_sum = sum;
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let bad = ScoringParams {
            alpha: 0.7,
            beta: 0.7,
            ..ScoringParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScoringParams {
            epsilon: 0.0,
            ..ScoringParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = ScoringParams {
            a: 0.0,
            ..ScoringParams::default()
        };
        assert!(bad.validate().is_err());
    }
}

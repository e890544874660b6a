//! Filtered ranking metrics (MRR, Hits@k) over head and tail corruption.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{NodeId, RelationId, Triple};
use crate::matrix::Matrix;

use super::decoder::{score_all, Decoder};

/// Anything that can score every candidate entity for a query.
pub trait TripleScorer: Sync {
    fn entity_count(&self) -> usize;
    /// `out[j] = score(head, relation, j)`.
    fn score_tails(&self, head: NodeId, relation: RelationId, out: &mut [f32]);
    /// `out[j] = score(j, relation, tail)`.
    fn score_heads(&self, relation: RelationId, tail: NodeId, out: &mut [f32]);
}

/// Decoder with every entity's representation precomputed.
pub struct DecoderScorer<'a> {
    decoder: &'a Decoder,
    reps: Matrix,
}

impl<'a> DecoderScorer<'a> {
    /// `embeddings` holds the decoder input of every entity.
    pub fn new(decoder: &'a Decoder, embeddings: &Matrix) -> crate::Result<Self> {
        Ok(Self { decoder, reps: decoder.represent(embeddings)? })
    }

    fn query(&self, anchor: NodeId, relation: RelationId) -> Vec<f32> {
        let w = self.decoder.relations.row(relation as usize);
        self.reps.row(anchor as usize).iter().zip(w).map(|(a, b)| a * b).collect()
    }
}

impl TripleScorer for DecoderScorer<'_> {
    fn entity_count(&self) -> usize {
        self.reps.rows()
    }

    fn score_tails(&self, head: NodeId, relation: RelationId, out: &mut [f32]) {
        score_all(&self.reps, &self.query(head, relation), out);
    }

    fn score_heads(&self, relation: RelationId, tail: NodeId, out: &mut [f32]) {
        // DistMult is symmetric in head and tail.
        score_all(&self.reps, &self.query(tail, relation), out);
    }
}

/// Sorted lookup of known triples by `(head, relation)` and `(relation, tail)`.
#[derive(Clone, Debug, Default)]
pub struct KnownTriples {
    by_head: Vec<Triple>,
    /// Stored as `(relation, tail, head)`.
    by_tail: Vec<Triple>,
}

impl KnownTriples {
    pub fn new(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut by_head: Vec<Triple> = triples.into_iter().collect();
        by_head.sort_unstable();
        by_head.dedup();
        let mut by_tail: Vec<Triple> = by_head.iter().map(|&(h, r, t)| (r, t, h)).collect();
        by_tail.sort_unstable();
        Self { by_head, by_tail }
    }

    pub fn len(&self) -> usize {
        self.by_head.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_head.is_empty()
    }

    pub fn contains(&self, t: Triple) -> bool {
        self.by_head.binary_search(&t).is_ok()
    }

    fn range(v: &[Triple], a: u32, b: u32) -> &[Triple] {
        let lo = v.partition_point(|x| (x.0, x.1) < (a, b));
        let hi = v.partition_point(|x| (x.0, x.1) <= (a, b));
        &v[lo..hi]
    }

    /// Known tails of `(head, relation, ?)`.
    pub fn tails(&self, head: NodeId, relation: RelationId) -> impl Iterator<Item = NodeId> + '_ {
        Self::range(&self.by_head, head, relation).iter().map(|x| x.2)
    }

    /// Known heads of `(?, relation, tail)`.
    pub fn heads(&self, relation: RelationId, tail: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        Self::range(&self.by_tail, relation, tail).iter().map(|x| x.2)
    }
}

/// Scores every triple the same; with pessimistic ties it is the
/// worst-case baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstantScorer(pub usize);

impl TripleScorer for ConstantScorer {
    fn entity_count(&self) -> usize {
        self.0
    }
    fn score_tails(&self, _: NodeId, _: RelationId, out: &mut [f32]) {
        out.fill(0.0);
    }
    fn score_heads(&self, _: RelationId, _: NodeId, out: &mut [f32]) {
        out.fill(0.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Head,
    Tail,
}

/// Rank of the true entity for one corrupted side of a test triple (1 is best).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryRank {
    pub triple: Triple,
    pub side: Side,
    pub filtered: usize,
    pub raw: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub queries: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

impl Metrics {
    fn from_ranks(ranks: impl Iterator<Item = usize>) -> Self {
        let mut m = Metrics::default();
        let (mut rr, mut h1, mut h3, mut h10) = (0.0, 0usize, 0usize, 0usize);
        for r in ranks {
            m.queries += 1;
            rr += 1.0 / r as f64;
            h1 += (r <= 1) as usize;
            h3 += (r <= 3) as usize;
            h10 += (r <= 10) as usize;
        }
        if m.queries > 0 {
            let n = m.queries as f64;
            m.mrr = rr / n;
            m.hits1 = h1 as f64 / n;
            m.hits3 = h3 as f64 / n;
            m.hits10 = h10 as f64 / n;
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingReport {
    /// Filtered metrics over both corruption sides.
    pub filtered: Metrics,
    /// Unfiltered metrics, for reference.
    pub raw: Metrics,
    pub per_relation: Vec<(RelationId, Metrics)>,
    pub ranks: Vec<QueryRank>,
}

/// Pessimistic rank of `truth`: one plus the number of other candidates scoring
/// at least as high. Candidates listed in `exclude` are skipped.
fn pessimistic_rank(scores: &[f32], truth: NodeId, exclude: &mut dyn Iterator<Item = NodeId>) -> (usize, usize) {
    let target = scores[truth as usize];
    let beats = |s: f32| !(s < target);
    let mut raw = 1;
    for (j, &s) in scores.iter().enumerate() {
        if j as NodeId != truth && beats(s) {
            raw += 1;
        }
    }
    let mut filtered = raw;
    for j in exclude {
        if j != truth && beats(scores[j as usize]) {
            filtered -= 1;
        }
    }
    (filtered, raw)
}

fn rank_triple(scorer: &dyn TripleScorer, known: &KnownTriples, (h, r, t): Triple, buf: &mut [f32]) -> [QueryRank; 2] {
    scorer.score_tails(h, r, buf);
    let (ft, rt) = pessimistic_rank(buf, t, &mut known.tails(h, r));
    scorer.score_heads(r, t, buf);
    let (fh, rh) = pessimistic_rank(buf, h, &mut known.heads(r, t));
    [
        QueryRank { triple: (h, r, t), side: Side::Tail, filtered: ft, raw: rt },
        QueryRank { triple: (h, r, t), side: Side::Head, filtered: fh, raw: rh },
    ]
}

/// Ranks every test triple against all entities as corrupted head and tail.
/// Other triples in `known` are filtered from the candidates; ties count against the true triple.
pub fn rank_filtered(scorer: &dyn TripleScorer, test: &[Triple], known: &KnownTriples) -> RankingReport {
    let ranks = all_ranks(scorer, test, known);
    let filtered = Metrics::from_ranks(ranks.iter().map(|q| q.filtered));
    let raw = Metrics::from_ranks(ranks.iter().map(|q| q.raw));
    let mut rels: Vec<RelationId> = test.iter().map(|t| t.1).collect();
    rels.sort_unstable();
    rels.dedup();
    let per_relation = rels
        .into_iter()
        .map(|r| (r, Metrics::from_ranks(ranks.iter().filter(|q| q.triple.1 == r).map(|q| q.filtered))))
        .collect();
    RankingReport { filtered, raw, per_relation, ranks }
}

#[cfg(not(feature = "parallel"))]
fn all_ranks(scorer: &dyn TripleScorer, test: &[Triple], known: &KnownTriples) -> Vec<QueryRank> {
    let mut buf = vec![0.0f32; scorer.entity_count()];
    test.iter().flat_map(|&t| rank_triple(scorer, known, t, &mut buf)).collect()
}

#[cfg(feature = "parallel")]
fn all_ranks(scorer: &dyn TripleScorer, test: &[Triple], known: &KnownTriples) -> Vec<QueryRank> {
    use rayon::prelude::*;
    let n = scorer.entity_count();
    test.par_iter()
        .map_init(|| vec![0.0f32; n], |buf, &t| rank_triple(scorer, known, t, buf))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Single-relation scores from an explicit table `score[h][t]`.
    struct Table {
        n: usize,
        s: Vec<f32>,
    }

    impl Table {
        fn at(&self, h: u32, _r: u32, t: u32) -> f32 {
            self.s[h as usize * self.n + t as usize]
        }
    }

    impl TripleScorer for Table {
        fn entity_count(&self) -> usize {
            self.n
        }
        fn score_tails(&self, h: NodeId, r: RelationId, out: &mut [f32]) {
            for (j, o) in out.iter_mut().enumerate() {
                *o = self.at(h, r, j as u32);
            }
        }
        fn score_heads(&self, r: RelationId, t: NodeId, out: &mut [f32]) {
            for (j, o) in out.iter_mut().enumerate() {
                *o = self.at(j as u32, r, t);
            }
        }
    }

    #[test]
    fn constant_scorer_ranks_last() {
        let known = KnownTriples::new([(0, 0, 1)]);
        let report = rank_filtered(&ConstantScorer(7), &[(0, 0, 1)], &known);
        assert!(report.ranks.iter().all(|q| q.filtered == 7));
        assert!((report.filtered.mrr - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(report.filtered.hits10, 1.0);
        assert_eq!(report.filtered.hits3, 0.0);
    }

    #[test]
    fn hand_enumerated_five_entity_kg() {
        // One relation, 5 entities. Scores s(h, t) are given explicitly.
        #[rustfmt::skip]
        let s = vec![
            // t:  0    1    2    3    4
            0.0, 0.9, 0.8, 0.1, 0.95, // h = 0
            0.2, 0.0, 0.3, 0.4, 0.1,  // h = 1
            0.5, 0.6, 0.0, 0.7, 0.2,  // h = 2
            0.1, 0.1, 0.1, 0.0, 0.1,  // h = 3
            0.3, 0.2, 0.1, 0.0, 0.0,  // h = 4
        ];
        let table = Table { n: 5, s };
        // Test triple (0, 0, 1); (0, 0, 4) is known and filtered.
        let known = KnownTriples::new([(0, 0, 1), (0, 0, 4), (2, 0, 1)]);
        let report = rank_filtered(&table, &[(0, 0, 1)], &known);
        let tail = report.ranks[0];
        let head = report.ranks[1];
        // Tail side: scores of (0, ., t) = [0, .9, .8, .1, .95]; 4 beats 1 but is filtered.
        assert_eq!((tail.raw, tail.filtered), (2, 1));
        // Head side: scores of (h, ., 1) = [.9, 0, .6, .1, .2]; nobody beats 0.9.
        assert_eq!((head.raw, head.filtered), (1, 1));
        assert_eq!(report.filtered.mrr, 1.0);
        assert_eq!(report.raw.mrr, 0.75);
    }

    #[test]
    fn ties_are_pessimistic() {
        let mut excl = core::iter::empty();
        assert_eq!(pessimistic_rank(&[1.0, 1.0, 0.0], 0, &mut excl), (2, 2));
        let mut excl = [1u32].into_iter();
        assert_eq!(pessimistic_rank(&[1.0, 1.0, 0.0], 0, &mut excl), (1, 2));
    }

    #[test]
    fn known_lookup() {
        let k = KnownTriples::new([(0, 1, 2), (0, 1, 3), (4, 1, 3), (0, 2, 2)]);
        assert_eq!(k.tails(0, 1).collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(k.heads(1, 3).collect::<Vec<_>>(), vec![0, 4]);
        assert!(k.contains((0, 2, 2)));
        assert_eq!(k.len(), 4);
    }
}

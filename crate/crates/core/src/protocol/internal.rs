use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::messages::{AggregateMessage, BlockAttestation, Lane, LaneAggregate};
use super::scheme::VoteScheme;
use crate::crypto::{ParticipationBitmap, ValidatorId};
use crate::seed;
use crate::topology::{Children, CommitteeRef, SlotPlan, REPRESENTATIVES};

/// Where an internal aggregator sits: a committee, or the proposer at the
/// root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRef {
    Committee(CommitteeRef),
    Root,
}

impl NodeRef {
    fn key(self) -> u64 {
        match self {
            NodeRef::Committee(c) => ((c.layer as u64) << 32) | c.index as u64,
            NodeRef::Root => u64::MAX,
        }
    }
}

/// Position-space set of validators an adversary wants excluded.
pub type TargetSet = Arc<ParticipationBitmap>;

/// How an aggregator picks among a child's entries.
#[derive(Debug, Clone)]
pub enum SelectionPolicy {
    /// Largest plus a uniformly drawn second aggregate.
    Honest,
    /// Largest only; the random lane stays empty. Models the flat baseline.
    LargestOnly,
    /// Corrupted aggregator: highest popcount, then fewest targets, pooled
    /// over both lanes and forwarded as a single aggregate.
    Censoring(TargetSet),
    /// Corrupted proposer: discards every entry touching a target, then
    /// selects honestly among the rest.
    DropTargets(TargetSet),
}

/// What selection looks at for one candidate entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub representative: ValidatorId,
    pub popcount: usize,
    pub lane: Lane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub largest: usize,
    pub random: usize,
}

/// Largest = max popcount among largest-lane candidates, ties to the lowest
/// representative. Random = uniform over random-lane candidates from other
/// representatives. A lone entry fills both lanes.
pub fn select_subcommittee<R: Rng + ?Sized>(cands: &[Candidate], rng: &mut R) -> Option<Selection> {
    let best = |lane: fn(Lane) -> bool| {
        (0..cands.len())
            .filter(|&i| lane(cands[i].lane))
            .min_by_key(|&i| (std::cmp::Reverse(cands[i].popcount), cands[i].representative))
    };
    let largest = best(Lane::carries_largest).or_else(|| best(Lane::carries_random))?;
    let lead = cands[largest].representative;
    let others: Vec<usize> = (0..cands.len())
        .filter(|&i| cands[i].lane.carries_random() && cands[i].representative != lead)
        .collect();
    let random = if others.is_empty() {
        (0..cands.len())
            .find(|&i| cands[i].lane.carries_random() && cands[i].representative == lead)
            .unwrap_or(largest)
    } else {
        others[rng.random_range(0..others.len())]
    };
    Some(Selection { largest, random })
}

#[derive(Debug, Clone)]
struct Entry<S> {
    representative: ValidatorId,
    signature: S,
    bitmap: ParticipationBitmap,
    lane: Lane,
}

#[derive(Debug, Clone)]
struct ChildState<S> {
    committee: CommitteeRef,
    range: Range<usize>,
    /// Sorted representatives of the child committee.
    reps: Vec<ValidatorId>,
    entries: Vec<Entry<S>>,
    n_largest: usize,
    n_random: usize,
}

impl<S> ChildState<S> {
    fn resolved(&self) -> bool {
        self.n_largest >= REPRESENTATIVES && self.n_random >= REPRESENTATIVES
    }

    fn has(&self, rep: ValidatorId, lane: Lane) -> bool {
        self.entries.iter().any(|e| {
            e.representative == rep
                && ((lane.carries_largest() && e.lane.carries_largest())
                    || (lane.carries_random() && e.lane.carries_random()))
        })
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InternalStats {
    pub accepted: usize,
    pub invalid: usize,
    pub duplicate: usize,
    pub outsider: usize,
    pub bad_window: usize,
    pub late: usize,
    pub absent_children: usize,
}

/// Result of a selection pass, ready to be sent or finalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Selected<S> {
    pub largest: Option<LaneAggregate<S>>,
    pub random: Option<LaneAggregate<S>>,
    /// Both lanes took the same entry for every child.
    pub shared: bool,
}

/// Aggregator for one internal node. Collects up to 16 entries per child and
/// lane, then forwards the selected aggregates once.
#[derive(Debug, Clone)]
pub struct InternalAggregator<S> {
    seed: u64,
    slot: u32,
    node: NodeRef,
    representative: ValidatorId,
    range: Range<usize>,
    children: Vec<ChildState<S>>,
    policy: SelectionPolicy,
    sent: bool,
    pub stats: InternalStats,
}

/// A checked message waiting for its signature verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Admitted {
    child: usize,
}

impl<S: Clone + PartialEq + std::fmt::Debug> InternalAggregator<S> {
    pub fn for_committee(
        plan: &SlotPlan,
        committee: CommitteeRef,
        representative: ValidatorId,
        policy: SelectionPolicy,
    ) -> Self {
        let children = match plan.children_of(committee) {
            Children::Committees(cs) => cs,
            Children::LeafGroup { .. } => {
                panic!("leaf committee {committee:?} is served by a leaf aggregator")
            }
        };
        Self::with_children(
            plan,
            NodeRef::Committee(committee),
            representative,
            plan.committee(committee).range.clone(),
            &children,
            policy,
        )
    }

    pub fn for_root(plan: &SlotPlan, policy: SelectionPolicy) -> Self {
        Self::with_children(
            plan,
            NodeRef::Root,
            plan.proposer,
            0..plan.n,
            &plan.root_children(),
            policy,
        )
    }

    fn with_children(
        plan: &SlotPlan,
        node: NodeRef,
        representative: ValidatorId,
        range: Range<usize>,
        children: &[CommitteeRef],
        policy: SelectionPolicy,
    ) -> Self {
        let children = children
            .iter()
            .map(|&c| {
                let com = plan.committee(c);
                let mut reps = com.representatives().to_vec();
                reps.sort_unstable();
                ChildState {
                    committee: c,
                    range: com.range.clone(),
                    reps,
                    entries: Vec::new(),
                    n_largest: 0,
                    n_random: 0,
                }
            })
            .collect();
        Self {
            seed: plan.seed,
            slot: plan.slot,
            node,
            representative,
            range,
            children,
            policy,
            sent: false,
            stats: InternalStats::default(),
        }
    }

    pub fn node(&self) -> NodeRef {
        self.node
    }

    pub fn is_sent(&self) -> bool {
        self.sent
    }

    pub fn all_resolved(&self) -> bool {
        self.children.iter().all(ChildState::resolved)
    }

    pub fn entry_count(&self) -> usize {
        self.children.iter().map(|c| c.entries.len()).sum()
    }

    /// Structural checks before any crypto.
    pub fn admit(&mut self, msg: &AggregateMessage<S>) -> Option<Admitted> {
        if self.sent {
            self.stats.late += 1;
            return None;
        }
        let child = self
            .children
            .iter()
            .position(|c| c.committee == msg.from && msg.slot == self.slot);
        let Some(child) = child else {
            self.stats.outsider += 1;
            return None;
        };
        let c = &self.children[child];
        if c.reps.binary_search(&msg.representative).is_err() {
            self.stats.outsider += 1;
            return None;
        }
        if msg.bitmap.range() != c.range || msg.bitmap.popcount() == 0 {
            self.stats.bad_window += 1;
            return None;
        }
        if c.has(msg.representative, msg.lane) {
            self.stats.duplicate += 1;
            return None;
        }
        Some(Admitted { child })
    }

    /// Records a verified message. Returns the outgoing aggregates once every
    /// child is resolved.
    pub fn apply<V: VoteScheme<Sig = S>>(
        &mut self,
        scheme: &V,
        admitted: Admitted,
        msg: &AggregateMessage<S>,
        valid: bool,
    ) -> Vec<AggregateMessage<S>> {
        if self.sent {
            self.stats.late += 1;
            return Vec::new();
        }
        if !valid {
            self.stats.invalid += 1;
            return Vec::new();
        }
        let c = &mut self.children[admitted.child];
        if c.has(msg.representative, msg.lane) {
            self.stats.duplicate += 1;
            return Vec::new();
        }
        self.stats.accepted += 1;
        c.n_largest += msg.lane.carries_largest() as usize;
        c.n_random += msg.lane.carries_random() as usize;
        c.entries.push(Entry {
            representative: msg.representative,
            signature: msg.signature.clone(),
            bitmap: msg.bitmap.clone(),
            lane: msg.lane,
        });
        if self.node != NodeRef::Root && self.all_resolved() {
            return self.emit(scheme);
        }
        Vec::new()
    }

    pub fn on_aggregate<V: VoteScheme<Sig = S>>(
        &mut self,
        scheme: &V,
        msg: &AggregateMessage<S>,
    ) -> Vec<AggregateMessage<S>> {
        let Some(a) = self.admit(msg) else {
            return Vec::new();
        };
        let ok = scheme.verify_aggregate(&msg.bitmap, &msg.signature);
        self.apply(scheme, a, msg, ok)
    }

    pub fn on_timeout<V: VoteScheme<Sig = S>>(&mut self, scheme: &V) -> Vec<AggregateMessage<S>> {
        if self.sent || self.node == NodeRef::Root {
            return Vec::new();
        }
        self.emit(scheme)
    }

    fn emit<V: VoteScheme<Sig = S>>(&mut self, scheme: &V) -> Vec<AggregateMessage<S>> {
        let NodeRef::Committee(from) = self.node else {
            unreachable!("the root finalizes instead of sending")
        };
        let sel = self.select(scheme);
        self.sent = true;
        let msg = |lane: LaneAggregate<S>, tag: Lane| AggregateMessage {
            slot: self.slot,
            from,
            representative: self.representative,
            signature: lane.signature,
            bitmap: lane.bitmap,
            lane: tag,
        };
        match (sel.largest, sel.random, sel.shared) {
            (Some(l), _, true) => vec![msg(l, Lane::Both)],
            (l, r, false) => l
                .map(|l| msg(l, Lane::Largest))
                .into_iter()
                .chain(r.map(|r| msg(r, Lane::Random)))
                .collect(),
            (None, _, true) => Vec::new(),
        }
    }

    /// Root only: builds the block attestation from whatever has arrived.
    pub fn finalize<V: VoteScheme<Sig = S>>(&mut self, scheme: &V) -> BlockAttestation<S> {
        let sel = self.select(scheme);
        self.sent = true;
        let empty = sel.largest.is_none() && sel.random.is_none();
        BlockAttestation {
            slot: self.slot,
            random: if sel.shared { sel.largest.clone() } else { sel.random },
            largest: sel.largest,
            empty,
            genesis: false,
        }
    }

    /// Runs selection on every child and folds the picks into per-lane
    /// aggregates over this node's range.
    pub fn select<V: VoteScheme<Sig = S>>(&mut self, scheme: &V) -> Selected<S> {
        let mut picks: Vec<(Option<usize>, Option<usize>)> = Vec::with_capacity(self.children.len());
        // never consulted: largest-only picks do not draw
        let mut unused = seed::rng("largest-only", self.seed, &[]);
        for (z, c) in self.children.iter().enumerate() {
            let pick = match &self.policy {
                SelectionPolicy::Honest => {
                    let mut rng = seed::rng(
                        "random-lane",
                        self.seed,
                        &[self.slot as u64, self.node.key(), self.representative as u64, z as u64],
                    );
                    honest_pick(&c.entries, |_| true, &mut rng)
                }
                SelectionPolicy::LargestOnly => {
                    let (l, _) = honest_pick(&c.entries, |_| true, &mut unused);
                    (l, None)
                }
                SelectionPolicy::Censoring(targets) => {
                    let best = (0..c.entries.len()).min_by_key(|&i| {
                        let e = &c.entries[i];
                        (
                            std::cmp::Reverse(e.bitmap.popcount()),
                            e.bitmap.iter_ones().filter(|&p| targets.contains(p)).count(),
                            e.representative,
                        )
                    });
                    (best, best)
                }
                SelectionPolicy::DropTargets(targets) => {
                    let mut rng = seed::rng(
                        "random-lane",
                        self.seed,
                        &[self.slot as u64, self.node.key(), self.representative as u64, z as u64],
                    );
                    honest_pick(
                        &c.entries,
                        |e| e.bitmap.iter_ones().all(|p| !targets.contains(p)),
                        &mut rng,
                    )
                }
            };
            picks.push(pick);
        }
        self.stats.absent_children = picks.iter().filter(|p| p.0.is_none()).count();
        let shared = picks.iter().all(|(l, r)| l == r);
        let fold = |lane: &dyn Fn(&(Option<usize>, Option<usize>)) -> Option<usize>| {
            let mut sig = scheme.identity();
            let mut bitmap = ParticipationBitmap::from_range(self.range.clone());
            let mut any = false;
            for (c, p) in self.children.iter().zip(&picks) {
                if let Some(i) = lane(p) {
                    let e = &c.entries[i];
                    if any {
                        scheme.combine(&mut sig, &e.signature);
                    } else {
                        sig = e.signature.clone();
                        any = true;
                    }
                    bitmap
                        .merge_disjoint(&e.bitmap)
                        .expect("child windows are disjoint and inside the parent range");
                }
            }
            any.then_some(LaneAggregate { signature: sig, bitmap })
        };
        let largest = fold(&|p| p.0);
        let random = if shared { None } else { fold(&|p| p.1) };
        Selected {
            largest: largest.clone(),
            random: if shared { largest } else { random },
            shared,
        }
    }
}

fn honest_pick<S, R: Rng>(
    entries: &[Entry<S>],
    keep: impl Fn(&Entry<S>) -> bool,
    rng: &mut R,
) -> (Option<usize>, Option<usize>) {
    let idx: Vec<usize> = (0..entries.len()).filter(|&i| keep(&entries[i])).collect();
    let cands: Vec<Candidate> = idx
        .iter()
        .map(|&i| Candidate {
            representative: entries[i].representative,
            popcount: entries[i].bitmap.popcount(),
            lane: entries[i].lane,
        })
        .collect();
    match select_subcommittee(&cands, rng) {
        Some(s) => (Some(idx[s.largest]), Some(idx[s.random])),
        None => (None, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keygen, HashedMessage, KeyDirectory, OpMeter, PublicKey, Signature};
    use crate::protocol::scheme::{BlsScheme, ModelScheme, ModelSig};
    use crate::topology::TreeParams;

    fn plan() -> SlotPlan {
        // 65536 / 256 = 256 leaf groups -> 16 committees -> root
        SlotPlan::build(11, 2, TreeParams::new(65_536, 256).unwrap()).unwrap()
    }

    fn full_msg(plan: &SlotPlan, c: CommitteeRef, rep: usize, count: usize) -> AggregateMessage<ModelSig> {
        let com = plan.committee(c);
        let r = com.range.clone();
        AggregateMessage {
            slot: plan.slot,
            from: c,
            representative: com.representatives()[rep],
            signature: ModelSig::VALID,
            bitmap: ParticipationBitmap::from_indices(r.start, r.len(), r.clone().take(count)).unwrap(),
            lane: Lane::Both,
        }
    }

    fn children(plan: &SlotPlan, c: CommitteeRef) -> Vec<CommitteeRef> {
        match plan.children_of(c) {
            Children::Committees(cs) => cs,
            _ => unreachable!(),
        }
    }

    #[test]
    fn homogeneous_full_entries_cover_the_node() {
        let p = plan();
        let meter = OpMeter::default();
        let scheme = ModelScheme { block: 256, n: p.n, meter: &meter };
        let node = CommitteeRef { layer: 0, index: 3 };
        let mut agg = InternalAggregator::for_committee(&p, node, 0, SelectionPolicy::Honest);
        let mut out = Vec::new();
        for z in children(&p, node) {
            for rep in 0..16 {
                out.extend(agg.on_aggregate(&scheme, &full_msg(&p, z, rep, 256)));
            }
        }
        assert_eq!(out.len(), 2, "two lanes with distinct picks");
        for m in &out {
            assert_eq!(m.bitmap.popcount(), 256 * 16);
            assert_eq!(m.bitmap.range(), p.committee(node).range);
        }
        assert!(agg.on_timeout(&scheme).is_empty());
        assert!(agg.is_sent());
    }

    #[test]
    fn largest_is_max_popcount_with_lowest_rep_tiebreak() {
        let mut rng = seed::rng("t", 1, &[]);
        let cands: Vec<Candidate> = [(9, 10), (7, 12), (3, 12), (4, 11)]
            .iter()
            .map(|&(r, p)| Candidate { representative: r, popcount: p, lane: Lane::Both })
            .collect();
        let s = select_subcommittee(&cands, &mut rng).unwrap();
        assert_eq!(s.largest, 2);
        assert_ne!(s.random, 2);
        let one = [cands[0]];
        assert_eq!(select_subcommittee(&one, &mut rng), Some(Selection { largest: 0, random: 0 }));
        assert_eq!(select_subcommittee(&[], &mut rng), None);
    }

    #[test]
    fn random_pick_is_uniform_over_the_other_fifteen() {
        let cands: Vec<Candidate> = (0..16)
            .map(|r| Candidate { representative: r, popcount: if r == 5 { 200 } else { 100 }, lane: Lane::Both })
            .collect();
        let trials = 30_000;
        let mut counts = [0usize; 16];
        for t in 0..trials {
            let mut rng = seed::rng("uniform", t, &[]);
            let s = select_subcommittee(&cands, &mut rng).unwrap();
            assert_eq!(s.largest, 5);
            counts[s.random] += 1;
        }
        assert_eq!(counts[5], 0);
        let expect = trials as f64 / 15.0;
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 5)
            .map(|(_, &c)| (c as f64 - expect).powi(2) / expect)
            .sum();
        // 14 degrees of freedom, 0.999 quantile is about 36.1
        assert!(chi2 < 36.1, "chi2 {chi2}");
    }

    #[test]
    fn silent_and_invalid_children() {
        let p = plan();
        let meter = OpMeter::default();
        let scheme = ModelScheme { block: 256, n: p.n, meter: &meter };
        let node = CommitteeRef { layer: 0, index: 0 };
        let kids = children(&p, node);
        let mut agg = InternalAggregator::for_committee(&p, node, 0, SelectionPolicy::Honest);
        for &z in &kids[1..] {
            for rep in 0..5 {
                assert!(agg.on_aggregate(&scheme, &full_msg(&p, z, rep, 200)).is_empty());
            }
        }
        let mut forged = full_msg(&p, kids[1], 6, 256);
        forged.signature = ModelSig::FORGED;
        agg.on_aggregate(&scheme, &forged);
        assert_eq!(agg.stats.invalid, 1);
        let out = agg.on_timeout(&scheme);
        assert!(!out.is_empty());
        for m in &out {
            assert_eq!(m.bitmap.count_in(p.committee(kids[0]).range.clone()), 0);
            assert_eq!(m.bitmap.popcount(), 200 * 15);
        }
        assert_eq!(agg.stats.absent_children, 1);
    }

    #[test]
    fn rejects_strangers_duplicates_and_bad_windows() {
        let p = plan();
        let meter = OpMeter::default();
        let scheme = ModelScheme { block: 256, n: p.n, meter: &meter };
        let node = CommitteeRef { layer: 0, index: 0 };
        let kids = children(&p, node);
        let mut agg = InternalAggregator::for_committee(&p, node, 0, SelectionPolicy::Honest);
        let m = full_msg(&p, kids[0], 0, 10);
        agg.on_aggregate(&scheme, &m);
        agg.on_aggregate(&scheme, &m);
        assert_eq!(agg.stats.duplicate, 1);

        let mut stranger = full_msg(&p, kids[0], 1, 10);
        stranger.representative = p.committee(kids[0]).members[100];
        agg.on_aggregate(&scheme, &stranger);
        let other = CommitteeRef { layer: 1, index: 200 };
        agg.on_aggregate(&scheme, &full_msg(&p, other, 0, 10));
        assert_eq!(agg.stats.outsider, 2);

        let mut wide = full_msg(&p, kids[0], 2, 10);
        wide.bitmap = ParticipationBitmap::from_indices(0, 512, [0]).unwrap();
        agg.on_aggregate(&scheme, &wide);
        assert_eq!(agg.stats.bad_window, 1);
        assert_eq!(agg.stats.accepted, 1);
    }

    #[test]
    fn censoring_prefers_entries_without_targets_at_equal_size() {
        let p = plan();
        let meter = OpMeter::default();
        let scheme = ModelScheme { block: 256, n: p.n, meter: &meter };
        let node = CommitteeRef { layer: 0, index: 0 };
        let kids = children(&p, node);
        let r0 = p.committee(kids[0]).range.clone();
        let mut targets = ParticipationBitmap::new(0, p.n);
        targets.set(r0.start).unwrap();
        let policy = SelectionPolicy::Censoring(Arc::new(targets));
        let mut agg = InternalAggregator::for_committee(&p, node, 0, policy);
        let with = full_msg(&p, kids[0], 0, 100);
        let mut without = full_msg(&p, kids[0], 1, 0);
        without.bitmap = ParticipationBitmap::from_indices(r0.start, r0.len(), r0.clone().skip(1).take(100)).unwrap();
        agg.on_aggregate(&scheme, &with);
        agg.on_aggregate(&scheme, &without);
        let out = agg.on_timeout(&scheme);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].lane, Lane::Both);
        assert!(!out[0].bitmap.contains(r0.start));
    }

    #[test]
    fn root_finalizes_both_lanes_with_real_signatures() {
        let n = 4096usize;
        let p = SlotPlan::build(4, 1, TreeParams::new(n, 256).unwrap()).unwrap();
        let kps: Vec<_> = (0..n as u32).map(|i| keygen(21, i)).collect();
        let keys: Vec<PublicKey> = kps.iter().map(|k| k.public_key).collect();
        let dir = KeyDirectory::new(&keys, &p.leaf_order, 256);
        let meter = OpMeter::default();
        let h = HashedMessage::new(b"block");
        let scheme = BlsScheme { directory: &dir, message: h, meter: &meter };
        let sign_range = |r: Range<usize>| {
            let mut s = Signature::identity();
            for pos in r {
                s.add_assign(&kps[p.validator_at(pos) as usize].secret_key.sign_hashed(&scheme.message));
            }
            s
        };
        let mut root = InternalAggregator::for_root(&p, SelectionPolicy::Honest);
        for z in p.root_children().into_iter().take(3) {
            let com = p.committee(z);
            for rep in 0..2 {
                let r = com.range.start..com.range.start + 50 + rep * 10;
                let msg = AggregateMessage {
                    slot: p.slot,
                    from: z,
                    representative: com.representatives()[rep],
                    signature: sign_range(r.clone()),
                    bitmap: ParticipationBitmap::from_indices(com.range.start, com.range.len(), r).unwrap(),
                    lane: Lane::Both,
                };
                assert!(root.on_aggregate(&scheme, &msg).is_empty());
            }
        }
        let att = root.finalize(&scheme);
        assert_eq!(att.popcount_largest(), 3 * 60);
        assert_eq!(att.popcount_random(), 3 * 50);
        for lane in att.lanes() {
            assert!(scheme.verify_aggregate(&lane.bitmap, &lane.signature));
        }
        let mut empty_root = InternalAggregator::<Signature>::for_root(&p, SelectionPolicy::Honest);
        assert!(empty_root.finalize(&scheme).empty);
    }
}

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{TreeParams, COMMITTEE_SIZE, REPRESENTATIVES, SLOTS_PER_EPOCH};
use crate::crypto::ValidatorId;
use crate::error::{Error, Result};
use crate::seed;

/// Address of a committee: `layer` 0 sits directly under the root (depth 1),
/// the last layer aggregates leaf groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CommitteeRef {
    pub layer: usize,
    pub index: usize,
}

impl CommitteeRef {
    pub fn depth(&self) -> usize {
        self.layer + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Committee {
    /// The first [`REPRESENTATIVES`] members carry aggregation duty.
    pub members: Vec<ValidatorId>,
    /// Leaf positions covered by this committee's subtree.
    pub range: Range<usize>,
}

impl Committee {
    pub fn representatives(&self) -> &[ValidatorId] {
        &self.members[..REPRESENTATIVES]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanKind {
    /// Fanout-m' tree with 128-member committees.
    Tree,
    /// One layer of subcommittees drawn from their own leaf groups, all
    /// reporting straight to the proposer.
    Flat,
}

/// One slot's aggregation tree.
///
/// Positions are the bitmap index space: position `p` is held by validator
/// `leaf_order[p]`, leaf group `g` covers `[g*group_size, (g+1)*group_size)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotPlan {
    pub kind: PlanKind,
    pub seed: u64,
    pub slot: u32,
    pub n: usize,
    pub group_size: usize,
    pub fanout: usize,
    pub leaf_order: Vec<ValidatorId>,
    pub layers: Vec<Vec<Committee>>,
    pub proposer: ValidatorId,
    #[serde(skip)]
    position_of: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Children {
    LeafGroup { group: usize, positions: Range<usize> },
    Committees(Vec<CommitteeRef>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parent {
    Committee(CommitteeRef),
    Proposer(ValidatorId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoleInstance {
    Leaf {
        position: usize,
        group: usize,
        parent: CommitteeRef,
        parent_representatives: Vec<ValidatorId>,
    },
    Representative {
        committee: CommitteeRef,
        children: Children,
        parent: Parent,
    },
    Member {
        committee: CommitteeRef,
    },
    Proposer {
        children: Vec<CommitteeRef>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    pub validator: ValidatorId,
    pub roles: Vec<RoleInstance>,
}

/// Hands out committee seats from successive seeded permutations of all
/// validators, so seats are disjoint until the population is exhausted.
struct SeatDealer<'a, R: Rng> {
    rng: &'a mut R,
    n: usize,
    deck: Vec<ValidatorId>,
    next: usize,
}

impl<R: Rng> SeatDealer<'_, R> {
    fn deal(&mut self, k: usize) -> Vec<ValidatorId> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.next == self.deck.len() {
                self.deck = (0..self.n as ValidatorId).collect();
                self.deck.shuffle(self.rng);
                self.next = 0;
            }
            let v = self.deck[self.next];
            self.next += 1;
            // a wrap-around may hand back someone already seated here
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }
}

fn group_range(g: usize, size: usize, n: usize) -> Range<usize> {
    g * size..((g + 1) * size).min(n)
}

impl SlotPlan {
    pub fn build(seed: u64, slot: u32, params: TreeParams) -> Result<Self> {
        let params = TreeParams::new(params.n, params.m)?;
        let n = params.n;
        let m = params.m;
        let fanout = params.m_prime();
        let mut rng = seed::rng("slot-plan", seed, &[slot as u64]);

        let mut leaf_order: Vec<ValidatorId> = (0..n as ValidatorId).collect();
        leaf_order.shuffle(&mut rng);

        let counts = params.layer_counts();
        let mut dealer = SeatDealer {
            rng: &mut rng,
            n,
            deck: Vec::new(),
            next: 0,
        };
        let mut layers: Vec<Vec<Committee>> = Vec::with_capacity(counts.len());
        // bottom-up so each layer can derive ranges from its children
        let mut below: Option<Vec<Range<usize>>> = None;
        for &count in counts.iter().rev() {
            let ranges: Vec<Range<usize>> = match &below {
                None => (0..count).map(|g| group_range(g, m, n)).collect(),
                Some(child) => (0..count)
                    .map(|c| {
                        let lo = c * fanout;
                        let hi = ((c + 1) * fanout).min(child.len());
                        child[lo].start..child[hi - 1].end
                    })
                    .collect(),
            };
            let layer: Vec<Committee> = ranges
                .iter()
                .map(|r| Committee {
                    members: dealer.deal(COMMITTEE_SIZE),
                    range: r.clone(),
                })
                .collect();
            below = Some(ranges);
            layers.push(layer);
        }
        layers.reverse();
        let proposer = rng.random_range(0..n as ValidatorId);

        let mut plan = SlotPlan {
            kind: PlanKind::Tree,
            seed,
            slot,
            n,
            group_size: m,
            fanout,
            leaf_order,
            layers,
            proposer,
            position_of: Vec::new(),
        };
        plan.index();
        Ok(plan)
    }

    /// Flat layout: `subcommittees` leaf groups of (nearly) equal size, each
    /// aggregated by 16 of its own members, reporting directly to the
    /// proposer.
    pub fn build_flat(seed: u64, slot: u32, n: usize, subcommittees: usize) -> Result<Self> {
        if subcommittees == 0 || n < subcommittees * REPRESENTATIVES {
            return Err(Error::Infeasible(format!(
                "cannot split N={n} into {subcommittees} subcommittees of at least {REPRESENTATIVES}"
            )));
        }
        let size = n.div_ceil(subcommittees);
        let groups = n.div_ceil(size);
        let mut rng = seed::rng("flat-plan", seed, &[slot as u64]);
        let mut leaf_order: Vec<ValidatorId> = (0..n as ValidatorId).collect();
        leaf_order.shuffle(&mut rng);
        let layer: Vec<Committee> = (0..groups)
            .map(|g| {
                let r = group_range(g, size, n);
                let mut members = leaf_order[r.clone()].to_vec();
                // the first 16 after a partial shuffle are a uniform pick
                let (reps, _) = members.partial_shuffle(&mut rng, REPRESENTATIVES);
                let reps = reps.to_vec();
                members.retain(|v| !reps.contains(v));
                let mut ordered = reps;
                ordered.extend(members);
                Committee {
                    members: ordered,
                    range: r,
                }
            })
            .collect();
        let proposer = rng.random_range(0..n as ValidatorId);
        let mut plan = SlotPlan {
            kind: PlanKind::Flat,
            seed,
            slot,
            n,
            group_size: size,
            fanout: groups,
            leaf_order,
            layers: vec![layer],
            proposer,
            position_of: Vec::new(),
        };
        plan.index();
        Ok(plan)
    }

    fn index(&mut self) {
        let mut pos = vec![0u32; self.n];
        for (p, &v) in self.leaf_order.iter().enumerate() {
            pos[v as usize] = p as u32;
        }
        self.position_of = pos;
    }

    pub fn depth(&self) -> usize {
        self.layers.len() + 1
    }

    pub fn leaf_layer(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn leaf_group_count(&self) -> usize {
        self.layers[self.leaf_layer()].len()
    }

    pub fn leaf_group_range(&self, g: usize) -> Range<usize> {
        group_range(g, self.group_size, self.n)
    }

    pub fn leaf_group(&self, g: usize) -> &[ValidatorId] {
        &self.leaf_order[self.leaf_group_range(g)]
    }

    pub fn bitmap_offsets(&self) -> Vec<usize> {
        (0..self.leaf_group_count())
            .map(|g| g * self.group_size)
            .collect()
    }

    pub fn position_of(&self, v: ValidatorId) -> usize {
        self.position_of[v as usize] as usize
    }

    pub fn validator_at(&self, position: usize) -> ValidatorId {
        self.leaf_order[position]
    }

    pub fn group_of_position(&self, position: usize) -> usize {
        position / self.group_size
    }

    pub fn committee(&self, r: CommitteeRef) -> &Committee {
        &self.layers[r.layer][r.index]
    }

    pub fn committees(&self) -> impl Iterator<Item = (CommitteeRef, &Committee)> {
        self.layers.iter().enumerate().flat_map(|(layer, cs)| {
            cs.iter()
                .enumerate()
                .map(move |(index, c)| (CommitteeRef { layer, index }, c))
        })
    }

    pub fn leaf_committee(&self, group: usize) -> CommitteeRef {
        CommitteeRef {
            layer: self.leaf_layer(),
            index: group,
        }
    }

    pub fn children_of(&self, r: CommitteeRef) -> Children {
        if r.layer == self.leaf_layer() {
            return Children::LeafGroup {
                group: r.index,
                positions: self.leaf_group_range(r.index),
            };
        }
        let below = self.layers[r.layer + 1].len();
        let lo = r.index * self.fanout;
        let hi = ((r.index + 1) * self.fanout).min(below);
        Children::Committees(
            (lo..hi)
                .map(|index| CommitteeRef {
                    layer: r.layer + 1,
                    index,
                })
                .collect(),
        )
    }

    pub fn parent_of(&self, r: CommitteeRef) -> Parent {
        if r.layer == 0 {
            Parent::Proposer(self.proposer)
        } else {
            Parent::Committee(CommitteeRef {
                layer: r.layer - 1,
                index: r.index / self.fanout,
            })
        }
    }

    pub fn root_children(&self) -> Vec<CommitteeRef> {
        (0..self.layers[0].len())
            .map(|index| CommitteeRef { layer: 0, index })
            .collect()
    }

    pub fn adjacency(&self, v: ValidatorId) -> Result<Adjacency> {
        if v as usize >= self.n {
            return Err(Error::UnknownValidator(v));
        }
        let mut roles = Vec::new();
        let position = self.position_of(v);
        let group = self.group_of_position(position);
        let parent = self.leaf_committee(group);
        roles.push(RoleInstance::Leaf {
            position,
            group,
            parent,
            parent_representatives: self.committee(parent).representatives().to_vec(),
        });
        for (r, c) in self.committees() {
            if let Some(i) = c.members.iter().position(|&x| x == v) {
                if i < REPRESENTATIVES {
                    roles.push(RoleInstance::Representative {
                        committee: r,
                        children: self.children_of(r),
                        parent: self.parent_of(r),
                    });
                } else {
                    roles.push(RoleInstance::Member { committee: r });
                }
            }
        }
        if v == self.proposer {
            roles.push(RoleInstance::Proposer {
                children: self.root_children(),
            });
        }
        Ok(Adjacency {
            validator: v,
            roles,
        })
    }

    /// Checks every structural invariant; used after import and in tests.
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::Invariant(s));
        if self.leaf_order.len() != self.n {
            return bad("leaf order does not cover N".into());
        }
        let mut seen = vec![false; self.n];
        for &v in &self.leaf_order {
            let v = v as usize;
            if v >= self.n || std::mem::replace(&mut seen[v], true) {
                return bad(format!("validator {v} is not a leaf exactly once"));
            }
        }
        if self.layers.is_empty() {
            return bad("no committee layers".into());
        }
        let groups = self.n.div_ceil(self.group_size);
        if self.layers[self.leaf_layer()].len() != groups {
            return bad("leaf layer does not match group count".into());
        }
        let mut covered = 0;
        for g in 0..groups {
            let r = self.leaf_group_range(g);
            if r.start != covered || r.is_empty() {
                return bad(format!("leaf group {g} breaks the partition"));
            }
            covered = r.end;
        }
        if covered != self.n {
            return bad("leaf groups do not cover [0, N)".into());
        }
        for (r, c) in self.committees() {
            let expected = match self.kind {
                PlanKind::Tree => c.members.len() == COMMITTEE_SIZE,
                PlanKind::Flat => c.members.len() >= REPRESENTATIVES,
            };
            if !expected {
                return bad(format!("committee {r:?} has {} members", c.members.len()));
            }
            let mut m = c.members.clone();
            m.sort_unstable();
            m.dedup();
            if m.len() != c.members.len() || m.iter().any(|&v| v as usize >= self.n) {
                return bad(format!("committee {r:?} has duplicate or unknown members"));
            }
            let span = match self.children_of(r) {
                Children::LeafGroup { positions, .. } => positions,
                Children::Committees(cs) => {
                    if self.kind == PlanKind::Tree && cs.len() > self.fanout {
                        return bad(format!("committee {r:?} exceeds fanout"));
                    }
                    self.committee(cs[0]).range.start..self.committee(*cs.last().unwrap()).range.end
                }
            };
            if span != c.range {
                return bad(format!("committee {r:?} range does not match its children"));
            }
        }
        if self.kind == PlanKind::Tree && self.layers[0].len() > self.fanout {
            return bad("root has more children than the fanout".into());
        }
        if self.proposer as usize >= self.n {
            return bad("proposer out of range".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut plan: SlotPlan =
            serde_json::from_str(s).map_err(|e| Error::Decode(e.to_string()))?;
        if plan.leaf_order.iter().any(|&v| v as usize >= plan.n) {
            return Err(Error::Invariant("leaf order names unknown validators".into()));
        }
        plan.index();
        plan.validate()?;
        Ok(plan)
    }
}

/// The 32 slot trees of one epoch, each a pure function of `(seed, slot)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochPlan {
    pub seed: u64,
    pub params: TreeParams,
    pub slots: Vec<SlotPlan>,
}

impl EpochPlan {
    pub fn build(seed: u64, params: TreeParams) -> Result<Self> {
        let slots = (0..SLOTS_PER_EPOCH as u32)
            .map(|s| SlotPlan::build(seed, s, params))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            seed,
            params,
            slots,
        })
    }

    pub fn proposers(&self) -> Vec<ValidatorId> {
        self.slots.iter().map(|s| s.proposer).collect()
    }
}

pub fn build_slot_plan(seed: u64, slot: u32, params: TreeParams) -> Result<SlotPlan> {
    SlotPlan::build(seed, slot, params)
}

pub fn adjacency(plan: &SlotPlan, v: ValidatorId) -> Result<Adjacency> {
    plan.adjacency(v)
}

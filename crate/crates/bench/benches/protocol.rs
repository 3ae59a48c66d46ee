use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use wonderboom_bench::signed;
use wonderboom_core::adversary::{corrupt, minority_targets, AdversaryStrategy, CorruptionSet, StrategyKind};
use wonderboom_core::crypto::{HashedMessage, KeyDirectory, OpMeter, ParticipationBitmap, Signature};
use wonderboom_core::protocol::{
    select_subcommittee, BlsScheme, Candidate, Lane, LeafAggregator, ModelScheme, ModelSig, VoteMessage,
};
use wonderboom_core::seed;
use wonderboom_core::simulator::{run_logical_slot, SlotInput};
use wonderboom_core::topology::{EpochPlan, SlotPlan, TreeParams};

const HASH: [u8; 32] = [7; 32];

/// One leaf group of 64 real BLS votes: 64 verifications and additions.
fn leaf_aggregator(c: &mut Criterion) {
    let plan = SlotPlan::build(1, 0, TreeParams::new(1024, 64).unwrap()).unwrap();
    let s = signed(1024);
    let h = HashedMessage::new(&HASH);
    let dir = KeyDirectory::new(&s.public, &plan.leaf_order, plan.group_size);
    let meter = OpMeter::default();
    let scheme = BlsScheme { directory: &dir, message: h, meter: &meter };
    let votes: Vec<VoteMessage<Signature>> = plan
        .leaf_group(0)
        .iter()
        .map(|&v| VoteMessage {
            slot: 0,
            block_hash: HASH,
            validator_id: v,
            signature: s.keys[v as usize].secret_key.sign_hashed(&h),
        })
        .collect();
    let mut g = c.benchmark_group("leaf_aggregator");
    g.sample_size(10);
    g.bench_function("bls/64", |b| {
        b.iter(|| {
            let mut agg = LeafAggregator::new(&plan, 0, 0, HASH, Signature::identity());
            votes.iter().find_map(|v| agg.on_vote(&scheme, black_box(v)))
        })
    });
    g.finish();

    let plan = SlotPlan::build(1, 0, TreeParams::new(4096, 256).unwrap()).unwrap();
    let model = ModelScheme { block: 256, n: 4096, meter: &meter };
    let votes: Vec<VoteMessage<ModelSig>> = plan
        .leaf_group(0)
        .iter()
        .map(|&v| VoteMessage { slot: 0, block_hash: HASH, validator_id: v, signature: ModelSig::VALID })
        .collect();
    c.bench_function("leaf_aggregator/model/256", |b| {
        b.iter(|| {
            let mut agg = LeafAggregator::new(&plan, 0, 0, HASH, ModelSig::VALID);
            votes.iter().find_map(|v| agg.on_vote(&model, black_box(v)))
        })
    });
}

fn internal_select(c: &mut Criterion) {
    let cands: Vec<Candidate> = (0..16u32)
        .map(|r| Candidate { representative: r, popcount: 200 + (r as usize * 7) % 56, lane: Lane::Both })
        .collect();
    let mut rng = seed::rng("bench-select", 0, &[]);
    c.bench_function("select_subcommittee/16", |b| b.iter(|| select_subcommittee(black_box(&cands), &mut rng)));
}

fn logical_slot(c: &mut Criterion) {
    let n = 4096;
    let epoch = EpochPlan::build(3, TreeParams::new(n, 256).unwrap()).unwrap();
    let plan = &epoch.slots[0];
    let absent = vec![false; n];
    let honest = CorruptionSet::none(0, n);
    let no_targets = Arc::new(ParticipationBitmap::new(0, n));
    let strategy = AdversaryStrategy::new(StrategyKind::MinorityCommitteeCensor, AdversaryStrategy::max_faults(n));
    let minority = corrupt(&strategy, 3, 0, n, None).unwrap();
    let targets = Arc::new(minority_targets(plan, &minority));
    let mut g = c.benchmark_group("logical_slot/4096");
    g.sample_size(20);
    for (name, kind, corruption, targets) in [
        ("honest", StrategyKind::Honest, &honest, &no_targets),
        ("minority", StrategyKind::MinorityCommitteeCensor, &minority, &targets),
    ] {
        g.bench_function(name, |b| {
            b.iter(|| {
                run_logical_slot(&SlotInput {
                    plan,
                    block_hash: HASH,
                    kind,
                    corruption,
                    targets,
                    absent: &absent,
                    worst_case_transport: false,
                    capture_path: false,
                    largest_only_root: false,
                })
                .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, leaf_aggregator, internal_select, logical_slot);
criterion_main!(benches);

use proptest::prelude::*;

use cfa_core::codegen::{emit_with_layout, verify_round_trip};
use cfa_core::facet::verify_containment;
use cfa_core::kernel::{flow_in, flow_in_by_producer, neighbor_level, KernelSpec, TileCoord};
use cfa_core::layout::CfaLayout;
use cfa_core::lint::burst_lint;
use cfa_core::pipeline::full_tile_contiguity;
use cfa_core::plan::{dtile_candidates, functional_check, DataTiling, LayoutContext, Statement, TxKind};
use cfa_core::sim::BusModel;

/// Small random kernels: 2 or 3 axes, tiles of 2..=4, 2..=3 tiles per
/// axis, 1..=4 backward dependences that fit in one tile.
fn small_spec() -> impl Strategy<Value = KernelSpec> {
    (2usize..=3)
        .prop_flat_map(|d| {
            (
                prop::collection::vec(2i64..=4, d),
                prop::collection::vec(2i64..=3, d),
                prop::collection::vec(prop::collection::vec(0i64..=4, d), 1..=4),
            )
        })
        .prop_filter_map("zero dependence", |(tile, count, raw)| {
            let deps: Vec<Vec<i64>> = raw
                .iter()
                .map(|v| v.iter().zip(&tile).map(|(x, t)| -(x % (t + 1))).collect())
                .filter(|v: &Vec<i64>| v.iter().any(|&x| x != 0))
                .collect();
            if deps.is_empty() {
                return None;
            }
            let space = tile.iter().zip(&count).map(|(t, n)| t * n).collect();
            KernelSpec::new(space, tile, deps, 8).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn producer_pieces_partition_flow_in(spec in small_spec()) {
        for tile in spec.tiles() {
            let whole = flow_in(&spec, &tile).unwrap();
            let mut union = spec.empty_set();
            let mut total = 0;
            for (_, piece) in flow_in_by_producer(&spec, &tile) {
                total += piece.len();
                union = union.union(&piece);
            }
            prop_assert_eq!(union.indices(), whole.indices());
            prop_assert_eq!(total, whole.len());
        }
    }

    #[test]
    fn flow_in_lies_in_facets(spec in small_spec()) {
        prop_assert!(verify_containment(&spec).is_ok());
    }

    #[test]
    fn facet_blocks_are_single_runs(spec in small_spec()) {
        let layout = CfaLayout::build(&spec).unwrap();
        prop_assert!(full_tile_contiguity(&spec, &layout).is_ok());
        for f in &layout.facets {
            for off in f.base..f.base + f.capacity() {
                let p = f.point_at(off).unwrap();
                prop_assert_eq!(f.linearize(&p).unwrap(), off);
            }
        }
    }

    #[test]
    fn cfa_plans_are_functionally_exact(spec in small_spec()) {
        let ctx = LayoutContext::Cfa(CfaLayout::build(&spec).unwrap());
        let plans = ctx.plan_all(&spec);
        prop_assert!(plans.iter().flat_map(|p| &p.writes).all(|w| w.kind == TxKind::Burst));
        let report = functional_check(&spec, &ctx, &plans, &Statement::uniform(&spec));
        prop_assert!(report.is_ok(), "{:?}", report.err());
    }

    #[test]
    fn emitted_code_replays_plans_and_lints_clean(spec in small_spec()) {
        let layout = CfaLayout::build(&spec).unwrap();
        let unit = emit_with_layout("k", &spec, &layout);
        prop_assert!(unit.is_ok(), "{:?}", unit.err());
        let unit = unit.unwrap();
        let replay = verify_round_trip(&spec, &layout, &unit);
        prop_assert!(replay.is_ok(), "{:?}", replay.err());
        let lint = burst_lint(&unit.source);
        prop_assert!(lint.is_empty(), "{:?}", lint);
    }

    #[test]
    fn data_tiling_round_trips(spec in small_spec(), pick in any::<prop::sample::Index>()) {
        let candidates = dtile_candidates(&spec);
        let tiling = DataTiling::new(&spec, pick.get(&candidates).clone());
        let n: i64 = spec.space_sizes.iter().product();
        let mut seen = vec![false; n as usize];
        for off in 0..n as u64 {
            let p = tiling.point_at(off);
            prop_assert_eq!(tiling.offset(&p), off);
            seen[spec.linear_index(&p) as usize] = true;
        }
        prop_assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn neighbor_level_is_symmetric(a in prop::collection::vec(0i64..4, 3), b in prop::collection::vec(0i64..4, 3)) {
        let (a, b) = (TileCoord(a), TileCoord(b));
        prop_assert_eq!(neighbor_level(&a, &b).ok(), neighbor_level(&b, &a).ok());
    }

    #[test]
    fn more_overhead_never_speeds_up(bursts in prop::collection::vec(1u64..300, 1..40), h in 0u64..60, extra in 1u64..60) {
        let fast = BusModel { overhead: h, ..BusModel::default() };
        let slow = BusModel { overhead: h + extra, ..BusModel::default() };
        prop_assert!(slow.cycles(bursts.clone()) >= fast.cycles(bursts));
    }

    #[test]
    fn merging_adjacent_bursts_never_slows_down(bursts in prop::collection::vec(1u64..100, 2..40), at in any::<prop::sample::Index>()) {
        let model = BusModel::default();
        let i = at.index(bursts.len() - 1);
        let mut merged = bursts.clone();
        let next = merged.remove(i + 1);
        merged[i] += next;
        prop_assert!(model.cycles(merged) <= model.cycles(bursts));
    }

    #[test]
    fn split_preserves_beats(bytes in 1u64..100_000) {
        let model = BusModel::default();
        let parts = model.split(bytes);
        prop_assert_eq!(parts.iter().sum::<u64>(), bytes.div_ceil(model.bus_bytes as u64));
        prop_assert!(parts.iter().all(|&b| b >= 1 && b <= model.max_burst_beats));
    }
}

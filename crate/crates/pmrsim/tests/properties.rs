//! Randomized invariants. Each property states a fact the library promises
//! for every input, not just the shipped templates.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use proptest::collection::vec;
use proptest::prelude::*;

use pmrsim::bearer::{BearerOption, LatencyBudget, McchSchedule};
use pmrsim::domain::{Network, ServiceProfile, SyncMode};
use pmrsim::gcse::{CallManager, FollowUp, Policy};
use pmrsim::ids::BearerId;
use pmrsim::radio::{self, ResourceModel, TransportKind};
use pmrsim::sim::scenario::{self, ScenarioSpec};
use pmrsim::sim::Engine;
use pmrsim::SimTime;

proptest! {
    /// The switch point is the first membership whose round-robin unicast
    /// total strictly exceeds the multicast reservation, so the totals on
    /// either side of it bracket that reservation.
    #[test]
    fn crossover_brackets_the_multicast_reservation(
        per_ue in vec(1u32..=200, 1..=8),
        multicast_units in 1u32..=2_000,
    ) {
        let t = radio::crossover_from_costs(&per_ue, multicast_units).unwrap();
        let sum_at = |n: u32| -> u64 {
            (0..n).map(|i| u64::from(per_ue[i as usize % per_ue.len()])).sum()
        };
        prop_assert!(sum_at(t) > u64::from(multicast_units));
        if t > 1 {
            prop_assert!(sum_at(t - 1) <= u64::from(multicast_units));
        }
    }

    /// Choosing multicast at and above the switch point and unicast below it
    /// realizes the upper envelope of the two efficiency curves everywhere.
    #[test]
    fn mode_choice_realizes_the_efficiency_envelope(
        qualities in vec(0u8..=15, 1..=30),
        video in any::<bool>(),
        wide in any::<bool>(),
        cluster_pick in 0usize..3,
    ) {
        let bandwidth = if wide { 10u8 } else { 5 };
        let profile = if video { ServiceProfile::video() } else { ServiceProfile::voice() };
        let cluster = [1u32, 2, 4][cluster_pick];
        let sync = if cluster == 1 { SyncMode::SingleCell } else { SyncMode::Sfn };

        let mut net = Network::new();
        let cell = net.add_cell(bandwidth, 6, u32::from(bandwidth) * 5).unwrap();
        net.add_area(BTreeSet::from([cell]), sync, cluster).unwrap();
        let mut members = BTreeSet::new();
        for q in &qualities {
            members.insert(net.register_ue(cell, *q).unwrap());
        }
        let group = net.create_group(members, profile.clone(), 1).unwrap();
        let model = ResourceModel::for_bandwidth(bandwidth);
        let ues = net.members_in_cell(group, cell).unwrap();
        let area = net.area(net.area_of_cell(cell).unwrap()).unwrap();

        let t = radio::crossover_threshold(&profile, &ues, area, &model).unwrap();
        let m = radio::spectral_efficiency(1, TransportKind::Multicast, &profile, &ues, area, &model).unwrap();
        for n in 1..=(2 * t).min(qualities.len() as u32 * 2).max(1) {
            let u = radio::spectral_efficiency(n, TransportKind::Unicast, &profile, &ues, area, &model).unwrap();
            let chosen = if n >= t { m } else { u };
            prop_assert_eq!(chosen, u.max(m));
        }
    }

    /// Boundary arithmetic: the next boundary never precedes the query
    /// instant, lands on the grid, is a fixed point, and the wait from any
    /// instant past the phase is shorter than one period.
    #[test]
    fn mcch_boundaries_stay_on_the_grid(
        period_ms in 1u64..=10_000,
        phase_us in 0u64..=100_000,
        now_us in 0u64..=200_000_000,
    ) {
        let schedule = McchSchedule::new(SimTime::from_ms(period_ms), SimTime::from_us(phase_us)).unwrap();
        let now = SimTime::from_us(now_us);
        let boundary = schedule.next_boundary(now);
        prop_assert!(boundary >= now);
        prop_assert!(boundary >= schedule.phase);
        prop_assert_eq!(
            (boundary.as_us() - schedule.phase.as_us()) % schedule.modification_period.as_us(),
            0
        );
        prop_assert_eq!(schedule.next_boundary(boundary), boundary);
        if now >= schedule.phase {
            prop_assert!(schedule.wait(now) < schedule.modification_period);
        }
    }

    /// With unchanged membership a repeated location report is a no-op: the
    /// hysteresis margin keeps the per-cell mode from flapping.
    #[test]
    fn repeated_reports_do_not_flap(
        initial in 1usize..=6,
        actions in vec((0u8..2, 0usize..8), 0..=12),
    ) {
        let mut net = Network::new();
        let cell = net.add_cell(10, 6, 50).unwrap();
        net.add_area(BTreeSet::from([cell]), SyncMode::SingleCell, 1).unwrap();
        let mut ues = Vec::new();
        for i in 0..8usize {
            ues.push(net.register_ue(cell, (i % 16) as u8).unwrap());
        }
        let members: BTreeSet<_> = ues.iter().take(initial).copied().collect();
        let group = net.create_group(members, ServiceProfile::voice(), 1).unwrap();

        let mut mgr = CallManager::new(
            net,
            ResourceModel::for_bandwidth(10),
            LatencyBudget::default(),
            McchSchedule::new(SimTime::from_ms(50), SimTime::from_us(0)).unwrap(),
            Policy::dynamic_activation(),
            BearerOption::DynamicBearer,
            true,
        ).unwrap();

        let mut queue: BinaryHeap<Reverse<(SimTime, BearerId)>> = BinaryHeap::new();
        let mut now = SimTime::from_ms(100);
        let absorb = |queue: &mut BinaryHeap<Reverse<(SimTime, BearerId)>>, fs: Vec<FollowUp>| {
            for f in fs {
                queue.push(Reverse((f.at(), f.bearer())));
            }
        };
        let start = mgr.start_group_call(group, now).unwrap();
        absorb(&mut queue, start.follow_ups);

        for (kind, pick) in actions {
            now = now + SimTime::from_ms(200);
            while let Some(&Reverse((at, bearer))) = queue.peek() {
                if at > now {
                    break;
                }
                queue.pop();
                let more = mgr.bearer_complete(bearer, at).unwrap();
                absorb(&mut queue, more);
            }
            let ue = ues[pick];
            let is_member = mgr.network().group(group).unwrap().members.contains(&ue);
            match kind {
                0 if !is_member => {
                    let fs = mgr.member_joined(group, ue, now).unwrap();
                    absorb(&mut queue, fs);
                }
                1 if is_member => {
                    let fs = mgr.member_left(group, ue, now).unwrap();
                    absorb(&mut queue, fs);
                }
                _ => {}
            }
            now = now + SimTime::from_ms(200);
            while let Some(&Reverse((at, bearer))) = queue.peek() {
                if at > now {
                    break;
                }
                queue.pop();
                let more = mgr.bearer_complete(bearer, at).unwrap();
                absorb(&mut queue, more);
            }

            let report = mgr.build_uli_report(group).unwrap();
            let first = mgr.handle_uli(&report, now).unwrap();
            absorb(&mut queue, first.follow_ups);
            now = now + SimTime::from_ms(200);
            while let Some(&Reverse((at, bearer))) = queue.peek() {
                if at > now {
                    break;
                }
                queue.pop();
                let more = mgr.bearer_complete(bearer, at).unwrap();
                absorb(&mut queue, more);
            }
            let again = mgr.handle_uli(&report, now).unwrap();
            let flapped = again
                .decisions
                .iter()
                .any(|d| d.action != pmrsim::gcse::SwitchAction::NoChange);
            prop_assert!(!flapped, "second identical report re-decided: {:?}", again.decisions);
            mgr.audit().map_err(|e| TestCaseError::fail(e))?;
        }
    }
}

fn small_spec(seed: u64, mobility: bool, loss: bool, talk: bool) -> ScenarioSpec {
    let mut spec = scenario::template("fig2").unwrap();
    spec.seed = seed;
    spec.duration_ms = 5_000;
    spec.mobility.enabled = mobility;
    spec.loss.enabled = loss;
    spec.talk.enabled = talk;
    if mobility {
        spec.cells[0].count = 2;
        spec.areas[0].cells = vec![0, 1];
        spec.groups[0].cells = vec![0, 1];
        spec.mobility.mean_dwell_ms = 1_500;
    }
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// A scenario is a pure function of its spec: every rerun produces the
    /// same trace and the same metrics byte for byte.
    #[test]
    fn reruns_are_byte_identical(
        seed in 0u64..=1_000,
        mobility in any::<bool>(),
        loss in any::<bool>(),
        talk in any::<bool>(),
    ) {
        let spec = small_spec(seed, mobility, loss, talk);
        let run = |spec: &ScenarioSpec| {
            let mut engine = Engine::new(scenario::build(spec).unwrap()).unwrap();
            engine.run().unwrap();
            engine
        };
        let a = run(&spec);
        let b = run(&spec);
        prop_assert_eq!(a.trace(), b.trace());
        prop_assert_eq!(a.metrics().setup_csv(), b.metrics().setup_csv());
        prop_assert_eq!(a.metrics().decisions_csv(), b.metrics().decisions_csv());
        prop_assert_eq!(a.metrics().utilization_csv(), b.metrics().utilization_csv());
    }
}

// SPDX-License-Identifier: Apache-2.0

mod common;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tilesoc::noc::traffic::{run_traffic, Pattern, TrafficSpec};
use tilesoc::noc::{build_packet, Coord, Direction, HeaderFields, Mesh, MsgType, NocConfig, Payload, Plane};

#[test]
fn zero_load_latency_on_idle_mesh() {
    common::noc::zero_load(100);
}

#[test]
fn multicast_fuzz_delivers_once_and_shares_links() {
    common::noc::multicast_fuzz(1000);
}

// Two sources forking toward each other each hold the port the other needs
// once their packets are longer than a queue.
#[test]
fn crossing_multicasts_can_deadlock() {
    let cfg = NocConfig::new(64, 4, 2);
    let mut mesh = Mesh::new(cfg.clone()).unwrap();
    let dests = vec![Coord::new(1, 1), Coord::new(3, 0)];
    for src in [Coord::new(1, 0), Coord::new(2, 0)] {
        let mut d = dests.clone();
        d.retain(|c| *c != src);
        let flits = build_packet(&HeaderFields::new(src, d, MsgType::P2pData), &[Payload::ZERO; 12], &cfg).unwrap();
        for f in flits {
            mesh.inject(src, f).unwrap();
        }
    }
    for _ in 0..200 {
        mesh.step().unwrap();
    }
    assert!(mesh.in_flight() > 0);
    assert!(mesh.cycle() - mesh.last_progress() > 150);
    let a = mesh.router(Coord::new(1, 0));
    let b = mesh.router(Coord::new(2, 0));
    assert_eq!(a.owner(1, Direction::South), Some(Direction::Local));
    assert_eq!(b.owner(1, Direction::East), Some(Direction::Local));
}

#[test]
fn flit_conservation_every_cycle() {
    let cfg = NocConfig::new(128, 4, 4);
    let mut mesh = Mesh::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let nodes: Vec<Coord> = (0..16).map(|i| cfg.node_coord(i)).collect();
    let mut delivered = 0u64;
    for cycle in 0..3000 {
        if cycle < 2000 {
            for &s in &nodes {
                if mesh.inject_queue_len(s, Plane::DmaRequest) == 0 && rng.gen_bool(0.3) {
                    // a single multicasting source keeps the mesh deadlock free
                    let n = if s == nodes[0] { rng.gen_range(2..=4) } else { 1 };
                    let dests = nodes.choose_multiple(&mut rng, n).copied().collect();
                    let flits = build_packet(
                        &HeaderFields::new(s, dests, MsgType::DmaReadRequest),
                        &vec![Payload::ZERO; rng.gen_range(0..3)],
                        &cfg,
                    )
                    .unwrap();
                    for f in flits {
                        mesh.inject(s, f).unwrap();
                    }
                }
            }
        }
        mesh.step().unwrap();
        for &n in &nodes {
            delivered += mesh.take_delivered(n, Plane::DmaRequest).count() as u64;
        }
        let st = mesh.stats();
        let (routers, _) = mesh.in_flight_plane(0);
        assert_eq!(st.delivered[0], delivered);
        assert_eq!(st.injected[0] + st.replicated[0], st.delivered[0] + routers as u64);
    }
    assert!(mesh.is_drained());
}

#[test]
fn evaluation_order_does_not_matter() {
    let cfg = NocConfig::new(64, 4, 4);
    let spec = TrafficSpec { injection_rate: 0.3, destinations: 1..=3, inject_cycles: 300, ..Default::default() };
    let mut a = Mesh::new(cfg.clone()).unwrap();
    let mut b = Mesh::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let nodes: Vec<Coord> = (0..16).map(|i| cfg.node_coord(i)).collect();
    let mut order: Vec<usize> = (0..16).collect();
    for cycle in 0..600 {
        if cycle < spec.inject_cycles {
            for &s in &nodes {
                if a.inject_queue_len(s, Plane::DmaRequest) == 0 && rng.gen_bool(spec.injection_rate) {
                    let n = rng.gen_range(1..=3);
                    let dests = nodes.choose_multiple(&mut rng, n).copied().collect();
                    let flits =
                        build_packet(&HeaderFields::new(s, dests, MsgType::DmaReadRequest), &[Payload::ZERO; 2], &cfg)
                            .unwrap();
                    for f in flits {
                        a.inject(s, f).unwrap();
                        b.inject(s, f).unwrap();
                    }
                }
            }
        }
        order.shuffle(&mut rng);
        a.step().unwrap();
        b.step_in_order(&order).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint(), "diverged at cycle {cycle}");
    }
}

fn all_planes() -> Vec<Plane> {
    vec![Plane::DmaRequest, Plane::DmaResponse, Plane::Misc]
}

#[test]
fn uniform_unicast_drains_at_saturation() {
    let cfg = NocConfig::new(64, 4, 4);
    for rate in [0.05, 0.2, 1.0] {
        let mut mesh = Mesh::new(cfg.clone()).unwrap();
        let spec = TrafficSpec {
            injection_rate: rate,
            planes: all_planes(),
            inject_cycles: 5_000,
            seed: 9,
            ..Default::default()
        };
        let r = run_traffic(&mut mesh, &spec).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(r.packets > 0);
        assert_eq!(r.expected_copies, r.delivered_copies);
    }
}

#[test]
fn hotspot_traffic_drains() {
    let cfg = NocConfig::new(128, 4, 4);
    let mut mesh = Mesh::new(cfg.clone()).unwrap();
    let spec = TrafficSpec {
        pattern: Pattern::Hotspot { node: Coord::new(1, 2), fraction: 0.5 },
        injection_rate: 0.5,
        planes: all_planes(),
        inject_cycles: 5_000,
        seed: 21,
        ..Default::default()
    };
    let r = run_traffic(&mut mesh, &spec).unwrap();
    assert!(r.violations.is_empty(), "{:?}", r.violations);
    assert_eq!(r.expected_copies, r.delivered_copies);
}

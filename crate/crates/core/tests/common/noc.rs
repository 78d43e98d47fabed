// SPDX-License-Identifier: Apache-2.0

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tilesoc::noc::{
    build_packet, dor_path, Coord, Direction, Flit, HeaderFields, LinkId, Mesh, MsgType, NocConfig, Payload, Plane,
};

pub fn drain(mesh: &mut Mesh, limit: u64) {
    for _ in 0..limit {
        if mesh.is_drained() {
            return;
        }
        mesh.step().unwrap();
    }
    panic!("mesh did not drain in {limit} cycles");
}

/// `pairs` random unicasts on an idle 8x8 mesh: header latency is hops + 1,
/// the tail arrives hops + flits after injection.
pub fn zero_load(pairs: usize) -> String {
    let cfg = NocConfig::new(64, 8, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..pairs {
        let mut mesh = Mesh::new(cfg.clone()).unwrap();
        let s = Coord::new(rng.gen_range(0..8), rng.gen_range(0..8));
        let d = Coord::new(rng.gen_range(0..8), rng.gen_range(0..8));
        let body = rng.gen_range(0..6);
        let flits = build_packet(
            &HeaderFields::unicast(s, d, MsgType::DmaWriteRequest),
            &vec![Payload([1, 2, 3, 4]); body],
            &cfg,
        )
        .unwrap();
        let n = flits.len() as u64;
        for f in flits {
            mesh.inject(s, f).unwrap();
        }
        drain(&mut mesh, 200);
        let got: Vec<_> = mesh.take_delivered(d, Plane::DmaRequest).collect();
        assert_eq!(got.len() as u64, n);
        let hops = s.manhattan(d) as u64;
        let head = &got[0];
        assert_eq!(head.delivered_at - head.injected_at, hops + 1, "{s}->{d}");
        let start = head.injected_at;
        assert_eq!(got.last().unwrap().delivered_at - start, hops + n, "{s}->{d} with {n} flits");
    }
    format!("{pairs} pairs at hops + 1 and hops + flits")
}

struct Pending {
    flits: Vec<Flit>,
    meta: Option<(Coord, Vec<Coord>, Vec<Payload>)>,
}

/// `count` multicasts on a 4x4 mesh, one in the network at a time, over
/// background unicast load.
pub fn multicast_fuzz(count: usize) -> String {
    let cfg = NocConfig::new(256, 4, 4);
    let nodes: Vec<Coord> = (0..16).map(|i| cfg.node_coord(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mesh = Mesh::new(cfg.clone()).unwrap();
    mesh.enable_link_trace();
    let mut expected: HashMap<u64, (Coord, Vec<Coord>, Vec<Payload>)> = HashMap::new();
    let mut feed: Vec<VecDeque<Pending>> = (0..16).map(|_| VecDeque::new()).collect();
    let mut sent = 0;
    let mut mc_open: Option<(u64, usize)> = None;
    let mut mc_queued = false;
    let mut received: HashMap<(u64, Coord), Vec<Payload>> = HashMap::new();
    let random_body = |rng: &mut ChaCha8Rng| -> Vec<Payload> {
        (0..rng.gen_range(1..5)).map(|_| Payload([rng.gen(), rng.gen(), rng.gen(), rng.gen()])).collect()
    };
    while sent < count || mc_queued || mc_open.is_some() {
        if sent < count && !mc_queued && mc_open.is_none() {
            let i = rng.gen_range(0..16);
            let n = rng.gen_range(2..=16);
            let dests: Vec<Coord> = nodes.choose_multiple(&mut rng, n).copied().collect();
            let body = random_body(&mut rng);
            let flits =
                build_packet(&HeaderFields::new(nodes[i], dests.clone(), MsgType::P2pData), &body, &cfg).unwrap();
            feed[i].push_back(Pending { flits, meta: Some((nodes[i], dests, body)) });
            mc_queued = true;
            sent += 1;
        }
        for (i, q) in feed.iter_mut().enumerate() {
            if q.len() < 2 && rng.gen_bool(0.03) {
                let d = nodes[rng.gen_range(0..16)];
                let body = random_body(&mut rng);
                let flits = build_packet(&HeaderFields::unicast(nodes[i], d, MsgType::P2pData), &body, &cfg).unwrap();
                q.push_back(Pending { flits, meta: None });
            }
            let Some(p) = q.front_mut() else { continue };
            if mesh.inject_queue_len(nodes[i], Plane::DmaResponse) < 2 {
                let f = p.flits.remove(0);
                let id = mesh.inject(nodes[i], f).unwrap();
                if let Some(m) = p.meta.take() {
                    mc_open = Some((id, m.1.len()));
                    mc_queued = false;
                    expected.insert(id, m);
                }
                if p.flits.is_empty() {
                    q.pop_front();
                }
            }
        }
        mesh.step().unwrap();
        for &n in &nodes {
            for d in mesh.take_delivered(n, Plane::DmaResponse).collect::<Vec<_>>() {
                let r = received.entry((d.flit.packet, n)).or_default();
                assert_eq!(d.seq as usize, r.len(), "flits out of order at {n}");
                r.push(d.flit.payload);
                if let Some((id, left)) = mc_open.as_mut() {
                    if *id == d.flit.packet && d.flit.kind.is_last() {
                        *left -= 1;
                        if *left == 0 {
                            mc_open = None;
                        }
                    }
                }
            }
        }
        assert!(mesh.cycle() < 1_000_000, "stuck with {} flits in flight", mesh.in_flight());
    }
    assert_eq!(expected.len(), count);
    let trace = mesh.link_trace().unwrap();
    for (id, (src, dests, body)) in &expected {
        for d in dests {
            let got = &received[&(*id, *d)];
            assert_eq!(&got[1..], &body[..], "payload of packet {id} at {d}");
        }
        let delivered_to = received.keys().filter(|(p, _)| p == id).count();
        assert_eq!(delivered_to, dests.len());
        // each link on the union of XY paths carries every flit exactly once
        let mut links = HashSet::new();
        for d in dests {
            let mut at = *src;
            for dir in dor_path(*src, *d) {
                if dir == Direction::Local {
                    break;
                }
                links.insert(LinkId { node: at, port: dir, plane: Plane::DmaResponse });
                at = at.step(dir, 4, 4).unwrap();
            }
        }
        let used = trace.keys().filter(|(_, p, s)| p == id && *s == 0).count();
        assert_eq!(used, links.len(), "packet {id} used links off its tree");
        for l in &links {
            for seq in 0..=body.len() as u32 {
                assert_eq!(trace.get(&(*l, *id, seq)), Some(&1), "packet {id} link {l:?} flit {seq}");
            }
        }
    }
    assert!(trace.values().all(|&c| c == 1));
    format!("{count} packets, each copy once and in order, shared links once")
}

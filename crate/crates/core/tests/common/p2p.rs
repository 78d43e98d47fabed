// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tilesoc::accel::GenJob;
use tilesoc::experiment::{execute, plan, read_region, Mode, Plan, Region, WorkloadSpec};
use tilesoc::noc::Coord;
use tilesoc::sim::{Invocation, Soc, SocConfig, TileKind};
use tilesoc::socket::{LiChannel, Peer, StallPattern, TlbConfig};

use TileKind::{Acc, Cpu, Io, Mem};

pub fn demo() -> SocConfig {
    SocConfig::grid(256, &[&[Cpu, Acc(1), Acc(1)], &[Mem, Acc(1), Acc(1)], &[Io, Acc(1), Acc(1)]])
}

pub fn acc(x: u8, y: u8) -> Peer {
    Peer::new(Coord::new(x, y), 0)
}

type Logs = Vec<(Vec<u128>, Vec<u64>, Vec<u128>, Vec<u64>)>;

pub fn channels(soc: &mut Soc, stalls: Option<(u64, f64)>) {
    let peers: Vec<Peer> = soc.accelerators().collect();
    for (i, p) in peers.into_iter().enumerate() {
        let s = soc.accelerator_mut(p).unwrap();
        let pat = |k: u64| {
            stalls.map(|(seed, d)| StallPattern {
                valid: d,
                ready: d,
                seed: seed.wrapping_mul(31).wrapping_add(i as u64 * 4 + k),
            })
        };
        let ctrl = |k| match pat(k) {
            Some(p) => LiChannel::new().with_stalls(p).record(),
            None => LiChannel::new().record(),
        };
        let data = |k| match pat(k) {
            Some(p) => LiChannel::new().with_stalls(p).record(),
            None => LiChannel::new().record(),
        };
        s.socket.read_ctrl = ctrl(0);
        s.socket.read_data = data(1);
        s.socket.write_ctrl = ctrl(2);
        s.socket.write_data = data(3);
    }
}

pub fn logs(soc: &Soc) -> Logs {
    soc.accelerators()
        .map(|p| {
            let s = &soc.accelerator(p).unwrap().socket;
            (
                s.read_ctrl.log().unwrap().iter().map(|d| d.pack().unwrap()).collect(),
                s.read_data.log().unwrap().to_vec(),
                s.write_ctrl.log().unwrap().iter().map(|d| d.pack().unwrap()).collect(),
                s.write_data.log().unwrap().to_vec(),
            )
        })
        .collect()
}

/// `transfers` random workloads, each run clean and with stalls of random
/// density on every channel; the logged channel items must match.
pub fn stall_invariance(transfers: u64) -> String {
    let cfg = demo();
    let peers: Vec<Peer> = cfg.accelerators().into_iter().map(|(c, s)| Peer::new(c, s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in 0..transfers {
        let mode = [Mode::SharedMemory, Mode::P2p, Mode::Multicast][rng.gen_range(0..3)];
        let n = match mode {
            Mode::P2p => 1,
            Mode::Multicast => rng.gen_range(2..=3),
            Mode::SharedMemory => rng.gen_range(1..=3),
        };
        let mut order = peers.clone();
        for i in 0..order.len() {
            let j = rng.gen_range(i..order.len());
            order.swap(i, j);
        }
        let bytes = 8 * rng.gen_range(1..=768u64);
        let mut w = WorkloadSpec::fan_out(order[0], &order[1..=n], bytes, mode);
        w.chunk_bytes = [256, 1024, 4096][rng.gen_range(0..3)];
        w.double_buffer = rng.gen_bool(0.5);
        let density = rng.gen_range(0.0..0.9);
        let clean = execute(&cfg, plan(&cfg, &w, t).unwrap(), |s| channels(s, None)).unwrap();
        let stalled = execute(&cfg, plan(&cfg, &w, t).unwrap(), |s| channels(s, Some((t, density)))).unwrap();
        let want = logs(&clean.soc);
        assert!(want.iter().any(|l| !l.1.is_empty() && !l.3.is_empty()));
        assert_eq!(want, logs(&stalled.soc), "transfer {t}: {mode} x{n}, {bytes} bytes, density {density:.2}");
        if density > 0.2 {
            assert!(stalled.cycles > clean.cycles, "transfer {t}: stalls had no effect");
        }
    }
    format!("{transfers} transfers, item sequences identical")
}

pub fn p2p_pair(cfg: &SocConfig, prod_chunk: u64, cons_chunk: u64) -> Plan {
    let w = WorkloadSpec::fan_out(acc(1, 0), &[acc(2, 0)], 4096, Mode::P2p);
    let mut p = plan(cfg, &w, 9).unwrap();
    p.invocations[0].job.chunk_bytes = prod_chunk;
    p.invocations[1].job.chunk_bytes = cons_chunk;
    p
}

/// Every producer/consumer chunk pairing out of 4, 2 and 1 KiB.
pub fn burst_mismatch() -> String {
    let cfg = demo();
    for prod in [4096, 2048, 1024] {
        for cons in [4096, 2048, 1024] {
            let out =
                execute(&cfg, p2p_pair(&cfg, prod, cons), |_| {}).unwrap_or_else(|e| panic!("{prod}/{cons}: {e}"));
            let p = &out.soc.accelerator(acc(1, 0)).unwrap().socket;
            let c = &out.soc.accelerator(acc(2, 0)).unwrap().socket;
            assert_eq!(p.producer().unwrap().sent(), 4096);
            assert_eq!(p.stats.bytes_out, 4096);
            assert_eq!(c.stats.bytes_in, 4096);
            assert_eq!(p.stats.write_bursts, 4096 / prod);
            assert_eq!(c.stats.read_bursts, 4096 / cons);
            assert_eq!(c.stats.p2p_requests, 4096 / cons);
        }
    }
    "9 chunk pairings, 4096 bytes each".to_string()
}

/// A consumer alternating memory and producer chunks.
pub fn mixed_sources() -> String {
    let cfg = demo();
    let ps = cfg.page_size;
    let (prod, cons) = (acc(1, 0), acc(2, 2));
    let region = |page: u64, bytes| Region { pages: vec![page * ps], bytes };
    let (p_in, p_out, c_in, c_out) = (region(0, 2048), region(1, 2048), region(2, 4096), region(3, 4096));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut p_data = vec![0u8; 2048];
    let mut c_data = vec![0u8; 4096];
    rng.fill_bytes(&mut p_data);
    rng.fill_bytes(&mut c_data);

    let tlb = |a: &Region, b: &Region, bytes| TlbConfig {
        page_size: ps,
        page_table: vec![a.pages[0], b.pages[0]],
        buffer_size: ps + bytes,
    };
    let pj = GenJob { chunk_bytes: 1024, output_user: 1, output_offset: ps, ..GenJob::new(2048) };
    // chunks 0 and 2 from memory, 1 and 3 from the producer
    let cj = GenJob { chunk_bytes: 1024, input_user: 1, memory_mask: 0b0101, output_offset: ps, ..GenJob::new(4096) };
    let invocations = vec![
        Invocation {
            acc: prod,
            job: pj,
            tlb: tlb(&p_in, &p_out, 2048),
            lut: vec![],
            p2p_total: Some(2048),
            after: vec![],
        },
        Invocation {
            acc: cons,
            job: cj,
            tlb: tlb(&c_in, &c_out, 4096),
            lut: vec![(1, prod)],
            p2p_total: None,
            after: vec![],
        },
    ];
    let plan = Plan { invocations, inputs: vec![(p_in, p_data.clone()), (c_in, c_data.clone())], outputs: vec![] };
    let out = execute(&cfg, plan, |_| {}).unwrap();

    let mut want: Vec<u8> = Vec::new();
    want.extend(&c_data[0..1024]);
    want.extend(&p_data[0..1024]);
    want.extend(&c_data[2048..3072]);
    want.extend(&p_data[1024..2048]);
    assert_eq!(read_region(&out.soc, &c_out, ps), want);
    let c = &out.soc.accelerator(cons).unwrap().socket;
    assert_eq!(c.stats.read_bursts, 4);
    assert_eq!(c.stats.p2p_requests, 2);
    assert_eq!(c.stats.bytes_in, 4096);
    "memory and peer chunks interleave".to_string()
}

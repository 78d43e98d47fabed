// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tilesoc::accel::{AccelError, DmaEngine, DmaStatus, DmaTag, IdmaDescriptor, Plm};
use tilesoc::noc::{Coord, NocConfig};
use tilesoc::socket::{DestLut, Peer, Socket, SocketParams, TlbConfig, TransferDescriptor, WordSize};

/// Plays the socket's side of the four channels against a flat memory.
pub struct Harness {
    pub sock: Socket,
    pub mem: Vec<u8>,
    pub now: u64,
    pub reads: VecDeque<(TransferDescriptor, u32)>,
    pub writes: VecDeque<(TransferDescriptor, u32)>,
}

impl Harness {
    pub fn new(mem: Vec<u8>) -> Self {
        let noc = NocConfig::new(64, 2, 1);
        let me = Peer::new(Coord::new(1, 0), 0);
        let sock =
            Socket::new(me, noc, Coord::new(0, 0), TlbConfig::default(), DestLut::new(1), SocketParams::default());
        Harness { sock, mem, now: 0, reads: VecDeque::new(), writes: VecDeque::new() }
    }

    pub fn cycle(&mut self, dma: &mut DmaEngine, plm: &mut Plm) {
        self.sock.begin_cycle(self.now);
        dma.step(&mut self.sock, plm);
        if let Some(d) = self.sock.read_ctrl.recv() {
            self.reads.push_back((d, 0));
        }
        if let Some((d, n)) = self.reads.front_mut() {
            if self.sock.read_data.can_send() {
                let ws = d.word_size.bytes();
                let at = d.byte_offset() as usize + *n as usize * ws;
                let mut b = [0u8; 8];
                b[..ws].copy_from_slice(&self.mem[at..at + ws]);
                self.sock.read_data.send(u64::from_le_bytes(b)).unwrap();
                *n += 1;
                if *n == d.length {
                    self.reads.pop_front();
                }
            }
        }
        if let Some(d) = self.sock.write_ctrl.recv() {
            self.writes.push_back((d, 0));
        }
        if let Some((d, n)) = self.writes.front_mut() {
            if let Some(w) = self.sock.write_data.recv() {
                let ws = d.word_size.bytes();
                let at = d.byte_offset() as usize + *n as usize * ws;
                self.mem[at..at + ws].copy_from_slice(&w.to_le_bytes()[..ws]);
                *n += 1;
                if *n == d.length {
                    self.writes.pop_front();
                }
            }
        }
        self.now += 1;
    }
}

pub fn pattern(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen()).collect()
}

pub fn read_fills_plm() {
    let src = pattern(4096, 1);
    let mut h = Harness::new(src.clone());
    let mut dma = DmaEngine::default();
    let mut plm = Plm::new(4096);
    let tag = dma.idma(IdmaDescriptor::read(512, WordSize::B8, 0, 0, 0), &plm).unwrap();
    while dma.cdma(tag) == DmaStatus::InFlight {
        h.cycle(&mut dma, &mut plm);
    }
    assert_eq!(dma.cdma(tag), DmaStatus::Complete);
    assert_eq!(plm.bytes(), &src[..]);
}

/// Random issue and retire operations; no tag is handed out twice while in
/// flight and a retired tag of an older generation reads as unknown.
pub fn tag_fuzz(ops: u32) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut h = Harness::new(vec![0; 1 << 16]);
    let mut dma = DmaEngine::default();
    let mut plm = Plm::new(1 << 12);
    let mut live: BTreeMap<u8, DmaTag> = BTreeMap::new();
    let mut retired: Vec<DmaTag> = Vec::new();
    let (mut issued, mut done) = (0u32, 0u32);
    while issued + done < ops {
        if rng.gen_bool(0.6) {
            let len = rng.gen_range(1..=8);
            let plm_addr = rng.gen_range(0..512 - len);
            let off = 8 * rng.gen_range(0..8000u64);
            let desc = if rng.gen_bool(0.5) {
                IdmaDescriptor::read(len, WordSize::B8, off, plm_addr, 0)
            } else {
                IdmaDescriptor::write(len, WordSize::B8, off, plm_addr, 0)
            };
            match dma.idma(desc, &plm) {
                Ok(tag) => {
                    assert!(!live.contains_key(&tag.value), "tag {} handed out while in flight", tag.value);
                    assert_eq!(dma.cdma(tag), DmaStatus::InFlight);
                    live.insert(tag.value, tag);
                    issued += 1;
                }
                Err(AccelError::ResourceExhausted) => assert_eq!(live.len(), dma.window()),
                Err(e) => panic!("{e}"),
            }
        }
        h.cycle(&mut dma, &mut plm);
        let flying: BTreeSet<DmaTag> = dma.in_flight_tags().into_iter().collect();
        let values: BTreeSet<u8> = flying.iter().map(|t| t.value).collect();
        assert_eq!(values.len(), flying.len());
        for (v, t) in live.clone() {
            if !flying.contains(&t) {
                assert_eq!(dma.cdma(t), DmaStatus::Complete);
                live.remove(&v);
                retired.push(t);
                done += 1;
            }
        }
        for t in retired.iter().filter(|t| live.get(&t.value).is_some_and(|l| l.generation != t.generation)) {
            assert_eq!(dma.cdma(*t), DmaStatus::UnknownTag);
        }
        retired.retain(|t| !live.contains_key(&t.value));
    }
    format!("{ops} operations, {issued} issued, no duplicate tags")
}

/// idma a load, compute while it flies, poll, then use the data; compared
/// with copying the same bytes synchronously.
pub fn load_compute_check() -> String {
    let src = pattern(8192, 4);
    let mut h = Harness::new(src.clone());
    let mut dma = DmaEngine::default();
    let mut plm = Plm::new(2048);

    let mut oracle = Plm::new(2048);
    oracle.bytes_mut()[..1024].copy_from_slice(&src[512..1536]);
    for b in oracle.bytes_mut()[..1024].iter_mut() {
        *b = b.wrapping_add(1);
    }
    let mut oracle_mem = src.clone();
    oracle_mem[4096..5120].copy_from_slice(&oracle.bytes()[..1024]);

    let load = dma.idma(IdmaDescriptor::read(256, WordSize::B4, 512, 0, 0), &plm).unwrap();
    let mut work = 0u64;
    loop {
        h.cycle(&mut dma, &mut plm);
        work += 1;
        if work.is_multiple_of(7) && dma.cdma(load) == DmaStatus::Complete {
            break;
        }
    }
    for b in plm.bytes_mut()[..1024].iter_mut() {
        *b = b.wrapping_add(1);
    }
    let store = dma.idma(IdmaDescriptor::write(128, WordSize::B8, 4096, 0, 0), &plm).unwrap();
    while dma.cdma(store) != DmaStatus::Complete {
        h.cycle(&mut dma, &mut plm);
    }
    while !h.writes.is_empty() || !h.sock.write_data.is_empty() {
        h.cycle(&mut dma, &mut plm);
    }
    assert_eq!(plm.bytes(), oracle.bytes());
    assert_eq!(h.mem, oracle_mem);
    "PLM and memory equal the blocking copy".to_string()
}

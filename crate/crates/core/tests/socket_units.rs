// SPDX-License-Identifier: Apache-2.0

mod lut {
    use tilesoc::noc::Coord;
    use tilesoc::socket::*;

    #[test]
    fn configure_and_lookup() {
        let mut lut = DestLut::new(4);
        lut.configure(1, Peer::new(Coord::new(0, 1), 0)).unwrap();
        assert_eq!(lut.lookup(1).unwrap().tile, Coord::new(0, 1));
        assert!(lut.lookup(3).is_err());
        assert!(lut.lookup(4).is_err());
        assert!(lut.configure(2, Peer::new(Coord::new(0, 1), 0)).is_err());
        lut.configure(1, Peer::new(Coord::new(2, 1), 0)).unwrap();
        assert_eq!(lut.lookup(1).unwrap().tile, Coord::new(2, 1));
    }
}

mod channel {
    use tilesoc::socket::*;

    #[test]
    fn item_visible_next_cycle() {
        let mut ch = LiChannel::new();
        ch.begin_cycle(0);
        assert!(ch.send(7u64).is_ok());
        assert_eq!(ch.send(8), Err(8));
        assert_eq!(ch.recv(), None);
        ch.begin_cycle(1);
        assert_eq!(ch.recv(), Some(7));
    }

    #[test]
    fn full_rate_without_stalls() {
        let mut ch = LiChannel::new();
        let mut got = Vec::new();
        let mut next = 0u64;
        for c in 0..100 {
            ch.begin_cycle(c);
            if ch.send(next).is_ok() {
                next += 1;
            }
            got.extend(ch.recv());
        }
        assert_eq!(got.len(), 99);
        assert!(got.iter().copied().eq(0..99));
    }

    #[test]
    fn backpressure_holds_items() {
        let mut ch = LiChannel::new();
        for c in 0..5 {
            ch.begin_cycle(c);
            let _ = ch.send(c);
        }
        assert_eq!(ch.len(), 2);
        ch.begin_cycle(5);
        assert_eq!(ch.recv(), Some(0));
        assert_eq!(ch.recv(), None);
    }

    #[test]
    fn descriptor_layout() {
        let d = TransferDescriptor { length: 512, word_size: WordSize::B8, offset: 3, user: 17 };
        let w = d.pack().unwrap();
        assert_eq!(w & 0xffff_ffff, 512);
        assert_eq!(w >> 32 & 3, 3);
        assert_eq!(w >> 34 & 0xffff_ffff, 3);
        assert_eq!(w >> 66, 17);
        assert_eq!(TransferDescriptor::unpack(w).unwrap(), d);
        assert!(TransferDescriptor { user: 32, ..d }.pack().is_err());
        assert!(TransferDescriptor::unpack(1 << 71).is_err());
    }
}

mod packet {
    use tilesoc::noc::{decode_header, Coord};
    use tilesoc::noc::{FlitKind, HeaderFields, MsgType, NocConfig};
    use tilesoc::socket::packet::*;

    #[test]
    fn meta_roundtrip() {
        let m = MemMeta { addr: 0x1234_5678_9abc, len: 4096 };
        assert_eq!(MemMeta::from_bytes(&m.to_bytes()), m);
        let p = P2pMeta { len: 1 << 20, consumer_slot: 1, producer_slot: 0 };
        assert_eq!(P2pMeta::from_bytes(&p.to_bytes()), p);
    }

    #[test]
    fn write_packet_shape() {
        let cfg = NocConfig::new(64, 4, 4);
        let data: Vec<u8> = (0..20).collect();
        let meta = MemMeta { addr: 64, len: 20 }.to_bytes();
        let fields = HeaderFields::unicast(Coord::new(0, 0), Coord::new(1, 1), MsgType::DmaWriteRequest);
        let flits = packet(&fields, &[&meta, &data], &cfg).unwrap();
        // header, 2 meta flits (12 bytes), 3 data flits (20 bytes)
        assert_eq!(flits.len(), 6);
        assert_eq!(decode_header(&flits[0], &cfg).unwrap(), fields);
        assert_eq!(flits[5].kind, FlitKind::Tail);
        assert!(flits[1..5].iter().all(|f| f.kind == FlitKind::Body));
        let mut meta_back = Vec::new();
        flits[1].payload.append_bytes_to(8, &mut meta_back);
        flits[2].payload.append_bytes_to(4, &mut meta_back);
        assert_eq!(MemMeta::from_bytes(&meta_back).len, 20);
        assert_eq!(flits[5].payload.to_bytes(4), vec![16, 17, 18, 19]);
    }

    #[test]
    fn empty_body_is_single() {
        let cfg = NocConfig::new(256, 4, 4);
        let fields = HeaderFields::unicast(Coord::new(0, 0), Coord::new(1, 1), MsgType::DmaResponse);
        let flits = packet(&fields, &[], &cfg).unwrap();
        assert_eq!(flits.len(), 1);
        assert_eq!(flits[0].kind, FlitKind::Single);
    }
}

mod tlb {
    use tilesoc::socket::*;

    #[test]
    fn translate_examples() {
        let t = TlbConfig { page_size: 1 << 20, page_table: vec![0x4000_0000, 0x1000_0000], buffer_size: 2 << 20 };
        assert_eq!(t.translate(0).unwrap(), 0x4000_0000);
        assert_eq!(t.translate((1 << 20) + 16).unwrap(), 0x1000_0000 + 16);
        assert!(matches!(t.translate(2 << 20), Err(SocketError::BufferOverrun { .. })));
    }

    #[test]
    fn segments_split_at_pages() {
        let t = TlbConfig { page_size: 4096, page_table: vec![0x8000, 0x2000], buffer_size: 8192 };
        assert_eq!(t.segments(4000, 200).unwrap(), vec![(0x8000 + 4000, 96), (0x2000, 104)]);
        assert!(t.segments(8000, 200).is_err());
    }

    #[test]
    fn validation() {
        assert!(TlbConfig { page_size: 3000, page_table: vec![0], buffer_size: 10 }.validate().is_err());
        assert!(TlbConfig { page_size: 4096, page_table: vec![0], buffer_size: 4097 }.validate().is_err());
        assert!(TlbConfig::contiguous(1 << 20, 3 << 20, 1 << 20).validate().is_ok());
    }
}

mod p2p {
    use tilesoc::noc::Coord;
    use tilesoc::socket::*;

    fn peer(x: u8) -> Peer {
        Peer::new(Coord::new(x, 0), 0)
    }

    #[test]
    fn waits_for_all_consumers() {
        let mut p = P2pProducer::new(4096);
        p.request(peer(1), 4096).unwrap();
        assert_eq!(p.sendable(2).unwrap(), None);
        p.request(peer(2), 4096).unwrap();
        assert_eq!(p.sendable(2).unwrap(), Some(4096));
        p.consume(4096).unwrap();
        assert!(p.is_complete());
    }

    #[test]
    fn min_credit_gates_multicast() {
        let mut p = P2pProducer::new(4096);
        p.request(peer(1), 1024).unwrap();
        p.request(peer(2), 4096).unwrap();
        assert_eq!(p.sendable(2).unwrap(), Some(1024));
        assert!(p.consume(2048).is_err());
        p.consume(1024).unwrap();
        assert_eq!(p.sendable(2).unwrap(), Some(0));
        p.request(peer(1), 3072).unwrap();
        assert_eq!(p.sendable(2).unwrap(), Some(3072));
    }

    #[test]
    fn overflow_is_a_protocol_error() {
        let mut p = P2pProducer::new(4096);
        p.request(peer(1), 4096).unwrap();
        assert!(matches!(p.request(peer(1), 1), Err(SocketError::Protocol(_))));
    }

    #[test]
    fn extra_consumer_is_a_protocol_error() {
        let mut p = P2pProducer::new(64);
        p.request(peer(1), 64).unwrap();
        p.request(peer(2), 64).unwrap();
        assert!(p.sendable(1).is_err());
    }
}

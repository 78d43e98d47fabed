// SPDX-License-Identifier: Apache-2.0

//! One line per acceptance criterion. Exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use tilesoc::experiment::{
    emit_report, parse_config, presets, run_experiment, Mode, ResultTable, RunOptions, SweepSpec,
};
use tilesoc::noc::traffic::{run_traffic, Pattern, TrafficSpec};
use tilesoc::noc::{capacity, Coord, Mesh, NocConfig, Plane};

type Check = Box<dyn FnOnce() -> Result<String, String>>;

fn ok(s: String) -> Result<String, String> {
    Ok(s)
}

fn capacities() -> Result<String, String> {
    let got: Vec<usize> = [64, 128, 256].iter().map(|&b| capacity(b).unwrap()).collect();
    if got == [5, 14, 16] {
        Ok("64, 128 and 256 bits hold 5, 14 and 16 destinations".into())
    } else {
        Err(format!("capacities {got:?}"))
    }
}

fn deadlock_freedom() -> Result<String, String> {
    let planes = vec![Plane::DmaRequest, Plane::DmaResponse, Plane::Misc];
    let mut runs = 0;
    let mut packets = 0;
    for bits in [64, 128, 256] {
        for pattern in [Pattern::Uniform, Pattern::Hotspot { node: Coord::new(1, 2), fraction: 0.5 }] {
            for rate in [0.02, 0.2, 1.0] {
                let mut mesh = Mesh::new(NocConfig::new(bits, 4, 4)).unwrap();
                let spec = TrafficSpec {
                    pattern,
                    injection_rate: rate,
                    planes: planes.clone(),
                    inject_cycles: 100_000,
                    seed: runs,
                    ..Default::default()
                };
                let r = run_traffic(&mut mesh, &spec).map_err(|e| format!("{bits}-bit {pattern:?} at {rate}: {e}"))?;
                if !r.violations.is_empty() || r.expected_copies != r.delivered_copies {
                    return Err(format!("{bits}-bit {pattern:?} at {rate}: {:?}", r.violations.first()));
                }
                runs += 1;
                packets += r.packets;
            }
        }
    }
    Ok(format!("{runs} runs of 100000 cycles on three planes, {packets} unicast packets drained"))
}

fn check(cond: bool, what: String, fails: &mut Vec<String>) {
    if !cond {
        fails.push(what);
    }
}

fn trend(table: &ResultTable, sweep: &SweepSpec) -> Result<String, String> {
    let s = |n: usize, b: u64| table.speedup(n, b).expect("point ran");
    let mut fails = Vec::new();
    for &b in &sweep.data_sizes {
        for &n in &sweep.consumer_counts {
            check(s(n, b) > 0.0, format!("(a) speedup({n}, {b}) = {:.1}", s(n, b)), &mut fails);
            if n >= 2 {
                let cap = (n - 1) as f64 * 100.0;
                check(s(n, b) < cap, format!("(c) speedup({n}, {b}) = {:.1} >= {cap}", s(n, b)), &mut fails);
            }
        }
        for w in sweep.consumer_counts.windows(2) {
            let (lo, hi) = (s(w[0], b), s(w[1], b));
            check(
                hi >= lo,
                format!("(b) speedup({}, {b}) = {hi:.1} < speedup({}, {b}) = {lo:.1}", w[1], w[0]),
                &mut fails,
            );
        }
    }
    let (k4, m1, m4) = (4 << 10, 1 << 20, 4 << 20);
    check(
        s(16, k4) > s(1, k4),
        format!("(b) speedup(16, 4K) {:.1} <= speedup(1, 4K) {:.1}", s(16, k4), s(1, k4)),
        &mut fails,
    );
    for &n in &sweep.consumer_counts {
        let d = (s(n, m4) - s(n, m1)).abs();
        check(d < 10.0, format!("(d) N={n}: 1 MiB to 4 MiB moves {d:.1} pp"), &mut fails);
    }
    let band = |v: f64, lo: f64, hi: f64| (lo..=hi).contains(&v);
    let anchors = [(1, k4, 40.0, 110.0), (16, k4, 80.0, 170.0), (16, m1, 150.0, 260.0)];
    for (n, b, lo, hi) in anchors {
        check(
            band(s(n, b), lo, hi),
            format!("(e) speedup({n}, {b}) = {:.1} outside [{lo}, {hi}]", s(n, b)),
            &mut fails,
        );
    }
    if fails.is_empty() {
        Ok(format!(
            "(a)-(e) hold over {} points, (c) for N >= 2; anchors {:.1}%, {:.1}%, {:.1}%",
            table.rows.len() / 2,
            s(1, k4),
            s(16, k4),
            s(16, m1)
        ))
    } else {
        Err(fails.join("; "))
    }
}

fn main() {
    let (soc, sweep) = parse_config(presets::CALIBRATED_FIG5, Path::new("calibrated-fig5")).unwrap();
    let sweep = sweep.unwrap();
    assert!(sweep.modes.contains(&Mode::Multicast));
    let opts = RunOptions { workers: 0, seed: soc.seed, trace_dir: None };
    let dir = tempfile::tempdir().unwrap();
    let (soc8, sweep8, opts8, dir8) = (soc.clone(), sweep.clone(), opts.clone(), dir.path().to_path_buf());
    let (soc9, sweep9, opts9, dir9) = (soc, sweep, opts, dir.path().to_path_buf());

    let checks: Vec<(&str, Check)> = vec![
        ("header capacity", Box::new(capacities)),
        ("zero-load latency", Box::new(|| ok(common::noc::zero_load(100)))),
        ("multicast delivery", Box::new(|| ok(common::noc::multicast_fuzz(1000)))),
        ("deadlock freedom", Box::new(deadlock_freedom)),
        ("latency insensitivity", Box::new(|| ok(common::p2p::stall_invariance(200)))),
        (
            "p2p burst mismatch",
            Box::new(|| ok(format!("{}; {}", common::p2p::burst_mismatch(), common::p2p::mixed_sources()))),
        ),
        (
            "idma/cdma semantics",
            Box::new(|| ok(format!("{}; {}", common::dma::tag_fuzz(10_000), common::dma::load_compute_check()))),
        ),
        (
            "speedup trend",
            Box::new(move || {
                let t = run_experiment(&soc8, &sweep8, &opts8).map_err(|e| e.to_string())?;
                emit_report(&t, &sweep8, &dir8.join("a")).map_err(|e| e.to_string())?;
                trend(&t, &sweep8)
            }),
        ),
        (
            "determinism",
            Box::new(move || {
                let t = run_experiment(&soc9, &sweep9, &opts9).map_err(|e| e.to_string())?;
                emit_report(&t, &sweep9, &dir9.join("b")).map_err(|e| e.to_string())?;
                let a = std::fs::read(dir9.join("a/results.csv")).map_err(|e| e.to_string())?;
                let b = std::fs::read(dir9.join("b/results.csv")).map_err(|e| e.to_string())?;
                if a == b {
                    Ok(format!("re-run results.csv identical, {} bytes", a.len()))
                } else {
                    Err("re-run results.csv differs".into())
                }
            }),
        ),
    ];

    let mut failed = 0;
    for (i, (name, f)) in checks.into_iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {} PASS {name}: {d} ({secs:.1}s)", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {d} ({secs:.1}s)", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

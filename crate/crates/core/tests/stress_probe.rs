// temporary stress probe for the lattice builder
use sparsedom::gen;
use sparsedom::lattice::{build_lattice, check_lattice, suggest_k_range, LatticeConfig, LatticeMode};

#[test]
fn stress_random_clouds() {
    let mut fails = 0;
    for seed in 0..100u64 {
        let n = 4 + (seed as usize * 7) % 61;
        let space = gen::random_cloud(n, seed);
        for a0 in [4.0, 6.0] {
            let (k_min, k_max) = suggest_k_range(&space, 2.0, a0);
            let cfg = LatticeConfig::lab(2.0, a0, k_min, k_max);
            match build_lattice(&space, &cfg) {
                Ok(lat) => {
                    let rep = check_lattice(&lat, &space);
                    if !rep.pass() { println!("seed {seed} n {n} a0 {a0}: CHECK FAIL {rep}"); fails += 1; }
                }
                Err(e) => { println!("seed {seed} n {n} a0 {a0}: BUILD ERR {e}"); fails += 1; }
            }
        }
    }
    assert_eq!(fails, 0);
}

#[test]
fn stress_named_fixtures_both_modes() {
    let mut fails = 0;
    for (name, space) in gen::named_fixtures() {
        let (k_min, k_max) = suggest_k_range(&space, 2.0, 4.0);
        let cfg = LatticeConfig::lab(2.0, 4.0, k_min, k_max);
        match build_lattice(&space, &cfg) {
            Ok(lat) => {
                let rep = check_lattice(&lat, &space);
                println!("lab {name}: cells={} levels {}..{} pass={}", lat.cells.len(), k_min, k_max, rep.pass());
                if !rep.pass() { println!("{rep}"); fails += 1; }
            }
            Err(e) => { println!("lab {name}: ERR {e}"); fails += 1; }
        }
        // strict mode: diameter <= 10 fixtures
        if space.diameter() <= 10.0 {
            let a0 = 10001.0 * 2.0;
            let (k_min, k_max) = suggest_k_range(&space, 2.0, a0);
            let cfg = LatticeConfig { mode: LatticeMode::Strict, c0: 2.0, a0, k_min, k_max, tie_break_seed: 0 };
            match build_lattice(&space, &cfg) {
                Ok(lat) => {
                    let rep = check_lattice(&lat, &space);
                    println!("strict {name}: cells={} levels {}..{} pass={}", lat.cells.len(), k_min, k_max, rep.pass());
                    if !rep.pass() { println!("{rep}"); fails += 1; }
                }
                Err(e) => { println!("strict {name}: ERR {e}"); fails += 1; }
            }
        }
    }
    assert_eq!(fails, 0);
}

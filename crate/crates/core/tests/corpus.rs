//! Every checked-in fuzz seed is a valid input for its parser.

use std::fs;
use std::path::PathBuf;

use shardflow::{cli, io};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let b = fs::read(&p).unwrap();
            (p, b)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(b: &[u8]) -> &str {
    std::str::from_utf8(b).unwrap()
}

#[test]
fn text_seeds_parse() {
    type Check = fn(&str) -> bool;
    let targets: [(&str, Check); 7] = [
        ("polygon_json", |s| io::parse_polygon_json(s).is_ok()),
        ("problem_json", |s| io::parse_problem_json(s).is_ok()),
        ("solution_json", |s| io::parse_solution_json(s).is_ok()),
        ("partition_json", |s| io::parse_partition_json(s).is_ok()),
        ("pieces1d_json", |s| io::parse_pieces1d_json(s).is_ok()),
        ("packing_csv", |s| io::parse_packing_csv(s).is_ok()),
        ("config_json", |s| cli::parse_config(s).is_ok()),
    ];
    for (target, ok) in targets {
        for (p, b) in seeds(target) {
            assert!(ok(text(&b)), "{}", p.display());
        }
    }
}

#[test]
fn grid_seeds_parse() {
    for (p, b) in seeds("grid") {
        let split = b.iter().position(|c| *c == b'\n').unwrap();
        let g = io::parse_grid(text(&b[..split]), &b[split + 1..]);
        assert!(g.is_ok(), "{}: {g:?}", p.display());
    }
}

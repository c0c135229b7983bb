//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::collections::{BTreeMap, HashMap};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lagpar::storage::{
    self, encode_block_file, health_check, sha256_hex, verify_dataset, Fault, Provenance, StorageError, Store,
};
use lagpar::{
    compute_indicator, encode, evaluate_many, interpolate, locate_corruption, original_blocks, recover, CodecError,
    CodedBlock, IndicatorDef, Point, Rational, RecoverySet,
};
use oracle::{brute_eval, int, ints, vandermonde_solve};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_lagpar");

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn random_rational(rng: &mut ChaCha8Rng) -> Rational {
    Rational::new(rng.gen_range(-1_000_000i64..=1_000_000), rng.gen_range(1i64..=10_000))
}

fn random_values(rng: &mut ChaCha8Rng, k: usize) -> Vec<Rational> {
    (0..k).map(|_| random_rational(rng)).collect()
}

fn all_blocks(values: &[Rational], m: usize, id: &str) -> Vec<CodedBlock> {
    let mut blocks = original_blocks(values, id).unwrap();
    blocks.extend(encode(values, m, id).unwrap());
    blocks
}

fn golden_vector() -> Outcome {
    let raw = [(1, 2), (2, 3), (3, 5)];
    let expected = vec![int(2), Rational::new(-1, 2), Rational::new(1, 2)];
    let oracle_pts: Vec<_> = raw.iter().map(|&(x, y)| (int(x), int(y))).collect();
    ensure!(vandermonde_solve(&oracle_pts) == expected, "oracle disagrees with the golden coefficients");

    let pts: Vec<Point> = raw.iter().map(|&(x, y)| Point::new(x, y)).collect();
    let start = Instant::now();
    let poly = interpolate(&pts).map_err(|e| e.to_string())?;
    let evals = evaluate_many(&poly, &ints(&[1, 2, 3]));
    let elapsed = start.elapsed();

    ensure!(poly.coefficients() == &expected[..], "coefficients {:?}", poly.coefficients());
    ensure!(evals == ints(&[2, 3, 5]), "evaluations {evals:?}");
    ensure!(elapsed < Duration::from_millis(1), "took {elapsed:?}");
    Ok(format!("coefficients=2/1,-1/2,1/2 evaluations=2,3,5 time={elapsed:?}"))
}

fn carbon_dataset() -> Outcome {
    let raw = [(1, 300), (2, 400), (3, 300), (4, 3000)];
    let frozen = ints(&[-3000, 5900, -3100, 500]);
    let oracle_pts: Vec<_> = raw.iter().map(|&(x, y)| (int(x), int(y))).collect();
    ensure!(vandermonde_solve(&oracle_pts) == frozen, "oracle disagrees with the frozen coefficients");

    let pts: Vec<Point> = raw.iter().map(|&(x, y)| Point::new(x, y)).collect();
    let poly = interpolate(&pts).map_err(|e| e.to_string())?;
    ensure!(poly.coefficients() == &frozen[..], "coefficients {:?}", poly.coefficients());
    let defective = [int(-100), Rational::new(11, 6), Rational::new(-3, 2), Rational::new(1, 6)];
    ensure!(poly.coefficients() != &defective[..], "matched the defective cubic");

    let def =
        IndicatorDef::ratio_of_sums("carbon_footprint", vec!["a".into(), "b".into(), "c".into()], vec!["v".into()]);
    let inputs: HashMap<String, Rational> =
        [("a", 300), ("b", 400), ("c", 300), ("v", 3000)].iter().map(|&(k, v)| (k.to_owned(), int(v))).collect();
    let footprint = compute_indicator(&def, &inputs).map_err(|e| e.to_string())?;
    let by_hand = &(int(300) + int(400) + int(300)) * &int(3000).checked_recip().unwrap();
    ensure!(footprint == by_hand && footprint == Rational::new(1, 3), "footprint {footprint}");
    Ok("coefficients=-3000,5900,-3100,500 footprint=1/3".into())
}

fn total_loss_recovery() -> Outcome {
    let start = Instant::now();

    // k = 4, m = 4 through both stores with every original deleted.
    let values = ints(&[300, 400, 300, 3000]);
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let primary = Store::create(dir.path().join("p")).map_err(|e| e.to_string())?;
    let secondary = Store::create(dir.path().join("s")).map_err(|e| e.to_string())?;
    storage::store_dataset(&values, 4, "loss", &primary, &secondary).map_err(|e| e.to_string())?;
    for index in 0..4 {
        storage::inject_fault(&primary, &Fault::DeleteBlock { dataset_id: "loss".into(), index })
            .map_err(|e| e.to_string())?;
    }
    let got = storage::recover_dataset("loss", &primary, &secondary).map_err(|e| e.to_string())?;
    ensure!(got.values == values, "stored k=4 m=4 recovered {:?}", got.values);
    ensure!(got.provenance == Provenance::Reconstructed, "provenance {:?}", got.provenance);

    let mut rng = ChaCha8Rng::seed_from_u64(0x7031);
    for trial in 0..200 {
        let k = rng.gen_range(1..=12);
        let m = rng.gen_range(k..=k + 4);
        let values = random_values(&mut rng, k);
        let parity = encode(&values, m, "t").map_err(|e| e.to_string())?;
        let set = RecoverySet::new(parity, k).map_err(|e| e.to_string())?;
        let recovered = recover(&set).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure!(recovered == values, "trial {trial} k={k} m={m}: wrong values");
    }

    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("stored k=4 m=4 ok, 200/200 random datasets exact, time={elapsed:?}"))
}

fn threshold_sharpness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7032);
    let mut refused = 0;
    for trial in 0..100 {
        let k = rng.gen_range(1..=12);
        let m = rng.gen_range(0..=8);
        let values = random_values(&mut rng, k);
        let mut blocks = all_blocks(&values, m, "t");
        blocks.shuffle(&mut rng);
        blocks.truncate(k - 1);
        let result = RecoverySet::new(blocks, k).and_then(|set| recover(&set));
        match result {
            Err(CodecError::InsufficientBlocks { .. }) => refused += 1,
            Err(e) => return Err(format!("trial {trial}: unexpected error {e}")),
            Ok(v) => return Err(format!("trial {trial} k={k}: returned {v:?}")),
        }
    }
    ensure!(refused == 100, "{refused}/100 refused");
    Ok("100/100 cases with k-1 blocks refused".into())
}

fn correction_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7033);
    for trial in 0..200 {
        let e = rng.gen_range(1..=2usize);
        let k = rng.gen_range(1..=12 - 2 * e);
        let n = rng.gen_range(k + 2 * e..=12);
        let values = random_values(&mut rng, k);
        let mut blocks = all_blocks(&values, n - k, "t");
        let mut corrupted: Vec<u64> = (0..n as u64).collect();
        corrupted.shuffle(&mut rng);
        corrupted.truncate(e);
        corrupted.sort_unstable();
        for &i in &corrupted {
            let b = &mut blocks[i as usize];
            let bad = b.value() + &Rational::new(rng.gen_range(1i64..=1000), rng.gen_range(1i64..=50));
            *b = b.clone().with_value(bad);
        }
        let set = RecoverySet::new(blocks, k).map_err(|e| e.to_string())?;
        let c = locate_corruption(&set).map_err(|err| format!("trial {trial} k={k} n={n} e={e}: {err}"))?;
        ensure!(c.suspects == corrupted, "trial {trial}: suspects {:?}, corrupted {:?}", c.suspects, corrupted);
        ensure!(c.recovered == values, "trial {trial}: wrong values");
    }

    // Below the bound: k-1 shared points, e on P and e on a second
    // polynomial Q through the shared points, so n = k + 2e - 1 and P and Q
    // tie on agreement.
    let mut ambiguous = 0;
    for k in 1..=8usize {
        for e in 1..=2usize {
            let n = k + 2 * e - 1;
            let values = random_values(&mut rng, k);
            let p_pts: Vec<_> = values.iter().enumerate().map(|(i, v)| (int(i as i64), v.clone())).collect();
            let p = vandermonde_solve(&p_pts);
            let mut xs: Vec<u64> = (0..n as u64).collect();
            xs.shuffle(&mut rng);
            let (shared, rest) = xs.split_at(k - 1);
            let on_q = &rest[e..];
            let mut q_pts: Vec<_> = shared.iter().map(|&x| (int(x as i64), brute_eval(&p, &int(x as i64)))).collect();
            let anchor = int(on_q[0] as i64);
            q_pts.push((anchor.clone(), brute_eval(&p, &anchor) + int(rng.gen_range(1..=100))));
            let q = vandermonde_solve(&q_pts);
            let blocks: Vec<CodedBlock> = (0..n as u64)
                .map(|x| {
                    let poly = if on_q.contains(&x) { &q } else { &p };
                    CodedBlock::new("t", k, x, brute_eval(poly, &int(x as i64))).unwrap()
                })
                .collect();
            let set = RecoverySet::new(blocks, k).map_err(|e| e.to_string())?;
            match locate_corruption(&set) {
                Err(CodecError::Ambiguous { .. }) => ambiguous += 1,
                other => return Err(format!("k={k} e={e} n={n}: expected ambiguity, got {other:?}")),
            }
        }
    }
    Ok(format!("200/200 located exactly, {ambiguous}/{ambiguous} below-bound cases ambiguous"))
}

fn storage_end_to_end() -> Outcome {
    let err = |e: StorageError| e.to_string();
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let primary = Store::create(dir.path().join("p")).map_err(err)?;
    let secondary = Store::create(dir.path().join("s")).map_err(err)?;
    let values = vec![int(300), int(400), Rational::new(-7, 3), int(3000)];
    let (k, m) = (values.len(), 4);
    storage::store_dataset(&values, m, "e2e", &primary, &secondary).map_err(err)?;
    storage::inject_fault(&primary, &Fault::Unreachable).map_err(err)?;
    ensure!(!health_check(&primary).reachable, "primary still reachable");

    let got = storage::recover_dataset("e2e", &primary, &secondary).map_err(err)?;
    ensure!(got.provenance == Provenance::Reconstructed, "provenance {:?}", got.provenance);
    ensure!(got.values == values, "values {:?}", got.values);
    // Independent re-check of the digest validation step.
    for block in all_blocks(&got.values, m, "e2e") {
        let digest = sha256_hex(encode_block_file(&block, m).as_bytes());
        ensure!(got.manifest.digest(block.index()) == Some(digest.as_str()), "digest mismatch at {}", block.index());
    }
    ensure!(got.manifest.k == k && got.manifest.m == m, "manifest k/m");

    // Exhaustive single-byte flips over one small dataset.
    let small = ints(&[2, 3, 5]);
    let (p2, s2) =
        (Store::create(dir.path().join("p2")).map_err(err)?, Store::create(dir.path().join("s2")).map_err(err)?);
    storage::store_dataset(&small, 2, "small", &p2, &s2).map_err(err)?;
    let mut flips = 0;
    for index in 0..5u64 {
        let store = if index < 3 { &p2 } else { &s2 };
        let path = store.block_path("small", index);
        let len = std::fs::metadata(&path).map_err(|e| e.to_string())?.len() as usize;
        for offset in 0..len {
            let fault = Fault::FlipByte { dataset_id: "small".into(), index, offset };
            storage::inject_fault(store, &fault).map_err(err)?;
            ensure!(health_check(store).corrupt_files.contains(&path), "flip {index}@{offset} missed by health check");
            let report = verify_dataset("small", &p2, &s2).map_err(err)?;
            ensure!(report.digest_failures == vec![index], "flip {index}@{offset} missed by verify");
            storage::inject_fault(store, &fault).map_err(err)?;
            flips += 1;
        }
    }
    ensure!(health_check(&p2).corrupt_files.is_empty(), "store not restored");
    Ok(format!("provenance=reconstructed, digests validated, {flips}/{flips} byte flips detected"))
}

fn run_cli(args: &[&str]) -> (Vec<u8>, Vec<u8>, Option<i32>) {
    let out = Command::new(BIN).args(args).env_remove("LAGPAR_ROOT").output().expect("run lagpar");
    (out.stdout, out.stderr, out.status.code())
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn determinism() -> Outcome {
    let encode_args = ["encode", "--values", "300,400,-7/3,3000", "--m", "4", "--id", "det"];
    let demos: [&[&str]; 6] = [
        &["demo", "carbon"],
        &["--machine", "demo", "carbon"],
        &["demo", "forecast", "--scenario", "failover"],
        &["demo", "forecast", "--scenario", "healthy"],
        &["demo", "forecast", "--scenario", "below-threshold"],
        &["--machine", "encode", "--values", "1/2,1/3", "--m", "3", "--id", "det"],
    ];
    let mut checked = 0;
    for args in std::iter::once(&encode_args[..]).chain(demos) {
        let first = run_cli(args);
        ensure!(first == run_cli(args), "`{}` differs between runs", args.join(" "));
        checked += 1;
    }

    let mut stores = Vec::new();
    for _ in 0..2 {
        let dir = TempDir::new().map_err(|e| e.to_string())?;
        let p = dir.path().join("p").display().to_string();
        let s = dir.path().join("s").display().to_string();
        let out = run_cli(&[
            "--primary",
            &p,
            "--secondary",
            &s,
            "store",
            "--values",
            "300,400,300,3000",
            "--m",
            "4",
            "--id",
            "det",
            "--created",
            "2024-01-01T00:00:00Z",
        ]);
        ensure!(out.2 == Some(0), "store exited {:?}", out.2);
        stores.push((out, tree(&dir.path().join("p")), tree(&dir.path().join("s"))));
    }
    ensure!(stores[0] == stores[1], "store output or files differ between runs");
    Ok(format!("{} commands byte-identical across two runs, stored files identical", checked + 1))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("golden vector", golden_vector),
        ("carbon dataset", carbon_dataset),
        ("total-loss recovery", total_loss_recovery),
        ("erasure threshold sharpness", threshold_sharpness),
        ("correction bound", correction_bound),
        ("storage workflow end to end", storage_end_to_end),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", n + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

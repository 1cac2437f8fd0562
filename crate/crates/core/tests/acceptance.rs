//! Acceptance suite: fourteen exact criteria, each reported on one line as
//! PASS or FAIL. Runs as a plain program (no libtest harness) so the table is
//! always printed; the exit status is nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use thetaforge::brokenlines::{structure_constants, theta, transport};
use thetaforge::cluster::{
    broken_line_correspondence, build_cluster_diagram, cluster_chambers, cluster_ray_thetas, mutation_invariance,
    t_chart_point, ClusterFlavor, Seed,
};
use thetaforge::dtwall::{extract_dt, two_wall_setup};
use thetaforge::lattice::{LatticeVec, Point};
use thetaforge::laurent::{pl_poly, quantum_int, LaurentPoly};
use thetaforge::qtorus::RayFunction;
use thetaforge::{Error, QDiagram};

type Outcome = std::result::Result<String, String>;

fn fixture(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn initial(name: &str, k: u32) -> QDiagram {
    QDiagram::from_init_json(&fixture(name), k).expect("fixture parses")
}

const SCATTER_FIXTURES: [&str; 4] = ["pentagon.json", "kronecker2.json", "kronecker3.json", "dense_example.json"];

fn lp(terms: &[(i64, i64)]) -> LaurentPoly {
    LaurentPoly::from_i64_terms(terms)
}

fn t_pow(e: i64) -> LaurentPoly {
    lp(&[(e, 1)])
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

/// Brute-force lambda(a, a) for two inputs of parities `even[i]` and `omega(v1, v2) = n`.
fn lambda_aa(n: i64, even: [bool; 2], a: [i64; 2]) -> i64 {
    let l = |i: usize, j: usize| -> i64 {
        if i == j {
            i64::from(even[i])
        } else {
            let w = if i == 0 { n } else { -n };
            w.max(0)
        }
    };
    (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| l(i, j) * a[i] * a[j]).sum()
}

fn ee_entries(d: &QDiagram) -> std::result::Result<Vec<([i64; 2], u32, LaurentPoly)>, String> {
    let mut out = Vec::new();
    for w in d.to_ee_form().map_err(err)? {
        for (j, p) in w.factors {
            out.push((w.ab, j, p));
        }
    }
    Ok(out)
}

fn c01_pentagon() -> Outcome {
    let k = 8;
    let d = initial("pentagon.json", k).complete(k).map_err(err)?;
    let outgoing: Vec<_> = d.rays().iter().filter(|r| r.ray == d.outgoing_ray(r.ab) && r.ab[0] > 0 && r.ab[1] > 0).collect();
    ensure(outgoing.len() == 1, || format!("{} outgoing interior walls", outgoing.len()))?;
    let w = outgoing[0];
    ensure(w.ab == [1, 1], || format!("outgoing wall in direction {:?}", w.ab))?;
    let psi = RayFunction::psi(vec![1, 1], 1, 0, k).map_err(err)?;
    ensure(w.func == psi, || "wall function differs from Psi_t(z^(v1+v2))".into())?;
    let factors = d.outgoing_ee([1, 1]).map_err(err)?;
    ensure(factors == BTreeMap::from([(1, LaurentPoly::one())]), || format!("EE factors {factors:?}"))?;
    ensure(d.check_consistent().map_err(err)?.consistent, || "completed diagram is inconsistent".into())?;
    Ok(format!("single wall Psi_t(z^(1,1)), no correction at multiples 2..={k}"))
}

fn c02_kronecker2() -> Outcome {
    let k = 8;
    let r = extract_dt(&initial("kronecker2.json", k).complete(k).map_err(err)?).map_err(err)?;
    let o11 = r.omega([1, 1]).ok_or("Omega(1,1) outside the order")?;
    let o22 = r.omega([2, 2]).ok_or("Omega(2,2) outside the order")?;
    ensure(o11 == quantum_int(2).map_err(err)?, || format!("Omega(1,1) = {o11}"))?;
    ensure(o22.is_zero(), || format!("Omega(2,2) = {o22}"))?;
    Ok(format!("Omega(1,1) = {o11}, Omega(2,2) = 0"))
}

fn c03_dense_example() -> Outcome {
    let k = 8;
    let d = initial("dense_example.json", k).complete(k).map_err(err)?;
    let c = d.outgoing_ee([1, 1]).map_err(err)?;
    ensure(c == BTreeMap::from([(1, t_pow(-1))]), || format!("wall on -(v1+v2): {c:?}"))?;
    for n in 2..=3i64 {
        let w = d.outgoing_ee([1, n]).map_err(err)?;
        ensure(w.get(&1) == Some(&t_pow(-n)), || format!("wall (1,{n}): {w:?}"))?;
    }
    Ok("EE(-t^-1 z^(1,1)) with no (2,2) term; leading terms -t^-n z^(1,n) for n = 2, 3".into())
}

/// Completes every `(n, m1, m2)` on the grid in parallel.
fn shift_grid(k: u32) -> std::result::Result<Vec<((i64, i64, i64), QDiagram)>, String> {
    let grid: Vec<(i64, i64, i64)> =
        (1..=3).flat_map(|n| (-2..=2).flat_map(move |a| (-2..=2).map(move |b| (n, a, b)))).collect();
    grid.par_iter()
        .map(|&(n, a, b)| {
            let d = two_wall_setup(n, &t_pow(a), &t_pow(b), k).and_then(|d| d.complete(k)).map_err(err)?;
            Ok(((n, a, b), d))
        })
        .collect()
}

fn c04_positivity(grid: &[((i64, i64, i64), QDiagram)]) -> Outcome {
    let mut count = 0;
    for ((n, a, b), d) in grid {
        for (ab, j, p) in ee_entries(d).map_err(|e| format!("(n,m1,m2)=({n},{a},{b}): {e}"))? {
            ensure(p.is_positive(), || format!("(n,m1,m2)=({n},{a},{b}) ray {ab:?} j={j}: {p}"))?;
            count += 1;
        }
    }
    Ok(format!("{} diagrams, {count} EE-factors, all nonnegative integer", grid.len()))
}

fn c05_parity(grid: &[((i64, i64, i64), QDiagram)]) -> Outcome {
    let mut count = 0;
    for ((n, m1, m2), d) in grid {
        let even = [m1 % 2 == 0, m2 % 2 == 0];
        for (ab, j, p) in ee_entries(d)? {
            let a = [ab[0] * j as i64, ab[1] * j as i64];
            let want = (1 + lambda_aa(*n, even, a)).rem_euclid(2);
            ensure(p.parity().bit() == Some(want), || {
                format!("(n,m1,m2)=({n},{m1},{m2}) at {a:?}: {p} has parity {}, expected {want}", p.parity().name())
            })?;
            count += 1;
        }
    }
    Ok(format!("{count} EE-factors with parity 1 + lambda(a,a)"))
}

fn c06_pl() -> Outcome {
    let k = 6;
    let cases: Vec<(i64, i64, i64)> =
        (1..=3).flat_map(|n| (0..=3).flat_map(move |a| (0..=3).map(move |b| (n, a, b)))).collect();
    let counts: Vec<std::result::Result<usize, String>> = cases
        .par_iter()
        .map(|&(n, a, b)| {
            let d = two_wall_setup(n, &pl_poly(a), &pl_poly(b), k).and_then(|d| d.complete(k)).map_err(err)?;
            let mut c = 0;
            for (ab, j, p) in ee_entries(&d)? {
                let dec = p.pl_decomposition();
                let ok = dec.as_ref().is_some_and(|v| v.iter().all(|(_, m)| m > &BigInt::from(0)));
                ensure(ok, || format!("n={n}, pl_{a}, pl_{b}: ray {ab:?} j={j}: {p} is not pL"))?;
                c += 1;
            }
            Ok(c)
        })
        .collect();
    let mut total = 0;
    for c in counts {
        total += c?;
    }
    Ok(format!("{} input pairs, {total} EE-factors pL-decomposable", cases.len()))
}

fn c07_lefschetz() -> Outcome {
    let k = 6;
    let mut total = 0;
    for n in 1..=3 {
        let d = two_wall_setup(n, &LaurentPoly::one(), &LaurentPoly::one(), k).and_then(|d| d.complete(k)).map_err(err)?;
        for (ab, j, p) in ee_entries(&d)? {
            let dec = p.lefschetz_decomposition();
            ensure(dec.is_some(), || format!("n={n} ray {ab:?} j={j}: {p} is not of Lefschetz type"))?;
            // Rebuild from the multiset as an independent check.
            let mut sum = LaurentPoly::zero();
            for (m, c) in dec.unwrap() {
                sum = sum.add_ref(&quantum_int(m).map_err(err)?.scale(&c));
            }
            ensure(sum == p, || format!("n={n} ray {ab:?}: decomposition does not sum back"))?;
            total += 1;
        }
    }
    Ok(format!("{total} EE-factors Lefschetz-decomposable"))
}

fn random_point(rng: &mut ChaCha8Rng) -> Point {
    let num = |rng: &mut ChaCha8Rng| loop {
        let x: i64 = rng.gen_range(-40..=40);
        if x != 0 {
            return x;
        }
    };
    let (a, b) = (num(rng), num(rng));
    let (da, db) = (rng.gen_range(1..=7i64), rng.gen_range(1..=7i64));
    [BigRational::new(a.into(), da.into()), BigRational::new(b.into(), db.into())]
}

fn random_vec(rng: &mut ChaCha8Rng, r: i64) -> LatticeVec {
    LatticeVec(vec![rng.gen_range(-r..=r), rng.gen_range(-r..=r)])
}

fn c08_cps() -> Outcome {
    let k = 6;
    let mut checked = 0;
    for (fi, name) in SCATTER_FIXTURES.iter().enumerate() {
        let d = initial(name, k).complete(k).map_err(err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(8000 + fi as u64);
        let mut done = 0;
        let mut attempts = 0;
        while done < 20 {
            attempts += 1;
            ensure(attempts < 2000, || format!("{name}: could not draw generic samples"))?;
            let p = random_vec(&mut rng, 3);
            let (q1, q2) = (random_point(&mut rng), random_point(&mut rng));
            if !d.is_generic(&q1) || !d.is_generic(&q2) {
                continue;
            }
            let (t1, t2) = match (theta(&d, &p, &q1, k), theta(&d, &p, &q2, k)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(Error::ThroughOrigin), _) | (_, Err(Error::ThroughOrigin)) => continue,
                (Err(e), _) | (_, Err(e)) => return Err(format!("{name}: theta_{p}: {e}")),
            };
            ensure(t1.is_pointed() && t2.is_pointed(), || format!("{name}: theta_{p} not pointed"))?;
            let moved = transport(&d, &t1, &q2).map_err(err)?;
            ensure(moved.terms == t2.terms, || format!("{name}: transport of theta_{p} from {q1:?} to {q2:?} differs"))?;
            done += 1;
        }
        checked += done;
    }
    Ok(format!("{checked} samples over {} fixtures: pointed, transport-invariant", SCATTER_FIXTURES.len()))
}

fn c09_structure_constants() -> Outcome {
    let k = 6;
    let mut checked = 0;
    for (fi, name) in SCATTER_FIXTURES.iter().enumerate() {
        let d = initial(name, k).complete(k).map_err(err)?;
        let lat = d.lattice().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + fi as u64);
        let pairs: Vec<(LatticeVec, LatticeVec)> = (0..20).map(|_| (random_vec(&mut rng, 2), random_vec(&mut rng, 2))).collect();
        let results: Vec<std::result::Result<(), String>> = pairs
            .par_iter()
            .map(|(p1, p2)| {
                let alpha = structure_constants(&d, p1, p2, k).map_err(|e| format!("{name} ({p1}, {p2}): {e}"))?;
                let w = lat.pair_omega_int(p1, p2).map_err(err)?;
                let lead = alpha.get(&(p1 + p2)).cloned().unwrap_or_else(LaurentPoly::zero);
                ensure(lead == t_pow(w), || format!("{name}: alpha({p1},{p2};{}) = {lead}, expected t^{w}", p1 + p2))?;
                for (p, c) in &alpha {
                    ensure(c.is_positive(), || format!("{name}: alpha({p1},{p2};{p}) = {c}"))?;
                }
                Ok(())
            })
            .collect();
        for r in results {
            r?;
        }
        checked += pairs.len();
    }
    Ok(format!("{checked} pairs: leading constant t^omega(p1,p2), all constants nonnegative"))
}

fn c10_mutation_invariance() -> Outcome {
    let k = 6;
    let mut walls = 0;
    let mut line_cases = 0;
    for name in ["a2_seed.json", "kronecker2_seed.json"] {
        let seed = Seed::from_json(&fixture(name)).map_err(err)?;
        let cd = build_cluster_diagram(&seed, ClusterFlavor::A, k).map_err(err)?;
        for j in cd.unfrozen {
            let cmp = mutation_invariance(&cd, j, k).map_err(err)?;
            ensure(cmp.mismatches.is_empty(), || format!("{name} mu_{j}: {:?}", cmp.mismatches))?;
            walls += cmp.compared;
            let new = build_cluster_diagram(&cd.seed.mutate(j).map_err(err)?, ClusterFlavor::A, k).map_err(err)?;
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + j as u64);
            let mut done = 0;
            for _ in 0..200 {
                if done == 10 {
                    break;
                }
                let p = random_vec(&mut rng, 3);
                let q = random_point(&mut rng);
                let Ok(q2) = t_chart_point(&cd, &new, j, &q) else { continue };
                if !cd.diagram.is_generic(&q) || !new.diagram.is_generic(&q2) {
                    continue;
                }
                match broken_line_correspondence(&cd, &new, j, &p, &q, k) {
                    Ok(c) => ensure(c.agrees(), || format!("{name} mu_{j}, p={p}: {c:?}"))?,
                    Err(Error::ThroughOrigin) | Err(Error::NonGeneric { .. }) => continue,
                    Err(e) => return Err(format!("{name} mu_{j}, p={p}: {e}")),
                }
                done += 1;
            }
            ensure(done == 10, || format!("{name} mu_{j}: only {done} generic broken-line samples"))?;
            line_cases += done;
        }
    }
    Ok(format!("{walls} EE entries equal; {line_cases} broken-line multisets correspond"))
}

fn c11_cluster_positivity() -> Outcome {
    let k = 8;
    let seed = Seed::from_json(&fixture("a2_seed.json")).map_err(err)?;
    let cd = build_cluster_diagram(&seed, ClusterFlavor::A, k).map_err(err)?;
    let chambers = cluster_chambers(&cd, 12).map_err(err)?;
    ensure(chambers.len() == 5, || format!("{} chambers", chambers.len()))?;
    let thetas = cluster_ray_thetas(&cd, 12, k).map_err(err)?;
    ensure(thetas.len() == 5, || format!("{} rays", thetas.len()))?;
    for t in &thetas {
        ensure(t.top_order < k, || format!("theta_{} reaches the truncation order", t.p))?;
        ensure(t.is_positive_bar_invariant(), || format!("theta_{} = {:?}", t.p, t.expansion))?;
    }
    Ok("5 chambers; 5 cluster variables positive bar-invariant Laurent polynomials".into())
}

fn c12_classical_limit() -> Outcome {
    let k = 6;
    for name in SCATTER_FIXTURES {
        let d0 = initial(name, k);
        let quantum_then_limit = d0.complete(k).map_err(err)?.classical_limit();
        let limit_then_classical = d0.classical_limit().complete(k).map_err(err)?;
        ensure(quantum_then_limit == limit_then_classical, || format!("{name}: limits differ"))?;
    }
    Ok(format!("{} fixtures agree", SCATTER_FIXTURES.len()))
}

/// `t^{chi-1}(1 + g)` with `g` in `t Z>=0[t]`, `deg g <= 2(1 - chi)`, checked term by term.
fn degree_shape(omega: &LaurentPoly, chi: i64) -> bool {
    if omega.denom() != 1 {
        return false;
    }
    let g = omega.shift(1 - chi, 1).sub_ref(&LaurentPoly::one());
    let shape_ok = g.terms().all(|(e, c)| e >= 1 && e <= 2 * (1 - chi) && c > &BigInt::from(0));
    shape_ok
}

fn c13_degree_bound() -> Outcome {
    let k = 6;
    let mut total = 0;
    for name in ["pentagon.json", "kronecker2.json", "kronecker3.json"] {
        let r = extract_dt(&initial(name, k).complete(k).map_err(err)?).map_err(err)?;
        for e in &r.entries {
            let chi = e.a * e.a + e.b * e.b - r.n * e.a * e.b;
            ensure(degree_shape(&e.omega, chi), || format!("{name} ({},{}): Omega = {}, chi = {chi}", e.a, e.b, e.omega))?;
            total += 1;
        }
    }
    Ok(format!("{total} nonzero invariants within the degree bound"))
}

fn c14_dense_witness() -> Outcome {
    let k = 6;
    let r = extract_dt(&initial("kronecker3.json", k).complete(k).map_err(err)?).map_err(err)?;
    let inside: Vec<_> = r.entries.iter().filter(|e| e.a * e.a + e.b * e.b - 3 * e.a * e.b < 0).collect();
    ensure(!inside.is_empty(), || "no nonzero wall strictly inside the dense cone".into())?;
    let e = inside[0];
    Ok(format!("{} witnesses, e.g. Omega({},{}) = {}", inside.len(), e.a, e.b, e.omega))
}

fn run(id: &str, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS  {id} {name:<28} [{secs:>6.2}s] {detail}");
            true
        }
        Err(why) => {
            println!("FAIL  {id} {name:<28} [{secs:>6.2}s] {why}");
            false
        }
    }
}

fn main() {
    let grid = shift_grid(6);
    let grid_ref = || grid.as_ref().map_err(|e| e.clone());
    let results = [
        run("C01", "pentagon", c01_pentagon),
        run("C02", "kronecker-2 DT values", c02_kronecker2),
        run("C03", "dense example", c03_dense_example),
        run("C04", "positivity matrix", || c04_positivity(grid_ref()?)),
        run("C05", "parity matrix", || c05_parity(grid_ref()?)),
        run("C06", "pL matrix", c06_pl),
        run("C07", "Lefschetz, acyclic inputs", c07_lefschetz),
        run("C08", "theta pointedness + CPS", c08_cps),
        run("C09", "structure constants", c09_structure_constants),
        run("C10", "mutation invariance", c10_mutation_invariance),
        run("C11", "cluster variable positivity", c11_cluster_positivity),
        run("C12", "classical limit", c12_classical_limit),
        run("C13", "DT degree bound", c13_degree_bound),
        run("C14", "dense-region witness", c14_dense_witness),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

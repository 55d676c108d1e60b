//! Acceptance suite: eight criteria, run in order, one PASS/FAIL line each.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use dgrmsc::dataset::{generate_synthetic, MultiViewDataset, SyntheticSpec, ViewMatrix};
use dgrmsc::graphs::{self, Sigma, SimilarityMatrix};
use dgrmsc::kernels::{self, SylvesterSystem};
use dgrmsc::matrix_io::read_matrix;
use dgrmsc::metrics;
use dgrmsc::solver::{self, SolverConfig};
use dgrmsc::spectral::{self, AffinityMatrix};
use dgrmsc::{Error, Matrix};
use mvsc_cli::{cmd_eval, cmd_fit, ExperimentConfig, SweepGrid};
use mvsc_oracles as oracle;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Debug>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e:?}"))
}

fn uniform(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn max_abs(m: &Matrix) -> f64 {
    m.amax()
}

fn sorted_desc(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut s: Vec<f64> = v.collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

const INSTANCES: usize = 200;

fn kernel_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    // (a) Sylvester vs Kronecker, half symmetric pairs, half general.
    let mut worst_syl = 0.0f64;
    for i in 0..INSTANCES {
        let p = rng.random_range(1..=12);
        let q = rng.random_range(1..=12);
        let (a, b) = if i % 2 == 0 {
            let g = uniform(p, p, &mut rng);
            let h = uniform(q, q, &mut rng);
            (&g * g.transpose() + Matrix::identity(p, p), &h * h.transpose() + Matrix::identity(q, q))
        } else {
            (
                uniform(p, p, &mut rng) + Matrix::identity(p, p) * (2.0 + p as f64),
                uniform(q, q, &mut rng) + Matrix::identity(q, q) * (2.0 + q as f64),
            )
        };
        let c = uniform(p, q, &mut rng);
        let x = ok(
            kernels::solve_sylvester(&SylvesterSystem { a: a.clone(), b: b.clone(), c: c.clone() }),
            "solve_sylvester",
        )?;
        let reference = oracle::kron_sylvester(&a, &b, &c).ok_or("Kronecker system singular")?;
        let rel = (&x - &reference).norm() / reference.norm().max(f64::MIN_POSITIVE);
        worst_syl = worst_syl.max(rel);
        ensure(rel <= 1e-6, || format!("sylvester instance {i} ({p}x{q}): rel err {rel:e}"))?;
    }

    // (b) prox_l21 and svt.
    let mut worst_closed = 0.0f64;
    for i in 0..INSTANCES {
        let r = rng.random_range(1..=8);
        let c = rng.random_range(1..=8);
        let g = uniform(r, c, &mut rng);
        let tau = rng.random_range(0.05..1.5);

        let e = kernels::prox_l21(&g, tau);
        let f0 = oracle::l21_prox_objective(&e, &g, tau);
        for _ in 0..1000 {
            let d = oracle::random_direction(r, c, 1e-3, &mut rng);
            let f = oracle::l21_prox_objective(&(&e + d), &g, tau);
            ensure(f0 <= f + 1e-15, || format!("prox_l21 instance {i}: perturbation wins {f} < {f0}"))?;
        }
        for j in 0..c {
            let gj = g.column(j);
            let scale = (1.0 - tau / gj.norm()).max(0.0);
            let err = (e.column(j) - gj * scale).amax();
            worst_closed = worst_closed.max(err);
            ensure(err <= 1e-8, || format!("prox_l21 instance {i} column {j}: err {err:e}"))?;
        }

        let m = uniform(r, c, &mut rng);
        let q = ok(kernels::svt(&m, tau), "svt")?;
        let f0 = oracle::nuclear_prox_objective(&q, &m, tau);
        for _ in 0..1000 {
            let d = oracle::random_direction(r, c, 1e-3, &mut rng);
            let f = oracle::nuclear_prox_objective(&(&q + d), &m, tau);
            ensure(f0 <= f + 1e-15, || format!("svt instance {i}: perturbation wins {f} < {f0}"))?;
        }
        let want = sorted_desc(m.singular_values().iter().map(|s| (s - tau).max(0.0)));
        let got = sorted_desc(q.singular_values().iter().copied());
        for (w, g) in want.iter().zip(&got) {
            let err = (w - g).abs();
            worst_closed = worst_closed.max(err);
            ensure(err <= 1e-8, || format!("svt instance {i}: spectrum err {err:e}"))?;
        }
    }

    // (c) Procrustes against sampled column-orthonormal maps.
    for i in 0..INSTANCES {
        let d = rng.random_range(1..=8);
        let m = rng.random_range(1..=d);
        let mm = uniform(m, d, &mut rng);
        let w = ok(kernels::procrustes(&mm), "procrustes")?.w;
        let best = (w.transpose() * mm.transpose()).trace();
        for _ in 0..10_000 {
            let wr = oracle::gram_schmidt_orthonormal(d, m, &mut rng);
            let v = (wr.transpose() * mm.transpose()).trace();
            ensure(best >= v - 1e-12, || format!("procrustes instance {i}: sample {v} > {best}"))?;
        }
    }

    let elapsed = start.elapsed();
    ensure(elapsed <= Duration::from_secs(60), || format!("runtime {elapsed:?} > 60 s"))?;
    Ok(format!(
        "{INSTANCES} instances per kernel, worst sylvester rel err {worst_syl:.1e}, worst closed-form err {worst_closed:.1e}, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn check_laplacian(l: &Matrix, what: &str) -> Result<(f64, f64), String> {
    let row = l.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max);
    ensure(row <= 1e-12, || format!("{what}: row sum {row:e}"))?;
    let min_eig = solver::min_eigenvalue(l);
    ensure(min_eig >= -1e-10, || format!("{what}: min eigenvalue {min_eig:e}"))?;
    Ok((row, min_eig))
}

fn graph_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_rel = 0.0f64;
    let mut worst_row = 0.0f64;
    let mut worst_eig = 0.0f64;
    let mut laplacians = 0;
    for i in 0..100 {
        let n = rng.random_range(3..=30);
        let m = rng.random_range(1..=6);
        let y = uniform(m, n, &mut rng);
        let s = if i % 2 == 0 {
            let k = rng.random_range(1..n);
            let pts = uniform(rng.random_range(1..=5), n, &mut rng);
            ok(graphs::knn_heat_similarity(&pts, k, Sigma::Auto), "knn_heat_similarity")?
        } else {
            let mut s = Matrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
            s = (&s + s.transpose()) * 0.5;
            s.fill_diagonal(0.0);
            SimilarityMatrix { s, kernel_width: 1.0, k: n - 1 }
        };
        let l = graphs::laplacian(&s);
        let tf = graphs::trace_form(&y, &l);
        let pw = oracle::pairwise_smoothness(&y, &s.s);
        let rel = (tf - pw).abs() / pw.abs().max(f64::MIN_POSITIVE);
        worst_rel = worst_rel.max(if pw == 0.0 { (tf - pw).abs() } else { rel });
        ensure(worst_rel <= 1e-10, || format!("instance {i}: trace {tf} vs pairwise {pw}"))?;
        let (row, eig) = check_laplacian(&l, &format!("instance {i}"))?;
        worst_row = worst_row.max(row);
        worst_eig = worst_eig.min(eig);
        laplacians += 1;

        let views: Vec<ViewMatrix> = (0..3)
            .map(|v| ViewMatrix { data: uniform(rng.random_range(1..=6), n, &mut rng), view_index: v + 1 })
            .collect();
        let k = rng.random_range(1..n);
        for v in &views {
            let lv = ok(graphs::view_laplacian(v, k, Sigma::Auto), "view_laplacian")?;
            check_laplacian(&lv.l, "view Laplacian")?;
        }
        let la = ok(graphs::averaged_laplacian(&views, k, Sigma::Auto), "averaged_laplacian")?;
        let ly = ok(graphs::latent_laplacian(&y, k, Sigma::Auto), "latent_laplacian")?;
        for (lm, what) in [(&la.l, "averaged Laplacian"), (&ly.l, "latent Laplacian")] {
            let (row, eig) = check_laplacian(lm, what)?;
            worst_row = worst_row.max(row);
            worst_eig = worst_eig.min(eig);
        }
        laplacians += views.len() + 2;
    }
    Ok(format!(
        "100 (Y, S) pairs, worst rel err {worst_rel:.1e}; {laplacians} Laplacians, max |row sum| {worst_row:.1e}, min eigenvalue {worst_eig:.1e}"
    ))
}

fn base_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.set("latent-dim", "10").unwrap();
    cfg.set("out", out.to_str().unwrap()).unwrap();
    cfg
}

fn acceptance_dataset() -> MultiViewDataset {
    generate_synthetic(&SyntheticSpec::default()).unwrap()
}

fn solver_convergence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ok(base_config(dir.path()).finalize(), "config")?;
    let s = &cfg.solver;
    ensure(
        (s.lambda, s.beta, s.gamma, s.mu0, s.rho, s.epsilon, s.mu_max, s.max_iter)
            == (0.1, 0.1, 0.1, 1e-4, 1.2, 1e-6, 1e6, 300),
        || format!("unexpected defaults {s:?}"),
    )?;
    let start = Instant::now();
    let out = ok(cmd_fit(&cfg), "cmd_fit")?;
    let elapsed = start.elapsed();
    ensure(out.converged, || format!("not converged after {} iterations", out.iterations))?;
    ensure(out.iterations <= 300, || format!("{} iterations", out.iterations))?;

    let load = |f: &str| ok(read_matrix(&dir.path().join(f)), f);
    let (y, z, w, e_l, e_s, q) = (
        load("Y.csv")?,
        load("Z.csv")?,
        load("W.csv")?,
        load("E_L.csv")?,
        load("E_S.csv")?,
        load("Q.csv")?,
    );
    let x = acceptance_dataset().stacked();
    let r1 = max_abs(&(&x - &w * &y - &e_l));
    let r2 = max_abs(&(&y - &y * &z - &e_s));
    let r3 = max_abs(&(&q - &z));
    ensure(r1 < 1e-6 && r2 < 1e-6 && r3 < 1e-6, || {
        format!("re-verified residuals {r1:e} {r2:e} {r3:e}")
    })?;
    let trace = fs::read_to_string(dir.path().join("trace.csv")).map_err(|e| e.to_string())?;
    ensure(trace.lines().count() == out.iterations + 1, || "trace row count".into())?;
    ensure(elapsed <= Duration::from_secs(30), || format!("runtime {elapsed:?} > 30 s"))?;
    Ok(format!(
        "{} iterations, residuals from disk {r1:.1e} / {r2:.1e} / {r3:.1e}, {:.2} s",
        out.iterations,
        elapsed.as_secs_f64()
    ))
}

fn end_to_end_recovery() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ok(base_config(dir.path()).finalize(), "config")?;
    ensure(cfg.runs == 30, || format!("runs = {}", cfg.runs))?;
    let out = ok(cmd_eval(&cfg), "cmd_eval")?;
    let mean = &out.reports[0].report.mean;
    ensure(out.reports[0].report.runs.len() == 30, || "expected 30 runs".into())?;
    ensure(mean.acc >= 0.95 && mean.nmi >= 0.90 && mean.ar >= 0.90, || {
        format!("ACC {:.4} NMI {:.4} AR {:.4}", mean.acc, mean.nmi, mean.ar)
    })?;
    Ok(format!(
        "30 runs, mean ACC {:.4}, NMI {:.4}, AR {:.4}",
        mean.acc, mean.nmi, mean.ar
    ))
}

fn ablation_ordering() -> Outcome {
    let nmi_for = |ablation: &str, gamma: f64| -> Result<f64, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = base_config(dir.path());
        cfg.set("noise", "0.15").unwrap();
        cfg.set("ablation", ablation).unwrap();
        cfg.set("gamma", &gamma.to_string()).unwrap();
        let cfg = ok(cfg.finalize(), "config")?;
        let out = ok(cmd_eval(&cfg), "cmd_eval")?;
        Ok(out.reports[0].report.mean.nmi)
    };
    let grmsc = nmi_for("grmsc", 0.0)?;
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut per_gamma = Vec::new();
    for g in SweepGrid::decades() {
        let v = nmi_for("dgrmsc", g)?;
        per_gamma.push(format!("{g}:{v:.4}"));
        if v > best.0 {
            best = (v, g);
        }
    }
    ensure(best.0 >= grmsc - 0.02, || {
        format!("DGRMSC NMI {:.4} < GRMSC NMI {grmsc:.4} - 0.02 ({})", best.0, per_gamma.join(" "))
    })?;
    Ok(format!(
        "noise 0.15, 30 runs: DGRMSC NMI {:.4} (gamma {}), GRMSC NMI {grmsc:.4}; per gamma [{}]",
        best.0,
        best.1,
        per_gamma.join(" ")
    ))
}

fn metric_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for i in 0..500 {
        let n = rng.random_range(2..=40);
        let ct = rng.random_range(1..=6);
        let cp = rng.random_range(1..=6);
        let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..ct)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..cp)).collect();

        let pair = ok(metrics::pair_metrics(&t, &p), "pair_metrics")?;
        let (prec, rec, f) = oracle::pair_scores(&t, &p);
        let diffs = [
            ok(metrics::acc(&t, &p), "acc")? - oracle::acc_by_permutation(&t, &p),
            ok(metrics::nmi(&t, &p), "nmi")? - oracle::nmi_direct(&t, &p),
            ok(metrics::adjusted_rand(&t, &p), "ari")? - oracle::ari_from_pairs(&t, &p),
            pair.precision - prec,
            pair.recall - rec,
            pair.f_measure - f,
        ];
        for (name, d) in ["acc", "nmi", "ar", "precision", "recall", "f"].iter().zip(diffs) {
            worst = worst.max(d.abs());
            ensure(d.abs() <= 1e-12, || format!("case {i} (n={n}): {name} differs by {d:e}"))?;
        }
    }
    Ok(format!("500 random labelings, max deviation {worst:.1e}"))
}

fn digest_dir(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.path()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p).map_err(|e| e.to_string())?;
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            Ok((name, Sha256::digest(&bytes).to_vec()))
        })
        .collect()
}

fn determinism() -> Outcome {
    let mut files = 0;
    for cmd in ["fit", "eval"] {
        let mut digests = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let mut cfg = base_config(dir.path());
            cfg.set("ablation", "both").unwrap();
            let cfg = ok(cfg.finalize(), "config")?;
            match cmd {
                "fit" => drop(ok(cmd_fit(&cfg), "cmd_fit")?),
                _ => drop(ok(cmd_eval(&cfg), "cmd_eval")?),
            }
            digests.push(digest_dir(dir.path())?);
        }
        ensure(!digests[0].is_empty(), || format!("{cmd} wrote nothing"))?;
        ensure(digests[0] == digests[1], || format!("{cmd} artifacts differ between reruns"))?;
        files += digests[0].len();
    }
    Ok(format!("{files} artifact files byte-identical across reruns of fit and eval"))
}

fn degenerate_contracts() -> Outcome {
    // Zero affinity.
    let zero = AffinityMatrix { a: Matrix::zeros(6, 6) };
    ensure(matches!(spectral::spectral_cluster(&zero, 2, 0), Err(Error::ZeroAffinity)), || {
        "zero affinity did not yield ZeroAffinity".into()
    })?;

    // Single-cluster predictions.
    let truth = [0, 0, 0, 1, 1, 1, 1];
    let single = [0; 7];
    let v = ok(metrics::evaluate(&truth, &single), "evaluate")?;
    ensure(v.nmi == 0.0, || format!("NMI {}", v.nmi))?;
    ensure(v.ar == 0.0, || format!("AR {}", v.ar))?;
    ensure((v.acc - 4.0 / 7.0).abs() < 1e-15, || format!("ACC {}", v.acc))?;
    ensure(v.recall == 1.0, || format!("recall {}", v.recall))?;
    let both = ok(metrics::evaluate(&single, &single), "evaluate")?;
    ensure(both.nmi == 1.0 && both.ar == 1.0 && both.acc == 1.0, || format!("{both:?}"))?;

    // k >= n.
    let pts = Matrix::from_fn(2, 5, |i, j| (i + 2 * j) as f64);
    for k in [5, 6] {
        ensure(
            matches!(graphs::knn_heat_similarity(&pts, k, Sigma::Auto), Err(Error::InvalidArgument(_))),
            || format!("k={k}, n=5 was accepted"),
        )?;
    }
    let ds = acceptance_dataset();
    let knn = SolverConfig { k: ds.n_samples(), latent_dim: Some(10), ..SolverConfig::default() };
    ensure(matches!(solver::fit(&ds, &knn), Err(Error::InvalidArgument(_))), || {
        "solver accepted k >= n".into()
    })?;

    // m > d.
    ensure(matches!(kernels::procrustes(&Matrix::zeros(4, 3)), Err(Error::InvalidArgument(_))), || {
        "procrustes accepted m > d".into()
    })?;
    let wide = SolverConfig { latent_dim: Some(ds.total_dim() + 1), ..SolverConfig::default() };
    ensure(matches!(solver::fit(&ds, &wide), Err(Error::InvalidArgument(_))), || {
        "solver accepted m > d".into()
    })?;
    Ok("ZeroAffinity error; single-cluster NMI 0 / AR 0 / recall 1; k >= n and m > d rejected".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("kernel oracles", kernel_oracles),
        ("graph identities", graph_identities),
        ("solver convergence", solver_convergence),
        ("end-to-end recovery", end_to_end_recovery),
        ("ablation ordering", ablation_ordering),
        ("metric correctness", metric_correctness),
        ("determinism", determinism),
        ("degenerate inputs", degenerate_contracts),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

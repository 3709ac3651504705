use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ltpoisson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltpoisson")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generates the mesh and config of a built-in family into `dir`.
fn generate(dir: &Path, family: &str, n: usize) -> (PathBuf, PathBuf) {
    let (mesh, config) = (dir.join(format!("{family}.mesh")), dir.join(format!("{family}.toml")));
    let out = ltpoisson(&["meshgen", "--family", family, "--n", &n.to_string(), "--out", s(&mesh), "--config", s(&config)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (mesh, config)
}

fn solve(mesh: &Path, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["solve", "--config", s(config), "--mesh", s(mesh), "--out", s(out)];
    args.extend_from_slice(extra);
    ltpoisson(&args)
}

fn report(dir: &Path) -> toml::Value {
    std::fs::read_to_string(dir.join("report.toml")).unwrap().parse().unwrap()
}

#[test]
fn square_solve_writes_field_and_report() {
    let tmp = TempDir::new().unwrap();
    let (mesh, config) = generate(tmp.path(), "square", 32);
    let out_dir = tmp.path().join("pps");
    let out = solve(&mesh, &config, &out_dir, &["--line", "0.0005,0.37,0.9995,0.37", "--samples", "50"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let field = std::fs::read_to_string(out_dir.join("field.csv")).unwrap();
    assert!(field.starts_with("cx,cy,phi,dx,dy,ex,ey\n"));
    assert_eq!(field.lines().count(), 2 * 32 * 32 + 1);
    let line = std::fs::read_to_string(out_dir.join("line.csv")).unwrap();
    assert!(line.starts_with("s,x,y,phi,dx,dy,ex,ey\n"));
    assert_eq!(line.lines().count(), 51);

    let r = report(&out_dir);
    let m = &r["mesh"];
    let get = |k: &str| m[k].as_integer().unwrap();
    assert_eq!(get("tree"), get("triangles") - 1);
    assert_eq!(get("tree") + get("loops"), get("interior_edges"));
    let t = &r["timings"];
    for k in ["assembly", "tree_solve", "projection", "transpose_solve", "total"] {
        assert!(t[k].as_float().unwrap() >= 0.0, "{k}");
    }
    assert!(r["solver"]["gmres_iterations"].as_integer().unwrap() > 0);
    assert!(r["solver"]["charge_residual"].as_float().unwrap() <= 1e-12);
}

#[test]
fn pps_and_fem_agree_on_the_square() {
    let tmp = TempDir::new().unwrap();
    let (mesh, config) = generate(tmp.path(), "square", 64);
    let (pps, fem) = (tmp.path().join("pps"), tmp.path().join("fem"));
    assert_eq!(code(&solve(&mesh, &config, &pps, &[])), 0);
    let out = solve(&mesh, &config, &fem, &["--method", "fem"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(report(&fem)["solver"]["unknowns"].as_integer().unwrap() > 0);

    let diff = tmp.path().join("diff.csv");
    let out = ltpoisson(&[
        "compare",
        s(&pps.join("field.csv")),
        s(&fem.join("field.csv")),
        "--max-rel-l2",
        "0.03",
        "--diff",
        s(&diff),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("phi_rel_l2 = "));
    assert!(diff.exists());

    let out = ltpoisson(&["compare", s(&pps.join("field.csv")), s(&fem.join("field.csv")), "--max-abs", "1e-9"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("error[threshold]"));
}

#[test]
fn comparing_a_file_with_itself_gives_zero() {
    let tmp = TempDir::new().unwrap();
    let (mesh, config) = generate(tmp.path(), "square", 8);
    let dir = tmp.path().join("a");
    assert_eq!(code(&solve(&mesh, &config, &dir, &[])), 0);
    let f = dir.join("field.csv");
    let out = ltpoisson(&["compare", s(&f), s(&f), "--max-rel-l2", "0", "--max-abs", "0"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    for key in ["phi_rel_l2", "phi_max_abs", "flux_rel_l2", "field_rel_l2"] {
        assert!(text.contains(&format!("{key} = 0e0")), "{text}");
    }
}

#[test]
fn shuffled_rows_are_a_centroid_mismatch() {
    let tmp = TempDir::new().unwrap();
    let (mesh, config) = generate(tmp.path(), "square", 8);
    let dir = tmp.path().join("a");
    assert_eq!(code(&solve(&mesh, &config, &dir, &[])), 0);
    let text = std::fs::read_to_string(dir.join("field.csv")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(1, 2);
    let shuffled = tmp.path().join("shuffled.csv");
    std::fs::write(&shuffled, lines.join("\n") + "\n").unwrap();
    let out = ltpoisson(&["compare", s(&shuffled), s(&dir.join("field.csv"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("centroid mismatch"), "{}", stderr(&out));

    lines.pop();
    std::fs::write(&shuffled, lines.join("\n") + "\n").unwrap();
    let out = ltpoisson(&["compare", s(&shuffled), s(&dir.join("field.csv"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("row count mismatch"));
}

#[test]
fn single_threaded_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (mesh, config) = generate(tmp.path(), "flag", 16);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = ltpoisson(&[
            "--threads",
            "1",
            "solve",
            "--config",
            s(&config),
            "--mesh",
            s(&mesh),
            "--out",
            s(dir),
            "--line",
            "-0.45,0.5,0.45,0.5",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for f in ["field.csv", "line.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flag_report_lists_terminals() {
    let tmp = TempDir::new().unwrap();
    let (mesh, config) = generate(tmp.path(), "flag", 32);
    let dir = tmp.path().join("out");
    let out = solve(&mesh, &config, &dir, &["--tol", "1e-6"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = report(&dir);
    assert_eq!(r["solver"]["tolerance"].as_float(), Some(1e-6));
    let terms = r["terminal"].as_array().unwrap();
    assert_eq!(terms.len(), 2);
    for t in terms {
        let (v, p) = (t["value"].as_float().unwrap(), t["potential"].as_float().unwrap());
        assert!((v - p).abs() <= 0.01 * v, "{t}");
    }
}

#[test]
fn missing_mesh_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let (_, config) = generate(tmp.path(), "square", 4);
    let out = solve(&tmp.path().join("absent.mesh"), &config, &tmp.path().join("o"), &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).starts_with("error[io]"), "{}", stderr(&out));
}

#[test]
fn incompatible_neumann_data_reports_the_residual() {
    let tmp = TempDir::new().unwrap();
    let (mesh, _) = generate(tmp.path(), "square", 8);
    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, "[neumann]\ntop = \"1\"\n").unwrap();
    let out = solve(&mesh, &config, &tmp.path().join("o"), &[]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.starts_with("error[compatibility]") && err.contains("net charge minus outward boundary flux = 1"), "{err}");
}

#[test]
fn malformed_inputs_are_parse_errors() {
    let tmp = TempDir::new().unwrap();
    let (mesh, _) = generate(tmp.path(), "square", 4);
    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, "eps0 = 1.0\nneutralize = \"yes\"\n").unwrap();
    let out = solve(&mesh, &config, &tmp.path().join("o"), &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("error[parse]: line 2"), "{}", stderr(&out));

    let broken = tmp.path().join("broken.mesh");
    std::fs::write(&broken, "nodes 3\n0 0\n1 0\n").unwrap();
    let good = tmp.path().join("good.toml");
    std::fs::write(&good, "").unwrap();
    let out = solve(&broken, &good, &tmp.path().join("o"), &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).starts_with("error[parse]"), "{}", stderr(&out));
}

#[test]
fn gmres_exhaustion_is_a_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    let (mesh, config) = generate(tmp.path(), "square", 16);
    let mut text = std::fs::read_to_string(&config).unwrap();
    text.push_str("\n[gmres]\nmax_iterations = 3\n");
    std::fs::write(&config, text).unwrap();
    let out = solve(&mesh, &config, &tmp.path().join("o"), &[]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).starts_with("error[convergence]"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&ltpoisson(&["benchmark", "--sizes", ""])), 1);
    assert_eq!(code(&ltpoisson(&["benchmark", "--sizes", "8,x"])), 1);
    assert_eq!(code(&ltpoisson(&["frobnicate"])), 1);
    assert_eq!(code(&ltpoisson(&["solve"])), 1);
    assert_eq!(code(&ltpoisson(&["--help"])), 0);
    let tmp = TempDir::new().unwrap();
    let (mesh, config) = generate(tmp.path(), "square", 4);
    assert_eq!(code(&solve(&mesh, &config, &tmp.path().join("o"), &["--line", "0,0,1"])), 1);
    assert_eq!(code(&solve(&mesh, &config, &tmp.path().join("o"), &["--tol", "2"])), 2);
}

#[test]
fn benchmark_writes_table_and_slopes() {
    let tmp = TempDir::new().unwrap();
    let (table, slopes) = (tmp.path().join("t.csv"), tmp.path().join("s.csv"));
    let out = ltpoisson(&[
        "benchmark",
        "--family",
        "parallel-plate",
        "--sizes",
        "8,16,32",
        "--methods",
        "pps,fem",
        "--tols",
        "1e-2,1e-3",
        "--out",
        s(&table),
        "--slopes",
        s(&slopes),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&table).unwrap();
    assert!(text.starts_with("family,resolution,triangles,method,tolerance,assembly,tree_solve,projection,transpose_solve,solve,total,iterations\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 2);
    let slopes = std::fs::read_to_string(&slopes).unwrap();
    assert!(slopes.starts_with("method,tolerance,column,slope\n"));
    assert!(slopes.contains("pps,0.01,tree_solve,"));
    assert!(slopes.contains("fem,0.001,total,"));
}

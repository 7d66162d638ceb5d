//! End-to-end checks of the command-line interface: exit codes, output
//! determinism, schema versioning, and the headline numbers of each
//! subcommand.

use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stokes-unfold"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn stokes_multipliers_mirror_each_other() {
    let out = run(&["stokes", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["command"], "stokes");
    assert!(v.get("timestamp").is_none());
    let r = &v["report"];
    let mu0 = &r["origin"]["mu"];
    let mu_inf = &r["infinity"]["mu"];
    assert_eq!(mu0["re"].as_f64().unwrap(), -mu_inf["re"].as_f64().unwrap());
    assert_eq!(mu0["im"].as_f64().unwrap(), -mu_inf["im"].as_f64().unwrap());
    assert_eq!(r["trivial_stokes"], false);
}

#[test]
fn equal_gammas_report_identity_matrices_with_a_note() {
    let out = run(&["stokes", "--gamma2", "0", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let r = &json(&out)["report"];
    assert_eq!(r["degenerate_direction"], true);
    assert!(r["note"].as_str().unwrap().contains("identity"));
    assert!(r["infinity"]["theta"].is_null());
    for side in ["origin", "infinity"] {
        let m = &r[side]["matrix"];
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(m[i][j]["re"].as_f64().unwrap(), want, "{side} {i}{j}");
                assert_eq!(m[i][j]["im"].as_f64().unwrap(), 0.0);
            }
        }
    }
    assert_eq!(r["trivial_stokes"], true);
}

#[test]
fn bessel_zero_inputs_are_flagged_trivial() {
    // beta difference (z1/2)^2 with gamma difference 1 puts the kernel
    // argument at the first Bessel zero, where S and both multipliers vanish
    let b2 = (3.831705970207512f64 / 2.0).powi(2);
    let out = run(&["stokes", "--beta2", &format!("{b2:?}"), "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let r = &json(&out)["report"];
    assert_eq!(r["trivial_stokes"], true);
    assert!(r["origin"]["mu"]["re"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn converge_defaults_pass_with_shrinking_errors() {
    let out = run(&["converge", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let r = &json(&out)["report"];
    assert_eq!(r["pass"], true);
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 12);
    for point in ["L", "RR"] {
        let errs: Vec<f64> = rows
            .iter()
            .filter(|row| row["point"] == *point)
            .map(|row| row["abs_err"].as_f64().unwrap())
            .collect();
        assert_eq!(errs.len(), 6);
        assert!(errs.last().unwrap() < errs.first().unwrap(), "{point}");
    }
}

#[test]
fn converge_rejects_an_empty_n_list() {
    let out = run(&["converge", "--n-list", ""]);
    assert_eq!(code(&out), 2);
}

#[test]
fn converge_rejects_incompatible_parameters() {
    // complex beta difference: the experiment needs real differences
    let out = run(&["converge", "--beta2", "1,0.5"]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
}

#[test]
fn oracle_check_grid_stays_within_tolerance() {
    let out = run(&["oracle-check", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let r = &json(&out)["report"];
    assert_eq!(r["failures"], 0);
    assert_eq!(r["skipped"], 0);
    assert!(r["max_err"].as_f64().unwrap() < 1e-8);
    // 4 types x 3 n_beta x (3 + 1) n_gamma, minus the duplicated
    // gamma-degenerate rows of A2/A4, two log points each
    assert_eq!(r["rows"].as_array().unwrap().len(), 84);
}

#[test]
fn oracle_check_skips_rows_without_a_resonance() {
    let out = run(&["oracle-check", "--sqrt-eps", "0.3,0.1", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let r = &json(&out)["report"];
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(r["skipped"].as_u64().unwrap() as usize, rows.len());
    assert!(rows.iter().all(|row| row["status"].as_str().unwrap().starts_with("skipped")));
}

#[test]
fn classify_reports_the_confluent_family_and_generic_five_points() {
    let out = run(&["classify", "--beta2", "0.4", "--gamma2", "0.3,0.1", "--sqrt-eps", "0.3,0.05", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let r = &json(&out)["report"];
    assert!(r["matched_case"].is_string());
    assert_eq!(r["singular_count"], 4);
    assert_eq!(r["singular_points"].as_array().unwrap().len(), 4);
    // perturbing off the family leaves all five candidates singular
    let out = run(&["classify", "--alpha1", "0.3", "--alpha2", "-1.1", "--sqrt-eps", "0.3", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let r = &json(&out)["report"];
    assert!(r["matched_case"].is_null());
    assert_eq!(r["singular_count"], 5);
}

#[test]
fn borel_jump_passes_at_default_tolerance_and_fails_at_an_absurd_one() {
    let out = run(&["borel", "--no-timestamp"]);
    assert_eq!(code(&out), 0);
    let r = &json(&out)["report"];
    assert_eq!(r["pass"], true);
    assert!(r["rel_err"].as_f64().unwrap() < 1e-6);

    let out = run(&["borel", "--tol", "1e-12"]);
    assert_eq!(code(&out), 1);

    let out = run(&["borel", "--x", "10"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unfold_reports_the_resonance_and_zero_rows_off_the_log_points() {
    let out = run(&[
        "unfold", "--beta2", "1", "--gamma2", "-1", "--sqrt-eps", "0.25", "--no-timestamp",
    ]);
    assert_eq!(code(&out), 0);
    let r = &json(&out)["report"];
    assert_eq!(r["resonance"]["kind"], "A1");
    assert_eq!(r["resonance"]["n_beta"], 2);
    assert_eq!(r["resonance"]["n_gamma"], 2);
    let lim0 = r["limit_d_origin"]["re"].as_f64().unwrap();
    let lim_inf = r["limit_d_infinity"]["re"].as_f64().unwrap();
    assert_eq!(lim0 + lim_inf, 0.0);
    for row in r["points"].as_array().unwrap() {
        let d = row["d"]["re"].as_f64().unwrap().abs();
        match row["point"].as_str().unwrap() {
            "L" | "LL" => {
                assert!(d > 0.1);
                assert!(row["monodromy"].is_array());
            }
            _ => {
                assert_eq!(d, 0.0);
                assert!(row.get("monodromy").is_none());
            }
        }
    }

    let out = run(&["unfold", "--sqrt-eps", "0.23"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn monodromy_check_passes_at_a_small_resonance() {
    let out = run(&[
        "monodromy", "--beta2", "0.6", "--gamma2", "0.6", "--sqrt-eps", "0.15", "--no-timestamp",
    ]);
    assert_eq!(code(&out), 0);
    let r = &json(&out)["report"];
    assert_eq!(r["pass"], true);
    assert_eq!(r["points"].as_array().unwrap().len(), 4);
    assert!(r["empty_loop_err"].as_f64().unwrap() < 1e-6);
    assert!(r["product_law_err"].as_f64().unwrap() < 1e-6);
}

#[test]
fn output_is_byte_stable_without_the_timestamp() {
    for format in ["json", "csv"] {
        for cmd in ["stokes", "converge"] {
            let a = run(&[cmd, "--format", format, "--no-timestamp"]);
            let b = run(&[cmd, "--format", format, "--no-timestamp"]);
            assert_eq!(a.stdout, b.stdout, "{cmd} {format}");
        }
    }
    // the timestamp line is the only nondeterminism and is marked as such
    let out = run(&["stokes", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# stokes-unfold stokes schema 1");
    assert!(lines.next().unwrap().starts_with("# timestamp "));
    assert_eq!(lines.next().unwrap(), "quantity,re,im");
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let path = std::env::temp_dir().join(format!("stokes-cli-test-{}.json", std::process::id()));
    let out = run(&["series", "--k-max", "5", "--no-timestamp", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["report"]["rows"].as_array().unwrap().len(), 6);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn malformed_inputs_exit_with_usage_errors() {
    assert_eq!(code(&run(&["stokes", "--beta1", "abc"])), 2);
    assert_eq!(code(&run(&["stokes", "--beta1", "1,2,3"])), 2);
    assert_eq!(code(&run(&["unfold"])), 2); // --sqrt-eps is required
    assert_eq!(code(&run(&["series", "--k-max", "1"])), 2);
    assert_eq!(code(&run(&["stokes", "--beta2", "0"])), 2); // beta1 = beta2
}

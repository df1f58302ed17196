use std::sync::Arc;

use maxwell_hp::analysis::{interpolate, norm_curlk, norm_hxik, Difference, FeFunction};
use maxwell_hp::coefficients::Wavenumber;
use maxwell_hp::fem::{nedelec_basis, Family, FeSpace};
use maxwell_hp::linalg::{factorize, norm2, CsrMatrix};
use maxwell_hp::mesh::{build_structured_cube_mesh, AxisBox, Mesh};
use maxwell_hp::study::{csv_text, format_k, RunRecord, StudyConfig};
use num_complex::Complex64 as c64;
use proptest::prelude::*;

fn wavenumber() -> impl Strategy<Value = Wavenumber> {
    (1.0f64..40.0, -5.0f64..5.0).prop_map(|(re, im)| Wavenumber::new(c64::new(re, im)).unwrap())
}

fn space(n: usize, family: Family, p: usize) -> Arc<FeSpace> {
    let mesh = Arc::new(build_structured_cube_mesh(n, None).unwrap());
    Arc::new(FeSpace::new(
        mesh,
        Arc::new(nedelec_basis(family, p).unwrap()),
    ))
}

fn coeffs(n: usize, seed: u64) -> Vec<c64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn family() -> impl Strategy<Value = (Family, usize)> {
    prop_oneof![
        (0usize..=2).prop_map(|p| (Family::NedelecI, p)),
        (1usize..=2).prop_map(|p| (Family::NedelecII, p)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn config_fields_survive_parsing(
        ks in prop::collection::vec(wavenumber(), 1..4),
        ps in prop::collection::vec(1usize..=3, 1..3),
        mesh_n in 1usize..5,
        refinements in 0usize..3,
        type2 in any::<bool>(),
        timings in any::<bool>(),
    ) {
        let k_list: Vec<String> = ks.iter().map(|k| format!("{:e}:{:e}", k.value().re, k.value().im)).collect();
        let p_list: Vec<String> = ps.iter().map(|p| p.to_string()).collect();
        let text = format!(
            "# generated\nproblem = exp2_smooth\nk = {}\np = {}\nfamily = {}\nmesh_n = {mesh_n}\nrefinements = {refinements}\np_ref = 4\nrecord_timings = {timings}\n",
            k_list.join(", "),
            p_list.join(","),
            if type2 { "type2" } else { "type1" },
        );
        let cfg = StudyConfig::parse(&text).unwrap();
        prop_assert_eq!(&cfg.k, &ks);
        prop_assert_eq!(&cfg.p, &ps);
        prop_assert_eq!(cfg.family, if type2 { Family::NedelecII } else { Family::NedelecI });
        prop_assert_eq!(cfg.levels(), refinements + 1);
        prop_assert_eq!(cfg.subdivisions(refinements), mesh_n << refinements);
        prop_assert_eq!(cfg.record_timings, timings);
    }

    #[test]
    fn config_parser_never_panics(text in "(\\PC{0,30}\n){0,8}") {
        let _ = StudyConfig::parse(&text);
    }

    #[test]
    fn config_rejects_small_wavenumbers(re in -0.99f64..0.99) {
        let text = format!("problem = exp2_smooth\nk = {re}\np = 1\nmesh_n = 1\n");
        prop_assert!(StudyConfig::parse(&text).is_err());
    }

    #[test]
    fn mesh_dump_round_trips(n in 1usize..5, lo in 0usize..4, width in 1usize..4, boxed in any::<bool>()) {
        let lo = lo.min(n - 1);
        let hi = (lo + width).min(n);
        let inner = boxed.then(|| AxisBox::cube(lo as f64 / n as f64, hi as f64 / n as f64));
        let m = build_structured_cube_mesh(n, inner).unwrap();
        let back = Mesh::from_dump(&m.to_dump()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn mesh_dump_parser_never_panics(text in "(\\PC{0,40}\n){0,10}") {
        let _ = Mesh::from_dump(&text);
    }

    #[test]
    fn norms_are_homogeneous_and_ordered((fam, p) in family(), seed in any::<u64>(), k in wavenumber(), s in -3.0f64..3.0) {
        let x = space(1, fam, p);
        let u = FeFunction::new(x.clone(), coeffs(x.ndofs(), seed)).unwrap();
        let mesh = x.mesh();
        let a = norm_curlk(&u, mesh, k);
        let b = norm_hxik(&u, mesh, k);
        prop_assert!(b >= a);
        let su = u.scaled(c64::new(s, 0.0));
        prop_assert!((norm_curlk(&su, mesh, k) - s.abs() * a).abs() <= 1e-12 * a.max(1.0));
        prop_assert!((norm_hxik(&su, mesh, k) - s.abs() * b).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn norms_obey_the_triangle_inequality((fam, p) in family(), seed in any::<u64>(), k in wavenumber()) {
        let x = space(1, fam, p);
        let u = FeFunction::new(x.clone(), coeffs(x.ndofs(), seed)).unwrap();
        let v = FeFunction::new(x.clone(), coeffs(x.ndofs(), seed ^ 0x9e37)).unwrap();
        let mesh = x.mesh();
        let minus_v = v.scaled(c64::new(-1.0, 0.0));
        let sum = Difference(&u, &minus_v);
        let lhs = norm_hxik(&sum, mesh, k);
        prop_assert!(lhs <= (norm_hxik(&u, mesh, k) + norm_hxik(&v, mesh, k)) * (1.0 + 1e-12));
    }

    #[test]
    fn interpolation_reproduces_discrete_functions((fam, p) in family(), seed in any::<u64>()) {
        let x = space(1, fam, p);
        let c = coeffs(x.ndofs(), seed);
        let u = FeFunction::new(x.clone(), c.clone()).unwrap();
        let back = interpolate(&x, &u);
        let defect = back.iter().zip(&c).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(defect <= 1e-11, "defect {}", defect);
    }

    #[test]
    fn symmetric_solves_have_small_residuals(n in 2usize..40, seed in any::<u64>(), shift in -4.0f64..4.0) {
        let vals = coeffs(3 * n, seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, c64::new(4.0 + shift, 1.0) + vals[i]));
            let j = (i * 7 + 3) % n;
            if j != i {
                t.push((i, j, vals[n + i]));
                t.push((j, i, vals[n + i]));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let b = coeffs(n, seed.wrapping_add(1));
        if let Ok(f) = factorize(&a) {
            let x = f.solve(&b).unwrap();
            let r: Vec<c64> = a.mul_vec(&x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
            prop_assert!(norm2(&r) <= 1e-9 * norm2(&b));
        }
    }

    #[test]
    fn csv_has_one_row_per_record(rows in prop::collection::vec((1usize..100_000, 1e-8f64..10.0, prop::option::of(0.5f64..5.0)), 1..6), k in wavenumber()) {
        let records: Vec<RunRecord> = rows
            .iter()
            .enumerate()
            .map(|(level, &(dofs, err, q))| RunRecord {
                k,
                p: 1,
                level,
                h: 1.0 / (level + 1) as f64,
                dofs,
                n_k: maxwell_hp::study::n_k(dofs, k),
                rel_error: err,
                quasiopt: q,
                delta_k: 0.5,
                assemble_seconds: 0.0,
                solve_seconds: 0.0,
            })
            .collect();
        let refs: Vec<&RunRecord> = records.iter().collect();
        let text = csv_text(&refs);
        let lines: Vec<&str> = text.lines().collect();
        prop_assert_eq!(lines.len(), records.len() + 1);
        prop_assert!(lines[0].starts_with('#'));
        for (line, r) in lines[1..].iter().zip(&records) {
            let fields: Vec<&str> = line.split(',').collect();
            prop_assert_eq!(fields.len(), 8);
            prop_assert_eq!(fields[0].parse::<usize>().unwrap(), r.dofs);
            let err: f64 = fields[2].parse().unwrap();
            prop_assert!((err - r.rel_error).abs() <= 1e-9 * r.rel_error);
            prop_assert_eq!(fields[4] == "nan", r.quasiopt.is_none());
        }
        prop_assert!(!format_k(k).is_empty());
    }
}

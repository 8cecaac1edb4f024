mod common;

use common::{
    blank, dual_certificate, enumerate_designs, random_scenario, recourse_lp, rel_close, rng, set,
    six_country, stressed, synth,
};
use proptest::prelude::*;
use rand::Rng;
use strainchain::recourse::{
    check_structural_theorems, recourse_cut_terms, solve_with_flags, DUALITY_TOL,
};
use strainchain::{solve_recourse, Design, DualVector, Instance, RecourseSolution, Scenario};

fn one_country(demand: f64) -> (Instance, Scenario) {
    let mut f = blank(&["a"], &["a"], &["a"], "a", &[]);
    set(&mut f.plant_capacity, "a", 120.0);
    set(&mut f.demand_mean, "a", demand);
    let inst = Instance::from_file(f).unwrap();
    let sc = Scenario::nominal(&inst);
    (inst, sc)
}

#[test]
fn single_country_serves_demand() {
    let (inst, sc) = one_country(80.0);
    let sol = solve_recourse(&inst, &Design::all_open(&inst), &sc).unwrap();
    assert_eq!(sol.raw_flow[0][0], 80.0);
    assert_eq!(sol.drug_flow[0][0], 80.0);
    assert_eq!(sol.shortage[0], 0.0);
    assert!((sol.objective - 240.0).abs() < 1e-9);
}

#[test]
fn single_country_supplier_bound() {
    let (inst, sc) = one_country(150.0);
    let sol = solve_recourse(&inst, &Design::all_open(&inst), &sc).unwrap();
    assert!((sol.drug_flow[0][0] - 100.0).abs() < 1e-9);
    assert!((sol.shortage[0] - 50.0).abs() < 1e-9);
    assert!((sol.objective - 800.0).abs() < 1e-9);
}

#[test]
fn closed_plant_country_keeps_its_output() {
    let f = blank(&["a", "b"], &["a"], &["a"], "a", &[]);
    let inst = Instance::from_file(f).unwrap();
    let mut sc = Scenario::nominal(&inst);
    sc.ban_general[0] = false;
    sc.ban_ally[0] = false;
    sc.refresh(&inst);
    let sol = solve_recourse(&inst, &Design::all_open(&inst), &sc).unwrap();
    assert_eq!(sol.drug_flow[0][1], 0.0);
    assert!((sol.shortage[1] - 50.0).abs() < 1e-9);
    assert!(sol.shortage[0] <= 50.0);
    assert!(sol.shortage_aux[0].abs() < 1e-9);
}

#[test]
fn no_plant_capacity_leaves_net_demand_short() {
    let inst = six_country();
    let mut r = rng(4);
    for _ in 0..20 {
        let mut sc = random_scenario(&inst, &mut r);
        sc.plant_avail.iter_mut().for_each(|a| *a = 0.0);
        let sol = solve_recourse(&inst, &Design::all_open(&inst), &sc).unwrap();
        assert!(sol.drug_flow.iter().flatten().all(|&v| v == 0.0));
        for k in 0..inst.num_countries() {
            let g = !sc.ban_general[k];
            let to_c1 = if inst.in_alliance(k) {
                !sc.ban_ally[k]
            } else {
                g
            };
            let mut retained = 0.0;
            if g {
                retained += inst.exports_general(k);
            }
            if to_c1 {
                retained += inst.exports_to_c1(k);
            }
            let expect = (sc.demand[k] - retained).max(0.0);
            assert!((sol.shortage[k] - expect).abs() < 1e-9, "k {k}");
        }
    }
}

#[test]
fn zero_duals_give_a_zero_cut() {
    let inst = six_country();
    let sc = Scenario::nominal(&inst);
    let mut sol = solve_recourse(&inst, &Design::all_open(&inst), &sc).unwrap();
    let (ni, nj, nk) = (
        inst.num_suppliers(),
        inst.num_plants(),
        inst.num_countries(),
    );
    sol.duals = DualVector {
        supplier_capacity: vec![0.0; ni],
        supply_arc: vec![vec![0.0; nj]; ni],
        plant_capacity: vec![0.0; nj],
        distribution_arc: vec![vec![0.0; nk]; nj],
        demand: vec![0.0; nk],
        flow_balance: vec![0.0; nj],
        shortage_aux: vec![0.0; nk],
    };
    let (c, coeff) = recourse_cut_terms(&inst, &sc, &sol);
    assert_eq!(c, 0.0);
    assert!(coeff.iter().all(|&v| v == 0.0));
}

#[test]
fn closing_an_exporter_removes_its_arc_terms() {
    // c3 supplies the plants in c1, c2, c6; all three plants serve everyone.
    let inst = six_country();
    let open = vec![true; 3];
    let mut sc = Scenario::nominal(&inst);
    for d in sc.demand.iter_mut() {
        *d *= 4.0;
    }
    let sol = solve_with_flags(&inst, &open, &sc).unwrap();
    let c3 = inst
        .supplier_position(inst.country_index("c3").unwrap())
        .unwrap();
    assert!(sol.duals.supply_arc[c3].iter().all(|v| v.is_finite()));

    let mut banned = sc.clone();
    banned.ban_general[inst.country_index("c3").unwrap()] = false;
    banned.refresh(&inst);
    let sol = solve_with_flags(&inst, &open, &banned).unwrap();
    // with c3 closed its supply arcs have capacity 0, so they cannot carry Y terms
    for p in 0..3 {
        assert_eq!(sol.raw_flow[c3][p], 0.0);
    }
    let (c, coeff) = recourse_cut_terms(&inst, &banned, &sol);
    let at = |o: &[bool]| {
        c + coeff
            .iter()
            .zip(o)
            .filter(|(_, &x)| x)
            .map(|(v, _)| v)
            .sum::<f64>()
    };
    assert!((at(&open) - sol.objective).abs() < 1e-7);
}

#[test]
fn theorem_checker_flags_a_banned_shipment() {
    let f = blank(&["a", "b"], &["a"], &["a"], "a", &[]);
    let inst = Instance::from_file(f).unwrap();
    let mut sc = Scenario::nominal(&inst);
    sc.ban_general[0] = false;
    sc.ban_ally[0] = false;
    sc.refresh(&inst);
    let design = Design::all_open(&inst);
    let mut sol: RecourseSolution = solve_recourse(&inst, &design, &sc).unwrap();
    assert!(check_structural_theorems(&inst, &design, &sc, &sol).is_empty());
    sol.raw_flow[0][0] += 10.0;
    sol.drug_flow[0][1] += 10.0;
    sol.shortage[1] -= 10.0;
    let v = check_structural_theorems(&inst, &design, &sc, &sol);
    assert!(v.iter().any(|v| v.theorem == 2), "{v:?}");
}

fn check_against_lp(inst: &Instance, seed: u64, n: usize) {
    let mut r = rng(seed);
    let nj = inst.num_plants();
    for _ in 0..n {
        let sc = random_scenario(inst, &mut r);
        let mask = r.random_range(1u64..1 << nj);
        let open: Vec<bool> = (0..nj).map(|p| mask >> p & 1 == 1).collect();
        let sol = solve_with_flags(inst, &open, &sc).unwrap();
        let lp = recourse_lp(inst, &open, &sc);
        assert!(
            rel_close(sol.objective, lp, 1e-6),
            "network {} vs LP {lp}",
            sol.objective
        );
    }
}

#[test]
fn lp_oracle_reproduces_hand_values() {
    for (d, q) in [(80.0, 240.0), (150.0, 800.0)] {
        let (inst, sc) = one_country(d);
        assert!((recourse_lp(&inst, &[true], &sc) - q).abs() < 1e-9);
    }
}

#[test]
fn matches_dense_lp_on_fixture() {
    check_against_lp(&six_country(), 11, 60);
}

#[test]
fn cost_increase_is_monotone_in_escalation_price() {
    let inst = stressed(3, 3, 6, 2);
    let mut r = rng(8);
    for _ in 0..40 {
        let sc = random_scenario(&inst, &mut r);
        let mut higher = sc.clone();
        higher.price_increase = sc.price_increase + r.random_range(0.0..5.0);
        let open = vec![true, r.random(), r.random()];
        let a = solve_with_flags(&inst, &open, &sc).unwrap().objective;
        let b = solve_with_flags(&inst, &open, &higher).unwrap().objective;
        assert!(b >= a - 1e-9 * a.abs().max(1.0));
    }
}

/// Cut from the solution at `open`, evaluated at every design.
fn cut_checks(inst: &Instance, sc: &Scenario, open: &[bool]) {
    let sol = solve_with_flags(inst, open, sc).unwrap();
    let (c, coeff) = recourse_cut_terms(inst, sc, &sol);
    let nj = inst.num_plants();
    for mask in 1u64..1 << nj {
        let y: Vec<bool> = (0..nj).map(|p| mask >> p & 1 == 1).collect();
        let cut = c + (0..nj).filter(|&p| y[p]).map(|p| coeff[p]).sum::<f64>();
        let q = solve_with_flags(inst, &y, sc).unwrap().objective;
        assert!(cut <= q + 1e-7, "cut {cut} above Q {q}");
        if y == open {
            assert!((cut - q).abs() <= 1e-7, "cut {cut} not tight at Q {q}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn network_equals_lp(seed in 0u64..10_000, ni in 1usize..=3, nj in 1usize..=3, extra in 0usize..=1) {
        let inst = stressed(ni, nj, ni.max(nj) + extra, seed);
        check_against_lp(&inst, seed, 3);
    }

    #[test]
    fn strong_duality(seed in 0u64..10_000, nj in 1usize..=4) {
        let inst = stressed(3, nj, 6, seed);
        let mut r = rng(seed);
        let sc = random_scenario(&inst, &mut r);
        let open: Vec<bool> = (0..nj).map(|p| p == 0 || r.random()).collect();
        let sol = solve_with_flags(&inst, &open, &sc).unwrap();
        let (c, coeff) = recourse_cut_terms(&inst, &sc, &sol);
        let dual = c + (0..nj).filter(|&p| open[p]).map(|p| coeff[p]).sum::<f64>();
        prop_assert!(rel_close(sol.objective, dual, DUALITY_TOL));
        let cert = dual_certificate(&inst, &open, &sc, &sol.duals);
        prop_assert!(cert.is_ok(), "{:?}", cert);
        prop_assert!(rel_close(sol.objective, cert.unwrap(), DUALITY_TOL));
    }

    #[test]
    fn cuts_are_valid_and_tight(seed in 0u64..10_000, nj in 1usize..=4) {
        let inst = stressed(2, nj, 5, seed);
        let mut r = rng(seed ^ 0xABCD);
        let sc = random_scenario(&inst, &mut r);
        let mask = r.random_range(1u64..1 << nj);
        let open: Vec<bool> = (0..nj).map(|p| mask >> p & 1 == 1).collect();
        cut_checks(&inst, &sc, &open);
    }

    #[test]
    fn solutions_satisfy_structural_theorems(seed in 0u64..10_000) {
        let inst = six_country();
        let mut r = rng(seed);
        let sc = random_scenario(&inst, &mut r);
        let mask = r.random_range(1u64..8);
        let design = Design::from_mask(&inst, mask);
        let sol = solve_recourse(&inst, &design, &sc).unwrap();
        let v = check_structural_theorems(&inst, &design, &sc, &sol);
        prop_assert!(v.is_empty(), "{:?}", v);
    }
}

#[test]
fn enumeration_oracle_agrees_with_network_average() {
    let inst = synth(2, 2, 4, 3);
    let mut r = rng(1);
    let scenarios: Vec<Scenario> = (0..5).map(|_| random_scenario(&inst, &mut r)).collect();
    for (mask, value) in enumerate_designs(&inst, &scenarios) {
        let d = Design::from_mask(&inst, mask);
        let q: f64 = scenarios
            .iter()
            .map(|s| solve_recourse(&inst, &d, s).unwrap().objective)
            .sum::<f64>()
            / 5.0;
        assert!(rel_close(d.fixed_cost(&inst) + q, value, 1e-6));
    }
}

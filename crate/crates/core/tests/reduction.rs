//! Scheduling ↔ tree search: feasibility matches `cs ≤ 4L` on small
//! instances, and the 3-partition gadget behaves as the structural checks say.

use cstree::oracle::oracle_cs;
use cstree::scheduling::*;
use cstree::semantics::verify;

fn inst(tasks: &[(u64, &[u64])]) -> TdsInstance {
    TdsInstance::new(
        tasks
            .iter()
            .map(|&(d, p)| Task::new(d, p.to_vec()))
            .collect(),
    )
    .unwrap()
}

fn handcrafted() -> Vec<(TdsInstance, bool)> {
    vec![
        (inst(&[(2, &[1, 1]), (2, &[1, 1])]), true),
        (inst(&[(1, &[1]), (1, &[1])]), false),
        (inst(&[(1, &[1]), (2, &[1, 1]), (3, &[1, 1, 1])]), true),
        (inst(&[(1, &[1]), (1, &[1]), (2, &[1, 1])]), false),
        (inst(&[(4, &[1, 1, 2, 3]), (2, &[1, 2])]), true),
        (inst(&[(3, &[2, 2, 3]), (3, &[2, 2, 2])]), false),
        (inst(&[(4, &[1, 3, 3, 3]), (4, &[2, 2, 2, 2])]), true),
        (inst(&[(2, &[1, 2])]), true),
        (inst(&[(2, &[1, 1]), (2, &[1, 1]), (2, &[1, 1])]), false),
    ]
}

#[test]
fn feasibility_matches_search_number() {
    for (i, (tds, expect)) in handcrafted().into_iter().enumerate() {
        let feasible = find_feasible(&tds).unwrap();
        assert_eq!(feasible.is_some(), expect, "instance {i}");
        let tt = tds_to_tree(&tds).unwrap();
        assert!(tt.tree.edge_count() <= 20, "instance {i}");
        let (cs, witness) = oracle_cs(&tt.tree, tt.tree.root()).unwrap();
        assert_eq!(cs <= tt.k, expect, "instance {i}: cs {cs}, 4L {}", tt.k);
        if let Some(d) = feasible {
            let s = schedule_to_strategy(&tt, &d).unwrap();
            assert!(verify(&tt.tree, &s, tt.k).ok, "instance {i}");
            let back = strategy_to_schedule(&tds, &tt, &witness).unwrap();
            assert!(back.feasible, "instance {i}");
        }
    }
}

#[test]
fn only_one_order_works_for_instance_seven() {
    let tds = inst(&[(4, &[1, 3, 3, 3]), (4, &[2, 2, 2, 2])]);
    assert_eq!(feasible_orders(&tds, true).unwrap(), vec![vec![0, 1]]);
    let tt = tds_to_tree(&tds).unwrap();
    let d = simulate(&tds, &[1, 0]).unwrap();
    assert!(!d.feasible);
    assert!(schedule_to_strategy(&tt, &d).is_err());
}

#[test]
fn every_feasible_order_translates_and_back() {
    let tds = inst(&[(1, &[1]), (2, &[1, 1]), (3, &[1, 1, 1])]);
    let tt = tds_to_tree(&tds).unwrap();
    for order in feasible_orders(&tds, false).unwrap() {
        let d = simulate(&tds, &order).unwrap();
        let s = schedule_to_strategy(&tt, &d).unwrap();
        let back = strategy_to_schedule(&tds, &tt, &s).unwrap();
        assert_eq!(back, d);
    }
}

fn gadget_round_trip(b: u64, a: Vec<u64>) {
    let tp = ThreePartitionInstance::new(b, a.clone()).unwrap();
    let g = three_partition_to_tds(&tp).unwrap();
    let orders = feasible_orders(&g.tds, true).unwrap();
    assert_eq!(orders.is_empty(), tp.solve().is_none());
    for order in &orders {
        let d = simulate(&g.tds, order).unwrap();
        let rep = check_structural_lemmas(&g, &d).unwrap();
        assert!(rep.ok(), "{:?}", rep.violations);
        let parts = extract_three_partition(&g, &d, &a).unwrap();
        assert_eq!(parts.len(), g.m);
        assert!(parts.iter().all(|p| p.iter().sum::<u64>() == b));
    }
}

#[test]
fn three_partition_gadgets() {
    gadget_round_trip(12, vec![4, 4, 4]);
    gadget_round_trip(16, vec![5, 5, 6, 5, 6, 5]);
    gadget_round_trip(16, vec![5, 5, 5, 5, 5, 7]);
    gadget_round_trip(20, vec![6, 7, 7, 6, 6, 8]);
}

#[test]
fn gadget_schedule_drives_a_tree_search() {
    let tp = ThreePartitionInstance::new(12, vec![4, 4, 4]).unwrap();
    let g = three_partition_to_tds(&tp).unwrap();
    let d = simulate(&g.tds, &[3, 0, 1, 2]).unwrap();
    let tt = tds_to_tree(&g.tds).unwrap();
    let s = schedule_to_strategy(&tt, &d).unwrap();
    let r = verify(&tt.tree, &s, tt.k);
    assert!(r.ok, "{:?}", r.failure);
    assert_eq!(
        strategy_to_schedule(&g.tds, &tt, &s).unwrap().order,
        vec![3, 0, 1, 2]
    );
}

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;

use mapfr_core::bench::{layered_instance, random_permutation_instance, Connectivity, LayeredSpec};
use mapfr_core::geometry::{interval_intersection, intervals_overlap, point_segment_distance, segment_distance, Point2D, Segment2D, TimeInterval};
use mapfr_core::lowlevel::{shortest_temporal_plan, Constraint};
use mapfr_core::model::{check_plan, Instance, MotionEvent, Solution, Span, TemporalPlan, Time};
use mapfr_core::validation::{collisions_between, pad_to_makespan};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -10.0..10.0f64
}

fn point() -> impl Strategy<Value = Point2D> {
    (coord(), coord()).prop_map(|(x, y)| Point2D::new(x, y))
}

fn segment() -> impl Strategy<Value = Segment2D> {
    prop_oneof![
        3 => (point(), point()).prop_map(|(p, q)| Segment2D::new(p, q)),
        1 => point().prop_map(Segment2D::point),
    ]
}

fn rotate(p: Point2D, angle: f64, shift: Point2D) -> Point2D {
    let (s, c) = angle.sin_cos();
    Point2D::new(c * p.x - s * p.y + shift.x, s * p.x + c * p.y + shift.y)
}

proptest! {
    #[test]
    fn segment_distance_is_symmetric(a in segment(), b in segment()) {
        let d = segment_distance(a, b);
        prop_assert!(d >= 0.0);
        prop_assert!((d - segment_distance(b, a)).abs() < 1e-12);
        prop_assert!((d - segment_distance(Segment2D::new(a.q, a.p), b)).abs() < 1e-12);
        prop_assert!(d <= point_segment_distance(a.p, b) + 1e-12);
        prop_assert!(d <= point_segment_distance(b.q, a) + 1e-12);
    }

    #[test]
    fn segment_distance_ignores_rigid_motion(a in segment(), b in segment(), angle in 0.0..std::f64::consts::TAU, shift in point()) {
        let m = |s: Segment2D| Segment2D::new(rotate(s.p, angle, shift), rotate(s.q, angle, shift));
        prop_assert!((segment_distance(a, b) - segment_distance(m(a), m(b))).abs() < 1e-9);
    }

    #[test]
    fn interval_intersection_agrees_with_membership(a in 0.0..5.0f64, la in 0.0..3.0f64, b in 0.0..5.0f64, lb in 0.0..3.0f64, t in 0.0..8.0f64) {
        let (i, j) = (TimeInterval::new(a, a + la), TimeInterval::new(b, b + lb));
        let k = interval_intersection(i, j);
        prop_assert_eq!(k, interval_intersection(j, i));
        prop_assert_eq!(k.contains(t), i.contains(t) && j.contains(t));
        prop_assert_eq!(intervals_overlap(i, j), !k.is_empty());
        prop_assert_eq!(intervals_overlap(i, j), a < b + lb && b < a + la);
    }
}

/// Two agents on [2,3,2] (adjacent) wandering from the first layer: each
/// step is either a wait of the given length or a move to the neighbour
/// picked by index.
fn wander(inst: &Instance, agent: usize, steps: &[(bool, usize, f64)]) -> TemporalPlan {
    let g = inst.graph();
    let mut at = inst.start(agent);
    let mut now = Time::ZERO;
    let mut events = Vec::new();
    for &(wait, pick, len) in steps {
        let next = if wait { at } else { g.neighbors(at)[pick % g.neighbors(at).len()] };
        let d = if wait { Time::from_secs(len) } else { inst.traversal_time(agent, at, next).unwrap() };
        events.push(MotionEvent::new(at, next, now, now + d));
        now += d;
        at = next;
    }
    TemporalPlan::new(agent, events)
}

fn wanderer_instance() -> Instance {
    layered_instance(&LayeredSpec::new(&[2, 3, 2], Connectivity::Adjacent), &[0, 1], &[0, 1]).unwrap()
}

fn collide(inst: &Instance, plans: Vec<TemporalPlan>) -> bool {
    !collisions_between(inst, &pad_to_makespan(inst, &Solution::new(plans)).plans).is_empty()
}

fn steps() -> impl Strategy<Value = Vec<(bool, usize, f64)>> {
    prop::collection::vec((any::<bool>(), 0..6usize, 0.1..1.5f64), 1..6)
}

proptest! {
    #[test]
    fn splitting_a_wait_keeps_the_verdict(a in steps(), b in steps(), which in 0..6usize, frac in 0.05..0.95f64) {
        let inst = wanderer_instance();
        let (pa, pb) = (wander(&inst, 0, &a), wander(&inst, 1, &b));
        let waits: Vec<usize> = pa.events.iter().enumerate().filter(|(_, e)| e.is_wait()).map(|(i, _)| i).collect();
        prop_assume!(!waits.is_empty());
        let i = waits[which % waits.len()];
        let e = pa.events[i];
        let mid = e.start() + Time::from_secs((e.end() - e.start()).as_secs() * frac);
        prop_assume!(e.start() < mid && mid < e.end());
        let mut split = pa.clone();
        split.events.splice(i..=i, [MotionEvent::new(e.from, e.to, e.start(), mid), MotionEvent::new(e.from, e.to, mid, e.end())]);
        prop_assert_eq!(collide(&inst, vec![pa, pb.clone()]), collide(&inst, vec![split, pb]));
    }
}

/// Dijkstra over edge traversal times, in ticks.
fn dijkstra(inst: &Instance, agent: usize) -> Time {
    let g = inst.graph();
    let mut best: BTreeMap<usize, Time> = BTreeMap::new();
    let mut heap = BinaryHeap::from([Reverse((Time::ZERO, inst.start(agent)))]);
    while let Some(Reverse((d, u))) = heap.pop() {
        if best.contains_key(&u) {
            continue;
        }
        best.insert(u, d);
        for &v in g.neighbors(u) {
            heap.push(Reverse((d + inst.traversal_time(agent, u, v).unwrap(), v)));
        }
    }
    best[&inst.goal(agent)]
}

fn constraint(inst: &Instance) -> impl Strategy<Value = Constraint> {
    let edges: Vec<(usize, usize)> = inst.graph().edges().flat_map(|(u, v)| [(u, v), (v, u)]).collect();
    let vertices = inst.graph().num_vertices();
    (any::<bool>(), 0..edges.len(), 0..vertices, 0.0..3.0f64, 0.05..1.5f64).prop_map(move |(vertex, e, v, start, len)| {
        let (from, to) = if vertex { (v, v) } else { edges[e] };
        Constraint::new(0, from, to, Span::new(Time::from_secs(start), Time::from_secs(start + len)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unconstrained_plans_are_shortest_paths(seed in 0..50u64) {
        let spec = LayeredSpec::new(&[3, 3, 3], Connectivity::Window3);
        let inst = random_permutation_instance(&spec, seed).unwrap();
        for a in 0..inst.num_agents() {
            prop_assert_eq!(shortest_temporal_plan(&inst, a, &[]).unwrap().makespan(), dijkstra(&inst, a));
        }
    }

    #[test]
    fn constraints_never_speed_an_agent_up(cs in prop::collection::vec(constraint(&wanderer_instance()), 0..5), extra in constraint(&wanderer_instance())) {
        let inst = wanderer_instance();
        let before = shortest_temporal_plan(&inst, 0, &cs);
        let mut more = cs.clone();
        more.push(extra);
        let after = shortest_temporal_plan(&inst, 0, &more);
        if let Ok(p) = &after {
            check_plan(&inst, p, true).unwrap();
            prop_assert!(p.events.iter().all(|e| more.iter().all(|c| !c.forbids(e))));
            let b = before.as_ref().expect("fewer constraints cannot make the goal unreachable");
            prop_assert!(b.makespan() <= p.makespan());
        }
    }
}

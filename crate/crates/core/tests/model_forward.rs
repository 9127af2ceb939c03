// Forward pass checked against a direct per-node evaluation of the layer
// equations, plus a few hand-computed cases.

use hinsim::hin::{synth_apc, GraphBuilder};
use hinsim::model::{decode, encode, encoder_layer, forward_all, forward_many, init_features};
use hinsim::tensor::Tensor;
use hinsim::{Aggregator, HinGraph, ModelConfig, ModelParams, NetworkSchema, NodeId, NodeTypeId};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    assert_eq!(w.cols(), x.len());
    (0..w.rows()).map(|r| w.row(r).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn add(a: &mut [f64], b: Option<&Tensor>) {
    if let Some(b) = b {
        a.iter_mut().zip(b.data()).for_each(|(x, y)| *x += y);
    }
}

fn oracle(g: &HinGraph, q: NodeId, p: &ModelParams) -> Vec<f64> {
    let c = &p.config;
    let (d, t) = (c.d, c.effective_slots());
    let n = g.num_nodes();
    let schema = g.schema();
    let mut h: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|v| {
            let mut x = vec![0.0; d];
            x[if v == q.index() { 0 } else { 1 }] = 1.0;
            vec![x; t]
        })
        .collect();
    let proj_w = |v: usize| {
        if c.use_node_type {
            p.get(&format!("node_proj.{}", schema.node_type_name(g.node_type(NodeId(v as u32))))).unwrap()
        } else {
            p.get("node_proj").unwrap()
        }
    };
    for _ in 0..c.layers {
        let proj: Vec<Vec<Vec<f64>>> = (0..n).map(|v| h[v].iter().map(|x| matvec(proj_w(v), x)).collect()).collect();
        let mut next = h.clone();
        for dst in 0..n {
            let mut cands: Vec<(usize, Vec<f64>)> = Vec::new();
            for &(s, r) in g.neighbors(NodeId(dst as u32)) {
                let s = s.index();
                for i in 0..t {
                    if c.distinct_slots && (0..i).any(|j| h[s][j] == h[s][i] && h[dst][j] == h[dst][i]) {
                        continue;
                    }
                    let mut input = proj[s][i].clone();
                    if c.use_edge_type {
                        input.extend(p.get(&format!("edge_emb.{}", schema.edge_type(r).name)).unwrap().data());
                    }
                    input.extend(&proj[dst][i]);
                    let mut m = matvec(p.get("message").unwrap(), &input);
                    add(&mut m, p.get("message_bias"));
                    cands.push((i, m));
                }
            }
            let mut qs = vec![vec![0.0; d]; t];
            if !cands.is_empty() && c.aggregator == Aggregator::TopTVector {
                let mut ranked: Vec<&Vec<f64>> = cands.iter().map(|(_, m)| m).collect();
                ranked.sort_by(|a, b| b.iter().sum::<f64>().partial_cmp(&a.iter().sum::<f64>()).unwrap());
                for (i, qi) in qs.iter_mut().enumerate() {
                    *qi = ranked.get(i).copied().unwrap_or(ranked[0]).clone();
                }
            } else if !cands.is_empty() {
                for k in 0..d {
                    let col: Vec<f64> = cands.iter().map(|(_, m)| m[k]).collect();
                    match c.aggregator {
                        Aggregator::TopT => {
                            let mut sorted = col.clone();
                            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
                            for (i, qi) in qs.iter_mut().enumerate() {
                                qi[k] = if i < sorted.len() { sorted[i] } else { sorted[0] };
                            }
                        }
                        Aggregator::TopTVector => unreachable!(),
                        Aggregator::Max => qs[0][k] = col.iter().cloned().fold(f64::MIN, f64::max),
                        Aggregator::Sum => qs[0][k] = col.iter().sum(),
                        Aggregator::Mean => qs[0][k] = col.iter().sum::<f64>() / col.len() as f64,
                    }
                }
            }
            for i in 0..t {
                let mut input = h[dst][i].clone();
                input.extend(&qs[i]);
                let mut u = matvec(p.get("update").unwrap(), &input);
                add(&mut u, p.get("update_bias"));
                next[dst][i] = u;
            }
        }
        h = next;
    }
    g.nodes_of_type(g.node_type(q))
        .iter()
        .map(|&y| {
            let z: Vec<f64> = h[y.index()].concat();
            let mut hid = matvec(p.get("decoder_hidden").unwrap(), &z);
            add(&mut hid, p.get("decoder_hidden_bias"));
            let hid: Vec<f64> = hid.into_iter().map(|x| x.max(0.0)).collect();
            let mut out = matvec(p.get("decoder_out").unwrap(), &hid);
            add(&mut out, p.get("decoder_out_bias"));
            out[0]
        })
        .collect()
}

fn randomize_biases(p: &mut ModelParams, seed: u64) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<usize> = p.names().iter().enumerate().filter(|(_, n)| n.ends_with("_bias")).map(|(i, _)| i).collect();
    for i in idx {
        p.tensors_mut()[i].data_mut().iter_mut().for_each(|x| *x = rng.gen_range(-0.3..0.3));
    }
}

#[test]
fn matches_direct_evaluation() {
    let base = ModelConfig { d: 5, slots: 2, layers: 2, ..ModelConfig::default() };
    let configs = [
        base.clone(),
        ModelConfig { slots: 1, ..base.clone() },
        ModelConfig { slots: 3, layers: 3, ..base.clone() },
        ModelConfig { distinct_slots: false, ..base.clone() },
        ModelConfig { aggregator: Aggregator::Mean, ..base.clone() },
        ModelConfig { aggregator: Aggregator::Max, ..base.clone() },
        ModelConfig { aggregator: Aggregator::Sum, ..base.clone() },
        ModelConfig { aggregator: Aggregator::TopTVector, slots: 3, ..base.clone() },
        ModelConfig { use_edge_type: false, use_node_type: false, ..base.clone() },
        ModelConfig { bias: true, ..base.clone() },
    ];
    for (ci, cfg) in configs.iter().enumerate() {
        for seed in 0..3u64 {
            let g = synth_apc(40, seed).unwrap();
            let mut p = ModelParams::init(g.schema(), cfg.clone(), seed + 10).unwrap();
            randomize_biases(&mut p, seed);
            for &q in g.nodes_of_type(NodeTypeId(0)).iter().take(4) {
                let got = forward_all(&g, q, &p).unwrap();
                let want = oracle(&g, q, &p);
                assert_eq!(got.len(), want.len());
                for ((_, a), b) in got.iter().zip(&want) {
                    assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "config {ci} seed {seed}: {a} vs {b}");
                }
            }
        }
    }
}

fn single_edge() -> (HinGraph, ModelParams) {
    let s = NetworkSchema::new(&["A", "P"], &[("AP", "A", "P")]).unwrap();
    let mut b = GraphBuilder::new(s.clone());
    let a1 = b.add_node("a1", NodeTypeId(0)).unwrap();
    let p1 = b.add_node("p1", NodeTypeId(1)).unwrap();
    b.add_edge(a1, p1, hinsim::EdgeTypeId(0)).unwrap();
    let cfg = ModelConfig { d: 2, slots: 1, layers: 1, ..ModelConfig::default() };
    let mut p = ModelParams::init(&s, cfg, 0).unwrap();
    let set = |p: &mut ModelParams, name: &str, rows: &[Vec<f64>]| {
        let i = p.names().iter().position(|n| n == name).unwrap();
        p.tensors_mut()[i] = Tensor::from_rows(rows).unwrap();
    };
    let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    set(&mut p, "node_proj.A", &eye);
    set(&mut p, "node_proj.P", &eye);
    set(&mut p, "edge_emb.AP", &[vec![0.5, -1.0]]);
    set(&mut p, "message", &[vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]]);
    set(&mut p, "update", &[vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]]);
    set(&mut p, "decoder_hidden", &eye);
    set(&mut p, "decoder_out", &[vec![1.0, 1.0]]);
    (b.build(), p)
}

#[test]
fn hand_computed_single_edge() {
    // h(a1) = [1,0], h(p1) = [0,1]; both messages are [0,1] + [0.5,-1] + [1,0]
    // = [1.5, 0]; h'(a1) = [2.5, 0], h'(p1) = [1.5, 1]; score = relu(2.5) + 0
    let (g, p) = single_edge();
    let out = forward_all(&g, NodeId(0), &p).unwrap();
    assert_eq!(out, vec![(NodeId(0), 2.5)]);
    let st = encode(&g, NodeId(0), &p).unwrap();
    assert_eq!(st.layers.len(), 2);
    assert_eq!(st.last()[0].to_rows(), vec![vec![2.5, 0.0], vec![1.5, 1.0]]);
    assert_eq!(decode(&[st.last()[0].row(1)], &p).unwrap(), 2.5);
    // querying the paper node flips the one-hot features
    let h = init_features(&g, NodeId(1), 2).unwrap();
    assert_eq!(h.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    let next = encoder_layer(&g, &[h], &p).unwrap();
    assert_eq!(next[0].to_rows(), vec![vec![1.5, 1.0], vec![2.5, 0.0]]);
}

#[test]
fn top_one_equals_max_pooling() {
    let g = synth_apc(60, 4).unwrap();
    let cfg = ModelConfig { d: 6, slots: 1, layers: 2, ..ModelConfig::default() };
    let p = ModelParams::init(g.schema(), cfg, 4).unwrap();
    let mut m = p.clone();
    m.config.aggregator = Aggregator::Max;
    for &q in g.nodes_of_type(NodeTypeId(0)).iter().take(5) {
        assert_eq!(forward_all(&g, q, &p).unwrap(), forward_all(&g, q, &m).unwrap());
    }
}

#[test]
fn equivariant_under_relabeling() {
    let g = synth_apc(50, 6).unwrap();
    let mut order: Vec<NodeId> = (0..g.num_nodes() as u32).map(NodeId).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(6));
    let mut b = GraphBuilder::new(g.schema().clone());
    for &v in &order {
        b.add_node(g.external_id(v), g.node_type(v)).unwrap();
    }
    for (s, t, r) in g.edges() {
        let s2 = b.lookup(g.external_id(s)).unwrap();
        let t2 = b.lookup(g.external_id(t)).unwrap();
        b.add_edge(s2, t2, r).unwrap();
    }
    let h = b.build();
    let cfg = ModelConfig { d: 6, slots: 3, layers: 2, ..ModelConfig::default() };
    let p = ModelParams::init(g.schema(), cfg, 6).unwrap();
    for &q in g.nodes_of_type(NodeTypeId(0)).iter().take(5) {
        let a = forward_all(&g, q, &p).unwrap();
        let b = forward_all(&h, h.find_node(g.external_id(q)).unwrap(), &p).unwrap();
        let mut a: Vec<(String, f64)> = a.into_iter().map(|(v, s)| (g.external_id(v).to_string(), s)).collect();
        let mut b: Vec<(String, f64)> = b.into_iter().map(|(v, s)| (h.external_id(v).to_string(), s)).collect();
        a.sort_by(|x, y| x.0.cmp(&y.0));
        b.sort_by(|x, y| x.0.cmp(&y.0));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() < 1e-12, "{x:?} vs {y:?}");
        }
    }
}

#[test]
fn parallel_queries_match_sequential() {
    let g = synth_apc(80, 2).unwrap();
    let p = ModelParams::init(g.schema(), ModelConfig { d: 8, ..ModelConfig::default() }, 2).unwrap();
    let qs: Vec<NodeId> = g.nodes_of_type(NodeTypeId(0)).to_vec();
    let seq = forward_many(&g, &qs, &p, 1).unwrap();
    let par = forward_many(&g, &qs, &p, 4).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn unknown_types_are_rejected() {
    let (g, p) = single_edge();
    let other = NetworkSchema::new(&["A", "V"], &[("AV", "A", "V")]).unwrap();
    let h = hinsim::hin::synth_graph(&other, &[2, 2], &[2], 0).unwrap();
    assert!(forward_all(&h, NodeId(0), &p).is_err());
    assert!(forward_all(&g, NodeId(9), &p).is_err());
}

#![allow(dead_code, clippy::excessive_precision)]

use std::path::PathBuf;

use gpukalc::arch::builtin_profile;
use gpukalc::ptx::{parse_ptx, KernelGraph, Resource};
use gpukalc::sched::DagNode;
use gpukalc::Profile;
use rand::Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn kernel(rel: &str, name: &str) -> KernelGraph {
    parse_ptx(&read_fixture(rel), name).unwrap()
}

pub fn k20() -> Profile {
    builtin_profile("k20").unwrap()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

// Values below were evaluated once at 40 significant digits from the
// shipped K20 coefficients with an arbitrary-precision calculator.

/// (stride, latency cycles)
pub const GLOBAL_LATENCY: [(u64, f64); 14] = [
    (1, 220.02828),
    (1024, 248.95872),
    (3328, 314.11584),
    (4095, 335.8066),
    (4096, 271.27888),
    (10000, 299.5),
    (24575, 369.1685),
    (24576, 311.9263104),
    (100000, 324.59),
    (991231, 474.2276849),
    (991232, 476.73174272),
    (1500000, 463.865),
    (2203648, 446.06974208),
    (5000000, 375.35),
];

/// (nB, nT_b, microseconds)
pub const LAUNCH_OVERHEAD: [(u64, u64, f64); 10] = [
    (1, 1, 1.44892),
    (13, 256, 1.51546),
    (26, 256, 1.58202),
    (78, 1024, 3.04634),
    (100, 128, 1.7049),
    (1024, 1024, 22.42042),
    (4, 32, 1.45146),
    (500, 512, 6.5689),
    (7, 96, 1.46234),
    (2000, 1024, 42.4089),
];

/// (transactions, global throughput, shared throughput)
pub const THROUGHPUT: [(f64, f64, f64); 12] = [
    (1.0, 3070.847823206851953, 11.392546914356500565),
    (10.0, 3217.3538343283125813, 113.91837930249587331),
    (100.0, 4667.0401541666020115, 1138.4751323835573478),
    (500.0, 10783.616025281917232, 5676.6631639387291296),
    (1000.0, 17730.392753350925818, 11314.207610941544427),
    (2500.0, 34629.522720293056562, 27994.815102862137515),
    (4096.0, 47558.698080176140656, 45367.093431443603352),
    (10000.0, 70381.519174151524618, 106399.21476994973556),
    (30000.0, 79291.798639561257383, 279744.30272422727093),
    (50000.0, 79416.579724984296744, 411201.89872317793893),
    (100000.0, 79418.351958868485705, 617141.78904350606535),
    (1000000.0, 79418.352, 823760.98808799309199),
];

/// (nB, nT_b, nGM, cycles)
pub const GM_PENALTY: [(u64, u64, f64, f64); 10] = [
    (13, 256, 1000.0, 23.462537225599741904),
    (13, 256, 1.0, 0.13546747476583709836),
    (26, 256, 2000.0, 56.243229654735109366),
    (78, 1024, 57.0, 143.0629409894635512),
    (1, 32, 10.0, 0.012432577223310225592),
    (100, 128, 5000.0, 150.5206689542709357),
    (1024, 1024, 300.0, 5047.3210979407389808),
    (13, 512, 12345.0, 138.9108234041140776),
    (7, 96, 3.0, 0.081200503353391822452),
    (500, 256, 100000.0, 20146.476985932106802),
];

/// (nB, nT_b, nShM, cycles)
pub const SM_PENALTY: [(u64, u64, f64, f64); 10] = [
    (13, 256, 500.0, 2.818557229472545723),
    (13, 256, 1.0, 2.808853914805888329),
    (26, 256, 2000.0, 5.6957195026028971247),
    (78, 1024, 57.0, 67.438602078915064413),
    (1, 32, 10.0, 0.027009891606276246027),
    (100, 128, 5000.0, 11.181035040851587612),
    (1024, 1024, 300.0, 886.83612889168317334),
    (13, 512, 12345.0, 6.1108643400489321735),
    (7, 96, 3.0, 0.56718026911775450359),
    (500, 256, 100000.0, 199.43054458794174869),
];

/// (nB, nT_b, nGM, waves, cycles)
pub const CM_PENALTY: [(u64, u64, f64, u64, f64); 10] = [
    (13, 256, 100.0, 1, 319.0239),
    (13, 256, 100.0, 2, 159.51195),
    (26, 256, 2000.0, 1, 11517.8245),
    (78, 1024, 57.0, 3, 1487.60616888),
    (1, 32, 10.0, 1, 0.2157275),
    (100, 128, 5000.0, 1, 61110.15625),
    (1024, 1024, 300.0, 64, 7129.2226944),
    (13, 512, 12345.0, 1, 71093.77172625),
    (7, 96, 3.0, 1, 1.47043575),
    (500, 256, 100000.0, 8, 1607867.1875),
];

/// Random DAG in index order. Edges only go from lower to higher index.
pub fn random_dag(rng: &mut impl Rng, max_nodes: usize) -> Vec<DagNode<f64>> {
    let n = rng.random_range(1..=max_nodes);
    let units = [Resource::SP, Resource::LSU];
    let two = rng.random_bool(0.7);
    (0..n)
        .map(|i| {
            let preds = (0..i).filter(|_| rng.random_bool(0.3)).collect();
            DagNode {
                resource: units[if two { rng.random_range(0..2) } else { 0 }],
                duration: f64::from(rng.random_range(1..=12u32)),
                preds,
            }
        })
        .collect()
}

/// Earliest-start search on an explicit cycle bitmap: in min-index
/// topological order, each node takes the first cycle at or after its
/// ready time where its unit is idle for `duration + gap` cycles.
pub fn brute_force_schedule(nodes: &[DagNode<f64>], gap: impl Fn(Resource) -> u64) -> (Vec<u64>, u64) {
    let n = nodes.len();
    let mut indeg: Vec<usize> = nodes.iter().map(|v| v.preds.len()).collect();
    let mut done = vec![false; n];
    let mut busy: std::collections::BTreeMap<Resource, Vec<bool>> = Default::default();
    let mut start = vec![0u64; n];
    let mut finish = vec![0u64; n];
    for _ in 0..n {
        let v = (0..n).find(|&i| !done[i] && indeg[i] == 0).expect("acyclic");
        done[v] = true;
        for (w, node) in nodes.iter().enumerate() {
            indeg[w] -= node.preds.iter().filter(|&&p| p == v).count();
        }
        let d = nodes[v].duration as u64;
        let len = d + gap(nodes[v].resource);
        let ready = nodes[v].preds.iter().map(|&p| finish[p]).max().unwrap_or(0);
        let bits = busy.entry(nodes[v].resource).or_default();
        let mut t = ready;
        loop {
            let end = (t + len) as usize;
            if bits.len() < end {
                bits.resize(end, false);
            }
            if bits[t as usize..end].iter().all(|b| !b) {
                bits[t as usize..end].iter_mut().for_each(|b| *b = true);
                break;
            }
            t += 1;
        }
        start[v] = t;
        finish[v] = t + d;
    }
    (start, finish.into_iter().max().unwrap_or(0))
}

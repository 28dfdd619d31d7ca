//! Report rendering. JSON is the stable machine format; text is for people.

use std::fmt::Write as _;

use gpukalc::Report;

pub const CSV_HEADER: [&str; 14] = [
    "profile",
    "kernel",
    "n_blocks",
    "threads_per_block",
    "waves",
    "d_kernel_cycles",
    "d_total_cycles",
    "launch_overhead_us",
    "gm_penalty",
    "sm_penalty",
    "cm_penalty",
    "t_kernel_us",
    "power_w",
    "energy_uj",
];

pub fn json(reports: &[&Report]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

pub fn csv(reports: &[&Report]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("writing to memory");
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in reports {
        let p = &r.penalties;
        w.write_record([
            r.profile.clone(),
            r.kernel.clone(),
            r.n_blocks.to_string(),
            r.threads_per_block.to_string(),
            r.waves.to_string(),
            r.d_kernel_cycles.to_string(),
            r.d_total_cycles.to_string(),
            p.launch_overhead_us.to_string(),
            p.gm_penalty.to_string(),
            p.sm_penalty.to_string(),
            p.cm_penalty.to_string(),
            r.t_kernel_us.to_string(),
            opt(r.power_w),
            opt(r.energy_uj),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

pub fn text(reports: &[&Report]) -> String {
    let mut s = String::new();
    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let p = &r.penalties;
        let _ = writeln!(s, "{} on {}: {} blocks x {} threads", r.kernel, r.profile, r.n_blocks, r.threads_per_block);
        let _ = writeln!(s, "  waves            {}", r.waves);
        let _ = writeln!(s, "  d_kernel         {:.2} cycles", r.d_kernel_cycles);
        let _ = writeln!(s, "  launch overhead  {:.4} us ({:.2} cycles)", p.launch_overhead_us, p.launch_overhead_cycles);
        let _ = writeln!(s, "  gm penalty       {:.2} cycles", p.gm_penalty);
        let _ = writeln!(s, "  sm penalty       {:.2} cycles", p.sm_penalty);
        let _ = writeln!(s, "  cm penalty       {:.2} cycles", p.cm_penalty);
        let _ = writeln!(s, "  d_total          {:.2} cycles", r.d_total_cycles);
        let _ = writeln!(s, "  time             {:.4} us", r.t_kernel_us);
        match (r.power_w, r.energy_uj) {
            (Some(w), Some(e)) => {
                let _ = writeln!(s, "  power            {w:.3} W");
                let _ = writeln!(s, "  energy           {e:.3} uJ");
            }
            _ => {
                let _ = writeln!(s, "  power            (no model)");
            }
        }
        if p.throughput_clamped {
            let _ = writeln!(s, "  note: a throughput model hit the profile floor");
        }
        if !r.importances.is_empty() {
            let _ = writeln!(s, "  top features");
            for imp in &r.importances {
                let _ = writeln!(s, "    {:>2}. {:<24} {:.1}%", imp.rank, imp.feature, imp.share * 100.0);
            }
        }
    }
    s
}
